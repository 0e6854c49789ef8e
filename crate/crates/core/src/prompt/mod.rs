//! Soft prompts: a graph embedding and node embeddings placed between `<bos>`
//! and the text tokens of a frozen language model, trained by backpropagating
//! the model's next-token loss into the encoder only.

mod lm;

use std::ops::Range;
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use lm::{
    decode_lm, encode_lm, load_lm, positions, save_lm, FrozenLm, LmConfig, LmTrace, Tokenizer, LM_MAGIC,
    LM_VERSION,
};

use crate::gnn::{Forward, GnnError, GnnParams, Seeds};
use crate::graph::{HeteroGraph, NodeKind};
use crate::rng::stream;
use crate::store::{write_atomic, Reader, StoreError, Writer};
use crate::train::{adamw_step, AdamState, AdamWConfig, StepLog};

pub const PREFIX_MAGIC: &[u8; 8] = b"IRPREFIX";
pub const PREFIX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("prompt of {rows} rows exceeds the context of {context}")]
    ContextOverflow { rows: usize, context: usize },
    #[error("token id {0} outside the vocabulary")]
    UnknownToken(u32),
    #[error("empty target sequence")]
    EmptyTarget,
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

/// Row offsets of each prompt segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segments {
    pub bos: usize,
    pub graph: usize,
    pub nodes: Range<usize>,
    pub tokens: Range<usize>,
    pub eos: usize,
}

impl Segments {
    pub fn new(nodes: usize, tokens: usize) -> Self {
        Segments {
            bos: 0,
            graph: 1,
            nodes: 2..2 + nodes,
            tokens: 2 + nodes..2 + nodes + tokens,
            eos: 2 + nodes + tokens,
        }
    }

    pub fn rows(&self) -> usize {
        self.eos + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSequence {
    pub rows: Array2<f64>,
    pub segments: Segments,
}

/// `[BOS, G, V_1..V_n, T_1..T_t, EOS]`.
pub fn assemble_prompt(
    graph: &Array1<f64>,
    nodes: &Array2<f64>,
    tokens: &Array2<f64>,
    lm: &FrozenLm,
) -> Result<PromptSequence, PromptError> {
    let e = lm.dim();
    for found in [graph.len(), nodes.ncols(), tokens.ncols()] {
        if found != e {
            return Err(PromptError::DimensionMismatch { expected: e, found });
        }
    }
    let segments = Segments::new(nodes.nrows(), tokens.nrows());
    if segments.rows() > lm.config.context {
        return Err(PromptError::ContextOverflow {
            rows: segments.rows(),
            context: lm.config.context,
        });
    }
    let special = lm.embed_tokens(&[Tokenizer::BOS, Tokenizer::EOS])?;
    let rows = concatenate(
        Axis(0),
        &[
            special.slice(ndarray::s![0..1, ..]),
            graph.view().insert_axis(Axis(0)),
            nodes.view(),
            tokens.view(),
            special.slice(ndarray::s![1..2, ..]),
        ],
    )
    .expect("widths checked");
    Ok(PromptSequence { rows, segments })
}

/// Projected node embeddings in canonical order (kind, then id), keeping at
/// most `cap` rows. Truncation drops from the end of that order.
pub fn node_rows(f: &Forward, p: &GnnParams, cap: Option<usize>) -> Array2<f64> {
    let per_kind = f.projected_nodes(p);
    let all =
        concatenate(Axis(0), &per_kind.iter().map(|m| m.view()).collect::<Vec<_>>()).expect("same width");
    match cap {
        Some(c) if c < all.nrows() => {
            log::warn!("prompt node cap {c} drops {} nodes", all.nrows() - c);
            all.slice(ndarray::s![..c, ..]).to_owned()
        }
        _ => all,
    }
}

/// Graph row followed by the node rows, as exported for external models.
pub fn prefix_rows(g: &HeteroGraph, p: &GnnParams, cap: Option<usize>) -> Result<Array2<f64>, PromptError> {
    let f = Forward::run(g, p, None)?;
    let nodes = node_rows(&f, p, cap);
    Ok(concatenate(Axis(0), &[f.graph.view().insert_axis(Axis(0)), nodes.view()]).expect("same width"))
}

/// `IRPREFIX`, u32 version, u32 rows, u32 width, then row-major f32 LE.
pub fn encode_prefix(rows: &Array2<f64>) -> Result<Vec<u8>, StoreError> {
    let mut w = Writer::new();
    w.bytes(PREFIX_MAGIC);
    w.u32(PREFIX_VERSION);
    w.len_u32(rows.nrows(), "prefix rows")?;
    w.len_u32(rows.ncols(), "prefix width")?;
    rows.iter().for_each(|&x| w.f32(x as f32));
    Ok(w.buf)
}

pub fn decode_prefix(data: &[u8]) -> Result<Array2<f32>, StoreError> {
    let mut r = Reader::new(data);
    if r.header(PREFIX_MAGIC)? != PREFIX_VERSION {
        return Err(StoreError::Format("unsupported version".into()));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n.saturating_mul(4) <= data.len())
        .ok_or_else(|| StoreError::Format("length mismatch".into()))?;
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(r.f32()?);
    }
    r.finish()?;
    Ok(Array2::from_shape_vec((rows, cols), v).expect("size checked"))
}

pub fn save_prefix(rows: &Array2<f64>, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, &encode_prefix(rows)?)
}

/// One question/answer example over a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSample {
    pub graph: HeteroGraph,
    pub tokens: Vec<u32>,
    pub targets: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Maximum node rows per prompt; `None` keeps every node.
    pub node_cap: Option<usize>,
    /// Also supervise the prediction of `<eos>` after the answer.
    pub supervise_eos: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        let a = AdamWConfig::default();
        FinetuneConfig {
            learning_rate: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            epochs: 1,
            seed: 0,
            node_cap: None,
            supervise_eos: true,
        }
    }
}

impl FinetuneConfig {
    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// Next-token cross-entropy over the answer positions (and `<eos>` when
/// `supervise_eos`), with gradients of every encoder parameter. The prompt's
/// text is `tokens ++ targets`; the row before each supervised row predicts it.
pub fn soft_prompt_loss_and_grad(
    g: &HeteroGraph,
    p: &GnnParams,
    lm: &FrozenLm,
    tokens: &[u32],
    targets: &[u32],
    node_cap: Option<usize>,
    supervise_eos: bool,
) -> Result<(f64, GnnParams), PromptError> {
    if targets.is_empty() {
        return Err(PromptError::EmptyTarget);
    }
    if p.dims.embed != lm.dim() {
        return Err(PromptError::DimensionMismatch {
            expected: lm.dim(),
            found: p.dims.embed,
        });
    }
    let f = Forward::run(g, p, None)?;
    let nodes = node_rows(&f, p, node_cap);
    let text: Vec<u32> = tokens.iter().chain(targets).copied().collect();
    let seq = assemble_prompt(&f.graph, &nodes, &lm.embed_tokens(&text)?, lm)?;
    let trace = lm.forward(&seq.rows)?;

    let first = seq.segments.tokens.start + tokens.len();
    let mut supervised: Vec<(usize, u32)> =
        targets.iter().enumerate().map(|(j, &t)| (first + j, t)).collect();
    if supervise_eos {
        supervised.push((seq.segments.eos, Tokenizer::EOS));
    }
    let k = supervised.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Array2::zeros(trace.logits.raw_dim());
    for &(row, label) in &supervised {
        let z = trace.logits.row(row - 1);
        let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let e = z.mapv(|v| (v - m).exp());
        let s = e.sum();
        loss += m + s.ln() - z[label as usize];
        let mut d = dlogits.row_mut(row - 1);
        d.assign(&(e / (s * k)));
        d[label as usize] -= 1.0 / k;
    }
    loss /= k;
    if !loss.is_finite() {
        return Err(GnnError::NonFiniteLoss(Some(g.provenance.source.clone())).into());
    }

    let dx = lm.input_gradient(&trace, &dlogits);
    let mut dnodes = Vec::with_capacity(6);
    let mut offset = seq.segments.nodes.start;
    let end = seq.segments.nodes.end;
    for k in NodeKind::ALL {
        let n = g.count(k);
        let mut m = Array2::zeros((n, lm.dim()));
        let take = n.min(end.saturating_sub(offset));
        if take > 0 {
            m.slice_mut(ndarray::s![..take, ..])
                .assign(&dx.slice(ndarray::s![offset..offset + take, ..]));
        }
        offset += take;
        dnodes.push(m);
    }
    let grads = f.backward(
        p,
        &Seeds {
            graph: Some(dx.row(seq.segments.graph).to_owned()),
            nodes: Some(dnodes),
            ..Default::default()
        },
    );
    Ok((loss, grads))
}

/// One AdamW step on the encoder. The language model is borrowed immutably
/// and never written.
pub fn finetune_step(
    p: &mut GnnParams,
    state: &mut AdamState,
    lm: &FrozenLm,
    sample: &PromptSample,
    cfg: &FinetuneConfig,
) -> Result<f64, PromptError> {
    let rels: Vec<_> = sample.graph.relations().collect();
    p.ensure_relations(&rels);
    let (loss, grads) = soft_prompt_loss_and_grad(
        &sample.graph,
        p,
        lm,
        &sample.tokens,
        &sample.targets,
        cfg.node_cap,
        cfg.supervise_eos,
    )?;
    adamw_step(p, &grads, state, &cfg.adamw());
    Ok(loss)
}

/// `epochs` passes over `samples` in a seeded order, one step per sample.
pub fn finetune(
    samples: &[PromptSample],
    p: &mut GnnParams,
    lm: &FrozenLm,
    cfg: &FinetuneConfig,
) -> Result<Vec<StepLog>, PromptError> {
    let mut state = AdamState::default();
    let mut log = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &format!("finetune/{epoch}")));
        for i in order {
            let loss = finetune_step(p, &mut state, lm, &samples[i], cfg)?;
            log.push(StepLog {
                step: log.len(),
                loss,
                masked_kind: String::new(),
            });
        }
    }
    Ok(log)
}
