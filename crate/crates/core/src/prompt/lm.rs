//! A small frozen decoder standing in for a real language model.
//!
//! Two pre-norm blocks of single-head causal attention and a tanh MLP over
//! sinusoidal positions, RMS-normalized, then a linear unembedding. Weights
//! are fixed at construction; only gradients with respect to the input rows
//! are ever computed.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PromptError;
use crate::ir::opcode::Opcode;
use crate::rng::stream;
use crate::store::{write_atomic, Reader, StoreError, Writer};

pub const LM_MAGIC: &[u8; 8] = b"IRLMSTB\0";
pub const LM_VERSION: u32 = 1;

const RMS_EPS: f64 = 1e-6;
const BYTE_BASE: u32 = 2;

/// Whitespace word tokenizer with a byte fallback. Ids 0 and 1 are `<bos>` and
/// `<eos>`, 2..258 the bytes `<0x00>`..`<0xFF>`, then whole words.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
}

impl Tokenizer {
    pub const BOS: u32 = 0;
    pub const EOS: u32 = 1;

    pub fn new(words: &[String]) -> Self {
        let mut vocab = vec!["<bos>".to_string(), "<eos>".to_string()];
        vocab.extend((0..=255u8).map(|b| format!("<0x{b:02X}>")));
        for w in words {
            if !vocab.contains(w) {
                vocab.push(w.clone());
            }
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Tokenizer { vocab, index }
    }

    /// Opcode mnemonics plus a few answer words.
    pub fn default_words() -> Vec<String> {
        let mut w: Vec<String> = Opcode::ALL.iter().map(|o| o.mnemonic().to_string()).collect();
        for x in [
            "yes", "no", "loop", "safe", "unsafe", "cpu", "gpu", "does", "this", "function", "contain", "a",
            "is", "the", "?",
        ] {
            w.push(x.to_string());
        }
        w
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.vocab[BYTE_BASE as usize + 256..]
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            match self.index.get(word) {
                Some(&id) if id >= BYTE_BASE + 256 => out.push(id),
                _ => out.extend(word.bytes().map(|b| BYTE_BASE + b as u32)),
            }
        }
        out
    }

    /// Words joined by spaces; runs of byte tokens form one word.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut words = Vec::new();
        let mut bytes = Vec::new();
        for &id in ids {
            if (BYTE_BASE..BYTE_BASE + 256).contains(&id) {
                bytes.push((id - BYTE_BASE) as u8);
                continue;
            }
            if !bytes.is_empty() {
                words.push(String::from_utf8_lossy(&bytes).into_owned());
                bytes.clear();
            }
            if let Some(w) = self.vocab.get(id as usize) {
                words.push(w.clone());
            }
        }
        if !bytes.is_empty() {
            words.push(String::from_utf8_lossy(&bytes).into_owned());
        }
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub context: usize,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            dim: 256,
            hidden: 512,
            layers: 2,
            context: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    wq: Array2<f64>,
    wk: Array2<f64>,
    wv: Array2<f64>,
    wo: Array2<f64>,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenLm {
    pub config: LmConfig,
    pub tokenizer: Tokenizer,
    embed: Array2<f64>,
    blocks: Vec<Block>,
    unembed: Array2<f64>,
}

struct BlockTrace {
    a: Array2<f64>,
    r1: Array1<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    p: Array2<f64>,
    m: Array2<f64>,
    r2: Array1<f64>,
    u: Array2<f64>,
}

/// Activations of one forward pass, kept for the input-gradient pass.
pub struct LmTrace {
    blocks: Vec<BlockTrace>,
    f: Array2<f64>,
    rf: Array1<f64>,
    pub logits: Array2<f64>,
}

fn uniform(seed: u64, name: &str, rows: usize, cols: usize, a: f64) -> Array2<f64> {
    let mut rng = stream(seed, name);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

fn glorot(seed: u64, name: &str, rows: usize, cols: usize) -> Array2<f64> {
    uniform(seed, name, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
}

fn rms(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let r = x.map_axis(Axis(1), |row| (row.dot(&row) / row.len() as f64 + RMS_EPS).sqrt());
    let y = x / &r.view().insert_axis(Axis(1));
    (y, r)
}

/// Gradient through `y = x / rms(x)`: `dx = (dy - y * mean(dy * y)) / r`.
fn rms_back(dy: &Array2<f64>, y: &Array2<f64>, r: &Array1<f64>) -> Array2<f64> {
    let n = y.ncols() as f64;
    let mut dx = dy.clone();
    for ((mut d, yr), &ri) in dx.rows_mut().into_iter().zip(y.rows()).zip(r) {
        let c = d.dot(&yr) / n;
        d.zip_mut_with(&yr, |g, &yv| *g = (*g - yv * c) / ri);
    }
    dx
}

pub fn positions(n: usize, dim: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, dim), |(p, j)| {
        let freq = 10000f64.powf(-((j / 2 * 2) as f64) / dim as f64);
        let t = p as f64 * freq;
        if j % 2 == 0 {
            t.sin()
        } else {
            t.cos()
        }
    })
}

impl FrozenLm {
    pub fn new(config: LmConfig, tokenizer: Tokenizer) -> Self {
        let (e, hd, seed) = (config.dim, config.hidden, config.seed);
        let blocks = (0..config.layers)
            .map(|l| Block {
                wq: glorot(seed, &format!("b{l}.wq"), e, e),
                wk: glorot(seed, &format!("b{l}.wk"), e, e),
                wv: glorot(seed, &format!("b{l}.wv"), e, e),
                wo: glorot(seed, &format!("b{l}.wo"), e, e),
                w1: glorot(seed, &format!("b{l}.w1"), e, hd),
                b1: Array1::zeros(hd),
                w2: glorot(seed, &format!("b{l}.w2"), hd, e),
                b2: Array1::zeros(e),
            })
            .collect();
        FrozenLm {
            embed: uniform(seed, "embed", tokenizer.len(), e, 1.0),
            unembed: glorot(seed, "unembed", e, tokenizer.len()),
            config,
            tokenizer,
            blocks,
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.tokenizer.len()
    }

    /// Embedding rows for token ids.
    pub fn embed_tokens(&self, ids: &[u32]) -> Result<Array2<f64>, PromptError> {
        let mut out = Array2::zeros((ids.len(), self.dim()));
        for (mut row, &id) in out.rows_mut().into_iter().zip(ids) {
            if id as usize >= self.vocab_size() {
                return Err(PromptError::UnknownToken(id));
            }
            row.assign(&self.embed.row(id as usize));
        }
        Ok(out)
    }

    pub fn forward(&self, rows: &Array2<f64>) -> Result<LmTrace, PromptError> {
        let (n, e) = rows.dim();
        if e != self.dim() {
            return Err(PromptError::DimensionMismatch {
                expected: self.dim(),
                found: e,
            });
        }
        if n > self.config.context {
            return Err(PromptError::ContextOverflow {
                rows: n,
                context: self.config.context,
            });
        }
        let scale = 1.0 / (e as f64).sqrt();
        let mut h = rows + &positions(n, e);
        let mut traces = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (a, r1) = rms(&h);
            let q = a.dot(&b.wq);
            let k = a.dot(&b.wk);
            let v = a.dot(&b.wv);
            let mut p = q.dot(&k.t()) * scale;
            for (i, mut row) in p.rows_mut().into_iter().enumerate() {
                let mx = row.slice(s![..=i]).fold(f64::NEG_INFINITY, |x, &y| x.max(y));
                let mut sum = 0.0;
                for (j, x) in row.iter_mut().enumerate() {
                    *x = if j <= i { (*x - mx).exp() } else { 0.0 };
                    sum += *x;
                }
                row /= sum;
            }
            h = h + p.dot(&v).dot(&b.wo);
            let (m, r2) = rms(&h);
            let u = (m.dot(&b.w1) + &b.b1).mapv(f64::tanh);
            h = h + u.dot(&b.w2) + &b.b2;
            traces.push(BlockTrace {
                a,
                r1,
                q,
                k,
                v,
                p,
                m,
                r2,
                u,
            });
        }
        let (f, rf) = rms(&h);
        let logits = f.dot(&self.unembed);
        Ok(LmTrace {
            blocks: traces,
            f,
            rf,
            logits,
        })
    }

    /// Gradient of a loss with respect to the input rows, given its gradient
    /// with respect to the logits.
    pub fn input_gradient(&self, t: &LmTrace, dlogits: &Array2<f64>) -> Array2<f64> {
        let scale = 1.0 / (self.dim() as f64).sqrt();
        let mut dh = rms_back(&dlogits.dot(&self.unembed.t()), &t.f, &t.rf);
        for (b, c) in self.blocks.iter().zip(&t.blocks).rev() {
            let du = dh.dot(&b.w2.t());
            let dz = du * c.u.mapv(|u| 1.0 - u * u);
            dh += &rms_back(&dz.dot(&b.w1.t()), &c.m, &c.r2);

            let d_o = dh.dot(&b.wo.t());
            let dp = d_o.dot(&c.v.t());
            let dv = c.p.t().dot(&d_o);
            let mut ds = dp;
            for (mut row, prow) in ds.rows_mut().into_iter().zip(c.p.rows()) {
                let dot = row.dot(&prow);
                row.zip_mut_with(&prow, |g, &pv| *g = pv * (*g - dot));
            }
            let dq = ds.dot(&c.k) * scale;
            let dk = ds.t().dot(&c.q) * scale;
            let da = dq.dot(&b.wq.t()) + dk.dot(&b.wk.t()) + dv.dot(&b.wv.t());
            dh += &rms_back(&da, &c.a, &c.r1);
        }
        dh
    }

    fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut v = vec![&self.embed];
        for b in &self.blocks {
            v.extend([&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2]);
        }
        v.push(&self.unembed);
        v
    }

    fn biases(&self) -> Vec<&Array1<f64>> {
        self.blocks.iter().flat_map(|b| [&b.b1, &b.b2]).collect()
    }

    /// SHA-256 of the checkpoint encoding.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(encode_lm(self)).into()
    }
}

#[derive(Serialize, Deserialize)]
struct LmHeader {
    config: LmConfig,
    words: Vec<String>,
}

pub fn encode_lm(lm: &FrozenLm) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(LM_MAGIC);
    w.u32(LM_VERSION);
    let header = LmHeader {
        config: lm.config,
        words: lm.tokenizer.words().to_vec(),
    };
    w.blob(
        serde_json::to_string(&header)
            .expect("header serializes")
            .as_bytes(),
        "lm header",
    )
    .expect("lm header fits");
    for t in lm.tensors() {
        t.iter().for_each(|&x| w.f64(x));
    }
    for b in lm.biases() {
        b.iter().for_each(|&x| w.f64(x));
    }
    w.buf
}

pub fn decode_lm(data: &[u8]) -> Result<FrozenLm, StoreError> {
    let mut r = Reader::new(data);
    if r.header(LM_MAGIC)? != LM_VERSION {
        return Err(StoreError::Format("unsupported version".into()));
    }
    let h: LmHeader =
        serde_json::from_slice(r.blob()?).map_err(|e| StoreError::Format(format!("bad lm header: {e}")))?;
    let c = h.config;
    if c.dim == 0 || c.hidden == 0 || c.layers > 64 || c.dim.saturating_mul(c.hidden) > 1 << 28 {
        return Err(StoreError::Format("implausible lm dims".into()));
    }
    // Shapes come from the header; the values are overwritten below.
    let mut lm = FrozenLm {
        config: c,
        tokenizer: Tokenizer::new(&h.words),
        embed: Array2::zeros((0, 0)),
        blocks: Vec::new(),
        unembed: Array2::zeros((0, 0)),
    };
    let v = lm.tokenizer.len();
    let mut read = |rows: usize, cols: usize| -> Result<Array2<f64>, StoreError> {
        let mut m = Array2::zeros((rows, cols));
        for x in m.iter_mut() {
            *x = r.f64()?;
        }
        Ok(m)
    };
    lm.embed = read(v, c.dim)?;
    let mut mats = Vec::new();
    for _ in 0..c.layers {
        mats.push([
            read(c.dim, c.dim)?,
            read(c.dim, c.dim)?,
            read(c.dim, c.dim)?,
            read(c.dim, c.dim)?,
            read(c.dim, c.hidden)?,
            read(c.hidden, c.dim)?,
        ]);
    }
    lm.unembed = read(c.dim, v)?;
    for [wq, wk, wv, wo, w1, w2] in mats {
        let b1 = read(1, c.hidden)?.row(0).to_owned();
        let b2 = read(1, c.dim)?.row(0).to_owned();
        lm.blocks.push(Block {
            wq,
            wk,
            wv,
            wo,
            w1,
            b1,
            w2,
            b2,
        });
    }
    r.finish()?;
    Ok(lm)
}

pub fn save_lm(lm: &FrozenLm, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, &encode_lm(lm))
}

pub fn load_lm(path: &Path) -> Result<FrozenLm, StoreError> {
    let data = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_lm(&data)
}
