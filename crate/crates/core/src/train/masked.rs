use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adamw_step, AdamState, TrainConfig, TrainError};
use crate::gnn::{Forward, GnnError, GnnParams, Seeds};
use crate::graph::{HeteroGraph, NodeKind};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub target_kind: NodeKind,
    /// Sorted, distinct node ids of `target_kind`.
    pub masked_ids: Vec<u32>,
    pub mask_rate: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    /// Masked kind per batch member, comma-separated.
    pub masked_kind: String,
}

/// Kinds with at least one node, Module excluded.
pub fn maskable_kinds(g: &HeteroGraph) -> Vec<NodeKind> {
    NodeKind::ALL
        .into_iter()
        .filter(|&k| k != NodeKind::Module && g.count(k) > 0)
        .collect()
}

/// Masks `max(1, round(rate * n))` nodes of `kind`, sampled without replacement.
pub fn mask_for_kind(
    g: &HeteroGraph,
    kind: NodeKind,
    rate: f64,
    rng_seed: u64,
) -> Result<MaskPlan, TrainError> {
    let n = g.count(kind);
    if n == 0 || kind == NodeKind::Module {
        return Err(TrainError::EmptyGraph);
    }
    let k = ((rate * n as f64).round() as usize).clamp(1, n);
    let mut rng = stream(rng_seed, "mask");
    let mut ids: Vec<u32> = rand::seq::index::sample(&mut rng, n, k)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    ids.sort_unstable();
    Ok(MaskPlan {
        target_kind: kind,
        masked_ids: ids,
        mask_rate: rate,
        rng_seed,
    })
}

/// Picks a maskable kind uniformly, then a node subset of it.
pub fn sample_mask(g: &HeteroGraph, rate: f64, rng: &mut impl RngCore) -> Result<MaskPlan, TrainError> {
    let kinds = maskable_kinds(g);
    if kinds.is_empty() {
        return Err(TrainError::EmptyGraph);
    }
    let seed = rng.next_u64();
    let kind = kinds[rng.gen_range(0..kinds.len())];
    mask_for_kind(g, kind, rate, seed)
}

/// Categorical labels (argmax of the target segment) or the multi-hot target
/// for Attributes, taken from the stored, unmasked features.
fn targets(g: &HeteroGraph, plan: &MaskPlan) -> Array2<f64> {
    let width = g.feature_spec.target_width(plan.target_kind);
    let feats = g.features(plan.target_kind);
    let mut t = Array2::zeros((plan.masked_ids.len(), width));
    for (r, &id) in plan.masked_ids.iter().enumerate() {
        let row = feats.row(id as usize);
        let seg = row.slice(ndarray::s![..width]);
        if plan.target_kind == NodeKind::Attributes {
            t.row_mut(r).assign(&seg.mapv(f64::from));
        } else {
            let mut best = 0;
            for j in 1..width {
                if seg[j] > seg[best] {
                    best = j;
                }
            }
            t[[r, best]] = 1.0;
        }
    }
    t
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss and d loss / d logits for the head outputs of the masked nodes.
fn head_loss(kind: NodeKind, logits: &Array2<f64>, t: &Array2<f64>) -> (f64, Array2<f64>) {
    let k = logits.nrows() as f64;
    let mut d = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    if kind == NodeKind::Attributes {
        let w = logits.ncols() as f64;
        for ((z, y), g) in logits.iter().zip(t).zip(d.iter_mut()) {
            loss += softplus(*z) - y * z;
            *g = (sigmoid(*z) - y) / (w * k);
        }
        return (loss / (w * k), d);
    }
    for ((z, y), mut g) in logits.rows().into_iter().zip(t.rows()).zip(d.rows_mut()) {
        let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let e = z.mapv(|v| (v - m).exp());
        let s = e.sum();
        loss += m + s.ln() - z.dot(&y);
        g.assign(&((&e / s - y) / k));
    }
    (loss / k, d)
}

fn check_plan(g: &HeteroGraph, plan: &MaskPlan) -> Result<(), GnnError> {
    let n = g.count(plan.target_kind);
    if plan.target_kind == NodeKind::Module
        || plan.masked_ids.is_empty()
        || plan.masked_ids.iter().any(|&i| i as usize >= n)
    {
        return Err(GnnError::ShapeMismatch(format!(
            "mask plan does not fit graph ({} {} nodes)",
            n, plan.target_kind
        )));
    }
    Ok(())
}

pub fn masked_loss(g: &HeteroGraph, p: &GnnParams, plan: &MaskPlan) -> Result<f64, GnnError> {
    check_plan(g, plan)?;
    let f = Forward::run(g, p, Some((plan.target_kind, &plan.masked_ids)))?;
    let (loss, _) = head_forward(&f, p, g, plan);
    finite(loss, g)
}

fn head_forward(f: &Forward, p: &GnnParams, g: &HeteroGraph, plan: &MaskPlan) -> (f64, Array2<f64>) {
    let kind = plan.target_kind;
    let idx: Vec<usize> = plan.masked_ids.iter().map(|&i| i as usize).collect();
    let hm = f.h2(kind).select(Axis(0), &idx);
    let head = &p.heads[kind.index()];
    let logits = head.apply(&hm);
    let (loss, dlogits) = head_loss(kind, &logits, &targets(g, plan));
    (loss, dlogits)
}

fn finite(loss: f64, g: &HeteroGraph) -> Result<f64, GnnError> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(GnnError::NonFiniteLoss(Some(g.provenance.source.clone())))
    }
}

pub fn masked_loss_and_grad(
    g: &HeteroGraph,
    p: &GnnParams,
    plan: &MaskPlan,
) -> Result<(f64, GnnParams), GnnError> {
    check_plan(g, plan)?;
    let kind = plan.target_kind;
    let f = Forward::run(g, p, Some((kind, &plan.masked_ids)))?;
    let (loss, dlogits) = head_forward(&f, p, g, plan);
    finite(loss, g)?;
    let idx: Vec<usize> = plan.masked_ids.iter().map(|&i| i as usize).collect();
    let hm = f.h2(kind).select(Axis(0), &idx);
    let head = &p.heads[kind.index()];

    let mut dh2: Vec<Array2<f64>> = f.h[2].iter().map(|m| Array2::zeros(m.raw_dim())).collect();
    let dhm = dlogits.dot(&head.w.t());
    for (r, &i) in idx.iter().enumerate() {
        let mut row = dh2[kind.index()].row_mut(i);
        row += &dhm.row(r);
    }
    let mut grads = f.backward(
        p,
        &Seeds {
            h2: Some(dh2),
            ..Default::default()
        },
    );
    let gh = &mut grads.heads[kind.index()];
    gh.w += &hm.t().dot(&dlogits);
    gh.b += &dlogits.sum_axis(Axis(0));
    if !grads.is_finite() {
        return Err(GnnError::NonFiniteLoss(Some(g.provenance.source.clone())));
    }
    Ok((loss, grads))
}

/// Mean masked loss over fixed plans: one per graph and maskable kind, each
/// drawn from a stream keyed by `seed`, the graph index and the kind.
pub fn eval_masked_loss(
    corpus: &[HeteroGraph],
    p: &GnnParams,
    seed: u64,
    rate: f64,
) -> Result<f64, TrainError> {
    let jobs: Vec<(usize, NodeKind)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(i, g)| maskable_kinds(g).into_iter().map(move |k| (i, k)))
        .collect();
    if jobs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let losses: Vec<Result<f64, TrainError>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let plan_seed = stream(seed, &format!("eval/{i}/{k}")).next_u64();
            let plan = mask_for_kind(&corpus[i], k, rate, plan_seed)?;
            Ok(masked_loss(&corpus[i], p, &plan)?)
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / jobs.len() as f64)
}

/// Trains `p` in place on `corpus`. Each step takes one batch, draws one mask
/// plan per member, averages loss and gradients in batch order and applies
/// one AdamW update. Graphs without maskable nodes are skipped.
pub fn pretrain(
    corpus: &[HeteroGraph],
    p: &mut GnnParams,
    cfg: &TrainConfig,
) -> Result<Vec<StepLog>, TrainError> {
    cfg.check()?;
    let usable: Vec<&HeteroGraph> = corpus
        .iter()
        .filter(|g| {
            let ok = !maskable_kinds(g).is_empty();
            if !ok {
                log::warn!("skipping {}: no maskable nodes", g.provenance.source);
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    for g in &usable {
        let rels: Vec<_> = g.relations().collect();
        p.ensure_relations(&rels);
    }
    let per_epoch = usable.len().div_ceil(cfg.batch_size);
    let total = cfg.steps.unwrap_or(cfg.epochs * per_epoch);
    let opt = cfg.adamw();
    let mut state = AdamState::default();
    let mut log = Vec::with_capacity(total);
    let mut order: Vec<usize> = Vec::new();

    for step in 0..total {
        let epoch = step / per_epoch;
        let slot = step % per_epoch;
        if slot == 0 {
            order = (0..usable.len()).collect();
            order.shuffle(&mut stream(cfg.seed, &format!("shuffle/{epoch}")));
        }
        let batch = &order[slot * cfg.batch_size..((slot + 1) * cfg.batch_size).min(order.len())];
        let results: Vec<Result<(f64, GnnParams, NodeKind), TrainError>> = batch
            .par_iter()
            .enumerate()
            .map(|(j, &gi)| {
                let g = usable[gi];
                let mut rng = stream(cfg.seed, &format!("step/{step}/{j}"));
                let plan = sample_mask(g, cfg.mask_rate, &mut rng)?;
                let (l, gr) = masked_loss_and_grad(g, p, &plan)?;
                Ok((l, gr, plan.target_kind))
            })
            .collect();
        let mut loss = 0.0;
        let mut grads = p.zeros_like();
        let mut kinds = Vec::new();
        for r in results {
            let (l, gr, k) = r?;
            loss += l;
            grads.add_scaled(&gr, 1.0);
            kinds.push(k.name());
        }
        let b = batch.len() as f64;
        grads.scale(1.0 / b);
        adamw_step(p, &grads, &mut state, &opt);
        log.push(StepLog {
            step,
            loss: loss / b,
            masked_kind: kinds.join(","),
        });
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::GnnDims;
    use crate::graph::{build_graph, FeatureSpec};
    use crate::ir::parse_module;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SRC: &str = "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %s = add i32 %a, %b\n  %c = icmp sgt i32 %s, 7\n  br i1 %c, label %x, label %y\nx:\n  ret i32 %s\ny:\n  ret i32 0\n}\n";

    fn graph() -> HeteroGraph {
        build_graph(&parse_module(SRC).unwrap(), &FeatureSpec::default()).unwrap()
    }

    fn dims() -> GnnDims {
        GnnDims {
            h1: 6,
            h2: 5,
            embed: 4,
        }
    }

    fn value_only() -> HeteroGraph {
        let spec = FeatureSpec::default();
        let mut g = HeteroGraph::empty(spec.clone(), Default::default());
        g.push_node(NodeKind::Module, &[1.0]);
        for _ in 0..4 {
            g.push_node(NodeKind::Value, &vec![0.0; spec.width(NodeKind::Value)]);
        }
        g
    }

    #[test]
    fn single_eligible_kind_is_always_chosen() {
        let g = value_only();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(
                sample_mask(&g, 0.5, &mut rng).unwrap().target_kind,
                NodeKind::Value
            );
        }
    }

    #[test]
    fn full_rate_masks_everything_and_counts_round() {
        let g = value_only();
        let p = mask_for_kind(&g, NodeKind::Value, 1.0, 3).unwrap();
        assert_eq!(p.masked_ids, vec![0, 1, 2, 3]);
        // round(0.15 * 4) = 1, round(0.4 * 4) = 2 (1.6), round(0.3 * 4) = 1 (1.2)
        assert_eq!(
            mask_for_kind(&g, NodeKind::Value, 0.15, 3)
                .unwrap()
                .masked_ids
                .len(),
            1
        );
        assert_eq!(
            mask_for_kind(&g, NodeKind::Value, 0.4, 3)
                .unwrap()
                .masked_ids
                .len(),
            2
        );
        assert_eq!(
            mask_for_kind(&g, NodeKind::Value, 0.3, 3)
                .unwrap()
                .masked_ids
                .len(),
            1
        );
    }

    #[test]
    fn module_only_graph_is_empty() {
        let mut g = HeteroGraph::empty(FeatureSpec::default(), Default::default());
        g.push_node(NodeKind::Module, &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_mask(&g, 0.5, &mut rng), Err(TrainError::EmptyGraph));
    }

    #[test]
    fn plans_are_deterministic() {
        let g = graph();
        let a = sample_mask(&g, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_mask(&g, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_params_give_uniform_loss_and_closed_form_bias_gradient() {
        let g = graph();
        let p = GnnParams::zeroed(&g.feature_spec, dims());
        let plan = mask_for_kind(&g, NodeKind::Instruction, 1.0, 0).unwrap();
        let (loss, grads) = masked_loss_and_grad(&g, &p, &plan).unwrap();
        let v = 68.0f64;
        assert!((loss - v.ln()).abs() < 1e-12);
        // d/db = softmax(0) - mean one-hot; ret=0, br=1, add=12, icmp=52.
        let b = &grads.heads[NodeKind::Instruction.index()].b;
        let mut want = Array1::from_elem(68, 1.0 / v);
        for (op, n) in [(0usize, 2.0), (1, 1.0), (12, 1.0), (52, 1.0)] {
            want[op] -= n / 5.0;
        }
        for (a, w) in b.iter().zip(&want) {
            assert!((a - w).abs() < 1e-15, "{a} vs {w}");
        }
    }

    #[test]
    fn two_node_loss_matches_hand_computation() {
        // logits [[1, 0, -1], [0.5, 0.5, 2]] with labels 0 and 2.
        let z = ndarray::array![[1.0, 0.0, -1.0], [0.5, 0.5, 2.0]];
        let t = ndarray::array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let (loss, _) = head_loss(NodeKind::Value, &z, &t);
        let ce0 = -(1f64.exp() / (1f64.exp() + 1.0 + (-1f64).exp())).ln();
        let ce1 = -(2f64.exp() / (2.0 * 0.5f64.exp() + 2f64.exp())).ln();
        assert!((loss - (ce0 + ce1) / 2.0).abs() < 1e-14);
        // BCE at zero logits is ln 2 per slot.
        let (bce, _) = head_loss(NodeKind::Attributes, &Array2::zeros((2, 3)), &t);
        assert!((bce - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits_drive_loss_to_zero() {
        let z = ndarray::array![[60.0, -60.0, -60.0]];
        let t = ndarray::array![[1.0, 0.0, 0.0]];
        assert!(head_loss(NodeKind::Size, &z, &t).0 < 1e-20);
        assert!(head_loss(NodeKind::Attributes, &z, &t).0 < 1e-20);
    }

    #[test]
    fn masking_leaves_stored_graph_unchanged() {
        let g = graph();
        let before = g.clone();
        let p = GnnParams::init(&g.feature_spec, dims(), 1);
        let plan = mask_for_kind(&g, NodeKind::Value, 0.5, 2).unwrap();
        let f = Forward::run(&g, &p, Some((plan.target_kind, &plan.masked_ids))).unwrap();
        assert_eq!(g, before);
        for k in NodeKind::ALL {
            for (i, row) in f.x[k.index()].rows().into_iter().enumerate() {
                if k == plan.target_kind && plan.masked_ids.contains(&(i as u32)) {
                    continue;
                }
                let stored = g.feature_row(k, i as u32).mapv(f64::from);
                assert_eq!(row, stored);
            }
        }
    }

    #[test]
    fn pretrain_bookkeeping_and_determinism() {
        let g = graph();
        let cfg = TrainConfig {
            steps: Some(10),
            dims: dims(),
            seed: 5,
            ..Default::default()
        };
        let run = || {
            let mut p = GnnParams::init(&g.feature_spec, cfg.dims, cfg.seed);
            let log = pretrain(std::slice::from_ref(&g), &mut p, &cfg).unwrap();
            (p, log)
        };
        let (pa, la) = run();
        let (pb, lb) = run();
        assert_eq!(la.len(), 10);
        assert_eq!(la, lb);
        assert_eq!(pa, pb);
    }
}
