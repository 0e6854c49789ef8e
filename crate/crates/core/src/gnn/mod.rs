//! Two-layer heterogeneous GCN encoder.
//!
//! Per layer and destination kind `d`:
//!
//! ```text
//! H'_d = ReLU( H_d S_d + b_d + sum_r [ mean_{s -> i in r} H_src(s) ] W_r + c_r )
//! ```
//!
//! where `r` ranges over the relations ending in `d` and the relation bias
//! `c_r` only applies to nodes with at least one incoming `r` edge. Inputs are
//! projected per kind (`X_K A_K`) before the first layer. The graph embedding
//! is `P` applied to the mean of all layer-2 node rows; node embeddings use the
//! same `P`.

mod checkpoint;
mod forward;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use checkpoint::{
    decode_params, encode_params, load_params, save_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use forward::{forward, Forward, GraphEmbedding, NodeEmbeddings, Seeds};

use crate::graph::{FeatureSpec, NodeKind, Relation};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss{}", .0.as_deref().map(|s| format!(" on {s}")).unwrap_or_default())]
    NonFiniteLoss(Option<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnDims {
    pub h1: usize,
    pub h2: usize,
    /// Width of graph/node embeddings, i.e. the language model's.
    pub embed: usize,
}

impl Default for GnnDims {
    fn default() -> Self {
        GnnDims {
            h1: 64,
            h2: 64,
            embed: 256,
        }
    }
}

/// Weight matrix and bias of a linear map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Self-loop transform per node kind.
    pub self_loop: Vec<Linear>,
    pub messages: BTreeMap<Relation, Linear>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub dims: GnnDims,
    /// Feature width per node kind.
    pub widths: [usize; 6],
    /// SHA-256 of the feature spec the input projections were sized for.
    pub spec_digest: [u8; 32],
    pub seed: u64,
    /// Input projection per node kind, `width x h1`.
    pub input: Vec<Array2<f64>>,
    pub layers: Vec<Layer>,
    /// Pooling projection, `h2 x embed`.
    pub pool: Array2<f64>,
    /// Learned mask vector per kind (empty for Module).
    pub mask: Vec<Array1<f64>>,
    /// Masked-node prediction head per kind (empty for Module).
    pub heads: Vec<Linear>,
    /// Classification head over the graph embedding.
    pub classifier: Option<Linear>,
}

pub fn spec_digest(spec: &FeatureSpec) -> [u8; 32] {
    Sha256::digest(serde_json::to_string(spec).expect("spec serializes").as_bytes()).into()
}

/// Glorot-uniform matrix drawn from the stream named `name`.
fn glorot(seed: u64, name: &str, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols).max(1) as f64).sqrt();
    let mut rng = crate::rng::stream(seed, name);
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

fn maskable(k: NodeKind) -> bool {
    k != NodeKind::Module
}

fn layer_dims(dims: GnnDims, l: usize) -> (usize, usize) {
    if l == 0 {
        (dims.h1, dims.h1)
    } else {
        (dims.h1, dims.h2)
    }
}

impl GnnParams {
    /// Glorot-initialized parameters over the ten base relations. Every tensor
    /// draws from its own stream keyed by (seed, name), so adding relations or
    /// a classifier never changes the others.
    pub fn init(spec: &FeatureSpec, dims: GnnDims, seed: u64) -> Self {
        let widths = NodeKind::ALL.map(|k| spec.width(k));
        let mut p = GnnParams {
            dims,
            widths,
            spec_digest: spec_digest(spec),
            seed,
            input: NodeKind::ALL
                .iter()
                .map(|&k| glorot(seed, &format!("input.{k}"), widths[k.index()], dims.h1))
                .collect(),
            layers: (0..2)
                .map(|l| {
                    let (din, dout) = layer_dims(dims, l);
                    Layer {
                        self_loop: NodeKind::ALL
                            .iter()
                            .map(|&k| Linear {
                                w: glorot(seed, &format!("l{}.self.{k}", l + 1), din, dout),
                                b: Array1::zeros(dout),
                            })
                            .collect(),
                        messages: BTreeMap::new(),
                    }
                })
                .collect(),
            pool: glorot(seed, "pool", dims.h2, dims.embed),
            mask: NodeKind::ALL
                .iter()
                .map(|&k| {
                    if maskable(k) {
                        glorot(seed, &format!("mask.{k}"), 1, widths[k.index()])
                            .row(0)
                            .to_owned()
                    } else {
                        Array1::zeros(0)
                    }
                })
                .collect(),
            heads: NodeKind::ALL
                .iter()
                .map(|&k| {
                    let n = if maskable(k) { spec.target_width(k) } else { 0 };
                    Linear {
                        w: glorot(seed, &format!("head.{k}"), dims.h2, n),
                        b: Array1::zeros(n),
                    }
                })
                .collect(),
            classifier: None,
        };
        p.ensure_relations(&Relation::base());
        p
    }

    /// Adds message weights for relations not yet present.
    pub fn ensure_relations(&mut self, rels: &[Relation]) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let (din, dout) = layer_dims(self.dims, l);
            for &r in rels {
                layer.messages.entry(r).or_insert_with(|| Linear {
                    w: glorot(self.seed, &format!("l{}.msg.{r}", l + 1), din, dout),
                    b: Array1::zeros(dout),
                });
            }
        }
    }

    /// Adds (or resets) a classification head with `classes` outputs.
    pub fn set_classifier(&mut self, classes: usize) {
        self.classifier = Some(Linear {
            w: glorot(self.seed, "classifier", self.dims.embed, classes),
            b: Array1::zeros(classes),
        });
    }

    pub fn relations(&self) -> Vec<Relation> {
        self.layers[0].messages.keys().copied().collect()
    }

    /// Same shapes, all zeros; used for gradients.
    pub fn zeros_like(&self) -> GnnParams {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.fill(0.0));
        z
    }

    /// Visits every tensor in a fixed order with a stable name. Empty tensors
    /// are skipped.
    pub fn for_each(&self, mut f: impl FnMut(&str, &[f64])) {
        self.visit(&mut |name, t| f(name, t));
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        self.visit_mut(&mut |name, t| f(name, t));
    }

    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        let mut go = |name: String, t: Option<&[f64]>| {
            let t = t.expect("parameters are contiguous");
            if !t.is_empty() {
                f(&name, t);
            }
        };
        for k in NodeKind::ALL {
            go(format!("input.{k}"), self.input[k.index()].as_slice());
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for k in NodeKind::ALL {
                let s = &layer.self_loop[k.index()];
                go(format!("l{}.self.{k}", l + 1), s.w.as_slice());
                go(format!("l{}.self_bias.{k}", l + 1), s.b.as_slice());
            }
            for (r, m) in &layer.messages {
                go(format!("l{}.msg.{r}", l + 1), m.w.as_slice());
                go(format!("l{}.msg_bias.{r}", l + 1), m.b.as_slice());
            }
        }
        go("pool".into(), self.pool.as_slice());
        for k in NodeKind::ALL {
            go(format!("mask.{k}"), self.mask[k.index()].as_slice());
        }
        for k in NodeKind::ALL {
            let h = &self.heads[k.index()];
            go(format!("head.{k}"), h.w.as_slice());
            go(format!("head_bias.{k}"), h.b.as_slice());
        }
        if let Some(c) = &self.classifier {
            go("classifier".into(), c.w.as_slice());
            go("classifier_bias".into(), c.b.as_slice());
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        let mut go = |name: String, t: Option<&mut [f64]>| {
            let t = t.expect("parameters are contiguous");
            if !t.is_empty() {
                f(&name, t);
            }
        };
        for k in NodeKind::ALL {
            go(format!("input.{k}"), self.input[k.index()].as_slice_mut());
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for k in NodeKind::ALL {
                let s = &mut layer.self_loop[k.index()];
                go(format!("l{}.self.{k}", l + 1), s.w.as_slice_mut());
                go(format!("l{}.self_bias.{k}", l + 1), s.b.as_slice_mut());
            }
            for (r, m) in layer.messages.iter_mut() {
                go(format!("l{}.msg.{r}", l + 1), m.w.as_slice_mut());
                go(format!("l{}.msg_bias.{r}", l + 1), m.b.as_slice_mut());
            }
        }
        go("pool".into(), self.pool.as_slice_mut());
        for k in NodeKind::ALL {
            go(format!("mask.{k}"), self.mask[k.index()].as_slice_mut());
        }
        for k in NodeKind::ALL {
            let h = &mut self.heads[k.index()];
            go(format!("head.{k}"), h.w.as_slice_mut());
            go(format!("head_bias.{k}"), h.b.as_slice_mut());
        }
        if let Some(c) = &mut self.classifier {
            go("classifier".into(), c.w.as_slice_mut());
            go("classifier_bias".into(), c.b.as_slice_mut());
        }
    }

    /// (name, length) of every tensor in visiting order.
    pub fn shapes(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.for_each(|n, t| out.push((n.to_string(), t.len())));
        out
    }

    pub fn num_entries(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, t| n += t.len());
        n
    }

    /// All entries concatenated in visiting order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_entries());
        self.for_each(|_, t| out.extend_from_slice(t));
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, t| ok &= t.iter().all(|x| x.is_finite()));
        ok
    }

    /// `self += k * other`, tensor by tensor. Shapes must agree.
    pub fn add_scaled(&mut self, other: &GnnParams, k: f64) {
        let src = other.flat();
        let mut at = 0;
        self.for_each_mut(|_, t| {
            for x in t.iter_mut() {
                *x += k * src[at];
                at += 1;
            }
        });
        assert_eq!(at, src.len(), "parameter shapes differ");
    }

    pub fn scale(&mut self, k: f64) {
        self.for_each_mut(|_, t| t.iter_mut().for_each(|x| *x *= k));
    }

    pub(crate) fn check_spec(&self, spec: &FeatureSpec) -> Result<(), GnnError> {
        let widths = NodeKind::ALL.map(|k| spec.width(k));
        if widths != self.widths {
            return Err(GnnError::ShapeMismatch(format!(
                "feature widths {widths:?} vs parameter widths {:?}",
                self.widths
            )));
        }
        if spec_digest(spec) != self.spec_digest {
            return Err(GnnError::ShapeMismatch(
                "graph was built with a different feature spec".into(),
            ));
        }
        Ok(())
    }

    /// Zeroed parameters with the given shapes; handy for closed-form checks.
    pub fn zeroed(spec: &FeatureSpec, dims: GnnDims) -> Self {
        GnnParams::init(spec, dims, 0).zeros_like()
    }
}

impl Linear {
    pub(crate) fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}
