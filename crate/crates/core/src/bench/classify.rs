use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, error_rate, pairwise_accuracy, Metric};
use super::{BenchError, ClassStats, EvalReport};
use crate::gnn::{GnnDims, GnnParams};
use crate::graph::HeteroGraph;
use crate::objective::{class_logits, classification_loss_and_grad};
use crate::rng::stream;
use crate::train::{adamw_step, AdamState, AdamWConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dims: GnnDims,
    /// Fraction of items (whole pairs when paired) held out for evaluation.
    pub holdout: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let a = AdamWConfig::default();
        ClassifierConfig {
            learning_rate: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            dims: GnnDims::default(),
            holdout: 0.2,
        }
    }
}

impl ClassifierConfig {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
}

/// Splits item indices into (train, test). Items sharing a group id stay on
/// the same side; `None` items are their own group.
pub fn holdout_split(groups: &[Option<u64>], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut keys: Vec<(bool, u64)> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| match g {
            Some(id) => (true, *id),
            None => (false, i as u64),
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.shuffle(&mut stream(seed, "holdout"));
    let n_test = ((fraction * keys.len() as f64).round() as usize).min(keys.len());
    let test: BTreeSet<(bool, u64)> = keys[..n_test].iter().copied().collect();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, g) in groups.iter().enumerate() {
        let key = match g {
            Some(id) => (true, *id),
            None => (false, i as u64),
        };
        if test.contains(&key) {
            held.push(i);
        } else {
            train.push(i);
        }
    }
    (train, held)
}

/// Trains the encoder and a linear head over the graph embedding jointly.
/// Adds (or resizes) the head when its class count differs from the labels'.
pub fn train_classifier(
    graphs: &[HeteroGraph],
    labels: &[usize],
    p: &mut GnnParams,
    cfg: &ClassifierConfig,
) -> Result<Vec<EpochLog>, BenchError> {
    if graphs.len() != labels.len() {
        return Err(BenchError::InvalidArgument(
            "graphs and labels differ in length".into(),
        ));
    }
    if labels.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(BenchError::DegenerateLabels);
    }
    if cfg.batch_size == 0 {
        return Err(BenchError::InvalidArgument("batch_size must be positive".into()));
    }
    let classes = labels.iter().max().unwrap() + 1;
    if p.classifier.as_ref().map(|c| c.b.len()) != Some(classes) {
        p.set_classifier(classes);
    }
    for g in graphs {
        let rels: Vec<_> = g.relations().collect();
        p.ensure_relations(&rels);
    }
    let opt = cfg.adamw();
    let mut state = AdamState::default();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..graphs.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &format!("classify/{epoch}")));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| classification_loss_and_grad(&graphs[i], p, labels[i]))
                .collect();
            let mut grads = p.zeros_like();
            for r in results {
                let (l, g) = r?;
                total += l;
                grads.add_scaled(&g, 1.0);
            }
            grads.scale(1.0 / batch.len() as f64);
            adamw_step(p, &grads, &mut state, &opt);
        }
        log.push(EpochLog {
            epoch,
            loss: total / graphs.len() as f64,
        });
    }
    Ok(log)
}

/// Most likely class; ties go to the lowest index.
pub fn predict(g: &HeteroGraph, p: &GnnParams) -> Result<usize, BenchError> {
    let z = class_logits(g, p)?;
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn evaluate(
    graphs: &[HeteroGraph],
    labels: &[usize],
    pair_ids: Option<&[u64]>,
    p: &GnnParams,
    metric: Metric,
    variant: &str,
) -> Result<EvalReport, BenchError> {
    let preds: Vec<usize> = graphs
        .par_iter()
        .map(|g| predict(g, p))
        .collect::<Result<_, _>>()?;
    let value = match metric {
        Metric::Accuracy => accuracy(&preds, labels)?,
        Metric::ErrorRate => error_rate(&preds, labels)?,
        Metric::Pairwise => {
            let ids = pair_ids
                .ok_or_else(|| BenchError::InvalidArgument("pairwise accuracy needs pair ids".into()))?;
            pairwise_accuracy(&preds, labels, ids)?
        }
    };
    let classes = labels.iter().chain(&preds).max().map_or(0, |m| m + 1);
    let per_class = (0..classes)
        .map(|c| ClassStats {
            class: c,
            count: labels.iter().filter(|&&l| l == c).count(),
            correct: labels
                .iter()
                .zip(&preds)
                .filter(|(&l, &p)| l == c && p == c)
                .count(),
        })
        .collect();
    Ok(EvalReport {
        variant: variant.to_string(),
        metric: metric.name().to_string(),
        value,
        count: labels.len(),
        per_class,
    })
}
