//! The three training objectives behind one loss-and-gradient entry point.

use ndarray::{Array1, Axis};

use crate::gnn::{Forward, GnnError, GnnParams, Seeds};
use crate::graph::HeteroGraph;
use crate::prompt::{soft_prompt_loss_and_grad, FrozenLm, PromptError};
use crate::train::{masked_loss_and_grad, MaskPlan};

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    MaskedNode(&'a MaskPlan),
    /// Cross-entropy of the classification head over the graph embedding.
    Classification {
        label: usize,
    },
    /// Next-token loss of a frozen model prompted with the graph.
    SoftPrompt {
        lm: &'a FrozenLm,
        tokens: &'a [u32],
        targets: &'a [u32],
    },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("no classification head")]
    NoClassifier,
    #[error("label {label} outside {classes} classes")]
    BadLabel { label: usize, classes: usize },
}

impl ObjectiveError {
    pub fn is_non_finite(&self) -> bool {
        matches!(
            self,
            ObjectiveError::Gnn(GnnError::NonFiniteLoss(_))
                | ObjectiveError::Prompt(PromptError::Gnn(GnnError::NonFiniteLoss(_)))
        )
    }
}

pub fn loss_and_gradients(
    g: &HeteroGraph,
    p: &GnnParams,
    objective: Objective<'_>,
) -> Result<(f64, GnnParams), ObjectiveError> {
    match objective {
        Objective::MaskedNode(plan) => Ok(masked_loss_and_grad(g, p, plan)?),
        Objective::Classification { label } => classification_loss_and_grad(g, p, label),
        Objective::SoftPrompt { lm, tokens, targets } => {
            Ok(soft_prompt_loss_and_grad(g, p, lm, tokens, targets, None, true)?)
        }
    }
}

/// Class logits `G C + c` for a graph.
pub fn class_logits(g: &HeteroGraph, p: &GnnParams) -> Result<Array1<f64>, ObjectiveError> {
    let head = p.classifier.as_ref().ok_or(ObjectiveError::NoClassifier)?;
    let f = Forward::run(g, p, None)?;
    Ok(f.graph.dot(&head.w) + &head.b)
}

pub fn classification_loss_and_grad(
    g: &HeteroGraph,
    p: &GnnParams,
    label: usize,
) -> Result<(f64, GnnParams), ObjectiveError> {
    let head = p.classifier.as_ref().ok_or(ObjectiveError::NoClassifier)?;
    let classes = head.b.len();
    if label >= classes {
        return Err(ObjectiveError::BadLabel { label, classes });
    }
    let f = Forward::run(g, p, None)?;
    let z = f.graph.dot(&head.w) + &head.b;
    let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = z.mapv(|v| (v - m).exp());
    let s = e.sum();
    let loss = m + s.ln() - z[label];
    if !loss.is_finite() {
        return Err(GnnError::NonFiniteLoss(Some(g.provenance.source.clone())).into());
    }
    let mut dz = e / s;
    dz[label] -= 1.0;
    let mut grads = f.backward(
        p,
        &Seeds {
            graph: Some(dz.dot(&head.w.t())),
            ..Default::default()
        },
    );
    let gh = grads.classifier.as_mut().expect("classifier present");
    gh.w += &f
        .graph
        .view()
        .insert_axis(Axis(1))
        .dot(&dz.view().insert_axis(Axis(0)));
    gh.b += &dz;
    Ok((loss, grads))
}
