//! Exit codes and stable error codes.

use std::error::Error as StdError;

use irgraph_core::bench::BenchError;
use irgraph_core::corpus::CorpusError;
use irgraph_core::gnn::GnnError;
use irgraph_core::graph::{BuildError, FeatureError};
use irgraph_core::ir::ParseError;
use irgraph_core::objective::ObjectiveError;
use irgraph_core::prompt::PromptError;
use irgraph_core::store::StoreError;
use irgraph_core::train::TrainError;

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;

/// Bad flags, configs or inputs that the user can fix.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit code and stable error code for a failure. The first error in the
/// chain that we recognise decides; anything else is internal.
pub fn classify(err: &anyhow::Error) -> (i32, &'static str) {
    err.chain()
        .find_map(class_of)
        .unwrap_or((EXIT_INTERNAL, "internal"))
}

/// The error chain joined by ": ", skipping causes the previous message
/// already ends with (several core errors print their source inline).
pub fn render(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

fn class_of(e: &(dyn StdError + 'static)) -> Option<(i32, &'static str)> {
    if let Some(e) = e.downcast_ref::<ParseError>() {
        return Some(match e {
            ParseError::UnsupportedConstruct { .. } => (EXIT_UNSUPPORTED, "unsupported-construct"),
            ParseError::TooLarge { .. } => (EXIT_USAGE, "too-large"),
            _ => (EXIT_USAGE, "parse"),
        });
    }
    if let Some(e) = e.downcast_ref::<BuildError>() {
        return match e {
            BuildError::Parse(p) => class_of(p),
            BuildError::FeatureOverflow(_) => Some((EXIT_USAGE, "feature-overflow")),
            BuildError::Spec(_) => Some((EXIT_USAGE, "config")),
            BuildError::InternalInconsistency(_) => Some((EXIT_INTERNAL, "internal")),
        };
    }
    if let Some(e) = e.downcast_ref::<StoreError>() {
        return Some(match e {
            StoreError::Io { .. } => (EXIT_USAGE, "io"),
            StoreError::Format(_) => (EXIT_USAGE, "format"),
            StoreError::SerializationOverflow(_) => (EXIT_INTERNAL, "internal"),
        });
    }
    if let Some(e) = e.downcast_ref::<CorpusError>() {
        return match e {
            CorpusError::Io { .. } => Some((EXIT_USAGE, "io")),
            CorpusError::Build { source, .. } => class_of(source),
            CorpusError::Store(s) => class_of(s),
            CorpusError::Empty(_) => Some((EXIT_USAGE, "empty-corpus")),
        };
    }
    if let Some(e) = e.downcast_ref::<BenchError>() {
        return match e {
            BenchError::Io { .. } => Some((EXIT_USAGE, "io")),
            BenchError::Manifest { .. } => Some((EXIT_USAGE, "manifest")),
            BenchError::DegenerateLabels | BenchError::InvalidArgument(_) => Some((EXIT_USAGE, "usage")),
            BenchError::Corpus(c) => class_of(c),
            BenchError::Objective(o) => match o {
                ObjectiveError::Gnn(g) => class_of(g),
                ObjectiveError::Prompt(p) => class_of(p),
                _ => Some((EXIT_USAGE, "usage")),
            },
            BenchError::Metric(_) => Some((EXIT_USAGE, "usage")),
        };
    }
    if let Some(e) = e.downcast_ref::<TrainError>() {
        return match e {
            TrainError::EmptyGraph | TrainError::EmptyCorpus | TrainError::InvalidConfig(_) => {
                Some((EXIT_USAGE, "config"))
            }
            TrainError::Gnn(g) => class_of(g),
        };
    }
    if let Some(e) = e.downcast_ref::<PromptError>() {
        return match e {
            PromptError::Gnn(g) => class_of(g),
            _ => Some((EXIT_USAGE, "prompt")),
        };
    }
    if let Some(e) = e.downcast_ref::<GnnError>() {
        return Some(match e {
            GnnError::NonFiniteLoss(_) => (EXIT_INTERNAL, "non-finite"),
            _ => (EXIT_USAGE, "model-mismatch"),
        });
    }
    if e.is::<FeatureError>() || e.is::<serde_json::Error>() {
        return Some((EXIT_USAGE, "config"));
    }
    if e.is::<std::io::Error>() {
        return Some((EXIT_USAGE, "io"));
    }
    if e.is::<UsageError>() {
        return Some((EXIT_USAGE, "usage"));
    }
    None
}
