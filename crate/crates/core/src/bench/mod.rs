//! Labeled corpora, graph classification and evaluation metrics.

mod classify;
mod metrics;
mod toy;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use classify::{evaluate, holdout_split, predict, train_classifier, ClassifierConfig, EpochLog};
pub use metrics::{accuracy, error_rate, pairwise_accuracy, Metric, MetricError};
pub use toy::{make_toy_corpus, ToyTask};

use crate::corpus::{load_graph_file, CorpusError};
use crate::graph::{FeatureSpec, HeteroGraph};
use crate::objective::ObjectiveError;
use crate::store::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("labels must cover at least two classes")]
    DegenerateLabels,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Manifest { path: String, line: usize, msg: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One manifest line: a graph file (relative to the manifest) and its class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledItem {
    pub path: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub items: Vec<LabeledItem>,
    pub classes: usize,
    /// Directory item paths are relative to.
    pub root: PathBuf,
}

impl LabeledCorpus {
    /// Reads JSON-lines `{path, label, pair_id?}`; `classes` is one more than
    /// the largest label.
    pub fn read_manifest(path: &Path) -> Result<LabeledCorpus, BenchError> {
        let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
        let mut items = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BenchError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let item: LabeledItem = serde_json::from_str(&line).map_err(|e| BenchError::Manifest {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            items.push(item);
        }
        let classes = items.iter().map(|it| it.label + 1).max().unwrap_or(0);
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LabeledCorpus { items, classes, root })
    }

    pub fn write_manifest(&self, path: &Path) -> Result<(), BenchError> {
        let mut out = String::new();
        for it in &self.items {
            out.push_str(&serde_json::to_string(it).expect("item serializes"));
            out.push('\n');
        }
        write_atomic(path, out.as_bytes()).map_err(|e| BenchError::InvalidArgument(e.to_string()))
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|it| it.label).collect()
    }

    /// Pair ids, if every item has one.
    pub fn pair_ids(&self) -> Option<Vec<u64>> {
        self.items.iter().map(|it| it.pair_id).collect()
    }

    pub fn load_graphs(&self, spec: &FeatureSpec) -> Result<Vec<HeteroGraph>, BenchError> {
        self.items
            .iter()
            .map(|it| Ok(load_graph_file(&self.root.join(&it.path), spec)?))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub count: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `full` or an ablation target such as `edge:cfg`.
    pub variant: String,
    pub metric: String,
    pub value: f64,
    pub count: usize,
    pub per_class: Vec<ClassStats>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = LabeledCorpus {
            items: vec![
                LabeledItem {
                    path: "a.ll".into(),
                    label: 0,
                    pair_id: Some(3),
                },
                LabeledItem {
                    path: "b.ll".into(),
                    label: 2,
                    pair_id: None,
                },
            ],
            classes: 3,
            root: dir.path().to_path_buf(),
        };
        let m = dir.path().join("manifest.jsonl");
        c.write_manifest(&m).unwrap();
        let text = std::fs::read_to_string(&m).unwrap();
        assert_eq!(
            text,
            "{\"path\":\"a.ll\",\"label\":0,\"pair_id\":3}\n{\"path\":\"b.ll\",\"label\":2}\n"
        );
        assert_eq!(LabeledCorpus::read_manifest(&m).unwrap(), c);
        std::fs::write(&m, "{\"path\":\"a.ll\"}\n").unwrap();
        assert!(matches!(
            LabeledCorpus::read_manifest(&m),
            Err(BenchError::Manifest { line: 1, .. })
        ));
    }
}
