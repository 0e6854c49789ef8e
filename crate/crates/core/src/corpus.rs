//! Directories of `.ll` and `.irg` files as graph corpora.

use std::path::{Path, PathBuf};

use crate::graph::{graph_from_source, BuildError, BuildOptions, FeatureSpec, HeteroGraph};
use crate::ir::ParseOptions;
use crate::store::{load_graph, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Build { path: String, source: BuildError },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}: no .ll or .irg files")]
    Empty(String),
}

/// `.ll` and `.irg` files directly inside `dir`, sorted by file name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |e| CorpusError::Io {
        path: dir.display().to_string(),
        source: e,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && matches!(path.extension().and_then(|e| e.to_str()), Some("ll" | "irg")) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads a stored graph, or parses and builds IR text. IR outside the
/// supported subset is skipped leniently; feature overflows are errors.
pub fn load_graph_file(path: &Path, spec: &FeatureSpec) -> Result<HeteroGraph, CorpusError> {
    if path.extension().is_some_and(|e| e == "irg") {
        return Ok(load_graph(path)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    graph_from_source(
        &name,
        &text,
        spec,
        ParseOptions::lenient(),
        BuildOptions::default(),
    )
    .map_err(|e| CorpusError::Build {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_corpus(dir: &Path, spec: &FeatureSpec) -> Result<Vec<HeteroGraph>, CorpusError> {
    let files = corpus_files(dir)?;
    if files.is_empty() {
        return Err(CorpusError::Empty(dir.display().to_string()));
    }
    files.iter().map(|f| load_graph_file(f, spec)).collect()
}
