#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use irgraph_core::graph::{graph_from_source, BuildOptions, EdgeKind, FeatureSpec, HeteroGraph, NodeKind};
use irgraph_core::ir::ParseOptions;
use regex::{Captures, Regex};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn pretrain_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/pretrain")
}

/// Fixture `.ll` files sorted by name.
pub fn fixtures() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ll"))
        .collect();
    v.sort();
    v
}

/// Builds a graph from IR text, skipping metadata and other constructs
/// outside the subset.
pub fn graph_of(name: &str, text: &str) -> HeteroGraph {
    graph_from_source(
        name,
        text,
        &FeatureSpec::default(),
        ParseOptions::lenient(),
        BuildOptions::default(),
    )
    .unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_graphs() -> Vec<(String, String, HeteroGraph)> {
    fixtures()
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let text = fs::read_to_string(&p).unwrap();
            let g = graph_of(&name, &text);
            (name, text, g)
        })
        .collect()
}

/// Endpoint kinds of every edge kind, written out independently of the
/// library's own table. Two-way kinds list both directions.
pub fn signature_table() -> Vec<(EdgeKind, Vec<(NodeKind, NodeKind)>)> {
    use EdgeKind::*;
    use NodeKind::*;
    vec![
        (TypeOf, vec![(Value, Type)]),
        (Dataflow, vec![(Instruction, Value), (Value, Instruction)]),
        (Attribute, vec![(Value, Attributes)]),
        (Cfg, vec![(Instruction, Instruction)]),
        (SizeOf, vec![(Type, Size)]),
        (Symbol, vec![(Module, Value), (Value, Module)]),
        (Includes, vec![(Type, Type)]),
        (Contains, vec![(Value, Value)]),
    ]
}

/// Consistently renames every local value, block label and global symbol
/// (LLVM intrinsics keep their names). Text inside string literals is left
/// alone.
pub fn rename_symbols(text: &str) -> String {
    let label = Regex::new(r"(?m)^([A-Za-z_.][\w.$-]*|\d+):").unwrap();
    let text = label.replace_all(text, "v_$1:");
    let local = Regex::new(r"%([A-Za-z_.][\w.$-]*|\d+)\b").unwrap();
    let global = Regex::new(r"@([A-Za-z_.][\w.$-]*|\d+)\b").unwrap();
    let mut out = String::new();
    for (i, seg) in text.split('"').enumerate() {
        if i > 0 {
            out.push('"');
        }
        if i % 2 == 1 {
            out.push_str(seg);
            continue;
        }
        let seg = local.replace_all(seg, |c: &Captures| {
            let name = &c[1];
            if name.starts_with("struct.") || name.starts_with("union.") {
                c[0].to_string()
            } else {
                format!("%v_{name}")
            }
        });
        let seg = global.replace_all(&seg, |c: &Captures| {
            if c[1].starts_with("llvm.") {
                c[0].to_string()
            } else {
                format!("@g_{}", &c[1])
            }
        });
        out.push_str(&seg);
    }
    out
}
