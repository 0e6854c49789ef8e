//! The IRGraph heterogeneous program graph.
//!
//! Nodes live in one feature matrix per [`NodeKind`]; a node is identified by
//! its kind and its row. Edges are grouped by [`Relation`], the triple of edge
//! kind and endpoint kinds, so a message-passing layer can keep one weight
//! matrix per relation.

mod build;
mod digest;
mod features;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

pub use build::{build_graph, build_graph_with, graph_from_source, BuildError, BuildOptions};
pub use digest::canonical_digest;
pub use features::{encode_node_features, BucketTable, FeatureError, FeatureSpec, NodePayload};
pub use validate::{validate_graph, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Value,
    Type,
    Size,
    Module,
    Attributes,
    Instruction,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Value,
        NodeKind::Type,
        NodeKind::Size,
        NodeKind::Module,
        NodeKind::Attributes,
        NodeKind::Instruction,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<NodeKind> {
        NodeKind::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Value => "value",
            NodeKind::Type => "type",
            NodeKind::Size => "size",
            NodeKind::Module => "module",
            NodeKind::Attributes => "attributes",
            NodeKind::Instruction => "instruction",
        }
    }

    pub fn from_name(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    TypeOf,
    Dataflow,
    Attribute,
    Cfg,
    SizeOf,
    Symbol,
    Includes,
    Contains,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 8] = [
        EdgeKind::TypeOf,
        EdgeKind::Dataflow,
        EdgeKind::Attribute,
        EdgeKind::Cfg,
        EdgeKind::SizeOf,
        EdgeKind::Symbol,
        EdgeKind::Includes,
        EdgeKind::Contains,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<EdgeKind> {
        EdgeKind::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::TypeOf => "type_of",
            EdgeKind::Dataflow => "dataflow",
            EdgeKind::Attribute => "attribute",
            EdgeKind::Cfg => "cfg",
            EdgeKind::SizeOf => "size_of",
            EdgeKind::Symbol => "symbol",
            EdgeKind::Includes => "includes",
            EdgeKind::Contains => "contains",
        }
    }

    pub fn from_name(s: &str) -> Option<EdgeKind> {
        EdgeKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Endpoint kinds of the forward direction.
    pub fn signature(self) -> (NodeKind, NodeKind) {
        use NodeKind::*;
        match self {
            EdgeKind::TypeOf => (Value, Type),
            EdgeKind::Dataflow => (Instruction, Value),
            EdgeKind::Attribute => (Value, Attributes),
            EdgeKind::Cfg => (Instruction, Instruction),
            EdgeKind::SizeOf => (Type, Size),
            EdgeKind::Symbol => (Module, Value),
            EdgeKind::Includes => (Type, Type),
            EdgeKind::Contains => (Value, Value),
        }
    }

    /// Dataflow (def and use) and Symbol (undirected) natively run both ways.
    pub fn is_bidirectional(self) -> bool {
        matches!(self, EdgeKind::Dataflow | EdgeKind::Symbol)
    }

    pub fn forward(self) -> Relation {
        let (src, dst) = self.signature();
        Relation::new(self, src, dst)
    }

    /// Relations an unablated graph may contain.
    pub fn native_relations(self) -> Vec<Relation> {
        if self.is_bidirectional() {
            let (src, dst) = self.signature();
            vec![self.forward(), Relation::new(self, dst, src)]
        } else {
            vec![self.forward()]
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An edge kind together with the kinds of its endpoints.
///
/// `mirror` marks reversed copies added when an ablation makes an edge kind
/// bidirectional; they keep their own weights even when both endpoints have
/// the same kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub edge: EdgeKind,
    pub src: NodeKind,
    pub dst: NodeKind,
    pub mirror: bool,
}

impl Relation {
    pub fn new(edge: EdgeKind, src: NodeKind, dst: NodeKind) -> Self {
        Relation {
            edge,
            src,
            dst,
            mirror: false,
        }
    }

    /// Reversed copy of a forward relation.
    pub fn mirrored(self) -> Self {
        Relation {
            edge: self.edge,
            src: self.dst,
            dst: self.src,
            mirror: true,
        }
    }

    /// The ten relations of an unablated graph.
    pub fn base() -> Vec<Relation> {
        EdgeKind::ALL
            .into_iter()
            .flat_map(EdgeKind::native_relations)
            .collect()
    }

    /// Base relations plus the mirror of every one-way edge kind.
    pub fn all() -> Vec<Relation> {
        let mut out = Relation::base();
        out.extend(
            EdgeKind::ALL
                .into_iter()
                .filter(|e| !e.is_bidirectional())
                .map(|e| e.forward().mirrored()),
        );
        out.sort();
        out
    }

    /// Stable short name, e.g. `cfg:instruction>instruction`; mirrors end in `~`.
    pub fn name(self) -> String {
        let tilde = if self.mirror { "~" } else { "" };
        format!("{}:{}>{}{tilde}", self.edge, self.src, self.dst)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A node kind or an edge kind removed from a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AblationTarget {
    Node(NodeKind),
    Edge(EdgeKind),
}

impl fmt::Display for AblationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AblationTarget::Node(k) => write!(f, "node:{k}"),
            AblationTarget::Edge(k) => write!(f, "edge:{k}"),
        }
    }
}

impl std::str::FromStr for AblationTarget {
    type Err = String;

    /// Inverse of `Display`: `node:<kind>` or `edge:<kind>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown ablation target `{s}` (expected node:<kind> or edge:<kind>)");
        match s.split_once(':') {
            Some(("node", k)) => NodeKind::from_name(k).map(AblationTarget::Node).ok_or_else(bad),
            Some(("edge", k)) => EdgeKind::from_name(k).map(AblationTarget::Edge).ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}

/// Marks an ablated graph so validation accepts its mirrored edges and
/// missing kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub target: AblationTarget,
    pub mirrored: BTreeSet<EdgeKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// SHA-256 of the source bytes.
    pub digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    /// One matrix per node kind, indexed by [`NodeKind::index`]; row = node id.
    pub nodes: Vec<Array2<f32>>,
    /// Edge lists per relation. Empty lists are never stored.
    pub edges: BTreeMap<Relation, Vec<(u32, u32)>>,
    pub feature_spec: FeatureSpec,
    pub provenance: Provenance,
    pub ablation: Option<AblationRecord>,
}

impl HeteroGraph {
    /// A graph with no nodes or edges, not even the Module node.
    pub fn empty(spec: FeatureSpec, provenance: Provenance) -> Self {
        let nodes = NodeKind::ALL
            .iter()
            .map(|&k| Array2::zeros((0, spec.width(k))))
            .collect();
        HeteroGraph {
            nodes,
            edges: BTreeMap::new(),
            feature_spec: spec,
            provenance,
            ablation: None,
        }
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes[kind.index()].nrows()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().map(|m| m.nrows()).sum()
    }

    pub fn features(&self, kind: NodeKind) -> &Array2<f32> {
        &self.nodes[kind.index()]
    }

    pub fn feature_row(&self, kind: NodeKind, id: u32) -> ArrayView1<'_, f32> {
        self.nodes[kind.index()].row(id as usize)
    }

    pub fn edges(&self, rel: Relation) -> &[(u32, u32)] {
        self.edges.get(&rel).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of edges of one kind over all its relations.
    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges
            .iter()
            .filter(|(r, _)| r.edge == kind)
            .map(|(_, e)| e.len())
            .sum()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.edges.keys().copied()
    }

    pub fn push_edge(&mut self, rel: Relation, src: u32, dst: u32) {
        self.edges.entry(rel).or_default().push((src, dst));
    }

    /// Appends a node and returns its id.
    pub fn push_node(&mut self, kind: NodeKind, features: &[f32]) -> u32 {
        let m = &mut self.nodes[kind.index()];
        let id = m.nrows() as u32;
        m.push_row(ArrayView1::from(features))
            .expect("feature row width matches its kind");
        id
    }

    /// Nodes in canonical order: kind order, then id.
    pub fn canonical_nodes(&self) -> Vec<(NodeKind, u32)> {
        NodeKind::ALL
            .into_iter()
            .flat_map(|k| (0..self.count(k) as u32).map(move |i| (k, i)))
            .collect()
    }

    pub fn node_census(&self) -> BTreeMap<NodeKind, usize> {
        NodeKind::ALL.into_iter().map(|k| (k, self.count(k))).collect()
    }

    pub fn edge_census(&self) -> BTreeMap<EdgeKind, usize> {
        EdgeKind::ALL
            .into_iter()
            .map(|k| (k, self.edge_count(k)))
            .collect()
    }

    /// Relabels the nodes of one kind: node `i` becomes `perm[i]`.
    pub fn permute(&mut self, kind: NodeKind, perm: &[u32]) {
        let old = &self.nodes[kind.index()];
        assert_eq!(perm.len(), old.nrows(), "permutation length");
        let mut new = Array2::zeros(old.raw_dim());
        for (i, &p) in perm.iter().enumerate() {
            new.row_mut(p as usize).assign(&old.row(i));
        }
        self.nodes[kind.index()] = new;
        for (rel, list) in self.edges.iter_mut() {
            for (s, d) in list.iter_mut() {
                if rel.src == kind {
                    *s = perm[*s as usize];
                }
                if rel.dst == kind {
                    *d = perm[*d as usize];
                }
            }
        }
    }
}
