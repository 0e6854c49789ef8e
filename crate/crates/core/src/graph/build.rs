use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use sha2::{Digest, Sha256};

use super::features::encode_clamped;
use super::{
    encode_node_features, EdgeKind, FeatureError, FeatureSpec, HeteroGraph, NodeKind, NodePayload,
    Provenance, Relation,
};
use crate::ir::{
    parse_module_with, print_module, AttributeSet, ConstPayload, Detail, IrModule, ParseError, ParseOptions,
    TypeId, ValueId,
};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("feature overflow: {0}")]
    FeatureOverflow(FeatureError),
    #[error(transparent)]
    Spec(FeatureError),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Clamp feature overflows into the nearest bucket with a warning.
    pub lenient: bool,
}

pub fn build_graph(module: &IrModule, spec: &FeatureSpec) -> Result<HeteroGraph, BuildError> {
    build_graph_with(module, spec, BuildOptions::default())
}

/// Parses `text` and builds its graph, recording `name` and the SHA-256 of the
/// raw bytes as provenance.
pub fn graph_from_source(
    name: &str,
    text: &str,
    spec: &FeatureSpec,
    parse: ParseOptions,
    build: BuildOptions,
) -> Result<HeteroGraph, BuildError> {
    let module = parse_module_with(text, parse)?;
    let mut g = build_graph_with(&module, spec, build)?;
    g.provenance = Provenance {
        source: name.to_string(),
        digest: Sha256::digest(text.as_bytes()).into(),
    };
    Ok(g)
}

pub fn build_graph_with(
    module: &IrModule,
    spec: &FeatureSpec,
    opts: BuildOptions,
) -> Result<HeteroGraph, BuildError> {
    spec.check().map_err(BuildError::Spec)?;
    check_references(module)?;
    let provenance = Provenance {
        source: module.name.clone(),
        digest: Sha256::digest(print_module(module).as_bytes()).into(),
    };
    let mut b = Builder {
        m: module,
        g: HeteroGraph::empty(spec.clone(), provenance),
        lenient: opts.lenient,
    };
    b.run()?;
    Ok(b.g)
}

struct Builder<'a> {
    m: &'a IrModule,
    g: HeteroGraph,
    lenient: bool,
}

const MODULE: u32 = 0;

impl Builder<'_> {
    fn node(&mut self, payload: NodePayload) -> Result<u32, BuildError> {
        let spec = &self.g.feature_spec;
        let row = if self.lenient {
            let (row, overflow) = encode_clamped(&payload, spec);
            if let Some(e) = overflow {
                warn!("{}: {e}; clamped", self.m.name);
            }
            row
        } else {
            encode_node_features(&payload, spec).map_err(BuildError::FeatureOverflow)?
        };
        Ok(self.g.push_node(payload.kind(), &row))
    }

    fn run(&mut self) -> Result<(), BuildError> {
        let m = self.m;
        self.node(NodePayload::Module)?;

        for v in &m.values {
            let numeric = v.constant_payload.as_ref().and_then(ConstPayload::numeric);
            self.node(NodePayload::Value {
                kind: v.kind,
                numeric,
            })?;
        }

        let types = type_closure(m);
        let mut type_node = vec![None; m.types.len()];
        for (i, &t) in types.iter().enumerate() {
            type_node[t.index()] = Some(i as u32);
            let d = m.ty(t);
            self.node(NodePayload::Type {
                kind: d.kind,
                bit_width: d.bit_width,
            })?;
        }
        let type_of = |t: TypeId| -> Result<u32, BuildError> {
            type_node[t.index()]
                .ok_or_else(|| BuildError::InternalInconsistency(format!("type {} has no node", t.0)))
        };

        let sizes: BTreeSet<u64> = types.iter().filter_map(|&t| m.alloc_size(t)).collect();
        let mut size_node = BTreeMap::new();
        for bytes in sizes {
            let id = self.node(NodePayload::Size { bytes })?;
            size_node.insert(bytes, id);
        }

        let mut attr_node: BTreeMap<&AttributeSet, u32> = BTreeMap::new();
        let mut attr_edges = Vec::new();
        for f in &m.functions {
            let owners = std::iter::once((f.value, &f.attributes))
                .chain(f.args.iter().copied().zip(f.arg_attributes.iter()));
            for (v, set) in owners {
                if set.is_empty() {
                    continue;
                }
                let id = match attr_node.get(set) {
                    Some(&id) => id,
                    None => {
                        let id = self.node(NodePayload::Attributes(set.clone()))?;
                        attr_node.insert(set, id);
                        id
                    }
                };
                attr_edges.push((v.0, id));
            }
        }

        let mut block_start = Vec::new();
        for f in &m.functions {
            let mut starts = Vec::with_capacity(f.blocks.len());
            for block in &f.blocks {
                starts.push(self.g.count(NodeKind::Instruction) as u32);
                for inst in &block.instructions {
                    self.node(NodePayload::Instruction {
                        opcode: inst.opcode,
                        alignment: inst.alignment,
                    })?;
                }
            }
            block_start.push(starts);
        }

        // Value-incident edges.
        let type_of_rel = EdgeKind::TypeOf.forward();
        for (i, v) in m.values.iter().enumerate() {
            let t = type_of(v.ty)?;
            self.g.push_edge(type_of_rel, i as u32, t);
        }
        let def = EdgeKind::Dataflow.forward();
        let use_ = Relation::new(EdgeKind::Dataflow, NodeKind::Value, NodeKind::Instruction);
        let mut inst_id = 0u32;
        for f in &m.functions {
            for inst in f.instructions() {
                for op in &inst.operands {
                    self.g.push_edge(use_, op.0, inst_id);
                }
                if let Some(r) = inst.result {
                    self.g.push_edge(def, inst_id, r.0);
                }
                inst_id += 1;
            }
        }
        for (v, a) in attr_edges {
            self.g.push_edge(EdgeKind::Attribute.forward(), v, a);
        }

        for (i, &t) in types.iter().enumerate() {
            if let Some(bytes) = m.alloc_size(t) {
                self.g
                    .push_edge(EdgeKind::SizeOf.forward(), i as u32, size_node[&bytes]);
            }
        }

        let sym = EdgeKind::Symbol.forward();
        let sym_back = Relation::new(EdgeKind::Symbol, NodeKind::Value, NodeKind::Module);
        for (i, v) in m.values.iter().enumerate() {
            if v.kind.is_global() {
                self.g.push_edge(sym, MODULE, i as u32);
                self.g.push_edge(sym_back, i as u32, MODULE);
            }
        }

        let cfg = EdgeKind::Cfg.forward();
        for (f, starts) in m.functions.iter().zip(&block_start) {
            for (bi, block) in f.blocks.iter().enumerate() {
                let first = starts[bi];
                let n = block.instructions.len() as u32;
                for k in 1..n {
                    self.g.push_edge(cfg, first + k - 1, first + k);
                }
                if n == 0 {
                    continue;
                }
                let last = first + n - 1;
                let succs: BTreeSet<usize> = block.instructions[n as usize - 1]
                    .successors
                    .iter()
                    .copied()
                    .collect();
                for s in succs {
                    if f.blocks[s].instructions.is_empty() {
                        continue;
                    }
                    self.g.push_edge(cfg, last, starts[s]);
                }
            }
        }

        let includes = EdgeKind::Includes.forward();
        for (i, &t) in types.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for c in m.ty(t).children() {
                if seen.insert(c) {
                    let c = type_of(c)?;
                    self.g.push_edge(includes, i as u32, c);
                }
            }
        }

        let contains = EdgeKind::Contains.forward();
        for gv in &m.globals {
            if let Some(init) = gv.initializer {
                self.g.push_edge(contains, gv.value.0, init.0);
            }
        }
        for (i, v) in m.values.iter().enumerate() {
            match &v.constant_payload {
                Some(ConstPayload::BlockAddress { function, .. }) => {
                    self.g.push_edge(contains, i as u32, function.0);
                }
                Some(p) => {
                    for op in p.operands() {
                        self.g.push_edge(contains, i as u32, op.0);
                    }
                }
                None => {}
            }
        }
        Ok(())
    }
}

/// Types reachable from values, instruction type operands and named types,
/// in type-table order.
fn type_closure(m: &IrModule) -> Vec<TypeId> {
    let mut seen = vec![false; m.types.len()];
    let mut stack: Vec<TypeId> = m.values.iter().map(|v| v.ty).collect();
    stack.extend(m.named_types.values().copied());
    let detail_type = |d: &Detail| match d {
        Detail::Alloca { allocated } => Some(*allocated),
        Detail::Gep { source, .. } => Some(*source),
        Detail::Call { callee_type, .. } => Some(*callee_type),
        _ => None,
    };
    for f in &m.functions {
        stack.extend(f.instructions().filter_map(|i| detail_type(&i.detail)));
    }
    for v in &m.values {
        if let Some(ConstPayload::Expr { detail, .. }) = &v.constant_payload {
            stack.extend(detail_type(detail));
        }
    }
    while let Some(t) = stack.pop() {
        if std::mem::replace(&mut seen[t.index()], true) {
            continue;
        }
        stack.extend(m.ty(t).children());
    }
    (0..m.types.len() as u32)
        .map(TypeId)
        .filter(|t| seen[t.index()])
        .collect()
}

fn check_references(m: &IrModule) -> Result<(), BuildError> {
    let bad = |what: String| Err(BuildError::InternalInconsistency(what));
    let nv = m.values.len();
    let nt = m.types.len();
    let value_ok = |v: &ValueId| v.index() < nv;
    for t in &m.types {
        if t.children().iter().any(|c| c.index() >= nt) {
            return bad("type refers past the type table".into());
        }
    }
    for v in &m.values {
        if v.ty.index() >= nt {
            return bad(format!("value {} has an unknown type", v.id));
        }
        if let Some(p) = &v.constant_payload {
            if !p.operands().iter().all(value_ok) {
                return bad(format!("constant {} refers past the value table", v.id));
            }
        }
    }
    for g in &m.globals {
        if !value_ok(&g.value) || !g.initializer.iter().all(value_ok) {
            return bad(format!("global @{} refers past the value table", g.name));
        }
    }
    for f in &m.functions {
        if !value_ok(&f.value) || !f.args.iter().all(value_ok) {
            return bad(format!("function @{} refers past the value table", f.name));
        }
        if f.arg_attributes.len() != f.args.len() {
            return bad(format!("function @{} has mismatched argument attributes", f.name));
        }
        for inst in f.instructions() {
            if !inst.operands.iter().all(value_ok) || !inst.result.iter().all(value_ok) {
                return bad(format!(
                    "@{} at {}: operand refers past the value table",
                    f.name, inst.pos
                ));
            }
            if inst.successors.iter().any(|&s| s >= f.blocks.len()) {
                return bad(format!("@{} at {}: successor out of range", f.name, inst.pos));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn census(g: &HeteroGraph) -> (Vec<usize>, Vec<usize>) {
        (
            NodeKind::ALL.iter().map(|&k| g.count(k)).collect(),
            EdgeKind::ALL.iter().map(|&k| g.edge_count(k)).collect(),
        )
    }

    #[test]
    fn empty_module_has_only_the_module_node() {
        let g = build_graph(&parse_module("").unwrap(), &FeatureSpec::default()).unwrap();
        assert_eq!(census(&g), (vec![0, 0, 0, 1, 0, 0], vec![0; 8]));
    }

    #[test]
    fn identity_function_matches_hand_census() {
        let m = parse_module("define i32 @f(i32 %a) {\nentry:\n  ret i32 %a\n}\n").unwrap();
        let g = build_graph(&m, &FeatureSpec::default()).unwrap();
        // Value, Type, Size, Module, Attributes, Instruction
        let nodes = vec![2, 2, 1, 1, 1, 1];
        // TypeOf, Dataflow, Attribute, Cfg, SizeOf, Symbol, Includes, Contains
        let edges = vec![2, 1, 1, 0, 1, 2, 1, 0];
        assert_eq!(census(&g), (nodes, edges));
    }

    #[test]
    fn cfg_follows_execution_order() {
        let text = "\
define i32 @f(i1 %c) {
entry:
  br i1 %c, label %a, label %b
a:
  %x = add i32 1, 2
  br label %b
b:
  ret i32 0
}
";
        let g = build_graph(&parse_module(text).unwrap(), &FeatureSpec::default()).unwrap();
        let mut cfg = g.edges(EdgeKind::Cfg.forward()).to_vec();
        cfg.sort();
        // entry.br=0, a.add=1, a.br=2, b.ret=3
        assert_eq!(cfg, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn overflow_is_an_error_unless_lenient() {
        let m = parse_module("@buf = global [4096 x i8] zeroinitializer\n").unwrap();
        let mut spec = FeatureSpec::default();
        spec.size.max = Some(1024.0);
        assert!(matches!(
            build_graph(&m, &spec),
            Err(BuildError::FeatureOverflow(_))
        ));
        let g = build_graph_with(&m, &spec, BuildOptions { lenient: true }).unwrap();
        assert_eq!(g.count(NodeKind::Size), 2);
    }

    #[test]
    fn source_provenance_hashes_raw_bytes() {
        let text = "define void @f() {\n  ret void\n}\n";
        let g = graph_from_source(
            "f.ll",
            text,
            &FeatureSpec::default(),
            ParseOptions::default(),
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(g.provenance.source, "f.ll");
        let expect: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        assert_eq!(g.provenance.digest, expect);
    }
}
