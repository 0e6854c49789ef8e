use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{AblationTarget, EdgeKind, HeteroGraph, NodeKind, Relation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Short stable name of the broken invariant, e.g. `missing TypeOf`.
    pub code: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, code: &str) -> usize {
        self.violations.iter().filter(|v| v.code == code).count()
    }

    fn push(&mut self, code: impl Into<String>, detail: String) {
        self.violations.push(Violation {
            code: code.into(),
            detail,
        });
    }
}

/// Checks every structural invariant of an IRGraph. Ablated graphs are held
/// to the rules their ablation record implies: mirrored edge kinds may run
/// backwards, and a removed Type kind or TypeOf edge kind lifts the
/// one-TypeOf-per-value rule.
pub fn validate_graph(g: &HeteroGraph) -> ValidationReport {
    let mut r = ValidationReport::default();

    let modules = g.count(NodeKind::Module);
    if modules != 1 {
        r.push("module count", format!("{modules} Module nodes"));
    }

    for kind in NodeKind::ALL {
        let m = g.features(kind);
        let want = g.feature_spec.width(kind);
        if m.ncols() != want {
            r.push(
                "feature width",
                format!("{kind} features are {} wide, spec says {want}", m.ncols()),
            );
        }
        if let Some(i) = m
            .rows()
            .into_iter()
            .position(|row| row.iter().any(|x| !x.is_finite()))
        {
            r.push("non-finite feature", format!("{kind} node {i}"));
        }
    }

    let mirrored = g.ablation.as_ref().map(|a| &a.mirrored);
    for (&rel, list) in &g.edges {
        let allowed = if rel.mirror {
            mirrored.is_some_and(|m| m.contains(&rel.edge)) && rel == rel.edge.forward().mirrored()
        } else {
            rel.edge.native_relations().contains(&rel)
        };
        for (i, &(s, d)) in list.iter().enumerate() {
            if !allowed {
                r.push(
                    format!("{:?} endpoint kind", rel.edge),
                    format!("edge {i} of {rel} ({s} -> {d})"),
                );
            }
            if s as usize >= g.count(rel.src) || d as usize >= g.count(rel.dst) {
                r.push("dangling endpoint", format!("edge {i} of {rel} ({s} -> {d})"));
            }
        }
    }

    let type_of_required = !matches!(
        g.ablation.as_ref().map(|a| a.target),
        Some(AblationTarget::Node(NodeKind::Type)) | Some(AblationTarget::Edge(EdgeKind::TypeOf))
    );
    if type_of_required {
        let mut out_degree = vec![0usize; g.count(NodeKind::Value)];
        for &(s, _) in g.edges(EdgeKind::TypeOf.forward()) {
            if let Some(n) = out_degree.get_mut(s as usize) {
                *n += 1;
            }
        }
        for (v, &n) in out_degree.iter().enumerate() {
            match n {
                1 => {}
                0 => r.push("missing TypeOf", format!("value node {v}")),
                _ => r.push("multiple TypeOf", format!("value node {v} has {n}")),
            }
        }
    }

    let back = Relation::new(EdgeKind::Symbol, NodeKind::Value, NodeKind::Module);
    let mut balance: BTreeMap<(u32, u32), i64> = BTreeMap::new();
    for &(m, v) in g.edges(EdgeKind::Symbol.forward()) {
        *balance.entry((m, v)).or_default() += 1;
    }
    for &(v, m) in g.edges(back) {
        *balance.entry((m, v)).or_default() -= 1;
    }
    for ((m, v), n) in balance {
        if n != 0 {
            r.push(
                "Symbol not reciprocated",
                format!("module {m} / value {v} (imbalance {n})"),
            );
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, FeatureSpec};
    use crate::ir::parse_module;

    fn sample() -> HeteroGraph {
        let text = "\
@g = global i32 7
define i32 @f(i32 %a) {
entry:
  %x = load i32, ptr @g, align 4
  %y = add i32 %x, %a
  ret i32 %y
}
";
        build_graph(&parse_module(text).unwrap(), &FeatureSpec::default()).unwrap()
    }

    #[test]
    fn builder_output_is_valid() {
        let r = validate_graph(&sample());
        assert!(r.is_valid(), "{:?}", r.violations);
    }

    #[test]
    fn missing_type_of_is_reported_once() {
        let mut g = sample();
        let list = g.edges.get_mut(&EdgeKind::TypeOf.forward()).unwrap();
        list.retain(|&(s, _)| s != 1);
        let r = validate_graph(&g);
        assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
        assert_eq!(r.violations[0].code, "missing TypeOf");
    }

    #[test]
    fn cfg_from_a_value_is_reported_once() {
        let mut g = sample();
        let bad = Relation::new(EdgeKind::Cfg, NodeKind::Value, NodeKind::Instruction);
        g.push_edge(bad, 0, 0);
        let r = validate_graph(&g);
        assert_eq!(r.violations.len(), 1, "{:?}", r.violations);
        assert_eq!(r.violations[0].code, "Cfg endpoint kind");
    }

    #[test]
    fn dangling_and_unreciprocated_edges() {
        let mut g = sample();
        g.push_edge(EdgeKind::Symbol.forward(), 0, 2);
        g.push_edge(EdgeKind::Includes.forward(), 0, 99);
        let r = validate_graph(&g);
        assert_eq!(r.count("Symbol not reciprocated"), 1);
        assert_eq!(r.count("dangling endpoint"), 1);
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn mirrors_need_an_ablation_record() {
        let mut g = sample();
        let (s, d) = g.edges(EdgeKind::SizeOf.forward())[0];
        g.push_edge(EdgeKind::SizeOf.forward().mirrored(), d, s);
        assert_eq!(validate_graph(&g).count("SizeOf endpoint kind"), 1);
        g.ablation = Some(crate::graph::AblationRecord {
            target: AblationTarget::Edge(EdgeKind::TypeOf),
            mirrored: [EdgeKind::SizeOf].into_iter().collect(),
        });
        assert!(validate_graph(&g).is_valid());
    }
}
