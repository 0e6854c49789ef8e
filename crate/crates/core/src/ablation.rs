//! Removing one node or edge kind from graphs and retraining without it.
//!
//! When a removal leaves some node kind with no edge arriving from a
//! different kind, the edge kinds leaving that kind are mirrored so it still
//! receives messages. A stranded kind with no outgoing edges keeps only its
//! self-loop and is reported as feature-only. The rule works on the edge
//! signature table, so every graph gets the same fix-up.

use std::collections::BTreeSet;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{
    evaluate, holdout_split, train_classifier, BenchError, ClassifierConfig, EvalReport, Metric,
};
use crate::gnn::GnnParams;
use crate::graph::{AblationRecord, AblationTarget, EdgeKind, HeteroGraph, NodeKind};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AblationError {
    #[error("the module node kind cannot be removed")]
    CannotAblateModule,
    #[error("graph is already ablated ({0})")]
    AlreadyAblated(AblationTarget),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub target: AblationTarget,
    /// Edge kinds given a reversed copy.
    pub bidirectionalize: BTreeSet<EdgeKind>,
    /// Remaining kinds that receive no messages at all.
    pub feature_only: BTreeSet<NodeKind>,
}

impl AblationSpec {
    pub fn new(target: AblationTarget) -> Result<AblationSpec, AblationError> {
        if target == AblationTarget::Node(NodeKind::Module) {
            return Err(AblationError::CannotAblateModule);
        }
        let edges: Vec<EdgeKind> = EdgeKind::ALL
            .into_iter()
            .filter(|&e| {
                let (s, d) = e.signature();
                match target {
                    AblationTarget::Edge(x) => e != x,
                    AblationTarget::Node(k) => s != k && d != k,
                }
            })
            .collect();
        let mut spec = AblationSpec {
            target,
            bidirectionalize: BTreeSet::new(),
            feature_only: BTreeSet::new(),
        };
        for kind in NodeKind::ALL {
            if target == AblationTarget::Node(kind) {
                continue;
            }
            let reached = edges
                .iter()
                .flat_map(|e| e.native_relations())
                .any(|r| r.dst == kind && r.src != kind);
            if reached {
                continue;
            }
            let outgoing: Vec<EdgeKind> = edges
                .iter()
                .copied()
                .filter(|e| !e.is_bidirectional() && e.signature().0 == kind)
                .collect();
            if outgoing.is_empty() {
                spec.feature_only.insert(kind);
            } else {
                spec.bidirectionalize.extend(outgoing);
            }
        }
        Ok(spec)
    }
}

/// A copy of `g` without the target kind, with mirrored edges added.
pub fn ablate(g: &HeteroGraph, target: AblationTarget) -> Result<HeteroGraph, AblationError> {
    if let Some(a) = &g.ablation {
        return Err(AblationError::AlreadyAblated(a.target));
    }
    let spec = AblationSpec::new(target)?;
    let mut out = g.clone();
    match target {
        AblationTarget::Node(k) => {
            out.nodes[k.index()] = Array2::zeros((0, g.feature_spec.width(k)));
            out.edges.retain(|r, _| r.src != k && r.dst != k);
        }
        AblationTarget::Edge(e) => out.edges.retain(|r, _| r.edge != e),
    }
    for &e in &spec.bidirectionalize {
        let fwd = e.forward();
        if let Some(list) = out.edges.get(&fwd) {
            let rev: Vec<(u32, u32)> = list.iter().map(|&(s, d)| (d, s)).collect();
            out.edges.insert(fwd.mirrored(), rev);
        }
    }
    out.ablation = Some(AblationRecord {
        target,
        mirrored: spec.bidirectionalize,
    });
    Ok(out)
}

/// The full graph plus every removable node kind and every edge kind.
pub fn ablation_targets() -> Vec<Option<AblationTarget>> {
    let mut v = vec![None];
    v.extend(
        NodeKind::ALL
            .into_iter()
            .filter(|&k| k != NodeKind::Module)
            .map(|k| Some(AblationTarget::Node(k))),
    );
    v.extend(EdgeKind::ALL.into_iter().map(|e| Some(AblationTarget::Edge(e))));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub mirrored: Vec<EdgeKind>,
    pub feature_only: Vec<NodeKind>,
    pub report: EvalReport,
    /// Metric minus the full-graph metric.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub metric: String,
    pub train_items: usize,
    pub test_items: usize,
    pub rows: Vec<AblationRow>,
}

/// Trains one classifier per variant from the same seed and split, and
/// evaluates each on the held-out items. Input graphs are not modified.
pub fn run_ablation(
    graphs: &[HeteroGraph],
    labels: &[usize],
    pair_ids: Option<&[u64]>,
    targets: &[Option<AblationTarget>],
    cfg: &ClassifierConfig,
    metric: Metric,
) -> Result<AblationReport, BenchError> {
    let first = graphs
        .first()
        .ok_or_else(|| BenchError::InvalidArgument("empty corpus".into()))?;
    let groups: Vec<Option<u64>> = match pair_ids {
        Some(ids) => ids.iter().map(|&i| Some(i)).collect(),
        None => vec![None; graphs.len()],
    };
    let (train, test) = holdout_split(&groups, cfg.holdout, cfg.seed);
    if train.is_empty() || test.is_empty() {
        return Err(BenchError::InvalidArgument(
            "holdout leaves an empty split".into(),
        ));
    }
    let pick = |idx: &[usize], v: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let train_labels = pick(&train, labels);
    let test_labels = pick(&test, labels);
    let test_pairs: Option<Vec<u64>> = pair_ids.map(|ids| test.iter().map(|&i| ids[i]).collect());

    let rows: Vec<Result<(AblationRow, bool), BenchError>> = targets
        .par_iter()
        .map(|&target| {
            let (variant, view, spec) = match target {
                None => ("full".to_string(), graphs.to_vec(), None),
                Some(t) => {
                    let spec =
                        AblationSpec::new(t).map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
                    let v = graphs
                        .iter()
                        .map(|g| ablate(g, t))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
                    (t.to_string(), v, Some(spec))
                }
            };
            let tr: Vec<HeteroGraph> = train.iter().map(|&i| view[i].clone()).collect();
            let te: Vec<HeteroGraph> = test.iter().map(|&i| view[i].clone()).collect();
            let mut p = GnnParams::init(&first.feature_spec, cfg.dims, cfg.seed);
            train_classifier(&tr, &train_labels, &mut p, cfg)?;
            let report = evaluate(&te, &test_labels, test_pairs.as_deref(), &p, metric, &variant)?;
            Ok((
                AblationRow {
                    variant,
                    mirrored: spec
                        .as_ref()
                        .map(|s| s.bidirectionalize.iter().copied().collect())
                        .unwrap_or_default(),
                    feature_only: spec
                        .map(|s| s.feature_only.into_iter().collect())
                        .unwrap_or_default(),
                    report,
                    delta: 0.0,
                },
                target.is_none(),
            ))
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut full = None;
    for r in rows {
        let (row, is_full) = r?;
        if is_full {
            full = Some(row.report.value);
        }
        out.push(row);
    }
    if let Some(base) = full {
        for row in &mut out {
            row.delta = row.report.value - base;
        }
    }
    Ok(AblationReport {
        metric: metric.name().to_string(),
        train_items: train.len(),
        test_items: test.len(),
        rows: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, validate_graph, FeatureSpec};
    use crate::ir::parse_module;
    use AblationTarget::{Edge, Node};
    use EdgeKind::*;

    const SRC: &str = "@g = global [2 x i32] [i32 1, i32 2], align 4\ndeclare void @h(ptr nocapture)\ndefine i32 @f(i32 %a) nounwind {\nentry:\n  %p = alloca i32, align 4\n  store i32 %a, ptr %p, align 4\n  %v = load i32, ptr %p, align 4\n  %c = icmp eq i32 %v, 0\n  br i1 %c, label %x, label %y\nx:\n  call void @h(ptr %p)\n  ret i32 1\ny:\n  ret i32 %v\n}\n";

    fn graph() -> HeteroGraph {
        build_graph(&parse_module(SRC).unwrap(), &FeatureSpec::default()).unwrap()
    }

    #[test]
    fn mirror_table_matches_hand_derivation() {
        let set = |v: &[EdgeKind]| v.iter().copied().collect::<BTreeSet<_>>();
        let kinds = |v: &[NodeKind]| v.iter().copied().collect::<BTreeSet<_>>();
        let cases: Vec<(AblationTarget, Vec<EdgeKind>, Vec<NodeKind>)> = vec![
            (
                Node(NodeKind::Value),
                vec![SizeOf, Includes, Cfg],
                vec![NodeKind::Module, NodeKind::Attributes],
            ),
            (Node(NodeKind::Type), vec![], vec![NodeKind::Size]),
            (Node(NodeKind::Size), vec![], vec![]),
            (Node(NodeKind::Attributes), vec![], vec![]),
            (Node(NodeKind::Instruction), vec![], vec![]),
            (Edge(TypeOf), vec![SizeOf, Includes], vec![]),
            (Edge(Dataflow), vec![Cfg], vec![]),
            (Edge(Attribute), vec![], vec![NodeKind::Attributes]),
            (Edge(Cfg), vec![], vec![]),
            (Edge(SizeOf), vec![], vec![NodeKind::Size]),
            (Edge(Symbol), vec![], vec![NodeKind::Module]),
            (Edge(Includes), vec![], vec![]),
            (Edge(Contains), vec![], vec![]),
        ];
        for (t, mirrored, feature_only) in cases {
            let s = AblationSpec::new(t).unwrap();
            assert_eq!(s.bidirectionalize, set(&mirrored), "{t}");
            assert_eq!(s.feature_only, kinds(&feature_only), "{t}");
        }
        assert_eq!(
            AblationSpec::new(Node(NodeKind::Module)),
            Err(AblationError::CannotAblateModule)
        );
    }

    #[test]
    fn node_removal_deletes_incident_edges_only() {
        let g = graph();
        let before = g.clone();
        let a = ablate(&g, Node(NodeKind::Attributes)).unwrap();
        assert_eq!(g, before);
        assert_eq!(a.count(NodeKind::Attributes), 0);
        assert_eq!(a.edge_count(Attribute), 0);
        for k in NodeKind::ALL.into_iter().filter(|&k| k != NodeKind::Attributes) {
            assert_eq!(a.features(k), g.features(k));
        }
        for e in EdgeKind::ALL.into_iter().filter(|&e| e != Attribute) {
            assert_eq!(a.edge_count(e), g.edge_count(e), "{e}");
        }
        assert!(validate_graph(&a).is_valid(), "{:?}", validate_graph(&a));
    }

    #[test]
    fn edge_removal_and_mirrors_validate() {
        let g = graph();
        for t in ablation_targets().into_iter().flatten() {
            let a = ablate(&g, t).unwrap();
            let r = validate_graph(&a);
            assert!(r.is_valid(), "{t}: {r:?}");
        }
        let a = ablate(&g, Edge(Cfg)).unwrap();
        assert_eq!(a.edge_count(Cfg), 0);
        assert_eq!(a.count(NodeKind::Instruction), g.count(NodeKind::Instruction));
        let a = ablate(&g, Edge(TypeOf)).unwrap();
        let fwd = SizeOf.forward();
        let want: Vec<(u32, u32)> = g.edges(fwd).iter().map(|&(s, d)| (d, s)).collect();
        assert_eq!(a.edges(fwd.mirrored()), &want[..]);
        assert!(matches!(
            ablate(&a, Edge(Cfg)),
            Err(AblationError::AlreadyAblated(_))
        ));
        assert_eq!(
            ablate(&g, Node(NodeKind::Module)),
            Err(AblationError::CannotAblateModule)
        );
    }

    #[test]
    fn fourteen_variants() {
        let t = ablation_targets();
        assert_eq!(t.len(), 14);
        assert_eq!(t.iter().filter(|x| matches!(x, Some(Node(_)))).count(), 5);
        assert_eq!(t.iter().filter(|x| matches!(x, Some(Edge(_)))).count(), 8);
    }
}
