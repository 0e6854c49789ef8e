//! Relabeling-invariant graph digest by 1-WL color refinement.

use sha2::{Digest, Sha256};

use super::{HeteroGraph, NodeKind, Relation};

type Color = u64;

fn color_of(h: Sha256) -> Color {
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

fn relation_tag(r: Relation) -> [u8; 4] {
    [
        r.edge.index() as u8,
        r.src.index() as u8,
        r.dst.index() as u8,
        r.mirror as u8,
    ]
}

/// SHA-256 digest that depends only on the graph's isomorphism class as seen
/// by color refinement: node ids and edge list order do not matter.
///
/// Initial colors hash the node kind and feature bytes. Each round rehashes a
/// node's color with the sorted multiset of (relation, direction, neighbor
/// color) triples, until the number of color classes stops growing.
pub fn canonical_digest(g: &HeteroGraph) -> [u8; 32] {
    let mut offset = [0usize; 6];
    let mut n = 0;
    for k in NodeKind::ALL {
        offset[k.index()] = n;
        n += g.count(k);
    }

    let mut colors: Vec<Color> = Vec::with_capacity(n);
    for k in NodeKind::ALL {
        for row in g.features(k).rows() {
            let mut h = Sha256::new();
            h.update([k.index() as u8]);
            for x in row {
                h.update(x.to_le_bytes());
            }
            colors.push(color_of(h));
        }
    }

    // (tag, direction, neighbor) per incident edge.
    let mut adj: Vec<Vec<([u8; 4], u8, usize)>> = vec![Vec::new(); n];
    for (&rel, list) in &g.edges {
        let tag = relation_tag(rel);
        for &(s, d) in list {
            let s = offset[rel.src.index()] + s as usize;
            let d = offset[rel.dst.index()] + d as usize;
            adj[s].push((tag, 0, d));
            adj[d].push((tag, 1, s));
        }
    }

    let mut classes = distinct(&colors);
    for _ in 0..n.max(1) {
        let next: Vec<Color> = (0..n)
            .map(|v| {
                let mut around: Vec<([u8; 4], u8, Color)> =
                    adj[v].iter().map(|&(t, dir, u)| (t, dir, colors[u])).collect();
                around.sort_unstable();
                let mut h = Sha256::new();
                h.update(colors[v].to_le_bytes());
                h.update((around.len() as u64).to_le_bytes());
                for (t, dir, c) in around {
                    h.update(t);
                    h.update([dir]);
                    h.update(c.to_le_bytes());
                }
                color_of(h)
            })
            .collect();
        let k = distinct(&next);
        colors = next;
        if k == classes {
            break;
        }
        classes = k;
    }

    colors.sort_unstable();
    let mut h = Sha256::new();
    h.update(b"irgraph-wl-1");
    for k in NodeKind::ALL {
        h.update((g.count(k) as u64).to_le_bytes());
    }
    for (&rel, list) in &g.edges {
        h.update(relation_tag(rel));
        h.update((list.len() as u64).to_le_bytes());
    }
    for c in colors {
        h.update(c.to_le_bytes());
    }
    h.finalize().into()
}

fn distinct(colors: &[Color]) -> usize {
    let mut v = colors.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeKind, FeatureSpec};
    use crate::ir::parse_module;

    fn graph(text: &str) -> HeteroGraph {
        build_graph(&parse_module(text).unwrap(), &FeatureSpec::default()).unwrap()
    }

    const LOOP: &str = "\
define i32 @sum(i32 %n) {
entry:
  br label %loop
loop:
  %i = phi i32 [ 0, %entry ], [ %i.next, %loop ]
  %acc = phi i32 [ 0, %entry ], [ %acc.next, %loop ]
  %acc.next = add i32 %acc, %i
  %i.next = add i32 %i, 1
  %done = icmp eq i32 %i.next, %n
  br i1 %done, label %exit, label %loop
exit:
  ret i32 %acc.next
}
";

    #[test]
    fn invariant_under_relabeling_and_edge_order() {
        let g = graph(LOOP);
        let mut h = g.clone();
        for k in NodeKind::ALL {
            let n = h.count(k) as u32;
            let perm: Vec<u32> = (0..n).map(|i| (i * 7 + 3) % n.max(1)).collect();
            let mut sorted = perm.clone();
            sorted.sort();
            if sorted == (0..n).collect::<Vec<_>>() {
                h.permute(k, &perm);
            } else {
                let rev: Vec<u32> = (0..n).rev().collect();
                h.permute(k, &rev);
            }
        }
        for list in h.edges.values_mut() {
            list.reverse();
        }
        assert_ne!(g.nodes, h.nodes);
        assert_eq!(canonical_digest(&g), canonical_digest(&h));
    }

    #[test]
    fn renaming_keeps_the_digest() {
        let renamed = LOOP
            .replace("%acc", "%total")
            .replace("%i", "%k")
            .replace("%n", "%limit")
            .replace("@sum", "@accumulate");
        assert_eq!(canonical_digest(&graph(LOOP)), canonical_digest(&graph(&renamed)));
    }

    #[test]
    fn swapping_independent_instructions_changes_it() {
        let swapped = LOOP.replace(
            "  %acc.next = add i32 %acc, %i\n  %i.next = add i32 %i, 1\n",
            "  %i.next = add i32 %i, 1\n  %acc.next = add i32 %acc, %i\n",
        );
        assert_ne!(swapped, LOOP);
        let (a, b) = (graph(LOOP), graph(&swapped));
        let cfg = |g: &HeteroGraph| {
            let mut e = g.edges(EdgeKind::Cfg.forward()).to_vec();
            e.sort();
            e
        };
        assert_eq!(cfg(&a).len(), cfg(&b).len());
        assert_ne!(canonical_digest(&a), canonical_digest(&b));
    }
}
