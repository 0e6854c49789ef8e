mod common;

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use irgraph_core::bench::{accuracy, holdout_split, pairwise_accuracy};
use irgraph_core::gnn::{forward, GnnDims, GnnParams};
use irgraph_core::graph::{canonical_digest, validate_graph, HeteroGraph, NodeKind};
use irgraph_core::prompt::{assemble_prompt, FrozenLm, LmConfig, Segments, Tokenizer};
use irgraph_core::store::{decode_graph, encode_graph};
use irgraph_core::train::mask_for_kind;

const SMALL: &str = "@g = global [2 x i32] [i32 3, i32 4], align 4
declare i32 @ext(ptr)
define i32 @f(i32 %a, ptr %p) nounwind {
entry:
  %x = load i32, ptr %p, align 4
  %s = add nsw i32 %a, %x
  %c = icmp sgt i32 %s, 10
  br i1 %c, label %big, label %small
big:
  %r = call i32 @ext(ptr @g)
  br label %small
small:
  %m = phi i32 [ %s, %entry ], [ %r, %big ]
  ret i32 %m
}
";

fn tiny_lm() -> FrozenLm {
    FrozenLm::new(
        LmConfig {
            dim: 3,
            hidden: 4,
            layers: 1,
            context: 1 << 16,
            seed: 0,
        },
        Tokenizer::new(&[]),
    )
}

/// Independent reading of the pairwise rule: enumerate the two members of
/// every pair id and count the pairs with both right.
fn brute_pairwise(preds: &[usize], labels: &[usize], ids: &[u64]) -> f64 {
    let mut members: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        members.entry(id).or_default().push(i);
    }
    let mut both = 0;
    for m in members.values() {
        assert_eq!(m.len(), 2);
        if preds[m[0]] == labels[m[0]] && preds[m[1]] == labels[m[1]] {
            both += 1;
        }
    }
    both as f64 / members.len() as f64
}

/// Labels, predictions and shuffled pair ids for `pairs` pairs.
fn paired_sets() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<u64>)> {
    (1usize..60, 2usize..5).prop_flat_map(|(pairs, classes)| {
        let n = 2 * pairs;
        (
            proptest::collection::vec(0..classes, n),
            proptest::collection::vec(0..classes, n),
            Just((0..n as u64).map(|i| i / 2 * 7 + 3).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prompt_rows_follow_the_layout(v in 0usize..300, t in 0usize..300) {
        let lm = tiny_lm();
        let graph = Array1::from_elem(3, 0.5);
        let nodes = Array2::from_shape_fn((v, 3), |(i, j)| (i * 3 + j) as f64 + 1.0);
        let tokens = Array2::from_shape_fn((t, 3), |(i, j)| -((i * 3 + j) as f64) - 1.0);
        let seq = assemble_prompt(&graph, &nodes, &tokens, &lm).unwrap();
        prop_assert_eq!(seq.rows.nrows(), v + t + 3);
        let s = &seq.segments;
        prop_assert_eq!(s, &Segments::new(v, t));
        // Every row belongs to exactly one segment.
        let mut owner = vec![0u8; v + t + 3];
        owner[s.bos] += 1;
        owner[s.graph] += 1;
        owner[s.eos] += 1;
        for i in s.nodes.clone().chain(s.tokens.clone()) {
            owner[i] += 1;
        }
        prop_assert!(owner.iter().all(|&c| c == 1));
        prop_assert_eq!((s.bos, s.graph, s.eos), (0, 1, v + t + 2));
        let special = lm.embed_tokens(&[Tokenizer::BOS, Tokenizer::EOS]).unwrap();
        prop_assert_eq!(seq.rows.row(s.bos), special.row(0));
        prop_assert_eq!(seq.rows.row(s.eos), special.row(1));
        prop_assert_eq!(seq.rows.row(s.graph), graph.view());
        for (k, i) in s.nodes.clone().enumerate() {
            prop_assert_eq!(seq.rows.row(i), nodes.row(k));
        }
        for (k, i) in s.tokens.clone().enumerate() {
            prop_assert_eq!(seq.rows.row(i), tokens.row(k));
        }
    }

    #[test]
    fn pairwise_matches_enumeration((labels, preds, ids) in paired_sets()) {
        let p = pairwise_accuracy(&preds, &labels, &ids).unwrap();
        prop_assert_eq!(p, brute_pairwise(&preds, &labels, &ids));
        prop_assert!(p <= accuracy(&preds, &labels).unwrap());
    }
}

fn small_graph() -> HeteroGraph {
    common::graph_of("small.ll", SMALL)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabeling_nodes_changes_neither_digest_nor_embedding(
        kind in prop::sample::select(NodeKind::ALL.to_vec()),
        seed in any::<u64>(),
    ) {
        let g = small_graph();
        let n = g.count(kind) as u32;
        let mut perm: Vec<u32> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut irgraph_core::rng::stream(seed, "perm"));
        let mut h = g.clone();
        h.permute(kind, &perm);
        prop_assert!(validate_graph(&h).is_valid());
        prop_assert_eq!(canonical_digest(&g), canonical_digest(&h));
        let p = GnnParams::init(&g.feature_spec, GnnDims { h1: 8, h2: 8, embed: 5 }, 3);
        let (_, a) = forward(&g, &p).unwrap();
        let (_, b) = forward(&h, &p).unwrap();
        for (x, y) in a.0.iter().zip(b.0.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {}", x, y);
        }
        // Relabeled graphs still round trip exactly.
        prop_assert_eq!(decode_graph(&encode_graph(&h).unwrap()).unwrap(), h);
    }

    #[test]
    fn mask_plans_are_sorted_sized_and_seeded(
        kind in prop::sample::select(vec![NodeKind::Value, NodeKind::Type, NodeKind::Instruction, NodeKind::Size]),
        rate in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let g = small_graph();
        let n = g.count(kind);
        let plan = mask_for_kind(&g, kind, rate, seed).unwrap();
        let want = ((rate * n as f64).round() as usize).clamp(1, n);
        prop_assert_eq!(plan.masked_ids.len(), want);
        prop_assert!(plan.masked_ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.masked_ids.iter().all(|&i| (i as usize) < n));
        prop_assert_eq!(mask_for_kind(&g, kind, rate, seed).unwrap(), plan);
    }

    #[test]
    fn holdout_keeps_pairs_together(pairs in 1usize..80, singles in 0usize..20, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let mut groups: Vec<Option<u64>> = (0..2 * pairs).map(|i| Some(i as u64 / 2)).collect();
        groups.extend(std::iter::repeat_n(None, singles));
        let (train, test) = holdout_split(&groups, frac, seed);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..groups.len()).collect::<Vec<_>>());
        for &i in &test {
            if let Some(id) = groups[i] {
                prop_assert!(!train.iter().any(|&j| groups[j] == Some(id)));
            }
        }
        let units = pairs + singles;
        let want = ((frac * units as f64).round() as usize).min(units);
        let test_units = test.iter().filter(|&&i| groups[i].is_none()).count()
            + test.iter().filter(|&&i| groups[i].is_some()).count() / 2;
        prop_assert_eq!(test_units, want);
    }

    #[test]
    fn known_words_round_trip_through_the_tokenizer(
        words in proptest::collection::vec(prop::sample::select(Tokenizer::default_words()), 0..40),
    ) {
        let tok = Tokenizer::new(&Tokenizer::default_words());
        let text = words.join(" ");
        let ids = tok.encode(&text);
        prop_assert_eq!(ids.len(), words.len());
        prop_assert_eq!(tok.decode(&ids), text);
    }
}
