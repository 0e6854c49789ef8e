//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use common::{fixture_graphs, graph_of, pretrain_dir, rename_symbols, signature_table};
use irgraph_core::ablation::run_ablation;
use irgraph_core::bench::{accuracy, make_toy_corpus, pairwise_accuracy, ClassifierConfig, Metric, ToyTask};
use irgraph_core::corpus::load_corpus;
use irgraph_core::gnn::{encode_params, GnnDims, GnnParams};
use irgraph_core::graph::{
    build_graph, canonical_digest, validate_graph, AblationTarget, EdgeKind, FeatureSpec, HeteroGraph,
    NodeKind,
};
use irgraph_core::ir::parse_module;
use irgraph_core::objective::{loss_and_gradients, Objective};
use irgraph_core::prompt::{
    assemble_prompt, finetune, FinetuneConfig, FrozenLm, LmConfig, PromptSample, Segments, Tokenizer,
};
use irgraph_core::rng::stream;
use irgraph_core::store::{decode_graph, encode_graph, StoreError};
use irgraph_core::train::{eval_masked_loss, mask_for_kind, pretrain, TrainConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    check(
        t.elapsed() < limit,
        format!("took {:.1?}, limit {limit:?}", t.elapsed()),
    )
}

fn taxonomy() -> Outcome {
    let t = Instant::now();
    let graphs = fixture_graphs();
    check(graphs.len() >= 20, format!("{} fixtures", graphs.len()))?;
    let table = signature_table();
    let mut seen_edges = std::collections::BTreeSet::new();
    for (name, _, g) in &graphs {
        check(
            g.nodes.len() == NodeKind::ALL.len() && NodeKind::ALL.len() == 6,
            "node kinds",
        )?;
        let report = validate_graph(g);
        check(report.is_valid(), format!("{name}: {:?}", report.violations))?;
        for rel in g.relations() {
            let (_, allowed) = table.iter().find(|(k, _)| *k == rel.edge).unwrap();
            check(!rel.mirror, format!("{name}: stored mirror {rel}"))?;
            check(allowed.contains(&(rel.src, rel.dst)), format!("{name}: {rel}"))?;
            seen_edges.insert(rel.edge);
        }
    }
    check(EdgeKind::ALL.len() == 8, "edge kinds")?;
    within(t, Duration::from_secs(10))?;
    Ok(format!(
        "{} fixtures, {} edge kinds in use, {:.1?}",
        graphs.len(),
        seen_edges.len(),
        t.elapsed()
    ))
}

/// Swaps the first opcode or predicate found for a different one.
fn mutate(text: &str) -> Option<String> {
    const SWAPS: [(&str, &str); 10] = [
        (" = add ", " = sub "),
        (" = sub ", " = add "),
        (" = mul ", " = add "),
        (" = xor ", " = or "),
        (" = and ", " = or "),
        ("icmp eq ", "icmp ne "),
        ("icmp ne ", "icmp eq "),
        ("icmp slt ", "icmp sle "),
        ("icmp sgt ", "icmp sge "),
        ("icmp ult ", "icmp ule "),
    ];
    SWAPS
        .iter()
        .find(|(a, _)| text.contains(a))
        .map(|(a, b)| text.replacen(a, b, 1))
}

fn alpha_invariance() -> Outcome {
    let graphs = fixture_graphs();
    let t = Instant::now();
    let mut same = 0;
    for (name, text, g) in graphs.iter().take(10) {
        let renamed = rename_symbols(text);
        check(&renamed != text, format!("{name}: renaming changed nothing"))?;
        let h = graph_of(name, &renamed);
        check(
            canonical_digest(g) == canonical_digest(&h),
            format!("{name}: renamed digest differs"),
        )?;
        same += 1;
    }
    let mut differ = 0;
    for (name, text, g) in &graphs {
        if differ == 10 {
            break;
        }
        let Some(m) = mutate(text) else { continue };
        let h = graph_of(name, &m);
        check(
            canonical_digest(g) != canonical_digest(&h),
            format!("{name}: mutated digest equal"),
        )?;
        differ += 1;
    }
    check(
        same == 10 && differ == 10,
        format!("{same} renamed, {differ} mutated pairs"),
    )?;
    within(t, Duration::from_secs(5))?;
    Ok(format!(
        "{same} renamed pairs equal, {differ} mutated pairs differ, {:.1?}",
        t.elapsed()
    ))
}

fn hand_census() -> Outcome {
    let g = build_graph(
        &parse_module("define i32 @f(i32 %a) {\nentry:\n  ret i32 %a\n}\n").map_err(|e| e.to_string())?,
        &FeatureSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    // Values @f, %a; types i32, i32 (i32); size 4 bytes; the module; the
    // attribute set of @f; one ret.
    let nodes = BTreeMap::from([
        (NodeKind::Value, 2),
        (NodeKind::Type, 2),
        (NodeKind::Size, 1),
        (NodeKind::Module, 1),
        (NodeKind::Attributes, 1),
        (NodeKind::Instruction, 1),
    ]);
    // @f and %a each have a type; %a feeds the ret; i32 has a size; the
    // function type includes i32; the module and @f link both ways.
    let edges = BTreeMap::from([
        (EdgeKind::TypeOf, 2),
        (EdgeKind::Dataflow, 1),
        (EdgeKind::Attribute, 1),
        (EdgeKind::Cfg, 0),
        (EdgeKind::SizeOf, 1),
        (EdgeKind::Symbol, 2),
        (EdgeKind::Includes, 1),
        (EdgeKind::Contains, 0),
    ]);
    let got_nodes: BTreeMap<_, _> = NodeKind::ALL.iter().map(|&k| (k, g.count(k))).collect();
    let got_edges: BTreeMap<_, _> = EdgeKind::ALL.iter().map(|&k| (k, g.edge_count(k))).collect();
    check(got_nodes == nodes, format!("nodes {got_nodes:?}"))?;
    check(got_edges == edges, format!("edges {got_edges:?}"))?;
    Ok("6 node counts and 8 edge counts match".into())
}

const FD_SRC: &str = "@g = global i32 5
define i32 @f(i32 %a) {
entry:
  %p = load i32, ptr @g, align 4
  %b = mul i32 %a, %p
  %c = icmp eq i32 %b, 0
  br i1 %c, label %x, label %y
x:
  ret i32 1
y:
  ret i32 %b
}
";

fn perturbed(p: &GnnParams, i: usize, d: f64) -> GnnParams {
    let mut q = p.clone();
    let mut j = 0;
    q.for_each_mut(|_, t| {
        for x in t.iter_mut() {
            if j == i {
                *x += d;
            }
            j += 1;
        }
    });
    q
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let g =
        build_graph(&parse_module(FD_SRC).unwrap(), &FeatureSpec::default()).map_err(|e| e.to_string())?;
    let mut p = GnnParams::init(
        &g.feature_spec,
        GnnDims {
            h1: 4,
            h2: 3,
            embed: 6,
        },
        11,
    );
    p.set_classifier(3);
    // Biases start at zero; give them values so their gradients are exercised.
    let mut rng = stream(4, "fd/bias");
    p.for_each_mut(|name, t| {
        if name.contains("bias") {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-0.1..0.1));
        }
    });
    let plan = mask_for_kind(&g, NodeKind::Instruction, 0.5, 1).map_err(|e| e.to_string())?;
    let lm = FrozenLm::new(
        LmConfig {
            dim: 6,
            hidden: 8,
            layers: 2,
            context: 64,
            seed: 2,
        },
        Tokenizer::new(&["yes".into(), "no".into()]),
    );
    let tokens = lm.tokenizer.encode("is it ?");
    let targets = lm.tokenizer.encode("yes");
    let objectives = [
        ("masked", Objective::MaskedNode(&plan)),
        ("classification", Objective::Classification { label: 2 }),
        (
            "soft-prompt",
            Objective::SoftPrompt {
                lm: &lm,
                tokens: &tokens,
                targets: &targets,
            },
        ),
    ];
    let eps = 1e-5;
    let mut summary = Vec::new();
    for (name, obj) in objectives {
        let (_, grads) = loss_and_gradients(&g, &p, obj).map_err(|e| e.to_string())?;
        let analytic = grads.flat();
        let n = analytic.len();
        // 100 coordinates drawn uniformly, plus 100 drawn among those the
        // objective actually reaches, so the check is not dominated by zeros.
        let mut rng = stream(5, &format!("fd/{name}"));
        let live: Vec<usize> = (0..n).filter(|&i| analytic[i] != 0.0).collect();
        let mut coords: Vec<usize> = (0..100).map(|_| rng.gen_range(0..n)).collect();
        coords.extend(live.choose_multiple(&mut rng, 100.min(live.len())));
        let mut worst: f64 = 0.0;
        for &i in &coords {
            let lp = loss_and_gradients(&g, &perturbed(&p, i, eps), obj)
                .map_err(|e| e.to_string())?
                .0;
            let lm_ = loss_and_gradients(&g, &perturbed(&p, i, -eps), obj)
                .map_err(|e| e.to_string())?
                .0;
            let fd = (lp - lm_) / (2.0 * eps);
            // Relative error with a 1e-6 floor on the scale: a central
            // difference at this step cannot resolve slopes below ~1e-10.
            let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-6);
            worst = worst.max(err);
        }
        check(worst <= 1e-4, format!("{name}: worst relative error {worst:.2e}"))?;
        summary.push(format!("{name} {worst:.1e}"));
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "worst relative error: {}; {:.1?}",
        summary.join(", "),
        t.elapsed()
    ))
}

fn pretrain_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-4,
        seed: 7,
        steps: Some(200),
        batch_size: 8,
        mask_rate: 0.15,
        dims: GnnDims {
            h1: 128,
            h2: 128,
            embed: 256,
        },
        ..TrainConfig::default()
    }
}

fn convergence() -> Outcome {
    let t = Instant::now();
    let corpus = load_corpus(&pretrain_dir(), &FeatureSpec::default()).map_err(|e| e.to_string())?;
    check(corpus.len() == 50, format!("{} graphs", corpus.len()))?;
    let cfg = pretrain_config();
    let run = || -> Result<(f64, f64, Vec<u8>, String), String> {
        let mut p = GnnParams::init(&corpus[0].feature_spec, cfg.dims, cfg.seed);
        let before = eval_masked_loss(&corpus, &p, cfg.seed, cfg.mask_rate).map_err(|e| e.to_string())?;
        let log = pretrain(&corpus, &mut p, &cfg).map_err(|e| e.to_string())?;
        let after = eval_masked_loss(&corpus, &p, cfg.seed, cfg.mask_rate).map_err(|e| e.to_string())?;
        let log = serde_json::to_string(&log).unwrap();
        Ok((before, after, encode_params(&p).map_err(|e| e.to_string())?, log))
    };
    let (before, after, bytes, log) = run()?;
    let (before2, after2, bytes2, log2) = run()?;
    check(
        before.to_bits() == before2.to_bits() && after.to_bits() == after2.to_bits(),
        "losses differ between runs",
    )?;
    check(bytes == bytes2, "checkpoints differ between runs")?;
    check(log == log2, "step logs differ between runs")?;
    let ratio = after / before;
    check(
        ratio <= 0.5,
        format!("loss {before:.4} -> {after:.4} (ratio {ratio:.3})"),
    )?;
    within(t, Duration::from_secs(300))?;
    Ok(format!(
        "loss {before:.4} -> {after:.4} (ratio {ratio:.3}), two runs byte-identical, {:.1?}",
        t.elapsed()
    ))
}

fn frozen_lm() -> Outcome {
    let t = Instant::now();
    let lm = FrozenLm::new(LmConfig::default(), Tokenizer::new(&Tokenizer::default_words()));
    let snapshot = lm.clone();
    let digest = lm.digest();
    let graphs = fixture_graphs();
    let tokens = lm.tokenizer.encode("does this function contain a loop ?");
    let samples: Vec<PromptSample> = graphs
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, (_, _, g))| PromptSample {
            graph: g.clone(),
            tokens: tokens.clone(),
            targets: lm.tokenizer.encode(if i % 2 == 0 { "yes" } else { "no" }),
        })
        .collect();
    let mut p = GnnParams::init(&graphs[0].2.feature_spec, GnnDims::default(), 7);
    for s in &samples {
        p.ensure_relations(&s.graph.relations().collect::<Vec<_>>());
    }
    let before = p.flat();
    let cfg = FinetuneConfig {
        epochs: 10,
        seed: 7,
        node_cap: Some(512),
        ..FinetuneConfig::default()
    };
    let log = finetune(&samples, &mut p, &lm, &cfg).map_err(|e| e.to_string())?;
    check(log.len() == 100, format!("{} steps", log.len()))?;
    check(lm.digest() == digest && lm == snapshot, "language model changed")?;
    let after = p.flat();
    check(after.len() == before.len(), "parameter count changed")?;
    let changed = before
        .iter()
        .zip(&after)
        .filter(|(a, b)| a.to_bits() != b.to_bits())
        .count();
    let frac = changed as f64 / before.len() as f64;
    check(
        frac >= 0.99,
        format!("only {:.2}% of {} entries changed", 100.0 * frac, before.len()),
    )?;
    Ok(format!(
        "100 steps, LM digest unchanged, {:.2}% of {} entries changed, {:.1?}",
        100.0 * frac,
        before.len(),
        t.elapsed()
    ))
}

fn prompt_layout() -> Outcome {
    let lm = FrozenLm::new(
        LmConfig {
            dim: 4,
            hidden: 4,
            layers: 1,
            context: 1 << 16,
            seed: 1,
        },
        Tokenizer::new(&[]),
    );
    let special = lm
        .embed_tokens(&[Tokenizer::BOS, Tokenizer::EOS])
        .map_err(|e| e.to_string())?;
    let mut rng = stream(7, "layout");
    for _ in 0..1000 {
        let (v, t) = (rng.gen_range(0..400), rng.gen_range(0..400));
        let graph = Array1::from_elem(4, 9.0);
        let nodes = Array2::from_shape_fn((v, 4), |(i, _)| i as f64 + 1.0);
        let tokens = Array2::from_shape_fn((t, 4), |(i, _)| -(i as f64) - 1.0);
        let seq = assemble_prompt(&graph, &nodes, &tokens, &lm).map_err(|e| e.to_string())?;
        let s = &seq.segments;
        check(
            seq.rows.nrows() == v + t + 3,
            format!("|V|={v} T={t}: {} rows", seq.rows.nrows()),
        )?;
        check(s.rows() == v + t + 3 && *s == Segments::new(v, t), "segment map")?;
        // bos, graph, nodes, tokens, eos in that order with no gaps.
        let order = s.bos == 0
            && s.graph == 1
            && s.nodes == (2..2 + v)
            && s.tokens == (2 + v..2 + v + t)
            && s.eos == 2 + v + t;
        check(order, format!("|V|={v} T={t}: {s:?}"))?;
        let rows_ok = seq.rows.row(0) == special.row(0)
            && seq.rows.row(s.eos) == special.row(1)
            && seq.rows.row(1) == graph.view()
            && s.nodes
                .clone()
                .enumerate()
                .all(|(k, i)| seq.rows.row(i) == nodes.row(k))
            && s.tokens
                .clone()
                .enumerate()
                .all(|(k, i)| seq.rows.row(i) == tokens.row(k));
        check(rows_ok, format!("|V|={v} T={t}: row contents"))?;
    }
    Ok("1000 sizes".into())
}

fn toy_classification() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = make_toy_corpus(ToyTask::CfgLoop, 200, 7, dir.path()).map_err(|e| e.to_string())?;
    let graphs = corpus
        .load_graphs(&FeatureSpec::default())
        .map_err(|e| e.to_string())?;
    let cfg = ClassifierConfig {
        seed: 7,
        ..ClassifierConfig::default()
    };
    check(cfg.epochs <= 30, "more than 30 epochs")?;
    let pairs = corpus.pair_ids();
    let report = run_ablation(
        &graphs,
        &corpus.labels(),
        pairs.as_deref(),
        &[None, Some(AblationTarget::Edge(EdgeKind::Cfg))],
        &cfg,
        Metric::Accuracy,
    )
    .map_err(|e| e.to_string())?;
    let full = report.rows[0].report.value;
    let ablated = report.rows[1].report.value;
    let detail = format!(
        "full {full:.3}, edge:cfg {ablated:.3} on {} held out",
        report.test_items
    );
    check(full >= 0.95, format!("{detail}: full below 0.95"))?;
    check(
        (0.45..=0.55).contains(&ablated),
        format!("{detail}: ablated outside 0.50 +/- 0.05"),
    )?;
    within(t, Duration::from_secs(600))?;
    Ok(format!("{detail}, {:.1?}", t.elapsed()))
}

/// Counts pairs by looking at every (i, j) with i < j.
fn brute_pairwise(preds: &[usize], labels: &[usize], ids: &[u64]) -> f64 {
    let (mut pairs, mut both) = (0, 0);
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if ids[i] == ids[j] {
                pairs += 1;
                if preds[i] == labels[i] && preds[j] == labels[j] {
                    both += 1;
                }
            }
        }
    }
    both as f64 / pairs as f64
}

fn metrics_oracle() -> Outcome {
    let mut rng = stream(7, "metrics");
    for case in 0..1000 {
        let pairs = rng.gen_range(1..50);
        let classes = rng.gen_range(2..5);
        let mut ids: Vec<u64> = (0..2 * pairs).map(|i| (i / 2) as u64 * 13 + 5).collect();
        ids.shuffle(&mut rng);
        let labels: Vec<usize> = (0..2 * pairs).map(|_| rng.gen_range(0..classes)).collect();
        let preds: Vec<usize> = (0..2 * pairs).map(|_| rng.gen_range(0..classes)).collect();
        let p = pairwise_accuracy(&preds, &labels, &ids).map_err(|e| e.to_string())?;
        let b = brute_pairwise(&preds, &labels, &ids);
        check(p == b, format!("case {case}: {p} vs {b}"))?;
        let a = accuracy(&preds, &labels).map_err(|e| e.to_string())?;
        check(p <= a, format!("case {case}: pairwise {p} > accuracy {a}"))?;
    }
    Ok("1000 sets".into())
}

fn is_format(r: Result<HeteroGraph, StoreError>) -> bool {
    matches!(r, Err(StoreError::Format(_)))
}

fn serialization() -> Outcome {
    let mut rng = stream(7, "corrupt");
    let graphs = fixture_graphs();
    let mut corruptions = 0;
    for (name, _, g) in &graphs {
        let bytes = encode_graph(g).map_err(|e| e.to_string())?;
        check(
            encode_graph(g).map_err(|e| e.to_string())? == bytes,
            format!("{name}: double save differs"),
        )?;
        let back = decode_graph(&bytes).map_err(|e| format!("{name}: {e}"))?;
        check(&back == g, format!("{name}: round trip differs"))?;

        let mut bad = Vec::new();
        let mut b = bytes.clone();
        b[rng.gen_range(0..8)] ^= rng.gen_range(1..=255u8);
        bad.push(("magic", b));
        let mut b = bytes.clone();
        b[8] = b[8].wrapping_add(rng.gen_range(1..=255u8));
        bad.push(("version", b));
        for _ in 0..20 {
            bad.push(("truncated", bytes[..rng.gen_range(0..bytes.len())].to_vec()));
        }
        let mut b = bytes.clone();
        b.push(rng.gen());
        bad.push(("trailing byte", b));
        // The last eight bytes are the final edge's (src, dst).
        let mut b = bytes.clone();
        let n = b.len();
        b[n - 4..].copy_from_slice(&(u32::MAX - rng.gen_range(0..1000u32)).to_le_bytes());
        bad.push(("endpoint", b));
        // The relation section is a u32 count then, per relation, 4 header
        // bytes, a u32 length and 8 bytes per edge.
        let section: usize = g.edges.values().map(|l| 8 + 8 * l.len()).sum::<usize>() + 4;
        let mut b = bytes.clone();
        b[n - section + 4] = rng.gen_range(8..=255u8);
        bad.push(("relation", b));

        for (what, b) in bad {
            check(
                is_format(decode_graph(&b)),
                format!("{name}: {what} corruption accepted"),
            )?;
            corruptions += 1;
        }
    }
    Ok(format!(
        "{} fixtures round trip, {corruptions} corruptions rejected",
        graphs.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("graph taxonomy", taxonomy),
        ("alpha-invariance", alpha_invariance),
        ("hand-oracle census", hand_census),
        ("gradient correctness", gradients),
        ("masked pretraining convergence", convergence),
        ("frozen language model", frozen_lm),
        ("prompt layout", prompt_layout),
        ("toy classification and ablation", toy_classification),
        ("metrics oracle", metrics_oracle),
        ("serialization", serialization),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(d) => println!("criterion {} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
