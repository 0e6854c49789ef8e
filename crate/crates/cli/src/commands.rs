use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use irgraph_core::ablation::{ablation_targets, run_ablation};
use irgraph_core::bench::{
    evaluate, holdout_split, make_toy_corpus, train_classifier, ClassifierConfig, LabeledCorpus, Metric,
    ToyTask,
};
use irgraph_core::corpus::{load_corpus, load_graph_file};
use irgraph_core::gnn::{load_params, save_params, Forward, GnnParams};
use irgraph_core::graph::{
    canonical_digest, graph_from_source, validate_graph, AblationTarget, BuildOptions, FeatureSpec,
    HeteroGraph, NodeKind,
};
use irgraph_core::ir::{parse_module_with, subset_report, IrModule, ParseOptions};
use irgraph_core::prompt::{
    finetune, load_lm, prefix_rows, save_lm, save_prefix, FinetuneConfig, FrozenLm, LmConfig, PromptSample,
    Tokenizer,
};
use irgraph_core::store::{load_graph, save_graph};
use irgraph_core::train::{pretrain, TrainConfig};

use crate::config::{resolve, Overrides};
use crate::error::usage;
use crate::{
    AblateArgs, Cli, Command, EmbedArgs, EvalArgs, FinetuneArgs, GraphArgs, MakeCorpusArgs, MakeLmArgs,
    ModelFlags, OptimFlags, ParseArgs, PretrainArgs, PromptExportArgs, TrainArgs,
};

struct Ctx {
    json: bool,
    spec: FeatureSpec,
    spec_path: Option<PathBuf>,
}

impl Ctx {
    /// Prints `value` under `--json`, else the human-readable `text`.
    fn emit(&self, value: &Value, text: impl FnOnce() -> String) {
        if self.json {
            print_line(&value.to_string());
        } else {
            print_line(&text());
        }
    }
}

/// Writes a line to stdout; a closed pipe (`irgraph ... | head`) is not an error.
fn print_line(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
}

pub fn run(cli: Cli) -> Result<()> {
    if let Ok(v) = std::env::var("IRGRAPH_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("IRGRAPH_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let spec = match &cli.feature_spec {
        Some(p) => {
            FeatureSpec::from_json(&read_text(p)?).with_context(|| format!("feature spec {}", p.display()))?
        }
        None => FeatureSpec::default(),
    };
    let ctx = Ctx {
        json: cli.json,
        spec,
        spec_path: cli.feature_spec,
    };
    match cli.command {
        Command::Parse(a) => parse(&ctx, a),
        Command::Graph(a) => graph(&ctx, a),
        Command::Pretrain(a) => pretrain_cmd(&ctx, a),
        Command::Finetune(a) => finetune_cmd(&ctx, a),
        Command::Embed(a) => embed(&ctx, a),
        Command::PromptExport(a) => prompt_export(&ctx, a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::MakeCorpus(a) => make_corpus(&ctx, a),
        Command::MakeLm(a) => make_lm(&ctx, a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `<path><suffix>`, e.g. `ckpt` -> `ckpt.config.json`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Missing-file errors name the path before the loader's own message.
fn load_any_graph(path: &Path, spec: &FeatureSpec) -> Result<HeteroGraph> {
    if !path.exists() {
        return Err(std::io::Error::from(std::io::ErrorKind::NotFound))
            .with_context(|| format!("cannot read {}", path.display()));
    }
    Ok(load_graph_file(path, spec)?)
}

fn load_checkpoint(path: &Path) -> Result<GnnParams> {
    load_params(path).with_context(|| format!("loading encoder checkpoint {}", path.display()))
}

fn manifest_path(corpus: &Path) -> PathBuf {
    if corpus.is_file() {
        corpus.to_path_buf()
    } else {
        corpus.join("manifest.jsonl")
    }
}

fn parse_metric(name: &str) -> Result<Metric> {
    Metric::from_name(name).ok_or_else(|| {
        usage(format!(
            "unknown metric `{name}` (accuracy, error-rate, pairwise)"
        ))
    })
}

fn parse_task(name: &str) -> Result<ToyTask> {
    ToyTask::from_name(name)
        .ok_or_else(|| usage(format!("unknown task `{name}` (cfg-loop, value-kind, pairwise)")))
}

fn optim_overrides(o: &OptimFlags) -> Overrides {
    vec![
        ("seed", o.seed.map(Value::from)),
        ("learning_rate", o.learning_rate.map(Value::from)),
        ("epochs", o.epochs.map(Value::from)),
        ("weight_decay", o.weight_decay.map(Value::from)),
    ]
}

fn model_overrides(m: &ModelFlags) -> Overrides {
    vec![
        ("dims.h1", m.hidden.map(Value::from)),
        ("dims.h2", m.hidden.map(Value::from)),
        ("dims.embed", m.embed.map(Value::from)),
    ]
}

/// Run record stored next to every trained artifact.
fn run_record(ctx: &Ctx, command: &str, inputs: Value, config: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": inputs,
        "feature_spec_path": ctx.spec_path.as_ref().map(|p| p.display().to_string()),
        "config": config,
    })
}

fn module_summary(m: &IrModule) -> Value {
    let defined = m.functions.iter().filter(|f| !f.is_declaration).count();
    let skipped: Vec<Value> = m
        .skipped
        .iter()
        .map(|s| json!({"construct": s.construct, "line": s.pos.line, "col": s.pos.col}))
        .collect();
    json!({
        "functions": defined,
        "declarations": m.functions.len() - defined,
        "globals": m.globals.len(),
        "instructions": m.instruction_count(),
        "values": m.values.len(),
        "types": m.types.len(),
        "skipped": skipped,
    })
}

fn parse(ctx: &Ctx, a: ParseArgs) -> Result<()> {
    let text = read_text(&a.file)?;
    let subset: Option<BTreeMap<String, usize>> = a
        .report_subset
        .then(|| subset_report(&text).into_iter().collect());
    let opts = if a.lenient {
        ParseOptions::lenient()
    } else {
        ParseOptions::default()
    };
    let parsed = parse_module_with(&text, opts);
    // The subset report is useful precisely when the strict parse fails.
    if let (Err(_), Some(s)) = (&parsed, &subset) {
        ctx.emit(&json!({"file": a.file, "subset": s}), || subset_text(s));
    }
    let m = parsed.with_context(|| a.file.display().to_string())?;
    let mut out = module_summary(&m);
    out["file"] = json!(a.file);
    if let Some(s) = &subset {
        out["subset"] = json!(s);
    }
    ctx.emit(&out, || {
        let mut t = format!(
            "{}: {} functions, {} declarations, {} globals, {} instructions, {} skipped",
            a.file.display(),
            out["functions"],
            out["declarations"],
            out["globals"],
            out["instructions"],
            m.skipped.len()
        );
        if let Some(s) = &subset {
            t.push('\n');
            t.push_str(&subset_text(s));
        }
        t
    });
    Ok(())
}

fn subset_text(s: &BTreeMap<String, usize>) -> String {
    if s.is_empty() {
        return "every construct is inside the supported subset".into();
    }
    s.iter()
        .map(|(k, n)| format!("  {k}: {n}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn census_json(g: &HeteroGraph) -> Value {
    let nodes: BTreeMap<&str, usize> = g.node_census().into_iter().map(|(k, n)| (k.name(), n)).collect();
    let edges: BTreeMap<&str, usize> = g.edge_census().into_iter().map(|(k, n)| (k.name(), n)).collect();
    json!({"nodes": nodes, "edges": edges, "digest": hex(&canonical_digest(g))})
}

fn graph(ctx: &Ctx, a: GraphArgs) -> Result<()> {
    let g = if a.file.extension().is_some_and(|e| e == "irg") {
        load_graph(&a.file)?
    } else {
        let text = read_text(&a.file)?;
        let name = a
            .file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parse = if a.lenient {
            ParseOptions::lenient()
        } else {
            ParseOptions::default()
        };
        graph_from_source(
            &name,
            &text,
            &ctx.spec,
            parse,
            BuildOptions { lenient: a.lenient },
        )
        .with_context(|| a.file.display().to_string())?
    };
    let report = validate_graph(&g);
    if !report.is_valid() {
        let first: Vec<String> = report.violations.iter().take(5).map(|v| v.to_string()).collect();
        anyhow::bail!(
            "{}: built graph violates {} invariants: {}",
            a.file.display(),
            report.violations.len(),
            first.join("; ")
        );
    }
    if let Some(out) = &a.output {
        save_graph(&g, out)?;
    }
    let mut v = census_json(&g);
    v["file"] = json!(a.file);
    v["output"] = json!(a.output);
    ctx.emit(&v, || {
        let mut t = format!(
            "{}: digest {}",
            a.file.display(),
            v["digest"].as_str().unwrap_or("")
        );
        for (title, key) in [("nodes", "nodes"), ("edges", "edges")] {
            t.push_str(&format!("\n{title}:"));
            if let Some(m) = v[key].as_object() {
                for (k, n) in m {
                    t.push_str(&format!(" {k}={n}"));
                }
            }
        }
        if let Some(o) = &a.output {
            t.push_str(&format!("\nwrote {}", o.display()));
        }
        t
    });
    Ok(())
}

fn pretrain_cmd(ctx: &Ctx, a: PretrainArgs) -> Result<()> {
    let mut ov = optim_overrides(&a.optim);
    ov.extend(model_overrides(&a.model));
    ov.extend([
        ("steps", a.steps.map(Value::from)),
        ("batch_size", a.batch_size.map(Value::from)),
        ("mask_rate", a.mask_rate.map(Value::from)),
    ]);
    let (cfg, resolved): (TrainConfig, Value) = resolve(a.optim.config.as_deref(), ov, true)?;
    cfg.check()?;
    let corpus = load_corpus(&a.corpus, &ctx.spec)?;
    let spec = &corpus[0].feature_spec;
    let mut p = GnnParams::init(spec, cfg.dims, cfg.seed);
    let log = pretrain(&corpus, &mut p, &cfg)?;
    save_params(&p, &a.output)?;
    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| sidecar(&a.output, ".metrics.jsonl"));
    write_json_lines(&log_path, &log)?;
    let record = run_record(
        ctx,
        "pretrain",
        json!({"corpus": a.corpus, "graphs": corpus.len()}),
        resolved,
    );
    write_json(&sidecar(&a.output, ".config.json"), &record)?;
    let (first, last) = (log.first().map(|l| l.loss), log.last().map(|l| l.loss));
    let v = json!({
        "output": a.output,
        "log": log_path,
        "graphs": corpus.len(),
        "steps": log.len(),
        "first_loss": first,
        "last_loss": last,
    });
    ctx.emit(&v, || {
        format!(
            "pretrained on {} graphs for {} steps (loss {} -> {}); wrote {}",
            corpus.len(),
            log.len(),
            first.map_or("-".into(), |l| format!("{l:.4}")),
            last.map_or("-".into(), |l| format!("{l:.4}")),
            a.output.display()
        )
    });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    /// Graph file relative to the samples file.
    graph: String,
    question: String,
    answer: String,
}

fn read_samples(path: &Path, lm: &FrozenLm, spec: &FeatureSpec) -> Result<Vec<PromptSample>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SampleLine =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(PromptSample {
            graph: load_any_graph(&root.join(&s.graph), spec)?,
            tokens: lm.tokenizer.encode(&s.question),
            targets: lm.tokenizer.encode(&s.answer),
        });
    }
    if out.is_empty() {
        return Err(usage(format!("{}: no samples", path.display())));
    }
    Ok(out)
}

fn finetune_cmd(ctx: &Ctx, a: FinetuneArgs) -> Result<()> {
    let mut ov = optim_overrides(&a.optim);
    ov.push(("node_cap", a.node_cap.map(Value::from)));
    let (cfg, resolved): (FinetuneConfig, Value) = resolve(a.optim.config.as_deref(), ov, true)?;
    let lm = load_lm(&a.lm).with_context(|| format!("loading language model {}", a.lm.display()))?;
    let mut p = load_checkpoint(&a.gnn)?;
    let samples_path = if a.corpus.is_dir() {
        a.corpus.join("samples.jsonl")
    } else {
        a.corpus.clone()
    };
    let samples = read_samples(&samples_path, &lm, &ctx.spec)?;
    let digest = lm.digest();
    let log = finetune(&samples, &mut p, &lm, &cfg)?;
    debug_assert_eq!(digest, lm.digest());
    save_params(&p, &a.output)?;
    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| sidecar(&a.output, ".metrics.jsonl"));
    write_json_lines(&log_path, &log)?;
    let inputs = json!({"samples": samples_path, "lm": a.lm, "gnn": a.gnn, "lm_digest": hex(&digest)});
    write_json(
        &sidecar(&a.output, ".config.json"),
        &run_record(ctx, "finetune", inputs, resolved),
    )?;
    let v = json!({
        "output": a.output,
        "log": log_path,
        "samples": samples.len(),
        "steps": log.len(),
        "last_loss": log.last().map(|l| l.loss),
        "lm_digest": hex(&digest),
    });
    ctx.emit(&v, || {
        format!(
            "fine-tuned on {} samples for {} steps; language model unchanged ({}); wrote {}",
            samples.len(),
            log.len(),
            &hex(&digest)[..16],
            a.output.display()
        )
    });
    Ok(())
}

fn embed(ctx: &Ctx, a: EmbedArgs) -> Result<()> {
    let p = load_checkpoint(&a.params)?;
    let g = load_any_graph(&a.file, &ctx.spec)?;
    let f = Forward::run(&g, &p, None)?;
    let mut v = json!({"file": a.file, "dim": f.graph.len(), "graph": f.graph.to_vec()});
    if a.nodes {
        let mut nodes = Vec::new();
        for (kind, rows) in NodeKind::ALL.into_iter().zip(f.projected_nodes(&p)) {
            for (id, row) in rows.outer_iter().enumerate() {
                nodes.push(json!({"kind": kind.name(), "id": id, "embedding": row.to_vec()}));
            }
        }
        v["nodes"] = Value::Array(nodes);
    }
    // Embeddings are JSON either way; --json only makes it compact.
    if ctx.json {
        print_line(&v.to_string());
    } else {
        print_line(&serde_json::to_string_pretty(&v)?);
    }
    Ok(())
}

fn prompt_export(ctx: &Ctx, a: PromptExportArgs) -> Result<()> {
    let p = load_checkpoint(&a.gnn)?;
    let g = load_any_graph(&a.file, &ctx.spec)?;
    let rows = prefix_rows(&g, &p, a.node_cap)?;
    save_prefix(&rows, &a.output)?;
    let v = json!({"output": a.output, "rows": rows.nrows(), "cols": rows.ncols()});
    ctx.emit(&v, || {
        format!(
            "wrote {} rows of width {} to {}",
            rows.nrows(),
            rows.ncols(),
            a.output.display()
        )
    });
    Ok(())
}

fn classifier_config(
    optim: &OptimFlags,
    model: &ModelFlags,
    batch: Option<usize>,
    holdout: Option<f64>,
) -> Result<(ClassifierConfig, Value)> {
    let mut ov = optim_overrides(optim);
    ov.extend(model_overrides(model));
    ov.extend([
        ("batch_size", batch.map(Value::from)),
        ("holdout", holdout.map(Value::from)),
    ]);
    resolve(optim.config.as_deref(), ov, true)
}

fn ablate(ctx: &Ctx, a: AblateArgs) -> Result<()> {
    let (cfg, resolved) = classifier_config(&a.optim, &a.model, a.batch_size, a.holdout)?;
    let manifest = manifest_path(&a.corpus);
    if !manifest.exists() {
        let Some(task) = &a.task else {
            return Err(usage(format!(
                "{} not found (pass --task to generate a toy corpus there)",
                manifest.display()
            )));
        };
        log::info!("generating {} {task} items into {}", a.n, a.corpus.display());
        make_toy_corpus(parse_task(task)?, a.n, cfg.seed, &a.corpus)?;
    }
    let corpus = LabeledCorpus::read_manifest(&manifest)?;
    let graphs = corpus.load_graphs(&ctx.spec)?;
    let pair_ids = corpus.pair_ids();
    let metric = match &a.metric {
        Some(m) => parse_metric(m)?,
        None if pair_ids.is_some() => Metric::Pairwise,
        None => Metric::Accuracy,
    };
    // The full graph always runs first so deltas have a baseline.
    let targets: Vec<Option<AblationTarget>> = if a.targets.is_empty() {
        ablation_targets()
    } else {
        let mut v = vec![None];
        for t in a.targets.iter().filter(|t| t.as_str() != "full") {
            let t: AblationTarget = t.parse().map_err(usage)?;
            if !v.contains(&Some(t)) {
                v.push(Some(t));
            }
        }
        v
    };
    let report = run_ablation(
        &graphs,
        &corpus.labels(),
        pair_ids.as_deref(),
        &targets,
        &cfg,
        metric,
    )?;
    let doc = json!({
        "run": run_record(ctx, "ablate", json!({"manifest": manifest, "task": a.task, "items": graphs.len()}), resolved),
        "report": report,
    });
    if let Some(out) = &a.output {
        write_json(out, &doc)?;
    }
    ctx.emit(&doc, || {
        let mut t = format!(
            "{} on {} held-out items ({} trained)\n{:<22} {:>8} {:>8}",
            report.metric, report.test_items, report.train_items, "variant", "value", "delta"
        );
        for r in &report.rows {
            t.push_str(&format!(
                "\n{:<22} {:>8.3} {:>+8.3}",
                r.variant, r.report.value, r.delta
            ));
        }
        t
    });
    Ok(())
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let metric = parse_metric(&a.metric)?;
    let p = load_checkpoint(&a.gnn)?;
    if p.classifier.is_none() {
        return Err(usage(format!(
            "{} has no classification head (train one with `irgraph train`)",
            a.gnn.display()
        )));
    }
    let corpus = LabeledCorpus::read_manifest(&manifest_path(&a.corpus))?;
    let graphs = corpus.load_graphs(&ctx.spec)?;
    let report = evaluate(
        &graphs,
        &corpus.labels(),
        corpus.pair_ids().as_deref(),
        &p,
        metric,
        "full",
    )?;
    ctx.emit(&serde_json::to_value(&report)?, || {
        format!(
            "{} = {:.4} over {} items",
            report.metric, report.value, report.count
        )
    });
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let (cfg, resolved) = classifier_config(&a.optim, &a.model, a.batch_size, None)?;
    let manifest = manifest_path(&a.corpus);
    let corpus = LabeledCorpus::read_manifest(&manifest)?;
    let graphs = corpus.load_graphs(&ctx.spec)?;
    let first = graphs
        .first()
        .ok_or_else(|| usage(format!("{}: empty manifest", manifest.display())))?;
    let mut p = match &a.gnn {
        Some(path) => load_checkpoint(path)?,
        None => GnnParams::init(&first.feature_spec, cfg.dims, cfg.seed),
    };
    let log = train_classifier(&graphs, &corpus.labels(), &mut p, &cfg)?;
    save_params(&p, &a.output)?;
    let log_path = a
        .log
        .clone()
        .unwrap_or_else(|| sidecar(&a.output, ".metrics.jsonl"));
    write_json_lines(&log_path, &log)?;
    let inputs = json!({"manifest": manifest, "gnn": a.gnn, "items": graphs.len()});
    write_json(
        &sidecar(&a.output, ".config.json"),
        &run_record(ctx, "train", inputs, resolved),
    )?;
    let last = log.last().map(|l| l.loss);
    let v = json!({"output": a.output, "log": log_path, "items": graphs.len(), "epochs": log.len(), "last_loss": last});
    ctx.emit(&v, || {
        format!(
            "trained on {} items for {} epochs (last loss {}); wrote {}",
            graphs.len(),
            log.len(),
            last.map_or("-".into(), |l| format!("{l:.4}")),
            a.output.display()
        )
    });
    Ok(())
}

fn make_corpus(ctx: &Ctx, a: MakeCorpusArgs) -> Result<()> {
    let task = parse_task(&a.task)?;
    if !(0.0..1.0).contains(&a.holdout) {
        return Err(usage("--holdout must be in [0, 1)"));
    }
    let corpus = make_toy_corpus(task, a.n, a.seed, &a.output)?;
    let groups: Vec<Option<u64>> = corpus.items.iter().map(|it| it.pair_id).collect();
    let (tr, te) = holdout_split(&groups, a.holdout, a.seed);
    for (name, idx) in [("train.jsonl", &tr), ("test.jsonl", &te)] {
        let part = LabeledCorpus {
            items: idx.iter().map(|&i| corpus.items[i].clone()).collect(),
            ..corpus.clone()
        };
        part.write_manifest(&a.output.join(name))?;
    }
    let record = json!({"task": task.name(), "n": a.n, "seed": a.seed, "holdout": a.holdout});
    write_json(&a.output.join("corpus.config.json"), &record)?;
    let v = json!({"output": a.output, "task": task.name(), "items": corpus.items.len(), "train": tr.len(), "test": te.len()});
    ctx.emit(&v, || {
        format!(
            "wrote {} {} items to {} ({} train, {} test)",
            corpus.items.len(),
            task.name(),
            a.output.display(),
            tr.len(),
            te.len()
        )
    });
    Ok(())
}

fn make_lm(ctx: &Ctx, a: MakeLmArgs) -> Result<()> {
    if a.dim == 0 || a.hidden == 0 || a.context < 3 {
        return Err(usage(
            "--dim and --hidden must be positive and --context at least 3",
        ));
    }
    let config = LmConfig {
        dim: a.dim,
        hidden: a.hidden,
        layers: a.layers,
        context: a.context,
        seed: a.seed,
    };
    let lm = FrozenLm::new(config, Tokenizer::new(&Tokenizer::default_words()));
    save_lm(&lm, &a.output)?;
    let v =
        json!({"output": a.output, "config": config, "vocab": lm.vocab_size(), "digest": hex(&lm.digest())});
    ctx.emit(&v, || {
        format!(
            "wrote a {}-wide language model with {} tokens to {}",
            a.dim,
            lm.vocab_size(),
            a.output.display()
        )
    });
    Ok(())
}
