use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const OK: &str = "define i32 @f(i32 %a, i32 %b) {
entry:
  %s = add i32 %a, %b
  %c = icmp sgt i32 %s, 0
  br i1 %c, label %pos, label %neg
pos:
  ret i32 %s
neg:
  ret i32 0
}
";

const LOOP: &str = "define i32 @g(i32 %n) {
entry:
  br label %head
head:
  %i = phi i32 [ 0, %entry ], [ %j, %head ]
  %j = add i32 %i, 1
  %d = icmp slt i32 %j, %n
  br i1 %d, label %head, label %done
done:
  ret i32 %j
}
";

const GLOBALS: &str = "@t = global [3 x i32] [i32 1, i32 2, i32 3], align 4
declare void @use(ptr)
define void @h() {
entry:
  call void @use(ptr @t)
  ret void
}
";

fn irgraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irgraph"))
        .args(args)
        .current_dir(dir)
        .env_remove("IRGRAPH_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn corpus(dir: &Path) {
    std::fs::create_dir_all(dir.join("d")).unwrap();
    for (name, text) in [("a.ll", OK), ("b.ll", LOOP), ("c.ll", GLOBALS)] {
        std::fs::write(dir.join("d").join(name), text).unwrap();
    }
}

#[test]
fn parse_ok_exits_zero() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("ok.ll"), OK).unwrap();
    let o = irgraph(t.path(), &["parse", "ok.ll"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = irgraph(t.path(), &["--json", "parse", "ok.ll"]);
    let v = stdout_json(&o);
    assert_eq!(v["functions"], 1);
    assert_eq!(v["instructions"], 5);
}

#[test]
fn parse_exit_codes_follow_the_error_kind() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("bad.ll"), "define i32 @f( {\n").unwrap();
    std::fs::write(
        t.path().join("meta.ll"),
        "define void @f() {\nentry:\n  ret void, !dbg !1\n}\n!1 = !{}\n",
    )
    .unwrap();
    std::fs::write(
        t.path().join("frob.ll"),
        "define i32 @f() {\nentry:\n  %x = frob i32 0\n}\n",
    )
    .unwrap();
    assert_eq!(code(&irgraph(t.path(), &["parse", "bad.ll"])), 2);
    assert_eq!(code(&irgraph(t.path(), &["parse", "meta.ll"])), 3);
    assert_eq!(code(&irgraph(t.path(), &["parse", "frob.ll"])), 3);
    assert_eq!(code(&irgraph(t.path(), &["parse", "--lenient", "meta.ll"])), 0);

    let o = irgraph(
        t.path(),
        &["--json", "parse", "--lenient", "--report-subset", "meta.ll"],
    );
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["subset"]["metadata_attachment"], 1);
}

#[test]
fn graph_missing_file_exits_2_and_names_the_path() {
    let t = tempfile::tempdir().unwrap();
    let o = irgraph(t.path(), &["graph", "missing.ll"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.ll"), "{err}");
    assert!(err.starts_with("error[io]"), "{err}");

    let o = irgraph(t.path(), &["--json", "graph", "missing.ll"]);
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["code"], "io");
    assert_eq!(v["error"]["exit"], 2);
}

#[test]
fn usage_errors_exit_2_and_help_exits_0() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&irgraph(t.path(), &["parse", "--frobnicate", "x.ll"])), 2);
    assert_eq!(code(&irgraph(t.path(), &["no-such-command"])), 2);
    let help = irgraph(t.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for cmd in [
        "parse",
        "graph",
        "pretrain",
        "finetune",
        "embed",
        "prompt-export",
        "ablate",
        "eval",
        "make-corpus",
    ] {
        assert!(text.contains(cmd), "--help lacks {cmd}");
    }
    assert!(text.contains("IRGRAPH_THREADS"));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("ok.ll"), OK).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_irgraph"))
        .args(["parse", "ok.ll"])
        .current_dir(t.path())
        .env("IRGRAPH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn stored_graph_reloads_with_the_same_digest() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("g.ll"), GLOBALS).unwrap();
    let a = stdout_json(&irgraph(t.path(), &["--json", "graph", "g.ll", "-o", "g.irg"]));
    let b = stdout_json(&irgraph(t.path(), &["--json", "graph", "g.irg"]));
    assert_eq!(a["digest"], b["digest"]);
    assert_eq!(a["nodes"], b["nodes"]);
    // @t, @use and @h, each linked to the module both ways.
    assert_eq!(a["edges"]["symbol"], 6);
}

#[test]
fn pretrain_twice_gives_identical_checkpoints() {
    let t = tempfile::tempdir().unwrap();
    corpus(t.path());
    let args = |out: &'static str| {
        vec![
            "pretrain", "--corpus", "d", "--seed", "7", "--steps", "4", "--hidden", "8", "--embed", "8",
            "-o", out,
        ]
    };
    assert_eq!(code(&irgraph(t.path(), &args("c"))), 0);
    assert_eq!(code(&irgraph(t.path(), &args("c2"))), 0);
    let read = |n: &str| std::fs::read(t.path().join(n)).unwrap();
    assert_eq!(read("c"), read("c2"));
    assert_eq!(read("c.metrics.jsonl"), read("c2.metrics.jsonl"));
    let log = String::from_utf8(read("c.metrics.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(first["loss"].is_f64() && first["masked_kind"].is_string() && first["step"] == 0);
    let record: Value = serde_json::from_slice(&read("c.config.json")).unwrap();
    assert_eq!(record["config"]["seed"], 7);
    assert_eq!(record["config"]["dims"]["h2"], 8);

    let other = irgraph(
        t.path(),
        &[
            "pretrain", "--corpus", "d", "--seed", "8", "--steps", "4", "--hidden", "8", "--embed", "8",
            "-o", "c3",
        ],
    );
    assert_eq!(code(&other), 0);
    assert_ne!(read("c"), read("c3"));
}

#[test]
fn training_without_a_seed_is_refused() {
    let t = tempfile::tempdir().unwrap();
    corpus(t.path());
    let o = irgraph(t.path(), &["pretrain", "--corpus", "d", "-o", "c"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    std::fs::write(
        t.path().join("train.json"),
        r#"{"seed": 3, "steps": 1, "dims": {"h1": 4, "h2": 4, "embed": 4}}"#,
    )
    .unwrap();
    let o = irgraph(
        t.path(),
        &["pretrain", "--corpus", "d", "--config", "train.json", "-o", "c"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(t.path().join("typo.json"), r#"{"seed": 3, "stepz": 1}"#).unwrap();
    assert_eq!(
        code(&irgraph(
            t.path(),
            &["pretrain", "--corpus", "d", "--config", "typo.json", "-o", "c"]
        )),
        2
    );
}

#[test]
fn embed_export_and_finetune_round_trip() {
    let t = tempfile::tempdir().unwrap();
    corpus(t.path());
    let run = |args: &[&str]| {
        let o = irgraph(t.path(), args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&[
        "make-lm", "-o", "lm", "--dim", "8", "--hidden", "8", "--seed", "1",
    ]);
    run(&[
        "pretrain", "--corpus", "d", "--seed", "1", "--steps", "2", "--hidden", "8", "--embed", "8", "-o",
        "c",
    ]);
    run(&["graph", "d/a.ll", "-o", "a.irg"]);

    let v = stdout_json(&run(&["--json", "embed", "a.irg", "--params", "c", "--nodes"]));
    assert_eq!(v["graph"].as_array().unwrap().len(), 8);
    let nodes = v["nodes"].as_array().unwrap();
    let census = stdout_json(&run(&["--json", "graph", "a.irg"]));
    let total: u64 = census["nodes"]
        .as_object()
        .unwrap()
        .values()
        .map(|n| n.as_u64().unwrap())
        .sum();
    assert_eq!(nodes.len() as u64, total);

    let v = stdout_json(&run(&[
        "--json",
        "prompt-export",
        "a.irg",
        "--gnn",
        "c",
        "-o",
        "p.bin",
    ]));
    assert_eq!(v["rows"].as_u64().unwrap(), total + 1);
    let bytes = std::fs::read(t.path().join("p.bin")).unwrap();
    assert_eq!(&bytes[..8], b"IRPREFIX");
    assert_eq!(bytes.len() as u64, 20 + (total + 1) * 8 * 4);

    std::fs::write(
        t.path().join("d/samples.jsonl"),
        "{\"graph\": \"b.ll\", \"question\": \"does this function contain a loop ?\", \"answer\": \"yes\"}\n\
         {\"graph\": \"a.ll\", \"question\": \"does this function contain a loop ?\", \"answer\": \"no\"}\n",
    )
    .unwrap();
    let lm_before = std::fs::read(t.path().join("lm")).unwrap();
    let v = stdout_json(&run(&[
        "--json", "finetune", "--corpus", "d", "--lm", "lm", "--gnn", "c", "-o", "c2", "--seed", "5",
        "--epochs", "2",
    ]));
    assert_eq!(v["steps"], 4);
    assert_eq!(std::fs::read(t.path().join("lm")).unwrap(), lm_before);
    assert_ne!(
        std::fs::read(t.path().join("c")).unwrap(),
        std::fs::read(t.path().join("c2")).unwrap()
    );

    // Encoder and language model widths must agree.
    run(&["make-lm", "-o", "lm16", "--dim", "16", "--hidden", "8"]);
    let o = irgraph(
        t.path(),
        &[
            "finetune", "--corpus", "d", "--lm", "lm16", "--gnn", "c", "-o", "c3", "--seed", "5",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn toy_corpus_train_eval_and_ablate() {
    let t = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = irgraph(t.path(), args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    let v = stdout_json(&run(&[
        "--json",
        "make-corpus",
        "--task",
        "toy-cfg",
        "--n",
        "20",
        "--seed",
        "3",
        "-o",
        "toy",
    ]));
    assert_eq!(v["items"], 20);
    assert_eq!(v["train"].as_u64().unwrap() + v["test"].as_u64().unwrap(), 20);

    run(&[
        "train",
        "--corpus",
        "toy/train.jsonl",
        "--seed",
        "3",
        "--epochs",
        "2",
        "--hidden",
        "8",
        "--embed",
        "8",
        "-o",
        "cls",
    ]);
    let v = stdout_json(&run(&[
        "--json",
        "eval",
        "--corpus",
        "toy/test.jsonl",
        "--gnn",
        "cls",
        "--metric",
        "pairwise",
    ]));
    assert_eq!(v["metric"], "pairwise");
    let p = v["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    run(&[
        "pretrain", "--corpus", "toy", "--seed", "3", "--steps", "1", "--hidden", "8", "--embed", "8", "-o",
        "enc",
    ]);
    let o = irgraph(t.path(), &["eval", "--corpus", "toy", "--gnn", "enc"]);
    assert_eq!(code(&o), 2, "a checkpoint without a head cannot be evaluated");
    assert_eq!(
        code(&irgraph(
            t.path(),
            &["eval", "--corpus", "toy", "--gnn", "cls", "--metric", "f1"]
        )),
        2
    );

    run(&[
        "ablate",
        "--corpus",
        "fresh",
        "--task",
        "toy-cfg",
        "--n",
        "20",
        "--seed",
        "3",
        "--epochs",
        "1",
        "--hidden",
        "8",
        "--embed",
        "8",
        "--targets",
        "edge:cfg,node:type,edge:cfg",
        "-o",
        "report.json",
    ]);
    let doc: Value = serde_json::from_slice(&std::fs::read(t.path().join("report.json")).unwrap()).unwrap();
    let rows = doc["report"]["rows"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["variant"].as_str().unwrap()).collect();
    // The baseline is added even when not listed; repeats run once.
    assert_eq!(names, ["full", "edge:cfg", "node:type"]);
    assert_eq!(doc["report"]["metric"], "pairwise");
    assert_eq!(doc["run"]["config"]["seed"], 3);
    assert_eq!(rows[0]["delta"], 0.0);
    assert_eq!(
        code(&irgraph(
            t.path(),
            &[
                "ablate",
                "--corpus",
                "fresh",
                "--seed",
                "3",
                "--targets",
                "edge:nope"
            ]
        )),
        2
    );
    assert_eq!(
        code(&irgraph(
            t.path(),
            &["ablate", "--corpus", "nowhere", "--seed", "3"]
        )),
        2
    );
}
