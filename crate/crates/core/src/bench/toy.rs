//! Synthetic labeled corpora with a planted structural label.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, LabeledCorpus, LabeledItem};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyTask {
    /// Label 1 iff the function has a back edge. Items come in twins that
    /// differ only in where one branch points.
    CfgLoop,
    /// Label 1 iff the module contains a floating-point constant.
    ValueKind,
    /// Label 1 (vulnerable) iff an indexed load lacks its bounds check;
    /// items come in safe/vulnerable pairs.
    Pairwise,
}

impl ToyTask {
    pub fn name(self) -> &'static str {
        match self {
            ToyTask::CfgLoop => "cfg-loop",
            ToyTask::ValueKind => "value-kind",
            ToyTask::Pairwise => "pairwise",
        }
    }

    /// Accepts the task names plus `toy-cfg`, `toy-value` and `toy-pairwise`.
    pub fn from_name(s: &str) -> Option<ToyTask> {
        match s {
            "cfg-loop" | "toy-cfg" => Some(ToyTask::CfgLoop),
            "value-kind" | "toy-value" => Some(ToyTask::ValueKind),
            "pairwise" | "toy-pairwise" => Some(ToyTask::Pairwise),
            _ => None,
        }
    }
}

const OPS: [&str; 5] = ["add", "sub", "mul", "and", "or"];

/// Appends a random number (within `count`) of chained integer ops starting
/// from `%{start}`, returning the name of the last result.
fn chain(
    out: &mut String,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    start: &str,
    count: std::ops::RangeInclusive<usize>,
) -> String {
    let count = rng.gen_range(count);
    let mut last = start.to_string();
    for i in 0..count {
        let op = OPS[rng.gen_range(0..OPS.len())];
        let c: i32 = rng.gen_range(1..1000);
        writeln!(out, "  %{prefix}{i} = {op} i32 %{last}, {c}").unwrap();
        last = format!("{prefix}{i}");
    }
    last
}

fn cfg_loop(rng: &mut ChaCha8Rng, looped: bool) -> (String, String) {
    let mut entry = String::new();
    let e = chain(&mut entry, rng, "e", "n", 1..=4);
    let mut header = String::new();
    let k: i32 = rng.gen_range(1..1000);
    writeln!(header, "  %h = xor i32 %n, {k}").unwrap();
    let h = chain(&mut header, rng, "h", "h", 1..=3);
    let render = |looped: bool| {
        let back = if looped { "%header" } else { "%exit" };
        format!(
            "define i32 @f(i32 %n) {{\nentry:\n  %acc = alloca i32, align 4\n{entry}  store i32 %{e}, ptr %acc, align 4\n  switch i32 %n, label %header [ i32 0, label %exit ]\nheader:\n{header}  %v = load i32, ptr %acc, align 4\n  %s = add i32 %v, %{h}\n  store i32 %s, ptr %acc, align 4\n  br label %latch\nlatch:\n  %w = load i32, ptr %acc, align 4\n  %d = sub i32 %w, 1\n  store i32 %d, ptr %acc, align 4\n  %c = icmp sgt i32 %d, 0\n  br i1 %c, label {back}, label %exit\nexit:\n  %r = load i32, ptr %acc, align 4\n  ret i32 %r\n}}\n"
        )
    };
    (render(looped), render(!looped))
}

fn value_kind(rng: &mut ChaCha8Rng, float_const: bool) -> String {
    let mut body = String::new();
    let last = chain(&mut body, rng, "t", "n", 1..=4);
    let rhs = if float_const {
        format!("{}.5", rng.gen_range(1..100))
    } else {
        "%d".to_string()
    };
    format!(
        "define i32 @f(i32 %n) {{\nentry:\n{body}  %d = sitofp i32 %{last} to double\n  %m = fmul double %d, {rhs}\n  %r = fptosi double %m to i32\n  ret i32 %r\n}}\n"
    )
}

fn pairwise(rng: &mut ChaCha8Rng) -> (String, String) {
    let bound: u32 = rng.gen_range(4..4096);
    let mut pre = String::new();
    let idx = chain(&mut pre, rng, "t", "i", 0..=3);
    let safe = format!(
        "define i32 @get(ptr %a, i32 %i) {{\nentry:\n{pre}  %ok = icmp ult i32 %{idx}, {bound}\n  br i1 %ok, label %in, label %out\nin:\n  %p = getelementptr inbounds i32, ptr %a, i32 %{idx}\n  %v = load i32, ptr %p, align 4\n  ret i32 %v\nout:\n  ret i32 -1\n}}\n"
    );
    let vulnerable = format!(
        "define i32 @get(ptr %a, i32 %i) {{\nentry:\n{pre}  br label %in\nin:\n  %p = getelementptr inbounds i32, ptr %a, i32 %{idx}\n  %v = load i32, ptr %p, align 4\n  ret i32 %v\n}}\n"
    );
    (vulnerable, safe)
}

/// Writes `n` labeled `.ll` files and `manifest.jsonl` into `dir`.
pub fn make_toy_corpus(task: ToyTask, n: usize, seed: u64, dir: &Path) -> Result<LabeledCorpus, BenchError> {
    if n < 10 {
        return Err(BenchError::InvalidArgument("toy corpora need n >= 10".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut items = Vec::with_capacity(n);
    let mut texts = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut rng = stream(seed, &format!("{}/{}", task.name(), i / 2));
        let paired = i + 1 < n;
        match task {
            ToyTask::CfgLoop | ToyTask::Pairwise => {
                // Member order within a pair is seeded so labels do not alternate.
                let first = rng.gen_range(0..2usize);
                let (pos, neg) = if task == ToyTask::CfgLoop {
                    cfg_loop(&mut rng, true)
                } else {
                    pairwise(&mut rng)
                };
                let pair = [(pos, 1), (neg, 0)];
                let order = if first == 1 { [0, 1] } else { [1, 0] };
                for &o in order.iter().take(if paired { 2 } else { 1 }) {
                    let (text, label) = &pair[o];
                    texts.push(text.clone());
                    items.push((*label, paired.then_some((i / 2) as u64)));
                }
            }
            ToyTask::ValueKind => {
                for label in [1usize, 0].into_iter().take(if paired { 2 } else { 1 }) {
                    texts.push(value_kind(&mut rng, label == 1));
                    items.push((label, None));
                }
            }
        }
        i += 2;
    }
    let mut corpus = LabeledCorpus {
        items: Vec::with_capacity(n),
        classes: 2,
        root: dir.to_path_buf(),
    };
    for (k, (text, (label, pair_id))) in texts.iter().zip(items).enumerate() {
        let name = format!("{}-{k:04}.ll", task.name());
        let path = dir.join(&name);
        let full = format!("; ModuleID = '{name}'\nsource_filename = \"{name}\"\n\n{text}");
        std::fs::write(&path, full).map_err(|e| BenchError::io(&path, e))?;
        corpus.items.push(LabeledItem {
            path: name,
            label,
            pair_id,
        });
    }
    corpus.write_manifest(&dir.join("manifest.jsonl"))?;
    Ok(corpus)
}
