//! Fixture authoring and process helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use reprompt_core::corpus::{assign_splits, filter_retrievable, ingest_str, Category, Corpus, IngestFormat, Split, SplitConfig};
use reprompt_core::llmgate::FixtureLine;
use reprompt_core::promptkit::{render_few_shot, render_synth_meta, render_zero_shot, select_exemplars, wrap_instruction, RecoveryVariant};

/// Path to the `reprompt` binary. Test targets outside the CLI package build
/// it through cargo so they never run a stale copy.
pub fn bin() -> PathBuf {
    if let Some(path) = option_env!("CARGO_BIN_EXE_reprompt") {
        return PathBuf::from(path);
    }
    static BUILT: OnceLock<PathBuf> = OnceLock::new();
    BUILT.get_or_init(build_bin).clone()
}

fn build_bin() -> PathBuf {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let out = Command::new(cargo)
        .args(["build", "-p", "reprompt-cli", "--bin", "reprompt", "--message-format=json-render-diagnostics"])
        .stderr(Stdio::inherit())
        .output()
        .expect("cargo runs");
    assert!(out.status.success(), "building reprompt failed");
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .filter(|m| m["reason"] == "compiler-artifact" && m["target"]["name"] == "reprompt")
        .find_map(|m| m["executable"].as_str().map(PathBuf::from))
        .expect("cargo reports the reprompt executable")
}

pub fn reprompt(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .env_remove("REPROMPT_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

/// Runs the binary and panics with its stderr on a nonzero exit.
pub fn reprompt_ok(dir: &Path, args: &[&str]) -> Output {
    let out = reprompt(dir, args);
    assert!(
        out.status.success(),
        "reprompt {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Last stderr line parsed as the machine-readable error object.
pub fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not a json error line ({e}): {last}"))
}

const TOPICS: [&str; 10] = [
    "volcanoes", "chess openings", "sourdough bread", "the moon landing", "honeybees",
    "jazz history", "solar panels", "the roman empire", "marathon training", "coral reefs",
];

/// Fifty raw Dolly-style lines: ten per retained category and ten in two
/// categories the filter drops.
pub fn mini_dolly() -> String {
    let cats = [
        ("brainstorming", "Give me ideas for a party themed around"),
        ("creative_writing", "Write a short poem about"),
        ("general_qa", "Why do people care about"),
        ("open_qa", "What is special about"),
        ("summarization", "Summarize this passage about"),
        ("closed_qa", "According to the text, when did people study"),
        ("classification", "Classify each of these as related or unrelated to"),
    ];
    let mut out = String::new();
    for i in 0..50 {
        let (cat, stem) = if i < 40 { cats[i % 5] } else { cats[5 + i % 2] };
        let topic = TOPICS[i % 10];
        let context = if cat == "summarization" || cat == "closed_qa" {
            format!("A passage describing {topic} in some detail.")
        } else {
            String::new()
        };
        let line = serde_json::json!({
            "instruction": format!("{stem} {topic} (item {i})"),
            "context": context,
            "response": "original human answer",
            "category": cat,
        });
        writeln!(out, "{line}").unwrap();
    }
    out
}

fn response_for(instruction: &str) -> String {
    format!("Here is a thoughtful answer to the request: {}", instruction.to_lowercase())
}

/// Mock completions covering gen-responses and both q2 recovery methods for
/// the pipeline built from `raw` with default split settings and exemplar
/// seed 0.
pub fn pipeline_fixtures(raw: &str) -> String {
    let ingested = ingest_str(raw, IngestFormat::DollyJsonl).corpus;
    let split = assign_splits(&filter_retrievable(&ingested), &SplitConfig::default()).unwrap();

    let mut lines = Vec::new();
    let mut records = split.records().to_vec();
    for r in &mut records {
        let prompt = wrap_instruction(&r.generation_text(true)).unwrap();
        let response = response_for(&r.instruction);
        lines.push(FixtureLine::completion(&prompt, format!("  {response}\n")));
        r.response = Some(response);
    }
    let with_responses = Corpus::new(records).unwrap();
    let exemplars = select_exemplars(&with_responses, 0).unwrap();
    for r in with_responses.in_split(Split::Test) {
        let response = r.response.as_deref().unwrap();
        let zero = render_zero_shot(RecoveryVariant::Q2, response).unwrap();
        let words: Vec<&str> = r.instruction.split_whitespace().collect();
        lines.push(FixtureLine::completion(&zero, format!("Prompt: \"{}\"", words[..words.len() / 2].join(" "))));
        let few = render_few_shot(RecoveryVariant::Q2, &exemplars, response).unwrap();
        lines.push(FixtureLine::completion(&few, format!("Prompt: {}", r.instruction)));
    }
    to_jsonl(&lines)
}

/// One fixture per round seed, each completion a numbered list of 20
/// instructions whose content words never repeat across rounds.
pub fn synth_fixtures(rounds: usize, base_seed: u64) -> String {
    let prompt = wrap_instruction(render_synth_meta()).unwrap();
    let lines: Vec<FixtureLine> = (0..rounds)
        .map(|round| {
            let mut text = String::from("Here are 20 creative task instructions:\n");
            for k in 0..20 {
                let n = round * 20 + k;
                writeln!(text, "{}. Write about topic{n} and theme{n} with mood{n}", k + 1).unwrap();
            }
            FixtureLine::seeded_completion(&prompt, base_seed + round as u64, text)
        })
        .collect();
    to_jsonl(&lines)
}

pub fn to_jsonl(lines: &[FixtureLine]) -> String {
    lines.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect()
}

/// `n` native records spread evenly over the retained categories.
pub fn native_corpus(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let cat = Category::RETAINED[i % 5];
        let line = serde_json::json!({
            "id": format!("r{i:05}"),
            "category": cat,
            "instruction": format!("instruction number {i}"),
            "context": null,
            "response": null,
            "split": "unassigned",
            "provenance": "human",
        });
        writeln!(out, "{line}").unwrap();
    }
    out
}

/// Every regular file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
