//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#[path = "../../cli/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reprompt_core::evalsuite::{balanced_average, lcs_length, round_half_up_2, rouge_l_tokens};
use reprompt_core::llmgate::{sample_token, truncated_distribution, GenerationParams};
use reprompt_core::lorapack::{trainable_params, LoraSpec, ToyAdapter};
use reprompt_core::promptkit::{render_few_shot, render_synth_meta, render_zero_shot, FewShotExemplar, RecoveryVariant};
use support::{read_tree, reprompt, reprompt_ok};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ROUGE-L oracle

fn sequences_of_len(len: usize) -> Vec<Vec<u8>> {
    (0..3usize.pow(len as u32))
        .map(|mut n| {
            (0..len)
                .map(|_| {
                    let d = (n % 3) as u8;
                    n /= 3;
                    d
                })
                .collect()
        })
        .collect()
}

/// Longest common subsequence by trying every subsequence of the shorter
/// input against the longer one.
fn brute_force_lcs(a: &[u8], b: &[u8]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let mut it = long.iter();
        let is_subsequence = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .all(|i| it.any(|x| *x == short[i]));
        if is_subsequence {
            best = size;
        }
    }
    best
}

fn rouge_oracle() -> Result<String, String> {
    let start = Instant::now();
    let by_len: Vec<Vec<Vec<u8>>> = (0..=8).map(sequences_of_len).collect();
    let (mut pairs, mut mismatches) = (0usize, 0usize);
    let mut first_bad = None;
    for la in 0..=8 {
        for lb in 0..=8 {
            if !((la <= 5 && lb <= 5) || la + lb <= 8) {
                continue;
            }
            for a in &by_len[la] {
                for b in &by_len[lb] {
                    pairs += 1;
                    let want = brute_force_lcs(a, b);
                    let got = lcs_length(a, b);
                    let f1 = rouge_l_tokens(a, b).f1;
                    let want_f1 = if la + lb == 0 { 0.0 } else { 2.0 * want as f64 / (la + lb) as f64 };
                    if got != want || (f1 - want_f1).abs() > 1e-12 {
                        mismatches += 1;
                        first_bad.get_or_insert_with(|| format!("{a:?} vs {b:?}: lcs {got} want {want}, f1 {f1} want {want_f1}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(mismatches == 0, || format!("{mismatches} mismatches of {pairs}; first {}", first_bad.unwrap()))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{pairs} pairs (lengths 0-8, combined <= 8 or both <= 5), 0 mismatches, {:.2}s", elapsed.as_secs_f64()))
}

// Balanced averages of the reference per-category results

const TABLE: [(&str, &str, [f64; 5], f64); 12] = [
    ("Zero-shot", "ROUGE-L", [0.28, 0.32, 0.29, 0.31, 0.28], 0.30),
    ("Zero-shot", "MiniLM similarity", [0.67, 0.69, 0.69, 0.71, 0.71], 0.70),
    ("Zero-shot", "BERTScore", [0.96, 0.96, 0.96, 0.96, 0.96], 0.95),
    ("Few-shot", "ROUGE-L", [0.38, 0.37, 0.50, 0.48, 0.37], 0.42),
    ("Few-shot", "MiniLM similarity", [0.80, 0.74, 0.84, 0.83, 0.76], 0.79),
    ("Few-shot", "BERTScore", [0.96, 0.96, 0.96, 0.96, 0.96], 0.96),
    ("LoRA", "ROUGE-L", [0.45, 0.40, 0.50, 0.57, 0.44], 0.47),
    ("LoRA", "MiniLM similarity", [0.82, 0.75, 0.83, 0.84, 0.81], 0.81),
    ("LoRA", "BERTScore", [0.96, 0.97, 0.97, 0.97, 0.97], 0.97),
    ("LoRA + synthetic", "ROUGE-L", [0.47, 0.43, 0.56, 0.58, 0.46], 0.50),
    ("LoRA + synthetic", "MiniLM similarity", [0.83, 0.78, 0.87, 0.85, 0.82], 0.83),
    ("LoRA + synthetic", "BERTScore", [0.96, 0.97, 0.97, 0.97, 0.96], 0.97),
];

fn balanced_reproduction() -> Result<String, String> {
    let mut bad = Vec::new();
    for (method, metric, cells, printed) in TABLE {
        let mean = balanced_average(&cells).unwrap();
        let rounded = round_half_up_2(mean);
        if (rounded * 100.0).round() as i64 != (printed * 100.0).round() as i64 {
            bad.push(format!("{method}/{metric}: mean {mean:.4} rounds to {rounded:.2}, printed {printed:.2}"));
        }
    }
    ensure(bad.is_empty(), || format!("{} of {} rows differ: {}", bad.len(), TABLE.len(), bad.join("; ")))?;
    Ok(format!("{} rows reproduce", TABLE.len()))
}

fn lora_arithmetic() -> Result<String, String> {
    let n = trainable_params(&LoraSpec::mistral_7b_all_linear());
    ensure(n == 83_886_080, || format!("got {n}"))?;
    let rel = (n as f64 - 85e6).abs() / 85e6;
    ensure(rel < 0.02, || format!("{n} is {:.2}% from 85M", rel * 100.0))?;
    Ok(format!("{n} trainable parameters ({:.2}% from 85M)", rel * 100.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn adapter_gradients() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d_in = rng.random_range(1..=8);
        let d_out = rng.random_range(1..=8);
        let rank = rng.random_range(1..=4);
        let base = random_matrix(&mut rng, d_out, d_in);
        let a = random_matrix(&mut rng, rank, d_in);
        let b = random_matrix(&mut rng, d_out, rank);
        let alpha = rng.random_range(0.5..64.0);
        let adapter = ToyAdapter::new(base, a, b, alpha).map_err(|e| e.to_string())?;
        let x = DVector::from_fn(d_in, |_, _| rng.random_range(-1.0..1.0));
        let target = DVector::from_fn(d_out, |_, _| rng.random_range(-1.0..1.0));
        worst = worst.max(adapter.grad_check(&x, &target, 1e-6).map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("100 adapters, max relative error {worst:.1e}, {:.2}s", elapsed.as_secs_f64()))
}

// Sampler

/// Renormalized distribution computed directly from the definitions.
fn sampler_oracle(logits: &[f64], t: f64, top_k: Option<usize>, top_p: f64) -> BTreeMap<usize, f64> {
    let weights: Vec<f64> = logits.iter().map(|l| (l / t).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut ranked: Vec<(usize, f64)> = weights.iter().map(|w| w / z).enumerate().collect();
    ranked.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    ranked.truncate(top_k.unwrap_or(ranked.len()));
    let kz: f64 = ranked.iter().map(|e| e.1).sum();
    let mut kept = Vec::new();
    let mut cumulative = 0.0;
    for (i, p) in ranked {
        kept.push((i, p / kz));
        cumulative += p / kz;
        if cumulative >= top_p {
            break;
        }
    }
    let pz: f64 = kept.iter().map(|e| e.1).sum();
    kept.into_iter().map(|(i, p)| (i, p / pz)).collect()
}

fn sampler_properties() -> Result<String, String> {
    const DRAWS: usize = 100_000;
    let logits = [2.0, 1.5, 0.3, -0.5, 1.0, 0.0, 1.2];
    let cases = [(0.8, Some(2u32), 1.0), (1.0, None, 0.8), (1.5, Some(5), 0.9)];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_sigma: f64 = 0.0;
    for (t, k, p) in cases {
        let params = GenerationParams { temperature: t, top_p: p, top_k: k, max_tokens: 1, seed: 0 };
        let dist = truncated_distribution(&logits, &params).map_err(|e| e.to_string())?;
        let total: f64 = dist.iter().map(|e| e.1).sum();
        ensure((total - 1.0).abs() <= 1e-9, || format!("T={t} k={k:?} p={p}: probabilities sum to {total}"))?;
        let oracle = sampler_oracle(&logits, t, k.map(|k| k as usize), p);
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for _ in 0..DRAWS {
            let idx = sample_token(&logits, &params, &mut rng).map_err(|e| e.to_string())?;
            *counts.entry(idx).or_default() += 1;
        }
        for idx in counts.keys() {
            ensure(oracle.contains_key(idx), || format!("T={t} k={k:?} p={p}: drew index {idx} outside the kept set"))?;
        }
        for (idx, prob) in &oracle {
            let n = *counts.get(idx).unwrap_or(&0) as f64;
            let expected = DRAWS as f64 * prob;
            let sigma = (DRAWS as f64 * prob * (1.0 - prob)).sqrt().max(1e-12);
            let z = (n - expected).abs() / sigma;
            worst_sigma = worst_sigma.max(z);
            ensure(z <= 3.0, || format!("T={t} k={k:?} p={p}: index {idx} drawn {n} times, expected {expected:.0} ({z:.2} sigma)"))?;
        }
    }
    Ok(format!("3 settings x {DRAWS} draws, kept sets respected, worst deviation {worst_sigma:.2} sigma"))
}

fn golden_templates() -> Result<String, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).map_err(|e| format!("{name}: {e}"));
    let query = "The sun set slowly over the quiet hills.";
    let exemplars: Vec<FewShotExemplar> = [
        ("Paris is the capital of France.", "What is the capital of France?"),
        ("Roses are red, violets are blue.", "Write a short rhyming poem."),
        ("1. Hiking 2. Reading 3. Cooking", "List three hobbies."),
    ]
    .iter()
    .enumerate()
    .map(|(i, (t, p))| FewShotExemplar { sample_text: t.to_string(), sample_prompt: p.to_string(), source_record_id: format!("ex{i}") })
    .collect();
    let rendered = [
        ("recovery_q1.txt", render_zero_shot(RecoveryVariant::Q1, query).map_err(|e| e.to_string())?),
        ("recovery_q2.txt", render_zero_shot(RecoveryVariant::Q2, query).map_err(|e| e.to_string())?),
        ("recovery_fewshot_q2.txt", render_few_shot(RecoveryVariant::Q2, &exemplars, query).map_err(|e| e.to_string())?),
        ("synth_meta.txt", render_synth_meta().to_string()),
    ];
    for (name, text) in &rendered {
        ensure(*text == read(name)?, || format!("{name} differs from rendered output"))?;
    }
    ensure(rendered[1].1.contains("Predict and return only the prompt"), || "q2 phrase missing".into())?;
    ensure(rendered[3].1.contains("set of 20 creative task instructions"), || "meta phrase missing".into())?;
    Ok(format!("{} golden files byte-identical", rendered.len()))
}

// End-to-end pipeline on the mock gateway

fn run_pipeline(dir: &Path) {
    let raw = support::mini_dolly();
    std::fs::write(dir.join("raw.jsonl"), &raw).unwrap();
    std::fs::write(dir.join("fixtures.jsonl"), support::pipeline_fixtures(&raw)).unwrap();
    let fx = ["--gateway", "mock", "--fixtures", "fixtures.jsonl"];
    let steps: Vec<Vec<&str>> = vec![
        vec!["ingest", "--input", "raw.jsonl", "--format", "dolly", "--out", "out/ingested.jsonl"],
        vec!["filter", "--input", "out/ingested.jsonl", "--out", "out/filtered.jsonl"],
        vec!["split", "--input", "out/filtered.jsonl", "--out", "out/split.jsonl", "--train", "0.8", "--val", "0.1", "--test", "0.1", "--seed", "42"],
        vec!["gen-responses", "--input", "out/split.jsonl", "--out", "out/responses.jsonl"],
        vec!["recover", "--input", "out/responses.jsonl", "--method", "zero_shot_q2", "--out", "out/pred_zero_shot.jsonl"],
        vec!["recover", "--input", "out/responses.jsonl", "--method", "few_shot_q2", "--exemplar-seed", "0", "--out", "out/pred_few_shot.jsonl"],
        vec!["evaluate", "--input", "out/responses.jsonl", "--predictions", "out/pred_zero_shot.jsonl", "--predictions", "out/pred_few_shot.jsonl", "--out", "out/report.txt"],
        vec!["evaluate", "--input", "out/responses.jsonl", "--predictions", "out/pred_zero_shot.jsonl", "--predictions", "out/pred_few_shot.jsonl", "--format", "csv", "--out", "out/report.csv"],
        vec!["stats", "--input", "out/responses.jsonl", "--out", "out/stats.json"],
        vec!["lora-prep", "--input", "out/responses.jsonl", "--out", "out/lora"],
    ];
    for step in steps {
        let mut args = step.clone();
        if matches!(step[0], "gen-responses" | "recover" | "evaluate") {
            args.extend(fx);
        }
        reprompt_ok(dir, &args);
    }
}

fn count_splits(path: &Path) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for line in std::fs::read_to_string(path).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        *counts.entry(v["split"].as_str().unwrap().to_string()).or_default() += 1;
    }
    counts
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    let elapsed = start.elapsed();
    let (ta, tb) = (read_tree(&a.path().join("out")), read_tree(&b.path().join("out")));
    ensure(ta.keys().eq(tb.keys()), || format!("file sets differ: {:?} vs {:?}", ta.keys(), tb.keys()))?;
    for (name, bytes) in &ta {
        ensure(tb[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    let report = String::from_utf8(ta["report.txt"].clone()).unwrap();
    ensure(report.lines().count() == 2 + 6, || format!("unexpected report:\n{report}"))?;
    let zero_preds = String::from_utf8(ta["pred_zero_shot.jsonl"].clone()).unwrap();
    ensure(!zero_preds.is_empty(), || "no predictions".into())?;
    ensure(elapsed < Duration::from_secs(60), || format!("two runs took {elapsed:?}"))?;

    let big = tempfile::tempdir().unwrap();
    std::fs::write(big.path().join("corpus.jsonl"), support::native_corpus(9000)).unwrap();
    reprompt_ok(big.path(), &["split", "--input", "corpus.jsonl", "--out", "split.jsonl", "--train", "0.8", "--val", "0.1", "--test", "0.1", "--seed", "42"]);
    let counts = count_splits(&big.path().join("split.jsonl"));
    let triple = (counts.get("train").copied(), counts.get("validation").copied(), counts.get("test").copied());
    ensure(triple == (Some(7200), Some(900), Some(900)), || format!("9000-record split gave {counts:?}"))?;
    Ok(format!(
        "{} artifacts byte-identical across two runs in {:.1}s; 9000 records split 7200/900/900",
        ta.len(),
        elapsed.as_secs_f64()
    ))
}

fn synthetic_pipeline() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("synth_fixtures.jsonl"), support::synth_fixtures(150, 0)).unwrap();
    reprompt_ok(
        dir.path(),
        &["synth", "--target", "3000", "--threshold", "0.7", "--out", "synth.jsonl", "--log", "synth_log.jsonl", "--fixtures", "synth_fixtures.jsonl"],
    );
    let log: Vec<serde_json::Value> = std::fs::read_to_string(dir.path().join("synth_log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let accepted: u64 = log.iter().map(|r| r["accepted"].as_u64().unwrap()).sum();
    let collisions: u64 = log.iter().map(|r| r["rejected_duplicates"].as_u64().unwrap()).sum();
    ensure(log.len() == 150, || format!("{} rounds", log.len()))?;
    ensure(accepted == 3000 && collisions == 0, || format!("accepted {accepted}, collisions {collisions}"))?;
    let records: Vec<serde_json::Value> = std::fs::read_to_string(dir.path().join("synth.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    ensure(records.len() == 3000, || format!("{} records written", records.len()))?;
    ensure(
        records.iter().all(|r| r["provenance"] == "synthetic" && r["split"] == "train"),
        || "a synthetic record is outside train".into(),
    )?;
    Ok("3000 records in 150 rounds, 0 collisions, all synthetic records in train".into())
}

// Annotation

fn annotation_corpus(dir: &Path) -> Vec<String> {
    use reprompt_core::corpus::{Category, InstructionRecord, Split};
    let mut lines = Vec::new();
    let mut test_ids = Vec::new();
    for cat in Category::RETAINED {
        for i in 0..12 {
            let mut r = InstructionRecord::human(format!("{}-{i:02}", cat.as_str()), cat, format!("{} instruction {i}", cat.display_name()));
            r.response = Some(format!("response {i}"));
            r.split = Split::Test;
            test_ids.push(r.id.clone());
            lines.push(serde_json::to_string(&r).unwrap());
        }
    }
    std::fs::write(dir.join("corpus.jsonl"), lines.join("\n") + "\n").unwrap();
    test_ids
}

struct Server {
    child: std::process::Child,
    url: String,
}

fn start_server(dir: &Path) -> Server {
    let mut child = Command::new(support::bin())
        .args(["annotate", "serve", "--store", "store", "--port", "0"])
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap_or_else(|e| panic!("bad banner {line:?}: {e}"));
    Server { child, url: v["listening"].as_str().unwrap().to_string() }
}

fn cli_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = reprompt_ok(dir, args);
    serde_json::from_slice(&out.stdout).unwrap()
}

fn annotation() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ids = annotation_corpus(d);
    let methods = ["zero_shot_q2", "few_shot_q2", "finetuned", "finetuned_synth"];
    let mut args = vec!["annotate", "plan", "--input", "corpus.jsonl", "--count", "10", "--seed", "5", "--store", "store"];
    let files: Vec<String> = methods.iter().map(|m| format!("pred_{m}.jsonl")).collect();
    for (m, file) in methods.iter().zip(&files) {
        let body: String = ids
            .iter()
            .map(|id| {
                serde_json::json!({
                    "record_id": id, "method": m, "predicted_prompt": format!("guess for {id}"),
                    "raw_completion": "", "params_used": GenerationParams::recovery(),
                })
                .to_string()
                    + "\n"
            })
            .collect();
        std::fs::write(d.join(file), body).unwrap();
        args.extend(["--predictions", file.as_str()]);
    }
    reprompt_ok(d, &args);
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("store/plan.json")).unwrap()).unwrap();
    let items = plan["items"].as_array().unwrap();
    ensure(items.len() == 200, || format!("plan has {} items", items.len()))?;
    let mut cells: BTreeMap<(String, String), usize> = BTreeMap::new();
    for it in items {
        *cells.entry((it["method"].to_string(), it["category"].to_string())).or_default() += 1;
    }
    ensure(cells.len() == 20 && cells.values().all(|&n| n == 10), || format!("uneven cells {cells:?}"))?;

    let mut server = start_server(d);
    let mut scored = BTreeMap::new();
    for n in 0..25 {
        let next = cli_json(d, &["annotate", "next", "--server", &server.url]);
        let id = next["item"]["item_id"].as_str().ok_or("no next item")?.to_string();
        let score = (n % 4 + 1).to_string();
        cli_json(d, &["annotate", "score", "--server", &server.url, "--item", &id, "--score", &score, "--annotator", "ann-1"]);
        scored.insert(id, n % 4 + 1);
    }
    server.child.kill().unwrap();
    server.child.wait().unwrap();

    let mut server = start_server(d);
    let agg = cli_json(d, &["annotate", "aggregate", "--server", &server.url]);
    let reopened = cli_json(d, &["annotate", "next", "--server", &server.url]);
    server.child.kill().unwrap();
    server.child.wait().unwrap();
    ensure(agg["scored"] == 25, || format!("after restart {} scored", agg["scored"]))?;
    ensure(reopened["progress"]["scored"] == 25, || "progress lost scores".into())?;

    reprompt_ok(d, &["export", "--store", "store", "--format", "jsonl", "--out", "scores.jsonl"]);
    let exported = std::fs::read_to_string(d.join("scores.jsonl")).unwrap();
    for line in exported.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = v["item_id"].as_str().unwrap();
        if let Some(want) = scored.get(id) {
            ensure(v["score"] == *want, || format!("{id}: stored {} expected {want}", v["score"]))?;
        }
    }
    let rejected = reprompt(d, &["annotate", "score", "--server", "http://127.0.0.1:1", "--item", "x", "--score", "3", "--annotator", "a"]);
    ensure(!rejected.status.success(), || "scoring against a dead server succeeded".into())?;
    Ok("200 items (4 methods x 5 categories x 10); 25 acknowledged scores survive a killed server".into())
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("ROUGE-L oracle", rouge_oracle),
        ("Balanced-average reproduction", balanced_reproduction),
        ("LoRA arithmetic", lora_arithmetic),
        ("Toy adapter gradient check", adapter_gradients),
        ("Sampler properties", sampler_properties),
        ("Template golden files", golden_templates),
        ("End-to-end mock pipeline", end_to_end),
        ("Synthetic pipeline", synthetic_pipeline),
        ("Annotation plan and crash recovery", annotation),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
