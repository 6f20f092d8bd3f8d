//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Reference values come from oracles written
//! here, not from the library under test.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use sarquant::corpus::{aggregate, aggregate_label, parse_label_string, parse_vote_record, read_corpus};
use sarquant::eval::{cross_validate, kfold_indices, MlpLearner};
use sarquant::model::{sigmoid, train, AdamState, Layer, RegressorParams};
use sarquant::{FeatureVector, Sample, TrainConfig};
use sarquant_annotate::{http, replay, AnnotationService, EventKind, LogEntry, LOG_FILE};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "label aggregation matches exact rational k/A", budget: secs(1), run: aggregation_oracle },
        Criterion { name: "label strings parse to their levels", budget: secs(1), run: label_strings },
        Criterion { name: "backprop agrees with finite differences on 20 random nets", budget: secs(10), run: gradient_oracle },
        Criterion { name: "first two Adam steps match hand computation", budget: secs(1), run: adam_steps },
        Criterion { name: "regressor overfits a 64-example teacher set", budget: secs(60), run: overfit },
        Criterion { name: "10-fold CV reaches the synthetic noise floor", budget: secs(300), run: cv_noise_floor },
        Criterion { name: "k-fold plans partition the data with balanced sizes", budget: secs(30), run: fold_partition },
        Criterion { name: "CLI cross-validation is byte-for-byte reproducible", budget: secs(120), run: cli_cv_determinism },
        Criterion { name: "HTTP service enforces quorum under 50 concurrent annotators and replays", budget: secs(120), run: service_quorum },
        Criterion { name: "service export ingests with labels equal to aggregated votes", budget: secs(60), run: export_roundtrip },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {}  ({detail}; {elapsed:.2?})", c.name),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {}  ({reason})", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ulps_apart(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

/// Vote patterns of the five sample sentences and their expected levels.
const SAMPLE_VOTES: [([u8; 11], u64); 5] = [
    ([1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1], 10),
    ([1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1], 3),
    ([0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1], 7),
    ([0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0], 4),
    ([0; 11], 0),
];

fn aggregation_oracle() -> Check {
    const A: usize = 11;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut vote_sets: Vec<Vec<u8>> = SAMPLE_VOTES.iter().map(|(v, _)| v.to_vec()).collect();
    // every possible yes-count, then a random bulk
    vote_sets.extend((0..=A).map(|k| (0..A).map(|j| u8::from(j < k)).collect()));
    vote_sets.extend((0..2000).map(|_| (0..A).map(|_| rng.random_range(0..=1)).collect()));

    let lines: Vec<String> = vote_sets
        .iter()
        .enumerate()
        .map(|(i, v)| json!({"id": format!("r{i}"), "text": "t", "category": "sports", "votes": v}).to_string())
        .collect();
    let records = lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_vote_record(l, i + 1, A))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let corpus = aggregate(&records).map_err(|e| e.to_string())?;

    let exact: Vec<Ratio<u64>> = vote_sets
        .iter()
        .map(|v| Ratio::new(v.iter().map(|&b| u64::from(b)).sum(), A as u64))
        .collect();
    for (i, (_, k)) in SAMPLE_VOTES.iter().enumerate() {
        ensure!(exact[i] == Ratio::new(*k, A as u64), "sample {} tallies {} not {k}/11", i + 1, exact[i]);
    }
    let mut worst = 0;
    for (ex, r) in corpus.iter().zip(&exact) {
        let oracle = *r.numer() as f64 / *r.denom() as f64;
        worst = worst.max(ulps_apart(ex.label, oracle));
    }
    ensure!(worst <= 1, "label off by {worst} ulp");
    Ok(format!("{} records incl. the 5 samples, worst {worst} ulp", corpus.len()))
}

fn label_strings() -> Check {
    let cases = [("2/11", 2.0 / 11.0), ("5/11", 5.0 / 11.0), ("9/11", 9.0 / 11.0), ("1", 1.0), ("0", 0.0), ("6/11", 6.0 / 11.0)];
    for (s, want) in cases {
        let got = parse_label_string(s, 11).map_err(|e| format!("{s}: {e}"))?;
        ensure!((got - want).abs() <= 1e-12, "{s} parsed to {got}, want {want}");
    }
    Ok(format!("{} strings", cases.len()))
}

/// Nested-loop forward pass over the raw layer arrays.
fn oracle_forward(layers: &[Layer], x: &[f64]) -> f64 {
    let mut h = x.to_vec();
    for layer in layers {
        h = (0..layer.fan_out)
            .map(|j| {
                let z: f64 = layer.biases[j] + (0..layer.fan_in).map(|i| h[i] * layer.weights[i * layer.fan_out + j]).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            })
            .collect();
    }
    h[0]
}

fn slot(layers: &mut [Layer], l: usize, k: usize) -> &mut f64 {
    let nw = layers[l].weights.len();
    if k < nw {
        &mut layers[l].weights[k]
    } else {
        &mut layers[l].biases[k - nw]
    }
}

fn gradient_oracle() -> Check {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for net in 0..20 {
        let dim = rng.random_range(1..=8);
        let width = rng.random_range(1..=6);
        let params = RegressorParams::init(dim, width, 2, rng.random()).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: f64 = rng.random_range(0.0..1.0);
        let (_, cache) = params.forward_train(&x, 0.0, &mut rng).map_err(|e| e.to_string())?;
        let grads = params.backward(&cache, y);

        let mut probe = params.layers.clone();
        for l in 0..probe.len() {
            let nw = probe[l].weights.len();
            for k in 0..nw + probe[l].biases.len() {
                let analytic = if k < nw { grads.layers[l].weights[k] } else { grads.layers[l].biases[k - nw] };
                let orig = *slot(&mut probe, l, k);
                *slot(&mut probe, l, k) = orig + h;
                let plus = (oracle_forward(&probe, &x) - y).powi(2);
                *slot(&mut probe, l, k) = orig - h;
                let minus = (oracle_forward(&probe, &x) - y).powi(2);
                *slot(&mut probe, l, k) = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs());
                let diff = (analytic - numeric).abs();
                let err = if scale < 1e-8 { if diff <= 1e-8 { 0.0 } else { diff / 1e-8 } } else { diff / scale };
                ensure!(err < 1e-4, "net {net} layer {l} param {k}: analytic {analytic:e} vs numeric {numeric:e}");
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn adam_steps() -> Check {
    let config = TrainConfig::default();
    let mut state = AdamState::new(1);
    let mut theta = [0.0f64];
    let g = [1.0f64];
    // m̂ = v̂ = 1 at both steps for a constant unit gradient
    let expected = [-0.001 / (1.0 + 1e-8), -2.0 * 0.001 / (1.0 + 1e-8)];
    for (t, want) in expected.iter().enumerate() {
        state.step_values(theta.iter_mut(), g.iter(), &config);
        ensure!((theta[0] - want).abs() <= 1e-9, "step {}: {} vs {want}", t + 1, theta[0]);
    }
    Ok(format!("theta after two steps {:.12}", theta[0]))
}

fn teacher_set() -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
    (0..64)
        .map(|_| {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            Sample::new(FeatureVector::new(x).unwrap(), 1.0 / (1.0 + (-z).exp()))
        })
        .collect()
}

fn overfit() -> Check {
    let data = teacher_set();
    let config = TrainConfig { dropout: 0.0, epochs: 2000, seed: 3, ..TrainConfig::default() };
    let outcome = train(&data, &config).map_err(|e| e.to_string())?;
    let mse = data
        .iter()
        .map(|s| (outcome.model.predict(s.features.as_slice()).unwrap() - s.target).powi(2))
        .sum::<f64>()
        / data.len() as f64;
    ensure!(mse < 1e-3, "training MSE {mse:e} after 2000 epochs");
    Ok(format!("training MSE {mse:.3e}"))
}

fn noisy_teacher(n: usize, dim: usize, sigma: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let y = (sigmoid(z) + noise.sample(&mut rng)).clamp(0.0, 1.0);
            Sample::new(FeatureVector::new(x).unwrap(), y)
        })
        .collect()
}

fn cv_noise_floor() -> Check {
    let data = noisy_teacher(500, 16, 0.05, 42);
    let learner = MlpLearner { config: TrainConfig { epochs: 100, ..TrainConfig::default() } };
    let report = cross_validate(&data, &learner, 10, 0, 6.0 / 11.0).map_err(|e| e.to_string())?;
    ensure!(report.final_loss <= 0.01, "final loss {}", report.final_loss);
    let text = report.to_text();
    let lines: Vec<&str> = text.lines().collect();
    ensure!(lines.len() == 2 + 10 + 1, "report has {} lines", lines.len());
    ensure!(lines[0].starts_with("Fold Number") && lines[0].ends_with("Evaluation loss"), "header {:?}", lines[0]);
    for (i, line) in lines[2..].iter().enumerate() {
        let (label, value) = line.split_once(" | ").ok_or_else(|| format!("row {line:?}"))?;
        let want = if i < 10 { format!("Fold {}", i + 1) } else { "Final loss".into() };
        ensure!(label.trim_end() == want, "row label {label:?}");
        let decimals = value.split_once('.').map(|(_, d)| d.len());
        ensure!(decimals == Some(9), "value {value:?} is not 9-decimal");
    }
    Ok(format!("final loss {:.6}", report.final_loss))
}

fn fold_partition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let k = rng.random_range(2..=20);
        let n = rng.random_range(k..=5000);
        let seed: u64 = rng.random();
        let plan = kfold_indices(n, k, seed).map_err(|e| e.to_string())?;
        ensure!(plan.folds.len() == k, "{} folds for k={k}", plan.folds.len());
        let mut seen = vec![false; n];
        for fold in &plan.folds {
            for &i in fold {
                ensure!(i < n && !seen[i], "index {i} repeated or out of range (n={n}, k={k})");
                seen[i] = true;
            }
        }
        ensure!(seen.iter().all(|&s| s), "not every index assigned (n={n}, k={k})");
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        let (lo, extra) = (n / k, n % k);
        for (f, &s) in sizes.iter().enumerate() {
            ensure!(s == lo + usize::from(f < extra), "fold {f} size {s} (n={n}, k={k})");
        }
    }
    let sizes: Vec<usize> = kfold_indices(1554, 10, 0).map_err(|e| e.to_string())?.folds.iter().map(Vec::len).collect();
    ensure!(sizes == [156, 156, 156, 156, 155, 155, 155, 155, 155, 155], "1554/10 sizes {sizes:?}");
    Ok("200 random plans, 1554/10 → 4×156 + 6×155".into())
}

fn write_synthetic_corpus(path: &Path, n: usize) {
    let words = ["والله", "حلو", "جدا", "اكيد", "طبعا", "يا", "سلام", "مبروك", "عظيم", "رائع", "فعلا", "كالعادة"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cats = ["politics", "entertainment", "products_services", "sports"];
    let body: String = (0..n)
        .map(|i| {
            let len = rng.random_range(3..9);
            let text: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())]).collect();
            let k = rng.random_range(0..=11);
            json!({"id": format!("c{i}"), "text": text.join(" "), "category": cats[i % 4], "label": k as f64 / 11.0}).to_string() + "\n"
        })
        .collect();
    std::fs::write(path, body).unwrap();
}

fn cli_cv_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    write_synthetic_corpus(&corpus, 60);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("report{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_sarquant"))
            .args(["cv", "--in"])
            .arg(&corpus)
            .args(["--k", "5", "--seed", "17", "--dim", "256", "--hidden", "16", "--epochs", "3", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.success(), "cv exited {:?}: {}", status.status, String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "reports differ between runs");
    Ok(format!("{} byte report identical", outputs[0].len()))
}

async fn run_annotators(base: &str, annotators: usize) -> Result<usize, String> {
    let client = reqwest::Client::new();
    let mut tasks = tokio::task::JoinSet::new();
    for a in 0..annotators {
        let client = client.clone();
        let base = base.to_owned();
        tasks.spawn(async move {
            let name = format!("annotator-{a:02}");
            let mut recorded = 0usize;
            loop {
                let resp = client.get(format!("{base}/api/next")).query(&[("annotator", &name)]).send().await.map_err(|e| e.to_string())?;
                if resp.status() == reqwest::StatusCode::NO_CONTENT {
                    return Ok::<usize, String>(recorded);
                }
                let task: Value = resp.json().await.map_err(|e| e.to_string())?;
                let body = json!({"annotator": name, "sentence_id": task["sentence_id"], "value": (a + recorded) % 3 == 0});
                let resp = client.post(format!("{base}/api/votes")).json(&body).send().await.map_err(|e| e.to_string())?;
                match resp.status().as_u16() {
                    201 => recorded += 1,
                    409 => {}
                    other => return Err(format!("{name}: vote status {other}")),
                }
            }
        });
    }
    let mut total = 0;
    while let Some(joined) = tasks.join_next().await {
        total += joined.map_err(|e| e.to_string())??;
    }
    Ok(total)
}

fn import_body(n: usize) -> String {
    (0..n).map(|i| json!({"id": format!("s{i:02}"), "text": format!("جملة رقم {i}"), "category": "politics"}).to_string() + "\n").collect()
}

fn service_quorum() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let svc = Arc::new(AnnotationService::open(dir.path(), 11).map_err(|e| e.to_string())?);
        let (addr, handle) = http::spawn_local(svc.clone()).await.map_err(|e| e.to_string())?;
        let base = format!("http://{addr}");
        let client = reqwest::Client::new();
        let resp = client.post(format!("{base}/api/import")).body(import_body(20)).send().await.map_err(|e| e.to_string())?;
        ensure!(resp.status().as_u16() == 201, "import status {}", resp.status());

        let recorded = run_annotators(&base, 50).await?;
        let before: Value = client.get(format!("{base}/api/progress")).send().await.map_err(|e| e.to_string())?.json().await.map_err(|e| e.to_string())?;
        ensure!(before["complete"] == 20 && before["total_votes"] == 220, "progress {before}");
        ensure!(recorded == 220, "{recorded} votes acknowledged");

        // audit straight from the log file
        let raw = std::fs::read_to_string(dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?;
        let mut voters: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in raw.lines().enumerate() {
            let entry: LogEntry = serde_json::from_str(line).map_err(|e| format!("log line {}: {e}", i + 1))?;
            ensure!(entry.seq == i as u64 + 1, "seq {} at line {}", entry.seq, i + 1);
            if entry.kind == EventKind::Vote {
                voters.entry(entry.payload["sentence_id"].as_str().unwrap_or_default().to_owned()).or_default().push(entry.payload["annotator"].as_str().unwrap_or_default().to_owned());
            }
        }
        ensure!(voters.len() == 20, "{} sentences voted", voters.len());
        for (id, names) in &voters {
            let distinct: BTreeSet<_> = names.iter().collect();
            ensure!(names.len() == 11 && distinct.len() == 11, "{id}: {} votes, {} distinct", names.len(), distinct.len());
        }

        // kill and restart from the log
        handle.abort();
        let _ = handle.await;
        drop(svc);
        let svc = Arc::new(AnnotationService::open(dir.path(), 11).map_err(|e| e.to_string())?);
        let (addr, handle) = http::spawn_local(svc).await.map_err(|e| e.to_string())?;
        let after: Value = client.get(format!("http://{addr}/api/progress")).send().await.map_err(|e| e.to_string())?.json().await.map_err(|e| e.to_string())?;
        handle.abort();
        ensure!(after == before, "progress after replay {after} != {before}");
        Ok("20 sentences × 11 distinct annotators, replay identical".to_owned())
    })
}

fn export_roundtrip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let exported = rt.block_on(async {
        let svc = Arc::new(AnnotationService::open(dir.path(), 11).map_err(|e| e.to_string())?);
        let (addr, handle) = http::spawn_local(svc).await.map_err(|e| e.to_string())?;
        let base = format!("http://{addr}");
        let client = reqwest::Client::new();
        client.post(format!("{base}/api/import")).body(import_body(12)).send().await.map_err(|e| e.to_string())?;
        run_annotators(&base, 15).await?;
        let body = client.get(format!("{base}/api/export")).send().await.map_err(|e| e.to_string())?.text().await.map_err(|e| e.to_string())?;
        handle.abort();
        Ok::<String, String>(body)
    })?;

    let corpus = read_corpus(BufReader::new(exported.as_bytes())).map_err(|e| e.to_string())?;
    ensure!(corpus.len() == 12, "{} exported examples", corpus.len());
    let raw = std::fs::read_to_string(dir.path().join(LOG_FILE)).map_err(|e| e.to_string())?;
    let (_, _) = replay(BufReader::new(raw.as_bytes()), 11).map_err(|e| e.to_string())?;
    let mut votes: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for line in raw.lines() {
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if entry.kind == EventKind::Vote {
            votes.entry(entry.payload["sentence_id"].as_str().unwrap_or_default().to_owned()).or_default().push(u8::from(entry.payload["value"].as_bool() == Some(true)));
        }
    }
    for ex in &corpus {
        let want = aggregate_label(&votes[&ex.id]).map_err(|e| e.to_string())?;
        ensure!(ex.label == want, "{}: exported {} vs aggregated {want}", ex.id, ex.label);
    }

    // and the CLI ingests it
    let path = dir.path().join("export.jsonl");
    std::fs::write(&path, &exported).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_sarquant")).args(["stats", "--json", "--in"]).arg(&path).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "stats failed: {}", String::from_utf8_lossy(&out.stderr));
    let stats: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure!(stats["total"] == 12, "stats total {}", stats["total"]);
    Ok(format!("{} examples, labels exact", corpus.len()))
}
