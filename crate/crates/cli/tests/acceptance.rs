//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails. Tolerances and protocols are pinned below.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use prmcs::embedcore::{EncoderParams, EncoderShape, MetricConfig};
use prmcs::evalstats::{drop_report, evaluate_drop, kendall_tau_c, pearson, DropReport};
use prmcs::losses::LossWeights;
use prmcs::metric::{ScoreRow, ORIGINAL_KIND};
use prmcs::textproc::{
    perturb_masking, perturb_removal, perturb_repetition, PerturbationKind, RngStream,
    TokenSequence,
};
use prmcs::trainer::{synth_dataset, train_few_shot, train_pr, TrainConfig};
use prmcs::{Encoder, Ratings};

const PCT_TOL: f64 = 0.01;
const GRAD_TOL: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-5;
const CONTRASTIVE_MAX_DROP: f64 = 15.0;
const ROBUST_MIN_DROP: f64 = 40.0;
const RATE_BAND: (f64, f64) = (0.389, 0.411);
const ORACLE_TOL: f64 = 1e-12;

/// Toy-scale training protocol shared by the mechanism and few-shot runs.
const TOY_SHAPE: EncoderShape = EncoderShape {
    vocab: 4096,
    hidden: 64,
    out_dim: 32,
};
const TOY_GATE_GAIN: f64 = 4.0;
const TOY_SEED: u64 = 0;
const TOY_STEPS: usize = 2000;
const FEW_SHOT_STEPS: usize = 300;

fn toy_config(weights: LossWeights, steps: usize) -> TrainConfig {
    TrainConfig {
        lr: 1e-2,
        weight_decay: 0.1,
        steps,
        batch_size: 32,
        seed: TOY_SEED,
        weights,
        ..Default::default()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prmcs"))
}

fn run_ok(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{:?} exited {:?}: {}",
            cmd,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn single_row_pct(original: f64, perturbed: f64) -> f64 {
    let row = |kind: &str, score| ScoreRow {
        id: "t2".into(),
        lang: "en".into(),
        kind: kind.into(),
        score,
    };
    let report = drop_report(
        &[row(ORIGINAL_KIND, original)],
        &[row("masking", perturbed)],
    )
    .expect("fixture report");
    report.langs[0].kinds[0].pct
}

fn report_arithmetic() -> Outcome {
    let a = single_row_pct(1.4177, 0.29964);
    let b = single_row_pct(0.7944, 0.7442);
    let pass = (a - -78.86).abs() <= PCT_TOL && (b - -6.32).abs() <= PCT_TOL;
    outcome(
        pass,
        format!("{a:.4}% and {b:.4}% (targets -78.86, -6.32, tol {PCT_TOL})"),
    )
}

fn gradient_correctness(dir: &Path) -> Outcome {
    let out = dir.join("gradcheck.json");
    let status = bin()
        .args([
            "gradcheck",
            "--seeds",
            "5",
            "--batch-size",
            "8",
            "--h",
            &GRAD_STEP.to_string(),
        ])
        .args(["--tolerance", &GRAD_TOL.to_string(), "--out"])
        .arg(&out)
        .output()
        .expect("run gradcheck");
    let Ok(text) = fs::read_to_string(&out) else {
        return outcome(
            false,
            format!("no report: {}", String::from_utf8_lossy(&status.stderr)),
        );
    };
    let v: serde_json::Value = serde_json::from_str(&text).expect("gradcheck JSON");
    let per_seed: Vec<String> = v["seeds"]
        .as_array()
        .expect("seed list")
        .iter()
        .map(|s| format!("{:.1e}", s["max_rel_error"].as_f64().unwrap_or(f64::NAN)))
        .collect();
    let max = v["max_rel_error"].as_f64().unwrap_or(f64::INFINITY);
    outcome(
        max < GRAD_TOL,
        format!(
            "max rel error {max:.2e} < {GRAD_TOL:e} at h={GRAD_STEP:e}; per seed [{}]",
            per_seed.join(", ")
        ),
    )
}

fn kind_drops(report: &DropReport) -> Vec<(String, f64)> {
    report.langs[0]
        .kinds
        .iter()
        .map(|k| (k.kind.clone(), k.pct.abs()))
        .collect()
}

fn mechanism_reproduction() -> Outcome {
    let data = synth_dataset(200, 500, 32, 0.1, TOY_SEED).expect("synth");
    let (train, held) = data.records.split_at(150);
    let init: Encoder = EncoderParams::init(TOY_SHAPE, TOY_GATE_GAIN, TOY_SEED);
    let eval = |p: &Encoder| {
        evaluate_drop(
            &data.images,
            p,
            held,
            &PerturbationKind::ALL,
            0.4,
            TOY_SEED,
            &MetricConfig::default(),
        )
        .expect("drop report")
    };
    let contrastive = train_pr(
        &data.images,
        train,
        &init,
        &toy_config(LossWeights::ZERO, TOY_STEPS),
    )
    .expect("train a");
    let robust = train_pr(
        &data.images,
        train,
        &init,
        &toy_config(LossWeights::default(), TOY_STEPS),
    )
    .expect("train b");
    let (ra, rb) = (eval(&contrastive.params), eval(&robust.params));
    let (ma, mb) = (ra.langs[0].mean_abs_drop(), rb.langs[0].mean_abs_drop());
    let (ka, kb) = (kind_drops(&ra), kind_drops(&rb));
    let every_kind = ka.iter().zip(&kb).all(|((_, a), (_, b))| b > a);
    let kinds: Vec<String> = ka
        .iter()
        .zip(&kb)
        .map(|((k, a), (_, b))| format!("{k} {a:.1}/{b:.1}"))
        .collect();
    outcome(
        ma <= CONTRASTIVE_MAX_DROP && mb >= ROBUST_MIN_DROP && every_kind,
        format!(
            "contrastive {ma:.2}% (<= {CONTRASTIVE_MAX_DROP}), robust {mb:.2}% (>= {ROBUST_MIN_DROP}); per kind |drop| {}",
            kinds.join(", ")
        ),
    )
}

fn few_shot_protocol() -> Outcome {
    let data = synth_dataset(3500, 500, 32, 0.1, TOY_SEED).expect("synth");
    let (few_shot_set, base_set) = data.records.split_at(3000);
    let init: Encoder = EncoderParams::init(TOY_SHAPE, TOY_GATE_GAIN, TOY_SEED);
    let base = train_pr(
        &data.images,
        base_set,
        &init,
        &toy_config(LossWeights::ZERO, TOY_STEPS),
    )
    .expect("base");
    let (adapted, split) = train_few_shot(
        &data.images,
        few_shot_set,
        &base.params,
        &toy_config(LossWeights::default(), FEW_SHOT_STEPS),
    )
    .expect("few-shot");
    let eval = |p: &Encoder| {
        evaluate_drop(
            &data.images,
            p,
            &split.evaluation,
            &PerturbationKind::ALL,
            0.4,
            TOY_SEED,
            &MetricConfig::default(),
        )
        .expect("drop report")
        .langs[0]
            .mean_abs_drop()
    };
    let (before, after) = (eval(&base.params), eval(&adapted.params));
    let sizes = (split.adaptation.len(), split.evaluation.len());
    outcome(
        sizes == (300, 2700) && after > before,
        format!(
            "split {}/{}, mean |drop| {before:.2}% -> {after:.2}%",
            sizes.0, sizes.1
        ),
    )
}

fn perturbation_statistics() -> Outcome {
    const DRAWS: usize = 20_000;
    let tokens: TokenSequence = (0..DRAWS).map(|i| format!("w{i}")).collect();
    let rep = (perturb_repetition(&tokens, 0.4, &mut RngStream::new(11)).len() - DRAWS) as f64
        / DRAWS as f64;
    let keep = perturb_removal(&tokens, 0.4, &mut RngStream::new(12)).len() as f64 / DRAWS as f64;
    let mask = perturb_masking(&tokens, 0.4, &mut RngStream::new(13))
        .iter()
        .filter(|t| *t == "[MASK]")
        .count() as f64
        / DRAWS as f64;
    let ok = [rep, keep, mask]
        .iter()
        .all(|r| (RATE_BAND.0..=RATE_BAND.1).contains(r));
    outcome(
        ok,
        format!(
            "repetition {rep:.4}, removal keep {keep:.4}, masking {mask:.4} in [{}, {}]",
            RATE_BAND.0, RATE_BAND.1
        ),
    )
}

fn golf_substitution(dir: &Path) -> Outcome {
    let caption = "A man, wearing a white shirt and grey shorts, is playing golf on a green field with green trees and a blue sky in the background.";
    let expected = "A man, wearing a golf and green field, is playing white shirt on a grey shorts with green trees and a blue sky in the background.";
    let record = serde_json::json!({
        "id": "golf", "lang": "en", "caption": caption,
        "critical_objects": ["white shirt", "grey shorts", "golf", "green field"], "image_id": "img-golf"
    });
    let (input, output) = (dir.join("fig.jsonl"), dir.join("fig.out.jsonl"));
    fs::write(&input, format!("{record}\n")).expect("write input");
    let run = run_ok(
        bin()
            .args([
                "perturb",
                "--kinds",
                "substitution",
                "--force-permutation",
                "2,3,0,1",
                "--input",
            ])
            .arg(&input)
            .arg("--output")
            .arg(&output),
    );
    if let Err(e) = run {
        return outcome(false, e);
    }
    let text = fs::read_to_string(&output).expect("perturb output");
    let got: serde_json::Value =
        serde_json::from_str(text.lines().next().unwrap_or("{}")).expect("output JSON");
    let got = got["caption"].as_str().unwrap_or_default();
    outcome(got.as_bytes() == expected.as_bytes(), format!("{got:?}"))
}

fn brute_tau_c(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += ((x[i] - x[j]) * (y[i] - y[j]))
                .partial_cmp(&0.0)
                .map_or(0, |o| o as i64);
        }
    }
    let distinct = |v: &[f64]| {
        let mut u = v.to_vec();
        u.sort_by(f64::total_cmp);
        u.dedup();
        u.len() as f64
    };
    let m = distinct(x).min(distinct(y));
    2.0 * m * s as f64 / ((n * n) as f64 * (m - 1.0))
}

fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn statistics_oracles() -> Outcome {
    let mut rng = RngStream::new(99);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        let n = 2 + rng.below(49);
        let levels = 2 + rng.below(6);
        let x: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64).collect();
        let y: Vec<f64> = (0..n)
            .map(|_| rng.below(levels) as f64 + 0.25 * rng.below(2) as f64)
            .collect();
        let Ok(pairs) = Ratings::new(x.clone(), y.clone()) else {
            continue;
        };
        let (Ok(t), Ok(r)) = (kendall_tau_c(&pairs), pearson(&pairs)) else {
            continue;
        };
        worst = worst
            .max((t - brute_tau_c(&x, &y)).abs())
            .max((r - direct_pearson(&x, &y)).abs());
        cases += 1;
    }
    let tau = |x: &[f64], y: &[f64]| {
        kendall_tau_c(&Ratings::new(x.to_vec(), y.to_vec()).unwrap()).unwrap()
    };
    let tagged = [
        tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) == 1.0,
        tau(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]) == -1.0,
        (tau(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]) - 8.0 / 9.0).abs() <= f64::EPSILON,
    ];
    let tagged_ok = tagged.iter().all(|&b| b);
    outcome(
        worst <= ORACLE_TOL && tagged_ok,
        format!("{cases} cases, max deviation {worst:.1e}; tagged examples {tagged:?}"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let (images, records, teacher) = (dir.join("d.prmc"), dir.join("d.jsonl"), dir.join("t.prmc"));
    let synth = run_ok(
        bin()
            .args([
                "synth", "--pairs", "120", "--dim", "16", "--seed", "5", "--images",
            ])
            .arg(&images)
            .arg("--records")
            .arg(&records)
            .arg("--teacher")
            .arg(&teacher),
    );
    if let Err(e) = synth {
        return outcome(false, e);
    }
    let train = [
        "--vocab",
        "512",
        "--hidden",
        "16",
        "--out-dim",
        "16",
        "--steps",
        "15",
        "--batch-size",
        "8",
        "--lr",
        "1e-3",
    ];
    let runs: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        (
            "perturb",
            vec![
                "perturb".into(),
                "--seed".into(),
                "3".into(),
                "--input".into(),
                p(&records),
            ],
            vec!["--output"],
        ),
        (
            "train pr",
            [
                vec!["train".into(), "pr".into()],
                strs(&train),
                vec![
                    "--images".into(),
                    p(&images),
                    "--captions".into(),
                    p(&records),
                ],
            ]
            .concat(),
            vec!["--out", "--trace"],
        ),
        (
            "train few-shot",
            [
                vec!["train".into(), "few-shot".into()],
                strs(&train),
                vec![
                    "--images".into(),
                    p(&images),
                    "--captions".into(),
                    p(&records),
                ],
            ]
            .concat(),
            vec!["--out", "--trace", "--split-out"],
        ),
        (
            "train distill",
            [
                vec!["train".into(), "distill".into()],
                strs(&train),
                vec![
                    "--teacher".into(),
                    p(&teacher),
                    "--captions".into(),
                    p(&records),
                ],
            ]
            .concat(),
            vec!["--out", "--trace"],
        ),
    ];
    let mut checked = Vec::new();
    let mut model = None;
    for (name, args, outputs) in runs {
        let mut bytes = Vec::new();
        for rerun in 0..2 {
            let mut cmd = bin();
            cmd.args(&args);
            let mut files = Vec::new();
            for flag in &outputs {
                let f = dir.join(format!(
                    "{}-{}-{rerun}",
                    name.replace(' ', "_"),
                    flag.trim_start_matches('-')
                ));
                cmd.arg(flag).arg(&f);
                files.push(f);
            }
            if let Err(e) = run_ok(&mut cmd) {
                return outcome(false, e);
            }
            bytes.push(
                files
                    .iter()
                    .map(|f| fs::read(f).expect("output file"))
                    .collect::<Vec<_>>(),
            );
            if name == "train pr" {
                model = Some(files[0].clone());
            }
        }
        if bytes[0] != bytes[1] {
            return outcome(false, format!("{name} outputs differ between runs"));
        }
        checked.push(name);
    }
    let model = model.expect("trained model");
    let mut scores = Vec::new();
    for rerun in 0..2 {
        let out = dir.join(format!("scores-{rerun}.csv"));
        let cmd = bin()
            .args(["score", "--images"])
            .arg(&images)
            .arg("--captions")
            .arg(&records)
            .arg("--model")
            .arg(&model)
            .arg("--out")
            .arg(&out)
            .output();
        if !cmd.map(|o| o.status.success()).unwrap_or(false) {
            return outcome(false, "score failed");
        }
        scores.push(fs::read(&out).expect("scores"));
    }
    if scores[0] != scores[1] {
        return outcome(false, "score outputs differ between runs");
    }
    checked.push("score");
    outcome(
        true,
        format!("byte-identical reruns: {}", checked.join(", ")),
    )
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Check)> = vec![
        ("report arithmetic", Box::new(report_arithmetic)),
        (
            "gradient correctness",
            Box::new(|| gradient_correctness(dir.path())),
        ),
        ("mechanism reproduction", Box::new(mechanism_reproduction)),
        ("few-shot protocol", Box::new(few_shot_protocol)),
        ("perturbation statistics", Box::new(perturbation_statistics)),
        (
            "substitution example",
            Box::new(|| golf_substitution(dir.path())),
        ),
        ("statistics oracles", Box::new(statistics_oracles)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} [{}] {name}: {} ({:.1}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
