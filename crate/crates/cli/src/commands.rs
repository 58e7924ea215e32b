//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use toml::{Table, Value};

use qanogan::anogan::{calibrate_threshold, score_sample};
use qanogan::data::{check_creditcard_schema, load_csv, make_splits, save_csv, synth_dataset, Dataset};
use qanogan::eval::{apply_threshold, bootstrap_ci, evaluate_run, score_rows};
use qanogan::gan::{save_model, train, GanModel, LossRecord};
use qanogan::rng::{stream, Stream};

use crate::config::{config_from_table, load_config, load_table, resolve_out_dir, RunConfig};
use crate::run::{
    write_loss_history, write_scores, write_toml, Preprocessing, RunDir, RunMetrics, ThresholdFile, SPLITS,
};

const BOOTSTRAP_RESAMPLES: usize = 1000;
const BOOTSTRAP_LEVEL: f64 = 0.95;

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    pub repeat: usize,
    pub evaluate: bool,
    pub checkpoint_every: Option<usize>,
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let data = match (&cfg.data.path, &cfg.data.synth) {
        (Some(path), _) => load_csv(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(spec)) => synth_dataset(spec).context("data.synth")?,
        (None, None) => bail!("no data source configured"),
    };
    if cfg.data.creditcard_schema {
        check_creditcard_schema(&data)?;
    }
    Ok(data)
}

/// Trains one run into `dir`. Returns the run directory.
pub fn train_run(cfg: &RunConfig, dir: &Path, checkpoint_every: Option<usize>) -> Result<RunDir> {
    let run = RunDir::new(dir);
    fs::create_dir_all(dir.join("splits")).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(run.config_path(), cfg.to_toml()?)?;

    let raw = load_data(cfg)?;
    let splits = make_splits(&raw, &cfg.split).context("split")?;
    for (name, part) in SPLITS.iter().zip([&splits.train, &splits.calibration, &splits.test]) {
        save_csv(part, &run.split_path(name))?;
    }
    let prep = Preprocessing::fit(&splits.train, cfg.data.features.as_deref())?;
    write_toml(&run.preprocessing_path(), &prep)?;
    let train_data = prep.apply(&splits.train)?;
    ensure!(
        prep.model_dim() == cfg.model.generator.data_dim,
        "model.generator.data_dim is {} but the data has {} selected features",
        cfg.model.generator.data_dim,
        prep.model_dim()
    );

    let mut model = GanModel::new(&cfg.model, cfg.train.seed)?;
    let model_dir = run.model_dir();
    let history_path = run.loss_history_path();
    let mut history: Vec<LossRecord> = Vec::new();
    train(&mut model, &train_data, &cfg.train, |m, rec| {
        history.push(*rec);
        if checkpoint_every.is_some_and(|n| rec.iteration % n == 0) {
            save_model(m, &model_dir)?;
            write_loss_history(&history_path, &history)?;
        }
        Ok(())
    })?;
    save_model(&model, &model_dir)?;
    write_loss_history(&history_path, &history)?;
    Ok(run)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    ensure!(args.repeat >= 1, "--repeat must be at least 1");
    ensure!(args.checkpoint_every != Some(0), "--checkpoint-every must be at least 1");
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    let out = resolve_out_dir(args.out.as_deref(), &cfg);
    let mut runs = Vec::with_capacity(args.repeat);
    for r in 0..args.repeat {
        let cfg = cfg.clone().with_seed(cfg.seed + r as u64);
        let dir = if args.repeat == 1 { out.clone() } else { out.join(format!("run-{r:02}")) };
        let run = train_run(&cfg, &dir, args.checkpoint_every)?;
        eprintln!("trained {}", dir.display());
        runs.push(run);
    }
    if args.evaluate {
        for run in &runs {
            calibrate_run(run, "calibration", &[])?;
        }
        let report = evaluate_runs(&runs, None, &[])?;
        fs::write(out.join("report.csv"), &report)?;
        print!("{report}");
    }
    Ok(())
}

/// Fits the F1-optimal threshold on `split` and writes it to the run.
pub fn calibrate_run(run: &RunDir, split: &str, overrides: &[String]) -> Result<ThresholdFile> {
    let cfg = run.config(overrides)?;
    let model = run.model()?;
    let data = run.split(split)?;
    let mut scored = score_rows(&model, &data, &cfg.anomaly)?;
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = data.rows.iter().map(|r| r.label).collect();
    let cal = calibrate_threshold(&scores, &labels).with_context(|| format!("calibrating on {split}"))?;
    let eval = apply_threshold(&mut scored, cal.threshold)?;
    let ids: Vec<u64> = data.rows.iter().map(|r| r.id).collect();
    write_scores(&run.calibration_scores_path(), &ids, &scored)?;
    let file = ThresholdFile { threshold: cal.threshold, f1: cal.f1, counts: eval.counts };
    write_toml(&run.threshold_path(), &file)?;
    Ok(file)
}

pub fn cmd_calibrate(run_dir: &Path, split: &str, overrides: &[String]) -> Result<()> {
    let t = calibrate_run(&RunDir::new(run_dir), split, overrides)?;
    println!("threshold={} f1={}", t.threshold, t.f1);
    Ok(())
}

fn evaluate_one(run: &RunDir, threshold: Option<f64>, overrides: &[String]) -> Result<RunMetrics> {
    let cfg = run.config(overrides)?;
    let threshold = match threshold {
        Some(t) => t,
        None => run.threshold()?.threshold,
    };
    let model = run.model()?;
    let test = run.split("test")?;
    let (eval, scored) = evaluate_run(&model, &test, threshold, &cfg.anomaly)
        .with_context(|| format!("evaluating {}", run.root.display()))?;
    let ids: Vec<u64> = test.rows.iter().map(|r| r.id).collect();
    write_scores(&run.scores_path(), &ids, &scored)?;
    let metrics = RunMetrics {
        run_id: run.id(),
        seed: cfg.seed,
        iterations: model.generator_steps,
        threshold,
        precision: eval.precision,
        recall: eval.recall,
        f1: eval.f1,
        counts: eval.counts,
    };
    write_toml(&run.metrics_path(), &metrics)?;
    Ok(metrics)
}

/// Evaluates every run on its test split and renders the CSV report: one
/// row per run plus a `mean` row with bootstrap intervals on F1.
pub fn evaluate_runs(runs: &[RunDir], threshold: Option<f64>, overrides: &[String]) -> Result<String> {
    ensure!(!runs.is_empty(), "no runs to evaluate");
    let metrics = runs.iter().map(|r| evaluate_one(r, threshold, overrides)).collect::<Result<Vec<_>>>()?;
    let f1s: Vec<f64> = metrics.iter().map(|m| m.f1).collect();
    let ci = bootstrap_ci(&f1s, BOOTSTRAP_RESAMPLES, BOOTSTRAP_LEVEL, metrics[0].seed)?;
    let mean = |f: fn(&RunMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / metrics.len() as f64;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run_id", "seed", "iterations", "precision", "recall", "f1", "ci_low", "ci_high"])?;
    for m in &metrics {
        w.write_record([
            m.run_id.clone(),
            m.seed.to_string(),
            m.iterations.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    w.write_record([
        "mean".to_string(),
        String::new(),
        String::new(),
        mean(|m| m.precision).to_string(),
        mean(|m| m.recall).to_string(),
        ci.mean.to_string(),
        ci.low.to_string(),
        ci.high.to_string(),
    ])?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn cmd_evaluate(
    run_dirs: &[PathBuf],
    threshold: Option<f64>,
    report: Option<&Path>,
    overrides: &[String],
) -> Result<()> {
    let runs: Vec<RunDir> = run_dirs.iter().map(RunDir::new).collect();
    let text = evaluate_runs(&runs, threshold, overrides)?;
    if let Some(path) = report {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{text}");
    Ok(())
}

pub struct ScoreArgs {
    pub run_dir: PathBuf,
    pub row: String,
    pub threshold: Option<f64>,
    pub normalized: bool,
    pub overrides: Vec<String>,
}

pub fn cmd_score(args: &ScoreArgs, out: &mut impl Write) -> Result<()> {
    let run = RunDir::new(&args.run_dir);
    let cfg = run.config(&args.overrides)?;
    let values = args
        .row
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("--row value {v:?} is not a number")))
        .collect::<Result<Vec<_>>>()?;
    let model = run.model()?;
    let x = if args.normalized {
        ensure!(
            values.len() == model.data_dim(),
            "row has {} values, the model expects {}",
            values.len(),
            model.data_dim()
        );
        values
    } else {
        run.preprocessing()?.apply_row(&values)?
    };
    let threshold = match args.threshold {
        Some(t) => Some(t),
        None if run.threshold_path().exists() => Some(run.threshold()?.threshold),
        None => None,
    };
    let s = score_sample(&model, &x, &cfg.anomaly, &mut stream(cfg.anomaly.seed, Stream::Scoring))?;
    writeln!(out, "residual_loss={}", s.residual_loss)?;
    writeln!(out, "discrimination_loss={}", s.discrimination_loss)?;
    writeln!(out, "score={}", s.score)?;
    match threshold {
        Some(t) => {
            let verdict = if s.score >= t { "anomalous" } else { "normal" };
            writeln!(out, "verdict={verdict} (threshold {t})")?;
        }
        None => writeln!(out, "verdict=unknown (no threshold)")?,
    }
    Ok(())
}

pub fn cmd_synth(config: Option<&Path>, overrides: &[String], out: &Path) -> Result<()> {
    let mut table = match config {
        Some(p) => load_table(p)?,
        None => Table::new(),
    };
    let data = table.entry("data").or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = data {
        t.entry("synth").or_insert_with(|| Value::Table(Table::new()));
    }
    let cfg = config_from_table(table, overrides)?;
    let spec = cfg.data.synth.as_ref().context("data.synth is required")?;
    let ds = synth_dataset(spec).context("data.synth")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_csv(&ds, out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} rows ({} anomalous) to {}", ds.len(), ds.n_anomalous(), out.display());
    Ok(())
}
