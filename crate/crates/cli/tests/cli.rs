use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qanogan::data::load_csv;
use qanogan::gan::{load_model, GanModel, ModelConfig};
use qanogan::qsim::Readout;
use qanogan::rng::{stream, Stream};

const SMALL: &str = r#"
seed = 5
[data.synth]
n_normal = 300
n_anomalous = 40
dim = 4
[model.generator]
latent_dim = 4
data_dim = 4
[model.critic]
hidden = [3, 3]
[train]
generator_iters = 8
batch_size = 16
n_critic = 2
[anomaly]
latent_iters = 15
"#;

fn qanogan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qanogan"))
        .args(args)
        .env_remove("QANOGAN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qanogan(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = qanogan(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn loss_columns(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    // Everything except wall_time.
    r.records().map(|rec| rec.unwrap().iter().take(4).map(str::to_string).collect()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["train", "-c", &cfg, "--out", path_str(&a)]);
    ok(&["train", "-c", &cfg, "--out", path_str(&b)]);
    let history = loss_columns(&a.join("loss_history.csv"));
    assert_eq!(history.len(), 8);
    assert_eq!(history, loss_columns(&b.join("loss_history.csv")));
    assert_eq!(load_model(&a.join("model")).unwrap(), load_model(&b.join("model")).unwrap());
}

#[test]
fn zero_iterations_checkpoint_is_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("r");
    ok(&["train", "-c", &cfg, "--out", path_str(&out), "--set", "train.generator_iters=0"]);
    let model = load_model(&out.join("model")).unwrap();
    let stored: toml::Table = fs::read_to_string(out.join("config.toml")).unwrap().parse().unwrap();
    let model_cfg: ModelConfig = stored["model"].clone().try_into().unwrap();
    assert_eq!(model, GanModel::new(&model_cfg, 5).unwrap());
    assert_eq!(model.generator_steps, 0);
    assert_eq!(fs::read_to_string(out.join("loss_history.csv")).unwrap().lines().count(), 0);
}

#[test]
fn quantum_smoke_run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[data.synth]\nn_normal = 200\nn_anomalous = 20\n\
         [model.generator]\nvariant = \"quantum\"\nlatent_dim = 6\ndata_dim = 6\ncircuit = \"C1\"\ndepth = 1\n\
         [train]\ngenerator_iters = 5\nbatch_size = 8\n",
    );
    let out = tmp.path().join("q");
    ok(&["train", "-c", &cfg, "--out", path_str(&out), "--checkpoint-every", "2"]);
    for f in ["config.toml", "preprocessing.toml", "loss_history.csv", "model/model.json", "model/critic.qnn"]
    {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    for s in ["train", "calibration", "test"] {
        let split = load_csv(&out.join("splits").join(format!("{s}.csv"))).unwrap();
        assert_eq!(split.dim(), 6);
    }
    assert_eq!(load_model(&out.join("model")).unwrap().generator_steps, 5);
}

#[test]
fn config_errors_list_every_bad_key() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), &format!("mystery = 1\n{SMALL}"));
    let err = fails(&["train", "-c", &bad, "--set", "train.learning_rat=0.1", "--set", "anomaly.alpah=2"]);
    for key in ["mystery", "train.learning_rat", "anomaly.alpah"] {
        assert!(err.contains(key), "{err}");
    }
    let cfg = write_config(tmp.path(), SMALL);
    let err =
        fails(&["train", "-c", &cfg, "--set", "model.generator.data_dim=3", "--out", path_str(tmp.path())]);
    assert!(err.contains("model.generator.data_dim"), "{err}");
    let err = fails(&["train", "-c", &cfg, "--set", "train.batch_size=0", "--set", "anomaly.alpha=0"]);
    assert!(err.contains("train:") && err.contains("anomaly:"), "{err}");
}

#[test]
fn synth_writes_the_configured_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    let args = |p: &Path| {
        vec![
            "synth".to_string(),
            "--set".into(),
            "data.synth.n_normal=37".into(),
            "--set".into(),
            "data.synth.n_anomalous=0".into(),
            "--set".into(),
            "data.synth.seed=9".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    for p in [&a, &b] {
        let argv = args(p);
        ok(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let data = load_csv(&a).unwrap();
    assert_eq!(data.len(), 37);
    assert_eq!(data.n_anomalous(), 0);
    let header = fs::read_to_string(&a).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "Time,V1,V2,V3,V4,V5,V6,Class");
}

#[test]
fn calibrate_evaluate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("runs");
    let report = ok(&["train", "-c", &cfg, "--out", path_str(&out), "--repeat", "2", "--evaluate"]);
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "run_id,seed,iterations,precision,recall,f1,ci_low,ci_high");
    assert!(lines[1].starts_with("run-00,5,8,") && lines[2].starts_with("run-01,6,8,"));
    assert!(lines[3].starts_with("mean,"));
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap(), report);

    // Fixed inputs give an identical report.
    let run0 = out.join("run-00");
    let again = ok(&["evaluate", path_str(&run0), path_str(&out.join("run-01"))]);
    assert_eq!(again, report);
    let t1 = fs::read_to_string(run0.join("threshold.toml")).unwrap();
    ok(&["calibrate", path_str(&run0)]);
    assert_eq!(fs::read_to_string(run0.join("threshold.toml")).unwrap(), t1);

    // Flagging everything on a quarter-anomalous test split gives F1 = 0.4.
    let all = ok(&["evaluate", path_str(&run0), "--threshold", "-inf"]);
    let f1: f64 = all.lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((f1 - 0.4).abs() < 1e-12, "{all}");

    // The training split has a single class.
    let err = fails(&["calibrate", path_str(&run0), "--split", "train"]);
    assert!(err.contains("both"), "{err}");
}

#[test]
fn evaluate_rejects_empty_test_split() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("r");
    ok(&["train", "-c", &cfg, "--out", path_str(&out), "--set", "train.generator_iters=0"]);
    fs::write(out.join("splits/test.csv"), "Time,V1,V2,V3,V4,Class\n").unwrap();
    let err = fails(&["evaluate", path_str(&out), "--threshold", "0"]);
    assert!(err.contains("empty"), "{err}");
    let err = fails(&["evaluate", path_str(&tmp.path().join("missing")), "--threshold", "0"]);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn score_prints_losses_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("r");
    ok(&["train", "-c", &cfg, "--out", path_str(&out), "--set", "model.generator.variant=\"classical\""]);
    let run = path_str(&out);

    let row = "0.3,-1.5,0.2,0.9";
    let first = ok(&["score", run, "--row", row, "--threshold", "inf"]);
    assert_eq!(first, ok(&["score", run, "--row", row, "--threshold", "inf"]));
    for key in ["residual_loss=", "discrimination_loss=", "score=", "verdict=normal"] {
        assert!(first.contains(key), "{first}");
    }
    let err = fails(&["score", run, "--row", "0.1,0.2"]);
    assert!(err.contains("expected 4"), "{err}");
    let err = fails(&["score", run, "--row", "0.1,0.2", "--normalized"]);
    assert!(err.contains("expects 4"), "{err}");

    // A row the generator produces exactly is reconstructed almost perfectly.
    let model = load_model(&out.join("model")).unwrap();
    let mut rng = stream(1, Stream::Latent);
    let x = model.generator.generate(&[0.2, 0.7, 0.4, 0.5], Readout::Analytic, &mut rng).unwrap();
    let x_row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    let fit = ok(&[
        "score",
        run,
        "--normalized",
        "--row",
        &x_row.join(","),
        "--set",
        "anomaly.adam.learning_rate=0.02",
        "--set",
        "anomaly.latent_iters=3000",
        "--set",
        "anomaly.restarts=3",
    ]);
    let score: f64 = fit.lines().find_map(|l| l.strip_prefix("score=")).unwrap().parse().unwrap();
    assert!(score < 1e-2, "{fit}");
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let env_dir = tmp.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_qanogan"))
        .args(["train", "-c", &cfg, "--set", "train.generator_iters=0"])
        .env("QANOGAN_OUT_DIR", &env_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_dir.join("model/model.json").is_file());
}
