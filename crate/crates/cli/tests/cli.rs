use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn maxnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxnorm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn simulate(dir: &Path) {
    let o = maxnorm(&[
        "simulate", "--d1", "15", "--d2", "12", "--rank", "2", "--n", "150", "--sigma", "0.1",
        "--seed", "3", "--truth-seed", "4", "--truth", &p(dir, "truth.txt"), "--obs", &p(dir, "obs.txt"),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(value(&stdout(&o), "observations"), "150");
}

#[test]
fn simulate_fit_and_rank_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d);

    let radius = 2f64.sqrt().to_string();
    let o = maxnorm(&[
        "fit", "--obs", &p(d, "obs.txt"), "--alpha", "1", "--radius", &radius, "--k", "3",
        "--max-iters", "500", "--out", &p(d, "fit.txt"), "--truth", &p(d, "truth.txt"),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert_eq!(value(&text, "k"), "3");
    assert_eq!(value(&text, "feasible_rows"), "true");
    let initial: f64 = value(&text, "initial_objective").parse().unwrap();
    let last: f64 = value(&text, "final_objective").parse().unwrap();
    assert!(last < initial);
    let mse: f64 = value(&text, "per_entry_mse").parse().unwrap();
    assert!(mse.is_finite() && mse >= 0.0);
    let fitted = fs::read_to_string(d.join("fit.txt")).unwrap();
    assert!(fitted.starts_with("15,12\n"));

    let o = maxnorm(&[
        "rank-estimate", "--obs", &p(d, "obs.txt"), "--r-max", "4", "--max-iters", "300",
        "--out", &p(d, "rank.txt"),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let r: usize = value(&text, "r_star").parse().unwrap();
    assert!((2..=4).contains(&r));
    let report = fs::read_to_string(d.join("rank.txt")).unwrap();
    assert!(report.starts_with("2,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(maxnorm(&["--help"]).status.code(), Some(0));
    assert_eq!(maxnorm(&["fit", "--bogus"]).status.code(), Some(1));
    let out = p(d, "fit.txt");
    let missing = maxnorm(&["fit", "--obs", &p(d, "missing.txt"), "--alpha", "1", "--radius", "1", "--out", &out]);
    assert_eq!(missing.status.code(), Some(1));
    // Radius below alpha is a validation error.
    simulate(d);
    let o = maxnorm(&["fit", "--obs", &p(d, "obs.txt"), "--alpha", "1", "--radius", "0.5", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    // A huge fixed step with no backtracking overflows.
    let o = maxnorm(&[
        "fit", "--obs", &p(d, "obs.txt"), "--alpha", "1", "--radius", "1.5", "--tau", "1e200",
        "--max-halvings", "0", "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}

#[test]
fn theory_subcommands() {
    let o = maxnorm(&["theory", "rates", "--alpha", "1", "--sigma", "1", "--radius", "1.7320508075688772", "--d1", "50", "--d2", "50", "--n", "2000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let upper: f64 = value(&text, "upper_rate").parse().unwrap();
    assert!((upper - 0.3873).abs() < 1e-4);

    let o = maxnorm(&["theory", "rademacher", "--d1", "4", "--d2", "4", "--n", "8", "--draws", "200"]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "within_bound"), "true");

    let dir = tempfile::tempdir().unwrap();
    let o = maxnorm(&[
        "theory", "packing", "--d1", "16", "--d2", "16", "--r", "4", "--count-cap", "12", "--out-dir",
        &p(dir.path(), "pack"),
    ]);
    assert!(o.status.success());
    assert_eq!(value(&stdout(&o), "count"), "12");
    assert_eq!(fs::read_dir(dir.path().join("pack")).unwrap().count(), 12);
    assert!(dir.path().join("pack/packing_00.txt").exists());

    let o = maxnorm(&["theory", "packing", "--d1", "8", "--d2", "8", "--r", "2", "--gamma", "0.9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn experiment_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("exp.toml");
    fs::write(
        &cfg,
        "seed = 2\nn_grid = [60, 120, 240]\nreplicates = 2\ntruth.d1 = 10\ntruth.d2 = 10\ntruth.rank = 2\n\
         noise.kind = \"gaussian\"\nnoise.sigma = 0.3\nsolver.max_iters = 200\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = maxnorm(&["experiment", "--config", cfg, "--output", &p(d, "a.csv")]);
    let b = maxnorm(&["experiment", "--config", cfg, "--output", &p(d, "b.csv")]);
    assert!(a.status.success() && b.status.success(), "{a:?}");
    assert_eq!(value(&stdout(&a), "trials"), "6");
    assert!(value(&stdout(&a), "slope").parse::<f64>().is_ok());
    let csv = fs::read(d.join("a.csv")).unwrap();
    assert_eq!(csv, fs::read(d.join("b.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("n,replicate,seed,per_entry_mse,"));

    let piped = maxnorm(&["experiment", "--config", cfg]);
    assert_eq!(String::from_utf8(piped.stdout).unwrap(), text);
    assert!(String::from_utf8(piped.stderr).unwrap().starts_with("slope="));
}
