//! End-to-end runs of the `upm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn upm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upm"))
        .args(args)
        .output()
        .expect("spawn upm")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes two small cohorts and returns their CSV paths.
fn cohorts(dir: &Path) -> (String, String) {
    for (state, n) in [("Alpha", "90"), ("Beta", "70")] {
        let o = upm(&["gen", "--state", state, "--instances", n, "--seed", "3", "--out", p(dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    (
        p(&dir.join("alpha.csv")).to_string(),
        p(&dir.join("beta.csv")).to_string(),
    )
}

#[test]
fn help_and_version() {
    let o = upm(&["--help"]);
    assert_eq!(code(&o), 0);
    let h = stdout(&o);
    for word in ["gen", "prep", "train", "eval", "rules", "stats", "suite", "Exit codes", "cart.min_leaf"] {
        assert!(h.contains(word), "help lacks {word}");
    }
    let o = upm(&["version"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("upm "));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&upm(&["--bogus"])), 2);
    assert_eq!(code(&upm(&[])), 2);
    assert_eq!(code(&upm(&["eval", "x.csv", "--rule", "median"])), 2);
    assert_eq!(code(&upm(&["eval", "x.csv", "--set", "nonsense=1"])), 2);
    assert_eq!(code(&upm(&["eval", "x.csv", "--folds", "1"])), 2);
    assert_eq!(code(&upm(&["suite"])), 2);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&upm(&["eval", p(&dir.path().join("missing.csv"))])), 3);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,placement_status\n1,Maybe\n2,Placed\n").unwrap();
    assert_eq!(code(&upm(&["eval", p(&bad)])), 3);
    let results = dir.path().join("results.csv");
    std::fs::write(&results, "state,accuracy_pct\nA,x\nB,80\n").unwrap();
    assert_eq!(code(&upm(&["stats", p(&results), "--column", "accuracy_pct"])), 3);
}

#[test]
fn pipeline_commands_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (alpha, _) = cohorts(dir.path());
    let work = dir.path().join("work");

    let o = upm(&["prep", &alpha, "--seed", "5", "--out", p(&work)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("attributes kept"));
    for f in ["prepared.csv", "transform.json", "clusters.json"] {
        assert!(work.join(f).is_file(), "{f}");
    }

    let cheap = ["--seed", "5", "--set", "forest.n_trees=8"];
    let mut args = vec!["train", &alpha, "--out", p(&work)];
    args.extend(cheap);
    assert_eq!(code(&upm(&args)), 0);
    let model = work.join("model.json");
    assert!(model.is_file());

    let from_model = upm(&["rules", &alpha, "--model", p(&model), "--style", "csv"]);
    assert_eq!(code(&from_model), 0);
    assert!(stdout(&from_model).lines().count() >= 2);
    let mut args = vec!["rules", &alpha, "--style", "csv"];
    args.extend(cheap);
    let retrained = upm(&args);
    assert_eq!(stdout(&retrained), stdout(&from_model));

    let mut args = vec!["eval", &alpha, "--target", "cart", "--folds", "5", "--out", p(&work)];
    args.extend(cheap);
    let first = upm(&args);
    assert_eq!(code(&first), 0);
    let report = std::fs::read_to_string(work.join("report.csv")).unwrap();
    assert!(report.starts_with("state,accuracy_pct,f1_weighted_pct,kappa\n"));
    let again = upm(&args);
    assert_eq!(stdout(&first), stdout(&again));
    assert_eq!(report, std::fs::read_to_string(work.join("report.csv")).unwrap());
}

#[test]
fn suite_over_files_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (alpha, beta) = cohorts(dir.path());
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "suite", &alpha, &beta, "--seed", "9", "--folds", "5", "--set", "forest.n_trees=8", "--out", p(out),
        ];
        args.extend(extra);
        let o = upm(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b, s) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("s"));
    run(&a, &[]);
    run(&b, &[]);
    run(&s, &["--sequential"]);
    for f in ["results.csv", "stats.txt", "stats.csv"] {
        let want = std::fs::read(a.join(f)).unwrap();
        assert_eq!(want, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(want, std::fs::read(s.join(f)).unwrap(), "{f}");
    }
    for state in ["alpha", "beta"] {
        for f in ["report.json", "report.csv", "rules.md", "rules.csv"] {
            assert!(a.join(state).join(f).is_file(), "{state}/{f}");
        }
    }
    assert!(a.join("run_meta.json").is_file());
    assert!(!a.join(".partial").exists());

    let stats = upm(&["stats", p(&a.join("results.csv")), "--column", "kappa", "--mu", "0.5"]);
    assert_eq!(code(&stats), 0);
    assert!(stdout(&stats).contains("One-Sample Test"));
}
