//! Acceptance report: one PASS/FAIL line per criterion.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use upm::ensemble::{prepare, Member, PipelineConfig};
use upm::evaluate::{accuracy, cross_validate, kappa, weighted_f1, ConfusionMatrix, EvalConfig, EvalReport, Target};
use upm::learners::{argmax, kstar_predict, train_cart_matrix, train_kstar_matrix, FeatureKind, FeatureMatrix, TrainConfig};
use upm::report::{run_suite, stats_from_csv, RunConfig, SuiteReport};
use upm::rules::extract_rules;
use upm::stats::{one_sample_t, student_t_two_tailed_p, summarize};
use upm::synth::{generate_cohort, CohortSpec, SuiteSpec, INFORMATIVE};
use upm::{Dataset, Execution, Label};

const SEED: u64 = 42;

const ACCURACY: [f64; 17] = [
    90.6, 97.8, 99.0, 84.0, 95.0, 85.0, 88.0, 97.8, 82.33, 96.78, 92.0, 82.8, 85.0, 86.5, 83.82, 89.0, 98.0,
];
const F1: [f64; 17] = [
    90.5, 97.8, 99.002, 85.38, 94.88, 86.08, 88.54, 97.83, 82.15, 96.8, 92.39, 84.13, 85.71, 87.1, 83.6, 89.32,
    98.03,
];
const KAPPA: [f64; 17] = [
    0.812, 0.956, 0.98, 0.68, 0.9, 0.7, 0.76, 0.956, 0.647, 0.936, 0.84, 0.656, 0.7, 0.73, 0.676, 0.78, 0.962,
];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn kappa_ttest() -> Outcome {
    let t = one_sample_t(&KAPPA, 0.8).unwrap();
    let s = summarize(&KAPPA).unwrap();
    let checks = [
        ("mean", s.mean, 0.804176),
        ("sd", s.sd, 0.1219837),
        ("se", s.se, 0.0295854),
        ("t", t.t, 0.141),
        ("p", t.p_two_tailed, 0.890),
        ("diff", t.mean_difference, 0.0041765),
        ("lower", t.ci95_lower, -0.058542),
        ("upper", t.ci95_upper, 0.066895),
    ];
    let file = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/reference_state_results.csv");
    let from_file = stats_from_csv(&file, "kappa", 0.8).unwrap();
    let mut pass = t.df == 16 && from_file.test == t && from_file.summary == s;
    let mut detail = format!("df={} (file and inline agree: {})", t.df, from_file.test == t);
    for (name, got, want) in checks {
        pass &= within(got, want, 1e-3);
        let _ = write!(detail, " {name}={got:.7}");
    }
    Outcome::new(pass, detail)
}

fn f1_ttest() -> Outcome {
    let t = one_sample_t(&F1, 90.0).unwrap();
    let pass = within(t.t, 0.372, 0.02)
        && within(t.p_two_tailed, 0.715, 0.01)
        && within(t.ci95_lower, -2.49, 0.05)
        && within(t.ci95_upper, 3.54, 0.05)
        && t.df == 16;
    Outcome::new(
        pass,
        format!(
            "t={:.4} p={:.4} ci=({:.3}, {:.3})",
            t.t, t.p_two_tailed, t.ci95_lower, t.ci95_upper
        ),
    )
}

fn accuracy_column() -> Outcome {
    let t = one_sample_t(&ACCURACY, 90.0).unwrap();
    let mean = summarize(&ACCURACY).unwrap().mean;
    let pass = within(mean, 90.20, 1e-2) && t.p_two_tailed > 0.5;
    Outcome::new(
        pass,
        format!(
            "recomputed mean={mean:.4} t={:.3} p={:.3}",
            t.t, t.p_two_tailed
        ),
    )
}

fn brute_force(counts: [[u64; 2]; 2]) -> (f64, f64, f64) {
    let mut pairs = Vec::new();
    for (a, row) in counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            pairs.extend(std::iter::repeat_n((a, p), c as usize));
        }
    }
    let n = pairs.len() as f64;
    let hits = pairs.iter().filter(|(a, p)| a == p).count() as f64;
    let mut f1 = 0.0;
    let mut pe = 0.0;
    for c in 0..2 {
        let tp = pairs.iter().filter(|&&(a, p)| a == c && p == c).count() as f64;
        let actual = pairs.iter().filter(|&&(a, _)| a == c).count() as f64;
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
        if actual + predicted > 0.0 {
            f1 += actual * 2.0 * tp / (actual + predicted);
        }
        pe += actual * predicted / (n * n);
    }
    let po = hits / n;
    let k = if (1.0 - pe).abs() < 1e-15 {
        if po == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    };
    (100.0 * po, 100.0 * f1 / n, k)
}

fn t_density_integral(nu: u32, t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut r, mut k) = if nu % 2 == 1 { (1.0 / pi.sqrt(), 1) } else { (pi.sqrt() / 2.0, 2) };
    while k < nu {
        r *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    let v = nu as f64;
    let c = r / (v * pi).sqrt();
    let f = |x: f64| c * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0);
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
    }
    fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        adapt(f, a, m, l, tol / 2.0, depth - 1) + adapt(f, m, b, r, tol / 2.0, depth - 1)
    }
    (0..40)
        .map(|i| {
            let (a, b) = (t * i as f64 / 40.0, t * (i + 1) as f64 / 40.0);
            adapt(&f, a, b, simpson(&f, a, b), 1e-14, 40)
        })
        .sum()
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_metric = 0.0f64;
    for _ in 0..1000 {
        let counts = loop {
            let c: [[u64; 2]; 2] = [
                [rand::Rng::random_range(&mut rng, 0..60), rand::Rng::random_range(&mut rng, 0..60)],
                [rand::Rng::random_range(&mut rng, 0..60), rand::Rng::random_range(&mut rng, 0..60)],
            ];
            if c.iter().flatten().sum::<u64>() > 0 {
                break c;
            }
        };
        let cm = ConfusionMatrix::new(counts);
        let (a, f, k) = brute_force(counts);
        worst_metric = worst_metric
            .max((accuracy(&cm).unwrap() - a).abs())
            .max((weighted_f1(&cm).unwrap() - f).abs())
            .max((kappa(&cm).unwrap() - k).abs());
    }
    let mut worst_p = 0.0f64;
    for nu in 1..=40u32 {
        for i in 0..=40 {
            let t = 0.5 * i as f64;
            let want = (1.0 - 2.0 * t_density_integral(nu, t)).max(0.0);
            worst_p = worst_p.max((student_t_two_tailed_p(t, nu as f64) - want).abs());
        }
    }
    Outcome::new(
        worst_metric <= 1e-12 && worst_p <= 1e-8,
        format!("max metric error={worst_metric:.2e} max p error={worst_p:.2e}"),
    )
}

fn suite_config(out: &std::path::Path, exec: Execution) -> RunConfig {
    let mut cfg = RunConfig {
        synthetic: true,
        out: out.to_path_buf(),
        execution: exec,
        ..RunConfig::default()
    };
    cfg.set("seed", &SEED.to_string()).unwrap();
    cfg
}

fn bayes_gap(suite: &SuiteReport) -> Outcome {
    let mut pass = true;
    let mut lines = String::new();
    for s in &suite.states {
        let bayes = s.truth.as_ref().unwrap().bayes_accuracy_pct;
        let gap = s.report.accuracy_pct - bayes;
        let ok = gap.abs() <= 5.0;
        pass &= ok;
        let _ = write!(
            lines,
            "\n      {:<16} n={:<5} acc={:6.2} bayes={:6.2} gap={:+6.2} {}",
            s.report.dataset,
            s.report.n,
            s.report.accuracy_pct,
            bayes,
            gap,
            if ok { "ok" } else { "OUT" }
        );
    }
    let mean = suite.summary.mean_accuracy_pct;
    pass &= (85.0..=95.0).contains(&mean);
    Outcome::new(pass, format!("suite mean accuracy={mean:.2}{lines}"))
}

fn rule_fidelity(suite: &SuiteReport, datasets: &[Dataset]) -> Outcome {
    let eval = suite_eval();
    let mut trees = 0;
    let mut failures = Vec::new();
    for (s, ds) in suite.states.iter().zip(datasets) {
        let mut jobs: Vec<(Dataset, PipelineConfig)> = vec![(ds.clone(), eval.pipeline)];
        for f in &s.report.fold_reports {
            let (train, _) = s.report.fold_plan.split(f.fold);
            let pc = PipelineConfig {
                seed: f.seed,
                ..eval.pipeline
            };
            jobs.push((ds.subset(&train).unwrap(), pc));
        }
        for (data, pc) in jobs {
            let prepared = prepare(&data, &pc).unwrap();
            let x = FeatureMatrix::from_dataset(&prepared.data).unwrap();
            let tree = train_cart_matrix(&x, &TrainConfig { seed: pc.seed, ..pc.train }).unwrap();
            let rules = extract_rules(&tree, &prepared.data).unwrap();
            trees += 1;
            let coverage: usize = rules.rules.iter().map(|r| r.coverage).sum();
            let ok = coverage == x.n_rows()
                && (0..x.n_rows()).all(|i| {
                    let m = rules.matching(x.row(i));
                    m.len() == 1 && rules.rules[m[0]].class == argmax(&tree.predict(x.row(i)).unwrap())
                });
            if !ok {
                failures.push(format!("{} seed {}", ds.name(), pc.seed));
            }
        }
    }
    let full_models_ok = suite.states.iter().zip(datasets).all(|(s, ds)| {
        s.rules.len() == 1 && s.rules[0].rules.iter().map(|r| r.coverage).sum::<usize>() == ds.n_rows()
    });
    Outcome::new(
        failures.is_empty() && full_models_ok,
        format!("{trees} CART trees checked, {} failures {:?}", failures.len(), failures),
    )
}

fn suite_eval() -> EvalConfig {
    let mut cfg = RunConfig::default();
    cfg.set("seed", &SEED.to_string()).unwrap();
    cfg.eval_config()
}

fn signal_recovery(datasets: &[Dataset]) -> Outcome {
    let eval = suite_eval();
    let largest = datasets.iter().max_by_key(|d| d.n_rows()).unwrap();
    let kept = |ds: &Dataset| -> (usize, Vec<String>) {
        let p = prepare(ds, &eval.pipeline).unwrap();
        let names: Vec<String> = p.data.attributes().iter().map(|a| a.name.clone()).collect();
        let missing = INFORMATIVE
            .iter()
            .filter(|n| !names.iter().any(|m| m == *n))
            .map(|n| n.to_string())
            .collect();
        (names.len(), missing)
    };
    let (n_kept, missing) = kept(largest);
    let pass = missing.is_empty() && n_kept <= 25 && largest.n_attributes() == 150;
    let mut other = String::new();
    for ds in datasets {
        let (k, m) = kept(ds);
        let _ = write!(other, " {}:{}/6({k})", upm::synth::slug(ds.name()), 6 - m.len());
    }
    Outcome::new(
        pass,
        format!(
            "{} (n={}): kept {n_kept} of {}, missing informative {:?}; per state recovered/6(kept):{other}",
            largest.name(),
            largest.n_rows(),
            largest.n_attributes(),
            missing
        ),
    )
}

fn learner_cv(ds: &Dataset, m: Member) -> EvalReport {
    let mut cfg = suite_eval();
    cfg.target = Target::Learner(m);
    cross_validate(ds, &cfg).unwrap()
}

fn kstar_limits() -> (bool, String) {
    let rows = vec![
        vec![0.0, 0.1],
        vec![0.2, 0.9],
        vec![0.35, 0.4],
        vec![0.5, 0.5],
        vec![0.6, 0.2],
        vec![0.7, 0.8],
        vec![0.85, 0.3],
        vec![1.0, 0.6],
    ];
    let labels: Vec<Label> = [0, 0, 1, 0, 1, 1, 0, 1].iter().map(|&l| Label::from_index(l)).collect();
    let m = FeatureMatrix::new(
        vec!["x0".into(), "x1".into()],
        vec![FeatureKind::Numeric; 2],
        rows.clone(),
        labels.clone(),
    )
    .unwrap();
    let model = |blend: f64| {
        let mut cfg = TrainConfig::with_seed(SEED);
        cfg.kstar.blend = blend;
        train_kstar_matrix(&m, &cfg).unwrap()
    };
    let nn = model(1e-12);
    let mut worst_nn = 0.0f64;
    for (r, l) in rows.iter().zip(&labels) {
        for eps in [0.0, 0.004, -0.004] {
            let x: Vec<f64> = r.iter().map(|v| v + eps).collect();
            let d = kstar_predict(&nn, &x).unwrap();
            worst_nn = worst_nn.max((1.0 - d[l.index()]).abs());
        }
    }
    let full = model(100.0);
    let mut worst_prior = 0.0f64;
    for x in [[0.3, 0.3], [0.0, 1.0], [2.0, -1.0], [0.5, 0.5]] {
        let d = kstar_predict(&full, &x).unwrap();
        worst_prior = worst_prior.max((d[0] - 0.5).abs()).max((d[1] - 0.5).abs());
    }
    (
        worst_nn <= 1e-9 && worst_prior <= 1e-9,
        format!("kstar 1-NN error={worst_nn:.1e} prior error={worst_prior:.1e}"),
    )
}

fn learner_sanity() -> Outcome {
    let (sep, _) = generate_cohort(&CohortSpec::separable("Separable", 400, SEED)).unwrap();
    let (base, _) = generate_cohort(&CohortSpec {
        positive_rate: 0.5,
        ..CohortSpec::new("Permuted", 1000, SEED)
    })
    .unwrap();
    let mut labels = base.labels().to_vec();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(SEED));
    let permuted = base.with_labels(labels).unwrap();
    let majority = {
        let c = permuted.class_distribution();
        100.0 * c.get(c.majority()) as f64 / c.total() as f64
    };
    let mut pass = true;
    let mut detail = String::new();
    for m in Member::ALL {
        let a = learner_cv(&sep, m).accuracy_pct;
        let b = learner_cv(&permuted, m).accuracy_pct;
        pass &= a >= 95.0 && (b - majority).abs() <= 5.0;
        let _ = write!(detail, "{}: separable={a:.2} permuted={b:.2}; ", m.as_str());
    }
    let (ok, k) = kstar_limits();
    pass &= ok;
    let _ = write!(detail, "majority rate={majority:.2}; {k}");
    Outcome::new(pass, detail)
}

fn determinism(first: &SuiteReport, dir: &std::path::Path) -> Outcome {
    let read = |d: &std::path::Path, f: &str| std::fs::read(d.join(f)).unwrap();
    let second = dir.join("parallel_2");
    let sequential = dir.join("sequential");
    let again = run_suite(&suite_config(&second, Execution::Parallel)).unwrap();
    run_suite(&suite_config(&sequential, Execution::Sequential)).unwrap();
    let base = dir.join("parallel_1");
    let mut pass = first.results_csv() == again.results_csv();
    for f in ["results.csv", "stats.txt"] {
        pass &= read(&base, f) == read(&second, f);
        pass &= read(&base, f) == read(&sequential, f);
    }
    Outcome::new(
        pass,
        format!(
            "results.csv and stats.txt compared across 2 parallel runs and 1 sequential run (parallel feature {})",
            if cfg!(feature = "parallel") { "on" } else { "off" }
        ),
    )
}

fn cv_invariants(suite: &SuiteReport, datasets: &[Dataset]) -> Outcome {
    let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
    let mut bad = Vec::new();
    for (s, ds) in suite.states.iter().zip(datasets) {
        let r = &s.report;
        let plan = &r.fold_plan;
        let mut tested = vec![0usize; ds.n_rows()];
        for f in 0..plan.k {
            for i in plan.split(f).1 {
                tested[i] += 1;
            }
        }
        let pooled = r
            .fold_reports
            .iter()
            .fold(ConfusionMatrix::default(), |acc, f| acc.add(&f.confusion));
        let ok = spread(&plan.fold_sizes()) <= 1
            && Label::ALL
                .iter()
                .all(|&c| spread(&plan.class_counts(ds.labels(), c)) <= 1)
            && tested.iter().all(|&t| t == 1)
            && r.predictions.len() == ds.n_rows()
            && pooled == r.confusion
            && pooled.total() as usize == ds.n_rows();
        if !ok {
            bad.push(r.dataset.clone());
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!("{} cohorts checked, violations {:?}", suite.states.len(), bad),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} [{id:>2}] {name} ({secs:.1}s): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };

    run(1, "kappa one-sample t-test", &mut kappa_ttest);
    run(2, "F1 one-sample t-test", &mut f1_ttest);
    run(3, "accuracy column recomputed mean", &mut accuracy_column);
    run(4, "metric and t-distribution oracles", &mut oracles);

    let t = Instant::now();
    let suite = run_suite(&suite_config(&dir.path().join("parallel_1"), Execution::Parallel)).unwrap();
    let suite_secs = t.elapsed().as_secs_f64();
    let spec = SuiteSpec {
        master_seed: SEED,
        ..SuiteSpec::default()
    };
    let datasets: Vec<Dataset> = upm::synth::generate_suite(&spec, Execution::default())
        .unwrap()
        .into_iter()
        .map(|(d, _)| d)
        .collect();

    run(5, "synthetic suite within 5 points of Bayes accuracy", &mut || {
        let mut o = bayes_gap(&suite);
        o.detail = format!("suite run {suite_secs:.1}s; {}", o.detail);
        o.pass &= suite_secs < 600.0;
        o
    });
    run(6, "rule fidelity on every suite CART", &mut || rule_fidelity(&suite, &datasets));
    run(7, "planted signal recovered by preprocessing", &mut || signal_recovery(&datasets));
    run(8, "learner sanity", &mut learner_sanity);
    run(9, "suite determinism", &mut || determinism(&suite, dir.path()));
    run(10, "cross-validation invariants", &mut || cv_invariants(&suite, &datasets));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
