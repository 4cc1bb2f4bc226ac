//! Prints cross-validated accuracy against the generator's Bayes accuracy
//! for every synthetic state.
//!
//! `cargo run --release --example calibrate -- [signal] [seed] [learner|ensemble] [weights]`

use std::time::Instant;

use upm::ensemble::Member;
use upm::evaluate::{cross_validate, EvalConfig, Target};
use upm::synth::{generate_suite, SuiteSpec};
use upm::Execution;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let signal: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(upm::synth::DEFAULT_SIGNAL);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(42);
    let target = match args.get(3).filter(|s| s.as_str() != "ensemble") {
        Some(m) => Target::Learner(m.parse::<Member>().expect("learner name")),
        None => Target::Ensemble,
    };
    let mut spec = SuiteSpec {
        master_seed: seed,
        signal_strength: signal,
        ..SuiteSpec::default()
    };
    if let Some(w) = args.get(4) {
        let v: Vec<f64> = w.split(',').map(|x| x.parse().expect("weight")).collect();
        spec.weights.copy_from_slice(&v);
    }
    if let Ok(m) = std::env::var("MISS") {
        spec.missing_rate = m.parse().expect("missing rate");
    }
    let suite = generate_suite(&spec, Execution::default()).expect("suite");
    let mut cfg = EvalConfig::default();
    cfg.pipeline.seed = seed;
    cfg.target = target;
    let (mut sum_acc, mut sum_bayes) = (0.0, 0.0);
    let start = Instant::now();
    for (ds, truth) in &suite {
        let t = Instant::now();
        let r = cross_validate(ds, &cfg).expect("cv");
        let gap = r.accuracy_pct - truth.bayes_accuracy_pct;
        println!(
            "{:16} n={:5} acc={:6.2} bayes={:6.2} realized={:6.2} gap={:+6.2} kappa={:.3} attrs={:?} {:.1}s",
            ds.name(),
            ds.n_rows(),
            r.accuracy_pct,
            truth.bayes_accuracy_pct,
            truth.realized_bayes_accuracy_pct,
            gap,
            r.kappa,
            r.fold_reports.iter().map(|f| f.selected.len()).collect::<Vec<_>>(),
            t.elapsed().as_secs_f64()
        );
        if std::env::var("SHOWSEL").is_ok() {
            for f in &r.fold_reports {
                let inf: Vec<&str> = upm::synth::INFORMATIVE.iter().copied().filter(|n| !f.selected.iter().any(|s| s == n)).collect();
                println!("   fold {} missing {:?} acc {:.1}", f.fold, inf, 100.0 * f.confusion.trace() as f64 / f.confusion.total() as f64);
            }
        }
        sum_acc += r.accuracy_pct;
        sum_bayes += truth.bayes_accuracy_pct;
    }
    let k = suite.len() as f64;
    println!(
        "mean acc {:.2} mean bayes {:.2} total {:.1}s",
        sum_acc / k,
        sum_bayes / k,
        start.elapsed().as_secs_f64()
    );
}
