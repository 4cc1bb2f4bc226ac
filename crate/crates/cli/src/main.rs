//! `upm` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use upm::ensemble::{prepare, train_upm, EnsembleModel, MODEL_FORMAT};
use upm::evaluate::cross_validate;
use upm::report::{self, RunConfig, CONFIG_KEYS, STAT_COLUMNS};
use upm::rules::{format_rules, model_rules, RuleSource, RuleStyle};
use upm::stats::{format_report, report_csv_row, REPORT_CSV_HEADER};
use upm::synth::{generate_cohort, write_cohort, CohortSpec};
use upm::{load_csv, Dataset, Execution, Result, Schema, UpmError};

#[derive(Parser)]
#[command(
    name = "upm",
    version,
    about = "Placement prediction toolkit: preprocessing, four-learner ensemble, rules, cross-validation and t-tests",
    after_help = config_help()
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Master seed for the pipeline and the synthetic suite
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cross-validation folds
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Vote rule
    #[arg(long, global = true, value_name = "avg|majority")]
    rule: Option<String>,
    /// Fit preprocessing once on the whole dataset instead of per fold
    #[arg(long, global = true)]
    global_prep: bool,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Flat `key = value` config file; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set kstar.blend=30
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Label column of input CSVs
    #[arg(long, global = true, value_name = "NAME")]
    label_column: Option<String>,
    /// Run everything on the current thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic 17-state suite (or one cohort) as CSV plus ground truth
    Gen {
        /// Generate a single cohort with this state name
        #[arg(long, requires = "instances")]
        state: Option<String>,
        /// Rows of the single cohort
        #[arg(long)]
        instances: Option<usize>,
        /// Single cohort from the near-separable preset
        #[arg(long, requires = "state")]
        separable: bool,
    },
    /// Clean, cluster and select attributes; writes prepared.csv, transform.json, clusters.json
    Prep {
        input: PathBuf,
    },
    /// Train the ensemble on a dataset; writes model.json
    Train {
        input: PathBuf,
    },
    /// Stratified cross-validation of one dataset
    Eval {
        input: PathBuf,
        /// upm or a single learner: random_tree, kstar, cart, random_forest
        #[arg(long)]
        target: Option<String>,
        /// Print the full report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Print IF-THEN rules of a trained model
    Rules {
        input: PathBuf,
        /// Use a saved model instead of training one on INPUT
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long, default_value = "cart", value_name = "cart|random_tree|forest")]
        source: String,
        #[arg(long, default_value = "text", value_name = "text|markdown|csv")]
        style: String,
    },
    /// One-sample t-tests over a results CSV
    Stats {
        results: PathBuf,
        /// Column to test; all three metric columns when omitted
        #[arg(long)]
        column: Option<String>,
        /// Test value
        #[arg(long, requires = "column")]
        mu: Option<f64>,
        /// Machine-readable output
        #[arg(long)]
        csv: bool,
    },
    /// Evaluate every dataset and write the report tree
    Suite {
        /// Use the generated 17-state suite
        #[arg(long)]
        synthetic: bool,
        inputs: Vec<PathBuf>,
    },
    /// Print version information
    Version,
}

fn config_help() -> String {
    let mut s = String::from("Config keys (for --config files and --set):\n");
    for (k, doc) in CONFIG_KEYS {
        s.push_str(&format!("  {k:28} {doc}\n"));
    }
    s.push_str("\nExit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.");
    s
}

fn build_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| UpmError::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = g.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(f) = g.folds {
        cfg.set("folds", &f.to_string())?;
    }
    if let Some(r) = &g.rule {
        cfg.set("rule", r)?;
    }
    if g.global_prep {
        cfg.eval.global_prep = true;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(l) = &g.label_column {
        cfg.label_column = l.clone();
    }
    if g.sequential {
        cfg.execution = Execution::Sequential;
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| UpmError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| UpmError::io(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load(cfg: &RunConfig, path: &Path) -> Result<Dataset> {
    load_csv(path, &Schema::with_label(&cfg.label_column))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = build_config(&cli.global)?;
    let out_given = cli.global.out.is_some() || cfg.out != RunConfig::default().out;
    match cli.command {
        Command::Gen {
            state,
            instances,
            separable,
        } => {
            let cohorts = match (state, instances) {
                (Some(name), Some(n)) => {
                    let seed = cfg.synth.master_seed;
                    let spec = if separable {
                        CohortSpec::separable(name, n, seed)
                    } else {
                        CohortSpec {
                            weights: cfg.synth.weights,
                            signal_strength: cfg.synth.signal_strength,
                            positive_rate: cfg.synth.positive_rate,
                            missing_rate: cfg.synth.missing_rate,
                            n_attributes: cfg.synth.n_attributes,
                            ..CohortSpec::new(name, n, seed)
                        }
                    };
                    vec![generate_cohort(&spec)?]
                }
                _ => upm::synth::generate_suite(&cfg.synth, cfg.execution)?,
            };
            for (ds, truth) in &cohorts {
                write_cohort(&cfg.out, ds, truth)?;
                println!(
                    "{}: {} rows, Bayes accuracy {:.2}%, positive rate {:.3}",
                    ds.name(),
                    ds.n_rows(),
                    truth.bayes_accuracy_pct,
                    truth.realized_positive_rate
                );
            }
        }
        Command::Prep { input } => {
            cfg.validate_pipeline()?;
            let ds = load(&cfg, &input)?;
            let mut pc = cfg.eval.pipeline;
            pc.train.exec = cfg.execution;
            let p = prepare(&ds, &pc)?;
            let mut buf = Vec::new();
            p.data.write_csv(&mut buf, &cfg.label_column)?;
            write(&cfg.out.join("prepared.csv"), &String::from_utf8_lossy(&buf))?;
            write(&cfg.out.join("transform.json"), &p.transform.to_json()?)?;
            if let Some(c) = &p.clusters {
                write(&cfg.out.join("clusters.json"), &serde_json::to_string_pretty(c)?)?;
            }
            let names: Vec<&str> = p.data.attributes().iter().map(|a| a.name.as_str()).collect();
            println!(
                "{}: {} of {} attributes kept: {}",
                ds.name(),
                names.len(),
                ds.n_attributes(),
                names.join(", ")
            );
        }
        Command::Train { input } => {
            cfg.validate_pipeline()?;
            let ds = load(&cfg, &input)?;
            let mut pc = cfg.eval.pipeline;
            pc.train.exec = cfg.execution;
            let model = train_upm(&ds, &pc)?;
            write(&cfg.out.join("model.json"), &model.to_json()?)?;
            println!(
                "{}: trained {} on {} rows, {} attributes kept, rule {}",
                ds.name(),
                MODEL_FORMAT,
                ds.n_rows(),
                model.transform.n_kept(),
                model.rule
            );
        }
        Command::Eval {
            input,
            target,
            json,
        } => {
            if let Some(t) = target {
                cfg.set("target", &t)?;
            }
            cfg.validate_pipeline()?;
            let ds = load(&cfg, &input)?;
            let r = cross_validate(&ds, &cfg.eval_config())?;
            if json {
                println!("{}", r.to_json()?);
            } else {
                let c = &r.confusion.counts;
                println!(
                    "{} ({}, {} folds, rule {}, seed {}): n={} accuracy={:.3}% f1={:.3}% kappa={:.4}",
                    r.dataset, r.target, r.folds, r.rule, r.seed, r.n, r.accuracy_pct, r.f1_weighted_pct, r.kappa
                );
                println!("confusion [actual][predicted] Placed/Unplaced: [[{}, {}], [{}, {}]]", c[0][0], c[0][1], c[1][0], c[1][1]);
            }
            if out_given {
                write(&cfg.out.join("report.json"), &r.to_json()?)?;
                write(&cfg.out.join("report.csv"), &r.to_csv())?;
            }
        }
        Command::Rules {
            input,
            model,
            source,
            style,
        } => {
            let source: RuleSource = source.parse()?;
            let style: RuleStyle = style.parse()?;
            let ds = load(&cfg, &input)?;
            let model = match model {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| UpmError::io(&p, e))?;
                    EnsembleModel::from_json(&text)?
                }
                None => {
                    cfg.validate_pipeline()?;
                    train_upm(&ds, &cfg.eval.pipeline)?
                }
            };
            let sets = model_rules(&model, &ds, source)?;
            let doc: Vec<String> = sets.iter().map(|rs| format_rules(rs, style)).collect();
            print!("{}", doc.join("\n"));
        }
        Command::Stats {
            results,
            column,
            mu,
            csv,
        } => {
            let columns: Vec<(String, f64)> = match column {
                Some(c) => {
                    let default_mu = STAT_COLUMNS.iter().find(|s| s.0 == c).map(|s| s.2);
                    let mu = mu.or(default_mu).ok_or_else(|| {
                        UpmError::Config(format!("--mu is required for column {c:?}"))
                    })?;
                    vec![(c, mu)]
                }
                None => STAT_COLUMNS.iter().map(|s| (s.0.to_string(), s.2)).collect(),
            };
            if csv {
                println!("{REPORT_CSV_HEADER}");
            }
            for (i, (c, mu)) in columns.iter().enumerate() {
                let r = report::stats_from_csv(&results, c, *mu)?;
                if csv {
                    println!("{}", report_csv_row(&r));
                } else {
                    if i > 0 {
                        println!();
                    }
                    print!("{}", format_report(&r));
                }
            }
        }
        Command::Suite { synthetic, inputs } => {
            if synthetic {
                cfg.synthetic = true;
            }
            if !inputs.is_empty() {
                cfg.inputs = inputs;
            }
            let r = report::run_suite(&cfg)?;
            print!("{}", r.results_csv());
            println!(
                "mean accuracy {:.3}%  mean F1 {:.3}%  mean kappa {:.4}  ({} states, outputs in {})",
                r.summary.mean_accuracy_pct,
                r.summary.mean_f1_weighted_pct,
                r.summary.mean_kappa,
                r.summary.n_states,
                cfg.out.display()
            );
        }
        Command::Version => {
            println!("upm {} (model format {MODEL_FORMAT})", env!("CARGO_PKG_VERSION"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("upm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
