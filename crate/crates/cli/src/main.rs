//! `satclt`: random 2-SAT formulas, pruning, exact counting, population
//! dynamics, and the Monte Carlo experiment suite.
//!
//! Exit codes: 0 on success, 2 on invalid configuration, 3 when exact
//! counting exceeds its node budget, 1 on other errors.

use clap::{Args, Parser, Subcommand};
use satclt_core::counting::{count_models_with, marginal, CountError};
use satclt_core::dimacs::{read_dimacs, to_dimacs_string, write_dimacs};
use satclt_core::experiments::{self, ExperimentConfig, ExperimentError};
use satclt_core::formula::{clause_count_for_density, sample_random_cnf, Cnf};
use satclt_core::rng::Stream;
use satclt_core::ucp::{dump_closures, prune};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "satclt", version, about = "random 2-SAT counting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random 2-CNF and write it as DIMACS
    Generate(GenerateArgs),
    /// Exactly count satisfying assignments of a DIMACS 2-CNF
    Count(InputArgs),
    /// Remove all conflict clauses reachable by unit propagation
    Prune(PruneArgs),
    /// Exact marginal of one variable under random satisfying assignments
    Marginal(MarginalArgs),
    /// Population dynamics for the correlated log-likelihood fixed point
    Popdyn(ExperimentArgs),
    /// The variance constant: integrated cross functional at the fixed point
    Eta(ExperimentArgs),
    /// Empirical variance of the pruned log count vs the variance constant
    Variance(ExperimentArgs),
    /// Normality check of the standardized pruned log count
    Clt(ExperimentArgs),
    /// Distribution of the pruning impact on the log count
    PruneImpact(ExperimentArgs),
    /// Local tree structure frequencies in a pruned correlated pair
    Lwc(ExperimentArgs),
    /// Boundary-influence decay on sampled trees
    Gibbs(ExperimentArgs),
    /// Telescoping variance decomposition at exactly countable sizes
    Telescope(ExperimentArgs),
    /// Satisfiable fraction on both sides of the threshold
    Threshold(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: u32,
    /// Clause count; overrides --d
    #[arg(long)]
    m: Option<usize>,
    /// Clause density; m = round(d*n/2)
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Input DIMACS path ("-" or omitted reads stdin)
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Branch-node budget for the exact count
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Write the pruned formula here (stdout summary always printed)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-literal closure dump ("lit: l1 l2 ...") here
    #[arg(long)]
    closures: Option<PathBuf>,
}

#[derive(Args)]
struct MarginalArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// 1-indexed variable
    #[arg(long)]
    var: u32,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value config file; CLI flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long = "pop-size")]
    pop_size: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<u32>,
    #[arg(long = "quad-k")]
    quad_k: Option<u32>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Node budget per exact count ("none" disables)
    #[arg(long)]
    budget: Option<String>,
    /// Comma-separated density grid
    #[arg(long = "d-grid")]
    d_grid: Option<String>,
    /// Output directory for data files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Feed standard normal draws into the KS check (self-test)
    #[arg(long, default_value_t = false)]
    synthetic_normal: bool,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, experiments::ConfigError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! apply {
            ($field:ident, $key:literal) => {
                if let Some(v) = &self.$field {
                    cfg.set($key, &v.to_string())?;
                }
            };
        }
        apply!(d, "d");
        apply!(n, "n");
        apply!(trials, "trials");
        apply!(seed, "seed");
        apply!(t, "t");
        apply!(ell, "ell");
        apply!(pop_size, "pop-size");
        apply!(tol, "tol");
        apply!(max_iter, "max-iter");
        apply!(quad_k, "quad-k");
        apply!(samples, "samples");
        apply!(workers, "workers");
        apply!(budget, "budget");
        apply!(d_grid, "d-grid");
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if self.synthetic_normal {
            cfg.synthetic_normal = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn read_input(path: &Option<PathBuf>) -> anyhow::Result<Cnf> {
    let text = match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)?,
        _ => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    Ok(read_dimacs(text.as_bytes())?)
}

fn emit(report: &experiments::ExperimentReport, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let json = report.to_json();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), &json)?;
    }
    println!("{json}");
    Ok(())
}

fn run_experiment(
    args: &ExperimentArgs,
    f: impl Fn(&ExperimentConfig) -> Result<experiments::ExperimentReport, ExperimentError>,
) -> Result<(), u8> {
    let cfg = match args.build() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return Err(EXIT_CONFIG);
        }
    };
    match f(&cfg) {
        Ok(report) => emit(&report, &cfg.out).map_err(|e| {
            eprintln!("{e}");
            1u8
        }),
        Err(ExperimentError::Config(e)) => {
            eprintln!("config error: {e}");
            Err(EXIT_CONFIG)
        }
        Err(ExperimentError::BudgetExhausted) => {
            eprintln!("every trial exceeded the counting budget");
            Err(EXIT_BUDGET)
        }
        Err(e) => {
            eprintln!("{e}");
            Err(1)
        }
    }
}

fn real_main() -> Result<(), u8> {
    let cli = Cli::parse();
    let fail = |e: anyhow::Error| -> u8 {
        eprintln!("{e}");
        1
    };
    match cli.command {
        Command::Generate(args) => {
            let m = match (args.m, args.d) {
                (Some(m), _) => m,
                (None, Some(d)) if d > 0.0 => clause_count_for_density(args.n, d),
                _ => {
                    eprintln!("generate needs --m or a positive --d");
                    return Err(EXIT_CONFIG);
                }
            };
            if args.n < 2 {
                eprintln!("generate needs n >= 2");
                return Err(EXIT_CONFIG);
            }
            let mut rng = Stream::from_seed(args.seed).child("generate", 0);
            let cnf = sample_random_cnf(args.n, m, &mut rng).expect("validated");
            match &args.out {
                Some(p) => std::fs::write(p, to_dimacs_string(&cnf)).map_err(|e| fail(e.into()))?,
                None => {
                    let mut out = std::io::stdout().lock();
                    write_dimacs(&cnf, &mut out).map_err(|e| fail(e.into()))?;
                }
            }
            Ok(())
        }
        Command::Count(args) => {
            let cnf = read_input(&args.input).map_err(fail)?;
            match count_models_with(&cnf, &[], args.budget) {
                Ok(mc) => {
                    println!(
                        "{}",
                        serde_json::json!({
                            "count": mc.count.to_string(),
                            "log": mc.log_value,
                            "sat": !mc.is_zero(),
                            "nodes": mc.nodes,
                        })
                    );
                    Ok(())
                }
                Err(CountError::BudgetExceeded { nodes }) => {
                    eprintln!("node budget exceeded after {nodes} branch nodes");
                    Err(EXIT_BUDGET)
                }
                Err(e) => Err(fail(e.into())),
            }
        }
        Command::Prune(args) => {
            let cnf = read_input(&args.input).map_err(fail)?;
            let pruned = prune(&cnf);
            if let Some(path) = &args.closures {
                std::fs::write(path, dump_closures(&cnf)).map_err(|e| fail(e.into()))?;
            }
            let result = pruned.pruned();
            if let Some(path) = &args.out {
                std::fs::write(path, to_dimacs_string(&result)).map_err(|e| fail(e.into()))?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "kept": pruned.kept.len(),
                    "removed": pruned.removed.len(),
                    "conflicted_literals": pruned.conflicted_literal_count(),
                })
            );
            Ok(())
        }
        Command::Marginal(args) => {
            let cnf = read_input(&args.input).map_err(fail)?;
            if args.var < 1 || args.var > cnf.n() {
                eprintln!("variable {} out of range 1..={}", args.var, cnf.n());
                return Err(EXIT_CONFIG);
            }
            match marginal(&cnf, args.var) {
                Ok(m) => {
                    println!("{}", serde_json::json!({ "var": args.var, "p_true": m.p_true }));
                    Ok(())
                }
                Err(CountError::Unsatisfiable) => {
                    eprintln!("formula is unsatisfiable; marginal undefined");
                    Err(1)
                }
                Err(e) => Err(fail(e.into())),
            }
        }
        Command::Popdyn(args) => run_experiment(&args, experiments::cmd_popdyn),
        Command::Eta(args) => run_experiment(&args, experiments::cmd_eta),
        Command::Variance(args) => run_experiment(&args, experiments::cmd_variance),
        Command::Clt(args) => run_experiment(&args, experiments::cmd_clt),
        Command::PruneImpact(args) => run_experiment(&args, experiments::cmd_prune_impact),
        Command::Lwc(args) => run_experiment(&args, experiments::cmd_lwc),
        Command::Gibbs(args) => run_experiment(&args, experiments::cmd_gibbs),
        Command::Telescope(args) => run_experiment(&args, experiments::cmd_telescope),
        Command::Threshold(args) => run_experiment(&args, experiments::cmd_threshold),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
