use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use cv_arbiter_core::diagnostics::{diagnose, DiagnoseOptions};
use cv_arbiter_core::estimators::parse_procedures;
use cv_arbiter_core::harness::dataset::{read_csv, select_from_data};
use cv_arbiter_core::harness::plot::emit_plot;
use cv_arbiter_core::harness::{reproduce_config, run_experiment, ExperimentConfig, FrequencyTable, Scale};
use cv_arbiter_core::prop1::{f_reference_prob, selection_prob, verify_grid};
use cv_arbiter_core::{Error, Scenario, Scheme, SplitSchedule};

/// Model selection by cross-validation: simulations, exact checks and diagnostics.
#[derive(Parser)]
#[command(name = "cv-arbiter", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Output prefix; `<prefix>.csv` and `<prefix>.json` are written.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the built-in grid for one of the three regression cases.
    Reproduce {
        #[arg(long)]
        case: u8,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<String>,
        /// Also draw the panels into this directory.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Select among procedures on a two-column (x, y) CSV file.
    Select {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated procedure ids, e.g. `poly:1,poly:2,spline`.
        #[arg(long, default_value = "poly:1,poly:2,spline")]
        procs: String,
        #[arg(long, default_value = "rlt:100")]
        scheme: Scheme,
        #[arg(long, default_value = "ratio:5:5")]
        schedule: SplitSchedule,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean-versus-zero model: selection probability of multifold CV.
    Prop1 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        n1: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check the closed form against split enumeration for n in 4..=12.
        #[arg(long)]
        verify: bool,
    },
    /// Norms, convergence slopes and pairwise probabilities for procedures.
    Diagnose {
        /// Comma-separated procedure ids.
        #[arg(long = "proc")]
        procs: String,
        /// `case1`, `case2`, `case3`, `mean(mu)` or just 1, 2, 3.
        #[arg(long)]
        case: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw frequency panels from a table written by `simulate`.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_)
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::UnknownFunction(_)
            | Error::SampleTooSmall { .. }
            | Error::ExhaustiveTooLarge { .. }
            | Error::Io(_) => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

/// Writes the table and reports; returns whether any cell had failures.
fn finish_table(table: &FrequencyTable, out: Option<&str>) -> Result<bool, Failure> {
    match out {
        Some(prefix) => {
            let (csv, json) = table.write(std::path::Path::new(prefix))?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        None => print!("{}", table.to_csv()),
    }
    for r in table.rows.iter().filter(|r| r.failed > 0) {
        eprintln!(
            "{} n={} {} {}: {} of {} replications failed: {}",
            r.case,
            r.n,
            r.schedule,
            r.scheme,
            r.failed,
            r.reps,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(table.has_failures())
}

fn parse_case(s: &str) -> Result<Scenario, Error> {
    match s.parse::<u8>() {
        Ok(k) => Scenario::case(k),
        Err(_) => s.parse(),
    }
}

fn run(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Simulate { config, threads, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if threads.is_some() {
                cfg.threads = threads;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let prefix = cfg.output.take();
            let table = run_experiment(&cfg)?;
            finish_table(&table, prefix.as_deref())
        }
        Command::Reproduce { case, scale, threads, out, plot } => {
            let mut cfg = reproduce_config(case, scale)?;
            cfg.threads = threads;
            let table = run_experiment(&cfg)?;
            let prefix =
                out.unwrap_or_else(|| format!("case{case}_{}", if scale == Scale::Full { "full" } else { "desk" }));
            let failed = finish_table(&table, Some(&prefix))?;
            if let Some(dir) = plot {
                for f in emit_plot(&table, &dir)? {
                    eprintln!("wrote {}", f.display());
                }
            }
            Ok(failed)
        }
        Command::Select { data, procs, scheme, schedule, seed } => {
            let sample = read_csv(&data)?;
            let procedures = parse_procedures(&procs)?;
            print_json(&select_from_data(&sample, &procedures, schedule, scheme, seed)?);
            Ok(false)
        }
        Command::Prop1 { n, n1, mu, sigma, reps, seed, verify } => {
            let checks = if verify {
                let mut mus = vec![0.0, 1.0];
                if !mus.contains(&mu) {
                    mus.push(mu);
                }
                let ns: Vec<usize> = (4..=12).collect();
                Some(verify_grid(&ns, &mus, 20, seed)?)
            } else {
                None
            };
            let prob = selection_prob(n, n1, mu, sigma, reps, seed)?;
            let reference = if mu == 0.0 { Some(f_reference_prob(n, n1)?) } else { None };
            print_json(&json!({
                "n": n,
                "n1": n1,
                "mu": mu,
                "sigma": sigma,
                "reps": reps,
                "seed": seed,
                "d_tilde_checks": checks,
                "selection_prob": prob,
                "f_reference": reference,
            }));
            Ok(false)
        }
        Command::Diagnose { procs, case, n, reps, seed } => {
            let procedures = parse_procedures(&procs)?;
            let scenario = parse_case(&case)?;
            print_json(&diagnose(&procedures, &scenario, n, reps, seed, DiagnoseOptions::default())?);
            Ok(false)
        }
        Command::Plot { input, out } => {
            let text = std::fs::read_to_string(&input).map_err(Error::from)?;
            let table = FrequencyTable::from_json(&text)?;
            for f in emit_plot(&table, &out)? {
                println!("{}", f.display());
            }
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
