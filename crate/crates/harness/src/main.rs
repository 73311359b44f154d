use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sfw_harness::config::{expand_grid, load_config};
use sfw_harness::run::run_experiment;
use sfw_harness::select::select_from_dir;
use sfw_harness::verify::{convergence_check, gradcheck_all, verify_lmo_all};
use sfw_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "sfw", about = "Constrained training and compression harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured seed and run the compression sweep.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Expand the config's grid block and train every cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Score the runs in an output directory and pick winners.
    Select {
        #[arg(long)]
        out: PathBuf,
        /// Allowed dense train-accuracy drop below the reference.
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        /// Reference dense accuracy; defaults to the best run found.
        #[arg(long)]
        reference: Option<f64>,
    },
    /// Check every closed-form LMO against brute force.
    VerifyLmo {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare measured stationarity against the convergence bound.
    CheckConvergence {
        #[arg(long, default_value_t = 24)]
        seeds: usize,
    },
    /// Finite-difference checks for the quadratic, MLP, and CNN models.
    Gradcheck,
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            threads,
        } => {
            let cfg = load_config(&config)?;
            let _ = threads;
            run_experiment(&cfg, seed, out.as_deref())?;
            Ok(true)
        }
        Command::Sweep {
            config,
            out,
            threads,
        } => {
            let cfg = load_config(&config)?;
            let cells = expand_grid(&cfg)?;
            let workers = threads.max(1).min(cells.len().max(1));
            if workers <= 1 {
                for cell in &cells {
                    run_experiment(cell, None, out.as_deref())?;
                }
            } else {
                // cells are independent jobs with disjoint output files
                let mut failure = None;
                std::thread::scope(|scope| {
                    let mut handles = Vec::new();
                    for worker in 0..workers {
                        let cells = &cells;
                        let out = out.as_deref();
                        handles.push(scope.spawn(move || -> Result<()> {
                            for cell in cells.iter().skip(worker).step_by(workers) {
                                run_experiment(cell, None, out)?;
                            }
                            Ok(())
                        }));
                    }
                    for handle in handles {
                        if let Err(e) = handle.join().expect("worker panicked") {
                            failure.get_or_insert(e);
                        }
                    }
                });
                if let Some(e) = failure {
                    return Err(e);
                }
            }
            println!("ran {} grid cells", cells.len());
            Ok(true)
        }
        Command::Select {
            out,
            threshold,
            reference,
        } => {
            let report = select_from_dir(&out, threshold, reference)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(true)
        }
        Command::VerifyLmo { trials, seed } => {
            let reports = verify_lmo_all(trials, seed)?;
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{}: {} trials, max gap {:.3e} -> {}",
                    r.kind,
                    r.trials,
                    r.max_gap,
                    if r.pass { "PASS" } else { "FAIL" }
                );
                all_pass &= r.pass;
            }
            Ok(all_pass)
        }
        Command::CheckConvergence { seeds } => {
            if seeds == 0 {
                return Err(HarnessError::Config("seeds must be positive".into()));
            }
            let summary = convergence_check(seeds, &[100, 400])?;
            for r in &summary.runs {
                println!(
                    "T={}: measured {:.6} vs bound {:.6}, max sample grad {:.4} (G = {:.4}) -> {}",
                    r.horizon,
                    r.measured_mean,
                    r.bound,
                    r.max_sample_grad_norm,
                    r.lipschitz,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            println!(
                "T ratio {:.3} (window [{}, {}]) -> {}",
                summary.ratio,
                summary.ratio_window.0,
                summary.ratio_window.1,
                if summary.pass { "PASS" } else { "FAIL" }
            );
            Ok(summary.pass)
        }
        Command::Gradcheck => {
            let reports = gradcheck_all()?;
            let mut all_pass = true;
            for r in &reports {
                println!(
                    "{}: max rel err {:.3e} (tol {:.0e}) -> {}",
                    r.name,
                    r.max_rel_err,
                    r.tolerance,
                    if r.pass { "PASS" } else { "FAIL" }
                );
                all_pass &= r.pass;
            }
            Ok(all_pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
