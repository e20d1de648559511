use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use axon_core::config::{default_scenario, RunConfig};
use axon_core::deterministic::run_det_strided;
use axon_core::export;
use axon_core::harness::{fit_rate, run_sweep, write_sweep, ResultsTable, SweepOptions};
use axon_core::stochastic::run_stoch_strided;
use axon_core::validation::{self, MartingaleParams, SuiteReport};

/// Deterministic and stochastic axon simulations and the convergence study
/// between them.
#[derive(Parser, Debug)]
#[command(name = "axon", version)]
struct Cli {
    /// Run configuration (JSON); the default scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Double the grid cells and halve the time step.
    #[arg(long, global = true)]
    refine: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the deterministic model.
    Det,
    /// Run one stochastic trajectory.
    Stoch {
        /// Channel scale N; the first sweep entry when omitted.
        #[arg(long)]
        n: Option<u32>,
    },
    /// Run the full convergence sweep.
    Sweep,
    /// Run an oracle suite.
    Validate {
        suite: Suite,
        /// Replicates (martingale) or paths (likelihood).
        #[arg(long)]
        samples: Option<u32>,
    },
    /// Fit a power law to the per-N medians of an existing results file.
    Fit {
        results: PathBuf,
        #[arg(long, default_value = "dev_l2")]
        metric: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Kernel,
    Norms,
    Martingale,
    Likelihood,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => default_scenario(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(if cli.refine { cfg.refined() } else { cfg })
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn print_report(report: &SuiteReport) -> bool {
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark}  {:<55} {:>12.6e}  (limit {:e})", c.name, c.value, c.limit);
    }
    report.passed()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    match &cli.command {
        Command::Det => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cli, &cfg);
            ensure_dir(&dir)?;
            let k = cfg.kinetics()?;
            let traj = run_det_strided(&cfg.initial_det_state()?, cfg.horizon, cfg.dt, &k, cfg.sample_stride)?;
            export::write_det_trajectory(&dir.join("det_trajectory.csv"), &traj, &k)?;
            export::write_det_summary(&dir.join("det_summary.csv"), &traj)?;
            export::write_json(
                &dir.join("manifest.json"),
                &json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "config_digest": cfg.digest(),
                    "kind": "det",
                    "sup_norm": traj.sup_norm,
                    "gradient_sup": traj.gradient_sup,
                    "dissipation": traj.last().dissipation,
                    "max_sum_defect": traj.max_sum_defect(),
                }),
            )?;
            println!("wrote {} samples to {}", traj.samples.len(), dir.display());
        }
        Command::Stoch { n } => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cli, &cfg);
            ensure_dir(&dir)?;
            let Some(n) = n.or_else(|| cfg.sweep.first().copied()) else {
                bail!("no channel scale: pass --n or give a sweep in the configuration");
            };
            let k = cfg.kinetics()?;
            let init = cfg.initial_stoch_state(n, cfg.seed)?;
            let traj = run_stoch_strided(&init, cfg.horizon, cfg.dt, &k, cfg.seed, cfg.sample_stride)?;
            export::write_stoch_snapshots(&dir.join("stoch_voltage.csv"), &traj)?;
            export::write_jumps(&dir.join("jumps.csv"), &traj, &k)?;
            export::write_json(
                &dir.join("manifest.json"),
                &json!({
                    "version": env!("CARGO_PKG_VERSION"),
                    "config_digest": cfg.digest(),
                    "kind": "stoch",
                    "n": n,
                    "seed": cfg.seed,
                    "channels": traj.channel_count(),
                    "jumps": traj.jumps.len(),
                    "sup_norm": traj.sup_norm,
                }),
            )?;
            println!(
                "{} channels, {} jumps; wrote {}",
                traj.channel_count(),
                traj.jumps.len(),
                dir.display()
            );
        }
        Command::Sweep => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cli, &cfg);
            // refinement was already applied by load_config
            let outcome = run_sweep(&cfg, &SweepOptions::default())?;
            write_sweep(&outcome, &dir)?;
            for m in &outcome.manifest.medians {
                println!(
                    "N = {:>5}  ok {:>3}  failed {:>3}  median dev_l2 {}",
                    m.n,
                    m.ok,
                    m.failed,
                    m.dev_l2.map_or("-".into(), |v| format!("{v:.4e}"))
                );
            }
            if let Some(fit) = &outcome.manifest.rate_fit {
                println!("slope {:.3} ({})", fit.slope, fit.note);
            }
        }
        Command::Validate { suite, samples } => {
            let passed = match suite {
                Suite::Kernel => print_report(&validation::kernel_suite()?),
                Suite::Norms => print_report(&validation::norms_suite()?),
                Suite::Martingale => {
                    let cfg = load_config(&cli)?;
                    let mut params = MartingaleParams::default();
                    if let Some(r) = samples {
                        params.replicates = *r;
                    }
                    if let Some(s) = cli.seed {
                        params.seed = s;
                    }
                    let report = validation::martingale_suite(&cfg, &params)?;
                    if let Some(dir) = &cli.out {
                        ensure_dir(dir)?;
                        export::write_json(&dir.join("martingale_report.json"), &report)?;
                        let names: Vec<String> = cfg.kinetics.states.iter().map(|s| s.name.clone()).collect();
                        export::write_series(
                            &dir.join("martingale_hminus1.csv"),
                            &report.times,
                            &names,
                            &report.mean_hminus1,
                        )?;
                    }
                    print_report(&report.report)
                }
                Suite::Likelihood => {
                    let cfg = load_config(&cli)?;
                    let paths = samples.unwrap_or(10_000);
                    let report = validation::likelihood_suite(&cfg.kinetics, paths, 1.0, cli.seed.unwrap_or(11))?;
                    println!("E[h] = {:.5} ± {:.5}", report.mean, report.standard_error);
                    print_report(&report.report)
                }
            };
            if !passed {
                bail!("validation suite failed");
            }
        }
        Command::Fit { results, metric } => {
            let table = ResultsTable::read(results)?;
            let fit = fit_rate(&table, metric)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
        }
    }
    Ok(())
}
