use anyhow::Result;
use clap::{Parser, Subcommand};

use potential_nash_cli::{compare, presets, resolve_config, runner};

#[derive(Parser)]
#[command(
    name = "potential-nash",
    about = "Asynchronous best-response solvers for stochastic potential games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (replicated) experiment from a preset name or config file.
    Run {
        /// Preset name or path to a TOML config.
        config: String,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replications.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Override the output directory.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the paired best-response vs stochastic-gradient study.
    Compare {
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Preset utilities.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List the bundled presets.
    List,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, jobs, out } => {
            let mut cfg = resolve_config(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(o) = out {
                cfg.out.dir = o;
            }
            let outcome = runner::run_experiment(&cfg, jobs)?;
            println!(
                "wrote {} replication(s) to {}",
                outcome.traces.len(),
                outcome.out_dir.display()
            );
        }
        Command::Compare { config, seed, jobs, out } => {
            let mut cfg = resolve_config(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(o) = out {
                cfg.out.dir = o;
            }
            let outcome = compare::run_comparison(&cfg, jobs)?;
            println!("comparison table:");
            println!(
                "{:>12} {:>14} {:>14} {:>14} {:>14}",
                "eps", "primary_grad", "primary_comm", "baseline_grad", "baseline_comm"
            );
            for row in &outcome.rows {
                let fmt = |m: &Option<compare::MethodAtAccuracy>,
                           pick: fn(&compare::MethodAtAccuracy) -> f64| {
                    match m {
                        Some(m) => format!("{:.3e}", pick(m)),
                        None => "unreached".to_string(),
                    }
                };
                println!(
                    "{:>12.1e} {:>14} {:>14} {:>14} {:>14}",
                    row.eps,
                    fmt(&row.primary, |m| m.grad_steps),
                    fmt(&row.primary, |m| m.comm),
                    fmt(&row.baseline, |m| m.grad_steps),
                    fmt(&row.baseline, |m| m.comm),
                );
            }
            println!("files in {}", outcome.out_dir.display());
        }
        Command::Presets { action: PresetAction::List } => {
            print!("{}", presets::listing());
        }
    }
    Ok(())
}
