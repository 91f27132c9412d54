use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqrank::harness::{
    delta_grid, read_pre_file, run_experiment, run_monitor, ExperimentConfig, ExperimentResult, MonitorConfig,
};
use seqrank::{Error, Result};

/// Anytime-valid rank tests for treatment effects.
#[derive(Parser)]
#[command(name = "seqrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment and write results.csv, curves.csv and utility.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monitor a stream of post-treatment estimates read from stdin.
    Monitor {
        /// Blank-period estimates: an estimates CSV or one number per line.
        #[arg(long)]
        pre: PathBuf,
        /// gaussian:<effect>[:<draws>], plugin, plugin-generic,
        /// mix-adaptive:<effect>, mix-average:<effect> or uniform.
        #[arg(long)]
        statistic: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Resume from this file if it exists; save state after every estimate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarise rejection rates from a results directory.
    Table {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Discounted utilities over a grid of discount factors.
    Utility {
        #[arg(long)]
        results: PathBuf,
        /// start:end:step
        #[arg(long, default_value = "0.5:1.0:0.01")]
        delta_grid: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("delta grid `{spec}` is not start:end:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start > 0.0 && start <= end && end <= 1.0) {
        return Err(Error::Config(format!(
            "delta grid `{spec}` must satisfy 0 < start <= end <= 1, step > 0"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn table(result: &ExperimentResult, format: Format) -> Result<String> {
    let header = [
        "test",
        "replications",
        "rejection_rate",
        "std_error",
        "mean_rejection_time",
    ];
    let mut rows = Vec::new();
    for (tag, times) in result.tests.iter().zip(&result.rejection_times) {
        let rate = result.size(tag)?;
        let se = (rate * (1.0 - rate) / result.replications as f64).sqrt();
        let hits: Vec<usize> = times.iter().flatten().copied().collect();
        let mean = if hits.is_empty() {
            String::new()
        } else {
            format!("{:.2}", hits.iter().sum::<usize>() as f64 / hits.len() as f64)
        };
        rows.push([
            tag.clone(),
            result.replications.to_string(),
            format!("{rate:.4}"),
            format!("{se:.4}"),
            mean,
        ]);
    }
    let mut s = String::new();
    match format {
        Format::Csv => {
            s += &header.join(",");
            s.push('\n');
            for r in rows {
                s += &r.join(",");
                s.push('\n');
            }
        }
        Format::Md => {
            s += &format!("| {} |\n", header.join(" | "));
            s += &format!("|{}\n", "---|".repeat(header.len()));
            for r in rows {
                s += &format!("| {} |\n", r.join(" | "));
            }
        }
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            reps,
            seed,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::parse(&text)?;
            if let Some(r) = reps {
                cfg.replications = r;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate()?;
            log::info!("running {} replications of {}", cfg.replications, cfg.scenario.as_str());
            let result = run_experiment(&cfg)?;
            result.write_dir(&out, &delta_grid())?;
            fs::write(out.join("config.txt"), cfg.to_text())?;
            Ok(())
        }
        Command::Monitor {
            pre,
            statistic,
            alpha,
            checkpoint,
            seed,
        } => {
            let pre = read_pre_file(&pre)?;
            let config = MonitorConfig { statistic, alpha, seed };
            let stdin = io::stdin().lock();
            let stdout = io::stdout().lock();
            run_monitor(&pre, config, stdin, stdout, checkpoint.as_deref())?;
            Ok(())
        }
        Command::Table { results, format } => {
            let result = ExperimentResult::read_dir(&results)?;
            io::stdout().write_all(table(&result, format)?.as_bytes())?;
            Ok(())
        }
        Command::Utility { results, delta_grid } => {
            let grid = parse_grid(&delta_grid)?;
            let result = ExperimentResult::read_dir(&results)?;
            result.write_utility_to(io::stdout().lock(), &grid)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
