use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dra_cli::commands::adjust::{run_adjust, AdjustOptions};
use dra_cli::commands::analyze::{histogram_path, records_path, run_analyze, AnalyzeOptions};
use dra_cli::commands::bench::{run_bench, write_bench_csv};
use dra_cli::commands::simulate::{run_simulate, run_sweep};
use dra_cli::commands::synth::{run_synth, SynthKind, SynthOptions};
use dra_cli::config::RunConfig;
use dra_cli::CliResult;
use dra_core::adjust::DEFAULT_EPSILON;
use dra_core::analyzer::{PValueMethod, DEFAULT_ALPHA, DEFAULT_RESAMPLES};
use dra_core::rewards::RewardConfig;
use dra_core::smi::SmiKind;

#[derive(Parser)]
#[command(
    name = "dra",
    version,
    about = "Diversity-aware reward adjustment tools"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Denominator guard added to each SMI (default 1e-6).
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// SMI instantiation: graphcut or logdet.
    #[arg(long, global = true, value_parser = parse_smi)]
    smi: Option<SmiKind>,
    /// Diagonal regularization for logdet (default 1e-8).
    #[arg(long, global = true)]
    jitter: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add `weight` and `adjusted_reward` to every line of a completions file.
    Adjust {
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Run config supplying reward settings for lines without `reward`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rank-correlate reward gaps with semantic distances, per prompt.
    Analyze {
        input: PathBuf,
        /// Prefix for `<prefix>_records.csv` and `<prefix>_histogram.csv`.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Method::Tapprox)]
        method: Method,
        /// Monte-Carlo permutations when a prompt has more than ten pairs.
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on the toy environment and write mode-coverage metrics.
    Simulate {
        config: PathBuf,
        /// Metrics CSV, or a directory of per-algorithm CSVs with --sweep.
        #[arg(long)]
        output: PathBuf,
        /// Run all four algorithms with shared seeds.
        #[arg(long)]
        sweep: bool,
    },
    /// Time Graph-Cut against log-det weights over a doubling grid of G.
    Bench {
        #[arg(long, default_value_t = 64)]
        max_g: usize,
        #[arg(long, default_value_t = 15)]
        repetitions: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic completions dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 500)]
        prompts: usize,
        #[arg(long, default_value_t = 6)]
        group_size: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Tapprox,
    Permutation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Null,
    Monotone,
}

fn parse_smi(s: &str) -> Result<SmiKind, String> {
    s.parse().map_err(|e: dra_core::Error| e.to_string())
}

fn reward_config(path: Option<&PathBuf>) -> CliResult<RewardConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?.reward_config(),
        None => RewardConfig::default(),
    })
}

fn with_jitter(smi: SmiKind, jitter: Option<f64>) -> CliResult<SmiKind> {
    match (smi, jitter) {
        (SmiKind::LogDet { .. }, Some(j)) => Ok(SmiKind::log_det(j)?),
        (kind, _) => Ok(kind),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Adjust {
            input,
            output,
            config,
        } => {
            let options = AdjustOptions {
                smi: with_jitter(cli.smi.unwrap_or_default(), cli.jitter)?,
                epsilon: cli.epsilon.unwrap_or(DEFAULT_EPSILON),
                rewards: reward_config(config.as_ref())?,
            };
            let n = run_adjust(&input, &output, &options)?;
            println!("adjusted {n} completions -> {}", output.display());
        }
        Command::Analyze {
            input,
            output,
            alpha,
            method,
            resamples,
            config,
        } => {
            let method = match method {
                Method::Tapprox => PValueMethod::TApprox,
                Method::Permutation => PValueMethod::Permutation {
                    resamples,
                    seed: seed.unwrap_or(0),
                },
            };
            let options = AnalyzeOptions {
                alpha,
                method,
                rewards: reward_config(config.as_ref())?,
            };
            let summary = run_analyze(&input, &output, &options)?;
            println!("prompts_analyzed={}", summary.records.len());
            println!("prompts_skipped={}", summary.failures.len());
            println!("fraction_insignificant={}", summary.fraction_insignificant);
            println!("degenerate_fraction={}", summary.degenerate_fraction);
            println!("records={}", records_path(&output).display());
            println!("histogram={}", histogram_path(&output).display());
        }
        Command::Simulate {
            config,
            output,
            sweep,
        } => {
            let mut run_config = RunConfig::load(&config)?;
            if let Some(s) = seed {
                run_config.seed = s;
            }
            if let Some(e) = cli.epsilon {
                run_config.epsilon = e;
            }
            if let Some(kind) = cli.smi {
                run_config.smi = kind;
            }
            if let Some(j) = cli.jitter {
                run_config.jitter = j;
            }
            let written = if sweep {
                run_sweep(&run_config, &output)?
            } else {
                vec![run_simulate(&run_config, &output)?]
            };
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Bench {
            max_g,
            repetitions,
            dim,
            output,
        } => {
            let report = run_bench(
                max_g,
                repetitions,
                dim,
                cli.epsilon.unwrap_or(DEFAULT_EPSILON),
                seed.unwrap_or(0),
            )?;
            write_bench_csv(&output, &report)?;
            for r in &report.rows {
                println!(
                    "G={:<4} graphcut={:.3}us logdet={:.3}us",
                    r.group_size, r.graphcut_us, r.logdet_us
                );
            }
            println!("graphcut_slope={:.3}", report.graphcut_slope);
            println!("logdet_slope={:.3}", report.logdet_slope);
        }
        Command::Synth {
            kind,
            prompts,
            group_size,
            dim,
            output,
        } => {
            let options = SynthOptions {
                kind: match kind {
                    Kind::Null => SynthKind::Null,
                    Kind::Monotone => SynthKind::Monotone,
                },
                prompts,
                group_size,
                dim,
                seed: seed.unwrap_or(0),
            };
            let n = run_synth(&options, &output)?;
            println!("wrote {n} prompts -> {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
