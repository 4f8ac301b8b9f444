use std::path::{Path, PathBuf};

use dra_core::sim::{train, write_metrics_csv, Algorithm, ToyEnvironment};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

fn run_one(config: &RunConfig, env: &ToyEnvironment, output: &Path) -> CliResult<()> {
    let train_config = config.train_config();
    let metrics = train(env, &train_config)?;
    write_atomic(output, |out| {
        write_metrics_csv(
            out,
            config.algorithm,
            config.seed,
            env.num_modes(),
            &metrics,
        )
    })
}

/// Trains the configured algorithm and writes its metrics CSV to `output`.
pub fn run_simulate(config: &RunConfig, output: &Path) -> CliResult<PathBuf> {
    config.validate()?;
    let env = ToyEnvironment::new(&config.env_config()).map_err(CliError::Core)?;
    run_one(config, &env, output)?;
    Ok(output.to_path_buf())
}

/// Trains every algorithm with the same seed and environment, one CSV per
/// algorithm named `<algorithm>.csv` inside the `output` directory.
pub fn run_sweep(config: &RunConfig, output: &Path) -> CliResult<Vec<PathBuf>> {
    config.validate()?;
    let env = ToyEnvironment::new(&config.env_config()).map_err(CliError::Core)?;
    Algorithm::ALL
        .par_iter()
        .map(|&algorithm| {
            let cfg = RunConfig {
                algorithm,
                ..config.clone()
            };
            let path = output.join(format!("{algorithm}.csv"));
            run_one(&cfg, &env, &path)?;
            Ok(path)
        })
        .collect()
}
