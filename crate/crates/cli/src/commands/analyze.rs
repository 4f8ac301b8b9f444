use std::path::{Path, PathBuf};

use dra_core::analyzer::{analyze_dataset, AnalysisSummary, PValueMethod};
use dra_core::rewards::RewardConfig;
use log::warn;

use crate::error::CliResult;
use crate::io::ingest_completions;
use crate::output::write_csv_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub alpha: f64,
    pub method: PValueMethod,
    pub rewards: RewardConfig,
}

pub fn records_path(prefix: &Path) -> PathBuf {
    suffixed(prefix, "_records.csv")
}

pub fn histogram_path(prefix: &Path) -> PathBuf {
    suffixed(prefix, "_histogram.csv")
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Per-prompt Spearman analysis of reward gaps against semantic distances.
/// Groups that fail validation or analysis are logged and skipped.
pub fn run_analyze(
    input: &Path,
    prefix: &Path,
    options: &AnalyzeOptions,
) -> CliResult<AnalysisSummary> {
    let mut groups = Vec::new();
    for ingested in ingest_completions(input, &options.rewards)? {
        match ingested.group {
            Ok(g) => groups.push(g),
            Err(e) => warn!("skipping {e}"),
        }
    }
    let summary = analyze_dataset(groups, options.alpha, options.method)?;
    for (prompt_id, e) in &summary.failures {
        warn!("skipping prompt `{prompt_id}`: {e}");
    }
    write_csv_atomic(&records_path(prefix), |w| {
        w.write_record(["prompt_id", "n_completions", "rho", "p_value", "degenerate"])?;
        for r in &summary.records {
            w.write_record([
                r.prompt_id.clone(),
                r.n_completions.to_string(),
                r.rho.to_string(),
                r.p_value.to_string(),
                r.degenerate.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_csv_atomic(&histogram_path(prefix), |w| {
        w.write_record(["bin_left", "bin_right", "count"])?;
        for b in &summary.histogram {
            w.write_record([b.left.to_string(), b.right.to_string(), b.count.to_string()])?;
        }
        Ok(())
    })?;
    Ok(summary)
}
