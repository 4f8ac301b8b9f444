use std::path::Path;

use dra_core::adjust::adjust_group;
use dra_core::rewards::RewardConfig;
use dra_core::smi::SmiKind;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::io::ingest_completions;
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustOptions {
    pub smi: SmiKind,
    pub epsilon: f64,
    pub rewards: RewardConfig,
}

/// Rewrites a completions file with each line's `weight` and
/// `adjusted_reward` added. Lines keep their input order. Returns the number
/// of completions written.
pub fn run_adjust(input: &Path, output: &Path, options: &AdjustOptions) -> CliResult<usize> {
    let groups = ingest_completions(input, &options.rewards)?;
    let mut rows: Vec<(usize, Map<String, Value>)> = Vec::new();
    for ingested in groups {
        let group = ingested.group?;
        let adjusted = adjust_group(&group, options.smi, options.epsilon).map_err(|source| {
            CliError::Validation {
                prompt_id: ingested.prompt_id.clone(),
                source,
            }
        })?;
        for (k, record) in ingested.records.into_iter().enumerate() {
            let Value::Object(mut fields) =
                serde_json::to_value(record).expect("record serializes")
            else {
                unreachable!("records serialize to objects")
            };
            fields.insert("weight".into(), adjusted.weights.values[k].into());
            fields.insert("adjusted_reward".into(), adjusted.adjusted[k].into());
            rows.push((ingested.lines[k], fields));
        }
    }
    rows.sort_by_key(|(line, _)| *line);
    let count = rows.len();
    write_atomic(output, |out| {
        for (_, fields) in &rows {
            serde_json::to_writer(&mut *out, fields)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    })?;
    Ok(count)
}
