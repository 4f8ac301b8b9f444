//! JSON-Lines completions: one completion per line, grouped by prompt.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use dra_core::group::{validate_group, CompletionGroup, Embedding};
use dra_core::rewards::{score_completion, RewardConfig};
use dra_core::Error;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

/// One line of a completions file. Unrecognized fields are kept in `extra`
/// and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt_id: String,
    pub completion_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CompletionRecord {
    /// The record's reward, or one scored from `text` against a
    /// `ground_truth` field (with an optional `answer` override).
    fn resolve_reward(&mut self, line: usize, rewards: &RewardConfig) -> CliResult<()> {
        if self.reward.is_some() {
            return Ok(());
        }
        let truth = self.extra.get("ground_truth").and_then(Value::as_str);
        let (Some(truth), Some(text)) = (truth, self.text.as_deref()) else {
            return Err(CliError::Parse {
                line,
                message: "missing `reward`, and no `text` plus `ground_truth` to score".into(),
            });
        };
        let answer = self.extra.get("answer").and_then(Value::as_str);
        let reward =
            score_completion(text, answer, truth, rewards).map_err(|e| CliError::Parse {
                line,
                message: e.to_string(),
            })?;
        self.reward = Some(reward);
        Ok(())
    }
}

/// Records sharing a prompt, in file order, with their validated group or
/// the reason it could not be built.
#[derive(Debug)]
pub struct IngestedGroup {
    pub prompt_id: String,
    pub lines: Vec<usize>,
    pub records: Vec<CompletionRecord>,
    pub group: CliResult<CompletionGroup>,
}

/// Parses every non-blank line. Line numbers start at one. Records without
/// a reward are scored with `rewards`.
pub fn read_records(
    path: &Path,
    rewards: &RewardConfig,
) -> CliResult<Vec<(usize, CompletionRecord)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: CompletionRecord =
            serde_json::from_str(&line).map_err(|e| CliError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        record.resolve_reward(line_no, rewards)?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn build_group(prompt_id: &str, records: &[CompletionRecord]) -> CliResult<CompletionGroup> {
    let validation = |source| CliError::Validation {
        prompt_id: prompt_id.to_string(),
        source,
    };
    if let Some(index) = records.iter().position(|r| r.embedding.is_empty()) {
        return Err(validation(Error::ZeroNormEmbedding { index, norm: 0.0 }));
    }
    let expected = records[0].embedding.len();
    if let Some(r) = records.iter().find(|r| r.embedding.len() != expected) {
        return Err(CliError::MixedDimension {
            prompt_id: prompt_id.to_string(),
            expected,
            found: r.embedding.len(),
        });
    }
    let texts: Option<Vec<String>> = records.iter().map(|r| r.text.clone()).collect();
    validate_group(CompletionGroup {
        prompt_id: prompt_id.to_string(),
        completion_ids: records.iter().map(|r| r.completion_id.clone()).collect(),
        rewards: records
            .iter()
            .map(|r| r.reward.unwrap_or(f64::NAN))
            .collect(),
        embeddings: records
            .iter()
            .map(|r| Embedding::new(r.embedding.clone()))
            .collect(),
        texts,
    })
    .map_err(validation)
}

/// Groups records by prompt in order of first appearance and validates each
/// group.
pub fn group_records(records: Vec<(usize, CompletionRecord)>) -> Vec<IngestedGroup> {
    let mut by_prompt: IndexMap<String, (Vec<usize>, Vec<CompletionRecord>)> = IndexMap::new();
    for (line, record) in records {
        let entry = by_prompt.entry(record.prompt_id.clone()).or_default();
        entry.0.push(line);
        entry.1.push(record);
    }
    by_prompt
        .into_iter()
        .map(|(prompt_id, (lines, records))| {
            let group = build_group(&prompt_id, &records);
            IngestedGroup {
                prompt_id,
                lines,
                records,
                group,
            }
        })
        .collect()
}

/// Reads and groups a completions file. Malformed lines are fatal; group
/// validation failures are reported per group.
pub fn ingest_completions(path: &Path, rewards: &RewardConfig) -> CliResult<Vec<IngestedGroup>> {
    Ok(group_records(read_records(path, rewards)?))
}

/// Like [`ingest_completions`], failing on the first invalid group.
pub fn ingest_groups(path: &Path, rewards: &RewardConfig) -> CliResult<Vec<CompletionGroup>> {
    ingest_completions(path, rewards)?
        .into_iter()
        .map(|g| g.group)
        .collect()
}

/// Records for every completion of `group`, in group order.
pub fn group_to_records(group: &CompletionGroup) -> Vec<CompletionRecord> {
    (0..group.len())
        .map(|i| CompletionRecord {
            prompt_id: group.prompt_id.clone(),
            completion_id: group.completion_ids[i].clone(),
            reward: Some(group.rewards[i]),
            embedding: group.embeddings[i].as_slice().to_vec(),
            text: group.texts.as_ref().map(|t| t[i].clone()),
            extra: Map::new(),
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> std::io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut *out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes groups as JSON-Lines, one completion per line.
pub fn write_completions(path: &Path, groups: &[CompletionGroup]) -> CliResult<()> {
    let records: Vec<CompletionRecord> = groups.iter().flat_map(group_to_records).collect();
    write_atomic(path, |out| write_jsonl(out, &records))
}
