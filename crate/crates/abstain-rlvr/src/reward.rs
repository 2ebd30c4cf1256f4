//! The ternary accuracy reward and the format bonus.
//!
//! The accuracy channel pays `r_correct` for a correct answer, `r_abs` for an
//! abstention, and `r_wrong` otherwise. Malformed output is paid `r_wrong` on
//! this channel: an unverifiable claim must not be cheaper than a wrong one,
//! or the policy learns to evade the schema. The format channel is a separate
//! bonus so accuracy-channel analyses stay unaffected by formatting.

use crate::core::{QuestionRecord, RewardConfig, TaskMode, Verdict};
use crate::parse::{classify, StructuredOutput};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Accuracy and format channels for one scored output. `total` is their
/// exact sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub accuracy_component: f64,
    pub format_component: f64,
    pub total: f64,
}

/// The accuracy reward: Correct pays `r_correct`, Abstain pays `r_abs`,
/// Incorrect and Malformed pay `r_wrong`.
pub fn accuracy_reward(verdict: Verdict, config: &RewardConfig) -> f64 {
    match verdict {
        Verdict::Correct => config.r_correct,
        Verdict::Abstain => config.r_abs,
        Verdict::Incorrect | Verdict::Malformed => config.r_wrong,
    }
}

/// The format bonus: paid in MCQ mode when the tag schema was satisfied,
/// never in open-ended mode, where the strict format is not enforced.
pub fn format_reward(structured: &StructuredOutput, config: &RewardConfig) -> f64 {
    match config.mode {
        TaskMode::McqTagged if structured.format_ok => config.format_bonus,
        _ => 0.0,
    }
}

/// Combine both channels for one classified output.
pub fn reward_breakdown(
    verdict: Verdict,
    structured: &StructuredOutput,
    config: &RewardConfig,
) -> RewardBreakdown {
    let accuracy_component = accuracy_reward(verdict, config);
    let format_component = format_reward(structured, config);
    RewardBreakdown {
        accuracy_component,
        format_component,
        total: accuracy_component + format_component,
    }
}

/// Outcome of scoring one batch item. Unknown ids are data, not failures:
/// the batch continues and the entry records the unresolved id.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreEntry {
    Scored {
        question_id: String,
        verdict: Verdict,
        structured: StructuredOutput,
        breakdown: RewardBreakdown,
    },
    UnknownId {
        question_id: String,
    },
}

/// Classify and reward a batch of raw outputs, preserving input order.
///
/// The effective mode per item comes from its record, so a mixed-mode
/// dataset scores each item under its own format rule; the scalars come
/// from `config`.
pub fn score_batch(
    raws: &[(String, String)],
    records: &[QuestionRecord],
    config: &RewardConfig,
) -> Vec<ScoreEntry> {
    let by_id: HashMap<&str, &QuestionRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    raws.iter()
        .map(|(question_id, raw)| match by_id.get(question_id.as_str()) {
            None => ScoreEntry::UnknownId {
                question_id: question_id.clone(),
            },
            Some(record) => {
                let (verdict, structured) = classify(raw, record);
                let effective = RewardConfig {
                    mode: record.mode,
                    ..*config
                };
                let breakdown = reward_breakdown(verdict, &structured, &effective);
                ScoreEntry::Scored {
                    question_id: question_id.clone(),
                    verdict,
                    structured,
                    breakdown,
                }
            }
        })
        .collect()
}

/// One row of a scored file:
/// `{question_id, verdict, accuracy_reward, format_reward, total}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub question_id: String,
    pub verdict: Verdict,
    pub accuracy_reward: f64,
    pub format_reward: f64,
    pub total: f64,
}

impl ScoreEntry {
    /// File row for a scored entry; `None` for unknown ids.
    pub fn to_scored_row(&self) -> Option<ScoredRow> {
        match self {
            ScoreEntry::Scored {
                question_id,
                verdict,
                breakdown,
                ..
            } => Some(ScoredRow {
                question_id: question_id.clone(),
                verdict: *verdict,
                accuracy_reward: breakdown.accuracy_component,
                format_reward: breakdown.format_component,
                total: breakdown.total,
            }),
            ScoreEntry::UnknownId { .. } => None,
        }
    }
}
