//! Shared domain types: task modes, question records, verdicts, and reward
//! configuration, plus dataset validation.
//!
//! Everything here is an immutable value type; records can be shared and sent
//! across threads freely.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// The canonical abstention option text used for injected MCQ options and
/// rendered open-ended abstention targets.
pub const IDK_TEXT: &str = "I Don't Know";

/// Phrases that count as an abstention after case folding, punctuation
/// stripping, and whitespace collapsing.
const ABSTENTION_LEXICON: &[&str] = &["i don't know", "i dont know", "idk"];

/// Answer format a dataset and its prompts use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    /// Multiple choice: `<reasoning>`/`<answer>` tags, lettered options, and
    /// an explicit IDK option.
    McqTagged,
    /// Open-ended: the final answer arrives in `\boxed{...}`.
    OpenBoxed,
}

/// One lettered option of a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub letter: char,
    pub text: String,
}

/// A single QA item as stored in dataset files (one JSON object per line).
///
/// In `mcq_tagged` mode `answer_key` is an option letter; in `open_boxed`
/// mode it is the gold answer string and `options` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<AnswerOption>>,
    pub answer_key: String,
    pub mode: TaskMode,
}

impl QuestionRecord {
    /// Letter of the option whose text reads as an abstention phrase, if any.
    pub fn idk_letter(&self) -> Option<char> {
        self.options
            .as_deref()?
            .iter()
            .find(|opt| is_abstention_phrase(&opt.text))
            .map(|opt| opt.letter)
    }
}

/// Classification of one model output against its record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    Abstain,
    Malformed,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::Correct,
        Verdict::Incorrect,
        Verdict::Abstain,
        Verdict::Malformed,
    ];
}

/// Scalars of the ternary accuracy reward plus the MCQ format bonus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r_correct: f64,
    pub r_wrong: f64,
    pub r_abs: f64,
    pub format_bonus: f64,
    pub mode: TaskMode,
}

impl RewardConfig {
    /// Defaults: `r_correct = 1`, `r_wrong = -1`, `format_bonus = 0.5`.
    pub fn new(mode: TaskMode, r_abs: f64) -> Self {
        Self {
            r_correct: 1.0,
            r_wrong: -1.0,
            r_abs,
            format_bonus: 0.5,
            mode,
        }
    }

    /// The intended ordering is `r_wrong <= r_abs <= r_correct`. Sweeps may
    /// probe outside it, so a violation is reported as a warning string
    /// rather than rejected.
    pub fn ordering_warning(&self) -> Option<String> {
        if self.r_wrong <= self.r_abs && self.r_abs <= self.r_correct {
            None
        } else {
            Some(format!(
                "reward ordering violated: expected r_wrong <= r_abs <= r_correct, got {} / {} / {}",
                self.r_wrong, self.r_abs, self.r_correct
            ))
        }
    }
}

/// One dataset-invariant violation found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub message: String,
}

impl Violation {
    fn new(record_id: &str, message: impl Into<String>) -> Self {
        Self {
            record_id: record_id.to_string(),
            message: message.into(),
        }
    }
}

/// Check every record against its mode's invariants.
///
/// Returns an empty report iff the dataset is well formed. Violations are
/// data, not failures: the report carries the offending record id and a
/// stable message per violated invariant, in input order.
pub fn validate_dataset(records: &[QuestionRecord]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_ids: HashSet<&str> = HashSet::new();

    for record in records {
        if !seen_ids.insert(record.id.as_str()) {
            violations.push(Violation::new(&record.id, "duplicate id"));
        }
        match record.mode {
            TaskMode::McqTagged => validate_mcq(record, &mut violations),
            TaskMode::OpenBoxed => validate_open(record, &mut violations),
        }
    }
    violations
}

fn validate_mcq(record: &QuestionRecord, violations: &mut Vec<Violation>) {
    let options = match record.options.as_deref() {
        Some(opts) if !opts.is_empty() => opts,
        _ => {
            violations.push(Violation::new(&record.id, "options missing"));
            return;
        }
    };

    for (i, opt) in options.iter().enumerate() {
        let expected = (b'A' + i as u8) as char;
        if !opt.letter.is_ascii_uppercase() || opt.letter != expected {
            violations.push(Violation::new(
                &record.id,
                "option letters not contiguous from A",
            ));
            break;
        }
    }

    let key_matches = record.answer_key.len() == 1
        && options.iter().any(|opt| {
            record
                .answer_key
                .chars()
                .next()
                .is_some_and(|k| k.eq_ignore_ascii_case(&opt.letter))
        });
    if !key_matches {
        violations.push(Violation::new(&record.id, "answer_key not among options"));
    }
}

fn validate_open(record: &QuestionRecord, violations: &mut Vec<Violation>) {
    if record.options.is_some() {
        violations.push(Violation::new(
            &record.id,
            "options not allowed in open_boxed mode",
        ));
    }
    if record.answer_key.trim().is_empty() {
        violations.push(Violation::new(&record.id, "empty answer_key"));
    }
}

/// True iff `text` reads as an abstention phrase: lowercase it, drop
/// punctuation, collapse whitespace, and compare against the lexicon.
pub fn is_abstention_phrase(text: &str) -> bool {
    let folded = fold_for_lexicon(text);
    ABSTENTION_LEXICON
        .iter()
        .any(|phrase| fold_for_lexicon(phrase) == folded)
}

fn fold_for_lexicon(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else if ch.is_alphanumeric() {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.extend(ch.to_lowercase());
        }
        // punctuation is dropped entirely
    }
    out
}
