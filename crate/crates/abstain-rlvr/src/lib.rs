//! Abstention-aware verifiable rewards for question answering.
//!
//! This crate scores model output against ground truth with a ternary
//! reward (`r_correct`, `r_abs`, `r_wrong`) that treats an explicit
//! "I don't know" as a first-class action, and ships everything needed to
//! study the resulting abstention/accuracy trade-off at desk scale:
//!
//! - [`core`]: shared domain types (records, verdicts, reward config) and
//!   dataset validation.
//! - [`parse`]: answer extraction from tagged MCQ output or `\boxed{...}`
//!   math output, abstention detection, and verdict classification.
//! - [`reward`]: the ternary accuracy reward, the MCQ format bonus, and
//!   batch scoring.
//! - [`dataxform`]: IDK option injection and SFT abstention labels (random
//!   ratio and R-Tuning).
//! - [`grposim`]: a GRPO simulator over synthetic softmax-policy tasks that
//!   reproduces the abstention threshold, the reward-sweep trade-off,
//!   exploration failure, and the SFT rescue.
//! - [`evalmetrics`]: accuracy, adjusted accuracy, abstention recall, and
//!   report rendering.
//!
//! File interfaces are JSON-lines throughout; see each module's row types.

pub mod core;
pub mod dataxform;
pub mod error;
pub mod evalmetrics;
pub mod grposim;
pub mod io;
pub mod parse;
pub mod reward;

pub use crate::core::{
    validate_dataset, AnswerOption, QuestionRecord, RewardConfig, TaskMode, Verdict, Violation,
};
pub use crate::error::{Error, Result};
pub use crate::parse::{classify, StructuredOutput};
pub use crate::reward::{accuracy_reward, format_reward, RewardBreakdown};
