//! Dataset variants for abstention training: IDK option injection, random
//! abstention labels, and R-Tuning labels keyed to base-model verdicts.

use crate::core::{AnswerOption, QuestionRecord, TaskMode, Verdict, IDK_TEXT};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// What an SFT label teaches: answer with the key, or abstain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SftTarget {
    AnswerKey,
    Abstain,
}

/// One SFT label: `{question_id, target, rendered_target}`.
///
/// An abstain target renders as the record's IDK letter in MCQ mode (falling
/// back to the abstention phrase when the dataset was not augmented) and as
/// the abstention phrase in open-ended mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub question_id: String,
    pub target: SftTarget,
    pub rendered_target: String,
}

/// Append an "I Don't Know" option on the next free letter (A-D becomes E).
///
/// Idempotent: a record that already carries an abstention option comes back
/// unchanged. Open-ended records are not applicable.
pub fn inject_idk_option(record: &QuestionRecord) -> Result<QuestionRecord> {
    if record.mode != TaskMode::McqTagged {
        return Err(Error::InjectNotApplicable(record.id.clone()));
    }
    if record.idk_letter().is_some() {
        return Ok(record.clone());
    }
    let mut out = record.clone();
    let options = out.options.get_or_insert_with(Vec::new);
    let next = (b'A' + options.len() as u8) as char;
    if next > 'Z' {
        return Err(Error::NoFreeLetter(record.id.clone()));
    }
    options.push(AnswerOption {
        letter: next,
        text: IDK_TEXT.to_string(),
    });
    Ok(out)
}

/// Exact-count selection: `round(ratio * n)` indices, uniform without
/// replacement under the caller's RNG. Exact by construction, not in
/// expectation.
pub(crate) fn select_abstain_indices(
    n: usize,
    ratio: f64,
    rng: &mut impl Rng,
) -> BTreeSet<usize> {
    let count = ((ratio * n as f64).round() as usize).min(n);
    rand::seq::index::sample(rng, n, count).into_iter().collect()
}

/// Random-abstention SFT labels: exactly `round(ratio * N)` records get an
/// abstain target, the rest keep their answer key. Deterministic per seed.
pub fn make_sft_random(
    records: &[QuestionRecord],
    ratio: f64,
    seed: u64,
) -> Result<Vec<SftRecord>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::RatioOutOfRange(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let abstain = select_abstain_indices(records.len(), ratio, &mut rng);
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let target = if abstain.contains(&i) {
                SftTarget::Abstain
            } else {
                SftTarget::AnswerKey
            };
            render_label(record, target)
        })
        .collect())
}

/// R-Tuning SFT labels: abstain exactly where the base model did not answer
/// correctly. A base-model abstention stays an abstention.
pub fn make_sft_rtuning(
    records: &[QuestionRecord],
    base_verdicts: &HashMap<String, Verdict>,
) -> Result<Vec<SftRecord>> {
    let missing: Vec<String> = records
        .iter()
        .filter(|r| !base_verdicts.contains_key(&r.id))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVerdicts(missing));
    }
    Ok(records
        .iter()
        .map(|record| {
            let target = match base_verdicts[&record.id] {
                Verdict::Correct => SftTarget::AnswerKey,
                Verdict::Incorrect | Verdict::Malformed | Verdict::Abstain => SftTarget::Abstain,
            };
            render_label(record, target)
        })
        .collect())
}

fn render_label(record: &QuestionRecord, target: SftTarget) -> SftRecord {
    let rendered_target = match target {
        SftTarget::AnswerKey => record.answer_key.clone(),
        SftTarget::Abstain => match record.mode {
            TaskMode::McqTagged => record
                .idk_letter()
                .map(String::from)
                .unwrap_or_else(|| IDK_TEXT.to_string()),
            TaskMode::OpenBoxed => IDK_TEXT.to_string(),
        },
    };
    SftRecord {
        question_id: record.id.clone(),
        target,
        rendered_target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mcq_record(id: &str, n_options: usize, key: &str) -> QuestionRecord {
        QuestionRecord {
            id: id.to_string(),
            prompt: "q".to_string(),
            options: Some(
                (0..n_options)
                    .map(|i| AnswerOption {
                        letter: (b'A' + i as u8) as char,
                        text: format!("option {i}"),
                    })
                    .collect(),
            ),
            answer_key: key.to_string(),
            mode: TaskMode::McqTagged,
        }
    }

    fn open_record(id: &str, gold: &str) -> QuestionRecord {
        QuestionRecord {
            id: id.to_string(),
            prompt: "math".to_string(),
            options: None,
            answer_key: gold.to_string(),
            mode: TaskMode::OpenBoxed,
        }
    }

    #[test]
    fn inject_adds_e_option_and_keeps_key() {
        let record = mcq_record("q1", 4, "B");
        let injected = inject_idk_option(&record).unwrap();
        let options = injected.options.as_deref().unwrap();
        assert_eq!(options.len(), 5);
        assert_eq!(options[4].letter, 'E');
        assert_eq!(options[4].text, IDK_TEXT);
        assert_eq!(injected.answer_key, "B");
        assert_eq!(&options[..4], record.options.as_deref().unwrap());
    }

    #[test]
    fn inject_is_idempotent() {
        let record = mcq_record("q1", 4, "B");
        let once = inject_idk_option(&record).unwrap();
        let twice = inject_idk_option(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn inject_rejects_open_boxed() {
        let err = inject_idk_option(&open_record("m1", "42")).unwrap_err();
        assert!(err.to_string().contains("not applicable"));
    }

    #[test]
    fn sft_random_exact_count() {
        let records: Vec<_> = (0..1000)
            .map(|i| mcq_record(&format!("q{i}"), 5, "A"))
            .collect();
        let labels = make_sft_random(&records, 0.3, 7).unwrap();
        let abstains = labels
            .iter()
            .filter(|l| l.target == SftTarget::Abstain)
            .count();
        assert_eq!(abstains, 300);
    }

    #[test]
    fn sft_random_zero_ratio() {
        let records: Vec<_> = (0..10)
            .map(|i| mcq_record(&format!("q{i}"), 5, "A"))
            .collect();
        let labels = make_sft_random(&records, 0.0, 7).unwrap();
        assert!(labels.iter().all(|l| l.target == SftTarget::AnswerKey));
    }

    #[test]
    fn sft_random_deterministic_per_seed() {
        let records: Vec<_> = (0..50)
            .map(|i| mcq_record(&format!("q{i}"), 5, "A"))
            .collect();
        let a = make_sft_random(&records, 0.4, 42).unwrap();
        let b = make_sft_random(&records, 0.4, 42).unwrap();
        let c = make_sft_random(&records, 0.4, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sft_random_rejects_bad_ratio() {
        let records = vec![mcq_record("q0", 5, "A")];
        assert!(matches!(
            make_sft_random(&records, 1.5, 0),
            Err(Error::RatioOutOfRange(_))
        ));
        assert!(matches!(
            make_sft_random(&records, -0.1, 0),
            Err(Error::RatioOutOfRange(_))
        ));
    }

    #[test]
    fn rtuning_abstains_exactly_on_non_correct() {
        let records: Vec<_> = (0..4)
            .map(|i| mcq_record(&format!("q{i}"), 5, "A"))
            .collect();
        let verdicts: HashMap<String, Verdict> = [
            ("q0".to_string(), Verdict::Correct),
            ("q1".to_string(), Verdict::Incorrect),
            ("q2".to_string(), Verdict::Malformed),
            ("q3".to_string(), Verdict::Abstain),
        ]
        .into();
        let labels = make_sft_rtuning(&records, &verdicts).unwrap();
        let targets: Vec<_> = labels.iter().map(|l| l.target).collect();
        assert_eq!(
            targets,
            vec![
                SftTarget::AnswerKey,
                SftTarget::Abstain,
                SftTarget::Abstain,
                SftTarget::Abstain,
            ]
        );
    }

    #[test]
    fn rtuning_reports_missing_ids() {
        let records: Vec<_> = (0..3)
            .map(|i| mcq_record(&format!("q{i}"), 5, "A"))
            .collect();
        let verdicts: HashMap<String, Verdict> =
            [("q1".to_string(), Verdict::Correct)].into();
        match make_sft_rtuning(&records, &verdicts) {
            Err(Error::MissingVerdicts(ids)) => assert_eq!(ids, vec!["q0", "q2"]),
            other => panic!("expected MissingVerdicts, got {other:?}"),
        }
    }

    #[test]
    fn abstain_renders_idk_letter_or_phrase() {
        let augmented = inject_idk_option(&mcq_record("q0", 4, "B")).unwrap();
        let verdicts: HashMap<String, Verdict> =
            [("q0".to_string(), Verdict::Incorrect)].into();
        let labels = make_sft_rtuning(&[augmented], &verdicts).unwrap();
        assert_eq!(labels[0].rendered_target, "E");

        let open = open_record("q0", "42");
        let labels = make_sft_rtuning(&[open], &verdicts).unwrap();
        assert_eq!(labels[0].rendered_target, IDK_TEXT);
    }
}
