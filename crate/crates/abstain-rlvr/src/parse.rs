//! Answer extraction and verdict classification for raw model output.
//!
//! Two formats are supported. Tagged MCQ output carries the final letter in
//! `<reasoning>...</reasoning><answer>...</answer>` spans; open-ended math
//! output carries it in the last `\boxed{...}`. Models often restate their
//! answer, so extraction always takes the *last* committed answer: the last
//! answer span, the last balanced box.
//!
//! All functions here are total: every raw string maps to exactly one
//! verdict, with `Malformed` covering output that yields no extraction.

use crate::core::{is_abstention_phrase, QuestionRecord, TaskMode, Verdict};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

static REASONING_SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<reasoning>(.*?)</reasoning>").unwrap());
static ANSWER_SPAN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<answer>(.*?)</answer>").unwrap());
static SIMPLE_FRAC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\\frac\{([A-Za-z0-9.\-]+)\}\{([A-Za-z0-9.\-]+)\}").unwrap());

/// Result of running the tag schema over one raw completion.
///
/// `format_ok` is true only when both spans exist, the reasoning span comes
/// first, and the answer span has non-empty content; it therefore implies
/// `answer_raw` is present.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuredOutput {
    pub reasoning: Option<String>,
    pub answer_raw: Option<String>,
    pub format_ok: bool,
}

/// Extract the first `<reasoning>` span and the last `<answer>` span.
///
/// An answer span whose content trims to nothing counts as no extraction.
/// Absent tags never fail; they yield `format_ok = false` with absent fields.
pub fn parse_tagged(raw: &str) -> StructuredOutput {
    let reasoning_match = REASONING_SPAN.captures(raw);
    let answer_match = ANSWER_SPAN.captures_iter(raw).last();

    let reasoning = reasoning_match
        .as_ref()
        .map(|c| c.get(1).unwrap().as_str().to_string());
    let answer_raw = answer_match.as_ref().and_then(|c| {
        let trimmed = c.get(1).unwrap().as_str().trim();
        (!trimmed.is_empty()).then(|| trimmed.to_string())
    });

    let ordered = match (&reasoning_match, &answer_match) {
        (Some(r), Some(a)) => r.get(0).unwrap().end() <= a.get(0).unwrap().start(),
        _ => false,
    };
    let format_ok = ordered && answer_raw.is_some();

    StructuredOutput {
        reasoning,
        answer_raw,
        format_ok,
    }
}

/// Content of the last balanced `\boxed{...}` in `raw`, or `None`.
///
/// Occurrences are ordered by the position of the opening token; an
/// occurrence whose braces never balance contributes no extraction.
pub fn parse_boxed(raw: &str) -> Option<String> {
    const OPEN: &str = "\\boxed{";
    let mut last = None;
    for (start, _) in raw.match_indices(OPEN) {
        let body_start = start + OPEN.len();
        let mut depth = 1usize;
        for (offset, ch) in raw[body_start..].char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        last = Some(raw[body_start..body_start + offset].to_string());
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    last
}

/// Deterministic string canonicalization for box-extracted math answers.
///
/// Applies, to a fixed point: trim; collapse whitespace runs; strip outer
/// `$` pairs; drop `\left`/`\right`; drop `\!`/`\,` spacing; `\dfrac` to
/// `\frac`; `\frac{a}{b}` to `a/b` for single-token `a`, `b`; unwrap one
/// outermost `\text{...}`; unescape `\ `; finally drop spaces that do not
/// separate two alphanumeric characters. Equivalence is string-canonical,
/// not symbolic.
pub fn normalize_math(answer: &str) -> String {
    let mut current = answer.to_string();
    // Every rewrite either shortens the string or leaves it unchanged, so
    // this terminates; the cap is a guard rail.
    for _ in 0..16 {
        let next = normalize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn normalize_once(answer: &str) -> String {
    let mut s = collapse_whitespace(answer.trim());
    s = strip_outer_dollars(&s);
    s = s.replace("\\left", "").replace("\\right", "");
    s = s.replace("\\!", "").replace("\\,", "");
    s = s.replace("\\dfrac", "\\frac");
    s = SIMPLE_FRAC.replace_all(&s, "$1/$2").into_owned();
    s = strip_text_wrapper(&s);
    s = s.replace("\\ ", " ");
    tighten_whitespace(&s)
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_run = false;
    for ch in s.chars() {
        if ch.is_whitespace() {
            if !in_run {
                out.push(' ');
                in_run = true;
            }
        } else {
            out.push(ch);
            in_run = false;
        }
    }
    out
}

fn strip_outer_dollars(s: &str) -> String {
    let mut t = s.trim();
    while t.len() >= 2 && t.starts_with('$') && t.ends_with('$') {
        t = t[1..t.len() - 1].trim();
    }
    t.to_string()
}

/// Unwrap `\text{...}` when the wrapper spans the entire string.
fn strip_text_wrapper(s: &str) -> String {
    const OPEN: &str = "\\text{";
    if !s.starts_with(OPEN) || !s.ends_with('}') {
        return s.to_string();
    }
    let body_start = OPEN.len();
    let mut depth = 1usize;
    for (offset, ch) in s[body_start..].char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    // Only an outermost wrapper counts: the matching brace
                    // must be the final character.
                    return if body_start + offset == s.len() - 1 {
                        s[body_start..body_start + offset].to_string()
                    } else {
                        s.to_string()
                    };
                }
            }
            _ => {}
        }
    }
    s.to_string()
}

/// Keep a space only when it separates two alphanumeric characters.
fn tighten_whitespace(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    for (i, &ch) in chars.iter().enumerate() {
        if ch == ' ' {
            let prev_word = i > 0 && chars[i - 1].is_alphanumeric();
            let next_word = chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
            if prev_word && next_word {
                out.push(' ');
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// True iff an extracted answer is an abstention.
///
/// In MCQ mode the designated IDK letter abstains; in either mode a
/// normalized answer matching the abstention lexicon abstains. Without an
/// `idk_letter`, MCQ abstention is only possible via the lexicon.
pub fn detect_abstention(answer: &str, mode: TaskMode, idk_letter: Option<char>) -> bool {
    if mode == TaskMode::McqTagged {
        if let Some(letter) = idk_letter {
            let trimmed = answer.trim();
            let mut chars = trimmed.chars();
            if let (Some(first), None) = (chars.next(), chars.next()) {
                if first.eq_ignore_ascii_case(&letter) {
                    return true;
                }
            }
        }
    }
    is_abstention_phrase(&normalize_math(answer))
}

/// Classify one raw output against its record.
///
/// Extraction failure is `Malformed`; abstention takes precedence over the
/// answer key; otherwise letters compare case-insensitively (MCQ) and
/// normalized strings compare exactly (open-ended).
pub fn classify(raw: &str, record: &QuestionRecord) -> (Verdict, StructuredOutput) {
    match record.mode {
        TaskMode::McqTagged => {
            let out = parse_tagged(raw);
            let verdict = match out.answer_raw.as_deref() {
                None => Verdict::Malformed,
                Some(answer) => {
                    if detect_abstention(answer, record.mode, record.idk_letter()) {
                        Verdict::Abstain
                    } else if letter_matches(answer, &record.answer_key) {
                        Verdict::Correct
                    } else {
                        Verdict::Incorrect
                    }
                }
            };
            (verdict, out)
        }
        TaskMode::OpenBoxed => {
            let extracted = parse_boxed(raw);
            let out = StructuredOutput {
                reasoning: None,
                answer_raw: extracted.clone(),
                format_ok: extracted.is_some(),
            };
            let verdict = match extracted.as_deref() {
                None => Verdict::Malformed,
                Some(answer) => {
                    if detect_abstention(answer, record.mode, None) {
                        Verdict::Abstain
                    } else if normalize_math(answer) == normalize_math(&record.answer_key) {
                        Verdict::Correct
                    } else {
                        Verdict::Incorrect
                    }
                }
            };
            (verdict, out)
        }
    }
}

fn letter_matches(answer: &str, key: &str) -> bool {
    let a = answer.trim();
    let mut a_chars = a.chars();
    let mut k_chars = key.chars();
    match (a_chars.next(), a_chars.next(), k_chars.next(), k_chars.next()) {
        (Some(a0), None, Some(k0), None) => a0.eq_ignore_ascii_case(&k0),
        _ => false,
    }
}

/// One row of a responses file: `{question_id, raw_text}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub question_id: String,
    pub raw_text: String,
}

/// One row of a verdicts file:
/// `{question_id, verdict, answer_extracted, format_ok}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub question_id: String,
    pub verdict: Verdict,
    pub answer_extracted: Option<String>,
    pub format_ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{AnswerOption, IDK_TEXT};

    fn mcq_record(key: &str, with_idk: bool) -> QuestionRecord {
        let mut options: Vec<AnswerOption> = ('A'..='D')
            .map(|letter| AnswerOption {
                letter,
                text: format!("option {letter}"),
            })
            .collect();
        if with_idk {
            options.push(AnswerOption {
                letter: 'E',
                text: IDK_TEXT.to_string(),
            });
        }
        QuestionRecord {
            id: "q".to_string(),
            prompt: "question".to_string(),
            options: Some(options),
            answer_key: key.to_string(),
            mode: TaskMode::McqTagged,
        }
    }

    fn open_record(gold: &str) -> QuestionRecord {
        QuestionRecord {
            id: "m".to_string(),
            prompt: "math".to_string(),
            options: None,
            answer_key: gold.to_string(),
            mode: TaskMode::OpenBoxed,
        }
    }

    #[test]
    fn parse_tagged_full_schema() {
        let raw = "<reasoning>The question lacks sufficient context, so a definitive \
                   choice is uncertain.</reasoning><answer>E</answer>";
        let out = parse_tagged(raw);
        assert!(out.reasoning.is_some());
        assert_eq!(out.answer_raw.as_deref(), Some("E"));
        assert!(out.format_ok);
    }

    #[test]
    fn parse_tagged_empty_input() {
        let out = parse_tagged("");
        assert_eq!(out, StructuredOutput::default());
    }

    #[test]
    fn parse_tagged_answer_without_reasoning() {
        let out = parse_tagged("<answer>B</answer>");
        assert_eq!(out.reasoning, None);
        assert_eq!(out.answer_raw.as_deref(), Some("B"));
        assert!(!out.format_ok);
    }

    #[test]
    fn parse_tagged_requires_reasoning_before_answer() {
        let out = parse_tagged("<answer>B</answer><reasoning>late</reasoning>");
        assert_eq!(out.answer_raw.as_deref(), Some("B"));
        assert!(!out.format_ok);
    }

    #[test]
    fn parse_tagged_takes_last_answer_span() {
        let out = parse_tagged(
            "<reasoning>first guess A, revised to C</reasoning>\
             <answer>A</answer> wait, actually <answer>C</answer>",
        );
        assert_eq!(out.answer_raw.as_deref(), Some("C"));
        assert!(out.format_ok);
    }

    #[test]
    fn parse_tagged_empty_answer_span_is_no_extraction() {
        let out = parse_tagged("<reasoning>hmm</reasoning><answer>  </answer>");
        assert_eq!(out.answer_raw, None);
        assert!(!out.format_ok);
    }

    #[test]
    fn parse_boxed_single_box() {
        assert_eq!(parse_boxed("answer \\boxed{42}").as_deref(), Some("42"));
    }

    #[test]
    fn parse_boxed_last_box_wins() {
        let raw = "Therefore, the maximum value is \\boxed{\\frac{3}{8}}. \
                   I'm unsure, so: \\boxed{I\\ Don't\\ Know}";
        assert_eq!(parse_boxed(raw).as_deref(), Some("I\\ Don't\\ Know"));
    }

    #[test]
    fn parse_boxed_nested_braces() {
        assert_eq!(
            parse_boxed("\\boxed{\\text{IDK}}").as_deref(),
            Some("\\text{IDK}")
        );
        assert_eq!(
            parse_boxed("\\boxed{\\frac{1}{\\sqrt{2}}}").as_deref(),
            Some("\\frac{1}{\\sqrt{2}}")
        );
    }

    #[test]
    fn parse_boxed_unbalanced_is_no_extraction() {
        assert_eq!(parse_boxed("\\boxed{42"), None);
        assert_eq!(parse_boxed("no box at all"), None);
        // A balanced earlier box still wins when the trailing one never closes.
        assert_eq!(parse_boxed("\\boxed{a} \\boxed{b").as_deref(), Some("a"));
    }

    #[test]
    fn normalize_math_frac_rewrite() {
        assert_eq!(normalize_math("\\frac{3}{8}"), "3/8");
        assert_eq!(normalize_math("\\dfrac{12}{35}"), "12/35");
        // Non-atomic numerators stay as-is.
        assert_eq!(normalize_math("\\frac{x+1}{2}"), "\\frac{x+1}{2}");
    }

    #[test]
    fn normalize_math_fixed_point_cases() {
        assert_eq!(normalize_math("42"), "42");
        assert_eq!(normalize_math(" \\left( 1/2 \\right) "), "(1/2)");
        assert_eq!(normalize_math("$\\frac{1}{2}$"), "1/2");
        assert_eq!(normalize_math("\\text{IDK}"), "IDK");
        assert_eq!(normalize_math("I\\ Don't\\ Know"), "I Don't Know");
        assert_eq!(normalize_math("\\!\\,x"), "x");
    }

    #[test]
    fn normalize_math_idempotent_on_tricky_nesting() {
        for s in [
            "\\text{$x$}",
            "$\\text{3}$",
            "\\text{\\frac{1}{2}}",
            " a  b   c ",
            "\\frac{\\frac{1}{2}}{3}",
        ] {
            let once = normalize_math(s);
            assert_eq!(normalize_math(&once), once, "not idempotent for {s:?}");
        }
    }

    #[test]
    fn detect_abstention_idk_letter() {
        assert!(detect_abstention("E", TaskMode::McqTagged, Some('E')));
        assert!(detect_abstention("e", TaskMode::McqTagged, Some('E')));
        assert!(!detect_abstention("B", TaskMode::McqTagged, Some('E')));
    }

    #[test]
    fn detect_abstention_lexicon() {
        assert!(detect_abstention("\\text{IDK}", TaskMode::OpenBoxed, None));
        assert!(detect_abstention(
            "I\\ Don't\\ Know",
            TaskMode::OpenBoxed,
            None
        ));
        // Without an IDK letter, MCQ abstention still works via the lexicon.
        assert!(detect_abstention("I don't know", TaskMode::McqTagged, None));
        assert!(!detect_abstention("E", TaskMode::McqTagged, None));
        assert!(!detect_abstention("\\frac{3}{8}", TaskMode::OpenBoxed, None));
    }

    #[test]
    fn classify_mcq_abstention_takes_precedence() {
        let record = mcq_record("B", true);
        let raw = "<reasoning>not sure</reasoning><answer>E</answer>";
        let (verdict, out) = classify(raw, &record);
        assert_eq!(verdict, Verdict::Abstain);
        assert!(out.format_ok);
    }

    #[test]
    fn classify_mcq_correct_case_insensitive() {
        let record = mcq_record("B", true);
        let (verdict, _) = classify("<reasoning>sure</reasoning><answer>b</answer>", &record);
        assert_eq!(verdict, Verdict::Correct);
    }

    #[test]
    fn classify_open_boxed_wrong_answer() {
        let record = open_record("\\frac{1}{2}");
        let (verdict, out) = classify("the maximum is \\boxed{\\frac{3}{8}}.", &record);
        assert_eq!(verdict, Verdict::Incorrect);
        assert!(out.format_ok);
    }

    #[test]
    fn classify_no_extraction_is_malformed() {
        let mcq = mcq_record("B", true);
        let open = open_record("42");
        assert_eq!(classify("hello", &mcq).0, Verdict::Malformed);
        assert_eq!(classify("hello", &open).0, Verdict::Malformed);
    }

    #[test]
    fn abstention_precedence_even_when_idk_letter_is_the_key() {
        // Impossible by dataset construction, asserted anyway.
        let record = mcq_record("E", true);
        let (verdict, _) = classify("<reasoning>...</reasoning><answer>E</answer>", &record);
        assert_eq!(verdict, Verdict::Abstain);
    }
}
