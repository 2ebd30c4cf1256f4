//! Verdict tallies, the three evaluation metrics, and report rendering.
//!
//! Accuracy is correct-over-total. Adjusted accuracy is correctness among
//! attempted answers; abstention recall is the fraction of would-be-wrong
//! responses converted to abstentions. Malformed output joins the failed
//! side of both denominators: an unverifiable answer is a failed answer.
//! Empty denominators yield [`Metric::NotApplicable`] rather than a fake 0
//! or 1, so full-abstention rows render honestly.

use crate::core::Verdict;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Verdict tallies feeding the metrics. `n_total` is always the sum of the
/// four classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub n_correct: u64,
    pub n_incorrect: u64,
    pub n_idk: u64,
    pub n_malformed: u64,
    pub n_total: u64,
}

impl EvalCounts {
    pub fn new(n_correct: u64, n_incorrect: u64, n_idk: u64, n_malformed: u64) -> Self {
        Self {
            n_correct,
            n_incorrect,
            n_idk,
            n_malformed,
            n_total: n_correct + n_incorrect + n_idk + n_malformed,
        }
    }

    /// Field-wise addition; tallies from disjoint shards merge exactly.
    pub fn merge(&self, other: &EvalCounts) -> EvalCounts {
        EvalCounts::new(
            self.n_correct + other.n_correct,
            self.n_incorrect + other.n_incorrect,
            self.n_idk + other.n_idk,
            self.n_malformed + other.n_malformed,
        )
    }
}

/// Count verdicts per class.
pub fn tally(verdicts: &[Verdict]) -> EvalCounts {
    let mut c = 0;
    let mut i = 0;
    let mut k = 0;
    let mut m = 0;
    for verdict in verdicts {
        match verdict {
            Verdict::Correct => c += 1,
            Verdict::Incorrect => i += 1,
            Verdict::Abstain => k += 1,
            Verdict::Malformed => m += 1,
        }
    }
    EvalCounts::new(c, i, k, m)
}

/// A metric value, or the honest sentinel for an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Value(f64),
    NotApplicable,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            Metric::NotApplicable => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Value(v) => write!(f, "{v:.3}"),
            Metric::NotApplicable => write!(f, "n/a"),
        }
    }
}

/// Correct over total samples. Errors on an empty evaluation.
pub fn accuracy(counts: &EvalCounts) -> Result<f64> {
    if counts.n_total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(counts.n_correct as f64 / counts.n_total as f64)
}

/// Correct among attempted (non-abstained) answers; malformed counts as
/// attempted-and-failed. Not applicable under full abstention.
pub fn adjusted_accuracy(counts: &EvalCounts) -> Metric {
    let denom = counts.n_correct + counts.n_incorrect + counts.n_malformed;
    if denom == 0 {
        Metric::NotApplicable
    } else {
        Metric::Value(counts.n_correct as f64 / denom as f64)
    }
}

/// IDK among would-be-failures (IDK + incorrect + malformed).
pub fn abstention_recall(counts: &EvalCounts) -> Metric {
    let denom = counts.n_idk + counts.n_incorrect + counts.n_malformed;
    if denom == 0 {
        Metric::NotApplicable
    } else {
        Metric::Value(counts.n_idk as f64 / denom as f64)
    }
}

/// A rendered report: a human-readable table plus CSV with columns
/// `label,correct_pct,incorrect_pct,idk_pct,malformed_pct,accuracy,
/// adjusted_accuracy,abstention_recall` (empty cells for not-applicable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub table: String,
    pub csv: String,
}

/// Render one row per label. The table mirrors the three-column
/// correct/incorrect/IDK layout; the CSV additionally carries the malformed
/// percentage. Percentages are rounded to one decimal, so a row sums to
/// 100.0 only up to rounding.
pub fn render_report(rows: &[(String, EvalCounts)]) -> RenderedReport {
    let mut table = String::from(
        "label                    correct%  incorrect%  idk%  | accuracy  adjusted  abst-recall\n",
    );
    let mut csv = String::from(
        "label,correct_pct,incorrect_pct,idk_pct,malformed_pct,accuracy,adjusted_accuracy,abstention_recall\n",
    );

    for (label, counts) in rows {
        let pct = |x: u64| {
            if counts.n_total == 0 {
                0.0
            } else {
                100.0 * x as f64 / counts.n_total as f64
            }
        };
        let acc = match accuracy(counts) {
            Ok(v) => Metric::Value(v),
            Err(_) => Metric::NotApplicable,
        };
        let adj = adjusted_accuracy(counts);
        let rec = abstention_recall(counts);

        table.push_str(&format!(
            "{label:<24} {c:.1} {i:.1} {k:.1} | acc {acc} adjacc {adj} absrec {rec}\n",
            c = pct(counts.n_correct),
            i = pct(counts.n_incorrect),
            k = pct(counts.n_idk),
        ));
        csv.push_str(&format!(
            "{},{:.1},{:.1},{:.1},{:.1},{},{},{}\n",
            csv_escape(label),
            pct(counts.n_correct),
            pct(counts.n_incorrect),
            pct(counts.n_idk),
            pct(counts.n_malformed),
            csv_metric(acc),
            csv_metric(adj),
            csv_metric(rec),
        ));
    }

    RenderedReport { table, csv }
}

fn csv_metric(metric: Metric) -> String {
    match metric {
        Metric::Value(v) => format!("{v:.4}"),
        Metric::NotApplicable => String::new(),
    }
}

fn csv_escape(label: &str) -> String {
    if label.contains(',') || label.contains('"') || label.contains('\n') {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_counts_each_class() {
        let counts = tally(&[Verdict::Correct, Verdict::Abstain, Verdict::Incorrect]);
        assert_eq!(counts, EvalCounts::new(1, 1, 1, 0));
        assert_eq!(counts.n_total, 3);
    }

    #[test]
    fn tally_empty_is_all_zero() {
        assert_eq!(tally(&[]), EvalCounts::default());
    }

    #[test]
    fn accuracy_matches_base_model_row() {
        // 46.8 / 53.2 / 0 of 100 samples.
        let counts = EvalCounts::new(468, 532, 0, 0);
        assert!((accuracy(&counts).unwrap() - 0.468).abs() < 1e-12);
    }

    #[test]
    fn accuracy_with_malformed_residual() {
        let counts = EvalCounts::new(480, 103, 410, 7);
        assert!((accuracy(&counts).unwrap() - 0.480).abs() < 1e-12);
    }

    #[test]
    fn accuracy_all_correct_is_one() {
        assert_eq!(accuracy(&EvalCounts::new(5, 0, 0, 0)).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_errors_on_empty() {
        assert!(matches!(
            accuracy(&EvalCounts::default()),
            Err(Error::EmptyEvaluation)
        ));
    }

    #[test]
    fn adjusted_accuracy_spot_values() {
        // 46.4 / (46.4 + 46.4) = 0.500
        let counts = EvalCounts::new(4640, 4640, 700, 0);
        assert!((adjusted_accuracy(&counts).value().unwrap() - 0.500).abs() < 1e-6);
        // 48.0 / (48.0 + 10.3) = 0.8233
        let counts = EvalCounts::new(4800, 1030, 4100, 0);
        assert!((adjusted_accuracy(&counts).value().unwrap() - 0.8233).abs() < 1e-4);
    }

    #[test]
    fn adjusted_accuracy_full_abstention_is_not_applicable() {
        let counts = EvalCounts::new(0, 0, 100, 0);
        assert_eq!(adjusted_accuracy(&counts), Metric::NotApplicable);
    }

    #[test]
    fn abstention_recall_spot_values() {
        // 41.0 / (41.0 + 10.3) = 0.7992
        let counts = EvalCounts::new(4800, 1030, 4100, 0);
        assert!((abstention_recall(&counts).value().unwrap() - 0.7992).abs() < 1e-4);
        // 7.0 / (7.0 + 46.4) = 0.1311
        let counts = EvalCounts::new(4640, 4640, 700, 0);
        assert!((abstention_recall(&counts).value().unwrap() - 0.1311).abs() < 1e-4);
        // Zero incorrect, some idk.
        let counts = EvalCounts::new(10, 0, 5, 0);
        assert_eq!(abstention_recall(&counts), Metric::Value(1.0));
    }

    #[test]
    fn merge_is_fieldwise_addition() {
        let a = EvalCounts::new(1, 2, 3, 4);
        let b = EvalCounts::new(10, 20, 30, 40);
        assert_eq!(a.merge(&b), EvalCounts::new(11, 22, 33, 44));
    }

    #[test]
    fn render_single_row() {
        let rows = vec![("run".to_string(), EvalCounts::new(50, 30, 20, 0))];
        let report = render_report(&rows);
        assert!(report
            .table
            .contains("50.0 30.0 20.0 | acc 0.500 adjacc 0.625 absrec 0.400"));
        assert!(report
            .csv
            .contains("run,50.0,30.0,20.0,0.0,0.5000,0.6250,0.4000"));
    }

    #[test]
    fn render_empty_rows_is_header_only() {
        let report = render_report(&[]);
        assert_eq!(report.table.lines().count(), 1);
        assert_eq!(report.csv.lines().count(), 1);
    }

    #[test]
    fn render_not_applicable_cells_are_empty_in_csv() {
        let rows = vec![("all-idk".to_string(), EvalCounts::new(0, 0, 100, 0))];
        let report = render_report(&rows);
        assert!(report.csv.contains("all-idk,0.0,0.0,100.0,0.0,0.0000,,1.0000"));
        assert!(report.table.contains("adjacc n/a"));
    }

    #[test]
    fn render_quotes_labels_with_commas() {
        let rows = vec![("a,b".to_string(), EvalCounts::new(1, 0, 0, 0))];
        let report = render_report(&rows);
        assert!(report.csv.contains("\"a,b\""));
    }
}
