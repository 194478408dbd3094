//! Word error rate, minimum-edit alignment, and per-digit verdict tables.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("reference word count is zero")]
    ZeroReference,
    #[error("no results to tabulate")]
    EmptyResults,
}

pub type Result<T> = std::result::Result<T, ScoreError>;

/// Counts from a minimum-edit alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Align hypothesis words against reference words with unit costs,
/// minimizing S + D + I. The backtrace is deterministic: a substitution (or
/// match) is taken whenever it lies on a minimal path, insertion is
/// preferred over deletion otherwise, and an insertion/deletion tie is
/// resolved toward the side with more words remaining so that swapping the
/// arguments swaps D and I and leaves S unchanged.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let r = reference.len();
    let h = hypothesis.len();
    let mut dp = vec![vec![0usize; h + 1]; r + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i; // deletions only
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j; // insertions only
    }
    for i in 1..=r {
        for j in 1..=h {
            let sub = dp[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = dp[i][j - 1] + 1;
            let del = dp[i - 1][j] + 1;
            dp[i][j] = sub.min(ins).min(del);
        }
    }

    let mut counts = EditCounts {
        substitutions: 0,
        deletions: 0,
        insertions: 0,
    };
    let (mut i, mut j) = (r, h);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if dp[i][j] == dp[i - 1][j - 1] + sub_cost {
                if sub_cost == 1 {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        let ins_ok = j > 0 && dp[i][j] == dp[i][j - 1] + 1;
        let del_ok = i > 0 && dp[i][j] == dp[i - 1][j] + 1;
        let take_ins = match (ins_ok, del_ok) {
            (true, false) => true,
            (false, true) => false,
            // Both minimal: consume the longer remainder first.
            (true, true) => j >= i,
            (false, false) => unreachable!("dp cell has a minimal predecessor"),
        };
        if take_ins {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// `(S + D + I) / N`. May exceed 1 when insertions dominate.
pub fn wer(substitutions: usize, deletions: usize, insertions: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(ScoreError::ZeroReference);
    }
    Ok((substitutions + deletions + insertions) as f64 / n as f64)
}

/// Per-digit verdict in the condition tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    InCorrect,
}

impl Verdict {
    /// The tables print "Correct" / "In-Correct".
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Correct => "Correct",
            Verdict::InCorrect => "In-Correct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitStats {
    pub trials: usize,
    pub correct: usize,
    pub verdict: Verdict,
}

impl DigitStats {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.correct as f64 / self.trials as f64
        }
    }
}

/// Utterance-level evaluation of an isolated-word test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference word count (one word per utterance here).
    pub reference_words: usize,
    pub wer: f64,
    /// Fraction of utterances recognized correctly, in percent.
    pub accuracy_pct: f64,
    /// Digit -> trial statistics and binary verdict.
    pub per_digit: BTreeMap<String, DigitStats>,
    /// A digit is Correct when its trial success rate reaches this value.
    pub verdict_threshold: f64,
    /// Table arithmetic: Correct verdicts / digit count, in percent.
    pub percentage: f64,
}

pub const DEFAULT_VERDICT_THRESHOLD: f64 = 0.5;

/// Tally per-utterance (true digit, predicted digit) pairs into the
/// table form: per-digit trials, correct counts, a binary verdict at
/// `threshold`, and the "Percentage" row over digit verdicts. Every wrong
/// isolated-word prediction counts as one substitution.
pub fn tabulate(results: &[(String, String)], threshold: f64) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(ScoreError::EmptyResults);
    }
    let mut per_digit: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut correct_total = 0usize;
    for (truth, predicted) in results {
        let entry = per_digit.entry(truth.clone()).or_insert((0, 0));
        entry.0 += 1;
        if truth == predicted {
            entry.1 += 1;
            correct_total += 1;
        }
    }
    let substitutions = results.len() - correct_total;
    let n = results.len();

    let per_digit: BTreeMap<String, DigitStats> = per_digit
        .into_iter()
        .map(|(digit, (trials, correct))| {
            let rate = correct as f64 / trials as f64;
            let verdict = if rate >= threshold {
                Verdict::Correct
            } else {
                Verdict::InCorrect
            };
            (
                digit,
                DigitStats {
                    trials,
                    correct,
                    verdict,
                },
            )
        })
        .collect();

    let correct_verdicts = per_digit
        .values()
        .filter(|s| s.verdict == Verdict::Correct)
        .count();
    Ok(EvalReport {
        substitutions,
        deletions: 0,
        insertions: 0,
        reference_words: n,
        wer: wer(substitutions, 0, 0, n)?,
        accuracy_pct: 100.0 * correct_total as f64 / n as f64,
        percentage: 100.0 * correct_verdicts as f64 / per_digit.len() as f64,
        per_digit,
        verdict_threshold: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    /// Exhaustive alignment enumeration: minimum total cost over every
    /// interleaving of substitutions, deletions and insertions.
    fn oracle_cost<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
        if reference.is_empty() {
            return hypothesis.len();
        }
        if hypothesis.is_empty() {
            return reference.len();
        }
        let sub = oracle_cost(&reference[1..], &hypothesis[1..])
            + usize::from(reference[0] != hypothesis[0]);
        let del = oracle_cost(&reference[1..], hypothesis) + 1;
        let ins = oracle_cost(reference, &hypothesis[1..]) + 1;
        sub.min(del).min(ins)
    }

    #[test]
    fn identical_sequences_align_cleanly() {
        let c = align(&words("six"), &words("six"));
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 0, 0));
    }

    #[test]
    fn single_substitution() {
        let c = align(&words("one two three"), &words("one tree three"));
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 0));
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let c = align(&words("five"), &[]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 1, 0));
        let c = align(&words("one two three four"), &[]);
        assert_eq!(c.deletions, 4);
    }

    #[test]
    fn empty_reference_is_all_insertions() {
        let c = align(&[] as &[String], &words("nine eight"));
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 0, 2));
    }

    #[test]
    fn alignment_matches_exhaustive_oracle() {
        let alphabet = ["a", "b", "c", "d"];
        let mut rng = Rng::new(64);
        for _ in 0..4000 {
            let rl = rng.below(7) as usize;
            let hl = rng.below(7) as usize;
            let reference: Vec<&str> =
                (0..rl).map(|_| alphabet[rng.below(4) as usize]).collect();
            let hypothesis: Vec<&str> =
                (0..hl).map(|_| alphabet[rng.below(4) as usize]).collect();
            let counts = align(&reference, &hypothesis);
            let oracle = oracle_cost(&reference, &hypothesis);
            assert_eq!(
                counts.total(),
                oracle,
                "ref {reference:?} hyp {hypothesis:?}"
            );
        }
    }

    #[test]
    fn alignment_cost_is_symmetric_with_swapped_roles() {
        let mut rng = Rng::new(65);
        let alphabet = ["p", "q", "r", "s"];
        for _ in 0..500 {
            let a: Vec<&str> = (0..rng.below(8) as usize)
                .map(|_| alphabet[rng.below(4) as usize])
                .collect();
            let b: Vec<&str> = (0..rng.below(8) as usize)
                .map(|_| alphabet[rng.below(4) as usize])
                .collect();
            let fwd = align(&a, &b);
            let rev = align(&b, &a);
            assert_eq!(fwd.total(), rev.total());
            assert_eq!(fwd.substitutions, rev.substitutions);
            assert_eq!(fwd.deletions, rev.insertions);
            assert_eq!(fwd.insertions, rev.deletions);
        }
    }

    #[test]
    fn alignment_satisfies_triangle_inequality() {
        let mut rng = Rng::new(66);
        let alphabet = ["w", "x", "y", "z"];
        let seq = |rng: &mut Rng| -> Vec<&str> {
            (0..rng.below(7) as usize)
                .map(|_| alphabet[rng.below(4) as usize])
                .collect()
        };
        for _ in 0..500 {
            let a = seq(&mut rng);
            let b = seq(&mut rng);
            let c = seq(&mut rng);
            let ac = align(&a, &c).total();
            let ab = align(&a, &b).total();
            let bc = align(&b, &c).total();
            assert!(ac <= ab + bc);
        }
    }

    #[test]
    fn wer_formula_cases() {
        assert_eq!(wer(0, 0, 0, 5).unwrap(), 0.0);
        assert!((wer(1, 0, 0, 3).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(wer(1, 1, 1, 1).unwrap(), 3.0);
        assert!(matches!(wer(1, 0, 0, 0), Err(ScoreError::ZeroReference)));
    }

    fn results_with(correct_per_digit: &[(&str, usize, usize)]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for &(digit, trials, correct) in correct_per_digit {
            for i in 0..trials {
                let predicted = if i < correct { digit } else { "WRONG" };
                out.push((digit.to_string(), predicted.to_string()));
            }
        }
        out
    }

    #[test]
    fn tabulate_nine_of_ten_digits_is_ninety_percent() {
        let mut spec: Vec<(&str, usize, usize)> = crate::DIGITS
            .iter()
            .map(|&d| (d, 10usize, 10usize))
            .collect();
        spec[2] = ("three", 10, 2); // below threshold -> In-Correct
        let report = tabulate(&results_with(&spec), DEFAULT_VERDICT_THRESHOLD).unwrap();
        assert_eq!(report.percentage, 90.0);
        assert_eq!(report.per_digit["three"].verdict, Verdict::InCorrect);
        assert_eq!(report.per_digit["one"].verdict, Verdict::Correct);
    }

    #[test]
    fn tabulate_all_correct() {
        let spec: Vec<(&str, usize, usize)> =
            crate::DIGITS.iter().map(|&d| (d, 5usize, 5usize)).collect();
        let report = tabulate(&results_with(&spec), DEFAULT_VERDICT_THRESHOLD).unwrap();
        assert_eq!(report.percentage, 100.0);
        assert_eq!(report.accuracy_pct, 100.0);
        assert_eq!(report.wer, 0.0);
        assert_eq!(report.substitutions, 0);
    }

    #[test]
    fn tabulate_threshold_rule() {
        let report = tabulate(
            &results_with(&[("zero", 100, 37)]),
            DEFAULT_VERDICT_THRESHOLD,
        )
        .unwrap();
        assert_eq!(report.per_digit["zero"].verdict, Verdict::InCorrect);
        assert_eq!(report.per_digit["zero"].trials, 100);
        assert_eq!(report.per_digit["zero"].correct, 37);
    }

    #[test]
    fn tabulate_percentage_is_ten_times_correct_verdicts() {
        let mut rng = Rng::new(70);
        for _ in 0..20 {
            let spec: Vec<(&str, usize, usize)> = crate::DIGITS
                .iter()
                .map(|&d| {
                    let trials = 4 + rng.below(8) as usize;
                    let correct = rng.below(trials as u64 + 1) as usize;
                    (d, trials, correct)
                })
                .collect();
            let report = tabulate(&results_with(&spec), DEFAULT_VERDICT_THRESHOLD).unwrap();
            let correct_verdicts = report
                .per_digit
                .values()
                .filter(|s| s.verdict == Verdict::Correct)
                .count();
            assert_eq!(report.percentage, 10.0 * correct_verdicts as f64);
        }
    }

    #[test]
    fn tabulate_rejects_empty() {
        assert!(matches!(tabulate(&[], 0.5), Err(ScoreError::EmptyResults)));
    }

    #[test]
    fn wer_exceeding_one_is_reported_as_is() {
        // 1 reference word, hypothesis with 3 extra words.
        let c = align(&words("one"), &words("two three four five"));
        let w = wer(c.substitutions, c.deletions, c.insertions, 1).unwrap();
        assert!(w > 1.0);
    }
}
