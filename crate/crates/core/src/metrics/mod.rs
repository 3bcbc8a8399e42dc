//! Automatic response metrics.
//!
//! BLEU is corpus-level with clipped n-gram precision. An order with no
//! matches contributes `1e-9` as its numerator so short responses keep a
//! nonzero score; an order for which no candidate has any n-gram is left out
//! of the geometric mean. ROUGE-L is the per-instance LCS F-measure with
//! `β = 1.2`, averaged over instances. Both are reported in percent.

mod report;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use report::{
    ablation_table, bucket_rows, partition_counts, AblationRow, Bucket, BucketRow, EvalRecord, EvalReport, Outcome,
    Summary,
};

use crate::error::{bail, Result};
use crate::math;

pub const BLEU_EPSILON: f64 = 1e-9;
pub const ROUGE_BETA: f64 = 1.2;

fn check_aligned<A, B>(candidates: &[A], references: &[B]) -> Result<()> {
    if candidates.len() != references.len() {
        bail!(
            Contract,
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        );
    }
    if candidates.is_empty() {
        bail!(Domain, "no responses to score");
    }
    Ok(())
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU up to `max_n`-grams, in percent.
pub fn bleu<T: Ord, C: AsRef<[T]>, R: AsRef<[T]>>(candidates: &[C], references: &[R], max_n: usize) -> Result<f64> {
    check_aligned(candidates, references)?;
    if max_n == 0 {
        bail!(Config, "BLEU needs max_n >= 1");
    }
    let mut matches = alloc::vec![0usize; max_n];
    let mut totals = alloc::vec![0usize; max_n];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        let (cand, reference) = (cand.as_ref(), reference.as_ref());
        c_len += cand.len();
        r_len += reference.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(cand, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    if c_len == 0 {
        return Ok(if r_len == 0 { 100.0 } else { 0.0 });
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for (&m, &t) in matches.iter().zip(&totals) {
        if t == 0 {
            continue;
        }
        let numerator = if m == 0 { BLEU_EPSILON } else { m as f64 };
        log_sum += math::ln(numerator / t as f64);
        orders += 1;
    }
    let brevity = if c_len > r_len {
        1.0
    } else {
        math::exp(1.0 - r_len as f64 / c_len as f64)
    };
    Ok(100.0 * brevity * math::exp(log_sum / orders as f64))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = prev.clone();
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure of one pair in `[0, 1]`. Two empty sequences score 1.
pub fn rouge_l_pair<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean per-instance ROUGE-L F, in percent.
pub fn rouge_l<T: PartialEq, C: AsRef<[T]>, R: AsRef<[T]>>(candidates: &[C], references: &[R]) -> Result<f64> {
    check_aligned(candidates, references)?;
    let total: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| rouge_l_pair(c.as_ref(), r.as_ref()))
        .sum();
    Ok(100.0 * total / candidates.len() as f64)
}

/// Mean number of tokens per response.
pub fn avg_length<T, C: AsRef<[T]>>(candidates: &[C]) -> Result<f64> {
    if candidates.is_empty() {
        bail!(Domain, "average length of an empty list");
    }
    let total: usize = candidates.iter().map(|c| c.as_ref().len()).sum();
    Ok(total as f64 / candidates.len() as f64)
}

/// Lowercase word list standing in for a part-of-speech tagger.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NounLexicon {
    words: BTreeSet<String>,
}

impl NounLexicon {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        NounLexicon {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn count<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        tokens.iter().filter(|t| self.contains(t.as_ref())).count()
    }
}

/// Mean number of lexicon nouns per response.
pub fn noun_count<S: AsRef<str>, C: AsRef<[S]>>(candidates: &[C], lexicon: &NounLexicon) -> Result<f64> {
    if candidates.is_empty() {
        bail!(Domain, "noun count of an empty list");
    }
    let total: usize = candidates.iter().map(|c| lexicon.count(c.as_ref())).sum();
    Ok(total as f64 / candidates.len() as f64)
}

/// Number of reference positions the candidate reproduces exactly.
pub fn position_matches<T: PartialEq>(candidate: &[T], reference: &[T]) -> usize {
    candidate.iter().zip(reference).filter(|(c, r)| c == r).count()
}

/// Splits a whitespace-joined line back into tokens.
pub fn split_tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(ToString::to_string).collect()
}
