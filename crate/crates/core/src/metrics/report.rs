use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{avg_length, bleu, position_matches, rouge_l_pair, NounLexicon};
use crate::error::{bail, Result};

/// What the evaluator knows about one generated response.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub candidate: Vec<String>,
    pub reference: Vec<String>,
    /// The decoder ran with an empty addressee memory.
    pub empty_memory: bool,
    /// Whether predicted roles matched the gold ones (joint mode only).
    pub speaker_correct: Option<bool>,
    pub addressee_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub candidate: Vec<String>,
    pub reference: Vec<String>,
    pub length: usize,
    pub nouns: usize,
    /// Sentence ROUGE-L F in percent.
    pub rouge_l: f64,
    /// Reference positions reproduced exactly.
    pub token_matches: usize,
    pub payload_correct: Option<bool>,
    pub empty_memory: bool,
    pub speaker_correct: Option<bool>,
    pub addressee_correct: Option<bool>,
}

/// Aggregate metrics over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub bleu: f64,
    pub rouge_l: f64,
    pub avg_length: f64,
    pub avg_nouns: f64,
    /// Fraction of reference tokens matched position by position.
    pub token_accuracy: f64,
    /// Fraction of responses whose payload slot is right (synthetic corpora).
    pub payload_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: Summary,
    /// Indices of instances decoded with an empty addressee memory.
    pub empty_memory: Vec<usize>,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    /// Scores `outcomes`. With `payload_position` set, a response counts as
    /// payload-correct when its token at that position equals the reference's.
    pub fn evaluate(outcomes: &[Outcome], lexicon: &NounLexicon, payload_position: Option<usize>) -> Result<Self> {
        let records = outcomes
            .iter()
            .enumerate()
            .map(|(index, o)| EvalRecord {
                index,
                length: o.candidate.len(),
                nouns: lexicon.count(&o.candidate),
                rouge_l: 100.0 * rouge_l_pair(&o.candidate, &o.reference),
                token_matches: position_matches(&o.candidate, &o.reference),
                payload_correct: payload_position
                    .map(|p| o.reference.get(p).is_some() && o.candidate.get(p) == o.reference.get(p)),
                empty_memory: o.empty_memory,
                speaker_correct: o.speaker_correct,
                addressee_correct: o.addressee_correct,
                candidate: o.candidate.clone(),
                reference: o.reference.clone(),
            })
            .collect();
        Self::from_records(records)
    }

    /// Recomputes every aggregate from per-instance records.
    pub fn from_records(records: Vec<EvalRecord>) -> Result<Self> {
        let summary = summarize(&records)?;
        let empty_memory = records.iter().filter(|r| r.empty_memory).map(|r| r.index).collect();
        Ok(EvalReport {
            summary,
            empty_memory,
            records,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = ablation_table(&[AblationRow {
            variant: String::from("evaluation"),
            summary: self.summary.clone(),
            buckets: None,
        }]);
        let _ = writeln!(out, "empty-memory instances: {}", self.empty_memory.len());
        out
    }
}

fn summarize(records: &[EvalRecord]) -> Result<Summary> {
    if records.is_empty() {
        bail!(Domain, "no records to summarize");
    }
    let candidates: Vec<&[String]> = records.iter().map(|r| r.candidate.as_slice()).collect();
    let references: Vec<&[String]> = records.iter().map(|r| r.reference.as_slice()).collect();
    let n = records.len() as f64;
    let ref_tokens: usize = references.iter().map(|r| r.len()).sum();
    let matched: usize = records.iter().map(|r| r.token_matches).sum();
    let payload_accuracy = if records.iter().all(|r| r.payload_correct.is_some()) {
        Some(records.iter().filter(|r| r.payload_correct == Some(true)).count() as f64 / n)
    } else {
        None
    };
    Ok(Summary {
        instances: records.len(),
        bleu: bleu(&candidates, &references, 4)?,
        rouge_l: records.iter().map(|r| r.rouge_l).sum::<f64>() / n,
        avg_length: avg_length(&candidates)?,
        avg_nouns: records.iter().map(|r| r.nouns).sum::<usize>() as f64 / n,
        token_accuracy: if ref_tokens == 0 {
            1.0
        } else {
            matched as f64 / ref_tokens as f64
        },
        payload_accuracy,
    })
}

/// Speaker / addressee prediction correctness groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    TrueTrue,
    TrueAny,
    AnyTrue,
    FalseFalse,
    AnyAny,
    TrueFalse,
    FalseTrue,
}

impl Bucket {
    /// The five rows of the joint-prediction table.
    pub const TABLE: [Bucket; 5] = [
        Bucket::TrueTrue,
        Bucket::TrueAny,
        Bucket::AnyTrue,
        Bucket::FalseFalse,
        Bucket::AnyAny,
    ];
    /// Disjoint groups covering every instance.
    pub const PARTITION: [Bucket; 4] = [
        Bucket::TrueTrue,
        Bucket::TrueFalse,
        Bucket::FalseTrue,
        Bucket::FalseFalse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Bucket::TrueTrue => "True/True",
            Bucket::TrueAny => "True/*",
            Bucket::AnyTrue => "*/True",
            Bucket::FalseFalse => "False/False",
            Bucket::AnyAny => "*/*",
            Bucket::TrueFalse => "True/False",
            Bucket::FalseTrue => "False/True",
        }
    }

    pub fn contains(self, speaker: bool, addressee: bool) -> bool {
        match self {
            Bucket::TrueTrue => speaker && addressee,
            Bucket::TrueAny => speaker,
            Bucket::AnyTrue => addressee,
            Bucket::FalseFalse => !speaker && !addressee,
            Bucket::AnyAny => true,
            Bucket::TrueFalse => speaker && !addressee,
            Bucket::FalseTrue => !speaker && addressee,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: Bucket,
    pub label: String,
    pub count: usize,
    /// `None` for an empty bucket.
    pub summary: Option<Summary>,
}

fn correctness(record: &EvalRecord) -> Result<(bool, bool)> {
    match (record.speaker_correct, record.addressee_correct) {
        (Some(s), Some(a)) => Ok((s, a)),
        _ => bail!(Contract, "record {} has no prediction outcome", record.index),
    }
}

/// Re-scores the records of `report` inside each bucket of `buckets`.
pub fn bucket_rows(report: &EvalReport, buckets: &[Bucket]) -> Result<Vec<BucketRow>> {
    let mut rows = Vec::with_capacity(buckets.len());
    for &bucket in buckets {
        let mut members = Vec::new();
        for r in &report.records {
            let (s, a) = correctness(r)?;
            if bucket.contains(s, a) {
                members.push(r.clone());
            }
        }
        rows.push(BucketRow {
            bucket,
            label: String::from(bucket.label()),
            count: members.len(),
            summary: if members.is_empty() {
                None
            } else {
                Some(summarize(&members)?)
            },
        });
    }
    Ok(rows)
}

/// Instance counts for True/True, True/False, False/True, False/False.
pub fn partition_counts(records: &[EvalRecord]) -> Result<[usize; 4]> {
    let mut counts = [0; 4];
    for r in records {
        let (s, a) = correctness(r)?;
        let slot = Bucket::PARTITION
            .iter()
            .position(|b| b.contains(s, a))
            .expect("partition covers every outcome");
        counts[slot] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub summary: Summary,
    pub buckets: Option<Vec<BucketRow>>,
}

fn push_row(out: &mut String, name: &str, count: usize, s: Option<&Summary>) {
    let _ = write!(out, "{name:<28} {count:>6}");
    match s {
        Some(s) => {
            let payload = s
                .payload_accuracy
                .map_or_else(|| String::from("-"), |p| format!("{:.2}", 100.0 * p));
            let _ = writeln!(
                out,
                " {:>8.2} {:>8.2} {:>7.2} {:>6.2} {:>7.2} {:>8}",
                s.bleu,
                s.rouge_l,
                s.avg_length,
                s.avg_nouns,
                100.0 * s.token_accuracy,
                payload
            );
        }
        None => {
            let _ = writeln!(
                out,
                " {:>8} {:>8} {:>7} {:>6} {:>7} {:>8}",
                "-", "-", "-", "-", "-", "-"
            );
        }
    }
}

/// Aligned plain-text rendering; bucket rows are indented under their variant.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:>6} {:>8} {:>8} {:>7} {:>6} {:>7} {:>8}",
        "variant", "n", "BLEU", "ROUGE-L", "Length", "#Noun", "TokAcc", "Payload"
    );
    for row in rows {
        push_row(&mut out, &row.variant, row.summary.instances, Some(&row.summary));
        for b in row.buckets.iter().flatten() {
            push_row(&mut out, &format!("  {}", b.label), b.count, b.summary.as_ref());
        }
    }
    out
}
