use alloc::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ContextInstance;
use crate::error::{bail, Result};

/// Corpus summary in the layout of a data-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub contexts: usize,
    /// Distinct ids seen as a turn speaker or responding speaker.
    pub speakers: usize,
    /// Distinct ids seen as a turn addressee or target addressee.
    pub addressees: usize,
    /// Distinct tokens over contexts and responses.
    pub vocab: usize,
    /// Context tokens plus response tokens.
    pub tokens: usize,
    pub avg_tokens_per_context: f64,
    pub avg_tokens_per_response: f64,
    /// Instances whose target addressee never speaks in the context.
    pub target_never_spoke: usize,
}

pub fn corpus_stats(instances: &[ContextInstance]) -> Result<CorpusStats> {
    if instances.is_empty() {
        bail!(Domain, "statistics of an empty corpus");
    }
    let mut speakers = BTreeSet::new();
    let mut addressees = BTreeSet::new();
    let mut vocab = BTreeSet::new();
    let (mut ctx_tokens, mut res_tokens, mut never_spoke) = (0usize, 0usize, 0usize);
    for inst in instances {
        for turn in &inst.turns {
            speakers.insert(turn.speaker.as_str());
            if let Some(a) = &turn.addressee {
                addressees.insert(a.as_str());
            }
            ctx_tokens += turn.tokens.len();
            vocab.extend(turn.tokens.iter().map(|t| t.as_str()));
        }
        speakers.insert(inst.responding_speaker.as_str());
        addressees.insert(inst.target_addressee.as_str());
        res_tokens += inst.response.len();
        vocab.extend(inst.response.iter().map(|t| t.as_str()));
        if !inst.has_spoken(&inst.target_addressee) {
            never_spoke += 1;
        }
    }
    let n = instances.len() as f64;
    Ok(CorpusStats {
        contexts: instances.len(),
        speakers: speakers.len(),
        addressees: addressees.len(),
        vocab: vocab.len(),
        tokens: ctx_tokens + res_tokens,
        avg_tokens_per_context: ctx_tokens as f64 / n,
        avg_tokens_per_response: res_tokens as f64 / n,
        target_never_spoke: never_spoke,
    })
}
