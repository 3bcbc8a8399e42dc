//! Chat-log ingestion and the context-instance data model.

mod build;
mod filter;
mod raw;
mod split;
mod stats;
mod synth;
mod tokenize;
mod vocab;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

pub use build::{build_contexts, conversation_turns, BuildOptions, BuildReport};
pub use filter::GenericFilter;
pub use raw::{parse_raw_log, RawConversation, RawLine, RawLog, RejectedLine};
pub use split::{split_counts, split_dataset, Split};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{payload_position, synth_generate, SynthConfig};
pub use tokenize::{extract_addressee, tokenize, AddresseeRule};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

/// Default cap on utterance length, in tokens.
pub const MAX_UTTERANCE_TOKENS: usize = 20;
/// Default number of preceding turns kept as context.
pub const DEFAULT_WINDOW: usize = 5;

/// One `(speaker, addressee, utterance)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub speaker: String,
    pub addressee: Option<String>,
    pub tokens: Vec<String>,
}

/// A context window plus who answers whom, and the gold response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextInstance {
    pub turns: Vec<DialogueTurn>,
    pub responding_speaker: String,
    pub target_addressee: String,
    pub response: Vec<String>,
}

/// Limits an instance is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub window: usize,
    pub max_utterance_tokens: usize,
    pub max_response_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            window: DEFAULT_WINDOW,
            max_utterance_tokens: MAX_UTTERANCE_TOKENS,
            max_response_tokens: MAX_UTTERANCE_TOKENS,
        }
    }
}

impl ContextInstance {
    /// Interlocutors in order of first appearance (speaker before addressee
    /// within a turn).
    pub fn interlocutors(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for turn in &self.turns {
            for who in core::iter::once(turn.speaker.as_str()).chain(turn.addressee.as_deref()) {
                if !seen.contains(&who) {
                    seen.push(who);
                }
            }
        }
        seen
    }

    pub fn appears(&self, who: &str) -> bool {
        self.turns
            .iter()
            .any(|t| t.speaker == who || t.addressee.as_deref() == Some(who))
    }

    pub fn has_spoken(&self, who: &str) -> bool {
        self.turns.iter().any(|t| t.speaker == who)
    }

    pub fn context_tokens(&self) -> usize {
        self.turns.iter().map(|t| t.tokens.len()).sum()
    }

    /// Checks every type invariant; the first violation is reported.
    pub fn validate(&self, limits: &Limits) -> Result<()> {
        if self.turns.is_empty() {
            bail!(Contract, "instance has no context turns");
        }
        if self.turns.len() > limits.window {
            bail!(
                Contract,
                "context of {} turns exceeds window {}",
                self.turns.len(),
                limits.window
            );
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.tokens.is_empty() {
                bail!(Contract, "turn {i} has no tokens");
            }
            if turn.tokens.len() > limits.max_utterance_tokens {
                bail!(
                    Contract,
                    "turn {i} has {} tokens, cap is {}",
                    turn.tokens.len(),
                    limits.max_utterance_tokens
                );
            }
            if turn.addressee.as_deref() == Some(turn.speaker.as_str()) {
                bail!(Contract, "turn {i}: `{}` addresses themselves", turn.speaker);
            }
        }
        if self.responding_speaker == self.target_addressee {
            bail!(
                Contract,
                "responding speaker and target addressee are both `{}`",
                self.responding_speaker
            );
        }
        for who in [&self.responding_speaker, &self.target_addressee] {
            if !self.appears(who) {
                bail!(Contract, "`{who}` does not appear in the context");
            }
        }
        if self.response.is_empty() {
            bail!(Contract, "empty response");
        }
        if self.response.len() > limits.max_response_tokens {
            bail!(
                Contract,
                "response has {} tokens, cap is {}",
                self.response.len(),
                limits.max_response_tokens
            );
        }
        Ok(())
    }
}
