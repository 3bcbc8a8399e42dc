//! Synthetic "addressee copy" corpus.
//!
//! Every context utterance carries exactly one content word among filler
//! words, and the content words of one context are pairwise distinct. The
//! gold response is a fixed frame followed by the content word of the target
//! addressee's last utterance, so an instance can only be answered by reading
//! that utterance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ContextInstance, DialogueTurn};
use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub instances: usize,
    pub interlocutors: usize,
    pub content_words: usize,
    pub filler_words: usize,
    /// Context turns per instance.
    pub turns: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Probability that a context turn has no addressee.
    pub unaddressed: f64,
    pub frame: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            instances: 1000,
            interlocutors: 4,
            content_words: 20,
            filler_words: 8,
            turns: 3,
            min_fillers: 2,
            max_fillers: 4,
            unaddressed: 0.25,
            frame: alloc::vec!["you".into(), "said".into()],
        }
    }
}

impl SynthConfig {
    pub fn content_word(i: usize) -> String {
        format!("c{i:03}")
    }

    pub fn filler_word(i: usize) -> String {
        format!("f{i:03}")
    }

    pub fn interlocutor(i: usize) -> String {
        format!("u{i}")
    }

    pub fn content_vocabulary(&self) -> Vec<String> {
        (0..self.content_words).map(Self::content_word).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.interlocutors < 2 {
            bail!(Config, "need at least two interlocutors, got {}", self.interlocutors);
        }
        if self.content_words < self.interlocutors {
            bail!(
                Config,
                "content vocabulary ({}) is smaller than the interlocutor count ({})",
                self.content_words,
                self.interlocutors
            );
        }
        if self.content_words < self.turns {
            bail!(
                Config,
                "content vocabulary ({}) cannot give {} turns distinct payloads",
                self.content_words,
                self.turns
            );
        }
        if self.turns == 0 {
            bail!(Config, "instances need at least one context turn");
        }
        if self.min_fillers > self.max_fillers || (self.max_fillers > 0 && self.filler_words == 0) {
            bail!(
                Config,
                "filler range {}..={} is unusable",
                self.min_fillers,
                self.max_fillers
            );
        }
        if !(0.0..=1.0).contains(&self.unaddressed) {
            bail!(Config, "unaddressed probability {} outside [0, 1]", self.unaddressed);
        }
        if self
            .frame
            .iter()
            .any(|w| w.is_empty() || w.contains(char::is_whitespace))
        {
            bail!(Config, "frame words must be nonempty single tokens");
        }
        Ok(())
    }
}

/// Index of the payload token in a synthetic response.
pub fn payload_position(config: &SynthConfig) -> usize {
    config.frame.len()
}

/// Seed-deterministic synthetic corpus.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Vec<ContextInstance>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(config.instances);
    while out.len() < config.instances {
        if let Some(inst) = sample_instance(config, &mut rng) {
            out.push(inst);
        }
    }
    Ok(out)
}

fn sample_instance(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Option<ContextInstance> {
    let payloads = index::sample(rng, config.content_words, config.turns).into_vec();
    let mut turns = Vec::with_capacity(config.turns);
    for &payload in &payloads {
        let speaker = rng.gen_range(0..config.interlocutors);
        let addressee = if rng.gen_bool(config.unaddressed) {
            None
        } else {
            let other = rng.gen_range(0..config.interlocutors - 1);
            Some(if other >= speaker { other + 1 } else { other })
        };
        let fillers = rng.gen_range(config.min_fillers..=config.max_fillers);
        let mut tokens: Vec<String> = (0..fillers)
            .map(|_| SynthConfig::filler_word(rng.gen_range(0..config.filler_words)))
            .collect();
        let at = rng.gen_range(0..=fillers);
        tokens.insert(at, SynthConfig::content_word(payload));
        turns.push(DialogueTurn {
            speaker: SynthConfig::interlocutor(speaker),
            addressee: addressee.map(SynthConfig::interlocutor),
            tokens,
        });
    }
    let mut speakers: Vec<&str> = Vec::new();
    for t in &turns {
        if !speakers.contains(&t.speaker.as_str()) {
            speakers.push(&t.speaker);
        }
    }
    let target = speakers[rng.gen_range(0..speakers.len())].into();
    let probe = ContextInstance {
        turns,
        responding_speaker: String::new(),
        target_addressee: target,
        response: Vec::new(),
    };
    let candidates: Vec<String> = probe
        .interlocutors()
        .into_iter()
        .filter(|&w| w != probe.target_addressee)
        .map(String::from)
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let responding = candidates[rng.gen_range(0..candidates.len())].clone();
    let last = probe
        .turns
        .iter()
        .rposition(|t| t.speaker == probe.target_addressee)
        .expect("target was drawn from the speakers");
    let mut response = config.frame.clone();
    response.push(SynthConfig::content_word(payloads[last]));
    Some(ContextInstance {
        responding_speaker: responding,
        response,
        ..probe
    })
}
