use alloc::vec::Vec;
use core::cmp::Ordering;

use super::network::Conditioning;
use super::{AddresseeMemory, DecoderState, EncodedInstance, MemoryFlag, Model, Roles};
use crate::corpus::EOS;
use crate::error::{bail, Result};
use crate::tape::{log_softmax, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Search {
    Greedy,
    /// Beam search with the given width.
    Beam(usize),
}

/// Where the responding speaker and target addressee come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleSource {
    Gold,
    /// Argmax of the joint prediction head.
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub search: Search,
    pub roles: RoleSource,
    /// Overrides the model's response cap when set.
    pub max_len: Option<usize>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            search: Search::Greedy,
            roles: RoleSource::Gold,
            max_len: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Generated tokens, EOS stripped.
    pub tokens: Vec<usize>,
    /// Sum of token log-probabilities, EOS included when emitted.
    pub log_prob: f64,
    /// `log_prob` divided by the number of decoding steps.
    pub score: f64,
    pub memory_flag: MemoryFlag,
    pub roles: Roles,
}

struct Hypothesis {
    tokens: Vec<usize>,
    log_prob: f64,
    state: DecoderState,
}

struct Finished {
    tokens: Vec<usize>,
    log_prob: f64,
    steps: usize,
}

impl Finished {
    fn score(&self) -> f64 {
        self.log_prob / self.steps as f64
    }
}

impl Model {
    pub fn generate(&self, instance: &EncodedInstance, options: &GenerateOptions) -> Result<Generation> {
        let width = match options.search {
            Search::Greedy => 1,
            Search::Beam(0) => bail!(Config, "beam width must be at least 1"),
            Search::Beam(w) => w,
        };
        let max_len = options.max_len.unwrap_or(self.config.max_response_len);
        if max_len == 0 {
            bail!(Config, "maximum response length must be positive");
        }
        let roles = match options.roles {
            RoleSource::Gold => instance.roles,
            RoleSource::Predicted => self.predict_interlocutors(instance)?.roles(),
        };

        let mut tape = Tape::new(&self.params);
        let context = self.encode_context(&mut tape, instance)?;
        let memory = self.select_addressee_memory(instance, &context.utterances, roles);
        let cond = self.conditioning(&context.interlocutors, roles)?;
        let start = self.initial_state(&mut tape, cond)?;

        let mut best = self.search(&mut tape, start, cond, &memory, width, max_len)?;
        if width > 1 {
            // pruning can drop the greedy path, so it is scored too and a
            // wider beam never finalizes below it
            let greedy = self.search(&mut tape, start, cond, &memory, 1, max_len)?;
            if greedy.score() > best.score() {
                best = greedy;
            }
        }
        Ok(Generation {
            score: best.score(),
            tokens: best.tokens,
            log_prob: best.log_prob,
            memory_flag: memory.flag,
            roles,
        })
    }

    /// Beam search of the given width; width 1 is greedy decoding.
    fn search(
        &self,
        tape: &mut Tape<'_>,
        start: DecoderState,
        cond: Conditioning,
        memory: &AddresseeMemory,
        width: usize,
        max_len: usize,
    ) -> Result<Finished> {
        let mut alive = alloc::vec![Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            state: start,
        }];
        let mut finished: Vec<Finished> = Vec::new();
        while !alive.is_empty() && finished.len() < width {
            // (hypothesis, token, cumulative log-prob)
            let mut candidates = Vec::new();
            let mut next_states = Vec::with_capacity(alive.len());
            for (h, hyp) in alive.iter().enumerate() {
                let (logits, next) = self.decode_step(tape, &hyp.state, cond.a_res, cond.a_tgt, memory)?;
                let lp = log_softmax(tape.value(logits))?;
                candidates.extend(lp.iter().enumerate().map(|(tok, &l)| (h, tok, hyp.log_prob + l)));
                next_states.push(next);
            }
            candidates.sort_by(|a, b| match b.2.partial_cmp(&a.2) {
                Some(Ordering::Equal) | None => (a.0, a.1).cmp(&(b.0, b.1)),
                Some(o) => o,
            });
            candidates.truncate(width - finished.len());
            let mut survivors = Vec::with_capacity(candidates.len());
            for (h, tok, log_prob) in candidates {
                let mut tokens = alive[h].tokens.clone();
                if tok == EOS {
                    let steps = tokens.len() + 1;
                    finished.push(Finished {
                        tokens,
                        log_prob,
                        steps,
                    });
                    continue;
                }
                tokens.push(tok);
                if tokens.len() >= max_len {
                    let steps = tokens.len();
                    finished.push(Finished {
                        tokens,
                        log_prob,
                        steps,
                    });
                    continue;
                }
                let x = self.embed(tape, tok)?;
                survivors.push(Hypothesis {
                    tokens,
                    log_prob,
                    state: next_states[h].with_input(x),
                });
            }
            alive = survivors;
        }

        let mut best = 0;
        for (i, f) in finished.iter().enumerate() {
            if f.score() > finished[best].score() {
                best = i;
            }
        }
        Ok(finished.swap_remove(best))
    }
}
