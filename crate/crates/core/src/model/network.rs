use alloc::vec::Vec;

use super::{EmptyMemory, EncodedInstance, MemoryType, Model, Roles};
use crate::error::{bail, Result};
use crate::gru::gru_step;
use crate::tape::{Tape, Var};

/// Word states of one utterance. Column `i` is `[→h_i; ←h_{L-i+1}]`; the
/// summary is the last column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceEncoding {
    pub word_states: Vec<Var>,
    pub summary: Var,
}

/// One column per interlocutor of the instance, indexed like
/// [`EncodedInstance::interlocutors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterlocutorMatrix {
    pub columns: Vec<Var>,
}

/// Why the memory looks the way it does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryFlag {
    Selected,
    /// The selected interlocutor never spoke; memory is empty.
    EmptyZero,
    /// The selected interlocutor never spoke; the latest utterance was used.
    EmptyLatest,
    /// Memory switched off.
    Disabled,
}

impl MemoryFlag {
    pub fn is_fallback(self) -> bool {
        matches!(self, MemoryFlag::EmptyZero | MemoryFlag::EmptyLatest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddresseeMemory {
    pub columns: Vec<Var>,
    /// Context turn of each column.
    pub source_turns: Vec<usize>,
    pub flag: MemoryFlag,
}

/// Everything the decoder needs from the context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEncoding {
    pub utterances: Vec<UtteranceEncoding>,
    pub interlocutors: InterlocutorMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderState {
    pub s: Var,
    pub x_prev: Var,
    /// Attention weights and attentional vector of the step that produced `s`.
    pub alpha: Option<Var>,
    pub c: Option<Var>,
}

impl DecoderState {
    /// Feeds `x` as the next step's previous-word input.
    pub fn with_input(self, x: Var) -> Self {
        DecoderState { x_prev: x, ..self }
    }
}

/// Responding speaker and target addressee columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Conditioning {
    pub a_res: Var,
    pub a_tgt: Var,
}

impl Model {
    pub fn encode_utterance(&self, tape: &mut Tape<'_>, tokens: &[usize]) -> Result<UtteranceEncoding> {
        if tokens.is_empty() {
            bail!(Domain, "cannot encode an empty utterance");
        }
        if tokens.len() > self.config.max_utterance_len {
            bail!(
                Contract,
                "utterance of {} tokens exceeds the cap of {}",
                tokens.len(),
                self.config.max_utterance_len
            );
        }
        let ids = &self.ids;
        let e = tape.param(ids.embedding);
        let inputs = tokens.iter().map(|&t| tape.row(e, t)).collect::<Result<Vec<_>>>()?;
        let dir = self.config.hidden_dim / 2;
        let mut h = tape.zeros(dir);
        let mut forward = Vec::with_capacity(tokens.len());
        for &x in &inputs {
            h = gru_step(tape, &ids.encoder_forward, h, x)?;
            forward.push(h);
        }
        let mut h = tape.zeros(dir);
        // backward[k] is the state after reading k+1 words from the end
        let mut backward = Vec::with_capacity(tokens.len());
        for &x in inputs.iter().rev() {
            h = gru_step(tape, &ids.encoder_backward, h, x)?;
            backward.push(h);
        }
        let n = tokens.len();
        let word_states = (0..n)
            .map(|i| tape.concat(&[forward[i], backward[n - 1 - i]]))
            .collect::<Result<Vec<_>>>()?;
        let summary = word_states[n - 1];
        Ok(UtteranceEncoding { word_states, summary })
    }

    /// Speaker-interaction layer. Columns start at zero; each turn updates
    /// the speaker with the speaker GRU, the addressee (if any) with the
    /// addressee GRU and everybody else with the observer GRU, all fed the
    /// turn's summary vector.
    pub fn run_interaction(
        &self,
        tape: &mut Tape<'_>,
        instance: &EncodedInstance,
        utterances: &[UtteranceEncoding],
    ) -> Result<InterlocutorMatrix> {
        if utterances.len() != instance.turns.len() {
            bail!(
                Contract,
                "{} encodings for {} turns",
                utterances.len(),
                instance.turns.len()
            );
        }
        let k = instance.interlocutors.len();
        let zero = tape.zeros(self.config.interlocutor_dim);
        let mut columns = alloc::vec![zero; k];
        for (t, (turn, enc)) in instance.turns.iter().zip(utterances).enumerate() {
            if turn.speaker >= k || turn.addressee.is_some_and(|a| a >= k) {
                bail!(Contract, "turn {t} names an interlocutor outside the instance");
            }
            let mut next = Vec::with_capacity(k);
            for (i, &col) in columns.iter().enumerate() {
                let gru = if i == turn.speaker {
                    &self.ids.speaker_gru
                } else if turn.addressee == Some(i) {
                    &self.ids.addressee_gru
                } else {
                    &self.ids.observer_gru
                };
                next.push(gru_step(tape, gru, col, enc.summary)?);
            }
            columns = next;
        }
        Ok(InterlocutorMatrix { columns })
    }

    /// Encodes every turn and runs the interaction layer.
    pub fn encode_context(&self, tape: &mut Tape<'_>, instance: &EncodedInstance) -> Result<ContextEncoding> {
        let utterances = instance
            .turns
            .iter()
            .map(|t| self.encode_utterance(tape, &t.tokens))
            .collect::<Result<Vec<_>>>()?;
        let interlocutors = self.run_interaction(tape, instance, &utterances)?;
        Ok(ContextEncoding {
            utterances,
            interlocutors,
        })
    }

    pub fn select_addressee_memory(
        &self,
        instance: &EncodedInstance,
        utterances: &[UtteranceEncoding],
        roles: Roles,
    ) -> AddresseeMemory {
        let turn_memory = |t: usize, flag| AddresseeMemory {
            columns: utterances[t].word_states.clone(),
            source_turns: alloc::vec![t; utterances[t].word_states.len()],
            flag,
        };
        let latest = utterances.len() - 1;
        let last_by = |who: usize| {
            let found = instance.turns.iter().rposition(|t| t.speaker == who);
            match (found, self.config.empty_memory) {
                (Some(t), _) => turn_memory(t, MemoryFlag::Selected),
                (None, EmptyMemory::Latest) => turn_memory(latest, MemoryFlag::EmptyLatest),
                (None, EmptyMemory::Zero) => AddresseeMemory {
                    columns: Vec::new(),
                    source_turns: Vec::new(),
                    flag: MemoryFlag::EmptyZero,
                },
            }
        };
        match self.config.memory_type {
            MemoryType::Addressee => last_by(roles.target),
            MemoryType::Speaker => last_by(roles.responding),
            MemoryType::Latest => turn_memory(latest, MemoryFlag::Selected),
            MemoryType::All => {
                let mut memory = AddresseeMemory {
                    columns: Vec::new(),
                    source_turns: Vec::new(),
                    flag: MemoryFlag::Selected,
                };
                for (t, u) in utterances.iter().enumerate() {
                    memory.columns.extend_from_slice(&u.word_states);
                    memory.source_turns.extend(core::iter::repeat_n(t, u.word_states.len()));
                }
                memory
            }
            MemoryType::None => AddresseeMemory {
                columns: Vec::new(),
                source_turns: Vec::new(),
                flag: MemoryFlag::Disabled,
            },
        }
    }

    /// Bilinear attention `α = softmax_k(s_prevᵀ W_a m_k)`, `c = Σ α_k m_k`.
    pub fn attend(&self, tape: &mut Tape<'_>, s_prev: Var, memory: &AddresseeMemory) -> Result<(Var, Var)> {
        if memory.columns.is_empty() {
            bail!(Domain, "attention over an empty memory");
        }
        let w = tape.param(self.ids.attention);
        let query = tape.matvec_t(w, s_prev)?;
        let scores = memory
            .columns
            .iter()
            .map(|&m| tape.dot(query, m))
            .collect::<Result<Vec<_>>>()?;
        let scores = tape.stack(&scores)?;
        let alpha = tape.softmax(scores)?;
        let c = tape.weighted_sum(alpha, &memory.columns)?;
        Ok((c, alpha))
    }

    /// Picks the responding speaker's and target addressee's columns.
    pub(crate) fn conditioning(&self, matrix: &InterlocutorMatrix, roles: Roles) -> Result<Conditioning> {
        let k = matrix.columns.len();
        if roles.responding >= k || roles.target >= k {
            bail!(
                Contract,
                "roles ({}, {}) outside {k} interlocutors",
                roles.responding,
                roles.target
            );
        }
        Ok(Conditioning {
            a_res: matrix.columns[roles.responding],
            a_tgt: matrix.columns[roles.target],
        })
    }

    /// Replaces switched-off interlocutor vectors with zeros.
    fn mask(&self, tape: &mut Tape<'_>, a_res: Var, a_tgt: Var) -> (Var, Var) {
        let ia = self.config.interlocutor_dim;
        let a_res = if self.config.use_speaker_vector {
            a_res
        } else {
            tape.zeros(ia)
        };
        let a_tgt = if self.config.use_addressee_vector {
            a_tgt
        } else {
            tape.zeros(ia)
        };
        (a_res, a_tgt)
    }

    /// `s_0 = tanh(W_init [A_res; A_tgt])`, `x_0` = BOS embedding.
    pub(crate) fn initial_state(&self, tape: &mut Tape<'_>, cond: Conditioning) -> Result<DecoderState> {
        let (a_res, a_tgt) = self.mask(tape, cond.a_res, cond.a_tgt);
        let w = tape.param(self.ids.decoder_init);
        let both = tape.concat(&[a_res, a_tgt])?;
        let pre = tape.matvec(w, both)?;
        let s = tape.tanh(pre)?;
        let x_prev = self.embed(tape, crate::corpus::BOS)?;
        Ok(DecoderState {
            s,
            x_prev,
            alpha: None,
            c: None,
        })
    }

    pub(crate) fn embed(&self, tape: &mut Tape<'_>, token: usize) -> Result<Var> {
        let e = tape.param(self.ids.embedding);
        tape.row(e, token)
    }

    /// One decoder step: attend with `s_{j-1}`, update
    /// `s_j = GRU_dec(s_{j-1}, [c_j; A_res; A_tgt; x_{j-1}])` and score the
    /// vocabulary as `E · (W_o [s_j; c_j; A_res; A_tgt] + b_o)`. Vectors switched
    /// off in the configuration are replaced by zeros whatever the caller passes.
    pub fn decode_step(
        &self,
        tape: &mut Tape<'_>,
        state: &DecoderState,
        a_res: Var,
        a_tgt: Var,
        memory: &AddresseeMemory,
    ) -> Result<(Var, DecoderState)> {
        let ia = self.config.interlocutor_dim;
        if tape.size(a_res) != ia || tape.size(a_tgt) != ia {
            bail!(Dimension, "interlocutor vectors must have {ia} entries");
        }
        let (a_res, a_tgt) = self.mask(tape, a_res, a_tgt);
        let (c, alpha) = if memory.columns.is_empty() {
            (tape.zeros(self.config.hidden_dim), None)
        } else {
            let (c, alpha) = self.attend(tape, state.s, memory)?;
            (c, Some(alpha))
        };
        let input = tape.concat(&[c, a_res, a_tgt, state.x_prev])?;
        let s = gru_step(tape, &self.ids.decoder_gru, state.s, input)?;
        let features = tape.concat(&[s, c, a_res, a_tgt])?;
        let w_o = tape.param(self.ids.output_weight);
        let b_o = tape.param(self.ids.output_bias);
        let projected = tape.matvec(w_o, features)?;
        let projected = tape.add(projected, b_o)?;
        let e = tape.param(self.ids.embedding);
        let logits = tape.matvec(e, projected)?;
        Ok((
            logits,
            DecoderState {
                s,
                x_prev: state.x_prev,
                alpha,
                c: Some(c),
            },
        ))
    }
}
