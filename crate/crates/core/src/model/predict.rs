use alloc::vec::Vec;

use super::{ContextEncoding, EncodedInstance, Model, Roles};
use crate::error::{bail, Result};
use crate::tape::{softmax, Tape, Var};
use crate::tensor::ParamId;

/// Candidate scores for the two heads, on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionScores {
    pub speaker: Var,
    pub addressee: Var,
}

/// Softmax distributions over the instance's interlocutors.
#[derive(Debug, Clone, PartialEq)]
pub struct InterlocutorPrediction {
    pub speaker: Vec<f64>,
    pub addressee: Vec<f64>,
    /// Fewer than two candidates; the distributions carry no information.
    pub degenerate: bool,
}

impl InterlocutorPrediction {
    /// Argmax of each head (lowest index on ties).
    pub fn roles(&self) -> Roles {
        Roles {
            responding: argmax(&self.speaker),
            target: argmax(&self.addressee),
        }
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl Model {
    fn heads(&self) -> Result<(ParamId, ParamId)> {
        match (self.ids.predict_speaker, self.ids.predict_addressee) {
            (Some(s), Some(a)) => Ok((s, a)),
            _ => bail!(Config, "model was built without the interlocutor prediction head"),
        }
    }

    /// `score(a_i) = [h_C; h_last]ᵀ W A_i`, where `h_C` max-pools the final
    /// interlocutor columns and `h_last` summarizes the latest utterance.
    pub fn prediction_scores(&self, tape: &mut Tape<'_>, context: &ContextEncoding) -> Result<PredictionScores> {
        let (w_spk, w_adr) = self.heads()?;
        let columns = &context.interlocutors.columns;
        let pooled = tape.max_pool(columns)?;
        let last = context
            .utterances
            .last()
            .ok_or_else(|| crate::Error::Domain("context without utterances".into()))?
            .summary;
        let features = tape.concat(&[pooled, last])?;
        let mut head = |w: ParamId| -> Result<Var> {
            let w = tape.param(w);
            let query = tape.matvec_t(w, features)?;
            let scores = columns
                .iter()
                .map(|&a| tape.dot(query, a))
                .collect::<Result<Vec<_>>>()?;
            tape.stack(&scores)
        };
        Ok(PredictionScores {
            speaker: head(w_spk)?,
            addressee: head(w_adr)?,
        })
    }

    /// Speaker NLL plus addressee NLL for the gold roles.
    pub(crate) fn prediction_nll(&self, tape: &mut Tape<'_>, instance: &EncodedInstance) -> Result<Var> {
        let k = instance.interlocutors.len();
        if instance.roles.responding >= k || instance.roles.target >= k {
            bail!(Contract, "gold interlocutors outside the candidate set");
        }
        let context = self.encode_context(tape, instance)?;
        let scores = self.prediction_scores(tape, &context)?;
        let spk = tape.nll(scores.speaker, instance.roles.responding)?;
        let adr = tape.nll(scores.addressee, instance.roles.target)?;
        tape.add(spk, adr)
    }

    /// Distributions over the context's interlocutors for who responds and
    /// to whom. Gold roles in `instance` are ignored.
    pub fn predict_interlocutors(&self, instance: &EncodedInstance) -> Result<InterlocutorPrediction> {
        let mut tape = Tape::new(&self.params);
        let context = self.encode_context(&mut tape, instance)?;
        let scores = self.prediction_scores(&mut tape, &context)?;
        let degenerate = instance.interlocutors.len() < 2;
        if degenerate {
            log::warn!("interlocutor prediction with a single candidate");
        }
        Ok(InterlocutorPrediction {
            speaker: softmax(tape.value(scores.speaker))?,
            addressee: softmax(tape.value(scores.addressee))?,
            degenerate,
        })
    }
}
