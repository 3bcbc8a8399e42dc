use alloc::vec::Vec;

use super::{EncodedInstance, Model};
use crate::corpus::EOS;
use crate::error::{bail, Result};
use crate::tape::{log_softmax, Tape, Var};
use crate::tensor::GradStore;

/// Scalar pieces of one instance's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// The optimized objective.
    pub total: f64,
    /// Mean per-token negative log-likelihood of the response (with EOS).
    pub nll: f64,
    /// `Σ‖θ‖²` (unweighted).
    pub l2: f64,
    /// Speaker NLL + addressee NLL, when the joint head is trained.
    pub prediction: Option<f64>,
    /// Number of predicted tokens, EOS included.
    pub tokens: usize,
}

pub(crate) struct LossVars {
    pub total: Var,
    pub value: LossValue,
}

impl Model {
    /// Teacher-forced NLL, averaged over the response tokens plus EOS.
    fn response_nll(&self, tape: &mut Tape<'_>, instance: &EncodedInstance) -> Result<(Var, usize)> {
        if instance.response.is_empty() {
            bail!(Domain, "gold response is empty");
        }
        let context = self.encode_context(tape, instance)?;
        let memory = self.select_addressee_memory(instance, &context.utterances, instance.roles);
        let cond = self.conditioning(&context.interlocutors, instance.roles)?;
        let mut state = self.initial_state(tape, cond)?;
        let targets: Vec<usize> = instance.response.iter().copied().chain([EOS]).collect();
        let mut terms = Vec::with_capacity(targets.len());
        for &target in &targets {
            let (logits, next) = self.decode_step(tape, &state, cond.a_res, cond.a_tgt, &memory)?;
            terms.push(tape.nll(logits, target)?);
            state = next.with_input(self.embed(tape, target)?);
        }
        let sum = tape.sum(&terms)?;
        let mean = tape.scale(sum, 1.0 / targets.len() as f64)?;
        Ok((mean, targets.len()))
    }

    fn l2_term(&self, tape: &mut Tape<'_>) -> Result<Var> {
        let squares: Vec<Var> = self
            .params
            .ids()
            .map(|id| {
                let v = tape.param(id);
                tape.sum_squares(v)
            })
            .collect();
        tape.sum(&squares)
    }

    fn build_loss(&self, tape: &mut Tape<'_>, instance: &EncodedInstance, joint: bool) -> Result<LossVars> {
        let (nll, tokens) = self.response_nll(tape, instance)?;
        let mut parts = alloc::vec![nll];
        let lambda = self.config.l2_weight;
        let mut l2 = 0.0;
        if lambda > 0.0 {
            let l2_var = self.l2_term(tape)?;
            l2 = tape.scalar(l2_var);
            parts.push(tape.scale(l2_var, lambda)?);
        }
        let mut prediction = None;
        if joint {
            let pred = self.prediction_nll(tape, instance)?;
            prediction = Some(tape.scalar(pred));
            parts.push(tape.scale(pred, self.config.prediction_weight)?);
        }
        let total = if parts.len() == 1 { parts[0] } else { tape.sum(&parts)? };
        Ok(LossVars {
            total,
            value: LossValue {
                total: tape.scalar(total),
                nll: tape.scalar(nll),
                l2,
                prediction,
                tokens,
            },
        })
    }

    /// Generation loss: mean token NLL plus `λ·Σ‖θ‖²`.
    pub fn forward_loss(&self, instance: &EncodedInstance) -> Result<LossValue> {
        let mut tape = Tape::new(&self.params);
        Ok(self.build_loss(&mut tape, instance, false)?.value)
    }

    /// Generation loss plus `w_pred · (NLL(speaker) + NLL(addressee))`.
    pub fn joint_loss(&self, instance: &EncodedInstance) -> Result<LossValue> {
        if !self.config.joint_prediction {
            bail!(Config, "joint loss needs a model built with joint_prediction");
        }
        let mut tape = Tape::new(&self.params);
        Ok(self.build_loss(&mut tape, instance, true)?.value)
    }

    /// The objective the trainer optimizes: joint when the model has the
    /// prediction head, generation-only otherwise.
    pub fn training_loss(&self, instance: &EncodedInstance) -> Result<LossValue> {
        let mut tape = Tape::new(&self.params);
        Ok(self
            .build_loss(&mut tape, instance, self.config.joint_prediction)?
            .value)
    }

    /// Training loss and its gradient, accumulated into `grads`.
    pub fn loss_and_grads(&self, instance: &EncodedInstance, grads: &mut GradStore) -> Result<LossValue> {
        let mut tape = Tape::new(&self.params);
        let vars = self.build_loss(&mut tape, instance, self.config.joint_prediction)?;
        tape.backward(vars.total, grads)?;
        Ok(vars.value)
    }

    /// Like [`Model::loss_and_grads`] with the objective chosen explicitly.
    pub fn loss_and_grads_with(
        &self,
        instance: &EncodedInstance,
        joint: bool,
        grads: &mut GradStore,
    ) -> Result<LossValue> {
        if joint && !self.config.joint_prediction {
            bail!(Config, "joint loss needs a model built with joint_prediction");
        }
        let mut tape = Tape::new(&self.params);
        let vars = self.build_loss(&mut tape, instance, joint)?;
        tape.backward(vars.total, grads)?;
        Ok(vars.value)
    }

    /// Teacher-forced next-token distributions, one per response position
    /// (EOS included).
    pub fn teacher_forced_distributions(&self, instance: &EncodedInstance) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new(&self.params);
        let context = self.encode_context(&mut tape, instance)?;
        let memory = self.select_addressee_memory(instance, &context.utterances, instance.roles);
        let cond = self.conditioning(&context.interlocutors, instance.roles)?;
        let mut state = self.initial_state(&mut tape, cond)?;
        let mut out = Vec::new();
        for &target in instance.response.iter().chain(&[EOS]) {
            let (logits, next) = self.decode_step(&mut tape, &state, cond.a_res, cond.a_tgt, &memory)?;
            out.push(log_softmax(tape.value(logits))?.into_iter().map(libm::exp).collect());
            state = next.with_input(self.embed(&mut tape, target)?);
        }
        Ok(out)
    }
}
