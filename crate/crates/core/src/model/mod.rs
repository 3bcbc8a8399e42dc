//! The interlocutor-aware encoder-decoder.
//!
//! Four layers, applied per instance:
//!
//! 1. a bidirectional GRU encodes each context utterance into word states and
//!    a summary vector;
//! 2. the speaker-interaction layer keeps one zero-initialized column per
//!    interlocutor and updates it every turn with a speaker, addressee or
//!    observer GRU depending on that interlocutor's role;
//! 3. the addressee memory holds the word states of the target addressee's
//!    last utterance (or an ablation alternative);
//! 4. a GRU decoder attends over the memory with a bilinear score and is
//!    conditioned on the responding speaker's and target addressee's columns.
//!    Output logits reuse the word embeddings.
//!
//! An optional head predicts the responding speaker and target addressee
//! from the max-pooled interlocutor matrix.

mod config;
mod generate;
mod loss;
mod network;
mod predict;

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{EmptyMemory, MemoryType, ModelConfig};
pub use generate::{GenerateOptions, Generation, RoleSource, Search};
pub use loss::LossValue;
pub use network::{AddresseeMemory, ContextEncoding, DecoderState, InterlocutorMatrix, MemoryFlag, UtteranceEncoding};
pub use predict::{InterlocutorPrediction, PredictionScores};

use crate::corpus::{ContextInstance, Vocabulary};
use crate::error::{bail, Result};
use crate::gru::GruParams;
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Handles to every trainable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelParams {
    pub embedding: ParamId,
    pub encoder_forward: GruParams,
    pub encoder_backward: GruParams,
    pub speaker_gru: GruParams,
    pub addressee_gru: GruParams,
    pub observer_gru: GruParams,
    pub decoder_init: ParamId,
    pub attention: ParamId,
    pub decoder_gru: GruParams,
    pub output_weight: ParamId,
    pub output_bias: ParamId,
    pub predict_speaker: Option<ParamId>,
    pub predict_addressee: Option<ParamId>,
}

/// Configuration plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    ids: ModelParams,
}

impl Model {
    /// Fresh model with `U(±1/√fan_in)` weights drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let dir = c.hidden_dim / 2;
        let ia = c.interlocutor_dim;
        let matrix = |store: &mut ParamStore, name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            store.insert(name, Tensor::uniform_fan_in(&[rows, cols], rng)?)
        };
        let embedding = matrix(&mut store, "embedding", c.vocab_size, c.word_dim, &mut rng)?;
        let encoder_forward = GruParams::register(&mut store, "encoder.forward", c.word_dim, dir, &mut rng)?;
        let encoder_backward = GruParams::register(&mut store, "encoder.backward", c.word_dim, dir, &mut rng)?;
        let speaker_gru = GruParams::register(&mut store, "interaction.speaker", c.hidden_dim, ia, &mut rng)?;
        let addressee_gru = GruParams::register(&mut store, "interaction.addressee", c.hidden_dim, ia, &mut rng)?;
        let observer_gru = GruParams::register(&mut store, "interaction.observer", c.hidden_dim, ia, &mut rng)?;
        let decoder_init = matrix(&mut store, "decoder.init", c.decoder_dim, 2 * ia, &mut rng)?;
        let attention = matrix(&mut store, "decoder.attention", c.decoder_dim, c.hidden_dim, &mut rng)?;
        let decoder_gru = GruParams::register(
            &mut store,
            "decoder.gru",
            c.hidden_dim + 2 * ia + c.word_dim,
            c.decoder_dim,
            &mut rng,
        )?;
        let out_in = c.decoder_dim + c.hidden_dim + 2 * ia;
        let output_weight = matrix(&mut store, "decoder.output.weight", c.word_dim, out_in, &mut rng)?;
        let output_bias = store.insert(
            "decoder.output.bias",
            Tensor::uniform(&[c.word_dim], 1.0 / libm::sqrt(out_in as f64), &mut rng)?,
        )?;
        let (predict_speaker, predict_addressee) = if c.joint_prediction {
            (
                Some(matrix(&mut store, "predict.speaker", ia + c.hidden_dim, ia, &mut rng)?),
                Some(matrix(
                    &mut store,
                    "predict.addressee",
                    ia + c.hidden_dim,
                    ia,
                    &mut rng,
                )?),
            )
        } else {
            (None, None)
        };
        let ids = ModelParams {
            embedding,
            encoder_forward,
            encoder_backward,
            speaker_gru,
            addressee_gru,
            observer_gru,
            decoder_init,
            attention,
            decoder_gru,
            output_weight,
            output_bias,
            predict_speaker,
            predict_addressee,
        };
        Ok(Model {
            config,
            params: store,
            ids,
        })
    }

    /// All weights zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let mut model = Model::new(config, 0)?;
        model.params.zero_all();
        Ok(model)
    }

    /// Wraps stored weights, checking names and shapes against `config`.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let template = Model::new(config, 0)?;
        template.params.check_compatible(&params)?;
        Ok(Model { params, ..template })
    }

    pub fn ids(&self) -> &ModelParams {
        &self.ids
    }

    /// Maps an instance to vocabulary indices and local interlocutor ids.
    pub fn encode_instance(&self, instance: &ContextInstance, vocab: &Vocabulary) -> Result<EncodedInstance> {
        if vocab.len() != self.config.vocab_size {
            bail!(
                Dimension,
                "vocabulary has {} entries but the model expects {}",
                vocab.len(),
                self.config.vocab_size
            );
        }
        EncodedInstance::new(
            instance,
            vocab,
            self.config.max_utterance_len,
            self.config.max_response_len,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTurn {
    pub speaker: usize,
    pub addressee: Option<usize>,
    pub tokens: Vec<usize>,
}

/// An instance in index form. Interlocutors are numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInstance {
    pub turns: Vec<EncodedTurn>,
    pub interlocutors: Vec<String>,
    pub roles: Roles,
    pub response: Vec<usize>,
}

/// Responding speaker and target addressee as local interlocutor indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roles {
    pub responding: usize,
    pub target: usize,
}

impl EncodedInstance {
    pub fn new(
        instance: &ContextInstance,
        vocab: &Vocabulary,
        max_utterance_len: usize,
        max_response_len: usize,
    ) -> Result<Self> {
        if instance.turns.is_empty() {
            bail!(Domain, "instance without context turns");
        }
        let interlocutors: Vec<String> = instance.interlocutors().into_iter().map(String::from).collect();
        let local = |who: &str| -> Result<usize> {
            match interlocutors.iter().position(|x| x == who) {
                Some(i) => Ok(i),
                None => bail!(Contract, "`{who}` does not appear in the context"),
            }
        };
        let mut turns = Vec::with_capacity(instance.turns.len());
        for turn in &instance.turns {
            if turn.tokens.is_empty() {
                bail!(Domain, "empty utterance by `{}`", turn.speaker);
            }
            if turn.tokens.len() > max_utterance_len {
                bail!(
                    Contract,
                    "utterance of {} tokens exceeds the cap of {max_utterance_len}",
                    turn.tokens.len()
                );
            }
            turns.push(EncodedTurn {
                speaker: local(&turn.speaker)?,
                addressee: turn.addressee.as_deref().map(local).transpose()?,
                tokens: turn.tokens.iter().map(|t| vocab.encode(t)).collect(),
            });
        }
        let roles = Roles {
            responding: local(&instance.responding_speaker)?,
            target: local(&instance.target_addressee)?,
        };
        if roles.responding == roles.target {
            bail!(Contract, "responding speaker equals target addressee");
        }
        let mut response: Vec<usize> = instance.response.iter().map(|t| vocab.encode(t)).collect();
        if response.len() > max_response_len {
            log::warn!("response of {} tokens truncated to {max_response_len}", response.len());
            response.truncate(max_response_len);
        }
        Ok(EncodedInstance {
            turns,
            interlocutors,
            roles,
            response,
        })
    }
}
