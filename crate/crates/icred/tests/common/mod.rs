#![allow(dead_code)]

use std::path::PathBuf;

use icred_core::corpus::{synth_generate, ContextInstance, SynthConfig, Vocabulary};
use icred_core::model::{EncodedInstance, Model, ModelConfig};
use icred_core::trainer::TrainConfig;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn small_synth(instances: usize) -> SynthConfig {
    SynthConfig {
        instances,
        interlocutors: 3,
        content_words: 8,
        filler_words: 3,
        turns: 3,
        min_fillers: 1,
        max_fillers: 2,
        ..Default::default()
    }
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        word_dim: 6,
        hidden_dim: 8,
        interlocutor_dim: 5,
        decoder_dim: 7,
        ..ModelConfig::default()
    }
}

pub fn train_config(max_steps: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        max_steps,
        lr: 1e-2,
        eval_every: 5,
        patience: 1000,
        seed: 5,
        max_grad_norm: Some(5.0),
    }
}

pub struct Setup {
    pub raw: Vec<ContextInstance>,
    pub vocab: Vocabulary,
    pub model: Model,
    pub data: Vec<EncodedInstance>,
}

pub fn setup(config: ModelConfig, instances: usize, seed: u64) -> Setup {
    let raw = synth_generate(&small_synth(instances), seed).unwrap();
    let vocab = Vocabulary::build(&raw, 1, None);
    let model = Model::new(
        ModelConfig {
            vocab_size: vocab.len(),
            ..config
        },
        seed,
    )
    .unwrap();
    let data = raw.iter().map(|i| model.encode_instance(i, &vocab).unwrap()).collect();
    Setup {
        raw,
        vocab,
        model,
        data,
    }
}
