use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Which word states the decoder attends over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryType {
    /// Last utterance spoken by the target addressee.
    Addressee,
    /// Every context utterance, in order.
    All,
    /// The most recent context utterance.
    Latest,
    /// Last utterance spoken by the responding speaker.
    Speaker,
    /// No memory; the attention vector is zero.
    None,
}

impl MemoryType {
    pub const ALL: [MemoryType; 5] = [
        MemoryType::Addressee,
        MemoryType::All,
        MemoryType::Latest,
        MemoryType::Speaker,
        MemoryType::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryType::Addressee => "addressee",
            MemoryType::All => "all",
            MemoryType::Latest => "latest",
            MemoryType::Speaker => "speaker",
            MemoryType::None => "none",
        }
    }
}

impl fmt::Display for MemoryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "addressee" => MemoryType::Addressee,
            "all" | "all-utterance" => MemoryType::All,
            "latest" => MemoryType::Latest,
            "speaker" => MemoryType::Speaker,
            "none" => MemoryType::None,
            other => bail!(Config, "unknown memory type `{other}`"),
        })
    }
}

/// What to attend over when the selected speaker never spoke in the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyMemory {
    /// Attention vector is zero at every step.
    Zero,
    /// Fall back to the latest utterance.
    Latest,
}

impl FromStr for EmptyMemory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(EmptyMemory::Zero),
            "latest" => Ok(EmptyMemory::Latest),
            other => Err(Error::Config(format!("unknown empty-memory fallback `{other}`"))),
        }
    }
}

impl fmt::Display for EmptyMemory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmptyMemory::Zero => "zero",
            EmptyMemory::Latest => "latest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_dim: usize,
    /// Utterance encoder output size; each direction gets half.
    pub hidden_dim: usize,
    pub interlocutor_dim: usize,
    pub decoder_dim: usize,
    pub vocab_size: usize,
    pub max_utterance_len: usize,
    pub max_response_len: usize,
    pub memory_type: MemoryType,
    pub empty_memory: EmptyMemory,
    pub use_speaker_vector: bool,
    pub use_addressee_vector: bool,
    pub joint_prediction: bool,
    pub l2_weight: f64,
    pub prediction_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 300,
            hidden_dim: 512,
            interlocutor_dim: 1024,
            decoder_dim: 512,
            vocab_size: 4,
            max_utterance_len: 20,
            max_response_len: 20,
            memory_type: MemoryType::Addressee,
            empty_memory: EmptyMemory::Zero,
            use_speaker_vector: true,
            use_addressee_vector: true,
            joint_prediction: false,
            l2_weight: 1e-4,
            prediction_weight: 1.0,
        }
    }
}

const KEYS: [&str; 14] = [
    "word_dim",
    "hidden_dim",
    "interlocutor_dim",
    "decoder_dim",
    "vocab_size",
    "max_utterance_len",
    "max_response_len",
    "memory_type",
    "empty_memory",
    "use_speaker_vector",
    "use_addressee_vector",
    "joint_prediction",
    "l2_weight",
    "prediction_weight",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse {value:?}")))
}

impl ModelConfig {
    /// Same dimension `d` everywhere; handy for small experiments.
    pub fn uniform(dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            word_dim: dim,
            hidden_dim: dim,
            interlocutor_dim: dim,
            decoder_dim: dim,
            vocab_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("hidden_dim", self.hidden_dim),
            ("interlocutor_dim", self.interlocutor_dim),
            ("decoder_dim", self.decoder_dim),
            ("max_utterance_len", self.max_utterance_len),
            ("max_response_len", self.max_response_len),
        ] {
            if v == 0 {
                bail!(Config, "`{name}` must be positive");
            }
        }
        if !self.hidden_dim.is_multiple_of(2) {
            bail!(
                Config,
                "`hidden_dim` ({}) must be even to split across directions",
                self.hidden_dim
            );
        }
        if self.vocab_size < 4 {
            bail!(
                Config,
                "`vocab_size` ({}) must cover the four reserved tokens",
                self.vocab_size
            );
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            bail!(Config, "`l2_weight` must be a finite non-negative number");
        }
        if !(self.prediction_weight >= 0.0 && self.prediction_weight.is_finite()) {
            bail!(Config, "`prediction_weight` must be a finite non-negative number");
        }
        Ok(())
    }

    pub fn keys() -> &'static [&'static str] {
        &KEYS
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "word_dim" => self.word_dim = parse(key, value)?,
            "hidden_dim" => self.hidden_dim = parse(key, value)?,
            "interlocutor_dim" => self.interlocutor_dim = parse(key, value)?,
            "decoder_dim" => self.decoder_dim = parse(key, value)?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "max_utterance_len" => self.max_utterance_len = parse(key, value)?,
            "max_response_len" => self.max_response_len = parse(key, value)?,
            "memory_type" => self.memory_type = value.trim().parse()?,
            "empty_memory" => self.empty_memory = value.trim().parse()?,
            "use_speaker_vector" => self.use_speaker_vector = parse(key, value)?,
            "use_addressee_vector" => self.use_addressee_vector = parse(key, value)?,
            "joint_prediction" => self.joint_prediction = parse(key, value)?,
            "l2_weight" => self.l2_weight = parse(key, value)?,
            "prediction_weight" => self.prediction_weight = parse(key, value)?,
            other => bail!(Config, "unknown model key `{other}`"),
        }
        Ok(())
    }

    /// Every field as `(key, value)` text, in a fixed order. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.word_dim.to_string(),
            self.hidden_dim.to_string(),
            self.interlocutor_dim.to_string(),
            self.decoder_dim.to_string(),
            self.vocab_size.to_string(),
            self.max_utterance_len.to_string(),
            self.max_response_len.to_string(),
            self.memory_type.to_string(),
            self.empty_memory.to_string(),
            self.use_speaker_vector.to_string(),
            self.use_addressee_vector.to_string(),
            self.joint_prediction.to_string(),
            format!("{:?}", self.l2_weight),
            format!("{:?}", self.prediction_weight),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Reads a complete configuration; every key must be present once.
    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(pairs: I) -> Result<Self> {
        let mut config = ModelConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (k, v) in pairs {
            if seen.contains(&k) {
                bail!(Config, "key `{k}` given twice");
            }
            config.set(k, v)?;
            seen.push(k);
        }
        if let Some(missing) = KEYS.iter().find(|k| !seen.contains(k)) {
            bail!(Config, "missing model key `{missing}`");
        }
        config.validate()?;
        Ok(config)
    }

    /// Short variant label used in reports.
    pub fn variant_name(&self) -> String {
        let mut name = match self.memory_type {
            MemoryType::Addressee => String::from("full"),
            other => format!("memory={other}"),
        };
        if !self.use_speaker_vector {
            name.push_str(" -spk_vec");
        }
        if !self.use_addressee_vector {
            name.push_str(" -adr_vec");
        }
        if self.joint_prediction {
            name.push_str(" +joint");
        }
        name
    }
}
