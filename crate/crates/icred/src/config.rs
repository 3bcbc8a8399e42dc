//! Run configuration: a flat `key = value` file merged over built-in
//! defaults, with command-line flags applied last.
//!
//! Keys are the model fields (`word_dim`, `memory_type`, ...), the training
//! fields (`batch_size`, `lr`, ...), data options, `synth.*` generator
//! options, decoding options and paths. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use icred_core::corpus::{SynthConfig, DEFAULT_WINDOW};
use icred_core::model::ModelConfig;
use icred_core::trainer::TrainConfig;

use crate::error::{IcredError, Result};
use crate::io::read_text;

/// Splits `key = value` lines. `#` starts a comment line; blank lines are
/// ignored; a key may appear once.
pub fn parse_pairs(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(IcredError::format(
                path,
                format!("line {}: expected `key = value`", i + 1),
            ));
        };
        let (k, v) = (k.trim(), v.trim());
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(IcredError::format(
                path,
                format!("line {}: key `{k}` given twice", i + 1),
            ));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn write_pairs<K: AsRef<str>>(pairs: &[(K, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{} = {v}\n", k.as_ref())).collect()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| IcredError::Config(format!("`{key}`: cannot parse {value:?}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

const TRAIN_KEYS: [&str; 7] = [
    "batch_size",
    "max_steps",
    "lr",
    "eval_every",
    "patience",
    "seed",
    "max_grad_norm",
];

fn set_train(train: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "batch_size" => train.batch_size = parse(key, value)?,
        "max_steps" => train.max_steps = parse(key, value)?,
        "lr" => train.lr = parse(key, value)?,
        "eval_every" => train.eval_every = parse(key, value)?,
        "patience" => train.patience = parse(key, value)?,
        "seed" => train.seed = parse(key, value)?,
        "max_grad_norm" => train.max_grad_norm = parse_opt(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn train_to_pairs(train: &TrainConfig) -> Vec<(&'static str, String)> {
    let values = [
        train.batch_size.to_string(),
        train.max_steps.to_string(),
        format!("{:?}", train.lr),
        train.eval_every.to_string(),
        train.patience.to_string(),
        train.seed.to_string(),
        train
            .max_grad_norm
            .map_or_else(|| "none".to_string(), |v| format!("{v:?}")),
    ];
    TRAIN_KEYS.iter().copied().zip(values).collect()
}

pub fn train_from_pairs(pairs: &[(String, String)]) -> Result<TrainConfig> {
    let mut train = TrainConfig::default();
    for (k, v) in pairs {
        if !set_train(&mut train, k, v)? {
            return Err(IcredError::Config(format!("unknown training key `{k}`")));
        }
    }
    train.validate()?;
    Ok(train)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataConfig {
    /// Preceding turns kept as context when ingesting.
    pub window: usize,
    pub min_count: usize,
    pub max_vocab: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            window: DEFAULT_WINDOW,
            min_count: 1,
            max_vocab: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Paths {
    pub train_corpus: Option<PathBuf>,
    pub dev_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub generic_rules: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
}

impl Paths {
    fn slot(&mut self, key: &str) -> Option<&mut Option<PathBuf>> {
        Some(match key {
            "train_corpus" => &mut self.train_corpus,
            "dev_corpus" => &mut self.dev_corpus,
            "test_corpus" => &mut self.test_corpus,
            "vocab" => &mut self.vocab,
            "lexicon" => &mut self.lexicon,
            "generic_rules" => &mut self.generic_rules,
            "checkpoint" => &mut self.checkpoint,
            "output" => &mut self.output,
            "word_vectors" => &mut self.word_vectors,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    /// 1 means greedy decoding.
    pub beam: usize,
    /// Worker threads; 1 runs everything on the calling thread.
    pub threads: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            beam: 1,
            threads: 1,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if ModelConfig::keys().contains(&key) {
            return Ok(self.model.set(key, value)?);
        }
        if set_train(&mut self.train, key, value)? {
            return Ok(());
        }
        if let Some(slot) = self.paths.slot(key) {
            *slot = Some(PathBuf::from(value));
            return Ok(());
        }
        if let Some(field) = key.strip_prefix("synth.") {
            return self.set_synth(field, value);
        }
        match key {
            "window" => self.data.window = parse(key, value)?,
            "min_count" => self.data.min_count = parse(key, value)?,
            "max_vocab" => self.data.max_vocab = parse_opt(key, value)?,
            "beam" => self.beam = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            _ => return Err(IcredError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn set_synth(&mut self, field: &str, value: &str) -> Result<()> {
        let s = &mut self.synth;
        let key = format!("synth.{field}");
        match field {
            "instances" => s.instances = parse(&key, value)?,
            "interlocutors" => s.interlocutors = parse(&key, value)?,
            "content_words" => s.content_words = parse(&key, value)?,
            "filler_words" => s.filler_words = parse(&key, value)?,
            "turns" => s.turns = parse(&key, value)?,
            "min_fillers" => s.min_fillers = parse(&key, value)?,
            "max_fillers" => s.max_fillers = parse(&key, value)?,
            "unaddressed" => s.unaddressed = parse(&key, value)?,
            "frame" => s.frame = value.split_whitespace().map(String::from).collect(),
            _ => return Err(IcredError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every pair of a configuration file on top of `self`.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        for (k, v) in parse_pairs(&read_text(path)?, path)? {
            self.set(&k, &v).map_err(|e| IcredError::format(path, e.to_string()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if self.beam == 0 {
            return Err(IcredError::Config("`beam` must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(IcredError::Config("`threads` must be at least 1".into()));
        }
        if self.data.window == 0 {
            return Err(IcredError::Config("`window` must be at least 1".into()));
        }
        Ok(())
    }

    /// Every key with its current value, for `--help`-style dumps and logs.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .model
            .to_pairs()
            .into_iter()
            .chain(train_to_pairs(&self.train))
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        out.push(("window".into(), self.data.window.to_string()));
        out.push(("min_count".into(), self.data.min_count.to_string()));
        out.push(("max_vocab".into(), show_opt(&self.data.max_vocab)));
        out.push(("beam".into(), self.beam.to_string()));
        out.push(("threads".into(), self.threads.to_string()));
        let s = &self.synth;
        for (k, v) in [
            ("instances", s.instances.to_string()),
            ("interlocutors", s.interlocutors.to_string()),
            ("content_words", s.content_words.to_string()),
            ("filler_words", s.filler_words.to_string()),
            ("turns", s.turns.to_string()),
            ("min_fillers", s.min_fillers.to_string()),
            ("max_fillers", s.max_fillers.to_string()),
            ("unaddressed", format!("{:?}", s.unaddressed)),
            ("frame", s.frame.join(" ")),
        ] {
            out.push((format!("synth.{k}"), v));
        }
        let p = self.paths.clone();
        for (k, v) in [
            ("train_corpus", p.train_corpus),
            ("dev_corpus", p.dev_corpus),
            ("test_corpus", p.test_corpus),
            ("vocab", p.vocab),
            ("lexicon", p.lexicon),
            ("generic_rules", p.generic_rules),
            ("checkpoint", p.checkpoint),
            ("output", p.output),
            ("word_vectors", p.word_vectors),
        ] {
            if let Some(v) = v {
                out.push((k.into(), v.display().to_string()));
            }
        }
        out
    }
}

/// Returns the path if it was configured, naming `key` otherwise.
pub fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| IcredError::Config(format!("no `{key}` given (flag or config key `{key}`)")))
}

/// Like [`required`] but also checks that the file exists.
pub fn existing<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = required(path, key)?;
    if !p.exists() {
        return Err(IcredError::Config(format!("`{key}` {} does not exist", p.display())));
    }
    Ok(p)
}
