//! Binary checkpoints and their key = value sidecars.
//!
//! A parameter file starts with the line `ICRED-CKPT-1`, followed by a
//! little-endian `u64` tensor count and, per tensor, the name (length-prefixed
//! UTF-8), the rank, each dimension and the row-major `f64` data. Training
//! state uses the same primitives under its own `ICRED-STATE-1` header.

use std::path::Path;

use icred_core::adam::{AdamConfig, AdamState, Moments};
use icred_core::model::{Model, ModelConfig};
use icred_core::tensor::{ParamStore, Tensor};
use icred_core::trainer::{CurvePoint, TrainConfig, TrainState};

use crate::config::{parse_pairs, train_from_pairs, train_to_pairs, write_pairs};
use crate::error::{IcredError, Result};
use crate::io::{read_text, write_bytes, write_text};

pub const MAGIC: &str = "ICRED-CKPT-1";
pub const STATE_MAGIC: &str = "ICRED-STATE-1";

pub const MODEL_CONFIG: &str = "model.cfg";
pub const MODEL_PARAMS: &str = "model.ckpt";
pub const VOCAB: &str = "vocab.txt";
pub const TRAIN_CONFIG: &str = "train.cfg";
pub const TRAIN_STATE: &str = "train.state";
pub const LAST_PARAMS: &str = "last.ckpt";
pub const BEST_PARAMS: &str = "best.ckpt";
pub const LOSS_CSV: &str = "loss.csv";

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(&mut self, magic: &str) {
        self.0.extend_from_slice(magic.as_bytes());
        self.0.push(b'\n');
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.usize(vs.len());
        vs.iter().for_each(|&v| self.f64(v));
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        self.0.push(v.is_some() as u8);
        self.f64(v.unwrap_or(0.0));
    }
    fn bool(&mut self, v: bool) {
        self.0.push(v as u8);
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path, magic: &str) -> Result<Self> {
        let want = magic.len() + 1;
        if bytes.len() < want || &bytes[..magic.len()] != magic.as_bytes() || bytes[magic.len()] != b'\n' {
            return Err(IcredError::format(path, format!("missing `{magic}` header")));
        }
        Ok(Reader { bytes, at: want, path })
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(IcredError::format(self.path, format!("{what} at byte {}", self.at)))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return self.fail(&format!("truncated {what}"));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        match usize::try_from(v) {
            Ok(v) if v <= self.bytes.len() * 8 + 64 => Ok(v),
            _ => self.fail(&format!("implausible {what} {v}")),
        }
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.usize(what)?;
        (0..n).map(|_| self.f64(what)).collect()
    }
    fn bool(&mut self, what: &str) -> Result<bool> {
        match self.take(1, what)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            _ => self.fail(&format!("bad flag for {what}")),
        }
    }
    fn opt_f64(&mut self, what: &str) -> Result<Option<f64>> {
        let some = self.bool(what)?;
        let v = self.f64(what)?;
        Ok(some.then_some(v))
    }
    fn str(&mut self, what: &str) -> Result<String> {
        let n = self.usize(what)?;
        let bytes = self.take(n, what)?;
        match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_string()),
            Err(_) => self.fail(&format!("{what} is not UTF-8")),
        }
    }
    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return self.fail("trailing data");
        }
        Ok(())
    }
}

pub fn encode_params(store: &ParamStore) -> Vec<u8> {
    let mut w = Writer::default();
    w.header(MAGIC);
    w.usize(store.len());
    for (_, name, t) in store.iter() {
        w.str(name);
        w.usize(t.shape().len());
        t.shape().iter().for_each(|&d| w.usize(d));
        t.data().iter().for_each(|&v| w.f64(v));
    }
    w.0
}

/// Parses a parameter file; `path` is only used in errors.
pub fn decode_params(bytes: &[u8], path: &Path) -> Result<ParamStore> {
    let mut r = Reader::new(bytes, path, MAGIC)?;
    let count = r.usize("tensor count")?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = r.str("tensor name")?;
        let rank = r.usize("rank")?;
        let shape = (0..rank).map(|_| r.usize("dimension")).collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        if len * 8 > bytes.len() {
            return r.fail(&format!("parameter `{name}` claims shape {shape:?}"));
        }
        let data = (0..len).map(|_| r.f64("tensor data")).collect::<Result<Vec<_>>>()?;
        let tensor =
            Tensor::new(shape, data).map_err(|e| IcredError::format(path, format!("parameter `{name}`: {e}")))?;
        store
            .insert(&name, tensor)
            .map_err(|e| IcredError::format(path, format!("parameter `{name}`: {e}")))?;
    }
    r.finish()?;
    Ok(store)
}

pub fn write_params(path: &Path, store: &ParamStore) -> Result<()> {
    write_bytes(path, &encode_params(store))
}

pub fn read_params(path: &Path) -> Result<ParamStore> {
    let bytes = std::fs::read(path).map_err(|e| IcredError::io(path, e))?;
    decode_params(&bytes, path)
}

/// Arranges `loaded` in the order `config` expects, naming the first
/// parameter that is missing, extra or misshapen.
pub fn conform(config: &ModelConfig, loaded: &ParamStore, path: &Path) -> Result<Model> {
    let template = Model::zeros(config.clone())?;
    let mut store = ParamStore::new();
    for (_, name, t) in template.params.iter() {
        let Some(found) = loaded.by_name(name) else {
            return Err(IcredError::format(path, format!("missing parameter `{name}`")));
        };
        if found.shape() != t.shape() {
            return Err(IcredError::format(
                path,
                format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    found.shape(),
                    t.shape()
                ),
            ));
        }
        store.insert(name, found.clone())?;
    }
    if let Some((_, extra, _)) = loaded.iter().find(|(_, n, _)| template.params.id(n).is_none()) {
        return Err(IcredError::format(path, format!("unexpected parameter `{extra}`")));
    }
    Ok(Model::from_params(config.clone(), store)?)
}

pub fn save_model_config(dir: &Path, config: &ModelConfig) -> Result<()> {
    write_text(&dir.join(MODEL_CONFIG), &write_pairs(&config.to_pairs()))
}

pub fn load_model_config(dir: &Path) -> Result<ModelConfig> {
    let path = dir.join(MODEL_CONFIG);
    let pairs = parse_pairs(&read_text(&path)?, &path)?;
    ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| IcredError::format(&path, e.to_string()))
}

/// Writes `model.cfg` and `model.ckpt`.
pub fn save_model(dir: &Path, model: &Model) -> Result<()> {
    save_model_config(dir, &model.config)?;
    write_params(&dir.join(MODEL_PARAMS), &model.params)
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let config = load_model_config(dir)?;
    let path = dir.join(MODEL_PARAMS);
    conform(&config, &read_params(&path)?, &path)
}

pub fn encode_state(state: &TrainState) -> Vec<u8> {
    let mut w = Writer::default();
    w.header(STATE_MAGIC);
    w.usize(state.step);
    let a = &state.adam;
    for v in [a.config.lr, a.config.beta1, a.config.beta2, a.config.eps] {
        w.f64(v);
    }
    w.u64(a.step);
    w.usize(a.moments.len());
    for m in &a.moments {
        w.f64s(&m.m);
        w.f64s(&m.v);
    }
    w.opt_f64(state.best_dev);
    w.bool(state.best_step.is_some());
    w.usize(state.best_step.unwrap_or(0));
    w.usize(state.bad_evals);
    w.bool(state.stopped_early);
    w.usize(state.curve.len());
    for p in &state.curve {
        w.usize(p.step);
        w.f64(p.train_loss);
        w.opt_f64(p.dev_nll);
    }
    w.0
}

/// Parses training state; best parameters are stored separately and come
/// back as `None`.
pub fn decode_state(bytes: &[u8], path: &Path, params: &ParamStore) -> Result<TrainState> {
    let mut r = Reader::new(bytes, path, STATE_MAGIC)?;
    let step = r.usize("step")?;
    let config = AdamConfig {
        lr: r.f64("lr")?,
        beta1: r.f64("beta1")?,
        beta2: r.f64("beta2")?,
        eps: r.f64("eps")?,
    };
    let adam_step = r.u64("adam step")?;
    let n = r.usize("moment count")?;
    if n != params.len() {
        return r.fail(&format!("{n} moment tensors for {} parameters", params.len()));
    }
    let mut moments = Vec::with_capacity(n);
    for (_, name, t) in params.iter() {
        let m = r.f64s("first moment")?;
        let v = r.f64s("second moment")?;
        if m.len() != t.len() || v.len() != t.len() {
            return r.fail(&format!("moments of `{name}` have the wrong length"));
        }
        moments.push(Moments { m, v });
    }
    let best_dev = r.opt_f64("best dev")?;
    let has_best = r.bool("best step")?;
    let best_step = r.usize("best step")?;
    let bad_evals = r.usize("bad evaluations")?;
    let stopped_early = r.bool("stop flag")?;
    let points = r.usize("curve length")?;
    let mut curve = Vec::with_capacity(points);
    for _ in 0..points {
        curve.push(CurvePoint {
            step: r.usize("curve step")?,
            train_loss: r.f64("train loss")?,
            dev_nll: r.opt_f64("dev nll")?,
        });
    }
    r.finish()?;
    Ok(TrainState {
        step,
        adam: AdamState {
            config,
            moments,
            step: adam_step,
        },
        best_dev,
        best_step: has_best.then_some(best_step),
        bad_evals,
        stopped_early,
        curve,
        best_params: None,
    })
}

/// Everything `train --resume` needs: the current weights, the optimizer and
/// loop state, the best weights so far and the training configuration.
pub fn save_training(dir: &Path, model: &Model, state: &TrainState, config: &TrainConfig) -> Result<()> {
    write_params(&dir.join(LAST_PARAMS), &model.params)?;
    write_bytes(&dir.join(TRAIN_STATE), &encode_state(state))?;
    write_text(&dir.join(TRAIN_CONFIG), &write_pairs(&train_to_pairs(config)))?;
    if let Some(best) = &state.best_params {
        write_params(&dir.join(BEST_PARAMS), best)?;
    }
    Ok(())
}

pub fn load_training(dir: &Path, config: &ModelConfig) -> Result<(Model, TrainState, TrainConfig)> {
    let last = dir.join(LAST_PARAMS);
    let model = conform(config, &read_params(&last)?, &last)?;
    let path = dir.join(TRAIN_STATE);
    let bytes = std::fs::read(&path).map_err(|e| IcredError::io(&path, e))?;
    let mut state = decode_state(&bytes, &path, &model.params)?;
    let best = dir.join(BEST_PARAMS);
    if best.exists() {
        state.best_params = Some(conform(config, &read_params(&best)?, &best)?.params);
    }
    let cfg_path = dir.join(TRAIN_CONFIG);
    let pairs = parse_pairs(&read_text(&cfg_path)?, &cfg_path)?;
    let train = train_from_pairs(&pairs).map_err(|e| IcredError::format(&cfg_path, e.to_string()))?;
    Ok((model, state, train))
}
