//! Plain-loop reimplementation of the network, reading weights by name.
//! Shares nothing with the tape code beyond the parameter store.

#![allow(dead_code)]

use icred_core::corpus::{synth_generate, SynthConfig, Vocabulary, BOS, EOS};
use icred_core::model::{EncodedInstance, MemoryType, Model, ModelConfig, Roles};
use icred_core::tensor::ParamStore;

pub type Vector = Vec<f64>;

pub struct Oracle<'a> {
    pub params: &'a ParamStore,
    pub config: &'a ModelConfig,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'a> Oracle<'a> {
    pub fn new(model: &'a Model) -> Self {
        Oracle {
            params: &model.params,
            config: &model.config,
        }
    }

    fn data(&self, name: &str) -> &[f64] {
        self.params
            .by_name(name)
            .unwrap_or_else(|| panic!("no parameter {name}"))
            .data()
    }

    /// `W x` where `W` is stored row-major with `x.len()` columns.
    pub fn matvec(&self, name: &str, x: &[f64]) -> Vector {
        let w = self.data(name);
        assert_eq!(w.len() % x.len(), 0, "{name}");
        let rows = w.len() / x.len();
        (0..rows)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..x.len() {
                    acc += w[i * x.len() + j] * x[j];
                }
                acc
            })
            .collect()
    }

    /// `Wᵀ x` where `W` has `x.len()` rows.
    pub fn matvec_t(&self, name: &str, x: &[f64]) -> Vector {
        let w = self.data(name);
        let cols = w.len() / x.len();
        (0..cols)
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..x.len() {
                    acc += w[i * cols + j] * x[i];
                }
                acc
            })
            .collect()
    }

    pub fn gru(&self, prefix: &str, h: &[f64], x: &[f64]) -> Vector {
        let p = |s: &str| format!("{prefix}.{s}");
        let wz = self.matvec(&p("w_z"), x);
        let wr = self.matvec(&p("w_r"), x);
        let wh = self.matvec(&p("w_h"), x);
        let uz = self.matvec(&p("u_z"), h);
        let ur = self.matvec(&p("u_r"), h);
        let (bz, br, bh) = (self.data(&p("b_z")), self.data(&p("b_r")), self.data(&p("b_h")));
        let n = h.len();
        let mut z = vec![0.0; n];
        let mut rh = vec![0.0; n];
        for i in 0..n {
            z[i] = sigmoid(wz[i] + uz[i] + bz[i]);
            rh[i] = sigmoid(wr[i] + ur[i] + br[i]) * h[i];
        }
        let uh = self.matvec(&p("u_h"), &rh);
        (0..n)
            .map(|i| {
                let cand = (wh[i] + uh[i] + bh[i]).tanh();
                (1.0 - z[i]) * h[i] + z[i] * cand
            })
            .collect()
    }

    pub fn embedding(&self, token: usize) -> Vector {
        let d = self.config.word_dim;
        self.data("embedding")[token * d..(token + 1) * d].to_vec()
    }

    /// Word states of one utterance.
    pub fn encode(&self, tokens: &[usize]) -> Vec<Vector> {
        let dir = self.config.hidden_dim / 2;
        let n = tokens.len();
        let mut fwd = Vec::new();
        let mut h = vec![0.0; dir];
        for &t in tokens {
            h = self.gru("encoder.forward", &h, &self.embedding(t));
            fwd.push(h.clone());
        }
        let mut bwd = vec![Vec::new(); n];
        let mut h = vec![0.0; dir];
        for i in (0..n).rev() {
            h = self.gru("encoder.backward", &h, &self.embedding(tokens[i]));
            bwd[i] = h.clone();
        }
        // bwd[i] has read words n-1 down to i, i.e. n-i words
        (0..n)
            .map(|i| {
                let mut col = fwd[i].clone();
                col.extend_from_slice(&bwd[i]);
                col
            })
            .collect()
    }

    pub fn interaction(&self, inst: &EncodedInstance) -> Vec<Vector> {
        let k = inst.interlocutors.len();
        let mut cols = vec![vec![0.0; self.config.interlocutor_dim]; k];
        for turn in &inst.turns {
            let states = self.encode(&turn.tokens);
            let summary = states.last().unwrap().clone();
            cols = (0..k)
                .map(|i| {
                    let prefix = if i == turn.speaker {
                        "interaction.speaker"
                    } else if turn.addressee == Some(i) {
                        "interaction.addressee"
                    } else {
                        "interaction.observer"
                    };
                    self.gru(prefix, &cols[i], &summary)
                })
                .collect();
        }
        cols
    }

    pub fn memory(&self, inst: &EncodedInstance, roles: Roles) -> Vec<Vector> {
        let last_by = |who: usize| {
            inst.turns
                .iter()
                .rposition(|t| t.speaker == who)
                .map(|t| self.encode(&inst.turns[t].tokens))
                .unwrap_or_default()
        };
        match self.config.memory_type {
            MemoryType::Addressee => last_by(roles.target),
            MemoryType::Speaker => last_by(roles.responding),
            MemoryType::Latest => self.encode(&inst.turns.last().unwrap().tokens),
            MemoryType::All => inst.turns.iter().flat_map(|t| self.encode(&t.tokens)).collect(),
            MemoryType::None => Vec::new(),
        }
    }

    /// `(c, α)` by explicit loops.
    pub fn attend(&self, s: &[f64], memory: &[Vector]) -> (Vector, Vector) {
        let scores: Vec<f64> = memory
            .iter()
            .map(|m| {
                let wm = self.matvec("decoder.attention", m);
                s.iter().zip(&wm).map(|(a, b)| a * b).sum()
            })
            .collect();
        let alpha = softmax(&scores);
        let mut c = vec![0.0; memory[0].len()];
        for (a, m) in alpha.iter().zip(memory) {
            for (ci, mi) in c.iter_mut().zip(m) {
                *ci += a * mi;
            }
        }
        (c, alpha)
    }

    fn vectors(&self, cols: &[Vector], roles: Roles) -> (Vector, Vector) {
        let ia = self.config.interlocutor_dim;
        let a_res = if self.config.use_speaker_vector {
            cols[roles.responding].clone()
        } else {
            vec![0.0; ia]
        };
        let a_tgt = if self.config.use_addressee_vector {
            cols[roles.target].clone()
        } else {
            vec![0.0; ia]
        };
        (a_res, a_tgt)
    }

    pub fn initial_state(&self, a_res: &[f64], a_tgt: &[f64]) -> Vector {
        let both: Vector = a_res.iter().chain(a_tgt).copied().collect();
        self.matvec("decoder.init", &both).into_iter().map(f64::tanh).collect()
    }

    /// Returns `(logits, s_j)`.
    pub fn decode_step(
        &self,
        s: &[f64],
        x: &[f64],
        a_res: &[f64],
        a_tgt: &[f64],
        memory: &[Vector],
    ) -> (Vector, Vector) {
        let c = if memory.is_empty() {
            vec![0.0; self.config.hidden_dim]
        } else {
            self.attend(s, memory).0
        };
        let input: Vector = c.iter().chain(a_res).chain(a_tgt).chain(x).copied().collect();
        let s_next = self.gru("decoder.gru", s, &input);
        let features: Vector = s_next.iter().chain(&c).chain(a_res).chain(a_tgt).copied().collect();
        let mut proj = self.matvec("decoder.output.weight", &features);
        for (p, b) in proj.iter_mut().zip(self.data("decoder.output.bias")) {
            *p += b;
        }
        let logits = self.matvec("embedding", &proj);
        (logits, s_next)
    }

    /// Mean token NLL (EOS included) under teacher forcing.
    pub fn response_nll(&self, inst: &EncodedInstance) -> f64 {
        let cols = self.interaction(inst);
        let memory = self.memory(inst, inst.roles);
        let (a_res, a_tgt) = self.vectors(&cols, inst.roles);
        let mut s = self.initial_state(&a_res, &a_tgt);
        let mut x = self.embedding(BOS);
        let targets: Vec<usize> = inst.response.iter().copied().chain([EOS]).collect();
        let mut total = 0.0;
        for &t in &targets {
            let (logits, s_next) = self.decode_step(&s, &x, &a_res, &a_tgt, &memory);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            total += lse - logits[t];
            s = s_next;
            x = self.embedding(t);
        }
        total / targets.len() as f64
    }

    pub fn l2(&self) -> f64 {
        self.params
            .iter()
            .map(|(_, _, t)| t.data().iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    pub fn forward_loss(&self, inst: &EncodedInstance) -> f64 {
        self.response_nll(inst) + self.config.l2_weight * self.l2()
    }

    /// Raw scores of the speaker and addressee heads.
    pub fn prediction_scores(&self, inst: &EncodedInstance) -> (Vector, Vector) {
        let cols = self.interaction(inst);
        let mut pooled = cols[0].clone();
        for c in &cols[1..] {
            for (p, v) in pooled.iter_mut().zip(c) {
                if *v > *p {
                    *p = *v;
                }
            }
        }
        let last = self.encode(&inst.turns.last().unwrap().tokens).pop().unwrap();
        let features: Vector = pooled.iter().chain(&last).copied().collect();
        let head = |name: &str| {
            let q = self.matvec_t(name, &features);
            cols.iter()
                .map(|a| q.iter().zip(a).map(|(x, y)| x * y).sum())
                .collect::<Vector>()
        };
        (head("predict.speaker"), head("predict.addressee"))
    }

    pub fn joint_loss(&self, inst: &EncodedInstance) -> f64 {
        let (spk, adr) = self.prediction_scores(inst);
        let nll = |s: &[f64], gold: usize| -softmax(s)[gold].ln();
        self.forward_loss(inst)
            + self.config.prediction_weight * (nll(&spk, inst.roles.responding) + nll(&adr, inst.roles.target))
    }
}

pub fn softmax(xs: &[f64]) -> Vector {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A micro configuration and a matching synthetic corpus.
pub fn micro(config: ModelConfig, seed: u64) -> (Model, Vec<EncodedInstance>) {
    let synth = SynthConfig {
        instances: 12,
        interlocutors: 4,
        content_words: 8,
        filler_words: 3,
        turns: 3,
        min_fillers: 1,
        max_fillers: 2,
        ..Default::default()
    };
    let data = synth_generate(&synth, seed).unwrap();
    let vocab = Vocabulary::build(&data, 1, None);
    let model = Model::new(
        ModelConfig {
            vocab_size: vocab.len(),
            ..config
        },
        seed,
    )
    .unwrap();
    let encoded = data.iter().map(|i| model.encode_instance(i, &vocab).unwrap()).collect();
    (model, encoded)
}

/// Dims at most 8, all different so transposition mistakes cannot hide.
pub fn micro_config() -> ModelConfig {
    ModelConfig {
        word_dim: 5,
        hidden_dim: 6,
        interlocutor_dim: 4,
        decoder_dim: 7,
        l2_weight: 1e-3,
        ..ModelConfig::default()
    }
}

/// Scales every weight so nonlinearities leave their linear regime.
pub fn amplify(model: &mut Model, factor: f64) {
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        for x in model.params.get_mut(id).data_mut() {
            *x *= factor;
        }
    }
}

/// Central-difference check of the summed loss over `instances`.
pub fn check_gradients(
    model: &Model,
    instances: &[EncodedInstance],
    joint: bool,
) -> icred_core::gradcheck::GradCheckReport {
    use icred_core::gradcheck::{grad_check, GradCheckConfig};
    use icred_core::tensor::GradStore;
    let loss = |p: &ParamStore| {
        let mut m = model.clone();
        m.params = p.clone();
        let mut total = 0.0;
        for inst in instances {
            total += if joint {
                m.joint_loss(inst)?.total
            } else {
                m.forward_loss(inst)?.total
            };
        }
        Ok(total)
    };
    let grads = |p: &ParamStore| {
        let mut g = GradStore::zeros_like(p);
        for inst in instances {
            model.loss_and_grads_with(inst, joint, &mut g)?;
        }
        Ok(g)
    };
    grad_check(&model.params, loss, grads, &GradCheckConfig::default()).unwrap()
}
