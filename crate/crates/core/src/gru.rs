//! Gated recurrent unit in the Cho et al. (2014) form:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

use alloc::format;

use rand::Rng;

use crate::error::{bail, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Handles to the nine tensors of one GRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub input: usize,
    pub hidden: usize,
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    /// Registers `{prefix}.w_z` ... `{prefix}.b_h`. Matrices are drawn from
    /// `U(±1/√fan_in)`; each bias shares the bound of its input matrix.
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input == 0 || hidden == 0 {
            bail!(Dimension, "GRU `{prefix}` needs positive sizes, got {input}->{hidden}");
        }
        let bias_bound = 1.0 / libm::sqrt(input as f64);
        let mut w = |store: &mut ParamStore, name: &str| {
            store.insert(
                &format!("{prefix}.{name}"),
                Tensor::uniform_fan_in(&[hidden, input], rng)?,
            )
        };
        let w_z = w(store, "w_z")?;
        let w_r = w(store, "w_r")?;
        let w_h = w(store, "w_h")?;
        let mut u = |store: &mut ParamStore, name: &str| {
            store.insert(
                &format!("{prefix}.{name}"),
                Tensor::uniform_fan_in(&[hidden, hidden], rng)?,
            )
        };
        let u_z = u(store, "u_z")?;
        let u_r = u(store, "u_r")?;
        let u_h = u(store, "u_h")?;
        let mut b = |store: &mut ParamStore, name: &str| {
            store.insert(
                &format!("{prefix}.{name}"),
                Tensor::uniform(&[hidden], bias_bound, rng)?,
            )
        };
        let b_z = b(store, "b_z")?;
        let b_r = b(store, "b_r")?;
        let b_h = b(store, "b_h")?;
        Ok(GruParams {
            input,
            hidden,
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        })
    }

    /// Looks up an already registered GRU by prefix.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |name: &str| {
            let full = format!("{prefix}.{name}");
            store
                .id(&full)
                .ok_or_else(|| crate::Error::Contract(format!("missing parameter `{full}`")))
        };
        let w_z = get("w_z")?;
        let shape = store.get(w_z).shape();
        let (hidden, input) = (shape[0], shape[1]);
        Ok(GruParams {
            input,
            hidden,
            w_z,
            w_r: get("w_r")?,
            w_h: get("w_h")?,
            u_z: get("u_z")?,
            u_r: get("u_r")?,
            u_h: get("u_h")?,
            b_z: get("b_z")?,
            b_r: get("b_r")?,
            b_h: get("b_h")?,
        })
    }
}

/// One recurrent step `h' = GRU(h, x)`.
pub fn gru_step(tape: &mut Tape<'_>, params: &GruParams, h: Var, x: Var) -> Result<Var> {
    if tape.size(h) != params.hidden || tape.shape(h).1 != 1 {
        bail!(
            Dimension,
            "GRU hidden state has {} entries, expected {}",
            tape.size(h),
            params.hidden
        );
    }
    if tape.size(x) != params.input || tape.shape(x).1 != 1 {
        bail!(
            Dimension,
            "GRU input has {} entries, expected {}",
            tape.size(x),
            params.input
        );
    }
    let gate = |tape: &mut Tape<'_>, w: ParamId, u: ParamId, b: ParamId, hh: Var| -> Result<Var> {
        let (w, u, b) = (tape.param(w), tape.param(u), tape.param(b));
        let wx = tape.matvec(w, x)?;
        let uh = tape.matvec(u, hh)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, params.w_z, params.u_z, params.b_z, h)?;
    let z = tape.sigmoid(z_pre)?;
    let r_pre = gate(tape, params.w_r, params.u_r, params.b_r, h)?;
    let r = tape.sigmoid(r_pre)?;
    let rh = tape.mul(r, h)?;
    let cand_pre = gate(tape, params.w_h, params.u_h, params.b_h, rh)?;
    let candidate = tape.tanh(cand_pre)?;
    let keep = tape.one_minus(z)?;
    let kept = tape.mul(keep, h)?;
    let fresh = tape.mul(z, candidate)?;
    tape.add(kept, fresh)
}
