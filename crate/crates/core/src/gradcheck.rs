//! Central-difference verification of analytic gradients.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{GradStore, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Lower bound on the denominator of the relative error, so coordinates
    /// whose true gradient is ~0 are judged on absolute error instead.
    pub floor: f64,
    /// Check at most this many evenly spaced coordinates per tensor.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            max_coords_per_param: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedCoordinate {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `(name, max relative error, coordinates checked)` per tensor.
    pub per_param: Vec<(String, f64, usize)>,
    pub flagged: Vec<FlaggedCoordinate>,
    pub coordinates_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.per_param.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `grad_fn` against central differences of `loss_fn` at `params`.
///
/// `loss_fn` must be deterministic; it is evaluated twice at the base point
/// and the check is refused if the two values differ in any bit.
pub fn grad_check<L, G>(
    params: &ParamStore,
    loss_fn: L,
    grad_fn: G,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    L: Fn(&ParamStore) -> Result<f64>,
    G: FnOnce(&ParamStore) -> Result<GradStore>,
{
    let base_a = loss_fn(params)?;
    let base_b = loss_fn(params)?;
    if base_a.to_bits() != base_b.to_bits() {
        bail!(Contract, "loss function is not deterministic ({base_a} vs {base_b})");
    }
    let analytic = grad_fn(params)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        per_param: Vec::new(),
        flagged: Vec::new(),
        coordinates_checked: 0,
    };
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let len = params.get(id).len();
        let stride = match config.max_coords_per_param {
            Some(k) if k > 0 && len > k => len.div_ceil(k),
            _ => 1,
        };
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for index in (0..len).step_by(stride) {
            let original = params.get(id).data()[index];
            probe.get_mut(id).data_mut()[index] = original + config.step;
            let plus = loss_fn(&probe)?;
            probe.get_mut(id).data_mut()[index] = original - config.step;
            let minus = loss_fn(&probe)?;
            probe.get_mut(id).data_mut()[index] = original;
            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic.get(id)[index];
            let rel = relative_error(a, numeric, config.floor);
            if rel.is_nan() || rel > config.tolerance {
                report.flagged.push(FlaggedCoordinate {
                    param: params.name(id).to_string(),
                    index,
                    analytic: a,
                    numeric,
                    relative_error: rel,
                });
            }
            worst = worst.max(rel);
            checked += 1;
        }
        report.coordinates_checked += checked;
        report.per_param.push((params.name(id).to_string(), worst, checked));
    }
    Ok(report)
}
