//! Threshold sweeps over a one-parameter prior family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{is_first_order, thresholds, TransitionOrder, CURVE_POINTS};
use crate::prior::{DiscretePrior, ScalarModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorFamily {
    /// `ρ δ(s − 1) + (1 − ρ) δ(s)`.
    Bernoulli,
    /// Two groups with zero mean and unit variance.
    Community,
}

impl PriorFamily {
    pub fn prior(self, rho: f64) -> Result<DiscretePrior<f64>> {
        match self {
            Self::Bernoulli => DiscretePrior::bernoulli(rho),
            Self::Community => DiscretePrior::community(rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub rho: f64,
    pub delta_amp: f64,
    pub delta_rs: f64,
    pub delta_spectral: f64,
    pub order: Option<TransitionOrder>,
    /// Why this point failed; the sweep carries on.
    pub error: Option<String>,
}

/// Thresholds at every `ρ`, in grid order. Failures are recorded per row.
pub fn phase_diagram(family: PriorFamily, rhos: &[f64]) -> Vec<PhaseRow> {
    rhos.par_iter()
        .map(|&rho| {
            match family.prior(rho).and_then(|p| thresholds(&ScalarModel::new(p))) {
                Ok(t) => PhaseRow {
                    rho,
                    delta_amp: t.delta_amp,
                    delta_rs: t.delta_rs,
                    delta_spectral: t.delta_spectral,
                    order: Some(t.order),
                    error: None,
                },
                Err(e) => PhaseRow {
                    rho,
                    delta_amp: f64::NAN,
                    delta_rs: f64::NAN,
                    delta_spectral: f64::NAN,
                    order: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// The `ρ` in `(lo, hi)` where the coexistence region closes, by bisection
/// on its existence. `lo` and `hi` must straddle the boundary.
pub fn first_order_boundary(family: PriorFamily, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let first = |rho: f64| -> Result<bool> { is_first_order(&ScalarModel::new(family.prior(rho)?), CURVE_POINTS) };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (first(a)?, first(b)?);
    if fa == fb {
        return Err(Error::InvalidArgument(format!(
            "first-order region does not change between rho = {lo} and rho = {hi}"
        )));
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if first(m)? == fa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoteRow {
    pub rho: f64,
    pub delta_opt: f64,
    /// `Δ_Opt·4ρ|ln ρ|`, which tends to one as `ρ → 0`.
    pub scaled: f64,
}

/// `Δ_Opt(ρ)` of the community family on `points` log-spaced densities from
/// `rho_max` down to `rho_min`.
pub fn small_rho_probe(rho_max: f64, rho_min: f64, points: usize) -> Result<Vec<AsymptoteRow>> {
    if !(rho_min > 0.0 && rho_max < 1.0 && rho_min < rho_max) || points < 2 {
        return Err(Error::InvalidArgument("need 0 < rho_min < rho_max < 1 and two points".into()));
    }
    let grid = crate::numeric::geomspace(rho_min, rho_max, points);
    grid.par_iter()
        .rev()
        .map(|&rho| {
            let t = thresholds(&ScalarModel::new(DiscretePrior::community(rho)?))?;
            Ok(AsymptoteRow { rho, delta_opt: t.delta_opt, scaled: t.delta_opt * 4.0 * rho * rho.ln().abs() })
        })
        .collect()
}
