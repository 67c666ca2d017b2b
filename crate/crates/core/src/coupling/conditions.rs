use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use super::{compute_c_n, compute_delta, CouplingParams};
use crate::error::Result;
use crate::nnmodel::{Dataset, DerivativeBounds, NetworkConfig};
use crate::priors::prior_moment_bound;

/// Leading factor of `A2` in the statement of the mixture theorem, `1 + 1/sqrt(pi)`; the
/// cumulant-growth lemma that carries the proof uses `2 + 1/sqrt(pi)`.
pub const A2_THEOREM_PREFACTOR: f64 = 1.0 + 0.5641895835477563;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub bounds: DerivativeBounds,
    pub k: usize,
    pub d: usize,
    pub n_total: usize,
    pub beta: f64,
    pub c_big_n: f64,
    pub rho: f64,
    pub delta_used: f64,
    pub a1: f64,
    /// `(2 + 1/sqrt(pi)) sqrt(2 a2 sqrt(3/2))`, used in `A3`.
    pub a2: f64,
    /// `(1 + 1/sqrt(pi)) sqrt(2 a2 sqrt(3/2))`, reported for comparison.
    pub a2_alt: f64,
    pub a3: f64,
    pub h1: f64,
    pub h2: f64,
    /// `K ln(2Kd/delta) <= beta N`.
    pub cond_k: bool,
    /// `K d >= A3 (beta N)^2`.
    pub cond_kd: bool,
    /// `H1 <= 1/100` and `H2 <= 1/10`.
    pub cond_h: bool,
    /// `beta N >= 2`; a warning flag only.
    pub beta_n_ok: bool,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.cond_k && self.cond_kd && self.cond_h
    }
}

pub fn check_logconcavity_conditions(
    cfg: &NetworkConfig,
    data: &Dataset,
    beta: f64,
    n_total: usize,
) -> Result<ConditionReport> {
    let b = cfg.activation.theory_bounds();
    let v = cfg.v;
    let kf = cfg.k as f64;
    let c = compute_c_n(data, n_total, b.a0, v)?;
    let delta = compute_delta(cfg.k, b.a2, beta, c, v);
    let root = (2.0 * b.a2 * 1.5f64.sqrt()).sqrt();
    let a1 = 2.0 * b.a1 + 4.0 * 1.5f64.sqrt() * b.a2;
    let a2 = (2.0 + 1.0 / PI.sqrt()) * root;
    let a2_alt = A2_THEOREM_PREFACTOR * root;
    let cv = c * v;
    let a3 = 4.0 * (3.0 / (2.0 * E)).sqrt() * b.a2 * cv.powf(1.5) * (a1 + a2 * cv.sqrt());
    let h1 = 2.0 / (2.0 * PI).sqrt() * delta / (1.0 - delta) * (2.0 * (2.0 / delta).ln()).sqrt();
    let h2 =
        (b.a2 * beta * c * v / kf).powi(2) * delta * delta / (2.0 * PI * (1.0 - delta).powi(2));
    let bn = beta * n_total as f64;
    let log_term = (2.0 * kf * cfg.d as f64 / delta).ln();
    Ok(ConditionReport {
        bounds: b,
        k: cfg.k,
        d: cfg.d,
        n_total,
        beta,
        c_big_n: c,
        rho: 1.5f64.sqrt() * b.a2 * beta * c * v / kf,
        delta_used: delta,
        a1,
        a2,
        a2_alt,
        a3,
        h1,
        h2,
        cond_k: kf * log_term <= bn,
        cond_kd: kf * cfg.d as f64 >= a3 * bn * bn,
        cond_h: h1 <= 0.01 && h2 <= 0.1,
        beta_n_ok: bn >= 2.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    /// Requested moment order and the bound there.
    pub ell: u32,
    pub bound: f64,
    /// Exponent numerator `A1 C_n V beta n + A2 sqrt(C_n V K beta n ln(2Kd/delta))`, which is
    /// also the continuous minimiser over `ell`.
    pub ell_star: f64,
    /// Nearest admissible integer to `ell_star` and the bound there.
    pub ell_rounded: u32,
    pub bound_at_rounded: f64,
    pub bound_at_floor: f64,
    pub bound_at_ceil: f64,
    /// Value of the continuous relaxation at `ell_star`, `4 sqrt(e) n ell_star / d`.
    pub bound_at_ell_star: f64,
}

/// Hölder bound on `Var(u . v(w) | xi)` for unit `u` under the continuous prior, where
/// `v(w) = (X w_1, ..., X w_K)`: the prior moment bound of order `ell` times the exponential of
/// the cumulant-growth gap divided by `ell`. Sizes and `delta` are taken from `params`.
pub fn holder_variance_bound(
    ell: u32,
    params: &CouplingParams,
    bounds: &DerivativeBounds,
    v: f64,
) -> HolderBound {
    let (n, k, d, delta) = (params.n, params.k, params.d, params.delta);
    let b = bounds.clamped();
    let a1 = 2.0 * b.a1 + 4.0 * 1.5f64.sqrt() * b.a2;
    let a2 = (2.0 + 1.0 / PI.sqrt()) * (2.0 * b.a2 * 1.5f64.sqrt()).sqrt();
    let cvbn = params.c_n * v * params.beta * n as f64;
    let log_term = (2.0 * (k * d) as f64 / delta).ln();
    let gap = a1 * cvbn + a2 * cvbn.sqrt() * (k as f64 * log_term).sqrt();
    let at = |l: f64| prior_moment_bound(1, n, d) * l * (gap / l).exp();
    let ell = ell.max(1);
    let floor = (gap.floor() as u32).max(1);
    let ceil = (gap.ceil() as u32).max(1);
    let rounded = (gap.round() as u32).max(1);
    HolderBound {
        ell,
        bound: at(ell as f64),
        ell_star: gap,
        ell_rounded: rounded,
        bound_at_rounded: at(rounded as f64),
        bound_at_floor: at(floor as f64),
        bound_at_ceil: at(ceil as f64),
        bound_at_ell_star: at(gap.max(f64::MIN_POSITIVE)),
    }
}
