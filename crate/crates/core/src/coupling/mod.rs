//! Gaussian auxiliary-variable coupling.
//!
//! Given weights `w`, the auxiliary matrix `xi` (n x K) has independent entries
//! `N(x_i . w_k, 1/rho)` restricted to the polytope `B` of matrices whose data-weighted
//! column sums are bounded. Integrating `xi` out recovers the posterior on `w`; for large
//! enough `rho` the reverse conditional `w | xi` is log-concave, and under the size conditions
//! reported by [`check_logconcavity_conditions`] so is the marginal of `xi`.

mod conditions;
mod marginal;
mod zfun;

pub use conditions::{
    check_logconcavity_conditions, holder_variance_bound, ConditionReport, HolderBound,
    A2_THEOREM_PREFACTOR,
};
pub use marginal::{
    marginal_concavity_estimate, marginal_score, marginal_score_exact, power_iteration_lambda_max,
    ConcavityEstimate, MarginalScore,
};
pub use zfun::{
    coupling_probability_mc, estimate_z_and_check, log_z_intercept_only, probability_lower_bound,
    z_gradient_bound, McProbability, ZCheck,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Error, Result};
use crate::nnmodel::{
    dot, forward_pass, hessian_parts, posterior_score, Dataset, NetworkConfig, WeightMatrix,
};

pub const DEFAULT_REJECTION_BUDGET: usize = 1000;

/// `max_{i<n} |y_i| + a0 V`.
pub fn compute_c_n(data: &Dataset, n: usize, a0: f64, v: f64) -> Result<f64> {
    if n == 0 {
        return Err(config_err("C_n needs at least one observation"));
    }
    if n > data.len() {
        return Err(Error::Index {
            index: n,
            len: data.len(),
        });
    }
    Ok(data.ys()[..n].iter().fold(0.0f64, |m, y| m.max(y.abs())) + a0 * v)
}

/// `min(1/300, sqrt(2 pi / 11) K / (a2 beta C_N V))`.
pub fn compute_delta(k: usize, a2: f64, beta: f64, c_n: f64, v: f64) -> f64 {
    let second = (2.0 * std::f64::consts::PI / 11.0).sqrt() * k as f64 / (a2 * beta * c_n * v);
    (1.0 / 300.0f64).min(second)
}

/// How the coupling precision is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoChoice {
    /// `sqrt(3/2) a2 beta C_n V / K`, leaving a strictly negative curvature margin.
    #[default]
    Strict,
    /// `a2 beta C_n V / K`, the smallest value for which the reverse conditional is log-concave.
    Minimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub beta: f64,
    pub c_n: f64,
    pub rho: f64,
    pub delta: f64,
    pub b_threshold: f64,
}

impl CouplingParams {
    /// Parameters for the first `n` observations with `delta` from [`compute_delta`] using
    /// `C_N` over the full dataset.
    pub fn new(cfg: &NetworkConfig, data: &Dataset, n: usize, beta: f64) -> Result<Self> {
        let b = cfg.activation.theory_bounds();
        let c_big = compute_c_n(data, data.len(), b.a0, cfg.v)?;
        let delta = compute_delta(cfg.k, b.a2, beta, c_big, cfg.v);
        Self::with_delta(cfg, data, n, beta, delta, RhoChoice::Strict)
    }

    pub fn with_delta(
        cfg: &NetworkConfig,
        data: &Dataset,
        n: usize,
        beta: f64,
        delta: f64,
        rho_choice: RhoChoice,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(config_err("beta must be positive"));
        }
        if !(delta > 0.0 && delta <= 1.0 / 16.0) {
            return Err(config_err(format!(
                "delta must lie in (0, 1/16], got {delta}"
            )));
        }
        let b = cfg.activation.theory_bounds();
        let c_n = compute_c_n(data, n, b.a0, cfg.v)?;
        let scale = match rho_choice {
            RhoChoice::Strict => 1.5f64.sqrt(),
            RhoChoice::Minimal => 1.0,
        };
        let rho = scale * b.a2 * beta * c_n * cfg.v / cfg.k as f64;
        Ok(Self::from_parts(n, cfg.k, cfg.d, beta, c_n, rho, delta))
    }

    pub fn from_parts(
        n: usize,
        k: usize,
        d: usize,
        beta: f64,
        c_n: f64,
        rho: f64,
        delta: f64,
    ) -> Self {
        let b_threshold =
            n as f64 + (2.0 * (2.0 * (k * d) as f64 / delta).ln()).sqrt() * (n as f64 / rho).sqrt();
        CouplingParams {
            n,
            k,
            d,
            beta,
            c_n,
            rho,
            delta,
            b_threshold,
        }
    }

    /// `ln(2Kd/delta)`.
    pub fn log_term(&self) -> f64 {
        (2.0 * (self.k * self.d) as f64 / self.delta).ln()
    }
}

/// Auxiliary matrix, stored as the stacked columns `(xi_{.1}, ..., xi_{.K})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Xi {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl Xi {
    pub fn zeros(n: usize, k: usize) -> Self {
        Xi {
            n,
            k,
            values: vec![0.0; n * k],
        }
    }

    pub fn from_stacked(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * k {
            return Err(domain_err(format!(
                "expected {} auxiliary entries, got {}",
                n * k,
                values.len()
            )));
        }
        Ok(Xi { n, k, values })
    }

    /// `(X w_1, ..., X w_K)` over the first `n` rows.
    pub fn stacked_xw(w: &WeightMatrix, data: &Dataset, n: usize) -> Self {
        let mut xi = Xi::zeros(n, w.k());
        for k in 0..w.k() {
            for i in 0..n {
                xi.values[k * n + i] = dot(w.row(k), data.x(i));
            }
        }
        xi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.n + i]
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

fn check_shapes(xi: &Xi, data: &Dataset, params: &CouplingParams) -> Result<()> {
    if xi.n != params.n || xi.k != params.k {
        return Err(domain_err(format!(
            "auxiliary matrix is {}x{}, coupling expects {}x{}",
            xi.n, xi.k, params.n, params.k
        )));
    }
    if data.d() != params.d || data.len() < params.n {
        return Err(domain_err("data does not match the coupling parameters"));
    }
    Ok(())
}

/// Largest `|sum_i x_ij xi_ik|` over `(j, k)`.
pub fn constraint_max(xi: &Xi, data: &Dataset) -> f64 {
    let d = data.d();
    let mut worst = 0.0f64;
    let mut acc = vec![0.0; d];
    for k in 0..xi.k {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (i, &v) in xi.column(k).iter().enumerate() {
            for (a, x) in acc.iter_mut().zip(data.x(i)) {
                *a += x * v;
            }
        }
        worst = acc.iter().fold(worst, |m, a| m.max(a.abs()));
    }
    worst
}

pub fn in_b(xi: &Xi, data: &Dataset, params: &CouplingParams) -> Result<bool> {
    check_shapes(xi, data, params)?;
    Ok(constraint_max(xi, data) <= params.b_threshold)
}

/// Exact draw from the forward coupling by rejection against `B`. Returns the draw and the
/// number of rejected proposals.
pub fn sample_xi_given_w<R: Rng + ?Sized>(
    w: &WeightMatrix,
    data: &Dataset,
    params: &CouplingParams,
    rng: &mut R,
    budget: usize,
) -> Result<(Xi, usize)> {
    if !w.in_l1_balls() {
        return Err(Error::OutsideSupport);
    }
    let mean = Xi::stacked_xw(w, data, params.n);
    let sd = 1.0 / params.rho.sqrt();
    for attempt in 0..budget.max(1) {
        let mut xi = mean.clone();
        for v in xi.values.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
        if constraint_max(&xi, data) <= params.b_threshold {
            return Ok((xi, attempt));
        }
    }
    Err(Error::RejectionBudget { budget })
}

/// `-(rho/2) sum_{i,k} (xi_ik - w_k . x_i)^2`.
pub fn coupling_quadratic(w: &WeightMatrix, xi: &Xi, data: &Dataset, rho: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..xi.k {
        for i in 0..xi.n {
            let r = xi.get(i, k) - dot(w.row(k), data.x(i));
            s += r * r;
        }
    }
    -0.5 * rho * s
}

/// Log density of `w | xi` up to a constant, with `Z(w)` treated as constant.
pub fn reverse_logdensity_unnorm(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    xi: &Xi,
    data: &Dataset,
    params: &CouplingParams,
) -> Result<f64> {
    check_shapes(xi, data, params)?;
    if !w.in_l1_balls() {
        return Err(Error::OutsideSupport);
    }
    if constraint_max(xi, data) > params.b_threshold {
        return Err(domain_err("auxiliary matrix lies outside B"));
    }
    let base = crate::nnmodel::loss(cfg, w, data, params.n)?;
    Ok(-params.beta * base + coupling_quadratic(w, xi, data, params.rho))
}

/// Gradient of [`reverse_logdensity_unnorm`] in `w`.
pub fn reverse_score(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    xi: &Xi,
    data: &Dataset,
    params: &CouplingParams,
) -> Result<Vec<f64>> {
    check_shapes(xi, data, params)?;
    let mut g = posterior_score(cfg, w, data, params.n, params.beta)?;
    let d = cfg.d;
    for k in 0..cfg.k {
        for i in 0..params.n {
            let x = data.x(i);
            let r = params.rho * (xi.get(i, k) - dot(w.row(k), x));
            for (gj, xj) in g[k * d..(k + 1) * d].iter_mut().zip(x) {
                *gj += r * xj;
            }
        }
    }
    Ok(g)
}

/// `u^T H u` for the Hessian of the reverse conditional log density (independent of `xi`).
pub fn reverse_hessian_quadform(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    xi: &Xi,
    data: &Dataset,
    params: &CouplingParams,
    u: &[f64],
) -> Result<f64> {
    check_shapes(xi, data, params)?;
    if u.len() != cfg.dim() || w.k() != cfg.k || w.d() != cfg.d {
        return Err(domain_err("direction or weights do not match the network"));
    }
    let fw = forward_pass(cfg, w, data, params.n);
    Ok(hessian_parts(
        cfg,
        &fw,
        data,
        params.n,
        params.beta,
        u,
        params.rho,
    ))
}

/// Largest curvature coefficient `beta res_i c_k psi''(w_k . x_i) - rho` over `(i, k)`.
pub fn reverse_curvature_margin(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    params: &CouplingParams,
) -> f64 {
    let fw = forward_pass(cfg, w, data, params.n);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..params.n {
        for k in 0..cfg.k {
            let v = params.beta * fw.res[i] * cfg.outer(k) * fw.d2psi[i * cfg.k + k] - params.rho;
            worst = worst.max(v);
        }
    }
    worst
}
