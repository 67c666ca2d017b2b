//! Single-hidden-layer networks `f_w(x) = sum_k c_k psi(w_k . x)` with inner weights in
//! products of l1 balls, their squared-error loss and the Gibbs posterior `exp(-beta * loss)`
//! relative to the prior, together with its score and Hessian quadratic form.

mod activation;
mod data;
mod weights;

pub use activation::{Activation, DerivativeBounds};
pub use data::Dataset;
pub use weights::{Support, WeightMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Error, Result};

/// Tolerance used when checking `|x_ij| <= 1` and `||w_k||_1 <= 1`.
pub const BOX_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub k: usize,
    pub d: usize,
    pub v: f64,
    pub signs: Vec<i8>,
    pub activation: Activation,
}

impl NetworkConfig {
    /// Odd activations get all-positive signs; otherwise the first `ceil(K/2)` neurons are
    /// positive and the rest negative.
    pub fn new(k: usize, d: usize, v: f64, activation: Activation) -> Result<Self> {
        let signs = if activation.is_odd() {
            vec![1; k]
        } else {
            (0..k)
                .map(|i| if i < k.div_ceil(2) { 1 } else { -1 })
                .collect()
        };
        Self::with_signs(k, d, v, signs, activation)
    }

    pub fn with_signs(
        k: usize,
        d: usize,
        v: f64,
        signs: Vec<i8>,
        activation: Activation,
    ) -> Result<Self> {
        let cfg = NetworkConfig {
            k,
            d,
            v,
            signs,
            activation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(config_err("K and d must be positive"));
        }
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(config_err("V must be positive"));
        }
        if self.signs.len() != self.k {
            return Err(config_err(format!(
                "expected {} signs, got {}",
                self.k,
                self.signs.len()
            )));
        }
        if self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(config_err("signs must be +1 or -1"));
        }
        if self.activation.is_odd() && self.signs.iter().any(|&s| s != 1) {
            return Err(config_err(
                "odd activations absorb signs into the weights; all signs must be +1",
            ));
        }
        self.activation.validate()
    }

    /// Outer weight `c_k = sign_k * V / K`.
    #[inline]
    pub fn outer(&self, k: usize) -> f64 {
        self.signs[k] as f64 * self.v / self.k as f64
    }

    pub fn dim(&self) -> usize {
        self.k * self.d
    }

    /// `a0 * V` with the analytic (unclamped) `a0`.
    pub fn output_bound(&self) -> f64 {
        self.activation.bounds().a0 * self.v
    }

    fn check_weights(&self, w: &WeightMatrix) -> Result<()> {
        if w.k() != self.k || w.d() != self.d {
            return Err(domain_err(format!(
                "weights are {}x{}, network expects {}x{}",
                w.k(),
                w.d(),
                self.k,
                self.d
            )));
        }
        Ok(())
    }

    fn check_data(&self, data: &Dataset, n: usize) -> Result<()> {
        if data.d() != self.d {
            return Err(domain_err(format!(
                "data has {} columns, network expects {}",
                data.d(),
                self.d
            )));
        }
        if n > data.len() {
            return Err(Error::Index {
                index: n,
                len: data.len(),
            });
        }
        Ok(())
    }

    /// Network output without shape or domain checks.
    #[inline]
    pub fn forward(&self, w: &WeightMatrix, x: &[f64]) -> f64 {
        (0..self.k)
            .map(|k| self.outer(k) * self.activation.psi(dot(w.row(k), x)))
            .sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn eval_network(cfg: &NetworkConfig, w: &WeightMatrix, x: &[f64]) -> Result<f64> {
    cfg.check_weights(w)?;
    if x.len() != cfg.d {
        return Err(domain_err(format!(
            "input has length {}, expected {}",
            x.len(),
            cfg.d
        )));
    }
    if x.iter().any(|v| v.is_nan() || v.abs() > 1.0 + BOX_TOL) {
        return Err(domain_err("input lies outside the unit cube"));
    }
    Ok(cfg.forward(w, x))
}

/// `y_i - f_w(x_i)` for the zero-based observation `i`.
pub fn residual(cfg: &NetworkConfig, w: &WeightMatrix, data: &Dataset, i: usize) -> Result<f64> {
    cfg.check_weights(w)?;
    cfg.check_data(data, 0)?;
    if i >= data.len() {
        return Err(Error::Index {
            index: i,
            len: data.len(),
        });
    }
    Ok(data.y(i) - cfg.forward(w, data.x(i)))
}

/// Half the sum of squared residuals over the first `n` observations.
pub fn loss(cfg: &NetworkConfig, w: &WeightMatrix, data: &Dataset, n: usize) -> Result<f64> {
    cfg.check_weights(w)?;
    cfg.check_data(data, n)?;
    Ok(loss_unchecked(cfg, w, data, n))
}

pub(crate) fn loss_unchecked(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    n: usize,
) -> f64 {
    0.5 * (0..n)
        .map(|i| {
            let r = data.y(i) - cfg.forward(w, data.x(i));
            r * r
        })
        .sum::<f64>()
}

/// `-beta * loss_n(w)`, the log posterior density relative to the prior up to a constant.
pub fn log_posterior_unnorm(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    n: usize,
    beta: f64,
    support: Support,
) -> Result<f64> {
    cfg.check_weights(w)?;
    if !support.contains(w) {
        return Err(Error::OutsideSupport);
    }
    Ok(-beta * loss(cfg, w, data, n)?)
}

/// Per-observation pre-activations, residuals and activation derivatives.
pub(crate) struct Forward {
    /// `res[i]`
    pub res: Vec<f64>,
    /// `dpsi[i * K + k]`
    pub dpsi: Vec<f64>,
    /// `d2psi[i * K + k]`
    pub d2psi: Vec<f64>,
}

pub(crate) fn forward_pass(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    n: usize,
) -> Forward {
    let kk = cfg.k;
    let mut res = Vec::with_capacity(n);
    let mut dpsi = vec![0.0; n * kk];
    let mut d2psi = vec![0.0; n * kk];
    for i in 0..n {
        let x = data.x(i);
        let mut f = 0.0;
        for k in 0..kk {
            let (p, d1, d2) = cfg.activation.eval_all(dot(w.row(k), x));
            f += cfg.outer(k) * p;
            dpsi[i * kk + k] = d1;
            d2psi[i * kk + k] = d2;
        }
        res.push(data.y(i) - f);
    }
    Forward { res, dpsi, d2psi }
}

/// Gradient of `-beta * loss_n` in the stacked row order `(w_1, ..., w_K)`.
pub fn posterior_score(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    n: usize,
    beta: f64,
) -> Result<Vec<f64>> {
    cfg.check_weights(w)?;
    cfg.check_data(data, n)?;
    let fw = forward_pass(cfg, w, data, n);
    let (kk, d) = (cfg.k, cfg.d);
    let mut g = vec![0.0; kk * d];
    for i in 0..n {
        let x = data.x(i);
        for k in 0..kk {
            let coef = beta * fw.res[i] * cfg.outer(k) * fw.dpsi[i * kk + k];
            if coef != 0.0 {
                for (gj, xj) in g[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gj += coef * xj;
                }
            }
        }
    }
    Ok(g)
}

/// `u^T H u` for the Hessian `H` of `-beta * loss_n` at `w`.
pub fn posterior_hessian_quadform(
    cfg: &NetworkConfig,
    w: &WeightMatrix,
    data: &Dataset,
    n: usize,
    beta: f64,
    u: &[f64],
) -> Result<f64> {
    cfg.check_weights(w)?;
    cfg.check_data(data, n)?;
    if u.len() != cfg.dim() {
        return Err(domain_err(format!(
            "direction has length {}, expected {}",
            u.len(),
            cfg.dim()
        )));
    }
    let fw = forward_pass(cfg, w, data, n);
    Ok(hessian_parts(cfg, &fw, data, n, beta, u, 0.0))
}

/// Shared by the posterior and the reverse conditional: the latter subtracts `rho (u_k.x_i)^2`.
pub(crate) fn hessian_parts(
    cfg: &NetworkConfig,
    fw: &Forward,
    data: &Dataset,
    n: usize,
    beta: f64,
    u: &[f64],
    rho: f64,
) -> f64 {
    let (kk, d) = (cfg.k, cfg.d);
    let mut total = 0.0;
    for i in 0..n {
        let x = data.x(i);
        let mut lin = 0.0;
        let mut curv = 0.0;
        for k in 0..kk {
            let ux = dot(&u[k * d..(k + 1) * d], x);
            let c = cfg.outer(k);
            lin += c * fw.dpsi[i * kk + k] * ux;
            curv += (beta * fw.res[i] * c * fw.d2psi[i * kk + k] - rho) * ux * ux;
        }
        total += -beta * lin * lin + curv;
    }
    total
}
