//! Deterministic quadrature references for tiny problems.
//!
//! Each l1 ball is split into its `2^d` orthants and every orthant simplex is mapped from the
//! unit cube by the collapsed-coordinate map `w_1 = s_1`, `w_j = s_j prod_{l<j} (1 - s_l)`,
//! with the midpoint rule in `s`. The integrand and the map are smooth inside each orthant,
//! so moments converge at second order in the grid spacing.

use serde::{Deserialize, Serialize};

use crate::coupling::{log_z_intercept_only, CouplingParams, Xi};
use crate::error::{config_err, domain_err, Result};
use crate::nnmodel::{loss_unchecked, Dataset, NetworkConfig, WeightMatrix};
use crate::stats::logsumexp;

/// Largest number of product nodes a quadrature table will allocate.
pub const MAX_NODES: usize = 20_000_000;

/// Nodes and weights of the midpoint rule on one l1 ball.
pub fn l1_ball_rule(d: usize, resolution: usize) -> (Vec<f64>, Vec<f64>) {
    let per_orthant = resolution.pow(d as u32);
    let mut nodes = Vec::with_capacity((per_orthant * d) << d);
    let mut weights = Vec::with_capacity(per_orthant << d);
    let h = 1.0 / resolution as f64;
    let mut s = vec![0.0; d];
    let mut w = vec![0.0; d];
    for cell in 0..per_orthant {
        let mut c = cell;
        for sj in s.iter_mut() {
            *sj = ((c % resolution) as f64 + 0.5) * h;
            c /= resolution;
        }
        let mut remaining = 1.0;
        let mut jac = 1.0;
        for j in 0..d {
            if j > 0 {
                jac *= remaining;
            }
            w[j] = s[j] * remaining;
            remaining *= 1.0 - s[j];
        }
        let weight = jac * h.powi(d as i32);
        for signs in 0..(1usize << d) {
            for (j, wj) in w.iter().enumerate() {
                let sign = if signs >> j & 1 == 1 { -1.0 } else { 1.0 };
                nodes.push(sign * wj);
            }
            weights.push(weight);
        }
    }
    (nodes, weights)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureTable {
    pub k: usize,
    pub d: usize,
    pub resolution: usize,
    /// Product nodes, `K d` coordinates each.
    pub nodes: Vec<f64>,
    /// Posterior probability of each node (sums to one).
    pub probs: Vec<f64>,
    /// Normalized posterior density with respect to Lebesgue measure at each node.
    pub density: Vec<f64>,
    pub mean_w: Vec<f64>,
    /// Change in `mean_w` (max abs) against the table at half the resolution.
    pub refinement_delta: Option<f64>,
}

impl QuadratureTable {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let dim = self.k * self.d;
        &self.nodes[i * dim..(i + 1) * dim]
    }

    pub fn weights_at(&self, i: usize) -> WeightMatrix {
        WeightMatrix::from_flat(self.k, self.d, self.node(i).to_vec()).expect("node shape")
    }

    pub fn expect<F: Fn(&WeightMatrix) -> f64>(&self, f: F) -> f64 {
        (0..self.len())
            .map(|i| self.probs[i] * f(&self.weights_at(i)))
            .sum()
    }

    /// Posterior mean of the network output at `x`.
    pub fn mean_output(&self, cfg: &NetworkConfig, x: &[f64]) -> f64 {
        self.expect(|w| cfg.forward(w, x))
    }
}

fn product_rule(k: usize, d: usize, resolution: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (row_nodes, row_w) = l1_ball_rule(d, resolution);
    let m = row_w.len();
    let total = (0..k)
        .try_fold(1usize, |a, _| a.checked_mul(m))
        .filter(|&t| t <= MAX_NODES);
    let total = total.ok_or_else(|| config_err("quadrature grid too large"))?;
    let mut nodes = Vec::with_capacity(total * k * d);
    let mut weights = Vec::with_capacity(total);
    for idx in 0..total {
        let mut c = idx;
        let mut wt = 1.0;
        for _ in 0..k {
            let r = c % m;
            c /= m;
            nodes.extend_from_slice(&row_nodes[r * d..(r + 1) * d]);
            wt *= row_w[r];
        }
        weights.push(wt);
    }
    Ok((nodes, weights))
}

fn table(
    cfg: &NetworkConfig,
    data: &Dataset,
    n: usize,
    beta: f64,
    resolution: usize,
) -> Result<QuadratureTable> {
    let (k, d) = (cfg.k, cfg.d);
    let (nodes, weights) = product_rule(k, d, resolution)?;
    let dim = k * d;
    let log_mass: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, wt)| {
            let w = WeightMatrix::from_flat(k, d, nodes[i * dim..(i + 1) * dim].to_vec())
                .expect("node shape");
            wt.ln() - beta * loss_unchecked(cfg, &w, data, n)
        })
        .collect();
    let lz = logsumexp(&log_mass);
    let probs: Vec<f64> = log_mass.iter().map(|l| (l - lz).exp()).collect();
    let density: Vec<f64> = probs.iter().zip(&weights).map(|(p, w)| p / w).collect();
    let mut mean_w = vec![0.0; dim];
    for (i, p) in probs.iter().enumerate() {
        for (m, v) in mean_w.iter_mut().zip(&nodes[i * dim..(i + 1) * dim]) {
            *m += p * v;
        }
    }
    Ok(QuadratureTable {
        k,
        d,
        resolution,
        nodes,
        probs,
        density,
        mean_w,
        refinement_delta: None,
    })
}

/// Posterior on a regular grid over the product of l1 balls, for `K d <= 3`.
pub fn reference_posterior_quadrature(
    cfg: &NetworkConfig,
    data: &Dataset,
    n: usize,
    beta: f64,
    resolution: usize,
) -> Result<QuadratureTable> {
    if cfg.k * cfg.d > 3 {
        return Err(config_err(format!(
            "quadrature needs K d <= 3, got {}",
            cfg.k * cfg.d
        )));
    }
    if resolution < 2 {
        return Err(config_err("quadrature resolution must be at least 2"));
    }
    if n > data.len() || data.d() != cfg.d {
        return Err(domain_err("data does not match the network"));
    }
    let mut t = table(cfg, data, n, beta, resolution)?;
    let coarse = table(cfg, data, n, beta, resolution / 2)?;
    t.refinement_delta = Some(
        t.mean_w
            .iter()
            .zip(&coarse.mean_w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
    );
    Ok(t)
}

/// Quadrature of the coupled model for one intercept-only neuron (`K = d = 1`), where
/// `Z(w)` has a closed form and `xi` lives in `R^n`.
pub struct CouplingQuadrature {
    pub params: CouplingParams,
    /// Midpoint nodes on `[-1, 1]` and their spacing.
    pub w: Vec<f64>,
    pub h: f64,
    /// `ln p_n(w)` normalized as a density on `[-1, 1]`.
    pub log_post: Vec<f64>,
    pub log_z: Vec<f64>,
}

impl CouplingQuadrature {
    pub fn new(
        cfg: &NetworkConfig,
        data: &Dataset,
        params: &CouplingParams,
        resolution: usize,
    ) -> Result<Self> {
        if cfg.k != 1 || cfg.d != 1 {
            return Err(config_err("coupling quadrature needs K = d = 1"));
        }
        let h = 2.0 / resolution as f64;
        let w: Vec<f64> = (0..resolution)
            .map(|j| -1.0 + (j as f64 + 0.5) * h)
            .collect();
        let mut log_post = Vec::with_capacity(resolution);
        let mut log_z = Vec::with_capacity(resolution);
        for &v in &w {
            let wm = WeightMatrix::from_flat(1, 1, vec![v])?;
            log_post.push(-params.beta * loss_unchecked(cfg, &wm, data, params.n));
            log_z.push(log_z_intercept_only(&wm, params)?);
        }
        let norm = logsumexp(&log_post) + h.ln();
        log_post.iter_mut().for_each(|l| *l -= norm);
        Ok(CouplingQuadrature {
            params: params.clone(),
            w,
            h,
            log_post,
            log_z,
        })
    }

    fn in_b(&self, xi: &[f64]) -> bool {
        xi.iter().sum::<f64>().abs() <= self.params.b_threshold
    }

    pub fn posterior_density(&self) -> Vec<f64> {
        self.log_post.iter().map(|l| l.exp()).collect()
    }

    /// `ln p*(xi)` up to an additive constant, through the exponential-tilt representation
    /// `-rho |xi|^2 / 2 + ln E_post[exp(rho xi . Xw - rho |Xw|^2 / 2 - Z(w))]`.
    pub fn log_marginal(&self, xi: &[f64]) -> f64 {
        if !self.in_b(xi) {
            return f64::NEG_INFINITY;
        }
        let rho = self.params.rho;
        let n = xi.len() as f64;
        let sum_xi: f64 = xi.iter().sum();
        let terms: Vec<f64> = self
            .w
            .iter()
            .zip(&self.log_post)
            .zip(&self.log_z)
            .map(|((w, lp), lz)| lp + rho * sum_xi * w - 0.5 * rho * n * w * w - lz)
            .collect();
        -0.5 * rho * xi.iter().map(|v| v * v).sum::<f64>() + logsumexp(&terms) + self.h.ln()
    }

    /// `p*(w | xi)` on the nodes, from the reverse-conditional formula. `with_z` controls
    /// whether `-Z(w)` is included.
    pub fn conditional(&self, xi: &[f64], with_z: bool) -> Vec<f64> {
        let rho = self.params.rho;
        let log_c: Vec<f64> = self
            .w
            .iter()
            .zip(&self.log_post)
            .zip(&self.log_z)
            .map(|((w, lp), lz)| {
                let q: f64 = xi.iter().map(|x| (x - w).powi(2)).sum();
                lp - 0.5 * rho * q - if with_z { *lz } else { 0.0 }
            })
            .collect();
        let norm = logsumexp(&log_c) + self.h.ln();
        log_c.iter().map(|l| (l - norm).exp()).collect()
    }

    pub fn conditional_mean(&self, xi: &[f64], with_z: bool) -> f64 {
        self.conditional(xi, with_z)
            .iter()
            .zip(&self.w)
            .map(|(p, w)| p * w * self.h)
            .sum()
    }

    /// `rho (-xi + X E[w | xi])`.
    pub fn exact_score(&self, xi: &[f64]) -> Vec<f64> {
        let m = self.conditional_mean(xi, true);
        xi.iter().map(|x| self.params.rho * (m - x)).collect()
    }

    /// Mixture `sum_xi p*(w | xi) p*(xi) dxi` over a tensor grid of `xi` with `per_axis`
    /// points per coordinate on `[-half_width, half_width]`.
    pub fn mixture_density(&self, per_axis: usize, half_width: f64) -> Vec<f64> {
        let n = self.params.n;
        let step = 2.0 * half_width / per_axis as f64;
        let total = per_axis.pow(n as u32);
        let mut xi = vec![0.0; n];
        let mut log_m = Vec::with_capacity(total);
        let mut conds = Vec::with_capacity(total);
        for cell in 0..total {
            let mut c = cell;
            for v in xi.iter_mut() {
                *v = -half_width + ((c % per_axis) as f64 + 0.5) * step;
                c /= per_axis;
            }
            let lm = self.log_marginal(&xi);
            if lm.is_finite() {
                log_m.push(lm);
                conds.push(self.conditional(&xi, true));
            }
        }
        let norm = logsumexp(&log_m);
        let mut mix = vec![0.0; self.w.len()];
        for (lm, c) in log_m.iter().zip(&conds) {
            let p = (lm - norm).exp();
            for (m, v) in mix.iter_mut().zip(c) {
                *m += p * v;
            }
        }
        mix
    }

    pub fn stacked(xi: &Xi) -> Vec<f64> {
        xi.as_slice().to_vec()
    }
}
