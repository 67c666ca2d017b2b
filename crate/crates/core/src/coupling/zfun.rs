//! `Z(w) = ln P(xi in B | w)` under the unrestricted forward coupling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{constraint_max, CouplingParams, Xi};
use crate::error::{config_err, domain_err, Result};
use crate::nnmodel::{dot, Dataset, WeightMatrix};
use crate::par::{chunk_ranges, map_indices, Exec};
use crate::rng::keyed_rng;
use crate::stats::normal_cdf;

/// Smallest Monte Carlo budget accepted by [`estimate_z_and_check`].
pub const MIN_MC_BUDGET: usize = 1000;

const CHUNK: usize = 4096;

/// `1 - delta / sqrt(2 ln(2Kd/delta))`, a lower bound on `P(xi in B | w)`.
pub fn probability_lower_bound(params: &CouplingParams) -> f64 {
    1.0 - params.delta / (2.0 * params.log_term()).sqrt()
}

/// `rho sigma delta / ((1 - delta) sqrt(2 pi))`, bounding `|u . grad Z(w)|`.
pub fn z_gradient_bound(rho: f64, sigma_tilde: f64, delta: f64) -> f64 {
    rho * sigma_tilde * delta / ((1.0 - delta) * (2.0 * PI).sqrt())
}

/// Exact `Z(w)` when the design is the intercept column alone (`d = 1`): the constraint is
/// `|sum_i xi_ik| <= b` with `sum_i xi_ik ~ N(n w_k, n / rho)`.
pub fn log_z_intercept_only(w: &WeightMatrix, params: &CouplingParams) -> Result<f64> {
    if w.d() != 1 {
        return Err(domain_err("closed-form Z needs d = 1"));
    }
    let n = params.n as f64;
    let sd = (n / params.rho).sqrt();
    let b = params.b_threshold;
    Ok(w.rows()
        .map(|r| {
            let m = n * r[0];
            let tails = normal_cdf(-(b - m) / sd) + normal_cdf((-b - m) / sd);
            (-tails).ln_1p()
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McProbability {
    pub estimate: f64,
    pub se: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of `P(xi in B | w)`. Draws are split into fixed chunks with their own
/// keyed streams so the result does not depend on the execution policy.
pub fn coupling_probability_mc(
    w: &WeightMatrix,
    data: &Dataset,
    params: &CouplingParams,
    draws: usize,
    seed: u64,
    exec: Exec,
) -> McProbability {
    let mean = Xi::stacked_xw(w, data, params.n);
    let sd = 1.0 / params.rho.sqrt();
    let ranges = chunk_ranges(draws, CHUNK);
    let hits: Vec<usize> = map_indices(exec, ranges.len(), |c| {
        let mut rng = keyed_rng(seed, 0xB0B, c as u64);
        let mut xi = mean.clone();
        let mut hits = 0;
        for _ in ranges[c].clone() {
            for (v, m) in xi.as_mut_slice().iter_mut().zip(mean.as_slice()) {
                let z: f64 = rng.sample(StandardNormal);
                *v = m + sd * z;
            }
            hits += (constraint_max(&xi, data) <= params.b_threshold) as usize;
        }
        hits
    });
    let p = hits.iter().sum::<usize>() as f64 / draws as f64;
    McProbability {
        estimate: p,
        se: (p * (1.0 - p) / draws as f64).sqrt(),
        draws,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZCheck {
    pub z: f64,
    pub z_se: f64,
    /// `ln(1 - delta / sqrt(2 ln(2Kd/delta)))`.
    pub z_lower_bound: f64,
    /// Central difference of `Z` along `u` with common random numbers.
    pub grad_dir: f64,
    pub grad_se: f64,
    pub grad_bound: f64,
    pub sigma_tilde: f64,
    pub within_bounds: bool,
}

/// Monte Carlo `Z(w)`, its directional derivative along `u`, and the comparison with the
/// probability and gradient bounds.
pub fn estimate_z_and_check(
    w: &WeightMatrix,
    u: &[f64],
    params: &CouplingParams,
    data: &Dataset,
    mc_budget: usize,
    seed: u64,
) -> Result<ZCheck> {
    if mc_budget < MIN_MC_BUDGET {
        return Err(config_err(format!(
            "Monte Carlo budget {mc_budget} is below the minimum {MIN_MC_BUDGET}"
        )));
    }
    let (k, d, n) = (w.k(), w.d(), params.n);
    if u.len() != k * d {
        return Err(domain_err("direction length does not match the weights"));
    }
    let sigma_sq: f64 = (0..k)
        .flat_map(|kk| (0..n).map(move |i| (kk, i)))
        .map(|(kk, i)| dot(&u[kk * d..(kk + 1) * d], data.x(i)).powi(2))
        .sum::<f64>()
        / params.rho;
    let sigma_tilde = sigma_sq.sqrt();

    let h = 1e-3;
    let shift = |t: f64| {
        let mut ws = w.clone();
        for (a, b) in ws.as_mut_slice().iter_mut().zip(u) {
            *a += t * b;
        }
        Xi::stacked_xw(&ws, data, n)
    };
    let (m0, mp, mm) = (shift(0.0), shift(h), shift(-h));
    let sd = 1.0 / params.rho.sqrt();
    let ranges = chunk_ranges(mc_budget, CHUNK);
    let tallies: Vec<(usize, i64, u64)> = map_indices(Exec::Parallel, ranges.len(), |c| {
        let mut rng = keyed_rng(seed, 0x2F, c as u64);
        let mut noise = vec![0.0; n * k];
        let mut xi = m0.clone();
        let (mut hits, mut diff, mut diff_sq) = (0usize, 0i64, 0u64);
        for _ in ranges[c].clone() {
            noise
                .iter_mut()
                .for_each(|z| *z = sd * rng.sample::<f64, _>(StandardNormal));
            let mut inside = |mean: &Xi| {
                for ((v, m), z) in xi
                    .as_mut_slice()
                    .iter_mut()
                    .zip(mean.as_slice())
                    .zip(&noise)
                {
                    *v = m + z;
                }
                constraint_max(&xi, data) <= params.b_threshold
            };
            hits += inside(&m0) as usize;
            let dd = inside(&mp) as i64 - inside(&mm) as i64;
            diff += dd;
            diff_sq += (dd * dd) as u64;
        }
        (hits, diff, diff_sq)
    });
    let total = mc_budget as f64;
    let hits: usize = tallies.iter().map(|t| t.0).sum();
    let diff: i64 = tallies.iter().map(|t| t.1).sum();
    let diff_sq: u64 = tallies.iter().map(|t| t.2).sum();
    let p = hits as f64 / total;
    let z = p.ln();
    let z_se = ((1.0 - p) / (p * total)).sqrt();
    let mean_diff = diff as f64 / total;
    let var_diff = (diff_sq as f64 / total - mean_diff * mean_diff).max(0.0);
    let grad_dir = mean_diff / (2.0 * h * p);
    let grad_se = (var_diff / total).sqrt() / (2.0 * h * p);
    let grad_bound = z_gradient_bound(params.rho, sigma_tilde, params.delta);
    let z_lower_bound = probability_lower_bound(params).ln();
    let within_bounds =
        grad_dir.abs() <= grad_bound + 3.0 * grad_se && z >= z_lower_bound - 3.0 * z_se;
    Ok(ZCheck {
        z,
        z_se,
        z_lower_bound,
        grad_dir,
        grad_se,
        grad_bound,
        sigma_tilde,
        within_bounds,
    })
}
