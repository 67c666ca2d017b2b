use serde::{Deserialize, Serialize};

use super::{CouplingParams, Xi};
use crate::error::{domain_err, Error, Result};
use crate::nnmodel::{dot, Dataset, WeightMatrix};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalScore {
    /// Estimate of `grad log p(xi)` in stacked column order.
    pub score: Vec<f64>,
    /// Per-coordinate standard error, treating the inner draws as independent.
    pub se: Vec<f64>,
    pub samples: usize,
}

impl MarginalScore {
    pub fn max_se(&self) -> f64 {
        self.se.iter().copied().fold(0.0, f64::max)
    }
}

/// Stacked `(X w_1, ..., X w_K)` over the first `n` rows.
fn stacked(w: &WeightMatrix, data: &Dataset, n: usize, out: &mut [f64]) {
    for k in 0..w.k() {
        for i in 0..n {
            out[k * n + i] = dot(w.row(k), data.x(i));
        }
    }
}

/// `rho (-xi + E[v(w) | xi])` with the expectation replaced by the mean over `inner_samples`.
pub fn marginal_score(
    xi: &Xi,
    inner_samples: &[WeightMatrix],
    params: &CouplingParams,
    data: &Dataset,
) -> Result<MarginalScore> {
    if inner_samples.is_empty() {
        return Err(domain_err("marginal score needs at least one inner sample"));
    }
    let dim = xi.n() * xi.k();
    let s = inner_samples.len() as f64;
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    for w in inner_samples {
        stacked(w, data, xi.n(), &mut v);
        for ((a, b), x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&v) {
            *a += x;
            *b += x * x;
        }
    }
    let mut score = Vec::with_capacity(dim);
    let mut se = Vec::with_capacity(dim);
    for j in 0..dim {
        let m = sum[j] / s;
        score.push(params.rho * (m - xi.as_slice()[j]));
        let var = if s > 1.0 {
            ((sum_sq[j] - s * m * m) / (s - 1.0)).max(0.0)
        } else {
            0.0
        };
        se.push(params.rho * (var / s).sqrt());
    }
    Ok(MarginalScore {
        score,
        se,
        samples: inner_samples.len(),
    })
}

/// Marginal score from an exact conditional mean `E[w | xi]`.
pub fn marginal_score_exact(
    xi: &Xi,
    mean_w: &WeightMatrix,
    params: &CouplingParams,
    data: &Dataset,
) -> Vec<f64> {
    let mut v = vec![0.0; xi.n() * xi.k()];
    stacked(mean_w, data, xi.n(), &mut v);
    v.iter()
        .zip(xi.as_slice())
        .map(|(m, x)| params.rho * (m - x))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityEstimate {
    /// `rho * lambda_max(Cov[v(w) | xi])`; below one means the marginal is locally
    /// log-concave at `xi`.
    pub value: f64,
    /// Grouped jackknife standard error of `value`.
    pub se: f64,
    pub samples: usize,
}

/// Largest eigenvalue of `C = (1/(S-1)) sum_s c_s c_s^T` for centered rows `c_s`, by power
/// iteration on matrix-free products.
pub fn power_iteration_lambda_max(centered: &[Vec<f64>], tol: f64, max_iter: usize) -> f64 {
    let s = centered.len();
    if s < 2 {
        return 0.0;
    }
    let dim = centered[0].len();
    let apply = |u: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for c in centered {
            let a = dot(c, u);
            if a != 0.0 {
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += a * ci;
                }
            }
        }
        out.iter_mut().for_each(|o| *o /= (s - 1) as f64);
        out
    };
    let mut rng = stream_rng(0x5eed, dim as u64);
    let mut u: Vec<f64> = (0..dim)
        .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
        .collect();
    let norm = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let cu = apply(&u);
        let next = dot(&u, &cu);
        let norm = dot(&cu, &cu).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        u = cu.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn lambda_of(vs: &[&Vec<f64>]) -> f64 {
    let s = vs.len();
    let dim = vs[0].len();
    let mut mean = vec![0.0; dim];
    for v in vs {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x / s as f64;
        }
    }
    let centered: Vec<Vec<f64>> = vs
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    power_iteration_lambda_max(&centered, 1e-8, 10_000)
}

pub fn marginal_concavity_estimate(
    xi: &Xi,
    inner_samples: &[WeightMatrix],
    params: &CouplingParams,
    data: &Dataset,
) -> Result<ConcavityEstimate> {
    let s = inner_samples.len();
    if s < 10 {
        return Err(Error::Domain(format!(
            "concavity estimate needs at least 10 samples, got {s}"
        )));
    }
    let dim = xi.n() * xi.k();
    let vs: Vec<Vec<f64>> = inner_samples
        .iter()
        .map(|w| {
            let mut v = vec![0.0; dim];
            stacked(w, data, xi.n(), &mut v);
            v
        })
        .collect();
    let all: Vec<&Vec<f64>> = vs.iter().collect();
    let value = params.rho * lambda_of(&all);

    let groups = s.min(20);
    let bounds: Vec<usize> = (0..=groups).map(|g| g * s / groups).collect();
    let leave_out: Vec<f64> = (0..groups)
        .map(|g| {
            let kept: Vec<&Vec<f64>> = vs[..bounds[g]].iter().chain(&vs[bounds[g + 1]..]).collect();
            params.rho * lambda_of(&kept)
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / groups as f64;
    let se = ((groups - 1) as f64 / groups as f64
        * leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>())
    .sqrt();
    Ok(ConcavityEstimate {
        value,
        se,
        samples: s,
    })
}
