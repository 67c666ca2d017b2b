use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{config_err, domain_err, Error, Result};
use crate::nnmodel::{dot, Dataset, NetworkConfig, WeightMatrix};
use crate::priors::discretize_weights;
use crate::stats;

/// `h(x) = V sum_l c_l psi(x . w_l)` with `sum_l |c_l| = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullCombination {
    pub coefficients: Vec<f64>,
    /// One continuous neuron per row, each in the l1 ball.
    pub neurons: WeightMatrix,
}

impl HullCombination {
    pub fn new(coefficients: Vec<f64>, neurons: WeightMatrix) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() != neurons.k() {
            return Err(config_err("need one coefficient per neuron"));
        }
        let l1: f64 = coefficients.iter().map(|c| c.abs()).sum();
        if (l1 - 1.0).abs() > 1e-9 {
            return Err(config_err(format!(
                "coefficients have l1 norm {l1}, expected 1"
            )));
        }
        if !neurons.in_l1_balls() {
            return Err(Error::OutsideSupport);
        }
        Ok(HullCombination {
            coefficients,
            neurons,
        })
    }

    pub fn eval(&self, cfg: &NetworkConfig, x: &[f64]) -> f64 {
        cfg.v
            * self
                .coefficients
                .iter()
                .zip(self.neurons.rows())
                .map(|(c, w)| c * cfg.activation.psi(dot(w, x)))
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    /// Grid weights of the best draw. For odd activations the outer signs are folded in.
    pub best_w: WeightMatrix,
    /// Outer signs of the best draw (all +1 for odd activations).
    pub best_signs: Vec<i8>,
    /// `sum (y - f)^2 - sum (y - h)^2` at the best draw.
    pub best_regret: f64,
    pub mean_regret: f64,
    pub regret_se: f64,
    /// `sum (h - f)^2` averaged over draws.
    pub mean_sq_distance: f64,
    pub sq_distance_se: f64,
    /// `N a0^2 V^2 / K + N (V C_N a2 + V^2 a1^2) / M`.
    pub regret_bound: f64,
    /// `N a0^2 V^2 / K + N a2^2 V^2 / (4 M^2)`.
    pub sq_distance_bound: f64,
    pub trials: usize,
}

/// Draw the randomized grid approximation of `h` `trials` times and keep the best.
///
/// Each draw picks `K` neurons with probabilities `|c_l|`, takes the sign of `c_l` as the outer
/// sign and rounds each neuron onto the grid with [`discretize_weights`]. Bounds use the
/// analytic derivative bounds and `C_N = max |y| + a0 V`.
pub fn approximation_witness<R: Rng + ?Sized>(
    hull: &HullCombination,
    cfg: &NetworkConfig,
    data: &Dataset,
    m: usize,
    trials: usize,
    rng: &mut R,
) -> Result<WitnessReport> {
    if trials == 0 {
        return Err(config_err("witness needs at least one trial"));
    }
    if hull.neurons.d() != cfg.d || data.d() != cfg.d {
        return Err(domain_err("hull, data and network disagree on d"));
    }
    let n = data.len();
    let h: Vec<f64> = (0..n).map(|i| hull.eval(cfg, data.x(i))).collect();
    let base: f64 = (0..n).map(|i| (data.y(i) - h[i]).powi(2)).sum();
    let probs: Vec<f64> = hull.coefficients.iter().map(|c| c.abs()).collect();
    let pick = WeightedIndex::new(&probs).map_err(|e| Error::Numerical(e.to_string()))?;
    let odd = cfg.activation.is_odd();

    let mut regrets = Vec::with_capacity(trials);
    let mut dists = Vec::with_capacity(trials);
    let mut best: Option<(f64, WeightMatrix, Vec<i8>)> = None;
    for _ in 0..trials {
        let mut cont = WeightMatrix::zeros(cfg.k, cfg.d);
        let mut signs = vec![1i8; cfg.k];
        for (k, s) in signs.iter_mut().enumerate() {
            let l = pick.sample(rng);
            cont.row_mut(k).copy_from_slice(hull.neurons.row(l));
            *s = if hull.coefficients[l] < 0.0 { -1 } else { 1 };
        }
        let mut w = discretize_weights(&cont, m, rng)?;
        if odd {
            for (k, s) in signs.iter_mut().enumerate() {
                if *s < 0 {
                    w.row_mut(k).iter_mut().for_each(|v| *v = -*v);
                    *s = 1;
                }
            }
        }
        let draw_cfg = NetworkConfig {
            signs: signs.clone(),
            ..cfg.clone()
        };
        let mut fit = 0.0;
        let mut dist = 0.0;
        for (i, hi) in h.iter().enumerate() {
            let f = draw_cfg.forward(&w, data.x(i));
            fit += (data.y(i) - f).powi(2);
            dist += (hi - f).powi(2);
        }
        let regret = fit - base;
        regrets.push(regret);
        dists.push(dist);
        if best.as_ref().is_none_or(|(r, _, _)| regret < *r) {
            best = Some((regret, w, signs));
        }
    }
    let (best_regret, best_w, best_signs) = best.expect("trials > 0");

    let bounds = cfg.activation.bounds();
    let (a0, a1, a2, v) = (bounds.a0, bounds.a1, bounds.a2, cfg.v);
    let c_n = data.ys().iter().fold(0.0f64, |mx, y| mx.max(y.abs())) + a0 * v;
    let nf = n as f64;
    let (kf, mf) = (cfg.k as f64, m as f64);
    let width = nf * a0 * a0 * v * v / kf;
    Ok(WitnessReport {
        best_w,
        best_signs,
        best_regret,
        mean_regret: stats::mean(&regrets),
        regret_se: if trials > 1 {
            stats::std_error(&regrets)
        } else {
            f64::NAN
        },
        mean_sq_distance: stats::mean(&dists),
        sq_distance_se: if trials > 1 {
            stats::std_error(&dists)
        } else {
            f64::NAN
        },
        regret_bound: width + nf * (v * c_n * a2 + v * v * a1 * a1) / mf,
        sq_distance_bound: width + nf * a2 * a2 * v * v / (4.0 * mf * mf),
        trials,
    })
}
