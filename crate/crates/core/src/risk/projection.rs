use serde::Serialize;

use crate::error::{domain_err, Error, Result};
use crate::nnmodel::{dot, NetworkConfig};
use crate::priors::GridSupport;

pub const FW_MAX_ITER: usize = 10_000;
pub const FW_GAP_TOL: f64 = 1e-8;

/// Vectors `V psi(x_i . p)` over the grid rows `p` at the given inputs, plus their negatives
/// for non-odd activations. These are the vertices of the finite-dictionary hull.
pub fn neuron_dictionary(
    cfg: &NetworkConfig,
    grid: &GridSupport,
    xs: &[&[f64]],
) -> Result<Vec<Vec<f64>>> {
    if grid.d != cfg.d || xs.iter().any(|x| x.len() != cfg.d) {
        return Err(domain_err("grid, inputs and network disagree on d"));
    }
    let mut atoms: Vec<Vec<f64>> = grid
        .iter()
        .map(|p| {
            xs.iter()
                .map(|x| cfg.v * cfg.activation.psi(dot(p, x)))
                .collect()
        })
        .collect();
    if !cfg.activation.is_odd() {
        let neg: Vec<Vec<f64>> = atoms
            .iter()
            .map(|a| a.iter().map(|v| -v).collect())
            .collect();
        atoms.extend(neg);
    }
    Ok(atoms)
}

#[derive(Clone, Debug, Serialize)]
pub struct HullProjection {
    /// Convex weights on the dictionary atoms.
    pub coefficients: Vec<f64>,
    /// The projected point.
    pub point: Vec<f64>,
    /// Weighted squared distance from the target.
    pub distance_sq: f64,
    /// Frank–Wolfe duality gap at the returned point; bounds the excess distance.
    pub gap: f64,
    pub iterations: usize,
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Closest point to `target` in the convex hull of `atoms` under `sum_i weights_i u_i^2`,
/// by pairwise Frank–Wolfe with exact line search.
pub fn project_onto_hull(
    atoms: &[Vec<f64>],
    target: &[f64],
    weights: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<HullProjection> {
    let n = target.len();
    if atoms.is_empty() || atoms.iter().any(|a| a.len() != n) || weights.len() != n {
        return Err(domain_err("projection inputs disagree on length"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(domain_err("projection weights must be nonnegative"));
    }
    let dist = |x: &[f64]| {
        let r: Vec<f64> = x.iter().zip(target).map(|(a, b)| a - b).collect();
        wdot(weights, &r, &r)
    };
    let start = (0..atoms.len())
        .min_by(|&i, &j| dist(&atoms[i]).total_cmp(&dist(&atoms[j])))
        .expect("nonempty");
    let mut alpha = vec![0.0; atoms.len()];
    alpha[start] = 1.0;
    let mut x = atoms[start].clone();
    let mut gap = f64::INFINITY;
    for it in 0..max_iter {
        let r: Vec<f64> = x.iter().zip(target).map(|(a, b)| a - b).collect();
        // Gradient of the objective is 2 W r; scores are its inner products with the atoms.
        let scores: Vec<f64> = atoms.iter().map(|a| 2.0 * wdot(weights, &r, a)).collect();
        let at_x = 2.0 * wdot(weights, &r, &x);
        let (s, s_score) = scores
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        gap = at_x - s_score;
        if gap <= tol {
            return Ok(HullProjection {
                coefficients: alpha,
                distance_sq: dist(&x),
                point: x,
                gap,
                iterations: it,
            });
        }
        let (v, _) = scores
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| alpha[*i] > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("active set nonempty");
        let dir: Vec<f64> = atoms[s].iter().zip(&atoms[v]).map(|(a, b)| a - b).collect();
        let dd = wdot(weights, &dir, &dir);
        if dd <= 0.0 {
            break;
        }
        let step = (-wdot(weights, &r, &dir) / dd).clamp(0.0, alpha[v]);
        alpha[s] += step;
        alpha[v] -= step;
        if alpha[v] < 1e-300 {
            alpha[v] = 0.0;
        }
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += step * di;
        }
    }
    Err(Error::Numerical(format!(
        "hull projection did not reach gap {tol} (last gap {gap})"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PythagoreanCheck {
    /// `||g - g_tilde||^2 + ||g_tilde - g_hat||^2`.
    pub lhs: f64,
    /// `||g - g_hat||^2`.
    pub rhs: f64,
    pub holds: bool,
}

/// Check `||g - g~||^2 + ||g~ - g^||^2 <= ||g - g^||^2 + slack` under the weighted norm.
///
/// For a projection with duality gap `G` and `g^` in the same hull the deficit is at most `G`,
/// so `slack` should be at least the projection gap.
pub fn pythagorean_check(
    g: &[f64],
    g_tilde: &[f64],
    g_hat: &[f64],
    weights: &[f64],
    slack: f64,
) -> Result<PythagoreanCheck> {
    let n = g.len();
    if g_tilde.len() != n || g_hat.len() != n || weights.len() != n {
        return Err(domain_err("vectors disagree on length"));
    }
    let sq = |a: &[f64], b: &[f64]| {
        let r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        wdot(weights, &r, &r)
    };
    let lhs = sq(g, g_tilde) + sq(g_tilde, g_hat);
    let rhs = sq(g, g_hat);
    Ok(PythagoreanCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
    })
}
