//! Priors on the inner weights: uniform on the product of l1 balls and uniform on the
//! lattice points of those balls with spacing `1/M`. Also the moment formulas used by the
//! variance bounds and the randomized rounding that maps continuous weights to the grid.

mod grid;
mod moments;

pub use grid::{
    count_grid_points, enumerate_grid, DiscreteGridPrior, GridSupport, DEFAULT_ENUMERATION_LIMIT,
};
pub use moments::{
    coordinate_second_moment, dirichlet_moment, prior_moment_bound, DirichletMoment, SecondMoment,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{config_err, Result};
use crate::nnmodel::WeightMatrix;

/// Uniform distribution on `(S_1^d)^K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContinuousL1Prior {
    pub d: usize,
    pub k: usize,
}

impl ContinuousL1Prior {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(config_err("prior dimensions must be positive"));
        }
        Ok(ContinuousL1Prior { d, k })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightMatrix {
        let mut values = Vec::with_capacity(self.k * self.d);
        for _ in 0..self.k {
            values.extend(sample_l1_ball(self.d, rng));
        }
        WeightMatrix::from_flat(self.k, self.d, values).expect("shape is fixed by construction")
    }

    /// Volume of one l1 ball, `2^d / d!`.
    pub fn ball_volume(d: usize) -> f64 {
        (d as f64 * std::f64::consts::LN_2 - statrs::function::factorial::ln_factorial(d as u64))
            .exp()
    }
}

pub fn sample_continuous<R: Rng + ?Sized>(prior: &ContinuousL1Prior, rng: &mut R) -> WeightMatrix {
    prior.sample(rng)
}

/// A flat Dirichlet draw in `d + 1` coordinates (normalized exponentials), slack dropped,
/// with an independent fair sign per coordinate.
pub fn sample_l1_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..=d).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e[..d]
        .iter()
        .map(|v| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * v / total
        })
        .collect()
}

/// Randomized rounding of each row onto the grid with spacing `1/M`.
///
/// Row `w` gets a slack coordinate `1 - ||w||_1`; `M` indices are drawn with probabilities
/// `|w_j|` (slack included) and coordinate `j` becomes `sign(w_j) * count_j / M`. The result
/// is unbiased for `w` and `Var(x . w_disc) <= 1/M` for `|x_j| <= 1`.
pub fn discretize_weights<R: Rng + ?Sized>(
    w: &WeightMatrix,
    m: usize,
    rng: &mut R,
) -> Result<WeightMatrix> {
    if m == 0 {
        return Err(config_err("grid resolution M must be positive"));
    }
    if !w.in_l1_balls() {
        return Err(crate::Error::OutsideSupport);
    }
    let d = w.d();
    let mut out = WeightMatrix::zeros(w.k(), d);
    let mut cdf = vec![0.0; d];
    for k in 0..w.k() {
        let row = w.row(k);
        let mut acc = 0.0;
        for (c, v) in cdf.iter_mut().zip(row) {
            acc += v.abs();
            *c = acc;
        }
        let mut counts = vec![0usize; d];
        for _ in 0..m {
            let u: f64 = rng.random();
            // Index d (the slack) when u lands beyond the last cumulative weight.
            let j = cdf.partition_point(|&c| c <= u);
            if j < d {
                counts[j] += 1;
            }
        }
        for (j, o) in out.row_mut(k).iter_mut().enumerate() {
            let sign = if row[j] < 0.0 { -1.0 } else { 1.0 };
            *o = sign * counts[j] as f64 / m as f64;
        }
    }
    Ok(out)
}
