use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

/// `E[w_j^2]` for one coordinate of the uniform l1 ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoment {
    /// `2 / ((d+1)(d+2))`, the value for the signed ball.
    pub signed: f64,
    /// `d / ((d+1)^2 (d+2))`, the variance of an unsigned flat Dirichlet coordinate. Kept for
    /// comparison with published statements of this moment.
    pub unsigned_dirichlet_variance: f64,
}

pub fn coordinate_second_moment(d: usize) -> SecondMoment {
    let d = d as f64;
    SecondMoment {
        signed: 2.0 / ((d + 1.0) * (d + 2.0)),
        unsigned_dirichlet_variance: d / ((d + 1.0).powi(2) * (d + 2.0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletMoment {
    /// `E[prod w_j^{r_j}]` under the flat Dirichlet on `d+1` coordinates.
    pub dirichlet: f64,
    /// The same moment under uniform random signs: zero if any `r_j` is odd.
    pub signed: f64,
}

/// `d! prod(r_j!) / (d + sum r_j)!` for the first `r.len() <= d` coordinates.
pub fn dirichlet_moment(d: usize, r: &[u64]) -> DirichletMoment {
    assert!(r.len() <= d, "at most d exponents");
    let total: u64 = r.iter().sum();
    let ln = ln_factorial(d as u64) + r.iter().map(|&v| ln_factorial(v)).sum::<f64>()
        - ln_factorial(d as u64 + total);
    let dirichlet = ln.exp();
    let signed = if r.iter().any(|v| v % 2 == 1) {
        0.0
    } else {
        dirichlet
    };
    DirichletMoment { dirichlet, signed }
}

/// `4 l n / (sqrt(e) d)`, bounding `E[(sum_k u_k^T X w_k)^{2l}]^{1/l}` under the continuous
/// prior for unit `u` and `|x_ij| <= 1`.
pub fn prior_moment_bound(ell: u32, n: usize, d: usize) -> f64 {
    4.0 * ell as f64 * n as f64 / (std::f64::consts::E.sqrt() * d as f64)
}
