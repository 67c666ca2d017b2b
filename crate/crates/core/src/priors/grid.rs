use rand::Rng;

use crate::error::{config_err, Error, Result};
use crate::nnmodel::WeightMatrix;

pub const DEFAULT_ENUMERATION_LIMIT: usize = 1_000_000;

/// Enumerated lattice points of one l1 ball, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSupport {
    pub d: usize,
    pub m: usize,
    points: Vec<f64>,
}

impl GridSupport {
    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.d)
    }

    /// Number of points in the `K`-fold product.
    pub fn product_len(&self, k: usize) -> Result<usize> {
        (0..k)
            .try_fold(1usize, |acc, _| acc.checked_mul(self.len()))
            .ok_or(Error::EnumerationLimit {
                projected: (self.len() as f64).powi(k as i32),
                limit: usize::MAX,
            })
    }

    /// Decode a mixed-radix index of the `K`-fold product into a weight matrix.
    pub fn product_point(&self, k: usize, mut index: usize) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(k, self.d);
        for r in 0..k {
            let digit = index % self.len();
            index /= self.len();
            w.row_mut(r).copy_from_slice(self.point(digit));
        }
        w
    }

    /// Row indices of a mixed-radix product index.
    pub fn product_digits(&self, k: usize, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut().take(k) {
            *slot = index % self.len();
            index /= self.len();
        }
    }
}

/// Cardinality of `{z in Z^d : ||z||_1 <= M}`, `sum_j 2^j C(d,j) C(M,j)`.
pub fn count_grid_points(d: usize, m: usize) -> u128 {
    let mut total: u128 = 0;
    let mut cd: u128 = 1;
    let mut cm: u128 = 1;
    let mut p2: u128 = 1;
    for j in 0..=d.min(m) {
        if j > 0 {
            cd = cd * (d - j + 1) as u128 / j as u128;
            cm = cm * (m - j + 1) as u128 / j as u128;
            p2 *= 2;
        }
        total += p2 * cd * cm;
    }
    total
}

/// All points of one l1 ball with coordinates in `(1/M) Z`.
///
/// Refuses when `(2d+1)^M` exceeds `limit`.
pub fn enumerate_grid(d: usize, m: usize, limit: usize) -> Result<GridSupport> {
    if d == 0 || m == 0 {
        return Err(config_err("grid needs positive d and M"));
    }
    let projected = ((2 * d + 1) as f64).powi(m as i32);
    if projected > limit as f64 {
        return Err(Error::EnumerationLimit { projected, limit });
    }
    let mut points = Vec::new();
    let mut current = vec![0i64; d];
    fill(&mut current, 0, m as i64, &mut points, m as f64);
    Ok(GridSupport { d, m, points })
}

fn fill(cur: &mut [i64], j: usize, budget: i64, out: &mut Vec<f64>, scale: f64) {
    if j == cur.len() {
        out.extend(cur.iter().map(|&z| z as f64 / scale));
        return;
    }
    for z in -budget..=budget {
        cur[j] = z;
        fill(cur, j + 1, budget - z.abs(), out, scale);
    }
    cur[j] = 0;
}

/// Uniform prior on `(S_{1,M}^d)^K`.
#[derive(Clone, Debug)]
pub struct DiscreteGridPrior {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    support: Option<GridSupport>,
}

impl DiscreteGridPrior {
    pub fn new(d: usize, k: usize, m: usize) -> Result<Self> {
        Self::with_limit(d, k, m, DEFAULT_ENUMERATION_LIMIT)
    }

    pub fn with_limit(d: usize, k: usize, m: usize, limit: usize) -> Result<Self> {
        if d == 0 || k == 0 || m == 0 {
            return Err(config_err("grid prior needs positive d, K and M"));
        }
        if m > d {
            return Err(config_err(format!("grid resolution M={m} exceeds d={d}")));
        }
        let support = match enumerate_grid(d, m, limit) {
            Ok(s) => Some(s),
            Err(Error::EnumerationLimit { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(DiscreteGridPrior { d, k, m, support })
    }

    /// The enumerated row support, when it fits under the limit.
    pub fn support(&self) -> Option<&GridSupport> {
        self.support.as_ref()
    }

    /// Log prior mass of a single point of the K-fold product.
    pub fn log_point_mass(&self) -> f64 {
        -(self.k as f64) * (count_grid_points(self.d, self.m) as f64).ln()
    }

    /// Exact uniform draw. Enumerated supports are indexed directly; larger grids use
    /// rejection from uniform compositions of `M` into `2d+1` parts.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightMatrix {
        let mut w = WeightMatrix::zeros(self.k, self.d);
        for r in 0..self.k {
            match &self.support {
                Some(s) => {
                    let i = rng.random_range(0..s.len());
                    w.row_mut(r).copy_from_slice(s.point(i));
                }
                None => {
                    let z = sample_lattice_by_rejection(self.d, self.m, rng);
                    for (o, v) in w.row_mut(r).iter_mut().zip(z) {
                        *o = v as f64 / self.m as f64;
                    }
                }
            }
        }
        w
    }
}

/// A uniform composition `(p_1, n_1, ..., p_d, n_d, slack)` of `M` is accepted when no
/// coordinate has both a positive and a negative part; accepted compositions are in
/// bijection with lattice points `z_j = p_j - n_j`.
fn sample_lattice_by_rejection<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Vec<i64> {
    let parts = 2 * d + 1;
    loop {
        let mut bars = rand::seq::index::sample(rng, m + parts - 1, parts - 1).into_vec();
        bars.sort_unstable();
        let mut sizes = Vec::with_capacity(parts);
        let mut prev: isize = -1;
        for &b in &bars {
            sizes.push((b as isize - prev - 1) as i64);
            prev = b as isize;
        }
        sizes.push((m + parts - 1) as i64 - prev as i64 - 1);
        if (0..d).all(|j| sizes[2 * j] == 0 || sizes[2 * j + 1] == 0) {
            return (0..d).map(|j| sizes[2 * j] - sizes[2 * j + 1]).collect();
        }
    }
}
