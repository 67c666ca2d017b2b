use serde::{Deserialize, Serialize};

use super::BOX_TOL;
use crate::error::{domain_err, Result};

/// `K` rows of inner weights stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    k: usize,
    d: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(k: usize, d: usize) -> Self {
        WeightMatrix {
            k,
            d,
            values: vec![0.0; k * d],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if k == 0 || d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(domain_err(
                "weight rows must be nonempty and of equal length",
            ));
        }
        Ok(WeightMatrix {
            k,
            d,
            values: rows.concat(),
        })
    }

    pub fn from_flat(k: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * d {
            return Err(domain_err(format!(
                "expected {} weights, got {}",
                k * d,
                values.len()
            )));
        }
        Ok(WeightMatrix { k, d, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn row_l1(&self, k: usize) -> f64 {
        self.row(k).iter().map(|v| v.abs()).sum()
    }

    pub fn max_row_l1(&self) -> f64 {
        (0..self.k).map(|k| self.row_l1(k)).fold(0.0, f64::max)
    }

    /// Every row has l1 norm at most one.
    pub fn in_l1_balls(&self) -> bool {
        self.values.iter().all(|v| v.is_finite()) && self.max_row_l1() <= 1.0 + BOX_TOL
    }

    /// Every row lies in the grid `{w : ||w||_1 <= 1, M w integer}`.
    pub fn on_grid(&self, m: usize) -> bool {
        let m = m as f64;
        self.in_l1_balls()
            && self
                .values
                .iter()
                .all(|v| ((v * m).round() - v * m).abs() <= 1e-9)
    }
}

/// Which prior support a weight matrix must lie in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    L1Balls,
    Grid { m: usize },
}

impl Support {
    pub fn contains(&self, w: &WeightMatrix) -> bool {
        match *self {
            Support::L1Balls => w.in_l1_balls(),
            Support::Grid { m } => w.on_grid(m),
        }
    }
}
