use serde::{Deserialize, Serialize};

use super::BOX_TOL;
use crate::error::{domain_err, Result};

/// Design matrix (row-major, first column identically one) and responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(domain_err("design rows have unequal length"));
        }
        Self::from_flat(d, rows.concat(), y)
    }

    pub fn from_flat(d: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d == 0 && !y.is_empty() {
            return Err(domain_err("design matrix has no columns"));
        }
        if x.len() != d * y.len() {
            return Err(domain_err(format!(
                "{} design entries for {} responses",
                x.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| v.is_nan() || v.abs() > 1.0 + BOX_TOL) {
            return Err(domain_err("design entries must lie in [-1, 1]"));
        }
        if x.chunks(d.max(1)).any(|r| r[0] != 1.0) {
            return Err(domain_err("first design column must be identically 1"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(domain_err("responses must be finite"));
        }
        Ok(Dataset { d, x, y })
    }

    /// Empty dataset with `d` columns.
    pub fn empty(d: usize) -> Self {
        Dataset {
            d,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    /// The first `n` observations.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            d: self.d,
            x: self.x[..n * self.d].to_vec(),
            y: self.y[..n].to_vec(),
        }
    }
}
