use std::sync::Arc;

use crate::error::{domain_err, Error, Result};
use crate::nnmodel::{dot, Dataset, NetworkConfig};
use crate::par::{self, Exec};
use crate::priors::{GridSupport, DEFAULT_ENUMERATION_LIMIT};
use crate::stats::logsumexp;

use super::{ExactTable, PosteriorSnapshot, Table};

/// Product indices handled per parallel work item.
const CHUNK: usize = 1 << 12;

/// Activations `psi(x_i . p_j)` for every grid row `p_j` and data row `i < n`.
pub(crate) struct ActivationTable {
    n: usize,
    values: Vec<f64>,
}

impl ActivationTable {
    pub(crate) fn new(cfg: &NetworkConfig, grid: &GridSupport, data: &Dataset, n: usize) -> Self {
        let mut values = Vec::with_capacity(grid.len() * n);
        for p in grid.iter() {
            values.extend((0..n).map(|i| cfg.activation.psi(dot(p, data.x(i)))));
        }
        ActivationTable { n, values }
    }

    #[inline]
    fn get(&self, row: usize, i: usize) -> f64 {
        self.values[row * self.n + i]
    }
}

/// Network output at data row `i` for the product point with the given row digits.
#[inline]
pub(crate) fn output_at(
    cfg: &NetworkConfig,
    table: &ActivationTable,
    digits: &[usize],
    i: usize,
) -> f64 {
    digits
        .iter()
        .enumerate()
        .map(|(k, &j)| cfg.outer(k) * table.get(j, i))
        .sum()
}

fn check_inputs(
    cfg: &NetworkConfig,
    grid: &GridSupport,
    data: &Dataset,
    n: usize,
    beta: f64,
) -> Result<usize> {
    cfg.validate()?;
    if grid.d != cfg.d || data.d() != cfg.d {
        return Err(domain_err("grid, data and network disagree on d"));
    }
    if n > data.len() {
        return Err(Error::Index {
            index: n,
            len: data.len(),
        });
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(domain_err("beta must be finite and nonnegative"));
    }
    let total = grid.product_len(cfg.k)?;
    if total > DEFAULT_ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            projected: total as f64,
            limit: DEFAULT_ENUMERATION_LIMIT,
        });
    }
    Ok(total)
}

/// Exact Gibbs posterior `exp(-beta * loss_n)` over the uniform prior on the `K`-fold grid
/// product, as a normalized log-weight table.
pub fn exact_discrete_posterior(
    cfg: &NetworkConfig,
    grid: &GridSupport,
    data: &Dataset,
    n: usize,
    beta: f64,
    exec: Exec,
) -> Result<PosteriorSnapshot> {
    let total = check_inputs(cfg, grid, data, n, beta)?;
    let table = ActivationTable::new(cfg, grid, data, n);
    let ranges = par::chunk_ranges(total, CHUNK);
    let chunks = par::map_indices(exec, ranges.len(), |c| {
        let mut digits = vec![0usize; cfg.k];
        ranges[c]
            .clone()
            .map(|idx| {
                grid.product_digits(cfg.k, idx, &mut digits);
                let loss: f64 = (0..n)
                    .map(|i| {
                        let r = data.y(i) - output_at(cfg, &table, &digits, i);
                        0.5 * r * r
                    })
                    .sum();
                -beta * loss
            })
            .collect::<Vec<f64>>()
    });
    let log_unnorm: Vec<f64> = chunks.into_iter().flatten().collect();
    Ok(from_unnormalized(
        Arc::new(grid.clone()),
        cfg.k,
        n,
        beta,
        log_unnorm,
    ))
}

/// Normalize `log_unnorm` (indexed by product point) into a snapshot; the prior is uniform so
/// the log mean likelihood is the log-sum-exp minus `ln(count)`.
pub(crate) fn from_unnormalized(
    support: Arc<GridSupport>,
    k: usize,
    n: usize,
    beta: f64,
    mut log_unnorm: Vec<f64>,
) -> PosteriorSnapshot {
    let lse = logsumexp(&log_unnorm);
    let log_mean_likelihood = lse - (log_unnorm.len() as f64).ln();
    for v in log_unnorm.iter_mut() {
        *v -= lse;
    }
    PosteriorSnapshot {
        n,
        beta,
        table: Table::Exact(ExactTable {
            support,
            k,
            log_weights: log_unnorm,
            log_mean_likelihood,
        }),
    }
}

/// One sequential update: multiply an exact table at prefix `n` by the likelihood of
/// observation `n` (0-based) and renormalize, giving the table at prefix `n + 1`.
pub fn reweight(
    snapshot: &PosteriorSnapshot,
    cfg: &NetworkConfig,
    data: &Dataset,
) -> Result<PosteriorSnapshot> {
    let exact = snapshot
        .exact_table()
        .ok_or_else(|| domain_err("reweighting needs an exact table"))?;
    let i = snapshot.n;
    if i >= data.len() {
        return Err(Error::Index {
            index: i,
            len: data.len(),
        });
    }
    if exact.k != cfg.k || exact.support.d != cfg.d || data.d() != cfg.d {
        return Err(domain_err("snapshot, data and network disagree on shape"));
    }
    let row_out: Vec<f64> = exact
        .support
        .iter()
        .map(|p| cfg.activation.psi(dot(p, data.x(i))))
        .collect();
    let y = data.y(i);
    let beta = snapshot.beta;
    let mut digits = vec![0usize; cfg.k];
    let log_unnorm: Vec<f64> = exact
        .log_weights
        .iter()
        .enumerate()
        .map(|(idx, &lw)| {
            exact.support.product_digits(cfg.k, idx, &mut digits);
            let f: f64 = digits
                .iter()
                .enumerate()
                .map(|(k, &j)| cfg.outer(k) * row_out[j])
                .sum();
            let r = y - f;
            lw - 0.5 * beta * r * r
        })
        .collect();
    let mut next = from_unnormalized(exact.support.clone(), cfg.k, i + 1, beta, log_unnorm);
    if let Table::Exact(t) = &mut next.table {
        // The input was normalized, so this log-sum-exp is the one-step evidence ratio.
        t.log_mean_likelihood += exact.log_mean_likelihood + (exact.log_weights.len() as f64).ln();
    }
    Ok(next)
}

/// Exact tables for every prefix `0..=N`, built by repeated [`reweight`].
pub fn sequential_posteriors(
    cfg: &NetworkConfig,
    grid: &GridSupport,
    data: &Dataset,
    beta: f64,
    exec: Exec,
) -> Result<Vec<PosteriorSnapshot>> {
    let mut out = Vec::with_capacity(data.len() + 1);
    out.push(exact_discrete_posterior(cfg, grid, data, 0, beta, exec)?);
    for _ in 0..data.len() {
        let next = reweight(out.last().expect("nonempty"), cfg, data)?;
        out.push(next);
    }
    Ok(out)
}
