//! Posterior summaries: means, predictive densities, their Cesàro averages over the
//! sequence of prefix posteriors, and exact enumeration posteriors on the grid prior.

mod enumeration;

pub use enumeration::{exact_discrete_posterior, reweight, sequential_posteriors};

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{domain_err, Error, Result};
use crate::nnmodel::{dot, NetworkConfig, WeightMatrix};
use crate::priors::GridSupport;
use crate::stats::logsumexp;

/// Normalized posterior over the `K`-fold product of an enumerated grid.
#[derive(Clone, Debug)]
pub struct ExactTable {
    pub support: Arc<GridSupport>,
    pub k: usize,
    /// Log probability of each product point, in mixed-radix index order.
    pub log_weights: Vec<f64>,
    /// `ln E_prior[exp(-beta * loss_n)]`.
    pub log_mean_likelihood: f64,
}

#[derive(Clone, Debug)]
pub enum Table {
    Samples(Vec<WeightMatrix>),
    Exact(ExactTable),
}

/// Posterior after the first `n` observations, either as equally weighted draws or as an
/// exact table.
#[derive(Clone, Debug)]
pub struct PosteriorSnapshot {
    pub n: usize,
    pub beta: f64,
    table: Table,
}

impl PosteriorSnapshot {
    pub fn from_samples(n: usize, beta: f64, samples: Vec<WeightMatrix>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| domain_err("snapshot needs at least one sample"))?;
        let (k, d) = (first.k(), first.d());
        if samples.iter().any(|w| w.k() != k || w.d() != d) {
            return Err(domain_err("samples disagree on shape"));
        }
        Ok(PosteriorSnapshot {
            n,
            beta,
            table: Table::Samples(samples),
        })
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn exact_table(&self) -> Option<&ExactTable> {
        match &self.table {
            Table::Exact(t) => Some(t),
            Table::Samples(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.exact_table().is_some()
    }

    /// Number of atoms (draws or product points).
    pub fn len(&self) -> usize {
        match &self.table {
            Table::Samples(s) => s.len(),
            Table::Exact(t) => t.log_weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ln E_prior[exp(-beta * loss_n)]` for exact tables.
    pub fn log_mean_likelihood(&self) -> Option<f64> {
        self.exact_table().map(|t| t.log_mean_likelihood)
    }

    /// Weight matrix of atom `i`.
    pub fn atom(&self, i: usize) -> WeightMatrix {
        match &self.table {
            Table::Samples(s) => s[i].clone(),
            Table::Exact(t) => t.support.product_point(t.k, i),
        }
    }

    /// Log probabilities of the atoms.
    pub fn log_probs(&self) -> Vec<f64> {
        match &self.table {
            Table::Samples(s) => vec![-(s.len() as f64).ln(); s.len()],
            Table::Exact(t) => t.log_weights.clone(),
        }
    }

    /// Network outputs `f(x, w)` for every atom, in atom order.
    pub fn outputs(&self, cfg: &NetworkConfig, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != cfg.d {
            return Err(domain_err(format!(
                "input has length {}, expected {}",
                x.len(),
                cfg.d
            )));
        }
        match &self.table {
            Table::Samples(s) => {
                if s[0].k() != cfg.k || s[0].d() != cfg.d {
                    return Err(domain_err("snapshot and network disagree on shape"));
                }
                Ok(s.iter().map(|w| cfg.forward(w, x)).collect())
            }
            Table::Exact(t) => {
                if t.k != cfg.k || t.support.d != cfg.d {
                    return Err(domain_err("snapshot and network disagree on shape"));
                }
                let row: Vec<f64> = t
                    .support
                    .iter()
                    .map(|p| cfg.activation.psi(dot(p, x)))
                    .collect();
                let mut digits = vec![0usize; t.k];
                Ok((0..t.log_weights.len())
                    .map(|idx| {
                        t.support.product_digits(t.k, idx, &mut digits);
                        digits
                            .iter()
                            .enumerate()
                            .map(|(k, &j)| cfg.outer(k) * row[j])
                            .sum()
                    })
                    .collect())
            }
        }
    }

    /// Draw `count` iid atoms from an exact table.
    pub fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<PosteriorSnapshot> {
        let t = self
            .exact_table()
            .ok_or_else(|| domain_err("drawing needs an exact table"))?;
        let probs: Vec<f64> = t.log_weights.iter().map(|l| l.exp()).collect();
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::Numerical(e.to_string()))?;
        let samples = (0..count)
            .map(|_| t.support.product_point(t.k, dist.sample(rng)))
            .collect();
        PosteriorSnapshot::from_samples(self.n, self.beta, samples)
    }

    /// Tab-separated `index<TAB>log_weight` rows of an exact table.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        let t = self
            .exact_table()
            .ok_or_else(|| domain_err("only exact tables can be exported"))?;
        writeln!(out, "index\tlog_weight")?;
        for (i, lw) in t.log_weights.iter().enumerate() {
            writeln!(out, "{i}\t{lw}")?;
        }
        Ok(())
    }

    /// Read a table written by [`write_table`](Self::write_table) back onto `support`.
    pub fn read_table<R: BufRead>(
        input: R,
        support: Arc<GridSupport>,
        k: usize,
        n: usize,
        beta: f64,
    ) -> Result<PosteriorSnapshot> {
        let expected = support.product_len(k)?;
        let mut log_weights = Vec::with_capacity(expected);
        for (line_no, line) in input.lines().enumerate().skip(1) {
            let line = line?;
            let (idx, lw) = line
                .split_once('\t')
                .ok_or_else(|| domain_err(format!("line {}: expected two columns", line_no + 1)))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| domain_err(format!("line {}: bad index", line_no + 1)))?;
            if idx != log_weights.len() {
                return Err(domain_err(format!(
                    "line {}: index {idx} out of order",
                    line_no + 1
                )));
            }
            let lw: f64 = lw
                .parse()
                .map_err(|_| domain_err(format!("line {}: bad weight", line_no + 1)))?;
            log_weights.push(lw);
        }
        if log_weights.len() != expected {
            return Err(domain_err(format!(
                "table has {} rows, support has {expected}",
                log_weights.len()
            )));
        }
        let total = logsumexp(&log_weights);
        if total.abs() > 1e-9 {
            return Err(domain_err(format!("table weights sum to exp({total})")));
        }
        Ok(PosteriorSnapshot {
            n,
            beta,
            table: Table::Exact(ExactTable {
                support,
                k,
                log_weights,
                log_mean_likelihood: f64::NAN,
            }),
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(domain_err("predictive densities need beta > 0"))
    }
}

/// Posterior mean `E[f(x, w)]`.
pub fn posterior_mean(snapshot: &PosteriorSnapshot, cfg: &NetworkConfig, x: &[f64]) -> Result<f64> {
    let outs = snapshot.outputs(cfg, x)?;
    Ok(match snapshot.table() {
        Table::Samples(_) => outs.iter().sum::<f64>() / outs.len() as f64,
        Table::Exact(t) => outs
            .iter()
            .zip(&t.log_weights)
            .map(|(f, lw)| lw.exp() * f)
            .sum(),
    })
}

/// `ln E[N(y; f(x, w), 1/beta)]`, accumulated with log-sum-exp.
pub fn log_predictive(
    snapshot: &PosteriorSnapshot,
    cfg: &NetworkConfig,
    x: &[f64],
    y: f64,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let outs = snapshot.outputs(cfg, x)?;
    let lp = snapshot.log_probs();
    let norm = 0.5 * (beta / (2.0 * PI)).ln();
    let terms: Vec<f64> = outs
        .iter()
        .zip(&lp)
        .map(|(f, l)| {
            let r = y - f;
            l + norm - 0.5 * beta * r * r
        })
        .collect();
    Ok(logsumexp(&terms))
}

pub fn predictive_density(
    snapshot: &PosteriorSnapshot,
    cfg: &NetworkConfig,
    x: &[f64],
    y: f64,
    beta: f64,
) -> Result<f64> {
    Ok(log_predictive(snapshot, cfg, x, y, beta)?.exp())
}

/// Check that `snapshots[i]` is the posterior after `i` observations.
fn check_sequence(snapshots: &[PosteriorSnapshot]) -> Result<()> {
    if snapshots.is_empty() {
        return Err(domain_err("Cesàro averages need the n = 0 snapshot"));
    }
    for (i, s) in snapshots.iter().enumerate() {
        if s.n != i {
            return Err(domain_err(format!(
                "snapshot for n = {i} missing (found n = {})",
                s.n
            )));
        }
    }
    Ok(())
}

/// `(1/(N+1)) sum_{n=0}^N mu_n(x)`.
pub fn cesaro_mean(snapshots: &[PosteriorSnapshot], cfg: &NetworkConfig, x: &[f64]) -> Result<f64> {
    check_sequence(snapshots)?;
    let mut total = 0.0;
    for s in snapshots {
        total += posterior_mean(s, cfg, x)?;
    }
    Ok(total / snapshots.len() as f64)
}

/// Uniform mixture of the prefix predictive densities.
pub fn cesaro_predictive(
    snapshots: &[PosteriorSnapshot],
    cfg: &NetworkConfig,
    x: &[f64],
    y: f64,
    beta: f64,
) -> Result<f64> {
    check_sequence(snapshots)?;
    let logs = snapshots
        .iter()
        .map(|s| log_predictive(s, cfg, x, y, beta))
        .collect::<Result<Vec<_>>>()?;
    Ok((logsumexp(&logs) - (snapshots.len() as f64).ln()).exp())
}
