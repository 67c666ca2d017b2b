use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{domain_err, Result};
use crate::estimators::{
    exact_discrete_posterior, log_predictive, posterior_mean, PosteriorSnapshot,
};
use crate::nnmodel::{Dataset, NetworkConfig};
use crate::par::{self, Exec};
use crate::priors::GridSupport;

/// Per-step regrets against a competitor `g` at observation `n` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegretRecord {
    pub n: usize,
    pub r_square: f64,
    pub r_rand: f64,
    pub r_log: f64,
    /// `b |eps_n| + b^2` with `b = (b_f + b_g) / 2`.
    pub lambda: f64,
}

impl RegretRecord {
    /// Whether `r_square <= r_rand`, `r_log <= r_rand` and `r_rand <= r_log + 2 beta lambda^2`
    /// hold up to `slack`.
    pub fn ordering_holds(&self, beta: f64, slack: f64) -> bool {
        self.r_square <= self.r_rand + slack
            && self.r_log <= self.r_rand + slack
            && self.r_rand <= self.r_log + 2.0 * beta * self.lambda * self.lambda + slack
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegretLedger {
    pub beta: f64,
    pub records: Vec<RegretRecord>,
    pub avg_square: f64,
    pub avg_rand: f64,
    pub avg_log: f64,
    /// Average of `lambda_n^2`.
    pub lambda_sq: f64,
}

impl RegretLedger {
    /// CSV with per-step regrets and running averages.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "n",
            "r_square",
            "r_rand",
            "r_log",
            "lambda",
            "avg_square",
            "avg_rand",
            "avg_log",
            "avg_lambda_sq",
        ])
        .map_err(csv_err)?;
        let (mut s, mut r, mut l, mut q) = (0.0, 0.0, 0.0, 0.0);
        for rec in &self.records {
            s += rec.r_square;
            r += rec.r_rand;
            l += rec.r_log;
            q += rec.lambda * rec.lambda;
            let c = rec.n as f64;
            let mut fields = vec![rec.n.to_string()];
            fields.extend(
                [
                    rec.r_square,
                    rec.r_rand,
                    rec.r_log,
                    rec.lambda,
                    s / c,
                    r / c,
                    l / c,
                    q / c,
                ]
                .iter()
                .map(f64::to_string),
            );
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Numerical(format!("csv: {e}"))
}

/// Regrets of the prefix posteriors `snapshots[n-1]` on observation `n`, for `n = 1..N`.
///
/// `g[i]` is the competitor's prediction at `x_i`. The competitor predictive is
/// `Normal(g(x), 1/beta)`. `b_f` is `a0 V` with the analytic `a0`; `b_g` is `max |g|`.
pub fn regret_ledger(
    snapshots: &[PosteriorSnapshot],
    cfg: &NetworkConfig,
    data: &Dataset,
    g: &[f64],
    beta: f64,
) -> Result<RegretLedger> {
    let big_n = data.len();
    if g.len() != big_n {
        return Err(domain_err(format!(
            "{} competitor values for {big_n} observations",
            g.len()
        )));
    }
    if snapshots.len() < big_n {
        return Err(domain_err(format!(
            "{} snapshots for {big_n} observations",
            snapshots.len()
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(domain_err("beta must be positive"));
    }
    let b_f = cfg.output_bound();
    let b_g = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b = 0.5 * (b_f + b_g);
    let mut records = Vec::with_capacity(big_n);
    for (i, snap) in snapshots.iter().take(big_n).enumerate() {
        if snap.n != i {
            return Err(domain_err(format!(
                "snapshot {i} was trained on {} observations",
                snap.n
            )));
        }
        let (x, y) = (data.x(i), data.y(i));
        let eps = y - g[i];
        let mu = posterior_mean(snap, cfg, x)?;
        let outs = snap.outputs(cfg, x)?;
        let lp = snap.log_probs();
        let mean_sq: f64 = outs
            .iter()
            .zip(&lp)
            .map(|(f, l)| l.exp() * (y - f) * (y - f))
            .sum();
        let log_p = log_predictive(snap, cfg, x, y, beta)?;
        let log_q = 0.5 * (beta / (2.0 * PI)).ln() - 0.5 * beta * eps * eps;
        records.push(RegretRecord {
            n: i + 1,
            r_square: 0.5 * ((y - mu) * (y - mu) - eps * eps),
            r_rand: 0.5 * (mean_sq - eps * eps),
            r_log: (log_q - log_p) / beta,
            lambda: b * eps.abs() + b * b,
        });
    }
    let avg = |f: &dyn Fn(&RegretRecord) -> f64| {
        if records.is_empty() {
            0.0
        } else {
            records.iter().map(f).sum::<f64>() / records.len() as f64
        }
    };
    Ok(RegretLedger {
        beta,
        avg_square: avg(&|r| r.r_square),
        avg_rand: avg(&|r| r.r_rand),
        avg_log: avg(&|r| r.r_log),
        lambda_sq: avg(&|r| r.lambda * r.lambda),
        records,
    })
}

/// Bayes factors `Z_n = E_prior[prod_{i<=n} N(y_i; f(x_i, w), 1/beta)]` computed two ways.
#[derive(Clone, Debug, Serialize)]
pub struct Telescope {
    /// `ln Z_n` for `n = 0..=N`, each from its own enumeration.
    pub log_z: Vec<f64>,
    /// `ln p_{n-1}(y_n | x_n)` for `n = 1..=N` from the prefix posteriors.
    pub log_predictive: Vec<f64>,
    /// `|sum ln p_{n-1}(y_n) - ln(Z_N / Z_0)|`.
    pub residual: f64,
    /// Largest per-step `|ln p_{n-1}(y_n) - ln(Z_n / Z_{n-1})|`.
    pub max_step_residual: f64,
}

/// Enumerate every prefix posterior from scratch and compare the sum of log predictives with
/// the log Bayes factor ratio.
pub fn bayes_factor_telescope(
    cfg: &NetworkConfig,
    grid: &GridSupport,
    data: &Dataset,
    beta: f64,
    exec: Exec,
) -> Result<Telescope> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(domain_err("beta must be positive"));
    }
    let big_n = data.len();
    let snaps = par::try_map_indices(exec, big_n + 1, |n| {
        exact_discrete_posterior(cfg, grid, data, n, beta, Exec::Sequential)
    })?;
    let log_z: Vec<f64> = snaps
        .iter()
        .map(|s| {
            s.log_mean_likelihood().expect("exact") - 0.5 * s.n as f64 * (2.0 * PI / beta).ln()
        })
        .collect();
    let log_predictive = (0..big_n)
        .map(|i| crate::estimators::log_predictive(&snaps[i], cfg, data.x(i), data.y(i), beta))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = log_predictive.iter().sum();
    let residual = (total - (log_z[big_n] - log_z[0])).abs();
    let max_step_residual = (0..big_n)
        .map(|i| (log_predictive[i] - (log_z[i + 1] - log_z[i])).abs())
        .fold(0.0, f64::max);
    Ok(Telescope {
        log_z,
        log_predictive,
        residual,
        max_step_residual,
    })
}

/// Average log regret in telescoped form:
/// `-(1/(beta N)) ln E_prior[exp(-beta/2 sum (y - f)^2)] - (1/(2N)) sum eps^2`.
///
/// `log_mean_likelihood` is the first expectation's log, as stored on an exact snapshot.
pub fn log_regret_closed_form(log_mean_likelihood: f64, beta: f64, eps: &[f64]) -> Result<f64> {
    if eps.is_empty() {
        return Err(domain_err("need at least one observation"));
    }
    let n = eps.len() as f64;
    let sq: f64 = eps.iter().map(|e| e * e).sum();
    Ok(-log_mean_likelihood / (beta * n) - 0.5 * sq / n)
}

/// Index-of-resolvability bound on `-(1/(beta N)) ln E_prior[exp(-beta loss_N)]`:
/// `-ln P(A) / (beta N) + max_{w in A} loss_N(w) / N`, with `loss_N = (1/2) sum (y - f)^2`.
pub fn resolvability_bound(
    prior_log_mass: f64,
    max_loss_on_a: f64,
    beta: f64,
    n: usize,
) -> Result<f64> {
    if prior_log_mass > 0.0 {
        return Err(domain_err("log prior mass must be nonpositive"));
    }
    if beta.is_nan() || beta <= 0.0 || n == 0 {
        return Err(domain_err("need beta > 0 and N > 0"));
    }
    let n = n as f64;
    Ok(-prior_log_mass / (beta * n) + max_loss_on_a / n)
}
