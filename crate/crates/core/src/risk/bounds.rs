use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};
use crate::nnmodel::DerivativeBounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Average log regret on an arbitrary sequence.
    LogRegret,
    /// Average squared regret of the posterior means on an arbitrary sequence.
    SquareRegret,
    /// Mean squared risk of the Cesàro mean under iid data.
    Msr,
    /// Expected Kullback risk of the Cesàro predictive under Gaussian iid data.
    Kl,
    /// Mean squared risk with the `1/M^2` grid term, for targets inside the hull.
    M2Msr,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::LogRegret,
        BoundKind::SquareRegret,
        BoundKind::Msr,
        BoundKind::Kl,
        BoundKind::M2Msr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::LogRegret => "log_regret",
            BoundKind::SquareRegret => "square_regret",
            BoundKind::Msr => "msr",
            BoundKind::Kl => "kl",
            BoundKind::M2Msr => "m2_msr",
        }
    }
}

/// Constants feeding the bound formulas. `K` and `M` are real so the continuous relaxation
/// can be evaluated; integer settings are just whole values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub v: f64,
    /// Sup bound on the target `g`.
    pub b: f64,
    /// Bound on the conditional standard deviation of `y`.
    pub sigma: f64,
    /// `max |y_n| + a0 V` over the realized sequence.
    pub c_n: f64,
    pub d: usize,
    pub n: usize,
    pub m: f64,
    pub k: f64,
    pub beta: f64,
    /// Model with a non-odd activation: `K` and `V` are doubled and the width term loses its
    /// factor `1/2`.
    #[serde(default)]
    pub non_odd: bool,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("V", self.v),
            ("b", self.b),
            ("sigma", self.sigma),
            ("C_N", self.c_n),
            ("M", self.m),
            ("K", self.k),
            ("beta", self.beta),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!(
                    "bound input {name} must be positive, got {v}"
                )));
            }
        }
        if self.d < 2 {
            return Err(config_err("bound inputs need d >= 2"));
        }
        if self.n == 0 {
            return Err(config_err("bound inputs need N >= 1"));
        }
        Ok(())
    }

    pub fn with_bounds(mut self, bounds: DerivativeBounds) -> Self {
        self.a0 = bounds.a0;
        self.a1 = bounds.a1;
        self.a2 = bounds.a2;
        self
    }

    pub fn with_hyper(mut self, beta: f64, k: f64, m: f64) -> Self {
        self.beta = beta;
        self.k = k;
        self.m = m;
        self
    }

    fn log_count(&self) -> f64 {
        ((2 * self.d + 1) as f64).ln()
    }

    /// `(K, V, width coefficient)` after the non-odd rewrite.
    fn effective(&self) -> (f64, f64, f64) {
        if self.non_odd {
            (2.0 * self.k, 2.0 * self.v, 1.0)
        } else {
            (self.k, self.v, 0.5)
        }
    }
}

/// Data-dependent pieces of the bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualTerms {
    /// `y_n - g(x_n)` for the regret kinds.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// `y_n - h(x_n)` for the hull competitor. Defaults to `eps`; when both are absent the
    /// quadratic term uses `C_N` in place of `|eps_tilde|` and the competitor gap is zero.
    #[serde(default)]
    pub eps_tilde: Option<Vec<f64>>,
    /// `||g - g_tilde||^2` for the iid kinds.
    #[serde(default)]
    pub projection_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundBreakdown {
    pub kind: BoundKind,
    /// `M K ln(2d+1) / (beta N)` and its variants.
    pub prior_mass: f64,
    /// `a0^2 V^2 / (2K)` and its variants.
    pub width: f64,
    /// Grid resolution term in `1/M` or `1/M^2`.
    pub grid: f64,
    /// Term linear in `beta` from converting log regret to squared error.
    pub beta_quadratic: f64,
    /// Competitor or projection term.
    pub residual: f64,
    pub total: f64,
    pub warnings: Vec<String>,
}

/// Competitor residuals and their tilde counterparts, each optional.
type EpsPair<'a> = (Option<&'a [f64]>, Option<&'a [f64]>);

fn check_eps(res: &ResidualTerms, n: usize) -> Result<EpsPair<'_>> {
    let eps = res.eps.as_deref();
    let tilde = res.eps_tilde.as_deref().or(eps);
    for (name, v) in [("eps", eps), ("eps_tilde", tilde)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(domain_err(format!(
                    "{name} has {} entries, N = {n}",
                    v.len()
                )));
            }
        }
    }
    Ok((eps, tilde))
}

/// Evaluate one bound with every additive term reported separately.
pub fn bound_calculator(
    kind: BoundKind,
    inputs: &BoundInputs,
    res: &ResidualTerms,
) -> Result<BoundBreakdown> {
    inputs.validate()?;
    if !(res.projection_gap.is_finite() && res.projection_gap >= 0.0) {
        return Err(domain_err("projection gap must be nonnegative"));
    }
    let p = inputs;
    let (k, v, width_coef) = p.effective();
    let lc = p.log_count();
    let big_n = p.n as f64;
    let mut warnings = Vec::new();
    let a0v = p.a0 * v;
    let width = width_coef * a0v * a0v / k;
    let (prior_mass, grid, beta_quadratic, residual) = match kind {
        BoundKind::LogRegret | BoundKind::SquareRegret => {
            let (eps, tilde) = check_eps(res, p.n)?;
            if res.projection_gap != 0.0 {
                warnings.push("projection_gap is ignored by the regret kinds".into());
            }
            let diff = match (eps, tilde) {
                (Some(e), Some(t)) => {
                    0.5 * e.iter().zip(t).map(|(e, t)| t * t - e * e).sum::<f64>() / big_n
                }
                _ => 0.0,
            };
            let quad = if kind == BoundKind::SquareRegret {
                let c = 0.5 * (a0v + p.b);
                let avg = match tilde {
                    Some(t) => t.iter().map(|e| (c * e.abs() + c * c).powi(2)).sum::<f64>() / big_n,
                    None => (c * p.c_n + c * c).powi(2),
                };
                2.0 * p.beta * avg
            } else {
                0.0
            };
            (
                p.m * k * lc / (p.beta * big_n),
                (v * p.c_n * p.a2 + v * v * p.a1 * p.a1) / (2.0 * p.m),
                quad,
                diff,
            )
        }
        BoundKind::Msr => {
            let c = 0.5 * (a0v + p.b);
            (
                p.m * k * lc / (p.beta * (big_n + 1.0)),
                (v * (a0v + p.b) * p.a2 + v * v * p.a1 * p.a1) / (2.0 * p.m),
                2.0 * p.beta * c * c * (p.sigma + c).powi(2),
                res.projection_gap,
            )
        }
        BoundKind::M2Msr => {
            if res.projection_gap > 0.0 {
                return Err(domain_err(
                    "the 1/M^2 bound needs the target inside the hull (zero projection gap)",
                ));
            }
            (
                p.m * k * lc / (p.beta * (big_n + 1.0)),
                p.a2 * p.a2 * v * v / (8.0 * p.m * p.m),
                2.0 * p.beta * a0v * a0v * (p.sigma + a0v).powi(2),
                0.0,
            )
        }
        BoundKind::Kl => {
            if (p.beta * p.sigma * p.sigma - 1.0).abs() > 1e-9 {
                warnings.push(format!(
                    "Kullback bound assumes beta = 1/sigma^2; got beta = {}, 1/sigma^2 = {}",
                    p.beta,
                    1.0 / (p.sigma * p.sigma)
                ));
            }
            let width = p.beta * width;
            let grid = p.beta * (v * (a0v + p.b) * p.a2 + v * v * p.a1 * p.a1) / (2.0 * p.m);
            let prior_mass = p.m * k * lc / (big_n + 1.0);
            let residual = p.beta * res.projection_gap;
            let total = prior_mass + width + grid + residual;
            return Ok(BoundBreakdown {
                kind,
                prior_mass,
                width,
                grid,
                beta_quadratic: 0.0,
                residual,
                total,
                warnings,
            });
        }
    };
    Ok(BoundBreakdown {
        kind,
        prior_mass,
        width,
        grid,
        beta_quadratic,
        residual,
        total: prior_mass + width + grid + beta_quadratic + residual,
        warnings,
    })
}

/// Hyperparameters minimizing a bound, with integer roundings of `K` and `M`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub kind: BoundKind,
    pub beta: f64,
    pub k: f64,
    pub m: f64,
    pub k_rounded: usize,
    pub m_rounded: usize,
    /// Bound at the continuous `(beta, K, M)`.
    pub bound: f64,
    /// Bound at `(beta, K_rounded, M_rounded)`.
    pub bound_rounded: f64,
}

/// `ln(2d+1) / N` for the regret kinds and `ln(2d+1) / (N+1)` for the iid kinds.
fn rate(kind: BoundKind, p: &BoundInputs) -> f64 {
    let n = match kind {
        BoundKind::LogRegret | BoundKind::SquareRegret => p.n as f64,
        _ => p.n as f64 + 1.0,
    };
    p.log_count() / n
}

/// Closed-form optimal hyperparameters, with the rate written in `N+1` for the iid kinds and the
/// Kullback `K*`, `M*` read with `ln(2d+1)` and the `V` factor inside the grid constant.
///
/// For the log regret `beta` is left at its input value and `K`, `M` balance the three
/// remaining terms. For the `1/M^2` bound the schedule is `beta = r^{2/7}`,
/// `K = r^{-2/7}`, `M = r^{-1/7}` with `r = ln(2d+1)/(N+1)`.
pub fn formula_hyperparams(kind: BoundKind, p: &BoundInputs) -> Result<(f64, f64, f64)> {
    p.validate()?;
    if p.non_odd {
        return Err(config_err(
            "closed-form optimal hyperparameters assume an odd activation",
        ));
    }
    let r = rate(kind, p);
    let a0v = p.a0 * p.v;
    Ok(match kind {
        BoundKind::SquareRegret | BoundKind::Msr => {
            let c = 0.5 * (a0v + p.b);
            let (q, tail) = if kind == BoundKind::SquareRegret {
                // B1 = (C_N + c)^2 enters as sqrt(B1) in place of (sigma + c).
                (
                    (p.a2 * p.v * p.c_n + p.a1 * p.a1 * p.v * p.v) / 2.0,
                    p.c_n + c,
                )
            } else {
                (
                    (p.v * (a0v + p.b) * p.a2 + p.v * p.v * p.a1 * p.a1) / 2.0,
                    p.sigma + c,
                )
            };
            let g1 = a0v.sqrt() * q.powf(0.25) / (2.0 * c.powf(1.5) * tail.powf(1.5));
            let g2 = a0v.powf(1.5) / (2.0 * c.sqrt() * tail.sqrt() * q.powf(0.25));
            let g3 = q.powf(0.75) / (a0v.sqrt() * c.sqrt() * tail.sqrt());
            (g1 * r.powf(0.25), g2 * r.powf(-0.25), g3 * r.powf(-0.25))
        }
        BoundKind::Kl => {
            let qf = p.v * (a0v + p.b) * p.a2 + p.v * p.v * p.a1 * p.a1;
            let h = p.beta / 2.0;
            let k = (h * p.v.powi(4)).cbrt() * (p.a0 * p.a0).powf(2.0 / 3.0) / qf.cbrt()
                * r.powf(-1.0 / 3.0);
            let m = qf.powf(2.0 / 3.0) * h.cbrt() / a0v.powf(2.0 / 3.0) * r.powf(-1.0 / 3.0);
            (p.beta, k, m)
        }
        BoundKind::M2Msr => (r.powf(2.0 / 7.0), r.powf(-2.0 / 7.0), r.powf(-1.0 / 7.0)),
        BoundKind::LogRegret => {
            let a = r / p.beta;
            let pw = 0.5 * a0v * a0v;
            let q = (p.v * p.c_n * p.a2 + p.v * p.v * p.a1 * p.a1) / 2.0;
            let t = (a * pw * q).cbrt();
            (p.beta, pw / t, q / t)
        }
    })
}

/// Closed-form bound totals evaluated at the formula hyperparameters. The mean squared
/// risk form uses `N+1`, matching its own optimal choices; projection terms come from `res`.
/// Regret forms assume `eps_tilde = C_N` in the quadratic term and a zero competitor gap.
pub fn closed_form(kind: BoundKind, p: &BoundInputs, res: &ResidualTerms) -> Result<Option<f64>> {
    p.validate()?;
    let r = rate(kind, p);
    let a0v = p.a0 * p.v;
    let c = 0.5 * (a0v + p.b);
    Ok(match kind {
        BoundKind::SquareRegret => {
            let b1 = (p.c_n + c).powi(2);
            let q = (p.a2 * p.v * p.c_n + p.a1 * p.a1 * p.v * p.v) / 2.0;
            Some(4.0 * (a0v * c).sqrt() * (b1 * q).powf(0.25) * r.powf(0.25))
        }
        BoundKind::Msr => {
            let q = (p.v * (a0v + p.b) * p.a2 + p.v * p.v * p.a1 * p.a1) / 2.0;
            Some(
                4.0 * (a0v * c * (p.sigma + c)).sqrt() * q.powf(0.25) * r.powf(0.25)
                    + res.projection_gap,
            )
        }
        BoundKind::Kl => {
            let qf = p.v * (a0v + p.b) * p.a2 + p.v * p.v * p.a1 * p.a1;
            Some(
                3.0 * (p.beta / 2.0).powf(2.0 / 3.0) * a0v.powf(2.0 / 3.0) * qf.cbrt() * r.cbrt()
                    + p.beta * res.projection_gap,
            )
        }
        BoundKind::M2Msr => {
            let bracket = 1.0
                + a0v * a0v / 2.0
                + p.a2 * p.a2 * p.v * p.v / 8.0
                + 2.0 * a0v * a0v * (p.sigma + a0v).powi(2);
            Some(r.powf(2.0 / 7.0) * bracket)
        }
        BoundKind::LogRegret => None,
    })
}

/// Exact minimizer of the `1/M^2` bound over `(beta, K, M)`: with
/// `T = (r P R sqrt(2S))^{2/7}` the optimum is `beta = T/R`, `K = P/T`, `M = sqrt(2S/T)` and
/// the bound is `3.5 T`.
pub fn m2_exact_optimum(p: &BoundInputs) -> Result<(f64, f64, f64, f64)> {
    p.validate()?;
    let r = rate(BoundKind::M2Msr, p);
    let (_, v, wc) = p.effective();
    let a0v = p.a0 * v;
    let pw = wc * a0v * a0v;
    let s = p.a2 * p.a2 * v * v / 8.0;
    let rr = 2.0 * a0v * a0v * (p.sigma + a0v).powi(2);
    let t = (r * pw * rr * (2.0 * s).sqrt()).powf(2.0 / 7.0);
    let k = pw / t;
    let k = if p.non_odd { k / 2.0 } else { k };
    Ok((t / rr, k, (2.0 * s / t).sqrt(), 3.5 * t))
}

/// Stationary point of the bound in the continuous relaxation, solved from the balance
/// conditions of its power-law terms. Handles the non-odd rewrite; `K` is in the caller's
/// units (half the model width when `non_odd`).
pub fn stationary_hyperparams(
    kind: BoundKind,
    p: &BoundInputs,
    res: &ResidualTerms,
) -> Result<(f64, f64, f64)> {
    p.validate()?;
    // Probe the terms at unit hyperparameters to read off the coefficients.
    let unit = p.with_hyper(1.0, 1.0, 1.0);
    let t = bound_calculator(kind, &unit, res)?;
    let a = t.prior_mass;
    let pw = t.width;
    let q = t.grid;
    let (beta, k, m) = match kind {
        BoundKind::SquareRegret | BoundKind::Msr => {
            let rq = t.beta_quadratic;
            let tt = (a * pw * q * rq).powf(0.25);
            (tt / rq, pw / tt, q / tt)
        }
        BoundKind::LogRegret => {
            // prior_mass at beta = 1 scales as 1/beta.
            let a = a / p.beta;
            let tt = (a * pw * q).cbrt();
            (p.beta, pw / tt, q / tt)
        }
        BoundKind::Kl => {
            // At unit hyperparameters the beta-scaled terms were evaluated with beta = 1.
            let (pw, q) = (pw * p.beta, q * p.beta);
            let tt = (a * pw * q).cbrt();
            (p.beta, pw / tt, q / tt)
        }
        BoundKind::M2Msr => {
            let (b, k, m, _) = m2_exact_optimum(p)?;
            return Ok((b, k, m));
        }
    };
    Ok((beta, k, m))
}

/// Hyperparameters for a bound: the closed forms for odd activations, the balance
/// solution after the non-odd rewrite otherwise. Also reports the bound at the nearest
/// integer `K`, `M` (at least 1).
pub fn optimal_hyperparams(
    kind: BoundKind,
    p: &BoundInputs,
    res: &ResidualTerms,
) -> Result<Optimum> {
    let (beta, k, m) = if p.non_odd {
        stationary_hyperparams(kind, p, res)?
    } else {
        formula_hyperparams(kind, p)?
    };
    let k_rounded = (k.round() as usize).max(1);
    let m_rounded = (m.round() as usize).max(1);
    let bound = bound_calculator(kind, &p.with_hyper(beta, k, m), res)?.total;
    let bound_rounded = bound_calculator(
        kind,
        &p.with_hyper(beta, k_rounded as f64, m_rounded as f64),
        res,
    )?
    .total;
    Ok(Optimum {
        kind,
        beta,
        k,
        m,
        k_rounded,
        m_rounded,
        bound,
        bound_rounded,
    })
}
