use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::keyed_rng;
use crate::stats::effective_sample_size;

pub const TARGET_ACCEPTANCE: f64 = 0.574;

/// Value of the target at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Log density up to a constant, when it is available.
    pub log_density: Option<f64>,
    pub score: Vec<f64>,
    /// Largest per-coordinate standard error of an estimated score.
    pub score_se: Option<f64>,
}

impl Evaluation {
    pub fn exact(log_density: f64, score: Vec<f64>) -> Self {
        Evaluation {
            log_density: Some(log_density),
            score,
            score_se: None,
        }
    }
}

/// A density known through its score, and optionally its log density, on a support set.
pub trait TargetDensity {
    fn dim(&self) -> usize;

    fn in_support(&self, x: &[f64]) -> bool;

    /// Evaluate at a state inside the support. `step` keys any randomness the target uses.
    fn evaluate(&mut self, x: &[f64], step: u64) -> Result<Evaluation>;

    /// `log pi(to) - log pi(from)`. Targets without a log density override this; they may
    /// evaluate further states, keyed by `step`.
    fn log_ratio(
        &mut self,
        from: (&[f64], &Evaluation),
        to: (&[f64], &Evaluation),
        _step: u64,
    ) -> Result<f64> {
        Ok(match (from.1.log_density, to.1.log_density) {
            (Some(a), Some(b)) => b - a,
            _ => trapezoid_log_ratio(from, to),
        })
    }
}

/// Line integral of the score along the segment, by the trapezoid rule. Exact for Gaussian
/// targets; the error grows with the cube of the step length otherwise.
pub fn trapezoid_log_ratio(from: (&[f64], &Evaluation), to: (&[f64], &Evaluation)) -> f64 {
    from.0
        .iter()
        .zip(to.0)
        .zip(from.1.score.iter().zip(&to.1.score))
        .map(|((a, b), (sa, sb))| 0.5 * (sa + sb) * (b - a))
        .sum()
}

/// Line integral of the score by Simpson's rule, given the score at the midpoint.
pub fn simpson_log_ratio(
    from: (&[f64], &Evaluation),
    mid_score: &[f64],
    to: (&[f64], &Evaluation),
) -> f64 {
    from.0
        .iter()
        .zip(to.0)
        .zip(from.1.score.iter().zip(mid_score).zip(&to.1.score))
        .map(|((a, b), ((sa, sm), sb))| (sa + 4.0 * sm + sb) * (b - a) / 6.0)
        .sum()
}

/// Target assembled from closures.
pub struct FnTarget<L, S, P> {
    pub dim: usize,
    pub log_density: L,
    pub score: S,
    pub support: P,
}

impl<L, S, P> TargetDensity for FnTarget<L, S, P>
where
    L: Fn(&[f64]) -> f64,
    S: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> bool,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn in_support(&self, x: &[f64]) -> bool {
        (self.support)(x)
    }

    fn evaluate(&mut self, x: &[f64], _step: u64) -> Result<Evaluation> {
        Ok(Evaluation::exact((self.log_density)(x), (self.score)(x)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Langevin time step `tau`: proposals are `x + tau s(x) + sqrt(2 tau) z`.
    pub step_size: f64,
    /// Total iterations including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub adapt_step: bool,
    #[serde(default)]
    pub chain_id: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            step_size: 0.01,
            iterations: 2000,
            burn_in: 500,
            thinning: 1,
            seed: 0,
            adapt_step: true,
            chain_id: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(config_err("step size must be positive"));
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(config_err("need 0 <= burn_in < iterations"));
        }
        if self.thinning == 0 {
            return Err(config_err("thinning must be positive"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Accepted / proposed over the post-burn-in iterations.
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposed: usize,
    pub final_step_size: f64,
    /// Smallest per-coordinate effective sample size over the retained draws.
    pub ess_estimate: f64,
    /// Proposals rejected because they left the support (all iterations).
    pub support_rejections: usize,
}

/// One retained state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub step: usize,
    pub sample: Vec<f64>,
    pub log_density: Option<f64>,
    pub score_se: Option<f64>,
    pub acceptance_so_far: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub records: Vec<SampleRecord>,
    pub diagnostics: ChainDiagnostics,
    /// Final state, whether or not it was retained.
    pub last_state: Vec<f64>,
}

impl ChainOutput {
    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.sample.as_slice())
    }
}

/// Dual averaging of `log tau` towards a target acceptance rate.
struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(step: f64) -> Self {
        DualAveraging {
            mu: (10.0 * step).ln(),
            h_bar: 0.0,
            log_step: step.ln(),
            log_step_bar: step.ln(),
            t: 0.0,
        }
    }

    fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1.0;
        let eta = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (TARGET_ACCEPTANCE - accept_prob);
        self.log_step = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.t.powf(-Self::KAPPA);
        self.log_step_bar = w * self.log_step + (1.0 - w) * self.log_step_bar;
        self.log_step.exp()
    }

    fn frozen(&self) -> f64 {
        self.log_step_bar.exp()
    }
}

fn log_proposal(to: &[f64], from: &[f64], score_from: &[f64], tau: f64) -> f64 {
    let sq: f64 = to
        .iter()
        .zip(from)
        .zip(score_from)
        .map(|((t, f), s)| {
            let r = t - f - tau * s;
            r * r
        })
        .sum();
    -sq / (4.0 * tau)
}

/// Metropolis-adjusted Langevin chain with reject-on-exit support handling.
pub fn mala_chain<T: TargetDensity + ?Sized>(
    target: &mut T,
    init: &[f64],
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    cfg.validate()?;
    if init.len() != target.dim() {
        return Err(config_err("initial state has the wrong dimension"));
    }
    if !target.in_support(init) {
        return Err(Error::OutsideSupport);
    }
    let dim = init.len();
    let mut x = init.to_vec();
    let mut ex = target.evaluate(&x, 0)?;
    check_score(&ex)?;
    let mut tau = cfg.step_size;
    let mut adapt = DualAveraging::new(tau);
    let mut records = Vec::with_capacity(cfg.retained());
    let (mut accepted, mut proposed, mut support_rejections) = (0usize, 0usize, 0usize);
    let mut proposal = vec![0.0; dim];

    for t in 0..cfg.iterations {
        let mut rng = keyed_rng(cfg.seed, cfg.chain_id, t as u64);
        let noise = (2.0 * tau).sqrt();
        for ((p, xi), si) in proposal.iter_mut().zip(&x).zip(&ex.score) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + tau * si + noise * z;
        }
        let post = t >= cfg.burn_in;
        let mut accept_prob = 0.0;
        if target.in_support(&proposal) {
            let ep = target.evaluate(&proposal, t as u64 + 1)?;
            check_score(&ep)?;
            let log_alpha = target.log_ratio((&x, &ex), (&proposal, &ep), t as u64 + 1)?
                + log_proposal(&x, &proposal, &ep.score, tau)
                - log_proposal(&proposal, &x, &ex.score, tau);
            accept_prob = if log_alpha.is_nan() {
                0.0
            } else {
                log_alpha.exp().min(1.0)
            };
            let u: f64 = rng.random();
            if u < accept_prob {
                x.copy_from_slice(&proposal);
                ex = ep;
                if post {
                    accepted += 1;
                }
            }
        } else {
            support_rejections += 1;
        }
        if post {
            proposed += 1;
        }
        if cfg.adapt_step && !post {
            tau = adapt.update(accept_prob);
            if t + 1 == cfg.burn_in {
                tau = adapt.frozen();
            }
        }
        if post && (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
            records.push(SampleRecord {
                step: t,
                sample: x.clone(),
                log_density: ex.log_density,
                score_se: ex.score_se,
                acceptance_so_far: accepted as f64 / proposed as f64,
                step_size: tau,
            });
        }
    }

    let ess_estimate = (0..dim.min(32))
        .map(|j| effective_sample_size(&records.iter().map(|r| r.sample[j]).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    Ok(ChainOutput {
        diagnostics: ChainDiagnostics {
            acceptance_rate: if proposed > 0 {
                accepted as f64 / proposed as f64
            } else {
                0.0
            },
            accepted,
            proposed,
            final_step_size: tau,
            ess_estimate: if ess_estimate.is_finite() {
                ess_estimate
            } else {
                0.0
            },
            support_rejections,
        },
        records,
        last_state: x,
    })
}

fn check_score(e: &Evaluation) -> Result<()> {
    if e.score.iter().any(|v| !v.is_finite()) {
        return Err(Error::Sampler("non-finite score".into()));
    }
    Ok(())
}
