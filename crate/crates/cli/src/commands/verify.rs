//! Property suites run against fixed small configurations derived from the master seed.

use std::time::Instant;

use clap::ValueEnum;
use lcnn::coupling::{
    check_logconcavity_conditions, coupling_probability_mc, estimate_z_and_check,
    holder_variance_bound, marginal_concavity_estimate, probability_lower_bound,
    reverse_hessian_quadform, sample_xi_given_w, CouplingParams, DEFAULT_REJECTION_BUDGET,
};
use lcnn::nnmodel::{dot, Activation, Dataset, NetworkConfig, WeightMatrix};
use lcnn::priors::{
    dirichlet_moment, discretize_weights, enumerate_grid, prior_moment_bound, sample_l1_ball,
    ContinuousL1Prior,
};
use lcnn::risk::bayes_factor_telescope;
use lcnn::rng::{mix, stream_rng, Rng};
use lcnn::samplers::{sample_reverse_conditional, ChainConfig};
use lcnn::{stats, Exec};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{ExperimentConfig, Noise, SynthSpec, Target};
use crate::dataio::synthesize;
use crate::error::{CliError, Result};
use crate::output::Outputs;

/// Monte Carlo comparisons allow this many standard errors; a fresh seed then fails a correct
/// suite with probability well under one percent.
const SE_LIMIT: f64 = 4.0;
const TELESCOPE_TOL: f64 = 1e-12;
const HESSIAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Hessian,
    Marginal,
    Moments,
    Telescope,
    Discretize,
    Zfun,
    CouplingProb,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub pass: bool,
    /// Measured quantity compared against `threshold`.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

fn tanh_net(k: usize, d: usize) -> NetworkConfig {
    NetworkConfig::new(k, d, 1.0, Activation::tanh(1.0, 1.0).expect("valid")).expect("valid")
}

/// Responses uniform on `[-scale, scale]`, independent of the inputs.
fn noise_data(n: usize, d: usize, scale: f64, seed: u64) -> Result<Dataset> {
    let spec = SynthSpec {
        n,
        target: Target::Sine { amplitude: 0.0 },
        noise: Noise::Bounded { half_width: scale },
    };
    Ok(synthesize(&tanh_net(1, d), &spec, seed)?.0)
}

fn ball_weights(k: usize, d: usize, rng: &mut Rng) -> WeightMatrix {
    WeightMatrix::from_rows((0..k).map(|_| sample_l1_ball(d, rng)).collect()).expect("rows")
}

fn unit(dim: usize, rng: &mut Rng) -> Vec<f64> {
    let mut u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    u
}

fn result(suite: Suite, pass: bool, metric: f64, threshold: f64, detail: String) -> SuiteResult {
    SuiteResult {
        suite,
        pass,
        metric,
        threshold,
        detail,
        seconds: 0.0,
    }
}

fn hessian(seed: u64) -> Result<SuiteResult> {
    let (k, d, n, beta) = (2, 4, 20, 2.0);
    let net = tanh_net(k, d);
    let data = noise_data(n, d, 1.0, seed)?;
    let cond = check_logconcavity_conditions(&net, &data, beta, n)?;
    let params = CouplingParams::new(&net, &data, n, beta)?;
    let mut rng = stream_rng(seed, 1);
    let (mut worst, mut violations) = (f64::NEG_INFINITY, 0);
    for _ in 0..1000 {
        let w0 = ball_weights(k, d, &mut rng);
        let (xi, _) = sample_xi_given_w(&w0, &data, &params, &mut rng, DEFAULT_REJECTION_BUDGET)?;
        let w = ball_weights(k, d, &mut rng);
        let q = reverse_hessian_quadform(&net, &w, &xi, &data, &params, &unit(k * d, &mut rng))?;
        worst = worst.max(q);
        violations += (q > HESSIAN_TOL) as usize;
    }
    Ok(result(
        Suite::Hessian,
        cond.cond_h && violations == 0,
        worst,
        HESSIAN_TOL,
        format!(
            "{violations} violations of 1000; H1 {:.4} H2 {:.3e} (conditions hold: {})",
            cond.h1, cond.h2, cond.cond_h
        ),
    ))
}

fn marginal(seed: u64, exec: Exec) -> Result<SuiteResult> {
    let (k, d, n, beta) = (2, 128, 10, 0.05);
    let net = tanh_net(k, d);
    let data = noise_data(n, d, 0.1, seed)?;
    let cond = check_logconcavity_conditions(&net, &data, beta, n)?;
    let params = CouplingParams::new(&net, &data, n, beta)?;
    let holder = params.rho
        * holder_variance_bound(1, &params, &net.activation.theory_bounds(), net.v)
            .bound_at_ell_star;
    let prior = ContinuousL1Prior::new(d, k)?;
    let mut rng = stream_rng(seed, 2);
    let starts: Vec<_> = (0..5)
        .map(|_| {
            let w0 = prior.sample(&mut rng);
            sample_xi_given_w(&w0, &data, &params, &mut rng, DEFAULT_REJECTION_BUDGET)
                .map(|(xi, _)| (w0, xi))
        })
        .collect::<lcnn::Result<_>>()?;
    let worst = lcnn::par::try_map_indices(exec, starts.len(), |j| {
        let chain = ChainConfig {
            step_size: 0.05,
            iterations: 3000,
            burn_in: 1000,
            thinning: 2,
            seed,
            adapt_step: true,
            chain_id: mix(0x3A, j as u64),
        };
        let (w0, xi) = &starts[j];
        let (samples, _) = sample_reverse_conditional(&net, &data, &params, xi, &chain, Some(w0))?;
        let est = marginal_concavity_estimate(xi, &samples, &params, &data)?;
        Ok::<_, lcnn::Error>(est.value + 2.0 * est.se)
    })?
    .into_iter()
    .fold(0.0, f64::max);
    Ok(result(
        Suite::Marginal,
        cond.cond_kd && worst < 1.0 && holder < 1.0,
        worst,
        1.0,
        format!(
            "estimate + 2 SE {worst:.4} at 5 xi; rho x moment bound {holder:.4}; size condition holds: {}",
            cond.cond_kd
        ),
    ))
}

fn moments(seed: u64) -> Result<SuiteResult> {
    let mut rng = stream_rng(seed, 3);
    let mut worst_z: f64 = 0.0;
    for (d, r) in [
        (3usize, vec![2u64, 2]),
        (4, vec![2]),
        (5, vec![4]),
        (2, vec![2, 2]),
    ] {
        let vals: Vec<f64> = (0..100_000)
            .map(|_| {
                let w = sample_l1_ball(d, &mut rng);
                r.iter().zip(&w).map(|(e, v)| v.powi(*e as i32)).product()
            })
            .collect();
        let z =
            (stats::mean(&vals) - dirichlet_moment(d, &r).signed).abs() / stats::std_error(&vals);
        worst_z = worst_z.max(z);
    }
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..5 {
        let (n, d) = (rng.random_range(2..10), rng.random_range(2..30));
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row = vec![1.0];
                row.extend((1..d).map(|_| rng.random_range(-1.0..=1.0)));
                row
            })
            .collect();
        let u = unit(n, &mut rng);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                let w = sample_l1_ball(d, &mut rng);
                (0..n).map(|i| u[i] * dot(&w, &x[i])).sum()
            })
            .collect();
        for ell in 1..=3u32 {
            let m = stats::mean(
                &draws
                    .iter()
                    .map(|v| v.powi(2 * ell as i32))
                    .collect::<Vec<_>>(),
            )
            .powf(1.0 / ell as f64);
            worst_ratio = worst_ratio.max(m / prior_moment_bound(ell, n, d));
        }
    }
    Ok(result(
        Suite::Moments,
        worst_z <= SE_LIMIT && worst_ratio <= 1.0,
        worst_ratio,
        1.0,
        format!(
            "largest moment / bound {worst_ratio:.4}; Dirichlet moments within {worst_z:.2} SE"
        ),
    ))
}

fn telescope(seed: u64, exec: Exec) -> Result<SuiteResult> {
    let net = tanh_net(1, 2);
    let grid = enumerate_grid(2, 1, 1000)?;
    let data = noise_data(5, 2, 1.0, seed)?;
    let t = bayes_factor_telescope(&net, &grid, &data, 1.0, exec)?;
    Ok(result(
        Suite::Telescope,
        t.residual <= TELESCOPE_TOL,
        t.residual,
        TELESCOPE_TOL,
        "d=2 M=1 K=1 N=5 beta=1".into(),
    ))
}

fn discretize(seed: u64) -> Result<SuiteResult> {
    let mut rng = stream_rng(seed, 4);
    let d = 8;
    let draws = 20_000;
    let (mut worst_z, mut var_excess): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for m in [1usize, 2, 4] {
        let w = ball_weights(1, d, &mut rng);
        let mut x = vec![1.0];
        x.extend((1..d).map(|_| rng.random_range(-1.0..=1.0)));
        let proj: Vec<f64> = (0..draws)
            .map(|_| discretize_weights(&w, m, &mut rng).map(|r| dot(r.row(0), &x)))
            .collect::<lcnn::Result<_>>()?;
        worst_z =
            worst_z.max((stats::mean(&proj) - dot(w.row(0), &x)).abs() / stats::std_error(&proj));
        let mu = stats::mean(&proj);
        let var = stats::variance(&proj);
        let m4 = stats::mean(&proj.iter().map(|v| (v - mu).powi(4)).collect::<Vec<_>>());
        let var_se = ((m4 - var * var) / draws as f64).sqrt();
        var_excess = var_excess.max((var - 1.0 / m as f64) / var_se);
    }
    Ok(result(
        Suite::Discretize,
        worst_z <= SE_LIMIT && var_excess <= SE_LIMIT,
        worst_z,
        SE_LIMIT,
        format!("bias within {worst_z:.2} SE; variance exceeds 1/M by at most {var_excess:.2} SE"),
    ))
}

fn zfun(seed: u64) -> Result<SuiteResult> {
    let (k, d, n) = (2, 3, 6);
    let net = tanh_net(k, d);
    let data = noise_data(n, d, 1.0, seed)?;
    let params = CouplingParams::new(&net, &data, n, 1.0)?;
    let mut rng = stream_rng(seed, 5);
    let mut ok = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for j in 0..5 {
        let w = ball_weights(k, d, &mut rng);
        let u = unit(k * d, &mut rng);
        let z = estimate_z_and_check(&w, &u, &params, &data, 20_000, mix(seed, j))?;
        ok += z.within_bounds as usize;
        worst_gap = worst_gap.max(z.grad_dir.abs() - z.grad_bound);
    }
    Ok(result(
        Suite::Zfun,
        ok == 5,
        worst_gap,
        0.0,
        format!("{ok} of 5 weights within the probability and gradient bounds"),
    ))
}

fn coupling_prob(seed: u64, exec: Exec) -> Result<SuiteResult> {
    let (k, d, n) = (2, 6, 15);
    let net = tanh_net(k, d);
    let data = noise_data(n, d, 1.0, seed)?;
    let params = CouplingParams::new(&net, &data, n, 1.0)?;
    let lower = probability_lower_bound(&params);
    let mut rng = stream_rng(seed, 6);
    let mut smallest: f64 = 1.0;
    for j in 0..5 {
        let w = ball_weights(k, d, &mut rng);
        let p = coupling_probability_mc(&w, &data, &params, 100_000, mix(seed, j), exec);
        smallest = smallest.min(p.estimate + SE_LIMIT * p.se);
    }
    Ok(result(
        Suite::CouplingProb,
        smallest >= lower,
        smallest,
        lower,
        format!("smallest estimate + {SE_LIMIT} SE {smallest:.6} against lower bound {lower:.6}"),
    ))
}

pub fn run_suite(suite: Suite, seed: u64, exec: Exec) -> Result<SuiteResult> {
    let t0 = Instant::now();
    let mut r = match suite {
        Suite::Hessian => hessian(seed),
        Suite::Marginal => marginal(seed, exec),
        Suite::Moments => moments(seed),
        Suite::Telescope => telescope(seed, exec),
        Suite::Discretize => discretize(seed),
        Suite::Zfun => zfun(seed),
        Suite::CouplingProb => coupling_prob(seed, exec),
    }?;
    r.seconds = t0.elapsed().as_secs_f64();
    Ok(r)
}

/// Run `suites` (all when empty) and write `verify.csv` and `verify.json`.
pub fn run(cfg: &ExperimentConfig, suites: &[Suite]) -> Result<Vec<SuiteResult>> {
    let mut selected: Vec<Suite> = if suites.is_empty() {
        Suite::value_variants().to_vec()
    } else {
        suites.to_vec()
    };
    selected.sort();
    selected.dedup();
    let results = selected
        .iter()
        .map(|&s| run_suite(s, cfg.seed, cfg.exec))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = Outputs::create(cfg, "verify")?;
    outputs.write_with("verify.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["suite", "pass", "metric", "threshold", "detail"])?;
        for r in &results {
            let name = r
                .suite
                .to_possible_value()
                .expect("named")
                .get_name()
                .to_string();
            c.write_record([
                name,
                r.pass.to_string(),
                r.metric.to_string(),
                r.threshold.to_string(),
                r.detail.clone(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    outputs.write_json("verify.json", &results)?;
    outputs.finish()?;
    Ok(results)
}

/// Oracle failure naming every failed suite.
pub fn verdict(results: &[SuiteResult]) -> Result<()> {
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{:?}: {}", r.suite, r.detail))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Oracle(failed.join("; ")))
    }
}
