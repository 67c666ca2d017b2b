//! Acceptance suite. Every criterion prints one PASS/FAIL line with its measured value, the
//! pinned tolerance and the wall time, then asserts.

mod common;

use std::time::{Duration, Instant};

use common::*;
use lcnn::coupling::*;
use lcnn::estimators::sequential_posteriors;
use lcnn::nnmodel::{dot, Activation, Dataset, NetworkConfig, WeightMatrix};
use lcnn::priors::*;
use lcnn::risk::*;
use lcnn::rng::stream_rng;
use lcnn::samplers::*;
use lcnn::{stats, Exec};
use rand::Rng as _;

const TELESCOPE_TOL: f64 = 1e-12;
const ORDERING_SLACK: f64 = 1e-12;
const CLOSED_FORM_REL_TOL: f64 = 1e-9;
const HESSIAN_TOL: f64 = 1e-10;
const MIXTURE_SUP_TOL: f64 = 1e-3;
const SCORE_FD_TOL: f64 = 1e-3;
const SAMPLER_REL_TOL: f64 = 0.02;
const MOMENT_QUAD_TOL: f64 = 1e-6;
const SE_MULTIPLIER: f64 = 3.0;
const AC09_OUTER_ITERATIONS: usize = 15_000;

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let ok = pass && elapsed <= budget;
    println!(
        "[AC{id:02}] {} {name}: {detail} ({:.2} s, budget {} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "AC{id} {name} failed: {detail}");
    assert!(
        elapsed <= budget,
        "AC{id} {name} exceeded its runtime budget"
    );
}

fn hull_instance(
    seed: u64,
    d: usize,
    k: usize,
    n: usize,
    noise: f64,
) -> (NetworkConfig, Dataset, Vec<f64>) {
    let cfg = tanh_net(k, d, 1.0);
    let mut rng = stream_rng(seed, 21);
    let atoms = random_ball_weights(3, d, &mut rng);
    let raw: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l1: f64 = raw.iter().map(|c: &f64| c.abs()).sum();
    let hull = HullCombination::new(raw.iter().map(|c| c / l1).collect(), atoms).unwrap();
    let x = random_inputs(n, d, &mut rng);
    let g: Vec<f64> = x.iter().map(|xi| hull.eval(&cfg, xi)).collect();
    let y = g
        .iter()
        .map(|gi| {
            gi + noise
                * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng)
        })
        .collect();
    (cfg, Dataset::new(x, y).unwrap(), g)
}

fn intercept_setup(beta: f64) -> (NetworkConfig, Dataset, CouplingParams) {
    let cfg = NetworkConfig::new(1, 1, 1.0, Activation::tanh(1.0, 1.0).unwrap()).unwrap();
    let data = Dataset::new(vec![vec![1.0], vec![1.0]], vec![0.6, 0.2]).unwrap();
    let params = CouplingParams::new(&cfg, &data, 2, beta).unwrap();
    (cfg, data, params)
}

#[test]
fn ac01_telescoping_identity() {
    let t0 = Instant::now();
    let cfg = tanh_net(1, 2, 1.0);
    let grid = enumerate_grid(2, 1, 1000).unwrap();
    let data = random_dataset(5, 2, 1.0, 1);
    let t = bayes_factor_telescope(&cfg, &grid, &data, 1.0, Exec::Parallel).unwrap();
    report(
        1,
        "telescoping identity",
        t.residual <= TELESCOPE_TOL,
        format!("residual {:.3e} <= {TELESCOPE_TOL:e}", t.residual),
        t0.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn ac02_regret_ordering() {
    let t0 = Instant::now();
    let mut violations = 0;
    let mut steps = 0;
    for seed in 0..20u64 {
        let d = 2 + (seed % 2) as usize;
        let k = 1 + (seed % 3 == 0) as usize;
        let cfg = tanh_net(k, d, 1.0);
        let grid = enumerate_grid(d, 1, 1000).unwrap();
        let mut rng = stream_rng(seed, 2);
        let teacher = random_ball_weights(k, d, &mut rng);
        let data = teacher_dataset(&cfg, &teacher, 12, 0.4, seed);
        let g: Vec<f64> = (0..12).map(|i| cfg.forward(&teacher, data.x(i))).collect();
        let beta = rng.random_range(0.1..4.0);
        let snaps = sequential_posteriors(&cfg, &grid, &data, beta, Exec::Parallel).unwrap();
        let ledger = regret_ledger(&snaps, &cfg, &data, &g, beta).unwrap();
        for r in &ledger.records {
            steps += 1;
            if r.r_square > r.r_rand + ORDERING_SLACK || r.r_log > r.r_rand + ORDERING_SLACK {
                violations += 1;
            }
        }
    }
    report(
        2,
        "regret ordering",
        violations == 0,
        format!("{violations} violations over {steps} steps of 20 instances"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn ac03_realized_square_regret_below_bound() {
    let t0 = Instant::now();
    let mut worst_ratio: f64 = 0.0;
    let mut count = 0;
    let mut all = true;
    for (d, k) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
        for seed in 0..2u64 {
            for beta in [0.25, 1.0] {
                let (cfg, data, g) = hull_instance(seed * 10 + d as u64, d, k, 200, 0.3);
                let grid = enumerate_grid(d, 1, 1000).unwrap();
                let snaps =
                    sequential_posteriors(&cfg, &grid, &data, beta, Exec::Parallel).unwrap();
                let ledger = regret_ledger(&snaps, &cfg, &data, &g, beta).unwrap();
                let bd = cfg.activation.bounds();
                let eps: Vec<f64> = (0..data.len()).map(|i| data.y(i) - g[i]).collect();
                let inputs = BoundInputs {
                    a0: bd.a0,
                    a1: bd.a1,
                    a2: bd.a2,
                    v: cfg.v,
                    b: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    sigma: 0.3,
                    c_n: data.ys().iter().fold(0.0f64, |m, y| m.max(y.abs())) + bd.a0 * cfg.v,
                    d,
                    n: data.len(),
                    m: 1.0,
                    k: k as f64,
                    beta,
                    non_odd: false,
                };
                let res = ResidualTerms {
                    eps: Some(eps),
                    ..Default::default()
                };
                let bound = bound_calculator(BoundKind::SquareRegret, &inputs, &res)
                    .unwrap()
                    .total;
                all &= ledger.avg_square <= bound;
                worst_ratio = worst_ratio.max(ledger.avg_square / bound);
                count += 1;
            }
        }
    }
    report(
        3,
        "realized square regret below bound",
        all,
        format!("{count} instances, largest realized/bound ratio {worst_ratio:.4}"),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn ac04_closed_form_reproduction() {
    let t0 = Instant::now();
    let mut rng = stream_rng(4, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let sigma = rng.random_range(0.2..2.0);
        let p = BoundInputs {
            a0: rng.random_range(0.3..2.0),
            a1: rng.random_range(0.3..2.0),
            a2: rng.random_range(0.3..2.0),
            v: rng.random_range(0.5..4.0),
            b: rng.random_range(0.1..2.0),
            sigma,
            c_n: rng.random_range(1.0..5.0),
            d: rng.random_range(2..5000),
            n: rng.random_range(10..1_000_000),
            m: 1.0,
            k: 1.0,
            beta: 1.0 / (sigma * sigma),
            non_odd: false,
        };
        let res = ResidualTerms::default();
        for kind in [
            BoundKind::SquareRegret,
            BoundKind::Msr,
            BoundKind::Kl,
            BoundKind::M2Msr,
        ] {
            let (b, k, m) = formula_hyperparams(kind, &p).unwrap();
            let at = bound_calculator(kind, &p.with_hyper(b, k, m), &res)
                .unwrap()
                .total;
            let cf = closed_form(kind, &p, &res).unwrap().unwrap();
            worst = worst.max(((at - cf) / cf).abs());
        }
    }
    report(
        4,
        "closed-form reproduction",
        worst <= CLOSED_FORM_REL_TOL,
        format!("max relative error {worst:.3e} over 50 points x 4 bounds"),
        t0.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn ac05_reverse_log_concavity() {
    let t0 = Instant::now();
    let (k, d, n, beta) = (2, 4, 20, 2.0);
    let cfg = tanh_net(k, d, 1.0);
    let data = random_dataset(n, d, 1.0, 5);
    let report_h = check_logconcavity_conditions(&cfg, &data, beta, n).unwrap();
    let params = CouplingParams::new(&cfg, &data, n, beta).unwrap();
    let mut rng = stream_rng(5, 1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let w0 = random_ball_weights(k, d, &mut rng);
        let (xi, _) =
            sample_xi_given_w(&w0, &data, &params, &mut rng, DEFAULT_REJECTION_BUDGET).unwrap();
        let w = random_ball_weights(k, d, &mut rng);
        let u = unit_vector(k * d, &mut rng);
        worst = worst.max(reverse_hessian_quadform(&cfg, &w, &xi, &data, &params, &u).unwrap());
    }
    report(
        5,
        "reverse conditional log-concavity",
        report_h.cond_h && worst <= HESSIAN_TOL,
        format!(
            "H1 {:.4} H2 {:.2e}, max quadratic form {worst:.3e} <= {HESSIAN_TOL:e} over 1000 draws",
            report_h.h1, report_h.h2
        ),
        t0.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn ac06_marginal_concavity_probe() {
    let t0 = Instant::now();
    let (k, d, n, beta) = (2, 128, 10, 0.05);
    let cfg = tanh_net(k, d, 1.0);
    let data = random_dataset(n, d, 0.1, 6);
    let cond = check_logconcavity_conditions(&cfg, &data, beta, n).unwrap();
    let params = CouplingParams::new(&cfg, &data, n, beta).unwrap();
    let theory = cfg.activation.theory_bounds();
    let holder = holder_variance_bound(1, &params, &theory, cfg.v);
    let holder_rho = params.rho * holder.bound_at_ell_star;

    let prior = ContinuousL1Prior::new(d, k).unwrap();
    let mut rng = stream_rng(6, 0);
    let chain = ChainConfig {
        step_size: 0.05,
        iterations: 3000,
        burn_in: 1000,
        thinning: 2,
        seed: 6,
        adapt_step: true,
        chain_id: 0,
    };
    let mut worst: f64 = 0.0;
    for j in 0..20u64 {
        let w0 = prior.sample(&mut rng);
        let (xi, _) =
            sample_xi_given_w(&w0, &data, &params, &mut rng, DEFAULT_REJECTION_BUDGET).unwrap();
        let cc = ChainConfig {
            chain_id: j,
            ..chain.clone()
        };
        let (samples, _) =
            sample_reverse_conditional(&cfg, &data, &params, &xi, &cc, Some(&w0)).unwrap();
        let est = marginal_concavity_estimate(&xi, &samples, &params, &data).unwrap();
        worst = worst.max(est.value + 2.0 * est.se);
    }
    report(
        6,
        "marginal concavity probe",
        cond.cond_kd && worst < 1.0 && holder_rho < 1.0,
        format!(
            "Kd {} >= A3 (beta N)^2 {:.1}; max estimate + 2 SE {worst:.4} < 1; rho x moment bound {holder_rho:.4} < 1",
            k * d,
            cond.a3 * (beta * n as f64).powi(2)
        ),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn ac07_mixture_consistency() {
    let t0 = Instant::now();
    let (cfg, data, params) = intercept_setup(1.0);
    let q = CouplingQuadrature::new(&cfg, &data, &params, 200).unwrap();
    let half = 1.0 + 10.0 / params.rho.sqrt();
    let mix = q.mixture_density(500, half);
    let post = q.posterior_density();
    let sup = mix
        .iter()
        .zip(&post)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report(
        7,
        "mixture consistency",
        sup <= MIXTURE_SUP_TOL,
        format!("sup-norm {sup:.3e} <= {MIXTURE_SUP_TOL:e} on 200 points"),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn ac08_score_identity() {
    let t0 = Instant::now();
    let (cfg, data, params) = intercept_setup(1.0);
    let q = CouplingQuadrature::new(&cfg, &data, &params, 4000).unwrap();
    let mut rng = stream_rng(8, 0);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    while points < 10 {
        let xi: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        if (xi[0] + xi[1]).abs() > params.b_threshold - 0.01 {
            continue;
        }
        points += 1;
        let s = q.exact_score(&xi);
        let h = 1e-5;
        for j in 0..2 {
            let (mut up, mut dn) = (xi, xi);
            up[j] += h;
            dn[j] -= h;
            let fd = (q.log_marginal(&up) - q.log_marginal(&dn)) / (2.0 * h);
            worst = worst.max((fd - s[j]).abs());
        }
    }
    report(
        8,
        "score identity",
        worst <= SCORE_FD_TOL,
        format!("max |score - finite difference| {worst:.3e} <= {SCORE_FD_TOL:e} at 10 points"),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn ac09_two_stage_matches_quadrature() {
    let t0 = Instant::now();
    let cfg = tanh_net(1, 2, 1.0);
    let teacher = WeightMatrix::from_rows(vec![vec![0.6, 0.3]]).unwrap();
    let data = teacher_dataset(&cfg, &teacher, 5, 0.05, 9);
    let beta = 5.0;
    let params = CouplingParams::new(&cfg, &data, 5, beta).unwrap();
    let x = [1.0, 0.5];
    let truth = reference_posterior_quadrature(&cfg, &data, 5, beta, 256)
        .unwrap()
        .mean_output(&cfg, &x);
    let mut errs = Vec::new();
    let mut ses = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut budgets = TwoStageBudgets::default().with_seed(seed);
        budgets.outer.iterations = AC09_OUTER_ITERATIONS;
        budgets.outer.burn_in = 1000;
        let out = two_stage_sample(&cfg, &data, &params, &budgets, Exec::Parallel).unwrap();
        let f: Vec<f64> = out.draws.iter().map(|d| cfg.forward(&d.w, &x)).collect();
        let mc_se = (stats::variance(&f) / stats::effective_sample_size(&f)).sqrt();
        errs.push(((stats::mean(&f) - truth) / truth).abs());
        ses.push(mc_se / truth);
    }
    let worst = errs.iter().copied().fold(0.0, f64::max);
    report(
        9,
        "two-stage sampler vs quadrature",
        worst <= SAMPLER_REL_TOL,
        format!("truth {truth:.5}, relative errors {errs:.4?} (MC relative SE {ses:.4?}) <= {SAMPLER_REL_TOL}"),
        t0.elapsed(),
        Duration::from_secs(600),
    );
}

/// Two-dimensional Simpson rule over the simplex `{a, b >= 0, a + b <= 1}`.
fn simplex_integral<F: Fn(f64, f64) -> f64>(f: F, n: usize) -> f64 {
    simpson(|a| simpson(|b| f(a, b), 0.0, 1.0 - a, n), 0.0, 1.0, n)
}

#[test]
fn ac10_moment_machinery() {
    let t0 = Instant::now();
    let mut quad_err: f64 = 0.0;
    for r in [0u64, 1, 2, 3, 4, 6] {
        let q = simpson(|a| a.powi(r as i32), 0.0, 1.0, 200);
        quad_err = quad_err.max((q - dirichlet_moment(1, &[r]).dirichlet).abs());
    }
    for (r1, r2) in [(1u64, 1u64), (2, 0), (2, 2), (3, 1), (4, 2)] {
        // Uniform density on the simplex is 2! = 2.
        let q = 2.0 * simplex_integral(|a, b| a.powi(r1 as i32) * b.powi(r2 as i32), 200);
        quad_err = quad_err.max((q - dirichlet_moment(2, &[r1, r2]).dirichlet).abs());
    }

    let mut rng = stream_rng(10, 0);
    let mut mc_ok = true;
    for (d, r) in [
        (3usize, vec![2u64, 2]),
        (4, vec![2]),
        (5, vec![4]),
        (3, vec![1, 1]),
        (2, vec![2, 2]),
    ] {
        let vals: Vec<f64> = (0..200_000)
            .map(|_| {
                let w = sample_l1_ball(d, &mut rng);
                r.iter().zip(&w).map(|(e, v)| v.powi(*e as i32)).product()
            })
            .collect();
        let want = dirichlet_moment(d, &r).signed;
        mc_ok &= (stats::mean(&vals) - want).abs() <= SE_MULTIPLIER * stats::std_error(&vals);
    }

    let mut dominated = true;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(2..12);
        let d = rng.random_range(2..40);
        let k = rng.random_range(1..4);
        let prior = ContinuousL1Prior::new(d, k).unwrap();
        let x = random_inputs(n, d, &mut rng);
        let u = unit_vector(n * k, &mut rng);
        let draws: Vec<f64> = (0..50_000)
            .map(|_| {
                let w = prior.sample(&mut rng);
                (0..k)
                    .map(|kk| {
                        (0..n)
                            .map(|i| u[kk * n + i] * dot(w.row(kk), &x[i]))
                            .sum::<f64>()
                    })
                    .sum()
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
            let bound = prior_moment_bound(ell, n, d);
            dominated &= m <= bound;
            worst_ratio = worst_ratio.max(m / bound);
        }
    }
    report(
        10,
        "moment machinery",
        quad_err <= MOMENT_QUAD_TOL && mc_ok && dominated,
        format!(
            "quadrature error {quad_err:.2e} <= {MOMENT_QUAD_TOL:e}; MC within {SE_MULTIPLIER} SE: {mc_ok}; \
             largest MC moment / bound {worst_ratio:.4}"
        ),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn ac11_coupling_probability() {
    let t0 = Instant::now();
    let (k, d, n) = (2, 6, 15);
    let cfg = tanh_net(k, d, 1.0);
    let data = random_dataset(n, d, 1.0, 11);
    let params = CouplingParams::new(&cfg, &data, n, 1.0).unwrap();
    let lower = probability_lower_bound(&params);
    let mut rng = stream_rng(11, 0);
    let mut smallest: f64 = 1.0;
    for j in 0..5 {
        let w = random_ball_weights(k, d, &mut rng);
        let p = coupling_probability_mc(&w, &data, &params, 100_000, 100 + j, Exec::Parallel);
        smallest = smallest.min(p.estimate);
    }
    report(
        11,
        "coupling probability",
        smallest >= lower,
        format!("smallest estimate {smallest:.6} >= lower bound {lower:.6} at 5 weights"),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn ac12_discretization() {
    let t0 = Instant::now();
    let mut rng = stream_rng(12, 0);
    let d = 8;
    let draws = 40_000;
    let mut unbiased = true;
    let mut variance_ok = true;
    let mut worst_z: f64 = 0.0;
    for m in [1usize, 2, 4, 8] {
        let w = random_ball_weights(1, d, &mut rng);
        let xs = random_inputs(3, d, &mut rng);
        let mut proj = vec![Vec::with_capacity(draws); xs.len()];
        for _ in 0..draws {
            let r = discretize_weights(&w, m, &mut rng).unwrap();
            for (p, x) in proj.iter_mut().zip(&xs) {
                p.push(dot(r.row(0), x));
            }
        }
        for (p, x) in proj.iter().zip(&xs) {
            let target = dot(w.row(0), x);
            let z = (stats::mean(p) - target).abs() / stats::std_error(p);
            worst_z = worst_z.max(z);
            unbiased &= z <= SE_MULTIPLIER;
            // Standard error of the sample variance from the fourth central moment.
            let mu = stats::mean(p);
            let var = stats::variance(p);
            let m4 = stats::mean(&p.iter().map(|v| (v - mu).powi(4)).collect::<Vec<_>>());
            let var_se = ((m4 - var * var) / draws as f64).sqrt();
            variance_ok &= var <= 1.0 / m as f64 + SE_MULTIPLIER * var_se;
        }
    }

    let mut averaged_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for (k, m) in [(1usize, 1usize), (2, 2), (4, 3), (3, 6)] {
        let cfg = tanh_net(k, 5, 1.0);
        let neurons = random_ball_weights(4, 5, &mut rng);
        let raw: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1: f64 = raw.iter().map(|c: &f64| c.abs()).sum();
        let hull = HullCombination::new(raw.iter().map(|c| c / l1).collect(), neurons).unwrap();
        let x = random_inputs(30, 5, &mut rng);
        let y = x.iter().map(|xi| hull.eval(&cfg, xi)).collect();
        let data = Dataset::new(x, y).unwrap();
        let r = approximation_witness(&hull, &cfg, &data, m, 5000, &mut rng).unwrap();
        averaged_ok &= r.mean_sq_distance <= r.sq_distance_bound;
        worst_ratio = worst_ratio.max(r.mean_sq_distance / r.sq_distance_bound);
    }
    report(
        12,
        "discretization",
        unbiased && variance_ok && averaged_ok,
        format!(
            "largest |bias|/SE {worst_z:.2} <= {SE_MULTIPLIER}; variance within 1/M + {SE_MULTIPLIER} SE: {variance_ok}; \
             averaged squared distance / bound {worst_ratio:.4}"
        ),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}
