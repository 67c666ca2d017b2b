mod common;

use common::*;
use lcnn::estimators::{exact_discrete_posterior, sequential_posteriors};
use lcnn::nnmodel::{Dataset, NetworkConfig, WeightMatrix};
use lcnn::priors::{enumerate_grid, GridSupport};
use lcnn::risk::*;
use lcnn::rng::stream_rng;
use lcnn::Exec;
use proptest::prelude::*;
use rand::Rng as _;

fn instance(
    seed: u64,
    d: usize,
    k: usize,
    n: usize,
    noise: f64,
) -> (NetworkConfig, GridSupport, Dataset, Vec<f64>) {
    let cfg = tanh_net(k, d, 1.0);
    let grid = enumerate_grid(d, 1, 10_000).unwrap();
    let mut rng = stream_rng(seed, 7);
    let teacher = random_ball_weights(k, d, &mut rng);
    let data = teacher_dataset(&cfg, &teacher, n, noise, seed);
    let g = (0..n).map(|i| cfg.forward(&teacher, data.x(i))).collect();
    (cfg, grid, data, g)
}

fn base_inputs() -> BoundInputs {
    BoundInputs {
        a0: 1.0,
        a1: 1.0,
        a2: 1.0,
        v: 1.0,
        b: 1.0,
        sigma: 1.0,
        c_n: 2.0,
        d: 2,
        n: 10_000,
        m: 1.0,
        k: 1.0,
        beta: 1.0,
        non_odd: false,
    }
}

fn inputs_strategy() -> impl Strategy<Value = BoundInputs> {
    (
        0.2f64..3.0,
        0.2f64..3.0,
        0.2f64..3.0,
        0.2f64..4.0,
        0.1f64..3.0,
        0.1f64..3.0,
        0.5f64..5.0,
        2usize..10_000,
        1usize..1_000_000,
    )
        .prop_map(|(a0, a1, a2, v, b, sigma, c_n, d, n)| BoundInputs {
            a0,
            a1,
            a2,
            v,
            b,
            sigma,
            c_n,
            d,
            n,
            beta: 1.0 / (sigma * sigma),
            ..base_inputs()
        })
}

fn total(kind: BoundKind, p: &BoundInputs, beta: f64, k: f64, m: f64) -> f64 {
    bound_calculator(kind, &p.with_hyper(beta, k, m), &ResidualTerms::default())
        .unwrap()
        .total
}

#[test]
fn ledger_average_log_regret_equals_telescoped_form() {
    let (cfg, grid, data, g) = instance(2, 2, 2, 8, 0.3);
    let beta = 1.7;
    let snaps = sequential_posteriors(&cfg, &grid, &data, beta, Exec::Sequential).unwrap();
    let ledger = regret_ledger(&snaps, &cfg, &data, &g, beta).unwrap();
    let fresh =
        exact_discrete_posterior(&cfg, &grid, &data, data.len(), beta, Exec::Parallel).unwrap();
    let eps: Vec<f64> = (0..data.len()).map(|i| data.y(i) - g[i]).collect();
    let cf = log_regret_closed_form(fresh.log_mean_likelihood().unwrap(), beta, &eps).unwrap();
    assert!(
        (ledger.avg_log - cf).abs() <= 1e-10,
        "{} vs {cf}",
        ledger.avg_log
    );
}

#[test]
fn resolvability_dominates_exact_cumulant() {
    for seed in 0..10 {
        let (cfg, grid, data, _) = instance(seed, 2, 2, 6, 0.2);
        let beta = 0.5 + seed as f64 * 0.3;
        let snap = exact_discrete_posterior(&cfg, &grid, &data, 6, beta, Exec::Sequential).unwrap();
        let n = data.len();
        let exact = -snap.log_mean_likelihood().unwrap() / (beta * n as f64);
        let losses: Vec<f64> = (0..snap.len())
            .map(|i| lcnn::nnmodel::loss(&cfg, &snap.atom(i), &data, n).unwrap())
            .collect();
        let count = snap.len() as f64;
        let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = losses.iter().copied().fold(0.0, f64::max);
        let singleton = resolvability_bound(-count.ln(), best, beta, n).unwrap();
        let everything = resolvability_bound(0.0, worst, beta, n).unwrap();
        assert!(singleton >= exact - 1e-12 && everything >= exact - 1e-12);
        assert!((everything - worst / n as f64).abs() < 1e-15);
    }
}

#[test]
fn realized_square_regret_below_theorem_bound() {
    for (seed, d, k) in [(1, 2, 1), (2, 3, 2), (3, 2, 2)] {
        let (cfg, grid, data, g) = instance(seed, d, k, 60, 0.1);
        let beta = 0.5;
        let snaps = sequential_posteriors(&cfg, &grid, &data, beta, Exec::Sequential).unwrap();
        let ledger = regret_ledger(&snaps, &cfg, &data, &g, beta).unwrap();
        let bd = cfg.activation.bounds();
        let eps: Vec<f64> = (0..data.len()).map(|i| data.y(i) - g[i]).collect();
        let inputs = BoundInputs {
            c_n: data.ys().iter().fold(0.0f64, |m, y| m.max(y.abs())) + bd.a0 * cfg.v,
            b: g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            d,
            n: data.len(),
            k: k as f64,
            beta,
            ..base_inputs()
        }
        .with_bounds(bd);
        let res = ResidualTerms {
            eps: Some(eps),
            ..Default::default()
        };
        let bound = bound_calculator(BoundKind::SquareRegret, &inputs, &res).unwrap();
        assert!(
            ledger.avg_square < bound.total,
            "{} vs {}",
            ledger.avg_square,
            bound.total
        );
    }
}

#[test]
fn doubling_n_scales_beta_by_fourth_root() {
    let p = base_inputs();
    let (b1, _, _) = formula_hyperparams(BoundKind::SquareRegret, &p).unwrap();
    let (b2, _, _) =
        formula_hyperparams(BoundKind::SquareRegret, &BoundInputs { n: 2 * p.n, ..p }).unwrap();
    assert!((b2 / b1 - 2f64.powf(-0.25)).abs() < 1e-14);
}

#[test]
fn rate_exponents() {
    let p = base_inputs();
    let q = BoundInputs { n: 128 * p.n, ..p };
    // N+1 scales by exactly 128 for the iid kinds.
    let ratio = |kind| {
        let a = formula_hyperparams(kind, &BoundInputs { n: p.n - 1, ..p }).unwrap();
        let b = formula_hyperparams(kind, &BoundInputs { n: q.n - 1, ..p }).unwrap();
        (b.0 / a.0, b.1 / a.1, b.2 / a.2)
    };
    let (_, kk, mk) = ratio(BoundKind::Kl);
    assert!(
        (kk - 128f64.powf(1.0 / 3.0)).abs() < 1e-9 && (mk - 128f64.powf(1.0 / 3.0)).abs() < 1e-9
    );
    let (bm, km, mm) = ratio(BoundKind::M2Msr);
    assert!((km - 128f64.powf(2.0 / 7.0)).abs() < 1e-9);
    assert!((mm - 128f64.powf(1.0 / 7.0)).abs() < 1e-9);
    assert!((bm - 128f64.powf(-2.0 / 7.0)).abs() < 1e-9);
    let (bs, _, _) = ratio(BoundKind::Msr);
    assert!((bs - 128f64.powf(-0.25)).abs() < 1e-9);
}

#[test]
fn witness_recovers_single_grid_neuron() {
    let cfg = tanh_net(1, 3, 1.0);
    let neuron = WeightMatrix::from_rows(vec![vec![0.0, -1.0, 0.0]]).unwrap();
    let hull = HullCombination::new(vec![1.0], neuron).unwrap();
    let mut rng = stream_rng(5, 0);
    let x = random_inputs(20, 3, &mut rng);
    let y = x.iter().map(|xi| hull.eval(&cfg, xi)).collect();
    let data = Dataset::new(x, y).unwrap();
    let r = approximation_witness(&hull, &cfg, &data, 1, 5, &mut rng).unwrap();
    assert_eq!(r.best_regret, 0.0);
    assert_eq!(r.mean_sq_distance, 0.0);
}

#[test]
fn witness_average_obeys_approximation_bounds() {
    for (seed, k, m) in [(1u64, 1usize, 1usize), (2, 2, 2), (3, 4, 3), (4, 3, 1)] {
        let d = 4;
        let cfg = tanh_net(k, d, 1.5);
        let mut rng = stream_rng(seed, 11);
        let neurons = random_ball_weights(5, d, &mut rng);
        let raw: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l1: f64 = raw.iter().map(|c: &f64| c.abs()).sum();
        let hull = HullCombination::new(raw.iter().map(|c| c / l1).collect(), neurons).unwrap();
        let x = random_inputs(40, d, &mut rng);
        let noiseless: Vec<f64> = x.iter().map(|xi| hull.eval(&cfg, xi)).collect();
        let noisy: Vec<f64> = noiseless
            .iter()
            .map(|h| h + rng.random_range(-0.5..0.5))
            .collect();
        let data = Dataset::new(x.clone(), noisy).unwrap();
        let r = approximation_witness(&hull, &cfg, &data, m, 4000, &mut rng).unwrap();
        assert!(
            r.mean_regret <= r.regret_bound,
            "{} > {}",
            r.mean_regret,
            r.regret_bound
        );
        assert!(r.best_regret <= r.mean_regret);
        let clean = Dataset::new(x, noiseless).unwrap();
        let c = approximation_witness(&hull, &cfg, &clean, m, 4000, &mut rng).unwrap();
        assert!(
            c.mean_sq_distance <= c.sq_distance_bound,
            "{} > {}",
            c.mean_sq_distance,
            c.sq_distance_bound
        );
    }
}

#[test]
fn witness_needs_trials() {
    let cfg = tanh_net(1, 2, 1.0);
    let hull = HullCombination::new(vec![1.0], WeightMatrix::zeros(1, 2)).unwrap();
    let data = random_dataset(3, 2, 1.0, 0);
    let mut rng = stream_rng(0, 0);
    assert!(approximation_witness(&hull, &cfg, &data, 1, 0, &mut rng).is_err());
}

#[test]
fn projection_of_hull_member_is_itself() {
    let cfg = tanh_net(1, 2, 1.0);
    let grid = enumerate_grid(2, 2, 1000).unwrap();
    let mut rng = stream_rng(4, 0);
    let x = random_inputs(12, 2, &mut rng);
    let xs: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
    let atoms = neuron_dictionary(&cfg, &grid, &xs).unwrap();
    let w = vec![1.0 / 12.0; 12];
    let g: Vec<f64> = (0..12)
        .map(|i| 0.3 * atoms[1][i] + 0.7 * atoms[5][i])
        .collect();
    let p = project_onto_hull(&atoms, &g, &w, 1_000_000, FW_GAP_TOL).unwrap();
    assert!(p.distance_sq < 1e-8);
    let g_hat: Vec<f64> = atoms[3].clone();
    let c = pythagorean_check(&g, &p.point, &g_hat, &w, p.gap).unwrap();
    assert!(c.holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn regret_orderings_hold_on_exact_posteriors(seed in 0u64..10_000, k in 1usize..3, beta in 0.1f64..5.0) {
        let (cfg, grid, data, g) = instance(seed, 2, k, 8, 0.5);
        let snaps = sequential_posteriors(&cfg, &grid, &data, beta, Exec::Sequential).unwrap();
        let ledger = regret_ledger(&snaps, &cfg, &data, &g, beta).unwrap();
        for r in &ledger.records {
            prop_assert!(r.ordering_holds(beta, 1e-12), "{r:?}");
        }
        prop_assert!(ledger.avg_square <= ledger.avg_rand + 1e-12);
        prop_assert!(ledger.avg_rand <= ledger.avg_log + 2.0 * beta * ledger.lambda_sq + 1e-12);
    }

    #[test]
    fn telescope_residual_below_tolerance(seed in 0u64..10_000, beta in 0.1f64..5.0) {
        let (cfg, grid, data, _) = instance(seed, 2, 1, 5, 0.5);
        let t = bayes_factor_telescope(&cfg, &grid, &data, beta, Exec::Parallel).unwrap();
        prop_assert!(t.residual <= 1e-12);
        prop_assert!(t.max_step_residual <= 1e-12);
    }

    #[test]
    fn terms_are_nonnegative_and_monotone(p in inputs_strategy(), k in 1.0f64..50.0, m in 1.0f64..50.0) {
        let p = p.with_hyper(p.beta, k, m);
        let res = ResidualTerms::default();
        for kind in BoundKind::ALL {
            let t = bound_calculator(kind, &p, &res).unwrap();
            prop_assert!(t.prior_mass >= 0.0 && t.width >= 0.0 && t.grid >= 0.0 && t.beta_quadratic >= 0.0);
            let more_n = bound_calculator(kind, &BoundInputs { n: p.n * 2, ..p }, &res).unwrap();
            let more_k = bound_calculator(kind, &BoundInputs { k: p.k * 2.0, ..p }, &res).unwrap();
            let more_m = bound_calculator(kind, &BoundInputs { m: p.m * 2.0, ..p }, &res).unwrap();
            prop_assert!(more_n.prior_mass < t.prior_mass);
            prop_assert!(more_k.width < t.width);
            prop_assert!(more_m.grid < t.grid);
        }
    }

    #[test]
    fn formula_points_reproduce_closed_forms(p in inputs_strategy(), gap in 0.0f64..0.5) {
        for kind in [BoundKind::SquareRegret, BoundKind::Msr, BoundKind::Kl, BoundKind::M2Msr] {
            let res = ResidualTerms {
                projection_gap: if matches!(kind, BoundKind::Msr | BoundKind::Kl) { gap } else { 0.0 },
                ..Default::default()
            };
            let (b, k, m) = formula_hyperparams(kind, &p).unwrap();
            let at = bound_calculator(kind, &p.with_hyper(b, k, m), &res).unwrap().total;
            let cf = closed_form(kind, &p, &res).unwrap().unwrap();
            prop_assert!(((at - cf) / cf).abs() <= 1e-9, "{kind:?}: {at} vs {cf}");
        }
    }

    #[test]
    fn optimum_is_stationary(p in inputs_strategy()) {
        let rel_grad = |kind: BoundKind, b: f64, k: f64, m: f64, free_beta: bool| {
            let f0 = total(kind, &p, b, k, m);
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            let mut probe = |f: &dyn Fn(f64) -> f64, x: f64| {
                let g = (f(x * (1.0 + h)) - f(x * (1.0 - h))) / (2.0 * h);
                worst = worst.max((g / f0).abs());
            };
            if free_beta {
                probe(&|v| total(kind, &p, v, k, m), b);
            }
            probe(&|v| total(kind, &p, b, v, m), k);
            probe(&|v| total(kind, &p, b, k, v), m);
            worst
        };
        for kind in [BoundKind::SquareRegret, BoundKind::Msr] {
            let (b, k, m) = formula_hyperparams(kind, &p).unwrap();
            prop_assert!(rel_grad(kind, b, k, m, true) <= 1e-6);
            prop_assert!(total(kind, &p, 1.1 * b, k, m) >= total(kind, &p, b, k, m));
        }
        let (b, k, m) = formula_hyperparams(BoundKind::Kl, &p).unwrap();
        prop_assert!(rel_grad(BoundKind::Kl, b, k, m, false) <= 1e-6);
        let (b, k, m, _) = m2_exact_optimum(&p).unwrap();
        prop_assert!(rel_grad(BoundKind::M2Msr, b, k, m, true) <= 1e-6);
    }

    #[test]
    fn non_odd_balance_point_is_stationary(p in inputs_strategy()) {
        let p = BoundInputs { non_odd: true, ..p };
        for kind in [BoundKind::SquareRegret, BoundKind::Msr, BoundKind::LogRegret] {
            let o = optimal_hyperparams(kind, &p, &ResidualTerms::default()).unwrap();
            let f0 = total(kind, &p, o.beta, o.k, o.m);
            let h = 1e-5;
            let dk = (total(kind, &p, o.beta, o.k * (1.0 + h), o.m) - total(kind, &p, o.beta, o.k * (1.0 - h), o.m)) / (2.0 * h);
            prop_assert!((dk / f0).abs() <= 1e-6);
        }
    }

    #[test]
    fn pythagorean_inequality_for_hull_members(seed in 0u64..10_000) {
        let cfg = tanh_net(1, 3, 2.0);
        let grid = enumerate_grid(3, 2, 1000).unwrap();
        let mut rng = stream_rng(seed, 2);
        let x = random_inputs(15, 3, &mut rng);
        let xs: Vec<&[f64]> = x.iter().map(|r| r.as_slice()).collect();
        let atoms = neuron_dictionary(&cfg, &grid, &xs).unwrap();
        let w = vec![1.0 / 15.0; 15];
        // A target outside the hull (|g| exceeds V).
        let g: Vec<f64> = (0..15).map(|_| rng.random_range(-4.0..4.0)).collect();
        let p = project_onto_hull(&atoms, &g, &w, FW_MAX_ITER, FW_GAP_TOL).unwrap();
        prop_assert!(p.gap <= FW_GAP_TOL);
        let raw: Vec<f64> = (0..atoms.len()).map(|_| rng.random::<f64>().powi(8)).collect();
        let s: f64 = raw.iter().sum();
        let g_hat: Vec<f64> = (0..15).map(|i| atoms.iter().zip(&raw).map(|(a, c)| a[i] * c / s).sum()).collect();
        let c = pythagorean_check(&g, &p.point, &g_hat, &w, p.gap).unwrap();
        prop_assert!(c.holds, "{c:?}");
        let same = pythagorean_check(&g, &p.point, &p.point, &w, 0.0).unwrap();
        prop_assert!((same.lhs - same.rhs).abs() < 1e-15);
    }
}

#[test]
fn csv_ledger_round_trips_through_reader() {
    let (cfg, grid, data, g) = instance(9, 2, 1, 5, 0.2);
    let snaps = sequential_posteriors(&cfg, &grid, &data, 1.0, Exec::Sequential).unwrap();
    let ledger = regret_ledger(&snaps, &cfg, &data, &g, 1.0).unwrap();
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(&buf[..]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let last_avg: f64 = rows[4][5].parse().unwrap();
    assert!((last_avg - ledger.avg_square).abs() < 1e-15);
    let exact = exact_discrete_posterior(&cfg, &grid, &data, 0, 1.0, Exec::Sequential).unwrap();
    assert_eq!(exact.len(), 5);
}
