mod common;

use common::*;
use lcnn::estimators::*;
use lcnn::nnmodel::{Dataset, WeightMatrix};
use lcnn::priors::enumerate_grid;
use lcnn::rng::stream_rng;
use lcnn::{stats, Exec};
use proptest::prelude::*;

fn small_case(
    seed: u64,
    n: usize,
    k: usize,
) -> (
    lcnn::nnmodel::NetworkConfig,
    lcnn::priors::GridSupport,
    Dataset,
) {
    (
        tanh_net(k, 2, 1.0),
        enumerate_grid(2, 1, 10_000).unwrap(),
        random_dataset(n, 2, 1.0, seed),
    )
}

#[test]
fn zero_beta_and_empty_prefix_are_uniform() {
    let (cfg, grid, data) = small_case(3, 4, 2);
    for (n, beta) in [(0, 2.0), (4, 0.0)] {
        let s = exact_discrete_posterior(&cfg, &grid, &data, n, beta, Exec::Parallel).unwrap();
        let t = s.exact_table().unwrap();
        let u = -(t.log_weights.len() as f64).ln();
        assert!(t.log_weights.iter().all(|lw| (lw - u).abs() < 1e-12));
    }
}

#[test]
fn empty_prefix_mean_vanishes_for_odd_activation() {
    let (cfg, grid, data) = small_case(4, 3, 2);
    let s = exact_discrete_posterior(&cfg, &grid, &data, 0, 1.0, Exec::Sequential).unwrap();
    let m = posterior_mean(&s, &cfg, &[1.0, 0.37]).unwrap();
    assert!(m.abs() < 1e-15);
}

#[test]
fn large_beta_concentrates_on_zero_loss_points() {
    // Noiseless data from the grid point (0.0, 1.0) at d=2, M=1, K=1.
    let cfg = tanh_net(1, 2, 1.0);
    let grid = enumerate_grid(2, 1, 100).unwrap();
    let teacher = WeightMatrix::from_rows(vec![vec![0.0, 1.0]]).unwrap();
    let data = teacher_dataset(&cfg, &teacher, 6, 0.0, 11);
    let s = exact_discrete_posterior(&cfg, &grid, &data, 6, 500.0, Exec::Sequential).unwrap();
    let t = s.exact_table().unwrap();
    let (best, lw) = t
        .log_weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(s.atom(best), teacher);
    assert!(lw.exp() > 1.0 - 1e-9);
}

#[test]
fn enumeration_mean_matches_monte_carlo_draws() {
    let (cfg, grid, data) = small_case(5, 5, 2);
    let s = exact_discrete_posterior(&cfg, &grid, &data, 5, 2.0, Exec::Parallel).unwrap();
    let x = [1.0, -0.4];
    let exact = posterior_mean(&s, &cfg, &x).unwrap();
    let mut rng = stream_rng(99, 0);
    let mc = s.draw(100_000, &mut rng).unwrap();
    let outs = mc.outputs(&cfg, &x).unwrap();
    let se = stats::std_error(&outs);
    let est = posterior_mean(&mc, &cfg, &x).unwrap();
    assert!(
        (est - exact).abs() <= 3.0 * se,
        "{est} vs {exact} (se {se})"
    );
}

#[test]
fn predictive_integrates_to_one() {
    let (cfg, grid, data) = small_case(6, 4, 1);
    let snaps = sequential_posteriors(&cfg, &grid, &data, 1.5, Exec::Sequential).unwrap();
    let x = [1.0, 0.2];
    for beta in [0.5, 1.5, 4.0] {
        let total = simpson(
            |y| predictive_density(&snaps[3], &cfg, &x, y, beta).unwrap(),
            -12.0,
            12.0,
            4000,
        );
        assert!((total - 1.0).abs() < 1e-6, "beta {beta}: {total}");
        let ces = simpson(
            |y| cesaro_predictive(&snaps, &cfg, &x, y, beta).unwrap(),
            -12.0,
            12.0,
            4000,
        );
        assert!((ces - 1.0).abs() < 1e-6);
    }
}

#[test]
fn predictive_log_ratio_matches_bayes_factor() {
    let (cfg, grid, data) = small_case(7, 5, 2);
    let beta = 1.3;
    for n in 1..=5 {
        let prev =
            exact_discrete_posterior(&cfg, &grid, &data, n - 1, beta, Exec::Sequential).unwrap();
        let cur = exact_discrete_posterior(&cfg, &grid, &data, n, beta, Exec::Sequential).unwrap();
        let log_ratio = cur.log_mean_likelihood().unwrap()
            - prev.log_mean_likelihood().unwrap()
            - 0.5 * (2.0 * std::f64::consts::PI / beta).ln();
        let lp = log_predictive(&prev, &cfg, data.x(n - 1), data.y(n - 1), beta).unwrap();
        assert!(
            (lp - log_ratio).abs() <= 1e-12,
            "n={n}: {lp} vs {log_ratio}"
        );
    }
}

#[test]
fn sample_snapshot_mean_is_plain_average() {
    let cfg = tanh_net(1, 2, 1.0);
    let a = WeightMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
    let b = WeightMatrix::from_rows(vec![vec![-0.5, 0.0]]).unwrap();
    let s = PosteriorSnapshot::from_samples(0, 1.0, vec![a.clone(), b.clone()]).unwrap();
    let x = [1.0, 0.3];
    let want = 0.5 * (cfg.forward(&a, &x) + cfg.forward(&b, &x));
    assert!((posterior_mean(&s, &cfg, &x).unwrap() - want).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reweighting_matches_fresh_enumeration(seed in 0u64..1000, n in 1usize..6, beta in 0.1f64..4.0) {
        let (cfg, grid, data) = small_case(seed, n, 2);
        let prev = exact_discrete_posterior(&cfg, &grid, &data, n - 1, beta, Exec::Sequential).unwrap();
        let stepped = reweight(&prev, &cfg, &data).unwrap();
        let fresh = exact_discrete_posterior(&cfg, &grid, &data, n, beta, Exec::Parallel).unwrap();
        let (a, b) = (stepped.exact_table().unwrap(), fresh.exact_table().unwrap());
        for (x, y) in a.log_weights.iter().zip(&b.log_weights) {
            prop_assert!((x.exp() - y.exp()).abs() <= 1e-12);
        }
        prop_assert!((a.log_mean_likelihood - b.log_mean_likelihood).abs() <= 1e-12);
    }

    #[test]
    fn mean_likelihood_is_nonincreasing(seed in 0u64..1000, beta in 0.1f64..5.0) {
        let (cfg, grid, data) = small_case(seed, 6, 1);
        let snaps = sequential_posteriors(&cfg, &grid, &data, beta, Exec::Sequential).unwrap();
        for w in snaps.windows(2) {
            prop_assert!(w[1].log_mean_likelihood().unwrap() <= w[0].log_mean_likelihood().unwrap() + 1e-15);
        }
    }

    #[test]
    fn predictive_is_positive_and_means_bounded(seed in 0u64..1000, y in -50.0f64..50.0, x1 in -1.0f64..1.0) {
        let (cfg, grid, data) = small_case(seed, 4, 2);
        let snaps = sequential_posteriors(&cfg, &grid, &data, 2.0, Exec::Sequential).unwrap();
        let x = [1.0, x1];
        let bound = cfg.output_bound();
        for s in &snaps {
            prop_assert!(log_predictive(s, &cfg, &x, y, 2.0).unwrap().is_finite());
            prop_assert!(posterior_mean(s, &cfg, &x).unwrap().abs() <= bound + 1e-15);
        }
        let c = cesaro_mean(&snaps, &cfg, &x).unwrap();
        prop_assert!(c.abs() <= bound + 1e-15);
        let comps: Vec<f64> = snaps.iter().map(|s| predictive_density(s, &cfg, &x, 0.3, 2.0).unwrap()).collect();
        let mix = cesaro_predictive(&snaps, &cfg, &x, 0.3, 2.0).unwrap();
        let lo = comps.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = comps.iter().copied().fold(0.0, f64::max);
        prop_assert!(mix >= lo * (1.0 - 1e-12) && mix <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn equal_components_give_the_common_value(seed in 0u64..1000) {
        let cfg = tanh_net(1, 2, 1.0);
        let mut rng = stream_rng(seed, 3);
        let w = random_ball_weights(1, 2, &mut rng);
        let snaps: Vec<_> = (0..4).map(|n| PosteriorSnapshot::from_samples(n, 1.0, vec![w.clone()]).unwrap()).collect();
        let x = [1.0, -0.2];
        let m = posterior_mean(&snaps[0], &cfg, &x).unwrap();
        prop_assert!((cesaro_mean(&snaps, &cfg, &x).unwrap() - m).abs() < 1e-15);
        let p = predictive_density(&snaps[0], &cfg, &x, 0.1, 1.0).unwrap();
        prop_assert!((cesaro_predictive(&snaps, &cfg, &x, 0.1, 1.0).unwrap() - p).abs() < 1e-15);
    }
}

#[test]
fn sequential_and_parallel_enumeration_agree_bitwise() {
    let (cfg, grid, data) = small_case(8, 6, 2);
    let a = exact_discrete_posterior(&cfg, &grid, &data, 6, 1.0, Exec::Sequential).unwrap();
    let b = exact_discrete_posterior(&cfg, &grid, &data, 6, 1.0, Exec::Parallel).unwrap();
    assert_eq!(
        a.exact_table().unwrap().log_weights,
        b.exact_table().unwrap().log_weights
    );
}

#[test]
fn enumeration_limit_is_enforced() {
    let cfg = tanh_net(3, 40, 1.0);
    let grid = enumerate_grid(40, 2, 10_000).unwrap();
    let data = random_dataset(2, 40, 1.0, 1);
    let err = exact_discrete_posterior(&cfg, &grid, &data, 2, 1.0, Exec::Sequential).unwrap_err();
    assert!(matches!(err, lcnn::Error::EnumerationLimit { .. }));
}
