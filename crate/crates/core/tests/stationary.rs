mod common;

use monodrift_core::framework::admissible_report;
use monodrift_core::integrator::{brownian, simulate, Path, TimeGrid};
use monodrift_core::rng::derive_seed;
use monodrift_core::spectral::{h_norm_sq, GalerkinSpace, StateVec};
use monodrift_core::stationary::{
    d_metric, energy_permutation_test, invariant_samples, pullback, stationarity_test, MetricConfig, MetricVariant,
    PullbackConfig, StationarityMode, PERMUTATIONS,
};
use monodrift_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn random_path(grid: TimeGrid, dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> Path {
    let states = (0..=grid.n_steps)
        .map(|_| StateVec((0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    Path { grid, states }
}

#[test]
fn metric_of_identical_paths_is_zero() {
    let space = GalerkinSpace::sine_1d(3, 1.0).unwrap();
    let grid = TimeGrid::new(-4.0, 4.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_path(grid, 3, &mut rng, 1.0);
    for variant in [MetricVariant::Min, MetricVariant::Sum] {
        let cfg = MetricConfig {
            n_max: 4,
            gamma: 0.5,
            variant,
        };
        assert_eq!(d_metric(&x, &x, &cfg, &space).unwrap(), 0.0);
    }
}

#[test]
fn metric_of_constant_single_mode_difference() {
    let space = GalerkinSpace::from_weights(vec![0.5, 2.0]).unwrap();
    let n_max = 40;
    let grid = TimeGrid::new(-(n_max as f64), n_max as f64, 0.5).unwrap();
    let delta = 0.3;
    let x = Path {
        grid,
        states: vec![StateVec(vec![delta, 0.0]); grid.n_steps + 1],
    };
    let y = Path {
        grid,
        states: vec![space.zero(); grid.n_steps + 1],
    };
    let cfg = MetricConfig {
        n_max,
        gamma: 0.0,
        variant: MetricVariant::Min,
    };
    let d = d_metric(&x, &y, &cfg, &space).unwrap();
    let geometric: f64 = (1..=n_max).map(|n| 0.5f64.powi(n as i32)).sum();
    assert!((d - delta * geometric.sqrt()).abs() < 1e-14);
    assert!((d - delta).abs() < 1e-10);
}

#[test]
fn metric_is_symmetric_and_sum_variant_satisfies_the_triangle_inequality() {
    let space = GalerkinSpace::sine_1d(4, 1.0).unwrap();
    let grid = TimeGrid::new(-3.0, 1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let scale = 10f64.powf(rng.gen_range(-3.0..0.0));
        let [x, y, z] = [0; 3].map(|_| random_path(grid, 4, &mut rng, scale));
        for variant in [MetricVariant::Min, MetricVariant::Sum] {
            let cfg = MetricConfig {
                n_max: 3,
                gamma: 0.7,
                variant,
            };
            let dxy = d_metric(&x, &y, &cfg, &space).unwrap();
            assert!(dxy >= 0.0);
            assert_eq!(dxy, d_metric(&y, &x, &cfg, &space).unwrap());
            if variant == MetricVariant::Sum {
                let dxz = d_metric(&x, &z, &cfg, &space).unwrap();
                let dyz = d_metric(&y, &z, &cfg, &space).unwrap();
                assert!(dxz <= dxy + dyz + 1e-12);
            }
        }
    }
}

#[test]
fn metric_rejects_mismatched_grids() {
    let space = GalerkinSpace::sine_1d(2, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = random_path(TimeGrid::new(0.0, 1.0, 0.1).unwrap(), 2, &mut rng, 1.0);
    let y = random_path(TimeGrid::new(0.0, 1.0, 0.05).unwrap(), 2, &mut rng, 1.0);
    let cfg = MetricConfig {
        n_max: 1,
        gamma: 0.0,
        variant: MetricVariant::Min,
    };
    assert!(d_metric(&x, &y, &cfg, &space).is_err());
}

#[test]
fn linear_pullback_decays_at_the_drift_rate() {
    for a in [0.5, 1.0] {
        let m = ou(a);
        let (_, diag) = pullback(&m, 0.05, &StateVec(vec![1.0]), &PullbackConfig::default(), 3).unwrap();
        let rate = diag.fitted_rate.unwrap();
        assert!((rate + a).abs() < 0.25 * a, "a = {a}: fitted {rate}");
    }
}

#[test]
fn presets_pull_back_with_decreasing_distances() {
    for (m, eps) in presets_at_half_threshold() {
        let (path, diag) = pullback(&m, eps, &m.space.zero(), &PullbackConfig::default(), 21).unwrap();
        assert!(diag.pair_distances.iter().all(|d| *d > 0.0));
        assert!(
            diag.pair_distances.windows(2).all(|w| w[1] < w[0]),
            "{} {:?}",
            m.name,
            diag.pair_distances
        );
        assert!(diag.fitted_rate.unwrap() < 0.0);
        assert!(diag.converged, "{} {:?}", m.name, diag.pair_distances);
        assert_eq!(path.grid.t0, -16.0);
    }
}

#[test]
fn pullback_limit_forgets_the_initial_state() {
    let m = fitted(burgers());
    let eps = 0.5 * admissible_report(&m).unwrap().eps_tilde;
    let cfg = PullbackConfig::default();
    let (p1, d1) = pullback(&m, eps, &m.space.zero(), &cfg, 5).unwrap();
    let (p2, d2) = pullback(&m, eps, &m.space.mode(1, 2.0).unwrap(), &cfg, 5).unwrap();
    assert!(d1.converged && d2.converged);
    let gap: Vec<f64> = p1.last().0.iter().zip(&p2.last().0).map(|(a, b)| a - b).collect();
    assert!(h_norm_sq(&m.space, &StateVec(gap)).unwrap().sqrt() < cfg.tol);
}

#[test]
fn deepest_run_reuses_the_shared_noise() {
    let m = fitted(gl());
    let eps = 0.5 * admissible_report(&m).unwrap().eps_tilde;
    let cfg = PullbackConfig {
        schedule: vec![1, 3],
        dt: 1e-2,
        ..PullbackConfig::default()
    };
    let xi = m.space.mode(0, 0.5).unwrap();
    let (path, _) = pullback(&m, eps, &xi, &cfg, 12).unwrap();
    let grid = TimeGrid::new(-3.0, 0.0, 1e-2).unwrap();
    let noise = brownian(&grid, m.noise.u_dim(), 12).unwrap();
    assert_eq!(path, simulate(&m, eps, &xi, &grid, &noise, None).unwrap());
}

#[test]
fn pullback_rejects_intensities_above_the_threshold() {
    let m = fitted(burgers());
    let bound = admissible_report(&m).unwrap().eps_tilde;
    let err = pullback(&m, bound, &m.space.zero(), &PullbackConfig::default(), 0).unwrap_err();
    assert!(matches!(err, Error::Inadmissible { .. }));
}

#[test]
fn ou_stationary_variance() {
    let (a, eps) = (1.0, 0.1);
    let m = ou(a);
    let cfg = PullbackConfig {
        schedule: vec![8],
        ..PullbackConfig::default()
    };
    let n = 4000;
    let s = invariant_samples(&m, eps, n, &cfg, 40).unwrap();
    let var = s.values.iter().map(|x| x.0[0] * x.0[0]).sum::<f64>() / n as f64;
    let exact = eps / (2.0 * a);
    assert!(
        (var - exact).abs() < 3.0 * exact * (2.0 / n as f64).sqrt(),
        "{var} vs {exact}"
    );
}

#[test]
fn draws_follow_their_seeds() {
    let m = ou(1.0);
    let cfg = PullbackConfig {
        schedule: vec![4],
        dt: 1e-2,
        ..PullbackConfig::default()
    };
    let s = invariant_samples(&m, 0.05, 6, &cfg, 9).unwrap();
    for (i, (x, seed)) in s.values.iter().zip(&s.seeds).enumerate() {
        assert_eq!(*seed, derive_seed(9, i as u64));
        let (path, _) = pullback(&m, 0.05, &m.space.zero(), &cfg, *seed).unwrap();
        assert_eq!(path.last(), x);
    }
}

#[test]
fn second_moment_shrinks_with_the_noise() {
    let m = ou(1.0);
    let cfg = PullbackConfig {
        schedule: vec![8],
        dt: 1e-2,
        enforce_thresholds: false,
        ..PullbackConfig::default()
    };
    let moments: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|eps| {
            let s = invariant_samples(&m, *eps, 2000, &cfg, 77).unwrap();
            s.values.iter().map(|x| x.0[0] * x.0[0]).sum::<f64>() / 2000.0
        })
        .collect();
    assert!(moments.windows(2).all(|w| w[1] < w[0]), "{moments:?}");
}

#[test]
fn identical_times_give_zero_statistic() {
    let m = ou(1.0);
    let cfg = PullbackConfig {
        schedule: vec![4],
        dt: 1e-2,
        ..PullbackConfig::default()
    };
    let r = stationarity_test(&m, 0.05, (0.5, 0.5), 50, &StationarityMode::Pullback(cfg), 1).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!(r.p_flag);
}

#[test]
fn stationary_draws_pass_and_transient_draws_fail() {
    let m = ou(1.0);
    let cfg = PullbackConfig {
        t_end: 1.0,
        ..PullbackConfig::default()
    };
    let r = stationarity_test(&m, 0.05, (0.0, 1.0), 400, &StationarityMode::Pullback(cfg), 2).unwrap();
    assert!(r.p_flag, "p = {}", r.p_value);
    assert_eq!(r.n_permutations, PERMUTATIONS);

    let transient = StationarityMode::Transient {
        xi: StateVec(vec![5.0]),
        start: 0.0,
        dt: 1e-3,
    };
    let r = stationarity_test(&m, 0.05, (0.0, 5.0), 400, &transient, 2).unwrap();
    assert!(!r.p_flag, "p = {}", r.p_value);
}

#[test]
fn evolving_stationary_draws_keeps_their_law() {
    let m = fitted(burgers());
    let eps = 0.5 * admissible_report(&m).unwrap().eps_tilde;
    let cfg = PullbackConfig {
        schedule: vec![8],
        ..PullbackConfig::default()
    };
    let s = invariant_samples(&m, eps, 300, &cfg, 64).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
    let evolved: Vec<StateVec> = s
        .values
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let noise = brownian(&grid, m.noise.u_dim(), derive_seed(1_000, i as u64)).unwrap();
            simulate(&m, eps, x, &grid, &noise, None).unwrap().last().clone()
        })
        .collect();
    let pooled: Vec<&StateVec> = s.values.iter().chain(&evolved).collect();
    let (_, p) = energy_permutation_test(&pooled, 300, PERMUTATIONS, 5);
    assert!(p > 0.01, "p = {p}");
}
