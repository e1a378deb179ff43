mod common;

use monodrift_core::integrator::{
    brownian, brownian_refined, energy_series, exponential_report, simulate, step, Path, TimeGrid,
};
use monodrift_core::models::{build_linear, build_noise};
use monodrift_core::spectral::{h_norm_sq, GalerkinSpace, StateVec};
use monodrift_core::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;

#[test]
fn increments_have_variance_dt() {
    let grid = TimeGrid::new(0.0, 100.0, 1e-3).unwrap();
    let noise = brownian(&grid, 2, 77).unwrap();
    let n = grid.n_steps as f64;
    // n·s²/dt is chi-square with n degrees of freedom; accept the central 99.7%
    let chi = ChiSquared::new(n).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.00135), chi.inverse_cdf(0.99865));
    for c in 0..2 {
        let ss: f64 = (0..grid.n_steps).map(|i| noise.row(i)[c].powi(2)).sum();
        let stat = ss / grid.dt;
        assert!(stat > lo && stat < hi, "column {c}: {stat} outside ({lo}, {hi})");
    }
}

#[test]
fn same_seed_same_noise() {
    let grid = TimeGrid::new(-3.0, 2.0, 1e-2).unwrap();
    assert_eq!(brownian(&grid, 3, 5).unwrap(), brownian(&grid, 3, 5).unwrap());
    assert_ne!(brownian(&grid, 3, 5).unwrap(), brownian(&grid, 3, 6).unwrap());
}

#[test]
fn refinement_sums_to_the_coarse_increments() {
    let coarse_grid = TimeGrid::new(-1.0, 1.0, 1e-2).unwrap();
    let coarse = brownian(&coarse_grid, 2, 13).unwrap();
    for levels in 1..=3u32 {
        let m = 1usize << levels;
        let fine_grid = TimeGrid::new(-1.0, 1.0, 1e-2 / m as f64).unwrap();
        let fine = brownian_refined(&fine_grid, 2, 13, levels).unwrap();
        for i in 0..coarse_grid.n_steps {
            for c in 0..2 {
                let sum: f64 = (0..m).map(|j| fine.row(i * m + j)[c]).sum();
                let want = coarse.row(i)[c];
                assert!((sum - want).abs() <= 1e-15, "level {levels} step {i}: {sum} vs {want}");
            }
        }
    }
}

#[test]
fn shifted_grids_share_increments() {
    let long = TimeGrid::new(-8.0, 0.0, 1e-3).unwrap();
    let short = TimeGrid::new(-2.0, 0.0, 1e-3).unwrap();
    let a = brownian(&long, 2, 99).unwrap().window(-2.0, 0.0).unwrap();
    let b = brownian(&short, 2, 99).unwrap();
    assert_eq!(a.increments, b.increments);
}

#[test]
fn step_examples() {
    let m = burgers();
    let zero = m.space.zero();
    let dw = vec![0.0; m.noise.u_dim()];
    let v = vec![0.0; m.noise.u_dim()];
    assert_eq!(step(&m, 0.01, &zero, 1e-3, &dw, Some(&v)).unwrap(), zero);

    let lin = ou(2.5);
    let x = step(&lin, 0.0, &StateVec(vec![1.0]), 0.1, &[0.0], None).unwrap();
    assert!((x.0[0] - 1.0 / 1.25).abs() < 1e-15);
}

#[test]
fn blowup_carries_the_step() {
    let m = burgers();
    let xi = m.space.mode(0, 1e200).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 1e-2).unwrap();
    let noise = brownian(&grid, m.noise.u_dim(), 0).unwrap();
    match simulate(&m, 0.0, &xi, &grid, &noise, None) {
        Err(Error::Blowup { step, t }) => {
            // steps count from zero and `t` is the time the failed step was heading to
            assert!((t - (step + 1) as f64 * 1e-2).abs() < 1e-12);
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn ou_transition_moments() {
    let (a, eps, x0, t) = (1.0, 0.2, 1.0, 1.0);
    let m = ou(a);
    let grid = TimeGrid::new(0.0, t, 1e-3).unwrap();
    let n = 10_000;
    let ends: Vec<f64> = (0..n)
        .map(|p| {
            let noise = brownian(&grid, 1, 1000 + p).unwrap();
            simulate(&m, eps, &StateVec(vec![x0]), &grid, &noise, None)
                .unwrap()
                .last()
                .0[0]
        })
        .collect();
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let exact_mean = x0 * (-a * t).exp();
    let exact_var = eps * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a);
    let se_mean = (exact_var / n as f64).sqrt();
    let se_var = exact_var * (2.0 / (n - 1) as f64).sqrt();
    assert!((mean - exact_mean).abs() < 3.0 * se_mean, "{mean} vs {exact_mean}");
    assert!((var - exact_var).abs() < 3.0 * se_var, "{var} vs {exact_var}");
}

#[test]
fn noiseless_linear_mode_decays_exponentially() {
    let a = 1.7;
    let m = ou(a);
    for dt in [1e-2, 1e-3] {
        let grid = TimeGrid::new(0.0, 2.0, dt).unwrap();
        let noise = brownian(&grid, 1, 0).unwrap();
        let p = simulate(&m, 0.0, &StateVec(vec![1.0]), &grid, &noise, None).unwrap();
        let err = (p.last().0[0] - (-a * 2.0f64).exp()).abs();
        assert!(err < dt, "dt {dt}: {err}");
    }
}

#[test]
fn burgers_without_noise_dissipates() {
    let m = burgers();
    let xi = m.space.mode(0, 1.0).unwrap();
    let grid = TimeGrid::new(0.0, 5.0, 1e-3).unwrap();
    let noise = brownian(&grid, m.noise.u_dim(), 0).unwrap();
    let p = simulate(&m, 0.0, &xi, &grid, &noise, None).unwrap();
    let rate = m.space.lambda1() * m.mono.gamma0 / 4.0;
    for (i, x) in p.states.iter().enumerate() {
        let bound = (-rate * grid.time(i)).exp() * h_norm_sq(&m.space, &xi).unwrap();
        assert!(h_norm_sq(&m.space, x).unwrap() <= bound);
    }
}

#[test]
fn replay_is_bit_identical() {
    let m = ns_decaying();
    let grid = TimeGrid::new(0.0, 1.0, 1e-3).unwrap();
    let xi = m.space.mode(2, 0.5).unwrap();
    let run = || {
        let noise = brownian(&grid, m.noise.u_dim(), 31).unwrap();
        simulate(&m, 0.001, &xi, &grid, &noise, None).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn strong_error_decays() {
    // reference: same Brownian path refined 16 times below the finest step
    let a = 1.0;
    let m = ou(a);
    let eps = 0.2;
    let xi = StateVec(vec![1.0]);
    let coarse = 1e-2;
    let t = 1.0;
    let paths = 200;
    let mut errs = [0.0f64; 3];
    for p in 0..paths {
        let seed = 500 + p;
        let ref_grid = TimeGrid::new(0.0, t, coarse / 64.0).unwrap();
        let ref_noise = brownian_refined(&ref_grid, 1, seed, 6).unwrap();
        let exact = simulate(&m, eps, &xi, &ref_grid, &ref_noise, None).unwrap().last().0[0];
        for (j, levels) in [0u32, 1, 2].iter().enumerate() {
            let grid = TimeGrid::new(0.0, t, coarse / (1u32 << levels) as f64).unwrap();
            let noise = brownian_refined(&grid, 1, seed, *levels).unwrap();
            let x = simulate(&m, eps, &xi, &grid, &noise, None).unwrap().last().0[0];
            errs[j] += (x - exact).powi(2);
        }
    }
    let rms: Vec<f64> = errs.iter().map(|e| (e / paths as f64).sqrt()).collect();
    let slope = (rms[0].ln() - rms[2].ln()) / 4f64.ln();
    assert!(slope >= 0.5, "observed order {slope} from {rms:?}");
}

#[test]
fn energy_series_examples() {
    let space = GalerkinSpace::from_weights(vec![4.0, 9.0]).unwrap();
    let noise = build_noise(&space, &additive(1)).unwrap();
    let m = build_linear(space, vec![4.0, 9.0], noise).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 0.01).unwrap();

    let zero = Path {
        grid,
        states: vec![m.space.zero(); grid.n_steps + 1],
    };
    let e = energy_series(&m, &zero);
    assert!(e
        .h_sq
        .iter()
        .chain(&e.v_sq_int)
        .chain(&e.h_beta_v_int)
        .chain(&e.h_2beta)
        .all(|v| *v == 0.0));

    let c = 0.7;
    let constant = Path {
        grid,
        states: vec![StateVec(vec![c, 0.0]); grid.n_steps + 1],
    };
    let e = energy_series(&m, &constant);
    assert!((e.v_sq_int[grid.n_steps] - 4.0 * c * c).abs() < 1e-12);
    assert!(e.v_sq_int.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn weighted_energy_integral_matches_richardson() {
    let m = ns_decaying();
    assert_eq!(m.mono.beta, 2.0);
    let w = m.space.weights().to_vec();
    let state = |t: f64| {
        let mut x = vec![0.0; m.dim()];
        x[0] = 0.5 * t.cos();
        x[3] = 0.3 * (2.0 * t).sin();
        x[7] = 0.2 * t * t;
        x
    };
    let integrand = |t: f64| {
        let x = state(t);
        let h: f64 = x.iter().map(|v| v * v).sum();
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        h * v
    };
    let trapezoid = |n: usize| {
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| 0.5 * h * (integrand(i as f64 * h) + integrand((i + 1) as f64 * h)))
            .sum::<f64>()
    };
    let oracle = (4.0 * trapezoid(2000) - trapezoid(1000)) / 3.0;

    let grid = TimeGrid::new(0.0, 1.0, 1e-4).unwrap();
    let states = (0..=grid.n_steps).map(|i| StateVec(state(grid.time(i)))).collect();
    let e = energy_series(&m, &Path { grid, states });
    assert!((e.h_beta_v_int[grid.n_steps] - oracle).abs() < 1e-8);
}

#[test]
fn exponential_bound_at_zero_start_is_two() {
    let m = ou(1.0);
    let grid = TimeGrid::new(0.0, 1.0, 1e-2).unwrap();
    let r = exponential_report(&m, 0.1, &StateVec(vec![0.0]), &grid, 0.5, 0.5, 10, 0).unwrap();
    let line = r.lines.iter().find(|l| l.label == "exp_energy").unwrap();
    assert!(line.log_scale);
    assert_eq!(line.bound, 2f64.ln());
}

#[test]
fn ou_exponential_moments_pass() {
    let m = ou(1.0);
    let grid = TimeGrid::new(0.0, 5.0, 1e-3).unwrap();
    let r = exponential_report(&m, 0.1, &StateVec(vec![1.0]), &grid, 0.5, 0.5, 1000, 4).unwrap();
    assert!(r.all_pass(), "{:?}", r.lines);
}

#[test]
fn burgers_energy_line_passes() {
    let m = fitted(burgers());
    let eps = 0.5 * monodrift_core::framework::self_consistent_eps0(&m).unwrap();
    let grid = TimeGrid::new(0.0, 5.0, 1e-3).unwrap();
    let gamma = m.space.lambda1() * m.mono.gamma0 / 2.0;
    let xi = m.space.mode(0, 1.0).unwrap();
    let r = exponential_report(&m, eps, &xi, &grid, gamma, 1.0, 200, 8).unwrap();
    assert!(r.lines[0].pass, "{:?}", r.lines[0]);
}

#[test]
fn out_of_range_parameters_are_rejected() {
    let m = ou(1.0);
    let grid = TimeGrid::new(0.0, 1.0, 1e-2).unwrap();
    let xi = StateVec(vec![0.0]);
    assert!(exponential_report(&m, 0.1, &xi, &grid, 0.6, 0.5, 10, 0).is_err());
    assert!(exponential_report(&m, 0.1, &xi, &grid, 0.0, 0.5, 10, 0).is_err());
    // δ must stay below λ₁γ₀/(8εC_B) = 1.25
    assert!(exponential_report(&m, 0.1, &xi, &grid, 0.5, 1.25, 10, 0).is_err());
}
