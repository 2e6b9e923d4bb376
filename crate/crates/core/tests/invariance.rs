use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vaxdyn::estimators::{tail_extrema, tail_extrema_series, Field};
use vaxdyn::rng::RandomStream;
use vaxdyn::{simulate, simulate_with_increments, ControlInput, IntegratorConfig, ModelParams, Scenario, Scheme, State};

fn in_domain(y: &State) -> bool {
    y.s >= 0.0 && y.i >= 0.0 && y.s + y.i <= 1.0 && (0.0..=1.0).contains(&y.x)
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams {
        mu: rng.random_range(0.001..1.0),
        beta: rng.random_range(0.1..200.0),
        gamma: rng.random_range(0.05..50.0),
        kappa: rng.random_range(0.1..5.0),
        omega: rng.random_range(0.0..3.0),
        delta: rng.random_range(0.0..1.0),
        sigma1_sq: rng.random_range(0.0..60.0),
        sigma2_sq: rng.random_range(0.0..3.0),
        sigma3_sq: rng.random_range(0.0..3.0),
    }
}

#[test]
fn million_step_runs_stay_in_the_solution_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dt = 1e-3;
    let mut worst_overshoot: f64 = 0.0;
    for k in 0..50 {
        let params = random_params(&mut rng);
        let s = rng.random_range(0.0..1.0);
        let y0 = State::new(s, rng.random_range(0.0..1.0 - s), rng.random_range(0.0..1.0));
        let cfg = IntegratorConfig {
            scheme: if k % 2 == 0 { Scheme::Milstein } else { Scheme::EulerMaruyama },
            dt,
            t_end: 1000.0,
            record_stride: 100,
            ..Default::default()
        };
        assert_eq!(cfg.n_steps(), 1_000_000);
        let path = simulate(&y0, &params, ControlInput::None, &cfg, RandomStream::new(77, k)).unwrap();
        assert!(path.states.iter().all(in_domain), "set {k}: {params:?}");
        worst_overshoot = worst_overshoot.max(path.max_overshoot);
    }
    assert!(worst_overshoot <= 10.0 * dt.sqrt(), "overshoot {worst_overshoot}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_recorded_state_is_admissible(
        seed in any::<u64>(),
        s in 0.0..1.0f64,
        frac_i in 0.0..1.0f64,
        x in 0.0..1.0f64,
        u in 0.0..1.0f64,
        milstein in any::<bool>(),
        dt in 1e-4..5e-2f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng);
        let y0 = State::new(s, frac_i * (1.0 - s), x);
        let cfg = IntegratorConfig {
            scheme: if milstein { Scheme::Milstein } else { Scheme::EulerMaruyama },
            dt,
            t_end: 2000.0 * dt,
            ..Default::default()
        };
        let path = simulate(&y0, &params, ControlInput::Constant(u), &cfg, RandomStream::new(seed, 0)).unwrap();
        prop_assert!(path.states.iter().all(in_domain));
        prop_assert!(path.times.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn population_fills_up_with_negligible_recovery_and_no_uptake() {
    let params = ModelParams {
        mu: 0.5,
        beta: 3.0,
        gamma: 1e-9,
        kappa: 1.0,
        omega: 0.1,
        delta: 0.0,
        sigma1_sq: 2.0,
        sigma2_sq: 0.3,
        sigma3_sq: 0.3,
    };
    let cfg = IntegratorConfig {
        dt: 1e-3,
        t_end: 30.0,
        clamp_epsilon: 0.0,
        ..Default::default()
    };
    let path = simulate(&State::new(0.2, 0.1, 0.0), &params, ControlInput::None, &cfg, RandomStream::new(5, 0)).unwrap();
    let totals: Vec<f64> = path.states.iter().map(|y| y.s + y.i).collect();
    assert!(totals.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(1.0 - totals.last().unwrap() < 1e-5, "{}", totals.last().unwrap());
    assert!(path.states.iter().all(|y| y.x == 0.0));
}

#[test]
fn tail_extrema_respect_the_total_population_inequality() {
    let s = Scenario::bundled("fig5b").unwrap();
    let path = simulate(&s.initial, &s.params, ControlInput::None, &s.integrator, RandomStream::new(s.seed, 1)).unwrap();
    let tol = s.estimators().flat_tolerance;
    let total: Vec<f64> = path.states.iter().map(|y| y.s + y.i).collect();
    let sum = tail_extrema_series(&path.times, &total, tol).unwrap();
    let x = tail_extrema(&path, Field::X, tol).unwrap();
    let i = tail_extrema(&path, Field::I, tol).unwrap();
    let ratio = s.params.gamma / s.params.mu;
    let slack = 0.02;
    let lower = 1.0 - x.value_sup - ratio * i.value_sup;
    let upper = 1.0 - x.value_inf - ratio * i.value_inf;
    assert!(lower <= sum.value_inf + slack, "{lower} vs inf {}", sum.value_inf);
    assert!(sum.value_inf <= sum.value_sup);
    assert!(sum.value_sup <= upper + slack, "sup {} vs {upper}", sum.value_sup);
}

#[test]
fn milstein_and_euler_agree_as_the_step_shrinks() {
    let params = ModelParams {
        mu: 0.5,
        beta: 3.0,
        gamma: 1.0,
        kappa: 2.0,
        omega: 0.3,
        delta: 0.2,
        sigma1_sq: 4.0,
        sigma2_sq: 1.0,
        sigma3_sq: 1.0,
    };
    let y0 = State::new(0.5, 0.3, 0.5);
    let fine_dt = 1e-5;
    let mut g = RandomStream::new(99, 0).generator();
    let fine: Vec<(f64, f64)> = (0..100_000).map(|_| g.increment(fine_dt)).collect();
    let gap = |factor: usize| {
        let incs = vaxdyn::rng::coarsen_increments(&fine, factor);
        let run = |scheme| {
            let cfg = IntegratorConfig {
                scheme,
                dt: fine_dt * factor as f64,
                t_end: 1.0,
                clamp_epsilon: 0.0,
                ..Default::default()
            };
            *simulate_with_increments(&y0, &params, ControlInput::None, &cfg, &incs).unwrap().terminal()
        };
        let (a, b) = (run(Scheme::Milstein), run(Scheme::EulerMaruyama));
        ((a.s - b.s).powi(2) + (a.i - b.i).powi(2) + (a.x - b.x).powi(2)).sqrt()
    };
    let gaps: Vec<f64> = [400, 100, 25, 1].iter().map(|&f| gap(f)).collect();
    assert!(gaps[3] < 5e-3, "{gaps:?}");
    assert!(gaps[3] < gaps[0], "{gaps:?}");
}
