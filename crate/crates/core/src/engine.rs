//! Euler–Maruyama and Milstein integration of the coupled system.
//!
//! Driver 1 loads only (S, I) with coefficients depending only on (S, I);
//! driver 2 loads only x with a coefficient depending only on x. The two
//! diffusion fields therefore commute and the Milstein scheme needs only the
//! per-driver corrections ½·(L^k G^k)·(ΔW_k² − dt), never Lévy areas.

use std::fmt;
use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::rng::RandomStream;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    Milstein,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::EulerMaruyama => f.write_str("euler_maruyama"),
            Scheme::Milstein => f.write_str("milstein"),
        }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_t_end() -> f64 {
    DEFAULT_T_END
}
fn default_stride() -> usize {
    1
}
fn default_epsilon() -> f64 {
    DEFAULT_CLAMP_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub scheme: Scheme,
    /// Step size in years.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Horizon in years.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Steps per recorded sample.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Absorption threshold: x ≤ ε, x ≥ 1−ε and I ≤ ε are pinned to 0, 1 and 0.
    #[serde(default = "default_epsilon")]
    pub clamp_epsilon: f64,
    /// Separate threshold for I; falls back to `clamp_epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infection_epsilon: Option<f64>,
    /// Keep every (ΔW1, ΔW2) on the path.
    #[serde(default)]
    pub record_drivers: bool,
    /// End the path as soon as x is absorbed.
    #[serde(default)]
    pub stop_when_x_absorbed: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Milstein,
            dt: DEFAULT_DT,
            t_end: DEFAULT_T_END,
            record_stride: 1,
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
            infection_epsilon: None,
            record_drivers: false,
            stop_when_x_absorbed: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end must be >= dt, got t_end={} dt={}",
                self.t_end, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        if !(self.clamp_epsilon >= 0.0 && self.clamp_epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clamp_epsilon must lie in [0, 0.5), got {}",
                self.clamp_epsilon
            )));
        }
        if let Some(e) = self.infection_epsilon {
            if !(e >= 0.0 && e < 0.5) {
                return Err(Error::InvalidConfig(format!(
                    "infection_epsilon must lie in [0, 0.5), got {e}"
                )));
            }
        }
        Ok(())
    }

    pub fn i_epsilon(&self) -> f64 {
        self.infection_epsilon.unwrap_or(self.clamp_epsilon)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Piecewise-constant, right-continuous control on a uniform grid:
/// `u(t) = values[⌊t/dt⌋]`, with the last value held past the end.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ControlSchedule {
    pub fn constant(value: f64, dt: f64, n_steps: usize) -> Self {
        Self {
            dt,
            values: vec![value; n_steps.max(1)],
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        let idx = ((t / self.dt) + 1e-9).floor();
        let idx = if idx <= 0.0 { 0 } else { idx as usize };
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// The control fed to the replicator equation.
#[derive(Debug, Clone, Copy, Default)]
pub enum ControlInput<'a> {
    #[default]
    None,
    Constant(f64),
    Schedule(&'a ControlSchedule),
}

impl ControlInput<'_> {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ControlInput::None => 0.0,
            ControlInput::Constant(u) => *u,
            ControlInput::Schedule(s) => s.at(t),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |u: f64| (0.0..=1.0).contains(&u);
        let valid = match self {
            ControlInput::None => true,
            ControlInput::Constant(u) => ok(*u),
            ControlInput::Schedule(s) => {
                s.dt > 0.0 && !s.values.is_empty() && s.values.iter().all(|&u| ok(u))
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::domain("control values must lie in [0,1]"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAbsorption {
    AtZero,
    AtOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub absorbed_x: Option<XAbsorption>,
    pub absorbed_i: bool,
    pub x_absorption_time: Option<f64>,
    pub i_absorption_time: Option<f64>,
    /// Per-step (ΔW1, ΔW2), when requested.
    pub drivers: Option<Vec<(f64, f64)>>,
    /// Largest distance by which an unprojected step left the solution set.
    pub max_overshoot: f64,
    pub dt: f64,
}

impl Path {
    pub fn terminal(&self) -> &State {
        self.states.last().expect("a path holds at least its initial state")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("a path holds at least its initial time")
    }

    /// Writes `t,S,I,x` rows at full precision.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,S,I,x")?;
        for (t, y) in self.times.iter().zip(&self.states) {
            writeln!(w, "{t:?},{:?},{:?},{:?}", y.s, y.i, y.x)?;
        }
        Ok(())
    }

    /// Writes `step,dW1,dW2` rows. Fails if no driver record was kept.
    pub fn write_drivers_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let drivers = self
            .drivers
            .as_ref()
            .ok_or_else(|| io::Error::other("path has no driver record"))?;
        writeln!(w, "step,dW1,dW2")?;
        for (k, (a, b)) in drivers.iter().enumerate() {
            writeln!(w, "{k},{a:?},{b:?}")?;
        }
        Ok(())
    }
}

/// One unprojected Euler–Maruyama or Milstein update.
#[inline]
fn advance(y: &State, params: &ModelParams, u: f64, dw: (f64, f64), dt: f64, scheme: Scheme) -> [f64; 3] {
    let f = params.drift_unchecked(y, u).0;
    let g = params.diffusion_unchecked(y).columns;
    let dws = [dw.0, dw.1];
    let mut next = y.as_array();
    for i in 0..3 {
        next[i] += f[i] * dt + g[0][i] * dws[0] + g[1][i] * dws[1];
    }
    if scheme == Scheme::Milstein {
        let jac = params.diffusion_jacobian_unchecked(y).0;
        for k in 0..2 {
            let ito = dws[k] * dws[k] - dt;
            for i in 0..3 {
                let lg: f64 = (0..3).map(|j| g[k][j] * jac[k][i][j]).sum();
                next[i] += 0.5 * lg * ito;
            }
        }
    }
    next
}

fn overshoot(raw: &[f64; 3]) -> f64 {
    let [s, i, x] = *raw;
    [-s, -i, s + i - 1.0, -x, x - 1.0]
        .into_iter()
        .fold(0.0, f64::max)
}

/// Euclidean projection onto {S, I ≥ 0, S + I ≤ 1} × [0, 1].
fn project(raw: [f64; 3]) -> State {
    let [mut s, mut i, x] = raw;
    s = s.max(0.0);
    i = i.max(0.0);
    let excess = s + i - 1.0;
    if excess > 0.0 {
        s -= 0.5 * excess;
        i -= 0.5 * excess;
        if s < 0.0 {
            i = 1.0;
            s = 0.0;
        } else if i < 0.0 {
            s = 1.0;
            i = 0.0;
        }
    }
    State::new(s, i, x.clamp(0.0, 1.0))
}

/// Advances one step and projects the result back onto the solution set.
pub fn step(
    state: &State,
    params: &ModelParams,
    u: f64,
    dw: (f64, f64),
    config: &IntegratorConfig,
) -> Result<State> {
    state.check()?;
    let raw = advance(state, params, u, dw, config.dt, config.scheme);
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Blowup { step: 0 });
    }
    Ok(project(raw))
}

fn integrate(
    initial: &State,
    params: &ModelParams,
    control: ControlInput<'_>,
    config: &IntegratorConfig,
    mut next_dw: impl FnMut(usize) -> (f64, f64),
) -> Result<Path> {
    params.validate()?;
    config.validate()?;
    control.validate()?;
    initial.check()?;

    let n_steps = config.n_steps();
    let dt = config.dt;
    let eps = config.clamp_epsilon;
    let i_eps = config.i_epsilon();
    let capacity = n_steps / config.record_stride + 2;
    let mut path = Path {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        absorbed_x: None,
        absorbed_i: false,
        x_absorption_time: None,
        i_absorption_time: None,
        drivers: config.record_drivers.then(|| Vec::with_capacity(n_steps)),
        max_overshoot: 0.0,
        dt,
    };

    let mut y = project(initial.as_array());
    path.times.push(0.0);
    path.states.push(y);

    for n in 0..n_steps {
        let t = n as f64 * dt;
        let dw = next_dw(n);
        if let Some(d) = path.drivers.as_mut() {
            d.push(dw);
        }
        let raw = advance(&y, params, control.at(t), dw, dt, config.scheme);
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n });
        }
        path.max_overshoot = path.max_overshoot.max(overshoot(&raw));
        y = project(raw);

        let t_next = (n + 1) as f64 * dt;
        match path.absorbed_x {
            Some(XAbsorption::AtZero) => y.x = 0.0,
            Some(XAbsorption::AtOne) => y.x = 1.0,
            None if y.x <= eps => {
                y.x = 0.0;
                path.absorbed_x = Some(XAbsorption::AtZero);
                path.x_absorption_time = Some(t_next);
            }
            None if y.x >= 1.0 - eps => {
                y.x = 1.0;
                path.absorbed_x = Some(XAbsorption::AtOne);
                path.x_absorption_time = Some(t_next);
            }
            None => {}
        }
        if path.absorbed_i {
            y.i = 0.0;
        } else if y.i <= i_eps {
            y.i = 0.0;
            path.absorbed_i = true;
            path.i_absorption_time = Some(t_next);
        }

        let stop = config.stop_when_x_absorbed && path.absorbed_x.is_some();
        if (n + 1) % config.record_stride == 0 || n + 1 == n_steps || stop {
            path.times.push(t_next);
            path.states.push(y);
        }
        if stop {
            break;
        }
    }
    Ok(path)
}

/// Integrates one trajectory driven by `stream`.
pub fn simulate(
    initial: &State,
    params: &ModelParams,
    control: ControlInput<'_>,
    config: &IntegratorConfig,
    stream: RandomStream,
) -> Result<Path> {
    let mut gen = stream.generator();
    let dt = config.dt;
    integrate(initial, params, control, config, |_| gen.increment(dt))
        .map_err(|e| e.with_stream(stream.stream_id))
}

/// Integrates one trajectory driven by a prescribed increment sequence.
pub fn simulate_with_increments(
    initial: &State,
    params: &ModelParams,
    control: ControlInput<'_>,
    config: &IntegratorConfig,
    increments: &[(f64, f64)],
) -> Result<Path> {
    if increments.len() < config.n_steps() {
        return Err(Error::InvalidConfig(format!(
            "{} increments supplied for {} steps",
            increments.len(),
            config.n_steps()
        )));
    }
    integrate(initial, params, control, config, |n| increments[n])
}

/// Runs `n_paths` trajectories on streams `first_stream..first_stream + n_paths`
/// and maps each through `reducer`. Results come back in stream order, so any
/// aggregate computed from them is independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_from<R, F>(
    initial: &State,
    params: &ModelParams,
    control: ControlInput<'_>,
    config: &IntegratorConfig,
    master_seed: u64,
    first_stream: u64,
    n_paths: usize,
    reducer: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&Path) -> R + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one path".into()));
    }
    let run = |k: u64| -> Result<R> {
        let stream = RandomStream::new(master_seed, first_stream + k);
        simulate(initial, params, control, config, stream).map(|p| reducer(&p))
    };
    let ids = 0..n_paths as u64;
    #[cfg(feature = "parallel")]
    {
        ids.into_par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ids.map(run).collect()
    }
}

/// [`ensemble_from`] starting at stream 0.
pub fn ensemble<R, F>(
    initial: &State,
    params: &ModelParams,
    control: ControlInput<'_>,
    config: &IntegratorConfig,
    n_paths: usize,
    master_seed: u64,
    reducer: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&Path) -> R + Sync,
{
    ensemble_from(initial, params, control, config, master_seed, 0, n_paths, reducer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams {
            mu: 0.02,
            beta: 100.0,
            gamma: 365.0 / 22.0,
            kappa: 1.69,
            omega: 0.1,
            delta: 0.5,
            sigma1_sq: 0.16,
            sigma2_sq: 0.15,
            sigma3_sq: 0.2,
        }
    }

    #[test]
    fn zero_noise_step_is_deterministic_euler() {
        let mut p = params();
        p.sigma1_sq = 0.0;
        p.sigma2_sq = 0.0;
        p.sigma3_sq = 0.0;
        let y = State::new(0.5, 0.01, 0.4);
        let cfg = IntegratorConfig::default();
        let f = p.drift_unchecked(&y, 0.0).0;
        for scheme in [Scheme::EulerMaruyama, Scheme::Milstein] {
            let cfg = IntegratorConfig { scheme, ..cfg.clone() };
            let next = step(&y, &p, 0.0, (0.3, -1.7), &cfg).unwrap();
            let expected = [y.s + f[0] * cfg.dt, y.i + f[1] * cfg.dt, y.x + f[2] * cfg.dt];
            assert_eq!(next.as_array(), expected);
        }
    }

    #[test]
    fn full_uptake_corner_is_fixed() {
        let p = params();
        let cfg = IntegratorConfig::default();
        let e1 = State::new(0.0, 0.0, 1.0);
        for dw in [(0.5, -0.5), (-2.0, 3.0), (0.0, 0.0)] {
            assert_eq!(step(&e1, &p, 0.0, dw, &cfg).unwrap(), e1);
        }
    }

    /// Scalar Milstein for dx = a(x)dt + b(x)dW written out by hand.
    fn scalar_logistic_milstein(p: &ModelParams, i: f64, x: f64, dw: f64, dt: f64) -> f64 {
        let sigma = p.kappa * (p.sigma2_sq + p.sigma3_sq).sqrt();
        let a = p.kappa
            * x
            * (1.0 - x)
            * (-p.omega + i + p.delta * (2.0 * x - 1.0)
                + p.kappa * (p.sigma3_sq - (p.sigma2_sq + p.sigma3_sq) * x));
        let b = sigma * x * (1.0 - x);
        let db = sigma * (1.0 - 2.0 * x);
        x + a * dt + b * dw + 0.5 * b * db * (dw * dw - dt)
    }

    #[test]
    fn milstein_x_update_matches_scalar_scheme() {
        let mut p = params();
        p.sigma1_sq = 0.0;
        p.sigma2_sq = 1.1;
        p.sigma3_sq = 0.4;
        let cfg = IntegratorConfig {
            dt: 0.01,
            ..Default::default()
        };
        for (x, dw) in [(0.3, 0.05), (0.71, -0.12), (0.5, 0.2)] {
            let y = State::new(0.2, 0.05, x);
            let next = step(&y, &p, 0.0, (0.0, dw), &cfg).unwrap();
            let oracle = scalar_logistic_milstein(&p, 0.05, x, dw, cfg.dt);
            assert!((next.x - oracle).abs() < 1e-15, "{} vs {}", next.x, oracle);
        }
    }

    #[test]
    fn projection_lands_in_domain() {
        for raw in [
            [1.2, 0.3, 1.4],
            [-0.1, 1.3, -0.2],
            [0.6, 0.6, 0.5],
            [1.5, -0.2, 0.5],
        ] {
            let y = project(raw);
            assert!(y.in_domain(0.0), "{y:?}");
        }
        assert_eq!(project([0.6, 0.6, 0.5]).as_array(), [0.5, 0.5, 0.5]);
    }

    #[test]
    fn absorption_pins_and_records() {
        let mut p = params();
        p.omega = 2.0;
        p.sigma2_sq = 1.5;
        p.sigma3_sq = 0.0;
        let cfg = IntegratorConfig {
            dt: 1e-3,
            t_end: 60.0,
            record_stride: 100,
            ..Default::default()
        };
        let path = simulate(&State::new(0.4, 0.4, 0.3), &p, ControlInput::None, &cfg, RandomStream::new(1, 0)).unwrap();
        assert_eq!(path.absorbed_x, Some(XAbsorption::AtZero));
        let ta = path.x_absorption_time.unwrap();
        for (t, y) in path.times.iter().zip(&path.states) {
            if *t >= ta {
                assert_eq!(y.x, 0.0);
            }
            assert!(y.in_domain(0.0));
        }
    }

    #[test]
    fn early_stop_ends_path_at_absorption() {
        let mut p = params();
        p.omega = 2.0;
        let cfg = IntegratorConfig {
            t_end: 200.0,
            record_stride: 1000,
            stop_when_x_absorbed: true,
            ..Default::default()
        };
        let path = simulate(&State::new(0.4, 0.4, 0.3), &p, ControlInput::None, &cfg, RandomStream::new(2, 5)).unwrap();
        assert!(path.absorbed_x.is_some());
        assert!((path.end_time() - path.x_absorption_time.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn same_stream_reproduces_bit_identical_path() {
        let p = params();
        let cfg = IntegratorConfig {
            t_end: 5.0,
            ..Default::default()
        };
        let y0 = State::new(0.4, 0.4, 0.5);
        let a = simulate(&y0, &p, ControlInput::None, &cfg, RandomStream::new(9, 4)).unwrap();
        let b = simulate(&y0, &p, ControlInput::None, &cfg, RandomStream::new(9, 4)).unwrap();
        let c = simulate(&y0, &p, ControlInput::None, &cfg, RandomStream::new(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn recorded_drivers_replay_the_path() {
        let p = params();
        let cfg = IntegratorConfig {
            t_end: 2.0,
            record_drivers: true,
            ..Default::default()
        };
        let y0 = State::new(0.4, 0.4, 0.5);
        let a = simulate(&y0, &p, ControlInput::Constant(0.3), &cfg, RandomStream::new(3, 1)).unwrap();
        let replay = simulate_with_increments(&y0, &p, ControlInput::Constant(0.3), &cfg, a.drivers.as_ref().unwrap()).unwrap();
        assert_eq!(a.states, replay.states);
        assert!(simulate_with_increments(&y0, &p, ControlInput::None, &cfg, &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn blowup_reports_step_and_stream() {
        let mut p = params();
        p.kappa = 1e200;
        p.sigma3_sq = 1e200;
        let cfg = IntegratorConfig {
            t_end: 1.0,
            ..Default::default()
        };
        let err = simulate(&State::new(0.5, 0.5, 0.5), &p, ControlInput::None, &cfg, RandomStream::new(0, 17)).unwrap_err();
        match err {
            Error::Trajectory { stream_id, source } => {
                assert_eq!(stream_id, 17);
                assert!(matches!(*source, Error::Blowup { step: 0 }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn control_schedule_is_right_continuous() {
        let s = ControlSchedule {
            dt: 0.5,
            values: vec![0.1, 0.2, 0.3],
        };
        assert_eq!(s.at(0.0), 0.1);
        assert_eq!(s.at(0.49), 0.1);
        assert_eq!(s.at(0.5), 0.2);
        assert_eq!(s.at(1.0), 0.3);
        assert_eq!(s.at(7.0), 0.3);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let p = params();
        let y0 = State::new(0.4, 0.4, 0.5);
        let bad = IntegratorConfig {
            record_stride: 0,
            ..Default::default()
        };
        assert!(simulate(&y0, &p, ControlInput::None, &bad, RandomStream::new(0, 0)).is_err());
        let cfg = IntegratorConfig::default();
        assert!(simulate(&State::new(0.9, 0.4, 0.5), &p, ControlInput::None, &cfg, RandomStream::new(0, 0)).is_err());
        assert!(simulate(&y0, &p, ControlInput::Constant(1.5), &cfg, RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn single_path_ensemble_matches_simulate() {
        let p = params();
        let cfg = IntegratorConfig {
            t_end: 3.0,
            ..Default::default()
        };
        let y0 = State::new(0.4, 0.4, 0.5);
        let direct = simulate(&y0, &p, ControlInput::None, &cfg, RandomStream::new(12, 0)).unwrap();
        let via = ensemble(&y0, &p, ControlInput::None, &cfg, 1, 12, |path| *path.terminal()).unwrap();
        assert_eq!(via, vec![*direct.terminal()]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let p = params();
        let cfg = IntegratorConfig {
            t_end: 2.0,
            ..Default::default()
        };
        let y0 = State::new(0.4, 0.4, 0.5);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble(&y0, &p, ControlInput::None, &cfg, 16, 99, |path| path.terminal().x).unwrap())
        };
        let one = run(1);
        let three = run(3);
        assert_eq!(one, three);
        let mean_one: f64 = one.iter().sum::<f64>() / 16.0;
        let mean_three: f64 = three.iter().sum::<f64>() / 16.0;
        assert_eq!(mean_one.to_bits(), mean_three.to_bits());
    }

    #[test]
    fn zero_noise_subthreshold_run_clears_infection() {
        let mut p = params();
        p.beta = 10.0;
        p.sigma1_sq = 0.0;
        p.sigma2_sq = 0.0;
        p.sigma3_sq = 0.0;
        let cfg = IntegratorConfig {
            t_end: 50.0,
            record_stride: 1000,
            ..Default::default()
        };
        let path = simulate(&State::new(0.5, 0.2, 0.0), &p, ControlInput::None, &cfg, RandomStream::new(0, 0)).unwrap();
        assert!(path.absorbed_i);
        assert_eq!(path.terminal().x, 0.0);
        // S relaxes toward the disease-free value 1 − x = 1
        assert!(path.terminal().s > 0.6);
    }
}
