//! Optimal vaccination-cost discount by a forward–backward sweep.
//!
//! The reward is `J(u) = −E ∫₀^T (α1 S + α2 I + ½α3 u²) dt` over controls
//! `u(t) ∈ [0, u_max]`. Each sweep simulates a fixed set of noise paths under
//! the current control, integrates the costate equations backwards along each
//! path with the recorded increments, and moves the control towards
//!
//! ```text
//! u*(t) = clamp((κω/α3) · E[p3 x(1−x)](t), 0, u_max)
//! ```
//!
//! With `pin_costates` set, the costate of a coordinate is zero while that
//! coordinate sits pinned at an absorbing value: the projection makes the
//! future independent of perturbations in that direction. Without it, a
//! pinned I next to S ≈ 1 drives p2 backwards at rate βS − (μ+γ) until it
//! overflows.

use std::io::{self, Write};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    simulate_with_increments, ControlInput, ControlSchedule, IntegratorConfig, Path, Scheme,
    DEFAULT_CLAMP_EPSILON,
};
use crate::error::{Error, Result};
use crate::estimators::{mean_estimate, time_average_default, Field, MeanEstimate};
use crate::model::{ModelParams, State};
use crate::rng::RandomStream;

/// First stream id used for held-out objective evaluation.
pub const EVAL_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlProblem {
    pub params: ModelParams,
    pub weights: CostWeights,
    pub u_max: f64,
    pub t_final: f64,
    pub initial: State,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.check()?;
        let w = &self.weights;
        for (field, v) in [("alpha1", w.alpha1), ("alpha2", w.alpha2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if !(w.alpha3.is_finite() && w.alpha3 > 0.0) {
            return Err(Error::InvalidParameter {
                field: "alpha3",
                reason: format!("must be finite and > 0, got {}", w.alpha3),
            });
        }
        if !(0.0..1.0).contains(&self.u_max) {
            return Err(Error::InvalidParameter {
                field: "u_max",
                reason: format!("must lie in [0, 1), got {}", self.u_max),
            });
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidParameter {
                field: "t_final",
                reason: format!("must be > 0, got {}", self.t_final),
            });
        }
        Ok(())
    }
}

fn default_n_noise_paths() -> usize {
    32
}
fn default_max_iters() -> usize {
    200
}
fn default_relaxation() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_control_dt() -> f64 {
    1e-2
}
fn default_n_eval_paths() -> usize {
    200
}
fn default_epsilon() -> f64 {
    DEFAULT_CLAMP_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n_noise_paths")]
    pub n_noise_paths: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Relaxation θ in u ← (1−θ)u + θ·candidate.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    /// Stop once the sup-norm change of u falls below this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Grid spacing of both the integrator and the control.
    #[serde(default = "default_control_dt")]
    pub dt: f64,
    /// Held-out paths used to estimate J.
    #[serde(default = "default_n_eval_paths")]
    pub n_eval_paths: usize,
    #[serde(default = "default_epsilon")]
    pub clamp_epsilon: f64,
    /// Absorption threshold for I when it differs from `clamp_epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infection_epsilon: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    /// Zero the costate of pinned coordinates.
    #[serde(default = "default_pin")]
    pub pin_costates: bool,
}

fn default_pin() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_noise_paths: default_n_noise_paths(),
            max_iters: default_max_iters(),
            relaxation: default_relaxation(),
            tolerance: default_tolerance(),
            dt: default_control_dt(),
            n_eval_paths: default_n_eval_paths(),
            clamp_epsilon: default_epsilon(),
            infection_epsilon: None,
            scheme: Scheme::Milstein,
            pin_costates: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_noise_paths == 0 || self.n_eval_paths == 0 {
            return Err(Error::InvalidConfig("path counts must be >= 1".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    fn integrator(&self, t_final: f64) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt: self.dt,
            t_end: t_final,
            record_stride: 1,
            clamp_epsilon: self.clamp_epsilon,
            infection_epsilon: self.infection_epsilon,
            record_drivers: false,
            stop_when_x_absorbed: false,
        }
    }
}

/// The Hamiltonian −α1S − α2I − ½α3u² + ⟨f(y,u), p⟩ + ⟨g(y), q⟩, where `q`
/// holds the costate volatilities paired with the (S, I, x) diffusion entries.
pub fn hamiltonian(
    y: &State,
    u: f64,
    p: [f64; 3],
    q: [f64; 3],
    params: &ModelParams,
    w: &CostWeights,
) -> f64 {
    let f = params.drift_unchecked(y, u).0;
    let g = params.diffusion_unchecked(y).columns;
    let loading = [g[0][0], g[0][1], g[1][2]];
    let mut h = -w.alpha1 * y.s - w.alpha2 * y.i - 0.5 * w.alpha3 * u * u;
    for k in 0..3 {
        h += f[k] * p[k] + loading[k] * q[k];
    }
    h
}

/// Unconstrained maximiser (κω/α3)·p3·x(1−x) of the Hamiltonian in u.
pub fn unconstrained_control(p3x: f64, params: &ModelParams, w: &CostWeights) -> f64 {
    params.kappa * params.omega / w.alpha3 * p3x
}

/// Drift of (p1, p2, p3) in forward time.
pub fn costate_drift(y: &State, p: [f64; 3], u: f64, params: &ModelParams, w: &CostWeights) -> [f64; 3] {
    let State { s, i, x } = *y;
    let ModelParams {
        mu,
        beta,
        gamma,
        kappa,
        delta,
        sigma1_sq,
        ..
    } = *params;
    let sigma_sq = params.utility_noise_sq();
    let [p1, p2, p3] = p;
    let lx = x * (1.0 - x);
    let d1 = w.alpha1 + p1 * (beta * i + mu - 2.0 * sigma1_sq * s * i * i)
        - p2 * (beta * i + 2.0 * sigma1_sq * s * i * i);
    let d2 = w.alpha2 + p1 * (beta * s - 2.0 * sigma1_sq * s * s * i)
        - p2 * (beta * s - (mu + gamma) + 2.0 * sigma1_sq * s * s * i)
        - kappa * p3 * lx;
    let d3 = mu * p1
        - kappa
            * p3
            * ((1.0 - 2.0 * x) * params.replicator_bracket(i, x, u)
                + (2.0 * delta - kappa * sigma_sq) * lx
                + 2.0 * kappa * sigma_sq * lx * (1.0 - 2.0 * x));
    [d1, d2, d3]
}

/// Costate volatilities (q1, q2, q3); q1 and q2 load on W1, q3 on W2.
pub fn costate_loading(y: &State, p: [f64; 3], params: &ModelParams) -> [f64; 3] {
    let transfer = params.sigma1_sq.sqrt() * y.s * y.i;
    let behaviour = params.kappa * params.utility_noise_sq().sqrt() * y.x * (1.0 - y.x);
    [-transfer * p[0], transfer * p[1], behaviour * p[2]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostatePath {
    pub times: Vec<f64>,
    pub p: Vec<[f64; 3]>,
}

/// Integrates the costates backwards from p(T) = 0 along a forward path that
/// recorded every step and its increments. `u[n]` is the control on step n.
/// With `pin = Some((ε_x, ε_i))`, p3 is zeroed wherever x sat pinned at an
/// absorbing value under threshold ε_x, and p2 likewise for I under ε_i.
pub fn costate_backward_with(
    path: &Path,
    u: &[f64],
    params: &ModelParams,
    w: &CostWeights,
    pin: Option<(f64, f64)>,
) -> Result<CostatePath> {
    let drivers = path.drivers.as_ref().ok_or(Error::MissingDriverRecord)?;
    let n_steps = drivers.len();
    if path.states.len() != n_steps + 1 || u.len() < n_steps {
        return Err(Error::InvalidConfig(format!(
            "costates need every step recorded: {} states, {} increments, {} controls",
            path.states.len(),
            n_steps,
            u.len()
        )));
    }
    let dt = path.dt;
    let mut p = vec![[0.0; 3]; n_steps + 1];
    for n in (0..n_steps).rev() {
        let y = &path.states[n];
        let next = p[n + 1];
        let d = costate_drift(y, next, u[n], params, w);
        let q = costate_loading(y, next, params);
        let (dw1, dw2) = drivers[n];
        let mut cur = [
            next[0] - d[0] * dt - q[0] * dw1,
            next[1] - d[1] * dt - q[1] * dw1,
            next[2] - d[2] * dt - q[2] * dw2,
        ];
        if let Some((eps, i_eps)) = pin {
            let pinned_i = path.i_absorption_time.is_some_and(|t| path.times[n] >= t - 0.5 * dt);
            let pinned_x = path.x_absorption_time.is_some_and(|t| path.times[n] >= t - 0.5 * dt);
            if pinned_i && y.i <= i_eps {
                cur[1] = 0.0;
            }
            if pinned_x && (y.x <= eps || y.x >= 1.0 - eps) {
                cur[2] = 0.0;
            }
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step: n });
        }
        p[n] = cur;
    }
    Ok(CostatePath {
        times: path.times.clone(),
        p,
    })
}

/// [`costate_backward_with`] with no pinning: the costate equations as written.
pub fn costate_backward(
    path: &Path,
    u: &[f64],
    params: &ModelParams,
    w: &CostWeights,
) -> Result<CostatePath> {
    costate_backward_with(path, u, params, w, None)
}

/// Pathwise cost ∫(α1S + α2I) dt by trapezoid plus Σ ½α3 u_n² dt.
pub fn path_cost(path: &Path, u: &[f64], w: &CostWeights) -> f64 {
    let state_cost: f64 = path
        .times
        .windows(2)
        .zip(path.states.windows(2))
        .map(|(t, y)| {
            let l = |z: &State| w.alpha1 * z.s + w.alpha2 * z.i;
            0.5 * (t[1] - t[0]) * (l(&y[0]) + l(&y[1]))
        })
        .sum();
    let control_cost: f64 = u.iter().map(|v| 0.5 * w.alpha3 * v * v * path.dt).sum();
    state_cost + control_cost
}

/// J estimate: mean of the negated pathwise costs with its standard error.
pub fn objective(paths: &[Path], u: &[f64], w: &CostWeights) -> Result<MeanEstimate> {
    let rewards: Vec<f64> = paths.iter().map(|p| -path_cost(p, u, w)).collect();
    mean_estimate(&rewards)
}

fn map_paths<T: Send, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn draw_increments(master_seed: u64, stream_id: u64, n_steps: usize, dt: f64) -> Vec<(f64, f64)> {
    let mut gen = RandomStream::new(master_seed, stream_id).generator();
    (0..n_steps).map(|_| gen.increment(dt)).collect()
}

/// Fixed noise sample reused across sweep iterations.
#[derive(Debug, Clone)]
pub struct NoiseSample {
    pub increments: Vec<Vec<(f64, f64)>>,
}

impl NoiseSample {
    pub fn draw(master_seed: u64, first_stream: u64, n_paths: usize, n_steps: usize, dt: f64) -> Self {
        Self {
            increments: (0..n_paths)
                .map(|k| draw_increments(master_seed, first_stream + k as u64, n_steps, dt))
                .collect(),
        }
    }
}

fn simulate_all(
    problem: &ControlProblem,
    config: &IntegratorConfig,
    u: &[f64],
    noise: &NoiseSample,
) -> Result<Vec<Path>> {
    let schedule = ControlSchedule {
        dt: config.dt,
        values: u.to_vec(),
    };
    map_paths(noise.increments.len(), |k| {
        let mut path = simulate_with_increments(
            &problem.initial,
            &problem.params,
            ControlInput::Schedule(&schedule),
            config,
            &noise.increments[k],
        )
        .map_err(|e| e.with_stream(k as u64))?;
        path.drivers = Some(noise.increments[k].clone());
        Ok(path)
    })
}

fn mean_states(paths: &[Path]) -> Vec<State> {
    let n = paths.len() as f64;
    (0..paths[0].states.len())
        .map(|j| {
            let mut acc = [0.0; 3];
            for p in paths {
                let y = p.states[j].as_array();
                for k in 0..3 {
                    acc[k] += y[k];
                }
            }
            State::from_array(acc.map(|v| v / n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStep {
    /// Projected maximiser computed from the ensemble-averaged costate.
    pub candidate: Vec<f64>,
    /// (1−θ)u + θ·candidate.
    pub updated: Vec<f64>,
    /// sup |updated − u|.
    pub delta_u: f64,
    /// In-sample J under the input control.
    pub j_estimate: f64,
    /// Ensemble-mean costates under the input control.
    pub mean_costate: Vec<[f64; 3]>,
    pub state_mean: Vec<State>,
}

/// One forward–backward pass at control `u` on a fixed noise sample.
pub fn sweep_iteration(
    problem: &ControlProblem,
    cfg: &SweepConfig,
    u: &[f64],
    noise: &NoiseSample,
) -> Result<SweepStep> {
    let integrator = cfg.integrator(problem.t_final);
    let paths = simulate_all(problem, &integrator, u, noise)?;
    let costates = map_paths(paths.len(), |k| {
        let pin = cfg.pin_costates.then_some((integrator.clamp_epsilon, integrator.i_epsilon()));
        costate_backward_with(&paths[k], u, &problem.params, &problem.weights, pin)
            .map_err(|e| e.with_stream(k as u64))
    })?;
    let n_paths = paths.len() as f64;
    let n_steps = u.len();
    let mut candidate = vec![0.0; n_steps];
    let mut mean_costate = vec![[0.0; 3]; n_steps + 1];
    for (path, cs) in paths.iter().zip(&costates) {
        for n in 0..=n_steps {
            for k in 0..3 {
                mean_costate[n][k] += cs.p[n][k] / n_paths;
            }
            if n < n_steps {
                let x = path.states[n].x;
                candidate[n] += cs.p[n][2] * x * (1.0 - x) / n_paths;
            }
        }
    }
    for c in candidate.iter_mut() {
        *c = unconstrained_control(*c, &problem.params, &problem.weights).clamp(0.0, problem.u_max);
    }
    let theta = cfg.relaxation;
    let updated: Vec<f64> = u
        .iter()
        .zip(&candidate)
        .map(|(a, c)| ((1.0 - theta) * a + theta * c).clamp(0.0, problem.u_max))
        .collect();
    let delta_u = updated
        .iter()
        .zip(u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let j_estimate = objective(&paths, u, &problem.weights)?.mean;
    Ok(SweepStep {
        candidate,
        updated,
        delta_u,
        j_estimate,
        mean_costate,
        state_mean: mean_states(&paths),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub delta_u: f64,
    pub j_estimate: f64,
}

/// Held-out evaluation of a fixed control.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Per-path rewards, in stream order.
    pub rewards: Vec<f64>,
    pub objective: MeanEstimate,
    pub mean_path: Vec<State>,
    /// Per-path temporal means of I after the default burn-in.
    pub i_time_averages: Vec<f64>,
}

/// Simulates `n_paths` held-out trajectories under `u` and scores them.
pub fn evaluate(
    problem: &ControlProblem,
    cfg: &SweepConfig,
    u: &[f64],
    master_seed: u64,
    first_stream: u64,
    n_paths: usize,
) -> Result<Evaluation> {
    problem.validate()?;
    let integrator = cfg.integrator(problem.t_final);
    if u.len() != integrator.n_steps() {
        return Err(Error::InvalidConfig(format!(
            "control has {} values for {} steps",
            u.len(),
            integrator.n_steps()
        )));
    }
    let schedule = ControlSchedule {
        dt: cfg.dt,
        values: u.to_vec(),
    };
    let scored = map_paths(n_paths, |k| {
        let stream = RandomStream::new(master_seed, first_stream + k as u64);
        let path = crate::engine::simulate(
            &problem.initial,
            &problem.params,
            ControlInput::Schedule(&schedule),
            &integrator,
            stream,
        )?;
        let reward = -path_cost(&path, u, &problem.weights);
        let i_avg = time_average_default(&path, Field::I)?;
        Ok((reward, i_avg, path.states))
    })?;
    let rewards: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let i_time_averages = scored.iter().map(|s| s.1).collect();
    let n = scored.len() as f64;
    let mut mean_path = vec![[0.0; 3]; scored[0].2.len()];
    for (_, _, states) in &scored {
        for (acc, y) in mean_path.iter_mut().zip(states) {
            let a = y.as_array();
            for k in 0..3 {
                acc[k] += a[k] / n;
            }
        }
    }
    Ok(Evaluation {
        objective: mean_estimate(&rewards)?,
        rewards,
        mean_path: mean_path.into_iter().map(State::from_array).collect(),
        i_time_averages,
    })
}

/// Paired comparison `a − b` of two evaluations on the same streams.
pub fn paired_difference(a: &Evaluation, b: &Evaluation) -> Result<MeanEstimate> {
    if a.rewards.len() != b.rewards.len() {
        return Err(Error::Estimator("paired evaluations differ in size".into()));
    }
    let d: Vec<f64> = a.rewards.iter().zip(&b.rewards).map(|(x, y)| x - y).collect();
    mean_estimate(&d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    /// Left end of each control interval.
    pub times: Vec<f64>,
    pub u_star: Vec<f64>,
    /// Sample times of the mean path and costates (one more than `times`).
    pub path_times: Vec<f64>,
    pub state_path_mean: Vec<State>,
    pub mean_costate: Vec<[f64; 3]>,
    /// Held-out J estimate.
    pub objective: MeanEstimate,
    pub evaluation: Evaluation,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl ControlSolution {
    pub fn write_control_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,u_star")?;
        for (t, u) in self.times.iter().zip(&self.u_star) {
            writeln!(w, "{t:?},{u:?}")?;
        }
        Ok(())
    }

    pub fn write_mean_path_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,S,I,x")?;
        for (t, y) in self.path_times.iter().zip(&self.evaluation.mean_path) {
            writeln!(w, "{t:?},{:?},{:?},{:?}", y.s, y.i, y.x)?;
        }
        Ok(())
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iter,delta_u,J_estimate")?;
        for r in &self.iterations {
            writeln!(w, "{},{:?},{:?}", r.iter, r.delta_u, r.j_estimate)?;
        }
        Ok(())
    }
}

/// Forward–backward sweep from u ≡ 0. Sweep noise uses streams
/// `0..n_noise_paths`; J is evaluated on streams from [`EVAL_STREAM_OFFSET`].
pub fn sweep_solve(problem: &ControlProblem, cfg: &SweepConfig, master_seed: u64) -> Result<ControlSolution> {
    problem.validate()?;
    cfg.validate()?;
    let integrator = cfg.integrator(problem.t_final);
    integrator.validate()?;
    let n_steps = integrator.n_steps();
    let noise = NoiseSample::draw(master_seed, 0, cfg.n_noise_paths, n_steps, cfg.dt);

    let mut u = vec![0.0; n_steps];
    let mut iterations = Vec::new();
    let mut converged = false;
    let mut last = None;
    for iter in 1..=cfg.max_iters {
        let step = sweep_iteration(problem, cfg, &u, &noise)?;
        iterations.push(IterationRecord {
            iter,
            delta_u: step.delta_u,
            j_estimate: step.j_estimate,
        });
        u = step.updated.clone();
        let done = step.delta_u < cfg.tolerance;
        last = Some(step);
        if done {
            converged = true;
            break;
        }
    }
    let last = last.expect("max_iters >= 1");
    let evaluation = evaluate(problem, cfg, &u, master_seed, EVAL_STREAM_OFFSET, cfg.n_eval_paths)?;
    let path_times: Vec<f64> = (0..=n_steps).map(|n| n as f64 * cfg.dt).collect();
    Ok(ControlSolution {
        times: path_times[..n_steps].to_vec(),
        u_star: u,
        path_times,
        state_path_mean: last.state_mean,
        mean_costate: last.mean_costate,
        objective: evaluation.objective,
        evaluation,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams {
            mu: 0.02,
            beta: 100.0,
            gamma: 365.0 / 22.0,
            kappa: 1.69,
            omega: 2.0,
            delta: 0.1,
            sigma1_sq: 0.01,
            sigma2_sq: 0.5,
            sigma3_sq: 1.4,
        }
    }

    const ZERO_W: CostWeights = CostWeights {
        alpha1: 0.0,
        alpha2: 0.0,
        alpha3: 1.0,
    };

    fn recorded_path(y0: State, p: &ModelParams, t_end: f64, dt: f64, seed: u64) -> Path {
        let cfg = IntegratorConfig {
            dt,
            t_end,
            record_drivers: true,
            ..Default::default()
        };
        crate::engine::simulate(&y0, p, ControlInput::None, &cfg, RandomStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn empty_hamiltonian_is_zero() {
        let w = CostWeights {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
        };
        let y = State::new(0.3, 0.2, 0.4);
        assert_eq!(hamiltonian(&y, 0.0, [0.0; 3], [0.0; 3], &params(), &w), 0.0);
    }

    #[test]
    fn first_order_condition_at_unconstrained_maximiser() {
        let p = params();
        let w = CostWeights {
            alpha1: 1.0,
            alpha2: 10.0,
            alpha3: 7.0,
        };
        let y = State::new(0.3, 0.2, 0.4);
        let costate = [-1.0, -3.0, 2.5];
        let q = [0.1, -0.2, 0.3];
        let u = unconstrained_control(costate[2] * y.x * (1.0 - y.x), &p, &w);
        let h = 1e-5;
        let dh = (hamiltonian(&y, u + h, costate, q, &p, &w) - hamiltonian(&y, u - h, costate, q, &p, &w)) / (2.0 * h);
        assert!(dh.abs() < 1e-8, "{dh}");
    }

    #[test]
    fn zero_weights_and_noise_at_full_uptake_keep_costates_zero() {
        let mut p = params();
        p.sigma1_sq = 0.0;
        p.sigma2_sq = 0.0;
        p.sigma3_sq = 0.0;
        let path = recorded_path(State::new(0.0, 0.0, 1.0), &p, 2.0, 1e-2, 1);
        let u = vec![0.0; 200];
        let w = CostWeights {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 1.0,
        };
        let cs = costate_backward(&path, &u, &p, &w).unwrap();
        assert!(cs.p.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn terminal_costate_is_exactly_zero() {
        let p = params();
        let path = recorded_path(State::new(0.5, 0.1, 0.4), &p, 1.0, 1e-3, 3);
        let w = CostWeights {
            alpha1: 2.0,
            alpha2: 1000.0,
            alpha3: 100.0,
        };
        let cs = costate_backward(&path, &vec![0.2; 1000], &p, &w).unwrap();
        assert_eq!(*cs.p.last().unwrap(), [0.0; 3]);
        assert_eq!(cs.p.len(), path.states.len());
    }

    #[test]
    fn missing_driver_record_rejected() {
        let p = params();
        let mut path = recorded_path(State::new(0.5, 0.1, 0.4), &p, 0.1, 1e-3, 3);
        path.drivers = None;
        assert!(matches!(
            costate_backward(&path, &[0.0; 100], &p, &ZERO_W),
            Err(Error::MissingDriverRecord)
        ));
    }

    /// With I ≡ 0 and S fixed, p2 solves dp2 = [α2 − p2 c] dt with c = βS − (μ+γ).
    #[test]
    fn infection_costate_matches_closed_form_and_refinement() {
        let mut p = params();
        p.mu = 1e-12;
        p.sigma1_sq = 0.0;
        p.sigma2_sq = 0.0;
        p.sigma3_sq = 0.0;
        p.omega = 0.0;
        p.delta = 0.0;
        let y0 = State::new(0.1, 0.0, 0.0);
        let w = CostWeights {
            alpha1: 0.0,
            alpha2: 3.0,
            alpha3: 1.0,
        };
        let t_end = 0.5;
        let c = p.beta * y0.s - (p.mu + p.gamma);
        let exact = |t: f64| w.alpha2 / c * (1.0 - (c * (t_end - t)).exp());
        let mut errors = Vec::new();
        for dt in [1e-3, 1e-4] {
            let path = recorded_path(y0, &p, t_end, dt, 0);
            let n = path.drivers.as_ref().unwrap().len();
            let cs = costate_backward(&path, &vec![0.0; n], &p, &w).unwrap();
            errors.push((cs.p[0][1] - exact(0.0)).abs());
        }
        assert!(errors[1] < 1e-3 * exact(0.0).abs(), "{errors:?}");
        assert!(errors[1] < errors[0] / 5.0, "{errors:?}");
    }

    #[test]
    fn constant_control_cost_is_exact() {
        let p = params();
        let w = CostWeights {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 4.0,
        };
        let path = recorded_path(State::new(0.5, 0.1, 0.4), &p, 3.0, 1e-2, 0);
        let c = 0.3;
        let u = vec![c; 300];
        let j = objective(&[path.clone(), path], &u, &w).unwrap();
        assert_abs_diff_eq!(j.mean, -0.5 * 4.0 * c * c * 3.0, epsilon = 1e-12);
        let none = CostWeights {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
        };
        let path = recorded_path(State::new(0.5, 0.1, 0.4), &p, 3.0, 1e-2, 0);
        assert_eq!(objective(&[path], &u, &none).unwrap().mean, 0.0);
    }

    fn small_problem() -> ControlProblem {
        ControlProblem {
            params: params(),
            weights: CostWeights {
                alpha1: 0.0,
                alpha2: 1000.0,
                alpha3: 100.0,
            },
            u_max: 0.8,
            t_final: 5.0,
            initial: State::new(0.9, 0.1, 0.1),
        }
    }

    fn small_config() -> SweepConfig {
        SweepConfig {
            n_noise_paths: 4,
            n_eval_paths: 8,
            dt: 1e-2,
            max_iters: 60,
            ..Default::default()
        }
    }

    #[test]
    fn free_vaccination_needs_no_discount() {
        let mut problem = small_problem();
        problem.params.omega = 0.0;
        let sol = sweep_solve(&problem, &small_config(), 1).unwrap();
        assert!(sol.u_star.iter().all(|&u| u == 0.0));
        assert!(sol.converged);
    }

    #[test]
    fn validation_names_fields() {
        let mut problem = small_problem();
        problem.weights.alpha3 = 0.0;
        assert!(matches!(problem.validate(), Err(Error::InvalidParameter { field: "alpha3", .. })));
        let mut problem = small_problem();
        problem.u_max = 1.0;
        assert!(matches!(problem.validate(), Err(Error::InvalidParameter { field: "u_max", .. })));
    }

    #[test]
    fn sweep_is_deterministic_and_feasible() {
        let problem = small_problem();
        let cfg = small_config();
        let a = sweep_solve(&problem, &cfg, 9).unwrap();
        let b = sweep_solve(&problem, &cfg, 9).unwrap();
        assert_eq!(a.u_star, b.u_star);
        assert_eq!(a.iterations, b.iterations);
        assert!(a.u_star.iter().all(|&u| (0.0..=problem.u_max).contains(&u)));
    }

    #[test]
    fn converged_control_is_a_fixed_point() {
        let problem = small_problem();
        let cfg = small_config();
        let sol = sweep_solve(&problem, &cfg, 4).unwrap();
        assert!(sol.converged, "{:?}", sol.iterations.last());
        let n_steps = sol.u_star.len();
        let noise = NoiseSample::draw(4, 0, cfg.n_noise_paths, n_steps, cfg.dt);
        let again = sweep_iteration(&problem, &cfg, &sol.u_star, &noise).unwrap();
        assert!(again.delta_u < cfg.tolerance, "{}", again.delta_u);
        // stationarity wherever the control is interior
        let bound = cfg.tolerance / cfg.relaxation;
        for (u, c) in sol.u_star.iter().zip(&again.candidate) {
            if *u > 0.0 && *u < problem.u_max {
                assert!((u - c).abs() <= bound, "{u} vs {c}");
            }
        }
    }

    #[test]
    fn zero_cap_reproduces_uncontrolled_run() {
        let mut problem = small_problem();
        problem.u_max = 0.0;
        let cfg = small_config();
        let sol = sweep_solve(&problem, &cfg, 2).unwrap();
        assert!(sol.u_star.iter().all(|&u| u == 0.0));
        let zero = evaluate(&problem, &cfg, &vec![0.0; sol.u_star.len()], 2, EVAL_STREAM_OFFSET, cfg.n_eval_paths).unwrap();
        assert_eq!(zero.rewards, sol.evaluation.rewards);
    }

    proptest! {
        #[test]
        fn hamiltonian_is_concave_quadratic_in_u(
            s in 0.0..0.5f64, i in 0.0..0.5f64, x in 0.0..1.0f64,
            p1 in -10.0..10.0f64, p2 in -10.0..10.0f64, p3 in -10.0..10.0f64,
            u in 0.0..1.0f64, a3 in 0.1..100.0f64,
        ) {
            let w = CostWeights { alpha1: 1.0, alpha2: 2.0, alpha3: a3 };
            let y = State::new(s, i, x);
            let costate = [p1, p2, p3];
            let q = costate_loading(&y, costate, &params());
            let h = 1e-3;
            let f = |v: f64| hamiltonian(&y, v, costate, q, &params(), &w);
            let second = (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h);
            prop_assert!((second + a3).abs() < 1e-4 * (1.0 + a3), "{} vs {}", second, -a3);
        }
    }
}
