//! wasm-bindgen entry points for the browser demo in `www/`.
//!
//! Every function takes scenario TOML text and returns JSON text; the page
//! parses it with `JSON.parse`.

use serde::Serialize;
use vaxdyn::equilibria::analyze;
use vaxdyn::estimators::{absorption_cell, SweepGrid, SweepSpec};
use vaxdyn::scenario::bundled_source;
use vaxdyn::{simulate, ControlInput, RandomStream, Scenario, XAbsorption};
use wasm_bindgen::prelude::*;

/// Most samples a path returned to the page may hold.
const MAX_POINTS: usize = 2000;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js)
}

/// TOML source of a bundled scenario.
#[wasm_bindgen]
pub fn scenario_source(name: &str) -> Result<String, JsError> {
    bundled_source(name)
        .map(str::to_string)
        .ok_or_else(|| js(format!("no bundled scenario named `{name}`")))
}

#[derive(Serialize)]
struct PathJson {
    t: Vec<f64>,
    s: Vec<f64>,
    i: Vec<f64>,
    x: Vec<f64>,
    i_absorbed_at: Option<f64>,
    x_absorbed: Option<&'static str>,
    x_absorbed_at: Option<f64>,
}

/// One trajectory, thinned to at most 2000 samples.
pub fn simulate_path_json(toml: &str, seed: u64, t_end: f64) -> vaxdyn::Result<String> {
    let mut s = Scenario::parse(toml)?.with_seed(seed).with_t_end(t_end);
    let steps = s.integrator.n_steps();
    s.integrator.record_stride = steps.div_ceil(MAX_POINTS).max(1);
    s.validate()?;
    let path = simulate(
        &s.initial,
        &s.params,
        ControlInput::None,
        &s.integrator,
        RandomStream::new(s.seed, 0),
    )?;
    let out = PathJson {
        t: path.times.clone(),
        s: path.states.iter().map(|y| y.s).collect(),
        i: path.states.iter().map(|y| y.i).collect(),
        x: path.states.iter().map(|y| y.x).collect(),
        i_absorbed_at: path.i_absorption_time,
        x_absorbed: path.absorbed_x.map(|a| match a {
            XAbsorption::AtZero => "zero",
            XAbsorption::AtOne => "one",
        }),
        x_absorbed_at: path.x_absorption_time,
    };
    serde_json::to_string(&out).map_err(|e| vaxdyn::Error::Scenario(e.to_string()))
}

#[wasm_bindgen]
pub fn simulate_path(toml: &str, seed: u64, t_end: f64) -> Result<String, JsError> {
    simulate_path_json(toml, seed, t_end).map_err(js)
}

/// Thresholds, equilibria and theorem verdicts as `[[key, value], ...]`.
#[wasm_bindgen]
pub fn report(toml: &str) -> Result<String, JsError> {
    let s = Scenario::parse(toml).map_err(js)?;
    let analysis = analyze(&s.params, s.analysis_inputs()).map_err(js)?;
    to_json(&analysis.key_values())
}

#[derive(Serialize)]
struct MapJson {
    sigma2_sq: Vec<f64>,
    sigma3_sq: Vec<f64>,
    /// `p_hat[a][b]` for σ2² = sigma2_sq[a], σ3² = sigma3_sq[b].
    p_hat: Vec<Vec<f64>>,
}

/// P(x → 0) over a `steps × steps` grid of σ2², σ3² in [0, max_var] at one x(0).
pub fn absorption_map_json(
    toml: &str,
    x0: f64,
    max_var: f64,
    steps: usize,
    n_per_cell: usize,
    t_end: f64,
) -> vaxdyn::Result<String> {
    let s = Scenario::parse(toml)?;
    if steps < 2 {
        return Err(vaxdyn::Error::InvalidConfig("need at least 2 grid steps".into()));
    }
    let axis: Vec<f64> = (0..steps)
        .map(|k| max_var * k as f64 / (steps - 1) as f64)
        .collect();
    let spec = SweepSpec {
        base: s.params,
        initial: s.initial,
        grid: SweepGrid {
            sigma2_sq: axis.clone(),
            sigma3_sq: axis.clone(),
            x0: vec![x0],
        },
        n_per_cell,
        t_end,
        dt: s.integrator.dt,
        scheme: s.integrator.scheme,
        clamp_epsilon: s.integrator.clamp_epsilon,
        master_seed: s.seed,
    };
    spec.validate()?;
    let p_hat = (0..steps)
        .map(|a| {
            (0..steps)
                .map(|b| absorption_cell(&spec, a * steps + b).p_hat)
                .collect()
        })
        .collect();
    let out = MapJson {
        sigma2_sq: axis.clone(),
        sigma3_sq: axis,
        p_hat,
    };
    serde_json::to_string(&out).map_err(|e| vaxdyn::Error::Scenario(e.to_string()))
}

#[wasm_bindgen]
pub fn absorption_map(
    toml: &str,
    x0: f64,
    max_var: f64,
    steps: usize,
    n_per_cell: usize,
    t_end: f64,
) -> Result<String, JsError> {
    absorption_map_json(toml, x0, max_var, steps, n_per_cell, t_end).map_err(js)
}
