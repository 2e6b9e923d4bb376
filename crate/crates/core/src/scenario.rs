//! Declarative scenario files.
//!
//! A scenario is a TOML document with a master `seed`, the model `[params]`,
//! the `[initial]` state and an optional `[integrator]` block, plus whichever
//! task blocks the chosen command needs: `[estimators]`, `[report]`,
//! `[sweep]` and `[control]` (with an optional `[control.solver]`). Unknown
//! keys are rejected at every level.
//!
//! ```toml
//! name = "example"
//! seed = 7
//!
//! [params]
//! mu = 0.02
//! beta = 31.0
//! gamma = 16.590909090909090
//! kappa = 1.69
//! omega = 0.0015
//! delta = 0.0005
//! sigma1_sq = 30.0
//! sigma2_sq = 0.0008
//! sigma3_sq = 0.0006
//!
//! [initial]
//! S = 0.4
//! I = 0.4
//! x = 0.5
//! ```

use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, CostWeights, SweepConfig};
use crate::engine::IntegratorConfig;
use crate::equilibria::{equilibrium_report, AnalysisInputs};
use crate::error::{Error, Result};
use crate::estimators::{SweepGrid, SweepSpec, DEFAULT_BURN_IN_FRACTION, DEFAULT_FLAT_TOLERANCE};
use crate::model::{ModelParams, State};

/// Names of the scenarios compiled into the library.
pub const BUNDLED: [&str; 9] = [
    "fig1a", "fig1b", "fig2b", "fig3b", "fig3c", "fig4", "fig5a", "fig5b", "fig6",
];

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1a" => include_str!("../scenarios/fig1a.toml"),
        "fig1b" => include_str!("../scenarios/fig1b.toml"),
        "fig2b" => include_str!("../scenarios/fig2b.toml"),
        "fig3b" => include_str!("../scenarios/fig3b.toml"),
        "fig3c" => include_str!("../scenarios/fig3c.toml"),
        "fig4" => include_str!("../scenarios/fig4.toml"),
        "fig5a" => include_str!("../scenarios/fig5a.toml"),
        "fig5b" => include_str!("../scenarios/fig5b.toml"),
        "fig6" => include_str!("../scenarios/fig6.toml"),
        _ => return None,
    })
}

fn default_burn_in() -> f64 {
    DEFAULT_BURN_IN_FRACTION
}
fn default_flat_tolerance() -> f64 {
    DEFAULT_FLAT_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Fraction of the horizon discarded before time averages.
    #[serde(default = "default_burn_in")]
    pub burn_in_fraction: f64,
    #[serde(default = "default_flat_tolerance")]
    pub flat_tolerance: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            burn_in_fraction: DEFAULT_BURN_IN_FRACTION,
            flat_tolerance: DEFAULT_FLAT_TOLERANCE,
        }
    }
}

/// Empirical limits fed to the theorem checkers. Missing entries fall back
/// to closed-form values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_sup: Option<f64>,
}

/// Absorption sweep over (σ2², σ3², x0). Horizon, step and scheme come from
/// `[integrator]`; S(0), I(0) from `[initial]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub sigma2_sq: Vec<f64>,
    pub sigma3_sq: Vec<f64>,
    pub x0: Vec<f64>,
    pub n_per_cell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub u_max: f64,
    pub t_final: f64,
    #[serde(default)]
    pub solver: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub params: ModelParams,
    pub initial: State,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<EstimatorOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
}

impl Scenario {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled_source(name)
            .ok_or_else(|| Error::Scenario(format!("no bundled scenario named `{name}`")))?;
        Self::parse(text)
    }

    /// Reads `target` as a file path, or as a bundled name when no such file exists.
    pub fn load(target: &str) -> Result<Self> {
        let path = std::path::Path::new(target);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Scenario(format!("cannot read {target}: {e}")))?;
            return Self::parse(&text);
        }
        if bundled_source(target).is_some() {
            return Self::bundled(target);
        }
        Err(Error::Scenario(format!(
            "`{target}` is neither a readable file nor one of: {}",
            BUNDLED.join(", ")
        )))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.initial.check()?;
        self.integrator.validate()?;
        let est = self.estimators();
        if !(0.0..1.0).contains(&est.burn_in_fraction) {
            return Err(Error::InvalidConfig(format!(
                "burn_in_fraction must lie in [0, 1), got {}",
                est.burn_in_fraction
            )));
        }
        if !(est.flat_tolerance.is_finite() && est.flat_tolerance > 0.0) {
            return Err(Error::InvalidConfig("flat_tolerance must be > 0".into()));
        }
        if let Some(r) = &self.report {
            for v in [r.i0, r.x0, r.x_inf, r.x_sup].into_iter().flatten() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidConfig(format!(
                        "report inputs must lie in [0, 1], got {v}"
                    )));
                }
            }
        }
        if let Some(spec) = self.sweep_spec() {
            spec.validate()?;
        }
        if let Some((problem, solver)) = self.control_problem() {
            problem.validate()?;
            solver.validate()?;
        }
        Ok(())
    }

    pub fn estimators(&self) -> EstimatorOptions {
        self.estimators.unwrap_or_default()
    }

    /// Burn-in in years for the integrator horizon.
    pub fn burn_in(&self) -> f64 {
        self.estimators().burn_in_fraction * self.integrator.t_end
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        let b = self.sweep.as_ref()?;
        Some(SweepSpec {
            base: self.params,
            initial: self.initial,
            grid: SweepGrid {
                sigma2_sq: b.sigma2_sq.clone(),
                sigma3_sq: b.sigma3_sq.clone(),
                x0: b.x0.clone(),
            },
            n_per_cell: b.n_per_cell,
            t_end: self.integrator.t_end,
            dt: self.integrator.dt,
            scheme: self.integrator.scheme,
            clamp_epsilon: self.integrator.clamp_epsilon,
            master_seed: self.seed,
        })
    }

    pub fn control_problem(&self) -> Option<(ControlProblem, SweepConfig)> {
        let c = self.control.as_ref()?;
        Some((
            ControlProblem {
                params: self.params,
                weights: CostWeights {
                    alpha1: c.alpha1,
                    alpha2: c.alpha2,
                    alpha3: c.alpha3,
                },
                u_max: c.u_max,
                t_final: c.t_final,
                initial: self.initial,
            },
            c.solver.clone(),
        ))
    }

    /// Empirical report inputs, or `None` to use closed-form values throughout.
    pub fn analysis_inputs(&self) -> Option<AnalysisInputs> {
        let r = self.report?;
        let base = AnalysisInputs::closed_form(&equilibrium_report(&self.params));
        Some(AnalysisInputs {
            i0: r.i0.unwrap_or(base.i0),
            x0: r.x0.unwrap_or(base.x0),
            x_inf: r.x_inf.unwrap_or(base.x_inf),
            x_sup: r.x_sup.unwrap_or(base.x_sup),
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Overrides the step size everywhere it is used, control grid included.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.integrator.dt = dt;
        if let Some(c) = self.control.as_mut() {
            c.solver.dt = dt;
        }
        self
    }

    /// Overrides the horizon, control horizon included.
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.integrator.t_end = t_end;
        if let Some(c) = self.control.as_mut() {
            c.t_final = t_end;
        }
        self
    }
}
