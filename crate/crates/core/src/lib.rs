//! Simulation and analysis of a stochastic SIR epidemic coupled to noisy
//! replicator dynamics of parental vaccination choice.
//!
//! * [`model`]: parameters, state space, drift and diffusion.
//! * [`engine`]: Euler–Maruyama / Milstein integration with reproducible streams.
//! * [`equilibria`]: thresholds, equilibria and theorem condition checkers.
//! * [`estimators`]: temporal means, growth rates, tail extrema, absorption sweeps.
//! * [`control`]: forward–backward sweep for the vaccination-discount problem.
//! * [`scenario`]: declarative scenario files.

pub mod control;
pub mod engine;
pub mod equilibria;
pub mod error;
pub mod estimators;
pub mod model;
pub mod rng;
pub mod scenario;

pub use engine::{
    ensemble, ensemble_from, simulate, simulate_with_increments, step, ControlInput,
    ControlSchedule, IntegratorConfig, Path, Scheme, XAbsorption,
};
pub use error::{Error, Result};
pub use model::{ModelParams, State};
pub use rng::RandomStream;
pub use scenario::Scenario;
