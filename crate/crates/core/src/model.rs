//! The coupled model: a stochastic SIR system whose recruitment of
//! susceptibles is driven by the vaccine-acceptor fraction `x`, and a
//! stochastic replicator equation for `x` whose payoffs depend on the
//! infected fraction.
//!
//! ```text
//! dS = [μ(1−x) − βSI − μS] dt − σ1·S·I dW1
//! dI = [βSI − (μ+γ)I] dt      + σ1·S·I dW1
//! dx = κx(1−x)[−ω(1−u) + I + δ(2x−1) + κ(σ3² − (σ2²+σ3²)x)] dt
//!      + κ·√(σ2²+σ3²)·x(1−x) dW2
//! ```
//!
//! The recovered compartment is implied by `R = 1 − S − I` and never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that a state lies in the solution set.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Epidemiological, behavioural and noise parameters.
///
/// Noise magnitudes are stored as variances; square roots are only taken when
/// the diffusion is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Per-capita birth/death rate (1/year).
    pub mu: f64,
    /// Transmission rate (1/year).
    pub beta: f64,
    /// Recovery rate (1/year).
    pub gamma: f64,
    /// Social learning rate (1/year).
    pub kappa: f64,
    /// Cost of vaccination (utility units).
    pub omega: f64,
    /// Group pressure (utility units).
    pub delta: f64,
    /// Transmission noise variance σ1².
    pub sigma1_sq: f64,
    /// Vaccinator utility noise variance σ2².
    pub sigma2_sq: f64,
    /// Non-vaccinator utility noise variance σ3².
    pub sigma3_sq: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        let nonneg = [
            ("omega", self.omega),
            ("delta", self.delta),
            ("sigma1_sq", self.sigma1_sq),
            ("sigma2_sq", self.sigma2_sq),
            ("sigma3_sq", self.sigma3_sq),
        ];
        for (field, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Basic reproduction number β/(μ+γ).
    pub fn r0(&self) -> f64 {
        self.beta / (self.mu + self.gamma)
    }

    /// Total utility noise variance σ2² + σ3².
    pub fn utility_noise_sq(&self) -> f64 {
        self.sigma2_sq + self.sigma3_sq
    }

    /// Fraction μ/(μ+γ) that scales every endemic prevalence.
    pub fn endemic_scale(&self) -> f64 {
        self.mu / (self.mu + self.gamma)
    }

    /// Bracketed replicator fitness difference (the factor multiplying κx(1−x)).
    #[inline]
    pub fn replicator_bracket(&self, i: f64, x: f64, u: f64) -> f64 {
        -self.omega * (1.0 - u)
            + i
            + self.delta * (2.0 * x - 1.0)
            + self.kappa * (self.sigma3_sq - self.utility_noise_sq() * x)
    }

    /// Drift without domain checks. Used by the integrator's inner loop.
    #[inline]
    pub fn drift_unchecked(&self, y: &State, u: f64) -> Drift {
        let State { s, i, x } = *y;
        let infection = self.beta * s * i;
        Drift([
            self.mu * (1.0 - x) - infection - self.mu * s,
            infection - (self.mu + self.gamma) * i,
            self.kappa * x * (1.0 - x) * self.replicator_bracket(i, x, u),
        ])
    }

    /// Diffusion without domain checks.
    #[inline]
    pub fn diffusion_unchecked(&self, y: &State) -> Diffusion {
        let State { s, i, x } = *y;
        let transfer = self.sigma1_sq.sqrt() * s * i;
        let behaviour = self.kappa * self.utility_noise_sq().sqrt() * x * (1.0 - x);
        Diffusion {
            columns: [[-transfer, transfer, 0.0], [0.0, 0.0, behaviour]],
        }
    }

    /// Per-driver Jacobians ∂G[k][i]/∂y[j], without domain checks.
    #[inline]
    pub fn diffusion_jacobian_unchecked(&self, y: &State) -> DiffusionJacobian {
        let State { s, i, x } = *y;
        let sigma1 = self.sigma1_sq.sqrt();
        let behaviour = self.kappa * self.utility_noise_sq().sqrt();
        let ds = sigma1 * i;
        let di = sigma1 * s;
        DiffusionJacobian([
            [[-ds, -di, 0.0], [ds, di, 0.0], [0.0, 0.0, 0.0]],
            [
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0],
                [0.0, 0.0, behaviour * (1.0 - 2.0 * x)],
            ],
        ])
    }
}

/// A point (S, I, x) of the solution set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    /// Susceptible fraction.
    #[serde(rename = "S")]
    pub s: f64,
    /// Infected fraction.
    #[serde(rename = "I")]
    pub i: f64,
    /// Vaccine-acceptor fraction.
    pub x: f64,
}

impl State {
    pub const fn new(s: f64, i: f64, x: f64) -> Self {
        Self { s, i, x }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.s, self.i, self.x]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Whether the state lies in {S, I ≥ 0, S + I ≤ 1, 0 ≤ x ≤ 1} up to `tol`.
    pub fn in_domain(&self, tol: f64) -> bool {
        self.s.is_finite()
            && self.i.is_finite()
            && self.x.is_finite()
            && self.s >= -tol
            && self.i >= -tol
            && self.s + self.i <= 1.0 + tol
            && self.x >= -tol
            && self.x <= 1.0 + tol
    }

    pub fn check(&self) -> Result<()> {
        if self.in_domain(DOMAIN_TOL) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "state (S={}, I={}, x={}) is outside the solution set",
                self.s, self.i, self.x
            )))
        }
    }
}

/// Drift rates (dS, dI, dx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift(pub [f64; 3]);

/// 3×2 diffusion matrix stored by column: `columns[k]` is the loading on driver `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion {
    pub columns: [[f64; 3]; 2],
}

/// `0[k][i][j]` = ∂(column k, row i)/∂y_j with y = (S, I, x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionJacobian(pub [[[f64; 3]; 3]; 2]);

/// Perceived payoffs of vaccinating and of not vaccinating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoffs {
    /// v(s1, s2) = −ω + δx
    pub vaccinate: f64,
    /// v(s2, s1) = −I + δ(1−x)
    pub abstain: f64,
}

pub fn payoffs(x: f64, i: f64, params: &ModelParams) -> Result<Payoffs> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&i) {
        return Err(Error::domain(format!(
            "payoffs need x, I in [0,1], got x={x}, I={i}"
        )));
    }
    Ok(Payoffs {
        vaccinate: -params.omega + params.delta * x,
        abstain: -i + params.delta * (1.0 - x),
    })
}

/// Replicator drift assembled from payoffs and the noise-induced mutation term,
/// κx(1−x)[v12 − v21 + κσ3²(1−x) − κσ2²x]. Only used to cross-check [`drift`].
pub fn replicator_drift_from_payoffs(x: f64, i: f64, params: &ModelParams) -> Result<f64> {
    let p = payoffs(x, i, params)?;
    let mutation =
        params.kappa * params.sigma3_sq * (1.0 - x) - params.kappa * params.sigma2_sq * x;
    Ok(params.kappa * x * (1.0 - x) * (p.vaccinate - p.abstain + mutation))
}

fn check_control(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::domain(format!("control must lie in [0,1], got {u}")))
    }
}

/// Drift of the controlled system; `u = 0` is the uncontrolled model.
pub fn drift(state: &State, params: &ModelParams, u: f64) -> Result<Drift> {
    state.check()?;
    check_control(u)?;
    Ok(params.drift_unchecked(state, u))
}

pub fn diffusion(state: &State, params: &ModelParams) -> Result<Diffusion> {
    state.check()?;
    Ok(params.diffusion_unchecked(state))
}

pub fn diffusion_state_jacobian(state: &State, params: &ModelParams) -> Result<DiffusionJacobian> {
    state.check()?;
    Ok(params.diffusion_jacobian_unchecked(state))
}
