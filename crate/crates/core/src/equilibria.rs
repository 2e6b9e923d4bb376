//! Closed-form analysis: reproduction numbers, the five equilibria and their
//! existence regions, and calculators for the stability and bound results.
//!
//! Every inequality is evaluated on doubles with no slack, so points exactly
//! on a boundary are treated as outside the open condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

/// A quantity that is only defined inside some parameter regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gated<T> {
    Holds(T),
    Absent(String),
}

impl<T> Gated<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Gated::Holds(v) => Some(v),
            Gated::Absent(_) => None,
        }
    }

    pub fn is_present(&self) -> bool {
        matches!(self, Gated::Holds(_))
    }
}

impl<T> From<Result<T>> for Gated<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Gated::Holds(v),
            Err(Error::Regime(reason)) => Gated::Absent(reason),
            Err(e) => Gated::Absent(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub r0: f64,
    pub r0s: f64,
    /// Root of −½σ1²z² + βz − (μ+γ) in (0, 1), when it exists.
    pub s_d: Option<f64>,
    /// Stochastic herd-immunity threshold 1 − s_d.
    pub hit_s: Option<f64>,
}

/// Stochastic reproduction number β/(μ+γ+½σ1²).
pub fn r0s(p: &ModelParams) -> f64 {
    p.beta / (p.mu + p.gamma + 0.5 * p.sigma1_sq)
}

/// s_d = (1/R0)·2/(1 + √(1 − 2σ1²/(βR0))), defined when the root is real and R0^s > 1.
pub fn susceptible_divider(p: &ModelParams) -> Option<f64> {
    let r0 = p.r0();
    let disc = 1.0 - 2.0 * p.sigma1_sq / (p.beta * r0);
    if disc < 0.0 || r0s(p) <= 1.0 {
        return None;
    }
    Some(2.0 / (r0 * (1.0 + disc.sqrt())))
}

pub fn thresholds(p: &ModelParams) -> Thresholds {
    let s_d = susceptible_divider(p);
    Thresholds {
        r0: p.r0(),
        r0s: r0s(p),
        s_d,
        hit_s: s_d.map(|s| 1.0 - s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub state: Gated<State>,
}

impl Equilibrium {
    fn present(state: State) -> Self {
        Self {
            state: Gated::Holds(state),
        }
    }

    fn absent(reason: impl Into<String>) -> Self {
        Self {
            state: Gated::Absent(reason.into()),
        }
    }

    pub fn get(&self) -> Option<&State> {
        self.state.value()
    }
}

/// Intersection of the two boundary lines of a region pair in the (δ, ω) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corner {
    pub delta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// Full uptake, no susceptibles: (0, 0, 1).
    pub e1: State,
    /// No uptake, everyone susceptible: (1, 0, 0).
    pub e2: State,
    /// Disease-free, partial uptake.
    pub e3: Equilibrium,
    /// Raw value of x3 whenever its denominator is nonzero.
    pub x3: Option<f64>,
    /// Endemic, no uptake.
    pub e4: Equilibrium,
    /// Endemic, partial uptake.
    pub e5: Equilibrium,
    /// Raw value of x5 whenever its denominator is nonzero.
    pub x5: Option<f64>,
    pub in_r31: bool,
    pub in_r32: bool,
    pub in_r51: bool,
    pub in_r52: bool,
    pub corner3: Corner,
    pub corner5: Corner,
}

/// Lower and upper ω boundaries (δ − κσ2², κσ3² − δ) of the disease-free interior region.
fn region3_lines(p: &ModelParams) -> (f64, f64) {
    (p.delta - p.kappa * p.sigma2_sq, p.kappa * p.sigma3_sq - p.delta)
}

/// The two ω boundaries of the endemic interior region.
fn region5_lines(p: &ModelParams) -> (f64, f64) {
    let r0 = p.r0();
    let c = p.endemic_scale();
    let lower = -p.kappa * p.sigma2_sq
        + p.kappa * p.utility_noise_sq() / r0
        + p.delta * (1.0 - 2.0 / r0);
    let upper = -p.delta + c * (1.0 - 1.0 / r0) + p.kappa * p.sigma3_sq;
    (lower, upper)
}

pub fn equilibrium_report(p: &ModelParams) -> EquilibriumReport {
    let r0 = p.r0();
    let c = p.endemic_scale();
    let sigma_sq = p.utility_noise_sq();
    let a = p.kappa * p.sigma3_sq - p.delta - p.omega;
    let b = p.kappa * sigma_sq - 2.0 * p.delta;

    let (lo3, hi3) = region3_lines(p);
    let in_r31 = lo3 < p.omega && p.omega < hi3;
    let in_r32 = hi3 < p.omega && p.omega < lo3;
    let x3 = (b != 0.0).then(|| a / b);
    let e3 = match x3 {
        None => Equilibrium::absent("degenerate denominator κ(σ2²+σ3²) − 2δ = 0"),
        Some(x) if x > 0.0 && x < 1.0 => Equilibrium::present(State::new(1.0 - x, 0.0, x)),
        Some(x) => Equilibrium::absent(format!("x3 = {x} is not in (0, 1)")),
    };

    let (e4, e5, x5) = if r0 > 1.0 {
        let i4 = c * (1.0 - 1.0 / r0);
        let e4 = Equilibrium::present(State::new(1.0 / r0, i4, 0.0));
        let den = c + b;
        let x5 = (den != 0.0).then(|| (c * (1.0 - 1.0 / r0) + a) / den);
        let e5 = match x5 {
            None => Equilibrium::absent("degenerate denominator μ/(μ+γ) + κ(σ2²+σ3²) − 2δ = 0"),
            Some(x) if x > 0.0 && x < 1.0 - 1.0 / r0 => {
                Equilibrium::present(State::new(1.0 / r0, c * (1.0 - 1.0 / r0 - x), x))
            }
            Some(x) => Equilibrium::absent(format!("x5 = {x} is not in (0, 1 − 1/R0)")),
        };
        (e4, e5, x5)
    } else {
        let why = format!("R0 = {r0} <= 1");
        (Equilibrium::absent(why.clone()), Equilibrium::absent(why), None)
    };

    let (lo5, hi5) = region5_lines(p);
    let endemic = r0 > 1.0;
    EquilibriumReport {
        e1: State::new(0.0, 0.0, 1.0),
        e2: State::new(1.0, 0.0, 0.0),
        e3,
        x3,
        e4,
        e5,
        x5,
        in_r31,
        in_r32,
        in_r51: endemic && lo5 < p.omega && p.omega < hi5,
        in_r52: endemic && hi5 < p.omega && p.omega < lo5,
        corner3: Corner {
            delta: 0.5 * p.kappa * sigma_sq,
            omega: 0.5 * p.kappa * (p.sigma3_sq - p.sigma2_sq),
        },
        corner5: Corner {
            delta: 0.5 * c + 0.5 * p.kappa * sigma_sq,
            omega: 0.5 * c * (1.0 - 2.0 / r0) + 0.5 * p.kappa * (p.sigma3_sq - p.sigma2_sq),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtinctionCondition {
    /// σ1²/β > max(1, R0/2).
    CI,
    /// R0^s < 1 and σ1² ≤ β.
    CII,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionVerdict {
    pub condition: Option<ExtinctionCondition>,
    /// Almost-sure upper bound on limsup (1/t) log I(t).
    pub rate_bound: Option<f64>,
    pub inequality: String,
}

pub fn extinction_check(p: &ModelParams) -> ExtinctionVerdict {
    let r0 = p.r0();
    let rs = r0s(p);
    let ratio = p.sigma1_sq / p.beta;
    if ratio > 1.0_f64.max(0.5 * r0) {
        ExtinctionVerdict {
            condition: Some(ExtinctionCondition::CI),
            rate_bound: Some(-p.beta * (p.mu + p.gamma) / p.sigma1_sq * (ratio - 0.5 * r0)),
            inequality: format!("sigma1_sq/beta = {ratio} > max(1, R0/2 = {})", 0.5 * r0),
        }
    } else if rs < 1.0 && p.sigma1_sq <= p.beta {
        ExtinctionVerdict {
            condition: Some(ExtinctionCondition::CII),
            rate_bound: Some(-(p.mu + p.gamma + 0.5 * p.sigma1_sq) * (1.0 - rs)),
            inequality: format!("R0s = {rs} < 1 and sigma1_sq = {} <= beta = {}", p.sigma1_sq, p.beta),
        }
    } else {
        ExtinctionVerdict {
            condition: None,
            rate_bound: None,
            inequality: format!(
                "neither sigma1_sq/beta = {ratio} > max(1, R0/2 = {}) nor (R0s = {rs} < 1 and sigma1_sq <= beta)",
                0.5 * r0
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LogisticClass {
    ToZero,
    ToOne,
    Bistable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticVerdict {
    pub i0: f64,
    /// L(0, I0).
    pub l_at_zero: f64,
    /// L(1, 0).
    pub l_at_one: f64,
    pub class: LogisticClass,
}

/// L(x0, I0) = −κ(σ2² − σ3²)/2 − δ − ω + 2δx0 + I0.
pub fn logistic_l(p: &ModelParams, x0: f64, i0: f64) -> f64 {
    -0.5 * p.kappa * (p.sigma2_sq - p.sigma3_sq) - p.delta - p.omega + 2.0 * p.delta * x0 + i0
}

/// Classifies the long-run behaviour of x given the limiting temporal mean `i0` of I.
pub fn logistic_classifier(p: &ModelParams, i0: f64) -> Result<LogisticVerdict> {
    if !(0.0..=1.0).contains(&i0) {
        return Err(Error::domain(format!("I0 must lie in [0,1], got {i0}")));
    }
    let l0 = logistic_l(p, 0.0, i0);
    let l1 = logistic_l(p, 1.0, 0.0);
    let class = if l0 < 0.0 && l1 < 0.0 {
        LogisticClass::ToZero
    } else if l0 > 0.0 && l1 > 0.0 {
        LogisticClass::ToOne
    } else if l0 < 0.0 && l1 > 0.0 {
        LogisticClass::Bistable
    } else {
        LogisticClass::Indeterminate
    };
    Ok(LogisticVerdict {
        i0,
        l_at_zero: l0,
        l_at_one: l1,
        class,
    })
}

/// Bounds on the limiting temporal means of S and I, given the limit `x0` of x̄.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndemicMeanBounds {
    pub x0: f64,
    /// μ(1−x0)/(μ+β) ≤ liminf S̄.
    pub s_mean_lower: f64,
    /// limsup S̄ ≤ 1 − x0.
    pub s_mean_upper: f64,
    /// limsup S̄ ≤ 1/R0^s.
    pub s_mean_upper_r0s: f64,
    /// liminf Ī ≥ μ/(μ+γ)(1 − 1/R0^s − x0).
    pub i_mean_lower: Gated<f64>,
    /// limsup Ī ≤ μ/(μ+γ)(β/(β−σ1²)(1 − 1/R0^s) − x0).
    pub i_mean_upper: Gated<f64>,
    /// lim Ī = μ/(μ+γ)(1 − 1/R0 − x0) without transmission noise.
    pub i_mean_limit: Gated<f64>,
}

pub fn endemic_mean_bounds(p: &ModelParams, x0: f64) -> Result<EndemicMeanBounds> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::domain(format!("x0 must lie in [0,1], got {x0}")));
    }
    let rs = r0s(p);
    if rs <= 1.0 {
        return Err(Error::Regime(format!("R0s = {rs} <= 1")));
    }
    let c = p.endemic_scale();
    let edge2 = 1.0 - 1.0 / rs;
    let i_mean_lower = if x0 <= edge2 {
        Gated::Holds(c * (edge2 - x0))
    } else {
        Gated::Absent(format!("x0 = {x0} > 1 - 1/R0s = {edge2}"))
    };
    let i_mean_upper = if p.beta <= p.sigma1_sq {
        Gated::Absent(format!("beta = {} <= sigma1_sq = {}", p.beta, p.sigma1_sq))
    } else {
        let edge3 = p.beta / (p.beta - p.sigma1_sq) * edge2;
        if x0 < edge3 {
            Gated::Holds(c * (edge3 - x0))
        } else {
            Gated::Absent(format!("x0 = {x0} >= beta/(beta - sigma1_sq)(1 - 1/R0s) = {edge3}"))
        }
    };
    let i_mean_limit = if p.sigma1_sq == 0.0 {
        Gated::Holds((c * (1.0 - 1.0 / p.r0() - x0)).max(0.0))
    } else {
        Gated::Absent("sigma1_sq > 0".into())
    };
    Ok(EndemicMeanBounds {
        x0,
        s_mean_lower: p.mu * (1.0 - x0) / (p.mu + p.beta),
        s_mean_upper: 1.0 - x0,
        s_mean_upper_r0s: 1.0 / rs,
        i_mean_lower,
        i_mean_upper,
        i_mean_limit,
    })
}

/// Almost-sure brackets on the tail extrema of S and I.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathwiseBounds {
    pub s_d: f64,
    pub hit_s: f64,
    /// liminf S ≤ s_d ≤ limsup S ≤ 1 − x_*.
    pub s_sup_upper: f64,
    /// liminf I ≤ (1 − s_d − x_*)·μ/(μ+γ).
    pub i_inf_upper: f64,
    /// (1 − s_d − x^*)·μ/(μ+γ) ≤ limsup I; absent when x^* = 1.
    pub i_sup_lower: Gated<f64>,
    /// limsup I ≤ 1 − s_d.
    pub i_sup_upper: f64,
    /// x^* = 1 forces I → 0 and S → 0.
    pub full_uptake_degenerate: bool,
}

/// Brackets given the tail infimum `x_inf` and supremum `x_sup` of x.
pub fn pathwise_bounds(p: &ModelParams, x_inf: f64, x_sup: f64) -> Result<PathwiseBounds> {
    if !(0.0..=1.0).contains(&x_inf) || !(0.0..=1.0).contains(&x_sup) || x_inf > x_sup {
        return Err(Error::domain(format!(
            "need 0 <= x_inf <= x_sup <= 1, got x_inf={x_inf}, x_sup={x_sup}"
        )));
    }
    let rs = r0s(p);
    if rs <= 1.0 {
        return Err(Error::Regime(format!("R0s = {rs} <= 1")));
    }
    let ratio = p.sigma1_sq / p.beta;
    if ratio >= 0.5 * p.r0() {
        return Err(Error::Regime(format!(
            "sigma1_sq/beta = {ratio} >= R0/2 = {}",
            0.5 * p.r0()
        )));
    }
    let s_d = susceptible_divider(p).expect("regime guarantees a real root");
    let c = p.endemic_scale();
    let degenerate = x_sup >= 1.0;
    Ok(PathwiseBounds {
        s_d,
        hit_s: 1.0 - s_d,
        s_sup_upper: 1.0 - x_inf,
        i_inf_upper: (1.0 - s_d - x_inf) * c,
        i_sup_lower: if degenerate {
            Gated::Absent("x_sup = 1: full uptake drives I and S to 0".into())
        } else {
            Gated::Holds((1.0 - s_d - x_sup) * c)
        },
        i_sup_upper: 1.0 - s_d,
        full_uptake_degenerate: degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationBound {
    pub m: f64,
    pub bound: f64,
    /// Centre μS_e/(μ − ½((2μ+γ)/β)σ1²I_e) of the S deviation.
    pub s_center: f64,
}

/// Bound on limsup (1/t)∫[(S − s_center)² + (I − I_e)² + (x − x_e)²] around an
/// endemic interior equilibrium.
pub fn deviation_bound(p: &ModelParams, e: &State) -> Result<DeviationBound> {
    if e.x <= 0.0 || e.x >= 1.0 {
        return Err(Error::Regime(format!("x_e = {} must lie strictly in (0,1)", e.x)));
    }
    let sigma_sq = p.utility_noise_sq();
    let d = p.mu - 0.5 * (2.0 * p.mu + p.gamma) / p.beta * p.sigma1_sq * e.i;
    if d <= 0.0 {
        return Err(Error::Regime(format!(
            "1/2 (2mu+gamma)/beta sigma1_sq I_e = {} is not < mu = {}",
            p.mu - d,
            p.mu
        )));
    }
    if p.delta >= 0.25 * p.kappa * sigma_sq {
        return Err(Error::Regime(format!(
            "delta = {} is not < kappa sigma^2 / 4 = {}",
            p.delta,
            0.25 * p.kappa * sigma_sq
        )));
    }
    let m = d
        .min(p.mu + p.gamma)
        .min(p.mu * (0.5 * p.kappa * sigma_sq - 2.0 * p.delta));
    let numerator = p.mu * p.mu * e.s * e.s / d
        + 0.5 * p.mu * p.kappa * sigma_sq * e.x * (1.0 - e.x)
        + p.mu * e.x
        + p.mu * e.s * (1.0 - e.s);
    Ok(DeviationBound {
        m,
        bound: numerator / m,
        s_center: p.mu * e.s / d,
    })
}

/// Limiting temporal means and tail extrema that the bound calculators condition on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisInputs {
    pub i0: f64,
    pub x0: f64,
    pub x_inf: f64,
    pub x_sup: f64,
}

impl AnalysisInputs {
    /// Closed-form stand-ins: I0 from the E4 prevalence (0 when absent), x ≡ 0.
    pub fn closed_form(report: &EquilibriumReport) -> Self {
        Self {
            i0: report.e4.get().map_or(0.0, |e| e.i),
            x0: 0.0,
            x_inf: 0.0,
            x_sup: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremVerdicts {
    pub extinction: ExtinctionVerdict,
    pub logistic: Gated<LogisticVerdict>,
    pub endemic_mean_bounds: Gated<EndemicMeanBounds>,
    pub pathwise_bounds: Gated<PathwiseBounds>,
    pub deviation_bound: Gated<DeviationBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub inputs: AnalysisInputs,
    pub thresholds: Thresholds,
    pub equilibria: EquilibriumReport,
    pub verdicts: TheoremVerdicts,
}

pub fn analyze(p: &ModelParams, inputs: Option<AnalysisInputs>) -> Result<Analysis> {
    p.validate()?;
    let equilibria = equilibrium_report(p);
    let inputs = inputs.unwrap_or_else(|| AnalysisInputs::closed_form(&equilibria));
    let deviation = match equilibria.e5.get() {
        Some(e5) => deviation_bound(p, e5).into(),
        None => Gated::Absent("no endemic interior equilibrium".into()),
    };
    let verdicts = TheoremVerdicts {
        extinction: extinction_check(p),
        logistic: logistic_classifier(p, inputs.i0).into(),
        endemic_mean_bounds: endemic_mean_bounds(p, inputs.x0).into(),
        pathwise_bounds: pathwise_bounds(p, inputs.x_inf, inputs.x_sup).into(),
        deviation_bound: deviation,
    };
    Ok(Analysis {
        inputs,
        thresholds: thresholds(p),
        equilibria,
        verdicts,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |v| v.to_string())
}

fn gated(g: &Gated<f64>) -> String {
    match g {
        Gated::Holds(v) => v.to_string(),
        Gated::Absent(why) => format!("absent ({why})"),
    }
}

fn state_str(e: &Equilibrium) -> String {
    match &e.state {
        Gated::Holds(y) => format!("({}, {}, {})", y.s, y.i, y.x),
        Gated::Absent(why) => format!("absent ({why})"),
    }
}

impl Analysis {
    /// Flat `key`/`value` listing of every quantity in the analysis.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
        let t = &self.thresholds;
        put("r0", t.r0.to_string());
        put("r0s", t.r0s.to_string());
        put("s_d", opt(t.s_d));
        put("hit_s", opt(t.hit_s));

        let e = &self.equilibria;
        put("e1", format!("({}, {}, {})", e.e1.s, e.e1.i, e.e1.x));
        put("e2", format!("({}, {}, {})", e.e2.s, e.e2.i, e.e2.x));
        put("x3", opt(e.x3));
        put("e3", state_str(&e.e3));
        put("e4", state_str(&e.e4));
        put("x5", opt(e.x5));
        put("e5", state_str(&e.e5));
        put("in_r31", e.in_r31.to_string());
        put("in_r32", e.in_r32.to_string());
        put("in_r51", e.in_r51.to_string());
        put("in_r52", e.in_r52.to_string());
        put("corner3", format!("({}, {})", e.corner3.delta, e.corner3.omega));
        put("corner5", format!("({}, {})", e.corner5.delta, e.corner5.omega));

        put("input_i0", self.inputs.i0.to_string());
        put("input_x0", self.inputs.x0.to_string());
        put("input_x_inf", self.inputs.x_inf.to_string());
        put("input_x_sup", self.inputs.x_sup.to_string());

        let v = &self.verdicts;
        let ext = match v.extinction.condition {
            Some(ExtinctionCondition::CI) => "CI",
            Some(ExtinctionCondition::CII) => "CII",
            None => "None",
        };
        put("extinction", ext.to_string());
        put("extinction_rate_bound", opt(v.extinction.rate_bound));
        put("extinction_inequality", v.extinction.inequality.clone());

        match &v.logistic {
            Gated::Holds(l) => {
                put("logistic", format!("{:?}", l.class));
                put("logistic_l_at_zero", l.l_at_zero.to_string());
                put("logistic_l_at_one", l.l_at_one.to_string());
            }
            Gated::Absent(why) => put("logistic", format!("absent ({why})")),
        }

        match &v.endemic_mean_bounds {
            Gated::Holds(b) => {
                put("s_mean_lower", b.s_mean_lower.to_string());
                put("s_mean_upper", b.s_mean_upper.to_string());
                put("s_mean_upper_r0s", b.s_mean_upper_r0s.to_string());
                put("i_mean_lower", gated(&b.i_mean_lower));
                put("i_mean_upper", gated(&b.i_mean_upper));
                put("i_mean_limit", gated(&b.i_mean_limit));
            }
            Gated::Absent(why) => put("endemic_mean_bounds", format!("absent ({why})")),
        }

        match &v.pathwise_bounds {
            Gated::Holds(b) => {
                put("s_sup_upper", b.s_sup_upper.to_string());
                put("i_inf_upper", b.i_inf_upper.to_string());
                put("i_sup_lower", gated(&b.i_sup_lower));
                put("i_sup_upper", b.i_sup_upper.to_string());
                put("full_uptake_degenerate", b.full_uptake_degenerate.to_string());
            }
            Gated::Absent(why) => put("pathwise_bounds", format!("absent ({why})")),
        }

        match &v.deviation_bound {
            Gated::Holds(d) => {
                put("deviation_m", d.m.to_string());
                put("deviation_bound", d.bound.to_string());
                put("deviation_s_center", d.s_center.to_string());
            }
            Gated::Absent(why) => put("deviation_bound", format!("absent ({why})")),
        }
        kv
    }
}
