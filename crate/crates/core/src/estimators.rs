//! Path and ensemble statistics: temporal means, growth-rate fits, tail
//! extrema from time-reversed cumulative extrema, absorption sweeps and rank
//! correlation.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{ensemble_from, ControlInput, IntegratorConfig, Path, Scheme, XAbsorption};
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};

/// Fraction of the horizon discarded before temporal means by default.
pub const DEFAULT_BURN_IN_FRACTION: f64 = 0.2;
/// Relative change below which reversed cumulative extrema count as flat.
pub const DEFAULT_FLAT_TOLERANCE: f64 = 1e-3;
/// Fraction of samples dropped from the end before tail extrema are taken.
pub const TAIL_EXCLUDED_FRACTION: f64 = 0.1;
/// Unabsorbed trajectories with x(T) below this count as heading to 0.
pub const TERMINAL_X_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    S,
    I,
    X,
}

impl Field {
    #[inline]
    pub fn of(self, y: &State) -> f64 {
        match self {
            Field::S => y.s,
            Field::I => y.i,
            Field::X => y.x,
        }
    }
}

fn series(path: &Path, field: Field) -> Vec<f64> {
    path.states.iter().map(|y| field.of(y)).collect()
}

/// Trapezoidal integral of sampled values.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> (usize, f64) {
    let k = times.partition_point(|&s| s <= t).max(1) - 1;
    if k + 1 >= times.len() || times[k] == t {
        return (k, values[k]);
    }
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    (k, values[k] + w * (values[k + 1] - values[k]))
}

/// Trapezoidal mean of sampled values over `[burn_in, end]`.
pub fn time_average_series(times: &[f64], values: &[f64], burn_in: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Estimator("need at least two samples".into()));
    }
    let end = *times.last().unwrap();
    let start = burn_in.max(times[0]);
    if start >= end {
        return Err(Error::Estimator(format!(
            "empty averaging window [{burn_in}, {end}]"
        )));
    }
    let (k, v0) = interpolate(times, values, start);
    let mut t = vec![start];
    let mut v = vec![v0];
    for j in k + 1..times.len() {
        if times[j] > start {
            t.push(times[j]);
            v.push(values[j]);
        }
    }
    Ok(trapezoid(&t, &v) / (end - start))
}

/// Temporal mean of `field` over `[burn_in, T]`.
pub fn time_average(path: &Path, field: Field, burn_in: f64) -> Result<f64> {
    time_average_series(&path.times, &series(path, field), burn_in)
}

/// Temporal mean after discarding the first 20% of the path.
pub fn time_average_default(path: &Path, field: Field) -> Result<f64> {
    time_average(path, field, DEFAULT_BURN_IN_FRACTION * path.end_time())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// log Y against t.
    LogOverT,
    /// log(Y/(1−Y)) against t.
    LogitOverT,
}

impl Transform {
    fn apply(self, y: f64) -> Option<f64> {
        match self {
            Transform::LogOverT if y > 0.0 => Some(y.ln()),
            Transform::LogitOverT if y > 0.0 && y < 1.0 => Some((y / (1.0 - y)).ln()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Time span of the fitted samples.
    pub window: (f64, f64),
    /// The transform became undefined (absorption) before the end of the path.
    pub truncated: bool,
}

/// Least-squares slope of the transformed series over the tail half of its
/// valid prefix.
pub fn growth_rate_series(times: &[f64], values: &[f64], transform: Transform) -> Result<GrowthFit> {
    let transformed: Vec<f64> = values
        .iter()
        .map_while(|&y| transform.apply(y))
        .collect();
    let valid = transformed.len();
    if valid < 4 {
        return Err(Error::Estimator(format!(
            "only {valid} samples before the transform became undefined"
        )));
    }
    let lo = valid / 2;
    let t = &times[lo..valid];
    let z = &transformed[lo..valid];
    let n = t.len() as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let z_mean = z.iter().sum::<f64>() / n;
    let (mut stt, mut stz, mut szz) = (0.0, 0.0, 0.0);
    for (&ti, &zi) in t.iter().zip(z) {
        let (dt, dz) = (ti - t_mean, zi - z_mean);
        stt += dt * dt;
        stz += dt * dz;
        szz += dz * dz;
    }
    if stt == 0.0 {
        return Err(Error::Estimator("fit window has zero time span".into()));
    }
    let rate = stz / stt;
    let r_squared = if szz == 0.0 { 1.0 } else { stz * stz / (stt * szz) };
    Ok(GrowthFit {
        rate,
        intercept: z_mean - rate * t_mean,
        r_squared,
        n_points: t.len(),
        window: (t[0], t[t.len() - 1]),
        truncated: valid < values.len(),
    })
}

pub fn growth_rate(path: &Path, field: Field, transform: Transform) -> Result<GrowthFit> {
    growth_rate_series(&path.times, &series(path, field), transform)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub value_inf: f64,
    pub value_sup: f64,
    /// Time interval whose extrema define the estimate.
    pub stable_window: (f64, f64),
    pub converged: bool,
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Tail liminf/limsup from the cumulative extrema of the time-reversed series.
///
/// The final 10% of samples is dropped. The running extrema of what remains,
/// read backwards, are considered flat when they change by less than
/// `flat_tolerance` (relative) across the middle half of the reversed
/// sequence; the estimate is the extremum over the widest window in that
/// stretch. A monotone series has a limit, so both values are its last sample.
pub fn tail_extrema_series(times: &[f64], values: &[f64], flat_tolerance: f64) -> Result<TailEstimate> {
    if times.len() != values.len() || values.len() < 8 {
        return Err(Error::Estimator("tail extrema need at least 8 samples".into()));
    }
    let last = values.len() - 1;
    let increasing = values.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = values.windows(2).all(|w| w[1] <= w[0]);
    if increasing || decreasing {
        return Ok(TailEstimate {
            value_inf: values[last],
            value_sup: values[last],
            stable_window: (times[last], times[last]),
            converged: true,
        });
    }

    let keep = values.len() - (TAIL_EXCLUDED_FRACTION * values.len() as f64).floor() as usize;
    let retained = &values[..keep];
    let len = retained.len();
    let mut run_max = Vec::with_capacity(len);
    let mut run_min = Vec::with_capacity(len);
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for &v in retained.iter().rev() {
        hi = hi.max(v);
        lo = lo.min(v);
        run_max.push(hi);
        run_min.push(lo);
    }
    let a = len / 4;
    let b = (3 * len / 4).min(len - 1);
    let flat = relative_change(run_max[a], run_max[b]) < flat_tolerance
        && relative_change(run_min[a], run_min[b]) < flat_tolerance;
    Ok(TailEstimate {
        value_inf: run_min[b],
        value_sup: run_max[b],
        stable_window: (times[len - 1 - b], times[len - 1]),
        converged: flat,
    })
}

pub fn tail_extrema(path: &Path, field: Field, flat_tolerance: f64) -> Result<TailEstimate> {
    tail_extrema_series(&path.times, &series(path, field), flat_tolerance)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

pub fn mean_estimate(xs: &[f64]) -> Result<MeanEstimate> {
    if xs.is_empty() {
        return Err(Error::Estimator("no samples".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std_error = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MeanEstimate {
        mean,
        std_error,
        n: xs.len(),
    })
}

/// Grid of utility noise variances and initial uptakes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub sigma2_sq: Vec<f64>,
    pub sigma3_sq: Vec<f64>,
    pub x0: Vec<f64>,
}

impl SweepGrid {
    pub fn n_cells(&self) -> usize {
        self.sigma2_sq.len() * self.sigma3_sq.len() * self.x0.len()
    }

    /// (σ2², σ3², x0) of cell `index`; x0 varies fastest.
    pub fn cell(&self, index: usize) -> (f64, f64, f64) {
        let nx = self.x0.len();
        let n3 = self.sigma3_sq.len();
        let ix = index % nx;
        let i3 = (index / nx) % n3;
        let i2 = index / (nx * n3);
        (self.sigma2_sq[i2], self.sigma3_sq[i3], self.x0[ix])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ModelParams,
    /// Initial (S, I); x is taken from the grid.
    pub initial: State,
    pub grid: SweepGrid,
    pub n_per_cell: usize,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub clamp_epsilon: f64,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.grid.n_cells() == 0 {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if self.n_per_cell == 0 {
            return Err(Error::InvalidConfig("n_per_cell must be >= 1".into()));
        }
        for &v in self.grid.sigma2_sq.iter().chain(&self.grid.sigma3_sq) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("noise variance {v} must be >= 0")));
            }
        }
        if let Some(x) = self.grid.x0.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidConfig(format!("x0 = {x} outside [0,1]")));
        }
        self.integrator().validate()
    }

    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            scheme: self.scheme,
            dt: self.dt,
            t_end: self.t_end,
            record_stride: usize::MAX,
            clamp_epsilon: self.clamp_epsilon,
            infection_epsilon: None,
            record_drivers: false,
            stop_when_x_absorbed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionCell {
    pub index: usize,
    pub sigma2_sq: f64,
    pub sigma3_sq: f64,
    pub x0: f64,
    pub n: usize,
    /// Trajectories counted as x → 0.
    pub n_to_zero: usize,
    /// Trajectories actually absorbed (at either end) before T.
    pub n_absorbed: usize,
    pub p_hat: f64,
    pub se: f64,
    /// Streams `first_stream .. first_stream + n` under the sweep's master seed.
    pub first_stream: u64,
    pub error: Option<String>,
}

impl AbsorptionCell {
    pub const CSV_HEADER: &'static str = "sigma2_sq,sigma3_sq,x0,n,p_hat,se";

    pub fn csv_row(&self) -> String {
        format!(
            "{:?},{:?},{:?},{},{:?},{:?}",
            self.sigma2_sq, self.sigma3_sq, self.x0, self.n, self.p_hat, self.se
        )
    }
}

/// Estimates P(x → 0 | x(0)) for one grid cell.
pub fn absorption_cell(spec: &SweepSpec, index: usize) -> AbsorptionCell {
    let (s2, s3, x0) = spec.grid.cell(index);
    let first_stream = (index * spec.n_per_cell) as u64;
    let params = ModelParams {
        sigma2_sq: s2,
        sigma3_sq: s3,
        ..spec.base
    };
    let initial = State::new(spec.initial.s, spec.initial.i, x0);
    let outcome = ensemble_from(
        &initial,
        &params,
        ControlInput::None,
        &spec.integrator(),
        spec.master_seed,
        first_stream,
        spec.n_per_cell,
        |path| {
            let to_zero = match path.absorbed_x {
                Some(XAbsorption::AtZero) => true,
                Some(XAbsorption::AtOne) => false,
                None => path.terminal().x < TERMINAL_X_THRESHOLD,
            };
            (to_zero, path.absorbed_x.is_some())
        },
    );
    let mut cell = AbsorptionCell {
        index,
        sigma2_sq: s2,
        sigma3_sq: s3,
        x0,
        n: spec.n_per_cell,
        n_to_zero: 0,
        n_absorbed: 0,
        p_hat: f64::NAN,
        se: f64::NAN,
        first_stream,
        error: None,
    };
    match outcome {
        Ok(results) => {
            cell.n_to_zero = results.iter().filter(|r| r.0).count();
            cell.n_absorbed = results.iter().filter(|r| r.1).count();
            let n = cell.n as f64;
            cell.p_hat = cell.n_to_zero as f64 / n;
            cell.se = (cell.p_hat * (1.0 - cell.p_hat) / n).sqrt();
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionTable {
    pub grid: SweepGrid,
    pub master_seed: u64,
    pub cells: Vec<AbsorptionCell>,
}

impl AbsorptionTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", AbsorptionCell::CSV_HEADER)?;
        for c in &self.cells {
            writeln!(w, "{}", c.csv_row())?;
        }
        Ok(())
    }
}

/// Runs every cell of the grid. Failed cells carry their error and a NaN estimate.
pub fn absorption_sweep(spec: &SweepSpec) -> Result<AbsorptionTable> {
    spec.validate()?;
    let cells = (0..spec.grid.n_cells())
        .map(|k| absorption_cell(spec, k))
        .collect();
    Ok(AbsorptionTable {
        grid: spec.grid.clone(),
        master_seed: spec.master_seed,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub n: usize,
    /// One-sided p-value against the alternative ρ > 0.
    pub p_positive: f64,
    /// One-sided p-value against the alternative ρ < 0.
    pub p_negative: f64,
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Spearman correlation with tie-averaged ranks and a t-approximation p-value.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<RankCorrelation> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Estimator("rank correlation needs >= 3 paired samples".into()));
    }
    let rho = pearson(&average_ranks(xs), &average_ranks(ys));
    let df = (xs.len() - 2) as f64;
    let (p_positive, p_negative) = if rho.abs() >= 1.0 {
        if rho > 0.0 {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (1.0 - dist.cdf(t), dist.cdf(t))
    };
    Ok(RankCorrelation {
        rho,
        n: xs.len(),
        p_positive,
        p_negative,
    })
}
