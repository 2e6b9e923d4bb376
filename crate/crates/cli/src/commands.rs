use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use anyhow::{bail, Context, Result};
use vaxdyn::control::{evaluate, paired_difference, sweep_solve, EVAL_STREAM_OFFSET};
use vaxdyn::equilibria::analyze;
use vaxdyn::estimators::{
    absorption_cell, growth_rate, tail_extrema, time_average, AbsorptionCell, Field, Transform,
};
use vaxdyn::{simulate as run_path, ControlInput, RandomStream, Scenario, XAbsorption};

use crate::output::{header, out_dir, write_csv};
use crate::CommonArgs;

/// z-quantile for two-sided 95% intervals.
const Z95: f64 = 1.959963984540054;

fn resolve(args: &CommonArgs) -> Result<Scenario> {
    let mut s = Scenario::load(&args.scenario)?;
    if let Some(seed) = args.seed {
        s = s.with_seed(seed);
    }
    if let Some(dt) = args.dt {
        s = s.with_dt(dt);
    }
    if let Some(t) = args.t_end {
        s = s.with_t_end(t);
    }
    s.validate().context("scenario after overrides")?;
    Ok(s)
}

fn banner(command: &str, s: &Scenario) {
    println!(
        "# {command} scenario={} seed={} scheme={} dt={} t_end={}",
        s.name.as_deref().unwrap_or("unnamed"),
        s.seed,
        s.integrator.scheme,
        s.integrator.dt,
        s.integrator.t_end
    );
}

pub fn simulate(args: &CommonArgs) -> Result<()> {
    let s = resolve(args)?;
    banner("simulate", &s);
    let path = run_path(
        &s.initial,
        &s.params,
        ControlInput::None,
        &s.integrator,
        RandomStream::new(s.seed, 0),
    )?;
    let dir = out_dir(args.out.as_deref())?;
    let head = header("simulate", &s)?;
    let file = write_csv(&dir, "path.csv", &head, |w| path.write_csv(w))?;
    println!("path_csv={}", file.display());

    let y = path.terminal();
    println!("terminal=({}, {}, {}) at t={}", y.s, y.i, y.x, path.end_time());
    match path.i_absorption_time {
        Some(t) => println!("i_absorbed=true at t={t}"),
        None => println!("i_absorbed=false"),
    }
    match (path.absorbed_x, path.x_absorption_time) {
        (Some(XAbsorption::AtZero), Some(t)) => println!("x_absorbed=zero at t={t}"),
        (Some(XAbsorption::AtOne), Some(t)) => println!("x_absorbed=one at t={t}"),
        _ => println!("x_absorbed=none"),
    }
    println!("max_overshoot={}", path.max_overshoot);

    let est = s.estimators();
    let burn_in = s.burn_in();
    for (name, field) in [("S", Field::S), ("I", Field::I), ("x", Field::X)] {
        match time_average(&path, field, burn_in) {
            Ok(v) => println!("mean_{name}={v}"),
            Err(e) => println!("mean_{name}=n/a ({e})"),
        }
        match tail_extrema(&path, field, est.flat_tolerance) {
            Ok(t) => println!(
                "tail_{name}=[{}, {}] window=[{}, {}] converged={}",
                t.value_inf, t.value_sup, t.stable_window.0, t.stable_window.1, t.converged
            ),
            Err(e) => println!("tail_{name}=n/a ({e})"),
        }
    }
    for (name, field, transform) in [
        ("log_I", Field::I, Transform::LogOverT),
        ("logit_x", Field::X, Transform::LogitOverT),
    ] {
        match growth_rate(&path, field, transform) {
            Ok(g) => println!(
                "rate_{name}={} r2={} window=[{}, {}] truncated={}",
                g.rate, g.r_squared, g.window.0, g.window.1, g.truncated
            ),
            Err(e) => println!("rate_{name}=n/a ({e})"),
        }
    }
    Ok(())
}

pub fn report(args: &CommonArgs) -> Result<()> {
    let s = resolve(args)?;
    let analysis = analyze(&s.params, s.analysis_inputs())?;
    let mut text = String::new();
    text.push_str(&format!(
        "# report scenario={} seed={}\n",
        s.name.as_deref().unwrap_or("unnamed"),
        s.seed
    ));
    for (k, v) in analysis.key_values() {
        text.push_str(&format!("{k}={v}\n"));
    }
    print!("{text}");
    if let Some(out) = args.out.as_deref() {
        let dir = out_dir(Some(out))?;
        let path = dir.join("report.txt");
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(f, "{}", header("report", &s)?)?;
        f.write_all(text.as_bytes())?;
    }
    Ok(())
}

const SWEEP_CSV: &str = "absorption.csv";
const SWEEP_PARTIAL: &str = "absorption.partial";

/// Rows already computed under the same header: `index -> csv row`.
fn resume_rows(path: &FsPath, head: &str) -> BTreeMap<usize, String> {
    let mut rows = BTreeMap::new();
    let Ok(text) = fs::read_to_string(path) else {
        return rows;
    };
    let mut lines = text.lines();
    if lines.next() != Some(head) {
        return rows;
    }
    for line in lines {
        if let Some((idx, row)) = line.split_once(';') {
            if let Ok(i) = idx.parse() {
                rows.insert(i, row.to_string());
            }
        }
    }
    rows
}

pub fn sweep(args: &CommonArgs) -> Result<()> {
    let s = resolve(args)?;
    banner("sweep", &s);
    let Some(spec) = s.sweep_spec() else {
        bail!("scenario has no [sweep] block");
    };
    let dir = out_dir(args.out.as_deref())?;
    let head = header("sweep", &s)?;
    let final_path = dir.join(SWEEP_CSV);
    let partial_path = dir.join(SWEEP_PARTIAL);

    if let Ok(text) = fs::read_to_string(&final_path) {
        if text.lines().next() == Some(head.as_str()) {
            println!("absorption_csv={} (up to date)", final_path.display());
            return Ok(());
        }
    }

    let n_cells = spec.grid.n_cells();
    let mut rows = resume_rows(&partial_path, &head);
    rows.retain(|&i, _| i < n_cells);
    if !rows.is_empty() {
        eprintln!("resuming: {} of {n_cells} cells already done", rows.len());
    }
    let mut partial = fs::File::create(&partial_path)
        .with_context(|| format!("creating {}", partial_path.display()))?;
    writeln!(partial, "{head}")?;
    for (i, row) in &rows {
        writeln!(partial, "{i};{row}")?;
    }
    partial.flush()?;

    let mut failures = Vec::new();
    for index in 0..n_cells {
        if rows.contains_key(&index) {
            continue;
        }
        let cell = absorption_cell(&spec, index);
        if let Some(e) = &cell.error {
            failures.push(format!("cell {index}: {e}"));
        }
        let row = cell.csv_row();
        writeln!(partial, "{index};{row}")?;
        partial.flush()?;
        rows.insert(index, row);
        eprintln!(
            "cell {}/{n_cells} sigma2_sq={} sigma3_sq={} x0={} p_hat={}",
            index + 1,
            cell.sigma2_sq,
            cell.sigma3_sq,
            cell.x0,
            cell.p_hat
        );
    }
    drop(partial);

    write_csv(&dir, SWEEP_CSV, &head, |w| {
        writeln!(w, "{}", AbsorptionCell::CSV_HEADER)?;
        for row in rows.values() {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    fs::remove_file(&partial_path).ok();
    println!("absorption_csv={}", final_path.display());
    if !failures.is_empty() {
        bail!("{} cells failed:\n{}", failures.len(), failures.join("\n"));
    }
    Ok(())
}

pub fn control(args: &CommonArgs) -> Result<()> {
    let s = resolve(args)?;
    let Some((problem, solver)) = s.control_problem() else {
        bail!("scenario has no [control] block");
    };
    println!(
        "# control scenario={} seed={} dt={} t_final={} u_max={}",
        s.name.as_deref().unwrap_or("unnamed"),
        s.seed,
        solver.dt,
        problem.t_final,
        problem.u_max
    );
    let sol = sweep_solve(&problem, &solver, s.seed)?;
    let n = sol.u_star.len();
    let zero = evaluate(&problem, &solver, &vec![0.0; n], s.seed, EVAL_STREAM_OFFSET, solver.n_eval_paths)?;
    let full = evaluate(
        &problem,
        &solver,
        &vec![problem.u_max; n],
        s.seed,
        EVAL_STREAM_OFFSET,
        solver.n_eval_paths,
    )?;

    let dir = out_dir(args.out.as_deref())?;
    let head = header("control", &s)?;
    write_csv(&dir, "u_star.csv", &head, |w| sol.write_control_csv(w))?;
    write_csv(&dir, "controlled_path.csv", &head, |w| sol.write_mean_path_csv(w))?;
    write_csv(&dir, "trace.csv", &head, |w| sol.write_trace_csv(w))?;
    write_csv(&dir, "baseline_path.csv", &head, |w| {
        writeln!(w, "t,S,I,x")?;
        for (t, y) in sol.path_times.iter().zip(&zero.mean_path) {
            writeln!(w, "{t:?},{:?},{:?},{:?}", y.s, y.i, y.x)?;
        }
        Ok(())
    })?;

    println!("converged={} iterations={}", sol.converged, sol.iterations.len());
    if let Some(last) = sol.iterations.last() {
        println!("final_delta_u={}", last.delta_u);
    }
    let end = |e: &vaxdyn::control::Evaluation| *e.mean_path.last().expect("non-empty path");
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (yc, y0) = (end(&sol.evaluation), end(&zero));
    println!("controlled_terminal=({}, {}, {})", yc.s, yc.i, yc.x);
    println!("baseline_terminal=({}, {}, {})", y0.s, y0.i, y0.x);
    println!("controlled_mean_I={}", mean(&sol.evaluation.i_time_averages));
    println!("baseline_mean_I={}", mean(&zero.i_time_averages));
    for (label, e) in [("J(u*)", &sol.evaluation), ("J(0)", &zero), ("J(u_max)", &full)] {
        println!("{label}={} se={}", e.objective.mean, e.objective.std_error);
    }
    for (label, other) in [("J(u*)-J(0)", &zero), ("J(u*)-J(u_max)", &full)] {
        let d = paired_difference(&sol.evaluation, other)?;
        let lo = d.mean - Z95 * d.std_error;
        let hi = d.mean + Z95 * d.std_error;
        let verdict = if lo > 0.0 {
            "u* better"
        } else if hi < 0.0 {
            "u* worse"
        } else {
            "inconclusive"
        };
        println!("{label}={} ci95=[{lo}, {hi}] {verdict}", d.mean);
    }
    if !sol.converged {
        eprintln!("warning: sweep stopped at max_iters without meeting the tolerance");
    }
    println!("outputs={}", dir.display());
    Ok(())
}
