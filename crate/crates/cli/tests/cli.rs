use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vaxdyn::scenario::bundled_source;

fn vaxdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaxdyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

fn number(text: &str, key: &str) -> f64 {
    let v = value(text, key);
    v.split_whitespace().next().unwrap().parse().unwrap()
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn report_fig1a_thresholds_and_extinction_condition() {
    let o = vaxdyn(&["report", "--scenario", "fig1a"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((number(&out, "r0") - 1.87).abs() < 0.005);
    assert!((number(&out, "r0s") - 0.98).abs() < 0.005);
    assert_eq!(value(&out, "extinction"), "CII");
}

#[test]
fn report_fig5b_divider_and_herd_immunity() {
    let out = stdout(&vaxdyn(&["report", "--scenario", "fig5b"]));
    assert!((number(&out, "s_d") - 0.168).abs() < 0.001);
    assert!((number(&out, "hit_s") - 0.832).abs() < 0.001);
}

#[test]
fn noise_free_report_has_equal_reproduction_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled_source("fig5a").unwrap();
    let file = write_scenario(dir.path(), "quiet.toml", text);
    let out = stdout(&vaxdyn(&["report", "--scenario", &file]));
    assert_eq!(value(&out, "r0s"), value(&out, "r0"));
}

#[test]
fn simulate_fig1a_reports_infection_absorption() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = vaxdyn(&["simulate", "--scenario", "fig1a", "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "i_absorbed").starts_with("true"));
    let csv = fs::read_to_string(out_dir.join("path.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# vaxdyn simulate seed=101 scenario={"));
    assert_eq!(lines.next(), Some("t,S,I,x"));
    assert_eq!(lines.count(), 100_001);
}

#[test]
fn same_seed_gives_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = vaxdyn(&[
            "simulate", "--scenario", "fig3b", "--seed", "42", "--t-end", "5", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("path.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).starts_with("# vaxdyn simulate seed=42 "));
}

#[test]
fn dt_override_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = vaxdyn(&[
        "simulate", "--scenario", "fig1b", "--dt", "0.0025", "--t-end", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().next().unwrap().contains("dt=0.0025"));
    let csv = fs::read_to_string(out.join("path.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("\"dt\":0.0025"));
    assert_eq!(csv.lines().count(), 2 + 800 + 1);
}

#[test]
fn missing_alpha3_is_a_validation_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled_source("fig6").unwrap().replace("alpha3 = 100.0\n", "");
    let file = write_scenario(dir.path(), "no_alpha3.toml", &text);
    let o = vaxdyn(&["control", "--scenario", &file]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("alpha3"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled_source("fig1a").unwrap().replace("[initial]", "[initial]\nR = 0.1");
    let file = write_scenario(dir.path(), "bad.toml", &text);
    let o = vaxdyn(&["report", "--scenario", &file]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains('R'));
}

#[test]
fn missing_scenario_exits_nonzero() {
    let o = vaxdyn(&["report", "--scenario", "fig99"]);
    assert!(!o.status.success());
}

fn tiny_sweep() -> String {
    format!(
        "{}\n[sweep]\nsigma2_sq = [0.15]\nsigma3_sq = [0.2]\nx0 = [0.8]\nn_per_cell = 1\n",
        bundled_source("fig2b").unwrap()
    )
}

#[test]
fn one_cell_sweep_writes_single_row_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(dir.path(), "tiny.toml", &tiny_sweep());
    let out = dir.path().join("o");
    let run = || {
        let o = vaxdyn(&["sweep", "--scenario", &file, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("absorption.csv")).unwrap()
    };
    let first = run();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "sigma2_sq,sigma3_sq,x0,n,p_hat,se");
    assert!(lines[2].starts_with("0.15,0.2,0.8,1,"));
    assert!(!out.join("absorption.partial").exists());

    fs::remove_file(out.join("absorption.csv")).unwrap();
    assert_eq!(run(), first);
}

#[test]
fn sweep_resumes_from_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = tiny_sweep().replace("x0 = [0.8]", "x0 = [0.2, 0.8]");
    let file = write_scenario(dir.path(), "two.toml", &text);
    let out = dir.path().join("o");
    let args = ["sweep", "--scenario", &file, "--out", out.to_str().unwrap()];
    assert!(vaxdyn(&args).status.success());
    let fresh = fs::read_to_string(out.join("absorption.csv")).unwrap();
    let head = fresh.lines().next().unwrap();

    // A planted row for cell 1 must be reused rather than recomputed.
    fs::remove_file(out.join("absorption.csv")).unwrap();
    fs::write(
        out.join("absorption.partial"),
        format!("{head}\n1;0.15,0.2,0.8,1,0.5,0.5\n"),
    )
    .unwrap();
    let o = vaxdyn(&args);
    assert!(o.status.success());
    assert!(stderr(&o).contains("resuming: 1 of 2"));
    let resumed = fs::read_to_string(out.join("absorption.csv")).unwrap();
    assert_eq!(resumed.lines().nth(2), fresh.lines().nth(2));
    assert_eq!(resumed.lines().nth(3), Some("0.15,0.2,0.8,1,0.5,0.5"));
}

#[test]
fn zero_cap_control_matches_uncontrolled_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = bundled_source("fig6")
        .unwrap()
        .replace("u_max = 0.8", "u_max = 0.0")
        .replace("n_eval_paths = 200", "n_eval_paths = 8")
        .replace("n_noise_paths = 32", "n_noise_paths = 4");
    let file = write_scenario(dir.path(), "capped.toml", &text);
    let out = dir.path().join("o");
    let o = vaxdyn(&[
        "control", "--scenario", &file, "--t-end", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(value(&text, "converged").split_whitespace().next(), Some("true"));
    assert_eq!(number(&text, "J(u*)"), number(&text, "J(0)"));
    assert_eq!(value(&text, "controlled_terminal"), value(&text, "baseline_terminal"));
    let u = fs::read_to_string(out.join("u_star.csv")).unwrap();
    let rows: Vec<&str> = u.lines().skip(2).collect();
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|r| r.ends_with(",0.0")));
    for name in ["controlled_path.csv", "trace.csv", "baseline_path.csv"] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# vaxdyn control seed=606 scenario={"));
    }
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_scenario(
        dir.path(),
        "t.toml",
        &tiny_sweep().replace("n_per_cell = 1", "n_per_cell = 6"),
    );
    let run = |threads: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = vaxdyn(&[
            "sweep", "--scenario", &file, "--threads", threads, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("absorption.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("4", "b"));
}
