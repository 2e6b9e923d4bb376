use vaxdyn::estimators::{absorption_cell, absorption_sweep, SweepGrid, SweepSpec};
use vaxdyn::Scenario;

fn bistable_spec(seed: u64) -> SweepSpec {
    let s = Scenario::bundled("fig2b").unwrap();
    SweepSpec {
        base: s.params,
        initial: s.initial,
        grid: SweepGrid {
            sigma2_sq: vec![s.params.sigma2_sq],
            sigma3_sq: vec![s.params.sigma3_sq],
            x0: vec![0.5, 0.8],
        },
        n_per_cell: 200,
        t_end: s.integrator.t_end,
        dt: s.integrator.dt,
        scheme: s.integrator.scheme,
        clamp_epsilon: s.integrator.clamp_epsilon,
        master_seed: seed,
    }
}

#[test]
fn rerun_with_another_seed_lands_within_three_standard_errors() {
    let a = absorption_sweep(&bistable_spec(1)).unwrap();
    let b = absorption_sweep(&bistable_spec(2)).unwrap();
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert!(ca.error.is_none() && cb.error.is_none());
        let se = ca.se.max(cb.se).max(1.0 / ca.n as f64);
        assert!((ca.p_hat - cb.p_hat).abs() <= 3.0 * se * 2f64.sqrt(), "{ca:?} vs {cb:?}");
    }
}

#[test]
fn bistable_cell_mixes_both_outcomes() {
    let cell = absorption_cell(&bistable_spec(3), 1);
    assert_eq!(cell.x0, 0.8);
    assert!(cell.p_hat > 0.0 && cell.p_hat < 1.0, "{cell:?}");
    assert_eq!(cell.first_stream, 200);
}

#[test]
fn cells_do_not_depend_on_the_rest_of_the_grid() {
    let spec = bistable_spec(4);
    let whole = absorption_sweep(&spec).unwrap();
    let mut alone = spec.clone();
    alone.grid.x0 = vec![0.8];
    let single = absorption_cell(&alone, 0);
    // Cell 1 of the larger grid uses streams 200..400, the lone cell 0..200.
    assert_eq!(whole.cells[1].first_stream, 200);
    assert_eq!(single.first_stream, 0);
    let mut shifted = spec.clone();
    shifted.grid.x0 = vec![0.8, 0.5];
    let swapped = absorption_sweep(&shifted).unwrap();
    assert_eq!(swapped.cells[0].p_hat, single.p_hat);
}
