use cv_arbiter_core::diagnostics::{
    better_prob, condition_scales, diagnose, loss_ratio_prob, rate_slope, DiagnoseOptions,
};
use cv_arbiter_core::harness::{reproduce_config, run_experiment, Scale};
use cv_arbiter_core::{ProcedureSpec, Scenario, SplitSchedule};

#[test]
fn quadratic_beats_line_on_case2() {
    let sc = Scenario::case(2).unwrap();
    let p = better_prob(&ProcedureSpec::polynomial(2), &ProcedureSpec::polynomial(1), &sc, 400, 100, 0.5, 1).unwrap();
    assert!(p >= 0.95, "{p}");
}

#[test]
fn two_parametric_fits_on_case1_are_close() {
    let sc = Scenario::case(1).unwrap();
    let p = better_prob(&ProcedureSpec::polynomial(1), &ProcedureSpec::polynomial(2), &sc, 400, 100, 0.01, 2).unwrap();
    assert!(p > 0.2 && p < 1.0, "{p}");
}

#[test]
fn spline_ratio_scale_on_case3() {
    let scales = condition_scales(&ProcedureSpec::spline(), &Scenario::case(3).unwrap(), 400, 100, 3).unwrap();
    assert!(scales.ratio_scale < 3.0, "{scales:?}");
    assert!(scales.sup_scale > 0.0);
}

#[test]
fn spline_loss_ratio_against_line_on_case3() {
    let sc = Scenario::case(3).unwrap();
    let p = loss_ratio_prob(
        &ProcedureSpec::spline(),
        &ProcedureSpec::polynomial(1),
        &sc,
        400,
        SplitSchedule::ratio(5, 5),
        100,
        1.0,
        4,
    )
    .unwrap();
    assert!(p >= 0.95, "{p}");
}

#[test]
fn spline_converges_slower_than_parametric_rate() {
    let slope =
        rate_slope(&ProcedureSpec::spline(), &Scenario::case(3).unwrap(), &[100, 200, 400, 800], 40, 5).unwrap();
    assert!(slope > -1.0 && slope < -0.2, "{slope}");
}

#[test]
fn report_has_one_entry_per_procedure() {
    let procs = ProcedureSpec::default_trio();
    let r = diagnose(&procs, &Scenario::case(3).unwrap(), 200, 50, 6, DiagnoseOptions::default()).unwrap();
    assert_eq!(r.norms.len(), 3);
    assert_eq!(r.better_prob.len(), 2);
    assert_eq!(r.loss_ratio_prob.len(), 2);
    for n in &r.norms {
        assert!(n.l2.estimate <= n.l4.estimate + 1e-12);
        // the sup norm is a grid maximum, so allow a hair of slack
        assert!(n.l4.estimate <= n.linf.estimate * 1.001, "{n:?}");
    }
}

#[test]
fn single_split_finds_the_spline_on_case3() {
    let mut c = reproduce_config(3, Scale::Desk).unwrap();
    c.n_grid = vec![400];
    c.schedules = vec!["ratio:9:1".into()];
    c.schemes = vec!["single".into()];
    let t = run_experiment(&c).unwrap();
    assert!(t.rows[0].counts[2] >= 90, "{:?}", t.rows[0].counts);
}
