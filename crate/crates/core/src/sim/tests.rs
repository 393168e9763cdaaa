use tempfile::tempdir;

use super::csv::csv_string;
use super::*;
use crate::clf::ErrorCoords;

fn assert_log_well_formed(log: &TrajectoryLog) {
    assert!(!log.rows.is_empty());
    let mut prev_t = f64::NEG_INFINITY;
    for r in &log.rows {
        assert!(r.t > prev_t, "t must increase strictly");
        prev_t = r.t;
        let values = [
            r.t,
            r.x,
            r.y,
            r.theta,
            r.v,
            r.omega,
            r.rho,
            r.alpha,
            r.psi,
            r.z,
            r.omega_err,
            r.v_lyap,
            r.w_lyap,
            r.h,
            r.h0,
            r.u_v,
            r.u_omega,
            r.tau_l,
            r.tau_r,
            r.f1_residual,
            r.f2_residual,
        ];
        assert!(values.iter().all(|v| v.is_finite()), "non-finite row at t = {}", r.t);
    }
}

#[test]
fn experiment_scenario_converges_safely() {
    let sc = Scenario::paper_exp();
    let log = run(&sc, Controller::ClfCbfQp).unwrap();
    assert_log_well_formed(&log);

    let last = log.last().unwrap();
    assert!(last.rho < sc.rho_stop, "did not park: rho = {}", last.rho);
    assert!(last.z.hypot(last.omega_err) < 1e-3 || last.rho < 1e-4);
    assert!(
        last.t > 8.0 && last.t < 16.0,
        "parking time {} outside the expected window",
        last.t
    );
    assert_eq!((last.u_v, last.u_omega), (0.0, 0.0));
    assert_eq!((last.tau_l, last.tau_r), (0.0, 0.0));

    assert!(log.min_h() > 0.2, "barrier margin too small: {}", log.min_h());
    let o = &sc.obstacles[0];
    assert!(log.min_distance_to(o.cx, o.cy) > o.radius);

    for pair in log.rows.windows(2) {
        assert!(
            (pair[1].psi - pair[0].psi).abs() < std::f64::consts::PI,
            "psi jumped across a branch cut at t = {}",
            pair[1].t
        );
    }
}

#[test]
fn runs_are_bit_identical() {
    let sc = Scenario::paper_exp();
    let a = run(&sc, Controller::ClfCbfQp).unwrap();
    let b = run(&sc, Controller::ClfCbfQp).unwrap();
    assert_eq!(a, b);
    assert_eq!(csv_string(&a), csv_string(&b));
}

#[test]
fn filtered_run_never_enters_obstacle() {
    let sc = Scenario::paper_sim();
    let log = run(&sc, Controller::ClfCbfQp).unwrap();
    assert_log_well_formed(&log);
    assert!(log.min_h() >= 0.0, "barrier violated: min h = {}", log.min_h());
    let o = &sc.obstacles[0];
    assert!(
        log.min_distance_to(o.cx, o.cy) >= o.radius,
        "entered the obstacle disk"
    );
}

#[test]
fn lyapunov_column_recomputes_from_state() {
    let sc = Scenario::paper_exp();
    let log = run(&sc, Controller::ClfCbfQp).unwrap();
    let mut prev_psi = None;
    for r in &log.rows {
        let state = CartesianState { x: r.x, y: r.y, theta: r.theta, v: r.v, omega: r.omega };
        let pose = polar_pose(&state, prev_psi).unwrap();
        prev_psi = Some(pose.psi);
        assert_eq!((pose.rho, pose.alpha, pose.psi), (r.rho, r.alpha, r.psi));
        let err = error_coords(&state, &pose, &sc.gains).unwrap();
        assert_eq!((err.z, err.omega_err), (r.z, r.omega_err));
        let v = lyapunov(&pose, &err, &sc.gains).v_total;
        assert!(
            (v - r.v_lyap).abs() <= 1e-10 * v.abs().max(1.0),
            "V mismatch at t = {}",
            r.t
        );
    }
}

#[test]
fn clf_qp_idles_exactly_on_negative_rows() {
    let sc = Scenario::paper_sim();
    let log = run(&sc, Controller::ClfQp).unwrap();
    assert_log_well_formed(&log);

    let mut active = 0usize;
    for r in &log.rows[..log.rows.len() - 1] {
        let state = CartesianState { x: r.x, y: r.y, theta: r.theta, v: r.v, omega: r.omega };
        let pose = PolarPose { rho: r.rho, alpha: r.alpha, psi: r.psi };
        let err = ErrorCoords { z: r.z, omega_err: r.omega_err };
        let (a1, b1) = clf_terms(&state, &pose, &err, &sc.gains).unwrap();
        let u = [r.u_v / r.rho, r.u_omega];
        if a1 < 0.0 {
            assert_eq!(u, [0.0, 0.0], "input must vanish on an inactive row, t = {}", r.t);
            assert_eq!(r.region, Region::BothInactive);
        } else {
            active += 1;
            assert_eq!(r.region, Region::ClfActive);
            let cross = u[0] * b1[1] - u[1] * b1[0];
            let norm = (u[0].hypot(u[1])) * (b1[0].hypot(b1[1]));
            assert!(cross.abs() <= 1e-9 * norm.max(1.0), "input left span(b1) at t = {}", r.t);
            assert!(r.f1_residual <= 1e-9 * gamma_f(a1, sc.qp.gamma).abs().max(1.0));
        }
    }
    assert!(active > 0, "the CLF row never activated");
}

#[test]
fn nominal_law_keeps_its_row_but_not_safety() {
    let sc = Scenario::paper_sim();
    let log = run(&sc, Controller::Nominal).unwrap();
    assert_log_well_formed(&log);

    for r in &log.rows[..log.rows.len() - 1] {
        let state = CartesianState { x: r.x, y: r.y, theta: r.theta, v: r.v, omega: r.omega };
        let pose = PolarPose { rho: r.rho, alpha: r.alpha, psi: r.psi };
        let err = ErrorCoords { z: r.z, omega_err: r.omega_err };
        let (a1, _) = clf_terms(&state, &pose, &err, &sc.gains).unwrap();
        assert!(
            r.f1_residual <= 1e-9 * a1.abs().max(1.0),
            "nominal law violated its CLF row at t = {}: {}",
            r.t,
            r.f1_residual
        );
    }
    assert!(log.min_h() < 0.0, "expected the unfiltered law to cut through the obstacle");
}

#[test]
fn filter_without_obstacles_matches_clf_qp() {
    let mut sc = Scenario::paper_sim();
    sc.obstacles.clear();
    let plain = run(&sc, Controller::ClfQp).unwrap();
    let filtered = run(&sc, Controller::ClfCbfQp).unwrap();
    assert_eq!(plain, filtered);
    assert!(filtered.rows.iter().all(|r| r.h == 0.0 && r.h0 == 0.0 && r.f2_residual == 0.0));
}

#[test]
fn csv_round_trips_bit_exactly() {
    let mut sc = Scenario::paper_exp();
    sc.t_max = 0.05;
    let log = run(&sc, Controller::ClfCbfQp).unwrap();
    assert_eq!(log.len(), 51);

    let dir = tempdir().unwrap();
    let path = dir.path().join("run.csv");
    export_csv(&log, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(parse_csv(&path).unwrap(), log);
}

#[test]
fn empty_log_exports_header_only() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    export_csv(&TrajectoryLog::default(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
    assert_eq!(parse_csv(&path).unwrap(), TrajectoryLog::default());
}

#[test]
fn csv_parse_errors_carry_location() {
    let dir = tempdir().unwrap();

    let bad_header = dir.path().join("bad_header.csv");
    std::fs::write(&bad_header, "a,b,c\n").unwrap();
    match parse_csv(&bad_header) {
        Err(SimError::Csv { line: 1, .. }) => {}
        other => panic!("expected a header error, got {other:?}"),
    }

    let bad_field = dir.path().join("bad_field.csv");
    let mut text = format!("{CSV_HEADER}\n");
    text.push_str(&"0,".repeat(19));
    text.push_str("both-inactive,0,oops\n");
    std::fs::write(&bad_field, text).unwrap();
    match parse_csv(&bad_field) {
        Err(SimError::Csv { line: 2, message, .. }) => {
            assert!(message.contains("field 22"), "message was {message:?}");
        }
        other => panic!("expected a field error, got {other:?}"),
    }

    let short_row = dir.path().join("short_row.csv");
    std::fs::write(&short_row, format!("{CSV_HEADER}\n1,2,3\n")).unwrap();
    match parse_csv(&short_row) {
        Err(SimError::Csv { line: 2, message, .. }) => {
            assert!(message.contains("expected 22 fields"));
        }
        other => panic!("expected a field-count error, got {other:?}"),
    }
}

fn assert_balanced_xml(text: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let close = rest[open..].find('>').expect("unterminated tag") + open;
        let tag = &rest[open + 1..close];
        rest = &rest[close + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(name), "mismatched closing tag");
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().unwrap().to_string();
            stack.push(name);
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

#[test]
fn svg_export_draws_scene_and_series() {
    let mut sc = Scenario::paper_exp();
    sc.t_max = 0.2;
    let filtered = run(&sc, Controller::ClfCbfQp).unwrap();
    let nominal = run(&sc, Controller::Nominal).unwrap();

    let dir = tempdir().unwrap();
    let path = dir.path().join("plot.svg");
    export_svg(&[("clf-cbf-qp", &filtered), ("nominal", &nominal)], &sc, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();

    assert!(text.starts_with("<svg"));
    assert!(text.trim_end().ends_with("</svg>"));
    assert_balanced_xml(&text);
    assert!(text.contains("cx=\"-0.6\" cy=\"0.4\" r=\"0.2\""), "obstacle attrs missing");
    assert!(text.contains(">start<") && text.contains(">goal<"));
    assert!(text.contains(">clf-cbf-qp<") && text.contains(">nominal<"));
    assert!(text.contains("#1f77b4") && text.contains("#d62728"));
    assert!(text.contains(">rho<") && text.contains(">alpha<") && text.contains(">psi<"));
}

#[test]
fn unsafe_start_is_rejected() {
    let mut sc = Scenario::paper_sim();
    sc.init.x = -2.0;
    sc.init.y = 0.0;
    match run(&sc, Controller::ClfCbfQp) {
        Err(SimError::UnsafeStart { h, cx, cy }) => {
            assert!(h < 0.0);
            assert_eq!((cx, cy), (-2.0, 0.0));
        }
        other => panic!("expected an unsafe-start error, got {other:?}"),
    }
}

#[test]
fn controller_names_round_trip() {
    for c in [Controller::Nominal, Controller::ClfQp, Controller::ClfCbfQp] {
        assert_eq!(c.to_string().parse::<Controller>().unwrap(), c);
    }
    let err = "pid".parse::<Controller>().unwrap_err();
    assert!(err.contains("unknown controller"));
}

#[test]
fn verify_clf_passes_and_detects_tampering() {
    let report = verify_clf(&Scenario::paper_sim().gains, 2000, 42);
    assert!(report.all_pass(), "{report}");
    assert_eq!(report.checks.len(), 6);

    let (mut p, _, _) = crate::clf::p_matrix(&Scenario::paper_sim().gains);
    p.p12 += 0.1;
    let tampered = verify_clf_with_matrix(&Scenario::paper_sim().gains, 200, 42, &p);
    assert!(!tampered.all_pass());
    assert!(tampered
        .checks
        .iter()
        .any(|c| c.name == "lyapunov-equation" && !c.pass));
}

#[test]
fn verify_clf_holds_for_adversarial_gains() {
    let gains = crate::clf::Gains {
        lambda: 1.0,
        k_rho: 0.1,
        k_alpha: 0.1,
        k_z: 0.1,
        k_omega: 0.1,
        mu: 0.05,
        epsilon: 0.025,
    };
    let report = verify_clf(&gains, 2000, 7);
    assert!(report.all_pass(), "{report}");
}

#[test]
fn verify_qp_passes() {
    let report = verify_qp(2000, 42);
    assert!(report.all_pass(), "{report}");
    assert_eq!(report.checks.len(), 5);
    let text = report.to_string();
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("qp.oracle-agreement pass"));
}

#[test]
fn reports_are_deterministic_and_schedule_independent() {
    let qa = verify_qp(500, 9);
    let qb = verify_qp(500, 9);
    for (ca, cb) in qa.checks.iter().zip(&qb.checks) {
        assert_eq!(ca.worst, cb.worst);
    }

    let a = verify_clf(&Scenario::paper_sim().gains, 500, 9);
    let b = verify_clf(&Scenario::paper_sim().gains, 1500, 9);
    let worst = |r: &ClfReport, name: &str| {
        r.checks.iter().find(|c| c.name == name).unwrap().worst
    };
    assert_eq!(worst(&a, "lyapunov-equation"), worst(&b, "lyapunov-equation"));
    assert!(
        worst(&b, "positive-definiteness") <= worst(&a, "positive-definiteness"),
        "the first 500 draws must be a prefix of the 1500-draw run"
    );
    assert!(worst(&b, "w-bound") >= worst(&a, "w-bound"));
}
