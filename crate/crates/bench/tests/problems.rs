use std::collections::BTreeSet;

use hardbc_bench::metrics::{
    compute_diagnostics, l2_error, sample_parameters, Cylinder, DELTA_P_REF, DRAG_REF, LIFT_REF,
};
use hardbc_bench::problem::{ProblemFile, Variant};
use hardbc_bench::BenchError;
use hardbc_core::expr::Var;
use hardbc_core::grid::Grid;
use hardbc_core::structure::BcMode;

fn slots(file: &ProblemFile, mode: BcMode) -> BTreeSet<String> {
    let p = file.instantiate(None).unwrap();
    p.structure(mode).unwrap().slots.into_iter().collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn shipped_specs_build_the_expected_slot_tables() {
    let darcy = ProblemFile::darcy();
    assert_eq!(slots(&darcy, BcMode::Glss), set(&["Psi", "Psi_C", "Psi_D", "Psi_E"]));
    assert_eq!(slots(&darcy, BcMode::Op).len(), 2);
    let ns = ProblemFile::navier_stokes();
    assert_eq!(slots(&ns, BcMode::Glss).len(), 10);
    assert_eq!(slots(&ns, BcMode::Op).len(), 6);
    for mode in BcMode::ALL {
        ProblemFile::poisson().instantiate(None).unwrap().structure(mode).unwrap();
    }
}

#[test]
fn darcy_parameters_are_substituted() {
    let p = ProblemFile::darcy().instantiate(Some((1.5, 2.5))).unwrap();
    assert_eq!(p.variant, Variant::Darcy { alpha: 1.5, beta: 2.5 });
    let u = p.reference[0].as_ref().unwrap();
    assert!(!u.depends_on(Var::Alpha) && !u.depends_on(Var::Beta));
    assert!((u.eval_xy(0.2, 0.3).unwrap() - (0.3f64).sin() * (0.75f64).cos()).abs() < 1e-15);
    for s in &p.domain.segments {
        for r in &s.rows {
            if let hardbc_core::geometry::RowKind::Robin { h, .. } = &r.kind {
                assert!(!h.depends_on(Var::Alpha) && !h.depends_on(Var::Beta));
            }
        }
    }
}

#[test]
fn spec_errors_report_their_line() {
    let text = "{\n  \"name\": \"x\",\n  \"problem\": { \"kind\": \"poisson\" },\n  \"corners\": { \"A\": [0.0] },\n}";
    match ProblemFile::parse(text) {
        Err(BenchError::Spec(msg)) => assert!(msg.contains("line 4"), "{msg}"),
        other => panic!("expected a spec error, got {other:?}"),
    }
}

#[test]
fn unknown_corners_and_bad_expressions_are_rejected() {
    let mut f = ProblemFile::darcy();
    f.segments[0].to = Some("Z".into());
    assert!(matches!(f.instantiate(None), Err(BenchError::Spec(_))));
    let text = hardbc_bench::problem::DARCY.replace("sin(alpha*x)\"", "sin(alpha*x\"");
    assert!(matches!(ProblemFile::parse(&text), Err(BenchError::Spec(_))));
}

#[test]
fn l2_error_examples() {
    let p = ProblemFile::poisson().instantiate(None).unwrap();
    let g = Grid::new(&p.domain, 11, 11).unwrap();
    let r = g.map(|q| 1.0 + q.x * q.y);
    assert_eq!(l2_error(&r, &r, &g).unwrap(), 0.0);
    let twice: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
    assert!((l2_error(&twice, &r, &g).unwrap() - 1.0).abs() < 1e-14);
    let noise: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
    let eps = 1e-3;
    let pert: Vec<f64> = r.iter().zip(&noise).map(|(a, n)| a + eps * n).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let want = eps * norm(&noise) / norm(&r);
    assert!((l2_error(&pert, &r, &g).unwrap() - want).abs() < 1e-12);
    assert!(matches!(l2_error(&r, &vec![0.0; g.len()], &g), Err(BenchError::ZeroReference)));
}

#[test]
fn parameter_sampling_is_seeded_and_in_range() {
    let a = sample_parameters(3, 7, 1.0, 4.0);
    assert_eq!(a, sample_parameters(3, 7, 1.0, 4.0));
    assert_ne!(a, sample_parameters(3, 8, 1.0, 4.0));
    for (x, y) in sample_parameters(500, 1, 1.0, 10.0) {
        assert!((1.0..10.0).contains(&x) && (1.0..10.0).contains(&y));
    }
}

fn ns_grid() -> Grid {
    let p = ProblemFile::navier_stokes().instantiate(None).unwrap();
    Grid::new(&p.domain, 221, 42).unwrap()
}

#[test]
fn rest_state_has_no_forces() {
    let g = ns_grid();
    let zero = vec![0.0; g.len()];
    let q = vec![2.0; g.len()];
    let d = compute_diagnostics(&zero, &zero, &q, &g, 0.001, Cylinder::default(), 360).unwrap();
    assert!(d.delta_p.abs() < 1e-14 && d.c_d.abs() < 1e-10 && d.c_l.abs() < 1e-10, "{d:?}");
}

#[test]
fn linear_pressure_gives_the_buoyancy_force() {
    // p = x: the pressure force on the disc is -pi r^2 along x.
    let g = ns_grid();
    let nu: f64 = 0.001;
    let zero = vec![0.0; g.len()];
    let q = g.map(|p| p.x / nu.sqrt());
    let cyl = Cylinder::default();
    let d = compute_diagnostics(&zero, &zero, &q, &g, nu, cyl, 360).unwrap();
    let scale = 2.0 / (cyl.u_mean * cyl.u_mean * 2.0 * cyl.radius);
    assert!((d.delta_p + 0.1).abs() < 1e-12, "{d:?}");
    assert!((d.c_d + scale * std::f64::consts::PI * 0.05 * 0.05).abs() < 1e-10, "{d:?}");
    assert!(d.c_l.abs() < 1e-10);
}

#[test]
fn shear_flow_drag_matches_the_stress_integral() {
    // u = y^2: shear stress 2 nu y, drag = 2 nu * integral y n_y ds = 2 nu pi r^2.
    let g = ns_grid();
    let nu = 0.001;
    let u = g.map(|p| p.y * p.y);
    let zero = vec![0.0; g.len()];
    let cyl = Cylinder::default();
    let d = compute_diagnostics(&u, &zero, &zero, &g, nu, cyl, 360).unwrap();
    let scale = 2.0 / (cyl.u_mean * cyl.u_mean * 2.0 * cyl.radius);
    assert!((d.c_d - scale * 2.0 * nu * std::f64::consts::PI * 0.05 * 0.05).abs() < 1e-10, "{d:?}");
}

#[test]
fn reference_diagnostics_are_the_benchmark_values() {
    let d = hardbc_bench::metrics::Diagnostics {
        delta_p: DELTA_P_REF,
        c_d: DRAG_REF,
        c_l: LIFT_REF,
    };
    assert_eq!(d.relative_errors(), [0.0; 3]);
}
