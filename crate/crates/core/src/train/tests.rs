use std::sync::Arc;

use super::*;
use crate::expr::parse;
use crate::geometry::{BoundingBox, DomainSpec, IntersectionPoint, Point2, SegmentGeom, SegmentSpec};
use crate::grid::{FdOps, Grid};
use crate::structure::{build, BcMode, BuildOptions};

// u = x + y^2 on the unit square: Dirichlet bottom and left, Neumann right,
// Robin top. -Δu = -2.
fn square() -> Arc<DomainSpec> {
    let p = Point2::new;
    let line = |a: Point2, b: Point2| SegmentGeom::Line { a, b };
    let e = |s: &str| parse(s).unwrap();
    let segments = vec![
        SegmentSpec::dirichlet("bottom", line(p(0., 0.), p(1., 0.)), e("x")),
        SegmentSpec::neumann("right", line(p(1., 0.), p(1., 1.)), e("1")),
        SegmentSpec::robin("top", line(p(1., 1.), p(0., 1.)), e("1"), e("x + 3")),
        SegmentSpec::dirichlet("left", line(p(0., 1.), p(0., 0.)), e("y^2")),
    ];
    let corner = |name: &str, x, y, s: [usize; 2]| IntersectionPoint {
        name: name.into(),
        point: p(x, y),
        segments: s,
    };
    let points = vec![
        corner("A", 0., 0., [3, 0]),
        corner("B", 1., 0., [0, 1]),
        corner("C", 1., 1., [1, 2]),
        corner("D", 0., 1., [2, 3]),
    ];
    Arc::new(DomainSpec::new(BoundingBox::new(0., 1., 0., 1.), segments, points).unwrap())
}

fn trainer(mode: BcMode, n: usize, cfg: TrainConfig) -> Trainer<LinearPhysics> {
    let dom = square();
    let ss = Arc::new(build(&dom, mode, &BuildOptions::default()).unwrap());
    let grid = Grid::new(&dom, n, n).unwrap();
    let ops = FdOps::new(&grid);
    let mut op = ops.laplace.clone();
    op.scale(-1.0);
    let rhs = vec![-2.0; grid.len()];
    let phys = LinearPhysics::new(op, rhs, &grid, 0, 1);
    let exact = grid.map(|q| q.x + q.y * q.y);
    let nodes = grid.inside_nodes();
    Trainer::new(ss, &grid, phys, cfg).unwrap().with_reference(vec![exact], nodes)
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr0: 0.005,
        milestone: 100,
        hidden: vec![16; 3],
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn gradients_match_central_differences() {
    for mode in [BcMode::Glss, BcMode::Op, BcMode::SemiWeak, BcMode::Weak] {
        let mut t = trainer(mode, 21, small_cfg(0));
        let checks = gradient_check(&mut t, 24, 1e-5, 11).unwrap();
        assert!(checks.len() >= 20);
        for c in &checks {
            assert!(c.rel_err <= 1e-4, "{mode}: {c:?}");
        }
    }
}

#[test]
fn training_reduces_loss_and_error() {
    let mut t = trainer(BcMode::Glss, 21, small_cfg(150));
    let rep = t.train().unwrap();
    let first = &rep.rows[0];
    let last = rep.last().unwrap();
    assert!(last.loss_total < 0.1 * first.loss_total, "{} -> {}", first.loss_total, last.loss_total);
    assert!(t.errors()[0] < first.err_l2[0]);
}

#[test]
fn exact_modes_keep_dirichlet_data_during_training() {
    let mut t = trainer(BcMode::Glss, 21, small_cfg(20));
    t.train().unwrap();
    let u = &t.components()[0];
    let dom = square();
    let grid = Grid::new(&dom, 21, 21).unwrap();
    for k in grid.segment_nodes(0).into_iter().chain(grid.segment_nodes(3)) {
        let q = grid.point(k);
        let g = if k == grid.idx(0, 0) || q.y == 0.0 { q.x } else { q.y * q.y };
        assert!((u[k] - g).abs() < 1e-12, "{q:?}: {} vs {g}", u[k]);
    }
}

#[test]
fn runs_are_reproducible() {
    let a = trainer(BcMode::Op, 17, small_cfg(15)).train().unwrap();
    let b = trainer(BcMode::Op, 17, small_cfg(15)).train().unwrap();
    assert_eq!(a, b);
}

#[test]
fn divergence_is_reported() {
    let mut cfg = small_cfg(50);
    cfg.lr0 = 1e6;
    cfg.milestone = 0;
    let mut t = trainer(BcMode::Weak, 17, cfg);
    match t.train() {
        Err(TrainError::Diverged { epoch, report, .. }) => assert_eq!(report.rows.len(), epoch + 1),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.rows.len())),
    }
}

#[test]
fn checkpoints_round_trip() {
    let mut t = trainer(BcMode::Glss, 17, small_cfg(5));
    t.train().unwrap();
    let fp = t.structure.fingerprint();
    let dir = std::env::temp_dir().join(format!("hardbc-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &t.mlp, 3, 5, &fp).unwrap();
    let (h, m) = load_checkpoint(&path, Some(&fp)).unwrap();
    assert_eq!(h.epoch, 5);
    assert_eq!(m, t.mlp);
    assert!(matches!(load_checkpoint(&path, Some("other")), Err(TrainError::Checkpoint(_))));
    let before = t.components();
    t.set_mlp(m).unwrap();
    t.evaluate(false).unwrap();
    assert_eq!(before, t.components());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn relative_l2_ignores_other_nodes() {
    let r = relative_l2(&[1.0, 2.0, 9.0], &[1.0, 1.0, 0.0], &[0, 1]).unwrap();
    assert!((r - (0.5f64).sqrt()).abs() < 1e-15);
    assert!(relative_l2(&[1.0], &[0.0], &[0]).is_none());
}

#[test]
fn modulo_constant_error_ignores_offsets() {
    let r = [1.0, -1.0, 2.0];
    let shifted: Vec<f64> = r.iter().map(|v| v + 5.0).collect();
    assert!(relative_l2_mod_const(&shifted, &r, &[0, 1, 2]).unwrap() < 1e-15);
    assert!(relative_l2(&shifted, &r, &[0, 1, 2]).unwrap() > 1.0);
}
