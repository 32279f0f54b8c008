use super::*;
use crate::expr::Expr;
use crate::geometry::{BoundingBox, DomainSide, IntersectionPoint, SegmentSpec};

fn unit(n: usize) -> Grid {
    Grid::unmasked(0.0, 1.0, 0.0, 1.0, n, n).unwrap()
}

fn max_err(grid: &Grid, f: &GridField, exact: impl Fn(Point2) -> f64) -> f64 {
    (0..grid.len())
        .filter(|&k| f.valid[k])
        .map(|k| (f.values[k] - exact(grid.point(k))).abs())
        .fold(0.0, f64::max)
}

/// Box channel with a circular hole, the domain outside the circle.
fn channel() -> DomainSpec {
    let c = [(0.0, 0.0), (2.2, 0.0), (2.2, 0.41), (0.0, 0.41)].map(|(x, y)| Point2::new(x, y));
    let z = || Expr::Num(0.0);
    let line = |i: usize, j: usize| SegmentGeom::Line { a: c[i], b: c[j] };
    let segments = vec![
        SegmentSpec::dirichlet("1", line(3, 0), z()),
        SegmentSpec::dirichlet("2", line(0, 1), z()),
        SegmentSpec::neumann("3", line(1, 2), z()),
        SegmentSpec::dirichlet("4", line(2, 3), z()),
        SegmentSpec::dirichlet(
            "S",
            SegmentGeom::Circle {
                center: Point2::new(0.2, 0.2),
                radius: 0.05,
                domain_side: DomainSide::Outside,
            },
            z(),
        ),
    ];
    let points = ["A", "B", "C", "D"]
        .iter()
        .enumerate()
        .map(|(k, n)| IntersectionPoint {
            name: n.to_string(),
            point: c[k],
            segments: [k, (k + 1) % 4],
        })
        .collect();
    DomainSpec::new(BoundingBox::new(0.0, 2.2, 0.0, 0.41), segments, points).unwrap()
}

#[test]
fn node_coordinates_hit_box_edges_exactly() {
    let g = Grid::unmasked(0.0, 2.2, 0.0, 0.41, 221, 42).unwrap();
    assert_eq!(g.x(220), 2.2);
    assert_eq!(g.y(41), 0.41);
    assert_eq!(g.x(20), 0.2);
    assert_eq!(g.point(g.idx(3, 2)), Point2::new(g.x(3), g.y(2)));
}

#[test]
fn quadratics_are_reproduced_exactly() {
    let g = unit(11);
    let f = g.map(|p| p.x * p.x + 3.0 * p.x * p.y - p.y * p.y + 2.0);
    let (fx, fy) = fd_grad(&f, &g);
    assert!(max_err(&g, &fx, |p| 2.0 * p.x + 3.0 * p.y) < 1e-12);
    assert!(max_err(&g, &fy, |p| 3.0 * p.x - 2.0 * p.y) < 1e-12);
    let lap = fd_laplace(&f, &g);
    assert!(lap.valid.iter().all(|v| *v));
    assert!(max_err(&g, &lap, |_| 0.0) < 1e-9);
    let f2 = g.map(|p| p.x * p.x + p.y * p.y);
    assert!(max_err(&g, &fd_laplace(&f2, &g), |_| 4.0) < 1e-9);
    let mid = g.idx(5, 5);
    let f3 = g.map(|p| p.x * p.x);
    let (gx, _) = fd_grad(&f3, &g);
    assert!((gx.values[mid] - 1.0).abs() < 1e-14);
    assert!(gx.values[g.idx(0, 3)].abs() < 1e-14);
}

fn order(e1: f64, e2: f64) -> f64 {
    (e1 / e2).log2()
}

#[test]
fn second_order_convergence() {
    let run = |n: usize| {
        let g = unit(n);
        let f = g.map(|p| (std::f64::consts::PI * p.x).sin() * (2.0 * p.y).cos());
        let (fx, _) = fd_grad(&f, &g);
        let pi = std::f64::consts::PI;
        let ex = max_err(&g, &fx, |p| pi * (pi * p.x).cos() * (2.0 * p.y).cos());
        let lap = fd_laplace(&f, &g);
        let el = max_err(&g, &lap, |p| -(pi * pi + 4.0) * (pi * p.x).sin() * (2.0 * p.y).cos());
        (ex, el)
    };
    let (a1, b1) = run(21);
    let (a2, b2) = run(41);
    let (a3, b3) = run(81);
    for o in [order(a1, a2), order(a2, a3), order(b1, b2), order(b2, b3)] {
        assert!(o >= 1.9, "order {o}");
    }
}

#[test]
fn poisson_right_hand_side_is_matched() {
    let pi = std::f64::consts::PI;
    let err = |n: usize| {
        let g = unit(n);
        let u = g.map(|p| (pi * p.x).cos() * (pi * p.y).cos());
        let lap = fd_laplace(&u, &g);
        g.inside_nodes()
            .iter()
            .map(|&k| {
                let p = g.point(k);
                (-lap.values[k] - 2.0 * pi * pi * (pi * p.x).cos() * (pi * p.y).cos()).abs()
            })
            .fold(0.0, f64::max)
    };
    assert!(order(err(21), err(41)) > 1.9);
}

#[test]
fn div_of_grad_is_laplacian() {
    let g = unit(41);
    let f = g.map(|p| (p.x * 3.0).sin() * (p.y + 0.3).exp());
    let (fx, fy) = fd_grad(&f, &g);
    let d = fd_div(&fx, &fy, &g);
    let lap = fd_laplace(&f, &g);
    // One-sided stencils compose to first order at the edges; compare inside.
    let inner = |k: usize| {
        let (i, j) = (k % g.nx, k / g.nx);
        i >= 2 && j >= 2 && i + 3 <= g.nx && j + 3 <= g.ny
    };
    let diff = (0..g.len())
        .filter(|&k| d.valid[k] && inner(k))
        .map(|k| (d.values[k] - lap.values[k]).abs())
        .fold(0.0, f64::max);
    // Wide and compact stencils differ by O(h^2).
    assert!(diff < 0.1, "{diff}");
    let ops = FdOps::new(&g);
    let ones = vec![1.0; g.len()];
    let op = ops.div_a_grad(&g, &ones);
    let v = op.apply_vec(&f);
    for k in 0..g.len() {
        if op.is_valid(k) {
            assert!((v[k] - d.values[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn expanded_div_a_grad_is_second_order_up_to_the_boundary() {
    // a = 1 + x y, f = sin(x) cos(y) on the unit square.
    let mut errs = Vec::new();
    for n in [21, 41, 81] {
        let g = unit(n);
        let ops = FdOps::new(&g);
        let a = g.map(|p| 1.0 + p.x * p.y);
        let ax = g.map(|p| p.y);
        let ay = g.map(|p| p.x);
        let f = g.map(|p| p.x.sin() * p.y.cos());
        let want = g.map(|p| {
            let (s, c) = (p.x.sin() * p.y.cos(), p.x.cos() * p.y.cos());
            -2.0 * (1.0 + p.x * p.y) * s + p.y * c - p.x * p.x.sin() * p.y.sin()
        });
        let op = ops.div_a_grad_expanded(&a, &ax, &ay);
        let v = op.apply_vec(&f);
        let e = (0..g.len())
            .filter(|&k| op.is_valid(k))
            .map(|k| (v[k] - want[k]).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
    }
}

#[test]
fn transpose_matches_adjoint_identity() {
    let g = unit(9);
    let ops = FdOps::new(&g);
    let f: Vec<f64> = (0..g.len()).map(|k| ((k * 7 % 13) as f64).sin()).collect();
    let a: Vec<f64> = (0..g.len()).map(|k| ((k * 5 % 11) as f64).cos()).collect();
    let af = ops.laplace.apply_vec(&f);
    let mut at = vec![0.0; g.len()];
    ops.laplace.apply_transpose_add(&a, &mut at);
    let lhs: f64 = a.iter().zip(&af).map(|(x, y)| x * y).sum();
    let rhs: f64 = at.iter().zip(&f).map(|(x, y)| x * y).sum();
    assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
}

#[test]
fn normal_derivative_on_lines() {
    let dom = channel();
    let g = Grid::new(&dom, 221, 42).unwrap();
    let f = g.map(|p| p.y);
    let bottom = normal_derivative(&g, &dom, 1, 0).unwrap();
    assert!(!bottom.sites.is_empty());
    for v in bottom.apply(&f) {
        assert!((v + 1.0).abs() < 1e-10);
    }
    let c = vec![3.0; g.len()];
    let out = normal_derivative(&g, &dom, 2, 0).unwrap();
    assert!(out.apply(&c).iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn normal_derivative_on_circle_points_into_the_hole() {
    let dom = channel();
    let c = Point2::new(0.2, 0.2);
    let mut errs = Vec::new();
    for (nx, ny) in [(221, 42), (441, 83)] {
        let g = Grid::new(&dom, nx, ny).unwrap();
        let f = g.map(|p| p.dist(c));
        let nd = normal_derivative(&g, &dom, 4, 360).unwrap();
        let e = nd.apply(&f).iter().map(|v| (v + 1.0).abs()).fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(errs[1] < 0.05, "{errs:?}");
}

#[test]
fn channel_mask_excludes_the_cylinder() {
    let dom = channel();
    let g = Grid::new(&dom, 221, 42).unwrap();
    let center = g.idx(20, 20);
    assert_eq!(g.point(center), Point2::new(0.2, 0.2));
    assert_eq!(g.class(center), PointClass::Outside);
    assert_eq!(g.class(g.idx(0, 0)), PointClass::AtIntersection(0));
    assert_eq!(g.class(g.idx(5, 0)), PointClass::OnSegment(1));
    let ops = FdOps::new(&g);
    // Nodes next to the hole fall back to one-sided stencils or are dropped.
    let near = g.idx(14, 20);
    assert_eq!(g.class(near), PointClass::Inside);
    assert!(ops.dx.is_valid(near));
}

#[test]
fn sampler_is_exact_for_linear_fields() {
    let dom = channel();
    let g = Grid::new(&dom, 221, 42).unwrap();
    let f = g.map(|p| 2.0 * p.x - 3.0 * p.y + 1.0);
    for p in [Point2::new(0.713, 0.2), Point2::new(0.2, 0.2526), Point2::new(0.148, 0.2)] {
        let v = sample(&g, &f, p).unwrap();
        assert!((v - (2.0 * p.x - 3.0 * p.y + 1.0)).abs() < 1e-10, "{p:?}");
    }
}
