//! Error metrics, parameter sampling and flow diagnostics.

use std::f64::consts::PI;
use std::path::Path;

use hardbc_core::geometry::{Point2, PointClass};
use hardbc_core::grid::{fd_grad, sample_weights, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::BenchError;

/// Nodes where errors are measured: inside and on the boundary.
pub fn error_nodes(grid: &Grid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| grid.class(k) != PointClass::Outside)
        .collect()
}

/// Relative discrete l2 error over inside and boundary nodes.
pub fn l2_error(pred: &[f64], reference: &[f64], grid: &Grid) -> Result<f64, BenchError> {
    hardbc_core::train::relative_l2(pred, reference, &error_nodes(grid)).ok_or(BenchError::ZeroReference)
}

/// `n` pairs drawn uniformly from `[lo, hi)²`.
pub fn sample_parameters(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(lo..hi), rng.gen_range(lo..hi)))
        .collect()
}

/// Reference values for the stationary cylinder benchmark at Re = 20.
pub const DELTA_P_REF: f64 = 0.1175;
pub const DRAG_REF: f64 = 5.5795;
pub const LIFT_REF: f64 = 0.0106;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub delta_p: f64,
    pub c_d: f64,
    pub c_l: f64,
}

impl Diagnostics {
    /// Relative errors against the benchmark reference values.
    pub fn relative_errors(&self) -> [f64; 3] {
        [
            (self.delta_p - DELTA_P_REF).abs() / DELTA_P_REF,
            (self.c_d - DRAG_REF).abs() / DRAG_REF,
            (self.c_l - LIFT_REF).abs() / LIFT_REF,
        ]
    }
}

/// Cylinder geometry and flow scales of the benchmark.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder {
    pub center: Point2,
    pub radius: f64,
    pub u_mean: f64,
}

impl Default for Cylinder {
    fn default() -> Self {
        Cylinder {
            center: Point2::new(0.2, 0.2),
            radius: 0.05,
            u_mean: 0.2,
        }
    }
}

/// Pressure drop between the front and back of the cylinder, and drag and
/// lift coefficients from the stress integral over `samples` points on the
/// circle. `q` is the rescaled pressure, `p = sqrt(nu) q`.
pub fn compute_diagnostics(
    u: &[f64],
    v: &[f64],
    q: &[f64],
    grid: &Grid,
    nu: f64,
    cyl: Cylinder,
    samples: usize,
) -> Result<Diagnostics, BenchError> {
    let s = nu.sqrt();
    let usable = grid.usable();
    let at = |f: &[f64], mask: &[bool], p: Point2| -> Result<f64, BenchError> {
        let w = sample_weights(grid, mask, p).ok_or(BenchError::Probe { x: p.x, y: p.y })?;
        Ok(w.iter().map(|(k, c)| c * f[*k]).sum())
    };
    let front = Point2::new(cyl.center.x - cyl.radius, cyl.center.y);
    let back = Point2::new(cyl.center.x + cyl.radius, cyl.center.y);
    let delta_p = s * (at(q, &usable, front)? - at(q, &usable, back)?);

    let (ux, uy) = fd_grad(u, grid);
    let (vx, vy) = fd_grad(v, grid);
    let mask: Vec<bool> = (0..grid.len())
        .map(|k| usable[k] && ux.valid[k] && uy.valid[k] && vx.valid[k] && vy.valid[k])
        .collect();
    let ds = 2.0 * PI * cyl.radius / samples as f64;
    let (mut fx, mut fy) = (0.0, 0.0);
    for k in 0..samples {
        let t = 2.0 * PI * k as f64 / samples as f64;
        // Normal pointing out of the body into the fluid.
        let n = [t.cos(), t.sin()];
        let p = Point2::new(cyl.center.x + cyl.radius * n[0], cyl.center.y + cyl.radius * n[1]);
        let pr = s * at(q, &usable, p)?;
        let (a, b, c, d) = (
            at(&ux.values, &mask, p)?,
            at(&uy.values, &mask, p)?,
            at(&vx.values, &mask, p)?,
            at(&vy.values, &mask, p)?,
        );
        let sxx = -pr + 2.0 * nu * a;
        let syy = -pr + 2.0 * nu * d;
        let sxy = nu * (b + c);
        fx += (sxx * n[0] + sxy * n[1]) * ds;
        fy += (sxy * n[0] + syy * n[1]) * ds;
    }
    let scale = 2.0 / (cyl.u_mean * cyl.u_mean * 2.0 * cyl.radius);
    Ok(Diagnostics {
        delta_p,
        c_d: scale * fx,
        c_l: scale * fy,
    })
}

/// Reference fields from a CSV with columns `x, y` and one column per
/// component. Nodes without a row are NaN.
pub fn load_reference_csv(path: &Path, grid: &Grid, components: &[String]) -> Result<Vec<Vec<f64>>, BenchError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| BenchError::Spec(format!("{}: missing column `{name}`", path.display())))
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let cols: Vec<usize> = components.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let mut out = vec![vec![f64::NAN; grid.len()]; components.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64, BenchError> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| BenchError::Spec(format!("{}: bad number on line {}", path.display(), line + 2)))
        };
        let (x, y) = (num(cx)?, num(cy)?);
        let i = ((x - grid.x0) / grid.hx).round();
        let j = ((y - grid.y0) / grid.hy).round();
        if i < 0.0 || j < 0.0 || i >= grid.nx as f64 || j >= grid.ny as f64 {
            continue;
        }
        let k = grid.idx(i as usize, j as usize);
        let p = grid.point(k);
        if (p.x - x).abs() > 1e-6 * grid.hx.max(1.0) || (p.y - y).abs() > 1e-6 * grid.hy.max(1.0) {
            continue;
        }
        for (o, &c) in out.iter_mut().zip(&cols) {
            o[k] = num(c)?;
        }
    }
    Ok(out)
}
