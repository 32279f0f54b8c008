//! Uniform grids over the bounding box, node masks and finite-difference calculus.

mod program;
pub mod stencil;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, GeometryError, Point2, PointClass, SegmentGeom};
pub use program::{Evaluation, Program, ProgramError, SlotSource};
use stencil::SparseOp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 nodes per direction, got {nx}x{ny}")]
    TooSmall { nx: usize, ny: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("segment `{0}` is neither axis-aligned nor a circle; no normal stencil")]
    UnalignedSegment(String),
    #[error("segment `{segment}`: not enough usable nodes along the normal at ({x}, {y})")]
    InsufficientNodes { segment: String, x: f64, y: f64 },
    #[error("cannot sample grid field at ({x}, {y})")]
    Unsampleable { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Uniform node grid over a box; node `(i, j)` has index `j * nx + i`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub hx: f64,
    pub hy: f64,
    mask: Vec<PointClass>,
}

impl Grid {
    /// Grid over the domain's bounding box with every node classified.
    pub fn new(dom: &DomainSpec, nx: usize, ny: usize) -> Result<Grid, GridError> {
        let b = dom.bbox;
        let mut g = Grid::unmasked(b.x0, b.x1, b.y0, b.y1, nx, ny)?;
        for k in 0..g.len() {
            g.mask[k] = dom.classify(g.point(k))?;
        }
        Ok(g)
    }

    /// Grid whose nodes are all treated as interior.
    pub fn unmasked(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Grid, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooSmall { nx, ny });
        }
        Ok(Grid {
            nx,
            ny,
            x0,
            x1,
            y0,
            y1,
            hx: (x1 - x0) / (nx - 1) as f64,
            hy: (y1 - y0) / (ny - 1) as f64,
            mask: vec![PointClass::Inside; nx * ny],
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        node_coord(self.x0, self.x1, i, self.nx)
    }

    pub fn y(&self, j: usize) -> f64 {
        node_coord(self.y0, self.y1, j, self.ny)
    }

    pub fn point(&self, idx: usize) -> Point2 {
        let (i, j) = self.ij(idx);
        Point2::new(self.x(i), self.y(j))
    }

    pub fn points(&self) -> Vec<Point2> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn class(&self, idx: usize) -> PointClass {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[PointClass] {
        &self.mask
    }

    /// Nodes that belong to the closed domain.
    pub fn usable(&self) -> Vec<bool> {
        self.mask
            .iter()
            .map(|c| !matches!(c, PointClass::Outside))
            .collect()
    }

    pub fn inside_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.mask[k] == PointClass::Inside)
            .collect()
    }

    pub fn segment_nodes(&self, seg: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.mask[k] == PointClass::OnSegment(seg))
            .collect()
    }

    /// Evaluate a pointwise function at every node.
    pub fn map<F: FnMut(Point2) -> f64>(&self, mut f: F) -> Vec<f64> {
        (0..self.len()).map(|k| f(self.point(k))).collect()
    }

    /// Minimum spacing.
    pub fn h(&self) -> f64 {
        self.hx.min(self.hy)
    }
}

/// Node coordinate, snapped to a 1e-12 lattice relative to the box so that
/// decimal breakpoints such as 0.2 come out exact.
fn node_coord(a: f64, b: f64, i: usize, n: usize) -> f64 {
    if i == 0 {
        return a;
    }
    if i + 1 == n {
        return b;
    }
    let v = a + (b - a) * i as f64 / (n - 1) as f64;
    let mag = (b - a).abs().max(a.abs()).max(b.abs());
    // Divide by an exact power of ten so the result is correctly rounded.
    let k = (12 - mag.log10().ceil() as i32).clamp(0, 15);
    let scale = 10f64.powi(k);
    let snapped = (v * scale).round() / scale;
    if (snapped - v).abs() <= 2.0 / scale {
        snapped
    } else {
        v
    }
}

/// Values on the grid together with the nodes where they are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl GridField {
    fn from_op(op: &SparseOp, f: &[f64]) -> GridField {
        GridField {
            values: op.apply_vec(f),
            valid: op.valid().to_vec(),
        }
    }
}

/// The standard masked operators of a grid.
#[derive(Debug, Clone)]
pub struct FdOps {
    pub dx: SparseOp,
    pub dy: SparseOp,
    pub dxx: SparseOp,
    pub dyy: SparseOp,
    pub laplace: SparseOp,
}

impl FdOps {
    pub fn new(grid: &Grid) -> FdOps {
        let usable = grid.usable();
        let dxx = stencil::second_derivative(grid, Axis::X, &usable);
        let dyy = stencil::second_derivative(grid, Axis::Y, &usable);
        FdOps {
            dx: stencil::first_derivative(grid, Axis::X, &usable),
            dy: stencil::first_derivative(grid, Axis::Y, &usable),
            laplace: stencil::add_ops(&dxx, &dyy),
            dxx,
            dyy,
        }
    }

    /// Operator for `div(a grad f)` given node values of `a`, composed from the
    /// first-derivative stencils.
    pub fn div_a_grad(&self, grid: &Grid, a: &[f64]) -> SparseOp {
        let ox = stencil::first_derivative(grid, Axis::X, self.dx.valid());
        let oy = stencil::first_derivative(grid, Axis::Y, self.dy.valid());
        let tx = stencil::compose(&ox, &scale_rows(&self.dx, a));
        let ty = stencil::compose(&oy, &scale_rows(&self.dy, a));
        stencil::add_ops(&tx, &ty)
    }

    /// `div(a grad f)` expanded as `a lap f + a_x f_x + a_y f_y`, given node
    /// values of `a` and its gradient. Unlike [`FdOps::div_a_grad`] it stays
    /// second order next to the mask boundary.
    pub fn div_a_grad_expanded(&self, a: &[f64], ax: &[f64], ay: &[f64]) -> SparseOp {
        let l = scale_rows(&self.laplace, a);
        let x = scale_rows(&self.dx, ax);
        let y = scale_rows(&self.dy, ay);
        stencil::add_ops(&stencil::add_ops(&l, &x), &y)
    }
}

fn scale_rows(op: &SparseOp, s: &[f64]) -> SparseOp {
    let mut out = SparseOp::new();
    for r in 0..op.n_rows() {
        if op.is_valid(r) {
            let e: Vec<(usize, f64)> = op.row(r).map(|(c, v)| (c, v * s[r])).collect();
            out.push_row(Some(&e));
        } else {
            out.push_row(None);
        }
    }
    out
}

/// Second-order gradient with one-sided stencils near the mask boundary.
pub fn fd_grad(f: &[f64], grid: &Grid) -> (GridField, GridField) {
    let usable = grid.usable();
    let dx = stencil::first_derivative(grid, Axis::X, &usable);
    let dy = stencil::first_derivative(grid, Axis::Y, &usable);
    (GridField::from_op(&dx, f), GridField::from_op(&dy, f))
}

pub fn fd_laplace(f: &[f64], grid: &Grid) -> GridField {
    GridField::from_op(&FdOps::new(grid).laplace, f)
}

/// Divergence of a vector field whose components are valid where flagged.
pub fn fd_div(fx: &GridField, fy: &GridField, grid: &Grid) -> GridField {
    let ox = stencil::first_derivative(grid, Axis::X, &fx.valid);
    let oy = stencil::first_derivative(grid, Axis::Y, &fy.valid);
    let a = GridField::from_op(&ox, &fx.values);
    let b = GridField::from_op(&oy, &fy.values);
    GridField {
        values: a.values.iter().zip(&b.values).map(|(p, q)| p + q).collect(),
        valid: a.valid.iter().zip(&b.valid).map(|(p, q)| *p && *q).collect(),
    }
}

/// Outward normal derivative at the sites of one segment, as a sparse operator
/// on node values.
#[derive(Debug, Clone)]
pub struct NormalDerivative {
    pub segment: usize,
    pub sites: Vec<Point2>,
    /// Grid node of each site, for line segments.
    pub nodes: Vec<Option<usize>>,
    pub op: SparseOp,
}

impl NormalDerivative {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.op.apply_vec(f)
    }
}

/// Build the outward normal derivative for segment `seg`. Lines must be
/// axis-aligned; circles are sampled at `circle_samples` points.
pub fn normal_derivative(
    grid: &Grid,
    dom: &DomainSpec,
    seg: usize,
    circle_samples: usize,
) -> Result<NormalDerivative, GridError> {
    let spec = &dom.segments[seg];
    let usable = grid.usable();
    let mut op = SparseOp::new();
    let mut sites = Vec::new();
    let mut nodes = Vec::new();
    match spec.geom {
        SegmentGeom::Line { a, .. } => {
            let (_, n) = spec.phi_bar(a)?;
            let (axis, step, h) = if n[1].abs() < 1e-12 && (n[0].abs() - 1.0).abs() < 1e-12 {
                (Axis::X, n[0].signum() as isize, grid.hx)
            } else if n[0].abs() < 1e-12 && (n[1].abs() - 1.0).abs() < 1e-12 {
                (Axis::Y, n[1].signum() as isize, grid.hy)
            } else {
                return Err(GridError::UnalignedSegment(spec.name.clone()));
            };
            for k in grid.segment_nodes(seg) {
                let (i, j) = grid.ij(k);
                let at = |m: isize| -> Option<usize> {
                    let (ii, jj) = match axis {
                        Axis::X => (i as isize + m * step, j as isize),
                        Axis::Y => (i as isize, j as isize + m * step),
                    };
                    if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.ny as isize {
                        return None;
                    }
                    let q = grid.idx(ii as usize, jj as usize);
                    usable[q].then_some(q)
                };
                let p = grid.point(k);
                let (Some(n1), Some(n2)) = (at(1), at(2)) else {
                    return Err(GridError::InsufficientNodes {
                        segment: spec.name.clone(),
                        x: p.x,
                        y: p.y,
                    });
                };
                // d/dn = -d/dnu with nu the inward normal.
                op.push_row(Some(&[(k, 1.5 / h), (n1, -2.0 / h), (n2, 0.5 / h)]));
                sites.push(p);
                nodes.push(Some(k));
            }
        }
        SegmentGeom::Circle { .. } => {
            let d = grid.h();
            for s in 0..circle_samples {
                let p = spec.geom.point_at(s as f64 / circle_samples as f64);
                let (_, nu) = spec.phi_bar(p)?;
                let q = |m: f64| Point2::new(p.x + m * d * nu[0], p.y + m * d * nu[1]);
                let mut row: Vec<(usize, f64)> = Vec::new();
                for (m, c) in [(0.0, 1.5 / d), (1.0, -2.0 / d), (2.0, 0.5 / d)] {
                    let pt = q(m);
                    let w = sample_weights(grid, &usable, pt)
                        .ok_or(GridError::Unsampleable { x: pt.x, y: pt.y })?;
                    row.extend(w.into_iter().map(|(k, v)| (k, c * v)));
                }
                op.push_row(Some(&row));
                sites.push(p);
                nodes.push(None);
            }
        }
    }
    Ok(NormalDerivative {
        segment: seg,
        sites,
        nodes,
        op,
    })
}

/// Interpolation weights for the value at `p`: a least-squares quadratic
/// through the usable nodes of the surrounding 4x4 block (6x6 when too few
/// are usable). Reproduces quadratics exactly.
pub fn sample_weights(grid: &Grid, usable: &[bool], p: Point2) -> Option<Vec<(usize, f64)>> {
    let fx = (p.x - grid.x0) / grid.hx;
    let fy = (p.y - grid.y0) / grid.hy;
    let (mx, my) = ((grid.nx - 1) as f64, (grid.ny - 1) as f64);
    if !(fx >= -1e-9 && fy >= -1e-9 && fx <= mx + 1e-9 && fy <= my + 1e-9) {
        return None;
    }
    let i = (fx.floor().max(0.0) as usize).min(grid.nx - 2);
    let j = (fy.floor().max(0.0) as usize).min(grid.ny - 2);
    for reach in [1usize, 2] {
        let mut pts = Vec::new();
        for jj in j.saturating_sub(reach)..=(j + 1 + reach).min(grid.ny - 1) {
            for ii in i.saturating_sub(reach)..=(i + 1 + reach).min(grid.nx - 1) {
                let k = grid.idx(ii, jj);
                if usable[k] {
                    let q = grid.point(k);
                    pts.push((k, (q.x - p.x) / grid.hx, (q.y - p.y) / grid.hy));
                }
            }
        }
        if pts.len() < 8 {
            continue;
        }
        let basis = |dx: f64, dy: f64| [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
        let mut m = vec![vec![0.0f64; 6]; 6];
        for &(_, dx, dy) in &pts {
            let a = basis(dx, dy);
            for r in 0..6 {
                for c in 0..6 {
                    m[r][c] += a[r] * a[c];
                }
            }
        }
        let Some(inv) = invert(&m) else {
            continue;
        };
        // Value at p is the constant coefficient: row 0 of (AᵀA)⁻¹Aᵀ.
        return Some(
            pts.iter()
                .map(|&(k, dx, dy)| {
                    let a = basis(dx, dy);
                    (k, (0..6).map(|c| inv[0][c] * a[c]).sum())
                })
                .collect(),
        );
    }
    None
}

/// Inverse of a small square matrix by Gauss-Jordan with partial pivoting;
/// `None` when (numerically) singular.
pub(crate) fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale.max(1e-300) {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Sample a node field at an arbitrary point.
pub fn sample(grid: &Grid, f: &[f64], p: Point2) -> Result<f64, GridError> {
    let usable = grid.usable();
    sample_weights(grid, &usable, p)
        .map(|w| w.iter().map(|(k, v)| v * f[*k]).sum())
        .ok_or(GridError::Unsampleable { x: p.x, y: p.y })
}

#[cfg(test)]
mod tests;
