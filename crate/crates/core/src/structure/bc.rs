//! Boundary-row residuals on a grid: `b·u - g` for Dirichlet rows and
//! `∂(b·u)/∂n + c·u - h` for Robin rows, with their adjoints.

use super::{BcTerm, StructureError};
use crate::geometry::{DomainSpec, Point2, RowKind, SegmentGeom};
use crate::grid::stencil::SparseOp;
use crate::grid::{normal_derivative, Evaluation, Grid, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Dirichlet,
    Robin,
}

#[derive(Debug, Clone)]
enum Source {
    /// Grid nodes of a line segment.
    Nodes(Vec<usize>),
    /// Index of an extra point set compiled into the program.
    Points(usize),
}

/// Residual of one boundary row at its sites.
#[derive(Debug, Clone)]
pub struct BcResidual {
    pub term: BcTerm,
    pub kind: ResidualKind,
    pub sites: Vec<Point2>,
    source: Source,
    /// `coef[c][s]`: factor on `u_c` at site `s`.
    coef: Vec<Vec<f64>>,
    basis: Vec<f64>,
    normal: Option<SparseOp>,
    target: Vec<f64>,
}

impl BcResidual {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn site_values(&self, prog: &Program, ev: &Evaluation, c: usize) -> Vec<f64> {
        match &self.source {
            Source::Nodes(nodes) => {
                let u = prog.component(ev, c);
                nodes.iter().map(|&k| u[k]).collect()
            }
            Source::Points(set) => prog.point_component(ev, *set, c).to_vec(),
        }
    }

    /// Residual per site after a forward pass.
    pub fn eval(&self, prog: &Program, ev: &Evaluation) -> Vec<f64> {
        let mut r: Vec<f64> = self.target.iter().map(|t| -t).collect();
        for c in 0..self.coef.len() {
            let vals = self.site_values(prog, ev, c);
            for (s, v) in vals.iter().enumerate() {
                r[s] += self.coef[c][s] * v;
            }
            if let Some(op) = &self.normal {
                if self.basis[c] != 0.0 {
                    let d = op.apply_vec(prog.component(ev, c));
                    for (s, v) in d.iter().enumerate() {
                        r[s] += self.basis[c] * v;
                    }
                }
            }
        }
        r
    }

    /// Add `(∂r/∂u)ᵀ adj` into component seeds.
    pub fn backprop(&self, adj: &[f64], grid_seeds: &mut [Vec<f64>], point_seeds: &mut [Vec<Vec<f64>>]) {
        for c in 0..self.coef.len() {
            match &self.source {
                Source::Nodes(nodes) => {
                    for (s, &k) in nodes.iter().enumerate() {
                        grid_seeds[c][k] += self.coef[c][s] * adj[s];
                    }
                }
                Source::Points(set) => {
                    for (s, a) in adj.iter().enumerate() {
                        point_seeds[*set][c][s] += self.coef[c][s] * a;
                    }
                }
            }
            if let Some(op) = &self.normal {
                if self.basis[c] != 0.0 {
                    let scaled: Vec<f64> = adj.iter().map(|a| a * self.basis[c]).collect();
                    op.apply_transpose_add(&scaled, &mut grid_seeds[c]);
                }
            }
        }
    }
}

/// Residuals for a list of rows together with the point sets they need.
#[derive(Debug, Clone)]
pub struct BcSet {
    pub residuals: Vec<BcResidual>,
    pub point_sets: Vec<Vec<Point2>>,
    n_components: usize,
    grid_len: usize,
}

impl BcSet {
    /// Line rows are checked at the segment's grid nodes (corners excluded),
    /// circle rows at `circle_samples` points on the circle.
    pub fn new(
        dom: &DomainSpec,
        grid: &Grid,
        terms: &[BcTerm],
        circle_samples: usize,
    ) -> Result<BcSet, StructureError> {
        let n = dom.n_components();
        let mut point_sets: Vec<Vec<Point2>> = Vec::new();
        let mut circle_set: Vec<Option<usize>> = vec![None; dom.segments.len()];
        let mut residuals = Vec::new();
        for &term in terms {
            let seg = &dom.segments[term.segment];
            let row = &seg.rows[term.row];
            let (sites, source, normal) = match seg.geom {
                SegmentGeom::Line { .. } => {
                    let nodes = grid.segment_nodes(term.segment);
                    let sites: Vec<Point2> = nodes.iter().map(|&k| grid.point(k)).collect();
                    let normal = if row.is_robin() {
                        Some(normal_derivative(grid, dom, term.segment, 0)?.op)
                    } else {
                        None
                    };
                    (sites, Source::Nodes(nodes), normal)
                }
                SegmentGeom::Circle { .. } => {
                    let nd = normal_derivative(grid, dom, term.segment, circle_samples)?;
                    let set = match circle_set[term.segment] {
                        Some(s) => s,
                        None => {
                            point_sets.push(nd.sites.clone());
                            circle_set[term.segment] = Some(point_sets.len() - 1);
                            point_sets.len() - 1
                        }
                    };
                    let normal = row.is_robin().then_some(nd.op);
                    (nd.sites, Source::Points(set), normal)
                }
            };
            let eval = |e: &crate::expr::Expr| -> Result<Vec<f64>, StructureError> {
                sites
                    .iter()
                    .map(|p| e.eval_xy(p.x, p.y).map_err(StructureError::from))
                    .collect()
            };
            let (kind, coef, target) = match &row.kind {
                RowKind::Dirichlet { g } => (
                    ResidualKind::Dirichlet,
                    (0..n).map(|c| vec![row.basis[c]; sites.len()]).collect(),
                    eval(g)?,
                ),
                RowKind::Robin { c, h } => (
                    ResidualKind::Robin,
                    c.iter().map(&eval).collect::<Result<Vec<_>, _>>()?,
                    eval(h)?,
                ),
                RowKind::Free => continue,
            };
            residuals.push(BcResidual {
                term,
                kind,
                sites,
                source,
                coef,
                basis: row.basis.clone(),
                normal,
                target,
            });
        }
        Ok(BcSet {
            residuals,
            point_sets,
            n_components: n,
            grid_len: grid.len(),
        })
    }

    /// Zeroed seed buffers shaped for [`Program::backward`].
    pub fn zero_seeds(&self) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let grid = vec![vec![0.0; self.grid_len]; self.n_components];
        let points = self
            .point_sets
            .iter()
            .map(|s| vec![vec![0.0; s.len()]; self.n_components])
            .collect();
        (grid, points)
    }
}
