//! Randomized check that a structure satisfies its boundary conditions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bc::{BcSet, ResidualKind};
use super::{weight_value, BcTerm, SolutionStructure, StructureError};
use crate::geometry::{DomainSpec, Point2, SegmentGeom};
use crate::grid::{normal_derivative, Grid, Program};

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub circle_samples: usize,
    /// Sites closer than this to an intersection point only count towards
    /// `RowCheck::max`; `None` means 0.2 times the shortest line segment.
    pub corner_margin: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 25,
            seed: 0,
            circle_samples: 360,
            corner_margin: None,
        }
    }
}

/// Largest residual of one boundary row over all trials.
#[derive(Debug, Clone)]
pub struct RowCheck {
    pub segment: usize,
    pub segment_name: String,
    pub row: usize,
    pub kind: ResidualKind,
    pub sites: usize,
    pub max: f64,
    /// Max over sites away from intersection points.
    pub max_away: f64,
}

#[derive(Debug, Clone)]
pub struct BcReport {
    pub h: f64,
    pub rows: Vec<RowCheck>,
}

impl BcReport {
    pub fn max_dirichlet(&self) -> f64 {
        self.max_of(ResidualKind::Dirichlet, |r| r.max)
    }

    pub fn max_robin_away(&self) -> f64 {
        self.max_of(ResidualKind::Robin, |r| r.max_away)
    }

    fn max_of(&self, kind: ResidualKind, f: impl Fn(&RowCheck) -> f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(f)
            .fold(0.0, f64::max)
    }
}

/// A cubic polynomial in `x, y` with the given 10 coefficients.
pub fn cubic(c: &[f64], p: Point2) -> f64 {
    let (x, y) = (p.x, p.y);
    c[0] + c[1] * x
        + c[2] * y
        + c[3] * x * x
        + c[4] * x * y
        + c[5] * y * y
        + c[6] * x * x * x
        + c[7] * x * x * y
        + c[8] * x * y * y
        + c[9] * y * y * y
}

/// Coefficients for `n` random cubic slot fields, uniform in [-1, 1].
pub fn random_cubics(n: usize, rng: &mut impl Rng) -> Vec<[f64; 10]> {
    (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..=1.0)))
        .collect()
}

/// 0.2 times the shortest line segment (0 without lines).
pub fn default_corner_margin(dom: &DomainSpec) -> f64 {
    let m = 0.2
        * dom
            .segments
            .iter()
            .filter_map(|s| match s.geom {
                SegmentGeom::Line { a, b } => Some(a.dist(b)),
                SegmentGeom::Circle { .. } => None,
            })
            .fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m
    } else {
        0.0
    }
}

/// Largest `|∂w_k/∂n|` over all weights `k` at the grid nodes of segment
/// `seg` farther than `margin` from every intersection point.
pub fn weight_normal_slope(
    dom: &DomainSpec,
    grid: &Grid,
    seg: usize,
    margin: f64,
) -> Result<f64, StructureError> {
    let nd = normal_derivative(grid, dom, seg, 0)?;
    let terms: Vec<(usize, u32)> = dom
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.mu()))
        .collect();
    let pts = grid.points();
    let mut worst = 0.0f64;
    for k in 0..terms.len() {
        let w: Vec<f64> = pts.iter().map(|&p| weight_value(dom, &terms, k, p)).collect();
        for (s, d) in nd.apply(&w).iter().enumerate() {
            if dom.points.iter().all(|ip| ip.point.dist(nd.sites[s]) >= margin) {
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst)
}

/// Fill every slot with a random cubic and record the largest Dirichlet and
/// Robin residual of every boundary row.
pub fn verify_bc(
    ss: &Arc<SolutionStructure>,
    grid: &Grid,
    opts: &VerifyOptions,
) -> Result<BcReport, StructureError> {
    let dom = &ss.domain;
    let mut terms = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        for j in 0..seg.rows.len() {
            terms.push(BcTerm { segment: i, row: j });
        }
    }
    let set = BcSet::new(dom, grid, &terms, opts.circle_samples)?;
    let prog = Program::compile(ss.clone(), grid, &set.point_sets)?;
    let margin = opts.corner_margin.unwrap_or_else(|| default_corner_margin(dom));
    let away: Vec<Vec<bool>> = set
        .residuals
        .iter()
        .map(|r| {
            r.sites
                .iter()
                .map(|p| dom.points.iter().all(|ip| ip.point.dist(*p) >= margin))
                .collect()
        })
        .collect();
    let mut rows: Vec<RowCheck> = set
        .residuals
        .iter()
        .map(|r| RowCheck {
            segment: r.term.segment,
            segment_name: dom.segments[r.term.segment].name.clone(),
            row: r.term.row,
            kind: r.kind,
            sites: r.len(),
            max: 0.0,
            max_away: 0.0,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ev = prog.new_evaluation();
    for _ in 0..opts.trials {
        let coefs = random_cubics(ss.n_slots(), &mut rng);
        let mut src = (ss.n_slots(), |p: Point2, out: &mut [f64]| {
            for (o, c) in out.iter_mut().zip(&coefs) {
                *o = cubic(c, p);
            }
        });
        prog.forward(&mut src, &mut ev)?;
        for (k, r) in set.residuals.iter().enumerate() {
            for (s, v) in r.eval(&prog, &ev).iter().enumerate() {
                let a = v.abs();
                rows[k].max = rows[k].max.max(a);
                if away[k][s] {
                    rows[k].max_away = rows[k].max_away.max(a);
                }
            }
        }
    }
    Ok(BcReport { h: grid.h(), rows })
}
