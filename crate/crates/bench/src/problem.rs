//! Problem-spec files: domain, boundary data, PDE variant and training block.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use hardbc_core::expr::{Bindings, Expr, Var};
use hardbc_core::geometry::{
    BcRow, BoundingBox, DomainSide, DomainSpec, IntersectionPoint, Point2, RowKind, SegmentGeom,
    SegmentSpec,
};
use hardbc_core::structure::{build, BcMode, BuildOptions, CornerBubble, RemainderOverride, SolutionStructure};
use serde::Deserialize;

use crate::BenchError;

pub const POISSON: &str = include_str!("../specs/poisson.json");
pub const DARCY: &str = include_str!("../specs/darcy.json");
pub const NAVIER_STOKES: &str = include_str!("../specs/ns.json");

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Variant {
    /// `-Δu = 2π² cos(πx) cos(πy)` with homogeneous Neumann data.
    Poisson,
    /// `-div(a grad u) = f`, `a = sin(αx) sin(βy)`.
    Darcy { alpha: f64, beta: f64 },
    /// Stationary incompressible flow, pressure rescaled by `1/sqrt(nu)`.
    NavierStokes { nu: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalarBc {
    Dirichlet(Expr),
    Neumann(Expr),
    Robin { c: Expr, h: Expr },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleEntry {
    pub center: [f64; 2],
    pub radius: f64,
    /// Whether the domain lies inside or outside the circle.
    pub domain: DomainSide,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub name: String,
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub to: Option<String>,
    #[serde(default)]
    pub circle: Option<CircleEntry>,
    /// Shorthand for scalar problems.
    #[serde(default)]
    pub bc: Option<ScalarBc>,
    #[serde(default)]
    pub rows: Option<Vec<BcRow>>,
    #[serde(default)]
    pub vanishing_gradient: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingBlock {
    pub grid: [usize; 2],
    pub epochs: usize,
    pub lr: f64,
    pub milestone: usize,
    #[serde(default = "one")]
    pub pde_weight: f64,
    #[serde(default = "one")]
    pub bc_weight: f64,
    #[serde(default = "hidden")]
    pub hidden: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

fn hidden() -> Vec<usize> {
    vec![64; 4]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildBlock {
    #[serde(default)]
    pub corner_bubble: CornerBubble,
    #[serde(default)]
    pub remainder_override: RemainderOverride,
    /// Replaces `remainder_override` for the OP structure.
    #[serde(default)]
    pub op_remainder_override: Option<RemainderOverride>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub problem: Variant,
    #[serde(default)]
    pub components: Vec<String>,
    pub corners: BTreeMap<String, [f64; 2]>,
    pub segments: Vec<SegmentEntry>,
    /// Analytic solution per component, where known.
    #[serde(default)]
    pub reference: BTreeMap<String, Expr>,
    #[serde(default)]
    pub build: BuildBlock,
    pub training: TrainingBlock,
    /// Grids `(nx, ny)` for boundary-condition verification, coarse to fine.
    #[serde(default)]
    pub verify_grids: Vec<[usize; 2]>,
}

/// A problem file with its parameters substituted and its domain validated.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub variant: Variant,
    pub domain: Arc<DomainSpec>,
    pub components: Vec<String>,
    pub reference: Vec<Option<Expr>>,
    pub build: BuildOptions,
    pub op_remainder_override: Option<RemainderOverride>,
    pub training: TrainingBlock,
}

impl Problem {
    pub fn build_options(&self, mode: BcMode) -> BuildOptions {
        match (&self.op_remainder_override, mode) {
            (Some(ov), BcMode::Op) => BuildOptions {
                remainder_override: ov.clone(),
                ..self.build.clone()
            },
            _ => self.build.clone(),
        }
    }

    pub fn structure(&self, mode: BcMode) -> Result<SolutionStructure, BenchError> {
        Ok(build(&self.domain, mode, &self.build_options(mode))?)
    }
}

impl ProblemFile {
    /// Parse JSON; errors carry line and column.
    pub fn parse(text: &str) -> Result<ProblemFile, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Spec(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<ProblemFile, BenchError> {
        let text = std::fs::read_to_string(path)?;
        ProblemFile::parse(&text).map_err(|e| BenchError::Spec(format!("{}: {e}", path.display())))
    }

    pub fn verify_grids(&self) -> Vec<(usize, usize)> {
        if self.verify_grids.is_empty() {
            let [nx, ny] = self.training.grid;
            return vec![(nx, ny), (2 * nx - 1, 2 * ny - 1), (4 * nx - 3, 4 * ny - 3)];
        }
        self.verify_grids.iter().map(|g| (g[0], g[1])).collect()
    }

    pub fn poisson() -> ProblemFile {
        ProblemFile::parse(POISSON).expect("shipped poisson spec")
    }

    pub fn darcy() -> ProblemFile {
        ProblemFile::parse(DARCY).expect("shipped darcy spec")
    }

    pub fn navier_stokes() -> ProblemFile {
        ProblemFile::parse(NAVIER_STOKES).expect("shipped navier-stokes spec")
    }

    /// Substitute `(alpha, beta)` (Darcy only; `None` keeps the file's values)
    /// and validate the domain.
    pub fn instantiate(&self, params: Option<(f64, f64)>) -> Result<Problem, BenchError> {
        let mut variant = self.problem;
        if let (Variant::Darcy { alpha, beta }, Some((a, b))) = (&mut variant, params) {
            *alpha = a;
            *beta = b;
        }
        let mut bind = Bindings::new();
        if let Variant::Darcy { alpha, beta } = variant {
            bind = bind.with(Var::Alpha, alpha).with(Var::Beta, beta);
        }
        let sub = |e: &Expr| e.substitute(&bind);

        let n = self.components.len().max(1);
        let corner = |name: &str, seg: &str| -> Result<Point2, BenchError> {
            self.corners
                .get(name)
                .map(|c| Point2::new(c[0], c[1]))
                .ok_or_else(|| BenchError::Spec(format!("segment `{seg}`: unknown corner `{name}`")))
        };

        let mut segments = Vec::new();
        for s in &self.segments {
            let geom = match (&s.from, &s.to, &s.circle) {
                (Some(a), Some(b), None) => SegmentGeom::Line {
                    a: corner(a, &s.name)?,
                    b: corner(b, &s.name)?,
                },
                (None, None, Some(c)) => SegmentGeom::Circle {
                    center: Point2::new(c.center[0], c.center[1]),
                    radius: c.radius,
                    domain_side: c.domain,
                },
                _ => {
                    return Err(BenchError::Spec(format!(
                        "segment `{}` needs either `from`/`to` or `circle`",
                        s.name
                    )))
                }
            };
            let rows = match (&s.bc, &s.rows) {
                (Some(bc), None) if n == 1 => vec![scalar_row(bc)],
                (None, Some(rows)) => rows.clone(),
                _ => {
                    return Err(BenchError::Spec(format!(
                        "segment `{}` needs exactly one of `bc` (scalar problems) or `rows`",
                        s.name
                    )))
                }
            };
            let rows = rows
                .into_iter()
                .map(|r| BcRow {
                    basis: r.basis,
                    kind: match r.kind {
                        RowKind::Dirichlet { g } => RowKind::Dirichlet { g: sub(&g) },
                        RowKind::Robin { c, h } => RowKind::Robin {
                            c: c.iter().map(sub).collect(),
                            h: sub(&h),
                        },
                        RowKind::Free => RowKind::Free,
                    },
                })
                .collect();
            segments.push(SegmentSpec {
                name: s.name.clone(),
                geom,
                rows,
                vanishing_gradient: s.vanishing_gradient,
            });
        }

        // Intersection points are the corners where one segment ends and the
        // next begins.
        let mut points = Vec::new();
        for (name, c) in &self.corners {
            let incoming = self.segments.iter().position(|s| s.to.as_deref() == Some(name));
            let outgoing = self.segments.iter().position(|s| s.from.as_deref() == Some(name));
            match (incoming, outgoing) {
                (Some(i), Some(o)) => points.push(IntersectionPoint {
                    name: name.clone(),
                    point: Point2::new(c[0], c[1]),
                    segments: [i, o],
                }),
                _ => {
                    return Err(BenchError::Spec(format!(
                        "corner `{name}` must end one segment and start another"
                    )))
                }
            }
        }

        let mut bbox = BoundingBox::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in self.corners.values() {
            bbox.x0 = bbox.x0.min(c[0]);
            bbox.x1 = bbox.x1.max(c[0]);
            bbox.y0 = bbox.y0.min(c[1]);
            bbox.y1 = bbox.y1.max(c[1]);
        }
        let domain = Arc::new(DomainSpec::new(bbox, segments, points)?);

        let components = if self.components.is_empty() {
            vec!["u".to_string()]
        } else {
            self.components.clone()
        };
        for key in self.reference.keys() {
            if !components.contains(key) {
                return Err(BenchError::Spec(format!("reference for unknown component `{key}`")));
            }
        }
        let reference = components.iter().map(|c| self.reference.get(c).map(sub)).collect();
        let build = BuildOptions {
            component_names: components.clone(),
            corner_bubble: self.build.corner_bubble,
            remainder_override: self.build.remainder_override.clone(),
        };
        Ok(Problem {
            name: self.name.clone(),
            variant,
            domain,
            components,
            reference,
            build,
            op_remainder_override: self.build.op_remainder_override.clone(),
            training: self.training.clone(),
        })
    }
}

fn scalar_row(bc: &ScalarBc) -> BcRow {
    let kind = match bc {
        ScalarBc::Dirichlet(g) => RowKind::Dirichlet { g: g.clone() },
        ScalarBc::Neumann(h) => RowKind::Robin {
            c: vec![Expr::num(0.0)],
            h: h.clone(),
        },
        ScalarBc::Robin { c, h } => RowKind::Robin {
            c: vec![c.clone()],
            h: h.clone(),
        },
    };
    BcRow {
        basis: vec![1.0],
        kind,
    }
}
