//! Boundary segments, distance functions and point classification.
//!
//! Each segment carries two functions: `phi`, the true (C⁰) distance to the
//! segment, and `phi_bar`, a smooth normalized function that vanishes on the
//! segment with unit inward normal derivative.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("segment `{0}`: line endpoints coincide")]
    DegenerateLine(String),
    #[error("segment `{0}`: circle radius must be positive and finite")]
    BadRadius(String),
    #[error("domain has no segments")]
    Empty,
    #[error("bounding box is empty or not finite")]
    BadBox,
    #[error("segment `{segment}`: expected {expected} boundary rows, found {found}")]
    RowCount {
        segment: String,
        expected: usize,
        found: usize,
    },
    #[error("segment `{segment}`: {message}")]
    BadBasis { segment: String, message: String },
    #[error("segment `{segment}`: robin coefficient vector is not in the span of the non-dirichlet basis")]
    SpanCondition { segment: String },
    #[error("segment `{segment}`: data `{expr}` depends on unbound parameter `{var}`")]
    UnboundParameter {
        segment: String,
        expr: String,
        var: Var,
    },
    #[error("intersection point `{point}`: {message}")]
    BadIntersection { point: String, message: String },
    #[error("segment `{segment}`: endpoint ({x}, {y}) is not a declared intersection point")]
    OpenEndpoint { segment: String, x: f64, y: f64 },
    #[error("segment `{segment}`: line segments need exactly two intersection points, found {found}")]
    NeighbourCount { segment: String, found: usize },
    #[error("cannot determine the domain side of segment `{0}`")]
    Orientation(String),
    #[error("point ({x}, {y}) lies on non-adjacent segments `{a}` and `{b}`")]
    Ambiguous { x: f64, y: f64, a: String, b: String },
    #[error("normalized function of circle `{0}` is singular at its center")]
    CircleCenter(String),
    #[error("segment `{0}` is not a line")]
    NotALine(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainSide {
    Inside,
    Outside,
}

/// Geometry of one boundary segment. For lines the domain lies to the left of
/// `a -> b`; [`DomainSpec::new`] reorients lines to satisfy this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegmentGeom {
    Line { a: Point2, b: Point2 },
    Circle { center: Point2, radius: f64, domain_side: DomainSide },
}

impl SegmentGeom {
    /// Euclidean distance to the closed segment.
    pub fn distance(&self, p: Point2) -> f64 {
        match *self {
            SegmentGeom::Line { a, b } => {
                let d = b - a;
                let t = (p - a).dot(d) / d.dot(d);
                if t <= 0.0 {
                    p.dist(a)
                } else if t >= 1.0 {
                    p.dist(b)
                } else {
                    // Perpendicular form keeps on-line points exactly at zero.
                    d.cross(p - a).abs() / d.norm()
                }
            }
            SegmentGeom::Circle { center, radius, .. } => (p.dist(center) - radius).abs(),
        }
    }

    /// Unit normal pointing into the domain (left of `a -> b`) for lines.
    fn left_normal(a: Point2, b: Point2) -> Point2 {
        let d = b - a;
        let n = d.norm();
        Point2::new(-d.y / n, d.x / n)
    }

    /// Normalized function value and gradient; `None` at a circle's center.
    pub fn normalized(&self, p: Point2) -> Option<(f64, [f64; 2])> {
        match *self {
            SegmentGeom::Line { a, b } => {
                let n = Self::left_normal(a, b);
                Some((n.dot(p - a), [n.x, n.y]))
            }
            SegmentGeom::Circle {
                center,
                radius,
                domain_side,
            } => {
                let r = p - center;
                let len = r.norm();
                if len == 0.0 {
                    return None;
                }
                let s = match domain_side {
                    DomainSide::Outside => 1.0,
                    DomainSide::Inside => -1.0,
                };
                Some((s * (len - radius), [s * r.x / len, s * r.y / len]))
            }
        }
    }

    /// Gradient of the true distance. On the segment this is the inward normal.
    pub fn distance_gradient(&self, p: Point2) -> [f64; 2] {
        match *self {
            SegmentGeom::Line { a, b } => {
                let d = b - a;
                let t = (p - a).dot(d) / d.dot(d);
                let foot = if t <= 0.0 {
                    a
                } else if t >= 1.0 {
                    b
                } else {
                    a + t * d
                };
                let r = p - foot;
                let len = r.norm();
                let n = Self::left_normal(a, b);
                if len == 0.0 || (t > 0.0 && t < 1.0) {
                    let s = if n.dot(p - a) < 0.0 { -1.0 } else { 1.0 };
                    [s * n.x, s * n.y]
                } else {
                    [r.x / len, r.y / len]
                }
            }
            SegmentGeom::Circle { .. } => {
                let (v, g) = self.normalized(p).unwrap_or((0.0, [0.0, 0.0]));
                if v < 0.0 {
                    [-g[0], -g[1]]
                } else {
                    g
                }
            }
        }
    }

    /// Point on the segment at parameter `t` in [0, 1].
    pub fn point_at(&self, t: f64) -> Point2 {
        match *self {
            SegmentGeom::Line { a, b } => {
                if t >= 1.0 {
                    b
                } else {
                    a + t * (b - a)
                }
            }
            SegmentGeom::Circle { center, radius, .. } => {
                let th = std::f64::consts::TAU * t;
                center + radius * Point2::new(th.cos(), th.sin())
            }
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, SegmentGeom::Line { .. })
    }
}

/// Condition carried by one row `b·u` of a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// `b·u = g`
    Dirichlet { g: Expr },
    /// `b·∂u/∂n + c·u = h`; Neumann is `c = 0`.
    Robin { c: Vec<Expr>, h: Expr },
    /// No condition on this component.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcRow {
    pub basis: Vec<f64>,
    pub kind: RowKind,
}

impl BcRow {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self.kind, RowKind::Dirichlet { .. })
    }

    pub fn is_robin(&self) -> bool {
        matches!(self.kind, RowKind::Robin { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub name: String,
    pub geom: SegmentGeom,
    pub rows: Vec<BcRow>,
    /// Use the squared distance as `phi`, which has a vanishing gradient on the segment.
    #[serde(default)]
    pub vanishing_gradient: bool,
}

impl SegmentSpec {
    pub fn dirichlet(name: &str, geom: SegmentGeom, g: Expr) -> Self {
        Self::scalar(name, geom, RowKind::Dirichlet { g })
    }

    pub fn robin(name: &str, geom: SegmentGeom, c: Expr, h: Expr) -> Self {
        Self::scalar(name, geom, RowKind::Robin { c: vec![c], h })
    }

    pub fn neumann(name: &str, geom: SegmentGeom, h: Expr) -> Self {
        Self::robin(name, geom, Expr::Num(0.0), h)
    }

    fn scalar(name: &str, geom: SegmentGeom, kind: RowKind) -> Self {
        SegmentSpec {
            name: name.to_string(),
            geom,
            rows: vec![BcRow {
                basis: vec![1.0],
                kind,
            }],
            vanishing_gradient: false,
        }
    }

    /// Exponent used in weights and in the remainder product.
    pub fn mu(&self) -> u32 {
        if self.has_robin() {
            2
        } else {
            1
        }
    }

    pub fn has_robin(&self) -> bool {
        self.rows.iter().any(BcRow::is_robin)
    }

    pub fn is_pure_dirichlet(&self) -> bool {
        self.rows.iter().all(BcRow::is_dirichlet)
    }

    /// True distance to the segment.
    pub fn phi(&self, p: Point2) -> f64 {
        self.geom.distance(p)
    }

    /// Distance function entering weights and remainders: `phi`, or `phi²` for
    /// the vanishing-gradient variant.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        let d = self.phi(p);
        if self.vanishing_gradient {
            d * d
        } else {
            d
        }
    }

    /// Normalized function and its gradient.
    pub fn phi_bar(&self, p: Point2) -> Result<(f64, [f64; 2]), GeometryError> {
        self.geom
            .normalized(p)
            .ok_or_else(|| GeometryError::CircleCenter(self.name.clone()))
    }

    /// Orthogonal projection onto the segment's line: `p - phi_bar(p) ∇phi_bar`.
    pub fn normalizer(&self, p: Point2) -> Result<Point2, GeometryError> {
        if !self.geom.is_line() {
            return Err(GeometryError::NotALine(self.name.clone()));
        }
        let (v, g) = self.phi_bar(p)?;
        Ok(Point2::new(p.x - v * g[0], p.y - v * g[1]))
    }
}

/// Distance to an intersection point.
pub fn phi_point(point: Point2, p: Point2) -> f64 {
    p.dist(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        BoundingBox { x0, x1, y0, y1 }
    }

    pub fn diagonal(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionPoint {
    pub name: String,
    pub point: Point2,
    pub segments: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Inside,
    OnSegment(usize),
    AtIntersection(usize),
    Outside,
}

/// A validated domain: segments, declared adjacency and bounding box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub bbox: BoundingBox,
    pub segments: Vec<SegmentSpec>,
    pub points: Vec<IntersectionPoint>,
    n_components: usize,
    tol: f64,
}

impl DomainSpec {
    /// Validate and orient the boundary description.
    pub fn new(
        bbox: BoundingBox,
        segments: Vec<SegmentSpec>,
        points: Vec<IntersectionPoint>,
    ) -> Result<Self, GeometryError> {
        let finite = [bbox.x0, bbox.x1, bbox.y0, bbox.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bbox.x1 <= bbox.x0 || bbox.y1 <= bbox.y0 {
            return Err(GeometryError::BadBox);
        }
        if segments.is_empty() {
            return Err(GeometryError::Empty);
        }
        let tol = 1e-12 * bbox.diagonal();
        let n = segments[0].rows.len();
        for seg in &segments {
            validate_segment(seg, n)?;
        }
        for ip in &points {
            for &s in &ip.segments {
                let Some(seg) = segments.get(s) else {
                    return Err(GeometryError::BadIntersection {
                        point: ip.name.clone(),
                        message: format!("segment index {s} out of range"),
                    });
                };
                if seg.phi(ip.point) > tol {
                    return Err(GeometryError::BadIntersection {
                        point: ip.name.clone(),
                        message: format!("does not lie on segment `{}`", seg.name),
                    });
                }
            }
            if ip.segments[0] == ip.segments[1] {
                return Err(GeometryError::BadIntersection {
                    point: ip.name.clone(),
                    message: "a point joins two distinct segments".into(),
                });
            }
        }
        for (i, seg) in segments.iter().enumerate() {
            let incident = points.iter().filter(|p| p.segments.contains(&i)).count();
            if let SegmentGeom::Line { a, b } = seg.geom {
                if incident != 2 {
                    return Err(GeometryError::NeighbourCount {
                        segment: seg.name.clone(),
                        found: incident,
                    });
                }
                for e in [a, b] {
                    let shared = points
                        .iter()
                        .any(|p| p.segments.contains(&i) && p.point.dist(e) <= tol);
                    if !shared {
                        return Err(GeometryError::OpenEndpoint {
                            segment: seg.name.clone(),
                            x: e.x,
                            y: e.y,
                        });
                    }
                }
            }
        }
        let mut dom = DomainSpec {
            bbox,
            segments: Vec::new(),
            points,
            n_components: n,
            tol,
        };
        // Orient lines so the domain is on the left.
        let probe = 1e-6 * bbox.diagonal();
        dom.segments = segments;
        let geoms: Vec<SegmentGeom> = dom.segments.iter().map(|s| s.geom).collect();
        for seg in dom.segments.iter_mut() {
            if let SegmentGeom::Line { a, b } = seg.geom {
                let mid = 0.5 * (a + b);
                let n = SegmentGeom::left_normal(a, b);
                let left = inside_polygon(&geoms, mid + probe * n);
                let right = inside_polygon(&geoms, mid - probe * n);
                match (left, right) {
                    (true, false) => {}
                    (false, true) => seg.geom = SegmentGeom::Line { a: b, b: a },
                    _ => return Err(GeometryError::Orientation(seg.name.clone())),
                }
            }
        }
        Ok(dom)
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Classification tolerance: `1e-12` times the box diagonal.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn segment_index(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.name == name)
    }

    pub fn point_index(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p.name == name)
    }

    /// Intersection points incident to segment `i`, in declaration order.
    pub fn points_of(&self, i: usize) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&k| self.points[k].segments.contains(&i))
            .collect()
    }

    /// The segment other than `i` meeting at point `k`.
    pub fn other_segment(&self, k: usize, i: usize) -> usize {
        let [a, b] = self.points[k].segments;
        if a == i {
            b
        } else {
            a
        }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.points
            .iter()
            .any(|p| p.segments.contains(&i) && p.segments.contains(&j))
    }

    /// Whether `p` lies strictly inside the domain (boundary handling left to `classify`).
    pub fn inside(&self, p: Point2) -> bool {
        let geoms: Vec<SegmentGeom> = self.segments.iter().map(|s| s.geom).collect();
        inside_polygon(&geoms, p)
    }

    /// Classify with the default tolerance.
    pub fn classify(&self, p: Point2) -> Result<PointClass, GeometryError> {
        self.classify_tol(p, self.tol)
    }

    pub fn classify_tol(&self, p: Point2, tol: f64) -> Result<PointClass, GeometryError> {
        if let Some(k) = self.points.iter().position(|ip| ip.point.dist(p) <= tol) {
            return Ok(PointClass::AtIntersection(k));
        }
        let mut hit: Option<(usize, f64)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            let d = seg.phi(p);
            if d > tol {
                continue;
            }
            hit = match hit {
                None => Some((i, d)),
                Some((j, dj)) => {
                    if !self.adjacent(i, j) {
                        return Err(GeometryError::Ambiguous {
                            x: p.x,
                            y: p.y,
                            a: self.segments[j].name.clone(),
                            b: seg.name.clone(),
                        });
                    }
                    if d < dj {
                        Some((i, d))
                    } else {
                        Some((j, dj))
                    }
                }
            };
        }
        if let Some((i, _)) = hit {
            return Ok(PointClass::OnSegment(i));
        }
        Ok(if self.inside(p) {
            PointClass::Inside
        } else {
            PointClass::Outside
        })
    }
}

/// Crossing-number test over the line segments, combined with circle sides.
fn inside_polygon(geoms: &[SegmentGeom], p: Point2) -> bool {
    let mut crossings = 0usize;
    let mut any_line = false;
    for g in geoms {
        match *g {
            SegmentGeom::Line { a, b } => {
                any_line = true;
                if (a.y > p.y) != (b.y > p.y) {
                    let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    if p.x < x {
                        crossings += 1;
                    }
                }
            }
            SegmentGeom::Circle {
                center,
                radius,
                domain_side,
            } => {
                let r = p.dist(center);
                let ok = match domain_side {
                    DomainSide::Outside => r > radius,
                    DomainSide::Inside => r < radius,
                };
                if !ok {
                    return false;
                }
            }
        }
    }
    !any_line || crossings % 2 == 1
}

fn validate_segment(seg: &SegmentSpec, n: usize) -> Result<(), GeometryError> {
    let name = || seg.name.clone();
    match seg.geom {
        SegmentGeom::Line { a, b } => {
            if a.dist(b) == 0.0 {
                return Err(GeometryError::DegenerateLine(name()));
            }
        }
        SegmentGeom::Circle { radius, .. } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(GeometryError::BadRadius(name()));
            }
        }
    }
    if seg.rows.len() != n {
        return Err(GeometryError::RowCount {
            segment: name(),
            expected: n,
            found: seg.rows.len(),
        });
    }
    for (j, row) in seg.rows.iter().enumerate() {
        if row.basis.len() != n {
            return Err(GeometryError::BadBasis {
                segment: name(),
                message: format!("row {j} basis has length {}, expected {n}", row.basis.len()),
            });
        }
        for (k, other) in seg.rows.iter().enumerate() {
            let dot: f64 = row.basis.iter().zip(&other.basis).map(|(a, b)| a * b).sum();
            let want = if j == k { 1.0 } else { 0.0 };
            if (dot - want).abs() > 1e-10 {
                return Err(GeometryError::BadBasis {
                    segment: name(),
                    message: "basis vectors are not orthonormal".into(),
                });
            }
        }
        let mut exprs: Vec<&Expr> = Vec::new();
        match &row.kind {
            RowKind::Dirichlet { g } => exprs.push(g),
            RowKind::Robin { c, h } => {
                if c.len() != n {
                    return Err(GeometryError::BadBasis {
                        segment: name(),
                        message: format!("row {j} coefficient vector has length {}", c.len()),
                    });
                }
                exprs.extend(c.iter());
                exprs.push(h);
            }
            RowKind::Free => {}
        }
        for e in exprs {
            if let Some(var) = e
                .free_vars()
                .into_iter()
                .find(|v| matches!(v, Var::Alpha | Var::Beta))
            {
                return Err(GeometryError::UnboundParameter {
                    segment: name(),
                    expr: e.to_string(),
                    var,
                });
            }
        }
        if let RowKind::Robin { c, .. } = &row.kind {
            check_span(seg, c)?;
        }
    }
    Ok(())
}

// c(x) must have no component along any Dirichlet basis vector of the segment.
fn check_span(seg: &SegmentSpec, c: &[Expr]) -> Result<(), GeometryError> {
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let p = seg.geom.point_at(t);
        let vals: Vec<f64> = c.iter().map(|e| e.eval_xy(p.x, p.y).unwrap_or(0.0)).collect();
        let scale = 1.0 + vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for row in seg.rows.iter().filter(|r| r.is_dirichlet()) {
            let dot: f64 = row.basis.iter().zip(&vals).map(|(a, b)| a * b).sum();
            if dot.abs() > 1e-10 * scale {
                return Err(GeometryError::SpanCondition {
                    segment: seg.name.clone(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn line(ax: f64, ay: f64, bx: f64, by: f64) -> SegmentGeom {
        SegmentGeom::Line {
            a: Point2::new(ax, ay),
            b: Point2::new(bx, by),
        }
    }

    fn circle() -> SegmentGeom {
        SegmentGeom::Circle {
            center: Point2::new(1.0, 1.0),
            radius: 0.25,
            domain_side: DomainSide::Outside,
        }
    }

    fn zero() -> Expr {
        Expr::Num(0.0)
    }

    /// L-shape with the figure's corner labels, scaled by `s`.
    fn l_shape(s: f64) -> DomainSpec {
        let c = [
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 2.0),
            (2.0, 2.0),
            (2.0, 4.0),
            (0.0, 4.0),
        ]
        .map(|(x, y)| Point2::new(s * x, s * y));
        let seg = |i: usize, j: usize| SegmentGeom::Line { a: c[i], b: c[j] };
        let segments = vec![
            SegmentSpec::dirichlet("1", seg(5, 0), zero()),
            SegmentSpec::dirichlet("2", seg(0, 1), zero()),
            SegmentSpec::neumann("3", seg(1, 2), zero()),
            SegmentSpec::neumann("4", seg(2, 3), zero()),
            SegmentSpec::robin("5", seg(3, 4), Expr::Num(1.0), zero()),
            SegmentSpec::robin("6", seg(4, 5), Expr::Num(1.0), zero()),
        ];
        let names = ["A", "B", "C", "D", "E", "F"];
        let points = (0..6)
            .map(|k| IntersectionPoint {
                name: names[k].to_string(),
                point: c[k],
                segments: [k, (k + 1) % 6],
            })
            .collect();
        DomainSpec::new(BoundingBox::new(0.0, 4.0 * s, 0.0, 4.0 * s), segments, points).unwrap()
    }

    #[test]
    fn phi_examples() {
        let s = SegmentSpec::dirichlet("s", line(0.0, 0.0, 1.0, 0.0), zero());
        assert_eq!(s.phi(Point2::new(0.5, 0.5)), 0.5);
        assert_eq!(s.phi(Point2::new(2.0, 0.0)), 1.0);
        let c = SegmentSpec::dirichlet("c", circle(), zero());
        assert_eq!(c.phi(Point2::new(1.5, 1.0)), 0.25);
    }

    #[test]
    fn phi_bar_examples() {
        let s = SegmentSpec::dirichlet("s", line(0.0, 0.0, 1.0, 0.0), zero());
        let (v, g) = s.phi_bar(Point2::new(0.3, 0.2)).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        assert_eq!(g, [0.0, 1.0]);
        let c = SegmentSpec::dirichlet("c", circle(), zero());
        let (v, g) = c.phi_bar(Point2::new(1.5, 1.0)).unwrap();
        assert_eq!(v, 0.25);
        assert_eq!(g, [1.0, 0.0]);
        assert!(c.phi_bar(Point2::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn phi_point_examples() {
        assert_eq!(phi_point(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)), 5.0);
        assert_eq!(phi_point(Point2::new(0.3, 0.1), Point2::new(0.3, 0.1)), 0.0);
        assert_eq!(phi_point(Point2::new(4.0, 0.0), Point2::new(4.0, 2.0)), 2.0);
    }

    #[test]
    fn distance_vanishes_exactly_on_axis_aligned_segments() {
        let s = SegmentSpec::dirichlet("s", line(0.0, 0.5, 1.0, 0.5), zero());
        for k in 0..200 {
            let t = k as f64 / 199.0;
            assert_eq!(s.phi(Point2::new(t, 0.5)), 0.0);
            assert!(s.phi(Point2::new(t, 0.5 + 1e-3 * (1.0 + t))) > 0.0);
        }
        let c = SegmentSpec::dirichlet("c", circle(), zero());
        for k in 0..200 {
            let p = c.geom.point_at(k as f64 / 200.0);
            assert!(c.phi(p) <= 1e-15);
            assert!(c.phi(Point2::new(p.x * 1.01, p.y)) > 0.0);
        }
    }

    #[test]
    fn phi_bar_is_normalized_on_the_segment() {
        let segs = [
            SegmentSpec::dirichlet("d", line(0.2, 0.1, 0.9, 0.7), zero()),
            SegmentSpec::dirichlet("c", circle(), zero()),
        ];
        for s in &segs {
            for k in 0..100 {
                let p = s.geom.point_at(k as f64 / 100.0);
                let (v, g) = s.phi_bar(p).unwrap();
                assert!(v.abs() < 1e-12);
                let nu = s.geom.distance_gradient(Point2::new(p.x, p.y));
                let dd = g[0] * nu[0] + g[1] * nu[1];
                assert!((dd.abs() - 1.0).abs() < 1e-12);
                assert!((g[0].hypot(g[1]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalizer_projects() {
        let s = SegmentSpec::dirichlet("s", line(0.0, 0.0, 1.0, 0.0), zero());
        assert_eq!(s.normalizer(Point2::new(0.3, 0.2)).unwrap(), Point2::new(0.3, 0.0));
        let d = SegmentSpec::dirichlet("d", line(0.1, 0.3, 0.8, 0.9), zero());
        for k in 0..100 {
            let p = Point2::new((k as f64 * 0.37).sin(), (k as f64 * 0.73).cos());
            let q = d.normalizer(p).unwrap();
            let r = d.normalizer(q).unwrap();
            assert!(q.dist(r) < 1e-14);
        }
        let c = SegmentSpec::dirichlet("c", circle(), zero());
        assert!(c.normalizer(Point2::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn classify_l_shape() {
        let dom = l_shape(1.0);
        assert_eq!(dom.classify(Point2::new(1.0, 1.0)).unwrap(), PointClass::Inside);
        let d = dom.point_index("D").unwrap();
        assert_eq!(
            dom.classify(Point2::new(2.0, 2.0)).unwrap(),
            PointClass::AtIntersection(d)
        );
        assert_eq!(dom.classify(Point2::new(1.0, 3.0)).unwrap(), PointClass::Inside);
        assert_eq!(dom.classify(Point2::new(3.0, 3.0)).unwrap(), PointClass::Outside);
        assert_eq!(
            dom.classify(Point2::new(3.0, 2.0)).unwrap(),
            PointClass::OnSegment(3)
        );
    }

    #[test]
    fn lines_are_oriented_towards_the_domain() {
        let dom = l_shape(0.25);
        for s in &dom.segments {
            if let SegmentGeom::Line { a, b } = s.geom {
                let mid = 0.5 * (a + b);
                let (_, g) = s.phi_bar(mid).unwrap();
                let q = Point2::new(mid.x + 1e-3 * g[0], mid.y + 1e-3 * g[1]);
                assert_eq!(dom.classify(q).unwrap(), PointClass::Inside, "{}", s.name);
            }
        }
    }

    #[test]
    fn validation_errors() {
        let s = SegmentSpec::dirichlet("s", line(0.0, 0.0, 0.0, 0.0), zero());
        let e = DomainSpec::new(BoundingBox::new(0.0, 1.0, 0.0, 1.0), vec![s], vec![]);
        assert!(matches!(e, Err(GeometryError::DegenerateLine(_))));

        let mut bad = SegmentSpec::dirichlet("c", circle(), zero());
        bad.rows[0].kind = RowKind::Dirichlet {
            g: parse("alpha*x").unwrap(),
        };
        let e = DomainSpec::new(BoundingBox::new(0.0, 2.0, 0.0, 2.0), vec![bad], vec![]);
        assert!(matches!(e, Err(GeometryError::UnboundParameter { .. })));

        let open = SegmentSpec::dirichlet("s", line(0.0, 0.0, 1.0, 0.0), zero());
        let e = DomainSpec::new(BoundingBox::new(0.0, 1.0, 0.0, 1.0), vec![open], vec![]);
        assert!(matches!(e, Err(GeometryError::NeighbourCount { .. })));
    }

    #[test]
    fn span_condition_is_checked() {
        let rows = vec![
            BcRow {
                basis: vec![1.0, 0.0],
                kind: RowKind::Dirichlet { g: zero() },
            },
            BcRow {
                basis: vec![0.0, 1.0],
                kind: RowKind::Robin {
                    c: vec![Expr::Num(1.0), zero()],
                    h: zero(),
                },
            },
        ];
        let seg = SegmentSpec {
            name: "c".into(),
            geom: circle(),
            rows,
            vanishing_gradient: false,
        };
        let e = DomainSpec::new(BoundingBox::new(0.0, 2.0, 0.0, 2.0), vec![seg], vec![]);
        assert!(matches!(e, Err(GeometryError::SpanCondition { .. })));
    }

    #[test]
    fn mu_follows_robin_rows() {
        let d = SegmentSpec::dirichlet("d", circle(), zero());
        let r = SegmentSpec::neumann("r", circle(), zero());
        assert_eq!(d.mu(), 1);
        assert_eq!(r.mu(), 2);
    }
}
