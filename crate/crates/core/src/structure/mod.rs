//! Solution structures: fields built from distance functions, boundary data and
//! unknown slot functions that satisfy the boundary conditions for any slot values.

mod baseline;
pub mod bc;
mod glss;
mod graph;
mod op;
mod verify;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::geometry::{DomainSpec, GeometryError, Point2, SegmentSpec};
use crate::grid::{GridError, ProgramError};

pub use baseline::{build_legacy_sukumar, build_semi_weak, build_weak};
pub use glss::{build_scalar_glss, build_system_glss};
pub use graph::{DivGuard, FieldGraph, Node, NodeId};
pub use op::{build_scalar_op, build_system_op};
pub use glss::resolve_intersections_scalar;
pub use verify::{
    cubic, default_corner_margin, random_cubics, verify_bc, weight_normal_slope, BcReport, RowCheck,
    VerifyOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("segment `{0}` carries a robin row but is not a line; the projection method needs hyperplanes")]
    NotHyperplane(String),
    #[error("the projection method needs the same basis on every segment; `{0}` differs")]
    MixedBases(String),
    #[error("ill-posed boundary conditions at `{point}`: {message}")]
    IllPosed { point: String, message: String },
    #[error("{0} mode supports scalar problems only")]
    ScalarOnly(&'static str),
    #[error("expected {expected} component names, got {found}")]
    ComponentNames { expected: usize, found: usize },
    #[error("remainder override names unknown segment index {0}")]
    BadOverride(usize),
    #[error("point ({x}, {y}) lies at an intersection point; weights are undefined there")]
    WeightsUndefined { x: f64, y: f64 },
}

/// How boundary conditions enter the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcMode {
    Glss,
    Op,
    SemiWeak,
    Weak,
    /// Local structures with the true distance in both roles; kept to show
    /// the corner instability.
    LegacySukumar,
}

impl BcMode {
    pub const ALL: [BcMode; 5] = [
        BcMode::Glss,
        BcMode::Op,
        BcMode::SemiWeak,
        BcMode::Weak,
        BcMode::LegacySukumar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BcMode::Glss => "glss",
            BcMode::Op => "op",
            BcMode::SemiWeak => "semi-weak",
            BcMode::Weak => "weak",
            BcMode::LegacySukumar => "legacy-sukumar",
        }
    }

    /// Whether every boundary condition holds by construction.
    pub fn is_exact(self) -> bool {
        matches!(self, BcMode::Glss | BcMode::Op | BcMode::LegacySukumar)
    }
}

impl std::fmt::Display for BcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BcMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BcMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// When a Robin segment between two intersection points gets the extra
/// `phi_A phi_B PsiBar` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerBubble {
    /// Only if the blended end values carry no unknown function.
    #[default]
    Prose,
    /// For every segment with two intersection points.
    Always,
}

/// A boundary row imposed through the loss rather than by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BcTerm {
    pub segment: usize,
    pub row: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Names of the solution components; defaults to `u` or `u1..un`.
    #[serde(default)]
    pub component_names: Vec<String>,
    #[serde(default)]
    pub corner_bubble: CornerBubble,
    /// Per component, replace the remainder product `∏ phi_i^mu_i` by the
    /// listed `(segment, exponent)` factors. Only sensible for components
    /// without boundary rows of their own.
    #[serde(default)]
    pub remainder_override: RemainderOverride,
}

/// Per component, an optional list of `(segment, exponent)` factors.
pub type RemainderOverride = Vec<Option<Vec<(usize, u32)>>>;

/// An assembled solution structure. Immutable once built.
#[derive(Debug, Clone)]
pub struct SolutionStructure {
    pub mode: BcMode,
    pub domain: Arc<DomainSpec>,
    pub graph: FieldGraph,
    /// Root node of each solution component.
    pub components: Vec<NodeId>,
    pub component_names: Vec<String>,
    /// Slot table: output `k` of the ansatz feeds `Node::Slot(k)`.
    pub slots: Vec<String>,
    pub bc_terms: Vec<BcTerm>,
    /// Local structure `u_i^(j)` per segment and row, where the mode has one.
    pub locals: Vec<Vec<Option<NodeId>>>,
}

impl SolutionStructure {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }

    /// A copy whose components are the given nodes (for inspecting sub-fields).
    pub fn with_roots(&self, roots: Vec<NodeId>, names: Vec<String>) -> SolutionStructure {
        SolutionStructure {
            components: roots,
            component_names: names,
            ..self.clone()
        }
    }

    /// Debug dump: slot table, component roots, residual terms and the DAG.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": self.mode,
            "components": self
                .component_names
                .iter()
                .zip(&self.components)
                .map(|(n, r)| serde_json::json!({"name": n, "root": r}))
                .collect::<Vec<_>>(),
            "slots": self.slots,
            "bc_terms": self.bc_terms,
            "nodes": self.graph.nodes(),
        })
    }

    /// Hex SHA-256 of the JSON dump together with the domain.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_json().to_string().as_bytes());
        h.update(serde_json::to_string(&*self.domain).unwrap_or_default().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Build the structure for a mode; scalar domains use the scalar algorithms.
pub fn build(
    dom: &Arc<DomainSpec>,
    mode: BcMode,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    let scalar = dom.n_components() == 1;
    match mode {
        BcMode::Glss if scalar => build_scalar_glss(dom, opts),
        BcMode::Glss => build_system_glss(dom, opts),
        BcMode::Op if scalar => build_scalar_op(dom, opts),
        BcMode::Op => build_system_op(dom, opts),
        BcMode::SemiWeak => build_semi_weak(dom, opts),
        BcMode::Weak => build_weak(dom, opts),
        BcMode::LegacySukumar => build_legacy_sukumar(dom, opts),
    }
}

/// Transfinite weights `w_i(p)` over all segments with exponents `mu_i`.
pub fn weights(dom: &DomainSpec, p: Point2) -> Result<Vec<f64>, StructureError> {
    let terms: Vec<(usize, u32)> = dom
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.mu()))
        .collect();
    let zeros = terms
        .iter()
        .filter(|(s, _)| dom.segments[*s].phi(p) <= dom.tol())
        .count();
    if zeros > 1 {
        return Err(StructureError::WeightsUndefined { x: p.x, y: p.y });
    }
    Ok((0..terms.len())
        .map(|i| weight_value(dom, &terms, i, p))
        .collect())
}

/// Weight `index` over `(segment, exponent)` terms. On a segment the weight
/// is 1 (0 for the others); where several distances vanish it is split evenly.
pub fn weight_value(dom: &DomainSpec, terms: &[(usize, u32)], index: usize, p: Point2) -> f64 {
    let zero: Vec<bool> = terms
        .iter()
        .map(|&(s, _)| dom.segments[s].phi(p) <= dom.tol())
        .collect();
    let nz = zero.iter().filter(|z| **z).count();
    if nz > 0 {
        return if zero[index] { 1.0 / nz as f64 } else { 0.0 };
    }
    // 1/phi_i^mu_i normalized: equal to the product form, without overflow.
    let inv = |k: usize| {
        let (s, mu) = terms[k];
        1.0 / dom.segments[s].boundary_distance(p).powi(mu as i32)
    };
    let total: f64 = (0..terms.len()).map(inv).sum();
    inv(index) / total
}

/// Orthogonal projection of `p` onto the line of a segment.
pub fn normalizer(p: Point2, seg: &SegmentSpec) -> Result<Point2, StructureError> {
    Ok(seg.normalizer(p)?)
}

/// Shared state of the builders: the graph under construction and the slot table.
pub struct StructureBuilder<'a> {
    pub dom: &'a DomainSpec,
    pub graph: FieldGraph,
    slots: Vec<String>,
    names: Vec<String>,
}

impl<'a> StructureBuilder<'a> {
    pub fn new(dom: &'a DomainSpec, opts: &BuildOptions) -> Result<Self, StructureError> {
        let n = dom.n_components();
        let names = if opts.component_names.is_empty() {
            if n == 1 {
                vec!["u".to_string()]
            } else {
                (1..=n).map(|k| format!("u{k}")).collect()
            }
        } else {
            opts.component_names.clone()
        };
        if names.len() != n {
            return Err(StructureError::ComponentNames {
                expected: n,
                found: names.len(),
            });
        }
        for ov in opts.remainder_override.iter().flatten() {
            if let Some(&(s, _)) = ov.iter().find(|(s, _)| *s >= dom.segments.len()) {
                return Err(StructureError::BadOverride(s));
            }
        }
        Ok(StructureBuilder {
            dom,
            graph: FieldGraph::new(),
            slots: Vec::new(),
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.dom.n_components()
    }

    /// Slot name `base[_sub][^comp]`; the component suffix only for systems.
    pub fn slot_name(&self, base: &str, sub: Option<&str>, comp: Option<&str>) -> String {
        let mut s = base.to_string();
        if let Some(sub) = sub {
            s.push('_');
            s.push_str(sub);
        }
        if let (Some(c), true) = (comp, self.n() > 1) {
            s.push('^');
            s.push_str(c);
        }
        s
    }

    pub fn comp_name(&self, c: usize) -> String {
        self.names[c].clone()
    }

    /// The slot with this name, created on first use.
    pub fn slot(&mut self, name: String) -> NodeId {
        let k = match self.slots.iter().position(|s| *s == name) {
            Some(k) => k,
            None => {
                self.slots.push(name);
                self.slots.len() - 1
            }
        };
        self.graph.slot(k)
    }

    pub fn data(&mut self, e: &Expr) -> NodeId {
        self.graph.data(e)
    }

    /// `(segment, mu)` over all segments.
    pub fn all_terms(&self) -> Vec<(usize, u32)> {
        self.dom
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.mu()))
            .collect()
    }

    /// `Σ_i w_i f_i` over the given weight terms.
    pub fn blend_weights(&mut self, terms: &[(usize, u32)], fields: &[NodeId]) -> NodeId {
        let parts: Vec<NodeId> = fields
            .iter()
            .enumerate()
            .map(|(k, &f)| {
                let w = self.graph.weight(terms.to_vec(), k);
                self.graph.mul(w, f)
            })
            .collect();
        self.graph.sum(&parts)
    }

    /// `(phi_B u_A + phi_A u_B) / (phi_A + phi_B)` for intersection points A, B.
    pub fn blend_points(&mut self, a: usize, b: usize, ua: NodeId, ub: NodeId) -> NodeId {
        let g = &mut self.graph;
        let pa = g.point_dist(a);
        let pb = g.point_dist(b);
        let l = g.mul(pb, ua);
        let r = g.mul(pa, ub);
        let num = g.add(l, r);
        let den = g.add(pa, pb);
        g.div(num, den)
    }

    /// `phi_A phi_B`.
    pub fn point_bubble(&mut self, a: usize, b: usize) -> NodeId {
        let pa = self.graph.point_dist(a);
        let pb = self.graph.point_dist(b);
        self.graph.mul(pa, pb)
    }

    /// Dirichlet local structure `g`, plus `phi_bar PsiTilde_i` when the
    /// segment's distance has a vanishing gradient.
    pub fn local_dirichlet(&mut self, seg: usize, row: usize) -> NodeId {
        let spec = &self.dom.segments[seg];
        let crate::geometry::RowKind::Dirichlet { g } = &spec.rows[row].kind else {
            panic!("local_dirichlet on a non-dirichlet row");
        };
        let (g, vg, sname) = (g.clone(), spec.vanishing_gradient, spec.name.clone());
        let gn = self.data(&g);
        if !vg {
            return gn;
        }
        let comp = self.row_comp_name(seg, row);
        let name = self.slot_name("PsiTilde", Some(&sname), comp.as_deref());
        let t = self.slot(name);
        let pb = self.graph.phi_bar(seg);
        let extra = self.graph.mul(pb, t);
        self.graph.add(gn, extra)
    }

    /// Robin local structure `psi - phi_bar (∇phi_bar·∇psi) + phi_bar f` with
    /// `f` the already assembled `c·Ψ - h` term.
    pub fn local_robin_glss(&mut self, seg: usize, psi: NodeId, f: NodeId) -> NodeId {
        let g = &mut self.graph;
        let pb = g.phi_bar(seg);
        let nd = g.normal_dot_grad(seg, psi);
        let a = g.mul(pb, nd);
        let b = g.mul(pb, f);
        let v = g.sub(psi, a);
        g.add(v, b)
    }

    /// Component suffix for a row: the component name when the basis is a unit vector.
    pub fn row_comp_name(&self, seg: usize, row: usize) -> Option<String> {
        let b = &self.dom.segments[seg].rows[row].basis;
        Some(self.vector_name(b, row))
    }

    pub fn vector_name(&self, b: &[f64], fallback: usize) -> String {
        match unit_axis(b) {
            Some(c) => self.comp_name(c),
            None => format!("({})", fallback + 1),
        }
    }

    /// `Σ_m c_m(x) v_m` for a data vector `c` and constant vector `v`.
    pub fn data_dot(&mut self, c: &[Expr], v: &[f64]) -> NodeId {
        let mut parts = Vec::new();
        for (e, &x) in c.iter().zip(v) {
            if x == 0.0 {
                continue;
            }
            let d = self.data(e);
            parts.push(self.graph.scale(x, d));
        }
        self.graph.sum(&parts)
    }

    /// Component-wise dot `Σ_m v_m f_m` for a constant vector and node vector.
    pub fn dot(&mut self, v: &[f64], f: &[NodeId]) -> NodeId {
        let parts: Vec<NodeId> = v
            .iter()
            .zip(f)
            .filter(|(x, _)| **x != 0.0)
            .map(|(&x, &n)| self.graph.scale(x, n))
            .collect();
        self.graph.sum(&parts)
    }

    /// `Psi^(c) ∏ phi_i^mu_i`, honouring a remainder override.
    pub fn remainder(&mut self, c: usize, opts: &BuildOptions) -> NodeId {
        let cn = self.comp_name(c);
        let name = self.slot_name("Psi", None, Some(&cn));
        let s = self.slot(name);
        let terms = match opts.remainder_override.get(c) {
            Some(Some(t)) => t.clone(),
            _ => self.all_terms(),
        };
        let d = self.graph.dist_product(terms);
        self.graph.mul(d, s)
    }

    pub fn finish(
        self,
        dom: &Arc<DomainSpec>,
        mode: BcMode,
        components: Vec<NodeId>,
        bc_terms: Vec<BcTerm>,
        locals: Vec<Vec<Option<NodeId>>>,
    ) -> SolutionStructure {
        SolutionStructure {
            mode,
            domain: dom.clone(),
            graph: self.graph,
            components,
            component_names: self.names,
            slots: self.slots,
            bc_terms,
            locals,
        }
    }
}

/// Index of the single non-zero entry if `b` is a signed unit axis vector.
fn unit_axis(b: &[f64]) -> Option<usize> {
    let nz: Vec<usize> = (0..b.len()).filter(|&k| b[k].abs() > 1e-12).collect();
    match nz.as_slice() {
        [k] if (b[*k].abs() - 1.0).abs() < 1e-12 => Some(*k),
        _ => None,
    }
}
