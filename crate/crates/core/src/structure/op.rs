//! Orthogonal-projection structures: Robin local structures read their
//! boundary value and derivative at the projection onto the segment's line.

use std::sync::Arc;

use super::{BcMode, BuildOptions, NodeId, SolutionStructure, StructureBuilder, StructureError};
use crate::geometry::{DomainSpec, RowKind};

/// `g^(j) + PsiTilde^(j) ∏ phi_i` over the segments whose row `j` is Dirichlet,
/// with `g^(j)` the transfinite interpolant of their data.
pub(super) fn dirichlet_fit(b: &mut StructureBuilder<'_>, j: usize, slot: NodeId) -> NodeId {
    let dom = b.dom;
    let mut terms = Vec::new();
    let mut data = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        if let RowKind::Dirichlet { g } = &seg.rows[j].kind {
            terms.push((i, 1));
            data.push(b.data(g));
        }
    }
    let interp = if data.is_empty() {
        b.graph.constant(0.0)
    } else {
        b.blend_weights(&terms, &data)
    };
    let d = b.graph.dist_product(terms);
    let t = b.graph.mul(d, slot);
    b.graph.add(interp, t)
}

/// Error unless every segment uses the same basis as the first.
pub(super) fn shared_basis(dom: &DomainSpec) -> Result<Vec<Vec<f64>>, StructureError> {
    let first: Vec<Vec<f64>> = dom.segments[0].rows.iter().map(|r| r.basis.clone()).collect();
    for seg in &dom.segments[1..] {
        for (r, f) in seg.rows.iter().zip(&first) {
            if r.basis.iter().zip(f).any(|(x, y)| (x - y).abs() > 1e-12) {
                return Err(StructureError::MixedBases(seg.name.clone()));
            }
        }
    }
    Ok(first)
}

/// `Project(value, i) + phi_bar_i Project(f, i)`.
fn taylor(b: &mut StructureBuilder<'_>, i: usize, value: NodeId, f: NodeId) -> Result<NodeId, StructureError> {
    let seg = &b.dom.segments[i];
    if !seg.geom.is_line() {
        return Err(StructureError::NotHyperplane(seg.name.clone()));
    }
    let pv = b.graph.project(value, i);
    let pf = b.graph.project(f, i);
    let pb = b.graph.phi_bar(i);
    let t = b.graph.mul(pb, pf);
    Ok(b.graph.add(pv, t))
}

/// Scalar OP: one boundary-value field `PsiBar = g_D + PsiTilde ∏_D phi_i`
/// shared by all Robin segments.
pub fn build_scalar_op(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    if dom.n_components() != 1 {
        return Err(StructureError::ScalarOnly("scalar op"));
    }
    let mut b = StructureBuilder::new(dom, opts)?;
    let rem = b.remainder(0, opts);
    let name = b.slot_name("PsiTilde", None, None);
    let tilde = b.slot(name);
    let bar = dirichlet_fit(&mut b, 0, tilde);
    let mut locals = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        let u = match &seg.rows[0].kind {
            RowKind::Dirichlet { .. } => b.local_dirichlet(i, 0),
            RowKind::Robin { c, h } => {
                let cn = b.data(&c[0]);
                let hn = b.data(h);
                let cp = b.graph.mul(cn, bar);
                let f = b.graph.sub(cp, hn);
                taylor(&mut b, i, bar, f)?
            }
            RowKind::Free => bar,
        };
        locals.push(vec![Some(u)]);
    }
    let terms = b.all_terms();
    let us: Vec<NodeId> = locals.iter().map(|l| l[0].unwrap()).collect();
    let bound = b.blend_weights(&terms, &us);
    let root = b.graph.add(bound, rem);
    Ok(b.finish(dom, BcMode::Op, vec![root], Vec::new(), locals))
}

/// System OP with a basis shared by all segments.
pub fn build_system_op(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    let basis = shared_basis(dom)?;
    let mut b = StructureBuilder::new(dom, opts)?;
    let n = b.n();
    let rems: Vec<NodeId> = (0..n).map(|c| b.remainder(c, opts)).collect();
    let mut bars = Vec::new();
    for (j, bj) in basis.iter().enumerate() {
        let label = b.vector_name(bj, j);
        let name = b.slot_name("PsiTilde", None, Some(&label));
        let t = b.slot(name);
        bars.push(dirichlet_fit(&mut b, j, t));
    }
    let mut locals: Vec<Vec<Option<NodeId>>> = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        let mut us = Vec::new();
        for (j, row) in seg.rows.iter().enumerate() {
            let u = match &row.kind {
                RowKind::Dirichlet { .. } => b.local_dirichlet(i, j),
                RowKind::Robin { c, h } => {
                    let mut parts = Vec::new();
                    for (k, rk) in seg.rows.iter().enumerate() {
                        if !rk.is_dirichlet() {
                            let coef = b.data_dot(c, &basis[k]);
                            parts.push(b.graph.mul(coef, bars[k]));
                        }
                    }
                    let cp = b.graph.sum(&parts);
                    let hn = b.data(h);
                    let f = b.graph.sub(cp, hn);
                    taylor(&mut b, i, bars[j], f)?
                }
                RowKind::Free => bars[j],
            };
            us.push(Some(u));
        }
        locals.push(us);
    }
    let terms = b.all_terms();
    let mut roots = Vec::new();
    for c in 0..n {
        let mut parts = Vec::new();
        for (j, bj) in basis.iter().enumerate() {
            if bj[c] == 0.0 {
                continue;
            }
            let us: Vec<NodeId> = locals.iter().map(|l| l[j].unwrap()).collect();
            let s = b.blend_weights(&terms, &us);
            parts.push(b.graph.scale(bj[c], s));
        }
        let bound = b.graph.sum(&parts);
        roots.push(b.graph.add(bound, rems[c]));
    }
    Ok(b.finish(dom, BcMode::Op, roots, Vec::new(), locals))
}
