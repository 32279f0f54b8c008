//! Comparison structures: semi-weak, weak and the legacy local structures.

use std::sync::Arc;

use super::op::{dirichlet_fit, shared_basis};
use super::{BcMode, BcTerm, BuildOptions, NodeId, SolutionStructure, StructureBuilder, StructureError};
use crate::geometry::{DomainSpec, RowKind};
use crate::grid::Axis;

/// Dirichlet rows exact through their interpolant and a distance product,
/// Robin rows as loss terms.
pub fn build_semi_weak(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    let basis = shared_basis(dom)?;
    let mut b = StructureBuilder::new(dom, opts)?;
    let n = b.n();
    let mut fits = Vec::new();
    for (j, bj) in basis.iter().enumerate() {
        let label = b.vector_name(bj, j);
        let name = b.slot_name("Psi", None, Some(&label));
        let s = b.slot(name);
        fits.push(dirichlet_fit(&mut b, j, s));
    }
    let roots = combine(&mut b, &basis, &fits, n);
    let terms = rows_where(dom, |k| matches!(k, RowKind::Robin { .. }));
    Ok(b.finish(dom, BcMode::SemiWeak, roots, terms, Vec::new()))
}

/// Plain slots; every boundary row becomes a loss term.
pub fn build_weak(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    let mut b = StructureBuilder::new(dom, opts)?;
    let roots = (0..b.n())
        .map(|c| {
            let cn = b.comp_name(c);
            let name = b.slot_name("Psi", None, Some(&cn));
            b.slot(name)
        })
        .collect();
    let terms = rows_where(dom, |k| !matches!(k, RowKind::Free));
    Ok(b.finish(dom, BcMode::Weak, roots, terms, Vec::new()))
}

/// Local structures using the true distance as both distance and normalized
/// function, with its analytic gradient and one independent slot per Robin
/// segment.
pub fn build_legacy_sukumar(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    if dom.n_components() != 1 {
        return Err(StructureError::ScalarOnly("legacy-sukumar"));
    }
    let mut b = StructureBuilder::new(dom, opts)?;
    let rem = b.remainder(0, opts);
    let mut locals = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        let u = match &seg.rows[0].kind {
            RowKind::Dirichlet { g } => b.data(g),
            RowKind::Robin { c, h } => {
                let name = b.slot_name("Psi", Some(&seg.name), None);
                let psi = b.slot(name);
                let g = &mut b.graph;
                let phi = g.phi(i);
                let gx = g.phi_grad(i, Axis::X);
                let gy = g.phi_grad(i, Axis::Y);
                let px = g.grad(psi, Axis::X);
                let py = g.grad(psi, Axis::Y);
                let ax = g.mul(gx, px);
                let ay = g.mul(gy, py);
                let nd = g.add(ax, ay);
                let t = g.mul(phi, nd);
                let v = g.sub(psi, t);
                let cn = b.data(&c[0]);
                let hn = b.data(h);
                let g = &mut b.graph;
                let cp = g.mul(cn, psi);
                let f = g.sub(cp, hn);
                let d = g.mul(phi, f);
                g.add(v, d)
            }
            RowKind::Free => {
                let name = b.slot_name("Psi", Some(&seg.name), None);
                b.slot(name)
            }
        };
        locals.push(vec![Some(u)]);
    }
    let terms = b.all_terms();
    let us: Vec<NodeId> = locals.iter().map(|l| l[0].unwrap()).collect();
    let bound = b.blend_weights(&terms, &us);
    let root = b.graph.add(bound, rem);
    Ok(b.finish(dom, BcMode::LegacySukumar, vec![root], Vec::new(), locals))
}

fn combine(b: &mut StructureBuilder<'_>, basis: &[Vec<f64>], fields: &[NodeId], n: usize) -> Vec<NodeId> {
    (0..n)
        .map(|c| {
            let parts: Vec<NodeId> = basis
                .iter()
                .zip(fields)
                .filter(|(bj, _)| bj[c] != 0.0)
                .map(|(bj, &f)| b.graph.scale(bj[c], f))
                .collect();
            b.graph.sum(&parts)
        })
        .collect()
}

fn rows_where(dom: &DomainSpec, keep: impl Fn(&RowKind) -> bool) -> Vec<BcTerm> {
    let mut out = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        for (j, row) in seg.rows.iter().enumerate() {
            if keep(&row.kind) {
                out.push(BcTerm { segment: i, row: j });
            }
        }
    }
    out
}
