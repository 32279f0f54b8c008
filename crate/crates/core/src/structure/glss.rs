//! Generalized local solution structures, scalar and system case.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    BcMode, BuildOptions, CornerBubble, NodeId, SolutionStructure, StructureBuilder,
    StructureError,
};
use crate::geometry::{DomainSpec, RowKind};
use crate::grid::invert;

/// `Ψ_i` for every non-Dirichlet segment of a scalar problem: a blend of the
/// neighbouring end values with an optional bubble, or a fresh slot for a
/// segment without intersection points.
pub fn resolve_intersections_scalar(
    b: &mut StructureBuilder<'_>,
    bubble: CornerBubble,
) -> Vec<Option<NodeId>> {
    let dom = b.dom;
    let mut out = vec![None; dom.segments.len()];
    for (i, seg) in dom.segments.iter().enumerate() {
        if seg.rows[0].is_dirichlet() {
            continue;
        }
        let pts = dom.points_of(i);
        if pts.len() != 2 {
            let name = b.slot_name("Psi", Some(&seg.name), None);
            out[i] = Some(b.slot(name));
            continue;
        }
        let mut ends = Vec::new();
        let mut all_dirichlet = true;
        for &k in &pts {
            let other = &dom.segments[dom.other_segment(k, i)];
            let u = match &other.rows[0].kind {
                RowKind::Dirichlet { g } => b.data(g),
                _ => {
                    all_dirichlet = false;
                    let name = b.slot_name("Psi", Some(&dom.points[k].name), None);
                    b.slot(name)
                }
            };
            ends.push(u);
        }
        let mut psi = b.blend_points(pts[0], pts[1], ends[0], ends[1]);
        if all_dirichlet || bubble == CornerBubble::Always {
            let name = b.slot_name("PsiBar", Some(&seg.name), None);
            let s = b.slot(name);
            let pp = b.point_bubble(pts[0], pts[1]);
            let t = b.graph.mul(pp, s);
            psi = b.graph.add(psi, t);
        }
        out[i] = Some(psi);
    }
    out
}

/// Scalar GLSS: `u = Σ w_i u_i + Ψ ∏ phi_i^mu_i`.
pub fn build_scalar_glss(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    if dom.n_components() != 1 {
        return Err(StructureError::ScalarOnly("scalar glss"));
    }
    let mut b = StructureBuilder::new(dom, opts)?;
    let rem = b.remainder(0, opts);
    let psis = resolve_intersections_scalar(&mut b, opts.corner_bubble);
    let mut locals = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        let u = match &seg.rows[0].kind {
            RowKind::Dirichlet { .. } => b.local_dirichlet(i, 0),
            RowKind::Robin { c, h } => {
                let psi = psis[i].expect("robin segments are resolved");
                let cn = b.data(&c[0]);
                let hn = b.data(h);
                let cp = b.graph.mul(cn, psi);
                let f = b.graph.sub(cp, hn);
                b.local_robin_glss(i, psi, f)
            }
            RowKind::Free => psis[i].expect("free segments are resolved"),
        };
        locals.push(vec![Some(u)]);
    }
    let terms = b.all_terms();
    let us: Vec<NodeId> = locals.iter().map(|l| l[0].unwrap()).collect();
    let bound = b.blend_weights(&terms, &us);
    let root = b.graph.add(bound, rem);
    Ok(b.finish(dom, BcMode::Glss, vec![root], Vec::new(), locals))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Part of `v` orthogonal to an orthonormal set.
fn orth_residual(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for q in basis {
        let d = dotv(&r, q);
        for (x, y) in r.iter_mut().zip(q) {
            *x -= d * y;
        }
    }
    r
}

const RANK_TOL: f64 = 1e-9;

/// Vector functions `u_P` at every intersection point touching a segment with
/// a non-Dirichlet row: the Dirichlet rows at `P` fix the part in their span,
/// fresh slots fill the orthogonal complement.
fn intersection_functions(
    b: &mut StructureBuilder<'_>,
) -> Result<BTreeMap<usize, Vec<NodeId>>, StructureError> {
    let dom = b.dom;
    let n = b.n();
    let mut ip: Vec<usize> = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        if !seg.is_pure_dirichlet() {
            ip.extend(dom.points_of(i));
        }
    }
    ip.sort_unstable();
    ip.dedup();
    let mut out = BTreeMap::new();
    for k in ip {
        let pt = &dom.points[k];
        let p = pt.point;
        // Independent Dirichlet rows (b, g) and the dependent ones for the consistency check.
        let mut rows: Vec<(Vec<f64>, crate::expr::Expr)> = Vec::new();
        let mut dependent: Vec<(Vec<f64>, crate::expr::Expr)> = Vec::new();
        let mut q: Vec<Vec<f64>> = Vec::new();
        for &s in &pt.segments {
            for row in &dom.segments[s].rows {
                let RowKind::Dirichlet { g } = &row.kind else {
                    continue;
                };
                let r = orth_residual(&row.basis, &q);
                let nr = norm(&r);
                if nr > RANK_TOL {
                    q.push(r.iter().map(|x| x / nr).collect());
                    rows.push((row.basis.clone(), g.clone()));
                } else {
                    dependent.push((row.basis.clone(), g.clone()));
                }
            }
        }
        let d = q.len();
        let a: Vec<Vec<f64>> = rows
            .iter()
            .map(|(bv, _)| q.iter().map(|ql| dotv(bv, ql)).collect())
            .collect();
        let inv = if d > 0 {
            invert(&a).ok_or_else(|| StructureError::IllPosed {
                point: pt.name.clone(),
                message: "singular dirichlet system".into(),
            })?
        } else {
            Vec::new()
        };
        let eval = |g: &crate::expr::Expr| g.eval_xy(p.x, p.y);
        let g_at: Vec<f64> = rows
            .iter()
            .map(|(_, g)| eval(g))
            .collect::<Result<_, _>>()
            .map_err(|e| StructureError::IllPosed {
                point: pt.name.clone(),
                message: e.to_string(),
            })?;
        let gp_at: Vec<f64> = (0..d)
            .map(|l| (0..d).map(|m| inv[l][m] * g_at[m]).sum())
            .collect();
        for (bv, g) in &dependent {
            let want = eval(g).map_err(|e| StructureError::IllPosed {
                point: pt.name.clone(),
                message: e.to_string(),
            })?;
            let have: f64 = (0..d).map(|l| dotv(bv, &q[l]) * gp_at[l]).sum();
            if (have - want).abs() > 1e-9 * (1.0 + want.abs()) {
                return Err(StructureError::IllPosed {
                    point: pt.name.clone(),
                    message: format!(
                        "dependent dirichlet rows disagree ({have} vs {want})"
                    ),
                });
            }
        }
        // g_P^(l) = Σ_m inv[l][m] g_m as fields.
        let g_nodes: Vec<NodeId> = rows.iter().map(|(_, g)| b.data(g)).collect();
        let mut u: Vec<NodeId> = vec![b.graph.constant(0.0); n];
        for l in 0..d {
            let parts: Vec<NodeId> = (0..d)
                .filter(|&m| inv[l][m] != 0.0)
                .map(|m| b.graph.scale(inv[l][m], g_nodes[m]))
                .collect();
            let gl = b.graph.sum(&parts);
            for c in 0..n {
                if q[l][c] != 0.0 {
                    let t = b.graph.scale(q[l][c], gl);
                    u[c] = b.graph.add(u[c], t);
                }
            }
        }
        // Orthogonal complement from the standard basis.
        let mut full = q.clone();
        for e in 0..n {
            if full.len() == n {
                break;
            }
            let mut v = vec![0.0; n];
            v[e] = 1.0;
            let r = orth_residual(&v, &full);
            let nr = norm(&r);
            if nr > 1e-6 {
                let v: Vec<f64> = r.iter().map(|x| x / nr).collect();
                let label = b.vector_name(&v, full.len());
                let name = b.slot_name("Psi", Some(&pt.name), Some(&label));
                let s = b.slot(name);
                for c in 0..n {
                    if v[c] != 0.0 {
                        let t = b.graph.scale(v[c], s);
                        u[c] = b.graph.add(u[c], t);
                    }
                }
                full.push(v);
            }
        }
        out.insert(k, u);
    }
    Ok(out)
}

/// System GLSS: `u = Σ_i w_i Σ_j b_i^(j) u_i^(j) + [Ψ^(1..n)] ∏ phi_i^mu_i`.
pub fn build_system_glss(
    dom: &Arc<DomainSpec>,
    opts: &BuildOptions,
) -> Result<SolutionStructure, StructureError> {
    let mut b = StructureBuilder::new(dom, opts)?;
    let n = b.n();
    let rems: Vec<NodeId> = (0..n).map(|c| b.remainder(c, opts)).collect();
    let up = intersection_functions(&mut b)?;
    let mut locals: Vec<Vec<Option<NodeId>>> = Vec::new();
    for (i, seg) in dom.segments.iter().enumerate() {
        let pts = dom.points_of(i);
        // Ψ_i^(j) for every non-Dirichlet row.
        let mut psi: Vec<Option<NodeId>> = vec![None; n];
        for (j, row) in seg.rows.iter().enumerate() {
            if row.is_dirichlet() {
                continue;
            }
            let label = b.row_comp_name(i, j);
            if pts.len() == 2 {
                let ua = b.dot(&row.basis, &up[&pts[0]]);
                let ub = b.dot(&row.basis, &up[&pts[1]]);
                let mut p = b.blend_points(pts[0], pts[1], ua, ub);
                let fixed = !b.graph.depends_on_slots(ua) && !b.graph.depends_on_slots(ub);
                if fixed || opts.corner_bubble == CornerBubble::Always {
                    let name = b.slot_name("PsiBar", Some(&seg.name), label.as_deref());
                    let s = b.slot(name);
                    let pp = b.point_bubble(pts[0], pts[1]);
                    let t = b.graph.mul(pp, s);
                    p = b.graph.add(p, t);
                }
                psi[j] = Some(p);
            } else {
                let name = b.slot_name("Psi", Some(&seg.name), label.as_deref());
                psi[j] = Some(b.slot(name));
            }
        }
        let mut us = Vec::new();
        for (j, row) in seg.rows.iter().enumerate() {
            let u = match &row.kind {
                RowKind::Dirichlet { .. } => b.local_dirichlet(i, j),
                RowKind::Robin { c, h } => {
                    // f = c·Σ_{k not Dirichlet} b^(k) Ψ^(k) - h
                    let mut parts = Vec::new();
                    for (k, rk) in seg.rows.iter().enumerate() {
                        if let Some(pk) = psi[k] {
                            let coef = b.data_dot(c, &rk.basis);
                            parts.push(b.graph.mul(coef, pk));
                        }
                    }
                    let cp = b.graph.sum(&parts);
                    let hn = b.data(h);
                    let f = b.graph.sub(cp, hn);
                    b.local_robin_glss(i, psi[j].unwrap(), f)
                }
                RowKind::Free => psi[j].unwrap(),
            };
            us.push(Some(u));
        }
        locals.push(us);
    }
    let terms = b.all_terms();
    let mut roots = Vec::new();
    for c in 0..n {
        let mut per_seg = Vec::new();
        for (i, seg) in dom.segments.iter().enumerate() {
            let parts: Vec<NodeId> = seg
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.basis[c] != 0.0)
                .map(|(j, r)| b.graph.scale(r.basis[c], locals[i][j].unwrap()))
                .collect();
            per_seg.push(b.graph.sum(&parts));
        }
        let bound = b.blend_weights(&terms, &per_seg);
        roots.push(b.graph.add(bound, rems[c]));
    }
    Ok(b.finish(dom, BcMode::Glss, roots, Vec::new(), locals))
}
