//! Sparse linear finite-difference operators on a [`Grid`].
//!
//! Every operator is stored row-wise (one row per grid node) so it can be applied
//! forward and transposed for backpropagation.

use super::{Axis, Grid};

/// Sparse matrix with one row per output site.
#[derive(Debug, Clone, Default)]
pub struct SparseOp {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    valid: Vec<bool>,
}

impl SparseOp {
    pub fn new() -> Self {
        SparseOp {
            row_ptr: vec![0],
            ..Default::default()
        }
    }

    /// Append a row; `None` marks a site without a usable stencil.
    pub fn push_row(&mut self, entries: Option<&[(usize, f64)]>) {
        match entries {
            Some(e) => {
                for &(c, v) in e {
                    self.cols.push(c);
                    self.vals.push(v);
                }
                self.valid.push(true);
            }
            None => self.valid.push(false),
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn n_rows(&self) -> usize {
        self.valid.len()
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, r: usize) -> bool {
        self.valid[r]
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    /// `out = A f`. Invalid rows produce 0.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.n_rows()) {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * f[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// Multiply every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    pub fn apply_vec(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        self.apply(f, &mut out);
        out
    }

    /// `out += Aᵀ adj`.
    pub fn apply_transpose_add(&self, adj: &[f64], out: &mut [f64]) {
        for (r, &a) in adj.iter().enumerate().take(self.n_rows()) {
            if a == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k]] += self.vals[k] * a;
            }
        }
    }
}

/// Offsets usable at node `(i, j)` along `axis`, given a usability predicate.
fn neighbour(grid: &Grid, idx: usize, axis: Axis, off: isize, usable: &[bool]) -> Option<usize> {
    let (i, j) = grid.ij(idx);
    let (ii, jj) = match axis {
        Axis::X => (i as isize + off, j as isize),
        Axis::Y => (i as isize, j as isize + off),
    };
    if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.ny as isize {
        return None;
    }
    let n = grid.idx(ii as usize, jj as usize);
    usable[n].then_some(n)
}

fn spacing(grid: &Grid, axis: Axis) -> f64 {
    match axis {
        Axis::X => grid.hx,
        Axis::Y => grid.hy,
    }
}

/// Second-order first derivative: centered where possible, otherwise 3-point one-sided.
pub fn first_derivative(grid: &Grid, axis: Axis, usable: &[bool]) -> SparseOp {
    let h = spacing(grid, axis);
    let mut op = SparseOp::new();
    for idx in 0..grid.len() {
        if !usable[idx] {
            op.push_row(None);
            continue;
        }
        let nb = |o| neighbour(grid, idx, axis, o, usable);
        let row: Option<Vec<(usize, f64)>> = match (nb(-2), nb(-1), nb(1), nb(2)) {
            (_, Some(m), Some(p), _) => Some(vec![(m, -0.5 / h), (p, 0.5 / h)]),
            (_, _, Some(p1), Some(p2)) => {
                Some(vec![(idx, -1.5 / h), (p1, 2.0 / h), (p2, -0.5 / h)])
            }
            (Some(m2), Some(m1), _, _) => {
                Some(vec![(idx, 1.5 / h), (m1, -2.0 / h), (m2, 0.5 / h)])
            }
            _ => None,
        };
        op.push_row(row.as_deref());
    }
    op
}

/// Second derivative: centered 3-point, otherwise 4-point one-sided.
pub fn second_derivative(grid: &Grid, axis: Axis, usable: &[bool]) -> SparseOp {
    let h2 = spacing(grid, axis).powi(2);
    let mut op = SparseOp::new();
    for idx in 0..grid.len() {
        if !usable[idx] {
            op.push_row(None);
            continue;
        }
        let nb = |o| neighbour(grid, idx, axis, o, usable);
        let row: Option<Vec<(usize, f64)>> = if let (Some(m), Some(p)) = (nb(-1), nb(1)) {
            Some(vec![(m, 1.0 / h2), (idx, -2.0 / h2), (p, 1.0 / h2)])
        } else if let (Some(p1), Some(p2), Some(p3)) = (nb(1), nb(2), nb(3)) {
            Some(vec![
                (idx, 2.0 / h2),
                (p1, -5.0 / h2),
                (p2, 4.0 / h2),
                (p3, -1.0 / h2),
            ])
        } else if let (Some(m1), Some(m2), Some(m3)) = (nb(-1), nb(-2), nb(-3)) {
            Some(vec![
                (idx, 2.0 / h2),
                (m1, -5.0 / h2),
                (m2, 4.0 / h2),
                (m3, -1.0 / h2),
            ])
        } else {
            None
        };
        op.push_row(row.as_deref());
    }
    op
}

/// Sum of two operators with identical row sets; a row is valid only if both are.
pub fn add_ops(a: &SparseOp, b: &SparseOp) -> SparseOp {
    let mut op = SparseOp::new();
    for r in 0..a.n_rows() {
        if a.is_valid(r) && b.is_valid(r) {
            let mut e: Vec<(usize, f64)> = a.row(r).chain(b.row(r)).collect();
            e.sort_by_key(|p| p.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
            for (c, v) in e {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            op.push_row(Some(&merged));
        } else {
            op.push_row(None);
        }
    }
    op
}

/// Product `A B`; a row is valid if the row of `A` is valid and every column it
/// touches is a valid row of `B`.
pub fn compose(a: &SparseOp, b: &SparseOp) -> SparseOp {
    let mut op = SparseOp::new();
    let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
    for r in 0..a.n_rows() {
        if !a.is_valid(r) || a.row(r).any(|(c, _)| !b.is_valid(c)) {
            op.push_row(None);
            continue;
        }
        acc.clear();
        for (c, v) in a.row(r) {
            for (cc, w) in b.row(c) {
                *acc.entry(cc).or_insert(0.0) += v * w;
            }
        }
        let e: Vec<(usize, f64)> = acc.iter().map(|(&c, &v)| (c, v)).collect();
        op.push_row(Some(&e));
    }
    op
}

/// Scale each column `c` by `s[c]` (an operator acting on `s ⊙ f`).
pub fn scale_columns(a: &SparseOp, s: &[f64]) -> SparseOp {
    let mut out = a.clone();
    for (k, c) in a.cols.iter().enumerate() {
        out.vals[k] *= s[*c];
    }
    out
}
