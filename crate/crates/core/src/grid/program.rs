//! Compiled evaluation of a [`SolutionStructure`] on a grid, with reverse mode
//! through every node so slot adjoints are exact for the discrete graph.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::stencil::{first_derivative, SparseOp};
use super::{Axis, Grid};
use crate::geometry::{phi_point, GeometryError, Point2, PointClass};
use crate::structure::{Node, NodeId, SolutionStructure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("non-finite value {value} at ({x}, {y}) in node #{node} (path {path})")]
    NonFinite {
        node: u32,
        path: String,
        x: f64,
        y: f64,
        value: f64,
    },
    #[error("slot source produced {found} values, expected {expected}")]
    SlotShape { expected: usize, found: usize },
}

/// Provider of slot values at arbitrary sites.
pub trait SlotSource {
    fn n_slots(&self) -> usize;
    /// Fill `out` (row-major, `sites.len() x n_slots`).
    fn eval_slots(&mut self, sites: &[Point2], out: &mut [f64]);
}

impl<F: FnMut(Point2, &mut [f64])> SlotSource for (usize, F) {
    fn n_slots(&self) -> usize {
        self.0
    }

    fn eval_slots(&mut self, sites: &[Point2], out: &mut [f64]) {
        let n = self.0;
        for (k, p) in sites.iter().enumerate() {
            (self.1)(*p, &mut out[k * n..(k + 1) * n]);
        }
    }
}

struct Ctx {
    points: Vec<Point2>,
    /// Grid classes, for the grid context only.
    classes: Option<Vec<PointClass>>,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Slot { slot: usize, offset: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Gather { child: usize, map: Arc<Vec<usize>> },
    GradGrid { child: usize, axis: Axis },
    GradShift { plus: usize, minus: usize, inv: f64 },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Constant | Op::Slot { .. } => Vec::new(),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => vec![*a, *b],
            Op::Neg(a) => vec![*a],
            Op::Gather { child, .. } | Op::GradGrid { child, .. } => vec![*child],
            Op::GradShift { plus, minus, .. } => vec![*plus, *minus],
        }
    }
}

#[derive(Debug, Clone)]
struct Inst {
    node: NodeId,
    op: Op,
    len: usize,
    ctx: usize,
}

/// Values of every instance for one slot filling.
pub struct Evaluation {
    values: Vec<Vec<f64>>,
    adjoints: Vec<Vec<f64>>,
    slot_values: Vec<f64>,
}

impl Evaluation {
    /// Slot values used in the last forward pass (sites x slots).
    pub fn slot_values(&self) -> &[f64] {
        &self.slot_values
    }
}

/// A structure compiled against a grid and optional extra point sets.
pub struct Program {
    structure: Arc<SolutionStructure>,
    insts: Vec<Inst>,
    constants: Vec<Option<Vec<f64>>>,
    grid_roots: Vec<usize>,
    point_roots: Vec<Vec<usize>>,
    sites: Vec<Point2>,
    n_slots: usize,
    dx: Option<SparseOp>,
    dy: Option<SparseOp>,
    grid_len: usize,
    ctx_points: Vec<Vec<Point2>>,
}

/// Projected context and its site map, keyed by (context, segment).
type ProjectMemo = HashMap<(usize, usize), (usize, Arc<Vec<usize>>)>;

struct Compiler<'a> {
    ss: &'a SolutionStructure,
    ctxs: Vec<Ctx>,
    insts: Vec<Inst>,
    memo: HashMap<(NodeId, usize), usize>,
    project_memo: ProjectMemo,
    shift_memo: HashMap<(usize, Axis, bool), usize>,
    slot_ctx_offset: HashMap<usize, usize>,
    sites: Vec<Point2>,
    shift: f64,
}

impl<'a> Compiler<'a> {
    fn instantiate(&mut self, node: NodeId, ctx: usize) -> Result<usize, ProgramError> {
        if let Some(&i) = self.memo.get(&(node, ctx)) {
            return Ok(i);
        }
        let g = &self.ss.graph;
        let len = self.ctxs[ctx].points.len();
        let op = if !g.depends_on_slots(node) && !has_structural(g, node) {
            Op::Constant
        } else {
            match g.node(node).clone() {
                Node::Slot(slot) => {
                    let next = self.sites.len();
                    let offset = *self.slot_ctx_offset.entry(ctx).or_insert(next);
                    if offset == next {
                        let pts = self.ctxs[ctx].points.clone();
                        self.sites.extend(pts);
                    }
                    Op::Slot { slot, offset }
                }
                Node::Add(a, b) => Op::Add(self.instantiate(a, ctx)?, self.instantiate(b, ctx)?),
                Node::Sub(a, b) => Op::Sub(self.instantiate(a, ctx)?, self.instantiate(b, ctx)?),
                Node::Mul(a, b) => Op::Mul(self.instantiate(a, ctx)?, self.instantiate(b, ctx)?),
                Node::Div(a, b, _) => Op::Div(self.instantiate(a, ctx)?, self.instantiate(b, ctx)?),
                Node::Neg(a) => Op::Neg(self.instantiate(a, ctx)?),
                Node::Project { child, segment } => {
                    let (pctx, map) = self.project_ctx(ctx, segment)?;
                    Op::Gather {
                        child: self.instantiate(child, pctx)?,
                        map,
                    }
                }
                Node::Grad { child, axis } => {
                    if self.ctxs[ctx].classes.is_some() {
                        Op::GradGrid {
                            child: self.instantiate(child, ctx)?,
                            axis,
                        }
                    } else {
                        let p = self.shift_ctx(ctx, axis, true);
                        let m = self.shift_ctx(ctx, axis, false);
                        Op::GradShift {
                            plus: self.instantiate(child, p)?,
                            minus: self.instantiate(child, m)?,
                            inv: 0.5 / self.shift,
                        }
                    }
                }
                _ => Op::Constant,
            }
        };
        let id = self.insts.len();
        self.insts.push(Inst { node, op, len, ctx });
        self.memo.insert((node, ctx), id);
        Ok(id)
    }

    fn project_ctx(
        &mut self,
        ctx: usize,
        seg: usize,
    ) -> Result<(usize, Arc<Vec<usize>>), ProgramError> {
        if let Some(v) = self.project_memo.get(&(ctx, seg)) {
            return Ok(v.clone());
        }
        let spec = &self.ss.domain.segments[seg];
        let mut uniq: Vec<Point2> = Vec::new();
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut map = Vec::with_capacity(self.ctxs[ctx].points.len());
        for p in &self.ctxs[ctx].points {
            let q = spec.normalizer(*p)?;
            let key = (q.x.to_bits(), q.y.to_bits());
            let k = *index.entry(key).or_insert_with(|| {
                uniq.push(q);
                uniq.len() - 1
            });
            map.push(k);
        }
        self.ctxs.push(Ctx {
            points: uniq,
            classes: None,
        });
        let out = (self.ctxs.len() - 1, Arc::new(map));
        self.project_memo.insert((ctx, seg), out.clone());
        Ok(out)
    }

    fn shift_ctx(&mut self, ctx: usize, axis: Axis, plus: bool) -> usize {
        if let Some(&c) = self.shift_memo.get(&(ctx, axis, plus)) {
            return c;
        }
        let d = if plus { self.shift } else { -self.shift };
        let points = self.ctxs[ctx]
            .points
            .iter()
            .map(|p| match axis {
                Axis::X => Point2::new(p.x + d, p.y),
                Axis::Y => Point2::new(p.x, p.y + d),
            })
            .collect();
        self.ctxs.push(Ctx {
            points,
            classes: None,
        });
        let c = self.ctxs.len() - 1;
        self.shift_memo.insert((ctx, axis, plus), c);
        c
    }

    /// Values of a slot-independent node in a context.
    fn constant_values(&self, node: NodeId, ctx: usize, cache: &HashMap<(NodeId, usize), Vec<f64>>) -> Result<Vec<f64>, ProgramError> {
        let g = &self.ss.graph;
        let c = &self.ctxs[ctx];
        let dom = &self.ss.domain;
        let get = |n: NodeId| -> &Vec<f64> { &cache[&(n, ctx)] };
        let outside = |k: usize| {
            c.classes
                .as_ref()
                .is_some_and(|cl| cl[k] == PointClass::Outside)
        };
        let leaf = |f: &dyn Fn(Point2) -> Result<f64, ProgramError>| -> Result<Vec<f64>, ProgramError> {
            c.points
                .iter()
                .enumerate()
                .map(|(k, p)| match f(*p) {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ if outside(k) => Ok(0.0),
                    Ok(v) => Err(self.non_finite(node, *p, v)),
                    Err(e) => Err(e),
                })
                .collect()
        };
        let bin = |a: NodeId, b: NodeId, f: fn(f64, f64) -> f64| -> Vec<f64> {
            get(a).iter().zip(get(b)).map(|(x, y)| f(*x, *y)).collect()
        };
        let v = match g.node(node) {
            Node::Const(v) => vec![*v; c.points.len()],
            Node::Data(e) => leaf(&|p| Ok(e.eval_xy(p.x, p.y).unwrap_or(f64::NAN)))?,
            Node::Phi(s) => leaf(&|p| Ok(dom.segments[*s].boundary_distance(p)))?,
            Node::PhiGrad(s, axis) => leaf(&|p| {
                let gr = dom.segments[*s].geom.distance_gradient(p);
                Ok(gr[axis_index(*axis)])
            })?,
            Node::PhiBar(s) => leaf(&|p| Ok(dom.segments[*s].phi_bar(p)?.0))?,
            Node::PhiBarGrad(s, axis) => {
                leaf(&|p| Ok(dom.segments[*s].phi_bar(p)?.1[axis_index(*axis)]))?
            }
            Node::PointDist(k) => leaf(&|p| Ok(phi_point(dom.points[*k].point, p)))?,
            Node::DistProduct(terms) => leaf(&|p| {
                Ok(terms
                    .iter()
                    .map(|&(s, mu)| dom.segments[s].boundary_distance(p).powi(mu as i32))
                    .product())
            })?,
            Node::Weight { terms, index } => {
                leaf(&|p| Ok(crate::structure::weight_value(dom, terms, *index, p)))?
            }
            Node::Add(a, b) => bin(*a, *b, |x, y| x + y),
            Node::Sub(a, b) => bin(*a, *b, |x, y| x - y),
            Node::Mul(a, b) => bin(*a, *b, |x, y| x * y),
            Node::Div(a, b, _) => {
                let v = bin(*a, *b, |x, y| x / y);
                for (k, x) in v.iter().enumerate() {
                    if !x.is_finite() && !outside(k) {
                        return Err(self.non_finite(node, c.points[k], *x));
                    }
                }
                v.into_iter().map(|x| if x.is_finite() { x } else { 0.0 }).collect()
            }
            Node::Neg(a) => get(*a).iter().map(|x| -x).collect(),
            Node::Slot(_) | Node::Project { .. } | Node::Grad { .. } => {
                unreachable!("structural nodes are never constant-folded")
            }
        };
        Ok(v)
    }

    fn non_finite(&self, node: NodeId, p: Point2, value: f64) -> ProgramError {
        let path = self
            .ss
            .graph
            .path_to(&self.ss.components, node)
            .map(|p| {
                p.iter()
                    .map(|n| format!("#{}", n.0))
                    .collect::<Vec<_>>()
                    .join(" > ")
            })
            .unwrap_or_default();
        ProgramError::NonFinite {
            node: node.0,
            path,
            x: p.x,
            y: p.y,
            value,
        }
    }
}

fn axis_index(a: Axis) -> usize {
    match a {
        Axis::X => 0,
        Axis::Y => 1,
    }
}

/// Nodes containing projections or gradients are evaluated through instances
/// even when slot-independent, since they need derived contexts.
fn has_structural(g: &crate::structure::FieldGraph, node: NodeId) -> bool {
    match g.node(node) {
        Node::Project { .. } | Node::Grad { .. } => true,
        other => other.children().iter().any(|c| has_structural(g, *c)),
    }
}

impl Program {
    /// Compile for the grid plus any extra point sets (each gets every component).
    pub fn compile(
        structure: Arc<SolutionStructure>,
        grid: &Grid,
        point_sets: &[Vec<Point2>],
    ) -> Result<Program, ProgramError> {
        let ss: &SolutionStructure = &structure;
        let mut c = Compiler {
            ss,
            ctxs: vec![Ctx {
                points: grid.points(),
                classes: Some(grid.mask().to_vec()),
            }],
            insts: Vec::new(),
            memo: HashMap::new(),
            project_memo: HashMap::new(),
            shift_memo: HashMap::new(),
            slot_ctx_offset: HashMap::new(),
            sites: Vec::new(),
            shift: 1e-5 * ss.domain.bbox.diagonal(),
        };
        let mut grid_roots = Vec::new();
        for &root in &ss.components {
            grid_roots.push(c.instantiate(root, 0)?);
        }
        let mut point_roots = Vec::new();
        for pts in point_sets {
            c.ctxs.push(Ctx {
                points: pts.clone(),
                classes: None,
            });
            let ctx = c.ctxs.len() - 1;
            let mut r = Vec::new();
            for &root in &ss.components {
                r.push(c.instantiate(root, ctx)?);
            }
            point_roots.push(r);
        }
        // Precompute constant instances, bottom-up per context.
        let mut cache: HashMap<(NodeId, usize), Vec<f64>> = HashMap::new();
        let mut constants: Vec<Option<Vec<f64>>> = vec![None; c.insts.len()];
        for i in 0..c.insts.len() {
            if !matches!(c.insts[i].op, Op::Constant) {
                continue;
            }
            let (node, ctx) = (c.insts[i].node, c.insts[i].ctx);
            let v = eval_constant_tree(&c, node, ctx, &mut cache)?;
            constants[i] = Some(v);
        }
        let needs_grad = c.insts.iter().any(|i| matches!(i.op, Op::GradGrid { .. }));
        let all = vec![true; grid.len()];
        let (dx, dy) = if needs_grad {
            (
                Some(first_derivative(grid, Axis::X, &all)),
                Some(first_derivative(grid, Axis::Y, &all)),
            )
        } else {
            (None, None)
        };
        let n_slots = ss.slots.len();
        let live: Vec<bool> = c
            .insts
            .iter()
            .map(|i| ss.graph.depends_on_slots(i.node))
            .collect();
        let mut prog = Program {
            insts: c.insts,
            constants,
            grid_roots,
            point_roots,
            sites: c.sites,
            n_slots,
            dx,
            dy,
            grid_len: grid.len(),
            ctx_points: c.ctxs.into_iter().map(|c| c.points).collect(),
            structure: structure.clone(),
        };
        // Slot-independent instances that need derived contexts are evaluated once.
        let mut ev = prog.new_evaluation();
        for i in 0..prog.insts.len() {
            if !live[i] && !matches!(prog.insts[i].op, Op::Constant) {
                prog.exec(i, &mut ev)?;
            }
        }
        for i in 0..prog.insts.len() {
            if !live[i] && !matches!(prog.insts[i].op, Op::Constant) {
                prog.constants[i] = Some(std::mem::take(&mut ev.values[i]));
                prog.insts[i].op = Op::Constant;
            }
        }
        // Keep only constants read by live instances or roots.
        let mut needed = vec![false; prog.insts.len()];
        for r in prog.grid_roots.iter().chain(prog.point_roots.iter().flatten()) {
            needed[*r] = true;
        }
        for inst in &prog.insts {
            for ch in inst.op.inputs() {
                needed[ch] = true;
            }
        }
        for (i, keep) in needed.iter().enumerate() {
            if !keep {
                prog.constants[i] = None;
            }
        }
        Ok(prog)
    }

    pub fn structure(&self) -> &SolutionStructure {
        &self.structure
    }

    /// Points at which the slot source is queried, in slot-matrix row order.
    pub fn sites(&self) -> &[Point2] {
        &self.sites
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn n_instances(&self) -> usize {
        self.insts.len()
    }

    pub fn new_evaluation(&self) -> Evaluation {
        Evaluation {
            values: self
                .insts
                .iter()
                .enumerate()
                .map(|(i, inst)| match (&inst.op, &self.constants[i]) {
                    (_, Some(v)) => v.clone(),
                    (Op::Constant, None) => Vec::new(),
                    _ => vec![0.0; inst.len],
                })
                .collect(),
            adjoints: self
                .insts
                .iter()
                .map(|inst| {
                    if matches!(inst.op, Op::Constant) {
                        Vec::new()
                    } else {
                        vec![0.0; inst.len]
                    }
                })
                .collect(),
            slot_values: vec![0.0; self.sites.len() * self.n_slots],
        }
    }

    pub fn forward(&self, src: &mut dyn SlotSource, ev: &mut Evaluation) -> Result<(), ProgramError> {
        if src.n_slots() != self.n_slots {
            return Err(ProgramError::SlotShape {
                expected: self.n_slots,
                found: src.n_slots(),
            });
        }
        let mut slots = std::mem::take(&mut ev.slot_values);
        src.eval_slots(&self.sites, &mut slots);
        ev.slot_values = slots;
        self.run(ev)
    }

    /// Forward pass with precomputed slot values (sites x slots, row-major).
    pub fn forward_values(&self, slot_values: &[f64], ev: &mut Evaluation) -> Result<(), ProgramError> {
        if slot_values.len() != self.sites.len() * self.n_slots {
            return Err(ProgramError::SlotShape {
                expected: self.sites.len() * self.n_slots,
                found: slot_values.len(),
            });
        }
        ev.slot_values.copy_from_slice(slot_values);
        self.run(ev)
    }

    fn run(&self, ev: &mut Evaluation) -> Result<(), ProgramError> {
        for i in 0..self.insts.len() {
            if !matches!(self.insts[i].op, Op::Constant) {
                self.exec(i, ev)?;
            }
        }
        Ok(())
    }

    fn exec(&self, i: usize, ev: &mut Evaluation) -> Result<(), ProgramError> {
        let ns = self.n_slots;
        let inst = &self.insts[i];
        let (before, rest) = ev.values.split_at_mut(i);
        let out = &mut rest[0];
        match &inst.op {
            Op::Constant => {}
            Op::Slot { slot, offset } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = ev.slot_values[(offset + k) * ns + slot];
                }
            }
            Op::Add(a, b) => zip2(out, &before[*a], &before[*b], |x, y| x + y),
            Op::Sub(a, b) => zip2(out, &before[*a], &before[*b], |x, y| x - y),
            Op::Mul(a, b) => zip2(out, &before[*a], &before[*b], |x, y| x * y),
            Op::Div(a, b) => zip2(out, &before[*a], &before[*b], |x, y| x / y),
            Op::Neg(a) => {
                for (o, x) in out.iter_mut().zip(&before[*a]) {
                    *o = -x;
                }
            }
            Op::Gather { child, map } => {
                let src = &before[*child];
                for (o, &m) in out.iter_mut().zip(map.iter()) {
                    *o = src[m];
                }
            }
            Op::GradGrid { child, axis } => self.stencil(*axis).apply(&before[*child], out),
            Op::GradShift { plus, minus, inv } => {
                zip2(out, &before[*plus], &before[*minus], |p, m| (p - m) * inv)
            }
        }
        if let Some(k) = out.iter().position(|v| !v.is_finite()) {
            let p = self.ctx_points[inst.ctx][k];
            return Err(ProgramError::NonFinite {
                node: inst.node.0,
                path: self.path(inst.node),
                x: p.x,
                y: p.y,
                value: out[k],
            });
        }
        Ok(())
    }

    fn path(&self, node: NodeId) -> String {
        let ss = &self.structure;
        ss.graph
            .path_to(&ss.components, node)
            .map(|p| p.iter().map(|n| format!("#{}", n.0)).collect::<Vec<_>>().join(" > "))
            .unwrap_or_default()
    }

    fn stencil(&self, axis: Axis) -> &SparseOp {
        match axis {
            Axis::X => self.dx.as_ref().expect("gradient stencils compiled"),
            Axis::Y => self.dy.as_ref().expect("gradient stencils compiled"),
        }
    }

    /// Component values on the grid after a forward pass.
    pub fn component<'e>(&self, ev: &'e Evaluation, c: usize) -> &'e [f64] {
        &ev.values[self.grid_roots[c]]
    }

    /// Component values at the points of extra point set `set`.
    pub fn point_component<'e>(&self, ev: &'e Evaluation, set: usize, c: usize) -> &'e [f64] {
        &ev.values[self.point_roots[set][c]]
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    /// Reverse pass. `grid_seeds[c]` is the adjoint of component `c` on the grid
    /// (may be empty for none), `point_seeds[s][c]` likewise for point sets.
    /// Returns slot adjoints (sites x slots, row-major).
    pub fn backward(
        &self,
        ev: &mut Evaluation,
        grid_seeds: &[Vec<f64>],
        point_seeds: &[Vec<Vec<f64>>],
    ) -> Vec<f64> {
        for a in ev.adjoints.iter_mut() {
            a.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut seed = |inst: usize, s: &[f64]| {
            if s.is_empty() || ev.adjoints[inst].is_empty() {
                return;
            }
            for (a, v) in ev.adjoints[inst].iter_mut().zip(s) {
                *a += v;
            }
        };
        for (c, s) in grid_seeds.iter().enumerate() {
            seed(self.grid_roots[c], s);
        }
        for (set, seeds) in point_seeds.iter().enumerate() {
            for (c, s) in seeds.iter().enumerate() {
                seed(self.point_roots[set][c], s);
            }
        }
        let ns = self.n_slots;
        let mut slot_adj = vec![0.0; self.sites.len() * ns];
        for i in (0..self.insts.len()).rev() {
            if ev.adjoints[i].is_empty() {
                continue;
            }
            let adj = std::mem::take(&mut ev.adjoints[i]);
            let vals = &ev.values;
            let adjs = &mut ev.adjoints;
            let mut acc = |target: usize, f: &dyn Fn(usize, f64) -> f64| {
                if adjs[target].is_empty() {
                    return;
                }
                for (k, (t, a)) in adjs[target].iter_mut().zip(&adj).enumerate() {
                    *t += f(k, *a);
                }
            };
            match &self.insts[i].op {
                Op::Constant => {}
                Op::Slot { slot, offset } => {
                    for (k, a) in adj.iter().enumerate() {
                        slot_adj[(offset + k) * ns + slot] += a;
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, &|_, g| g);
                    acc(*b, &|_, g| g);
                }
                Op::Sub(a, b) => {
                    acc(*a, &|_, g| g);
                    acc(*b, &|_, g| -g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&vals[*a], &vals[*b]);
                    acc(*a, &|k, g| g * vb[k]);
                    acc(*b, &|k, g| g * va[k]);
                }
                Op::Div(a, b) => {
                    let (va, vb) = (&vals[*a], &vals[*b]);
                    acc(*a, &|k, g| g / vb[k]);
                    acc(*b, &|k, g| -g * va[k] / (vb[k] * vb[k]));
                }
                Op::Neg(a) => acc(*a, &|_, g| -g),
                Op::Gather { child, map } => {
                    if !adjs[*child].is_empty() {
                        let t = &mut adjs[*child];
                        for (k, &m) in map.iter().enumerate() {
                            t[m] += adj[k];
                        }
                    }
                }
                Op::GradGrid { child, axis } => {
                    if !adjs[*child].is_empty() {
                        self.stencil(*axis).apply_transpose_add(&adj, &mut adjs[*child]);
                    }
                }
                Op::GradShift { plus, minus, inv } => {
                    let inv = *inv;
                    acc(*plus, &|_, g| g * inv);
                    acc(*minus, &|_, g| -g * inv);
                }
            }
            ev.adjoints[i] = adj;
        }
        slot_adj
    }
}

fn zip2(out: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = f(*x, *y);
    }
}

fn eval_constant_tree(
    c: &Compiler<'_>,
    node: NodeId,
    ctx: usize,
    cache: &mut HashMap<(NodeId, usize), Vec<f64>>,
) -> Result<Vec<f64>, ProgramError> {
    if let Some(v) = cache.get(&(node, ctx)) {
        return Ok(v.clone());
    }
    for child in c.ss.graph.node(node).children() {
        if !cache.contains_key(&(child, ctx)) {
            let v = eval_constant_tree(c, child, ctx, cache)?;
            cache.insert((child, ctx), v);
        }
    }
    let v = c.constant_values(node, ctx, cache)?;
    cache.insert((node, ctx), v.clone());
    Ok(v)
}
