//! Training the slot functions of a structure: a dense ansatz, Adam with
//! milestone halving, and PDE plus boundary losses backpropagated through the
//! compiled structure.

pub mod adam;
mod checkpoint;
pub mod mlp;

use std::sync::Arc;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::stencil::SparseOp;
use crate::grid::{Evaluation, Grid, Program, ProgramError};
use crate::structure::bc::BcSet;
use crate::structure::{SolutionStructure, StructureError};

pub use adam::{scheduled_lr, Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use mlp::{Mlp, MlpCache};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("physics works on {expected} components, the structure has {found}")]
    Components { expected: usize, found: usize },
    #[error("ansatz has {found} outputs, the structure has {expected} slots")]
    SlotCount { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged {
        epoch: usize,
        loss: f64,
        report: Box<LossReport>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A PDE residual on grid fields. Residuals may be nonlinear in the fields.
pub trait Physics {
    fn n_components(&self) -> usize;
    fn n_equations(&self) -> usize;
    /// Grid nodes whose residuals enter the loss.
    fn nodes(&self) -> &[usize];
    /// `r[e][s]` for equation `e` at `nodes()[s]`.
    fn residuals(&self, u: &[&[f64]]) -> Vec<Vec<f64>>;
    /// `out[c] += Σ_e (∂r_e/∂u_c)ᵀ adj[e]`.
    fn vjp(&self, u: &[&[f64]], adj: &[Vec<f64>], out: &mut [Vec<f64>]);
}

/// `r = (A u_c) - f` for a linear operator acting on one component.
#[derive(Debug, Clone)]
pub struct LinearPhysics {
    pub op: SparseOp,
    pub rhs: Vec<f64>,
    pub component: usize,
    pub n_components: usize,
    nodes: Vec<usize>,
}

impl LinearPhysics {
    /// Residual nodes are the inside nodes where the operator has a stencil.
    pub fn new(op: SparseOp, rhs: Vec<f64>, grid: &Grid, component: usize, n_components: usize) -> Self {
        let nodes = grid
            .inside_nodes()
            .into_iter()
            .filter(|&k| op.is_valid(k))
            .collect();
        LinearPhysics {
            op,
            rhs,
            component,
            n_components,
            nodes,
        }
    }
}

impl Physics for LinearPhysics {
    fn n_components(&self) -> usize {
        self.n_components
    }

    fn n_equations(&self) -> usize {
        1
    }

    fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    fn residuals(&self, u: &[&[f64]]) -> Vec<Vec<f64>> {
        let f = u[self.component];
        vec![self
            .nodes
            .iter()
            .map(|&k| self.op.row(k).map(|(c, v)| v * f[c]).sum::<f64>() - self.rhs[k])
            .collect()]
    }

    fn vjp(&self, _u: &[&[f64]], adj: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let o = &mut out[self.component];
        for (&k, a) in self.nodes.iter().zip(&adj[0]) {
            for (c, v) in self.op.row(k) {
                o[c] += v * a;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Halve the learning rate every this many epochs (0: never).
    pub milestone: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub pde_weight: f64,
    pub bc_weight: f64,
    pub hidden: Vec<usize>,
    /// Sample count for boundary loss terms on circles.
    pub circle_samples: usize,
    /// Multiply each network output by a fixed gain so that a unit slot value
    /// moves the solution by about one (see [`slot_gains`]).
    pub slot_scaling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            lr0: 0.0025,
            milestone: 200,
            adam: AdamConfig::default(),
            seed: 0,
            pde_weight: 1.0,
            bc_weight: 1.0,
            hidden: vec![64; 4],
            circle_samples: 360,
            slot_scaling: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossParts {
    pub total: f64,
    pub pde: f64,
    pub bc: f64,
}

/// One epoch: losses before the update, and errors of the same fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub epoch: usize,
    pub lr: f64,
    pub loss_total: f64,
    pub loss_pde: f64,
    pub loss_bc: f64,
    pub err_l2: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub component_names: Vec<String>,
    pub rows: Vec<LossRow>,
}

impl LossReport {
    pub fn last(&self) -> Option<&LossRow> {
        self.rows.last()
    }
}

/// `‖pred - ref‖ / ‖ref‖` over the given nodes; `None` for a zero reference.
pub fn relative_l2(pred: &[f64], reference: &[f64], nodes: &[usize]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &k in nodes {
        num += (pred[k] - reference[k]).powi(2);
        den += reference[k].powi(2);
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

/// Like [`relative_l2`] after removing the mean offset between `pred` and
/// `reference`, for fields defined up to a constant.
pub fn relative_l2_mod_const(pred: &[f64], reference: &[f64], nodes: &[usize]) -> Option<f64> {
    if nodes.is_empty() {
        return None;
    }
    let shift = nodes.iter().map(|&k| pred[k] - reference[k]).sum::<f64>() / nodes.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &k in nodes {
        num += (pred[k] - shift - reference[k]).powi(2);
        den += reference[k].powi(2);
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

struct Reference {
    fields: Vec<Vec<f64>>,
    nodes: Vec<usize>,
    modulo_constant: bool,
}

/// Full-batch trainer for one structure, physics and grid.
pub struct Trainer<P: Physics> {
    pub structure: Arc<SolutionStructure>,
    pub physics: P,
    pub mlp: Mlp,
    pub cfg: TrainConfig,
    prog: Program,
    bcs: BcSet,
    adam: Adam,
    ev: Evaluation,
    gains: Vec<f64>,
    reference: Option<Reference>,
}

impl<P: Physics> Trainer<P> {
    pub fn new(
        structure: Arc<SolutionStructure>,
        grid: &Grid,
        physics: P,
        cfg: TrainConfig,
    ) -> Result<Self, TrainError> {
        if physics.n_components() != structure.n_components() {
            return Err(TrainError::Components {
                expected: physics.n_components(),
                found: structure.n_components(),
            });
        }
        let bcs = BcSet::new(&structure.domain, grid, &structure.bc_terms, cfg.circle_samples)?;
        let prog = Program::compile(structure.clone(), grid, &bcs.point_sets)?;
        let mut sizes = vec![2];
        sizes.extend(&cfg.hidden);
        sizes.push(structure.n_slots());
        let mlp = Mlp::new(sizes, structure.domain.bbox, cfg.seed);
        let adam = Adam::new(mlp.n_params(), cfg.adam);
        let mut ev = prog.new_evaluation();
        let gains = if cfg.slot_scaling {
            slot_gains(&prog, &mut ev, physics.nodes())?
        } else {
            vec![1.0; structure.n_slots()]
        };
        Ok(Trainer {
            structure,
            physics,
            mlp,
            cfg,
            prog,
            bcs,
            adam,
            ev,
            gains,
            reference: None,
        })
    }

    /// Track relative l2 errors against reference grid fields at `nodes`.
    pub fn with_reference(mut self, fields: Vec<Vec<f64>>, nodes: Vec<usize>) -> Self {
        self.reference = Some(Reference {
            fields,
            nodes,
            modulo_constant: false,
        });
        self
    }

    /// Measure errors up to an additive constant (pure Neumann problems).
    pub fn errors_modulo_constant(mut self) -> Self {
        if let Some(r) = &mut self.reference {
            r.modulo_constant = true;
        }
        self
    }

    /// Replace the ansatz, e.g. from a checkpoint.
    pub fn set_mlp(&mut self, mlp: Mlp) -> Result<(), TrainError> {
        if mlp.n_outputs() != self.structure.n_slots() {
            return Err(TrainError::SlotCount {
                expected: self.structure.n_slots(),
                found: mlp.n_outputs(),
            });
        }
        self.adam = Adam::new(mlp.n_params(), self.cfg.adam);
        self.mlp = mlp;
        Ok(())
    }

    pub fn program(&self) -> &Program {
        &self.prog
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Loss at the current parameters, with the parameter gradient if asked.
    pub fn evaluate(&mut self, want_grad: bool) -> Result<(LossParts, Option<Vec<f64>>), TrainError> {
        let (mut out, cache) = self.mlp.forward(self.prog.sites());
        for mut row in out.rows_mut() {
            row.iter_mut().zip(&self.gains).for_each(|(v, g)| *v *= g);
        }
        self.prog
            .forward_values(out.as_slice().expect("standard layout"), &mut self.ev)?;
        let n = self.structure.n_components();
        let u: Vec<&[f64]> = (0..n).map(|c| self.prog.component(&self.ev, c)).collect();

        let res = self.physics.residuals(&u);
        let count = (res.iter().map(Vec::len).sum::<usize>()).max(1) as f64;
        let pde = self.cfg.pde_weight * res.iter().flatten().map(|r| r * r).sum::<f64>() / count;

        let bc_res: Vec<Vec<f64>> = self
            .bcs
            .residuals
            .iter()
            .map(|r| r.eval(&self.prog, &self.ev))
            .collect();
        let bc_count = bc_res.iter().map(Vec::len).sum::<usize>();
        let bc = if bc_count == 0 {
            0.0
        } else {
            self.cfg.bc_weight * bc_res.iter().flatten().map(|r| r * r).sum::<f64>() / bc_count as f64
        };
        let parts = LossParts {
            total: pde + bc,
            pde,
            bc,
        };
        if !want_grad {
            return Ok((parts, None));
        }

        let (mut grid_seeds, mut point_seeds) = self.bcs.zero_seeds();
        let scale = 2.0 * self.cfg.pde_weight / count;
        let adj: Vec<Vec<f64>> = res
            .iter()
            .map(|r| r.iter().map(|v| scale * v).collect())
            .collect();
        self.physics.vjp(&u, &adj, &mut grid_seeds);
        if bc_count > 0 {
            let scale = 2.0 * self.cfg.bc_weight / bc_count as f64;
            for (r, vals) in self.bcs.residuals.iter().zip(&bc_res) {
                let adj: Vec<f64> = vals.iter().map(|v| scale * v).collect();
                r.backprop(&adj, &mut grid_seeds, &mut point_seeds);
            }
        }
        let mut slot_adj = self.prog.backward(&mut self.ev, &grid_seeds, &point_seeds);
        let ns = self.structure.n_slots();
        for row in slot_adj.chunks_mut(ns.max(1)) {
            row.iter_mut().zip(&self.gains).for_each(|(v, g)| *v *= g);
        }
        let view = ArrayView2::from_shape((slot_adj.len() / ns.max(1), ns), &slot_adj)
            .expect("slot adjoint shape");
        Ok((parts, Some(self.mlp.backward(&cache, view))))
    }

    /// Grid values of every component after the last evaluation.
    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.structure.n_components())
            .map(|c| self.prog.component(&self.ev, c).to_vec())
            .collect()
    }

    /// Relative l2 errors of the last evaluation (NaN without a reference or
    /// for a zero reference component).
    pub fn errors(&self) -> Vec<f64> {
        let Some(r) = &self.reference else {
            return Vec::new();
        };
        (0..self.structure.n_components())
            .map(|c| {
                let metric = if r.modulo_constant {
                    relative_l2_mod_const
                } else {
                    relative_l2
                };
                metric(self.prog.component(&self.ev, c), &r.fields[c], &r.nodes).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// One Adam step at epoch `epoch`.
    pub fn step(&mut self, epoch: usize) -> Result<LossRow, TrainError> {
        let (parts, grad) = self.evaluate(true)?;
        let lr = scheduled_lr(self.cfg.lr0, self.cfg.milestone, epoch);
        let row = LossRow {
            epoch,
            lr,
            loss_total: parts.total,
            loss_pde: parts.pde,
            loss_bc: parts.bc,
            err_l2: self.errors(),
        };
        if parts.total.is_finite() && parts.total <= 1e12 {
            self.adam.step(&mut self.mlp.params, &grad.expect("gradient requested"), lr);
        }
        Ok(row)
    }

    /// Train for `cfg.epochs`, calling `on_epoch` after every row.
    pub fn train_with(&mut self, mut on_epoch: impl FnMut(&LossRow)) -> Result<LossReport, TrainError> {
        let mut report = LossReport {
            component_names: self.structure.component_names.clone(),
            rows: Vec::with_capacity(self.cfg.epochs),
        };
        for epoch in 0..self.cfg.epochs {
            let row = self.step(epoch)?;
            on_epoch(&row);
            let loss = row.loss_total;
            report.rows.push(row);
            if !loss.is_finite() || loss > 1e12 {
                return Err(TrainError::Diverged {
                    epoch,
                    loss,
                    report: Box::new(report),
                });
            }
        }
        // Leave the evaluation at the final parameters.
        self.evaluate(false)?;
        Ok(report)
    }

    pub fn train(&mut self) -> Result<LossReport, TrainError> {
        self.train_with(|_| {})
    }
}

/// Per slot, the reciprocal RMS over `nodes` of the change in all components
/// when that slot is the constant 1 and the others are 0. Structures are
/// affine in their slots, so this fixes the scale at which each network output
/// acts; remainder products of many distances would otherwise need very large
/// outputs. Slots without effect keep gain 1.
pub fn slot_gains(prog: &Program, ev: &mut Evaluation, nodes: &[usize]) -> Result<Vec<f64>, TrainError> {
    let ns = prog.n_slots();
    let n_sites = prog.sites().len();
    let nc = prog.structure().n_components();
    let fields = |ev: &Evaluation| -> Vec<Vec<f64>> { (0..nc).map(|c| prog.component(ev, c).to_vec()).collect() };
    let mut vals = vec![0.0; n_sites * ns];
    prog.forward_values(&vals, ev)?;
    let base = fields(ev);
    let mut gains = Vec::with_capacity(ns);
    for k in 0..ns {
        vals.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..n_sites {
            vals[s * ns + k] = 1.0;
        }
        prog.forward_values(&vals, ev)?;
        let (mut sum, mut count) = (0.0, 0usize);
        for (f, b) in fields(ev).iter().zip(&base) {
            for &i in nodes {
                let d = f[i] - b[i];
                if d.is_finite() {
                    sum += d * d;
                    count += 1;
                }
            }
        }
        let rms = (sum / count.max(1) as f64).sqrt();
        gains.push(if rms > 1e-300 && rms.is_finite() { 1.0 / rms } else { 1.0 });
    }
    Ok(gains)
}

/// One parameter of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradSample {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Compare the analytic gradient with central differences of step `h` on `n`
/// random parameters. The relative error uses `max(|a|, |n|)` with a floor of
/// `1e-8` times the largest gradient entry so that vanishing entries do not
/// divide by zero.
pub fn gradient_check<P: Physics>(
    t: &mut Trainer<P>,
    n: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<GradSample>, TrainError> {
    let (_, g) = t.evaluate(true)?;
    let g = g.expect("gradient requested");
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, g.len(), n.min(g.len()));
    let mut out = Vec::new();
    for index in picks.into_iter() {
        let p0 = t.mlp.params[index];
        t.mlp.params[index] = p0 + h;
        let (lp, _) = t.evaluate(false)?;
        t.mlp.params[index] = p0 - h;
        let (lm, _) = t.evaluate(false)?;
        t.mlp.params[index] = p0;
        let numeric = (lp.total - lm.total) / (2.0 * h);
        let analytic = g[index];
        let den = analytic.abs().max(numeric.abs()).max(1e-8 * gmax).max(f64::MIN_POSITIVE);
        out.push(GradSample {
            index,
            analytic,
            numeric,
            rel_err: (analytic - numeric).abs() / den,
        });
    }
    t.evaluate(false)?;
    Ok(out)
}

#[cfg(test)]
mod tests;
