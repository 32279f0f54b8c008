//! Build, train, evaluate and emit one run; structure verification per problem.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use hardbc_core::grid::Grid;
use hardbc_core::structure::{verify_bc, BcMode, VerifyOptions};
use hardbc_core::train::{save_checkpoint, Physics, LossReport, LossRow, Mlp, TrainConfig, Trainer};

use crate::metrics::{compute_diagnostics, error_nodes, load_reference_csv, Cylinder, Diagnostics};
use crate::output::{write_field_csv, write_heatmap, write_losses_csv};
use crate::physics::ProblemPhysics;
use crate::problem::{Problem, Variant};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: BcMode,
    /// Overrides of the problem file's training block.
    pub grid: Option<(usize, usize)>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub seed: u64,
    pub slot_scaling: bool,
    /// Reference fields for problems without an analytic solution.
    pub reference_csv: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(mode: BcMode) -> RunOptions {
        RunOptions {
            mode,
            grid: None,
            epochs: None,
            lr: None,
            hidden: None,
            seed: 0,
            slot_scaling: false,
            reference_csv: None,
        }
    }
}

/// Summary of one training run; one row of `results.csv`.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub problem: String,
    pub mode: BcMode,
    pub params: Option<(f64, f64)>,
    pub seed: u64,
    pub epochs: usize,
    pub grid: (usize, usize),
    /// Relative l2 error per component (NaN where no reference exists).
    pub errors: Vec<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub final_loss: f64,
    /// First-epoch loss over final loss.
    pub loss_drop: f64,
    pub wall_time_s: f64,
}

pub struct RunOutput {
    pub result: RunResult,
    pub report: LossReport,
    pub components: Vec<String>,
    pub fields: Vec<Vec<f64>>,
    /// PDE residual per equation on the grid (NaN off the residual nodes).
    pub residuals: Vec<Vec<f64>>,
    pub reference: Option<Vec<Vec<f64>>>,
    pub grid: Grid,
    pub mlp: Mlp,
    pub fingerprint: String,
}

pub fn train_config(problem: &Problem, opts: &RunOptions) -> TrainConfig {
    let t = &problem.training;
    TrainConfig {
        epochs: opts.epochs.unwrap_or(t.epochs),
        lr0: opts.lr.unwrap_or(t.lr),
        milestone: t.milestone,
        seed: opts.seed,
        pde_weight: t.pde_weight,
        bc_weight: t.bc_weight,
        hidden: opts.hidden.clone().unwrap_or_else(|| t.hidden.clone()),
        slot_scaling: opts.slot_scaling,
        ..Default::default()
    }
}

/// Train one structure on one problem instance.
pub fn run(problem: &Problem, opts: &RunOptions, on_epoch: impl FnMut(&LossRow)) -> Result<RunOutput, BenchError> {
    let start = Instant::now();
    let (nx, ny) = opts.grid.unwrap_or((problem.training.grid[0], problem.training.grid[1]));
    let grid = Grid::new(&problem.domain, nx, ny)?;
    let ss = Arc::new(problem.structure(opts.mode)?);
    let fingerprint = ss.fingerprint();
    let physics = ProblemPhysics::new(problem, &grid);
    let cfg = train_config(problem, opts);

    let reference = match (&opts.reference_csv, problem.reference.iter().any(Option::is_some)) {
        (Some(path), _) => Some(load_reference_csv(path, &grid, &problem.components)?),
        (None, true) => Some(
            problem
                .reference
                .iter()
                .map(|e| match e {
                    Some(e) => grid.map(|p| e.eval_xy(p.x, p.y).unwrap_or(f64::NAN)),
                    None => vec![f64::NAN; grid.len()],
                })
                .collect(),
        ),
        (None, false) => None,
    };

    let mut trainer = Trainer::new(ss, &grid, physics, cfg.clone())?;
    if let Some(r) = &reference {
        // Components without reference data get a zero field, which reports NaN.
        let present: Vec<bool> = r.iter().map(|f| f.iter().any(|v| v.is_finite())).collect();
        let nodes: Vec<usize> = error_nodes(&grid)
            .into_iter()
            .filter(|&k| r.iter().zip(&present).all(|(f, &p)| !p || f[k].is_finite()))
            .collect();
        let fields = r
            .iter()
            .zip(&present)
            .map(|(f, &p)| if p { f.clone() } else { vec![0.0; grid.len()] })
            .collect();
        trainer = trainer.with_reference(fields, nodes);
        if problem.variant == Variant::Poisson {
            trainer = trainer.errors_modulo_constant();
        }
    }
    let report = trainer.train_with(on_epoch)?;
    let fields = trainer.components();
    let residuals = {
        let u: Vec<&[f64]> = fields.iter().map(Vec::as_slice).collect();
        let nodes = trainer.physics.nodes();
        trainer
            .physics
            .residuals(&u)
            .into_iter()
            .map(|r| {
                let mut g = vec![f64::NAN; grid.len()];
                for (&k, v) in nodes.iter().zip(r) {
                    g[k] = v;
                }
                g
            })
            .collect()
    };
    let errors = if reference.is_some() {
        trainer.errors()
    } else {
        vec![f64::NAN; fields.len()]
    };
    let diagnostics = match problem.variant {
        Variant::NavierStokes { nu } => Some(compute_diagnostics(
            &fields[0],
            &fields[1],
            &fields[2],
            &grid,
            nu,
            Cylinder::default(),
            360,
        )?),
        _ => None,
    };
    let first = report.rows.first().map_or(f64::NAN, |r| r.loss_total);
    let last = report.last().map_or(f64::NAN, |r| r.loss_total);
    let params = match problem.variant {
        Variant::Darcy { alpha, beta } => Some((alpha, beta)),
        _ => None,
    };
    let result = RunResult {
        problem: problem.name.clone(),
        mode: opts.mode,
        params,
        seed: opts.seed,
        epochs: cfg.epochs,
        grid: (nx, ny),
        errors,
        diagnostics,
        final_loss: last,
        loss_drop: first / last,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        result,
        report,
        components: problem.components.clone(),
        fields,
        residuals,
        reference,
        grid,
        mlp: trainer.mlp.clone(),
        fingerprint,
    })
}

/// Write losses, fields, heatmaps and the checkpoint of one run into `dir`.
pub fn emit(dir: &Path, out: &RunOutput) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    write_losses_csv(&dir.join("losses.csv"), &out.report)?;
    for (c, name) in out.components.iter().enumerate() {
        write_field_csv(&dir.join(format!("field_{name}.csv")), &out.grid, &out.fields[c])?;
        write_heatmap(&dir.join(format!("field_{name}.png")), &out.grid, &out.fields[c])?;
        if let Some(r) = &out.reference {
            if r[c].iter().any(|v| v.is_finite()) {
                write_heatmap(&dir.join(format!("reference_{name}.png")), &out.grid, &r[c])?;
                let err: Vec<f64> = out.fields[c].iter().zip(&r[c]).map(|(a, b)| (a - b).abs()).collect();
                write_heatmap(&dir.join(format!("error_{name}.png")), &out.grid, &err)?;
            }
        }
    }
    for (e, r) in out.residuals.iter().enumerate() {
        write_heatmap(&dir.join(format!("residual_{e}.png")), &out.grid, r)?;
    }
    save_checkpoint(
        &dir.join("model.ckpt"),
        &out.mlp,
        out.result.seed,
        out.result.epochs,
        &out.fingerprint,
    )?;
    Ok(())
}

/// Run independent jobs on up to `workers` threads, keeping input order.
pub fn pool<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

#[derive(Debug, Clone)]
pub struct VerifyResult {
    pub problem: String,
    pub mode: BcMode,
    pub grids: Vec<(usize, usize)>,
    pub dirichlet_max: f64,
    /// Robin residual away from intersection points, per grid.
    pub robin: Vec<f64>,
    pub orders: Vec<f64>,
}

impl VerifyResult {
    /// Dirichlet data exact to 1e-10 and Robin residuals either at round-off
    /// or converging at second order.
    pub fn passed(&self) -> bool {
        self.dirichlet_max <= 1e-10 && (self.robin[0] <= 1e-11 || self.orders.iter().all(|&o| o >= 1.9))
    }
}

/// Check the structure's boundary conditions with random slot fillings on
/// a sequence of refined grids.
pub fn verify_problem(
    problem: &Problem,
    mode: BcMode,
    grids: &[(usize, usize)],
    trials: usize,
    seed: u64,
) -> Result<VerifyResult, BenchError> {
    let ss = Arc::new(problem.structure(mode)?);
    let vo = VerifyOptions {
        trials,
        seed,
        ..Default::default()
    };
    let mut dirichlet_max: f64 = 0.0;
    let mut robin = Vec::new();
    for &(nx, ny) in grids {
        let grid = Grid::new(&problem.domain, nx, ny)?;
        let rep = verify_bc(&ss, &grid, &vo)?;
        dirichlet_max = dirichlet_max.max(rep.max_dirichlet());
        robin.push(rep.max_robin_away());
    }
    let orders = robin.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(VerifyResult {
        problem: problem.name.clone(),
        mode,
        grids: grids.to_vec(),
        dirichlet_max,
        robin,
        orders,
    })
}
