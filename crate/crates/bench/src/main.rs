use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hardbc_bench::metrics::{sample_parameters, DELTA_P_REF, DRAG_REF, LIFT_REF};
use hardbc_bench::output::write_results_csv;
use hardbc_bench::problem::ProblemFile;
use hardbc_bench::run::{emit, pool, run, verify_problem, RunOptions, RunResult};
use hardbc_bench::BenchError;
use hardbc_core::structure::BcMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Poisson,
    Darcy,
    Ns,
    VerifyBc,
}

/// Train solution structures with exactly enforced boundary conditions.
#[derive(Debug, Parser)]
#[command(name = "hardbc", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Structure: glss, op, semi-weak, weak or legacy-sukumar. `verify-bc`
    /// checks glss and op when omitted.
    #[arg(long)]
    mode: Option<BcMode>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Darcy: number of (alpha, beta) pairs drawn from [1, 4)^2.
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Problem file replacing the shipped one.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Reference fields as CSV (x, y and one column per component).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Random slot fillings per grid for `verify-bc`.
    #[arg(long, default_value_t = 25)]
    trials: usize,
    /// Parallel runs for parameter sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Rescale each slot by the inverse RMS of its effect on the solution.
    #[arg(long)]
    slot_scaling: bool,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(cli: &Cli, shipped: fn() -> ProblemFile) -> Result<ProblemFile, BenchError> {
    match &cli.spec {
        Some(p) => ProblemFile::read(p),
        None => Ok(shipped()),
    }
}

fn dispatch(cli: &Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::VerifyBc => verify(cli),
        Command::Poisson => train(cli, load(cli, ProblemFile::poisson)?),
        Command::Darcy => train(cli, load(cli, ProblemFile::darcy)?),
        Command::Ns => train(cli, load(cli, ProblemFile::navier_stokes)?),
    }
}

fn verify(cli: &Cli) -> Result<bool, BenchError> {
    let files = match &cli.spec {
        Some(p) => vec![ProblemFile::read(p)?],
        None => vec![ProblemFile::poisson(), ProblemFile::darcy(), ProblemFile::navier_stokes()],
    };
    let modes = match cli.mode {
        Some(m) => vec![m],
        None => vec![BcMode::Glss, BcMode::Op],
    };
    let mut ok = true;
    for f in &files {
        let problem = f.instantiate(None)?;
        let grids: Vec<(usize, usize)> = f.verify_grids();
        for &mode in &modes {
            let r = verify_problem(&problem, mode, &grids, cli.trials, cli.seed)?;
            let robin: Vec<String> = r.robin.iter().map(|v| format!("{v:.2e}")).collect();
            let orders: Vec<String> = r.orders.iter().map(|v| format!("{v:.2}")).collect();
            println!(
                "{:<14} {:<15} dirichlet {:.1e}  robin [{}]  orders [{}]  {}",
                r.problem,
                mode.to_string(),
                r.dirichlet_max,
                robin.join(", "),
                orders.join(", "),
                if r.passed() { "PASS" } else { "FAIL" }
            );
            ok &= r.passed();
        }
    }
    Ok(ok)
}

fn train(cli: &Cli, file: ProblemFile) -> Result<bool, BenchError> {
    let mode = cli.mode.unwrap_or(BcMode::Glss);
    let params: Vec<Option<(f64, f64)>> = match cli.pairs {
        Some(n) => sample_parameters(n.max(1), cli.seed, 1.0, 4.0).into_iter().map(Some).collect(),
        None => vec![None],
    };
    let problems = params
        .iter()
        .map(|&p| file.instantiate(p))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = RunOptions {
        grid: cli.grid.as_ref().map(|g| (g[0], g[1])),
        epochs: cli.epochs,
        lr: cli.lr,
        seed: cli.seed,
        slot_scaling: cli.slot_scaling,
        reference_csv: cli.reference.clone(),
        ..RunOptions::new(mode)
    };
    std::fs::create_dir_all(&cli.out)?;
    let workers = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let single = problems.len() == 1;
    let outcomes = pool(&problems, workers, |i, problem| -> Result<RunResult, BenchError> {
        let tag = if single { String::new() } else { format!("[pair {i}] ") };
        let out = run(problem, &opts, |row| {
            if !cli.quiet && (row.epoch % 100 == 0) {
                eprintln!("{tag}epoch {:>5}  loss {:.4e}  lr {:.2e}", row.epoch, row.loss_total, row.lr);
            }
        })?;
        let dir = if single {
            cli.out.join(format!("{}_{}", file.name, mode))
        } else {
            cli.out.join(format!("{}_{}_pair{i}", file.name, mode))
        };
        emit(&dir, &out)?;
        Ok(out.result)
    });
    let mut results = Vec::new();
    for o in outcomes {
        results.push(o?);
    }
    write_results_csv(&cli.out.join("results.csv"), &results)?;
    report(&results);
    Ok(true)
}

fn report(results: &[RunResult]) {
    for r in results {
        let errs: Vec<String> = r.errors.iter().map(|e| format!("{e:.4e}")).collect();
        match r.params {
            Some((a, b)) => print!("{} {} alpha={a:.4} beta={b:.4}", r.problem, r.mode),
            None => print!("{} {}", r.problem, r.mode),
        }
        println!(
            "  l2 [{}]  loss {:.3e} (drop {:.1}x)  {:.1}s",
            errs.join(", "),
            r.final_loss,
            r.loss_drop,
            r.wall_time_s
        );
        if let Some(d) = r.diagnostics {
            println!(
                "  delta_p {:.4} (ref {DELTA_P_REF})  c_D {:.4} (ref {DRAG_REF})  c_L {:.4} (ref {LIFT_REF})",
                d.delta_p, d.c_d, d.c_l
            );
        }
    }
    if results.len() > 1 {
        let mut e: Vec<f64> = results.iter().map(|r| r.errors[0]).filter(|e| e.is_finite()).collect();
        e.sort_by(f64::total_cmp);
        if !e.is_empty() {
            println!(
                "best {:.4e}  median {:.4e}  worst {:.4e}",
                e[0],
                e[e.len() / 2],
                e[e.len() - 1]
            );
        }
    }
}
