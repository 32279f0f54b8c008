//! PDE residuals of the three problems on a grid.

use std::f64::consts::PI;

use hardbc_core::expr::{parse, BinOp, Bindings, Expr, Var};
use hardbc_core::grid::stencil::SparseOp;
use hardbc_core::grid::{FdOps, Grid};
use hardbc_core::train::{LinearPhysics, Physics};

use crate::problem::{Problem, Variant};

/// `-Δu - 2π² cos(πx) cos(πy)`.
pub fn poisson_physics(grid: &Grid) -> LinearPhysics {
    let mut op = FdOps::new(grid).laplace;
    op.scale(-1.0);
    let rhs = grid.map(|p| 2.0 * PI * PI * (PI * p.x).cos() * (PI * p.y).cos());
    LinearPhysics::new(op, rhs, grid, 0, 1)
}

/// Diffusivity `a = sin(αx) sin(βy)` with `alpha`, `beta` left symbolic.
pub fn darcy_diffusivity() -> Expr {
    parse("sin(alpha*x)*sin(beta*y)").unwrap()
}

/// The source term of the manufactured solution in closed form.
pub fn darcy_source_closed_form() -> Expr {
    parse("-0.5*sin(2*beta*y)*(alpha^2*cos(2*alpha*x) + beta^2*cos(2*alpha*x) - beta^2)").unwrap()
}

/// `-div(a grad u)` built symbolically from `a` and `u`.
pub fn darcy_source_symbolic(a: &Expr, u: &Expr) -> Expr {
    let flux = |v: Var| Expr::bin(BinOp::Mul, a.clone(), u.diff(v));
    let div = Expr::bin(BinOp::Add, flux(Var::X).diff(Var::X), flux(Var::Y).diff(Var::Y));
    Expr::Neg(Box::new(div))
}

/// `-div_h(a grad_h u) - f` with `f` derived from the manufactured solution.
pub fn darcy_physics(grid: &Grid, alpha: f64, beta: f64) -> LinearPhysics {
    let a = grid.map(|p| (alpha * p.x).sin() * (beta * p.y).sin());
    let ax = grid.map(|p| alpha * (alpha * p.x).cos() * (beta * p.y).sin());
    let ay = grid.map(|p| beta * (alpha * p.x).sin() * (beta * p.y).cos());
    let mut op = FdOps::new(grid).div_a_grad_expanded(&a, &ax, &ay);
    op.scale(-1.0);
    let u = parse("sin(alpha*x)*cos(beta*y)").unwrap();
    let f = darcy_source_symbolic(&darcy_diffusivity(), &u);
    let f = f.substitute(&Bindings::new().with(Var::Alpha, alpha).with(Var::Beta, beta));
    let rhs = grid.map(|p| f.eval_xy(p.x, p.y).unwrap_or(f64::NAN));
    LinearPhysics::new(op, rhs, grid, 0, 1)
}

/// Stationary incompressible flow in `(u, v, p̃)` with `p = sqrt(nu) p̃`:
/// two momentum equations and continuity.
#[derive(Debug, Clone)]
pub struct NavierStokes {
    pub nu: f64,
    dx: SparseOp,
    dy: SparseOp,
    lap: SparseOp,
    nodes: Vec<usize>,
    n: usize,
}

struct Derived {
    ux: Vec<f64>,
    uy: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    qx: Vec<f64>,
    qy: Vec<f64>,
    lu: Vec<f64>,
    lv: Vec<f64>,
}

impl NavierStokes {
    pub fn new(grid: &Grid, nu: f64) -> NavierStokes {
        let ops = FdOps::new(grid);
        let nodes = grid
            .inside_nodes()
            .into_iter()
            .filter(|&k| ops.dx.is_valid(k) && ops.dy.is_valid(k) && ops.laplace.is_valid(k))
            .collect();
        NavierStokes {
            nu,
            dx: ops.dx,
            dy: ops.dy,
            lap: ops.laplace,
            nodes,
            n: grid.len(),
        }
    }

    fn derived(&self, u: &[&[f64]]) -> Derived {
        Derived {
            ux: self.dx.apply_vec(u[0]),
            uy: self.dy.apply_vec(u[0]),
            vx: self.dx.apply_vec(u[1]),
            vy: self.dy.apply_vec(u[1]),
            qx: self.dx.apply_vec(u[2]),
            qy: self.dy.apply_vec(u[2]),
            lu: self.lap.apply_vec(u[0]),
            lv: self.lap.apply_vec(u[1]),
        }
    }
}

impl Physics for NavierStokes {
    fn n_components(&self) -> usize {
        3
    }

    fn n_equations(&self) -> usize {
        3
    }

    fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    fn residuals(&self, f: &[&[f64]]) -> Vec<Vec<f64>> {
        let d = self.derived(f);
        let (u, v) = (f[0], f[1]);
        let s = self.nu.sqrt();
        let mut rx = Vec::with_capacity(self.nodes.len());
        let mut ry = Vec::with_capacity(self.nodes.len());
        let mut rd = Vec::with_capacity(self.nodes.len());
        for &k in &self.nodes {
            rx.push(-self.nu * d.lu[k] + u[k] * d.ux[k] + v[k] * d.uy[k] + s * d.qx[k]);
            ry.push(-self.nu * d.lv[k] + u[k] * d.vx[k] + v[k] * d.vy[k] + s * d.qy[k]);
            rd.push(d.ux[k] + d.vy[k]);
        }
        vec![rx, ry, rd]
    }

    fn vjp(&self, f: &[&[f64]], adj: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let d = self.derived(f);
        let (u, v) = (f[0], f[1]);
        let s = self.nu.sqrt();
        let scatter = |a: &[f64]| {
            let mut g = vec![0.0; self.n];
            for (&k, &x) in self.nodes.iter().zip(a) {
                g[k] = x;
            }
            g
        };
        let (ax, ay, ad) = (scatter(&adj[0]), scatter(&adj[1]), scatter(&adj[2]));
        let times = |w: &[f64], a: &[f64]| -> Vec<f64> { w.iter().zip(a).map(|(p, q)| p * q).collect() };

        // Operator terms: -nu L and the advecting velocity applied to derivatives.
        let mut gu = vec![0.0; self.n];
        let mut gv = vec![0.0; self.n];
        let mut gq = vec![0.0; self.n];
        let nax: Vec<f64> = ax.iter().map(|a| -self.nu * a).collect();
        let nay: Vec<f64> = ay.iter().map(|a| -self.nu * a).collect();
        self.lap.apply_transpose_add(&nax, &mut gu);
        self.lap.apply_transpose_add(&nay, &mut gv);
        self.dx.apply_transpose_add(&times(u, &ax), &mut gu);
        self.dy.apply_transpose_add(&times(v, &ax), &mut gu);
        self.dx.apply_transpose_add(&times(u, &ay), &mut gv);
        self.dy.apply_transpose_add(&times(v, &ay), &mut gv);
        self.dx.apply_transpose_add(&ad, &mut gu);
        self.dy.apply_transpose_add(&ad, &mut gv);
        let sax: Vec<f64> = ax.iter().map(|a| s * a).collect();
        let say: Vec<f64> = ay.iter().map(|a| s * a).collect();
        self.dx.apply_transpose_add(&sax, &mut gq);
        self.dy.apply_transpose_add(&say, &mut gq);
        // Product rule: the velocity factors of the advection terms.
        for k in 0..self.n {
            gu[k] += d.ux[k] * ax[k] + d.vx[k] * ay[k];
            gv[k] += d.uy[k] * ax[k] + d.vy[k] * ay[k];
        }
        for (o, g) in out.iter_mut().zip([gu, gv, gq]) {
            for (a, b) in o.iter_mut().zip(g) {
                *a += b;
            }
        }
    }
}

/// Residual of any shipped problem.
#[derive(Debug, Clone)]
pub enum ProblemPhysics {
    Linear(LinearPhysics),
    NavierStokes(NavierStokes),
}

impl ProblemPhysics {
    pub fn new(problem: &Problem, grid: &Grid) -> ProblemPhysics {
        match problem.variant {
            Variant::Poisson => ProblemPhysics::Linear(poisson_physics(grid)),
            Variant::Darcy { alpha, beta } => ProblemPhysics::Linear(darcy_physics(grid, alpha, beta)),
            Variant::NavierStokes { nu } => ProblemPhysics::NavierStokes(NavierStokes::new(grid, nu)),
        }
    }

    fn inner(&self) -> &dyn Physics {
        match self {
            ProblemPhysics::Linear(p) => p,
            ProblemPhysics::NavierStokes(p) => p,
        }
    }
}

impl Physics for ProblemPhysics {
    fn n_components(&self) -> usize {
        self.inner().n_components()
    }

    fn n_equations(&self) -> usize {
        self.inner().n_equations()
    }

    fn nodes(&self) -> &[usize] {
        self.inner().nodes()
    }

    fn residuals(&self, u: &[&[f64]]) -> Vec<Vec<f64>> {
        self.inner().residuals(u)
    }

    fn vjp(&self, u: &[&[f64]], adj: &[Vec<f64>], out: &mut [Vec<f64>]) {
        self.inner().vjp(u, adj, out)
    }
}
