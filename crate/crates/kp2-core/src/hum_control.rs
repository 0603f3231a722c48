//! Boundary-control synthesis: find the Neumann datum `h(y, t)` at the
//! outflow face that steers the state from `u0` to `uT` over the horizon
//! `[0, T]`.
//!
//! The construction is the classical duality route.  Controllability of the
//! forward problem is equivalent to solvability of the Gramian equation
//!
//! ```text
//!     G θ_T = b,      b = uT - S(T) u0,
//! ```
//!
//! where `S(T)` is the free (homogeneous) evolution, `G = Λ*Λ` is the
//! control-observation Gramian of [`crate::observability`], and the control
//! itself is the observed adjoint trace `h = Λ θ_T = θ_x(L, ., .)`.  Solving
//! `G θ_T = b` is exactly minimizing the quadratic functional
//! `J(θ) = 1/2 <Gθ, θ> - <b, θ>`, so conjugate gradient — whose iterates
//! minimize `J` over growing Krylov spaces — is the canonical algorithm: it
//! descends `J` monotonically and needs one Gramian apply per iteration.
//!
//! Because the discretization makes `G` symmetric to round-off *through the
//! same stepping code* that the verification run uses, the relative Gramian
//! residual and the relative terminal-state error agree up to the
//! conditioning of `G`; both are reported.
//!
//! Near a critical side length the continuous Gramian degenerates.  The
//! solver does not exclude such `L`: degeneration surfaces as CG
//! ill-conditioning or rank deficiency (the residual plateaus above the
//! tolerance), which is reported as [`HumError::Stagnation`] — itself an
//! observable of interest.  Rank deficiency also appears at healthy `L`
//! whenever the trace lattice is smaller than the state space
//! (`(Nt+1)·Ny < Nx·Ny`), i.e. with too few time steps to control every
//! degree of freedom.

use crate::observability::{GramianHandle, ObsError, ObsMode};
use crate::pde_core::{simulate, ControlSignal, Field, PdeError, SimConfig};
use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

/// Floor for the denominator of relative terminal errors.
const NORM_FLOOR: f64 = 1e-30;

/// Width of the trailing-improvement window: CG is declared stagnant when
/// its best residual has improved by less than 1% over this many iterations
/// while still above tolerance.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Error)]
pub enum HumError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Obs(#[from] ObsError),
    #[error("u0 and uT live on different grids")]
    MismatchedGrids,
    #[error("cg_tol must be positive, got {tol}")]
    BadTol { tol: f64 },
    #[error("cg_maxit must be at least 1")]
    BadMaxit,
    /// The Gramian residual plateaued above `cg_tol` — the discrete system
    /// is ill-conditioned or rank-deficient for this target (expected near
    /// critical side lengths or with too coarse a time lattice).
    #[error(
        "conjugate gradient stagnated after {iterations} iterations at \
         relative residual {residual:.6e}"
    )]
    Stagnation { residual: f64, iterations: usize },
    /// `cg_maxit` reached with the residual still above `cg_tol`.
    #[error(
        "conjugate gradient did not reach the tolerance within {iterations} \
         iterations; relative residual {residual:.6e}"
    )]
    NotConverged { residual: f64, iterations: usize },
}

/// A steering problem: drive `u0` to `uT` over `[0, T]` with the outflow
/// Neumann datum as the only input.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub u0: Field,
    pub u_t: Field,
    pub t: f64,
    pub dt: f64,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    /// When set, CG runs exactly this many iterations with no tolerance or
    /// stagnation stop — the iteration count is part of the experiment
    /// (e.g. linearity studies).  Normal use leaves this `None`.
    pub cg_fixed_iters: Option<usize>,
}

impl ControlProblem {
    pub fn new(
        u0: Field,
        u_t: Field,
        t: f64,
        dt: f64,
        cg_tol: f64,
        cg_maxit: usize,
    ) -> Result<Self, HumError> {
        if u0.grid() != u_t.grid() {
            return Err(HumError::MismatchedGrids);
        }
        if !(cg_tol > 0.0 && cg_tol.is_finite()) {
            return Err(HumError::BadTol { tol: cg_tol });
        }
        if cg_maxit == 0 {
            return Err(HumError::BadMaxit);
        }
        Ok(ControlProblem {
            u0,
            u_t,
            t,
            dt,
            cg_tol,
            cg_maxit,
            cg_fixed_iters: None,
        })
    }

    pub fn with_fixed_iters(mut self, iters: usize) -> Self {
        self.cg_fixed_iters = Some(iters);
        self
    }
}

/// Synthesized control and its quality measures.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    /// Boundary datum on the `(Nt+1) x Ny` node lattice.
    pub h: ControlSignal,
    /// Minimizer of the duality functional (the Gramian-equation solution).
    pub theta_t: Field,
    /// True relative Gramian residual `||G θ_T - b|| / ||b||` (0 if `b = 0`),
    /// recomputed after the iteration (not the CG recursion value).
    pub residual: f64,
    /// Relative terminal-state error of the verification run.
    pub terminal_error: f64,
    /// CG iterations performed.
    pub iterations: usize,
    /// Value of the duality functional `J` at each iterate; nonincreasing.
    pub j_values: Vec<f64>,
}

/// Summary of a solution without the bulky signal, for serialization.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub residual: f64,
    pub terminal_error: f64,
    pub iterations: usize,
}

impl ControlSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            residual: self.residual,
            terminal_error: self.terminal_error,
            iterations: self.iterations,
        }
    }
}

/// Free-evolution defect `b = uT - S(T) u0`: the part of the target the
/// homogeneous flow does not reach on its own (one homogeneous forward
/// solve).  `b` is the right-hand side of the Gramian equation.
pub fn hum_rhs(problem: &ControlProblem) -> Result<Field, HumError> {
    let cfg = SimConfig::homogeneous(problem.t, problem.dt);
    let free = simulate(&problem.u0, &cfg, None)?;
    let defect = problem.u_t.values() - free.final_state.values();
    Ok(Field::new(problem.u0.grid(), defect)?)
}

/// Solves the Gramian equation by conjugate gradient and extracts the
/// control as the observed adjoint trace of the minimizer.
///
/// The returned solution carries the recomputed true Gramian residual and
/// the terminal error of an independent verification run
/// ([`verify_control`]).
pub fn synthesize_control(problem: &ControlProblem) -> Result<ControlSolution, HumError> {
    let grid = problem.u0.grid();
    let handle = GramianHandle::new(grid, problem.t, problem.dt, ObsMode::Ctrl)?;
    let nt = handle.steps();
    let b = hum_rhs(problem)?;
    let b_norm = b.norm_h_sq().sqrt();

    if b_norm == 0.0 {
        let h = ControlSignal::zeros(nt, grid.ny());
        let theta_t = Field::zeros(grid);
        let mut solution = ControlSolution {
            h,
            theta_t,
            residual: 0.0,
            terminal_error: 0.0,
            iterations: 0,
            j_values: Vec::new(),
        };
        solution.terminal_error = verify_control(problem, &solution)?;
        return Ok(solution);
    }

    // Conjugate gradient on G theta = b in the discrete L^2 inner product.
    // Conjugate gradient, with two departures from the textbook loop that
    // matter for PSD operators whose small eigenvalues sit at round-off
    // scale (the regime near critical lengths or under-resolved lattices):
    //  * best-iterate tracking — once the recursion passes the attainable
    //    floor, loss of conjugacy can blow the iterate up, so the converged
    //    answer is the best iterate, not the last one (fixed-iteration runs
    //    keep the last iterate: selection would break their linearity);
    //  * windowed stagnation detection — if the best residual has improved
    //    by less than 1% over the trailing 50 iterations while still above
    //    tolerance, the attainable floor has been reached and continuing
    //    only destabilizes the recursion.
    let mut theta = Field::zeros(grid);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rho = r.norm_h_sq();
    let mut iterations = 0;
    let mut j_values = Vec::new();
    let mut best_rel = f64::INFINITY;
    let mut best_theta = theta.clone();
    let mut best_hist: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    let iter_budget = problem.cg_fixed_iters.unwrap_or(problem.cg_maxit);
    let mut rel = 1.0;
    let mut converged = false;

    for it in 1..=iter_budget {
        if rho == 0.0 {
            converged = true;
            break; // exact solution reached
        }
        let q = handle.apply(&p)?;
        let pq = p.dot_h(&q);
        if pq <= 0.0 {
            // PSD breakdown: p is (numerically) in the null space of G, so b
            // has an unreachable component.
            if problem.cg_fixed_iters.is_some() {
                break;
            }
            return Err(HumError::Stagnation {
                residual: best_rel.min(rel),
                iterations: it - 1,
            });
        }
        let alpha = rho / pq;
        let theta_vals = theta.values() + &(alpha * p.values());
        theta = Field::new(grid, theta_vals)?;
        let r_vals = r.values() - &(alpha * q.values());
        r = Field::new(grid, r_vals)?;
        let rho_new = r.norm_h_sq();
        iterations = it;

        // J(theta) = 1/2 <G theta, theta> - <b, theta> with
        // G theta = b - r, so J = -(<b, theta> + <r, theta>)/2: free.
        j_values.push(-0.5 * (b.dot_h(&theta) + r.dot_h(&theta)));

        rel = rho_new.sqrt() / b_norm;
        if rel < best_rel {
            best_rel = rel;
            best_theta = theta.clone();
        }
        if problem.cg_fixed_iters.is_none() {
            if rel <= problem.cg_tol {
                converged = true;
                break;
            }
            best_hist.push_back(best_rel);
            if best_hist.len() > STALL_LIMIT {
                let before_window = best_hist.pop_front().expect("nonempty window");
                if best_rel >= 0.99 * before_window {
                    return Err(HumError::Stagnation {
                        residual: best_rel,
                        iterations: it,
                    });
                }
            }
        }

        let beta = rho_new / rho;
        rho = rho_new;
        let p_vals = r.values() + &(beta * p.values());
        p = Field::new(grid, p_vals)?;
    }

    if problem.cg_fixed_iters.is_none() {
        if !converged {
            return Err(HumError::NotConverged {
                residual: best_rel.min(rel),
                iterations,
            });
        }
        theta = best_theta;
    }

    // True residual, recomputed with a fresh apply.
    let g_theta = handle.apply(&theta)?;
    let resid_field = g_theta.values() - b.values();
    let residual = {
        let grid2 = grid;
        let d = Field::new(grid2, resid_field)?;
        d.norm_h_sq().sqrt() / b_norm
    };

    let h = handle.boundary_signal(&theta)?;
    let mut solution = ControlSolution {
        h,
        theta_t: theta,
        residual,
        terminal_error: 0.0,
        iterations,
        j_values,
    };
    solution.terminal_error = verify_control(problem, &solution)?;
    Ok(solution)
}

/// Independent verification: forward-simulates the *controlled* system with
/// the synthesized datum and returns `||u(T) - uT|| / max(||uT||, eps)`.
pub fn verify_control(
    problem: &ControlProblem,
    solution: &ControlSolution,
) -> Result<f64, HumError> {
    let cfg = SimConfig::control(problem.t, problem.dt);
    let traj = simulate(&problem.u0, &cfg, Some(&solution.h))?;
    let diff = traj.final_state.values() - problem.u_t.values();
    let err = Field::new(problem.u0.grid(), diff)?.norm_h_sq().sqrt();
    Ok(err / problem.u_t.norm_h_sq().sqrt().max(NORM_FLOOR))
}

/// Zero signal of the right shape for a problem (utility for callers that
/// need a baseline control).
pub fn zero_signal(problem: &ControlProblem) -> Result<ControlSignal, HumError> {
    let cfg = SimConfig::control(problem.t, problem.dt);
    let nt = cfg.steps()?;
    Ok(ControlSignal::new(Array2::zeros((
        nt + 1,
        problem.u0.grid().ny(),
    )))?)
}
