//! Finite-difference discretization and Crank–Nicolson time stepping for the
//! dispersive evolution
//!
//! ```text
//!     u_t + u_x + u_xxx + dx^{-1} u_yy = 0        on (0,L) x (0,L),
//! ```
//!
//! with homogeneous Dirichlet data on all four edges and a Neumann-type
//! condition at the outflow face `x = L` that selects the run mode:
//!
//! * homogeneous:  `u_x(L,y,t) = 0`;
//! * feedback:     `u_x(L,y,t) = -alpha * u_x(0,y,t)`, `0 < |alpha| <= 1`;
//! * control:      `u_x(L,y,t) = h(y,t)` for a supplied boundary signal.
//!
//! Here `dx^{-1} f = -int_x^L f ds` (the antiderivative anchored to vanish at
//! `x = L`).
//!
//! # Discrete design
//!
//! The state lives on interior nodes `x_i = i*dx`, `y_j = j*dy` with
//! `dx = L/(Nx+1)`, `dy = L/(Ny+1)`; boundary values are identically zero and
//! never stored.  The generator is assembled as a dense `(Nx*Ny)^2` matrix
//!
//! ```text
//!     A = I_y ⊗ (A1 + A3)  -  D2_y ⊗ P ,
//! ```
//!
//! * `A1` — centered first difference (skew-adjoint under the Dirichlet data,
//!   so the drift contributes no energy);
//! * `A3` — the third derivative via the compact four-point stencil
//!   `(u_{i+2} - 3u_{i+1} + 3u_i - u_{i-1})/dx^3`, centered at the staggered
//!   half-node `i + 1/2`, closed at `x = L` by one ghost value obtained from
//!   the Neumann datum;
//! * `P` — right-anchored composite trapezoid realizing `dx^{-1}` (dense upper
//!   triangular within each fixed-`y` row);
//! * `D2_y` — standard second difference in `y`.
//!
//! This particular combination is chosen because its energy form is *exactly*
//! negative semidefinite, mirroring the dissipativity of the continuous
//! operator.  Writing `g` for the ghost slope datum at `x = L` and
//! `w_s` for the staggered `y`-differences, an Abel summation gives, per
//! `y`-row,
//!
//! ```text
//!   dx*dy*<A3 u, u>  =  -dy [ (1-a^2)/2 (u_1/dx)^2        boundary trace x=0
//!                            + 1/2 (a u_1/dx - u_N/dx)^2   boundary pair x=L
//!                            + 1/(2 dx^2) sum_i (d2_i)^2 ] interior curvature
//!   dx*dy*<A_nl u, u> =  -(dy/2) sum_s psi_s^2             nonlocal trace x=0
//! ```
//!
//! where `d2_i` are second differences, `psi_s = -dx * sum_i w_{s,i}` is the
//! discrete `dx^{-1} u_y(0, y_s)` on the staggered `y`-lattice, and `a` is the
//! feedback gain (zero in homogeneous mode).  Every channel is a negative
//! square for `|a| <= 1`, so `<A u, u> <= 0` holds identically — not just in
//! the refinement limit.  The first and last channels converge to the
//! continuous dissipation rates; the middle two are numerical dissipation that
//! vanishes under spatial refinement.
//!
//! Time stepping is Crank–Nicolson.  With `M = I - dt/2 A` and
//! `N = I + dt/2 A = 2I - M`, one step is `u+ = M^{-1}(N u + dt*b)`, which the
//! [`Stepper`] evaluates as `2 M^{-1} u - u + ...` using a precomputed dense
//! inverse: one matrix–vector product per step.  The adjoint chain uses the
//! exact transpose of the same matrices, so discrete duality holds to
//! round-off.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Inverse, OperationNorm};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from grid construction, operator assembly, and time stepping.
#[derive(Debug, Error)]
pub enum PdeError {
    /// Side length must be a positive finite real.
    #[error("invalid side length L = {l}; L must be positive and finite")]
    BadSideLength { l: f64 },
    /// The stencils need at least 8 interior nodes in x and 4 in y.
    #[error("grid {nx}x{ny} too small; need Nx >= 8 and Ny >= 4")]
    GridTooSmall { nx: usize, ny: usize },
    /// Time-step / horizon validation failed.
    #[error("invalid time configuration: T = {t}, dt = {dt}; need 0 < dt <= T")]
    BadTimeStep { t: f64, dt: f64 },
    /// The horizon must be an integer number of steps.
    #[error("horizon T = {t} is not an integer multiple of dt = {dt}")]
    HorizonNotMultiple { t: f64, dt: f64 },
    /// Feedback gain outside (0, 1].
    #[error("feedback gain alpha = {alpha} outside 0 < |alpha| <= 1")]
    BadAlpha { alpha: f64 },
    /// Field or signal data contained a non-finite entry.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    /// Shape of a supplied array does not match the grid/horizon.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    /// Control mode requires a boundary signal.
    #[error("bc mode `control` requires a boundary signal h")]
    ControlSignalRequired,
    /// A boundary signal was supplied for a non-control run.
    #[error("boundary signal supplied but bc mode is not `control`")]
    ControlSignalUnexpected,
    /// The assembled homogeneous/feedback quadratic form failed the
    /// dissipativity spot check; the discretization would not inherit the
    /// energy decay of the continuous operator.
    #[error("dissipativity check failed at assembly: <Au,u> = {value:.3e} > {bound:.3e}")]
    DissipativityViolated { value: f64, bound: f64 },
    /// Crank–Nicolson system matrix too ill-conditioned to trust.
    #[error("factorization condition number {cond:.3e} exceeds 1e14 (grid {nx}x{ny}, dt = {dt})")]
    IllConditioned {
        cond: f64,
        nx: usize,
        ny: usize,
        dt: f64,
    },
    /// LAPACK failure (singular matrix or similar), with run context.
    #[error("linear solver failure on grid {nx}x{ny}, dt = {dt}: {detail}")]
    Solver {
        detail: String,
        nx: usize,
        ny: usize,
        dt: f64,
    },
    /// The state left the floating-point range mid-run.
    #[error("non-finite state detected at step {step} (t = {time}); aborting")]
    NanDetected { step: usize, time: f64 },
    /// A trajectory is missing data that estimate_report needs.
    #[error("incomplete trajectory: {0}")]
    IncompleteTrajectory(String),
    /// The adjoint solver does not accept this configuration.
    #[error("adjoint run rejects this configuration: {0}")]
    BadAdjointConfig(&'static str),
}

/// Relative bound used by the assembly-time dissipativity spot check and by
/// the energy-monotonicity contracts.
pub const DISSIPATIVITY_TOL: f64 = 1e-10;

/// Condition-number ceiling for the Crank–Nicolson factorization.
const CONDITION_LIMIT: f64 = 1e14;

/// Number of random probes in the assembly-time dissipativity check.
const ASSEMBLY_PROBES: usize = 64;

/// Fixed seed for the assembly-time probe vectors (reproducible assembly).
const ASSEMBLY_SEED: u64 = 0x4b50_3246_5052_4245; // "KP2FPRBE"

/// Uniform tensor grid of interior nodes on the square `(0,L) x (0,L)`.
///
/// `dx = L/(Nx+1)` and `dy = L/(Ny+1)`; the boundary ring carries implied
/// zeros and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    l: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    /// Validates `L > 0` finite, `Nx >= 8`, `Ny >= 4`.
    pub fn new(l: f64, nx: usize, ny: usize) -> Result<Self, PdeError> {
        if !(l.is_finite() && l > 0.0) {
            return Err(PdeError::BadSideLength { l });
        }
        if nx < 8 || ny < 4 {
            return Err(PdeError::GridTooSmall { nx, ny });
        }
        Ok(Grid { l, nx, ny })
    }

    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.l / (self.nx as f64 + 1.0)
    }
    pub fn dy(&self) -> f64 {
        self.l / (self.ny as f64 + 1.0)
    }
    /// Number of degrees of freedom `Nx * Ny`.
    pub fn dofs(&self) -> usize {
        self.nx * self.ny
    }
    /// Flat index of interior node `(ix, iy)`, `0 <= ix < Nx`, `0 <= iy < Ny`.
    /// Layout is `y`-major: each fixed-`y` row is contiguous in `x`.
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
    /// Coordinate of interior node `ix` (0-based): `x = (ix+1) dx`.
    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 + 1.0) * self.dx()
    }
    /// Coordinate of interior node `iy` (0-based): `y = (iy+1) dy`.
    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 + 1.0) * self.dy()
    }
}

/// Grid function on the interior nodes, Dirichlet zero implied on all edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Array1<f64>,
}

impl Field {
    /// Wraps raw values; checks length and finiteness.
    pub fn new(grid: Grid, values: Array1<f64>) -> Result<Self, PdeError> {
        if values.len() != grid.dofs() {
            return Err(PdeError::ShapeMismatch {
                what: "field values",
                expected: format!("{}", grid.dofs()),
                got: format!("{}", values.len()),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(PdeError::NonFinite { what: "field values" });
        }
        Ok(Field { grid, values })
    }

    /// The zero field.
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: Array1::zeros(grid.dofs()),
        }
    }

    /// Samples `f(x, y)` at the interior nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Array1::zeros(grid.dofs());
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                values[grid.idx(ix, iy)] = f(grid.x(ix), grid.y(iy));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.idx(ix, iy)]
    }

    /// Discrete `L^2` inner product `dx*dy * sum(u v)`.
    pub fn dot_h(&self, other: &Field) -> f64 {
        self.grid.dx() * self.grid.dy() * self.values.dot(&other.values)
    }

    /// Squared discrete `L^2` norm.
    pub fn norm_h_sq(&self) -> f64 {
        self.grid.dx() * self.grid.dy() * self.values.dot(&self.values)
    }
}

/// Total energy `E = 1/2 * sum f^2 dx dy` (midpoint quadrature on the
/// interior nodes).
pub fn energy(f: &Field) -> f64 {
    0.5 * f.norm_h_sq()
}

/// One-sided slope trace at the inflow face: `u_x(0, y_j) ~ u_{0,j} / dx`
/// for each interior `y`-row (the Dirichlet zero at `x = 0` is implied).
pub fn left_slope_trace(grid: Grid, u: &ArrayView1<f64>) -> Array1<f64> {
    let dx = grid.dx();
    Array1::from_iter((0..grid.ny()).map(|j| u[grid.idx(0, j)] / dx))
}

/// Nonlocal trace `dx^{-1} u_y(0, .)` on the staggered `y`-lattice: for each
/// of the `Ny+1` cells between consecutive `y`-levels (boundary levels zero),
/// `psi_s = -dx * sum_i (u_{i,s} - u_{i,s-1}) / dy` — the right-anchored
/// antiderivative of the `y`-difference, evaluated at `x = 0`.
pub fn nonlocal_trace(grid: Grid, u: &ArrayView1<f64>) -> Array1<f64> {
    let (nx, ny, dx, dy) = (grid.nx(), grid.ny(), grid.dx(), grid.dy());
    let mut out = Array1::zeros(ny + 1);
    for s in 0..=ny {
        let mut acc = 0.0;
        for ix in 0..nx {
            let upper = if s < ny { u[grid.idx(ix, s)] } else { 0.0 };
            let lower = if s >= 1 { u[grid.idx(ix, s - 1)] } else { 0.0 };
            acc += (upper - lower) / dy;
        }
        out[s] = -dx * acc;
    }
    out
}

/// Boundary closure at the outflow face `x = L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BcMode {
    /// `u_x(L,y,t) = 0`.
    Homogeneous,
    /// `u_x(L,y,t) = -alpha * u_x(0,y,t)` assembled into the generator.
    Feedback { alpha: f64 },
    /// `u_x(L,y,t) = h(y,t)` supplied per step.
    Control,
}

impl BcMode {
    /// Feedback gain if this is a feedback closure.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            BcMode::Feedback { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// Manufactured source term `f(x, y, t)` added to the right-hand side.
pub type SourceFn = fn(f64, f64, f64) -> f64;

/// Run configuration for [`simulate`] / [`adjoint_simulate`].
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Horizon `T > 0`; must be an integer multiple of `dt`.
    pub t: f64,
    /// Time step `0 < dt <= T`.
    pub dt: f64,
    /// Include the first-derivative drift term `u_x`.  Disabling it removes
    /// the mechanism that creates critical lengths and is useful for
    /// comparison runs.
    pub drift: bool,
    /// Boundary closure at `x = L`.
    pub bc: BcMode,
    /// Optional manufactured source for convergence studies.
    pub forcing: Option<SourceFn>,
    /// Keep every `snapshot_stride`-th state in the trajectory
    /// (`0` = none; the final state is always kept separately).
    pub snapshot_stride: usize,
}

impl SimConfig {
    pub fn homogeneous(t: f64, dt: f64) -> Self {
        SimConfig {
            t,
            dt,
            drift: true,
            bc: BcMode::Homogeneous,
            forcing: None,
            snapshot_stride: 0,
        }
    }

    pub fn feedback(t: f64, dt: f64, alpha: f64) -> Self {
        SimConfig {
            bc: BcMode::Feedback { alpha },
            ..Self::homogeneous(t, dt)
        }
    }

    pub fn control(t: f64, dt: f64) -> Self {
        SimConfig {
            bc: BcMode::Control,
            ..Self::homogeneous(t, dt)
        }
    }

    pub fn with_drift(mut self, drift: bool) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_forcing(mut self, f: SourceFn) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn with_snapshot_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    /// Validates the time data and the feedback gain.
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.t.is_finite() && self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.t) {
            return Err(PdeError::BadTimeStep {
                t: self.t,
                dt: self.dt,
            });
        }
        if let BcMode::Feedback { alpha } = self.bc {
            if !(alpha.is_finite() && alpha != 0.0 && alpha.abs() <= 1.0) {
                return Err(PdeError::BadAlpha { alpha });
            }
        }
        self.steps().map(|_| ())
    }

    /// Number of time steps `T/dt`, required to be integral.
    pub fn steps(&self) -> Result<usize, PdeError> {
        let ratio = self.t / self.dt;
        let nt = ratio.round();
        if nt < 1.0 || (ratio - nt).abs() > 1e-8 * ratio.max(1.0) {
            return Err(PdeError::HorizonNotMultiple {
                t: self.t,
                dt: self.dt,
            });
        }
        Ok(nt as usize)
    }
}

/// Boundary signal `h(y_j, t_k)` on the `(Nt+1) x Ny` node lattice
/// (row `k` holds the datum at time `t_k = k*dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    values: Array2<f64>,
}

impl ControlSignal {
    /// Wraps raw values; checks finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self, PdeError> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(PdeError::NonFinite {
                what: "control signal",
            });
        }
        Ok(ControlSignal { values })
    }

    /// All-zero signal for `nt` steps on `ny` boundary nodes.
    pub fn zeros(nt: usize, ny: usize) -> Self {
        ControlSignal {
            values: Array2::zeros((nt + 1, ny)),
        }
    }

    /// Samples `h(y, t)` on the node lattice of `grid` with step `dt`.
    pub fn from_fn(grid: Grid, nt: usize, dt: f64, h: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((nt + 1, grid.ny()));
        for k in 0..=nt {
            let t = k as f64 * dt;
            for j in 0..grid.ny() {
                values[[k, j]] = h(grid.y(j), t);
            }
        }
        ControlSignal { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Number of time steps covered (`rows - 1`).
    pub fn steps(&self) -> usize {
        self.values.nrows().saturating_sub(1)
    }
}

/// Antiderivative anchored at the right edge:
/// `psi(x_i, y_j) = -(composite trapezoid of f from x_i to L)`, using the
/// implied zero at the `x = L` edge.  `d/dx psi = f` to scheme order.
pub fn antiderivative_right(f: &Field) -> Field {
    let grid = f.grid();
    let (nx, ny, dx) = (grid.nx(), grid.ny(), grid.dx());
    let mut out = Array1::zeros(grid.dofs());
    for iy in 0..ny {
        // Accumulate the trapezoid tail sum_{i' > i} f_{i'} from the right;
        // the implied boundary value f(L) = 0 contributes nothing.
        let mut tail = 0.0;
        for ix in (0..nx).rev() {
            let fi = f.values()[grid.idx(ix, iy)];
            out[grid.idx(ix, iy)] = -dx * (0.5 * fi + tail);
            tail += fi;
        }
    }
    Field {
        grid,
        values: out,
    }
}

/// Antiderivative anchored at the left edge:
/// `psi(x_i, y_j) = +(composite trapezoid of f from 0 to x_i)`, using the
/// implied zero at the `x = 0` edge.  Mirror of [`antiderivative_right`];
/// its matrix is exactly the negative transpose of the right-anchored one,
/// which is why it shows up in the adjoint generator.
pub fn antiderivative_left(f: &Field) -> Field {
    let grid = f.grid();
    let (nx, ny, dx) = (grid.nx(), grid.ny(), grid.dx());
    let mut out = Array1::zeros(grid.dofs());
    for iy in 0..ny {
        let mut head = 0.0;
        for ix in 0..nx {
            let fi = f.values()[grid.idx(ix, iy)];
            out[grid.idx(ix, iy)] = dx * (head + 0.5 * fi);
            head += fi;
        }
    }
    Field {
        grid,
        values: out,
    }
}

/// Assembled spatial generator `A_h` together with its closure metadata.
///
/// The adjoint generator is *defined* as the exact transpose [`Generator::adjoint_matrix`],
/// so discrete duality holds to round-off rather than to discretization order.
#[derive(Debug, Clone)]
pub struct Generator {
    grid: Grid,
    drift: bool,
    bc: BcMode,
    a: Array2<f64>,
}

impl Generator {
    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn drift(&self) -> bool {
        self.drift
    }
    pub fn bc(&self) -> BcMode {
        self.bc
    }
    /// The dense `(Nx*Ny)^2` generator matrix.
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }
    /// The adjoint generator: exactly the transpose of [`Self::matrix`].
    pub fn adjoint_matrix(&self) -> Array2<f64> {
        self.a.t().to_owned()
    }

    /// Control-lift matrix `B` with `(B h)_{(Nx-1, j)} = -h_j / dx^2`: the
    /// ghost-value elimination of the Neumann datum at `x = L`.  The
    /// semi-discrete controlled system is `du/dt = A u + B h(t)`.
    pub fn control_lift(&self) -> Array2<f64> {
        let (nx, ny, dx) = (self.grid.nx(), self.grid.ny(), self.grid.dx());
        let mut b = Array2::zeros((self.grid.dofs(), ny));
        for j in 0..ny {
            b[[self.grid.idx(nx - 1, j), j]] = -1.0 / (dx * dx);
        }
        b
    }

    /// Evaluates the energy form `<A u, u>_h = dx*dy * u^T A u`.
    pub fn quadratic_form(&self, u: &ArrayView1<f64>) -> f64 {
        let au = self.a.dot(u);
        self.grid.dx() * self.grid.dy() * au.dot(u)
    }
}

/// Builds the dense generator for the given closure and verifies the
/// dissipativity of its quadratic form on random probe vectors.  Assembly
/// fails loudly if a probe violates `<A u, u> <= tol * ||u||^2` — per design,
/// the scheme must inherit the energy decay of the continuous operator, and a
/// sign error anywhere in the stencils would be caught here.
pub fn assemble_generator(grid: Grid, cfg: &SimConfig) -> Result<Generator, PdeError> {
    cfg.validate()?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let n = grid.dofs();
    let inv_dx3 = 1.0 / (dx * dx * dx);
    let inv_2dx = 1.0 / (2.0 * dx);
    let mut a = Array2::<f64>::zeros((n, n));

    // x-direction blocks, identical for every fixed y.
    for iy in 0..ny {
        for ix in 0..nx {
            let r = grid.idx(ix, iy);
            // -u_xxx  via  -(v_{i+2} - 3 v_{i+1} + 3 v_i - v_{i-1}) / dx^3
            // (1-based node i = ix+1; out-of-range neighbors are boundary
            // zeros except the ghost at node Nx+2 handled below).
            if ix >= 1 {
                a[[r, grid.idx(ix - 1, iy)]] += inv_dx3;
            }
            a[[r, grid.idx(ix, iy)]] += -3.0 * inv_dx3;
            if ix + 1 < nx {
                a[[r, grid.idx(ix + 1, iy)]] += 3.0 * inv_dx3;
            }
            if ix + 2 < nx {
                a[[r, grid.idx(ix + 2, iy)]] += -inv_dx3;
            }
            if ix == nx - 1 {
                // Ghost node at x = L + dx: v_ghost = dx * u_x(L,y).
                // Homogeneous: zero.  Feedback: u_x(L) = -alpha*u_x(0) with
                // u_x(0) one-sided = u_1/dx, so v_ghost = -alpha*v_1 and the
                // row picks up +alpha/dx^3 at the x = 0 column.  Control: the
                // datum enters through the lift matrix, not the generator.
                if let BcMode::Feedback { alpha } = cfg.bc {
                    a[[r, grid.idx(0, iy)]] += alpha * inv_dx3;
                }
            }
            // -u_x via the centered difference (exactly skew-adjoint).
            if cfg.drift {
                if ix + 1 < nx {
                    a[[r, grid.idx(ix + 1, iy)]] += -inv_2dx;
                }
                if ix >= 1 {
                    a[[r, grid.idx(ix - 1, iy)]] += inv_2dx;
                }
            }
        }
    }

    // Nonlocal term -P D2_y: with P = -dx*U (right-anchored trapezoid,
    // U upper triangular with unit off-diagonal weights and 1/2 on the
    // diagonal) this contributes +c * dx * U[i,i'] for each y-stencil
    // coefficient c of the second difference.
    let inv_dy2 = 1.0 / (dy * dy);
    for iy in 0..ny {
        for (djy, coef) in [(-1isize, inv_dy2), (0, -2.0 * inv_dy2), (1, inv_dy2)] {
            let jy = iy as isize + djy;
            if jy < 0 || jy >= ny as isize {
                continue;
            }
            let jy = jy as usize;
            for ix in 0..nx {
                let r = grid.idx(ix, iy);
                a[[r, grid.idx(ix, jy)]] += coef * dx * 0.5;
                for jx in ix + 1..nx {
                    a[[r, grid.idx(jx, jy)]] += coef * dx;
                }
            }
        }
    }

    let gen = Generator {
        grid,
        drift: cfg.drift,
        bc: cfg.bc,
        a,
    };

    // Dissipativity spot check (the control closure shares the homogeneous
    // matrix, so it is covered too).
    let mut rng = ChaCha8Rng::seed_from_u64(ASSEMBLY_SEED);
    for _ in 0..ASSEMBLY_PROBES {
        let u: Array1<f64> = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)));
        let q = gen.quadratic_form(&u.view());
        let bound = DISSIPATIVITY_TOL * dx * dy * u.dot(&u);
        if !(q <= bound) {
            return Err(PdeError::DissipativityViolated { value: q, bound });
        }
    }
    Ok(gen)
}

/// Cached Crank–Nicolson stepper: holds `M^{-1}` for `M = I - dt/2 A` dense,
/// so a homogeneous step is a single matrix–vector product
/// (`u+ = 2 M^{-1} u - u`, since `N = 2I - M`).  Immutable once built; safe
/// to share across threads.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    bc: BcMode,
    dt: f64,
    minv: Array2<f64>,
    /// `M^{-1} B` for the control lift (columns indexed by the y-node of the
    /// boundary datum); `None` unless the closure is `Control`.
    lift: Option<Array2<f64>>,
}

impl Stepper {
    /// Factorizes `M = I - dt/2 A`.  Errors if the factorization is singular
    /// or its condition number exceeds `1e14` (no silent regularization).
    pub fn new(gen: &Generator, dt: f64) -> Result<Self, PdeError> {
        let grid = gen.grid();
        let n = grid.dofs();
        let mut m = gen.matrix().to_owned() * (-dt / 2.0);
        for i in 0..n {
            m[[i, i]] += 1.0;
        }
        let solver_err = |e: ndarray_linalg::error::LinalgError| PdeError::Solver {
            detail: e.to_string(),
            nx: grid.nx(),
            ny: grid.ny(),
            dt,
        };
        let minv = m.inv().map_err(solver_err)?;
        let cond = m.opnorm_one().map_err(solver_err)? * minv.opnorm_one().map_err(solver_err)?;
        if !(cond <= CONDITION_LIMIT) {
            return Err(PdeError::IllConditioned {
                cond,
                nx: grid.nx(),
                ny: grid.ny(),
                dt,
            });
        }
        let lift = match gen.bc() {
            BcMode::Control => {
                let b = gen.control_lift();
                Some(minv.dot(&b))
            }
            _ => None,
        };
        Ok(Stepper {
            grid,
            bc: gen.bc(),
            dt,
            minv,
            lift,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn bc(&self) -> BcMode {
        self.bc
    }

    /// Midpoint state `M^{-1} u`: the Crank–Nicolson average
    /// `(u_k + u_{k+1})/2` of a homogeneous step starting from `u`.
    pub fn midpoint(&self, u: &ArrayView1<f64>) -> Array1<f64> {
        self.minv.dot(u)
    }

    /// Adjoint midpoint `M^{-T} phi` (same role for the transposed chain).
    pub fn adjoint_midpoint(&self, phi: &ArrayView1<f64>) -> Array1<f64> {
        self.minv.t().dot(phi)
    }

    /// One Crank–Nicolson step on raw state vectors.
    ///
    /// `bnd` is the *time-centered* boundary datum `(h_k + h_{k+1})/2`
    /// (control closure only); `source` is the forcing evaluated at the
    /// half-step time `t_k + dt/2`.
    pub fn step_vec(
        &self,
        u: &ArrayView1<f64>,
        bnd: Option<&ArrayView1<f64>>,
        source: Option<&ArrayView1<f64>>,
    ) -> Array1<f64> {
        // u+ = M^{-1}(N u + dt f + dt B h) with N = 2I - M:
        //    = M^{-1}(2u + dt f) - u + dt (M^{-1}B) h.
        let mut unew = match source {
            Some(f) => {
                let rhs = 2.0 * u + &(self.dt * f);
                self.minv.dot(&rhs) - u
            }
            None => {
                let m = self.minv.dot(u);
                2.0 * m - u
            }
        };
        if let (Some(lift), Some(h)) = (&self.lift, bnd) {
            unew = unew + self.dt * lift.dot(h);
        }
        unew
    }

    /// One step on a [`Field`], validating shapes.  `bnd` must be given
    /// exactly when the closure is `Control`.
    pub fn step(&self, state: &Field, bnd: Option<&Array1<f64>>) -> Result<Field, PdeError> {
        if state.grid() != self.grid {
            return Err(PdeError::ShapeMismatch {
                what: "step state",
                expected: format!("{}x{}", self.grid.nx(), self.grid.ny()),
                got: format!("{}x{}", state.grid().nx(), state.grid().ny()),
            });
        }
        match (self.bc, bnd) {
            (BcMode::Control, None) => return Err(PdeError::ControlSignalRequired),
            (BcMode::Control, Some(h)) if h.len() != self.grid.ny() => {
                return Err(PdeError::ShapeMismatch {
                    what: "boundary datum",
                    expected: format!("{}", self.grid.ny()),
                    got: format!("{}", h.len()),
                })
            }
            (BcMode::Homogeneous | BcMode::Feedback { .. }, Some(_)) => {
                return Err(PdeError::ControlSignalUnexpected)
            }
            _ => {}
        }
        let values = self.step_vec(&state.values().view(), bnd.map(|b| b.view()).as_ref(), None);
        Field::new(self.grid, values)
    }
}

/// Recorded history of a forward or adjoint run.
///
/// All per-step records live on the time nodes `t_k = k*dt`:
/// energy, the squared staggered `x`-derivative norm (for the smoothing
/// ratio), the three boundary traces, and the interior-curvature dissipation
/// channel of the discrete energy identity.  For adjoint runs the time axis
/// is the *transformed* variable `s = T - t`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub dt: f64,
    pub drift: bool,
    pub bc: BcMode,
    /// Time nodes `t_0 .. t_Nt`.
    pub times: Vec<f64>,
    /// `E(t_k)`.
    pub energy: Vec<f64>,
    /// `||u_x(t_k)||^2` on the staggered x-lattice (includes boundary cells).
    pub h1x_sq: Vec<f64>,
    /// `u_x(0, y_j, t_k)` by one-sided differencing, shape `(Nt+1, Ny)`.
    pub ux0: Array2<f64>,
    /// `u_x(L, y_j, t_k)` by one-sided differencing, shape `(Nt+1, Ny)`.
    pub uxl: Array2<f64>,
    /// Nonlocal trace `dx^{-1} u_y(0, ., t_k)` on the staggered y-lattice,
    /// shape `(Nt+1, Ny+1)`.
    pub nonlocal0: Array2<f64>,
    /// Interior-curvature dissipation channel `dy/(2 dx^2) * sum d2^2`.
    pub curvature: Vec<f64>,
    /// Optional thinned snapshots `(t_k, state)`.
    pub snapshots: Vec<(f64, Field)>,
    /// State at the final node.
    pub final_state: Field,
}

/// Energy-vs-time series extracted from a trajectory, tagged with the run
/// parameters so decay checks can refuse mismatched certificates.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyTrace {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub l: f64,
    pub alpha: Option<f64>,
}

impl Trajectory {
    /// Number of steps `Nt`.
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn energy_trace(&self) -> EnergyTrace {
        EnergyTrace {
            t: self.times.clone(),
            e: self.energy.clone(),
            l: self.grid.l(),
            alpha: self.bc.alpha(),
        }
    }
}

/// Per-node recorder shared by the forward and adjoint drivers.
struct Recorder {
    grid: Grid,
    times: Vec<f64>,
    energy: Vec<f64>,
    h1x_sq: Vec<f64>,
    ux0: Vec<f64>,
    uxl: Vec<f64>,
    nonlocal0: Vec<f64>,
    curvature: Vec<f64>,
    snapshots: Vec<(f64, Field)>,
    stride: usize,
}

impl Recorder {
    fn new(grid: Grid, nt: usize, stride: usize) -> Self {
        let cap = nt + 1;
        Recorder {
            grid,
            times: Vec::with_capacity(cap),
            energy: Vec::with_capacity(cap),
            h1x_sq: Vec::with_capacity(cap),
            ux0: Vec::with_capacity(cap * grid.ny()),
            uxl: Vec::with_capacity(cap * grid.ny()),
            nonlocal0: Vec::with_capacity(cap * (grid.ny() + 1)),
            curvature: Vec::with_capacity(cap),
            snapshots: Vec::new(),
            stride,
        }
    }

    fn record(&mut self, k: usize, t: f64, u: &Array1<f64>) {
        let grid = self.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        let (dx, dy) = (grid.dx(), grid.dy());
        self.times.push(t);
        self.energy.push(0.5 * dx * dy * u.dot(u));

        // Staggered first-difference norm over all Nx+1 x-cells per y-row.
        let mut h1 = 0.0;
        // Curvature channel: second differences d2_m, m = 0..Nx-1 (1-based
        // nodes v_m, v_{m+1}, v_{m+2} with boundary zeros).
        let mut curv = 0.0;
        for iy in 0..ny {
            let row = |ix: isize| -> f64 {
                if ix < 0 || ix >= nx as isize {
                    0.0
                } else {
                    u[grid.idx(ix as usize, iy)]
                }
            };
            let mut prev = 0.0;
            for ix in 0..=nx {
                let cur = row(ix as isize);
                let d = (cur - prev) / dx;
                h1 += d * d;
                prev = cur;
            }
            for m in 0..nx {
                let d2 = row(m as isize + 1) - 2.0 * row(m as isize) + row(m as isize - 1);
                curv += d2 * d2;
            }
            self.ux0.push(u[grid.idx(0, iy)] / dx);
            self.uxl.push(-u[grid.idx(nx - 1, iy)] / dx);
        }
        self.h1x_sq.push(dx * dy * h1);
        self.curvature.push(dy / (2.0 * dx * dx) * curv);
        self.nonlocal0
            .extend(nonlocal_trace(grid, &u.view()).iter());

        if self.stride > 0 && k % self.stride == 0 {
            self.snapshots.push((
                t,
                Field {
                    grid,
                    values: u.clone(),
                },
            ));
        }
    }

    fn finish(self, dt: f64, drift: bool, bc: BcMode, final_state: Field) -> Trajectory {
        let nt1 = self.times.len();
        let ny = self.grid.ny();
        Trajectory {
            grid: self.grid,
            dt,
            drift,
            bc,
            times: self.times,
            energy: self.energy,
            h1x_sq: self.h1x_sq,
            ux0: Array2::from_shape_vec((nt1, ny), self.ux0).expect("ux0 shape"),
            uxl: Array2::from_shape_vec((nt1, ny), self.uxl).expect("uxl shape"),
            nonlocal0: Array2::from_shape_vec((nt1, ny + 1), self.nonlocal0)
                .expect("nonlocal0 shape"),
            curvature: self.curvature,
            snapshots: self.snapshots,
            final_state,
        }
    }
}

/// Steps the forward problem to `T`, recording energy and the three boundary
/// traces at every node.  `h` is required exactly when `cfg.bc` is
/// [`BcMode::Control`]; the datum is applied with Crank–Nicolson-consistent
/// time-centering `(h_k + h_{k+1})/2`.  Feedback closures are part of the
/// assembled generator, so they participate in the implicit solve.
pub fn simulate(
    u0: &Field,
    cfg: &SimConfig,
    h: Option<&ControlSignal>,
) -> Result<Trajectory, PdeError> {
    cfg.validate()?;
    let grid = u0.grid();
    let nt = cfg.steps()?;
    match (cfg.bc, h) {
        (BcMode::Control, None) => return Err(PdeError::ControlSignalRequired),
        (BcMode::Homogeneous | BcMode::Feedback { .. }, Some(_)) => {
            return Err(PdeError::ControlSignalUnexpected)
        }
        (BcMode::Control, Some(sig)) => {
            let shape = sig.values().dim();
            if shape != (nt + 1, grid.ny()) {
                return Err(PdeError::ShapeMismatch {
                    what: "control signal",
                    expected: format!("({}, {})", nt + 1, grid.ny()),
                    got: format!("({}, {})", shape.0, shape.1),
                });
            }
        }
        _ => {}
    }

    let gen = assemble_generator(grid, cfg)?;
    let stepper = Stepper::new(&gen, cfg.dt)?;
    let mut rec = Recorder::new(grid, nt, cfg.snapshot_stride);

    let mut u = u0.values().clone();
    rec.record(0, 0.0, &u);
    for k in 0..nt {
        let bnd = h.map(|sig| {
            let rows = sig.values();
            let mut avg = Array1::zeros(grid.ny());
            for j in 0..grid.ny() {
                avg[j] = 0.5 * (rows[[k, j]] + rows[[k + 1, j]]);
            }
            avg
        });
        let source: Option<Array1<f64>> = cfg.forcing.map(|f| {
            let tm = (k as f64 + 0.5) * cfg.dt;
            let mut buf = Array1::zeros(grid.dofs());
            for iy in 0..grid.ny() {
                for ix in 0..grid.nx() {
                    buf[grid.idx(ix, iy)] = f(grid.x(ix), grid.y(iy), tm);
                }
            }
            buf
        });
        u = stepper.step_vec(
            &u.view(),
            bnd.as_ref().map(|b| b.view()).as_ref(),
            source.as_ref().map(|s| s.view()).as_ref(),
        );
        if !u.iter().all(|v| v.is_finite()) {
            return Err(PdeError::NanDetected {
                step: k + 1,
                time: (k + 1) as f64 * cfg.dt,
            });
        }
        rec.record(k + 1, (k + 1) as f64 * cfg.dt, &u);
    }
    let final_state = Field {
        grid,
        values: u,
    };
    Ok(rec.finish(cfg.dt, cfg.drift, cfg.bc, final_state))
}

/// Solves the time-backward adjoint problem by the substitution `s = T - t`,
/// stepping `d(phi)/ds = A^T phi` with the exact transpose of the forward
/// generator.  The returned trajectory is indexed by `s`: its node `k` holds
/// the adjoint state at original time `t = T - s_k`, and its `uxl` rows are
/// the observation trace `theta_x(L, y, T - s_k)` (one-sided differencing).
///
/// The closure may be homogeneous or feedback (transposing the corresponding
/// generator); control closures and forcing are rejected — the adjoint runs
/// without inputs.
pub fn adjoint_simulate(theta_t: &Field, cfg: &SimConfig) -> Result<Trajectory, PdeError> {
    cfg.validate()?;
    if matches!(cfg.bc, BcMode::Control) {
        return Err(PdeError::BadAdjointConfig(
            "adjoint runs take no boundary input; use a homogeneous or feedback closure",
        ));
    }
    if cfg.forcing.is_some() {
        return Err(PdeError::BadAdjointConfig("adjoint runs take no forcing"));
    }
    let grid = theta_t.grid();
    let nt = cfg.steps()?;
    let gen = assemble_generator(grid, cfg)?;
    let stepper = Stepper::new(&gen, cfg.dt)?;
    let mut rec = Recorder::new(grid, nt, cfg.snapshot_stride);

    let mut phi = theta_t.values().clone();
    rec.record(0, 0.0, &phi);
    for k in 0..nt {
        // phi+ = N^T M^{-T} phi = 2 M^{-T} phi - phi.
        let psi = stepper.adjoint_midpoint(&phi.view());
        phi = 2.0 * &psi - &phi;
        if !phi.iter().all(|v| v.is_finite()) {
            return Err(PdeError::NanDetected {
                step: k + 1,
                time: (k + 1) as f64 * cfg.dt,
            });
        }
        rec.record(k + 1, (k + 1) as f64 * cfg.dt, &phi);
    }
    let final_state = Field {
        grid,
        values: phi,
    };
    Ok(rec.finish(cfg.dt, cfg.drift, cfg.bc, final_state))
}

/// The four checked quantities of the a-priori estimate suite, plus context.
///
/// * `kato_ratio` — time-integrated `L^2(H^1_x)` norm against the smoothing
///   bound with constant `2(2T+L)/3`;
/// * `trace_ratio` — time-integrated squared `u_x(0)` trace against the
///   initial energy;
/// * `time_ratio` — initial energy against the time-average + dissipation
///   functional.  Its denominator uses the *full* discrete dissipation
///   decomposition (all four channels of the energy identity), which is what
///   the discrete flow actually pays; the two numerical channels vanish under
///   spatial refinement, recovering the continuous three-term functional.
/// * `identity_residual` — defect of the discrete energy identity
///   `E(T) - E(0) + integral(all dissipation channels) = 0` with the channel
///   integrand reconstructed from the recorded node traces and integrated by
///   the trapezoid rule.  The only error is node-vs-midpoint sampling, so the
///   residual shrinks at second order under dt-refinement.  `None` for
///   control runs (the boundary work term is not recorded).
/// * `modeled_residual` — same defect but keeping only the two channels with
///   continuous counterparts (`(1-a^2)/2 ux0^2` and the nonlocal trace);
///   shrinks under *spatial* refinement as the numerical channels die out.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub kato_ratio: f64,
    pub trace_ratio: f64,
    pub time_ratio: f64,
    pub identity_residual: Option<f64>,
    pub modeled_residual: Option<f64>,
    pub e0: f64,
    pub e_final: f64,
    pub t: f64,
    pub dt: f64,
    pub kato_constant: f64,
}

/// Trapezoid rule on the node series with step `dt`.
fn trapz(dt: f64, v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    dt * (0.5 * v[0] + inner + 0.5 * v[v.len() - 1])
}

/// Dissipation channels of the discrete energy identity at node `k`,
/// reconstructed from the recorded traces.  Returns `(full, modeled)`:
/// `full` is the exact instantaneous rate `-<A u, u>_h` decomposed into its
/// four nonnegative channels; `modeled` keeps only the two channels with
/// continuous counterparts.
fn dissipation_at(traj: &Trajectory, k: usize, alpha: f64) -> (f64, f64) {
    let dy = traj.grid.dy();
    let mut boundary0 = 0.0; // (1-a^2)/2 * ux0^2
    let mut pair_l = 0.0; //    1/2 * (a*ux0 + uxl)^2
    for j in 0..traj.grid.ny() {
        let ux0 = traj.ux0[[k, j]];
        let uxl = traj.uxl[[k, j]];
        boundary0 += 0.5 * (1.0 - alpha * alpha) * ux0 * ux0;
        let pair = alpha * ux0 + uxl;
        pair_l += 0.5 * pair * pair;
    }
    let mut nonlocal = 0.0;
    for s in 0..=traj.grid.ny() {
        let psi = traj.nonlocal0[[k, s]];
        nonlocal += 0.5 * psi * psi;
    }
    let full = dy * (boundary0 + pair_l + nonlocal) + traj.curvature[k];
    let modeled = dy * (boundary0 + nonlocal);
    (full, modeled)
}

/// Evaluates the a-priori estimate ratios and energy-identity residuals for a
/// completed trajectory against its initial state.
pub fn estimate_report(traj: &Trajectory, u0: &Field) -> Result<EstimateReport, PdeError> {
    let nt1 = traj.times.len();
    if nt1 < 2 {
        return Err(PdeError::IncompleteTrajectory(
            "trajectory has fewer than two time nodes".into(),
        ));
    }
    let check = |name: &str, len: usize| -> Result<(), PdeError> {
        if len != nt1 {
            Err(PdeError::IncompleteTrajectory(format!(
                "{name} has {len} entries, expected {nt1}"
            )))
        } else {
            Ok(())
        }
    };
    check("energy", traj.energy.len())?;
    check("h1x_sq", traj.h1x_sq.len())?;
    check("curvature", traj.curvature.len())?;
    check("ux0", traj.ux0.nrows())?;
    check("uxl", traj.uxl.nrows())?;
    check("nonlocal0", traj.nonlocal0.nrows())?;
    if u0.grid() != traj.grid {
        return Err(PdeError::ShapeMismatch {
            what: "estimate_report initial state",
            expected: format!("{}x{}", traj.grid.nx(), traj.grid.ny()),
            got: format!("{}x{}", u0.grid().nx(), u0.grid().ny()),
        });
    }

    let dt = traj.dt;
    let t = *traj.times.last().expect("nonempty");
    let l = traj.grid.l();
    let dy = traj.grid.dy();
    let norm0_sq = u0.norm_h_sq();
    let kato_constant = 2.0 * (2.0 * t + l) / 3.0;
    let alpha = traj.bc.alpha().unwrap_or(0.0);
    let is_control = matches!(traj.bc, BcMode::Control);

    // Squared norms per node.
    let l2_sq: Vec<f64> = traj.energy.iter().map(|e| 2.0 * e).collect();
    let h1_total: Vec<f64> = l2_sq
        .iter()
        .zip(&traj.h1x_sq)
        .map(|(a, b)| a + b)
        .collect();
    let ux0_sq: Vec<f64> = (0..nt1)
        .map(|k| dy * traj.ux0.row(k).iter().map(|v| v * v).sum::<f64>())
        .collect();

    let channels: Vec<(f64, f64)> = (0..nt1)
        .map(|k| dissipation_at(traj, k, alpha))
        .collect();
    let full: Vec<f64> = channels.iter().map(|c| c.0).collect();
    let modeled: Vec<f64> = channels.iter().map(|c| c.1).collect();

    let e0 = traj.energy[0];
    let e_final = *traj.energy.last().expect("nonempty");

    if norm0_sq == 0.0 {
        // Zero data: every ratio is 0 and the identities hold as 0 = 0.
        return Ok(EstimateReport {
            kato_ratio: 0.0,
            trace_ratio: 0.0,
            time_ratio: 0.0,
            identity_residual: (!is_control).then_some((e_final - e0 + trapz(dt, &full)).abs()),
            modeled_residual: (!is_control).then_some((e_final - e0 + trapz(dt, &modeled)).abs()),
            e0,
            e_final,
            t,
            dt,
            kato_constant,
        });
    }

    let kato_ratio = trapz(dt, &h1_total) / (kato_constant * norm0_sq);
    let trace_ratio = trapz(dt, &ux0_sq) / norm0_sq;
    // E(0) - E(T) = integral of the full dissipation rate, so the discrete
    // analogue of the time estimate carries twice that integral on the right.
    let time_denominator = trapz(dt, &l2_sq) / t + 2.0 * trapz(dt, &full);
    let time_ratio = norm0_sq / time_denominator;
    let identity_residual = (!is_control).then_some((e_final - e0 + trapz(dt, &full)).abs());
    let modeled_residual = (!is_control).then_some((e_final - e0 + trapz(dt, &modeled)).abs());

    Ok(EstimateReport {
        kato_ratio,
        trace_ratio,
        time_ratio,
        identity_residual,
        modeled_residual,
        e0,
        e_final,
        t,
        dt,
        kato_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(l: f64, nx: usize, ny: usize) -> Grid {
        Grid::new(l, nx, ny).expect("valid grid")
    }

    /// Random field with entries in (-1, 1), deterministic per call site.
    fn random_field(g: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(
            g,
            Array1::from_iter((0..g.dofs()).map(|_| rng.gen_range(-1.0..1.0))),
        )
        .unwrap()
    }

    // ---------------------------------------------------------------- grids

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 8, 4).is_ok());
        assert!(matches!(
            Grid::new(0.0, 8, 4),
            Err(PdeError::BadSideLength { .. })
        ));
        assert!(matches!(
            Grid::new(1.0, 7, 4),
            Err(PdeError::GridTooSmall { .. })
        ));
        assert!(matches!(
            Grid::new(1.0, 8, 3),
            Err(PdeError::GridTooSmall { .. })
        ));
        let g = grid(2.0, 9, 4);
        assert_relative_eq!(g.dx(), 0.2);
        assert_relative_eq!(g.dy(), 0.4);
        assert_eq!(g.idx(3, 2), 2 * 9 + 3);
    }

    // ------------------------------------------------------ antiderivatives

    #[test]
    fn antiderivative_right_examples() {
        let g = grid(2.0, 40, 4);
        let dx = g.dx();

        // f = 0 -> psi = 0 exactly.
        let zero = antiderivative_right(&Field::zeros(g));
        assert!(zero.values().iter().all(|&v| v == 0.0));

        // f = 1 -> psi = x - L analytically; the implied zero at the x = L
        // edge costs half a cell, so the scheme order here is O(dx).
        let psi = antiderivative_right(&Field::from_fn(g, |_, _| 1.0));
        for ix in 0..g.nx() {
            let exact = g.x(ix) - g.l();
            assert!(
                (psi.get(ix, 1) - exact).abs() <= 0.6 * dx,
                "x-L mismatch at {}: {} vs {}",
                ix,
                psi.get(ix, 1),
                exact
            );
        }

        // f = x -> psi = (x^2 - L^2)/2 with the same O(L dx) edge defect.
        let psi = antiderivative_right(&Field::from_fn(g, |x, _| x));
        for ix in 0..g.nx() {
            let exact = (g.x(ix).powi(2) - g.l().powi(2)) / 2.0;
            assert!(
                (psi.get(ix, 2) - exact).abs() <= 0.6 * g.l() * dx,
                "quadratic mismatch at {}",
                ix
            );
        }
    }

    #[test]
    fn antiderivative_left_examples() {
        let g = grid(2.0, 40, 4);
        let dx = g.dx();
        let psi = antiderivative_left(&Field::from_fn(g, |_, _| 1.0));
        for ix in 0..g.nx() {
            assert!((psi.get(ix, 0) - g.x(ix)).abs() <= 0.6 * dx);
        }
        let psi = antiderivative_left(&Field::from_fn(g, |x, _| x));
        for ix in 0..g.nx() {
            // Smooth integrand vanishing at the anchor: trapezoid is O(dx^2).
            assert!((psi.get(ix, 0) - g.x(ix).powi(2) / 2.0).abs() <= dx * dx);
        }
    }

    #[test]
    fn antiderivative_left_inverts_derivative_to_scheme_order() {
        // antiderivative_left(f') ~ f for f vanishing at the x = 0 edge;
        // the error contracts under refinement (trapezoid on a smooth
        // integrand: second order away from the anchored edge).
        let l = 1.0;
        let f = |x: f64| (std::f64::consts::PI * x / l).sin().powi(2);
        let fp = |x: f64| {
            let k = std::f64::consts::PI / l;
            k * (2.0 * k * x / 2.0 * 0.0 + 2.0 * (k * x).sin() * (k * x).cos())
        };
        let err = |nx: usize| {
            let g = grid(l, nx, 4);
            let psi = antiderivative_left(&Field::from_fn(g, |x, _| fp(x)));
            (0..g.nx())
                .map(|ix| (psi.get(ix, 1) - f(g.x(ix))).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e2 < e1, "no refinement: {e1} -> {e2}");
        assert!(e1 / e2 > 3.0, "order below 2: {e1} -> {e2}");
    }

    #[test]
    fn left_matrix_is_negative_transpose_of_right() {
        // The adjoint-side antiderivative is exactly -P^T: check the bilinear
        // identity sum(right(f) * g) = -sum(f * left(g)) on random fields.
        let g = grid(1.3, 12, 5);
        let f = random_field(g, 11);
        let h = random_field(g, 12);
        let lhs = antiderivative_right(&f).values().dot(h.values());
        let rhs = -f.values().dot(antiderivative_left(&h).values());
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }

    // ------------------------------------------------------------- assembly

    #[test]
    fn generator_dimension_and_drift_block() {
        let g = grid(1.0, 10, 4);
        let cfg = SimConfig::homogeneous(1.0, 0.1);
        let a = assemble_generator(g, &cfg).unwrap();
        assert_eq!(a.matrix().dim(), (40, 40));

        // drift on/off differ exactly by the centered first-difference block.
        let a_nodrift = assemble_generator(g, &cfg.with_drift(false)).unwrap();
        let diff = &a.matrix().to_owned() - &a_nodrift.matrix().to_owned();
        let inv_2dx = 1.0 / (2.0 * g.dx());
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                for jy in 0..g.ny() {
                    for jx in 0..g.nx() {
                        let v = diff[[g.idx(ix, iy), g.idx(jx, jy)]];
                        let expected = if iy == jy && jx == ix + 1 {
                            -inv_2dx
                        } else if iy == jy && ix > 0 && jx == ix - 1 {
                            inv_2dx
                        } else {
                            0.0
                        };
                        assert_eq!(v, expected, "at ({ix},{iy})x({jx},{jy})");
                    }
                }
            }
        }
    }

    #[test]
    fn generator_rows_dense_only_within_fixed_y() {
        // The nonlocal term makes rows dense in x (upper-triangular reach)
        // but couples only neighboring y-rows.
        let g = grid(1.0, 9, 5);
        let a = assemble_generator(g, &SimConfig::homogeneous(1.0, 0.1)).unwrap();
        for iy in 0..g.ny() {
            for jy in 0..g.ny() {
                let coupled = (iy as isize - jy as isize).abs() <= 1;
                if !coupled {
                    for ix in 0..g.nx() {
                        for jx in 0..g.nx() {
                            assert_eq!(a.matrix()[[g.idx(ix, iy), g.idx(jx, jy)]], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dissipativity_all_closures() {
        let g = grid(1.0, 12, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for cfg in [
            SimConfig::homogeneous(1.0, 0.1),
            SimConfig::feedback(1.0, 0.1, 0.5),
            SimConfig::feedback(1.0, 0.1, 1.0),
            SimConfig::feedback(1.0, 0.1, -0.8),
            SimConfig::control(1.0, 0.1),
        ] {
            let gen = assemble_generator(g, &cfg).unwrap();
            for _ in 0..50 {
                let u: Array1<f64> =
                    Array1::from_iter((0..g.dofs()).map(|_| rng.gen_range(-1.0..1.0)));
                let q = gen.quadratic_form(&u.view());
                let nrm = g.dx() * g.dy() * u.dot(&u);
                assert!(q <= DISSIPATIVITY_TOL * nrm, "q = {q} for {:?}", cfg.bc);
            }
        }
    }

    #[test]
    fn adjoint_is_bitwise_transpose() {
        let g = grid(1.0, 10, 5);
        let gen = assemble_generator(g, &SimConfig::feedback(1.0, 0.1, 0.7)).unwrap();
        let at = gen.adjoint_matrix();
        let a = gen.matrix();
        for i in 0..g.dofs() {
            for j in 0..g.dofs() {
                assert!(at[[i, j]].to_bits() == a[[j, i]].to_bits());
            }
        }
    }

    /// The energy form decomposes exactly into the four dissipation channels
    /// reconstructed from boundary traces — the structural identity that
    /// every energy/observability statement in this crate leans on.
    #[test]
    fn quadratic_form_equals_trace_decomposition() {
        let g = grid(1.4, 11, 6);
        let (dx, dy) = (g.dx(), g.dy());
        for (cfg, alpha) in [
            (SimConfig::homogeneous(1.0, 0.1), 0.0),
            (SimConfig::feedback(1.0, 0.1, 0.5), 0.5),
            (SimConfig::feedback(1.0, 0.1, 1.0), 1.0),
        ] {
            let gen = assemble_generator(g, &cfg).unwrap();
            let u = random_field(g, 99);
            let q = gen.quadratic_form(&u.values().view());

            let mut d = 0.0;
            for iy in 0..g.ny() {
                let v = |ix: isize| -> f64 {
                    if ix < 0 || ix >= g.nx() as isize {
                        0.0
                    } else {
                        u.get(ix as usize, iy)
                    }
                };
                let ux0 = v(0) / dx;
                let uxl = -v(g.nx() as isize - 1) / dx;
                d += dy * 0.5 * (1.0 - alpha * alpha) * ux0 * ux0;
                let pair = alpha * ux0 + uxl;
                d += dy * 0.5 * pair * pair;
                for m in 0..g.nx() as isize {
                    let d2 = v(m + 1) - 2.0 * v(m) + v(m - 1);
                    d += dy / (2.0 * dx * dx) * d2 * d2;
                }
            }
            for s in 0..=g.ny() {
                let mut acc = 0.0;
                for ix in 0..g.nx() {
                    let upper = if s < g.ny() { u.get(ix, s) } else { 0.0 };
                    let lower = if s >= 1 { u.get(ix, s - 1) } else { 0.0 };
                    acc += (upper - lower) / g.dy();
                }
                let psi = -dx * acc;
                d += dy * 0.5 * psi * psi;
            }
            assert_relative_eq!(q, -d, max_relative = 1e-11);
        }
    }

    // ------------------------------------------------------------- stepping

    #[test]
    fn step_zero_is_zero() {
        let g = grid(1.0, 8, 4);
        let gen = assemble_generator(g, &SimConfig::homogeneous(1.0, 0.01)).unwrap();
        let st = Stepper::new(&gen, 0.01).unwrap();
        let u = st.step(&Field::zeros(g), None).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_norm_nonincreasing() {
        let g = grid(1.0, 12, 6);
        let gen = assemble_generator(g, &SimConfig::homogeneous(1.0, 0.005)).unwrap();
        let st = Stepper::new(&gen, 0.005).unwrap();
        let mut u = random_field(g, 3);
        let mut prev = u.norm_h_sq();
        for _ in 0..100 {
            u = st.step(&u, None).unwrap();
            let cur = u.norm_h_sq();
            assert!(cur <= prev * (1.0 + 1e-10), "{cur} > {prev}");
            prev = cur;
        }
    }

    /// One Crank–Nicolson step satisfies the exact energy identity
    /// `E(u+) - E(u) = dt * <A m, m>_h` with `m` the midpoint state.
    #[test]
    fn step_energy_identity_exact() {
        let g = grid(1.0, 10, 5);
        for cfg in [
            SimConfig::homogeneous(1.0, 0.01),
            SimConfig::feedback(1.0, 0.01, 0.6),
        ] {
            let gen = assemble_generator(g, &cfg).unwrap();
            let st = Stepper::new(&gen, cfg.dt).unwrap();
            let u = random_field(g, 17);
            let m = st.midpoint(&u.values().view());
            let unew = 2.0 * &m - u.values();
            let e0 = 0.5 * g.dx() * g.dy() * u.values().dot(u.values());
            let e1 = 0.5 * g.dx() * g.dy() * unew.dot(&unew);
            let rate = cfg.dt * gen.quadratic_form(&m.view());
            assert_relative_eq!(e1 - e0, rate, max_relative = 1e-9, epsilon = 1e-14);
        }
    }

    #[test]
    fn control_lift_enters_final_row_only() {
        let g = grid(1.0, 8, 4);
        let cfg = SimConfig::control(1.0, 0.01);
        let gen = assemble_generator(g, &cfg).unwrap();
        // Control and homogeneous closures share the same generator matrix.
        let hom = assemble_generator(g, &SimConfig::homogeneous(1.0, 0.01)).unwrap();
        assert_eq!(gen.matrix(), hom.matrix());

        let b = gen.control_lift();
        for j in 0..g.ny() {
            for i in 0..g.dofs() {
                let expected = if i == g.idx(g.nx() - 1, j) {
                    -1.0 / (g.dx() * g.dx())
                } else {
                    0.0
                };
                assert_eq!(b[[i, j]], expected);
            }
        }

        // Stepping the zero state with a datum reproduces dt * M^{-1} B h.
        let st = Stepper::new(&gen, cfg.dt).unwrap();
        let h: Array1<f64> = Array1::linspace(1.0, 2.0, g.ny());
        let u = st
            .step(&Field::zeros(g), Some(&h))
            .unwrap();
        let direct = st.midpoint(&b.dot(&h).view()) * cfg.dt;
        for (a, b) in u.values().iter().zip(direct.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn step_input_validation() {
        let g = grid(1.0, 8, 4);
        let hom = Stepper::new(
            &assemble_generator(g, &SimConfig::homogeneous(1.0, 0.01)).unwrap(),
            0.01,
        )
        .unwrap();
        let ctl = Stepper::new(
            &assemble_generator(g, &SimConfig::control(1.0, 0.01)).unwrap(),
            0.01,
        )
        .unwrap();
        let z = Field::zeros(g);
        let h = Array1::zeros(g.ny());
        assert!(matches!(
            hom.step(&z, Some(&h)),
            Err(PdeError::ControlSignalUnexpected)
        ));
        assert!(matches!(
            ctl.step(&z, None),
            Err(PdeError::ControlSignalRequired)
        ));
        let short = Array1::zeros(2);
        assert!(matches!(
            ctl.step(&z, Some(&short)),
            Err(PdeError::ShapeMismatch { .. })
        ));
    }

    // ------------------------------------------------------------- simulate

    #[test]
    fn simulate_zero_everything() {
        let g = grid(1.0, 8, 4);
        let cfg = SimConfig::control(0.1, 0.01);
        let h = ControlSignal::zeros(10, g.ny());
        let traj = simulate(&Field::zeros(g), &cfg, Some(&h)).unwrap();
        assert_eq!(traj.steps(), 10);
        assert!(traj.energy.iter().all(|&e| e == 0.0));
        assert!(traj.final_state.values().iter().all(|&v| v == 0.0));
        assert!(traj.ux0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_sine_energy_nonincreasing() {
        let g = grid(1.0, 16, 8);
        let pi = std::f64::consts::PI;
        let u0 = Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
        let traj = simulate(&u0, &SimConfig::homogeneous(0.5, 0.005), None).unwrap();
        for w in traj.energy.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        assert!(traj.energy.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn simulate_signal_validation() {
        let g = grid(1.0, 8, 4);
        let u0 = Field::zeros(g);
        assert!(matches!(
            simulate(&u0, &SimConfig::control(0.1, 0.01), None),
            Err(PdeError::ControlSignalRequired)
        ));
        let h = ControlSignal::zeros(10, g.ny());
        assert!(matches!(
            simulate(&u0, &SimConfig::homogeneous(0.1, 0.01), Some(&h)),
            Err(PdeError::ControlSignalUnexpected)
        ));
        let bad = ControlSignal::zeros(7, g.ny());
        assert!(matches!(
            simulate(&u0, &SimConfig::control(0.1, 0.01), Some(&bad)),
            Err(PdeError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            SimConfig::homogeneous(1.0, 0.3).validate(),
            Err(PdeError::HorizonNotMultiple { .. })
        ));
        assert!(matches!(
            SimConfig::feedback(1.0, 0.1, 1.5).validate(),
            Err(PdeError::BadAlpha { .. })
        ));
    }

    #[test]
    fn feedback_alpha_one_kills_left_boundary_channel() {
        let g = grid(1.0, 16, 8);
        let pi = std::f64::consts::PI;
        let u0 = Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
        let run = |alpha: f64| {
            let traj = simulate(&u0, &SimConfig::feedback(0.4, 0.005, alpha), None).unwrap();
            let channel: f64 = (0..traj.times.len())
                .map(|k| {
                    traj.grid.dy()
                        * traj
                            .ux0
                            .row(k)
                            .iter()
                            .map(|v| 0.5 * (1.0 - alpha * alpha) * v * v)
                            .sum::<f64>()
                })
                .sum();
            (traj, channel)
        };
        let (traj_half, channel_half) = run(0.5);
        let (traj_one, channel_one) = run(1.0);
        // The (1-a^2) channel vanishes identically at a = 1 and is active at
        // a = 0.5; both runs still dissipate through the nonlocal trace.
        assert_eq!(channel_one, 0.0);
        assert!(channel_half > 0.0);
        for traj in [&traj_half, &traj_one] {
            for w in traj.energy.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-10));
            }
        }
        // The node-quadrature defect of the energy identity is O(dt^2) with a
        // sizable constant at this dt (observed 3.6e-3 * E0); the order itself
        // is pinned by `identity_residual_contracts`.
        let report = estimate_report(&traj_one, &u0).unwrap();
        let resid = report.identity_residual.unwrap();
        assert!(resid < 5e-3 * traj_one.energy[0], "residual {resid:.3e}");
    }

    // -------------------------------------------------------------- adjoint

    #[test]
    fn adjoint_zero_and_contraction() {
        let g = grid(1.0, 12, 6);
        let cfg = SimConfig::homogeneous(0.2, 0.005);
        let z = adjoint_simulate(&Field::zeros(g), &cfg).unwrap();
        assert!(z.energy.iter().all(|&e| e == 0.0));

        let theta = random_field(g, 5);
        let traj = adjoint_simulate(&theta, &cfg).unwrap();
        for w in traj.energy.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn adjoint_rejects_control_and_forcing() {
        let g = grid(1.0, 8, 4);
        let theta = Field::zeros(g);
        assert!(matches!(
            adjoint_simulate(&theta, &SimConfig::control(0.1, 0.01)),
            Err(PdeError::BadAdjointConfig(_))
        ));
        fn f(_: f64, _: f64, _: f64) -> f64 {
            1.0
        }
        assert!(matches!(
            adjoint_simulate(&theta, &SimConfig::homogeneous(0.1, 0.01).with_forcing(f)),
            Err(PdeError::BadAdjointConfig(_))
        ));
    }

    /// Forward/adjoint duality through the recorded traces:
    /// `<u(T), thetaT> - <u0, theta(0)> = integral of h * theta_x(L)` up to
    /// O(dt^2 + dx), contracting under joint refinement.
    #[test]
    fn duality_residual_contracts() {
        let pi = std::f64::consts::PI;
        let residual = |nx: usize, ny: usize, dt: f64| -> f64 {
            let g = grid(1.0, nx, ny);
            let t = 0.25;
            let cfg = SimConfig::control(t, dt);
            let nt = cfg.steps().unwrap();
            let u0 = Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
            let theta_t = Field::from_fn(g, |x, y| (2.0 * pi * x).sin() * (pi * y).sin());
            let h = ControlSignal::from_fn(g, nt, dt, |y, tt| {
                (pi * y / g.l()).sin() * (1.0 + tt)
            });
            let fwd = simulate(&u0, &cfg, Some(&h)).unwrap();
            let adj = adjoint_simulate(&theta_t, &SimConfig::homogeneous(t, dt)).unwrap();

            let pairing_end = fwd.final_state.dot_h(&theta_t);
            let pairing_start = u0.dot_h(&adj.final_state);
            // Trapezoid in time of  dy * sum_j h(t_k, j) * theta_x(L, t_k, j);
            // adjoint node k holds s = k dt, i.e. original time T - s.
            let mut series = Vec::with_capacity(nt + 1);
            for k in 0..=nt {
                let mut acc = 0.0;
                for j in 0..g.ny() {
                    acc += h.values()[[k, j]] * adj.uxl[[nt - k, j]];
                }
                series.push(g.dy() * acc);
            }
            let work = trapz(dt, &series);
            (pairing_end - pairing_start - work).abs()
        };
        let r0 = residual(12, 6, 0.025);
        let r1 = residual(24, 12, 0.0125);
        let r2 = residual(48, 24, 0.00625);
        assert!(r1 < r0 && r2 < r1, "no contraction: {r0} {r1} {r2}");
        // Must track C(dt^2 + dx): allow the constant observed on the
        // coarsest level with 2x headroom.
        let c0 = r0 / (0.025f64.powi(2) + 1.0 / 13.0);
        for (r, dt, dx) in [(r1, 0.0125, 1.0 / 25.0), (r2, 0.00625, 1.0 / 49.0)] {
            assert!(r <= 2.0 * c0 * (dt * dt + dx), "residual {r} off scale");
        }
    }

    // ---------------------------------------------------------------- energy

    #[test]
    fn energy_examples() {
        let g = grid(1.0, 40, 40);
        assert_eq!(energy(&Field::zeros(g)), 0.0);
        // f = 1: E = L^2/2 up to the O(dx+dy) quadrature defect from the
        // implied boundary zeros.
        let e = energy(&Field::from_fn(g, |_, _| 1.0));
        assert!((e - 0.5).abs() < 0.06);
        // Product sine mode: E = L^2/8, and the node quadrature is exact for
        // this mode up to round-off (discrete orthogonality).
        let pi = std::f64::consts::PI;
        let e = energy(&Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin()));
        assert_relative_eq!(e, 0.125, max_relative = 1e-12);
    }

    // ------------------------------------------------------ estimate_report

    #[test]
    fn estimate_report_zero_trajectory() {
        let g = grid(1.0, 8, 4);
        let traj = simulate(&Field::zeros(g), &SimConfig::homogeneous(0.1, 0.01), None).unwrap();
        let rep = estimate_report(&traj, &Field::zeros(g)).unwrap();
        assert_eq!(rep.kato_ratio, 0.0);
        assert_eq!(rep.trace_ratio, 0.0);
        assert_eq!(rep.time_ratio, 0.0);
        assert_eq!(rep.identity_residual, Some(0.0));
        assert_eq!(rep.modeled_residual, Some(0.0));
    }

    #[test]
    fn estimate_report_ratios_hold_on_coarse_run() {
        let g = grid(1.0, 32, 16);
        let pi = std::f64::consts::PI;
        let u0 = Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
        let traj = simulate(&u0, &SimConfig::homogeneous(1.0, 0.002), None).unwrap();
        let rep = estimate_report(&traj, &u0).unwrap();
        assert!(rep.kato_ratio > 0.0 && rep.kato_ratio <= 1.02, "{rep:?}");
        assert!(rep.trace_ratio > 0.0 && rep.trace_ratio <= 1.02, "{rep:?}");
        assert!(rep.time_ratio > 0.0 && rep.time_ratio <= 1.02, "{rep:?}");
    }

    #[test]
    fn identity_residual_contracts_in_dt() {
        let g = grid(1.0, 16, 8);
        let pi = std::f64::consts::PI;
        let u0 = Field::from_fn(g, |x, y| (pi * x).sin() * (pi * y).sin());
        let resid = |dt: f64| {
            let traj = simulate(&u0, &SimConfig::feedback(0.5, dt, 0.5), None).unwrap();
            estimate_report(&traj, &u0).unwrap().identity_residual.unwrap()
        };
        let (r0, r1) = (resid(0.01), resid(0.005));
        assert!(r1 <= r0 / 2.0, "identity residual did not halve: {r0} -> {r1}");
    }

    #[test]
    fn estimate_report_rejects_incomplete() {
        let g = grid(1.0, 8, 4);
        let u0 = random_field(g, 2);
        let mut traj = simulate(&u0, &SimConfig::homogeneous(0.1, 0.01), None).unwrap();
        traj.curvature.pop();
        assert!(matches!(
            estimate_report(&traj, &u0),
            Err(PdeError::IncompleteTrajectory(_))
        ));
    }

    // ------------------------------------------------- manufactured solution

    /// Exact solution `u* = g(t) phi(x) psi(y)` with
    /// `phi = sin^2(pi x / L)` (so `phi(0) = phi(L) = phi'(L) = 0`, matching
    /// the homogeneous closure) and `psi = sin(pi y / L)`.
    mod mms {
        pub const L: f64 = 1.0;

        pub fn phi(x: f64) -> f64 {
            let k = std::f64::consts::PI / L;
            (k * x).sin().powi(2)
        }
        /// `phi' = k sin(2kx)` for `k = pi/L` (also `= (K/2) sin(Kx)`, `K = 2k`).
        fn phi1(x: f64) -> f64 {
            let k = std::f64::consts::PI / L;
            k * (2.0 * k * x).sin()
        }
        fn phi3(x: f64) -> f64 {
            let k2 = 2.0 * std::f64::consts::PI / L;
            -(k2.powi(3) / 2.0) * (k2 * x).sin()
        }
        /// `-int_x^L phi = -(L - x + (L/2pi) sin(2 pi x / L)) / 2`.
        fn phi_int_right(x: f64) -> f64 {
            let k2 = 2.0 * std::f64::consts::PI / L;
            -(L - x + (k2 * x).sin() / k2) / 2.0
        }
        pub fn psi(y: f64) -> f64 {
            (std::f64::consts::PI * y / L).sin()
        }
        pub fn g(t: f64) -> f64 {
            (t).cos() + 2.0
        }
        fn gp(t: f64) -> f64 {
            -(t).sin()
        }

        pub fn exact(x: f64, y: f64, t: f64) -> f64 {
            g(t) * phi(x) * psi(y)
        }

        /// Source `f = u*_t + u*_x + u*_xxx + dx^{-1} u*_yy`.
        pub fn source(x: f64, y: f64, t: f64) -> f64 {
            let kpy = std::f64::consts::PI / L;
            gp(t) * phi(x) * psi(y)
                + g(t) * phi1(x) * psi(y)
                + g(t) * phi3(x) * psi(y)
                + g(t) * (-(kpy * kpy)) * phi_int_right(x) * psi(y)
        }
    }

    #[test]
    fn manufactured_solution_first_order_joint_refinement() {
        let error = |nx: usize, ny: usize, dt: f64| -> f64 {
            let g = grid(mms::L, nx, ny);
            let t_end = 0.4;
            let cfg = SimConfig::homogeneous(t_end, dt).with_forcing(mms::source);
            let u0 = Field::from_fn(g, |x, y| mms::exact(x, y, 0.0));
            let traj = simulate(&u0, &cfg, None).unwrap();
            let exact = Field::from_fn(g, |x, y| mms::exact(x, y, t_end));
            let diff = traj.final_state.values() - exact.values();
            (g.dx() * g.dy() * diff.dot(&diff)).sqrt()
        };
        let e0 = error(12, 6, 0.016);
        let e1 = error(24, 12, 0.008);
        let e2 = error(48, 24, 0.004);
        eprintln!("mms errors: {e0:.5} -> {e1:.5} -> {e2:.5}");
        assert!(e1 < e0 && e2 < e1, "no refinement: {e0} {e1} {e2}");
        // dx halves and dy^2 quarters per level; demand a robust first-order
        // contraction overall.
        assert!(e0 / e2 > 3.0, "joint order too low: {e0} -> {e2}");
        assert!(e2 < 0.1, "absolute error too large: {e2}");
    }
}
