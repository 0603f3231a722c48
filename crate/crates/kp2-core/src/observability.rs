//! Discrete observability constants for the two boundary-observation
//! configurations, and scans of those constants across the side length `L`.
//!
//! # The two Gramians
//!
//! Both observation setups give rise to a symmetric positive-semidefinite
//! operator `G = Λ*Λ` on the grid space, where `Λ` maps a state to the
//! observed boundary trace(s) and the adjoint is taken between the discrete
//! `L^2(Ω)` inner product and the trace-lattice quadrature:
//!
//! * **control observation** (`ctrl`): `Λ θ_T` is the outflow trace
//!   `θ_x(L, y, t)` of the backward adjoint solve started from the terminal
//!   datum `θ_T`.  The smallest eigenvalue of `G` is the discrete
//!   observability constant of the inequality
//!   `lambda_min * ||θ_T||² <= ∫∫ θ_x(L)²`, whose positivity is what makes
//!   the boundary-control problem solvable; its reciprocal bounds the
//!   control cost.
//! * **feedback observation** (`stab`): `Λ u_0` collects the two inflow
//!   traces `u_x(0, y, t)` and `dx^{-1} u_y(0, y, t)` of the *feedback*
//!   evolution started at `u_0`.  Positivity of this `lambda_min` is the
//!   discrete form of the inequality behind exponential decay of the damped
//!   system.
//!
//! Traces are evaluated on the Crank–Nicolson midpoint states, which makes
//! `<G u, u>` *exactly* a time quadrature of the recorded traces — the same
//! algebra that makes the one-step energy identity exact.  The operator is
//! realized matrix-free (each apply is one backward and one forward sweep),
//! and the adjoint pair of sweeps uses the exact transpose of the stepping
//! matrices, so `G` is symmetric to round-off.
//!
//! # Eigenvalue estimation
//!
//! `G` is available only as an operator, so the smallest eigenvalue is
//! estimated by power iteration on the shifted operator `cI - G`, where `c`
//! is an upper bound on `||G||` obtained from 30 plain power iterations
//! inflated by 1%.  The Rayleigh-quotient estimate approaches `lambda_min`
//! *from above*, so a reported value is always an upper estimate of the true
//! discrete constant; iteration stops when successive estimates differ by at
//! most `tol * c`.  All randomness is drawn from a caller-seeded ChaCha
//! stream, so repeated runs are bitwise identical.
//!
//! Constants are reported at fixed discretization and never extrapolated to
//! the continuum: the value of the continuous constant is not known, and the
//! artifact's contract is reproducible discrete numbers plus refinement
//! trends.

use crate::pde_core::{
    assemble_generator, left_slope_trace, nonlocal_trace, ControlSignal, Field, Grid, PdeError,
    SimConfig, Stepper,
};
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Errors from Gramian construction, eigenvalue estimation, and scans.
#[derive(Debug, Error)]
pub enum ObsError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    /// Shifted power iteration hit `maxit` before the estimates settled.
    /// `last` is the final (upper) estimate of the smallest eigenvalue.
    #[error(
        "eigenvalue iteration did not converge within {iterations} iterations; \
         last estimate {last:.6e}"
    )]
    NotConverged { last: f64, iterations: usize },
    /// Convergence tolerance must be positive.
    #[error("tolerance must be positive, got {tol}")]
    BadTol { tol: f64 },
    /// Operation requires the other observation mode.
    #[error("operation requires {expected} observation mode")]
    WrongMode { expected: &'static str },
    /// A scan needs at least one side length.
    #[error("scan requires a nonempty list of side lengths")]
    EmptyScan,
}

/// Which boundary observation defines the Gramian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ObsMode {
    /// Observe `θ_x(L, y, t)` along the backward adjoint flow.
    Ctrl,
    /// Observe `u_x(0, y, t)` and `dx^{-1} u_y(0, y, t)` along the feedback
    /// flow with gain `alpha`.
    Stab { alpha: f64 },
}

impl ObsMode {
    pub fn label(&self) -> &'static str {
        match self {
            ObsMode::Ctrl => "ctrl",
            ObsMode::Stab { .. } => "stab",
        }
    }
}

/// Symmetric operator interface used by [`min_eig`]; implemented by
/// [`GramianHandle`] and by dense matrices in tests.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply_vec(&self, v: &ArrayView1<f64>) -> Array1<f64>;
}

/// The observation traces produced by [`GramianHandle::observe`].
#[derive(Debug, Clone)]
pub enum Observation {
    /// Control mode: the outflow trace on the `(Nt+1) x Ny` signal lattice —
    /// exactly the boundary control a HUM synthesis would emit.
    BoundaryTrace(ControlSignal),
    /// Feedback mode: inflow slope trace (`Nt x Ny`, midpoint times) and
    /// nonlocal trace (`Nt x (Ny+1)`, midpoint times, staggered `y`).
    FeedbackTraces {
        ux0: Array2<f64>,
        nonlocal: Array2<f64>,
    },
}

impl Observation {
    /// Squared trace-lattice norm with the quadrature weights under which
    /// `<G θ, θ> = ||Λ θ||²`: trapezoid in time ⊗ `dy` for the node-lattice
    /// boundary trace, midpoint rule in time ⊗ `dy` for feedback traces.
    pub fn norm_sq_w(&self, dt: f64, dy: f64) -> f64 {
        match self {
            Observation::BoundaryTrace(sig) => signal_norm_sq_w(sig, dt, dy),
            Observation::FeedbackTraces { ux0, nonlocal } => {
                let a: f64 = ux0.iter().map(|v| v * v).sum();
                let b: f64 = nonlocal.iter().map(|v| v * v).sum();
                dt * dy * (a + b)
            }
        }
    }
}

/// Squared weighted lattice norm of a boundary signal: trapezoid rule in
/// time, `dy`-weighted sum over the `y`-nodes.
pub fn signal_norm_sq_w(sig: &ControlSignal, dt: f64, dy: f64) -> f64 {
    let v = sig.values();
    let nt = sig.steps();
    let mut acc = 0.0;
    for k in 0..=nt {
        let w = if k == 0 || k == nt { 0.5 * dt } else { dt };
        acc += w * v.row(k).iter().map(|x| x * x).sum::<f64>();
    }
    dy * acc
}

/// Matrix-free observability Gramian `G = Λ*Λ` for one observation mode on a
/// fixed grid and horizon.  Construction assembles the generator and
/// factorizes the Crank–Nicolson system once; each [`apply`](Self::apply) is
/// one backward and one forward sweep.
#[derive(Debug, Clone)]
pub struct GramianHandle {
    grid: Grid,
    t: f64,
    dt: f64,
    nt: usize,
    mode: ObsMode,
    stepper: Stepper,
}

impl GramianHandle {
    pub fn new(grid: Grid, t: f64, dt: f64, mode: ObsMode) -> Result<Self, ObsError> {
        let cfg = match mode {
            ObsMode::Ctrl => SimConfig::control(t, dt),
            ObsMode::Stab { alpha } => SimConfig::feedback(t, dt, alpha),
        };
        let nt = cfg.steps()?;
        let gen = assemble_generator(grid, &cfg)?;
        let stepper = Stepper::new(&gen, dt)?;
        Ok(GramianHandle {
            grid,
            t,
            dt,
            nt,
            mode,
            stepper,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.nt
    }
    pub fn mode(&self) -> ObsMode {
        self.mode
    }

    /// Backward adjoint sweep, returning the midpoint outflow traces
    /// `s_k ~ θ_x(L, ., t at step k)`, shape `(Nt, Ny)`, together with the
    /// adjoint state marched all the way back to `t = 0`.
    fn backward_sweep(&self, theta: &ArrayView1<f64>) -> (Array2<f64>, Array1<f64>) {
        let (nx, ny, dx) = (self.grid.nx(), self.grid.ny(), self.grid.dx());
        let mut s = Array2::zeros((self.nt, ny));
        let mut phi = theta.to_owned();
        for k in (0..self.nt).rev() {
            let psi = self.stepper.adjoint_midpoint(&phi.view());
            for j in 0..ny {
                s[[k, j]] = -psi[self.grid.idx(nx - 1, j)] / dx;
            }
            phi = 2.0 * &psi - &phi;
        }
        (s, phi)
    }

    fn backward_traces(&self, theta: &ArrayView1<f64>) -> Array2<f64> {
        self.backward_sweep(theta).0
    }

    /// Full backward adjoint solve from the terminal datum `θ_T` (control
    /// mode): the adjoint state `θ(0)` and the midpoint outflow traces
    /// `s_{k,j} ~ θ_x(L, y_j, t_{k+1/2})`, shape `(Nt, Ny)`.
    ///
    /// These are the ingredients of the discrete transposition identity
    /// `<u(T), θ_T>_h - <u_0, θ(0)>_h = Σ_k dt Σ_j dy h̄_{k,j} s_{k,j}`,
    /// satisfied exactly by a forward controlled sweep whose step uses the
    /// nodal averages `h̄_k = (h_k + h_{k+1})/2`.
    pub fn adjoint_run(&self, theta: &Field) -> Result<(Field, Array2<f64>), ObsError> {
        if !matches!(self.mode, ObsMode::Ctrl) {
            return Err(ObsError::WrongMode { expected: "ctrl" });
        }
        self.check_field(theta)?;
        let (s, phi0) = self.backward_sweep(&theta.values().view());
        Ok((Field::new(self.grid, phi0)?, s))
    }

    /// Node-lattice boundary signal `Λ θ_T` (control mode): midpoint traces
    /// resampled to the time nodes so that the averaging inside the forward
    /// control step reproduces the duality pairing exactly.
    pub fn boundary_signal(&self, theta: &Field) -> Result<ControlSignal, ObsError> {
        if !matches!(self.mode, ObsMode::Ctrl) {
            return Err(ObsError::WrongMode { expected: "ctrl" });
        }
        self.check_field(theta)?;
        let s = self.backward_traces(&theta.values().view());
        let ny = self.grid.ny();
        let mut lam = Array2::zeros((self.nt + 1, ny));
        lam.row_mut(0).assign(&s.row(0));
        for k in 1..self.nt {
            for j in 0..ny {
                lam[[k, j]] = 0.5 * (s[[k - 1, j]] + s[[k, j]]);
            }
        }
        lam.row_mut(self.nt).assign(&s.row(self.nt - 1));
        Ok(ControlSignal::new(lam)?)
    }

    /// Zero-initial forward sweep driven by a node-lattice boundary signal:
    /// the reachability map `F h = u(T)` (control mode).
    pub fn forward_from_signal(&self, h: &ControlSignal) -> Result<Field, ObsError> {
        if !matches!(self.mode, ObsMode::Ctrl) {
            return Err(ObsError::WrongMode { expected: "ctrl" });
        }
        let shape = h.values().dim();
        if shape != (self.nt + 1, self.grid.ny()) {
            return Err(ObsError::Pde(PdeError::ShapeMismatch {
                what: "boundary signal",
                expected: format!("({}, {})", self.nt + 1, self.grid.ny()),
                got: format!("({}, {})", shape.0, shape.1),
            }));
        }
        let ny = self.grid.ny();
        let mut u = Array1::zeros(self.grid.dofs());
        for k in 0..self.nt {
            let rows = h.values();
            let mut hbar = Array1::zeros(ny);
            for j in 0..ny {
                hbar[j] = 0.5 * (rows[[k, j]] + rows[[k + 1, j]]);
            }
            u = self.stepper.step_vec(&u.view(), Some(&hbar.view()), None);
        }
        Ok(Field::new(self.grid, u)?)
    }

    /// The observed traces `Λ θ` for this mode.
    pub fn observe(&self, theta: &Field) -> Result<Observation, ObsError> {
        self.check_field(theta)?;
        match self.mode {
            ObsMode::Ctrl => Ok(Observation::BoundaryTrace(self.boundary_signal(theta)?)),
            ObsMode::Stab { .. } => {
                let ny = self.grid.ny();
                let mut ux0 = Array2::zeros((self.nt, ny));
                let mut nonlocal = Array2::zeros((self.nt, ny + 1));
                let mut u = theta.values().clone();
                for k in 0..self.nt {
                    let m = self.stepper.midpoint(&u.view());
                    ux0.row_mut(k)
                        .assign(&left_slope_trace(self.grid, &m.view()));
                    nonlocal
                        .row_mut(k)
                        .assign(&nonlocal_trace(self.grid, &m.view()));
                    u = 2.0 * &m - &u;
                }
                Ok(Observation::FeedbackTraces { ux0, nonlocal })
            }
        }
    }

    /// Applies the Gramian: backward trace extraction followed by the exact
    /// discrete transpose of the observe-and-solve pipeline.
    pub fn apply(&self, theta: &Field) -> Result<Field, ObsError> {
        self.check_field(theta)?;
        Ok(Field::new(self.grid, self.apply_vec(&theta.values().view()))?)
    }

    /// Quadratic form `<G θ, θ>` in the discrete `L^2` inner product.
    pub fn quadratic_form(&self, theta: &Field) -> Result<f64, ObsError> {
        Ok(self.apply(theta)?.dot_h(theta))
    }

    fn check_field(&self, f: &Field) -> Result<(), ObsError> {
        if f.grid() != self.grid {
            return Err(ObsError::Pde(PdeError::ShapeMismatch {
                what: "gramian input",
                expected: format!("{}x{}", self.grid.nx(), self.grid.ny()),
                got: format!("{}x{}", f.grid().nx(), f.grid().ny()),
            }));
        }
        Ok(())
    }

    fn apply_ctrl(&self, theta: &ArrayView1<f64>) -> Array1<f64> {
        let s = self.backward_traces(theta);
        let ny = self.grid.ny();
        // Forward sweep with the midpoint-averaged signal; the node-lattice
        // resampling and this averaging compose to the identity on the
        // midpoint traces' contribution to the duality pairing.
        let mut u = Array1::zeros(self.grid.dofs());
        for k in 0..self.nt {
            let mut hbar = Array1::zeros(ny);
            for j in 0..ny {
                // (Λθ node values averaged back to midpoints)
                let left = if k == 0 {
                    s[[0, j]]
                } else {
                    0.5 * (s[[k - 1, j]] + s[[k, j]])
                };
                let right = if k + 1 == self.nt {
                    s[[self.nt - 1, j]]
                } else {
                    0.5 * (s[[k, j]] + s[[k + 1, j]])
                };
                hbar[j] = 0.5 * (left + right);
            }
            u = self.stepper.step_vec(&u.view(), Some(&hbar.view()), None);
        }
        u
    }

    /// Per-midpoint observation normal matrix `R` applied to a state:
    /// `dxdy * n^T (R m) = dt*dy * [sum_j T1(n) T1(m) + sum_s T2(n) T2(m)]`
    /// for the slope trace `T1` and nonlocal trace `T2`.
    fn r_apply(&self, m: &Array1<f64>) -> Array1<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        let dt = self.dt;
        let mut out = Array1::zeros(self.grid.dofs());
        for j in 0..ny {
            let i = self.grid.idx(0, j);
            out[i] += dt / (dx * dx * dx) * m[i];
        }
        let psi = nonlocal_trace(self.grid, &m.view());
        for s in 0..=ny {
            let w = dt / dy * psi[s];
            for ix in 0..nx {
                if s < ny {
                    out[self.grid.idx(ix, s)] -= w;
                }
                if s >= 1 {
                    out[self.grid.idx(ix, s - 1)] += w;
                }
            }
        }
        out
    }

    fn apply_stab(&self, theta: &ArrayView1<f64>) -> Array1<f64> {
        // Forward sweep storing the midpoints, then backward accumulation
        // with the exact transposes: acc_k = M^{-T}(R m_k + 2 acc) - acc.
        let mut mids = Vec::with_capacity(self.nt);
        let mut u = theta.to_owned();
        for _ in 0..self.nt {
            let m = self.stepper.midpoint(&u.view());
            u = 2.0 * &m - &u;
            mids.push(m);
        }
        let mut acc = Array1::zeros(self.grid.dofs());
        for k in (0..self.nt).rev() {
            let rhs: Array1<f64> = self.r_apply(&mids[k]) + 2.0 * &acc;
            acc = self.stepper.adjoint_midpoint(&rhs.view()) - acc;
        }
        acc
    }
}

impl SymOp for GramianHandle {
    fn dim(&self) -> usize {
        self.grid.dofs()
    }
    fn apply_vec(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        match self.mode {
            ObsMode::Ctrl => self.apply_ctrl(v),
            ObsMode::Stab { .. } => self.apply_stab(v),
        }
    }
}

/// Result of [`min_eig`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinEig {
    /// Upper estimate of the smallest eigenvalue (nonnegative for a PSD
    /// operator up to round-off).
    pub lambda_min: f64,
    /// Shifted-power iterations used.
    pub iterations: usize,
}

/// Number of plain power iterations used to bound `||G||` from above.
const NORM_BOUND_ITERS: usize = 30;

/// Smallest-eigenvalue estimate for a symmetric PSD operator by power
/// iteration on the shifted operator `cI - G`, with
/// `c = 1.01 * (norm estimate from 30 plain power iterations)`.
///
/// The estimate approaches the smallest eigenvalue from above; iteration
/// stops once successive estimates differ by at most `tol * c`.  Exceeding
/// `maxit` returns [`ObsError::NotConverged`] carrying the last estimate.
/// All randomness comes from `seed`, so equal seeds give bitwise-equal
/// results.
pub fn min_eig(op: &dyn SymOp, tol: f64, maxit: usize, seed: u64) -> Result<MinEig, ObsError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ObsError::BadTol { tol });
    }
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_unit = |rng: &mut ChaCha8Rng| -> Array1<f64> {
        let v: Array1<f64> = Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)));
        let nrm = v.dot(&v).sqrt();
        if nrm > 0.0 {
            v / nrm
        } else {
            Array1::from_elem(n, (n as f64).sqrt().recip())
        }
    };

    // Phase 1: upper bound on ||G||.
    let mut v = random_unit(&mut rng);
    let mut ray = 0.0;
    for _ in 0..NORM_BOUND_ITERS {
        let gv = op.apply_vec(&v.view());
        ray = v.dot(&gv);
        let nrm = gv.dot(&gv).sqrt();
        if nrm == 0.0 {
            // G annihilates the Krylov space; treat the operator as zero on
            // it and report the smallest eigenvalue 0 directly.
            return Ok(MinEig {
                lambda_min: 0.0,
                iterations: 0,
            });
        }
        v = gv / nrm;
    }
    let c = 1.01 * ray.max(0.0);
    if c == 0.0 {
        return Ok(MinEig {
            lambda_min: 0.0,
            iterations: 0,
        });
    }

    // Phase 2: power iteration on B = cI - G; lambda_min = c - lambda_max(B).
    let mut w = random_unit(&mut rng);
    let mut prev = f64::INFINITY;
    let mut last = f64::INFINITY;
    for it in 1..=maxit {
        let gw = op.apply_vec(&w.view());
        let bw = c * &w - &gw;
        let mu = w.dot(&bw) / w.dot(&w);
        let est = c - mu;
        if (est - prev).abs() <= tol * c {
            return Ok(MinEig {
                lambda_min: est,
                iterations: it,
            });
        }
        prev = est;
        last = est;
        let nrm = bw.dot(&bw).sqrt();
        if nrm == 0.0 {
            // w is an exact null vector of B: G w = c w, so the Rayleigh
            // estimate est = c is already stationary.
            return Ok(MinEig {
                lambda_min: est,
                iterations: it,
            });
        }
        w = bw / nrm;
    }
    Err(ObsError::NotConverged {
        last,
        iterations: maxit,
    })
}

/// Grid selection rule for scans: keeps `dx` approximately constant across
/// side lengths (so resolution, not grid size, is held fixed), with
/// `dy ~ 2 dx` and the validity floors `Nx >= 8`, `Ny >= 4`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridPolicy {
    pub dx_target: f64,
}

impl GridPolicy {
    pub fn grid_for(&self, l: f64) -> Result<Grid, PdeError> {
        if !(self.dx_target.is_finite() && self.dx_target > 0.0) {
            return Err(PdeError::BadSideLength { l: self.dx_target });
        }
        let nx = ((l / self.dx_target).round() as i64 - 1).max(8) as usize;
        let ny = ((l / (2.0 * self.dx_target)).round() as i64 - 1).max(4) as usize;
        Grid::new(l, nx, ny)
    }
}

/// Observability constants for one side length at fixed discretization.
#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityReport {
    pub l: f64,
    pub t: f64,
    pub dt: f64,
    pub nx: usize,
    pub ny: usize,
    pub mode: String,
    /// Upper estimate of the smallest Gramian eigenvalue.
    pub lambda_min: f64,
    /// `1 / lambda_min` (infinite when `lambda_min = 0`).
    pub c_obs: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One scan entry: either a report or the recorded failure for that `L`.
#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub l: f64,
    pub outcome: Result<ObservabilityReport, String>,
}

/// Scan output: per-L entries in input order, plus the indices of entries
/// whose `lambda_min` is a strict local minimum among successful neighbors —
/// candidate critical-length dips.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
    pub local_min_indices: Vec<usize>,
}

/// Scan configuration; `seed` feeds every per-L eigenvalue estimate, so a
/// repeated scan (or duplicate L entries) reproduces results bitwise.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub l_values: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub mode: ObsMode,
    pub policy: GridPolicy,
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
}

/// Runs one observability report for a single side length.
pub fn report_for(
    l: f64,
    t: f64,
    dt: f64,
    mode: ObsMode,
    policy: GridPolicy,
    tol: f64,
    maxit: usize,
    seed: u64,
) -> Result<ObservabilityReport, ObsError> {
    let grid = policy.grid_for(l)?;
    let handle = GramianHandle::new(grid, t, dt, mode)?;
    let (lambda_min, iterations, converged) = match min_eig(&handle, tol, maxit, seed) {
        Ok(r) => (r.lambda_min, r.iterations, true),
        Err(ObsError::NotConverged { last, iterations }) => (last, iterations, false),
        Err(e) => return Err(e),
    };
    Ok(ObservabilityReport {
        l,
        t,
        dt,
        nx: grid.nx(),
        ny: grid.ny(),
        mode: mode.label().to_string(),
        lambda_min,
        c_obs: if lambda_min > 0.0 {
            1.0 / lambda_min
        } else {
            f64::INFINITY
        },
        iterations,
        converged,
    })
}

/// Scans the observability constant across side lengths.  Each `L` is an
/// independent task (parallelized, deterministic); per-L failures are
/// recorded in the entry and the scan continues.  A non-convergent
/// eigenvalue estimate is *not* a failure: the entry reports the last
/// estimate with `converged = false`.
pub fn scan(cfg: &ScanConfig) -> Result<ScanResult, ObsError> {
    if cfg.l_values.is_empty() {
        return Err(ObsError::EmptyScan);
    }
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
        return Err(ObsError::BadTol { tol: cfg.tol });
    }
    let entries: Vec<ScanEntry> = cfg
        .l_values
        .par_iter()
        .map(|&l| ScanEntry {
            l,
            outcome: report_for(
                l, cfg.t, cfg.dt, cfg.mode, cfg.policy, cfg.tol, cfg.maxit, cfg.seed,
            )
            .map_err(|e| e.to_string()),
        })
        .collect();

    let lam = |i: usize| -> Option<f64> {
        entries[i].outcome.as_ref().ok().map(|r| r.lambda_min)
    };
    let mut local_min_indices = Vec::new();
    for i in 1..entries.len().saturating_sub(1) {
        if let (Some(prev), Some(cur), Some(next)) = (lam(i - 1), lam(i), lam(i + 1)) {
            if cur < prev && cur < next {
                local_min_indices.push(i);
            }
        }
    }
    Ok(ScanResult {
        entries,
        local_min_indices,
    })
}
