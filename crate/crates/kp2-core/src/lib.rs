//! Workbench for boundary control of the linear KP-II equation on a square.
//!
//! The crate is organised around one PDE,
//!
//! ```text
//! u_t + u_x + u_xxx + ∂x⁻¹ u_yy = 0   on Ω = (0,L) × (0,L),
//! ```
//!
//! with homogeneous Dirichlet conditions on the boundary, a Neumann-type
//! datum `u_x(L,y,t)` used either as a control input or closed by the
//! feedback law `u_x(L,y,t) = -α u_x(0,y,t)`, and the nonlocal
//! antiderivative `∂x⁻¹f = -∫_x^L f ds`.
//!
//! Module map:
//!
//! * [`crit_lengths`] — exact integer arithmetic for the critical-length
//!   sets `R` (square domain), `R*` (a closed-form subfamily) and the
//!   classical KdV set `N`.
//! * [`spectral`] — quartic root configurations behind the critical
//!   lengths, exact Vieta/Girard–Newton residuals in the field `Q(√P)`,
//!   the entire-function witness, and a 1-D discrete criticality
//!   indicator for the reduced ODE.
//! * [`pde_core`] — finite-difference discretization and Crank–Nicolson
//!   time stepping of the homogeneous / adjoint / feedback / controlled
//!   systems, with energy and boundary-trace recording.
//! * [`observability`] — matrix-free observability Gramians, smallest
//!   eigenvalues by shifted power iteration, and scans over `L`.
//! * [`hum_control`] — boundary-control synthesis by conjugate gradient
//!   on the Gramian equation (the Hilbert Uniqueness Method).
//! * [`stabilization`] — feedback runs, Lyapunov decay certificates and
//!   empirical decay-rate fits.

pub mod crit_lengths;
pub mod hum_control;
pub mod observability;
pub mod pde_core;
pub mod spectral;
pub mod stabilization;
