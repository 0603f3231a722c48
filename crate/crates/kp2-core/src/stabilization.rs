//! Feedback stabilization: running the damped system, certifying an explicit
//! exponential decay rate, and fitting empirical rates.
//!
//! # The certified rate
//!
//! With the boundary feedback `u_x(L, y) = -α u_x(0, y)`, a Lyapunov
//! functional `V(t) = E(t) + γ ∫∫ x u²` yields, for side lengths
//! `0 < L < √3` and feedback gains `0 < |α| < 1`, the explicit bound
//!
//! ```text
//! E(t) <= ρ E(0) e^{-ν t},     ρ = 1 + L γ,
//! ```
//!
//! valid for every `γ` in `(0, (1-α²)/(L α²))` and every
//! `ν < γ (3-L²) / ((1+Lγ) L²)`.  [`lyapunov_params`] picks `γ` at a
//! caller-chosen safety fraction of its supremum — the `ν`-bound is
//! increasing in `γ`, so the supremum maximizes the certifiable rate while
//! `safety < 1` keeps both inequalities strict — and applies the same
//! fraction to `ν`.
//!
//! For `L ≥ √3` (off the critical set) exponential decay still holds but
//! comes from a compactness argument with no explicit constant, so this
//! module certifies nothing there: callers can still run the feedback system
//! and fit an empirical rate with [`fit_decay`].
//!
//! # Checking at the discrete level
//!
//! The discrete feedback generator is dissipative by construction (the same
//! energy identity the simulator enforces), so the certified bound is
//! expected to hold sample-by-sample on the recorded energy trace;
//! [`check_decay_bound`] verifies exactly that and reports the worst ratio
//! `E(t_k) / (ρ E(0) e^{-ν t_k})` either way.

use crate::pde_core::{simulate, EnergyTrace, Field, PdeError, SimConfig, Trajectory};
use serde::Serialize;
use thiserror::Error;

/// Errors from certificate construction, decay fits, and bound checks.
#[derive(Debug, Error)]
pub enum StabError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    /// The explicit-rate theorem hypothesis `0 < L < √3` fails.
    #[error("side length {l} outside the certified range 0 < L < sqrt(3)")]
    HypothesisViolated { l: f64 },
    /// `|α| = 1` makes the admissible interval for `γ` empty.
    #[error("feedback gain alpha = {alpha} leaves no admissible gamma (1 - alpha^2 = 0)")]
    EmptyGammaInterval { alpha: f64 },
    /// The feedback gain is outside `0 < |α| < 1` (zero, too large, or not
    /// finite).
    #[error("feedback gain alpha = {alpha} outside 0 < |alpha| < 1")]
    BadAlpha { alpha: f64 },
    /// The safety fraction must lie strictly between 0 and 1.
    #[error("safety fraction {safety} outside (0, 1)")]
    BadSafety { safety: f64 },
    /// The decay fit needs enough strictly positive energy samples.
    #[error("decay fit domain error: {detail}")]
    FitDomain { detail: String },
    /// A trace was checked against a certificate for different parameters.
    #[error("trace/certificate mismatch: {what}")]
    MismatchedParameters { what: String },
}

/// An explicit exponential-decay certificate `E(t) <= ρ E(0) e^{-ν t}` for
/// the feedback-closed system at side length `l` and gain `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub l: f64,
    pub alpha: f64,
    /// Lyapunov weight, strictly inside `(0, (1-α²)/(Lα²))`.
    pub gamma: f64,
    /// Certified decay rate, strictly below `γ(3-L²)/((1+Lγ)L²)`.
    pub nu: f64,
    /// Overshoot constant `1 + Lγ` (exact).
    pub rho: f64,
}

/// Result of a log-linear least-squares fit `E(t) ≈ amplitude · e^{-mu t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted exponential rate (positive for decaying data).
    pub mu: f64,
    /// Fitted prefactor `e^{intercept}`.
    pub amplitude: f64,
    /// Root-mean-square residual of the fit in log space.
    pub rms_log_residual: f64,
}

/// Outcome of checking a recorded energy trace against a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    /// Whether every sample satisfies `E(t_k) <= ρ E(0) e^{-ν t_k}`.
    pub holds: bool,
    /// Worst ratio `E(t_k) / (ρ E(0) e^{-ν t_k})` over all samples
    /// (`<= 1` exactly when the bound holds; 0 for an all-zero trace).
    pub max_ratio: f64,
    /// Time at which the worst ratio occurs.
    pub argmax_t: f64,
}

/// Builds the decay certificate for side length `l` and feedback gain
/// `alpha`, taking both `γ` and `ν` at the fraction `safety` of their
/// admissible suprema:
///
/// ```text
/// γ = safety · (1-α²)/(L α²),
/// ν = safety · γ(3-L²)/((1+Lγ) L²),
/// ρ = 1 + Lγ.
/// ```
///
/// # Examples
///
/// ```
/// use kp2_core::stabilization::lyapunov_params;
/// let cert = lyapunov_params(1.0, 0.5, 0.9).unwrap();
/// assert!((cert.gamma - 2.7).abs() < 1e-15);
/// assert!((cert.rho - 3.7).abs() < 1e-15);
/// assert!((cert.nu - 0.9 * 2.7 * 2.0 / 3.7).abs() < 1e-15);
/// ```
pub fn lyapunov_params(l: f64, alpha: f64, safety: f64) -> Result<LyapunovCertificate, StabError> {
    // Compare against sqrt(3) rather than squaring: (sqrt(3))^2 rounds to
    // 2.999999999999999_6 in f64 and would sneak through an `l*l < 3` test.
    if !(l.is_finite() && l > 0.0 && l < 3.0_f64.sqrt()) {
        return Err(StabError::HypothesisViolated { l });
    }
    if alpha.abs() == 1.0 {
        return Err(StabError::EmptyGammaInterval { alpha });
    }
    if !(alpha.is_finite() && alpha != 0.0 && alpha.abs() < 1.0) {
        return Err(StabError::BadAlpha { alpha });
    }
    if !(safety.is_finite() && safety > 0.0 && safety < 1.0) {
        return Err(StabError::BadSafety { safety });
    }
    let gamma = safety * (1.0 - alpha * alpha) / (l * alpha * alpha);
    let rho = 1.0 + l * gamma;
    let nu = safety * gamma * (3.0 - l * l) / (rho * l * l);
    Ok(LyapunovCertificate {
        l,
        alpha,
        gamma,
        nu,
        rho,
    })
}

/// Runs the feedback-closed system `u_x(L,y) = -α u_x(0,y)` from `u0` over
/// horizon `t` with step `dt`.  Thin wrapper over the simulator's feedback
/// mode; the grid and side length come from `u0`.
pub fn feedback_simulate(
    u0: &Field,
    alpha: f64,
    t: f64,
    dt: f64,
) -> Result<Trajectory, StabError> {
    let cfg = SimConfig::feedback(t, dt, alpha);
    Ok(simulate(u0, &cfg, None)?)
}

/// Fits `E(t) ≈ amplitude · e^{-mu t}` by least squares on `log E` over the
/// window `[t0, t1]` (inclusive).  Requires at least 10 samples in the
/// window, all strictly positive.
pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit, StabError> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(StabError::FitDomain {
            detail: format!("window [{t0}, {t1}] is not a nonempty interval"),
        });
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in trace.t.iter().zip(trace.e.iter()) {
        if t < t0 || t > t1 {
            continue;
        }
        if e <= 0.0 {
            return Err(StabError::FitDomain {
                detail: format!("nonpositive energy sample E({t}) = {e} in window"),
            });
        }
        ts.push(t);
        ys.push(e.ln());
    }
    if ts.len() < 10 {
        return Err(StabError::FitDomain {
            detail: format!("only {} positive samples in window, need >= 10", ts.len()),
        });
    }

    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&t, &y) in ts.iter().zip(ys.iter()) {
        cov += (t - t_mean) * (y - y_mean);
        var += (t - t_mean) * (t - t_mean);
    }
    let slope = cov / var;
    let intercept = y_mean - slope * t_mean;
    let rms = (ts
        .iter()
        .zip(ys.iter())
        .map(|(&t, &y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        mu: -slope,
        amplitude: intercept.exp(),
        rms_log_residual: rms,
    })
}

/// Checks `E(t_k) <= ρ E(0) e^{-ν t_k}` at every recorded sample of a
/// feedback run.  The trace must come from a run whose side length and gain
/// match the certificate (a homogeneous or control trace carries no gain and
/// is rejected).
pub fn check_decay_bound(
    trace: &EnergyTrace,
    cert: &LyapunovCertificate,
) -> Result<BoundCheck, StabError> {
    if trace.l != cert.l {
        return Err(StabError::MismatchedParameters {
            what: format!("trace L = {} but certificate L = {}", trace.l, cert.l),
        });
    }
    match trace.alpha {
        Some(a) if a == cert.alpha => {}
        Some(a) => {
            return Err(StabError::MismatchedParameters {
                what: format!("trace alpha = {} but certificate alpha = {}", a, cert.alpha),
            })
        }
        None => {
            return Err(StabError::MismatchedParameters {
                what: "trace does not come from a feedback run".to_string(),
            })
        }
    }
    if trace.t.is_empty() {
        return Err(StabError::MismatchedParameters {
            what: "empty energy trace".to_string(),
        });
    }

    let e0 = trace.e[0];
    let mut max_ratio = 0.0_f64;
    let mut argmax_t = trace.t[0];
    let mut holds = true;
    for (&t, &e) in trace.t.iter().zip(trace.e.iter()) {
        let bound = cert.rho * e0 * (-cert.nu * t).exp();
        let ratio = if bound > 0.0 {
            e / bound
        } else if e <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > max_ratio {
            max_ratio = ratio;
            argmax_t = t;
        }
        if e > bound {
            holds = false;
        }
    }
    Ok(BoundCheck {
        holds,
        max_ratio,
        argmax_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde_core::Grid;
    use approx::assert_relative_eq;

    fn sine_field(g: Grid) -> Field {
        let pi = std::f64::consts::PI;
        let l = g.l();
        Field::from_fn(g, |x, y| (pi * x / l).sin() * (pi * y / l).sin())
    }

    // ------------------------------------------------------ lyapunov_params

    #[test]
    fn certificate_arithmetic_reference_point() {
        let c = lyapunov_params(1.0, 0.5, 0.9).unwrap();
        assert_relative_eq!(c.gamma, 2.7, max_relative = 1e-15);
        assert_relative_eq!(c.rho, 3.7, max_relative = 1e-15);
        assert_relative_eq!(c.nu, 0.9 * 2.7 * 2.0 / 3.7, max_relative = 1e-15);
        // Spelled out: nu ≈ 1.3135.
        assert!((c.nu - 1.3135).abs() < 1e-4, "nu = {}", c.nu);
    }

    #[test]
    fn certificate_strict_inequalities() {
        // For every emitted certificate: gamma strictly inside its interval,
        // nu strictly below its bound, rho exactly 1 + L*gamma.
        for &l in &[0.3, 1.0, 1.5, 1.72] {
            for &alpha in &[0.1, -0.5, 0.9] {
                for &safety in &[0.1, 0.5, 0.99] {
                    let c = lyapunov_params(l, alpha, safety).unwrap();
                    let gamma_sup = (1.0 - alpha * alpha) / (l * alpha * alpha);
                    assert!(c.gamma > 0.0 && c.gamma < gamma_sup);
                    assert!(c.nu * (1.0 + l * c.gamma) * l * l < c.gamma * (3.0 - l * l));
                    assert_eq!(c.rho, 1.0 + l * c.gamma);
                    assert!(c.nu > 0.0);
                }
            }
        }
    }

    #[test]
    fn certificate_rejects_bad_hypotheses() {
        let s3 = 3.0_f64.sqrt();
        assert!(matches!(
            lyapunov_params(s3, 0.5, 0.9),
            Err(StabError::HypothesisViolated { .. })
        ));
        assert!(matches!(
            lyapunov_params(2.0, 0.5, 0.9),
            Err(StabError::HypothesisViolated { .. })
        ));
        assert!(matches!(
            lyapunov_params(0.0, 0.5, 0.9),
            Err(StabError::HypothesisViolated { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, 1.0, 0.9),
            Err(StabError::EmptyGammaInterval { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, -1.0, 0.9),
            Err(StabError::EmptyGammaInterval { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, 0.0, 0.9),
            Err(StabError::BadAlpha { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, 1.5, 0.9),
            Err(StabError::BadAlpha { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, 0.5, 0.0),
            Err(StabError::BadSafety { .. })
        ));
        assert!(matches!(
            lyapunov_params(1.0, 0.5, 1.0),
            Err(StabError::BadSafety { .. })
        ));
    }

    // ---------------------------------------------------- feedback_simulate

    #[test]
    fn zero_initial_state_stays_zero() {
        let g = Grid::new(1.0, 12, 6).unwrap();
        let traj = feedback_simulate(&Field::zeros(g), 0.5, 0.2, 0.02).unwrap();
        assert!(traj.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn energy_nonincreasing_under_feedback() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let traj = feedback_simulate(&sine_field(g), 0.5, 1.0, 0.01).unwrap();
        for w in traj.energy.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
        assert!(traj.energy.last().unwrap() < &traj.energy[0]);
    }

    #[test]
    fn gain_sign_enters_certificate_only_through_its_square() {
        // The decay certificate depends on the gain only through alpha^2:
        // flipping the sign changes neither gamma, nu, nor rho, and the
        // certificate certifies both runs.  (The energy *traces* of the two
        // runs genuinely differ — the trajectories are different states and
        // realize different boundary traces, a ~33% gap that persists under
        // refinement — so only the certificate-level statement is
        // sign-invariant.)
        let plus = lyapunov_params(1.0, 0.5, 0.9).unwrap();
        let minus = lyapunov_params(1.0, -0.5, 0.9).unwrap();
        assert_eq!(plus.gamma, minus.gamma);
        assert_eq!(plus.nu, minus.nu);
        assert_eq!(plus.rho, minus.rho);

        let g = Grid::new(1.0, 16, 8).unwrap();
        let tp = feedback_simulate(&sine_field(g), 0.5, 1.0, 0.01).unwrap();
        let tm = feedback_simulate(&sine_field(g), -0.5, 1.0, 0.01).unwrap();
        assert!(check_decay_bound(&tp.energy_trace(), &plus).unwrap().holds);
        assert!(check_decay_bound(&tm.energy_trace(), &minus).unwrap().holds);

        // Both signs dissipate: energy nonincreasing in each run.
        for traj in [&tp, &tm] {
            for w in traj.energy.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    // ------------------------------------------------------------ fit_decay

    fn synthetic_trace(f: impl Fn(f64) -> f64, n: usize, t_max: f64) -> EnergyTrace {
        let t: Vec<f64> = (0..=n).map(|k| t_max * k as f64 / n as f64).collect();
        let e = t.iter().map(|&tk| f(tk)).collect();
        EnergyTrace {
            t,
            e,
            l: 1.0,
            alpha: Some(0.5),
        }
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let tr = synthetic_trace(|t| (-2.0 * t).exp(), 50, 1.0);
        let fit = fit_decay(&tr, (0.0, 1.0)).unwrap();
        assert!((fit.mu - 2.0).abs() <= 1e-10, "mu = {}", fit.mu);
        assert!((fit.amplitude - 1.0).abs() <= 1e-10);
        assert!(fit.rms_log_residual <= 1e-12);
    }

    #[test]
    fn fit_on_constant_energy_is_zero_rate() {
        let tr = synthetic_trace(|_| 0.75, 30, 3.0);
        let fit = fit_decay(&tr, (0.0, 3.0)).unwrap();
        assert!(fit.mu.abs() <= 1e-12);
        assert_relative_eq!(fit.amplitude, 0.75, max_relative = 1e-12);
    }

    #[test]
    fn fit_respects_window() {
        // Two regimes; fitting the tail window must see only the tail rate.
        let tr = synthetic_trace(|t| if t < 1.0 { (-5.0 * t).exp() } else { (-5.0 - (t - 1.0)).exp() }, 200, 2.0);
        let fit = fit_decay(&tr, (1.0, 2.0)).unwrap();
        assert!((fit.mu - 1.0).abs() <= 1e-8, "mu = {}", fit.mu);
    }

    #[test]
    fn fit_rejects_bad_domains() {
        let tr = synthetic_trace(|t| 1.0 - t, 20, 2.0); // hits zero and below
        assert!(matches!(
            fit_decay(&tr, (0.0, 2.0)),
            Err(StabError::FitDomain { .. })
        ));
        let short = synthetic_trace(|t| (-t).exp(), 5, 1.0); // 6 samples < 10
        assert!(matches!(
            fit_decay(&short, (0.0, 1.0)),
            Err(StabError::FitDomain { .. })
        ));
        let tr = synthetic_trace(|t| (-t).exp(), 50, 1.0);
        assert!(matches!(
            fit_decay(&tr, (1.0, 0.5)),
            Err(StabError::FitDomain { .. })
        ));
    }

    #[test]
    fn empirical_rate_on_feedback_run_is_positive() {
        let g = Grid::new(1.0, 16, 8).unwrap();
        let traj = feedback_simulate(&sine_field(g), 0.5, 2.0, 0.02).unwrap();
        let fit = fit_decay(&traj.energy_trace(), (0.0, 2.0)).unwrap();
        assert!(fit.mu > 0.0, "mu = {}", fit.mu);
    }

    // ---------------------------------------------------- check_decay_bound

    #[test]
    fn bound_check_trivial_and_mismatch_cases() {
        let cert = lyapunov_params(1.0, 0.5, 0.9).unwrap();

        // Zero trajectory satisfies the bound vacuously.
        let g = Grid::new(1.0, 12, 6).unwrap();
        let traj = feedback_simulate(&Field::zeros(g), 0.5, 0.2, 0.02).unwrap();
        let chk = check_decay_bound(&traj.energy_trace(), &cert).unwrap();
        assert!(chk.holds);
        assert_eq!(chk.max_ratio, 0.0);

        // Mismatched gain, mismatched length, and non-feedback traces are
        // configuration errors.
        let other = feedback_simulate(&Field::zeros(g), 0.25, 0.2, 0.02).unwrap();
        assert!(matches!(
            check_decay_bound(&other.energy_trace(), &cert),
            Err(StabError::MismatchedParameters { .. })
        ));
        let g2 = Grid::new(1.5, 12, 6).unwrap();
        let wrong_l = feedback_simulate(&Field::zeros(g2), 0.5, 0.2, 0.02).unwrap();
        assert!(matches!(
            check_decay_bound(&wrong_l.energy_trace(), &cert),
            Err(StabError::MismatchedParameters { .. })
        ));
        let free = simulate(&Field::zeros(g), &SimConfig::homogeneous(0.2, 0.02), None).unwrap();
        assert!(matches!(
            check_decay_bound(&free.energy_trace(), &cert),
            Err(StabError::MismatchedParameters { .. })
        ));
    }

    #[test]
    fn certified_bound_holds_on_feedback_run() {
        let cert = lyapunov_params(1.0, 0.5, 0.9).unwrap();
        let g = Grid::new(1.0, 24, 12).unwrap();
        let traj = feedback_simulate(&sine_field(g), 0.5, 2.0, 0.01).unwrap();
        let chk = check_decay_bound(&traj.energy_trace(), &cert).unwrap();
        assert!(chk.holds, "max ratio {} at t = {}", chk.max_ratio, chk.argmax_t);
        assert!(chk.max_ratio <= 1.0);

        // The empirical rate is at least the certified one (up to fit noise).
        let fit = fit_decay(&traj.energy_trace(), (0.0, 2.0)).unwrap();
        assert!(
            fit.mu >= cert.nu - 1e-6,
            "empirical {} vs certified {}",
            fit.mu,
            cert.nu
        );
    }

    #[test]
    fn inflated_rate_fails_the_check() {
        // A certificate with nu pushed to 10x the theorem bound must be
        // violated somewhere on a real run (documents the sharpness margin).
        let mut cert = lyapunov_params(1.0, 0.5, 0.9).unwrap();
        cert.nu *= 10.0;
        let g = Grid::new(1.0, 24, 12).unwrap();
        let traj = feedback_simulate(&sine_field(g), 0.5, 2.0, 0.01).unwrap();
        let chk = check_decay_bound(&traj.energy_trace(), &cert).unwrap();
        assert!(!chk.holds);
        assert!(chk.max_ratio > 1.0);
    }
}
