//! Quartic root configurations behind the critical lengths, exact
//! Vieta/Girard–Newton residuals, the entire-function witness, and a
//! 1-D discrete criticality indicator.
//!
//! For a member `(n, m)` of the critical set the construction places
//! four real roots
//!
//! ```text
//! κ₀ = −π(3m₁+2m₂+m₃)/(2L),     κⱼ = κ₀ + dⱼ·2π/L,
//! d = (0, m₁, m₁+m₂, m₁+m₂+m₃),
//! ```
//!
//! which are meant to solve the quartic `k⁴ − k² − σk − (nπ/L)² = 0`.
//! Its coefficient/root identities (Girard–Newton) are
//!
//! ```text
//! e₁ = 0,   e₂ = −1,   e₃ = σ,   e₄ = −(nπ/L)²,
//! ```
//!
//! with `eᵢ` the elementary symmetric functions of the roots. After the
//! substitutions `h = 2π/L` and `L = π√P/(4n)`, every `π` cancels:
//! `κⱼ = 2n·δⱼ/√P` with integer `δⱼ = 4dⱼ − (3m₁+2m₂+m₃)`, so each
//! residual is an exact element of the quadratic field `Q(√P)` — no
//! floating point is involved in the central algebraic claims. The
//! second relation genuinely fails (`e₂ ≠ −1`; e.g. `e₂ = −664/3` for
//! `(15,(1,1,4))`), and the exact residual is reported as data.
//!
//! The separated 1-D eigenvalue problem
//!
//! ```text
//! λp + p' + p''' + ξ·∂x⁻¹p = 0,    p(0) = p(L) = p'(0) = 0,
//! ```
//!
//! is discretized in [`criticality_indicator`]: a small value of the
//! over-determination functional `|p'(L)|` over all discrete eigenpairs
//! signals that the fourth boundary condition is nearly satisfiable,
//! i.e. that `L` is critical for the reduced equation.

use crate::crit_lengths::{exact_product_validated, CritError, CriticalParams};
use ndarray::Array2;
use ndarray_linalg::Eig;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::f64::consts::PI;
use std::fmt;

/// Errors from spectrum construction and the discrete ODE indicator.
#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    InvalidParams(#[from] CritError),
    #[error("grid too coarse (N = {n}): the indicator requires N ≥ 16")]
    ResolutionTooLow { n: usize },
    #[error("invalid ODE configuration: L = {l} must be positive and finite")]
    InvalidOdeConfig { l: f64 },
    #[error("dense eigensolve failed: {0}")]
    Eigensolve(String),
}

// ---------------------------------------------------------------------
// Exact arithmetic in the quadratic field Q(√P)
// ---------------------------------------------------------------------

/// An exact element `a + b·√P` of the quadratic extension `Q(√P)` for a
/// fixed positive integer `P`.
///
/// When `P` happens to be a perfect square (`√P = s ∈ Z`) the value is
/// canonicalized to `(a + b·s) + 0·√P` at construction, so equality and
/// zero-testing stay sound across both shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadExt {
    a: BigRational,
    b: BigRational,
    p: BigInt,
}

impl QuadExt {
    /// Builds `a + b√P`; requires `P > 0`.
    pub fn new(a: BigRational, b: BigRational, p: BigInt) -> Self {
        assert!(p.is_positive(), "quadratic extension needs P > 0");
        let s = p.sqrt();
        if &s * &s == p {
            // Perfect square: fold the radical part into the rationals.
            Self {
                a: a + b * BigRational::from(s),
                b: BigRational::zero(),
                p,
            }
        } else {
            Self { a, b, p }
        }
    }

    pub fn rational(a: BigRational, p: BigInt) -> Self {
        Self::new(a, BigRational::zero(), p)
    }

    /// The pure-radical element `c·√P`.
    pub fn radical(c: BigRational, p: BigInt) -> Self {
        Self::new(BigRational::zero(), c, p)
    }

    pub fn zero_in(p: BigInt) -> Self {
        Self::rational(BigRational::zero(), p)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// The rational part (exact when the radical part vanishes).
    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    pub fn radical_part(&self) -> &BigRational {
        &self.b
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.p, other.p);
        Self {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
            p: self.p.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.p, other.p);
        Self {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
            p: self.p.clone(),
        }
    }

    /// `(a + b√P)(c + d√P) = (ac + bdP) + (ad + bc)√P`.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.p, other.p);
        let p_rat = BigRational::from(self.p.clone());
        Self {
            a: &self.a * &other.a + &self.b * &other.b * &p_rat,
            b: &self.a * &other.b + &self.b * &other.a,
            p: self.p.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        let a = self.a.to_f64().expect("rational part fits f64");
        let b = self.b.to_f64().expect("radical coefficient fits f64");
        let sqrt_p = self.p.to_f64().expect("P fits f64").sqrt();
        a + b * sqrt_p
    }
}

impl fmt::Display for QuadExt {
    /// Exact string form: `a`, `(b)·sqrt(P)`, or `a + (b)·sqrt(P)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else if self.a.is_zero() {
            write!(f, "({})*sqrt({})", self.b, self.p)
        } else {
            write!(f, "{} + ({})*sqrt({})", self.a, self.b, self.p)
        }
    }
}

// ---------------------------------------------------------------------
// Quartic spectrum
// ---------------------------------------------------------------------

/// Exact-arithmetic layer of a spectrum: everything lives in `Q(√P)`.
#[derive(Debug, Clone)]
pub struct ExactSpectrum {
    /// The integer invariant `P` of the member.
    pub product: BigInt,
    /// Roots `κⱼ = (2n·δⱼ/P)·√P`.
    pub kappa: [QuadExt; 4],
    /// `σ = (π/L)³(m₁+2m₂+m₃)(m₃²−m₁²)` rewritten in `Q(√P)`.
    pub sigma: QuadExt,
    /// Residuals of the four Girard–Newton relations:
    /// `e₁ − 0`, `e₂ − (−1)`, `e₃ − σ`, `e₄ − (−(nπ/L)²)`.
    pub residuals: [QuadExt; 4],
}

/// The quartic root configuration attached to a candidate critical
/// length, with floating views and (for set members) the exact layer.
#[derive(Debug, Clone)]
pub struct QuarticSpectrum {
    pub params: CriticalParams,
    /// Side length the roots refer to.
    pub l: f64,
    /// `κ₀ < κ₁ < κ₂ < κ₃`, spaced by the gaps `(m₁, m₂, m₃)·2π/L`.
    pub kappa: [f64; 4],
    /// Spectral parameter: the third elementary symmetric function of
    /// the roots, `σ = (π/L)³(m₁+2m₂+m₃)(m₃²−m₁²)`.
    pub sigma: f64,
    /// Floating views of the four Girard–Newton residuals `r₁..r₄`.
    pub vieta_residuals: [f64; 4],
    /// Exact layer; present iff the quadruple satisfies the set
    /// constraint (so that `L` itself is exact in `Q(√P)`).
    pub exact: Option<ExactSpectrum>,
}

/// Cumulative gap multipliers `d = (0, m₁, m₁+m₂, m₁+m₂+m₃)`.
fn cumulative_gaps(params: &CriticalParams) -> [i64; 4] {
    let (m1, m2, m3) = params.m();
    let (m1, m2, m3) = (i64::from(m1), i64::from(m2), i64::from(m3));
    [0, m1, m1 + m2, m1 + m2 + m3]
}

/// Integer root numerators `δⱼ = 4dⱼ − (3m₁+2m₂+m₃)`; they satisfy
/// `δ₀δ₁δ₂δ₃ = −P` and `Σδⱼ = 0`.
fn root_deltas(params: &CriticalParams) -> [i64; 4] {
    let (m1, m2, m3) = params.m();
    let s = 3 * i64::from(m1) + 2 * i64::from(m2) + i64::from(m3);
    cumulative_gaps(params).map(|d| 4 * d - s)
}

/// Builds the root configuration for a validated member of the critical
/// set, including the exact `Q(√P)` layer.
///
/// # Errors
///
/// Propagates `InvalidParams` when the quadruple fails the set
/// constraint (use [`build_spectrum_raw`] to probe such configurations).
pub fn build_spectrum(params: &CriticalParams) -> Result<QuarticSpectrum, SpectralError> {
    let (m1, m2, m3) = params.m();
    // Re-validate so that spectra built from `new_unchecked` quadruples
    // cannot silently claim exactness.
    let params = CriticalParams::new(params.n(), m1, m2, m3)?;
    let p = exact_product_validated(&params);
    let n = BigInt::from(params.n());

    // κⱼ = 2n·δⱼ/√P = (2n·δⱼ/P)·√P.
    let kappa_exact: [QuadExt; 4] = root_deltas(&params).map(|d| {
        QuadExt::radical(
            BigRational::new(2 * &n * BigInt::from(d), p.clone()),
            p.clone(),
        )
    });

    // σ = (π/L)³(m₁+2m₂+m₃)(m₃²−m₁²) with (π/L) = (4n/P)·√P, so
    // σ = (64n³/P²)·(m₁+2m₂+m₃)(m₃²−m₁²)·√P.
    let sum_m = BigInt::from(i64::from(m1) + 2 * i64::from(m2) + i64::from(m3));
    let diff_sq = BigInt::from(
        i64::from(m3) * i64::from(m3) - i64::from(m1) * i64::from(m1),
    );
    let sigma_exact = QuadExt::radical(
        BigRational::new(64 * &n * &n * &n * sum_m * diff_sq, &p * &p),
        p.clone(),
    );

    // Elementary symmetric functions of the four exact roots.
    let k = &kappa_exact;
    let e1 = k[0].add(&k[1]).add(&k[2]).add(&k[3]);
    let mut e2 = QuadExt::zero_in(p.clone());
    for i in 0..4 {
        for j in (i + 1)..4 {
            e2 = e2.add(&k[i].mul(&k[j]));
        }
    }
    let mut e3 = QuadExt::zero_in(p.clone());
    for i in 0..4 {
        for j in (i + 1)..4 {
            for l in (j + 1)..4 {
                e3 = e3.add(&k[i].mul(&k[j]).mul(&k[l]));
            }
        }
    }
    let e4 = k[0].mul(&k[1]).mul(&k[2]).mul(&k[3]);

    // Targets: e₁ = 0, e₂ = −1, e₃ = σ, e₄ = −(nπ/L)² = −16n⁴/P.
    let one = QuadExt::rational(BigRational::from(BigInt::from(1)), p.clone());
    let npl_sq = QuadExt::rational(
        BigRational::new(16 * &n * &n * &n * &n, p.clone()),
        p.clone(),
    );
    let residuals = [
        e1,
        e2.add(&one),
        e3.sub(&sigma_exact),
        e4.add(&npl_sq),
    ];

    let l = crate::crit_lengths::CriticalLength::new(params).value;
    Ok(QuarticSpectrum {
        params,
        l,
        kappa: kappa_exact.each_ref().map(QuadExt::to_f64),
        sigma: sigma_exact.to_f64(),
        vieta_residuals: residuals.each_ref().map(QuadExt::to_f64),
        exact: Some(ExactSpectrum {
            product: p,
            kappa: kappa_exact,
            sigma: sigma_exact,
            residuals,
        }),
    })
}

/// Floating-point root configuration for an arbitrary quadruple and an
/// explicitly supplied length — for probes *outside* the critical set
/// (e.g. `m₁ = m₃`, where `P ≤ 0` and no length is defined by the set
/// formula). No exact layer is attached.
pub fn build_spectrum_raw(params: &CriticalParams, l: f64) -> QuarticSpectrum {
    assert!(l > 0.0 && l.is_finite(), "raw spectrum needs L > 0");
    let (m1, m2, m3) = params.m();
    let s = 3.0 * f64::from(m1) + 2.0 * f64::from(m2) + f64::from(m3);
    let kappa0 = -PI * s / (2.0 * l);
    let h = 2.0 * PI / l;
    let kappa = cumulative_gaps(params).map(|d| kappa0 + d as f64 * h);

    // Closed form for σ; the factor (m₃² − m₁²) makes σ exactly 0.0 in
    // floating point whenever m₁ = m₃.
    let pl = PI / l;
    let sigma = pl * pl * pl
        * (f64::from(m1) + 2.0 * f64::from(m2) + f64::from(m3))
        * (f64::from(m3) * f64::from(m3) - f64::from(m1) * f64::from(m1));

    let e1: f64 = kappa.iter().sum();
    let mut e2 = 0.0;
    let mut e3 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            e2 += kappa[i] * kappa[j];
            for k in (j + 1)..4 {
                e3 += kappa[i] * kappa[j] * kappa[k];
            }
        }
    }
    let e4: f64 = kappa.iter().product();
    let npl = f64::from(params.n()) * PI / l;
    let vieta_residuals = [e1, e2 + 1.0, e3 - sigma, e4 + npl * npl];

    QuarticSpectrum {
        params: *params,
        l,
        kappa,
        sigma,
        vieta_residuals,
        exact: None,
    }
}

/// The four Girard–Newton residuals `(r₁, r₂, r₃, r₄)` of a built
/// spectrum (floating views; see [`QuarticSpectrum::exact`] for the
/// `Q(√P)` values of set members).
pub fn vieta_residuals(spec: &QuarticSpectrum) -> [f64; 4] {
    spec.vieta_residuals
}

// ---------------------------------------------------------------------
// Entire-function witness
// ---------------------------------------------------------------------

/// Witness data for the compact-support (Paley–Wiener) argument: the
/// function `R₁(k) = ik(α₁ − α₂e^{−iLk})` must vanish at all four
/// roots, which works precisely because consecutive roots differ by
/// integer multiples of `2π/L`.
#[derive(Debug, Clone)]
pub struct EntireWitness {
    /// `e^{−iLκ₀}`.
    pub alpha1: Complex64,
    /// Normalized to 1.
    pub alpha2: Complex64,
    /// `max_j |R₁(κⱼ)|` — zero up to rounding for true members.
    pub max_abs_r1_at_roots: f64,
}

/// Evaluates the entire-function witness at the four roots.
pub fn entire_witness(spec: &QuarticSpectrum) -> EntireWitness {
    let alpha2 = Complex64::new(1.0, 0.0);
    let alpha1 = Complex64::from_polar(1.0, -spec.l * spec.kappa[0]);
    let max_abs_r1_at_roots = spec
        .kappa
        .iter()
        .map(|&k| {
            let r1 = Complex64::new(0.0, k)
                * (alpha1 - alpha2 * Complex64::from_polar(1.0, -spec.l * k));
            r1.norm()
        })
        .fold(0.0, f64::max);
    EntireWitness {
        alpha1,
        alpha2,
        max_abs_r1_at_roots,
    }
}

/// Certifies that the degenerate double-root configuration is
/// impossible: it would require both `κ₀² = 1/4` and
/// `κ₀²·κ₂² = −(nπ/L)²`, but `(1/4)² = 1/16 > 0 ≥ −(nπ/L)²` for every
/// real `n/L`. The inequality is evaluated, not hard-coded.
pub fn case2_excluded(n: u32, l: f64) -> bool {
    let kappa0_sq = 0.25_f64;
    let product_required = -(f64::from(n) * PI / l).powi(2);
    kappa0_sq * kappa0_sq > 0.0 && product_required <= 0.0
}

// ---------------------------------------------------------------------
// Discrete criticality indicator for the reduced 1-D ODE
// ---------------------------------------------------------------------

/// Configuration of the reduced eigenvalue problem on `(0, L)`.
#[derive(Debug, Clone, Copy)]
pub struct SpectralODEConfig {
    /// Separation constant: `ξ = −(nπ/L)²` for the 2-D mode `n`, `ξ = 0`
    /// for the 1-D (KdV) reduction.
    pub xi: f64,
    pub l: f64,
    /// Number of grid cells; nodes are `x_j = jL/N`, `j = 0..N`.
    pub n: usize,
}

impl SpectralODEConfig {
    pub fn new(xi: f64, l: f64, n: usize) -> Result<Self, SpectralError> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(SpectralError::InvalidOdeConfig { l });
        }
        if n < 16 {
            return Err(SpectralError::ResolutionTooLow { n });
        }
        Ok(Self { xi, l, n })
    }
}

/// Finite-difference weights by Fornberg's recurrence: returns `w` with
/// `w[[m, i]]` such that `f⁽ᵐ⁾(z) ≈ Σᵢ w[[m, i]]·f(x[i])`, for all
/// derivative orders `m = 0..=max_order`, on arbitrary node sets.
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Array2<f64> {
    let nd = x.len();
    assert!(nd > max_order, "need more nodes than the derivative order");
    let mut w = Array2::<f64>::zeros((max_order + 1, nd));
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    w[[0, 0]] = 1.0;
    for i in 1..nd {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for m in (1..=mn).rev() {
                    w[[m, i]] = c1 * (m as f64 * w[[m - 1, i - 1]] - c5 * w[[m, i - 1]]) / c2;
                }
                w[[0, i]] = -c1 * c5 * w[[0, i - 1]] / c2;
            }
            for m in (1..=mn).rev() {
                w[[m, j]] = (c4 * w[[m, j]] - m as f64 * w[[m - 1, j]]) / c3;
            }
            w[[0, j]] = c4 * w[[0, j]] / c3;
        }
        c1 = c2;
    }
    w
}

/// Discrete criticality indicator of the reduced ODE.
///
/// Discretizes `p ↦ −(p' + p''' + ξ·∂x⁻¹p)` on the uniform grid with
/// the three conditions `p(0) = p(L) = p'(0) = 0` built into the
/// scheme (Dirichlet rows dropped; `p₁` eliminated through a one-sided
/// third-order approximation of `p'(0) = 0`), solves the dense
/// eigenproblem, and returns
///
/// ```text
/// min over eigenpairs of  |p'(L)| · L^{3/2} / ‖p‖_{L²},
/// ```
///
/// the scale-invariant defect of the fourth, over-determining boundary
/// condition. Values near zero signal criticality of `L`.
///
/// Interior rows use fourth-order centered differences (7-node
/// windows); rows adjacent to the boundary fall back to third-order
/// one-sided closures (6-node windows). `∂x⁻¹` is the right-anchored
/// composite trapezoid `−∫ₓᴸ`.
///
/// # Errors
///
/// [`SpectralError::ResolutionTooLow`] for `N < 16`;
/// [`SpectralError::Eigensolve`] if the dense solver fails.
pub fn criticality_indicator(cfg: &SpectralODEConfig) -> Result<f64, SpectralError> {
    let n = cfg.n;
    if n < 16 {
        return Err(SpectralError::ResolutionTooLow { n });
    }
    let l = cfg.l;
    let dx = l / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|j| j as f64 * dx).collect();

    // p'(0) = 0 over nodes 0..3 (third order); with p₀ = 0 this
    // eliminates p₁ = c2·p₂ + c3·p₃.
    let w0 = fornberg_weights(0.0, &nodes[0..4], 1);
    let c2 = -w0[[1, 2]] / w0[[1, 1]];
    let c3 = -w0[[1, 3]] / w0[[1, 1]];

    // Unknowns p₂..p_{N−1}; rows are the ODE at nodes 2..N−1.
    let dim = n - 2;
    let mut a = Array2::<f64>::zeros((dim, dim));
    let col_of = |k: usize| k - 2;
    for j in 2..n {
        let row = j - 2;
        // Stencil window: 7 centered nodes when they fit, else the
        // 6-node one-sided window hugging the nearest boundary.
        let (start, len) = if j >= 3 && j + 3 <= n {
            (j - 3, 7)
        } else if j < 3 {
            (0, 6)
        } else {
            (n - 5, 6)
        };
        let w = fornberg_weights(nodes[j], &nodes[start..start + len], 3);
        for (idx, k) in (start..start + len).enumerate() {
            // Operator rows are −(p' + p''').
            let coeff = -(w[[1, idx]] + w[[3, idx]]);
            if coeff == 0.0 {
                continue;
            }
            match k {
                0 => {}
                _ if k == n => {}
                1 => {
                    a[[row, col_of(2)]] += coeff * c2;
                    a[[row, col_of(3)]] += coeff * c3;
                }
                _ => a[[row, col_of(k)]] += coeff,
            }
        }
        if cfg.xi != 0.0 {
            // −ξ·(∂x⁻¹p)_j with ∂x⁻¹p = −∫ₓᴸ p: right-anchored
            // trapezoid from node j to node N (zero end value).
            for k in j..n {
                let wt = if k == j { 0.5 } else { 1.0 };
                let coeff = cfg.xi * dx * wt;
                if k == 1 {
                    a[[row, col_of(2)]] += coeff * c2;
                    a[[row, col_of(3)]] += coeff * c3;
                } else {
                    a[[row, col_of(k)]] += coeff;
                }
            }
        }
    }

    let (_eigvals, eigvecs) = a
        .eig()
        .map_err(|e| SpectralError::Eigensolve(e.to_string()))?;

    // p'(L) over the last four nodes (third order, one-sided).
    let wl = fornberg_weights(l, &nodes[n - 3..=n], 1);

    let mut best = f64::INFINITY;
    for col in 0..dim {
        // Reconstruct the full grid function, boundary values included.
        let mut p = vec![Complex64::new(0.0, 0.0); n + 1];
        for k in 2..n {
            p[k] = eigvecs[[col_of(k), col]];
        }
        p[1] = c2 * p[2] + c3 * p[3];
        let dp_l: Complex64 = (0..4).map(|i| wl[[1, i]] * p[n - 3 + i]).sum();
        let norm_sq: f64 = p.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
        if norm_sq <= 0.0 {
            continue;
        }
        let indicator = dp_l.norm() * l.powf(1.5) / norm_sq.sqrt();
        best = best.min(indicator);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crit_lengths::enumerate_r;

    fn member(n: u32, m1: u32, m2: u32, m3: u32) -> CriticalParams {
        CriticalParams::new(n, m1, m2, m3).unwrap()
    }

    #[test]
    fn root_deltas_multiply_to_minus_p() {
        for params in [member(15, 1, 1, 4), member(12, 1, 1, 7), member(3, 7, 1, 1)] {
            let d = root_deltas(&params);
            let prod: i64 = d.iter().product();
            let p = exact_product_validated(&params);
            assert_eq!(BigInt::from(prod), -p);
            assert_eq!(d.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn spectrum_of_known_member_has_expected_roots_and_sigma() {
        let spec = build_spectrum(&member(15, 1, 1, 4)).unwrap();
        // κ₀ = −6√3.
        assert!((spec.kappa[0] + 6.0 * 3f64.sqrt()).abs() < 1e-12);
        // Gap rule at machine precision.
        let h = 2.0 * PI / spec.l;
        let gaps = [1.0, 1.0, 4.0];
        for (i, g) in gaps.iter().enumerate() {
            assert!((spec.kappa[i + 1] - spec.kappa[i] - g * h).abs() < 1e-12 * h.abs());
        }
        // σ = e₃ = 2240√3/3 for this member.
        assert!((spec.sigma - 2240.0 * 3f64.sqrt() / 3.0).abs() < 1e-9);
    }

    #[test]
    fn integer_root_member_reproduces_textbook_quartet() {
        // (12,(1,1,7)) has P = 9216 = 96², so the roots are rational:
        // κ = (−3, −2, −1, 6) with σ = 60.
        let spec = build_spectrum(&member(12, 1, 1, 7)).unwrap();
        let expected = [-3.0, -2.0, -1.0, 6.0];
        for (k, e) in spec.kappa.iter().zip(expected) {
            assert!((k - e).abs() < 1e-12);
        }
        assert!((spec.sigma - 60.0).abs() < 1e-12);
        let exact = spec.exact.as_ref().unwrap();
        // r₂ = e₂ + 1 = −24 exactly for this member.
        assert_eq!(
            exact.residuals[1].rational_part(),
            &BigRational::from(BigInt::from(-24))
        );
    }

    /// Independent oracle for e₂ along the power-sum route:
    /// `e₂ = −p₂/2 = −(h²/2)·Σ(dⱼ − S/4)² = −(2n²/P)·Σδⱼ²`,
    /// never touching the pairwise products used by the builder.
    fn e2_oracle(params: &CriticalParams) -> BigRational {
        let p = exact_product_validated(params);
        let n = BigInt::from(params.n());
        let sum_delta_sq: i64 = root_deltas(params).iter().map(|d| d * d).sum();
        BigRational::new(-2 * &n * &n * BigInt::from(sum_delta_sq), p)
    }

    #[test]
    fn exact_residuals_frozen_case() {
        let spec = build_spectrum(&member(15, 1, 1, 4)).unwrap();
        let exact = spec.exact.as_ref().unwrap();
        assert!(exact.residuals[0].is_zero(), "r1 = 0 exactly");
        assert!(exact.residuals[2].is_zero(), "r3 = 0 exactly");
        assert!(exact.residuals[3].is_zero(), "r4 = 0 exactly");
        // e₂ = −664/3, so r₂ = −661/3 — frozen value and oracle.
        let frozen = BigRational::new(BigInt::from(-661), BigInt::from(3));
        assert!(exact.residuals[1].radical_part().is_zero());
        assert_eq!(exact.residuals[1].rational_part(), &frozen);
        let one = BigRational::from(BigInt::from(1));
        assert_eq!(e2_oracle(&spec.params) + one, frozen);
    }

    #[test]
    fn exact_residuals_vanish_across_enumerated_members() {
        let members = enumerate_r(0.5, 50.0, 10).unwrap();
        assert!(members.len() >= 100);
        let one = BigRational::from(BigInt::from(1));
        for m in members.iter().take(100) {
            let spec = build_spectrum(&m.params).unwrap();
            let exact = spec.exact.as_ref().unwrap();
            assert!(exact.residuals[0].is_zero(), "r1 must vanish: {:?}", m.params);
            assert!(exact.residuals[2].is_zero(), "r3 must vanish: {:?}", m.params);
            assert!(exact.residuals[3].is_zero(), "r4 must vanish: {:?}", m.params);
            // r₂ agrees with the independent power-sum oracle.
            assert!(exact.residuals[1].radical_part().is_zero());
            assert_eq!(
                exact.residuals[1].rational_part(),
                &(e2_oracle(&m.params) + &one)
            );
        }
    }

    #[test]
    fn raw_spectrum_sigma_vanishes_when_m1_equals_m3() {
        let params = CriticalParams::new_unchecked(1, 2, 1, 2);
        let spec = build_spectrum_raw(&params, 1.0);
        assert_eq!(spec.sigma, 0.0);
        assert!(spec.exact.is_none());
        // Validated builder refuses the same quadruple.
        assert!(build_spectrum(&params).is_err());
    }

    #[test]
    fn witness_phase_constant_and_residual_tiny() {
        for params in [member(15, 1, 1, 4), member(12, 1, 1, 7)] {
            let spec = build_spectrum(&params).unwrap();
            // e^{−iLκⱼ} identical across j.
            let phases: Vec<Complex64> = spec
                .kappa
                .iter()
                .map(|&k| Complex64::from_polar(1.0, -spec.l * k))
                .collect();
            for ph in &phases[1..] {
                assert!((ph - phases[0]).norm() < 1e-12);
            }
            let w = entire_witness(&spec);
            assert!((w.alpha2.norm() - 1.0).abs() < 1e-15);
            let kmax = spec.kappa.iter().fold(0.0f64, |acc, k| acc.max(k.abs()));
            assert!(w.max_abs_r1_at_roots <= 1e-10 * kmax);
        }
    }

    #[test]
    fn case2_is_always_excluded() {
        assert!(case2_excluded(1, 1.0));
        assert!(case2_excluded(12, 2.0 * PI));
        assert!(case2_excluded(1_000_000, 1e-3));
    }

    #[test]
    fn fornberg_weights_reproduce_textbook_stencils() {
        // Centered second derivative on {−1, 0, 1}: [1, −2, 1].
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[[2, 0]] - 1.0).abs() < 1e-14);
        assert!((w[[2, 1]] + 2.0).abs() < 1e-14);
        assert!((w[[2, 2]] - 1.0).abs() < 1e-14);
        // Centered fourth-order first derivative on ±2, ±1, 0:
        // [1/12, −2/3, 0, 2/3, −1/12].
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((w[[1, i]] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn indicator_detects_the_closed_form_eigenfunction() {
        // p = 1 − cos x solves the ξ = 0 problem with λ = 0 at L = 2π
        // and satisfies the fourth condition p'(L) = 0 as well.
        let at_2pi =
            criticality_indicator(&SpectralODEConfig::new(0.0, 2.0 * PI, 256).unwrap()).unwrap();
        let at_5 = criticality_indicator(&SpectralODEConfig::new(0.0, 5.0, 256).unwrap()).unwrap();
        assert!(at_2pi <= 1e-4, "indicator at 2π too large: {at_2pi:e}");
        assert!(
            at_5 >= 100.0 * at_2pi,
            "no separation: at_5 = {at_5:e}, at_2pi = {at_2pi:e}"
        );
    }

    #[test]
    fn indicator_small_at_other_member_of_the_kdv_set() {
        let l = 2.0 * PI / 3f64.sqrt() * 7f64.sqrt();
        let v = criticality_indicator(&SpectralODEConfig::new(0.0, l, 256).unwrap()).unwrap();
        assert!(v <= 1e-3, "indicator at 2π√(7/3): {v:e}");
    }

    #[test]
    fn indicator_decreases_under_refinement_at_members() {
        let coarse =
            criticality_indicator(&SpectralODEConfig::new(0.0, 2.0 * PI, 64).unwrap()).unwrap();
        let fine =
            criticality_indicator(&SpectralODEConfig::new(0.0, 2.0 * PI, 128).unwrap()).unwrap();
        assert!(fine < coarse);
        // Non-member value stays bounded away from zero at both sizes.
        let c5 = criticality_indicator(&SpectralODEConfig::new(0.0, 5.0, 64).unwrap()).unwrap();
        let f5 = criticality_indicator(&SpectralODEConfig::new(0.0, 5.0, 128).unwrap()).unwrap();
        assert!(c5 > 1e-2 && f5 > 1e-2);
    }

    #[test]
    fn indicator_rejects_coarse_grids() {
        assert!(matches!(
            SpectralODEConfig::new(0.0, 1.0, 8),
            Err(SpectralError::ResolutionTooLow { .. })
        ));
    }
}
