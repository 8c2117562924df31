//! Closed-form spectrum: γ roots, transition loci, truncation curves and
//! the piecewise integral-means exponent.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance for deciding which side of a transition `q` sits on.
pub const BRANCH_REL_TOL: f64 = 1e-12;

/// A point `(q, κ)` of the parameter half-plane, `κ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SleParams<S = f64> {
    q: S,
    kappa: S,
}

impl<S: Scalar> SleParams<S> {
    pub fn new(q: S, kappa: S) -> Result<Self> {
        if kappa < S::zero() || !kappa.is_finite_value() || !q.is_finite_value() {
            return Err(Error::InvalidParameter(format!(
                "need finite q and kappa >= 0, got q={q:?}, kappa={kappa:?}"
            )));
        }
        Ok(SleParams { q, kappa })
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    pub fn kappa(&self) -> &S {
        &self.kappa
    }

    pub fn to_f64(&self) -> SleParams<f64> {
        SleParams { q: self.q.to_f64(), kappa: self.kappa.to_f64() }
    }
}

/// Both roots of `κγ²/2 − (2 + κ/2)γ + q = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRoots {
    pub gamma_minus: f64,
    /// Absent at `κ = 0`, where the quadratic degenerates to a line.
    pub gamma_plus: Option<f64>,
    pub discriminant: f64,
}

/// γ roots of the change of variables `q = 2γ + κγ/2 − κγ²/2`.
///
/// The minus root is evaluated as `4q / (κ + 4 + √disc)`, which is the
/// rationalized form of the textbook expression and stays finite at
/// `κ = 0` (giving `q/2`).
pub fn gamma_roots(params: &SleParams) -> Result<GammaRoots> {
    let q = params.q;
    let k = params.kappa;
    let disc = (k + 4.0) * (k + 4.0) - 8.0 * q * k;
    if disc < 0.0 {
        return Err(Error::NoRealGamma { q, kappa: k, discriminant: disc });
    }
    let s = disc.sqrt();
    let gamma_minus = 4.0 * q / (k + 4.0 + s);
    let gamma_plus = (k > 0.0).then(|| (k + 4.0 + s) / (2.0 * k));
    Ok(GammaRoots { gamma_minus, gamma_plus, discriminant: disc })
}

/// `q = 2γ + κγ/2 − κγ²/2`.
pub fn q_of_gamma<S: Scalar>(gamma: &S, kappa: &S) -> S {
    let two = S::from_i64(2);
    let g = gamma.clone();
    two.clone() * g.clone() + kappa.clone() * g.clone() / two.clone()
        - kappa.clone() * g.clone() * g / two
}

/// Positive-q transition `Q(κ)`, with the removable singularity at `κ = 0`
/// cancelled analytically: `Q(0) = 1/3`.
pub fn q_transition(kappa: f64) -> f64 {
    let k = kappa;
    // (k²+8k+12)² − 4(2k²+16k+36) = k(k³+16k²+80k+128)
    let root = (2.0 * k * k + 16.0 * k + 36.0).sqrt();
    let num = k * k * k + 16.0 * k * k + 80.0 * k + 128.0;
    num / (16.0 * (k * k + 8.0 * k + 12.0 + 2.0 * root))
}

/// Tip transition `q = −1 − 3κ/8`.
pub fn q_tip(kappa: f64) -> f64 {
    -1.0 - 3.0 * kappa / 8.0
}

/// Which line of the piecewise spectrum applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Tip,
    Bulk,
    Derivative,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Tip => "Tip",
            Branch::Bulk => "Bulk",
            Branch::Derivative => "Derivative",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumValue {
    pub beta: f64,
    pub branch: Branch,
    /// Boundary exponent before the integrability shift.
    pub beta_tilde: f64,
    /// γ₋ used on the tip/bulk branches; `None` on the derivative branch.
    pub gamma_minus: Option<f64>,
}

/// Derivative-branch value `3q − 1/2 − √(1 + 2qκ)/2`.
pub fn derivative_branch(q: f64, kappa: f64) -> f64 {
    3.0 * q - 0.5 - 0.5 * (1.0 + 2.0 * q * kappa).sqrt()
}

/// Shift from the boundary exponent to β: the prefactor
/// `((1−w)(1−w̄))^γ` stops being integrable on the circle for `γ < −1/2`.
pub fn shift_beta_tilde(beta_tilde: f64, gamma: f64) -> f64 {
    if gamma <= -0.5 {
        beta_tilde - 2.0 * gamma - 1.0
    } else {
        beta_tilde
    }
}

fn at_or_above(q: f64, threshold: f64) -> bool {
    q >= threshold - BRANCH_REL_TOL * threshold.abs().max(1.0)
}

/// Average integral-means β-spectrum of the interior whole-plane SLE_κ.
pub fn beta_spectrum(params: &SleParams) -> SpectrumValue {
    let (q, k) = (params.q, params.kappa);
    let big_q = q_transition(k);
    if at_or_above(q, big_q) {
        let beta = derivative_branch(q, k);
        return SpectrumValue { beta, branch: Branch::Derivative, beta_tilde: beta, gamma_minus: None };
    }
    let g = gamma_roots(params)
        .expect("below Q(kappa) the discriminant is positive")
        .gamma_minus;
    let beta_tilde = k * g * g / 2.0;
    let tip = q_tip(k);
    if q <= tip + BRANCH_REL_TOL * tip.abs() {
        SpectrumValue {
            beta: beta_tilde - 2.0 * g - 1.0,
            branch: Branch::Tip,
            beta_tilde,
            gamma_minus: Some(g),
        }
    } else {
        SpectrumValue { beta: beta_tilde, branch: Branch::Bulk, beta_tilde, gamma_minus: Some(g) }
    }
}

/// A point of the M-th truncation family, parametrized by γ.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams<S = f64> {
    m: u32,
    gamma: S,
}

impl<S: Scalar> CurveParams<S> {
    /// Validates `γ ≥ −M/3` and a positive denominator
    /// `M² + 2Mγ + 2γ² − γ`.
    pub fn new(m: u32, gamma: S) -> Result<Self> {
        let c = CurveParams { m, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn gamma(&self) -> &S {
        &self.gamma
    }

    pub fn m_scalar(&self) -> S {
        S::from_i64(self.m as i64)
    }

    /// `M² + 2Mγ + 2γ² − γ`.
    pub fn denominator(&self) -> S {
        let m = self.m_scalar();
        let g = self.gamma.clone();
        m.clone() * m.clone() + S::from_i64(2) * m * g.clone() + S::from_i64(2) * g.clone() * g.clone()
            - g
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidCurve { m: self.m, gamma: self.gamma.render(), reason: reason.into() }
    }

    fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite_value() {
            return Err(self.invalid("gamma is not finite"));
        }
        let m = self.m_scalar();
        if S::from_i64(3) * self.gamma.clone() + m < S::zero() {
            return Err(self.invalid("gamma < -M/3"));
        }
        if self.denominator() <= S::zero() {
            return Err(self.invalid(format!(
                "denominator M^2+2M*gamma+2*gamma^2-gamma = {} is not positive",
                self.denominator().render()
            )));
        }
        Ok(())
    }

    pub fn to_f64(&self) -> CurveParams<f64> {
        CurveParams { m: self.m, gamma: self.gamma.to_f64() }
    }
}

/// `(q, κ)` on the M-th truncation curve.
pub fn curve_point<S: Scalar>(curve: &CurveParams<S>) -> Result<SleParams<S>> {
    let m = curve.m_scalar();
    let g = curve.gamma.clone();
    let den = curve.denominator();
    let kappa = S::from_i64(2) * (m.clone() + S::from_i64(3) * g.clone()) / den.clone();
    let q = g.clone() * (m.clone() + g.clone()) * (S::from_i64(2) * m + S::one() + g) / den;
    SleParams::new(q, kappa).map_err(|e| curve.invalid(e.to_string()))
}

/// Curve parameter γ_M at which β₀ and β_{2M} cross.
pub fn gamma_transition(m: u32) -> f64 {
    let m = m as f64;
    ((36.0 * m * m + 20.0 * m + 1.0).sqrt() - 6.0 * m + 1.0) / 16.0
}

/// Closed-form eigenvalue β_l of the (2M+1)-dimensional tridiagonal
/// boundary problem, `0 ≤ l ≤ 2M`.
pub fn eigen_beta_closed<S: Scalar>(curve: &CurveParams<S>, l: u32) -> Result<S> {
    if l > 2 * curve.m {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue index l={l} outside 0..={}",
            2 * curve.m
        )));
    }
    let m = curve.m_scalar();
    let g = curve.gamma.clone();
    let l = S::from_i64(l as i64);
    let two = S::from_i64(2);
    let m3g = m.clone() + S::from_i64(3) * g.clone();
    let lin = two.clone() * m.clone() * m.clone() + m - S::from_i64(8) * g.clone() * g.clone() + g.clone();
    let num = two.clone() * m3g.clone() * g.clone() * g - lin * l.clone() + m3g * l.clone() * l;
    Ok(num / (two * curve.denominator()))
}

/// Boundary exponent selected on a curve: β₀ up to γ_M, β_{2M} beyond.
pub fn beta_tilde_on_curve<S: Scalar>(curve: &CurveParams<S>) -> Result<S> {
    if curve.gamma.to_f64() <= gamma_transition(curve.m) {
        eigen_beta_closed(curve, 0)
    } else {
        eigen_beta_closed(curve, 2 * curve.m)
    }
}

/// β on a curve, after the integrability shift.
pub fn beta_on_curve(curve: &CurveParams<f64>) -> Result<f64> {
    Ok(shift_beta_tilde(beta_tilde_on_curve(curve)?, curve.gamma))
}
