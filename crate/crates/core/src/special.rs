//! Gauss hypergeometric function, the exact M=0 and M=1 moment functions,
//! the κ=0 map, and a finite-difference residual of the moment PDE.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;

const SERIES_MAX_TERMS: usize = 200_000;
/// Above this argument the non-terminating real series switches to the
/// `1 − x` connection formula.
const CONNECTION_THRESHOLD: f64 = 0.9;

/// Arguments of `₂F₁(a, b; c | x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyp2F1Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x: f64,
}

/// `Some(k)` if `v` is the integer `−k ≤ 0`.
fn nonpositive_integer(v: f64) -> Option<u64> {
    (v <= 0.0 && v == v.round() && v > -1e15).then(|| (-v) as u64)
}

/// Number of terms of a terminating series, if `a` or `b` is a
/// nonpositive integer.
fn termination(a: f64, b: f64) -> Option<u64> {
    match (nonpositive_integer(a), nonpositive_integer(b)) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

fn check_c(a: f64, b: f64, c: f64) -> Result<()> {
    if let Some(kc) = nonpositive_integer(c) {
        if termination(a, b).is_none_or(|kt| kt > kc) {
            return Err(Error::Hypergeometric(format!(
                "c = {c} is a nonpositive integer reached before the series terminates"
            )));
        }
    }
    Ok(())
}

/// `₂F₁(a, b; c | x)` for real parameters.
///
/// Terminating series (a or b a nonpositive integer) are summed term by
/// term for any x. Otherwise `0 ≤ x < 1` is required: the Gauss series is
/// used up to x = 0.9, and the `1 − x` connection formula beyond unless
/// `c − a − b` is an integer.
pub fn hyp2f1(p: &Hyp2F1Params) -> Result<f64> {
    let Hyp2F1Params { a, b, c, x } = *p;
    check_c(a, b, c)?;
    if let Some(k) = termination(a, b) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..k {
            let n = n as f64;
            term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * x;
            sum += term;
        }
        return Ok(sum);
    }
    if !(x.is_finite() && (-1.0..1.0).contains(&x)) {
        return Err(Error::Hypergeometric(format!("argument x = {x} outside [-1, 1)")));
    }
    let s = c - a - b;
    if x > CONNECTION_THRESHOLD && (s - s.round()).abs() > 1e-6 {
        return connection(a, b, c, x);
    }
    gauss_series(a, b, c, Complex64::new(x, 0.0)).map(|z| z.re)
}

/// Gauss series at complex argument, `|z| < 1`.
pub fn hyp2f1_complex(a: f64, b: f64, c: f64, z: Complex64) -> Result<Complex64> {
    check_c(a, b, c)?;
    if termination(a, b).is_none() && z.norm() >= 1.0 {
        return Err(Error::Hypergeometric(format!("|z| = {} is not below 1", z.norm())));
    }
    gauss_series(a, b, c, z)
}

fn gauss_series(a: f64, b: f64, c: f64, z: Complex64) -> Result<Complex64> {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        let n = n as f64;
        let ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0));
        if ratio == 0.0 {
            return Ok(sum);
        }
        term *= z * ratio;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            small += 1;
            if small >= 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Hypergeometric(format!(
        "series for ({a}, {b}; {c} | {z}) did not converge in {SERIES_MAX_TERMS} terms"
    )))
}

/// `1/Γ(x)`, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if nonpositive_integer(x).is_some() {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

fn connection(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    let y = 1.0 - x;
    let s = c - a - b;
    let g = libm::tgamma(c);
    let f1 = gauss_series(a, b, 1.0 - s, Complex64::new(y, 0.0))?.re;
    let f2 = gauss_series(c - a, c - b, 1.0 + s, Complex64::new(y, 0.0))?.re;
    let t1 = g * libm::tgamma(s) * rgamma(c - a) * rgamma(c - b) * f1;
    let t2 = y.powf(s) * g * libm::tgamma(-s) * rgamma(a) * rgamma(b) * f2;
    let v = t1 + t2;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Hypergeometric(format!("connection formula overflow at x = {x}")))
    }
}

/// Terminating `₂F₁(a, b; c | x)` as a polynomial in x, exact over the
/// rational backend. One of `a`, `b` must be a nonpositive integer.
pub fn hyp2f1_poly<S: Scalar>(a: &S, b: &S, c: &S) -> Result<Poly<S>> {
    let exact_nonpositive = |v: &S| {
        nonpositive_integer(v.to_f64())
            .filter(|&k| *v == S::from_i64(-(k as i64)))
    };
    let k = match (exact_nonpositive(a), exact_nonpositive(b)) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => {
            return Err(Error::Hypergeometric(
                "polynomial case needs a or b to be a nonpositive integer".into(),
            ))
        }
    };
    let mut coeffs = vec![S::one()];
    let mut term = S::one();
    for n in 0..k as i64 {
        let nn = S::from_i64(n);
        let den = (c.clone() + nn.clone()) * S::from_i64(n + 1);
        if den.is_zero() {
            return Err(Error::Hypergeometric(format!(
                "c + {n} vanishes before the series terminates"
            )));
        }
        term = term * (a.clone() + nn.clone()) * (b.clone() + nn) / den;
        coeffs.push(term.clone());
    }
    Ok(Poly::new(coeffs))
}

/// Exact M=0 solution
/// `ρ₀ = ((1−w)(1−w̄))^{(6+κ)/(2κ)} / (1−ww̄)^{(6+κ)²/(8κ)}`,
/// valid on the curve `q = (2+κ)(6+κ)/(8κ)`.
pub fn rho_m0(w: Complex64, wbar: Complex64, kappa: f64) -> Result<Complex64> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa = {kappa} must be positive")));
    }
    check_disk(w, wbar)?;
    let one = Complex64::new(1.0, 0.0);
    let num = ((one - w) * (one - wbar)).powf((6.0 + kappa) / (2.0 * kappa));
    let den = (one - w * wbar).powf((6.0 + kappa).powi(2) / (8.0 * kappa));
    Ok(num / den)
}

/// q on the M=0 curve.
pub fn m0_q(kappa: f64) -> f64 {
    (2.0 + kappa) * (6.0 + kappa) / (8.0 * kappa)
}

fn check_disk(w: Complex64, wbar: Complex64) -> Result<()> {
    if w.norm() < 1.0 && wbar.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("({w}, {wbar}) outside the unit bidisk")))
    }
}

/// Exact M=1 solution with its curve parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoM1 {
    pub value: Complex64,
    pub kappa: f64,
    pub q: f64,
}

/// `(κ, q)` of the M=1 curve point with parameter γ.
pub fn m1_parameters(gamma: f64) -> (f64, f64) {
    let d = 2.0 * gamma * gamma + gamma + 1.0;
    (2.0 * (3.0 * gamma + 1.0) / d, gamma * (gamma + 1.0) * (gamma + 3.0) / d)
}

/// Exact M=1 solution
///
/// ```text
/// ρ₁ = ((1−w)(1−w̄))^γ (1−ww̄)^{−e} ((1 − (w+w̄)/2) Φ₁ + (1−3γ)/(1+γ) (1−ww̄) (w+w̄)/2 Φ₂)
/// ```
///
/// with `e = (γ+1)(3γ²+6γ−1)/D`, `D = 2γ²+γ+1` and
/// `Φ₁ = ₂F₁((γ+1)(1−3γ)/D, (1−γ−4γ²)/D; (γ+1)²/D | ww̄)`,
/// `Φ₂ = ₂F₁((1−γ)(2+γ)/D, 2(1−γ²)/D; (3γ²+3γ+2)/D | ww̄)`.
/// Normalized so that `ρ₁(0, 0) = 1`.
pub fn rho_m1(w: Complex64, wbar: Complex64, gamma: f64) -> Result<RhoM1> {
    if !(gamma >= -1.0 / 3.0) {
        return Err(Error::Domain(format!("gamma = {gamma} below -1/3")));
    }
    check_disk(w, wbar)?;
    let d = 2.0 * gamma * gamma + gamma + 1.0;
    let x = w * wbar;
    let phi = |a: f64, b: f64, c: f64| -> Result<Complex64> {
        if x.im == 0.0 {
            hyp2f1(&Hyp2F1Params { a, b, c, x: x.re }).map(|v| Complex64::new(v, 0.0))
        } else {
            hyp2f1_complex(a, b, c, x)
        }
    };
    let phi1 = phi(
        (gamma + 1.0) * (1.0 - 3.0 * gamma) / d,
        (1.0 - gamma - 4.0 * gamma * gamma) / d,
        (gamma + 1.0).powi(2) / d,
    )?;
    let phi2 = phi(
        (1.0 - gamma) * (2.0 + gamma) / d,
        2.0 * (1.0 - gamma * gamma) / d,
        (3.0 * gamma * gamma + 3.0 * gamma + 2.0) / d,
    )?;
    let one = Complex64::new(1.0, 0.0);
    let e = (gamma + 1.0) * (3.0 * gamma * gamma + 6.0 * gamma - 1.0) / d;
    let half_sum = (w + wbar) / 2.0;
    let bracket = (one - half_sum) * phi1
        + (1.0 - 3.0 * gamma) / (1.0 + gamma) * (one - x) * half_sum * phi2;
    let pref = ((one - w) * (one - wbar)).powf(gamma) * (one - x).powf(-e);
    let (kappa, q) = m1_parameters(gamma);
    Ok(RhoM1 { value: pref * bracket, kappa, q })
}

/// Derivative of the κ=0 map `F = e^t w/(1+w)²`: `e^t (1−w)/(1+w)³`.
pub fn deterministic_map_derivative(w: Complex64, t: f64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let p = one + w;
    if p.norm() == 0.0 {
        return Err(Error::Domain("pole of the map at w = -1".into()));
    }
    Ok(t.exp() * (one - w) / (p * p * p))
}

/// The κ=0 map itself, `e^t w/(1+w)²`.
pub fn deterministic_map(w: Complex64, t: f64) -> Result<Complex64> {
    let p = Complex64::new(1.0, 0.0) + w;
    if p.norm() == 0.0 {
        return Err(Error::Domain("pole of the map at w = -1".into()));
    }
    Ok(t.exp() * w / (p * p))
}

/// Default finite-difference step of [`pde_residual`].
pub const PDE_STEP: f64 = 1e-3;

const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
const D2: [(f64, f64); 5] = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];

/// `|L[ρ] + qρ| / max(1, |ρ|)` for the interior moment equation `L[ρ] = −qρ`,
///
/// ```text
/// L = −κ/2 (w∂_w − w̄∂_w̄)² + (w+1)/(w−1) w∂_w + (w̄+1)/(w̄−1) w̄∂_w̄
///     − q/(w−1)² − q/(w̄−1)² + q,
/// ```
///
/// with w and w̄ treated as independent variables and all derivatives
/// taken by 4th-order central differences of step h.
pub fn pde_residual<F>(rho: F, q: f64, kappa: f64, w: Complex64, wbar: Complex64, h: f64) -> Result<f64>
where
    F: Fn(Complex64, Complex64) -> Result<Complex64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h = {h} must be positive")));
    }
    if w.norm() + 2.0 * h >= 1.0 || wbar.norm() + 2.0 * h >= 1.0 {
        return Err(Error::Domain(format!("stencil of radius {} leaves the unit bidisk at ({w}, {wbar})", 2.0 * h)));
    }
    let f = |dw: f64, db: f64| rho(w + dw * h, wbar + db * h);
    let r0 = f(0.0, 0.0)?;
    let mut rw = Complex64::new(0.0, 0.0);
    let mut rb = Complex64::new(0.0, 0.0);
    for (s, c) in D1 {
        rw += f(s, 0.0)? * c;
        rb += f(0.0, s)? * c;
    }
    rw /= 12.0 * h;
    rb /= 12.0 * h;
    let mut rww = Complex64::new(0.0, 0.0);
    let mut rbb = Complex64::new(0.0, 0.0);
    for (s, c) in D2 {
        rww += f(s, 0.0)? * c;
        rbb += f(0.0, s)? * c;
    }
    rww /= 12.0 * h * h;
    rbb /= 12.0 * h * h;
    let mut rwb = Complex64::new(0.0, 0.0);
    for (s, c) in D1 {
        for (t, d) in D1 {
            rwb += f(s, t)? * (c * d);
        }
    }
    rwb /= 144.0 * h * h;

    let one = Complex64::new(1.0, 0.0);
    let d2 = w * rw + w * w * rww - 2.0 * w * wbar * rwb + wbar * rb + wbar * wbar * rbb;
    let l = -kappa / 2.0 * d2 + (w + one) / (w - one) * w * rw + (wbar + one) / (wbar - one) * wbar * rb
        - q * r0 / ((w - one) * (w - one))
        - q * r0 / ((wbar - one) * (wbar - one))
        + q * r0;
    Ok((l + q * r0).norm() / r0.norm().max(1.0))
}
