//! The tridiagonal eigenproblem for the boundary exponent β̃ on the
//! (2M+1)-band truncation curves.
//!
//! Near ξ → 1 the Fourier components behave as `f_n ~ (1−ξ)^{−β̃} ψ_n`, and
//! ψ solves `R[ψ] = β̃ψ` with
//! `R[ψ]_n = (A_{n+1}ψ_{n+1} + A_{1−n}ψ_{n−1} + B_nψ_n)/2`.

use std::fmt::Write as _;
use std::f64::consts::PI;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::poly::{real_roots, Poly};
use crate::scalar::Scalar;
use crate::special::hyp2f1_poly;
use crate::spectrum::{beta_tilde_on_curve, curve_point, eigen_beta_closed, shift_beta_tilde, CurveParams};

/// `A_n = κ/2(n−γ)² + n − 3γ − κγ(1−γ)/2`.
pub fn coef_a<S: Scalar>(n: i64, gamma: &S, kappa: &S) -> S {
    let half = S::ratio(1, 2);
    let g = gamma.clone();
    let d = S::from_i64(n) - g.clone();
    half.clone() * kappa.clone() * d.clone() * d + S::from_i64(n) - S::from_i64(3) * g.clone()
        - half * kappa.clone() * g.clone() * (S::one() - g)
}

/// `B_n = −κ(n² + γ² − γ) + 6γ`.
pub fn coef_b<S: Scalar>(n: i64, gamma: &S, kappa: &S) -> S {
    let g = gamma.clone();
    -kappa.clone() * (S::from_i64(n * n) + g.clone() * g.clone() - g.clone()) + S::from_i64(6) * g
}

/// `C_n = κ(n² − 2γ + 2γ²)/2 − n − 6γ`.
pub fn coef_c<S: Scalar>(n: i64, gamma: &S, kappa: &S) -> S {
    let g = gamma.clone();
    S::ratio(1, 2) * kappa.clone() * (S::from_i64(n * n) - S::from_i64(2) * g.clone() + S::from_i64(2) * g.clone() * g.clone())
        - S::from_i64(n)
        - S::from_i64(6) * g
}

/// Coefficients `A_n, B_n, C_n` for `n ∈ [−M−1, M+1]` at a curve point.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagSystem<S = f64> {
    curve: CurveParams<S>,
    q: S,
    kappa: S,
    a: Vec<S>,
    b: Vec<S>,
    c: Vec<S>,
}

impl<S: Scalar> TridiagSystem<S> {
    pub fn curve(&self) -> &CurveParams<S> {
        &self.curve
    }

    pub fn m(&self) -> u32 {
        self.curve.m()
    }

    pub fn kappa(&self) -> &S {
        &self.kappa
    }

    pub fn q(&self) -> &S {
        &self.q
    }

    fn index(&self, n: i64) -> usize {
        let m = self.m() as i64;
        assert!(n.abs() <= m + 1, "index {n} outside [-{}, {}]", m + 1, m + 1);
        (n + m + 1) as usize
    }

    pub fn a(&self, n: i64) -> &S {
        &self.a[self.index(n)]
    }

    pub fn b(&self, n: i64) -> &S {
        &self.b[self.index(n)]
    }

    pub fn c(&self, n: i64) -> &S {
        &self.c[self.index(n)]
    }
}

/// Builds the system and checks the band-closure identity `A_{−M} = 0`
/// (exactly for rationals, to `1e-12` relative for floats).
pub fn build_system<S: Scalar>(curve: &CurveParams<S>) -> Result<TridiagSystem<S>> {
    let point = curve_point(curve)?;
    let (q, kappa) = (point.q().clone(), point.kappa().clone());
    let m = curve.m() as i64;
    let g = curve.gamma();
    let range = -m - 1..=m + 1;
    let a: Vec<S> = range.clone().map(|n| coef_a(n, g, &kappa)).collect();
    let b: Vec<S> = range.clone().map(|n| coef_b(n, g, &kappa)).collect();
    let c: Vec<S> = range.map(|n| coef_c(n, g, &kappa)).collect();
    let sys = TridiagSystem { curve: curve.clone(), q, kappa, a, b, c };
    let closure = sys.a(-m).clone();
    let scale = sys.a.iter().map(|v| v.to_f64().abs()).fold(1.0, f64::max);
    let closed = match S::BACKEND {
        crate::Backend::Rational => closure.is_zero(),
        crate::Backend::Float => closure.to_f64().abs() <= 1e-12 * scale,
    };
    if !closed {
        return Err(Error::InvalidCurve {
            m: curve.m(),
            gamma: curve.gamma().render(),
            reason: format!("band closure A_(-M) = {} is not zero", closure.render()),
        });
    }
    Ok(sys)
}

/// A tridiagonal matrix: `sub[k] = T[k+1][k]`, `sup[k] = T[k][k+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix<S = f64> {
    pub sub: Vec<S>,
    pub diag: Vec<S>,
    pub sup: Vec<S>,
}

impl<S: Scalar> TridiagMatrix<S> {
    pub fn new(sub: Vec<S>, diag: Vec<S>, sup: Vec<S>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::InvalidParameter(format!(
                "tridiagonal shape mismatch: {} / {} / {}",
                sub.len(),
                n,
                sup.len()
            )));
        }
        Ok(TridiagMatrix { sub, diag, sup })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for k in 0..n {
            out[k][k] = self.diag[k].to_f64();
            if k + 1 < n {
                out[k + 1][k] = self.sub[k].to_f64();
                out[k][k + 1] = self.sup[k].to_f64();
            }
        }
        out
    }

    pub fn to_f64(&self) -> TridiagMatrix<f64> {
        let f = |v: &[S]| v.iter().map(Scalar::to_f64).collect();
        TridiagMatrix { sub: f(&self.sub), diag: f(&self.diag), sup: f(&self.sup) }
    }

    fn to_rational(&self) -> Result<TridiagMatrix<BigRational>> {
        let f = |v: &[S]| -> Result<Vec<BigRational>> {
            v.iter()
                .map(|x| x.to_rational().ok_or_else(|| Error::Eigen(format!("non-finite entry {x:?}"))))
                .collect()
        };
        Ok(TridiagMatrix { sub: f(&self.sub)?, diag: f(&self.diag)?, sup: f(&self.sup)? })
    }

    /// Characteristic polynomial `det(λI − T)` by the continuant recurrence.
    pub fn char_poly(&self) -> Poly<S> {
        let n = self.dim();
        let lambda = Poly::new(vec![S::zero(), S::one()]);
        let mut prev = Poly::constant(S::one());
        let mut cur = lambda.sub(&Poly::constant(self.diag[0].clone()));
        for k in 1..n {
            let next = lambda
                .sub(&Poly::constant(self.diag[k].clone()))
                .mul(&cur)
                .sub(&prev.scale(&(self.sub[k - 1].clone() * self.sup[k - 1].clone())));
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Text dump for diagnostics.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for row in self.dense() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>24.17e}")).collect();
            let _ = writeln!(s, "[{}]", cells.join(", "));
        }
        s
    }
}

/// Restriction of R to symmetric vectors `ψ_n = ψ_{−n}`, unknowns
/// `ψ_0..ψ_M`.
pub fn reduced_matrix<S: Scalar>(sys: &TridiagSystem<S>) -> TridiagMatrix<S> {
    let m = sys.m() as i64;
    let half = S::ratio(1, 2);
    let diag = (0..=m).map(|n| half.clone() * sys.b(n).clone()).collect();
    let sup = (0..m)
        .map(|n| if n == 0 { sys.a(1).clone() } else { half.clone() * sys.a(n + 1).clone() })
        .collect();
    let sub = (1..=m).map(|n| half.clone() * sys.a(1 - n).clone()).collect();
    TridiagMatrix { sub, diag, sup }
}

/// The full `(2M+1) × (2M+1)` matrix R on `ψ_{−M}..ψ_M`.
pub fn full_matrix<S: Scalar>(sys: &TridiagSystem<S>) -> TridiagMatrix<S> {
    let m = sys.m() as i64;
    let half = S::ratio(1, 2);
    let diag = (-m..=m).map(|n| half.clone() * sys.b(n).clone()).collect();
    // Row n couples to ψ_{n+1} through A_{n+1} and to ψ_{n−1} through A_{1−n}.
    let sup = (-m..m).map(|n| half.clone() * sys.a(n + 1).clone()).collect();
    let sub = (-m + 1..=m).map(|n| half.clone() * sys.a(1 - n).clone()).collect();
    TridiagMatrix { sub, diag, sup }
}

/// Eigenvalues (ascending, repeated by multiplicity) and unit-max-norm
/// eigenvectors of a tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖Tψ − λψ‖∞ / ‖ψ‖∞` per pair.
    pub residuals: Vec<f64>,
}

/// Residual bound every returned eigenpair satisfies.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Solves a tridiagonal eigenproblem whose eigenvalues are all real.
///
/// The entries are converted exactly to rationals; the roots of the exact
/// characteristic polynomial are isolated by Sturm sequences, counted with
/// multiplicity, and refined to double precision. Eigenvectors come from
/// inverse iteration in double precision.
pub fn eigen_solve<S: Scalar>(matrix: &TridiagMatrix<S>) -> Result<EigenResult> {
    let exact = matrix.to_rational()?;
    let dense = matrix.dense();
    let n = matrix.dim();
    let roots = real_roots(&exact.char_poly());
    let count: usize = roots.iter().map(|r| r.multiplicity).sum();
    if count != n {
        return Err(Error::Eigen(format!(
            "{} of {n} eigenvalues are not real\n{}",
            n - count,
            matrix.dump()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for r in &roots {
        values.extend(std::iter::repeat_n(r.value, r.multiplicity));
    }
    let mut vectors = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for &lambda in &values {
        let (v, res) = inverse_iteration(&dense, lambda);
        if res > EIGEN_RESIDUAL_TOL {
            return Err(Error::NoConvergence {
                matrix: format!("eigenvalue {lambda}: residual {res:.3e}\n{}", matrix.dump()),
            });
        }
        vectors.push(v);
        residuals.push(res);
    }
    Ok(EigenResult { values, vectors, residuals })
}

fn residual(a: &[Vec<f64>], lambda: f64, v: &[f64]) -> f64 {
    let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let r = a
        .iter()
        .zip(v)
        .map(|(row, vi)| (row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() - lambda * vi).abs())
        .fold(0.0, f64::max);
    r / norm
}

fn inverse_iteration(a: &[Vec<f64>], lambda: f64) -> (Vec<f64>, f64) {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut v: Vec<f64> = (0..n).map(|k| 1.0 + 0.1 * k as f64 / n as f64).collect();
    let mut best = (v.clone(), f64::INFINITY);
    for _ in 0..6 {
        let mut shifted: Vec<Vec<f64>> = a.to_vec();
        for (k, row) in shifted.iter_mut().enumerate() {
            row[k] -= lambda;
        }
        v = solve_pivoted(shifted, v, scale * f64::EPSILON);
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        for x in &mut v {
            *x /= if big < 0.0 { -norm } else { norm };
        }
        let r = residual(a, lambda, &v);
        if r < best.1 {
            best = (v.clone(), r);
        }
        if r < 1e-15 * scale {
            break;
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; zero pivots are replaced by
/// `tiny`.
fn solve_pivoted(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tiny: f64) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, p);
        b.swap(col, p);
        if a[col][col].abs() < tiny {
            a[col][col] = if a[col][col] < 0.0 { -tiny } else { tiny };
        }
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `(3M + 1 + 4γ)γ / (M + 3γ)`, the shared part of b and c in the
/// eigenfunction hypergeometric parameters.
fn eigen_shift<S: Scalar>(curve: &CurveParams<S>) -> Result<S> {
    let m = curve.m_scalar();
    let g = curve.gamma().clone();
    let den = m.clone() + S::from_i64(3) * g.clone();
    if den.is_zero() {
        return Err(Error::Hypergeometric("M + 3*gamma vanishes".into()));
    }
    Ok(g.clone() * (S::from_i64(3) * m + S::one() + S::from_i64(4) * g) / den)
}

/// Eigenfunction `x^{l/2} ₂F₁(l/2−M, l/2+s; 1/2+l−M+s | x)` in the variable
/// `x = (1 − cos φ)/2`, with `s = γ(3M+1+4γ)/(M+3γ)`; a polynomial of
/// degree M.
pub fn eigenfunction_poly<S: Scalar>(curve: &CurveParams<S>, l: u32) -> Result<Poly<S>> {
    if l % 2 != 0 || l > 2 * curve.m() {
        return Err(Error::InvalidParameter(format!(
            "l={l} must be even and at most {}",
            2 * curve.m()
        )));
    }
    let s = eigen_shift(curve)?;
    let half_l = S::from_i64(l as i64 / 2);
    let m = curve.m_scalar();
    let a = half_l.clone() - m.clone();
    let b = half_l.clone() + s.clone();
    let c = S::ratio(1, 2) + S::from_i64(l as i64) - m + s;
    Ok(hyp2f1_poly(&a, &b, &c)?.shift(l as usize / 2))
}

/// `n` equally spaced angles covering `[0, π]`.
pub fn phi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / (n.max(2) - 1) as f64).collect()
}

fn lpsi_operator(
    (psi, dpsi, ddpsi): (f64, f64, f64),
    phi: f64,
    beta_tilde: f64,
    gamma: f64,
    kappa: f64,
) -> f64 {
    let (s, c) = phi.sin_cos();
    kappa / 2.0 * (1.0 - c) * ddpsi - (1.0 - kappa * gamma) * s * dpsi
        + ((kappa * (2.0 * gamma - 1.0) / 2.0 - 3.0) * gamma * c
            - (kappa * (gamma - 1.0) / 2.0 - 3.0) * gamma
            - beta_tilde)
            * psi
}

/// Maximum over the grid of
/// `|κ/2(1−cosφ)Ψ″ − (1−κγ)sinφ Ψ′ + ((κ(2γ−1)/2−3)γcosφ − (κ(γ−1)/2−3)γ − β̃)Ψ|`
/// for Ψ given as a polynomial in `x = (1 − cos φ)/2`.
pub fn lpsi_residual(psi: &Poly<f64>, beta_tilde: f64, gamma: f64, kappa: f64, phis: &[f64]) -> f64 {
    let d1 = psi.derivative();
    let d2 = d1.derivative();
    phis.iter()
        .map(|&phi| {
            let (s, c) = phi.sin_cos();
            let x = (1.0 - c) / 2.0;
            let p1 = d1.eval(&x);
            let vals = (psi.eval(&x), p1 * s / 2.0, d2.eval(&x) * s * s / 4.0 + p1 * c / 2.0);
            lpsi_operator(vals, phi, beta_tilde, gamma, kappa).abs()
        })
        .fold(0.0, f64::max)
}

/// As [`lpsi_residual`] for a symmetric eigenvector `ψ_0..ψ_M`, i.e.
/// `Ψ = ψ_0 + 2Σ ψ_n cos nφ`.
pub fn lpsi_residual_cosine(psi: &[f64], beta_tilde: f64, gamma: f64, kappa: f64, phis: &[f64]) -> f64 {
    phis.iter()
        .map(|&phi| {
            let (mut v, mut d1, mut d2) = (psi[0], 0.0, 0.0);
            for (n, &p) in psi.iter().enumerate().skip(1) {
                let nf = n as f64;
                let (s, c) = (nf * phi).sin_cos();
                v += 2.0 * p * c;
                d1 -= 2.0 * nf * p * s;
                d2 -= 2.0 * nf * nf * p * c;
            }
            lpsi_operator((v, d1, d2), phi, beta_tilde, gamma, kappa).abs()
        })
        .fold(0.0, f64::max)
}

/// `β̃(λ) = 3q − κ(M+γ)/2 + (κ(1−λ−2M−4γ)/4 + 1)(2M − λ)`; equals β_l at
/// integer `λ = l`.
pub fn beta_from_lambda<S: Scalar>(curve: &CurveParams<S>, lambda: &S) -> Result<S> {
    let point = curve_point(curve)?;
    let (q, k) = (point.q().clone(), point.kappa().clone());
    let m = curve.m_scalar();
    let g = curve.gamma().clone();
    let two_m = S::from_i64(2) * m.clone();
    let inner = k.clone() * (S::one() - lambda.clone() - two_m.clone() - S::from_i64(4) * g.clone())
        / S::from_i64(4)
        + S::one();
    Ok(S::from_i64(3) * q - k * (m + g) / S::from_i64(2) + inner * (two_m - lambda.clone()))
}

/// Number of grid points of the nonnegativity test.
pub const POSITIVITY_GRID: usize = 1024;
/// Relative tolerance below zero still counted as nonnegative.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Whether `Ψ = ψ_0 + 2Σψ_n cos nφ` has one sign on `[0, π]`.
pub fn is_one_signed(psi: &[f64]) -> bool {
    let vals: Vec<f64> = phi_grid(POSITIVITY_GRID)
        .iter()
        .map(|&phi| {
            psi[0] + psi.iter().enumerate().skip(1).map(|(n, p)| 2.0 * p * (n as f64 * phi).cos()).sum::<f64>()
        })
        .collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    vals.iter().all(|v| v / scale >= -POSITIVITY_TOL) || vals.iter().all(|v| v / scale <= POSITIVITY_TOL)
}

/// Picks β̃ from symmetric-subspace eigenpairs: the largest eigenvalue whose
/// eigenfunction does not change sign. Checks that it is the overall
/// maximum and agrees with the closed-form selection rule.
pub fn select_beta_tilde(result: &EigenResult, curve: &CurveParams<f64>) -> Result<f64> {
    let selected = result
        .values
        .iter()
        .zip(&result.vectors)
        .filter(|(_, v)| is_one_signed(v))
        .map(|(&l, _)| l)
        .fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.max(l))))
        .ok_or_else(|| Error::Eigen("no one-signed eigenfunction".into()))?;
    let max = result.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = |x: f64| 1e-10 * x.abs().max(1.0);
    if (selected - max).abs() > tol(max) {
        return Err(Error::Eigen(format!("selected {selected} is not the largest eigenvalue {max}")));
    }
    let rule = beta_tilde_on_curve(curve)?;
    if (selected - rule).abs() > tol(rule) {
        return Err(Error::Eigen(format!("selected {selected} disagrees with the closed-form rule {rule}")));
    }
    Ok(selected)
}

/// Everything the eigen analysis produces for one curve point.
#[derive(Debug, Clone)]
pub struct CurveEigenReport {
    pub m: u32,
    pub gamma: f64,
    pub q: f64,
    pub kappa: f64,
    /// Symmetric subspace, M+1 values.
    pub reduced: EigenResult,
    /// Full matrix, 2M+1 values.
    pub full: EigenResult,
    /// β_l for `l = 0..=2M`.
    pub closed: Vec<f64>,
    /// Largest relative deviation between `reduced` and the even-l β_l.
    pub even_deviation: f64,
    /// Largest relative deviation between `full` and all β_l.
    pub full_deviation: f64,
    /// Largest `L[Ψ]` residual over the reduced eigenpairs.
    pub lpsi_max: f64,
    pub beta_tilde: f64,
    pub beta: f64,
}

fn max_rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

/// Solves both eigenproblems at a curve point in exact-input arithmetic
/// (γ is taken as the exact rational value of its double) and cross-checks
/// them against the closed forms.
pub fn analyze_curve(curve: &CurveParams<f64>) -> Result<CurveEigenReport> {
    let gamma_q = BigRational::from_float(*curve.gamma())
        .ok_or_else(|| Error::InvalidParameter("gamma is not finite".into()))?;
    let exact = CurveParams::new(curve.m(), gamma_q)?;
    analyze_exact(&exact)
}

/// As [`analyze_curve`] for an exact curve point.
pub fn analyze_exact(curve: &CurveParams<BigRational>) -> Result<CurveEigenReport> {
    let sys = build_system(curve)?;
    let reduced = eigen_solve(&reduced_matrix(&sys))?;
    let full = eigen_solve(&full_matrix(&sys))?;
    let m = curve.m();
    let closed: Vec<f64> = (0..=2 * m)
        .map(|l| eigen_beta_closed(curve, l).map(|v| Scalar::to_f64(&v)))
        .collect::<Result<_>>()?;
    let even: Vec<f64> = closed.iter().step_by(2).copied().collect();
    let fcurve = curve.to_f64();
    let (gamma, kappa) = (*fcurve.gamma(), Scalar::to_f64(sys.kappa()));
    let grid = phi_grid(257);
    let lpsi_max = reduced
        .values
        .iter()
        .zip(&reduced.vectors)
        .map(|(&l, v)| lpsi_residual_cosine(v, l, gamma, kappa, &grid))
        .fold(0.0, f64::max);
    let beta_tilde = select_beta_tilde(&reduced, &fcurve)?;
    Ok(CurveEigenReport {
        m,
        gamma,
        q: Scalar::to_f64(sys.q()),
        kappa,
        even_deviation: max_rel_dev(&reduced.values, &even),
        full_deviation: max_rel_dev(&full.values, &closed),
        reduced,
        full,
        closed,
        lpsi_max,
        beta_tilde,
        beta: shift_beta_tilde(beta_tilde, gamma),
    })
}
