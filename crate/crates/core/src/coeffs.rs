//! Taylor coefficients θ_{i,j} of the regularized moment function
//!
//! ```text
//! ρ(w, w̄) = ((1−w)(1−w̄))^γ Θ(w, w̄),   Θ = Σ θ_{i,j} w^{i−1} w̄^{j−1},  θ_{1,1} = 1
//! ```
//!
//! built from the four-term recurrence `Σ_{l,k∈{0,1}} C^{l,k}_{i,j} θ_{i−l,j−k} = 0`,
//! plus series evaluation, Fourier components, integral means and slope
//! fits.

use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;

use crate::eigen::{coef_a, coef_b, coef_c};
use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::scalar::{parse_number, Backend, Number, Scalar};

/// Relative tail bound for series evaluation: the last two coefficient
/// shells must contribute less than this fraction of the partial sum.
pub const TAIL_TOL: f64 = 1e-6;

/// Recurrence coefficient `C^{l,k}_{i,j}` multiplying `θ_{i−l, j−k}`.
pub fn recurrence_coeff<S: Scalar>(i: i64, j: i64, l: bool, k: bool, gamma: &S, kappa: &S) -> S {
    let half = S::ratio(1, 2);
    let g = gamma.clone();
    let kap = kappa.clone();
    let sq = |d: i64| S::from_i64(d * d);
    match (l, k) {
        (false, false) => -half * kap * sq(i - j) - S::from_i64(i + j - 2),
        (true, true) => {
            -half * kap.clone() * sq(i - j) + S::from_i64(i + j - 4) - kap.clone() * g.clone() * g.clone()
                + kap * g.clone()
                + S::from_i64(6) * g
        }
        (false, true) => off_diagonal_coeff(i - j + 1, &g, &kap),
        (true, false) => off_diagonal_coeff(j - i + 1, &g, &kap),
    }
}

/// `κ/2·d² + (1−κγ)d + κγ² − κγ/2 − 3γ`, shared by `C^{0,1}` (d = i−j+1)
/// and `C^{1,0}` (d = j−i+1).
fn off_diagonal_coeff<S: Scalar>(d: i64, g: &S, kap: &S) -> S {
    let half = S::ratio(1, 2);
    let d = S::from_i64(d);
    half.clone() * kap.clone() * d.clone() * d.clone() + (S::one() - kap.clone() * g.clone()) * d
        + kap.clone() * g.clone() * g.clone()
        - half * kap.clone() * g.clone()
        - S::from_i64(3) * g.clone()
}

/// The `N × N` block of coefficients θ_{i,j}, `1 ≤ i, j ≤ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable<S> {
    n: usize,
    gamma: S,
    kappa: S,
    entries: Vec<S>,
}

impl<S: Scalar> CoeffTable<S> {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> &S {
        &self.gamma
    }

    pub fn kappa(&self) -> &S {
        &self.kappa
    }

    pub fn backend(&self) -> Backend {
        S::BACKEND
    }

    /// θ_{i,j} with 1-based indices; zero outside the table.
    pub fn get(&self, i: i64, j: i64) -> S {
        if i < 1 || j < 1 || i as usize > self.n || j as usize > self.n {
            return S::zero();
        }
        self.entries[(i as usize - 1) * self.n + (j as usize - 1)].clone()
    }

    fn at(&self, i: usize, j: usize) -> &S {
        &self.entries[(i - 1) * self.n + (j - 1)]
    }

    /// Entries as doubles, row-major.
    pub fn to_f64_entries(&self) -> Vec<f64> {
        self.entries.iter().map(Scalar::to_f64).collect()
    }

    pub fn to_f64(&self) -> CoeffTable<f64> {
        CoeffTable {
            n: self.n,
            gamma: self.gamma.to_f64(),
            kappa: self.kappa.to_f64(),
            entries: self.to_f64_entries(),
        }
    }

    /// Largest relative violation of the four-term relation over all
    /// `(i, j) ≠ (1, 1)`; exactly zero for a rational table.
    pub fn recurrence_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..=self.n as i64 {
            for j in 1..=self.n as i64 {
                if i == 1 && j == 1 {
                    continue;
                }
                let mut sum = S::zero();
                let mut scale = 0.0f64;
                for (l, k) in [(false, false), (false, true), (true, false), (true, true)] {
                    let c = recurrence_coeff(i, j, l, k, &self.gamma, &self.kappa);
                    let t = c * self.get(i - l as i64, j - k as i64);
                    scale = scale.max(t.to_f64().abs());
                    sum = sum + t;
                }
                let r = sum.to_f64().abs();
                if r != 0.0 {
                    worst = worst.max(r / scale.max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }
}

/// Solves the recurrence row by row:
/// `θ_{i,j} = −(C^{0,1}θ_{i,j−1} + C^{1,0}θ_{i−1,j} + C^{1,1}θ_{i−1,j−1}) / C^{0,0}`.
pub fn build_theta_table<S: Scalar>(gamma: S, kappa: S, n: usize) -> Result<CoeffTable<S>> {
    if n == 0 {
        return Err(Error::InvalidParameter("table order N must be at least 1".into()));
    }
    let mut entries = vec![S::zero(); n * n];
    entries[0] = S::one();
    let idx = |i: usize, j: usize| (i - 1) * n + (j - 1);
    for i in 1..=n {
        for j in 1..=n {
            if i == 1 && j == 1 {
                continue;
            }
            let (ii, jj) = (i as i64, j as i64);
            let c00 = recurrence_coeff(ii, jj, false, false, &gamma, &kappa);
            if c00.is_zero() {
                return Err(Error::ZeroPivot { i, j });
            }
            let mut acc = S::zero();
            if j > 1 {
                let t = &entries[idx(i, j - 1)];
                if !t.is_zero() {
                    acc = acc + recurrence_coeff(ii, jj, false, true, &gamma, &kappa) * t.clone();
                }
            }
            if i > 1 {
                let t = &entries[idx(i - 1, j)];
                if !t.is_zero() {
                    acc = acc + recurrence_coeff(ii, jj, true, false, &gamma, &kappa) * t.clone();
                }
            }
            if i > 1 && j > 1 {
                let t = &entries[idx(i - 1, j - 1)];
                if !t.is_zero() {
                    acc = acc + recurrence_coeff(ii, jj, true, true, &gamma, &kappa) * t.clone();
                }
            }
            let v = -acc / c00;
            if !v.is_finite_value() {
                return Err(Error::Overflow { i, j });
            }
            entries[idx(i, j)] = v;
        }
    }
    Ok(CoeffTable { n, gamma, kappa, entries })
}

/// Smallest band half-width `M` with `|θ_{i,j}| ≤ tol` whenever `|i−j| > M`;
/// `None` if only the trivial bound `N−1` holds.
pub fn truncation_width<S: Scalar>(table: &CoeffTable<S>, tol: &S) -> Option<usize> {
    let n = table.n;
    let mut max_offset = 0usize;
    for i in 1..=n {
        for j in 1..=n {
            if table.at(i, j).abs() > *tol {
                max_offset = max_offset.max(i.abs_diff(j));
            }
        }
    }
    (max_offset < n.saturating_sub(1) || n == 1).then_some(max_offset)
}

/// Largest `|i−j|` with a nonzero entry.
pub fn max_nonzero_offset<S: Scalar>(table: &CoeffTable<S>) -> usize {
    let n = table.n;
    (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .filter(|&(i, j)| !table.at(i, j).is_zero())
        .map(|(i, j)| i.abs_diff(j))
        .max()
        .unwrap_or(0)
}

/// A truncated double series value with its tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Sum of `|term|` over the last two shells `max(i, j) ∈ {N−1, N}`,
    /// relative to `|value|`.
    pub tail: f64,
    /// `tail > TAIL_TOL`.
    pub diverging: bool,
}

/// Partial sum `Σ θ_{i,j} w^{i−1} w̄^{j−1}`.
pub fn eval_theta<S: Scalar>(table: &CoeffTable<S>, w: Complex64, wbar: Complex64) -> SeriesValue {
    let n = table.n;
    let theta = table.to_f64_entries();
    let wbar_pows: Vec<Complex64> = powers(wbar, n);
    let (aw, awb) = (w.norm(), wbar.norm());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    let mut wp = Complex64::new(1.0, 0.0);
    let mut awp = 1.0;
    for i in 1..=n {
        let row = &theta[(i - 1) * n..i * n];
        let mut inner = Complex64::new(0.0, 0.0);
        let mut awbp = 1.0;
        for (j, (&t, &p)) in row.iter().zip(&wbar_pows).enumerate() {
            inner += p * t;
            if i + 1 >= n || j + 2 >= n {
                tail += t.abs() * awp * awbp;
            }
            awbp *= awb;
        }
        sum += wp * inner;
        wp *= w;
        awp *= aw;
    }
    let rel = if n <= 2 { 0.0 } else { tail / sum.norm().max(f64::MIN_POSITIVE) };
    SeriesValue { value: sum, tail: rel, diverging: rel > TAIL_TOL }
}

fn powers(z: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    let mut p = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        out.push(p);
        p *= z;
    }
    out
}

/// `((1−w)(1−w̄))^γ` on the principal branch.
pub fn rho_prefactor(w: Complex64, wbar: Complex64, gamma: f64) -> Complex64 {
    let base = (Complex64::new(1.0, 0.0) - w) * (Complex64::new(1.0, 0.0) - wbar);
    if gamma == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    base.powf(gamma)
}

/// `ρ = ((1−w)(1−w̄))^γ Θ`.
pub fn eval_rho<S: Scalar>(table: &CoeffTable<S>, w: Complex64, wbar: Complex64) -> SeriesValue {
    let s = eval_theta(table, w, wbar);
    SeriesValue { value: s.value * rho_prefactor(w, wbar, table.gamma.to_f64()), ..s }
}

/// Power-series coefficients of `f_n(ξ) = Σ_j θ_{j+n, j} ξ^{j−1}`.
///
/// For `n ≥ 0` the result has `N − n` coefficients; for `n < 0` it has `N`
/// coefficients, the first `|n|` of which vanish (`f_{−n} = ξⁿ f_n`).
pub fn fourier_series<S: Scalar>(table: &CoeffTable<S>, n: i64) -> Result<Vec<S>> {
    let size = table.n as i64;
    if n.abs() > size - 1 {
        return Err(Error::InvalidParameter(format!(
            "Fourier index {n} outside ±{}",
            size - 1
        )));
    }
    let len = if n >= 0 { size - n } else { size };
    Ok((1..=len).map(|j| table.get(j + n, j)).collect())
}

/// Coefficient of `ξ^k` in `f_m`, zero where the table gives no data.
fn fourier_coeff<S: Scalar>(table: &CoeffTable<S>, m: i64, k: i64) -> S {
    if k < 0 {
        return S::zero();
    }
    table.get(k + 1 + m, k + 1)
}

/// Highest power of ξ known for `f_m` from an order-N table.
fn fourier_known_degree(n: usize, m: i64) -> i64 {
    n as i64 - 1 - m.max(0)
}

/// Maximum absolute coefficient, up to `ξ^order`, of
/// `ξA_{n+1}f_{n+1} + A_{1−n}f_{n−1} + (B_n + (1−ξ)C_n)f_n + 2ξ(ξ−1)f_n'`.
pub fn rec3_residual<S: Scalar>(table: &CoeffTable<S>, n: i64, order: usize) -> Result<S> {
    let size = table.n;
    let max_order = (fourier_known_degree(size, n + 1) + 1)
        .min(fourier_known_degree(size, n))
        .min(fourier_known_degree(size, n - 1));
    if max_order < 0 || order as i64 > max_order {
        return Err(Error::InvalidParameter(format!(
            "order {order} exceeds the {max_order} available for n={n} at N={size}"
        )));
    }
    let (g, k) = (&table.gamma, &table.kappa);
    let a_up = coef_a(n + 1, g, k);
    let a_down = coef_a(1 - n, g, k);
    let b = coef_b(n, g, k);
    let c = coef_c(n, g, k);
    let mut worst = S::zero();
    for p in 0..=order as i64 {
        let f = |m: i64, kk: i64| fourier_coeff(table, m, kk);
        let r = a_up.clone() * f(n + 1, p - 1)
            + a_down.clone() * f(n - 1, p)
            + (b.clone() + c.clone()) * f(n, p)
            - c.clone() * f(n, p - 1)
            + S::from_i64(2 * (p - 1)) * f(n, p - 1)
            - S::from_i64(2 * p) * f(n, p);
        let r = r.abs();
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}

/// Estimates the boundary exponent β̃ from the diagonal growth
/// `θ_{j,j} ~ C j^{β̃−1}`.
///
/// Local log-slopes `ln(θ_{j+1,j+1}/θ_{j,j}) / ln((j+1)/j)` converge like
/// `e + O(1/j)`; the slopes at `j = N/2` and `j = N−1` are combined by
/// Richardson extrapolation. The fit window is the top half of the
/// diagonal, and every entry there must be positive.
pub fn diagonal_growth_exponent<S: Scalar>(table: &CoeffTable<S>) -> Result<f64> {
    Ok(diagonal_growth(table)?.beta_tilde)
}

/// Details of [`diagonal_growth_exponent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalGrowth {
    /// Richardson-refined estimate.
    pub beta_tilde: f64,
    /// Plain least-squares log-log slope over the window, plus one.
    pub lsq_beta_tilde: f64,
    pub window: (usize, usize),
}

pub fn diagonal_growth<S: Scalar>(table: &CoeffTable<S>) -> Result<DiagonalGrowth> {
    let n = table.n;
    if n < 8 {
        return Err(Error::InvalidParameter(format!("order {n} too small for a growth fit")));
    }
    let lo = n / 2;
    let diag: Vec<f64> = (lo..=n).map(|j| table.at(j, j).to_f64()).collect();
    if let Some(pos) = diag.iter().position(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::NonPositive(format!(
            "diagonal entry theta[{j},{j}] = {} is not positive (oscillatory regime)",
            diag[pos],
            j = lo + pos
        )));
    }
    let xs: Vec<f64> = (lo..=n).map(|j| (j as f64).ln()).collect();
    let ys: Vec<f64> = diag.iter().map(|d| d.ln()).collect();
    let (slope, _, _) = least_squares(&xs, &ys);

    let local = |j: usize| {
        let d0 = table.at(j, j).to_f64();
        let d1 = table.at(j + 1, j + 1).to_f64();
        (d1 / d0).ln() / ((j + 1) as f64 / j as f64).ln()
    };
    let (j1, j2) = (lo, n - 1);
    let (s1, s2) = (local(j1), local(j2));
    let (j1f, j2f) = (j1 as f64 + 0.5, j2 as f64 + 0.5);
    let refined = (j2f * s2 - j1f * s1) / (j2f - j1f);
    Ok(DiagonalGrowth { beta_tilde: refined + 1.0, lsq_beta_tilde: slope + 1.0, window: (lo, n) })
}

/// Radial Fourier modes of Θ on the circle of radius r:
/// `Θ(re^{iφ}, re^{−iφ}) = Σ_n G_n e^{inφ}`, with `G_n` for `n ≥ 0` in
/// `.0` and `G_{−n}` in `.1`. Also returns the shell tail ratio.
fn radial_modes(theta: &[f64], n: usize, r: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    let mut tail = 0.0;
    let mut total = 0.0;
    let rp: Vec<f64> = (0..2 * n).map(|k| r.powi(k as i32)).collect();
    for i in 1..=n {
        for j in 1..=n {
            let t = theta[(i - 1) * n + (j - 1)];
            if t == 0.0 {
                continue;
            }
            let term = t * rp[i + j - 2];
            if i >= j {
                pos[i - j] += term;
            } else {
                neg[j - i] += term;
            }
            total += term.abs();
            if i + 1 >= n || j + 1 >= n {
                tail += term.abs();
            }
        }
    }
    let rel = if n <= 2 { 0.0 } else { tail / total.max(f64::MIN_POSITIVE) };
    (pos, neg, rel)
}

fn theta_on_circle(pos: &[f64], neg: &[f64], phi: f64) -> f64 {
    // Θ is real for conjugate pairs: Σ G_n cos(nφ) + Σ (G_n − G_{−n}) i sin(nφ)
    // has vanishing imaginary part because the table is symmetric.
    let mut acc = pos[0];
    for (k, (&p, &m)) in pos.iter().zip(neg).enumerate().skip(1) {
        acc += (p + m) * (k as f64 * phi).cos();
    }
    acc
}

/// Integral mean with its tail diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralMean {
    /// `∫₀^{2π} ρ(re^{iφ}, re^{−iφ}) dφ`.
    pub value: f64,
    pub tail: f64,
}

/// `∫₀^{2π} ρ(re^{iφ}, re^{−iφ}) dφ` by the trapezoidal rule, with the
/// default tail tolerance [`TAIL_TOL`].
pub fn integral_means<S: Scalar>(table: &CoeffTable<S>, r: f64, n_phi: usize) -> Result<f64> {
    integral_means_with(table, r, n_phi, TAIL_TOL).map(|m| m.value)
}

/// As [`integral_means`] with an explicit relative tail tolerance.
pub fn integral_means_with<S: Scalar>(
    table: &CoeffTable<S>,
    r: f64,
    n_phi: usize,
    tail_tol: f64,
) -> Result<IntegralMean> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
    }
    if n_phi < 256 || !n_phi.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "n_phi must be a power of two >= 256, got {n_phi}"
        )));
    }
    let n = table.n;
    let theta = table.to_f64_entries();
    let (pos, neg, tail) = radial_modes(&theta, n, r);
    if tail > tail_tol {
        let max_r = max_admissible_radius(&theta, n, r, tail_tol);
        return Err(Error::TailCheck { r, tail, tol: tail_tol, max_r });
    }
    let gamma = table.gamma.to_f64();
    let h = 2.0 * std::f64::consts::PI / n_phi as f64;
    let sum: f64 = (0..n_phi)
        .map(|k| {
            let phi = k as f64 * h;
            let base = 1.0 - 2.0 * r * phi.cos() + r * r;
            let pref = if gamma == 0.0 { 1.0 } else { base.powf(gamma) };
            pref * theta_on_circle(&pos, &neg, phi)
        })
        .sum();
    Ok(IntegralMean { value: sum * h, tail })
}

fn max_admissible_radius(theta: &[f64], n: usize, r: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if radial_modes(theta, n, mid).2 <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `(1−r²)^{β̃} Θ(re^{iφ}, re^{−iφ})` on the given angles.
pub fn angular_profile<S: Scalar>(table: &CoeffTable<S>, r: f64, beta_tilde: f64, phis: &[f64]) -> Vec<f64> {
    let theta = table.to_f64_entries();
    let (pos, neg, _) = radial_modes(&theta, table.n, r);
    let scale = (1.0 - r * r).powf(beta_tilde);
    phis.iter().map(|&phi| scale * theta_on_circle(&pos, &neg, phi)).collect()
}

/// Least-squares line through the log-log points of an integral-means
/// study.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// β estimate.
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of `log I` from the fitted line.
    pub residual: f64,
    /// Radii used.
    pub window: Vec<f64>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Slope of `log I(r)` against `−log(1−r)`.
pub fn fit_beta(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if samples.windows(2).any(|p| p[1].0 <= p[0].0) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    if let Some(&(r, _)) = samples.iter().find(|(r, _)| !(0.0..1.0).contains(r)) {
        return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
    }
    if let Some(&(r, v)) = samples.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive(format!("integral mean {v} at r={r} is not positive")));
    }
    let xs: Vec<f64> = samples.iter().map(|(r, _)| -(1.0 - r).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, v)| v.ln()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    Ok(FitResult { slope, intercept, residual, window: samples.iter().map(|s| s.0).collect() })
}

/// Writes the `theta-table v1` text format.
pub fn write_table<S: Scalar, W: Write>(table: &CoeffTable<S>, mut out: W) -> Result<()> {
    writeln!(
        out,
        "theta-table v1 gamma={} kappa={} N={} backend={}",
        render_param(&table.gamma),
        render_param(&table.kappa),
        table.n,
        S::BACKEND
    )?;
    for i in 1..=table.n {
        for j in 1..=table.n {
            writeln!(out, "{i} {j} {}", table.at(i, j).render())?;
        }
    }
    Ok(())
}

fn render_param<S: Scalar>(x: &S) -> String {
    match S::BACKEND {
        Backend::Float => fmt17(x.to_f64()),
        Backend::Rational => x.render(),
    }
}

fn parse_scalar<S: Scalar>(text: &str) -> Result<S> {
    match parse_number(text)? {
        Number::Exact(r) => Ok(S::from_rational(&r)),
        Number::Float(x) => match S::BACKEND {
            Backend::Float => S::from_f64(x).ok_or_else(|| Error::Parse(format!("bad value {text:?}"))),
            Backend::Rational => Err(Error::Parse(format!("rational table holds decimal {text:?}"))),
        },
    }
}

/// Reads a table written by [`write_table`]. The backend in the header must
/// match `S`.
pub fn read_table<S: Scalar, R: BufRead>(input: R) -> Result<CoeffTable<S>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty table file".into()))??;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("theta-table") || fields.next() != Some("v1") {
        return Err(Error::Parse(format!("bad header {header:?}")));
    }
    let (mut gamma, mut kappa, mut n, mut backend) = (None, None, None, None);
    for f in fields {
        let (key, val) = f
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field {f:?}")))?;
        match key {
            "gamma" => gamma = Some(val.to_string()),
            "kappa" => kappa = Some(val.to_string()),
            "N" => n = Some(val.parse::<usize>().map_err(|_| Error::Parse(format!("bad N {val:?}")))?),
            "backend" => backend = Some(Backend::from_str(val)?),
            other => return Err(Error::Parse(format!("unknown header field {other:?}"))),
        }
    }
    let missing = |name: &str| Error::Parse(format!("header lacks {name}"));
    let n = n.ok_or_else(|| missing("N"))?;
    let backend = backend.ok_or_else(|| missing("backend"))?;
    if backend != S::BACKEND {
        return Err(Error::Parse(format!("table backend {backend} does not match {}", S::BACKEND)));
    }
    let gamma = parse_scalar::<S>(&gamma.ok_or_else(|| missing("gamma"))?)?;
    let kappa = parse_scalar::<S>(&kappa.ok_or_else(|| missing("kappa"))?)?;
    let mut entries = vec![S::zero(); n * n];
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut index = |name: &str| -> Result<usize> {
            it.next()
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|&v| v >= 1 && v <= n)
                .ok_or_else(|| Error::Parse(format!("bad {name} in row {line:?}")))
        };
        let i = index("i")?;
        let j = index("j")?;
        let value = it.next().ok_or_else(|| Error::Parse(format!("missing value in {line:?}")))?;
        entries[(i - 1) * n + (j - 1)] = parse_scalar::<S>(value)?;
        seen += 1;
    }
    if seen != n * n {
        return Err(Error::Parse(format!("expected {} rows, found {seen}", n * n)));
    }
    Ok(CoeffTable { n, gamma, kappa, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_rational::BigRational;
    use num_traits::Zero;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    fn exact(g: BigRational, k: BigRational, n: usize) -> CoeffTable<BigRational> {
        build_theta_table(g, k, n).unwrap()
    }

    fn float(g: f64, k: f64, n: usize) -> CoeffTable<f64> {
        build_theta_table(g, k, n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn binom(a: &BigRational, k: i64) -> BigRational {
        (0..k).fold(r(1, 1), |acc, j| acc * (a - r(j, 1)) / r(j + 1, 1))
    }

    #[test]
    fn first_entries() {
        let t = exact(r(2, 3), r(6, 1), 4);
        assert_eq!(t.get(1, 1), r(1, 1));
        assert_eq!(t.get(1, 2), r(-1, 3));
        let t = exact(r(1, 2), r(0, 1), 4);
        assert_eq!(t.get(1, 2), r(-3, 2));
        assert!(build_theta_table(1.0, 6.0, 0).is_err());
    }

    #[test]
    fn truncation_widths() {
        let zero = r(0, 1);
        assert_eq!(truncation_width(&exact(r(1, 1), r(6, 1), 20), &zero), Some(0));
        assert_eq!(truncation_width(&exact(r(1, 1), r(2, 1), 20), &zero), Some(1));
        assert_eq!(truncation_width(&exact(r(2, 3), r(6, 1), 20), &zero), None);
    }

    #[test]
    fn theta_and_rho_values() {
        let t = float(1.0, 6.0, 120);
        assert_eq!(eval_theta(&t, c(0.0, 0.0), c(0.0, 0.0)).value, c(1.0, 0.0));
        let v = eval_theta(&t, c(0.5, 0.0), c(0.5, 0.0));
        assert!(!v.diverging);
        assert_relative_eq!(v.value.re, 64.0 / 27.0, max_relative = 1e-12);
        let v = eval_rho(&t, c(0.5, 0.0), c(0.5, 0.0));
        assert_relative_eq!(v.value.re, 16.0 / 27.0, max_relative = 1e-12);
        let w = c(0.0, 0.3);
        let v = eval_theta(&t, w, w.conj());
        assert!(v.value.im.abs() < 1e-15 * v.value.re.abs());
        let zero = float(0.0, 3.0, 30);
        let v = eval_rho(&zero, c(0.4, 0.3), c(0.4, -0.3));
        assert_relative_eq!(v.value.re, 1.0, epsilon = 1e-15);
        // Too small a table at this radius trips the tail flag.
        assert!(eval_theta(&float(1.0, 6.0, 10), c(0.9, 0.0), c(0.9, 0.0)).diverging);
    }

    #[test]
    fn fourier_components() {
        let t = exact(r(1, 1), r(6, 1), 12);
        let f0 = fourier_series(&t, 0).unwrap();
        assert_eq!(&f0[..4], &[r(1, 1), r(3, 1), r(6, 1), r(10, 1)]);
        assert!(fourier_series(&t, 1).unwrap().iter().all(|x| x.is_zero()));
        let t = exact(r(2, 3), r(6, 1), 12);
        let f1 = fourier_series(&t, 1).unwrap();
        let fm1 = fourier_series(&t, -1).unwrap();
        assert!(fm1[0].is_zero());
        assert_eq!(&fm1[1..], &f1[..]);
        assert!(fourier_series(&t, 12).is_err());
    }

    #[test]
    fn rec3_vanishes() {
        let zero = r(0, 1);
        let t = exact(r(1, 1), r(6, 1), 16);
        assert_eq!(rec3_residual(&t, 0, 10).unwrap(), zero);
        let t = exact(r(1, 1), r(2, 1), 16);
        assert_eq!(rec3_residual(&t, 1, 10).unwrap(), zero);
        assert_eq!(rec3_residual(&t, 0, 10).unwrap(), zero);
        let t = exact(r(3, 7), r(5, 2), 16);
        for n in -6..=6 {
            assert_eq!(rec3_residual(&t, n, 6).unwrap(), zero, "n={n}");
        }
        assert!(rec3_residual(&t, 0, 40).is_err());
    }

    #[test]
    fn diagonal_growth_anchors() {
        let b = diagonal_growth_exponent(&float(1.0, 6.0, 400)).unwrap();
        assert!((b - 3.0).abs() < 0.01, "{b}");
        let b = diagonal_growth_exponent(&float(1.0, 2.0, 400)).unwrap();
        assert!((b - 4.0).abs() < 0.05, "{b}");
        let b = diagonal_growth_exponent(&float(0.5, 0.0, 400)).unwrap();
        assert!((b - 2.0).abs() < 0.05, "{b}");
        // κ = 0, γ = −2/3 terminates: the diagonal vanishes past j = 2.
        let neg = float(-2.0 / 3.0, 0.0, 40);
        assert!(matches!(diagonal_growth_exponent(&neg), Err(Error::NonPositive(_))));
    }

    #[test]
    fn integral_mean_anchors() {
        let t = float(1.0, 6.0, 120);
        let v = integral_means(&t, 0.5, 256).unwrap();
        assert_relative_eq!(v, 160.0 * PI / 27.0, max_relative = 1e-12);
        assert_relative_eq!(integral_means(&t, 0.0, 256).unwrap(), 2.0 * PI, max_relative = 1e-14);
        let zero = float(0.0, 4.0, 20);
        assert_relative_eq!(integral_means(&zero, 0.7, 512).unwrap(), 2.0 * PI, max_relative = 1e-14);
        match integral_means(&t, 0.95, 256) {
            Err(Error::TailCheck { max_r, .. }) => assert!(max_r > 0.5 && max_r < 0.95),
            other => panic!("{other:?}"),
        }
        assert!(integral_means(&t, 0.5, 300).is_err());
        assert!(integral_means(&t, 1.0, 256).is_err());
    }

    #[test]
    fn slope_fits() {
        let pts: Vec<(f64, f64)> = (3..=7).map(|k| 1.0 - 2f64.powi(-k)).map(|x| (x, (1.0 - x).powi(-3))).collect();
        assert!((fit_beta(&pts).unwrap().slope - 3.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = pts.iter().map(|&(x, _)| (x, 2.5)).collect();
        assert!(fit_beta(&flat).unwrap().slope.abs() < 1e-12);
        assert!(fit_beta(&pts[..3]).is_err());
        let mut bad = pts.clone();
        bad[2].1 = -1.0;
        assert!(matches!(fit_beta(&bad), Err(Error::NonPositive(_))));

        let t = float(1.0, 6.0, 400);
        let samples: Vec<(f64, f64)> = (3..=7)
            .map(|k| {
                let x = 1.0 - 2f64.powi(-k);
                (x, integral_means_with(&t, x, 1024, 1.0).unwrap().value)
            })
            .collect();
        let fit = fit_beta(&samples).unwrap();
        assert!((fit.slope - 3.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn export_round_trip() {
        let t = exact(r(1, 2), r(5, 2), 6);
        let mut buf = Vec::new();
        write_table(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta-table v1 gamma=1/2 kappa=5/2 N=6 backend=rational\n"));
        assert_eq!(read_table::<BigRational, _>(&buf[..]).unwrap(), t);
        assert!(read_table::<f64, _>(&buf[..]).is_err());

        let t = float(2.0 / 3.0, 6.0, 5);
        let mut buf = Vec::new();
        write_table(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta-table v1 gamma=0.66666666666666663 kappa=6 N=5 backend=float\n"));
        assert_eq!(read_table::<f64, _>(&buf[..]).unwrap(), t);
        assert!(read_table::<f64, _>(&b"theta-table v2 N=1"[..]).is_err());
    }

    #[test]
    fn truncation_grid_is_exact() {
        let gammas = [r(1, 4), r(1, 2), r(1, 1), r(2, 1)];
        for m in 0..=4u32 {
            for g in &gammas {
                let Ok(curve) = crate::spectrum::CurveParams::new(m, g.clone()) else { continue };
                let p = crate::spectrum::curve_point(&curve).unwrap();
                let t = exact(g.clone(), p.kappa().clone(), 40);
                assert!(max_nonzero_offset(&t) <= m as usize, "M={m} gamma={g}");
            }
        }
    }

    #[test]
    fn kappa_zero_binomial_oracle() {
        for q in 1..=3 {
            let g = r(q, 2);
            let t = exact(g, r(0, 1), 20);
            let a = r(-3 * q, 2);
            for i in 1..=20 {
                for j in 1..=20 {
                    assert_eq!(t.get(i, j), binom(&a, i - 1) * binom(&a, j - 1));
                }
            }
        }
    }

    #[test]
    fn root_invariance() {
        let lo = float(2.0 / 3.0, 6.0, 200);
        let hi = float(1.0, 6.0, 200);
        let mut rng = proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha);
        for _ in 0..20 {
            let w = Complex64::from_polar(0.8 * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>());
            let a = eval_rho(&lo, w, w.conj()).value;
            let b = eval_rho(&hi, w, w.conj()).value;
            assert!((a - b).norm() <= 1e-8 * b.norm(), "{w}: {a} vs {b}");
        }
    }

    #[test]
    fn angular_profile_limit() {
        let t = float(1.0, 2.0, 2000);
        let phis: Vec<f64> = (0..256).map(|k| 2.0 * PI * k as f64 / 256.0).collect();
        let prof = angular_profile(&t, 0.99, 4.0, &phis);
        let shape: Vec<f64> = phis.iter().map(|p| 1.0 - p.cos()).collect();
        let cfit = prof.iter().zip(&shape).map(|(a, b)| a * b).sum::<f64>() / shape.iter().map(|b| b * b).sum::<f64>();
        let err = prof.iter().zip(&shape).map(|(a, b)| (a - cfit * b).powi(2)).sum::<f64>().sqrt()
            / prof.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 0.05, "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn recurrence_holds_exactly(gn in -20i64..40, gd in 1i64..9, kn in 0i64..40, kd in 1i64..5) {
            let t = exact(r(gn, gd), r(kn, kd), 50);
            prop_assert_eq!(t.recurrence_residual(), 0.0);
        }

        #[test]
        fn symmetric_table(g in -1.0f64..3.0, k in 0.0f64..10.0) {
            let t = float(g, k, 30);
            for i in 1..=30 {
                for j in 1..i {
                    prop_assert_eq!(t.get(i, j), t.get(j, i));
                }
            }
        }
    }
}
