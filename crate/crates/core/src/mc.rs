//! Monte Carlo estimate of the moment function ρ(w, w̄) by composing
//! frozen-driving radial Loewner flows.
//!
//! The finite-horizon map is `F(·, T) = φ_0 ∘ φ_1 ∘ … ∘ φ_{N−1}`, where φ_k
//! flows `dz/ds = z(z+u_k)/(z−u_k)` for one step δ with `u_k = e^{iB(t_k)}`.
//! It is evaluated at the rotated point `w e^{iB(T)}`, applying the latest
//! increment first, and each path contributes `exp(q(T + Re log F′))`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::format::fmt17;

/// Largest admissible time step.
pub const MAX_STEP: f64 = 1e-2;
/// Closest approach to the driving point before a step is abandoned.
pub const MIN_DISTANCE: f64 = 1e-12;
/// Substeps are `SUBSTEP_FACTOR · |z − u|²` long at most.
pub const SUBSTEP_FACTOR: f64 = 0.02;
/// Validation envelope of the estimator.
pub const ENVELOPE_Q: f64 = 2.0;
pub const ENVELOPE_W: f64 = 0.9;

/// Settings of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub kappa: f64,
    pub q: f64,
    /// Time horizon T.
    pub t_max: f64,
    pub n_steps: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub w: Complex64,
}

impl MCConfig {
    /// A configuration with the default horizon for `w` and the largest
    /// admissible step.
    pub fn new(kappa: f64, q: f64, w: Complex64, n_samples: u64, seed: u64) -> Self {
        let t_max = default_horizon(w.norm());
        MCConfig { kappa, q, t_max, n_steps: (t_max / MAX_STEP).ceil() as usize, n_samples, seed, w }
    }

    pub fn delta(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa = {} must be finite and nonnegative", self.kappa));
        }
        if !self.q.is_finite() {
            return bad(format!("q = {} is not finite", self.q));
        }
        if !(self.w.norm() < 1.0) {
            return bad(format!("|w| = {} must be below 1", self.w.norm()));
        }
        if self.n_steps == 0 || !(self.t_max > 0.0) {
            return bad("horizon and step count must be positive".into());
        }
        if self.delta() > MAX_STEP * (1.0 + 1e-12) {
            return bad(format!("step T/n_steps = {} exceeds {MAX_STEP}", self.delta()));
        }
        if (-self.t_max).exp() > (1.0 - self.w.norm()) / 10.0 {
            return bad(format!(
                "horizon T = {} too short for |w| = {}: need exp(-T) <= (1-|w|)/10",
                self.t_max,
                self.w.norm()
            ));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        Ok(())
    }

    /// Warnings for runs outside the validation envelope.
    pub fn envelope_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.q.abs() > ENVELOPE_Q {
            out.push(format!("|q| = {} outside the validation envelope |q| <= {ENVELOPE_Q}", self.q.abs()));
        }
        if self.w.norm() > ENVELOPE_W {
            out.push(format!("|w| = {} outside the validation envelope |w| <= {ENVELOPE_W}", self.w.norm()));
        }
        out
    }
}

/// Horizon used by [`MCConfig::new`]: at least 16, and long enough for the
/// truncation rule `e^{−T} ≤ (1 − |w|)/10`.
pub fn default_horizon(abs_w: f64) -> f64 {
    (10.0 / (1.0 - abs_w)).ln().max(16.0)
}

/// Per-path generator: ChaCha8 keyed by the seed, stream = path index.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Piecewise-constant driving of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    pub delta: f64,
    /// `u_k = e^{i(B(t_k) + B(t_{k+1}))/2}`, `k = 0..N−1`, with `B(t_0) = 0`.
    /// Freezing at either endpoint leaves an O(δ) bias in the moments,
    /// of opposite sign for left and right; the midpoint cancels it.
    pub u: Vec<Complex64>,
    /// B(T).
    pub b_final: f64,
}

/// Brownian driving with increments of variance κδ.
pub fn sample_driving<R: Rng + ?Sized>(kappa: f64, t_max: f64, n_steps: usize, rng: &mut R) -> DrivingPath {
    let delta = t_max / n_steps as f64;
    let sd = (kappa * delta).sqrt();
    let mut b = 0.0;
    let mut u = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(rng);
        let next = b + sd * z;
        u.push(Complex64::from_polar(1.0, 0.5 * (b + next)));
        b = next;
    }
    DrivingPath { delta, u, b_final: b }
}

fn field(z: Complex64, u: Complex64) -> (Complex64, Complex64) {
    let d = z - u;
    (z * (z + u) / d, (z * z - 2.0 * u * z - u * u) / (d * d))
}

/// Flows `(z, log d)` for time `delta` along `dz/ds = z(z+u)/(z−u)`,
/// accumulating `∫ (z² − 2uz − u²)/(z−u)² ds` into the log-derivative.
/// Classical RK4 with substeps no longer than `0.02·|z−u|²`.
pub fn elementary_step(z: Complex64, logd: Complex64, u: Complex64, delta: f64) -> Result<(Complex64, Complex64)> {
    let (mut z, mut logd) = (z, logd);
    let mut left = delta;
    while left > 0.0 {
        let dist = (z - u).norm();
        if dist < MIN_DISTANCE {
            return Err(Error::StepUnderflow { distance: dist });
        }
        let h = left.min(SUBSTEP_FACTOR * dist * dist);
        let (k1, l1) = field(z, u);
        let (k2, l2) = field(z + k1 * (h / 2.0), u);
        let (k3, l3) = field(z + k2 * (h / 2.0), u);
        let (k4, l4) = field(z + k3 * h, u);
        z += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        logd += (l1 + 2.0 * l2 + 2.0 * l3 + l4) * (h / 6.0);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::StepUnderflow { distance: dist });
        }
        left -= h;
    }
    Ok((z, logd))
}

/// Value and log-derivative of the finite-horizon map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapValue {
    /// `F(w e^{iB(T)}, T)`.
    pub value: Complex64,
    /// `log F′` at the same point.
    pub log_deriv: Complex64,
}

/// Evaluates `F(w e^{iB(T)}, T)` by composing the elementary flows, latest
/// increment innermost.
pub fn whole_plane_map_derivative(w: Complex64, path: &DrivingPath) -> Result<MapValue> {
    let mut z = w * Complex64::from_polar(1.0, path.b_final);
    let mut logd = Complex64::new(0.0, 0.0);
    for &u in path.u.iter().rev() {
        (z, logd) = elementary_step(z, logd, u, path.delta)?;
    }
    Ok(MapValue { value: z, log_deriv: logd })
}

/// One simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub index: u64,
    pub log_deriv: Complex64,
    pub b_final: f64,
}

impl PathSample {
    /// `exp(q(T + Re log F′))`.
    pub fn weight(&self, q: f64, t_max: f64) -> f64 {
        if q == 0.0 {
            return 1.0;
        }
        (q * (t_max + self.log_deriv.re)).exp()
    }
}

fn simulate_one(config: &MCConfig, index: u64) -> Result<PathSample> {
    let mut rng = path_rng(config.seed, index);
    let path = sample_driving(config.kappa, config.t_max, config.n_steps, &mut rng);
    let v = whole_plane_map_derivative(config.w, &path)?;
    Ok(PathSample { index, log_deriv: v.log_deriv, b_final: path.b_final })
}

/// Simulates all paths, in index order.
pub fn simulate_paths(config: &MCConfig) -> Result<Vec<PathSample>> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.n_samples).into_par_iter().map(|i| simulate_one(config, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.n_samples).map(|i| simulate_one(config, i)).collect()
    }
}

/// Mean and standard error of the moment estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over √n.
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Welford reduction of path weights for a given q; samples can be reused
/// across q values.
pub fn estimate_from_samples(samples: &[PathSample], q: f64, t_max: f64, seed: u64) -> Result<MCEstimate> {
    let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
    for s in samples {
        let x = s.weight(q, t_max);
        if !x.is_finite() {
            return Err(Error::SampleOverflow { index: s.index });
        }
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let stderr = if n > 1 { (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt() } else { 0.0 };
    let mut warnings = Vec::new();
    if mean != 0.0 && stderr / mean.abs() > 0.5 {
        warnings.push(format!("estimator not converged: stderr/mean = {:.3}", stderr / mean.abs()));
    }
    Ok(MCEstimate { mean, stderr, n_samples: n, seed, warnings })
}

/// Estimates ρ(w, w̄) for the configured q.
pub fn moment_estimate(config: &MCConfig) -> Result<MCEstimate> {
    let samples = simulate_paths(config)?;
    let mut est = estimate_from_samples(&samples, config.q, config.t_max, config.seed)?;
    let mut warnings = config.envelope_warnings();
    warnings.append(&mut est.warnings);
    est.warnings = warnings;
    Ok(est)
}

/// Writes `index log_deriv_re log_deriv_im B_T` per path.
pub fn write_samples<W: Write>(samples: &[PathSample], mut out: W) -> Result<()> {
    for s in samples {
        writeln!(
            out,
            "{} {} {} {}",
            s.index,
            fmt17(s.log_deriv.re),
            fmt17(s.log_deriv.im),
            fmt17(s.b_final)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{deterministic_map, deterministic_map_derivative};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_kappa_driving_is_constant() {
        let p = sample_driving(0.0, 1.0, 100, &mut path_rng(1, 0));
        assert!(p.u.iter().all(|&u| u == c(1.0, 0.0)));
        assert_eq!(p.b_final, 0.0);
    }

    #[test]
    fn driving_is_deterministic() {
        let a = sample_driving(3.0, 1.0, 50, &mut path_rng(9, 4));
        let b = sample_driving(3.0, 1.0, 50, &mut path_rng(9, 4));
        let other = sample_driving(3.0, 1.0, 50, &mut path_rng(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn brownian_variance() {
        let (kappa, t) = (2.0, 0.5);
        let n = 20_000u64;
        let xs: Vec<f64> = (0..n).map(|i| sample_driving(kappa, t, 10, &mut path_rng(3, i)).b_final).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Standard error of a variance estimate for a Gaussian: σ²√(2/n).
        let se = kappa * t * (2.0 / n as f64).sqrt();
        assert!((var - kappa * t).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn step_at_origin_and_zero_time() {
        let (z, l) = elementary_step(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), 0.01).unwrap();
        assert_eq!(z, c(0.0, 0.0));
        assert!((l.re + 0.01).abs() < 1e-15 && l.im == 0.0);
        let w = c(0.3, 0.2);
        assert_eq!(elementary_step(w, c(0.5, 0.0), c(0.0, 1.0), 0.0).unwrap(), (w, c(0.5, 0.0)));
        assert!(matches!(
            elementary_step(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), 0.01),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn zero_kappa_reproduces_closed_form() {
        let t = 20.0;
        let path = sample_driving(0.0, t, 2000, &mut path_rng(0, 0));
        for w in [c(0.5, 0.0), c(-0.3, 0.6), c(0.1, -0.85), c(0.0, 0.0)] {
            let v = whole_plane_map_derivative(w, &path).unwrap();
            let f = deterministic_map(w, 0.0).unwrap();
            assert!((v.value * t.exp() - f).norm() <= 1e-6 * f.norm().max(1e-300), "{w}");
            if w.norm() > 0.0 {
                let d = deterministic_map_derivative(w, 0.0).unwrap();
                let got = (v.log_deriv + t).exp();
                assert!((got - d).norm() <= 1e-6 * d.norm(), "{w}: {got} vs {d}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let path = sample_driving(4.0, 3.0, 300, &mut path_rng(11, 2));
        let w = c(0.4, 0.3);
        let h = 1e-5;
        let f = |z| whole_plane_map_derivative(z, &path).unwrap().value;
        let fd = (f(w + h) - f(w - h)) / (2.0 * h);
        let rot = Complex64::from_polar(1.0, path.b_final);
        let tracked = whole_plane_map_derivative(w, &path).unwrap().log_deriv.exp() * rot;
        assert!((fd - tracked).norm() <= 1e-5 * tracked.norm(), "{fd} vs {tracked}");
    }

    #[test]
    fn zero_q_is_exact() {
        let cfg = MCConfig::new(6.0, 0.0, c(0.5, 0.0), 64, 1);
        let est = moment_estimate(&cfg).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = MCConfig::new(2.0, 1.0, c(0.5, 0.0), 10, 0);
        cfg.validate().unwrap();
        cfg.t_max = 1.0;
        cfg.n_steps = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = MCConfig::new(2.0, 1.0, c(0.5, 0.0), 10, 0);
        cfg.n_steps /= 2;
        assert!(cfg.validate().is_err());
        assert!(!MCConfig::new(2.0, 3.0, c(0.95, 0.0), 1, 0).envelope_warnings().is_empty());
    }

    #[test]
    fn estimate_is_reproducible() {
        let cfg = MCConfig::new(6.0, 2.0, c(0.5, 0.0), 32, 42);
        assert_eq!(moment_estimate(&cfg).unwrap(), moment_estimate(&cfg).unwrap());
    }

    #[test]
    fn sample_dump_format() {
        let s = PathSample { index: 3, log_deriv: c(-1.5, 0.25), b_final: 2.0 };
        let mut buf = Vec::new();
        write_samples(&[s], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 -1.5 0.25 2\n");
    }
}
