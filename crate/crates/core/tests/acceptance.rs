//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p sle-spectrum --test acceptance -- --nocapture`.

use std::time::Instant;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

use sle_spectrum::coeffs::{build_theta_table, eval_rho, fit_beta, integral_means_with, max_nonzero_offset, diagonal_growth_exponent};
use sle_spectrum::eigen::{analyze_exact, coef_a, eigen_solve, TridiagMatrix};
use sle_spectrum::mc::{moment_estimate, path_rng, sample_driving, whole_plane_map_derivative, MCConfig};
use sle_spectrum::special::{deterministic_map_derivative, pde_residual, rho_m0, rho_m1, PDE_STEP};
use sle_spectrum::spectrum::{
    beta_spectrum, curve_point, eigen_beta_closed, gamma_roots, gamma_transition, q_tip, q_transition, CurveParams,
    SleParams,
};

/// Relative tail tolerance used for the slope fits.
const FIT_TAIL_TOL: f64 = 1e-2;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn disk_points(n: usize, radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = path_rng(seed, 0);
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            Complex64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
        })
        .collect()
}

fn truncation_certificates() -> Outcome {
    let cases = [(0, ratio(1, 1)), (1, ratio(1, 1)), (1, ratio(1, 2)), (2, ratio(1, 2)), (3, ratio(1, 3))];
    let mut pass = true;
    let mut notes = Vec::new();
    for (m, g) in cases {
        let curve = CurveParams::new(m, g.clone()).unwrap();
        let p = curve_point(&curve).unwrap();
        let table = build_theta_table(g.clone(), p.kappa().clone(), 40).unwrap();
        let width = max_nonzero_offset(&table);
        let a = coef_a(-(m as i64), &g, p.kappa());
        let ok = width <= m as usize && a.is_zero();
        pass &= ok;
        notes.push(format!("(M={m},g={g}) q={} k={} width={width} A_-M={a}", p.q(), p.kappa()));
    }
    Outcome { id: 1, name: "truncation certificates (exact, N=40)", pass, detail: notes.join("; ") }
}

fn closed_form_equivalence() -> Outcome {
    let points = disk_points(20, 0.8, 2);
    let mut worst = 0.0f64;

    // M=0 at κ=6 sits at γ=1.
    let t0 = build_theta_table(1.0, 6.0, 300).unwrap();
    for &w in &points {
        let series = eval_rho(&t0, w, w.conj()).value;
        let exact = rho_m0(w, w.conj(), 6.0).unwrap();
        worst = worst.max((series - exact).norm() / exact.norm());
    }
    // M=1 at γ=1 sits at κ=2.
    let t1 = build_theta_table(1.0, 2.0, 300).unwrap();
    for &w in &points {
        let series = eval_rho(&t1, w, w.conj()).value;
        let exact = rho_m1(w, w.conj(), 1.0).unwrap().value;
        worst = worst.max((series - exact).norm() / exact.norm());
    }
    Outcome {
        id: 2,
        name: "series vs closed forms M=0 (k=6), M=1 (g=1), 20 points |w|<=0.8",
        pass: worst <= 1e-8,
        detail: format!("max rel err {worst:.3e} (tol 1e-8)"),
    }
}

fn pde_residuals() -> Outcome {
    let points = disk_points(20, 0.8, 3);
    let mut worst = 0.0f64;
    for kappa in [2.0, 6.0] {
        let q = sle_spectrum::special::m0_q(kappa);
        for &w in &points {
            let r = pde_residual(|a, b| rho_m0(a, b, kappa), q, kappa, w, w.conj(), PDE_STEP).unwrap();
            worst = worst.max(r);
        }
    }
    for gamma in [0.5, 1.0, 2.0] {
        let (kappa, q) = sle_spectrum::special::m1_parameters(gamma);
        for &w in &points {
            let r = pde_residual(|a, b| rho_m1(a, b, gamma).map(|v| v.value), q, kappa, w, w.conj(), PDE_STEP)
                .unwrap();
            worst = worst.max(r);
        }
    }
    Outcome {
        id: 3,
        name: "PDE residual of rho_0, rho_1 (4th-order FD, h=1e-3)",
        pass: worst < 1e-6,
        detail: format!("max residual {worst:.3e} (tol 1e-6)"),
    }
}

fn eigenvalue_suite() -> Outcome {
    let mut rng = path_rng(4, 0);
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut count = 0;

    let anchor = TridiagMatrix::new(vec![-1.0], vec![3.0, 2.0], vec![-2.0]).unwrap();
    let mut vals = eigen_solve(&anchor).unwrap().values;
    vals.sort_by(f64::total_cmp);
    let anchor_ok = vals == [1.0, 4.0];
    pass &= anchor_ok;

    for m in 0..=10u32 {
        let mut done = 0;
        while done < 20 {
            let num: i64 = rng.random_range(-(m as i64) * 333..=3000);
            let g = ratio(num, 1000);
            let Ok(curve) = CurveParams::new(m, g) else { continue };
            done += 1;
            match analyze_exact(&curve) {
                Ok(r) => {
                    worst = worst.max(r.even_deviation);
                    let max = r.reduced.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    pass &= r.even_deviation <= 1e-10 && r.beta_tilde == max;
                    count += 1;
                }
                Err(e) => {
                    println!("  eigen failure at M={m}: {e}");
                    pass = false;
                }
            }
        }
    }

    // β₀ and β_{2M} cross at γ_M and swap order across it.
    let mut cross_ok = true;
    for m in 1..=10u32 {
        let gm = gamma_transition(m);
        let at = CurveParams::new(m, gm).unwrap();
        let b0 = eigen_beta_closed(&at, 0).unwrap();
        let b2 = eigen_beta_closed(&at, 2 * m).unwrap();
        cross_ok &= (b0 - b2).abs() <= 1e-12 * b0.abs().max(1.0);
        for (g, low) in [(gm - 1e-3, true), (gm + 1e-3, false)] {
            let c = CurveParams::new(m, g).unwrap();
            let (b0, b2) = (eigen_beta_closed(&c, 0).unwrap(), eigen_beta_closed(&c, 2 * m).unwrap());
            cross_ok &= if low { b0 > b2 } else { b2 > b0 };
        }
    }
    pass &= cross_ok;
    Outcome {
        id: 4,
        name: "eigenvalue suite M<=10, 20 random gamma each",
        pass,
        detail: format!(
            "{count} curve points, max even-l deviation {worst:.3e}; anchor {vals:?}; crossing at gamma_M {}",
            if cross_ok { "ok" } else { "FAILED" }
        ),
    }
}

fn spectrum_anchors() -> Outcome {
    let beta = |q: f64, k: f64| beta_spectrum(&SleParams::new(q, k).unwrap()).beta;
    let eps = 1e-6;
    let mut jump = 0.0f64;
    for k in [0.5, 1.0, 2.0, 4.0, 6.0, 8.0] {
        for x in [q_tip(k), q_transition(k)] {
            jump = jump.max((beta(x + eps, k) - beta(x - eps, k)).abs());
        }
    }
    let zero = [0.5, 2.0, 6.0].iter().map(|&k| beta(0.0, k).abs()).fold(0.0, f64::max);
    let q0 = q_transition(0.0);
    let (b22, b26) = (beta(2.0, 2.0), beta(2.0, 6.0));
    let pass = jump < 1e-4 && zero == 0.0 && (q0 - 1.0 / 3.0).abs() < 1e-15 && (b22 - 4.0).abs() < 1e-12
        && (b26 - 3.0).abs() < 1e-12;
    Outcome {
        id: 5,
        name: "spectrum continuity and anchors",
        pass,
        detail: format!("max jump {jump:.2e}; beta(0,k)={zero}; Q(0)={q0}; beta(2,2)={b22}; beta(2,6)={b26}"),
    }
}

fn slope_fit(q: f64, kappa: f64, n: usize) -> (f64, f64, f64) {
    let params = SleParams::new(q, kappa).unwrap();
    let gamma = gamma_roots(&params).unwrap().gamma_minus;
    let table = build_theta_table(gamma, kappa, n).unwrap();
    let samples: Vec<(f64, f64)> = (3..=7)
        .map(|k| {
            let r = 1.0 - 2f64.powi(-k);
            (r, integral_means_with(&table, r, 1024, FIT_TAIL_TOL).unwrap().value)
        })
        .collect();
    let fit = fit_beta(&samples).unwrap();
    (fit.slope, fit.residual, beta_spectrum(&params).beta)
}

fn slope_reproduction() -> Outcome {
    let (slope, resid, closed) = slope_fit(2.0, 6.0, 400);
    let rel = (slope - closed).abs() / closed;
    let growth = diagonal_growth_exponent(&build_theta_table(1.0, 2.0, 400).unwrap()).unwrap();
    let grel = (growth - 4.0).abs() / 4.0;
    Outcome {
        id: 6,
        name: "slope fit (2,6) and diagonal growth (g=1,k=2), N=400",
        pass: rel <= 0.05 && grel <= 0.05,
        detail: format!(
            "slope {slope:.5} vs {closed} (rel {rel:.3e}, fit residual {resid:.2e}); growth {growth:.5} vs 4 (rel {grel:.3e})"
        ),
    }
}

fn off_curve() -> Outcome {
    let (slope, resid, closed) = slope_fit(1.0, 4.0, 600);
    let rel = (slope - closed).abs() / closed;
    Outcome {
        id: 7,
        name: "off-curve continuation at (1,4), N=600 (supporting evidence)",
        pass: rel <= 0.10,
        detail: format!("slope {slope:.5} vs {closed} (rel {rel:.3e}, fit residual {resid:.2e})"),
    }
}

fn monte_carlo() -> Outcome {
    let t = 20.0;
    let path = sample_driving(0.0, t, 2000, &mut path_rng(0, 0));
    let mut det = 0.0f64;
    for w in disk_points(10, 0.9, 8) {
        let got = (whole_plane_map_derivative(w, &path).unwrap().log_deriv.re + t).exp();
        let want = deterministic_map_derivative(w, 0.0).unwrap().norm();
        det = det.max((got - want).abs() / want);
    }
    let est = moment_estimate(&MCConfig::new(6.0, 2.0, Complex64::new(0.5, 0.0), 10_000, 42)).unwrap();
    let z = (est.mean - 16.0 / 27.0) / est.stderr;
    Outcome {
        id: 8,
        name: "Monte Carlo: k=0 closed form; (q=2,k=6,w=0.5) vs 16/27",
        pass: det <= 1e-6 && z.abs() <= 3.0,
        detail: format!("k=0 max rel err {det:.2e}; mean {:.6} +- {:.6}, z = {z:.2}", est.mean, est.stderr),
    }
}

fn limitation_stated() -> Outcome {
    let readme = include_str!("../../../README.md").to_lowercase();
    let pass = readme.contains("conjecture") && readme.contains("off the truncation curves");
    Outcome {
        id: 9,
        name: "limitation stated: off-curve spectrum is a conjecture",
        pass,
        detail: "exact results hold on the truncation curves only; criteria 7 and 8 are numerical support".into(),
    }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Outcome; 9] = [
        truncation_certificates,
        closed_form_equivalence,
        pde_residuals,
        eigenvalue_suite,
        spectrum_anchors,
        slope_reproduction,
        off_curve,
        monte_carlo,
        limitation_stated,
    ];
    let mut failed = Vec::new();
    for run in criteria {
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {}: {} ({:.1?})", o.id, o.name, o.detail, start.elapsed());
        if !o.pass {
            failed.push(o.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
