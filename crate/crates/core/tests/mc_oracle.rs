use num_complex::Complex64;
use sle_spectrum::coeffs::{build_theta_table, eval_rho};
use sle_spectrum::mc::{moment_estimate, MCConfig};
use sle_spectrum::spectrum::SleParams;

fn series_rho(q: f64, kappa: f64, w: f64) -> f64 {
    let params = SleParams::new(q, kappa).unwrap();
    let gamma = sle_spectrum::spectrum::gamma_roots(&params).unwrap().gamma_minus;
    let table = build_theta_table(gamma, kappa, 200).unwrap();
    let w = Complex64::new(w, 0.0);
    eval_rho(&table, w, w.conj()).value.re
}

#[test]
fn series_agreement() {
    for &(q, kappa) in &[(2.0, 6.0), (2.0, 2.0), (1.0, 4.0)] {
        for &w in &[0.3, 0.5] {
            let cfg = MCConfig::new(kappa, q, Complex64::new(w, 0.0), 10_000, 7);
            let est = moment_estimate(&cfg).unwrap();
            let oracle = series_rho(q, kappa, w);
            let z = (est.mean - oracle) / est.stderr;
            println!("q={q} kappa={kappa} w={w}: mc={} ± {} series={oracle} z={z:.2}", est.mean, est.stderr);
            assert!(z.abs() <= 3.0);
        }
    }
}
