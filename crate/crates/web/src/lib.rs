//! Browser bindings: spectrum evaluation, curve eigen reports and exact
//! truncation certificates, each returning a JSON string.

use num_traits::Zero;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use sle_spectrum::coeffs::{build_theta_table, max_nonzero_offset};
use sle_spectrum::eigen::{analyze_exact, coef_a};
use sle_spectrum::spectrum::{beta_spectrum, curve_point, q_tip, q_transition, CurveParams, SleParams};
use sle_spectrum::{parse_number, BigRational, Error, Number, Scalar};

/// Largest table order the page accepts for exact certificates.
pub const MAX_ORDER: usize = 80;
/// Largest M the page accepts for eigen reports.
pub const MAX_M: u32 = 10;

fn exact(text: &str) -> Result<BigRational, Error> {
    parse_number(text)?
        .to_rational()
        .ok_or_else(|| Error::Parse(format!("{text:?} is not finite")))
}

fn render(r: &BigRational) -> String {
    Number::Exact(r.clone()).render()
}

/// β over `n` evenly spaced q in `[q_min, q_max]` at fixed κ, with the
/// branch boundaries.
pub fn spectrum_json(kappa: f64, q_min: f64, q_max: f64, n: usize) -> Result<Value, Error> {
    if n < 2 || !(q_max > q_min) {
        return Err(Error::InvalidParameter("need n >= 2 and q_max > q_min".into()));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let q = q_min + (q_max - q_min) * i as f64 / (n - 1) as f64;
        let v = beta_spectrum(&SleParams::new(q, kappa)?);
        points.push(json!({ "q": q, "beta": v.beta, "branch": v.branch.name() }));
    }
    Ok(json!({ "kappa": kappa, "q_tip": q_tip(kappa), "q_transition": q_transition(kappa), "points": points }))
}

/// Eigen analysis of one truncation-curve point.
pub fn curve_json(m: u32, gamma: &str) -> Result<Value, Error> {
    if m > MAX_M {
        return Err(Error::InvalidParameter(format!("M = {m} above {MAX_M}")));
    }
    let curve = CurveParams::new(m, exact(gamma)?)?;
    let p = curve_point(&curve)?;
    let rep = analyze_exact(&curve)?;
    Ok(json!({
        "M": m,
        "gamma": render(curve.gamma()),
        "q": render(p.q()),
        "kappa": render(p.kappa()),
        "eigenvalues": rep.reduced.values,
        "closed_form": rep.closed,
        "deviation": rep.even_deviation,
        "beta_tilde": rep.beta_tilde,
        "beta": rep.beta,
    }))
}

/// Exact band check of the coefficient table at a curve point.
pub fn truncation_json(m: u32, gamma: &str, order: usize) -> Result<Value, Error> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidParameter(format!("order must be in 1..={MAX_ORDER}")));
    }
    let g = exact(gamma)?;
    let curve = CurveParams::new(m, g.clone())?;
    let p = curve_point(&curve)?;
    let table = build_theta_table(g.clone(), p.kappa().clone(), order)?;
    let width = max_nonzero_offset(&table);
    let a = coef_a(-(m as i64), &g, p.kappa());
    let corner: Vec<Vec<String>> = (1..=order.min(6) as i64)
        .map(|i| (1..=order.min(6) as i64).map(|j| render(&table.get(i, j))).collect())
        .collect();
    Ok(json!({
        "M": m,
        "gamma": render(&g),
        "q": render(p.q()),
        "kappa": render(p.kappa()),
        "order": order,
        "max_offset": width,
        "a_minus_m": render(&a),
        "pass": width <= m as usize && a.is_zero(),
        "corner": corner,
        "diagonal": (1..=order.min(6) as i64).map(|i| table.get(i, i).to_f64()).collect::<Vec<_>>(),
    }))
}

fn to_js(r: Result<Value, Error>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn spectrum(kappa: f64, q_min: f64, q_max: f64, n: usize) -> Result<String, JsError> {
    to_js(spectrum_json(kappa, q_min, q_max, n))
}

#[wasm_bindgen]
pub fn curve(m: u32, gamma: &str) -> Result<String, JsError> {
    to_js(curve_json(m, gamma))
}

#[wasm_bindgen]
pub fn truncation(m: u32, gamma: &str, order: usize) -> Result<String, JsError> {
    to_js(truncation_json(m, gamma, order))
}
