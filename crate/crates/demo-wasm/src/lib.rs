//! Browser bindings for three interactive views: approximation curves against
//! the FFT law, the ch.f. modulus scan, and the sup-error decay with its fit.
//!
//! Results are flat `Float64Array`s; each function documents its layout.

use intloc_core::dist_zoo::{builtin, cramer_sup, zoo};
use intloc_core::edgeworth::{refined_approx, stone_approx};
use intloc_core::harness::{oracle_points, rate_fit, score_points, ApproxChoice, SweepConfig};
use intloc_core::oracles::FftOracle;
use intloc_core::IntervalQuery;
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 241;
const MAX_DEMO_N: u32 = 512;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

/// Comma-separated zoo member names.
#[wasm_bindgen]
pub fn zoo_names() -> String {
    zoo().iter().map(|d| d.name()).collect::<Vec<_>>().join(",")
}

/// Rows `[x, stone, refined, fft, fft_half_width]` for `|x| ≤ 5√n`.
pub fn interval_curve_rows(dist: &str, n: u32, delta: f64, h: f64) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_DEMO_N {
        return Err(format!("n must lie in 1..={MAX_DEMO_N}"));
    }
    let d = builtin(dist).map_err(|e| e.to_string())?;
    let n = u64::from(n);
    let oracle = FftOracle::new(&d, n, h).map_err(|e| e.to_string())?;
    let reach = 5.0 * (n as f64).sqrt();
    let mut out = Vec::with_capacity(5 * CURVE_POINTS);
    for k in 0..CURVE_POINTS {
        let x = -reach + 2.0 * reach * k as f64 / (CURVE_POINTS - 1) as f64;
        let q = IntervalQuery::new(n, x, delta).map_err(|e| e.to_string())?;
        let est = oracle.estimate(x, delta);
        out.extend([
            x,
            stone_approx(&q),
            refined_approx(&d, &q).total,
            est.value,
            est.error_half_width,
        ]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn interval_curve(dist: &str, n: u32, delta: f64, h: f64) -> Result<Vec<f64>, JsError> {
    interval_curve_rows(dist, n, delta, h).map_err(js)
}

/// `[ρ̂, argmax, λ₀, |φ(λ₀)|, λ₁, |φ(λ₁)|, …]` on `[0, lambda_max]`, with
/// `ρ̂ = sup |φ|` over `[epsilon, lambda_max]`.
pub fn chf_modulus_rows(
    dist: &str,
    epsilon: f64,
    lambda_max: f64,
    points: u32,
) -> Result<Vec<f64>, String> {
    let d = builtin(dist).map_err(|e| e.to_string())?;
    let points = points.clamp(2, 20_000) as usize;
    let step = (lambda_max / 10_000.0).clamp(1e-4, 1e-2);
    let scan = cramer_sup(&d, epsilon, lambda_max, step).map_err(|e| e.to_string())?;
    let mut out = vec![scan.rho_hat, scan.argmax];
    for k in 0..points {
        let l = lambda_max * k as f64 / (points - 1) as f64;
        out.extend([l, d.chf(l).norm()]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn chf_modulus(
    dist: &str,
    epsilon: f64,
    lambda_max: f64,
    points: u32,
) -> Result<Vec<f64>, JsError> {
    chf_modulus_rows(dist, epsilon, lambda_max, points).map_err(js)
}

/// Rows `[n, sup_refined, sup_stone]` for `n = 4, 8, …, max_n`, then
/// `[refined_slope, refined_r2, stone_slope, stone_r2]`.
pub fn error_decay_rows(dist: &str, delta: f64, max_n: u32) -> Result<Vec<f64>, String> {
    if !(8..=MAX_DEMO_N).contains(&max_n) {
        return Err(format!("max_n must lie in 8..={MAX_DEMO_N}"));
    }
    let ns: Vec<u64> = (2..=max_n.ilog2()).map(|k| 1u64 << k).collect();
    let mut cfg = SweepConfig::new(dist, ns.clone(), delta);
    cfg.grid_s = 0.1;
    cfg.h = 2e-3;
    let mut out = Vec::new();
    let (mut refined, mut stone) = (Vec::new(), Vec::new());
    for &n in &ns {
        let points = oracle_points(&cfg, n).map_err(|e| e.to_string())?;
        let r = score_points(&cfg, n, ApproxChoice::Refined, &points).map_err(|e| e.to_string())?;
        let s = score_points(&cfg, n, ApproxChoice::Stone, &points).map_err(|e| e.to_string())?;
        out.extend([n as f64, r.sup(), s.sup()]);
        refined.push((n, r.sup()));
        stone.push((n, s.sup()));
    }
    let rf = rate_fit(&refined).map_err(|e| e.to_string())?;
    let sf = rate_fit(&stone).map_err(|e| e.to_string())?;
    out.extend([rf.slope, rf.r_squared, sf.slope, sf.r_squared]);
    Ok(out)
}

#[wasm_bindgen]
pub fn error_decay(dist: &str, delta: f64, max_n: u32) -> Result<Vec<f64>, JsError> {
    error_decay_rows(dist, delta, max_n).map_err(js)
}
