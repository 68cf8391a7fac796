//! Browser bindings: fibre rate curve, repeater curve and an intercept-resend session.
//!
//! Curves come back as flat `Float64Array`s of interleaved columns.

use wasm_bindgen::prelude::*;

use qkd_core::analytics::{distance_sweep, max_secure_distance, repeater_net_rate, SystemParams};
use qkd_core::attacks::AttackStrategy;
use qkd_core::photonics::{db_to_transmission, FaintPulseSource};
use qkd_core::protocols::{run_session, SessionConfig, Source};

fn link(mu: f64, alpha: f64, eta: f64, p_dark: f64) -> SystemParams {
    SystemParams {
        mu,
        alpha,
        eta,
        p_dark,
        ..SystemParams::band_1550()
    }
}

/// `(length, r_net, qber)` triples from 0 to `l_max`, then the max secure distance last (NaN if none).
pub fn rate_curve_impl(mu: f64, alpha: f64, eta: f64, p_dark: f64, l_max: f64, step: f64) -> Result<Vec<f64>, String> {
    let p = link(mu, alpha, eta, p_dark);
    let sweep = distance_sweep(&p, 0.0, l_max, step).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = sweep.points.iter().flat_map(|(l, r)| [*l, r.r_net, r.qber]).collect();
    out.push(max_secure_distance(&p).map_err(|e| e.to_string())?.unwrap_or(f64::NAN));
    Ok(out)
}

/// `(length, rho_net)` pairs for one section count.
pub fn repeater_curve_impl(sections: u32, alpha: f64, eta: f64, p_dark: f64, l_max: f64, step: f64) -> Result<Vec<f64>, String> {
    let n = qkd_core::analytics::grid_len(0.0, l_max, step).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let l = i as f64 * step;
        let r = repeater_net_rate(sections, db_to_transmission(alpha * l), eta, p_dark).map_err(|e| e.to_string())?;
        out.extend([l, r.rho_net]);
    }
    Ok(out)
}

/// Lossless BB84 with `mu = 1` under intercept-resend: `[sifted, qber, eve_agreement]`.
pub fn intercept_resend_impl(n_pulses: u32, fraction: f64, seed: u32) -> Result<Vec<f64>, String> {
    let mut cfg = SessionConfig::bb84(n_pulses as usize, u64::from(seed));
    cfg.source = Source::FaintPulse(FaintPulseSource { mu: 1.0, f_rep: 1e6 });
    cfg.attack = AttackStrategy::InterceptResend { fraction };
    let res = run_session(&cfg).map_err(|e| e.to_string())?;
    Ok(vec![res.sifted_count as f64, res.qber(), res.eve_agreement().unwrap_or(f64::NAN)])
}

#[wasm_bindgen]
pub fn rate_curve(mu: f64, alpha: f64, eta: f64, p_dark: f64, l_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    rate_curve_impl(mu, alpha, eta, p_dark, l_max, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn repeater_curve(sections: u32, alpha: f64, eta: f64, p_dark: f64, l_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    repeater_curve_impl(sections, alpha, eta, p_dark, l_max, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn intercept_resend(n_pulses: u32, fraction: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    intercept_resend_impl(n_pulses, fraction, seed).map_err(|e| JsError::new(&e))
}
