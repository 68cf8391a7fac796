//! Closed-form rate and QBER models, security thresholds, repeater scaling
//! and the CHSH connection.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::attacks::{beamsplitter_exposure, symmetric_attack_info};
use crate::error::{check_closed, QkdError, Result};
use crate::infomath::{entropy_unchecked, mutual_info_bob};
use crate::photonics::{db_to_transmission, fiber_transmission, FiberChannel};
use crate::tol;

/// Source of the optical error term: given directly or through the visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpticalError {
    POpt(f64),
    Visibility(f64),
}

/// Which eavesdropper bounds the secret fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecurityCriterion {
    /// Optimal individual attack: `I_AE = 1 − h((1 + sin x)/2)`.
    #[default]
    Individual,
    /// Coherent attacks: `I_AE = h(D)`, so the rate `1 − 2h(D)` closes at about 11%.
    Coherent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub mu: f64,
    /// Pulse repetition rate (Hz).
    pub f_rep: f64,
    pub q: f64,
    /// Fibre attenuation (dB/km).
    pub alpha: f64,
    /// Fibre length (km).
    pub length: f64,
    pub eta: f64,
    /// Dark-count probability per gate and detector.
    pub p_dark: f64,
    /// Detectors gated per pulse: 2 for active basis choice, 4 for passive.
    pub n_det: u32,
    pub optical: OpticalError,
    pub p_acc: f64,
    pub criterion: SecurityCriterion,
}

impl SystemParams {
    /// Faint-pulse link at 1550 nm: 0.25 dB/km, 10% efficiency, dark counts 1e-5.
    pub fn band_1550() -> Self {
        SystemParams {
            mu: 0.1,
            f_rep: 1e7,
            q: 1.0,
            alpha: 0.25,
            length: 0.0,
            eta: 0.1,
            p_dark: 1e-5,
            n_det: 2,
            optical: OpticalError::POpt(0.0),
            p_acc: 0.0,
            criterion: SecurityCriterion::Individual,
        }
    }

    /// The 1550 nm link with `mu = 1` at 1 MHz.
    pub fn band_1550_single() -> Self {
        SystemParams {
            mu: 1.0,
            f_rep: 1e6,
            ..Self::band_1550()
        }
    }

    /// 1300 nm: 0.35 dB/km, 20% efficiency, dark counts 1e-5.
    pub fn band_1300() -> Self {
        SystemParams {
            alpha: 0.35,
            eta: 0.2,
            ..Self::band_1550()
        }
    }

    /// 800 nm: 2 dB/km, 50% efficiency, dark counts 1e-7.
    pub fn band_800() -> Self {
        SystemParams {
            alpha: 2.0,
            eta: 0.5,
            p_dark: 1e-7,
            ..Self::band_1550()
        }
    }

    pub fn with_length(self, length: f64) -> Self {
        SystemParams { length, ..self }
    }

    pub fn p_opt(&self) -> f64 {
        match self.optical {
            OpticalError::POpt(p) => p,
            OpticalError::Visibility(v) => qber_opt_from_visibility(v).unwrap_or(f64::NAN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QkdError::config(field, format!("must be > 0, got {v}")))
            }
        };
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(QkdError::config(field, format!("must lie in [0, 1], got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("f_rep", self.f_rep)?;
        if self.q != 1.0 && self.q != 0.5 {
            return Err(QkdError::config("q", format!("must be 1 or 0.5, got {}", self.q)));
        }
        FiberChannel::new(self.alpha, self.length)?;
        unit("eta", self.eta)?;
        if !(0.0..1.0).contains(&self.p_dark) {
            return Err(QkdError::config("p_dark", format!("must lie in [0, 1), got {}", self.p_dark)));
        }
        if self.n_det == 0 {
            return Err(QkdError::config("n_det", "must be >= 1"));
        }
        match self.optical {
            OpticalError::POpt(p) => unit("p_opt", p)?,
            OpticalError::Visibility(v) => unit("visibility", v)?,
        }
        if !(0.0..1.0).contains(&self.p_acc) {
            return Err(QkdError::config("p_acc", format!("must lie in [0, 1), got {}", self.p_acc)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub t_link: f64,
    pub r_raw: f64,
    pub r_sift: f64,
    pub r_opt: f64,
    pub r_det: f64,
    pub r_acc: f64,
    pub qber: f64,
    pub qber_opt: f64,
    pub qber_det: f64,
    pub qber_acc: f64,
    pub i_ab: f64,
    pub i_ae_max: f64,
    /// Net key rate after error correction and privacy amplification (Hz), clamped at 0.
    pub r_net: f64,
}

/// Information terms for the chosen criterion. Error rates beyond 1/2 carry no key.
fn information(qber: f64, criterion: SecurityCriterion) -> (f64, f64) {
    if qber >= 0.5 {
        return (0.0, 1.0);
    }
    let i_ab = mutual_info_bob(qber).expect("qber in [0, 0.5)");
    let i_ae = match criterion {
        SecurityCriterion::Individual => symmetric_attack_info(qber).expect("qber in [0, 0.5)"),
        SecurityCriterion::Coherent => entropy_unchecked(qber),
    };
    (i_ab, i_ae)
}

pub fn rate_model(p: &SystemParams) -> Result<RateReport> {
    p.validate()?;
    let t = fiber_transmission(&FiberChannel {
        alpha: p.alpha,
        length: p.length,
    })
    .value();
    let n = f64::from(p.n_det);
    let p_opt = p.p_opt();
    let r_raw = p.q * p.f_rep * p.mu * t * p.eta;
    let r_sift = 0.5 * r_raw;
    let r_opt = r_sift * p_opt;
    let r_det = 0.25 * p.f_rep * p.p_dark * n;
    let r_acc = 0.25 * p.p_acc * p.f_rep * t * n * p.eta;
    let qber_opt = p_opt;
    let qber_det = if r_sift > 0.0 {
        p.p_dark * n / (t * p.eta * 2.0 * p.q * p.mu)
    } else if p.p_dark > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let qber_acc = p.p_acc / (2.0 * p.q * p.mu);
    let qber = qber_opt + qber_det + qber_acc;
    let (i_ab, i_ae_max) = information(qber, p.criterion);
    Ok(RateReport {
        t_link: t,
        r_raw,
        r_sift,
        r_opt,
        r_det,
        r_acc,
        qber,
        qber_opt,
        qber_det,
        qber_acc,
        i_ab,
        i_ae_max,
        r_net: r_sift * (i_ab - i_ae_max).max(0.0),
    })
}

pub fn qber_opt_from_visibility(v: f64) -> Result<f64> {
    check_closed("visibility", v, 0.0, 1.0, "[0, 1]")?;
    Ok((1.0 - v) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSweep {
    pub points: Vec<(f64, RateReport)>,
    /// First grid length with zero net rate.
    pub max_secure_distance: Option<f64>,
}

/// Number of grid points in `[min, max]` with spacing `step`, endpoints included.
pub fn grid_len(min: f64, max: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && max >= min && min.is_finite() && max.is_finite()) {
        return Err(QkdError::Usage(format!(
            "invalid sweep range [{min}, {max}] with step {step}"
        )));
    }
    Ok(((max - min) / step + 1e-9).floor() as usize + 1)
}

pub fn distance_sweep(p: &SystemParams, l_min: f64, l_max: f64, step: f64) -> Result<DistanceSweep> {
    let n = grid_len(l_min, l_max, step)?;
    let points = (0..n)
        .map(|i| {
            let l = l_min + i as f64 * step;
            rate_model(&p.with_length(l)).map(|r| (l, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_secure_distance = points.iter().find(|(_, r)| r.r_net == 0.0).map(|(l, _)| *l);
    Ok(DistanceSweep {
        points,
        max_secure_distance,
    })
}

/// Bisection for the last point of `[lo, hi]` where `positive` holds,
/// assuming it holds on a prefix of the interval.
fn last_true(mut lo: f64, mut hi: f64, positive: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Length (km) at which the net rate closes, found by bisection on `[0, 2000]`.
pub fn max_secure_distance(p: &SystemParams) -> Result<Option<f64>> {
    let rate = |l: f64| rate_model(&p.with_length(l)).map(|r| r.r_net);
    if rate(0.0)? <= 0.0 {
        return Ok(None);
    }
    if rate(2000.0)? > 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some(last_true(0.0, 2000.0, |l| rate(l).is_ok_and(|r| r > 0.0))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeaterPoint {
    pub rho_net: f64,
    pub qber: f64,
    pub p_raw: f64,
    pub p_det: f64,
}

/// Segmented link: `n_sections` detector stages sharing total transmission `t_link`.
pub fn repeater_net_rate(n_sections: u32, t_link: f64, eta: f64, p_dark: f64) -> Result<RepeaterPoint> {
    if n_sections == 0 {
        return Err(QkdError::domain("n_sections", 0.0, "[1, inf)"));
    }
    check_closed("t_link", t_link, 0.0, 1.0, "[0, 1]")?;
    check_closed("eta", eta, 0.0, 1.0, "[0, 1]")?;
    check_closed("p_dark", p_dark, 0.0, 1.0, "[0, 1)")?;
    let n = n_sections as i32;
    let seg = t_link.powf(1.0 / f64::from(n_sections)) * eta;
    let p_raw = t_link * eta.powi(n);
    let p_det = (seg + (1.0 - seg) * p_dark).powi(n) - p_raw;
    let total = p_raw + p_det;
    let qber = if total > 0.0 { p_det / total } else { 0.0 };
    Ok(RepeaterPoint {
        rho_net: total * (1.0 - qber / REPEATER_QBER_LIMIT).max(0.0),
        qber,
        p_raw,
        p_det,
    })
}

/// Error rate at which the simplified repeater secret fraction `1 − QBER/0.15` vanishes.
pub const REPEATER_QBER_LIMIT: f64 = 0.15;

/// Distance (km) at which the repeater net rate reaches zero.
pub fn repeater_cutoff(n_sections: u32, alpha: f64, eta: f64, p_dark: f64) -> Result<f64> {
    let rho = |l: f64| repeater_net_rate(n_sections, db_to_transmission(alpha * l), eta, p_dark);
    rho(0.0)?;
    Ok(last_true(0.0, 5000.0, |l| rho(l).is_ok_and(|r| r.rho_net > 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Coherent-attack bound: root of `h(D) = 1/2`.
    pub d_coherent: f64,
    /// Crossing of Bob's and Eve's individual-attack information.
    pub d0: f64,
    /// Intercept-resend on every pulse disentangles Alice and Bob.
    pub d_ir_disentangle: f64,
    /// Limit of advantage distillation against the individual attack, `1 − 1/√2`.
    pub d_ad_limit: f64,
}

impl Thresholds {
    /// `(name, value)` pairs in ascending order.
    pub fn ascending(&self) -> [(&'static str, f64); 4] {
        [
            ("d_coherent", self.d_coherent),
            ("d0", self.d0),
            ("d_ir_disentangle", self.d_ir_disentangle),
            ("d_ad_limit", self.d_ad_limit),
        ]
    }
}

pub fn security_thresholds() -> Thresholds {
    let d_coherent = last_true(0.0, 0.5, |d| entropy_unchecked(d) < 0.5);
    Thresholds {
        d_coherent,
        d0: tol::D0,
        d_ir_disentangle: 0.25,
        d_ad_limit: 1.0 - FRAC_1_SQRT_2,
    }
}

/// Largest CHSH value compatible with error rate `d`, `(1 − 2D) 2√2`.
pub fn chsh_smax(d: f64) -> Result<f64> {
    check_closed("D", d, 0.0, 0.5, "[0, 0.5]")?;
    Ok((1.0 - 2.0 * d) * 2.0 * SQRT_2)
}

/// Information exclusion: totals over `n_qubits` satisfy `I_AB + I_AE <= n`.
pub fn theorem2_check(i_ab: f64, i_ae: f64, n_qubits: u32) -> bool {
    i_ab + i_ae <= f64::from(n_qubits) + 1e-9
}

/// How multiphoton pulses are charged when choosing `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiphotonAccounting {
    #[default]
    Ignore,
    /// Detections a beamsplitter attacker could have resent are removed from the key.
    Beamsplitter,
}

fn net_rate_at(p: &SystemParams, mu: f64, acc: MultiphotonAccounting) -> f64 {
    let Ok(r) = rate_model(&SystemParams { mu, ..*p }) else {
        return 0.0;
    };
    match acc {
        MultiphotonAccounting::Ignore => r.r_net,
        MultiphotonAccounting::Beamsplitter => {
            let exposed = if r.t_link > 0.0 { beamsplitter_exposure(mu, r.t_link) } else { 1.0 };
            r.r_sift * (r.i_ab - r.i_ae_max - exposed).max(0.0)
        }
    }
}

/// Mean photon number in `(0, 1]` maximising the net rate, to 1e-4.
/// `None` when no `mu` gives a positive rate.
pub fn optimal_mu_for(p: &SystemParams, acc: MultiphotonAccounting) -> Option<f64> {
    const GRID: usize = 1000;
    let f = |mu: f64| net_rate_at(p, mu, acc);
    let (best_i, best) = (1..=GRID)
        .map(|i| (i, f(i as f64 / GRID as f64)))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best <= 0.0 {
        return None;
    }
    // Golden-section refinement inside the bracketing grid cells.
    let step = 1.0 / GRID as f64;
    let mut lo = (best_i as f64 - 1.0) * step;
    let mut hi = ((best_i as f64 + 1.0) * step).min(1.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-7 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mu = 0.5 * (lo + hi);
    Some(if f(mu) >= best { mu } else { best_i as f64 * step })
}

/// [`optimal_mu_for`] for a 10 MHz active-choice faint-pulse link with no optical error.
pub fn optimal_mu(alpha: f64, length: f64, eta: f64, p_dark: f64, n_det: u32) -> Option<f64> {
    let p = SystemParams {
        alpha,
        length,
        eta,
        p_dark,
        n_det,
        ..SystemParams::band_1550()
    };
    optimal_mu_for(&p, MultiphotonAccounting::Ignore)
}
