//! Physical layer: photon-number statistics of the sources, fibre attenuation
//! and gated single-photon detectors.
//!
//! Detectors are modelled per gate: every incident photon is registered
//! independently with efficiency `eta`, and a dark count fires independently
//! with probability `p_dark`. Dead time and afterpulsing are not modelled.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{check_closed, QkdError, Result};
use crate::infomath::Probability;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.62607e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792e8;

/// Attenuated laser emitting Poisson-distributed photon numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaintPulseSource {
    pub mu: f64,
    pub f_rep: f64,
}

impl FaintPulseSource {
    pub fn new(mu: f64, f_rep: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(QkdError::config("mu", format!("must be > 0, got {mu}")));
        }
        if !(f_rep > 0.0 && f_rep.is_finite()) {
            return Err(QkdError::config("f_rep", format!("must be > 0, got {f_rep}")));
        }
        Ok(FaintPulseSource { mu, f_rep })
    }

    pub fn photon_number_distribution(&self) -> Poisson<f64> {
        Poisson::new(self.mu).expect("mu validated at construction")
    }
}

/// Photon-pair source described at the level of its statistics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSource {
    /// Probability of an accidental second pair in the same time window.
    pub p_acc: f64,
    /// Probability that the partner photon is actually coupled into the link.
    pub mu_eff: f64,
}

impl PairSource {
    pub const DEFAULT_MU_EFF: f64 = 2.0 / 3.0;

    pub fn new(p_acc: f64, mu_eff: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p_acc) {
            return Err(QkdError::config("p_acc", format!("must lie in [0, 1), got {p_acc}")));
        }
        if !(mu_eff > 0.0 && mu_eff <= 1.0) {
            return Err(QkdError::config("mu_eff", format!("must lie in (0, 1], got {mu_eff}")));
        }
        Ok(PairSource { p_acc, mu_eff })
    }
}

impl Default for PairSource {
    fn default() -> Self {
        PairSource {
            p_acc: 0.0,
            mu_eff: Self::DEFAULT_MU_EFF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberChannel {
    /// Attenuation, dB/km.
    pub alpha: f64,
    /// Length, km.
    pub length: f64,
}

impl FiberChannel {
    pub fn new(alpha: f64, length: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(QkdError::config("alpha", format!("must be >= 0, got {alpha}")));
        }
        if !(length >= 0.0 && length.is_finite()) {
            return Err(QkdError::config("length", format!("must be >= 0, got {length}")));
        }
        Ok(FiberChannel { alpha, length })
    }

    pub fn loss_db(&self) -> f64 {
        self.alpha * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    pub eta: f64,
    pub p_dark: f64,
}

impl Detector {
    pub const PERFECT: Detector = Detector {
        eta: 1.0,
        p_dark: 0.0,
    };

    pub fn new(eta: f64, p_dark: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(QkdError::config("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if !(0.0..1.0).contains(&p_dark) {
            return Err(QkdError::config("p_dark", format!("must lie in [0, 1), got {p_dark}")));
        }
        Ok(Detector { eta, p_dark })
    }
}

pub fn poisson_photon_number<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(QkdError::domain("mu", mu, "(0, inf)"));
    }
    let dist = Poisson::new(mu).map_err(|_| QkdError::domain("mu", mu, "(0, inf)"))?;
    Ok(dist.sample(rng) as u64)
}

/// Poisson probability of exactly `n` photons at mean `mu`.
pub fn poisson_pmf(n: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mu.ln() - mu - ln_fact).exp()
}

/// `P(n > 1 | n > 0)` for Poisson statistics, `≈ mu/2` at small `mu`.
pub fn multiphoton_prob(mu: f64) -> Result<Probability> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(QkdError::domain("mu", mu, "(0, inf)"));
    }
    // expm1 keeps the small-mu limit accurate.
    let non_empty = -(-mu).exp_m1();
    let single = mu * (-mu).exp();
    Probability::new_lenient((non_empty - single) / non_empty)
}

/// Transmission `10^(-alpha L / 10)`.
pub fn fiber_transmission(ch: &FiberChannel) -> Probability {
    Probability::new_lenient(db_to_transmission(ch.loss_db())).unwrap_or(Probability::ZERO)
}

pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmission_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// Converts a loss given in percent to decibels.
pub fn loss_db_from_fraction(loss_percent: f64) -> Result<f64> {
    if !(0.0..100.0).contains(&loss_percent) {
        return Err(QkdError::domain("loss_percent", loss_percent, "[0, 100)"));
    }
    Ok(-10.0 * (1.0 - loss_percent / 100.0).log10())
}

/// Closed-form click probability for `photons` incident photons within one gate.
pub fn click_probability(photons: u64, det: &Detector) -> f64 {
    1.0 - (1.0 - det.eta).powf(photons as f64) * (1.0 - det.p_dark)
}

/// Samples one detector gate: each photon registers independently, plus an
/// independent dark count.
pub fn detector_click<R: Rng + ?Sized>(photons: u64, det: &Detector, rng: &mut R) -> bool {
    detector_gate(photons, det, rng).clicked()
}

/// Origin of the events in one detector gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Gate {
    pub photon: bool,
    pub dark: bool,
}

impl Gate {
    pub fn clicked(&self) -> bool {
        self.photon || self.dark
    }
}

pub fn detector_gate<R: Rng + ?Sized>(photons: u64, det: &Detector, rng: &mut R) -> Gate {
    let dark = det.p_dark > 0.0 && rng.random::<f64>() < det.p_dark;
    let photon = if det.eta >= 1.0 {
        photons > 0
    } else {
        (0..photons).any(|_| rng.random::<f64>() < det.eta)
    };
    Gate { photon, dark }
}

/// Noise-equivalent power `(h nu / eta) sqrt(2 R)` in W/√Hz for dark-count rate `R` (1/s).
pub fn nep(det: &Detector, dark_rate: f64, nu: f64) -> Result<f64> {
    check_closed("dark_rate", dark_rate, 0.0, f64::MAX, "[0, inf)")?;
    if !(det.eta > 0.0) {
        return Err(QkdError::domain("eta", det.eta, "(0, 1]"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(QkdError::domain("nu", nu, "(0, inf)"));
    }
    Ok(PLANCK * nu / det.eta * (2.0 * dark_rate).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_for;
    use crate::tol;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn poisson_sampling_matches_mass_and_mean() {
        let mut rng = rng_for(11, 0);
        let n = 1_000_000;
        let mut zeros = 0usize;
        let mut total = 0u64;
        for _ in 0..n {
            let k = poisson_photon_number(0.1, &mut rng).unwrap();
            zeros += usize::from(k == 0);
            total += k;
        }
        assert_abs_diff_eq!(zeros as f64 / n as f64, (-0.1f64).exp(), epsilon = 0.002);
        assert_abs_diff_eq!((-0.1f64).exp(), 0.9048, epsilon = 1e-4);
        assert_abs_diff_eq!(total as f64 / n as f64, 0.1, epsilon = 0.002);
    }

    #[test]
    fn poisson_rejects_non_positive_mean() {
        let mut rng = rng_for(1, 0);
        assert!(poisson_photon_number(0.0, &mut rng).is_err());
        assert!(poisson_photon_number(-1.0, &mut rng).is_err());
    }

    #[test]
    fn non_empty_probability_approaches_mu() {
        let mu = 1e-6;
        let p_non_empty = 1.0 - poisson_pmf(0, mu);
        assert!((p_non_empty / mu - 1.0).abs() < 1e-5);
    }

    #[test]
    fn multiphoton_examples() {
        assert_abs_diff_eq!(multiphoton_prob(0.1).unwrap().value(), 0.0492, epsilon = 5e-4);
        // mpmath reference
        assert_abs_diff_eq!(
            multiphoton_prob(0.1).unwrap().value(),
            0.049_166_805_522_494_25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(multiphoton_prob(0.02).unwrap().value(), 0.00997, epsilon = 1e-5);
        let mu = 1e-4;
        let p = multiphoton_prob(mu).unwrap().value();
        assert!((p - mu / 2.0).abs() < mu * mu);
        assert!(multiphoton_prob(0.0).is_err());
    }

    #[test]
    fn fiber_examples() {
        let t = fiber_transmission(&FiberChannel::new(2.0, 1.5).unwrap()).value();
        // "Half the photons after 1.5 km" rounds 3 dB to a factor 2: 10^-0.3 = 0.501187.
        assert_abs_diff_eq!(t, 0.5, epsilon = 2e-3);
        // The 1e-6 band holds at the exact half-power length.
        let half = 10.0 * 2f64.log10() / 2.0;
        let t = fiber_transmission(&FiberChannel::new(2.0, half).unwrap()).value();
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-6);
        assert_eq!(fiber_transmission(&FiberChannel::new(2.0, 0.0).unwrap()).value(), 1.0);
        assert_abs_diff_eq!(
            fiber_transmission(&FiberChannel::new(0.25, 40.0).unwrap()).value(),
            0.1,
            epsilon = 1e-15
        );
        assert!(FiberChannel::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn loss_conversion_examples() {
        assert_eq!(loss_db_from_fraction(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(loss_db_from_fraction(50.0).unwrap(), 3.0103, epsilon = 1e-4);
        assert_abs_diff_eq!(loss_db_from_fraction(90.0).unwrap(), 10.0, epsilon = 1e-12);
        assert!(loss_db_from_fraction(100.0).is_err());
    }

    #[test]
    fn detector_examples() {
        let mut rng = rng_for(5, 0);
        let quiet = Detector::new(0.3, 0.0).unwrap();
        assert!((0..10_000).all(|_| !detector_click(0, &quiet, &mut rng)));
        assert!((0..10_000).all(|_| detector_click(1, &Detector::PERFECT, &mut rng)));

        let det = Detector::new(0.1, 1e-4).unwrap();
        let n = 1_000_000;
        let clicks = (0..n).filter(|_| detector_click(1, &det, &mut rng)).count();
        assert_abs_diff_eq!(click_probability(1, &det), 0.10009, epsilon = 1e-12);
        assert_abs_diff_eq!(clicks as f64 / n as f64, 0.10009, epsilon = 0.001);
    }

    #[test]
    fn click_rates_match_closed_form_on_grid() {
        let mut rng = rng_for(6, 0);
        let n = 100_000;
        for photons in [0u64, 1, 2, 5] {
            for eta in [0.05, 0.5, 0.9] {
                for p_dark in [0.0, 1e-3, 0.05] {
                    let det = Detector::new(eta, p_dark).unwrap();
                    let p = click_probability(photons, &det);
                    let hits = (0..n).filter(|_| detector_click(photons, &det, &mut rng)).count();
                    let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                    let diff = (hits as f64 / n as f64 - p).abs();
                    assert!(diff <= tol::SIGMAS * sigma, "{photons} {eta} {p_dark}: {diff}");
                }
            }
        }
    }

    #[test]
    fn nep_examples() {
        let det = Detector::new(0.5, 0.0).unwrap();
        let nu = SPEED_OF_LIGHT / 700e-9;
        assert_eq!(nep(&det, 0.0, nu).unwrap(), 0.0);
        let n1 = nep(&det, 50.0, nu).unwrap();
        let n2 = nep(&det, 100.0, nu).unwrap();
        assert!((n2 / n1 - 2f64.sqrt()).abs() < 1e-12);
        let expected = PLANCK * nu / 0.5 * 10.0;
        assert!((n1 - expected).abs() <= 1e-12 * expected);
        assert!(nep(&Detector::new(0.0, 0.0).unwrap(), 50.0, nu).is_err());
    }

    proptest! {
        #[test]
        fn transmission_is_multiplicative(alpha in 0.0f64..3.0, l1 in 0.0f64..100.0, l2 in 0.0f64..100.0) {
            let t = |l| fiber_transmission(&FiberChannel::new(alpha, l).unwrap()).value();
            let joint = t(l1 + l2);
            prop_assert!((joint - t(l1) * t(l2)).abs() <= 1e-12);
        }

        #[test]
        // Beyond about 40 dB, 1 - t cancels and the percentage loses the digits needed for 1e-9 dB.
        fn loss_round_trips_through_percent(alpha in 0.01f64..2.0, l in 0.01f64..20.0) {
            let t = fiber_transmission(&FiberChannel::new(alpha, l).unwrap()).value();
            let db = loss_db_from_fraction(100.0 * (1.0 - t)).unwrap();
            prop_assert!((db - alpha * l).abs() <= 1e-9);
        }

        #[test]
        fn multiphoton_is_monotone(a in 0.001f64..5.0, b in 0.001f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(multiphoton_prob(lo).unwrap().value() <= multiphoton_prob(hi).unwrap().value() + 1e-15);
        }
    }
}
