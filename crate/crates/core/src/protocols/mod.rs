//! Seeded Monte Carlo sessions for the BB84 family.
//!
//! A session is a sequential pulse loop driven by one ChaCha stream, so the
//! same [`SessionConfig`] always yields a bit-identical [`SessionResult`].
//! Independent sessions can run concurrently, each with its own seed.

mod b92;
mod bob;
mod epr;
mod phase;
mod predict;
mod prepare_measure;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

pub use b92::run_b92_session;
pub use epr::{chsh_from_records, run_epr_session};
pub use phase::{phase_to_outcome, PhaseOutcome};
pub use predict::{predict_session, SessionPrediction};

use crate::analytics::SystemParams;
use crate::attacks::{AttackStrategy, EveRecord};
use crate::error::{QkdError, Result};
use crate::infomath::{BasisId, BitString, MeasurementBasis, Probability};
use crate::photonics::{Detector, FaintPulseSource, FiberChannel, PairSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Bb84,
    B92,
    SixState,
    EprBb84,
    Ekert3Basis,
}

impl ProtocolKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bb84" => Some(Self::Bb84),
            "b92" => Some(Self::B92),
            "sixstate" | "6state" => Some(Self::SixState),
            "eprbb84" | "epr" | "bbm92" => Some(Self::EprBb84),
            "ekert" | "ekert3basis" | "e91" => Some(Self::Ekert3Basis),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Bb84 => "bb84",
            Self::B92 => "b92",
            Self::SixState => "six-state",
            Self::EprBb84 => "epr-bb84",
            Self::Ekert3Basis => "ekert",
        }
    }

    pub fn is_entanglement_based(&self) -> bool {
        matches!(self, Self::EprBb84 | Self::Ekert3Basis)
    }

    /// Bases Alice picks from (for entanglement-based protocols, Alice's analyser settings).
    pub fn alice_bases(&self) -> Vec<MeasurementBasis> {
        match self {
            Self::Bb84 | Self::EprBb84 => vec![MeasurementBasis::Z, MeasurementBasis::X],
            Self::SixState => vec![MeasurementBasis::Z, MeasurementBasis::X, MeasurementBasis::Y],
            Self::Ekert3Basis => [0.0, FRAC_PI_4, FRAC_PI_2]
                .into_iter()
                .map(MeasurementBasis::custom)
                .collect(),
            Self::B92 => Vec::new(),
        }
    }

    pub fn bob_bases(&self) -> Vec<MeasurementBasis> {
        match self {
            Self::Ekert3Basis => [FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4]
                .into_iter()
                .map(MeasurementBasis::custom)
                .collect(),
            other => other.alice_bases(),
        }
    }
}

/// Probability that Alice's and Bob's independent uniform basis choices
/// coincide. `None` for B92, where the conclusive fraction plays that role.
pub fn basis_match_prob(kind: ProtocolKind) -> Option<Probability> {
    let alice = kind.alice_bases();
    let bob = kind.bob_bases();
    if alice.is_empty() {
        return None;
    }
    let matches = alice
        .iter()
        .flat_map(|a| bob.iter().map(move |b| (a, b)))
        .filter(|(a, b)| a.id == b.id)
        .count();
    Probability::new(matches as f64 / (alice.len() * bob.len()) as f64).ok()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    FaintPulse(FaintPulseSource),
    Pair(PairSource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub protocol: ProtocolKind,
    pub n_pulses: usize,
    pub source: Source,
    pub channel: FiberChannel,
    pub detector: Detector,
    /// 2 per basis choice for active choice; twice the basis count means passive choice.
    pub n_det: u32,
    /// Fraction of arriving photons that interfere (1 or 1/2).
    pub q: f64,
    pub attack: AttackStrategy,
    pub seed: u64,
    /// Hilbert-space angle between the two B92 states (π/4 is the BB84 pair).
    pub b92_theta: f64,
}

impl SessionConfig {
    /// Lossless, noiseless BB84 with `mu = 0.1` and no eavesdropper.
    pub fn bb84(n_pulses: usize, seed: u64) -> Self {
        SessionConfig {
            protocol: ProtocolKind::Bb84,
            n_pulses,
            source: Source::FaintPulse(FaintPulseSource {
                mu: 0.1,
                f_rep: 1e7,
            }),
            channel: FiberChannel {
                alpha: 0.0,
                length: 0.0,
            },
            detector: Detector::PERFECT,
            n_det: 2,
            q: 1.0,
            attack: AttackStrategy::None,
            seed,
            b92_theta: FRAC_PI_4,
        }
    }

    /// BB84 over the link described by `p`. The optical error and accidental
    /// terms have no pulse-level counterpart and are ignored.
    pub fn from_system(p: &SystemParams, n_pulses: usize, seed: u64) -> Self {
        SessionConfig {
            source: Source::FaintPulse(FaintPulseSource {
                mu: p.mu,
                f_rep: p.f_rep,
            }),
            channel: FiberChannel {
                alpha: p.alpha,
                length: p.length,
            },
            detector: Detector {
                eta: p.eta,
                p_dark: p.p_dark,
            },
            n_det: p.n_det,
            q: p.q,
            ..SessionConfig::bb84(n_pulses, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(QkdError::config("n_pulses", "must be > 0"));
        }
        if self.q != 1.0 && self.q != 0.5 {
            return Err(QkdError::config("q", format!("must be 1 or 0.5, got {}", self.q)));
        }
        if self.n_det == 0 {
            return Err(QkdError::config("n_det", "must be >= 1"));
        }
        match self.source {
            Source::FaintPulse(s) => {
                FaintPulseSource::new(s.mu, s.f_rep)?;
                if self.protocol.is_entanglement_based() {
                    return Err(QkdError::config(
                        "source",
                        "entanglement-based protocols need a pair source",
                    ));
                }
            }
            Source::Pair(p) => {
                PairSource::new(p.p_acc, p.mu_eff)?;
                if !self.protocol.is_entanglement_based() {
                    return Err(QkdError::config(
                        "source",
                        "prepare-and-measure protocols need a faint-pulse source",
                    ));
                }
            }
        }
        FiberChannel::new(self.channel.alpha, self.channel.length)?;
        Detector::new(self.detector.eta, self.detector.p_dark)?;
        self.attack.validate()?;
        if self.protocol == ProtocolKind::B92 && !(0.0..=FRAC_PI_2).contains(&self.b92_theta) {
            return Err(QkdError::config("b92_theta", "must lie in [0, pi/2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecordTags {
    pub multiphoton: bool,
    /// Bob's click came from dark counts only.
    pub dark_count_origin: bool,
    pub accidental_pair: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub alice_bit: u8,
    pub alice_basis: BasisId,
    pub bob_basis: BasisId,
    pub detected: bool,
    /// Present exactly when `detected`.
    pub bob_bit: Option<u8>,
    pub eve: Option<EveRecord>,
    pub tags: RecordTags,
}

impl PulseRecord {
    pub fn is_sifted(&self) -> bool {
        self.detected && self.alice_basis == self.bob_basis
    }

    pub fn is_error(&self) -> bool {
        self.bob_bit.is_some_and(|b| b != self.alice_bit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub n_pulses: usize,
    pub records: Vec<PulseRecord>,
    pub raw_count: usize,
    pub sifted_count: usize,
    pub error_count: usize,
    /// `error_count / sifted_count`, or `None` when nothing was sifted.
    pub qber_estimate: Option<Probability>,
}

impl SessionResult {
    pub(crate) fn from_records(records: Vec<PulseRecord>) -> Self {
        let raw_count = records.iter().filter(|r| r.detected).count();
        let sifted: Vec<_> = records.iter().filter(|r| r.is_sifted()).collect();
        let sifted_count = sifted.len();
        let error_count = sifted.iter().filter(|r| r.is_error()).count();
        let qber_estimate = (sifted_count > 0)
            .then(|| Probability::new(error_count as f64 / sifted_count as f64).expect("ratio"));
        SessionResult {
            n_pulses: records.len(),
            records,
            raw_count,
            sifted_count,
            error_count,
            qber_estimate,
        }
    }

    pub fn qber(&self) -> f64 {
        self.qber_estimate.map_or(0.0, Probability::value)
    }

    /// Sifted bits per emitted pulse.
    pub fn sift_rate(&self) -> f64 {
        self.sifted_count as f64 / self.n_pulses as f64
    }

    /// Error fraction over every detected bit, before basis reconciliation.
    pub fn raw_error_fraction(&self) -> f64 {
        let errors = self.records.iter().filter(|r| r.is_error()).count();
        if self.raw_count == 0 {
            0.0
        } else {
            errors as f64 / self.raw_count as f64
        }
    }

    /// `(agreements, attacked)` between Eve's guess and Alice's bit over sifted
    /// records Eve holds a record for.
    pub fn eve_agreement_counts(&self) -> (usize, usize) {
        self.records
            .iter()
            .filter(|r| r.is_sifted())
            .filter_map(|r| r.eve.map(|e| e.guess == r.alice_bit))
            .fold((0, 0), |(a, n), hit| (a + usize::from(hit), n + 1))
    }

    pub fn eve_agreement(&self) -> Option<f64> {
        let (a, n) = self.eve_agreement_counts();
        (n > 0).then(|| a as f64 / n as f64)
    }

    /// Eve's guesses aligned with the sifted key; `None` where she holds nothing.
    pub fn sifted_eve_guesses(&self) -> Vec<Option<u8>> {
        self.records
            .iter()
            .filter(|r| r.is_sifted())
            .map(|r| r.eve.map(|e| e.guess))
            .collect()
    }
}

/// Runs a session, dispatching on the protocol.
pub fn run_session(cfg: &SessionConfig) -> Result<SessionResult> {
    cfg.validate()?;
    match cfg.protocol {
        ProtocolKind::Bb84 | ProtocolKind::SixState => prepare_measure::run(cfg),
        ProtocolKind::B92 => b92::run(cfg),
        ProtocolKind::EprBb84 | ProtocolKind::Ekert3Basis => epr::run(cfg),
    }
}

/// Alice's and Bob's sifted keys: detected records whose bases match.
pub fn sift(records: &[PulseRecord]) -> (BitString, BitString) {
    records
        .iter()
        .filter(|r| r.is_sifted())
        .map(|r| (r.alice_bit, r.bob_bit.expect("detected record carries a bit")))
        .unzip::<u8, u8, BitString, BitString>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_for;
    use crate::tol;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn basis_match_examples() {
        assert_eq!(basis_match_prob(ProtocolKind::Bb84).unwrap().value(), 0.5);
        assert_abs_diff_eq!(basis_match_prob(ProtocolKind::SixState).unwrap().value(), 1.0 / 3.0);
        assert_abs_diff_eq!(basis_match_prob(ProtocolKind::Ekert3Basis).unwrap().value(), 2.0 / 9.0);
        assert_eq!(basis_match_prob(ProtocolKind::EprBb84).unwrap().value(), 0.5);
        assert!(basis_match_prob(ProtocolKind::B92).is_none());
    }

    fn record(alice_basis: BasisId, bob_basis: BasisId, detected: bool, bit: u8) -> PulseRecord {
        PulseRecord {
            alice_bit: bit,
            alice_basis,
            bob_basis,
            detected,
            bob_bit: detected.then_some(bit),
            eve: None,
            tags: RecordTags::default(),
        }
    }

    #[test]
    fn sift_keeps_detected_matching_records() {
        let all: Vec<_> = (0..10).map(|i| record(BasisId::Z, BasisId::Z, true, (i % 2) as u8)).collect();
        let (a, b) = sift(&all);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);

        let none: Vec<_> = (0..10).map(|_| record(BasisId::Z, BasisId::X, true, 1)).collect();
        let (a, b) = sift(&none);
        assert!(a.is_empty() && b.is_empty());

        let mixed = vec![
            record(BasisId::Z, BasisId::Z, false, 0),
            record(BasisId::X, BasisId::X, true, 1),
        ];
        assert_eq!(sift(&mixed).0.as_slice(), &[1]);
    }

    #[test]
    fn sift_fraction_matches_basis_match_probability() {
        let mut rng = rng_for(17, 0);
        let n = 100_000;
        for kind in [ProtocolKind::Bb84, ProtocolKind::SixState, ProtocolKind::Ekert3Basis] {
            let alice = kind.alice_bases();
            let bob = kind.bob_bases();
            let records: Vec<_> = (0..n)
                .map(|_| {
                    let a = alice[rng.random_range(0..alice.len())].id;
                    let b = bob[rng.random_range(0..bob.len())].id;
                    record(a, b, true, 0)
                })
                .collect();
            let p = basis_match_prob(kind).unwrap().value();
            let kept = sift(&records).0.len() as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((kept - p).abs() <= tol::SIGMAS * sigma, "{kind:?}: {kept}");
        }
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = SessionConfig::bb84(10, 1);
        cfg.q = 0.7;
        assert!(matches!(cfg.validate(), Err(QkdError::Config { field, .. }) if field == "q"));
        let mut cfg = SessionConfig::bb84(0, 1);
        cfg.n_pulses = 0;
        assert!(matches!(cfg.validate(), Err(QkdError::Config { field, .. }) if field == "n_pulses"));
        let mut cfg = SessionConfig::bb84(10, 1);
        cfg.source = Source::FaintPulse(FaintPulseSource { mu: -1.0, f_rep: 1.0 });
        assert!(matches!(run_session(&cfg), Err(QkdError::Config { field, .. }) if field == "mu"));
        let mut cfg = SessionConfig::bb84(10, 1);
        cfg.protocol = ProtocolKind::EprBb84;
        assert!(matches!(cfg.validate(), Err(QkdError::Config { field, .. }) if field == "source"));
    }
}
