//! Two-state protocol with exclusion tests.
//!
//! Alice encodes bit 0 as `+Z` and bit 1 as the state at Bloch angle `2θ`
//! from it. Bob picks one of the two states at random and projects onto its
//! orthogonal complement; a click excludes that state, so Bob records the
//! other one. Every conclusive event is kept.

use rand::Rng;

use super::{PulseRecord, RecordTags, SessionConfig, SessionResult, Source};
use crate::attacks::{apply_attack_with_bases, AttackStrategy, BB84_BASES};
use crate::error::{QkdError, Result};
use crate::infomath::{measure, BasisId, BlochVector, MeasurementBasis};
use crate::photonics::{detector_gate, fiber_transmission, poisson_photon_number};
use crate::rng_for;

/// Both sides use one label so that sifting keeps every conclusive event.
pub(crate) const B92_LABEL: BasisId = BasisId::Z;

/// The two signal states for a Hilbert-space separation `theta`.
pub(crate) fn b92_states(theta: f64) -> [BlochVector; 2] {
    [BlochVector::PLUS_Z, BlochVector::on_zx_circle(2.0 * theta)]
}

/// Runs a B92 session. Supports no attack, intercept-resend and Breidbart.
pub fn run_b92_session(cfg: &SessionConfig) -> Result<SessionResult> {
    cfg.validate()?;
    run(cfg)
}

pub(super) fn run(cfg: &SessionConfig) -> Result<SessionResult> {
    let Source::FaintPulse(src) = cfg.source else {
        return Err(QkdError::config("source", "expected a faint-pulse source"));
    };
    if !matches!(
        cfg.attack,
        AttackStrategy::None | AttackStrategy::InterceptResend { .. } | AttackStrategy::Breidbart { .. }
    ) {
        return Err(QkdError::Usage(format!(
            "{} attack is not modelled for B92",
            cfg.attack.name()
        )));
    }
    let mut rng = rng_for(cfg.seed, 0);
    let states = b92_states(cfg.b92_theta);
    let tests = states.map(|s| MeasurementBasis {
        id: B92_LABEL,
        axis: s,
    });
    let survive = fiber_transmission(&cfg.channel).value() * cfg.q;

    let mut records = Vec::with_capacity(cfg.n_pulses);
    for _ in 0..cfg.n_pulses {
        let alice_bit = u8::from(rng.random::<bool>());
        let n = poisson_photon_number(src.mu, &mut rng)?;
        let (state, eve) = if n == 0 {
            (states[usize::from(alice_bit)], None)
        } else {
            let (fwd, eve) =
                apply_attack_with_bases(&states[usize::from(alice_bit)], &cfg.attack, &BB84_BASES, &mut rng)?;
            (fwd.unwrap_or(states[usize::from(alice_bit)]), eve)
        };

        let k = rng.random_range(0..2usize);
        // Outcome 1 of the test basis is the orthogonal complement of state k.
        let mut excluded = 0u64;
        for _ in 0..n {
            if rng.random::<f64>() < survive && measure(&state, &tests[k], &mut rng) == 1 {
                excluded += 1;
            }
        }
        let gate = detector_gate(excluded, &cfg.detector, &mut rng);
        let bob_bit = gate.clicked().then_some(1 - k as u8);
        records.push(PulseRecord {
            alice_bit,
            alice_basis: B92_LABEL,
            bob_basis: B92_LABEL,
            detected: bob_bit.is_some(),
            bob_bit,
            eve,
            tags: RecordTags {
                multiphoton: n >= 2,
                dark_count_origin: gate.dark && !gate.photon,
                accidental_pair: false,
            },
        });
    }
    Ok(SessionResult::from_records(records))
}
