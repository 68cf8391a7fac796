//! Entanglement-based sessions at the statistics level.
//!
//! Alice's detection triggers every window and her outcome is uniform. Bob's
//! photon then carries her projected state (identical outcomes in matching
//! bases). With probability `p_acc` an accidental second pair replaces his
//! photon with an independent uniform qubit; otherwise his photon is present
//! with probability `mu_eff`.

use rand::Rng;

use super::bob::Station;
use super::{PulseRecord, RecordTags, SessionConfig, SessionResult, Source};
use crate::attacks::AttackStrategy;
use crate::error::{QkdError, Result};
use crate::infomath::{BasisId, BlochVector};
use crate::photonics::fiber_transmission;
use crate::rng_for;

pub fn run_epr_session(cfg: &SessionConfig) -> Result<SessionResult> {
    cfg.validate()?;
    if !cfg.protocol.is_entanglement_based() {
        return Err(QkdError::config("protocol", "expected epr-bb84 or ekert"));
    }
    run(cfg)
}

pub(super) fn run(cfg: &SessionConfig) -> Result<SessionResult> {
    let Source::Pair(src) = cfg.source else {
        return Err(QkdError::config("source", "expected a pair source"));
    };
    if cfg.attack != AttackStrategy::None {
        return Err(QkdError::Usage(format!(
            "{} attack is not modelled for pair sources",
            cfg.attack.name()
        )));
    }
    let mut rng = rng_for(cfg.seed, 0);
    let alice = cfg.protocol.alice_bases();
    let bob = cfg.protocol.bob_bases();
    let t_link = fiber_transmission(&cfg.channel).value();
    let station = Station::new(&bob, cfg.n_det, cfg.detector, t_link, cfg.q);

    let mut records = Vec::with_capacity(cfg.n_pulses);
    for _ in 0..cfg.n_pulses {
        let a = rng.random_range(0..alice.len());
        let alice_bit = u8::from(rng.random::<bool>());
        let accidental = rng.random::<f64>() < src.p_acc;
        let (state, photons, survive) = if accidental {
            (BlochVector::CENTER, 1, station.t_link())
        } else {
            let present = rng.random::<f64>() < src.mu_eff;
            (alice[a].eigenstate(alice_bit), u64::from(present), station.fibre())
        };
        let det = station.detect(&state, photons, survive, &mut rng);
        records.push(PulseRecord {
            alice_bit,
            alice_basis: alice[a].id,
            bob_basis: bob[det.basis].id,
            detected: det.bit.is_some(),
            bob_bit: det.bit,
            eve: None,
            tags: RecordTags {
                multiphoton: false,
                dark_count_origin: det.bit.is_some() && det.dark_only,
                accidental_pair: accidental,
            },
        });
    }
    Ok(SessionResult::from_records(records))
}

fn basis_angle(id: BasisId) -> Option<f64> {
    match id {
        BasisId::Z => Some(0.0),
        BasisId::X => Some(std::f64::consts::FRAC_PI_2),
        BasisId::Custom(a) => Some(a),
        BasisId::Y => None,
    }
}

/// CHSH sum `E(a0,b0) − E(a0,b2) + E(a2,b0) + E(a2,b2)` over detected records,
/// where `a0 < a2` are the two outer analyser angles Alice uses and `b0 < b2`
/// the outer ones Bob uses. Correlations are `P(same) − P(different)`.
pub fn chsh_from_records(records: &[PulseRecord]) -> Result<f64> {
    let detected: Vec<_> = records
        .iter()
        .filter(|r| r.detected)
        .filter_map(|r| Some((basis_angle(r.alice_basis)?, basis_angle(r.bob_basis)?, r)))
        .collect();
    let outer = |pick: fn(&(f64, f64, &PulseRecord)) -> f64| {
        let lo = detected.iter().map(pick).fold(f64::INFINITY, f64::min);
        let hi = detected.iter().map(pick).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (a0, a2) = outer(|d| d.0);
    let (b0, b2) = outer(|d| d.1);
    if !(a0 < a2 && b0 < b2) {
        return Err(QkdError::Estimation("CHSH needs two settings on each side".into()));
    }
    let corr = |a: f64, b: f64| -> Result<f64> {
        let (same, n) = detected
            .iter()
            .filter(|d| d.0 == a && d.1 == b)
            .fold((0usize, 0usize), |(s, n), d| {
                (s + usize::from(d.2.bob_bit == Some(d.2.alice_bit)), n + 1)
            });
        if n == 0 {
            return Err(QkdError::Estimation(format!("no coincidences at settings ({a}, {b})")));
        }
        Ok((2.0 * same as f64 - n as f64) / n as f64)
    };
    Ok(corr(a0, b0)? - corr(a0, b2)? + corr(a2, b0)? + corr(a2, b2)?)
}
