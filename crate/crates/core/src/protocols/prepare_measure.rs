use rand::Rng;

use super::bob::Station;
use super::{PulseRecord, RecordTags, SessionConfig, SessionResult, Source};
use crate::attacks::{apply_attack_with_bases, AttackStrategy, EveRecord};
use crate::error::{QkdError, Result};
use crate::infomath::{measure, BlochVector, MeasurementBasis};
use crate::photonics::{fiber_transmission, poisson_photon_number, poisson_pmf};
use crate::rng_for;

/// What leaves Eve's station towards Bob.
struct Forward {
    state: BlochVector,
    photons: u64,
    survive: f64,
    eve: Option<EveRecord>,
}

pub(super) fn run(cfg: &SessionConfig) -> Result<SessionResult> {
    let Source::FaintPulse(src) = cfg.source else {
        return Err(QkdError::config("source", "expected a faint-pulse source"));
    };
    let mut rng = rng_for(cfg.seed, 0);
    let bases = cfg.protocol.alice_bases();
    let t_link = fiber_transmission(&cfg.channel).value();
    let station = Station::new(&bases, cfg.n_det, cfg.detector, t_link, cfg.q);
    let t_eve = match cfg.attack {
        AttackStrategy::Pns => pns_eve_transmission(src.mu, t_link, cfg.detector.eta * cfg.q),
        _ => 1.0,
    };

    let mut records = Vec::with_capacity(cfg.n_pulses);
    for _ in 0..cfg.n_pulses {
        let a = rng.random_range(0..bases.len());
        let alice_bit = u8::from(rng.random::<bool>());
        let state = bases[a].eigenstate(alice_bit);
        let n = poisson_photon_number(src.mu, &mut rng)?;

        let fwd = if n == 0 {
            Forward { state, photons: 0, survive: station.fibre(), eve: None }
        } else {
            attack_pulse(&state, n, alice_bit, &bases, a, &cfg.attack, &station, t_eve, &mut rng)?
        };

        let det = station.detect(&fwd.state, fwd.photons, fwd.survive, &mut rng);
        records.push(PulseRecord {
            alice_bit,
            alice_basis: bases[a].id,
            bob_basis: bases[det.basis].id,
            detected: det.bit.is_some(),
            bob_bit: det.bit,
            eve: fwd.eve,
            tags: RecordTags {
                multiphoton: n >= 2,
                dark_count_origin: det.bit.is_some() && det.dark_only,
                accidental_pair: false,
            },
        });
    }
    Ok(SessionResult::from_records(records))
}

#[allow(clippy::too_many_arguments)]
fn attack_pulse<R: Rng + ?Sized>(
    state: &BlochVector,
    n: u64,
    alice_bit: u8,
    bases: &[MeasurementBasis],
    a: usize,
    attack: &AttackStrategy,
    station: &Station<'_>,
    t_eve: f64,
    rng: &mut R,
) -> Result<Forward> {
    let pass = |state: BlochVector, eve| Forward {
        state,
        photons: n,
        survive: station.fibre(),
        eve,
    };
    match *attack {
        AttackStrategy::None
        | AttackStrategy::InterceptResend { .. }
        | AttackStrategy::Breidbart { .. } => {
            let (fwd, eve) = apply_attack_with_bases(state, attack, bases, rng)?;
            Ok(pass(fwd.unwrap_or(*state), eve))
        }
        AttackStrategy::SymmetricIndividual { x } => {
            let shrunk = state.shrink(x.cos())?;
            let correct = rng.random::<f64>() < (1.0 + x.sin()) / 2.0;
            let guess = if correct { alice_bit } else { 1 - alice_bit };
            Ok(pass(shrunk, Some(EveRecord { guess, basis: bases[a].id })))
        }
        AttackStrategy::Beamsplitter => {
            // Each photon picks one of Eve's analysers; she resends only when
            // two photons hit the same detector.
            let eve_bases = &bases[..bases.len().min(2)];
            let mut counts = vec![[0u32; 2]; eve_bases.len()];
            for _ in 0..n {
                let b = rng.random_range(0..eve_bases.len());
                counts[b][usize::from(measure(state, &eve_bases[b], rng))] += 1;
            }
            let hit = counts
                .iter()
                .enumerate()
                .flat_map(|(b, c)| (0..2u8).map(move |o| (b, o, c[usize::from(o)])))
                .find(|&(_, _, c)| c >= 2);
            Ok(match hit {
                Some((b, o, _)) => Forward {
                    state: eve_bases[b].eigenstate(o),
                    photons: 1,
                    survive: station.lossless(),
                    eve: Some(EveRecord { guess: o, basis: eve_bases[b].id }),
                },
                None => Forward { state: *state, photons: 0, survive: 0.0, eve: None },
            })
        }
        AttackStrategy::Pns => Ok(if n >= 2 {
            // One photon is stored until the bases are announced.
            Forward {
                state: *state,
                photons: n - 1,
                survive: t_eve * station.q(),
                eve: Some(EveRecord { guess: alice_bit, basis: bases[a].id }),
            }
        } else {
            Forward { state: *state, photons: 0, survive: 0.0, eve: None }
        }),
    }
}

/// Transmission of the PNS attacker's line, chosen so that Bob's photon count
/// rate with single-photon pulses blocked equals the rate over the real link.
/// Saturates at 1 when the attack cannot stay hidden. `eta` is the per-photon
/// detection probability at Bob.
pub(crate) fn pns_eve_transmission(mu: f64, t_link: f64, eta: f64) -> f64 {
    let target = -(-mu * t_link * eta).exp_m1();
    let rate = |te: f64| -> f64 {
        let mut sum = 0.0;
        for n in 2..200u64 {
            let p = poisson_pmf(n, mu);
            sum += p * (1.0 - (1.0 - te * eta).powi((n - 1) as i32));
            if p < 1e-18 && n as f64 > mu {
                break;
            }
        }
        sum
    };
    if rate(1.0) <= target {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::AttackStrategy;
    use crate::photonics::{Detector, FaintPulseSource, FiberChannel};
    use crate::protocols::{run_session, ProtocolKind};
    use crate::tol;

    fn within(x: f64, p: f64, n: usize) -> bool {
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        (x - p).abs() <= tol::SIGMAS * sigma
    }

    #[test]
    fn noiseless_bb84_has_no_errors() {
        let res = run_session(&SessionConfig::bb84(20_000, 3)).unwrap();
        assert_eq!(res.error_count, 0);
        assert!(res.sifted_count > 0);
        let ratio = res.sifted_count as f64 / res.raw_count as f64;
        assert!((ratio - 0.5).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn six_state_intercept_resend_gives_a_third() {
        let mut cfg = SessionConfig::bb84(200_000, 9);
        cfg.protocol = ProtocolKind::SixState;
        cfg.source = Source::FaintPulse(FaintPulseSource { mu: 1.0, f_rep: 1e6 });
        cfg.attack = AttackStrategy::InterceptResend { fraction: 1.0 };
        let res = run_session(&cfg).unwrap();
        assert!((res.qber() - 1.0 / 3.0).abs() < 0.01, "{}", res.qber());
    }

    #[test]
    fn symmetric_attack_matches_its_crossovers() {
        let d = 0.1;
        let mut cfg = SessionConfig::bb84(300_000, 5);
        cfg.source = Source::FaintPulse(FaintPulseSource { mu: 0.5, f_rep: 1e6 });
        cfg.attack = AttackStrategy::symmetric_for_qber(d).unwrap();
        let res = run_session(&cfg).unwrap();
        // Multiphoton pulses see the same shrink on every photon.
        let pred = crate::protocols::predict_session(&cfg).unwrap();
        assert!(within(res.qber(), pred.qber, res.sifted_count), "{} vs {}", res.qber(), pred.qber);
        let x = crate::attacks::symmetric_angle(d).unwrap();
        let (_, attacked) = res.eve_agreement_counts();
        assert!(within(res.eve_agreement().unwrap(), (1.0 + x.sin()) / 2.0, attacked));
    }

    #[test]
    fn beamsplitter_resends_on_three_eighths_of_pairs() {
        let bases = ProtocolKind::Bb84.alice_bases();
        let station = Station::new(&bases, 2, Detector::PERFECT, 1.0, 1.0);
        let mut rng = rng_for(11, 0);
        let n = 200_000;
        let (mut resent, mut wrong_basis) = (0usize, 0usize);
        for _ in 0..n {
            let a = rng.random_range(0..2);
            let state = bases[a].eigenstate(0);
            let fwd = attack_pulse(&state, 2, 0, &bases, a, &AttackStrategy::Beamsplitter, &station, 1.0, &mut rng)
                .unwrap();
            if let Some(eve) = fwd.eve {
                resent += 1;
                assert_eq!(fwd.photons, 1);
                wrong_basis += usize::from(eve.basis != bases[a].id);
            } else {
                assert_eq!(fwd.photons, 0);
            }
        }
        assert!(within(resent as f64 / n as f64, 3.0 / 8.0, n));
        // Half of the wrong-basis resends become errors: QBER 1/6.
        assert!(within(wrong_basis as f64 / resent as f64, 1.0 / 3.0, resent));
    }

    #[test]
    fn pns_keeps_bob_rate_and_stays_silent() {
        let mut cfg = SessionConfig::bb84(400_000, 21);
        cfg.source = Source::FaintPulse(FaintPulseSource { mu: 0.5, f_rep: 1e6 });
        cfg.channel = FiberChannel { alpha: 0.25, length: 40.0 };
        cfg.detector = Detector { eta: 0.5, p_dark: 0.0 };
        let honest = run_session(&cfg).unwrap();
        cfg.attack = AttackStrategy::Pns;
        let attacked = run_session(&cfg).unwrap();
        assert_eq!(attacked.error_count, 0);
        assert_eq!(attacked.eve_agreement(), Some(1.0));
        let p = honest.raw_count as f64 / cfg.n_pulses as f64;
        let q = attacked.raw_count as f64 / cfg.n_pulses as f64;
        let sigma = (2.0 * p / cfg.n_pulses as f64).sqrt();
        assert!((p - q).abs() <= tol::SIGMAS * sigma, "{p} vs {q}");
    }

    #[test]
    fn pns_transmission_saturates_when_infeasible() {
        assert_eq!(pns_eve_transmission(0.1, 1.0, 1.0), 1.0);
        let te = pns_eve_transmission(0.1, 1e-3, 0.1);
        assert!(te > 0.0 && te < 1.0);
    }
}
