//! Exact per-pulse expectations for the session engines.
//!
//! Every source emission is split into branches (Alice's basis and bit, the
//! eavesdropper's choices, photon-number regime). For each branch Bob's click
//! pattern over his gated detectors is enumerated by inclusion–exclusion, which
//! covers dark counts, double clicks and passive basis choice exactly.

use super::b92::b92_states;
use super::bob::passive_choice;
use super::{ProtocolKind, SessionConfig, Source};
use crate::attacks::AttackStrategy;
use crate::error::{QkdError, Result};
use crate::infomath::{BasisId, BlochVector, MeasurementBasis};
use crate::photonics::fiber_transmission;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionPrediction {
    /// Probability that Bob registers a bit in one pulse slot.
    pub detect_prob: f64,
    /// Probability that a pulse slot ends up in the sifted key.
    pub sift_prob: f64,
    pub qber: f64,
    /// Eve's agreement with Alice over the sifted bits she holds a record for.
    pub eve_agreement: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Photons {
    None,
    One,
    /// Poisson with this mean, restricted to `n >= 1`.
    NonEmpty(f64),
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    weight: f64,
    photons: Photons,
    state: BlochVector,
    survive: f64,
    /// Probability that Eve's guess is right, if she keeps a record.
    eve_correct: Option<f64>,
}

impl Branch {
    /// `weight · E[(1 - x)^n]` over this branch's photon number.
    fn generating(&self, x: f64) -> f64 {
        self.weight
            * match self.photons {
                Photons::None => 1.0,
                Photons::One => 1.0 - x,
                Photons::NonEmpty(mu) => (-mu).exp() * (mu * (1.0 - x)).exp_m1(),
            }
    }
}

#[derive(Debug, Default)]
struct Tally {
    detect: f64,
    sift: f64,
    error: f64,
    eve_sift: f64,
    eve_hit: f64,
}

struct Receiver {
    bases: Vec<MeasurementBasis>,
    passive: bool,
    eta: f64,
    p_dark: f64,
}

fn outcome_prob(state: &BlochVector, basis: &MeasurementBasis, o: usize) -> f64 {
    let c = state.dot(&basis.axis);
    if o == 0 {
        (1.0 + c) / 2.0
    } else {
        (1.0 - c) / 2.0
    }
}

impl Receiver {
    fn add(&self, br: &Branch, alice_id: BasisId, alice_bit: u8, tally: &mut Tally) {
        let k = self.bases.len();
        if self.passive {
            let gated: Vec<usize> = (0..k).collect();
            self.add_gated(br, &gated, 1.0 / k as f64, 1.0, alice_id, alice_bit, tally);
        } else {
            for b in 0..k {
                self.add_gated(br, &[b], 1.0, 1.0 / k as f64, alice_id, alice_bit, tally);
            }
        }
    }

    /// `route` is the probability that a surviving photon enters a given gated
    /// basis; `share` weights this gating configuration.
    #[allow(clippy::too_many_arguments)]
    fn add_gated(
        &self,
        br: &Branch,
        gated: &[usize],
        route: f64,
        share: f64,
        alice_id: BasisId,
        alice_bit: u8,
        tally: &mut Tally,
    ) {
        let m = 2 * gated.len();
        let p: Vec<f64> = gated
            .iter()
            .flat_map(|&b| {
                (0..2).map(move |o| br.survive * route * self.eta * outcome_prob(&br.state, &self.bases[b], o))
            })
            .collect();
        let sift_slot = gated.iter().position(|&b| self.bases[b].id == alice_id);
        let full = (1u32 << m) - 1;
        // Probability that every cell in `mask` stays dark.
        let silent = |mask: u32| -> f64 {
            let x: f64 = (0..m).filter(|c| mask >> c & 1 == 1).map(|c| p[c]).sum();
            br.generating(x) * (1.0 - self.p_dark).powi(mask.count_ones() as i32)
        };
        for clicked in 1..=full {
            let quiet = full & !clicked;
            let mut prob = 0.0;
            let mut sub = clicked;
            loop {
                let sign = if sub.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                prob += sign * silent(quiet | sub);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & clicked;
            }
            let prob = prob * share;
            tally.detect += prob;
            let Some(slot) = sift_slot else { continue };
            let hits = |g: usize| clicked >> (2 * g) & 0b11 != 0;
            if !hits(slot) {
                continue;
            }
            let n_clicked = (0..gated.len()).filter(|&g| hits(g)).count();
            let w = prob / n_clicked as f64;
            let right = clicked >> (2 * slot + usize::from(alice_bit)) & 1 == 1;
            let wrong = clicked >> (2 * slot + usize::from(1 - alice_bit)) & 1 == 1;
            tally.sift += w;
            tally.error += w * match (right, wrong) {
                (false, true) => 1.0,
                (true, true) => 0.5,
                _ => 0.0,
            };
            if let Some(c) = br.eve_correct {
                tally.eve_sift += w;
                tally.eve_hit += w * c;
            }
        }
    }
}

fn attack_branches(
    state: BlochVector,
    alice_bit: u8,
    bases: &[MeasurementBasis],
    attack: &AttackStrategy,
) -> Result<Vec<(f64, BlochVector, Option<f64>)>> {
    let resend = |weight: f64, eve_bases: &[MeasurementBasis]| {
        let share = weight / eve_bases.len() as f64;
        eve_bases
            .iter()
            .flat_map(|e| {
                (0..2u8).map(move |o| {
                    (
                        share * outcome_prob(&state, e, usize::from(o)),
                        e.eigenstate(o),
                        Some(if o == alice_bit { 1.0 } else { 0.0 }),
                    )
                })
            })
            .collect::<Vec<_>>()
    };
    Ok(match *attack {
        AttackStrategy::None => vec![(1.0, state, None)],
        AttackStrategy::InterceptResend { fraction } => {
            let mut v = vec![(1.0 - fraction, state, None)];
            v.extend(resend(fraction, bases));
            v
        }
        AttackStrategy::Breidbart { fraction } => {
            let mut v = vec![(1.0 - fraction, state, None)];
            v.extend(resend(fraction, &[MeasurementBasis::breidbart()]));
            v
        }
        AttackStrategy::SymmetricIndividual { x } => {
            vec![(1.0, state.shrink(x.cos())?, Some((1.0 + x.sin()) / 2.0))]
        }
        other => {
            return Err(QkdError::Usage(format!(
                "no exact session prediction for the {} attack",
                other.name()
            )))
        }
    })
}

/// Exact expectations for a session configuration.
///
/// Covers BB84, six-state and the pair-source protocols with every per-pulse
/// attack, and B92 without an eavesdropper.
pub fn predict_session(cfg: &SessionConfig) -> Result<SessionPrediction> {
    cfg.validate()?;
    let t_link = fiber_transmission(&cfg.channel).value();
    let mut tally = Tally::default();
    match (cfg.protocol, cfg.source) {
        (ProtocolKind::B92, Source::FaintPulse(src)) => {
            if cfg.attack != AttackStrategy::None {
                return Err(QkdError::Usage("B92 prediction covers the attack-free case".into()));
            }
            let states = b92_states(cfg.b92_theta);
            for bit in 0..2u8 {
                for k in 0..2usize {
                    let c = states[usize::from(bit)].dot(&states[k]);
                    let x = t_link * cfg.q * cfg.detector.eta * (1.0 - c) / 2.0;
                    let click = 1.0 - (-src.mu * x).exp() * (1.0 - cfg.detector.p_dark);
                    let w = 0.25 * click;
                    tally.detect += w;
                    tally.sift += w;
                    if (1 - k as u8) != bit {
                        tally.error += w;
                    }
                }
            }
        }
        (ProtocolKind::Bb84 | ProtocolKind::SixState, Source::FaintPulse(src)) => {
            let bases = cfg.protocol.alice_bases();
            let rx = Receiver {
                passive: passive_choice(bases.len(), cfg.n_det),
                bases: bases.clone(),
                eta: cfg.detector.eta,
                p_dark: cfg.detector.p_dark,
            };
            let fibre = t_link * cfg.q;
            let w0 = 0.5 / bases.len() as f64;
            for a in &bases {
                for bit in 0..2u8 {
                    let state = a.eigenstate(bit);
                    let empty = Branch {
                        weight: w0 * (-src.mu).exp(),
                        photons: Photons::None,
                        state,
                        survive: fibre,
                        eve_correct: None,
                    };
                    rx.add(&empty, a.id, bit, &mut tally);
                    for (w, fwd, eve) in attack_branches(state, bit, &bases, &cfg.attack)? {
                        let br = Branch {
                            weight: w0 * w,
                            photons: Photons::NonEmpty(src.mu),
                            state: fwd,
                            survive: fibre,
                            eve_correct: eve,
                        };
                        rx.add(&br, a.id, bit, &mut tally);
                    }
                }
            }
        }
        (ProtocolKind::EprBb84 | ProtocolKind::Ekert3Basis, Source::Pair(src)) => {
            if cfg.attack != AttackStrategy::None {
                return Err(QkdError::Usage("pair-source prediction covers the attack-free case".into()));
            }
            let alice = cfg.protocol.alice_bases();
            let bob = cfg.protocol.bob_bases();
            let rx = Receiver {
                passive: passive_choice(bob.len(), cfg.n_det),
                bases: bob,
                eta: cfg.detector.eta,
                p_dark: cfg.detector.p_dark,
            };
            let w0 = 0.5 / alice.len() as f64;
            for a in &alice {
                for bit in 0..2u8 {
                    let branches = [
                        (src.p_acc, Photons::One, BlochVector::CENTER, t_link),
                        ((1.0 - src.p_acc) * src.mu_eff, Photons::One, a.eigenstate(bit), t_link * cfg.q),
                        ((1.0 - src.p_acc) * (1.0 - src.mu_eff), Photons::None, a.eigenstate(bit), 0.0),
                    ];
                    for (w, photons, state, survive) in branches {
                        let br = Branch {
                            weight: w0 * w,
                            photons,
                            state,
                            survive,
                            eve_correct: None,
                        };
                        rx.add(&br, a.id, bit, &mut tally);
                    }
                }
            }
        }
        _ => return Err(QkdError::config("source", "source does not match the protocol")),
    }
    Ok(SessionPrediction {
        detect_prob: tally.detect,
        sift_prob: tally.sift,
        qber: if tally.sift > 0.0 { tally.error / tally.sift } else { 0.0 },
        eve_agreement: (tally.eve_sift > 0.0).then(|| tally.eve_hit / tally.eve_sift),
    })
}
