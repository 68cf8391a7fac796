//! Eavesdropping strategies.
//!
//! Each strategy has an exact prediction of the QBER it induces on the sifted
//! key and of Eve's Shannon information per sifted bit. Intercept-resend and
//! Breidbart attacks can also be sampled pulse by pulse with [`apply_attack`];
//! the symmetric individual attack is sampled through its classical joint
//! distribution, and the multiphoton attacks are handled by the session engine.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::error::{check_closed, QkdError, Result};
use crate::infomath::{
    entropy_unchecked, measure, BasisId, BlochVector, MeasurementBasis, Probability,
};
use crate::photonics::multiphoton_prob;
use crate::protocols::ProtocolKind;

/// Fraction of multiphoton pulses a beamsplitter attacker can resend: both
/// photons of a pair must land in the same output of one analysis half.
pub const BEAMSPLITTER_RESEND_FRACTION: f64 = 3.0 / 8.0;
/// QBER on pulses resent by the beamsplitter attacker.
pub const BEAMSPLITTER_QBER: f64 = 1.0 / 6.0;
/// Eve's information on pulses resent by the beamsplitter attacker.
pub const BEAMSPLITTER_INFO: f64 = 2.0 / 3.0;
/// Share of Bob's detections that the beamsplitter attacker may control when
/// Alice sets `mu` to the published operating points (`mu = 2.5 t`).
pub const BEAMSPLITTER_MATCHED_EXPOSURE: f64 = 15.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackStrategy {
    None,
    /// Measure a `fraction` of pulses in a random protocol basis and resend the eigenstate.
    InterceptResend { fraction: f64 },
    /// Measure a `fraction` of pulses in the basis halfway between Z and X.
    Breidbart { fraction: f64 },
    /// Optimal symmetric individual attack with probe overlap angle `x ∈ [0, π/2]`.
    SymmetricIndividual { x: f64 },
    /// Split every pulse, resend only on two-photon coincidences in one output.
    Beamsplitter,
    /// Photon-number splitting with a lossless channel.
    Pns,
}

impl AttackStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackStrategy::InterceptResend { fraction } | AttackStrategy::Breidbart { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(QkdError::config(
                        "attack.fraction",
                        format!("must lie in [0, 1], got {fraction}"),
                    ));
                }
            }
            AttackStrategy::SymmetricIndividual { x } if !(0.0..=FRAC_PI_2).contains(&x) => {
                return Err(QkdError::config(
                    "attack.x",
                    format!("must lie in [0, pi/2], got {x}"),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Symmetric attack tuned to produce error rate `d`.
    pub fn symmetric_for_qber(d: f64) -> Result<Self> {
        Ok(AttackStrategy::SymmetricIndividual {
            x: symmetric_angle(d)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::None => "none",
            AttackStrategy::InterceptResend { .. } => "intercept-resend",
            AttackStrategy::Breidbart { .. } => "breidbart",
            AttackStrategy::SymmetricIndividual { .. } => "symmetric",
            AttackStrategy::Beamsplitter => "beamsplitter",
            AttackStrategy::Pns => "pns",
        }
    }

    /// Exact single-photon prediction for the BB84 protocol.
    pub fn predict(&self) -> Result<AttackPrediction> {
        self.validate()?;
        match *self {
            AttackStrategy::None => Ok(AttackPrediction::new(0.0, 0.0)),
            AttackStrategy::InterceptResend { fraction } => intercept_resend_prediction(fraction),
            AttackStrategy::Breidbart { fraction } => {
                let full = breidbart_prediction();
                Ok(AttackPrediction::new(full.qber * fraction, full.info_ae * fraction))
            }
            AttackStrategy::SymmetricIndividual { x } => {
                let d = (1.0 - x.cos()) / 2.0;
                Ok(AttackPrediction::new(d, eve_info_from_angle(x)))
            }
            AttackStrategy::Beamsplitter => {
                Ok(AttackPrediction::new(BEAMSPLITTER_QBER, BEAMSPLITTER_INFO))
            }
            AttackStrategy::Pns => Ok(AttackPrediction::new(0.0, 1.0)),
        }
    }
}

/// Whether an attack can go unnoticed given the channel transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// Largest link transmission for which Bob's count rate is unchanged.
    pub max_transmission: f64,
    pub t_link: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPrediction {
    pub qber: f64,
    /// Eve's Shannon information per sifted bit.
    pub info_ae: f64,
    pub feasibility: Option<Feasibility>,
}

impl AttackPrediction {
    fn new(qber: f64, info_ae: f64) -> Self {
        AttackPrediction {
            qber,
            info_ae,
            feasibility: None,
        }
    }
}

pub fn intercept_resend_prediction(fraction: f64) -> Result<AttackPrediction> {
    check_closed("fraction", fraction, 0.0, 1.0, "[0, 1]")?;
    Ok(AttackPrediction::new(0.25 * fraction, 0.5 * fraction))
}

/// Probability that a Breidbart-basis measurement guesses Alice's bit, `cos²(π/8)`.
pub fn breidbart_guess_probability() -> f64 {
    (PI / 8.0).cos().powi(2)
}

pub fn breidbart_prediction() -> AttackPrediction {
    let p = breidbart_guess_probability();
    AttackPrediction::new(2.0 * p * (1.0 - p), 1.0 - entropy_unchecked(p))
}

/// Probe overlap angle `x = arccos(1 - 2D)` of the symmetric attack inducing error `D`.
pub fn symmetric_angle(d: f64) -> Result<f64> {
    check_closed("D", d, 0.0, 0.5, "[0, 0.5]")?;
    Ok((1.0 - 2.0 * d).clamp(-1.0, 1.0).acos())
}

fn eve_info_from_angle(x: f64) -> f64 {
    1.0 - entropy_unchecked((1.0 + x.sin()) / 2.0)
}

/// Eve's maximal information `1 - h((1 + sin x)/2)` under the optimal
/// individual attack at error rate `D`.
pub fn symmetric_attack_info(d: f64) -> Result<f64> {
    symmetric_angle(d).map(eve_info_from_angle)
}

/// Bob's fidelity `(1 + cos y)/(2 - cos x + cos y)` for probe overlaps `cos x`, `cos y`.
pub fn fidelity_from_overlaps(x: f64, y: f64) -> Result<Probability> {
    check_closed("x", x, 0.0, PI, "[0, pi]")?;
    check_closed("y", y, 0.0, PI, "[0, pi]")?;
    let denom = 2.0 - x.cos() + y.cos();
    if denom <= 0.0 {
        // x = 0, y = π: both numerator and denominator vanish.
        return Err(QkdError::domain("2 - cos x + cos y", denom, "(0, inf)"));
    }
    Probability::new_lenient((1.0 + y.cos()) / denom)
}

/// Bob's fidelity when his copy and Eve's copy are equally good under the
/// six-state symmetry (the universal cloner).
pub fn optimal_cloning_fidelity() -> Probability {
    Probability::new(5.0 / 6.0).expect("constant")
}

/// QBER caused by measuring and resending every photon in a random protocol basis.
pub fn six_state_full_measure_qber(kind: ProtocolKind) -> Result<Probability> {
    match kind {
        ProtocolKind::SixState => Probability::new(1.0 / 3.0),
        ProtocolKind::Bb84 | ProtocolKind::EprBb84 => Probability::new(0.25),
        other => Err(QkdError::Usage(format!(
            "full-measurement QBER is defined for BB84 and six-state, not {other:?}"
        ))),
    }
}

/// Joint law `P(alpha, beta, epsilon)` of Alice's bit, Bob's bit and Eve's guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution {
    table: [[[f64; 2]; 2]; 2],
}

impl JointDistribution {
    pub fn new(table: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        let mut sum = 0.0;
        for &p in table.iter().flatten().flatten() {
            if !(p >= 0.0) {
                return Err(QkdError::domain("P(a,b,e)", p, "[0, 1]"));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(QkdError::domain("sum P(a,b,e)", sum, "{1}"));
        }
        Ok(JointDistribution { table })
    }

    /// Alice uniform; Bob and Eve err independently with the given crossovers.
    pub fn from_crossovers(bob_error: f64, eve_error: f64) -> Result<Self> {
        check_closed("bob_error", bob_error, 0.0, 1.0, "[0, 1]")?;
        check_closed("eve_error", eve_error, 0.0, 1.0, "[0, 1]")?;
        let mut table = [[[0.0; 2]; 2]; 2];
        for (a, plane) in table.iter_mut().enumerate() {
            for (b, row) in plane.iter_mut().enumerate() {
                for (e, cell) in row.iter_mut().enumerate() {
                    let pb = if a == b { 1.0 - bob_error } else { bob_error };
                    let pe = if a == e { 1.0 - eve_error } else { eve_error };
                    *cell = 0.5 * pb * pe;
                }
            }
        }
        JointDistribution::new(table)
    }

    pub fn prob(&self, alpha: u8, beta: u8, epsilon: u8) -> f64 {
        self.table[usize::from(alpha)][usize::from(beta)][usize::from(epsilon)]
    }

    pub fn alice_marginal(&self, alpha: u8) -> f64 {
        (0..2).flat_map(|b| (0..2).map(move |e| (b, e))).map(|(b, e)| self.prob(alpha, b, e)).sum()
    }

    pub fn bob_error(&self) -> f64 {
        self.sum_where(|a, b, _| a != b)
    }

    pub fn eve_error(&self) -> f64 {
        self.sum_where(|a, _, e| a != e)
    }

    pub fn info_ab(&self) -> f64 {
        self.mutual_information(|a, b, _| (a, b))
    }

    pub fn info_ae(&self) -> f64 {
        self.mutual_information(|a, _, e| (a, e))
    }

    pub fn info_be(&self) -> f64 {
        self.mutual_information(|_, b, e| (b, e))
    }

    fn sum_where(&self, pred: impl Fn(u8, u8, u8) -> bool) -> f64 {
        cells().filter(|&(a, b, e)| pred(a, b, e)).map(|(a, b, e)| self.prob(a, b, e)).sum()
    }

    fn mutual_information(&self, project: impl Fn(u8, u8, u8) -> (u8, u8)) -> f64 {
        let mut pair = [[0.0f64; 2]; 2];
        for (a, b, e) in cells() {
            let (u, v) = project(a, b, e);
            pair[usize::from(u)][usize::from(v)] += self.prob(a, b, e);
        }
        let pu = [pair[0][0] + pair[0][1], pair[1][0] + pair[1][1]];
        let pv = [pair[0][0] + pair[1][0], pair[0][1] + pair[1][1]];
        let mut info = 0.0;
        for u in 0..2 {
            for v in 0..2 {
                let p = pair[u][v];
                if p > 0.0 {
                    info += p * (p / (pu[u] * pv[v])).log2();
                }
            }
        }
        info.max(0.0)
    }
}

fn cells() -> impl Iterator<Item = (u8, u8, u8)> {
    (0..8u8).map(|i| (i >> 2, (i >> 1) & 1, i & 1))
}

/// Classical outcome statistics of the symmetric individual attack at error `D`:
/// Bob errs with probability `D`, Eve with `(1 - sin x)/2`, independently given Alice's bit.
pub fn symmetric_joint_distribution(d: f64) -> Result<JointDistribution> {
    let x = symmetric_angle(d)?;
    JointDistribution::from_crossovers(d, (1.0 - x.sin()) / 2.0)
}

/// What Eve learned from one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveRecord {
    /// Her guess of Alice's bit value.
    pub guess: u8,
    pub basis: BasisId,
}

/// Bases Eve picks from in an intercept-resend attack on BB84.
pub const BB84_BASES: [MeasurementBasis; 2] = [MeasurementBasis::Z, MeasurementBasis::X];

/// Per-pulse attack against BB84. See [`apply_attack_with_bases`].
pub fn apply_attack<R: Rng + ?Sized>(
    state: &BlochVector,
    strategy: &AttackStrategy,
    rng: &mut R,
) -> Result<(Option<BlochVector>, Option<EveRecord>)> {
    apply_attack_with_bases(state, strategy, &BB84_BASES, rng)
}

/// Applies a per-pulse samplable strategy and returns the state forwarded to Bob
/// together with Eve's record. `eve_bases` is the basis set an intercept-resend
/// attacker chooses from uniformly.
pub fn apply_attack_with_bases<R: Rng + ?Sized>(
    state: &BlochVector,
    strategy: &AttackStrategy,
    eve_bases: &[MeasurementBasis],
    rng: &mut R,
) -> Result<(Option<BlochVector>, Option<EveRecord>)> {
    match *strategy {
        AttackStrategy::None => Ok((Some(*state), None)),
        AttackStrategy::InterceptResend { fraction } => {
            if eve_bases.is_empty() {
                return Err(QkdError::Usage("intercept-resend needs at least one basis".into()));
            }
            if rng.random::<f64>() >= fraction {
                return Ok((Some(*state), None));
            }
            let basis = eve_bases[rng.random_range(0..eve_bases.len())];
            Ok(measure_and_resend(state, &basis, rng))
        }
        AttackStrategy::Breidbart { fraction } => {
            if rng.random::<f64>() >= fraction {
                return Ok((Some(*state), None));
            }
            Ok(measure_and_resend(state, &MeasurementBasis::breidbart(), rng))
        }
        other => Err(QkdError::Usage(format!(
            "{} attack cannot be applied to a single pulse state",
            other.name()
        ))),
    }
}

fn measure_and_resend<R: Rng + ?Sized>(
    state: &BlochVector,
    basis: &MeasurementBasis,
    rng: &mut R,
) -> (Option<BlochVector>, Option<EveRecord>) {
    let outcome = measure(state, basis, rng);
    (
        Some(basis.eigenstate(outcome)),
        Some(EveRecord {
            guess: outcome,
            basis: basis.id,
        }),
    )
}

/// Beamsplitter attack: QBER 1/6 and information 2/3 on resent pulses, feasible
/// while `t_link <= 3/8 · P(n >= 2 | n >= 1)`.
pub fn beamsplitter_prediction(mu: f64, t_link: f64) -> Result<AttackPrediction> {
    if !(t_link > 0.0 && t_link <= 1.0) {
        return Err(QkdError::domain("t_link", t_link, "(0, 1]"));
    }
    let max_t = BEAMSPLITTER_RESEND_FRACTION * multiphoton_prob(mu)?.value();
    Ok(AttackPrediction {
        qber: BEAMSPLITTER_QBER,
        info_ae: BEAMSPLITTER_INFO,
        feasibility: Some(Feasibility {
            max_transmission: max_t,
            t_link,
            feasible: t_link <= max_t,
        }),
    })
}

/// Small-`mu` form of the feasibility threshold, `3 mu / 16`.
pub fn beamsplitter_threshold_approx(mu: f64) -> f64 {
    3.0 * mu / 16.0
}

/// Share of Bob's detections a beamsplitter attacker controls, `3 mu / (16 t)`, capped at 1.
pub fn beamsplitter_exposure(mu: f64, t_link: f64) -> f64 {
    (beamsplitter_threshold_approx(mu) / t_link).min(1.0)
}

/// Mean photon number at which the beamsplitter attacker controls exactly
/// [`BEAMSPLITTER_MATCHED_EXPOSURE`] of Bob's detections for a link loss in dB.
pub fn beamsplitter_matched_mu(loss_db: f64) -> Result<f64> {
    check_closed("loss_db", loss_db, 0.0, f64::MAX, "[0, inf)")?;
    let t = crate::photonics::db_to_transmission(loss_db);
    Ok(16.0 * BEAMSPLITTER_MATCHED_EXPOSURE * t / 3.0)
}

/// `P(Bob detects | n >= 1)` for Poisson pulses, each photon reaching and
/// registering in his detector with probability `t_link · eta`.
pub fn detection_given_nonempty(mu: f64, t_link: f64, eta: f64) -> f64 {
    let non_empty = -(-mu).exp_m1();
    let detected = -(-mu * t_link * eta).exp_m1();
    detected / non_empty
}

/// True when multiphoton pulses are more frequent than Bob's detections, so a
/// photon-number-splitting attacker can learn everything without disturbance.
pub fn pns_full_info_condition(mu: f64, t_link: f64, eta: f64) -> Result<bool> {
    check_closed("t_link", t_link, 0.0, 1.0, "[0, 1]")?;
    check_closed("eta", eta, 0.0, 1.0, "[0, 1]")?;
    let multi = multiphoton_prob(mu)?.value();
    Ok(multi > detection_given_nonempty(mu, t_link, eta))
}

/// Rate-accounting view of the PNS attack: no QBER, full information on the
/// exploitable share of Bob's detections.
pub fn pns_prediction(mu: f64, t_link: f64, eta: f64) -> Result<AttackPrediction> {
    let feasible = pns_full_info_condition(mu, t_link, eta)?;
    let multi = multiphoton_prob(mu)?.value();
    let detect = detection_given_nonempty(mu, t_link, eta);
    let share = if detect > 0.0 { (multi / detect).min(1.0) } else { 1.0 };
    Ok(AttackPrediction {
        qber: 0.0,
        info_ae: share,
        feasibility: Some(Feasibility {
            max_transmission: f64::NAN,
            t_link,
            feasible,
        }),
    })
}
