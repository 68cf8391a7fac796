//! Experiment configuration: a TOML document with `[system]`, `[protocol]`,
//! `[attack]`, `[distill]`, `[sweep]` and `[repeater]` sections. Unknown keys
//! are rejected and every value is checked against the library's
//! preconditions before anything runs.

use std::path::Path;

use serde::Deserialize;

use qkd_core::analytics::{OpticalError, SecurityCriterion, SystemParams};
use qkd_core::attacks::AttackStrategy;
use qkd_core::photonics::{Detector, FaintPulseSource, FiberChannel, PairSource};
use qkd_core::protocols::{ProtocolKind, SessionConfig, Source};
use qkd_core::QkdError;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub distill: DistillSection,
    pub sweep: Option<SweepSection>,
    pub repeater: Option<RepeaterSection>,
}

/// Defaults are the 1550 nm faint-pulse link at zero length.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub mu: f64,
    pub f_rep: f64,
    pub q: f64,
    pub alpha: f64,
    pub length: f64,
    pub eta: f64,
    pub p_dark: f64,
    pub n_det: u32,
    pub p_opt: Option<f64>,
    pub visibility: Option<f64>,
    pub p_acc: f64,
    pub criterion: String,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::band_1550();
        SystemSection {
            mu: p.mu,
            f_rep: p.f_rep,
            q: p.q,
            alpha: p.alpha,
            length: p.length,
            eta: p.eta,
            p_dark: p.p_dark,
            n_det: p.n_det,
            p_opt: None,
            visibility: None,
            p_acc: p.p_acc,
            criterion: "individual".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: String,
    pub n_pulses: usize,
    pub seed: u64,
    /// Overrides `system.q` for the session when given.
    pub q: Option<f64>,
    /// Hilbert-space angle between the two B92 states.
    pub b92_theta: f64,
    /// Probability that a pair window carries Bob's photon (pair sources).
    pub mu_eff: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: "bb84".into(),
            n_pulses: 100_000,
            seed: 1,
            q: None,
            b92_theta: std::f64::consts::FRAC_PI_4,
            mu_eff: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub strategy: String,
    pub fraction: f64,
    /// Probe overlap angle of the symmetric attack; alternatively give `qber`.
    pub x: Option<f64>,
    pub qber: Option<f64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            strategy: "none".into(),
            fraction: 1.0,
            x: None,
            qber: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillSection {
    pub sample_fraction: f64,
    pub target_error: f64,
    pub pa_rounds: usize,
}

impl Default for DistillSection {
    fn default() -> Self {
        DistillSection {
            sample_fraction: 0.1,
            target_error: 1e-3,
            pa_rounds: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    /// Adds pulse-level columns, one seeded session per grid point.
    #[serde(default)]
    pub monte_carlo: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeaterSection {
    pub sections: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Length,
    Mu,
    Eta,
    PDark,
    Alpha,
    POpt,
}

impl SweepVariable {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "length" => Self::Length,
            "mu" => Self::Mu,
            "eta" => Self::Eta,
            "p_dark" => Self::PDark,
            "alpha" => Self::Alpha,
            "p_opt" => Self::POpt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Length => "length",
            Self::Mu => "mu",
            Self::Eta => "eta",
            Self::PDark => "p_dark",
            Self::Alpha => "alpha",
            Self::POpt => "p_opt",
        }
    }

    pub fn apply(self, p: &SystemParams, v: f64) -> SystemParams {
        let mut p = *p;
        match self {
            Self::Length => p.length = v,
            Self::Mu => p.mu = v,
            Self::Eta => p.eta = v,
            Self::PDark => p.p_dark = v,
            Self::Alpha => p.alpha = v,
            Self::POpt => p.optical = OpticalError::POpt(v),
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub monte_carlo: bool,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        let n = qkd_core::analytics::grid_len(self.min, self.max, self.step).expect("validated");
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distill {
    pub sample_fraction: f64,
    pub target_error: f64,
    pub pa_rounds: usize,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub system: SystemParams,
    pub session: SessionConfig,
    pub distill: Distill,
    pub sweep: Option<Sweep>,
    pub repeater_sections: Vec<u32>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pulses: Option<usize>,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(QkdError::Config {
        field: field.into(),
        reason: reason.into(),
    }
    .to_string())
}

fn attack_from(a: &AttackSection) -> Result<AttackStrategy, CliError> {
    let fraction = a.fraction;
    let attack = match a.strategy.as_str() {
        "none" => AttackStrategy::None,
        "intercept-resend" => AttackStrategy::InterceptResend { fraction },
        "breidbart" => AttackStrategy::Breidbart { fraction },
        "symmetric" => match (a.x, a.qber) {
            (Some(x), None) => AttackStrategy::SymmetricIndividual { x },
            (None, Some(d)) => AttackStrategy::symmetric_for_qber(d).map_err(|e| invalid("attack.qber", e.to_string()))?,
            _ => return Err(invalid("attack", "the symmetric attack needs exactly one of `x` or `qber`")),
        },
        "beamsplitter" => AttackStrategy::Beamsplitter,
        "pns" => AttackStrategy::Pns,
        other => {
            return Err(invalid(
                "attack.strategy",
                format!("unknown strategy `{other}` (none, intercept-resend, breidbart, symmetric, beamsplitter, pns)"),
            ))
        }
    };
    attack.validate().map_err(CliError::from_validation)?;
    Ok(attack)
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn into_experiment(self, ov: Overrides) -> Result<Experiment, CliError> {
        let s = &self.system;
        let optical = match (s.p_opt, s.visibility) {
            (Some(p), None) => OpticalError::POpt(p),
            (None, Some(v)) => OpticalError::Visibility(v),
            (None, None) => OpticalError::POpt(0.0),
            (Some(_), Some(_)) => return Err(invalid("system", "give either `p_opt` or `visibility`, not both")),
        };
        let criterion = match s.criterion.as_str() {
            "individual" => SecurityCriterion::Individual,
            "coherent" => SecurityCriterion::Coherent,
            other => return Err(invalid("system.criterion", format!("unknown criterion `{other}` (individual, coherent)"))),
        };
        let system = SystemParams {
            mu: s.mu,
            f_rep: s.f_rep,
            q: s.q,
            alpha: s.alpha,
            length: s.length,
            eta: s.eta,
            p_dark: s.p_dark,
            n_det: s.n_det,
            optical,
            p_acc: s.p_acc,
            criterion,
        };
        system.validate().map_err(CliError::from_validation)?;

        let pr = &self.protocol;
        let protocol = ProtocolKind::parse(&pr.kind).ok_or_else(|| {
            invalid(
                "protocol.kind",
                format!("unknown protocol `{}` (bb84, b92, six-state, epr-bb84, ekert)", pr.kind),
            )
        })?;
        let source = if protocol.is_entanglement_based() {
            Source::Pair(PairSource {
                p_acc: s.p_acc,
                mu_eff: pr.mu_eff,
            })
        } else {
            Source::FaintPulse(FaintPulseSource { mu: s.mu, f_rep: s.f_rep })
        };
        let session = SessionConfig {
            protocol,
            n_pulses: ov.pulses.unwrap_or(pr.n_pulses),
            source,
            channel: FiberChannel { alpha: s.alpha, length: s.length },
            detector: Detector { eta: s.eta, p_dark: s.p_dark },
            n_det: s.n_det,
            q: pr.q.unwrap_or(s.q),
            attack: attack_from(&self.attack)?,
            seed: ov.seed.unwrap_or(pr.seed),
            b92_theta: pr.b92_theta,
        };
        session.validate().map_err(CliError::from_validation)?;

        let d = &self.distill;
        if !(d.sample_fraction > 0.0 && d.sample_fraction < 1.0) {
            return Err(invalid("distill.sample_fraction", format!("must lie in (0, 1), got {}", d.sample_fraction)));
        }
        if !(0.0..=1.0).contains(&d.target_error) {
            return Err(invalid("distill.target_error", format!("must lie in [0, 1], got {}", d.target_error)));
        }
        let distill = Distill {
            sample_fraction: d.sample_fraction,
            target_error: d.target_error,
            pa_rounds: d.pa_rounds,
        };

        let sweep = match self.sweep {
            None => None,
            Some(sw) => {
                let variable = SweepVariable::parse(&sw.variable).ok_or_else(|| {
                    invalid(
                        "sweep.variable",
                        format!("unknown variable `{}` (length, mu, eta, p_dark, alpha, p_opt)", sw.variable),
                    )
                })?;
                qkd_core::analytics::grid_len(sw.min, sw.max, sw.step)
                    .map_err(|e| invalid("sweep", e.to_string()))?;
                for v in [sw.min, sw.max] {
                    variable.apply(&system, v).validate().map_err(CliError::from_validation)?;
                }
                Some(Sweep {
                    variable,
                    min: sw.min,
                    max: sw.max,
                    step: sw.step,
                    monte_carlo: sw.monte_carlo,
                })
            }
        };

        let repeater_sections = match self.repeater {
            None => vec![1, 2, 3, 4],
            Some(r) => {
                if r.sections.is_empty() || r.sections.contains(&0) {
                    return Err(invalid("repeater.sections", "must be a non-empty list of positive counts"));
                }
                r.sections
            }
        };

        Ok(Experiment {
            system,
            session,
            distill,
            sweep,
            repeater_sections,
        })
    }
}
