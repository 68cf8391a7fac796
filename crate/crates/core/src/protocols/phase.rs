use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{QkdError, Result};

/// One row of the phase-coding truth table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseOutcome {
    pub compatible: bool,
    /// 0 for constructive interference, 1 for destructive; absent when incompatible.
    pub bit: Option<u8>,
}

const PHASE_TOL: f64 = 1e-9;

fn snap(phi: f64, allowed: &[f64], name: &'static str, domain: &'static str) -> Result<usize> {
    allowed
        .iter()
        .position(|&a| (phi - a).abs() < PHASE_TOL)
        .ok_or(QkdError::domain(name, phi, domain))
}

/// Bob's outcome for Alice's phase `phi_a ∈ {0, π/2, π, 3π/2}` and his phase `phi_b ∈ {0, π/2}`.
pub fn phase_to_outcome(phi_a: f64, phi_b: f64) -> Result<PhaseOutcome> {
    let a = snap(phi_a, &[0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2], "phi_a", "{0, pi/2, pi, 3pi/2}")?;
    let b = snap(phi_b, &[0.0, FRAC_PI_2], "phi_b", "{0, pi/2}")?;
    // Phase difference in quarter turns.
    let diff = (a + 4 - b) % 4;
    debug_assert!(((phi_a - phi_b).rem_euclid(TAU) - diff as f64 * FRAC_PI_2).abs() < 1e-6);
    Ok(match diff {
        0 => PhaseOutcome { compatible: true, bit: Some(0) },
        2 => PhaseOutcome { compatible: true, bit: Some(1) },
        _ => PhaseOutcome { compatible: false, bit: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_table() {
        let rows = [
            (0.0, 0.0, Some(0)),
            (0.0, FRAC_PI_2, None),
            (PI, 0.0, Some(1)),
            (PI, FRAC_PI_2, None),
            (FRAC_PI_2, 0.0, None),
            (FRAC_PI_2, FRAC_PI_2, Some(0)),
            (3.0 * FRAC_PI_2, 0.0, None),
            (3.0 * FRAC_PI_2, FRAC_PI_2, Some(1)),
        ];
        for (a, b, bit) in rows {
            let out = phase_to_outcome(a, b).unwrap();
            assert_eq!(out.bit, bit, "({a}, {b})");
            assert_eq!(out.compatible, bit.is_some());
        }
    }

    #[test]
    fn rejects_phases_off_the_grid() {
        assert!(phase_to_outcome(0.3, 0.0).is_err());
        assert!(phase_to_outcome(0.0, PI).is_err());
    }
}
