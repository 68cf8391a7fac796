use rand::Rng;

use crate::infomath::{measure, BlochVector, MeasurementBasis};
use crate::photonics::{detector_gate, Detector, Gate};

/// Bob's receiver: a set of analysis bases, two detectors per basis.
///
/// With active choice one basis is selected per pulse. With passive choice
/// every photon picks its basis at a beamsplitter and all detectors are gated.
pub(crate) struct Station<'a> {
    bases: &'a [MeasurementBasis],
    passive: bool,
    det: Detector,
    t_link: f64,
    q: f64,
}

/// Passive basis choice needs two detectors for every basis.
pub(crate) fn passive_choice(n_bases: usize, n_det: u32) -> bool {
    n_bases > 1 && n_det as usize >= 2 * n_bases
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Detection {
    pub basis: usize,
    pub bit: Option<u8>,
    pub dark_only: bool,
}

impl<'a> Station<'a> {
    pub fn new(bases: &'a [MeasurementBasis], n_det: u32, det: Detector, t_link: f64, q: f64) -> Self {
        let passive = passive_choice(bases.len(), n_det);
        Station {
            bases,
            passive,
            det,
            t_link,
            q,
        }
    }

    /// Survival of a photon that crosses the fibre and must interfere.
    pub fn fibre(&self) -> f64 {
        self.t_link * self.q
    }

    /// Survival of a photon resent over an eavesdropper's lossless line.
    pub fn lossless(&self) -> f64 {
        self.q
    }

    pub fn t_link(&self) -> f64 {
        self.t_link
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Registers `photons` copies of `state`, each reaching the analyser with
    /// probability `survive`.
    pub fn detect<R: Rng + ?Sized>(
        &self,
        state: &BlochVector,
        photons: u64,
        survive: f64,
        rng: &mut R,
    ) -> Detection {
        let k = self.bases.len();
        let chosen = rng.random_range(0..k);

        // counts[basis][outcome]
        let mut counts = vec![[0u64; 2]; k];
        for _ in 0..photons {
            if rng.random::<f64>() >= survive {
                continue;
            }
            let b = if self.passive { rng.random_range(0..k) } else { chosen };
            let outcome = measure(state, &self.bases[b], rng);
            counts[b][usize::from(outcome)] += 1;
        }

        let gated: Vec<usize> = if self.passive { (0..k).collect() } else { vec![chosen] };
        let mut gates = vec![[Gate::default(); 2]; k];
        for &b in &gated {
            for o in 0..2 {
                gates[b][o] = detector_gate(counts[b][o], &self.det, rng);
            }
        }

        let clicked: Vec<usize> = gated
            .iter()
            .copied()
            .filter(|&b| gates[b].iter().any(Gate::clicked))
            .collect();
        let basis = match clicked.len() {
            0 => return Detection { basis: chosen, bit: None, dark_only: false },
            1 => clicked[0],
            n => clicked[rng.random_range(0..n)],
        };
        let [g0, g1] = gates[basis];
        let bit = match (g0.clicked(), g1.clicked()) {
            (true, false) => 0,
            (false, true) => 1,
            // Double click: assign a random value.
            _ => u8::from(rng.random::<bool>()),
        };
        Detection {
            basis,
            bit: Some(bit),
            dark_only: !(g0.photon || g1.photon),
        }
    }
}
