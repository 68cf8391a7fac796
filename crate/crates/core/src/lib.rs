//! Simulation and security analysis of BB84-family quantum key distribution.
//!
//! * [`infomath`]: Bloch-vector geometry, measurement sampling, binary entropy.
//! * [`photonics`]: sources, fibre loss and detector clicks.
//! * [`protocols`]: seeded Monte Carlo sessions for BB84, B92, six-state and
//!   entanglement-based variants, plus sifting.
//! * [`attacks`]: eavesdropping strategies with per-pulse sampling and exact predictions.
//! * [`distill`]: QBER estimation, parity error correction, XOR privacy
//!   amplification, advantage distillation and the one-way secret-rate bound.
//! * [`analytics`]: closed-form rate/QBER models, repeater scaling, thresholds, CHSH.

pub mod analytics;
pub mod attacks;
pub mod distill;
pub mod error;
pub mod infomath;
pub mod photonics;
pub mod protocols;

pub use error::{QkdError, Result};

/// Shared numeric tolerances and reference constants.
pub mod tol {
    /// Agreement required of quantities that are equal in exact arithmetic.
    pub const ALGEBRAIC: f64 = 1e-12;
    /// Width, in standard deviations, of every statistical acceptance band.
    pub const SIGMAS: f64 = 4.0;
    /// Error rate where Bob's and Eve's individual-attack information curves cross, `(1 - 1/√2)/2`.
    pub const D0: f64 = (1.0 - std::f64::consts::FRAC_1_SQRT_2) / 2.0;
}

/// Deterministic random stream used by every sampler in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the stream for `(seed, stream)`; distinct stream indices are independent.
pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    use rand::SeedableRng;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
