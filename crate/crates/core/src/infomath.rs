//! Qubit geometry on the Poincaré sphere, projective measurement sampling and
//! the binary Shannon quantities shared by the rest of the crate.
//!
//! Bloch coordinates follow the Pauli ordering: `m1` is the X component, `m2`
//! the Y component and `m3` the Z component. The computational basis is Z;
//! bit 0 is the `+axis` eigenstate of any basis and bit 1 the `-axis` one.

use std::fmt;
use std::ops::Neg;

use rand::Rng;

use crate::error::{check_closed, QkdError, Result};
use crate::tol::ALGEBRAIC;

/// A value constrained to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);
    pub const HALF: Probability = Probability(0.5);

    pub fn new(value: f64) -> Result<Self> {
        check_closed("probability", value, 0.0, 1.0, "[0, 1]").map(Probability)
    }

    /// Clamps rounding noise just outside `[0, 1]`; anything further out is an error.
    pub fn new_lenient(value: f64) -> Result<Self> {
        if (-ALGEBRAIC..=1.0 + ALGEBRAIC).contains(&value) {
            Ok(Probability(value.clamp(0.0, 1.0)))
        } else {
            Err(QkdError::domain("probability", value, "[0, 1]"))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Point on (pure) or inside (mixed) the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl BlochVector {
    pub const PLUS_Z: BlochVector = BlochVector::raw(0.0, 0.0, 1.0);
    pub const MINUS_Z: BlochVector = BlochVector::raw(0.0, 0.0, -1.0);
    pub const PLUS_X: BlochVector = BlochVector::raw(1.0, 0.0, 0.0);
    pub const MINUS_X: BlochVector = BlochVector::raw(-1.0, 0.0, 0.0);
    pub const PLUS_Y: BlochVector = BlochVector::raw(0.0, 1.0, 0.0);
    pub const MINUS_Y: BlochVector = BlochVector::raw(0.0, -1.0, 0.0);
    /// The maximally mixed state.
    pub const CENTER: BlochVector = BlochVector::raw(0.0, 0.0, 0.0);

    const fn raw(m1: f64, m2: f64, m3: f64) -> Self {
        BlochVector { m1, m2, m3 }
    }

    /// Rejects vectors outside the unit ball.
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let v = BlochVector::raw(m1, m2, m3);
        let n = v.norm();
        if n.is_finite() && n <= 1.0 + ALGEBRAIC {
            Ok(v)
        } else {
            Err(QkdError::domain("|m|", n, "[0, 1]"))
        }
    }

    /// Pure state on the Z–X great circle, `angle` radians away from `+Z` towards `+X`.
    pub fn on_zx_circle(angle: f64) -> Self {
        BlochVector::raw(angle.sin(), 0.0, angle.cos())
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.m1 * other.m1 + self.m2 * other.m2 + self.m3 * other.m3
    }

    pub fn is_pure(&self) -> bool {
        (self.norm() - 1.0).abs() <= ALGEBRAIC
    }

    /// Uniform depolarisation: the vector scaled by `eta ∈ [0, 1]`.
    pub fn shrink(&self, eta: f64) -> Result<Self> {
        check_closed("eta", eta, 0.0, 1.0, "[0, 1]")?;
        Ok(BlochVector::raw(self.m1 * eta, self.m2 * eta, self.m3 * eta))
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector::raw(-self.m1, -self.m2, -self.m3)
    }
}

/// Label of a measurement basis. `Custom` bases live on the Z–X great circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisId {
    Z,
    X,
    Y,
    Custom(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBasis {
    pub id: BasisId,
    pub axis: BlochVector,
}

impl MeasurementBasis {
    pub const Z: MeasurementBasis = MeasurementBasis {
        id: BasisId::Z,
        axis: BlochVector::PLUS_Z,
    };
    pub const X: MeasurementBasis = MeasurementBasis {
        id: BasisId::X,
        axis: BlochVector::PLUS_X,
    };
    pub const Y: MeasurementBasis = MeasurementBasis {
        id: BasisId::Y,
        axis: BlochVector::PLUS_Y,
    };

    /// Basis whose `+` axis sits at `angle` on the Z–X great circle.
    pub fn custom(angle: f64) -> Self {
        MeasurementBasis {
            id: BasisId::Custom(angle),
            axis: BlochVector::on_zx_circle(angle),
        }
    }

    /// Halfway between Z and X.
    pub fn breidbart() -> Self {
        Self::custom(std::f64::consts::FRAC_PI_4)
    }

    pub fn from_id(id: BasisId) -> Self {
        match id {
            BasisId::Z => Self::Z,
            BasisId::X => Self::X,
            BasisId::Y => Self::Y,
            BasisId::Custom(a) => Self::custom(a),
        }
    }

    /// Eigenstate encoding `bit` (0 → `+axis`, 1 → `-axis`).
    pub fn eigenstate(&self, bit: u8) -> BlochVector {
        if bit == 0 {
            self.axis
        } else {
            -self.axis
        }
    }
}

/// Ordered sequence of bits stored one per byte (values 0 or 1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        BitString {
            bits: Vec::with_capacity(n),
        }
    }

    /// Any non-zero byte is read as 1.
    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        BitString {
            bits: bits.into_iter().map(|b| u8::from(b != 0)).collect(),
        }
    }

    pub fn push(&mut self, bit: u8) {
        self.bits.push(u8::from(bit != 0));
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<u8> {
        self.bits.get(i).copied()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    /// Positions where the two strings differ, counted over the shorter length.
    pub fn hamming_distance(&self, other: &BitString) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl FromIterator<u8> for BitString {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        BitString::from_bits(iter)
    }
}

impl Extend<u8> for BitString {
    fn extend<I: IntoIterator<Item = u8>>(&mut self, iter: I) {
        for b in iter {
            self.push(b);
        }
    }
}

/// Binary Shannon entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_closed("p", p, 0.0, 1.0, "[0, 1]")?;
    Ok(entropy_unchecked(p))
}

#[inline]
pub(crate) fn entropy_unchecked(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(p) + term(1.0 - p)
}

/// Alice–Bob information `1 - h(D)` over a binary symmetric channel with error `D ∈ [0, 1/2]`.
pub fn mutual_info_bob(d: f64) -> Result<f64> {
    check_closed("D", d, 0.0, 0.5, "[0, 0.5]")?;
    Ok(1.0 - entropy_unchecked(d))
}

/// Probability `(1 + s·b)/2` that state `s` passes the projector onto `b`.
pub fn overlap_probability(s: &BlochVector, b: &BlochVector) -> Result<Probability> {
    for v in [s, b] {
        if !v.is_pure() {
            return Err(QkdError::domain("|m|", v.norm(), "unit norm"));
        }
    }
    Probability::new_lenient((1.0 + s.dot(b)) / 2.0)
}

/// Projective measurement of `state` along `basis`. Mixed states are accepted:
/// the outcome is 0 with probability `(1 + state·axis)/2`.
pub fn measure<R: Rng + ?Sized>(state: &BlochVector, basis: &MeasurementBasis, rng: &mut R) -> u8 {
    let p0 = (1.0 + state.dot(&basis.axis)) / 2.0;
    u8::from(rng.random::<f64>() >= p0)
}
