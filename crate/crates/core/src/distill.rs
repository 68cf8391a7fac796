//! Classical post-processing of the sifted key.
//!
//! Error correction uses the pairwise parity scheme: random disjoint pairs,
//! announce parities, keep the first bit of agreeing pairs and drop both bits
//! otherwise. Privacy amplification replaces random pairs by their XOR. Eve's
//! side of both steps is tracked analytically through her per-bit guess
//! probability; disclosed parities are counted as fully leaked.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::attacks::JointDistribution;
use crate::error::{check_closed, QkdError, Result};
use crate::infomath::{entropy_unchecked, BitString, Probability};

#[derive(Debug, Clone, PartialEq)]
pub struct DistillationReport {
    pub initial_length: usize,
    pub final_length: usize,
    /// Error rate left in the key, as estimated by Alice and Bob.
    pub residual_error: f64,
    /// Eve's information per key bit before and after the step.
    pub eve_info_before: f64,
    pub eve_info_after: f64,
    /// Bits announced over the public channel.
    pub disclosed_bits: usize,
    pub rounds: usize,
}

fn random_pairs<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    idx.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

fn check_equal(a: &BitString, b: &BitString) -> Result<()> {
    if a.len() != b.len() {
        return Err(QkdError::Usage(format!(
            "keys differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Compares a random `sample_fraction` of positions in public and discards them.
pub fn estimate_qber<R: Rng + ?Sized>(
    key_a: &BitString,
    key_b: &BitString,
    sample_fraction: f64,
    rng: &mut R,
) -> Result<(Probability, BitString, BitString)> {
    check_equal(key_a, key_b)?;
    if !(sample_fraction > 0.0 && sample_fraction < 1.0) {
        return Err(QkdError::domain("sample_fraction", sample_fraction, "(0, 1)"));
    }
    let m = (sample_fraction * key_a.len() as f64).round() as usize;
    if m == 0 {
        return Err(QkdError::Estimation("sample is empty".into()));
    }
    let mut sampled = vec![false; key_a.len()];
    for i in rand::seq::index::sample(rng, key_a.len(), m) {
        sampled[i] = true;
    }
    let mut mismatches = 0usize;
    let mut rest_a = BitString::with_capacity(key_a.len() - m);
    let mut rest_b = BitString::with_capacity(key_a.len() - m);
    for (i, (a, b)) in key_a.iter().zip(key_b.iter()).enumerate() {
        if sampled[i] {
            mismatches += usize::from(a != b);
        } else {
            rest_a.push(a);
            rest_b.push(b);
        }
    }
    Ok((Probability::new(mismatches as f64 / m as f64)?, rest_a, rest_b))
}

/// Error rate after one parity round that started at error rate `d`.
pub fn parity_round_map(d: f64) -> f64 {
    let kept_wrong = d * d;
    let kept_right = (1.0 - d) * (1.0 - d);
    kept_wrong / (kept_wrong + kept_right)
}

/// Runs parity rounds until the estimated error is at most `target_error`.
///
/// The error rate entering each round is inferred from the share `r` of
/// disagreeing parities, `r = 2D(1 − D)`.
pub fn parity_error_correct<R: Rng + ?Sized>(
    key_a: &BitString,
    key_b: &BitString,
    rng: &mut R,
    target_error: f64,
) -> Result<(BitString, BitString, DistillationReport)> {
    check_equal(key_a, key_b)?;
    check_closed("target_error", target_error, 0.0, 1.0, "[0, 1]")?;
    if key_a.len() < 2 {
        return Err(QkdError::Usage("error correction needs at least two bits".into()));
    }
    let mut a = key_a.clone();
    let mut b = key_b.clone();
    let mut report = DistillationReport {
        initial_length: a.len(),
        final_length: a.len(),
        residual_error: 0.5,
        eve_info_before: 0.0,
        eve_info_after: 0.0,
        disclosed_bits: 0,
        rounds: 0,
    };
    loop {
        if a.len() < 2 {
            return Err(QkdError::CorrectionFailed { report: Box::new(report) });
        }
        let pairs = random_pairs(a.len(), rng);
        let mut next_a = BitString::with_capacity(pairs.len());
        let mut next_b = BitString::with_capacity(pairs.len());
        let mut disagree = 0usize;
        for &(i, j) in &pairs {
            let (ai, aj, bi, bj) = (a.as_slice()[i], a.as_slice()[j], b.as_slice()[i], b.as_slice()[j]);
            if ai ^ aj == bi ^ bj {
                next_a.push(ai);
                next_b.push(bi);
            } else {
                disagree += 1;
            }
        }
        let r = (disagree as f64 / pairs.len() as f64).min(0.5);
        let d_in = (1.0 - (1.0 - 2.0 * r).sqrt()) / 2.0;
        report.rounds += 1;
        report.disclosed_bits += pairs.len();
        report.final_length = next_a.len();
        report.residual_error = parity_round_map(d_in);
        a = next_a;
        b = next_b;
        if report.residual_error <= target_error && !a.is_empty() {
            return Ok((a, b, report));
        }
    }
}

/// Eve's guess probability on the XOR of two bits she guesses with probability `g`.
pub fn xor_guess_map(g: f64) -> f64 {
    g * g + (1.0 - g) * (1.0 - g)
}

/// Replaces random disjoint pairs by their XOR, `rounds` times.
///
/// Use the same generator state on both sides so Alice and Bob pick the same pairs.
pub fn privacy_amplify_xor<R: Rng + ?Sized>(
    key: &BitString,
    eve_bit_knowledge: f64,
    rounds: usize,
    rng: &mut R,
) -> Result<(BitString, DistillationReport)> {
    let g0 = check_closed("eve_bit_knowledge", eve_bit_knowledge, 0.5, 1.0, "[0.5, 1]")?;
    let max_rounds = if key.is_empty() { 0 } else { key.len().ilog2() as usize };
    if rounds > max_rounds {
        return Err(QkdError::Usage(format!(
            "{rounds} XOR rounds exceed log2 of the key length {}",
            key.len()
        )));
    }
    let mut k = key.clone();
    let mut g = g0;
    for _ in 0..rounds {
        let pairs = random_pairs(k.len(), rng);
        k = pairs.iter().map(|&(i, j)| k.as_slice()[i] ^ k.as_slice()[j]).collect();
        g = xor_guess_map(g);
    }
    let report = DistillationReport {
        initial_length: key.len(),
        final_length: k.len(),
        residual_error: 0.0,
        eve_info_before: 1.0 - entropy_unchecked(g0),
        eve_info_after: 1.0 - entropy_unchecked(g),
        disclosed_bits: 0,
        rounds,
    };
    Ok((k, report))
}

/// One-way secret-key rate bound `max(I_AB − I_AE, I_AB − I_BE)`; negative means stop.
pub fn csiszar_korner_rate(i_ab: f64, i_ae: f64, i_be: f64) -> f64 {
    (i_ab - i_ae).max(i_ab - i_be)
}

/// Outcome of one advantage-distillation block, conditioned on Bob accepting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvantageOutcome {
    pub bob_error: f64,
    pub eve_error: f64,
    pub acceptance: f64,
}

fn majority_wrong(q: f64, n: u32) -> f64 {
    // Binomial upper tail P(X > n/2), X ~ Bin(n, q), with a running coefficient.
    let mut coeff = 1.0f64;
    let mut tail = 0.0;
    for j in 0..=n {
        if j > 0 {
            coeff *= (n - j + 1) as f64 / j as f64;
        }
        if 2 * j > n {
            tail += coeff * q.powi(j as i32) * (1.0 - q).powi((n - j) as i32);
        }
    }
    tail
}

/// Alice announces `block_n` positions holding the same bit; Bob accepts when
/// his bits there all agree, and Eve takes a majority vote over her symbols.
/// Exact enumeration over `joint`.
pub fn advantage_distillation(joint: &JointDistribution, block_n: u32) -> Result<AdvantageOutcome> {
    if block_n == 0 || block_n % 2 == 0 {
        return Err(QkdError::Usage(format!("block_n must be odd and positive, got {block_n}")));
    }
    let n = block_n as i32;
    let (mut accept, mut bob_wrong, mut eve_wrong) = (0.0, 0.0, 0.0);
    for alpha in 0..2u8 {
        let pa = joint.alice_marginal(alpha);
        if pa == 0.0 {
            continue;
        }
        for beta in 0..2u8 {
            let pb = (joint.prob(alpha, beta, 0) + joint.prob(alpha, beta, 1)) / pa;
            if pb == 0.0 {
                continue;
            }
            let branch = pa * pb.powi(n);
            let q = joint.prob(alpha, beta, 1 - alpha) / (pa * pb);
            accept += branch;
            if beta != alpha {
                bob_wrong += branch;
            }
            eve_wrong += branch * majority_wrong(q, block_n);
        }
    }
    if accept == 0.0 {
        return Err(QkdError::Estimation("no block is ever accepted".into()));
    }
    Ok(AdvantageOutcome {
        bob_error: bob_wrong / accept,
        eve_error: eve_wrong / accept,
        acceptance: accept,
    })
}
