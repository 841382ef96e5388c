//! Rate–distortion bookkeeping for a binary symmetric source.
//!
//! A frame carries `L = MNK` source bits which are lossy-compressed to
//! `S = MNR` channel bits. For Hamming distortion `D` the minimum rate is
//! `R = K (1 - H_b(D))`, and a frame is in outage when the instantaneous
//! capacity `C < R`.

use crate::{Error, Result};

/// Bisection steps for [`inv_binary_entropy`]; `2^-64 · 1/2` is far below
/// the requested `1e-12`.
const BISECTION_STEPS: usize = 64;

/// `H_b(p) = -p log2 p - (1-p) log2 (1-p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// The `p ∈ [0, 1/2]` with `H_b(p) = v`, by bisection.
pub fn inv_binary_entropy(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("entropy value {v} outside [0, 1]")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    if v == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A consistent `(D, R, K)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossyTarget {
    /// Hamming distortion (equivalently the BER), in `[0, 1/2]`.
    pub distortion: f64,
    /// Target rate in bits per DD symbol.
    pub rate: f64,
    /// Bits per modulation symbol.
    pub bits_per_symbol: u32,
}

impl LossyTarget {
    /// Lossy compression rate `R_S = R / K`.
    pub fn compression_rate(&self) -> f64 {
        self.rate / self.bits_per_symbol as f64
    }

    /// Source bits per frame, `L = MNK`.
    pub fn source_bits(&self, mn: usize) -> f64 {
        (mn as u64 * self.bits_per_symbol as u64) as f64
    }

    /// Codeword length per frame, `S = MNR`.
    pub fn codeword_bits(&self, mn: usize) -> f64 {
        mn as f64 * self.rate
    }

    /// Distortion achieved when the channel supports `capacity` bits/symbol:
    /// `H_b^{-1}(1 - C/K)`, clamped to `0` once `C >= K`.
    pub fn distortion_at_capacity(&self, capacity: f64) -> Result<f64> {
        let v = 1.0 - capacity / self.bits_per_symbol as f64;
        inv_binary_entropy(v.clamp(0.0, 1.0))
    }
}

/// `R = K (1 - H_b(D))`.
pub fn rate_from_distortion(distortion: f64, bits_per_symbol: u32) -> Result<LossyTarget> {
    if !(0.0..=0.5).contains(&distortion) {
        return Err(Error::invalid(format!("distortion {distortion} outside [0, 1/2]")));
    }
    if bits_per_symbol == 0 {
        return Err(Error::invalid("bits per symbol K must be at least 1"));
    }
    let k = bits_per_symbol as f64;
    let rate = (k * (1.0 - binary_entropy(distortion)?)).max(0.0);
    Ok(LossyTarget { distortion, rate, bits_per_symbol })
}

/// SNR-normalized threshold `2^{K - K H_b(D)} - 1 = 2^R - 1`; the caller
/// divides by `E_s/N_0`.
pub fn snr_threshold(target: &LossyTarget) -> f64 {
    target.rate.exp2() - 1.0
}
