//! Delay–Doppler multipath channels and the effective DD-domain matrix.
//!
//! A channel is a short list of resolvable paths, each with a complex gain,
//! an integer delay tap `l` and an integer Doppler tap `k`. On an `M x N`
//! OTFS frame the effective channel is
//!
//! ```text
//! H_DD = sum_i h_i (F_N ⊗ I_M) Π^{l_i} Δ^{k_i} (F_N^H ⊗ I_M)
//! ```
//!
//! with `Π` the forward cyclic shift (`Π e_j = e_{(j+1) mod MN}`), `Δ =
//! diag(α^0, …, α^{MN-1})`, `α = exp(j2π/MN)` and `F_N` the unitary DFT
//! `F_N[a, b] = exp(-j2π ab/N)/√N`. Vectors are indexed `q = n·M + m`
//! (`n` Doppler/slot block, `m` delay bin), matching the Kronecker order.
//!
//! [`build_dd_matrix`] places the at most `P` nonzeros per row directly;
//! [`build_dd_matrix_dense`] multiplies the Kronecker factors literally and
//! is only meant as a reference for small frames.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result, C64};

/// OTFS frame geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// Subcarriers (delay bins).
    pub m: usize,
    /// Time slots (Doppler bins).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Slot duration in seconds; always `1 / delta_f`.
    pub slot_duration: f64,
    /// Bits per symbol (`2^K`-ary modulation).
    pub bits_per_symbol: u32,
}

impl GridParams {
    /// Critically sampled grid (`T · Δf = 1`).
    pub fn new(m: usize, n: usize, delta_f: f64, bits_per_symbol: u32) -> Result<Self> {
        Self::with_slot_duration(m, n, delta_f, 1.0 / delta_f, bits_per_symbol)
    }

    pub fn with_slot_duration(
        m: usize,
        n: usize,
        delta_f: f64,
        slot_duration: f64,
        bits_per_symbol: u32,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("grid must be non-empty, got M={m}, N={n}")));
        }
        if bits_per_symbol == 0 {
            return Err(Error::invalid("bits per symbol K must be at least 1"));
        }
        if !(delta_f.is_finite() && delta_f > 0.0 && slot_duration.is_finite() && slot_duration > 0.0) {
            return Err(Error::invalid("subcarrier spacing and slot duration must be positive"));
        }
        if ((slot_duration * delta_f) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "grid must be critically sampled: T*delta_f = {}",
                slot_duration * delta_f
            )));
        }
        Ok(Self { m, n, delta_f, slot_duration, bits_per_symbol })
    }

    /// `M x N` grid with the 15 kHz spacing used in the experiments.
    pub fn square(size: usize, bits_per_symbol: u32) -> Result<Self> {
        Self::new(size, size, 15e3, bits_per_symbol)
    }

    /// Vector length `MN`.
    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    /// Physical delay of tap `l`: `l / (M Δf)`.
    pub fn delay_seconds(&self, l: usize) -> f64 {
        l as f64 / (self.m as f64 * self.delta_f)
    }

    /// Physical Doppler shift of tap `k`: `k / (N T)`.
    pub fn doppler_hz(&self, k: i64) -> f64 {
        k as f64 / (self.n as f64 * self.slot_duration)
    }
}

/// One resolvable propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: C64,
    pub delay_idx: usize,
    pub doppler_idx: i64,
}

impl PathSpec {
    pub fn new(gain: C64, delay_idx: usize, doppler_idx: i64) -> Self {
        Self { gain, delay_idx, doppler_idx }
    }
}

/// A draw of `P >= 1` paths with pairwise distinct `(delay, Doppler)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    paths: Vec<PathSpec>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<PathSpec>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("a channel needs at least one path"));
        }
        let mut cells = HashSet::with_capacity(paths.len());
        for p in &paths {
            if !cells.insert((p.delay_idx, p.doppler_idx)) {
                return Err(Error::invalid(format!(
                    "paths must occupy distinct delay-Doppler cells, ({}, {}) repeats",
                    p.delay_idx, p.doppler_idx
                )));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::invalid("path gains must be finite"));
            }
        }
        Ok(Self { paths })
    }

    pub fn single(gain: C64, delay_idx: usize, doppler_idx: i64) -> Self {
        Self { paths: vec![PathSpec::new(gain, delay_idx, doppler_idx)] }
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `Σ |h_i|^2`.
    pub fn energy(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Checks that every tap fits the frame and that no two paths collapse
    /// onto the same operator `Π^l Δ^k` (Doppler taps are periodic in `MN`).
    pub fn validate_for(&self, grid: &GridParams) -> Result<()> {
        let mn = grid.dim();
        let mut cells = HashSet::with_capacity(self.paths.len());
        for p in &self.paths {
            if p.delay_idx >= mn {
                return Err(Error::invalid(format!("delay index {} must be < MN = {mn}", p.delay_idx)));
            }
            if p.doppler_idx.unsigned_abs() as usize >= mn {
                return Err(Error::invalid(format!("|doppler index| {} must be < MN = {mn}", p.doppler_idx)));
            }
            if !cells.insert((p.delay_idx, p.doppler_idx.rem_euclid(mn as i64))) {
                return Err(Error::invalid(format!(
                    "path at ({}, {}) aliases another path on a {}x{} frame",
                    p.delay_idx, p.doppler_idx, grid.m, grid.n
                )));
            }
        }
        Ok(())
    }
}

/// Draws `P` paths with uniform delay/Doppler profile.
///
/// Cells are drawn uniformly without replacement from
/// `[0, l_max] x [-k_max, k_max]`; gains are circularly-symmetric complex
/// Gaussian with variance `1/(2P)` per real dimension, so `E Σ|h_i|^2 = 1`.
pub fn sample_realization<R: Rng + ?Sized>(
    paths: usize,
    l_max: usize,
    k_max: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if paths == 0 {
        return Err(Error::invalid("path count P must be at least 1"));
    }
    let delays = l_max + 1;
    let cells = delays * (2 * k_max + 1);
    if paths > cells {
        return Err(Error::invalid(format!("P = {paths} exceeds the {cells} available delay-Doppler cells")));
    }
    let picks = index::sample(rng, cells, paths);
    let sigma = (0.5 / paths as f64).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
    let paths = picks
        .into_iter()
        .map(|cell| {
            let delay_idx = cell % delays;
            let doppler_idx = (cell / delays) as i64 - k_max as i64;
            let gain = C64::new(normal.sample(rng), normal.sample(rng));
            PathSpec { gain, delay_idx, doppler_idx }
        })
        .collect();
    Ok(ChannelRealization { paths })
}

/// `Π^l` for the forward cyclic shift, `0 <= l <= MN`.
pub fn permutation_power(mn: usize, l: usize) -> Result<DMatrix<f64>> {
    if mn == 0 || l > mn {
        return Err(Error::invalid(format!("shift {l} out of range for dimension {mn}")));
    }
    let mut p = DMatrix::zeros(mn, mn);
    for j in 0..mn {
        p[((j + l) % mn, j)] = 1.0;
    }
    Ok(p)
}

/// `Δ^k = diag(α^{0·k}, …, α^{(MN-1)k})`, `|k| <= MN`.
pub fn doppler_power(mn: usize, k: i64) -> Result<DMatrix<C64>> {
    if mn == 0 || k.unsigned_abs() as usize > mn {
        return Err(Error::invalid(format!("Doppler power {k} out of range for dimension {mn}")));
    }
    let mut d = DMatrix::zeros(mn, mn);
    for q in 0..mn {
        d[(q, q)] = root_of_unity(q as i64 * k, mn);
    }
    Ok(d)
}

/// `exp(j2π·num/den)` with the exponent reduced before the trig call.
pub(crate) fn root_of_unity(num: i64, den: usize) -> C64 {
    let r = num.rem_euclid(den as i64);
    if r == 0 {
        return C64::new(1.0, 0.0);
    }
    C64::from_polar(1.0, 2.0 * PI * r as f64 / den as f64)
}

/// Unitary `N`-point DFT matrix.
pub fn dft_matrix(n: usize) -> DMatrix<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |a, b| root_of_unity(-((a * b) as i64), n) * scale)
}

/// `F_N ⊗ I_M`.
pub fn dft_kron_identity(grid: &GridParams) -> DMatrix<C64> {
    dft_matrix(grid.n).kronecker(&DMatrix::<C64>::identity(grid.m, grid.m))
}

/// Sparse `MN x MN` DD-domain channel matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct DDMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    realization: ChannelRealization,
}

impl DDMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    /// Stored nonzeros of row `r` as `(column, value)` pairs, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// Number of stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(col, _)| col == c).map_or(C64::new(0.0, 0.0), |(_, v)| v)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                d[(r, c)] = v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!("vector length {} != MN = {}", x.len(), self.dim)));
        }
        Ok((0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }
}

/// Direct placement of the nonzeros of `H_DD`.
///
/// For one path the operator `(F_N ⊗ I_M) Π^l Δ^k (F_N^H ⊗ I_M)` maps DD
/// column `(n - k mod N, m - l mod M)` to row `(n, m)` with phase
/// `α^{(m-l)k} · exp(-j2π s n'/N)`, where `n' = (n - k) mod N` and `s` is the
/// number of times the delay shift wraps a slot boundary (`m - l = m' - sM`).
pub fn build_dd_matrix(grid: &GridParams, ch: &ChannelRealization) -> Result<DDMatrix> {
    ch.validate_for(grid)?;
    let (m_sz, n_sz, mn) = (grid.m as i64, grid.n as i64, grid.dim());
    let mut row_ptr = Vec::with_capacity(mn + 1);
    let mut cols = Vec::with_capacity(mn * ch.len());
    let mut vals = Vec::with_capacity(mn * ch.len());
    let mut scratch: Vec<(usize, C64)> = Vec::with_capacity(ch.len());
    row_ptr.push(0);
    for n in 0..n_sz {
        for m in 0..m_sz {
            scratch.clear();
            for p in ch.paths() {
                let l = p.delay_idx as i64;
                let k = p.doppler_idx;
                let m_src = (m - l).rem_euclid(m_sz);
                let wraps = (m_src - (m - l)) / m_sz;
                let n_src = (n - k).rem_euclid(n_sz);
                // α^{(m-l)k} · exp(-j2π wraps·n_src/N), folded onto the MN-th roots of unity
                let phase = (m - l) * k - wraps * n_src * m_sz;
                let col = (n_src * m_sz + m_src) as usize;
                let v = p.gain * root_of_unity(phase, mn);
                match scratch.iter_mut().find(|(c, _)| *c == col) {
                    Some(slot) => slot.1 += v,
                    None => scratch.push((col, v)),
                }
            }
            scratch.sort_unstable_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(DDMatrix { dim: mn, row_ptr, cols, vals, realization: ch.clone() })
}

/// Reference construction multiplying the Kronecker factors; `O(P (MN)^3)`.
pub fn build_dd_matrix_dense(grid: &GridParams, ch: &ChannelRealization) -> Result<DMatrix<C64>> {
    ch.validate_for(grid)?;
    let mn = grid.dim();
    let u = dft_kron_identity(grid);
    let u_h = u.adjoint();
    let mut h = DMatrix::zeros(mn, mn);
    for p in ch.paths() {
        let shift = permutation_power(mn, p.delay_idx)?.map(|x| C64::new(x, 0.0));
        let doppler = doppler_power(mn, p.doppler_idx)?;
        h += (&u * shift * doppler * &u_h) * p.gain;
    }
    Ok(h)
}

/// `y = H_DD x + w`.
pub fn apply_channel(h: &DDMatrix, x: &[C64], noise: &[C64]) -> Result<Vec<C64>> {
    if noise.len() != h.dim() {
        return Err(Error::invalid(format!("noise length {} != MN = {}", noise.len(), h.dim())));
    }
    let mut y = h.mul_vec(x)?;
    for (yi, wi) in y.iter_mut().zip(noise) {
        *yi += wi;
    }
    Ok(y)
}
