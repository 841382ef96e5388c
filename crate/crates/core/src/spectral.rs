//! Capacity of the DD channel and the three-part split of its Gram matrix.
//!
//! `H_DD = U A U^H` with `U = F_N ⊗ I_M` and `A = Σ h_i Π^{l_i} Δ^{k_i}`,
//! so `H_DD^H H_DD` is unitarily similar to `A^H A`. In this delay–time
//! picture the Gram matrix is a cyclic band of half-width `max l - min l`,
//! which [`capacity`] factors directly. The dense eigenvalue route
//! ([`log_det_psd`], [`GramSpectrum`]) is kept for verification and for
//! reusing one decomposition across an SNR sweep.

use nalgebra::DMatrix;

use crate::dd_channel::{build_dd_matrix, root_of_unity, ChannelRealization, GridParams};
use crate::envelope::EnvelopeMatrix;
use crate::{Error, Result, C64};

/// `H_DD^H H_DD = H_A + H_B1 + H_B2` in the DD domain.
#[derive(Debug, Clone)]
pub struct GramDecomposition {
    /// `Σ|h_i|^2 I`.
    pub h_a: DMatrix<C64>,
    /// Cross terms of path pairs sharing a delay tap.
    pub h_b1: DMatrix<C64>,
    /// Cross terms of path pairs with different delay taps.
    pub h_b2: DMatrix<C64>,
}

impl GramDecomposition {
    pub fn dim(&self) -> usize {
        self.h_a.nrows()
    }

    pub fn total(&self) -> DMatrix<C64> {
        &self.h_a + &self.h_b1 + &self.h_b2
    }

    /// The scalar `Σ|h_i|^2` carried by `H_A`.
    pub fn energy(&self) -> f64 {
        self.h_a[(0, 0)].re
    }
}

/// `(F_N ⊗ I_M) X (F_N^H ⊗ I_M)` using the Kronecker structure, `O(N (MN)^2)`.
pub fn dd_similarity(grid: &GridParams, x: &DMatrix<C64>) -> DMatrix<C64> {
    let (m, n, mn) = (grid.m, grid.n, grid.dim());
    assert_eq!(x.shape(), (mn, mn), "similarity needs an MN x MN matrix");
    let scale = 1.0 / n as f64;
    let twiddle: Vec<C64> = (0..n).map(|t| root_of_unity(-(t as i64), n)).collect();
    let w = |a: usize, b: usize| twiddle[(a * b) % n];

    // Left factor: DFT down the slot index of every column.
    let mut left = DMatrix::<C64>::zeros(mn, mn);
    for c in 0..mn {
        for dm in 0..m {
            for row_n in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..n {
                    s += w(row_n, a) * x[(a * m + dm, c)];
                }
                left[(row_n * m + dm, c)] = s;
            }
        }
    }
    // Right factor: inverse DFT along the slot index of every row.
    let mut out = DMatrix::<C64>::zeros(mn, mn);
    for r in 0..mn {
        for dm in 0..m {
            for col_n in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for b in 0..n {
                    s += left[(r, b * m + dm)] * w(col_n, b).conj();
                }
                out[(r, col_n * m + dm)] = s * scale;
            }
        }
    }
    out
}

/// Adds `h_i^* h_j Λ + h_i h_j^* Λ^H` with `Λ = Δ^{-k_i} Π^{l_j - l_i} Δ^{k_j}`
/// (delay–time domain) into `acc`.
pub(crate) fn add_pair_term(acc: &mut DMatrix<C64>, mn: usize, pi: &crate::PathSpec, pj: &crate::PathSpec, scale: f64) {
    let coeff = pi.gain.conj() * pj.gain * scale;
    let shift = pj.delay_idx as i64 - pi.delay_idx as i64;
    for c in 0..mn {
        let r = (c as i64 + shift).rem_euclid(mn as i64) as usize;
        let v = coeff * root_of_unity(-(r as i64) * pi.doppler_idx + c as i64 * pj.doppler_idx, mn);
        acc[(r, c)] += v;
        acc[(c, r)] += v.conj();
    }
}

/// Splits `H_DD^H H_DD` into `H_A`, `H_B1` and `H_B2` by summing the
/// pairwise cross terms, then mapping them to the DD domain.
pub fn gram_components(grid: &GridParams, ch: &ChannelRealization) -> Result<GramDecomposition> {
    ch.validate_for(grid)?;
    let mn = grid.dim();
    let mut same = DMatrix::<C64>::zeros(mn, mn);
    let mut diff = DMatrix::<C64>::zeros(mn, mn);
    let paths = ch.paths();
    for (a, pi) in paths.iter().enumerate() {
        for pj in &paths[a + 1..] {
            let acc = if pi.delay_idx == pj.delay_idx { &mut same } else { &mut diff };
            add_pair_term(acc, mn, pi, pj, 1.0);
        }
    }
    let h_a = DMatrix::<C64>::identity(mn, mn) * C64::new(ch.energy(), 0.0);
    Ok(GramDecomposition { h_a, h_b1: dd_similarity(grid, &same), h_b2: dd_similarity(grid, &diff) })
}

/// `I + γ A^H A` in envelope form; the delay–time image of `I + γ H_DD^H H_DD`.
pub(crate) fn regularized_gram_envelope(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> EnvelopeMatrix {
    let mn = grid.dim();
    let n = mn as i64;
    let paths = ch.paths();
    let mut offsets: Vec<i64> =
        paths.iter().flat_map(|a| paths.iter().map(move |b| a.delay_idx as i64 - b.delay_idx as i64)).collect();
    offsets.sort_unstable();
    offsets.dedup();

    let mut env = EnvelopeMatrix::with_pattern(mn, |q| {
        let q = q as i64;
        offsets.iter().map(move |&d| (q + d).rem_euclid(n) as usize).collect::<Vec<_>>()
    });
    for q in 0..mn {
        env.add_lower(q, q, C64::new(1.0, 0.0));
    }
    // (A^H A)[q, q + l_i - l_j] += h_i^* h_j α^{-q k_i + (q + l_i - l_j) k_j}
    for pi in paths {
        for pj in paths {
            let coeff = pi.gain.conj() * pj.gain * gamma;
            let d = pi.delay_idx as i64 - pj.delay_idx as i64;
            for q in 0..n {
                let col = (q + d).rem_euclid(n);
                if col <= q {
                    let v = coeff * root_of_unity(-q * pi.doppler_idx + col * pj.doppler_idx, mn);
                    env.add_lower(q as usize, col as usize, v);
                }
            }
        }
    }
    env
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("SNR must be finite and non-negative, got {gamma}")))
    }
}

/// `log2 det(I + γ H_DD^H H_DD)` through the banded delay–time factorization.
pub fn log2_det_regularized(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    ch.validate_for(grid)?;
    Ok(regularized_gram_envelope(grid, ch, gamma).log2_det()?.max(0.0))
}

/// Normalized capacity `(1/MN) log2 det(I + γ H_DD^H H_DD)` in bits/symbol.
pub fn capacity(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<f64> {
    Ok(log2_det_regularized(grid, ch, gamma)? / grid.dim() as f64)
}

/// Relative Hermitian defect tolerated before an input is rejected.
pub const HERMITIAN_TOL: f64 = 1e-8;
/// Negative eigenvalues within this fraction of the spectral radius are rounding.
pub const EIGEN_CLAMP_TOL: f64 = 1e-10;

/// Eigenvalues of a Hermitian matrix, ascending, with the input checked for
/// Hermitian symmetry to [`HERMITIAN_TOL`] relative Frobenius error.
pub fn hermitian_eigenvalues(g: &DMatrix<C64>) -> Result<Vec<f64>> {
    if !g.is_square() {
        return Err(Error::invalid(format!("matrix must be square, got {:?}", g.shape())));
    }
    let norm = g.norm();
    let defect = (g - g.adjoint()).norm();
    if defect > HERMITIAN_TOL * norm {
        return Err(Error::invalid(format!("matrix is not Hermitian (defect {defect:e} vs norm {norm:e})")));
    }
    let mut ev: Vec<f64> = g.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Clamps rounding-level negative eigenvalues of a PSD spectrum to zero.
fn clamp_psd(ev: &mut [f64]) -> Result<()> {
    let radius = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for x in ev.iter_mut() {
        if *x < 0.0 {
            if -*x <= EIGEN_CLAMP_TOL * radius {
                *x = 0.0;
            } else {
                return Err(Error::invalid(format!("matrix is not positive semidefinite (eigenvalue {x:e})")));
            }
        }
    }
    Ok(())
}

/// `log2 det(I + γG)` for Hermitian PSD `G`, as `Σ log2(1 + γ λ_j)`.
pub fn log_det_psd(g: &DMatrix<C64>, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let mut ev = hermitian_eigenvalues(g)?;
    clamp_psd(&mut ev)?;
    Ok(ev.iter().map(|&l| (gamma * l).ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
}

/// Eigenvalues of `H_DD^H H_DD` for one realization; evaluates the capacity
/// at any number of SNR points from a single decomposition.
#[derive(Debug, Clone)]
pub struct GramSpectrum {
    eigenvalues: Vec<f64>,
}

impl GramSpectrum {
    pub fn new(grid: &GridParams, ch: &ChannelRealization) -> Result<Self> {
        let h = build_dd_matrix(grid, ch)?.to_dense();
        Self::from_gram(&(h.adjoint() * h))
    }

    pub fn from_gram(g: &DMatrix<C64>) -> Result<Self> {
        let mut eigenvalues = hermitian_eigenvalues(g)?;
        clamp_psd(&mut eigenvalues)?;
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn log2_det(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        Ok(self.eigenvalues.iter().map(|&l| (gamma * l).ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
    }

    pub fn capacity(&self, gamma: f64) -> Result<f64> {
        Ok(self.log2_det(gamma)? / self.eigenvalues.len() as f64)
    }
}

/// Capacity through the dense Gram eigendecomposition.
pub fn capacity_dense(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    GramSpectrum::new(grid, ch)?.capacity(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd_channel::{build_dd_matrix_dense, dft_kron_identity, sample_realization, PathSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rel_fro(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
        let b = DMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        b.adjoint() * b
    }

    /// Determinant by partial-pivot LU, independent of the eigen route.
    fn lu_log2_det(a: &DMatrix<C64>) -> f64 {
        let lu = a.clone().lu();
        lu.u().diagonal().iter().map(|d| d.norm().log2()).sum()
    }

    #[test]
    fn similarity_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = GridParams::new(3, 4, 15e3, 1).unwrap();
        let x = DMatrix::from_fn(12, 12, |_, _| c(rng.random(), rng.random()));
        let u = dft_kron_identity(&g);
        let want = &u * &x * u.adjoint();
        assert!(rel_fro(&dd_similarity(&g, &x), &want) < 1e-13);
    }

    #[test]
    fn single_path_has_no_cross_terms() {
        let g = GridParams::new(4, 4, 15e3, 1).unwrap();
        let ch = ChannelRealization::single(c(0.6, -0.3), 2, -1);
        let gd = gram_components(&g, &ch).unwrap();
        assert_eq!(gd.h_b1.norm(), 0.0);
        assert_eq!(gd.h_b2.norm(), 0.0);
        assert!((gd.energy() - 0.45).abs() < 1e-15);
    }

    #[test]
    fn same_delay_pair_lands_in_b1() {
        let g = GridParams::new(4, 4, 15e3, 1).unwrap();
        let ch = ChannelRealization::new(vec![PathSpec::new(c(0.5, 0.1), 3, -2), PathSpec::new(c(-0.2, 0.7), 3, 1)])
            .unwrap();
        let gd = gram_components(&g, &ch).unwrap();
        assert_eq!(gd.h_b2.norm(), 0.0);
        assert!(gd.h_b1.norm() > 1e-3);
    }

    #[test]
    fn gram_identity_against_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for &(m, n) in &[(2, 2), (4, 4), (2, 8), (8, 4)] {
            let g = GridParams::new(m, n, 15e3, 1).unwrap();
            let k_max = ((g.dim() - 1) / 2).min(8);
            for p in 1..=6 {
                let ch = sample_realization(p, 8.min(g.dim() - 1), k_max, &mut rng).unwrap();
                let h = build_dd_matrix_dense(&g, &ch).unwrap();
                let gram = h.adjoint() * h;
                let gd = gram_components(&g, &ch).unwrap();
                assert!(rel_fro(&gd.total(), &gram) < 1e-9, "M={m} N={n} P={p}");
                assert!((&gd.h_b1 - gd.h_b1.adjoint()).norm() < 1e-12);
                assert!((&gd.h_b2 - gd.h_b2.adjoint()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn log_det_psd_examples() {
        let i2 = DMatrix::<C64>::identity(2, 2);
        assert!((log_det_psd(&i2, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 0.0), c(2.0, 0.0)]));
        assert!((log_det_psd(&d, 1.0).unwrap() - 3f64.log2()).abs() < 1e-15);
        assert!((3f64.log2() - 1.58496).abs() < 1e-5);
    }

    #[test]
    fn log_det_psd_matches_lu_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = random_psd(8, &mut rng);
        let gamma = 3.7;
        let a = DMatrix::<C64>::identity(8, 8) + &g * c(gamma, 0.0);
        let want = lu_log2_det(&a);
        let got = log_det_psd(&g, gamma).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn log_det_psd_rejects_bad_input() {
        let mut a = DMatrix::<C64>::identity(3, 3);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(log_det_psd(&a, 1.0), Err(Error::InvalidArgument(_))));
        let neg = DMatrix::<C64>::identity(2, 2) * c(-1.0, 0.0);
        assert!(log_det_psd(&neg, 1.0).is_err());
        assert!(log_det_psd(&DMatrix::<C64>::identity(2, 2), -1.0).is_err());
        assert!(log_det_psd(&DMatrix::<C64>::zeros(2, 3), 1.0).is_err());
    }

    #[test]
    fn rounding_negatives_are_clamped() {
        let mut ev = vec![-1e-16, 0.5, 2.0];
        clamp_psd(&mut ev).unwrap();
        assert_eq!(ev[0], 0.0);
        let mut bad = vec![-1e-3, 2.0];
        assert!(clamp_psd(&mut bad).is_err());
    }

    #[test]
    fn capacity_examples() {
        let g = GridParams::new(2, 2, 15e3, 1).unwrap();
        let ch = ChannelRealization::single(c(1.0, 0.0), 0, 0);
        assert_eq!(capacity(&g, &ch, 1.0).unwrap(), 1.0);
        assert_eq!(capacity(&g, &ch, 0.0).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g4 = GridParams::new(4, 4, 15e3, 1).unwrap();
        for _ in 0..20 {
            let ch = sample_realization(3, 8, 7, &mut rng).unwrap();
            assert_eq!(capacity(&g4, &ch, 0.0).unwrap(), 0.0);
            let cap = capacity(&g4, &ch, 10.0).unwrap();
            assert!(cap <= (1.0 + 10.0 * ch.energy()).log2() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn single_path_capacity_is_scalar_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = GridParams::new(8, 4, 15e3, 1).unwrap();
        for _ in 0..20 {
            let ch = sample_realization(1, 8, 8, &mut rng).unwrap();
            let gamma = rng.random_range(0.1..100.0);
            let want = (1.0 + gamma * ch.energy()).log2();
            assert!((capacity(&g, &ch, gamma).unwrap() - want).abs() < 1e-13);
            let spec = GramSpectrum::new(&g, &ch).unwrap();
            assert!(spec.eigenvalues().iter().all(|&l| (l - ch.energy()).abs() < 1e-12));
        }
    }

    #[test]
    fn banded_route_matches_eigen_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for &(m, n) in &[(2, 2), (4, 4), (8, 8), (16, 8), (16, 16), (3, 5)] {
            let g = GridParams::new(m, n, 15e3, 1).unwrap();
            let k_max = ((g.dim() - 1) / 2).min(8);
            for p in [1, 2, 5] {
                let ch = sample_realization(p, 8.min(g.dim() - 1), k_max, &mut rng).unwrap();
                let spec = GramSpectrum::new(&g, &ch).unwrap();
                for gamma in [0.5, 10.0, 1e3] {
                    let fast = log2_det_regularized(&g, &ch, gamma).unwrap();
                    let slow = spec.log2_det(gamma).unwrap();
                    assert!((fast - slow).abs() <= 1e-9 * slow.abs(), "M={m} N={n} P={p}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn capacity_nondecreasing_in_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = GridParams::new(8, 8, 15e3, 1).unwrap();
        for _ in 0..10 {
            let ch = sample_realization(4, 8, 8, &mut rng).unwrap();
            let caps: Vec<f64> =
                (0..30).map(|i| capacity(&g, &ch, 10f64.powf(i as f64 / 5.0 - 2.0)).unwrap()).collect();
            assert!(caps.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn capacity_rejects_bad_snr() {
        let g = GridParams::new(2, 2, 15e3, 1).unwrap();
        let ch = ChannelRealization::single(c(1.0, 0.0), 0, 0);
        assert!(capacity(&g, &ch, -1.0).is_err());
        assert!(capacity(&g, &ch, f64::NAN).is_err());
    }
}
