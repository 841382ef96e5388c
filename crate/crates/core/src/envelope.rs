//! Hermitian matrices in envelope (skyline) storage and their `L D L^H`
//! factorization.
//!
//! Row `i` stores the lower-triangle entries from its first structural
//! nonzero `first[i]` up to the diagonal. Fill-in during the factorization
//! never leaves this envelope, so a cyclic band of half-width `w` on an
//! `n x n` matrix factors in `O(n w^2)`.

use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub(crate) struct EnvelopeMatrix {
    first: Vec<usize>,
    rows: Vec<Vec<C64>>,
}

impl EnvelopeMatrix {
    /// Builds an envelope from the lower-triangle sparsity pattern:
    /// `pattern(i)` yields the columns `j <= i` that may be nonzero in row `i`.
    pub fn with_pattern<I>(dim: usize, mut pattern: impl FnMut(usize) -> I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        let first: Vec<usize> =
            (0..dim).map(|i| pattern(i).into_iter().filter(|&j| j <= i).min().unwrap_or(i)).collect();
        let rows = first.iter().enumerate().map(|(i, &f)| vec![C64::new(0.0, 0.0); i - f + 1]).collect();
        Self { first, rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Adds `v` to entry `(i, j)`, `j <= i`, which must lie in the envelope.
    pub fn add_lower(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(j <= i && j >= self.first[i], "({i}, {j}) outside envelope");
        self.rows[i][j - self.first[i]] += v;
    }

    #[cfg(test)]
    pub fn get_lower(&self, i: usize, j: usize) -> C64 {
        if j > i || j < self.first[i] {
            C64::new(0.0, 0.0)
        } else {
            self.rows[i][j - self.first[i]]
        }
    }

    /// Pivots `d_i` of `A = L D L^H` with unit lower `L`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] at the first pivot that is
    /// not strictly positive.
    pub fn ldl_pivots(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut l: Vec<Vec<C64>> = self.rows.clone();
        let mut d = vec![0.0f64; n];
        for i in 0..n {
            let fi = self.first[i];
            // Row i of L·D, kept alongside L to avoid recomputing l_ik d_k.
            let mut ld = vec![C64::new(0.0, 0.0); i - fi];
            for j in fi..i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let mut s = l[i][j - fi];
                for k in start..j {
                    s -= ld[k - fi] * l[j][k - fj].conj();
                }
                ld[j - fi] = s;
                l[i][j - fi] = s / d[j];
            }
            let mut piv = l[i][i - fi].re;
            for k in fi..i {
                piv -= (ld[k - fi] * l[i][k - fi].conj()).re;
            }
            if piv.is_nan() || piv <= 0.0 || piv.is_infinite() {
                return Err(Error::NotPositiveDefinite { row: i, pivot: piv });
            }
            d[i] = piv;
            l[i][i - fi] = C64::new(1.0, 0.0);
        }
        Ok(d)
    }

    /// `log2 det A` for Hermitian positive definite `A`.
    pub fn log2_det(&self) -> Result<f64> {
        Ok(self.ldl_pivots()?.iter().map(|d| d.log2()).sum())
    }
}
