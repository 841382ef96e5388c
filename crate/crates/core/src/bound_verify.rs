//! Numerical checks of the two determinant inequalities behind the outage
//! lower bound, and of the structure lemmas used to prove them.
//!
//! In the delay–time domain `I + γ H_DD^H H_DD` becomes `Ξ + Ω`:
//!
//! - `Ξ = ξ₁ I + diag(ξ_{2,b})` collects energy and same-delay cross terms,
//!   `ξ₁ = 1 + γ Σ|h_i|^2`, `ξ_{2,b} = Σ_{same delay} 2γ |h_i^* h_j| β_b` with
//!   `β_b = cos(2π b (k_j - k_i)/MN + arg(h_i^* h_j))`.
//! - `Ω` collects different-delay cross terms and has an exactly zero
//!   diagonal.
//!
//! Proposition 1 is `det Ξ <= ξ₁^{MN}`; Proposition 2 is
//! `det(Ξ + Ω) <= det Ξ` (Hadamard). Comparisons are done on `log2`
//! determinants with a relative slack of [`DET_SLACK`].

use nalgebra::{DMatrix, DVector};

use crate::dd_channel::{ChannelRealization, GridParams, PathSpec};
use crate::spectral::{add_pair_term, gram_components, log_det_psd, GramDecomposition};
use crate::{Error, Result, C64};

/// Relative slack on determinant inequalities.
pub const DET_SLACK: f64 = 1e-9;
/// Relative tolerance for two routes to the same determinant.
pub const DET_AGREEMENT: f64 = 1e-8;

fn log2_slack() -> f64 {
    DET_SLACK.ln_1p() / std::f64::consts::LN_2
}

/// `|2^{a-b} - 1|`, the relative difference of two determinants given in log2.
fn rel_det_diff(log2_a: f64, log2_b: f64) -> f64 {
    ((log2_a - log2_b) * std::f64::consts::LN_2).exp_m1().abs()
}

/// The cosine sequence of one same-delay path pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSequence {
    /// `β_b`, `b = 0 … MN-1`.
    pub values: Vec<f64>,
    pub k_diff: i64,
    pub theta: f64,
    /// `|h_i^* h_j|`.
    pub magnitude: f64,
    /// Odd factor of `k_diff` (carries its sign).
    pub a1: i64,
    /// Largest power of two dividing `k_diff`.
    pub a2: i64,
}

impl BetaSequence {
    /// Shift `MN / (2 a₂)` that negates the sequence.
    pub fn half_shift(&self) -> usize {
        self.values.len() / (2 * self.a2 as usize)
    }

    /// Number of equal-length groups, `2 a₂`.
    pub fn group_count(&self) -> usize {
        2 * self.a2 as usize
    }

    /// `max_b |β_{b + MN/(2a₂)} + β_b|` over all `b` (indices cyclic).
    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.values.len();
        let h = self.half_shift();
        (0..n).map(|b| (self.values[(b + h) % n] + self.values[b]).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation between consecutive groups, compared as `group_{2g+1} = -group_{2g}`.
    pub fn group_residual(&self) -> f64 {
        let h = self.half_shift();
        let mut worst = 0.0f64;
        for g in (0..self.group_count()).step_by(2) {
            for b in 0..h {
                worst = worst.max((self.values[g * h + b] + self.values[(g + 1) * h + b]).abs());
            }
        }
        worst
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Diagonal of `Θ = 2|h_i^* h_j| diag(β_b)`.
    pub fn theta_diagonal(&self) -> Vec<f64> {
        self.values.iter().map(|b| 2.0 * self.magnitude * b).collect()
    }
}

fn cosine_sequence(mn: usize, k_diff: i64, theta: f64) -> Vec<f64> {
    (0..mn)
        .map(|b| {
            let r = (b as i64 * k_diff).rem_euclid(mn as i64);
            (2.0 * std::f64::consts::PI * r as f64 / mn as f64 + theta).cos()
        })
        .collect()
}

/// `β_b = cos(2π b k_diff / MN + θ)` with the factorization `k_diff = a₁ a₂`.
///
/// Requires `MN` to be a power of two and `2 a₂` to divide `MN`, which is
/// what makes the half-period shift an integer.
pub fn beta_sequence(mn: usize, k_diff: i64, theta: f64, magnitude: f64) -> Result<BetaSequence> {
    if k_diff == 0 {
        return Err(Error::invalid("Doppler difference must be nonzero"));
    }
    if !mn.is_power_of_two() || mn < 2 {
        return Err(Error::UnsupportedStructure(format!("MN = {mn} is not a power of two")));
    }
    let a2 = 1i64 << k_diff.trailing_zeros();
    let a1 = k_diff / a2;
    if (mn as i64) % (2 * a2) != 0 {
        return Err(Error::UnsupportedStructure(format!(
            "2·a2 = {} does not divide MN = {mn} for k_diff = {k_diff}",
            2 * a2
        )));
    }
    Ok(BetaSequence { values: cosine_sequence(mn, k_diff, theta), k_diff, theta, magnitude, a1, a2 })
}

/// Diagonal of `Ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiDiagonal {
    pub xi1: f64,
    pub xi2: Vec<f64>,
}

impl XiDiagonal {
    pub fn diagonal(&self) -> Vec<f64> {
        self.xi2.iter().map(|x| self.xi1 + x).collect()
    }

    /// `log2 Π_b (ξ₁ + ξ_{2,b})`.
    pub fn log2_det(&self) -> Result<f64> {
        self.diagonal().iter().enumerate().try_fold(0.0, |acc, (b, &d)| {
            if d > 0.0 {
                Ok(acc + d.log2())
            } else {
                Err(Error::NotPositiveDefinite { row: b, pivot: d })
            }
        })
    }

    /// `log2 ξ₁^{MN}`, i.e. `log2 det(I + γ H_A)`.
    pub fn log2_energy_det(&self) -> f64 {
        self.xi2.len() as f64 * self.xi1.log2()
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.xi2.len(),
            self.diagonal().into_iter().map(|d| C64::new(d, 0.0)),
        ))
    }
}

fn same_delay_pairs(ch: &ChannelRealization) -> impl Iterator<Item = (&PathSpec, &PathSpec)> {
    let paths = ch.paths();
    paths
        .iter()
        .enumerate()
        .flat_map(move |(a, pi)| paths[a + 1..].iter().map(move |pj| (pi, pj)))
        .filter(|(pi, pj)| pi.delay_idx == pj.delay_idx)
}

fn different_delay_pairs(ch: &ChannelRealization) -> impl Iterator<Item = (&PathSpec, &PathSpec)> {
    let paths = ch.paths();
    paths
        .iter()
        .enumerate()
        .flat_map(move |(a, pi)| paths[a + 1..].iter().map(move |pj| (pi, pj)))
        .filter(|(pi, pj)| pi.delay_idx != pj.delay_idx)
}

/// `Ξ` from the closed-form cosine sums.
pub fn xi_of(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<XiDiagonal> {
    ch.validate_for(grid)?;
    let mn = grid.dim();
    let xi1 = 1.0 + gamma * ch.energy();
    let mut xi2 = vec![0.0; mn];
    for (pi, pj) in same_delay_pairs(ch) {
        let cross = pi.gain.conj() * pj.gain;
        let beta = cosine_sequence(mn, pj.doppler_idx - pi.doppler_idx, cross.arg());
        for (x, b) in xi2.iter_mut().zip(beta) {
            *x += 2.0 * gamma * cross.norm() * b;
        }
    }
    Ok(XiDiagonal { xi1, xi2 })
}

/// `Ω = γ Σ_{different delay} (h_i^* h_j Λ + h_i h_j^* Λ^H)` in the delay–time domain.
pub fn omega_of(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<DMatrix<C64>> {
    ch.validate_for(grid)?;
    let mn = grid.dim();
    let mut omega = DMatrix::zeros(mn, mn);
    for (pi, pj) in different_delay_pairs(ch) {
        add_pair_term(&mut omega, mn, pi, pj, gamma);
    }
    Ok(omega)
}

/// One determinant inequality `lhs <= rhs`, in log2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub log2_lhs: f64,
    pub log2_rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(log2_lhs: f64, log2_rhs: f64) -> Self {
        Self { log2_lhs, log2_rhs, holds: log2_lhs <= log2_rhs + log2_slack() }
    }

    /// `log2 rhs - log2 lhs`; non-negative when the inequality holds strictly.
    pub fn slack(&self) -> f64 {
        self.log2_rhs - self.log2_lhs
    }

    /// Both sides equal to within the agreement tolerance.
    pub fn is_equality(&self) -> bool {
        rel_det_diff(self.log2_lhs, self.log2_rhs) <= DET_AGREEMENT
    }

    /// Linear-scale determinants; these overflow for large frames at high SNR.
    pub fn determinants(&self) -> (f64, f64) {
        (self.log2_lhs.exp2(), self.log2_rhs.exp2())
    }
}

/// Outcome of the Proposition 1 check.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    /// `det(I + γ(H_A + H_B1)) <= det(I + γ H_A)` by dense eigenvalues.
    pub check: InequalityCheck,
    /// `log2 Π_b(ξ₁ + ξ_{2,b})`, always computed.
    pub log2_xi_product: f64,
    /// Relative gap between the `Ξ` product and the dense determinant;
    /// `None` when `M` or `N` is not a power of two.
    pub xi_product_rel_err: Option<f64>,
    /// Worst `|β_{b+MN/(2a₂)} + β_b|` over same-delay pairs.
    pub max_beta_residual: f64,
    /// `(ξ₁ + t_b)(ξ₁ + t_{b+h}) <= ξ₁²` for every same-delay pair's own
    /// contribution `t_b = 2γ|h_i^* h_j| β_b`.
    pub pair_products_ok: bool,
    /// Same-delay pairs whose Doppler difference lies outside `|k_diff| < N`.
    pub pairs_outside_assumption: usize,
}

impl Prop1Report {
    pub fn passed(&self) -> bool {
        self.check.holds
            && self.pair_products_ok
            && self.xi_product_rel_err.is_none_or(|e| e <= DET_AGREEMENT)
            && self.max_beta_residual <= 1e-12
    }
}

/// Outcome of the Proposition 2 check.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop2Report {
    /// `det(I + γ Gram) <= det(I + γ(H_A + H_B1))` by dense eigenvalues.
    pub check: InequalityCheck,
    /// `det(Ξ + Ω) <= det Ξ` in the delay–time domain.
    pub hadamard: InequalityCheck,
    /// `Ξ + Ω` admitted a Cholesky factorization.
    pub positive_definite: bool,
    /// `max |Ω_bb|`; zero by construction.
    pub omega_max_diagonal: f64,
    /// Combined chain `det(I + γ Gram) <= ξ₁^{MN}`.
    pub chain: InequalityCheck,
}

impl Prop2Report {
    pub fn passed(&self) -> bool {
        self.check.holds
            && self.hadamard.holds
            && self.positive_definite
            && self.omega_max_diagonal == 0.0
            && self.chain.holds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropositionReport {
    pub prop1: Prop1Report,
    pub prop2: Prop2Report,
}

impl PropositionReport {
    pub fn passed(&self) -> bool {
        self.prop1.passed() && self.prop2.passed()
    }
}

fn cholesky_log2_det(a: DMatrix<C64>) -> Option<f64> {
    let chol = a.cholesky()?;
    Some(chol.l().diagonal().iter().map(|d| 2.0 * d.re.log2()).sum())
}

/// Runs both propositions on a given Gram decomposition. Exposed so that a
/// deliberately corrupted decomposition can serve as a negative control.
pub fn check_decomposition(
    grid: &GridParams,
    ch: &ChannelRealization,
    gd: &GramDecomposition,
    gamma: f64,
) -> Result<PropositionReport> {
    let mn = grid.dim();
    let xi = xi_of(grid, ch, gamma)?;

    let a_b1 = &gd.h_a + &gd.h_b1;
    let log2_a = xi.log2_energy_det();
    let log2_a_b1 = log_det_psd(&a_b1, gamma)?;
    let log2_total = log_det_psd(&(a_b1 + &gd.h_b2), gamma)?;

    let log2_xi_product = xi.log2_det()?;
    let powers_of_two = grid.m.is_power_of_two() && grid.n.is_power_of_two();
    let xi_product_rel_err = powers_of_two.then(|| rel_det_diff(log2_xi_product, log2_a_b1));

    let mut max_beta_residual = 0.0f64;
    let mut pair_products_ok = true;
    let mut pairs_outside_assumption = 0;
    for (pi, pj) in same_delay_pairs(ch) {
        let k_diff = pj.doppler_idx - pi.doppler_idx;
        if k_diff.unsigned_abs() as usize >= grid.n {
            pairs_outside_assumption += 1;
        }
        let cross = pi.gain.conj() * pj.gain;
        match beta_sequence(mn, k_diff, cross.arg(), cross.norm()) {
            Ok(beta) => {
                max_beta_residual = max_beta_residual.max(beta.antisymmetry_residual());
                let t = beta.theta_diagonal();
                let h = beta.half_shift();
                for b in 0..mn {
                    let prod = (xi.xi1 + gamma * t[b]) * (xi.xi1 + gamma * t[(b + h) % mn]);
                    if prod > xi.xi1 * xi.xi1 * (1.0 + DET_SLACK) {
                        pair_products_ok = false;
                    }
                }
            }
            Err(Error::UnsupportedStructure(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let omega = omega_of(grid, ch, gamma)?;
    let omega_max_diagonal = omega.diagonal().iter().map(|d| d.norm()).fold(0.0, f64::max);
    let xi_omega = xi.to_matrix() + omega;
    let (positive_definite, log2_xi_omega) = match cholesky_log2_det(xi_omega) {
        Some(v) => (true, v),
        None => (false, f64::INFINITY),
    };

    Ok(PropositionReport {
        prop1: Prop1Report {
            check: InequalityCheck::new(log2_a_b1, log2_a),
            log2_xi_product,
            xi_product_rel_err,
            max_beta_residual,
            pair_products_ok,
            pairs_outside_assumption,
        },
        prop2: Prop2Report {
            check: InequalityCheck::new(log2_total, log2_a_b1),
            hadamard: InequalityCheck::new(log2_xi_omega, log2_xi_product),
            positive_definite,
            omega_max_diagonal,
            chain: InequalityCheck::new(log2_total, log2_a),
        },
    })
}

/// Both propositions for one realization.
pub fn verify_propositions(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<PropositionReport> {
    let gd = gram_components(grid, ch)?;
    check_decomposition(grid, ch, &gd, gamma)
}

pub fn verify_prop1(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<Prop1Report> {
    Ok(verify_propositions(grid, ch, gamma)?.prop1)
}

pub fn verify_prop2(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<Prop2Report> {
    Ok(verify_propositions(grid, ch, gamma)?.prop2)
}

/// `|det(I + γ(H_A + H_B1)) / Π_b(ξ₁ + ξ_{2,b}) - 1|` by the dense route.
pub fn xi_product_rel_err(grid: &GridParams, ch: &ChannelRealization, gamma: f64) -> Result<f64> {
    let gd = gram_components(grid, ch)?;
    let dense = log_det_psd(&(&gd.h_a + &gd.h_b1), gamma)?;
    Ok(rel_det_diff(xi_of(grid, ch, gamma)?.log2_det()?, dense))
}
