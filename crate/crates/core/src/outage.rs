//! Outage probability: Monte-Carlo estimate and closed-form lower bound.
//!
//! A frame is in outage when its normalized capacity falls strictly below
//! the target rate `R`. Since `det(I + γ H_DD^H H_DD) <= (1 + γ Σ|h_i|^2)^{MN}`,
//! the outage probability is at least `Pr{Σ|h_i|^2 < g/γ}` with
//! `g = 2^R - 1`. With gains of variance `1/(2P)` per dimension,
//! `2P Σ|h_i|^2` is chi-square with `2P` degrees of freedom, giving
//!
//! ```text
//! P_out >= 1 - exp(-Pg/γ) Σ_{i<P} (Pg/γ)^i / i!
//! ```

use rayon::prelude::*;

use crate::dd_channel::{sample_realization, ChannelRealization, GridParams};
use crate::rate_distortion::{snr_threshold, LossyTarget};
use crate::seeding::{rng_from_seed, trial_seed};
use crate::spectral::capacity;
use crate::{Error, Result};

/// Monte-Carlo outage count with a Wilson 95% interval and the paired
/// closed-form lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub trials: u64,
    pub outages: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub lower_bound: f64,
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

impl OutageEstimate {
    pub fn from_counts(outages: u64, trials: u64, lower_bound: f64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(outages, trials, Z_95)?;
        Ok(Self { trials, outages, p_hat: outages as f64 / trials as f64, ci_low, ci_high, lower_bound })
    }

    /// Binomial standard deviation of a `trials`-sample mean at true value `p`.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// `p_hat + n_sigma·σ >= lower_bound`, with `σ` evaluated at the bound
    /// (the null hypothesis that the true outage equals the bound).
    pub fn dominates_bound(&self, n_sigma: f64) -> bool {
        self.p_hat + n_sigma * self.binomial_sigma(self.lower_bound) >= self.lower_bound
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::invalid(format!("invalid counts: {successes} of {trials}")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid(format!("quantile must be non-negative, got {z}")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// Outage event `C < R` for one channel draw; ties count as no outage.
pub fn outage_indicator(grid: &GridParams, ch: &ChannelRealization, gamma: f64, target: &LossyTarget) -> Result<bool> {
    Ok(capacity(grid, ch, gamma)? < target.rate)
}

/// `1 - e^{-x} Σ_{i<P} x^i/i!`: the CDF of a chi-square variable with `2P`
/// degrees of freedom at `2x` (regularized lower incomplete gamma `P(P, x)`).
///
/// Below the mode the tail series `e^{-x} Σ_{i>=P} x^i/i!` is summed directly
/// so tiny probabilities keep full relative precision; above it the
/// complement is summed. Terms are generated by ratios from a log-space
/// leading term, so large `x` cannot overflow.
pub fn chi_square_tail_sum(paths: u32, x: f64) -> Result<f64> {
    if paths == 0 {
        return Err(Error::invalid("degrees parameter P must be at least 1"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("chi-square argument must be non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let p = paths as f64;
    let ln_fact = |n: u32| (2..=n).map(|k| (k as f64).ln()).sum::<f64>();
    if x < p + 1.0 {
        // e^{-x} x^P / P! · Σ_{j>=0} x^j / ((P+1)…(P+j))
        let lead = (-x + p * x.ln() - ln_fact(paths)).exp();
        let (mut term, mut sum, mut j) = (1.0f64, 1.0f64, 1.0f64);
        while term > sum * 1e-17 {
            term *= x / (p + j);
            sum += term;
            j += 1.0;
        }
        Ok((lead * sum).min(1.0))
    } else {
        // Complement e^{-x} Σ_{i<P} x^i/i!, summed from the largest index down.
        let top = (-x + (p - 1.0) * x.ln() - ln_fact(paths - 1)).exp();
        let (mut term, mut sum) = (top, top);
        for i in (1..paths).rev() {
            term *= i as f64 / x;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        Ok((1.0 - sum).clamp(0.0, 1.0))
    }
}

/// Closed-form lower bound on the outage probability for `P` paths.
///
/// Non-positive `gamma` means no transmit power: outage is certain whenever
/// the target rate is positive.
pub fn lower_bound(paths: u32, gamma: f64, target: &LossyTarget) -> Result<f64> {
    if paths == 0 {
        return Err(Error::invalid("path count P must be at least 1"));
    }
    if gamma.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let g = snr_threshold(target);
    if g <= 0.0 {
        return Ok(0.0);
    }
    if gamma <= 0.0 {
        return Ok(1.0);
    }
    chi_square_tail_sum(paths, paths as f64 * g / gamma)
}

/// Inputs of one Monte-Carlo outage run.
#[derive(Debug, Clone, Copy)]
pub struct OutageRun {
    pub grid: GridParams,
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    /// Linear `E_s/N_0`.
    pub gamma: f64,
    pub target: LossyTarget,
    pub trials: u64,
    /// Run seed; trial `t` draws from `seeding::trial_seed(seed, t)`.
    pub seed: u64,
}

impl OutageRun {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trial count must be at least 1"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!("SNR must be finite and non-negative, got {}", self.gamma)));
        }
        check_sampling_window(&self.grid, self.paths, self.l_max, self.k_max)
    }

    /// Channel draw of trial `t`; lets a flagged trial be replayed.
    pub fn realization(&self, trial: u64) -> Result<ChannelRealization> {
        let mut rng = rng_from_seed(trial_seed(self.seed, trial));
        sample_realization(self.paths, self.l_max, self.k_max, &mut rng)
    }
}

/// Every draw from `[0, l_max] x [-k_max, k_max]` must be a valid, non-aliased
/// channel on `grid`.
pub fn check_sampling_window(grid: &GridParams, paths: usize, l_max: usize, k_max: usize) -> Result<()> {
    let mn = grid.dim();
    let cells = (l_max + 1) * (2 * k_max + 1);
    if paths == 0 || paths > cells {
        return Err(Error::invalid(format!(
            "P = {paths} paths cannot be placed in {cells} delay-Doppler cells (l_max={l_max}, k_max={k_max})"
        )));
    }
    if l_max >= mn || 2 * k_max >= mn {
        return Err(Error::invalid(format!(
            "taps l_max={l_max}, k_max={k_max} do not resolve on a {}x{} frame (need l_max < MN and 2 k_max < MN)",
            grid.m, grid.n
        )));
    }
    Ok(())
}

/// Monte-Carlo outage estimate over `run.trials` independent draws.
///
/// Trials fan out over the current rayon pool; counts are summed as
/// integers, so the result does not depend on the number of workers.
pub fn monte_carlo_outage(run: &OutageRun) -> Result<OutageEstimate> {
    run.validate()?;
    let outages = (0..run.trials)
        .into_par_iter()
        .map(|t| {
            let ch = run.realization(t)?;
            outage_indicator(&run.grid, &ch, run.gamma, &run.target).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let bound = lower_bound(run.paths as u32, run.gamma, &run.target)?;
    OutageEstimate::from_counts(outages, run.trials, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_distortion::rate_from_distortion;
    use crate::C64;
    use proptest::prelude::*;

    /// Composite Simpson integration of the chi-square(2P) density on [0, 2x].
    fn chi_square_cdf_quadrature(paths: u32, x: f64) -> f64 {
        let k = 2.0 * paths as f64;
        let ln_norm = (k / 2.0) * 2f64.ln() + (1..paths).map(|i| (i as f64).ln()).sum::<f64>();
        let pdf = |t: f64| {
            if t <= 0.0 {
                if paths == 1 {
                    0.5
                } else {
                    0.0
                }
            } else {
                ((k / 2.0 - 1.0) * t.ln() - t / 2.0 - ln_norm).exp()
            }
        };
        let n = 200_000;
        let h = 2.0 * x / n as f64;
        let mut s = pdf(0.0) + pdf(2.0 * x);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn chi_square_examples() {
        let e = std::f64::consts::E;
        assert!((chi_square_tail_sum(1, 1.0).unwrap() - 0.632121).abs() < 1e-6);
        assert!((chi_square_tail_sum(1, 1.0).unwrap() - (1.0 - 1.0 / e)).abs() < 1e-15);
        assert!((chi_square_tail_sum(2, 1.0).unwrap() - (1.0 - 2.0 / e)).abs() < 1e-15);
        assert!((chi_square_tail_sum(2, 2.0).unwrap() - 0.593994).abs() < 1e-6);
        assert!((chi_square_tail_sum(2, 2.0).unwrap() - (1.0 - 3.0 / (e * e))).abs() < 1e-15);
        for p in [1, 3, 7] {
            assert_eq!(chi_square_tail_sum(p, 0.0).unwrap(), 0.0);
        }
        assert!(chi_square_tail_sum(3, -1.0).is_err());
        assert!(chi_square_tail_sum(0, 1.0).is_err());
        assert!(chi_square_tail_sum(3, f64::NAN).is_err());
    }

    #[test]
    fn chi_square_matches_quadrature() {
        for p in [1, 2, 3, 5, 8] {
            for x in [0.05, 0.3, 1.0, 2.5, 6.0, 12.0] {
                let want = chi_square_cdf_quadrature(p, x);
                let got = chi_square_tail_sum(p, x).unwrap();
                assert!((got - want).abs() < 1e-9, "P={p} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn chi_square_large_arguments_do_not_overflow() {
        let v = chi_square_tail_sum(5, 800.0).unwrap();
        assert_eq!(v, 1.0);
        let w = chi_square_tail_sum(200, 250.0).unwrap();
        assert!(w > 0.99 && w <= 1.0);
        assert!(chi_square_tail_sum(200, 150.0).unwrap() < 1e-3);
    }

    #[test]
    fn chi_square_small_argument_keeps_relative_precision() {
        // Leading term x^P/P! dominates for tiny x.
        let x = 3.2e-4f64;
        let got = chi_square_tail_sum(5, x).unwrap();
        let lead = x.powi(5) / 120.0 * (1.0 - 5.0 * x / 6.0);
        assert!((got / lead - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lower_bound_examples() {
        let lossless = rate_from_distortion(0.0, 1).unwrap();
        assert!((lower_bound(1, 1.0, &lossless).unwrap() - 0.632121).abs() < 1e-6);
        let free = rate_from_distortion(0.5, 1).unwrap();
        for p in [1, 4] {
            assert_eq!(lower_bound(p, 10.0, &free).unwrap(), 0.0);
            assert_eq!(lower_bound(p, 0.0, &free).unwrap(), 0.0);
        }
        assert_eq!(lower_bound(3, 0.0, &lossless).unwrap(), 1.0);
        assert_eq!(lower_bound(3, -2.0, &lossless).unwrap(), 1.0);
        assert!(lower_bound(0, 1.0, &lossless).is_err());
    }

    #[test]
    fn lower_bound_high_snr_agrees_with_quadrature_series() {
        let t = rate_from_distortion(0.05, 1).unwrap();
        let gamma = 1e4;
        let x = 5.0 * snr_threshold(&t) / gamma;
        // Alternating series e^{-x} Σ_{i>=5} x^i/i! summed explicitly.
        let mut fact = 120.0;
        let mut s = 0.0;
        for i in 5..30 {
            if i > 5 {
                fact *= i as f64;
            }
            s += x.powi(i) / fact;
        }
        let want = (-x).exp() * s;
        let got = lower_bound(5, gamma, &t).unwrap();
        assert!((got - want).abs() <= 1e-10 * want);
        let ten_db_later = lower_bound(5, gamma * 10.0, &t).unwrap();
        assert!(((got / ten_db_later).log10() - 5.0).abs() < 0.01);
    }

    #[test]
    fn lower_bound_monotone() {
        for p in [1, 3, 5] {
            let t = rate_from_distortion(0.05, 2).unwrap();
            let by_snr: Vec<f64> = (0..40).map(|i| lower_bound(p, 10f64.powf(i as f64 / 10.0), &t).unwrap()).collect();
            assert!(by_snr.windows(2).all(|w| w[1] < w[0]));
            let by_d: Vec<f64> = (1..50)
                .map(|i| lower_bound(p, 10.0, &rate_from_distortion(i as f64 / 100.0, 2).unwrap()).unwrap())
                .collect();
            assert!(by_d.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(50, 100, 1.96).unwrap();
        assert!(lo < 0.5 && hi > 0.5);
        assert!(((0.5 - lo) - (hi - 0.5)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(0, 100, 1.96).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-4);
        let (lo, hi) = wilson_interval(100, 100, 1.96).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 0.9630).abs() < 1e-4);
        assert!(wilson_interval(3, 2, 1.96).is_err());
        assert!(wilson_interval(0, 0, 1.96).is_err());
    }

    proptest! {
        #[test]
        fn wilson_brackets_estimate(trials in 1u64..5000, frac in 0.0f64..=1.0, z in 0.0f64..4.0) {
            let s = ((trials as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(s, trials, z).unwrap();
            let p = s as f64 / trials as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }

        #[test]
        fn chi_square_is_increasing(p in 1u32..12, x in 0.0f64..40.0, dx in 1e-3f64..5.0) {
            let a = chi_square_tail_sum(p, x).unwrap();
            let b = chi_square_tail_sum(p, x + dx).unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn indicator_examples() {
        let g = GridParams::new(2, 2, 15e3, 1).unwrap();
        let ch = ChannelRealization::single(C64::new(1.0, 0.0), 0, 0);
        let lossless = rate_from_distortion(0.0, 1).unwrap();
        // C = 1 exactly equals R = 1: a tie is not an outage.
        assert!(!outage_indicator(&g, &ch, 1.0, &lossless).unwrap());
        assert!(outage_indicator(&g, &ch, 0.0, &lossless).unwrap());
        let free = rate_from_distortion(0.5, 1).unwrap();
        assert!(!outage_indicator(&g, &ch, 0.0, &free).unwrap());
    }

    fn run(gamma: f64, distortion: f64, trials: u64) -> OutageRun {
        OutageRun {
            grid: GridParams::new(4, 4, 15e3, 1).unwrap(),
            paths: 3,
            l_max: 3,
            k_max: 3,
            gamma,
            target: rate_from_distortion(distortion, 1).unwrap(),
            trials,
            seed: 5,
        }
    }

    #[test]
    fn monte_carlo_trivial_cases() {
        let none = monte_carlo_outage(&run(10.0, 0.5, 100)).unwrap();
        assert_eq!((none.outages, none.p_hat), (0, 0.0));
        let all = monte_carlo_outage(&run(0.0, 0.1, 100)).unwrap();
        assert_eq!((all.outages, all.p_hat), (100, 1.0));
        assert!(monte_carlo_outage(&run(1.0, 0.1, 0)).is_err());
        let mut crowded = run(1.0, 0.1, 10);
        crowded.paths = 100;
        assert!(monte_carlo_outage(&crowded).is_err());
        let mut aliased = run(1.0, 0.1, 10);
        aliased.k_max = 8;
        assert!(monte_carlo_outage(&aliased).is_err());
    }

    #[test]
    fn monte_carlo_is_deterministic_across_pools() {
        let r = run(3.0, 0.05, 400);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| monte_carlo_outage(&r)).unwrap();
        let b = four.install(|| monte_carlo_outage(&r)).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.p_hat && a.p_hat <= a.ci_high);
        assert!(a.dominates_bound(3.0));
    }

    #[test]
    fn replayed_trial_reproduces_indicator() {
        let r = run(2.0, 0.05, 50);
        let est = monte_carlo_outage(&r).unwrap();
        let replayed: u64 = (0..50)
            .map(|t| outage_indicator(&r.grid, &r.realization(t).unwrap(), r.gamma, &r.target).unwrap() as u64)
            .sum();
        assert_eq!(est.outages, replayed);
    }
}
