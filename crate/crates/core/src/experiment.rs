//! SNR sweeps, CSV output and proposition verification campaigns.
//!
//! A sweep is described by an [`ExperimentConfig`], read from a flat TOML
//! file and optionally overridden from the command line. Results are written
//! as CSV with the fixed column order
//!
//! ```text
//! snr_db,distortion,trials,outages,p_out_mc,ci_low,ci_high,p_out_lower_bound,seed
//! ```
//!
//! Rows are grouped by distortion and ordered by SNR inside each group.
//! `seed` is the per-point seed; trial `t` of that point replays from
//! `seeding::trial_seed(seed, t)`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound_verify::{check_decomposition, PropositionReport};
use crate::dd_channel::{sample_realization, GridParams};
use crate::outage::{check_sampling_window, lower_bound, monte_carlo_outage, OutageEstimate, OutageRun};
use crate::rate_distortion::rate_from_distortion;
use crate::seeding::{derive, point_seed, rng_from_seed};
use crate::spectral::gram_components;
use crate::{Error, Result, C64};

/// Frame sizes above this many DD symbols need `heavy = true`.
pub const HEAVY_THRESHOLD: usize = 256;

pub const CSV_HEADER: [&str; 9] =
    ["snr_db", "distortion", "trials", "outages", "p_out_mc", "ci_low", "ci_high", "p_out_lower_bound", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub paths: usize,
    pub bits_per_symbol: u32,
    pub distortion: Vec<f64>,
    pub l_max: usize,
    pub k_max: usize,
    pub delta_f: f64,
    /// Carrier frequency in Hz; recorded for provenance, not used.
    pub carrier_hz: f64,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Permits frames larger than [`HEAVY_THRESHOLD`].
    pub heavy: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 16,
            n: 16,
            paths: 5,
            bits_per_symbol: 1,
            distortion: vec![0.05, 0.1],
            l_max: 8,
            k_max: 8,
            delta_f: 15e3,
            carrier_hz: 4e9,
            snr_db: snr_range(0.0, 20.0, 2.0).expect("static range"),
            trials: 2000,
            seed: 1,
            output_path: None,
            workers: None,
            heavy: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Switches to the `M = N = 32` frame.
    pub fn enable_heavy(&mut self) {
        self.heavy = true;
        self.m = 32;
        self.n = 32;
    }

    pub fn grid(&self) -> Result<GridParams> {
        GridParams::new(self.m, self.n, self.delta_f, self.bits_per_symbol).map_err(config_err)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if grid.dim() > HEAVY_THRESHOLD && !self.heavy {
            return Err(Error::Config(format!(
                "a {}x{} frame needs heavy mode (MN > {HEAVY_THRESHOLD})",
                self.m, self.n
            )));
        }
        check_sampling_window(&grid, self.paths, self.l_max, self.k_max).map_err(config_err)?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.distortion.is_empty() {
            return Err(Error::Config("at least one distortion target is required".into()));
        }
        for &d in &self.distortion {
            rate_from_distortion(d, self.bits_per_symbol).map_err(config_err)?;
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be a non-empty list of finite values".into()));
        }
        if self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("SNR grid must be strictly increasing".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        self.workers
            .map(|w| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))
            })
            .transpose()
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        Ok(match self.pool()? {
            Some(pool) => pool.install(f),
            None => f(),
        })
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) => Error::Config(msg),
        other => other,
    }
}

/// Inclusive `start, start+step, …, stop` grid.
pub fn snr_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(Error::Config(format!("invalid SNR range {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Parses `start:stop:step` (dB).
pub fn parse_snr_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("expected start:stop:step, got {spec:?}"));
    match parts.as_slice() {
        [start, stop, step] => {
            let p = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            snr_range(p(start)?, p(stop)?, p(step)?)
        }
        [single] => Ok(vec![single.trim().parse::<f64>().map_err(|_| bad())?]),
        _ => Err(bad()),
    }
}

/// Parses a comma separated list of distortions.
pub fn parse_distortions(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad distortion {s:?}"))))
        .collect()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One `(SNR, distortion)` point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub distortion: f64,
    pub seed: u64,
    pub estimate: OutageEstimate,
}

/// Runs the Monte-Carlo sweep; rows ordered by distortion, then SNR.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    cfg.install(|| {
        let mut rows = Vec::with_capacity(cfg.distortion.len() * cfg.snr_db.len());
        for (di, &distortion) in cfg.distortion.iter().enumerate() {
            let target = rate_from_distortion(distortion, cfg.bits_per_symbol)?;
            for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
                let seed = point_seed(cfg.seed, si, di);
                let run = OutageRun {
                    grid,
                    paths: cfg.paths,
                    l_max: cfg.l_max,
                    k_max: cfg.k_max,
                    gamma: db_to_linear(snr_db),
                    target,
                    trials: cfg.trials,
                    seed,
                };
                rows.push(SweepRow { snr_db, distortion, seed, estimate: monte_carlo_outage(&run)? });
            }
        }
        Ok(rows)
    })?
}

fn sig10(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            sig10(r.snr_db),
            sig10(r.distortion),
            e.trials.to_string(),
            e.outages.to_string(),
            sig10(e.p_hat),
            sig10(e.ci_low),
            sig10(e.ci_high),
            sig10(e.lower_bound),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

pub const BOUND_CSV_HEADER: [&str; 4] = ["snr_db", "distortion", "paths", "p_out_lower_bound"];

/// One row of the closed-form lower-bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub snr_db: f64,
    pub distortion: f64,
    pub paths: u32,
    pub lower_bound: f64,
}

/// Lower bound for every `(paths, distortion, SNR)` combination; ordered by
/// path count, then distortion, then SNR.
pub fn bound_table(snr_db: &[f64], distortions: &[f64], paths: &[u32], bits_per_symbol: u32) -> Result<Vec<BoundRow>> {
    if paths.is_empty() || paths.contains(&0) {
        return Err(Error::Config("path counts must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(snr_db.len() * distortions.len() * paths.len());
    for &p in paths {
        for &distortion in distortions {
            let target = rate_from_distortion(distortion, bits_per_symbol).map_err(config_err)?;
            for &snr in snr_db {
                let lower_bound = lower_bound(p, db_to_linear(snr), &target)?;
                rows.push(BoundRow { snr_db: snr, distortion, paths: p, lower_bound });
            }
        }
    }
    Ok(rows)
}

pub fn write_bound_csv<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(BOUND_CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([sig10(r.snr_db), sig10(r.distortion), r.paths.to_string(), sig10(r.lower_bound)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Stream tag separating verification draws from sweep draws.
const VERIFY_STREAM: u64 = 0x7665_7269_6679;

/// Seed of verification campaign `index`.
pub fn campaign_seed(master: u64, index: u64) -> u64 {
    derive(master, &[VERIFY_STREAM, index])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub campaign: u64,
    pub seed: u64,
    pub snr_db: f64,
    pub failed: Vec<&'static str>,
}

/// Tally of a proposition campaign.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub campaigns: u64,
    pub prop1_pass: u64,
    pub prop2_pass: u64,
    pub chain_pass: u64,
    pub hadamard_pass: u64,
    pub xi_product_checked: u64,
    pub xi_product_pass: u64,
    pub prop1_equalities: u64,
    pub prop2_equalities: u64,
    /// Largest `log2 lhs - log2 rhs` seen over all inequalities; negative
    /// when every check held with room to spare.
    pub max_excess: f64,
    pub max_xi_product_rel_err: f64,
    pub max_beta_residual: f64,
    pub max_omega_diagonal: f64,
    pub pairs_outside_assumption: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn success(&self) -> bool {
        self.campaigns > 0 && self.violations.is_empty()
    }

    fn absorb(&mut self, index: u64, seed: u64, snr_db: f64, r: &PropositionReport) {
        let p1 = &r.prop1;
        let p2 = &r.prop2;
        self.campaigns += 1;
        let mut failed = Vec::new();
        let mut tally = |ok: bool, counter: &mut u64, name: &'static str| {
            if ok {
                *counter += 1;
            } else {
                failed.push(name);
            }
        };
        tally(p1.check.holds, &mut self.prop1_pass, "prop1");
        tally(p2.check.holds, &mut self.prop2_pass, "prop2");
        tally(p2.chain.holds, &mut self.chain_pass, "chain");
        tally(p2.hadamard.holds && p2.positive_definite, &mut self.hadamard_pass, "hadamard");
        if let Some(err) = p1.xi_product_rel_err {
            self.xi_product_checked += 1;
            tally(err <= crate::bound_verify::DET_AGREEMENT, &mut self.xi_product_pass, "xi-product");
            self.max_xi_product_rel_err = self.max_xi_product_rel_err.max(err);
        }
        if !p1.pair_products_ok {
            failed.push("pair-product");
        }
        if p1.max_beta_residual > 1e-12 {
            failed.push("beta-antisymmetry");
        }
        if p2.omega_max_diagonal != 0.0 {
            failed.push("omega-diagonal");
        }
        self.prop1_equalities += p1.check.is_equality() as u64;
        self.prop2_equalities += p2.check.is_equality() as u64;
        for c in [&p1.check, &p2.check, &p2.chain, &p2.hadamard] {
            self.max_excess = self.max_excess.max(-c.slack());
        }
        self.max_beta_residual = self.max_beta_residual.max(p1.max_beta_residual);
        self.max_omega_diagonal = self.max_omega_diagonal.max(p2.omega_max_diagonal);
        self.pairs_outside_assumption += p1.pairs_outside_assumption;
        if !failed.is_empty() {
            self.violations.push(Violation { campaign: index, seed, snr_db, failed });
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.campaigns;
        writeln!(f, "prop1: {}/{n}, prop2: {}/{n}", self.prop1_pass, self.prop2_pass)?;
        writeln!(f, "chain (det(I+γG) <= ξ₁^MN): {}/{n}", self.chain_pass)?;
        writeln!(f, "hadamard (det(Ξ+Ω) <= det Ξ, Ξ+Ω > 0): {}/{n}", self.hadamard_pass)?;
        writeln!(
            f,
            "xi-product vs dense determinant: {}/{} (max rel err {:.3e})",
            self.xi_product_pass, self.xi_product_checked, self.max_xi_product_rel_err
        )?;
        writeln!(f, "equality cases: prop1 {}, prop2 {}", self.prop1_equalities, self.prop2_equalities)?;
        writeln!(f, "max excess log2(lhs/rhs): {:.3e}", self.max_excess)?;
        writeln!(f, "max beta antisymmetry residual: {:.3e}", self.max_beta_residual)?;
        writeln!(f, "max |Ω diagonal|: {:e}", self.max_omega_diagonal)?;
        if self.pairs_outside_assumption > 0 {
            writeln!(
                f,
                "note: {} same-delay pairs had |k_diff| >= N (outside the pairing argument's range)",
                self.pairs_outside_assumption
            )?;
        }
        for v in &self.violations {
            writeln!(
                f,
                "VIOLATION campaign {} seed {} snr {} dB: {}",
                v.campaign,
                v.seed,
                v.snr_db,
                v.failed.join(", ")
            )?;
        }
        write!(f, "{}", if self.success() { "result: PASS" } else { "result: FAIL" })
    }
}

/// How a campaign treats the Gram decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GramMode {
    #[default]
    Exact,
    /// Adds `Σ|h_i|^2 · I` to `H_B1`, which must trip Proposition 1.
    Corrupted,
}

/// Runs `campaigns` random realizations through both propositions.
///
/// Campaign `c` draws its channel from `campaign_seed(cfg.seed, c)` and its
/// SNR cycles through `cfg.snr_db`.
pub fn verify_report(cfg: &ExperimentConfig, campaigns: u64) -> Result<VerifyReport> {
    verify_report_with(cfg, campaigns, GramMode::Exact)
}

pub fn verify_report_with(cfg: &ExperimentConfig, campaigns: u64, mode: GramMode) -> Result<VerifyReport> {
    cfg.validate()?;
    if campaigns == 0 {
        return Err(Error::Config("campaign count must be at least 1".into()));
    }
    let grid = cfg.grid()?;
    let results: Vec<(u64, u64, f64, PropositionReport)> = cfg.install(|| {
        (0..campaigns)
            .into_par_iter()
            .map(|c| {
                let seed = campaign_seed(cfg.seed, c);
                let mut rng = rng_from_seed(seed);
                let ch = sample_realization(cfg.paths, cfg.l_max, cfg.k_max, &mut rng)?;
                let snr_db = cfg.snr_db[c as usize % cfg.snr_db.len()];
                let gamma = db_to_linear(snr_db);
                let mut gd = gram_components(&grid, &ch)?;
                if mode == GramMode::Corrupted {
                    let mn = grid.dim();
                    gd.h_b1 += nalgebra::DMatrix::<C64>::identity(mn, mn) * C64::new(ch.energy(), 0.0);
                }
                Ok((c, seed, snr_db, check_decomposition(&grid, &ch, &gd, gamma)?))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut report = VerifyReport { max_excess: f64::NEG_INFINITY, ..Default::default() };
    for (c, seed, snr_db, r) in &results {
        report.absorb(*c, *seed, *snr_db, r);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            m: 4,
            n: 4,
            paths: 3,
            l_max: 3,
            k_max: 3,
            trials: 200,
            snr_db: vec![0.0, 5.0, 10.0],
            distortion: vec![0.05, 0.5],
            ..Default::default()
        }
    }

    #[test]
    fn defaults_mirror_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.m, c.n, c.paths, c.l_max, c.k_max), (16, 16, 5, 8, 8));
        assert_eq!(c.delta_f, 15e3);
        assert_eq!(c.snr_db.len(), 11);
        c.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let c = small();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let partial = ExperimentConfig::from_toml_str("m = 8\nn = 8\nseed = 42\n").unwrap();
        assert_eq!((partial.m, partial.seed, partial.paths), (8, 42, 5));
        assert!(matches!(ExperimentConfig::from_toml_str("bogus = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_names_the_problem() {
        let mut c = small();
        c.paths = 100;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("P = 100"), "{msg}");

        let mut c = small();
        c.snr_db = vec![0.0, 0.0];
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig { m: 32, n: 32, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("heavy"));
        c.enable_heavy();
        c.validate().unwrap();

        let mut c = small();
        c.distortion = vec![0.7];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small();
        c.workers = Some(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn snr_parsing() {
        assert_eq!(parse_snr_range("0:20:2").unwrap().len(), 11);
        assert_eq!(parse_snr_range("30:40:0.5").unwrap().last().copied(), Some(40.0));
        assert_eq!(parse_snr_range("7").unwrap(), vec![7.0]);
        assert!(parse_snr_range("1:2").is_err());
        assert!(parse_snr_range("5:0:1").is_err());
        assert!(parse_snr_range("0:1:0").is_err());
        assert_eq!(parse_distortions("0.05, 0.1").unwrap(), vec![0.05, 0.1]);
        assert!(parse_distortions("x").is_err());
    }

    #[test]
    fn sweep_rows_and_csv() {
        let rows = run_sweep(&small()).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            let e = &r.estimate;
            assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
            assert!((0.0..=1.0).contains(&e.lower_bound));
        }
        for r in rows.iter().filter(|r| r.distortion == 0.5) {
            assert_eq!((r.estimate.p_hat, r.estimate.lower_bound), (0.0, 0.0));
        }
        let csv = csv_string(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[0], "0.000000000e0");
        assert_eq!(first[1], "5.000000000e-2");
        assert_eq!(first[2], "200");
    }

    #[test]
    fn sweep_is_reproducible_across_worker_counts() {
        let mut c = small();
        c.workers = Some(1);
        let a = csv_string(&run_sweep(&c).unwrap()).unwrap();
        c.workers = Some(3);
        let b = csv_string(&run_sweep(&c).unwrap()).unwrap();
        assert_eq!(a, b);
        c.seed += 1;
        assert_ne!(a, csv_string(&run_sweep(&c).unwrap()).unwrap());
    }

    #[test]
    fn verify_campaign_passes_and_corruption_fails() {
        let mut c = small();
        c.m = 8;
        c.n = 8;
        c.paths = 4;
        c.l_max = 8;
        c.k_max = 8;
        let r = verify_report(&c, 40).unwrap();
        assert!(r.success(), "{r}");
        assert!(r.to_string().contains("prop1: 40/40, prop2: 40/40"));

        let bad = verify_report_with(&c, 10, GramMode::Corrupted).unwrap();
        assert!(!bad.success());
        assert_eq!(bad.violations.len(), 10);
        assert!(bad.to_string().contains("VIOLATION"));
    }

    #[test]
    fn bound_table_shape_and_monotonicity() {
        let snr = snr_range(0.0, 20.0, 2.0).unwrap();
        let rows = bound_table(&snr, &[0.05, 0.1], &[1, 3, 5], 1).unwrap();
        assert_eq!(rows.len(), 66);
        for group in rows.chunks(snr.len()) {
            assert!(group.windows(2).all(|w| w[1].lower_bound <= w[0].lower_bound));
        }
        let mut buf = Vec::new();
        write_bound_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("snr_db,distortion,paths,p_out_lower_bound\n"));
        assert!(bound_table(&snr, &[0.05], &[0], 1).is_err());
        assert!(bound_table(&snr, &[0.9], &[1], 1).is_err());
    }

    #[test]
    fn single_path_campaigns_are_equalities() {
        let mut c = small();
        c.paths = 1;
        let r = verify_report(&c, 20).unwrap();
        assert!(r.success());
        assert_eq!((r.prop1_equalities, r.prop2_equalities), (20, 20));
    }
}
