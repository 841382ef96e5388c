//! C ABI for `otfs-outage`.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`OtfsStatus`] and writes its result
//!   through an out-pointer, which is left untouched on failure.
//! - After a non-`OTFS_STATUS_OK` return, [`otfs_last_error_message`] gives a
//!   human-readable description. The message is per-thread.
//! - Channels are opaque handles created by `otfs_channel_*` constructors
//!   and released with [`otfs_channel_free`].
//! - Panics never cross the boundary; they surface as
//!   `OTFS_STATUS_INTERNAL_ERROR`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use otfs_outage::bound_verify::verify_propositions;
use otfs_outage::dd_channel::{apply_channel, build_dd_matrix, sample_realization};
use otfs_outage::outage::{chi_square_tail_sum, lower_bound, monte_carlo_outage, OutageRun};
use otfs_outage::rate_distortion::{binary_entropy, inv_binary_entropy, rate_from_distortion, snr_threshold};
use otfs_outage::seeding::rng_from_seed;
use otfs_outage::spectral::capacity;
use otfs_outage::{ChannelRealization, Error, GridParams, PathSpec, C64};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedStructure = 3,
    NotPositiveDefinite = 4,
    Config = 5,
    Io = 6,
    InternalError = 7,
}

impl From<&Error> for OtfsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::UnsupportedStructure(_) => Self::UnsupportedStructure,
            Error::NotPositiveDefinite { .. } => Self::NotPositiveDefinite,
            Error::Config(_) => Self::Config,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Opaque multipath channel realization.
pub struct OtfsChannel {
    inner: ChannelRealization,
}

/// Frame geometry; the slot duration is fixed to `1 / delta_f`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtfsGrid {
    pub m: usize,
    pub n: usize,
    pub delta_f: f64,
    pub bits_per_symbol: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OtfsComplex {
    pub re: f64,
    pub im: f64,
}

/// One resolvable path.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtfsPath {
    pub gain: OtfsComplex,
    pub delay_idx: usize,
    pub doppler_idx: i64,
}

/// Monte-Carlo outage run. `gamma` is the linear SNR.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OtfsOutageParams {
    pub grid: OtfsGrid,
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
    pub gamma: f64,
    pub distortion: f64,
    pub trials: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OtfsOutageEstimate {
    pub trials: u64,
    pub outages: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub lower_bound: f64,
}

/// Outcome of the determinant inequality checks on one realization.
/// Booleans are `0`/`1`; log-determinants are base 2.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OtfsPropositionResult {
    pub prop1_holds: u8,
    pub prop2_holds: u8,
    pub chain_holds: u8,
    pub log2_det_full: f64,
    pub log2_det_without_b2: f64,
    pub log2_det_h_a: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message describing the last failure on this thread, or `""`.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn otfs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OtfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OtfsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            OtfsStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(&e.to_string());
            OtfsStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal error (panic)");
            OtfsStatus::InternalError
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `T`.
unsafe fn read<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

/// # Safety
/// `p` must be null or valid for writes of `T`.
unsafe fn write<T>(p: *mut T, what: &'static str, value: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    unsafe { p.write(value) };
    Ok(())
}

/// # Safety
/// `p` must be null or valid for reads of `len` elements.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn grid(g: &OtfsGrid) -> Result<GridParams, Fail> {
    Ok(GridParams::new(g.m, g.n, g.delta_f, g.bits_per_symbol)?)
}

fn boxed(ch: ChannelRealization) -> *mut OtfsChannel {
    Box::into_raw(Box::new(OtfsChannel { inner: ch }))
}

/// Draws `paths` Rayleigh paths on distinct cells of
/// `[0, l_max] x [-k_max, k_max]` from the seeded stream `seed`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_sample(
    paths: usize,
    l_max: usize,
    k_max: usize,
    seed: u64,
    out: *mut *mut OtfsChannel,
) -> OtfsStatus {
    guard(|| {
        let ch = sample_realization(paths, l_max, k_max, &mut rng_from_seed(seed))?;
        unsafe { write(out, "out", boxed(ch)) }
    })
}

/// Builds a channel from explicit paths.
///
/// # Safety
/// `paths` must point to `count` readable elements; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_from_paths(
    paths: *const OtfsPath,
    count: usize,
    out: *mut *mut OtfsChannel,
) -> OtfsStatus {
    guard(|| {
        let specs = unsafe { slice(paths, count, "paths") }?
            .iter()
            .map(|p| PathSpec::new(C64::new(p.gain.re, p.gain.im), p.delay_idx, p.doppler_idx))
            .collect();
        let ch = ChannelRealization::new(specs)?;
        unsafe { write(out, "out", boxed(ch)) }
    })
}

/// Releases a channel. Null is ignored.
///
/// # Safety
/// `ch` must be null or a handle from an `otfs_channel_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_free(ch: *mut OtfsChannel) {
    if !ch.is_null() {
        drop(unsafe { Box::from_raw(ch) });
    }
}

/// # Safety
/// `ch` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_path_count(ch: *const OtfsChannel, out: *mut usize) -> OtfsStatus {
    guard(|| {
        let ch = unsafe { read(ch, "channel") }?;
        unsafe { write(out, "out", ch.inner.len()) }
    })
}

/// # Safety
/// `ch` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_get_path(ch: *const OtfsChannel, index: usize, out: *mut OtfsPath) -> OtfsStatus {
    guard(|| {
        let ch = unsafe { read(ch, "channel") }?;
        let p =
            ch.inner.paths().get(index).ok_or_else(|| {
                Error::InvalidArgument(format!("path index {index} out of range 0..{}", ch.inner.len()))
            })?;
        let path = OtfsPath {
            gain: OtfsComplex { re: p.gain.re, im: p.gain.im },
            delay_idx: p.delay_idx,
            doppler_idx: p.doppler_idx,
        };
        unsafe { write(out, "out", path) }
    })
}

/// Total path energy `Σ|h_i|^2`.
///
/// # Safety
/// `ch` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_energy(ch: *const OtfsChannel, out: *mut f64) -> OtfsStatus {
    guard(|| {
        let ch = unsafe { read(ch, "channel") }?;
        unsafe { write(out, "out", ch.inner.energy()) }
    })
}

/// Normalized capacity `log2 det(I + γ H^H H) / MN` in bits per symbol.
///
/// # Safety
/// Pointers must be valid; `ch` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_capacity(
    grid_params: *const OtfsGrid,
    ch: *const OtfsChannel,
    gamma: f64,
    out: *mut f64,
) -> OtfsStatus {
    guard(|| {
        let g = grid(unsafe { read(grid_params, "grid") }?)?;
        let ch = unsafe { read(ch, "channel") }?;
        unsafe { write(out, "out", capacity(&g, &ch.inner, gamma)?) }
    })
}

/// `y = H_DD x + noise`; all three buffers hold `len = M·N` elements.
///
/// # Safety
/// `x` and `noise` must be readable and `y` writable for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn otfs_apply_channel(
    grid_params: *const OtfsGrid,
    ch: *const OtfsChannel,
    x: *const OtfsComplex,
    noise: *const OtfsComplex,
    y: *mut OtfsComplex,
    len: usize,
) -> OtfsStatus {
    guard(|| {
        let g = grid(unsafe { read(grid_params, "grid") }?)?;
        let ch = unsafe { read(ch, "channel") }?;
        let to_c = |s: &[OtfsComplex]| s.iter().map(|z| C64::new(z.re, z.im)).collect::<Vec<_>>();
        let x = to_c(unsafe { slice(x, len, "x") }?);
        let w = to_c(unsafe { slice(noise, len, "noise") }?);
        if y.is_null() && len > 0 {
            return Err(Fail::Null("y"));
        }
        let h = build_dd_matrix(&g, &ch.inner)?;
        let out = apply_channel(&h, &x, &w)?;
        for (i, z) in out.into_iter().enumerate() {
            unsafe { y.add(i).write(OtfsComplex { re: z.re, im: z.im }) };
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_binary_entropy(p: f64, out: *mut f64) -> OtfsStatus {
    guard(|| unsafe { write(out, "out", binary_entropy(p)?) })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_inv_binary_entropy(v: f64, out: *mut f64) -> OtfsStatus {
    guard(|| unsafe { write(out, "out", inv_binary_entropy(v)?) })
}

/// Rate `R = K (1 - H_b(D))` in bits per symbol.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_rate_from_distortion(distortion: f64, bits_per_symbol: u32, out: *mut f64) -> OtfsStatus {
    guard(|| unsafe { write(out, "out", rate_from_distortion(distortion, bits_per_symbol)?.rate) })
}

/// `2^R - 1` for the target `(D, K)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_snr_threshold(distortion: f64, bits_per_symbol: u32, out: *mut f64) -> OtfsStatus {
    guard(|| unsafe { write(out, "out", snr_threshold(&rate_from_distortion(distortion, bits_per_symbol)?)) })
}

/// `1 - e^{-x} Σ_{i<P} x^i/i!`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_chi_square_tail_sum(paths: u32, x: f64, out: *mut f64) -> OtfsStatus {
    guard(|| unsafe { write(out, "out", chi_square_tail_sum(paths, x)?) })
}

/// Closed-form outage lower bound at linear SNR `gamma`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_lower_bound(
    paths: u32,
    gamma: f64,
    distortion: f64,
    bits_per_symbol: u32,
    out: *mut f64,
) -> OtfsStatus {
    guard(|| {
        let target = rate_from_distortion(distortion, bits_per_symbol)?;
        unsafe { write(out, "out", lower_bound(paths, gamma, &target)?) }
    })
}

/// Monte-Carlo outage estimate; deterministic in `params.seed`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_monte_carlo_outage(
    params: *const OtfsOutageParams,
    out: *mut OtfsOutageEstimate,
) -> OtfsStatus {
    guard(|| {
        let p = unsafe { read(params, "params") }?;
        let run = OutageRun {
            grid: grid(&p.grid)?,
            paths: p.paths,
            l_max: p.l_max,
            k_max: p.k_max,
            gamma: p.gamma,
            target: rate_from_distortion(p.distortion, p.grid.bits_per_symbol)?,
            trials: p.trials,
            seed: p.seed,
        };
        let e = monte_carlo_outage(&run)?;
        let est = OtfsOutageEstimate {
            trials: e.trials,
            outages: e.outages,
            p_hat: e.p_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            lower_bound: e.lower_bound,
        };
        unsafe { write(out, "out", est) }
    })
}

/// Runs both determinant inequality checks on one realization.
///
/// # Safety
/// Pointers must be valid; `ch` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_verify_propositions(
    grid_params: *const OtfsGrid,
    ch: *const OtfsChannel,
    gamma: f64,
    out: *mut OtfsPropositionResult,
) -> OtfsStatus {
    guard(|| {
        let g = grid(unsafe { read(grid_params, "grid") }?)?;
        let ch = unsafe { read(ch, "channel") }?;
        let r = verify_propositions(&g, &ch.inner, gamma)?;
        let res = OtfsPropositionResult {
            prop1_holds: r.prop1.passed() as u8,
            prop2_holds: r.prop2.passed() as u8,
            chain_holds: r.prop2.chain.holds as u8,
            log2_det_full: r.prop2.check.log2_lhs,
            log2_det_without_b2: r.prop2.check.log2_rhs,
            log2_det_h_a: r.prop1.check.log2_rhs,
        };
        unsafe { write(out, "out", res) }
    })
}
