//! C ABI for the stationary field sampler, single SRBP trajectories and the ρ² quadrature.
//!
//! Every fallible function returns one of the `SRBP_*` status codes. On failure
//! `srbp_last_error` returns a message for the calling thread. Handles are
//! opaque; each `*_new` must be paired with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use srbp_core::chaos::{rho2_quadrature, Rho2Convention};
use srbp_core::srbp::{self, InitialMode, SrbpConfig, SrbpState};
use srbp_core::{Error, GridSpec, PotentialSpec, StationarySampler};

pub const SRBP_OK: i32 = 0;
pub const SRBP_ERR_NULL: i32 = -1;
pub const SRBP_ERR_INVALID: i32 = -2;
pub const SRBP_ERR_NUMERICAL: i32 = -3;
pub const SRBP_ERR_INTEGRITY: i32 = -4;
pub const SRBP_ERR_IO: i32 = -5;
pub const SRBP_ERR_PANIC: i32 = -6;

pub const SRBP_RHO2_LITERAL: i32 = 0;
pub const SRBP_RHO2_DERIVATION: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) => SRBP_ERR_INVALID,
        Error::Numerical(_) => SRBP_ERR_NUMERICAL,
        Error::Integrity(_) => SRBP_ERR_INTEGRITY,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => SRBP_ERR_IO,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SRBP_OK,
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            SRBP_ERR_NULL
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            code(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SRBP_ERR_PANIC
        }
    }
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, need: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(Fail::Null(what));
    }
    if len < need {
        return Err(Error::invalid(format!("{what}: buffer holds {len} values, need {need}")).into());
    }
    Ok(std::slice::from_raw_parts_mut(ptr, need))
}

fn nonnull<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

/// Message describing the most recent failure on this thread.
///
/// The pointer stays valid until the next failing call on the same thread.
/// Returns an empty string when nothing has failed yet.
#[no_mangle]
pub extern "C" fn srbp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Gaussian potential and periodic grid shared by the constructors.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SrbpModel {
    pub dim: u32,
    /// Grid points per axis.
    pub n: u32,
    /// Grid spacing.
    pub h: f64,
    pub amplitude: f64,
    pub width: f64,
}

impl SrbpModel {
    fn parts(&self) -> srbp_core::Result<(PotentialSpec, GridSpec)> {
        let spec = PotentialSpec::gaussian(self.dim as usize, self.amplitude, self.width)?;
        let grid = GridSpec::new(self.dim as usize, self.n as usize, self.h)?;
        Ok((spec, grid))
    }
}

/// Opaque stationary field sampler.
pub struct SrbpSampler {
    inner: StationarySampler,
    len: usize,
}

/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_sampler_new(model: *const SrbpModel, out: *mut *mut SrbpSampler) -> i32 {
    guard(|| {
        let model = nonnull(model, "model")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let (spec, grid) = model.parts()?;
        let inner = StationarySampler::new(&spec, &grid)?;
        let s = Box::new(SrbpSampler { inner, len: grid.len() });
        unsafe { *out = Box::into_raw(s) };
        Ok(())
    })
}

/// Number of grid values written by `srbp_sampler_sample`; 0 for a null handle.
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_sampler_len(sampler: *const SrbpSampler) -> usize {
    unsafe { sampler.as_ref() }.map_or(0, |s| s.len)
}

/// Draws one field for `seed` into `out` (row-major, last axis fastest).
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_sampler_sample(sampler: *const SrbpSampler, seed: u64, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let s = nonnull(sampler, "sampler")?;
        let dst = unsafe { out_slice(out, len, s.len, "out")? };
        dst.copy_from_slice(&s.inner.sample(seed).values);
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_sampler_free(sampler: *mut SrbpSampler) {
    if !sampler.is_null() {
        drop(unsafe { Box::from_raw(sampler) });
    }
}

/// Parameters of one trajectory.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SrbpRunConfig {
    pub model: SrbpModel,
    pub dt: f64,
    pub seed: u64,
    /// Trajectory index within the ensemble; selects the random streams.
    pub index: u64,
    /// Nonzero for a stationary initial field, zero for an empty one.
    pub stationary: i32,
}

/// Opaque single-trajectory simulation.
pub struct SrbpSimulation {
    state: SrbpState,
    dt: f64,
}

/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_simulation_new(config: *const SrbpRunConfig, out: *mut *mut SrbpSimulation) -> i32 {
    guard(|| {
        let c = nonnull(config, "config")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let (potential, grid) = c.model.parts()?;
        let cfg = SrbpConfig {
            potential,
            grid,
            dt: c.dt,
            horizon: c.dt,
            seed: c.seed,
            ensemble: c.index as usize + 1,
            initial: if c.stationary != 0 {
                InitialMode::Stationary
            } else {
                InitialMode::Empty
            },
            record_stride: 1,
        };
        let state = srbp::init(&cfg, c.index as usize)?;
        let sim = Box::new(SrbpSimulation { state, dt: c.dt });
        unsafe { *out = Box::into_raw(sim) };
        Ok(())
    })
}

/// Advances the trajectory by `steps` Euler-Maruyama steps.
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_simulation_step(sim: *mut SrbpSimulation, steps: u64) -> i32 {
    guard(|| {
        let s = unsafe { sim.as_mut() }.ok_or(Fail::Null("sim"))?;
        for _ in 0..steps {
            s.state.step(s.dt);
        }
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_simulation_time(sim: *const SrbpSimulation, out: *mut f64) -> i32 {
    guard(|| {
        let s = nonnull(sim, "sim")?;
        let dst = unsafe { out_slice(out, 1, 1, "out")? };
        dst[0] = s.state.t;
        Ok(())
    })
}

/// Writes the unwrapped position, the Brownian part and the compensator,
/// `dim` values each. Any of the three pointers may be null to skip it.
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_simulation_state(
    sim: *const SrbpSimulation,
    position: *mut f64,
    brownian: *mut f64,
    compensator: *mut f64,
    len: usize,
) -> i32 {
    guard(|| {
        let s = nonnull(sim, "sim")?;
        let d = s.state.dim();
        for (p, src, what) in [
            (position, &s.state.x, "position"),
            (brownian, &s.state.b, "brownian"),
            (compensator, &s.state.compensator, "compensator"),
        ] {
            if !p.is_null() {
                unsafe { out_slice(p, len, d, what)? }.copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_simulation_free(sim: *mut SrbpSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// ρ² of the Gaussian potential by adaptive quadrature.
///
/// # Safety
/// Pointer arguments must be null or valid for the stated lengths; handles must come from the matching `*_new`.
#[no_mangle]
pub unsafe extern "C" fn srbp_rho2(dim: u32, amplitude: f64, width: f64, convention: i32, out: *mut f64) -> i32 {
    guard(|| {
        let dst = unsafe { out_slice(out, 1, 1, "out")? };
        let conv = match convention {
            SRBP_RHO2_LITERAL => Rho2Convention::Literal,
            SRBP_RHO2_DERIVATION => Rho2Convention::Derivation,
            other => return Err(Error::invalid(format!("unknown convention {other}")).into()),
        };
        let spec = PotentialSpec::gaussian(dim as usize, amplitude, width)?;
        dst[0] = rho2_quadrature(&spec, conv)?.value;
        Ok(())
    })
}
