use std::ffi::CStr;
use std::ptr;

use srbp_core::srbp::{self, InitialMode, SrbpConfig};
use srbp_core::{GridSpec, PotentialSpec, StationarySampler};
use srbp_ffi::*;

fn model(dim: u32) -> SrbpModel {
    SrbpModel {
        dim,
        n: 32,
        h: 0.5,
        amplitude: 1.0,
        width: 1.0,
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(srbp_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn sampler_matches_the_core_sampler() {
    let m = model(3);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { srbp_sampler_new(&m, &mut s) }, SRBP_OK);
    let n = unsafe { srbp_sampler_len(s) };
    assert_eq!(n, 32 * 32 * 32);
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { srbp_sampler_sample(s, 9, buf.as_mut_ptr(), n) }, SRBP_OK);
    let grid = GridSpec::new(3, 32, 0.5).unwrap();
    let want = StationarySampler::new(&PotentialSpec::unit(3), &grid).unwrap().sample(9);
    assert_eq!(buf, want.values);
    unsafe { srbp_sampler_free(s) };
}

#[test]
fn errors_map_to_codes() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { srbp_sampler_new(ptr::null(), &mut s) }, SRBP_ERR_NULL);
    assert!(last_error().contains("null"), "{}", last_error());
    assert_eq!(unsafe { srbp_sampler_new(&model(2), &mut s) }, SRBP_ERR_INVALID);
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { srbp_sampler_new(&model(3), &mut s) }, SRBP_OK);
    let mut small = vec![0.0; 10];
    assert_eq!(unsafe { srbp_sampler_sample(s, 1, small.as_mut_ptr(), small.len()) }, SRBP_ERR_INVALID);
    assert!(last_error().contains("buffer"));
    assert_eq!(unsafe { srbp_sampler_sample(s, 1, ptr::null_mut(), 0) }, SRBP_ERR_NULL);
    unsafe { srbp_sampler_free(s) };

    let mut v = 0.0;
    assert_eq!(unsafe { srbp_rho2(3, 1.0, 1.0, 7, &mut v) }, SRBP_ERR_INVALID);
    assert_eq!(unsafe { srbp_rho2(3, -1.0, 1.0, SRBP_RHO2_LITERAL, &mut v) }, SRBP_ERR_INVALID);
    assert_eq!(unsafe { srbp_simulation_step(ptr::null_mut(), 1) }, SRBP_ERR_NULL);
}

#[test]
fn last_error_is_per_thread() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { srbp_sampler_new(ptr::null(), &mut s) }, SRBP_ERR_NULL);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
    assert!(!last_error().is_empty());
}

#[test]
fn free_accepts_null() {
    unsafe {
        srbp_sampler_free(ptr::null_mut());
        srbp_simulation_free(ptr::null_mut());
    }
}

#[test]
fn simulation_follows_the_core_trajectory() {
    let cfg = SrbpRunConfig {
        model: model(3),
        dt: 0.01,
        seed: 5,
        index: 2,
        stationary: 1,
    };
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { srbp_simulation_new(&cfg, &mut sim) }, SRBP_OK);
    assert_eq!(unsafe { srbp_simulation_step(sim, 100) }, SRBP_OK);
    let mut t = 0.0;
    assert_eq!(unsafe { srbp_simulation_time(sim, &mut t) }, SRBP_OK);
    assert!((t - 1.0).abs() < 1e-12);
    let (mut x, mut b, mut c) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    let rc = unsafe { srbp_simulation_state(sim, x.as_mut_ptr(), b.as_mut_ptr(), c.as_mut_ptr(), 3) };
    assert_eq!(rc, SRBP_OK);
    for a in 0..3 {
        assert!((x[a] - b[a] - c[a]).abs() <= 1e-12);
    }

    let core = SrbpConfig {
        potential: PotentialSpec::unit(3),
        grid: GridSpec::new(3, 32, 0.5).unwrap(),
        dt: 0.01,
        horizon: 1.0,
        seed: 5,
        ensemble: 3,
        initial: InitialMode::Stationary,
        record_stride: 1,
    };
    let mut st = srbp::init(&core, 2).unwrap();
    for _ in 0..100 {
        st.step(0.01);
    }
    assert_eq!(&x[..], &st.x[..]);

    let mut short = [0.0; 2];
    let rc = unsafe { srbp_simulation_state(sim, short.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 2) };
    assert_eq!(rc, SRBP_ERR_INVALID);
    unsafe { srbp_simulation_free(sim) };
}

#[test]
fn empty_start_in_one_dimension() {
    let cfg = SrbpRunConfig {
        model: SrbpModel { dim: 1, n: 256, ..model(1) },
        dt: 0.01,
        seed: 1,
        index: 0,
        stationary: 0,
    };
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { srbp_simulation_new(&cfg, &mut sim) }, SRBP_OK);
    let mut x = [1.0];
    unsafe { srbp_simulation_state(sim, x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 1) };
    assert_eq!(x[0], 0.0);
    unsafe { srbp_simulation_free(sim) };

    let stationary = SrbpRunConfig { stationary: 1, ..cfg };
    assert_eq!(unsafe { srbp_simulation_new(&stationary, &mut sim) }, SRBP_ERR_INVALID);
}

#[test]
fn rho2_conventions() {
    let mut v = 0.0;
    assert_eq!(unsafe { srbp_rho2(3, 1.0, 1.0, SRBP_RHO2_LITERAL, &mut v) }, SRBP_OK);
    assert!((v - 5.249870).abs() < 1e-6);
    assert_eq!(unsafe { srbp_rho2(3, 1.0, 1.0, SRBP_RHO2_DERIVATION, &mut v) }, SRBP_OK);
    assert!((v - 4.0 / 3.0).abs() < 1e-9);
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/srbp.h")).unwrap();
    for name in [
        "srbp_last_error",
        "srbp_sampler_new",
        "srbp_sampler_len",
        "srbp_sampler_sample",
        "srbp_sampler_free",
        "srbp_simulation_new",
        "srbp_simulation_step",
        "srbp_simulation_time",
        "srbp_simulation_state",
        "srbp_simulation_free",
        "srbp_rho2",
        "SRBP_ERR_PANIC",
        "typedef struct SrbpSampler SrbpSampler",
        "typedef struct SrbpModel",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/srbp.h");
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status();
    match status {
        Ok(s) => assert!(s.success(), "cc rejected the header"),
        Err(_) => eprintln!("no C compiler found; skipped"),
    }
}
