use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use srbp_core::field::{FieldRole, GridSpec, ScalarField, StationarySampler};
use srbp_core::potential::PotentialSpec;
use srbp_core::rng;
use srbp_core::scenery::{
    gradient_transient, h_minus1_estimate, run_on_field, run_scenery, H1Estimate, Observable, SceneryConfig,
    SceneryEnsemble, Transient, Window,
};
use srbp_core::stats;
use srbp_core::Error;

fn config() -> SceneryConfig {
    SceneryConfig {
        potential: PotentialSpec::unit(3),
        grid: GridSpec::new(3, 32, 0.5).unwrap(),
        dt: 0.05,
        horizon: 20.0,
        ensemble: 200,
        seed: 5,
        observable: Observable::Gradient,
        record_stride: 10,
    }
}

/// `A(t) = √rate · W(t)`: white-in-time integrand with a known variance rate.
fn white(m: usize, rate: f64, seed: u64) -> SceneryEnsemble {
    let dt = 0.1;
    let steps = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = (0..m)
        .map(|_| {
            let mut a = 0.0;
            let mut s = vec![0.0];
            for _ in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                a += (rate * dt).sqrt() * z;
                s.push(a);
            }
            s
        })
        .collect();
    SceneryEnsemble {
        dim: 3,
        channels: 1,
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        series,
    }
}

fn window() -> Window {
    Window { t_min: 4.0, t_max: 40.0 }
}

fn width(e: &H1Estimate) -> f64 {
    e.ci_high - e.ci_low
}

#[test]
fn white_signal_calibrates() {
    let e = h_minus1_estimate(&white(400, 2.5, 1), window(), Transient::Fixed(0.0), 400, 3).unwrap();
    assert!(e.ci_low <= 2.5 && 2.5 <= e.ci_high, "{e:?}");
    assert_eq!(e.ensemble, 400);
}

#[test]
fn ci_shrinks_like_inverse_root_of_ensemble() {
    let small = h_minus1_estimate(&white(400, 1.0, 7), window(), Transient::Fixed(0.0), 400, 3).unwrap();
    let large = h_minus1_estimate(&white(800, 1.0, 8), window(), Transient::Fixed(0.0), 400, 3).unwrap();
    let ratio = width(&small) / width(&large);
    let expected = 2f64.sqrt();
    assert!((ratio / expected - 1.0).abs() <= 0.3, "width ratio {ratio}");
}

#[test]
fn rising_variance_is_flagged() {
    let mut ens = white(200, 1.0, 2);
    for s in ens.series.iter_mut() {
        // A(t) = W(t) · t^{1/2} gives Var A = t²
        for (k, v) in s.iter_mut().enumerate() {
            *v *= (k as f64 * 0.1).sqrt();
        }
    }
    match h_minus1_estimate(&ens, window(), Transient::Fixed(0.0), 100, 1) {
        Err(Error::Numerical(_)) => {}
        other => panic!("expected a plateau failure, got {other:?}"),
    }
}

#[test]
fn transient_modes_cover_the_rate() {
    let mut ens = white(400, 1.5, 4);
    for s in ens.series.iter_mut() {
        for (k, v) in s.iter_mut().enumerate() {
            // deterministic offset whose square adds the transient shape
            let t = k as f64 * 0.1;
            *v = (v.powi(2) + t.sqrt()).sqrt().copysign(*v);
        }
    }
    let fitted = h_minus1_estimate(&ens, window(), Transient::Fitted, 300, 2).unwrap();
    let known = h_minus1_estimate(&ens, window(), Transient::Fixed(1.0), 300, 2).unwrap();
    for e in [&fitted, &known] {
        assert!(e.ci_low <= 1.5 && 1.5 <= e.ci_high, "{e:?}");
    }
    assert!(width(&known) < 0.5 * width(&fitted));
}

#[test]
fn known_transient_coefficients() {
    let three = gradient_transient(&PotentialSpec::unit(3)).unwrap();
    assert_eq!(three, Transient::Fixed(-8.0 / 3.0));
    let wide = PotentialSpec::gaussian(3, 2.0, 1.5).unwrap();
    match gradient_transient(&wide).unwrap() {
        Transient::Fixed(b) => assert!((b + 8.0 * 2.0 * 1.5f64.powi(3) / 3.0).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    assert_eq!(gradient_transient(&PotentialSpec::unit(4)).unwrap(), Transient::Fixed(-0.5));
    assert!(gradient_transient(&PotentialSpec::unit(2)).is_err());
}

#[test]
fn short_window_is_rejected() {
    let ens = white(200, 1.0, 2);
    assert!(h_minus1_estimate(&ens, Window { t_min: 1.0, t_max: 1.5 }, Transient::Fitted, 100, 1).is_err());
}

#[test]
fn zero_field_gives_zero_integral() {
    let cfg = config();
    let f = ScalarField::zeros(cfg.grid, FieldRole::Environment);
    for obs in [Observable::Gradient, Observable::FieldValue, Observable::GradientComponent(1)] {
        let c = SceneryConfig { observable: obs, ..cfg };
        assert!(run_on_field(&c, &f, 3).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn field_is_frozen_within_a_trajectory() {
    let cfg = config();
    let f = StationarySampler::new(&cfg.potential, &cfg.grid).unwrap().sample(4);
    let a = run_on_field(&cfg, &f, 0);
    let b = run_on_field(&cfg, &f, 0);
    assert_eq!(a, b);
    let x = [3.3, -1.2, 7.05];
    assert!((f.value_at(&x) - f.value_at(&[x[0] + 16.0, x[1] - 32.0, x[2]])).abs() < 1e-12);
    assert_eq!(f.grad_at(&x), f.grad_at(&x));
}

#[test]
fn ensemble_mean_vanishes_and_variance_grows_linearly() {
    let cfg = config();
    let ens = run_scenery(&cfg).unwrap();
    let last = ens.times.len() - 1;
    for (m, se) in ens.mean_at(last) {
        assert!(m.abs() <= 4.0 * se, "mean {m} ± {se}");
    }
    let e = h_minus1_estimate(&ens, Window { t_min: 2.0, t_max: 20.0 }, gradient_transient(&cfg.potential).unwrap(), 200, 1).unwrap();
    assert!(e.estimate.is_finite() && e.estimate > 0.0);
    let curve = ens.variance_curve();
    assert!(curve[last].var / cfg.horizon < 3.0 * e.estimate);
    let csv = String::from_utf8(ens.variance_csv()).unwrap();
    assert!(csv.starts_with("t,var,stderr\n"));
    assert_eq!(csv.lines().count(), ens.times.len() + 1);
}

#[test]
fn brownian_driver_is_independent_of_the_field() {
    let cfg = SceneryConfig { ensemble: 400, ..config() };
    let sampler = StationarySampler::new(&cfg.potential, &cfg.grid).unwrap();
    let mut omega = Vec::new();
    let mut first = Vec::new();
    for j in 0..cfg.ensemble / 2 {
        let (f0, f1) = sampler.sample_pair(rng::derive_seed(cfg.seed, j as u64, rng::FIELD));
        for (i, f) in [(2 * j, f0), (2 * j + 1, f1)] {
            let mut r = rng::stream(cfg.seed, i as u64, rng::NOISE);
            let z: f64 = StandardNormal.sample(&mut r);
            omega.push(f.values[0]);
            first.push(z);
        }
    }
    let r = stats::pearson(&omega, &first);
    let z = r * (omega.len() as f64 - 3.0).sqrt();
    assert!(z.abs() < 4.0, "correlation z = {z}");
}

#[test]
fn field_value_observable_has_one_channel() {
    let cfg = SceneryConfig {
        observable: Observable::FieldValue,
        ensemble: 6,
        horizon: 1.0,
        ..config()
    };
    let ens = run_scenery(&cfg).unwrap();
    assert_eq!(ens.channels, 1);
    assert_eq!(ens.series[0].len(), ens.times.len());
    let bad = SceneryConfig { observable: Observable::GradientComponent(3), ..cfg };
    assert!(run_scenery(&bad).is_err());
}
