//! Brownian motion in a frozen stationary scenery.
//!
//! `A(t) = ∫_0^t φ(τ_{Z_s} ω) ds` with `Z` a standard Brownian motion independent
//! of the frozen field `ω`. The long-time variance rate `lim t⁻¹ E A(t)²` equals
//! `2 ‖S^{-1/2} φ‖²` and serves as the Monte Carlo reference for the H₋₁ bound.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, StationarySampler};
use crate::potential::PotentialSpec;
use crate::rng;
use crate::stats;
use crate::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "component")]
pub enum Observable {
    /// `φ_l(ω) = -∂_l ω(0)` for one component.
    GradientComponent(usize),
    /// All `d` components of `-grad ω(0)`, recorded as separate channels.
    Gradient,
    /// `φ(ω) = ω(0)`.
    FieldValue,
}

impl Observable {
    pub fn channels(&self, dim: usize) -> usize {
        match self {
            Observable::Gradient => dim,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneryConfig {
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub observable: Observable,
    pub record_stride: usize,
}

impl SceneryConfig {
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        self.grid.validate()?;
        self.grid.check_potential(&self.potential)?;
        if self.grid.dim < 3 {
            return Err(Error::invalid("random scenery requires d >= 3"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.record_stride == 0 || self.ensemble == 0 {
            return Err(Error::invalid("record stride and ensemble must be positive"));
        }
        if let Observable::GradientComponent(l) = self.observable {
            if l >= self.grid.dim {
                return Err(Error::invalid(format!("gradient component {l} out of range")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Recorded `A(t)` for every trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneryEnsemble {
    pub dim: usize,
    pub channels: usize,
    pub times: Vec<f64>,
    /// `series[i][k * channels + c]` is channel `c` of trajectory `i` at `times[k]`.
    pub series: Vec<Vec<f64>>,
}

/// Integrates one trajectory on a given frozen field.
pub fn run_on_field(cfg: &SceneryConfig, field: &ScalarField, index: usize) -> Vec<f64> {
    let d = cfg.grid.dim;
    let ch = cfg.observable.channels(d);
    let mut rng = rng::stream(cfg.seed, index as u64, rng::NOISE);
    let steps = cfg.steps();
    let sdt = cfg.dt.sqrt();
    let mut z = [0.0; MAX_DIM];
    let mut acc = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM];
    let mut out = Vec::with_capacity((steps / cfg.record_stride + 2) * ch);
    out.extend_from_slice(&acc[..ch]);
    for k in 1..=steps {
        match cfg.observable {
            Observable::FieldValue => acc[0] += field.value_at(&z[..d]) * cfg.dt,
            Observable::GradientComponent(l) => {
                field.grad_into(&z[..d], &mut g[..d]);
                acc[0] -= g[l] * cfg.dt;
            }
            Observable::Gradient => {
                field.grad_into(&z[..d], &mut g[..d]);
                for c in 0..d {
                    acc[c] -= g[c] * cfg.dt;
                }
            }
        }
        for zi in z.iter_mut().take(d) {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *zi += sdt * xi;
        }
        if k % cfg.record_stride == 0 || k == steps {
            out.extend_from_slice(&acc[..ch]);
        }
    }
    out
}

fn record_times(cfg: &SceneryConfig) -> Vec<f64> {
    let steps = cfg.steps();
    let mut t = vec![0.0];
    for k in 1..=steps {
        if k % cfg.record_stride == 0 || k == steps {
            t.push(k as f64 * cfg.dt);
        }
    }
    t
}

/// Runs the ensemble. Trajectories `2j` and `2j + 1` use the two independent
/// fields produced by one spectral draw with seed `derive_seed(seed, j, FIELD)`.
pub fn run_scenery(cfg: &SceneryConfig) -> Result<SceneryEnsemble> {
    cfg.validate()?;
    let sampler = StationarySampler::new(&cfg.potential, &cfg.grid)?;
    let pairs = cfg.ensemble.div_ceil(2);
    let per_pair: Vec<Vec<Vec<f64>>> = (0..pairs)
        .into_par_iter()
        .map(|j| {
            let (f0, f1) = sampler.sample_pair(rng::derive_seed(cfg.seed, j as u64, rng::FIELD));
            let mut v = vec![run_on_field(cfg, &f0, 2 * j)];
            drop(f0);
            if 2 * j + 1 < cfg.ensemble {
                v.push(run_on_field(cfg, &f1, 2 * j + 1));
            }
            v
        })
        .collect();
    let series: Vec<Vec<f64>> = per_pair.into_iter().flatten().collect();
    if series.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical("scenery integration produced non-finite values"));
    }
    Ok(SceneryEnsemble {
        dim: cfg.grid.dim,
        channels: cfg.observable.channels(cfg.grid.dim),
        times: record_times(cfg),
        series,
    })
}

/// One point of the variance curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub t: f64,
    pub var: f64,
    pub stderr: f64,
}

impl SceneryEnsemble {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Per-trajectory `mean_c A_c(t_k)²`.
    fn second_moment(&self, traj: usize, k: usize) -> f64 {
        let s = &self.series[traj][k * self.channels..(k + 1) * self.channels];
        s.iter().map(|v| v * v).sum::<f64>() / self.channels as f64
    }

    fn curve_from(&self, idx: &[usize], ks: &[usize]) -> Vec<f64> {
        ks.iter()
            .map(|&k| idx.iter().map(|&i| self.second_moment(i, k)).sum::<f64>() / idx.len() as f64)
            .collect()
    }

    /// `Var A(t) = E A(t)²` (the mean is zero by symmetry), pooled over channels.
    pub fn variance_curve(&self) -> Vec<VariancePoint> {
        (0..self.times.len())
            .map(|k| {
                let y: Vec<f64> = (0..self.len()).map(|i| self.second_moment(i, k)).collect();
                let (var, stderr) = if y.len() > 1 { stats::mean_stderr(&y) } else { (y[0], f64::NAN) };
                VariancePoint {
                    t: self.times[k],
                    var,
                    stderr,
                }
            })
            .collect()
    }

    /// Ensemble mean of `A(t)` per channel with standard errors.
    pub fn mean_at(&self, k: usize) -> Vec<(f64, f64)> {
        (0..self.channels)
            .map(|c| {
                let y: Vec<f64> = self.series.iter().map(|s| s[k * self.channels + c]).collect();
                stats::mean_stderr(&y)
            })
            .collect()
    }

    pub fn variance_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "t,var,stderr").unwrap();
        for p in self.variance_curve() {
            writeln!(out, "{},{},{}", p.t, p.var, p.stderr).unwrap();
        }
        out
    }
}

/// Fit window in time units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_min: f64,
    pub t_max: f64,
}

/// Treatment of the finite-time correction to `Var A(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "coefficient")]
pub enum Transient {
    /// Coefficient of the transient basis fitted with the rate.
    Fitted,
    /// Coefficient known in advance (see [`gradient_transient`]).
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Estimate {
    /// Long-time variance rate per channel.
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub transient_mode: Transient,
    /// Coefficient of the finite-time transient term (fitted or fixed).
    pub transient: f64,
    /// Plain least-squares slope of `Var A` over the window (biased by the transient).
    pub raw_slope: f64,
    /// Growth of the transient-corrected local slope, per decade of time.
    pub rise_per_decade: f64,
    /// Bootstrap 2.5% quantile of `rise_per_decade`.
    pub rise_ci_low: f64,
    pub window: Window,
    pub ensemble: usize,
    pub points: usize,
}

/// Transient basis function: `t^{2 - d/2}` (`ln t` in d = 4).
fn transient_basis(dim: usize, t: f64) -> f64 {
    if dim == 4 {
        t.ln()
    } else {
        t.powf(2.0 - dim as f64 / 2.0)
    }
}

/// Transient coefficient for a gradient-component observable.
///
/// The velocity autocorrelation decays as `κ s^{-d/2}` with `κ = V̂(0) / d`, so
/// `Var A(t) = r t - 2κ t^{2-d/2} / ((d/2 - 1)(2 - d/2)) + O(1)` for `2 < d < 4`
/// and `r t - 2κ ln t + O(1)` in `d = 4`.
pub fn gradient_transient(spec: &PotentialSpec) -> Result<Transient> {
    spec.validate()?;
    let d = spec.dim;
    if d < 3 {
        return Err(Error::invalid("random scenery requires d >= 3"));
    }
    let kappa = spec.fourier_p2(0.0) / d as f64;
    let b = if d == 4 {
        -2.0 * kappa
    } else {
        let a = d as f64 / 2.0;
        -2.0 * kappa / ((a - 1.0) * (2.0 - a))
    };
    Ok(Transient::Fixed(b))
}

/// `(rate, transient coefficient)`.
fn fit(dim: usize, t: &[f64], v: &[f64], mode: Transient) -> Result<(f64, f64)> {
    match mode {
        Transient::Fitted => {
            let rows: Vec<Vec<f64>> = t.iter().map(|&x| vec![x, transient_basis(dim, x), 1.0]).collect();
            let b = stats::least_squares(&rows, v)?;
            Ok((b[0], b[1]))
        }
        Transient::Fixed(b) => {
            let y: Vec<f64> = t.iter().zip(v).map(|(&x, &y)| y - b * transient_basis(dim, x)).collect();
            Ok((stats::linear_fit(t, &y)?.slope, b))
        }
    }
}

/// Relative growth of the corrected slope between the window halves, per decade.
fn rise(dim: usize, t: &[f64], v: &[f64], b: f64) -> Result<f64> {
    let corrected: Vec<f64> = t.iter().zip(v).map(|(&x, &y)| y - b * transient_basis(dim, x)).collect();
    let half = t.len() / 2;
    let s1 = stats::linear_fit(&t[..half], &corrected[..half])?.slope;
    let s2 = stats::linear_fit(&t[half..], &corrected[half..])?.slope;
    let m1 = stats::mean(&t[..half]);
    let m2 = stats::mean(&t[half..]);
    Ok((s2 / s1 - 1.0) / (m2 / m1).log10())
}

/// Long-time variance rate of `A(t)` over a tail window.
///
/// `Var A(t)` is modelled as `r t + b g(t) + c` with `g(t) = t^{2-d/2}` (`ln t`
/// in d = 4), the leading finite-time correction of a transient Brownian motion
/// sampling a field with `|p|^{-2}`-type spectrum; `b` is fitted or fixed per
/// `transient`. A percentile bootstrap over trajectories gives the 95% CI. The
/// estimate is refused when the transient-corrected slope rises by more than
/// 10% per decade across the window with bootstrap confidence (lower 2.5%
/// quantile above 0.10).
pub fn h_minus1_estimate(
    ens: &SceneryEnsemble,
    window: Window,
    transient: Transient,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<H1Estimate> {
    if ens.len() < 100 {
        return Err(Error::invalid(format!(
            "h_minus1_estimate needs at least 100 trajectories, got {}",
            ens.len()
        )));
    }
    let ks: Vec<usize> = (0..ens.times.len())
        .filter(|&k| ens.times[k] >= window.t_min && ens.times[k] <= window.t_max && ens.times[k] > 0.0)
        .collect();
    if ks.len() < 10 {
        return Err(Error::invalid(format!(
            "fit window [{}, {}] holds {} recorded times; need at least 10",
            window.t_min,
            window.t_max,
            ks.len()
        )));
    }
    let dim = ens.dim;
    let t: Vec<f64> = ks.iter().map(|&k| ens.times[k]).collect();
    let all: Vec<usize> = (0..ens.len()).collect();
    let v = ens.curve_from(&all, &ks);
    let (r, b) = fit(dim, &t, &v, transient)?;
    let raw_slope = stats::linear_fit(&t, &v)?.slope;
    let rise_per_decade = rise(dim, &t, &v, b)?;

    let mut brng = rng::stream(seed, 0, rng::BOOTSTRAP);
    let mut rises = Vec::with_capacity(bootstrap_reps);
    let boot = stats::bootstrap(ens.len(), bootstrap_reps, &mut brng, |idx| {
        let vb = ens.curve_from(idx, &ks);
        let (rb, bb) = fit(dim, &t, &vb, transient).ok()?;
        rises.push(rise(dim, &t, &vb, bb).ok()?);
        Some(rb)
    });
    if boot.len() < bootstrap_reps / 2 || boot.len() < 20 {
        return Err(Error::numerical("bootstrap fits failed"));
    }
    rises.sort_by(f64::total_cmp);
    let rise_ci_low = stats::quantile_sorted(&rises, 0.025);
    if !(r > 0.0) || !(rise_ci_low <= 0.10) {
        return Err(Error::numerical(format!(
            "no variance plateau over [{}, {}]: corrected slope rises {:.1}% per decade (bootstrap lower bound {:.1}%)",
            window.t_min,
            window.t_max,
            100.0 * rise_per_decade,
            100.0 * rise_ci_low
        )));
    }
    Ok(H1Estimate {
        estimate: r,
        stderr: stats::variance(&boot).sqrt(),
        ci_low: stats::quantile_sorted(&boot, 0.025),
        ci_high: stats::quantile_sorted(&boot, 0.975),
        transient_mode: transient,
        transient: b,
        raw_slope,
        rise_per_decade,
        rise_ci_low,
        window,
        ensemble: ens.len(),
        points: ks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldRole;

    fn cfg() -> SceneryConfig {
        SceneryConfig {
            potential: PotentialSpec::unit(3),
            grid: GridSpec::new(3, 16, 1.0).unwrap(),
            dt: 0.05,
            horizon: 2.0,
            ensemble: 5,
            seed: 9,
            observable: Observable::Gradient,
            record_stride: 4,
        }
    }

    #[test]
    fn zero_field_gives_zero_integral() {
        let c = cfg();
        let f = ScalarField::zeros(c.grid, FieldRole::Environment);
        assert!(run_on_field(&c, &f, 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ensemble_is_reproducible_and_sized() {
        let c = cfg();
        let a = run_scenery(&c).unwrap();
        let b = run_scenery(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert_eq!(a.times.len(), 11);
        assert_eq!(a.series[0].len(), 33);
        assert_ne!(a.series[0], a.series[1]);
    }

    #[test]
    fn low_dimension_rejected() {
        let mut c = cfg();
        c.potential = PotentialSpec::unit(2);
        c.grid = GridSpec::new(2, 16, 1.0).unwrap();
        assert!(run_scenery(&c).is_err());
    }

    #[test]
    fn estimator_requires_ensemble() {
        let ens = run_scenery(&cfg()).unwrap();
        assert!(h_minus1_estimate(&ens, Window { t_min: 0.5, t_max: 2.0 }, Transient::Fitted, 100, 1).is_err());
    }
}
