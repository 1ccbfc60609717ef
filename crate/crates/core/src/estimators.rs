//! Statistics over trajectory ensembles.
//!
//! Every check returns [`EstimatorReport`]s carrying the estimate, its
//! uncertainty, the threshold applied and the sample size. Moment comparisons
//! use 4-standard-error bands, distributional tests a 1% level.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::rng;
use crate::scenery::Window;
use crate::srbp::{InitialMode, TrajectoryRecord};
use crate::stats;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub threshold: f64,
    /// How `threshold` is applied.
    pub rule: String,
    pub sample_size: usize,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl EstimatorReport {
    fn normal(name: String, estimate: f64, stderr: f64, sample_size: usize) -> Self {
        EstimatorReport {
            name,
            estimate,
            stderr,
            ci_low: estimate - Z95 * stderr,
            ci_high: estimate + Z95 * stderr,
            statistic: None,
            p_value: None,
            threshold: f64::NAN,
            rule: String::new(),
            sample_size,
            verdict: Verdict::Fail,
            note: None,
        }
    }

    /// `|z| < threshold` for `z = (estimate - target) / stderr`.
    fn z_band(mut self, target: f64, threshold: f64) -> Self {
        let z = (self.estimate - target) / self.stderr;
        self.statistic = Some(z);
        self.p_value = Some(stats::normal_two_sided(z));
        self.threshold = threshold;
        self.rule = format!("|z| < {threshold} against {target}");
        self.verdict = Verdict::from_bool(z.abs() < threshold);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

pub fn all_pass(reports: &[EstimatorReport]) -> bool {
    reports.iter().all(EstimatorReport::passed)
}

/// Checks that the ensemble shares one time grid and dimension.
pub fn check_ensemble(ens: &[TrajectoryRecord], min: usize) -> Result<()> {
    if ens.len() < min {
        return Err(Error::invalid(format!(
            "need at least {min} trajectories, got {}",
            ens.len()
        )));
    }
    let first = &ens[0];
    if first.is_empty() {
        return Err(Error::invalid("trajectories have no samples"));
    }
    for r in &ens[1..] {
        if r.dim != first.dim || r.times != first.times {
            return Err(Error::invalid(format!(
                "trajectory {} does not share the time grid of trajectory {}",
                r.index, first.index
            )));
        }
    }
    Ok(())
}

fn displacement2(r: &TrajectoryRecord, k: usize) -> f64 {
    r.x_at(k)
        .iter()
        .zip(r.x_at(0))
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn window_indices(times: &[f64], w: Window) -> Vec<usize> {
    (0..times.len())
        .filter(|&k| times[k] >= w.t_min && times[k] <= w.t_max)
        .collect()
}

/// Default fit window: the last half-decade of recorded times.
pub fn default_window(times: &[f64]) -> Window {
    let t_max = times.last().copied().unwrap_or(0.0);
    Window {
        t_min: t_max / 10f64.sqrt(),
        t_max,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdPoint {
    pub t: f64,
    pub msd: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve {
    pub dim: usize,
    pub ensemble: usize,
    pub points: Vec<MsdPoint>,
}

impl MsdCurve {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "t,msd,stderr,ci_low,ci_high").unwrap();
        for p in &self.points {
            writeln!(out, "{},{},{},{},{}", p.t, p.msd, p.stderr, p.ci_low, p.ci_high).unwrap();
        }
        out
    }
}

/// `E|X(t) - X(0)|²` per recorded time with percentile-bootstrap 95% CIs.
pub fn msd(ens: &[TrajectoryRecord], bootstrap_reps: usize, seed: u64) -> Result<MsdCurve> {
    check_ensemble(ens, 50)?;
    let m = ens.len();
    let nt = ens[0].len();
    let sq: Vec<Vec<f64>> = (0..nt)
        .map(|k| ens.iter().map(|r| displacement2(r, k)).collect())
        .collect();
    // one resample of trajectories serves every time point
    let mut rg = rng::stream(seed, 0, rng::BOOTSTRAP);
    let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_reps); nt];
    let mut idx = vec![0usize; m];
    for _ in 0..bootstrap_reps {
        for i in idx.iter_mut() {
            *i = rand::Rng::gen_range(&mut rg, 0..m);
        }
        for k in 0..nt {
            draws[k].push(idx.iter().map(|&i| sq[k][i]).sum::<f64>() / m as f64);
        }
    }
    let points = (0..nt)
        .map(|k| {
            let (mean, se) = stats::mean_stderr(&sq[k]);
            let d = &mut draws[k];
            d.sort_by(f64::total_cmp);
            let (lo, hi) = if d.is_empty() {
                (mean, mean)
            } else {
                (stats::quantile_sorted(d, 0.025), stats::quantile_sorted(d, 0.975))
            };
            MsdPoint {
                t: ens[0].times[k],
                msd: mean,
                stderr: se,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect();
    Ok(MsdCurve {
        dim: ens[0].dim,
        ensemble: m,
        points,
    })
}

/// `MSD(t) >= d t - k SE` at every recorded `t > 0`; reports the smallest z.
pub fn msd_lower_bound(curve: &MsdCurve, k_se: f64) -> EstimatorReport {
    let d = curve.dim as f64;
    let mut worst = (f64::INFINITY, 0.0, 0.0, 0.0);
    for p in curve.points.iter().filter(|p| p.t > 0.0) {
        let z = (p.msd - d * p.t) / p.stderr;
        if z < worst.0 {
            worst = (z, p.t, p.msd, p.stderr);
        }
    }
    let (z, t, m, se) = worst;
    let mut r = EstimatorReport::normal("msd_lower_bound".into(), m, se, curve.ensemble);
    r.statistic = Some(z);
    r.threshold = -k_se;
    r.rule = format!("min over t of (MSD - d t)/SE >= -{k_se}");
    r.verdict = Verdict::from_bool(z >= -k_se);
    r.note = Some(format!("worst time t = {t}"));
    r
}

fn per_trajectory_slopes(ens: &[TrajectoryRecord], ks: &[usize]) -> Result<Vec<f64>> {
    let t: Vec<f64> = ks.iter().map(|&k| ens[0].times[k]).collect();
    ens.iter()
        .map(|r| {
            let y: Vec<f64> = ks.iter().map(|&k| displacement2(r, k)).collect();
            stats::linear_fit(&t, &y).map(|f| f.slope)
        })
        .collect()
}

/// `σ̂² = d⁻¹ × slope of the MSD` over `window`, checked against `[1, 1 + ρ²]`.
///
/// The ensemble-mean slope equals the mean of per-trajectory least-squares
/// slopes, which are independent; their spread gives the standard error.
pub fn sigma2_hat(ens: &[TrajectoryRecord], window: Window, rho2_effective: f64) -> Result<EstimatorReport> {
    check_ensemble(ens, 2)?;
    let ks = window_indices(&ens[0].times, window);
    if ks.len() < 10 {
        return Err(Error::invalid(format!(
            "fit window [{}, {}] holds {} recorded times; need at least 10",
            window.t_min,
            window.t_max,
            ks.len()
        )));
    }
    let d = ens[0].dim as f64;
    let slopes = per_trajectory_slopes(ens, &ks)?;
    let (m, se) = stats::mean_stderr(&slopes);
    let mut r = EstimatorReport::normal("sigma2_hat".into(), m / d, se / d, ens.len());
    let (lo, hi) = (1.0 - 2.0 * r.stderr, 1.0 + rho2_effective + 2.0 * r.stderr);
    r.threshold = rho2_effective;
    r.rule = format!("estimate in [1 - 2 SE, 1 + rho2 + 2 SE] = [{lo:.5}, {hi:.5}]");
    r.verdict = Verdict::from_bool(r.estimate >= lo && r.estimate <= hi);
    r.note = Some(format!("window [{}, {}], {} points", window.t_min, window.t_max, ks.len()));
    Ok(r)
}

/// Empirical `E[X_k X_l]` at sample `k_time`: off-diagonals against 0, diagonal pairs against each other.
pub fn isotropy_check(ens: &[TrajectoryRecord], k_time: usize) -> Result<Vec<EstimatorReport>> {
    check_ensemble(ens, 2)?;
    let d = ens[0].dim;
    if k_time >= ens[0].len() {
        return Err(Error::invalid("time index out of range"));
    }
    let disp = |r: &TrajectoryRecord, a: usize| r.x_at(k_time)[a] - r.x_at(0)[a];
    let mut out = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let v: Vec<f64> = ens.iter().map(|r| disp(r, a) * disp(r, b)).collect();
            let (m, se) = stats::mean_stderr(&v);
            out.push(EstimatorReport::normal(format!("isotropy_offdiag_{}{}", a + 1, b + 1), m, se, ens.len()).z_band(0.0, 4.0));
        }
    }
    for a in 0..d {
        for b in a + 1..d {
            let v: Vec<f64> = ens
                .iter()
                .map(|r| disp(r, a).powi(2) - disp(r, b).powi(2))
                .collect();
            let (m, se) = stats::mean_stderr(&v);
            out.push(EstimatorReport::normal(format!("isotropy_diag_{}{}", a + 1, b + 1), m, se, ens.len()).z_band(0.0, 4.0));
        }
    }
    Ok(out)
}

/// Fisher-transformed correlation test of `r = 0` with `n` pairs.
fn correlation_report(name: String, x: &[f64], y: &[f64], threshold: f64) -> EstimatorReport {
    let n = x.len();
    let degenerate = stats::variance(x) == 0.0 || stats::variance(y) == 0.0;
    if degenerate {
        let mut r = EstimatorReport::normal(name, 0.0, 0.0, n);
        r.statistic = Some(0.0);
        r.threshold = threshold;
        r.rule = format!("|z| < {threshold} for Fisher z of the correlation");
        r.verdict = Verdict::Pass;
        r.note = Some("constant input: correlation undefined, passes trivially".into());
        return r;
    }
    let rho = stats::pearson(x, y);
    let s = 1.0 / ((n as f64) - 3.0).sqrt();
    let z = rho.clamp(-0.999_999_999, 0.999_999_999).atanh() / s;
    let fz = rho.clamp(-0.999_999_999, 0.999_999_999).atanh();
    EstimatorReport {
        name,
        estimate: rho,
        stderr: (1.0 - rho * rho) * s,
        ci_low: (fz - Z95 * s).tanh(),
        ci_high: (fz + Z95 * s).tanh(),
        statistic: Some(z),
        p_value: Some(stats::normal_two_sided(z)),
        threshold,
        rule: format!("|z| < {threshold} for Fisher z of the correlation"),
        sample_size: n,
        verdict: Verdict::from_bool(z.abs() < threshold),
        note: None,
    }
}

/// Correlation of `B_k(t)` with `(∫φ)_l(t)` for every component pair.
pub fn decorrelation_check(ens: &[TrajectoryRecord], k_time: usize) -> Result<Vec<EstimatorReport>> {
    check_ensemble(ens, 4)?;
    let d = ens[0].dim;
    if k_time >= ens[0].len() {
        return Err(Error::invalid("time index out of range"));
    }
    let mut out = Vec::new();
    for a in 0..d {
        let b: Vec<f64> = ens.iter().map(|r| r.b_at(k_time)[a]).collect();
        for c in 0..d {
            let i: Vec<f64> = ens.iter().map(|r| r.compensator_at(k_time)[c]).collect();
            out.push(correlation_report(format!("decorrelation_B{}_I{}", a + 1, c + 1), &b, &i, 4.0));
        }
    }
    Ok(out)
}

/// Worst relative violation of `X = X(0) + B + ∫φ` across the ensemble.
pub fn decomposition_check(ens: &[TrajectoryRecord], tol: f64) -> Result<EstimatorReport> {
    check_ensemble(ens, 1)?;
    let worst = ens.iter().map(TrajectoryRecord::decomposition_error).fold(0.0, f64::max);
    let mut r = EstimatorReport::normal("decomposition_identity".into(), worst, 0.0, ens.len());
    r.threshold = tol;
    r.rule = format!("max relative error <= {tol}");
    r.verdict = Verdict::from_bool(worst <= tol);
    Ok(r)
}

/// One environment sample: `η(T, ·)` and the fractional lattice offset of `X(T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentSample {
    pub view: ScalarField,
    pub fraction: Vec<f64>,
}

/// `E[η(0) η(x)]` for a stationary lattice field seen through multilinear interpolation at `fraction`.
fn interpolated_covariance(analytic: &ScalarField, fraction: &[f64], lag: &[i64]) -> f64 {
    let d = fraction.len();
    let corners = 1usize << d;
    let mut acc = 0.0;
    let mut off = [0i64; crate::MAX_DIM];
    for c in 0..corners {
        for c2 in 0..corners {
            let mut w = 1.0;
            for a in 0..d {
                let o = (c >> a & 1) as i64;
                let o2 = (c2 >> a & 1) as i64;
                w *= if o == 1 { fraction[a] } else { 1.0 - fraction[a] };
                w *= if o2 == 1 { fraction[a] } else { 1.0 - fraction[a] };
                off[a] = o2 - o + lag[a];
            }
            if w != 0.0 {
                acc += w * analytic.at(&off[..d]);
            }
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub familywise_alpha: f64,
    pub per_test_alpha: f64,
    pub tests: Vec<EstimatorReport>,
    pub verdict: Verdict,
}

/// Mean and covariance of `η(T, ·)` at lags `lag · h e₁` against the stationary law.
///
/// For each lag the ensemble mean of `η(T, lag)` is tested against 0 and that of
/// `η(T, 0) η(T, lag)` against its exact expectation under the stationary
/// Gaussian law (including the interpolation at the particle's offset). The
/// `2 × lags` z-tests are combined by Bonferroni at `alpha` familywise.
pub fn stationarity_test(
    mode: InitialMode,
    samples: &[EnvironmentSample],
    analytic: &ScalarField,
    lags: &[usize],
    alpha: f64,
) -> Result<StationarityReport> {
    if mode == InitialMode::Empty {
        return Err(Error::invalid(
            "stationarity test needs the stationary initial mode; empty-mode input is meaningless",
        ));
    }
    if samples.len() < 100 {
        return Err(Error::invalid(format!(
            "stationarity test needs at least 100 trajectories, got {}",
            samples.len()
        )));
    }
    if lags.is_empty() || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("need a non-empty lag set and alpha in (0, 1)"));
    }
    let g = analytic.grid;
    let d = g.dim;
    for s in samples {
        if s.view.grid != g || s.fraction.len() != d {
            return Err(Error::invalid("environment sample does not match the analytic grid"));
        }
    }
    let m = 2 * lags.len();
    let per = alpha / m as f64;
    let z_crit = statrs::distribution::ContinuousCDF::inverse_cdf(
        &statrs::distribution::Normal::new(0.0, 1.0).unwrap(),
        1.0 - per / 2.0,
    );
    let mut tests = Vec::with_capacity(m);
    let origin = vec![0i64; d];
    for &lag in lags {
        let mut l = vec![0i64; d];
        l[0] = lag as i64;
        let vals: Vec<f64> = samples.iter().map(|s| s.view.at(&l)).collect();
        let (mu, se) = stats::mean_stderr(&vals);
        let mut r = EstimatorReport::normal(format!("stationarity_mean_lag{lag}"), mu, se, samples.len()).z_band(0.0, z_crit);
        r.verdict = Verdict::from_bool(r.p_value.unwrap() >= per);
        r.rule = format!("two-sided p >= {per:.2e} (Bonferroni {alpha} over {m})");
        tests.push(r);
        let dev: Vec<f64> = samples
            .iter()
            .map(|s| s.view.at(&origin) * s.view.at(&l) - interpolated_covariance(analytic, &s.fraction, &l))
            .collect();
        let (md, sed) = stats::mean_stderr(&dev);
        let mut r = EstimatorReport::normal(format!("stationarity_cov_lag{lag}"), md, sed, samples.len()).z_band(0.0, z_crit);
        r.verdict = Verdict::from_bool(r.p_value.unwrap() >= per);
        r.rule = format!("two-sided p >= {per:.2e} (Bonferroni {alpha} over {m})");
        r.note = Some("estimate is the mean deviation from the expected covariance".into());
        tests.push(r);
    }
    let verdict = Verdict::from_bool(all_pass(&tests));
    Ok(StationarityReport {
        familywise_alpha: alpha,
        per_test_alpha: per,
        tests,
        verdict,
    })
}

/// Test fixture: adds `rate · t` to every view.
pub fn plant_drift(samples: &mut [EnvironmentSample], rate: f64, t: f64) {
    for s in samples {
        for v in s.view.values.iter_mut() {
            *v += rate * t;
        }
    }
}

/// `X(T)/T` component means against 0, and the decay of `E|X(t)|/t` from `T/2` to `T`.
pub fn lln_check(ens: &[TrajectoryRecord], k_half: usize, k_full: usize) -> Result<Vec<EstimatorReport>> {
    check_ensemble(ens, 2)?;
    let times = &ens[0].times;
    if k_half >= k_full || k_full >= times.len() || times[k_half] <= 0.0 {
        return Err(Error::invalid("need 0 < t(k_half) < t(k_full)"));
    }
    let (th, tf) = (times[k_half], times[k_full]);
    let d = ens[0].dim;
    let mut out = Vec::new();
    for a in 0..d {
        let v: Vec<f64> = ens.iter().map(|r| (r.x_at(k_full)[a] - r.x_at(0)[a]) / tf).collect();
        let (m, se) = stats::mean_stderr(&v);
        out.push(EstimatorReport::normal(format!("lln_mean_X{}_over_T", a + 1), m, se, ens.len()).z_band(0.0, 4.0));
    }
    let speed = |k: usize, t: f64| -> Vec<f64> { ens.iter().map(|r| displacement2(r, k).sqrt() / t).collect() };
    let (a, b) = (speed(k_half, th), speed(k_full, tf));
    let (ma, mb) = (stats::mean(&a), stats::mean(&b));
    let ratio = mb / ma;
    // delta method on paired samples
    let n = a.len() as f64;
    let (va, vb) = (stats::variance(&a), stats::variance(&b));
    let cab = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let var_r = (vb / (ma * ma) + mb * mb * va / ma.powi(4) - 2.0 * mb * cab / ma.powi(3)) / n;
    let mut r = EstimatorReport::normal("lln_decay_ratio".into(), ratio, var_r.max(0.0).sqrt(), ens.len());
    r.threshold = 1.0;
    r.rule = format!("E|X(T)|/T divided by E|X(T/2)|/(T/2) < 1 (T = {tf})");
    r.verdict = Verdict::from_bool(ratio < 1.0);
    out.push(r);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTarget {
    pub lo: f64,
    pub hi: f64,
    /// When set, the CI must exclude this value.
    pub exclude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub report: EstimatorReport,
    pub prefactor: f64,
    pub window: Window,
    /// `(t, MSD)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

impl ExponentFit {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "t,msd,log_t,log_msd,fit").unwrap();
        let a = self.report.estimate;
        for &(t, m) in &self.points {
            let fit = self.prefactor * t.powf(a);
            writeln!(out, "{t},{m},{},{},{fit}", t.ln(), m.ln()).unwrap();
        }
        out
    }
}

fn log_slope(t: &[f64], m: &[f64]) -> Result<(f64, f64)> {
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let lm: Vec<f64> = m.iter().map(|v| v.ln()).collect();
    let f = stats::linear_fit(&lt, &lm)?;
    Ok((f.slope, f.intercept.exp()))
}

/// `α` in `MSD ∝ t^α` from a log-log fit over `window`, with a bootstrap CI over trajectories.
pub fn exponent_fit(
    ens: &[TrajectoryRecord],
    window: Window,
    target: ExponentTarget,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<ExponentFit> {
    check_ensemble(ens, 2)?;
    let ks: Vec<usize> = window_indices(&ens[0].times, window)
        .into_iter()
        .filter(|&k| ens[0].times[k] > 0.0)
        .collect();
    if ks.len() < 3 {
        return Err(Error::invalid("exponent fit window holds fewer than 3 recorded times"));
    }
    let t: Vec<f64> = ks.iter().map(|&k| ens[0].times[k]).collect();
    if t[t.len() - 1] / t[0] < 10f64.sqrt() {
        return Err(Error::invalid(format!(
            "exponent fit window [{}, {}] spans less than half a decade",
            t[0],
            t[t.len() - 1]
        )));
    }
    let sq: Vec<Vec<f64>> = ks.iter().map(|&k| ens.iter().map(|r| displacement2(r, k)).collect()).collect();
    let curve: Vec<f64> = sq.iter().map(|v| stats::mean(v)).collect();
    let (alpha, pref) = log_slope(&t, &curve)?;
    let mut rg = rng::stream(seed, 1, rng::BOOTSTRAP);
    let draws = stats::bootstrap(ens.len(), bootstrap_reps, &mut rg, |idx| {
        let c: Vec<f64> = sq
            .iter()
            .map(|v| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64)
            .collect();
        if c.iter().any(|&x| x <= 0.0) {
            return None;
        }
        log_slope(&t, &c).ok().map(|s| s.0)
    });
    if draws.len() < 2 {
        return Err(Error::numerical("bootstrap produced no valid exponent fits"));
    }
    let se = stats::variance(&draws).sqrt();
    let (lo, hi) = (stats::quantile_sorted(&draws, 0.025), stats::quantile_sorted(&draws, 0.975));
    let in_range = alpha >= target.lo && alpha <= target.hi;
    let excludes = target.exclude.map_or(true, |x| lo > x || hi < x);
    let mut rule = format!("alpha in [{}, {}]", target.lo, target.hi);
    if let Some(x) = target.exclude {
        rule.push_str(&format!(" and 95% CI excludes {x}"));
    }
    let report = EstimatorReport {
        name: "msd_exponent".into(),
        estimate: alpha,
        stderr: se,
        ci_low: lo,
        ci_high: hi,
        statistic: None,
        p_value: None,
        threshold: target.lo,
        rule,
        sample_size: ens.len(),
        verdict: Verdict::from_bool(in_range && excludes),
        note: Some(format!("window [{}, {}], {} points", t[0], t[t.len() - 1], t.len())),
    };
    Ok(ExponentFit {
        report,
        prefactor: pref,
        window,
        points: t.into_iter().zip(curve).collect(),
    })
}

/// Jarque–Bera per component on standardized increments over `[t1, t2]`, and
/// correlation of successive increments over `[t0, t1]` and `[t1, t2]`.
pub fn normality_test(ens: &[TrajectoryRecord], k0: usize, k1: usize, k2: usize, alpha: f64) -> Result<Vec<EstimatorReport>> {
    check_ensemble(ens, 100)?;
    if !(k0 < k1 && k1 < k2 && k2 < ens[0].len()) {
        return Err(Error::invalid("need increasing time indices k0 < k1 < k2"));
    }
    let d = ens[0].dim;
    let mut out = Vec::new();
    for a in 0..d {
        let inc: Vec<f64> = ens.iter().map(|r| r.x_at(k2)[a] - r.x_at(k1)[a]).collect();
        let (mu, sd) = (stats::mean(&inc), stats::variance(&inc).sqrt());
        let z: Vec<f64> = inc.iter().map(|v| (v - mu) / sd).collect();
        let jb = stats::jarque_bera(&z);
        out.push(EstimatorReport {
            name: format!("normality_X{}", a + 1),
            estimate: jb.skewness,
            stderr: (6.0 / z.len() as f64).sqrt(),
            ci_low: jb.skewness - Z95 * (6.0 / z.len() as f64).sqrt(),
            ci_high: jb.skewness + Z95 * (6.0 / z.len() as f64).sqrt(),
            statistic: Some(jb.statistic),
            p_value: Some(jb.p_value),
            threshold: alpha,
            rule: format!("Jarque-Bera p >= {alpha}"),
            sample_size: z.len(),
            verdict: Verdict::from_bool(jb.p_value >= alpha),
            note: Some(format!("excess kurtosis {:.4}", jb.excess_kurtosis)),
        });
        let first: Vec<f64> = ens.iter().map(|r| r.x_at(k1)[a] - r.x_at(k0)[a]).collect();
        out.push(correlation_report(format!("increment_correlation_X{}", a + 1), &first, &inc, 4.0));
    }
    Ok(out)
}

pub fn reports_json(reports: &[EstimatorReport]) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(reports)?)
}

/// Sampler checks: covariance at each lag within 4 SE, site marginal normal at `alpha`.
pub fn field_reports(samples: &[ScalarField], analytic: &ScalarField, lags: &[usize], alpha: f64) -> Result<Vec<EstimatorReport>> {
    let rows = crate::field::covariance_check(samples, analytic, lags)?;
    let mut out: Vec<EstimatorReport> = rows
        .iter()
        .map(|r| {
            let mut rep = EstimatorReport::normal(format!("covariance_lag{}", r.lag), r.c_empirical, r.stderr, samples.len())
                .z_band(r.c_analytic, 4.0);
            rep.note = Some(format!("analytic {}", r.c_analytic));
            rep
        })
        .collect();
    let site: Vec<f64> = samples.iter().map(|f| f.values[0]).collect();
    let jb = stats::jarque_bera(&site);
    let se = (6.0 / site.len() as f64).sqrt();
    out.push(EstimatorReport {
        name: "site_normality".into(),
        estimate: jb.skewness,
        stderr: se,
        ci_low: jb.skewness - Z95 * se,
        ci_high: jb.skewness + Z95 * se,
        statistic: Some(jb.statistic),
        p_value: Some(jb.p_value),
        threshold: alpha,
        rule: format!("Jarque-Bera p >= {alpha}"),
        sample_size: site.len(),
        verdict: Verdict::from_bool(jb.p_value >= alpha),
        note: Some(format!("excess kurtosis {:.4}", jb.excess_kurtosis)),
    });
    Ok(out)
}
