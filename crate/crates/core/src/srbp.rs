//! Euler–Maruyama integration of the self-repelling Brownian polymer.
//!
//! The particle follows `dX = dB - grad ζ(t, X) dt` where `ζ(t,·)` is the initial
//! field plus `∫_0^t V(· - X(s)) ds`, deposited on the grid at every step.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{FieldRole, GridSpec, ScalarField, StationarySampler};
use crate::potential::PotentialSpec;
use crate::rng;
use crate::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// `ζ(0,·)` drawn from the stationary Gaussian measure (`d >= 3`).
    Stationary,
    /// `ζ(0,·) = 0`.
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrbpConfig {
    pub potential: PotentialSpec,
    pub grid: GridSpec,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub ensemble: usize,
    pub initial: InitialMode,
    /// Steps between recorded samples.
    pub record_stride: usize,
}

impl SrbpConfig {
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        self.grid.validate()?;
        self.grid.check_potential(&self.potential)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::invalid("horizon must be non-negative"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record stride must be at least 1"));
        }
        if self.ensemble == 0 {
            return Err(Error::invalid("ensemble must contain at least one trajectory"));
        }
        if self.initial == InitialMode::Stationary && self.grid.dim < 3 {
            return Err(Error::invalid(
                "stationary initial field requires d >= 3; use the empty mode in d = 1, 2",
            ));
        }
        if self.dt > 0.5 * self.grid.h * self.grid.h {
            log::warn!(
                "dt = {} exceeds h²/2 = {}; deposition is under-resolved",
                self.dt,
                0.5 * self.grid.h * self.grid.h
            );
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn hash(&self) -> Result<String> {
        crate::io::config_hash(self)
    }

    /// Seed of the initial field of trajectory `index`.
    pub fn field_seed(&self, index: usize) -> u64 {
        rng::derive_seed(self.seed, index as u64, rng::FIELD)
    }
}

/// Mutable state of one trajectory.
#[derive(Clone, Debug)]
pub struct SrbpState {
    pub potential: PotentialSpec,
    /// Unwrapped position.
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    /// Smeared local time `ζ`.
    pub zeta: ScalarField,
    pub t: f64,
    pub steps: u64,
    /// Accumulated Brownian increments.
    pub b: Vec<f64>,
    /// Accumulated compensator `∫ φ(η(s)) ds = -∫ grad ζ(s, X(s)) ds`.
    pub compensator: Vec<f64>,
    rng: ChaCha8Rng,
    lo: Vec<f64>,
    hi: Vec<f64>,
    warned: bool,
    grad: Vec<f64>,
    factors: Vec<Vec<(usize, f64, f64)>>,
}

/// Builds the initial state of trajectory `index` of `config`.
pub fn init(config: &SrbpConfig, index: usize) -> Result<SrbpState> {
    config.validate()?;
    let zeta = match config.initial {
        InitialMode::Empty => ScalarField::zeros(config.grid, FieldRole::LocalTime),
        InitialMode::Stationary => {
            let sampler = StationarySampler::new(&config.potential, &config.grid)?;
            init_field(&sampler, config, index)
        }
    };
    Ok(SrbpState::new(
        config.potential,
        zeta,
        rng::stream(config.seed, index as u64, rng::NOISE),
    ))
}

fn init_field(sampler: &StationarySampler, config: &SrbpConfig, index: usize) -> ScalarField {
    let mut f = sampler.sample(config.field_seed(index));
    f.role = FieldRole::LocalTime;
    f
}

impl SrbpState {
    pub fn new(potential: PotentialSpec, zeta: ScalarField, rng: ChaCha8Rng) -> Self {
        let d = zeta.grid.dim;
        SrbpState {
            potential,
            x: vec![0.0; d],
            x0: vec![0.0; d],
            zeta,
            t: 0.0,
            steps: 0,
            b: vec![0.0; d],
            compensator: vec![0.0; d],
            rng,
            lo: vec![0.0; d],
            hi: vec![0.0; d],
            warned: false,
            grad: vec![0.0; d],
            factors: vec![Vec::new(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// One Euler–Maruyama step with a freshly drawn Brownian increment.
    pub fn step(&mut self, dt: f64) {
        let mut db = [0.0; MAX_DIM];
        let s = dt.sqrt();
        for v in db.iter_mut().take(self.dim()) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v = s * z;
        }
        let d = self.dim();
        self.step_with_increment(dt, &db[..d]);
    }

    /// One step with a prescribed Brownian increment (left-point rule throughout).
    pub fn step_with_increment(&mut self, dt: f64, db: &[f64]) {
        let d = self.dim();
        assert_eq!(db.len(), d);
        let mut g = std::mem::take(&mut self.grad);
        self.zeta.grad_into(&self.x, &mut g);
        let x_old = self.x.clone();
        self.deposit(&x_old, dt);
        for a in 0..d {
            self.b[a] += db[a];
            self.compensator[a] -= g[a] * dt;
            self.x[a] = self.x0[a] + self.b[a] + self.compensator[a];
            self.lo[a] = self.lo[a].min(self.x[a]);
            self.hi[a] = self.hi[a].max(self.x[a]);
        }
        self.grad = g;
        self.t += dt;
        self.steps += 1;
        self.check_extent();
    }

    fn check_extent(&mut self) {
        if self.warned {
            return;
        }
        let diam = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt();
        let limit = 0.5 * self.zeta.grid.side() - self.potential.cutoff_radius();
        if diam > limit {
            self.warned = true;
            log::debug!(
                "path diameter {diam:.3} exceeds L/2 - 6w = {limit:.3}; wrap-around self-interaction possible"
            );
        }
    }

    /// Whether the path-diameter warning has fired.
    pub fn extent_warning(&self) -> bool {
        self.warned
    }

    /// Adds `dt · V(y - centre)` at grid points within the cutoff radius (torus metric).
    pub fn deposit(&mut self, centre: &[f64], dt: f64) {
        let grid = self.zeta.grid;
        let d = grid.dim;
        let r = self.potential.cutoff_radius();
        let r2 = r * r;
        let w2 = self.potential.width * self.potential.width;
        let h = grid.h;
        let mut factors = std::mem::take(&mut self.factors);
        for a in 0..d {
            factors[a].clear();
            let lo = ((centre[a] - r) / h).ceil() as i64;
            let hi = ((centre[a] + r) / h).floor() as i64;
            let lo = lo.max(hi - grid.n as i64 + 1);
            let s = grid.stride(a);
            for i in lo..=hi {
                let dx = i as f64 * h - centre[a];
                factors[a].push((grid.wrap(i) * s, dx * dx, (-dx * dx / (2.0 * w2)).exp()));
            }
        }
        let amp = dt * self.potential.amplitude;
        let values = &mut self.zeta.values;
        match d {
            1 => {
                for &(i0, d0, f0) in &factors[0] {
                    if d0 < r2 {
                        values[i0] += amp * f0;
                    }
                }
            }
            2 => {
                for &(i0, d0, f0) in &factors[0] {
                    for &(i1, d1, f1) in &factors[1] {
                        if d0 + d1 < r2 {
                            values[i0 + i1] += amp * f0 * f1;
                        }
                    }
                }
            }
            3 => {
                for &(i0, d0, f0) in &factors[0] {
                    if d0 >= r2 {
                        continue;
                    }
                    for &(i1, d1, f1) in &factors[1] {
                        let d01 = d0 + d1;
                        if d01 >= r2 {
                            continue;
                        }
                        let a01 = amp * f0 * f1;
                        let base = i0 + i1;
                        for &(i2, d2, f2) in &factors[2] {
                            if d01 + d2 < r2 {
                                values[base + i2] += a01 * f2;
                            }
                        }
                    }
                }
            }
            _ => {
                for &(i0, d0, f0) in &factors[0] {
                    for &(i1, d1, f1) in &factors[1] {
                        for &(i2, d2, f2) in &factors[2] {
                            for &(i3, d3, f3) in &factors[3] {
                                if d0 + d1 + d2 + d3 < r2 {
                                    values[i0 + i1 + i2 + i3] += amp * f0 * f1 * f2 * f3;
                                }
                            }
                        }
                    }
                }
            }
        }
        self.factors = factors;
    }

    /// Fractional part of `X/h` per axis; the interpolation weights of [`Self::environment_view`].
    pub fn lattice_fraction(&self) -> Vec<f64> {
        let h = self.zeta.grid.h;
        self.x.iter().map(|&v| {
            let u = v / h;
            u - u.floor()
        }).collect()
    }

    /// `η(x) = ζ(X + x)` on the grid, by multilinear interpolation.
    ///
    /// `X/h` is split into an integer lattice part and a common fraction, so a
    /// lattice shift of `X` shifts the view exactly.
    pub fn environment_view(&self) -> ScalarField {
        let g = self.zeta.grid;
        let d = g.dim;
        let mut m = [0i64; MAX_DIM];
        let mut fr = [0f64; MAX_DIM];
        for a in 0..d {
            let u = self.x[a] / g.h;
            let f = u.floor();
            m[a] = f as i64;
            fr[a] = u - f;
        }
        let exact = fr[..d].iter().all(|&f| f == 0.0);
        let mut idx = [0i64; MAX_DIM];
        let values = (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                for a in 0..d {
                    idx[a] = c[a] as i64 + m[a];
                }
                if exact {
                    return self.zeta.at(&idx[..d]);
                }
                let mut acc = 0.0;
                let mut corner_idx = [0i64; MAX_DIM];
                for corner in 0..(1usize << d) {
                    let mut w = 1.0;
                    for a in 0..d {
                        let o = (corner >> a & 1) as i64;
                        w *= if o == 1 { fr[a] } else { 1.0 - fr[a] };
                        corner_idx[a] = idx[a] + o;
                    }
                    acc += w * self.zeta.at(&corner_idx[..d]);
                }
                acc
            })
            .collect();
        ScalarField {
            grid: g,
            role: FieldRole::View,
            seed: self.zeta.seed,
            values,
        }
    }
}

/// Recorded observables of one trajectory. Vectors are flattened sample-major (`d` entries per sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub seed: u64,
    pub config_hash: String,
    pub dim: usize,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub compensator: Vec<f64>,
}

impl TrajectoryRecord {
    fn new(index: usize, seed: u64, config_hash: String, dim: usize) -> Self {
        TrajectoryRecord {
            index,
            seed,
            config_hash,
            dim,
            times: Vec::new(),
            x: Vec::new(),
            b: Vec::new(),
            compensator: Vec::new(),
        }
    }

    fn push(&mut self, s: &SrbpState) {
        self.times.push(s.t);
        self.x.extend_from_slice(&s.x);
        self.b.extend_from_slice(&s.b);
        self.compensator.extend_from_slice(&s.compensator);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn b_at(&self, k: usize) -> &[f64] {
        &self.b[k * self.dim..(k + 1) * self.dim]
    }

    pub fn compensator_at(&self, k: usize) -> &[f64] {
        &self.compensator[k * self.dim..(k + 1) * self.dim]
    }

    /// Largest relative violation of `X = X(0) + B + I` over all samples.
    pub fn decomposition_error(&self) -> f64 {
        let x0 = self.x_at(0).to_vec();
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            for a in 0..self.dim {
                let x = self.x_at(k)[a];
                let rhs = x0[a] + self.b_at(k)[a] + self.compensator_at(k)[a];
                let scale = x.abs().max(self.b_at(k)[a].abs()).max(self.compensator_at(k)[a].abs()).max(1.0);
                worst = worst.max((x - rhs).abs() / scale);
            }
        }
        worst
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let d = self.dim;
        let mut out = Vec::new();
        let mut header = vec!["t".to_string()];
        for p in ["X", "B", "I"] {
            for a in 1..=d {
                header.push(format!("{p}{a}"));
            }
        }
        writeln!(out, "{}", header.join(",")).unwrap();
        for k in 0..self.len() {
            write!(out, "{}", self.times[k]).unwrap();
            for v in self.x_at(k).iter().chain(self.b_at(k)).chain(self.compensator_at(k)) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out).unwrap();
        }
        out
    }

    pub fn from_csv(bytes: &[u8], index: usize, seed: u64, config_hash: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let ncol = rdr.headers()?.len();
        if ncol < 4 || (ncol - 1) % 3 != 0 {
            return Err(Error::invalid("trajectory CSV has an unexpected column count"));
        }
        let d = (ncol - 1) / 3;
        let mut rec = TrajectoryRecord::new(index, seed, config_hash.to_string(), d);
        for row in rdr.records() {
            let row = row?;
            let vals: Vec<f64> = row
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::invalid(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            rec.times.push(vals[0]);
            rec.x.extend_from_slice(&vals[1..1 + d]);
            rec.b.extend_from_slice(&vals[1 + d..1 + 2 * d]);
            rec.compensator.extend_from_slice(&vals[1 + 2 * d..]);
        }
        Ok(rec)
    }
}

/// Runs trajectory `index` to the horizon, returning the record and the final state.
pub fn run_one(
    config: &SrbpConfig,
    sampler: Option<&StationarySampler>,
    index: usize,
) -> Result<(TrajectoryRecord, SrbpState)> {
    let zeta = match (config.initial, sampler) {
        (InitialMode::Empty, _) => ScalarField::zeros(config.grid, FieldRole::LocalTime),
        (InitialMode::Stationary, Some(s)) => init_field(s, config, index),
        (InitialMode::Stationary, None) => {
            init_field(&StationarySampler::new(&config.potential, &config.grid)?, config, index)
        }
    };
    let mut state = SrbpState::new(
        config.potential,
        zeta,
        rng::stream(config.seed, index as u64, rng::NOISE),
    );
    let mut rec = TrajectoryRecord::new(index, config.seed, config.hash()?, config.grid.dim);
    rec.push(&state);
    let steps = config.steps();
    for k in 1..=steps {
        state.step(config.dt);
        if k % config.record_stride == 0 || k == steps {
            rec.push(&state);
        }
    }
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("trajectory {index} produced a non-finite position")));
    }
    Ok((rec, state))
}

/// Runs the trajectories with the given indices; results are ordered as `indices`
/// and do not depend on the number of worker threads.
pub fn run_indices(config: &SrbpConfig, indices: &[usize]) -> Result<Vec<TrajectoryRecord>> {
    run_indices_with(config, indices, |_, _| ())
        .map(|v| v.into_iter().map(|(r, _)| r).collect())
}

/// As [`run_indices`], also mapping each final state through `extract`.
pub fn run_indices_with<T: Send>(
    config: &SrbpConfig,
    indices: &[usize],
    extract: impl Fn(usize, &SrbpState) -> T + Sync,
) -> Result<Vec<(TrajectoryRecord, T)>> {
    config.validate()?;
    let sampler = match config.initial {
        InitialMode::Stationary => Some(StationarySampler::new(&config.potential, &config.grid)?),
        InitialMode::Empty => None,
    };
    indices
        .par_iter()
        .map(|&i| {
            let (rec, state) = run_one(config, sampler.as_ref(), i)?;
            let extra = extract(i, &state);
            Ok((rec, extra))
        })
        .collect()
}

/// The full ensemble `0..config.ensemble`.
pub fn run(config: &SrbpConfig) -> Result<Vec<TrajectoryRecord>> {
    let idx: Vec<usize> = (0..config.ensemble).collect();
    run_indices(config, &idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn empty_config(dim: usize) -> SrbpConfig {
        SrbpConfig {
            potential: PotentialSpec::unit(dim),
            grid: GridSpec::new(dim, 32, 0.5).unwrap(),
            dt: 0.01,
            horizon: 0.5,
            seed: 3,
            ensemble: 2,
            initial: InitialMode::Empty,
            record_stride: 10,
        }
    }

    #[test]
    fn zero_increment_from_empty_field_deposits_peak_at_particle() {
        let cfg = empty_config(3);
        let mut s = init(&cfg, 0).unwrap();
        s.step_with_increment(0.01, &[0.0; 3]);
        assert_eq!(s.x, vec![0.0; 3]);
        assert_relative_eq!(s.zeta.at(&[0, 0, 0]), 0.01, max_relative = 1e-15);
        assert_relative_eq!(s.zeta.at(&[2, 0, 0]), 0.01 * (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn deposition_conserves_mass() {
        let cfg = empty_config(3);
        let mut s = init(&cfg, 0).unwrap();
        s.deposit(&[0.37, -1.21, 7.9], 0.02);
        let want = 0.02 * cfg.potential.integral();
        assert!((s.zeta.integral() - want).abs() / want < 1e-6);
    }

    #[test]
    fn decomposition_is_exact() {
        let mut cfg = empty_config(3);
        cfg.horizon = 2.0;
        let (rec, _) = run_one(&cfg, None, 0).unwrap();
        assert!(rec.decomposition_error() < 1e-12);
        assert_eq!(rec.len(), 21);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = empty_config(2);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].x, a[1].x);
    }

    #[test]
    fn stationary_mode_is_rejected_in_low_dimension() {
        let mut cfg = empty_config(2);
        cfg.initial = InitialMode::Stationary;
        assert!(init(&cfg, 0).is_err());
    }

    #[test]
    fn view_at_origin_equals_field_and_shifts_exactly() {
        let mut cfg = empty_config(3);
        cfg.initial = InitialMode::Stationary;
        cfg.grid = GridSpec::new(3, 16, 1.0).unwrap();
        let mut s = init(&cfg, 0).unwrap();
        let v0 = s.environment_view();
        assert_eq!(v0.values, s.zeta.values);
        s.x = vec![1.0, 0.0, -2.0];
        let v1 = s.environment_view();
        assert_eq!(v1.values, s.zeta.shifted(&[1, 0, -2]).values);
    }

    #[test]
    fn csv_roundtrip() {
        let cfg = empty_config(1);
        let (rec, _) = run_one(&cfg, None, 1).unwrap();
        let csv = rec.to_csv();
        assert!(csv.starts_with(b"t,X1,B1,I1\n"));
        let back = TrajectoryRecord::from_csv(&csv, 1, rec.seed, &rec.config_hash).unwrap();
        assert_eq!(back, rec);
    }
}
