//! Scalar fields on a periodic grid and spectral sampling of the stationary
//! Gaussian environment with covariance `Ĉ(p) = V̂(p) / |p|²`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::potential::PotentialSpec;
use crate::MAX_DIM;

/// Periodic cubic grid with `n` points of spacing `h` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, h: f64) -> Result<Self> {
        let g = GridSpec { dim, n, h };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::invalid(format!("grid dimension {} out of range", self.dim)));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "points per side must be a power of two >= 2, got {}",
                self.n
            )));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {}", self.h)));
        }
        if self.n.checked_pow(self.dim as u32).is_none() {
            return Err(Error::invalid("grid too large"));
        }
        Ok(())
    }

    /// Checks that the potential's support fits the torus (`L >= 12w`) and the dimensions agree.
    pub fn check_potential(&self, spec: &PotentialSpec) -> Result<()> {
        if spec.dim != self.dim {
            return Err(Error::invalid(format!(
                "potential dimension {} does not match grid dimension {}",
                spec.dim, self.dim
            )));
        }
        if self.side() < 12.0 * spec.width {
            return Err(Error::invalid(format!(
                "torus side {} is smaller than 12 w = {}",
                self.side(),
                12.0 * spec.width
            )));
        }
        Ok(())
    }

    /// Side length `L = n h`.
    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed wavenumber of FFT index `k` (in `[-n/2, n/2)`).
    #[inline]
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Spacing of the momentum lattice, `2π / L`.
    pub fn dp(&self) -> f64 {
        2.0 * PI / self.side()
    }

    #[inline]
    pub fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Row-major flat index of (wrapped) integer coordinates.
    pub fn index(&self, idx: &[i64]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().fold(0usize, |acc, &i| acc * self.n + self.wrap(i))
    }

    pub fn coords(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut c = [0usize; MAX_DIM];
        for a in (0..self.dim).rev() {
            c[a] = flat % self.n;
            flat /= self.n;
        }
        c
    }

    /// Integer `|k|²` of the mode stored at `flat`.
    fn mode_k2(&self, flat: usize) -> i64 {
        let c = self.coords(flat);
        (0..self.dim).map(|a| self.wavenumber(c[a]).pow(2)).sum()
    }
}

/// What a field represents. Stored in snapshot headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Environment,
    LocalTime,
    View,
    Covariance,
}

impl FieldRole {
    pub fn tag(self) -> u32 {
        match self {
            FieldRole::Environment => 0,
            FieldRole::LocalTime => 1,
            FieldRole::View => 2,
            FieldRole::Covariance => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        Ok(match tag {
            0 => FieldRole::Environment,
            1 => FieldRole::LocalTime,
            2 => FieldRole::View,
            3 => FieldRole::Covariance,
            _ => return Err(Error::invalid(format!("unknown field role tag {tag}"))),
        })
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"SRBPFLD\0";
const SNAPSHOT_HEADER: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub role: FieldRole,
    /// Seed the field was sampled from (0 when not sampled).
    pub seed: u64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec, role: FieldRole) -> Self {
        ScalarField {
            grid,
            role,
            seed: 0,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, role: FieldRole, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim];
        let values = (0..grid.len())
            .map(|i| {
                let c = grid.coords(i);
                for a in 0..grid.dim {
                    x[a] = c[a] as f64 * grid.h;
                }
                f(&x)
            })
            .collect();
        ScalarField {
            grid,
            role,
            seed: 0,
            values,
        }
    }

    #[inline]
    pub fn at(&self, idx: &[i64]) -> f64 {
        self.values[self.grid.index(idx)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `Σ values · h^d`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.h.powi(self.grid.dim as i32)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cell index and in-cell fraction of `x` along every axis.
    #[inline]
    fn locate(&self, x: &[f64]) -> ([i64; MAX_DIM], [f64; MAX_DIM]) {
        let mut i0 = [0i64; MAX_DIM];
        let mut fr = [0f64; MAX_DIM];
        for a in 0..self.grid.dim {
            let u = x[a] / self.grid.h;
            let f = u.floor();
            i0[a] = f as i64;
            fr[a] = u - f;
        }
        (i0, fr)
    }

    /// Multilinear interpolation at the torus-wrapped point `x`. Exact at grid points.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.grid.dim);
        let (i0, fr) = self.locate(x);
        self.interp_cell(&i0, &fr)
    }

    fn interp_cell(&self, i0: &[i64; MAX_DIM], fr: &[f64; MAX_DIM]) -> f64 {
        let d = self.grid.dim;
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for a in 0..d {
            let s = self.grid.stride(a);
            lo[a] = self.grid.wrap(i0[a]) * s;
            hi[a] = self.grid.wrap(i0[a] + 1) * s;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    w *= fr[a];
                    idx += hi[a];
                } else {
                    w *= 1.0 - fr[a];
                    idx += lo[a];
                }
            }
            acc += w * self.values[idx];
        }
        acc
    }

    /// Central-difference gradient, multilinearly interpolated at `x`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.grid.dim;
        assert_eq!(x.len(), d);
        let (i0, fr) = self.locate(x);
        // wrapped offsets i0-1 .. i0+2 per axis, pre-multiplied by the stride
        let mut off = [[0usize; 4]; MAX_DIM];
        for a in 0..d {
            let s = self.grid.stride(a);
            for (t, o) in off[a].iter_mut().enumerate() {
                *o = self.grid.wrap(i0[a] - 1 + t as i64) * s;
            }
        }
        let inv2h = 0.5 / self.grid.h;
        out[..d].iter_mut().for_each(|g| *g = 0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut base = 0;
            let mut pos = [0usize; MAX_DIM];
            for a in 0..d {
                let o = corner >> a & 1;
                w *= if o == 1 { fr[a] } else { 1.0 - fr[a] };
                pos[a] = o + 1;
                base += off[a][o + 1];
            }
            for a in 0..d {
                let centre = off[a][pos[a]];
                let plus = base - centre + off[a][pos[a] + 1];
                let minus = base - centre + off[a][pos[a] - 1];
                out[a] += w * (self.values[plus] - self.values[minus]) * inv2h;
            }
        }
    }

    pub fn grad_at(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.dim];
        self.grad_into(x, &mut g);
        g
    }

    /// Standard `2d + 1` point discrete Laplacian.
    pub fn laplacian(&self) -> ScalarField {
        let g = self.grid;
        let inv_h2 = 1.0 / (g.h * g.h);
        let values = (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                let mut acc = -2.0 * g.dim as f64 * self.values[i];
                for a in 0..g.dim {
                    let s = g.stride(a);
                    let base = i - c[a] * s;
                    acc += self.values[base + g.wrap(c[a] as i64 + 1) * s];
                    acc += self.values[base + g.wrap(c[a] as i64 - 1) * s];
                }
                acc * inv_h2
            })
            .collect();
        ScalarField {
            grid: g,
            role: self.role,
            seed: self.seed,
            values,
        }
    }

    /// Lattice translation: `out(x) = self(x + shift·h)`.
    pub fn shifted(&self, shift: &[i64]) -> ScalarField {
        let g = self.grid;
        assert_eq!(shift.len(), g.dim);
        let mut idx = [0i64; MAX_DIM];
        let values = (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                for a in 0..g.dim {
                    idx[a] = c[a] as i64 + shift[a];
                }
                self.values[g.index(&idx[..g.dim])]
            })
            .collect();
        ScalarField {
            grid: g,
            role: self.role,
            seed: self.seed,
            values,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SNAPSHOT_HEADER + 8 * self.values.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&(self.grid.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.grid.n as u32).to_le_bytes());
        out.extend_from_slice(&self.grid.h.to_le_bytes());
        out.extend_from_slice(&self.role.tag().to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SNAPSHOT_HEADER || &bytes[..8] != SNAPSHOT_MAGIC {
            return Err(Error::invalid("not a field snapshot"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let grid = GridSpec::new(
            u32_at(8) as usize,
            u32_at(12) as usize,
            f64::from_bits(u64_at(16)),
        )?;
        let role = FieldRole::from_tag(u32_at(24))?;
        let seed = u64_at(32);
        let body = &bytes[SNAPSHOT_HEADER..];
        if body.len() != 8 * grid.len() {
            return Err(Error::invalid(format!(
                "snapshot body has {} bytes, expected {}",
                body.len(),
                8 * grid.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ScalarField {
            grid,
            role,
            seed,
            values,
        })
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        crate::io::atomic_write(path, &self.to_bytes())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn require_d3(grid: &GridSpec) -> Result<()> {
    if grid.dim < 3 {
        return Err(Error::invalid(format!(
            "the stationary Gaussian environment requires d >= 3 (infrared divergence), got d = {}",
            grid.dim
        )));
    }
    Ok(())
}

/// Torus Fourier coefficients `c_k = (2π)^{d/2} Ĉ(p_k) / L^d` with `c_0 = 0`, so that
/// `C(x) = Σ_k c_k e^{i p_k·x}`.
pub fn covariance_coefficients(spec: &PotentialSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    grid.validate()?;
    spec.validate()?;
    require_d3(grid)?;
    grid.check_potential(spec)?;
    let d = grid.dim as i32;
    let dp2 = grid.dp() * grid.dp();
    let norm = (2.0 * PI).powf(d as f64 / 2.0) / grid.side().powi(d);
    Ok((0..grid.len())
        .map(|i| {
            let k2 = grid.mode_k2(i);
            if k2 == 0 {
                0.0
            } else {
                norm * spec.covariance_spectrum_p2(k2 as f64 * dp2)
            }
        })
        .collect())
}

/// Exact torus covariance `C(x_j)` on the grid (zero mode removed).
///
/// The inverse FFT output is averaged over the orbit of the hyperoctahedral group
/// (axis permutations and reflections), so `C(x) = C(-x)` and axis isotropy hold bitwise.
pub fn analytic_covariance(spec: &PotentialSpec, grid: &GridSpec) -> Result<ScalarField> {
    let coef = covariance_coefficients(spec, grid)?;
    let mut buf: Vec<Complex64> = coef.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    FftNd::new(grid.n, grid.dim).inverse(&mut buf);
    let mut values: Vec<f64> = buf.iter().map(|z| z.re).collect();
    drop(buf);
    symmetrize_orbits(grid, &mut values);
    Ok(ScalarField {
        grid: *grid,
        role: FieldRole::Covariance,
        seed: 0,
        values,
    })
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

fn symmetrize_orbits(grid: &GridSpec, values: &mut [f64]) {
    let d = grid.dim;
    let n = grid.n;
    let half = n / 2;
    let perms = permutations(d);
    let mut members: Vec<usize> = Vec::with_capacity(perms.len() << d);
    let mut canon = vec![0usize; d];
    // enumerate non-decreasing tuples 0 <= a_0 <= ... <= a_{d-1} <= n/2
    loop {
        members.clear();
        for p in &perms {
            for signs in 0..(1usize << d) {
                let mut flat = 0;
                for a in 0..d {
                    let v = canon[p[a]];
                    let j = if signs >> a & 1 == 1 { (n - v) % n } else { v };
                    flat = flat * n + j;
                }
                members.push(flat);
            }
        }
        members.sort_unstable();
        members.dedup();
        let avg = members.iter().map(|&m| values[m]).sum::<f64>() / members.len() as f64;
        for &m in &members {
            values[m] = avg;
        }
        // advance
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if canon[a] < half {
                canon[a] += 1;
                let v = canon[a];
                for c in canon.iter_mut().skip(a + 1) {
                    *c = v;
                }
                break;
            }
        }
    }
}

/// Continuum covariance `C(r)` on ℝ³: `A w³ √(π/2) erf(r / (√2 w)) / r`, with `C(0) = A w²`.
pub fn continuum_covariance_3d(spec: &PotentialSpec, r: f64) -> Result<f64> {
    if spec.dim != 3 {
        return Err(Error::invalid("closed-form covariance is only available for d = 3"));
    }
    let (a, w) = (spec.amplitude, spec.width);
    if r < 1e-8 * w {
        return Ok(a * w * w);
    }
    Ok(a * w.powi(3) * (PI / 2.0).sqrt() * statrs::function::erf::erf(r / (2f64.sqrt() * w)) / r)
}

/// Continuum `C(0) = A w² / (d - 2)` for `d >= 3`.
pub fn continuum_variance(spec: &PotentialSpec) -> Result<f64> {
    if spec.dim < 3 {
        return Err(Error::invalid("C(0) diverges for d <= 2"));
    }
    Ok(spec.amplitude * spec.width * spec.width / (spec.dim as f64 - 2.0))
}

/// Spectral sampler for the stationary Gaussian environment on a fixed grid.
///
/// One inverse FFT of `√c_k (ξ + iη)` yields two independent real fields (real
/// and imaginary parts), each with covariance [`analytic_covariance`].
#[derive(Clone, Debug)]
pub struct StationarySampler {
    spec: PotentialSpec,
    grid: GridSpec,
    sqrt_coef: Vec<f64>,
    plan: FftNd,
}

impl StationarySampler {
    pub fn new(spec: &PotentialSpec, grid: &GridSpec) -> Result<Self> {
        let coef = covariance_coefficients(spec, grid)?;
        Ok(StationarySampler {
            spec: *spec,
            grid: *grid,
            sqrt_coef: coef.into_iter().map(f64::sqrt).collect(),
            plan: FftNd::new(grid.n, grid.dim),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Two independent fields from one seed.
    pub fn sample_pair(&self, seed: u64) -> (ScalarField, ScalarField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf: Vec<Complex64> = self
            .sqrt_coef
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.plan.inverse(&mut buf);
        let mk = |values: Vec<f64>| ScalarField {
            grid: self.grid,
            role: FieldRole::Environment,
            seed,
            values,
        };
        let re = buf.iter().map(|z| z.re).collect();
        let im = buf.iter().map(|z| z.im).collect();
        (mk(re), mk(im))
    }

    /// The first field of [`sample_pair`](Self::sample_pair).
    pub fn sample(&self, seed: u64) -> ScalarField {
        self.sample_pair(seed).0
    }
}

/// One stationary sample; deterministic in `seed`.
pub fn sample_stationary(spec: &PotentialSpec, grid: &GridSpec, seed: u64) -> Result<ScalarField> {
    Ok(StationarySampler::new(spec, grid)?.sample(seed))
}

/// One row of a covariance check along the first axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub lag: usize,
    pub c_analytic: f64,
    pub c_empirical: f64,
    pub stderr: f64,
}

impl CovarianceRow {
    pub fn z_score(&self) -> f64 {
        (self.c_empirical - self.c_analytic) / self.stderr
    }
}

/// Empirical covariance at lags `lag · h e₁` from independent samples.
///
/// Each sample contributes its spatial average of `ω(x) ω(x + lag)`; these
/// averages are i.i.d. across samples, which gives the standard errors.
pub fn covariance_check(
    samples: &[ScalarField],
    analytic: &ScalarField,
    lags: &[usize],
) -> Result<Vec<CovarianceRow>> {
    if samples.len() < 2 {
        return Err(Error::invalid("covariance check needs at least two samples"));
    }
    let g = analytic.grid;
    let s0 = g.stride(0);
    lags.iter()
        .map(|&lag| {
            let per: Vec<f64> = samples
                .iter()
                .map(|f| {
                    let mut acc = 0.0;
                    for i in 0..g.len() {
                        let c0 = g.coords(i)[0];
                        let j = i - c0 * s0 + ((c0 + lag) % g.n) * s0;
                        acc += f.values[i] * f.values[j];
                    }
                    acc / g.len() as f64
                })
                .collect();
            let (m, se) = crate::stats::mean_stderr(&per);
            Ok(CovarianceRow {
                lag,
                c_analytic: analytic.values[(lag % g.n) * s0],
                c_empirical: m,
                stderr: se,
            })
        })
        .collect()
}

pub fn write_covariance_csv(rows: &[CovarianceRow], h: f64, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "lag,C_analytic,C_empirical,stderr")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.lag as f64 * h,
            r.c_analytic,
            r.c_empirical,
            r.stderr
        )?;
    }
    crate::io::atomic_write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> (PotentialSpec, GridSpec) {
        (PotentialSpec::unit(3), GridSpec::new(3, 16, 1.0).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(3, 12, 0.5).is_err());
        assert!(GridSpec::new(3, 16, 0.0).is_err());
        let g = GridSpec::new(3, 16, 0.5).unwrap();
        assert!(g.check_potential(&PotentialSpec::unit(3)).is_err());
        assert_eq!(g.wavenumber(8), -8);
        assert_eq!(g.wavenumber(7), 7);
        assert_eq!(g.index(&[-1, 0, 17]), 15 * 256 + 1);
    }

    #[test]
    fn low_dimension_is_rejected() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let s = PotentialSpec::unit(2);
        assert!(analytic_covariance(&s, &g).is_err());
        assert!(sample_stationary(&s, &g, 1).is_err());
    }

    #[test]
    fn covariance_is_even_and_isotropic_bitwise() {
        let (s, g) = small();
        let c = analytic_covariance(&s, &g).unwrap();
        for i in 0..g.len() {
            let k = g.coords(i);
            let neg = g.index(&[-(k[0] as i64), -(k[1] as i64), -(k[2] as i64)]);
            assert_eq!(c.values[i].to_bits(), c.values[neg].to_bits());
        }
        for k in 0..16 {
            let a = c.at(&[k, 0, 0]);
            assert_eq!(a.to_bits(), c.at(&[0, k, 0]).to_bits());
            assert_eq!(a.to_bits(), c.at(&[0, 0, k]).to_bits());
        }
        let max = c.values.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, c.values[0]);
    }

    #[test]
    fn sample_has_zero_mean_and_is_deterministic() {
        let (s, g) = small();
        let a = sample_stationary(&s, &g, 11).unwrap();
        let b = sample_stationary(&s, &g, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.mean().abs() < 1e-14);
        let c = sample_stationary(&s, &g, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_on_edges() {
        let g = GridSpec::new(3, 8, 0.5).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Environment, |x| {
            (x[0] * 1.3).sin() + x[1] * x[2]
        });
        assert_eq!(f.value_at(&[1.0, 0.5, 1.5]), f.at(&[2, 1, 3]));
        let mid = f.value_at(&[1.25, 0.5, 1.5]);
        assert_relative_eq!(mid, 0.5 * (f.at(&[2, 1, 3]) + f.at(&[3, 1, 3])), max_relative = 1e-14);
        // wrap-around
        assert_relative_eq!(f.value_at(&[1.0 + 4.0, 0.5 - 4.0, 1.5]), f.at(&[2, 1, 3]), max_relative = 1e-14);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = GridSpec::new(3, 8, 0.5).unwrap();
        let mut f = ScalarField::zeros(g, FieldRole::LocalTime);
        f.values.iter_mut().for_each(|v| *v = 3.25);
        assert_eq!(f.grad_at(&[0.3, 1.7, -2.2]), vec![0.0; 3]);
    }

    #[test]
    fn gradient_of_covariance_vanishes_at_origin() {
        let (s, g) = small();
        let c = analytic_covariance(&s, &g).unwrap();
        for v in c.grad_at(&[0.0; 3]) {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let (s, g) = small();
        let a = sample_stationary(&s, &g, 3).unwrap();
        let bytes = a.to_bytes();
        assert_eq!(&bytes[..8], b"SRBPFLD\0");
        assert_eq!(bytes.len(), 40 + 8 * g.len());
        assert_eq!(ScalarField::from_bytes(&bytes).unwrap(), a);
        assert!(ScalarField::from_bytes(&bytes[..100]).is_err());
    }

    #[test]
    fn continuum_closed_form_is_continuous_at_zero() {
        let s = PotentialSpec::unit(3);
        let c0 = continuum_covariance_3d(&s, 0.0).unwrap();
        let c1 = continuum_covariance_3d(&s, 1e-4).unwrap();
        assert_eq!(c0, 1.0);
        assert!((c0 - c1).abs() < 1e-8);
        assert_eq!(continuum_variance(&s).unwrap(), 1.0);
    }
}
