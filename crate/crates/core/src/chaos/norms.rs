use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::space::{ChaosFunction, ChaosSpace};
use crate::error::{Error, Result};
use crate::rng;
use crate::MAX_DIM;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-4,
            max_iter: 2000,
            seed: 1,
        }
    }
}

/// Operator-norm report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub operator: String,
    pub level: usize,
    pub grid: String,
    pub norm: f64,
    pub iterations: usize,
    /// Relative change of the Rayleigh quotient at the last iteration.
    pub residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<f64>,
}

/// Power iteration for `‖T↾n‖` given `T*T`, within the symmetric subspace.
///
/// With `restrict` set, tuples with `Σp = 0` are excluded from the domain.
pub fn power_norm(
    space: &ChaosSpace,
    n: usize,
    operator: &str,
    opts: &PowerOptions,
    restrict: bool,
    tt: impl Fn(&ChaosFunction) -> ChaosFunction,
) -> Result<NormReport> {
    let mut r = rng::stream(opts.seed, n as u64, rng::POWER);
    let mut u = space.random_symmetric(n, &mut r);
    if restrict {
        space.mask(&mut u);
    }
    let nu = space.norm(&u);
    if nu == 0.0 {
        return Err(Error::invalid(format!("level {n} has no unmasked tuples")));
    }
    u.scale(Complex64::new(1.0 / nu, 0.0));
    let mut history = Vec::new();
    let mut prev = f64::NAN;
    for it in 1..=opts.max_iter {
        let mut v = space.symmetrize(&tt(&u));
        if restrict {
            space.mask(&mut v);
        }
        let rho = space.inner(&u, &v).re;
        history.push(rho);
        let nv = space.norm(&v);
        if nv == 0.0 || rho <= 0.0 {
            return Ok(NormReport {
                operator: operator.into(),
                level: n,
                grid: space.grid.label.clone(),
                norm: 0.0,
                iterations: it,
                residual: 0.0,
                history,
            });
        }
        let change = ((rho - prev) / rho).abs();
        if change <= opts.tol {
            return Ok(NormReport {
                operator: operator.into(),
                level: n,
                grid: space.grid.label.clone(),
                norm: rho.sqrt(),
                iterations: it,
                residual: change,
                history,
            });
        }
        prev = rho;
        v.scale(Complex64::new(1.0 / nv, 0.0));
        u = v;
    }
    let tail: Vec<String> = history.iter().rev().take(8).rev().map(|v| format!("{v:.8}")).collect();
    Err(Error::numerical(format!(
        "power iteration for {operator} on level {n} stagnated after {} iterations; Rayleigh quotients ... {}",
        opts.max_iter,
        tail.join(", ")
    )))
}

/// `T = S^{-1/2} A₊ S^{-1/2}` from level `n` to `n + 1`, applied without
/// materialising tables for level `n + 1`.
struct SectorOperator<'a> {
    space: &'a ChaosSpace,
    n: usize,
    /// `drop[r * n + m]`: level `n - 1` index of tuple `r` with position `m` removed.
    drop: Vec<usize>,
    digits: Vec<usize>,
    s_in: Vec<f64>,
}

impl<'a> SectorOperator<'a> {
    fn new(space: &'a ChaosSpace, n: usize) -> Self {
        let k = space.k();
        let len = k.pow(n as u32);
        let mut drop = Vec::with_capacity(len * n);
        let mut digits = Vec::with_capacity(len * n);
        let mut dig = vec![0usize; n];
        for _ in 0..len {
            for m in 0..n {
                let idx = dig
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != m)
                    .fold(0, |acc, (_, &v)| acc * k + v);
                drop.push(idx);
            }
            digits.extend_from_slice(&dig);
            for v in dig.iter_mut().rev() {
                *v += 1;
                if *v < k {
                    break;
                }
                *v = 0;
            }
        }
        let t = space.table(n);
        let s_in = t
            .abs_p
            .iter()
            .zip(&t.masked)
            .map(|(&a, &m)| if m { 0.0 } else { 2f64.sqrt() / a })
            .collect();
        SectorOperator {
            space,
            n,
            drop,
            digits,
            s_in,
        }
    }

    fn out_factor(&self, p: &[f64; MAX_DIM], j: usize, tol: f64) -> f64 {
        let d = self.space.dim();
        let q = &self.space.grid.points[j];
        let a2: f64 = (0..d).map(|c| (p[c] + q[c]) * (p[c] + q[c])).sum();
        let a = a2.sqrt();
        if a <= tol {
            0.0
        } else {
            2f64.sqrt() / a
        }
    }

    fn zero_tol(&self) -> f64 {
        let d = self.space.dim();
        1e-9 * self
            .space
            .grid
            .points
            .iter()
            .map(|p| p[..d].iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn apply(&self, u: &ChaosFunction) -> ChaosFunction {
        let sp = self.space;
        let (n, k, d) = (self.n, sp.k(), sp.dim());
        let t = sp.table(n);
        let tol = self.zero_tol();
        // v_l = ∇_l S^{-1/2} u
        let v: Vec<[Complex64; MAX_DIM]> = (0..u.values.len())
            .map(|r| {
                let mut c = [ZERO; MAX_DIM];
                let base = u.values[r] * Complex64::new(0.0, self.s_in[r]);
                for l in 0..d {
                    c[l] = base * t.p[r][l];
                }
                c
            })
            .collect();
        let scale = Complex64::new(0.0, sp.gamma / ((n + 1) as f64).sqrt());
        let mut out = vec![ZERO; u.values.len() * k];
        for r in 0..u.values.len() {
            let dg = &self.digits[r * n..(r + 1) * n];
            let dr = &self.drop[r * n..(r + 1) * n];
            for j in 0..k {
                let f = self.out_factor(&t.p[r], j, tol);
                if f == 0.0 {
                    continue;
                }
                let pj = &sp.grid.points[j];
                let mut acc = ZERO;
                for l in 0..d {
                    acc += v[r][l] * pj[l];
                }
                for m in 0..n {
                    let src = &v[dr[m] * k + j];
                    let pm = &sp.grid.points[dg[m]];
                    for l in 0..d {
                        acc += src[l] * pm[l];
                    }
                }
                out[r * k + j] = acc * scale * f;
            }
        }
        ChaosFunction {
            level: n + 1,
            values: out,
        }
    }

    fn adjoint(&self, w: &ChaosFunction) -> ChaosFunction {
        let sp = self.space;
        let (n, k, d) = (self.n, sp.k(), sp.dim());
        let t = sp.table(n);
        let tol = self.zero_tol();
        let c = -sp.gamma * ((n + 1) as f64).sqrt();
        let values = (0..t.p.len())
            .map(|r| {
                let mut z = [ZERO; MAX_DIM];
                for j in 0..k {
                    let f = self.out_factor(&t.p[r], j, tol);
                    if f == 0.0 {
                        continue;
                    }
                    let y = w.values[r * k + j] * (f * sp.weight[j]);
                    let pj = &sp.grid.points[j];
                    for l in 0..d {
                        z[l] += y * pj[l];
                    }
                }
                let mut acc = ZERO;
                for l in 0..d {
                    acc += z[l] * t.p[r][l];
                }
                acc * (c * self.s_in[r])
            })
            .collect();
        ChaosFunction { level: n, values }
    }
}

/// `S^{-1/2} A₊ S^{-1/2} ↾ n` applied directly (used for validation and small grids).
pub fn sector_apply(space: &ChaosSpace, u: &ChaosFunction) -> ChaosFunction {
    SectorOperator::new(space, u.level).apply(u)
}

/// Adjoint of [`sector_apply`] from level `n + 1` back to level `n`.
pub fn sector_adjoint(space: &ChaosSpace, n: usize, w: &ChaosFunction) -> ChaosFunction {
    SectorOperator::new(space, n).adjoint(w)
}

/// `‖S^{-1/2} A₊ S^{-1/2} ↾ n‖` by power iteration on `T*T`.
pub fn graded_sector_norm(space: &ChaosSpace, n: usize, opts: &PowerOptions) -> Result<NormReport> {
    if n == 0 {
        return Err(Error::invalid("the sector operator vanishes on level 0"));
    }
    if n > 4 {
        return Err(Error::invalid("graded sector norms are supported up to level 4"));
    }
    let op = SectorOperator::new(space, n);
    power_norm(space, n, "S^-1/2 A+ S^-1/2", opts, true, |u| op.adjoint(&op.apply(u)))
}

/// `‖a*_l ↾ n‖` by power iteration on `a_l a*_l`.
pub fn creation_norm(space: &ChaosSpace, n: usize, l: usize, opts: &PowerOptions) -> Result<NormReport> {
    power_norm(space, n, &format!("a*_{l}"), opts, false, |u| {
        space.annihilation(&space.creation(u, l), l)
    })
}

/// `‖|Δ|^{-1/2} a*_l ↾ n‖`; needs tables for level `n + 1`.
pub fn delta_creation_norm(space: &ChaosSpace, n: usize, l: usize, opts: &PowerOptions) -> Result<NormReport> {
    if n + 1 > space.max_level() {
        return Err(Error::invalid("space lacks tables for the output level"));
    }
    power_norm(space, n, &format!("|Δ|^-1/2 a*_{l}"), opts, false, |u| {
        let mut w = space.creation(u, l);
        let t = space.table(n + 1);
        for ((v, &a), &m) in w.values.iter_mut().zip(&t.abs_p).zip(&t.masked) {
            *v = if m { ZERO } else { *v / (a * a) };
        }
        space.annihilation(&w, l)
    })
}

/// Exact `‖|Δ|^{-1/2} ∇_l ↾ n‖` as a report.
pub fn nabla_block_report(space: &ChaosSpace, n: usize, l: usize) -> NormReport {
    NormReport {
        operator: format!("|Δ|^-1/2 ∇_{l}"),
        level: n,
        grid: space.grid.label.clone(),
        norm: space.nabla_block_norm(n, l),
        iterations: 0,
        residual: 0.0,
        history: Vec::new(),
    }
}
