use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::grid::ChaosGrid;
use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::MAX_DIM;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Discretised symmetric element of the `n`-th chaos, stored densely over `grid^n`
/// (first argument slowest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosFunction {
    pub level: usize,
    pub values: Vec<Complex64>,
}

impl ChaosFunction {
    pub fn zeros(level: usize, k: usize) -> Self {
        ChaosFunction {
            level,
            values: vec![ZERO; k.pow(level as u32)],
        }
    }

    pub fn scale(&mut self, s: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn axpy(&mut self, a: Complex64, x: &ChaosFunction) {
        assert_eq!(self.level, x.level);
        for (y, xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }
}

/// Levels `0..=n_max` of a truncated Fock-space vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosStack {
    pub levels: Vec<ChaosFunction>,
}

impl ChaosStack {
    pub fn zeros(n_max: usize, k: usize) -> Self {
        ChaosStack {
            levels: (0..=n_max).map(|n| ChaosFunction::zeros(n, k)).collect(),
        }
    }

    pub fn n_max(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Per-level lookup tables: tuple momentum `P = Σ p_m`, `|P|`, product weight and the
/// mask of tuples with `P = 0`.
#[derive(Clone, Debug)]
pub struct LevelTable {
    pub level: usize,
    pub p: Vec<[f64; MAX_DIM]>,
    pub abs_p: Vec<f64>,
    pub weight: Vec<f64>,
    pub masked: Vec<bool>,
}

/// Fock space over a momentum grid for a given potential.
///
/// Inner product on level `n`: `⟨u, v⟩ = Σ conj(u) v Π_m W(p_m)` with
/// `W(p) = (2π)^{d/2} Ĉ(p) vol(p)`. Creation uses the kernel `γ i p_l`,
/// `γ = (2π)^{-d/2}`, i.e. the Fourier content of `∂_l δ₀`; annihilation is its
/// exact adjoint under this inner product.
#[derive(Clone, Debug)]
pub struct ChaosSpace {
    pub grid: ChaosGrid,
    pub potential: PotentialSpec,
    pub weight: Vec<f64>,
    pub gamma: f64,
    tables: Vec<LevelTable>,
    zero_tol: f64,
}

/// Odometer over base-`k` digit tuples.
#[inline]
fn advance(d: &mut [usize], k: usize) {
    for v in d.iter_mut().rev() {
        *v += 1;
        if *v < k {
            return;
        }
        *v = 0;
    }
}

#[inline]
fn encode(d: &[usize], k: usize) -> usize {
    d.iter().fold(0, |acc, &v| acc * k + v)
}

#[inline]
fn is_sorted(d: &[usize]) -> bool {
    d.windows(2).all(|w| w[0] <= w[1])
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for len in 1..=n {
        let mut next = Vec::new();
        for p in &out {
            for pos in 0..len {
                let mut q = p.clone();
                q.insert(pos, len - 1);
                next.push(q);
            }
        }
        out = next;
    }
    out.sort();
    out
}

impl ChaosSpace {
    /// Builds lookup tables for levels `0..=max_level`.
    pub fn new(grid: ChaosGrid, potential: PotentialSpec, max_level: usize) -> Result<Self> {
        potential.validate()?;
        if potential.dim != grid.dim {
            return Err(Error::invalid("potential and momentum grid dimensions differ"));
        }
        if grid.dim < 3 {
            return Err(Error::invalid("Fock space over Ĉ = V̂/|p|² requires d >= 3"));
        }
        let k = grid.len();
        if (k as f64).powi(max_level as i32) > 4e8 {
            return Err(Error::invalid(format!(
                "level {max_level} on {k} nodes is too large for dense storage"
            )));
        }
        let d = grid.dim;
        let kappa = (2.0 * PI).powf(d as f64 / 2.0);
        let weight: Vec<f64> = grid
            .points
            .iter()
            .zip(&grid.volumes)
            .map(|(p, &vol)| {
                let p2: f64 = p[..d].iter().map(|v| v * v).sum();
                kappa * potential.covariance_spectrum_p2(p2) * vol
            })
            .collect();
        let pmax = grid
            .points
            .iter()
            .map(|p| p[..d].iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut space = ChaosSpace {
            grid,
            potential,
            weight,
            gamma: 1.0 / kappa,
            tables: Vec::new(),
            zero_tol: 1e-9 * pmax,
        };
        for n in 0..=max_level {
            let t = space.build_table(n);
            space.tables.push(t);
        }
        Ok(space)
    }

    pub fn k(&self) -> usize {
        self.grid.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn max_level(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn table(&self, n: usize) -> &LevelTable {
        assert!(
            n < self.tables.len(),
            "level {n} exceeds the tables built for this space (max {})",
            self.max_level()
        );
        &self.tables[n]
    }

    /// Tuple momentum summed in sorted-digit order, so it is bitwise permutation invariant.
    pub fn tuple_momentum(&self, digits: &[usize]) -> [f64; MAX_DIM] {
        let mut s: Vec<usize> = digits.to_vec();
        s.sort_unstable();
        let mut p = [0.0; MAX_DIM];
        for &j in &s {
            for a in 0..self.dim() {
                p[a] += self.grid.points[j][a];
            }
        }
        p
    }

    fn build_table(&self, n: usize) -> LevelTable {
        let k = self.k();
        let len = k.pow(n as u32);
        let d = self.dim();
        let mut p = Vec::with_capacity(len);
        let mut abs_p = Vec::with_capacity(len);
        let mut weight = Vec::with_capacity(len);
        let mut masked = Vec::with_capacity(len);
        let mut dig = vec![0usize; n];
        let mut s = vec![0usize; n];
        for _ in 0..len {
            s.copy_from_slice(&dig);
            s.sort_unstable();
            let mut q = [0.0; MAX_DIM];
            let mut w = 1.0;
            for &j in &s {
                for a in 0..d {
                    q[a] += self.grid.points[j][a];
                }
                w *= self.weight[j];
            }
            let a = q[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            p.push(q);
            abs_p.push(a);
            weight.push(w);
            masked.push(a <= self.zero_tol);
            advance(&mut dig, k);
        }
        LevelTable {
            level: n,
            p,
            abs_p,
            weight,
            masked,
        }
    }

    pub fn zeros(&self, n: usize) -> ChaosFunction {
        ChaosFunction::zeros(n, self.k())
    }

    pub fn zero_stack(&self, n_max: usize) -> ChaosStack {
        ChaosStack::zeros(n_max, self.k())
    }

    pub fn inner(&self, u: &ChaosFunction, v: &ChaosFunction) -> Complex64 {
        assert_eq!(u.level, v.level);
        let w = &self.table(u.level).weight;
        u.values
            .iter()
            .zip(&v.values)
            .zip(w)
            .map(|((a, b), &wt)| a.conj() * b * wt)
            .sum()
    }

    pub fn norm(&self, u: &ChaosFunction) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    pub fn stack_inner(&self, u: &ChaosStack, v: &ChaosStack) -> Complex64 {
        u.levels.iter().zip(&v.levels).map(|(a, b)| self.inner(a, b)).sum()
    }

    /// Level-`n` vector with i.i.d. complex Gaussian entries, symmetrised.
    pub fn random_symmetric<R: Rng>(&self, n: usize, rng: &mut R) -> ChaosFunction {
        let len = self.k().pow(n as u32);
        let values = (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        self.symmetrize(&ChaosFunction { level: n, values })
    }

    /// Average over all permutations of the arguments (bitwise symmetric output).
    pub fn symmetrize(&self, u: &ChaosFunction) -> ChaosFunction {
        let n = u.level;
        if n <= 1 {
            return u.clone();
        }
        let k = self.k();
        let perms = permutations(n);
        let inv = 1.0 / perms.len() as f64;
        let mut out = vec![ZERO; u.values.len()];
        let mut dig = vec![0usize; n];
        let mut s = vec![0usize; n];
        let mut q = vec![0usize; n];
        for idx in 0..out.len() {
            if is_sorted(&dig) {
                let mut acc = ZERO;
                for p in &perms {
                    for (m, &pm) in p.iter().enumerate() {
                        q[m] = dig[pm];
                    }
                    acc += u.values[encode(&q, k)];
                }
                out[idx] = acc * inv;
            } else {
                s.copy_from_slice(&dig);
                s.sort_unstable();
                out[idx] = out[encode(&s, k)];
            }
            advance(&mut dig, k);
        }
        ChaosFunction { level: n, values: out }
    }

    /// Exact check that every entry equals the entry at its sorted tuple.
    pub fn is_symmetric(&self, u: &ChaosFunction) -> bool {
        let n = u.level;
        let k = self.k();
        let mut dig = vec![0usize; n];
        let mut s = vec![0usize; n];
        for idx in 0..u.values.len() {
            s.copy_from_slice(&dig);
            s.sort_unstable();
            let c = u.values[encode(&s, k)];
            let v = u.values[idx];
            if c.re.to_bits() != v.re.to_bits() || c.im.to_bits() != v.im.to_bits() {
                return false;
            }
            advance(&mut dig, k);
        }
        true
    }

    /// `∇_l`: multiplication by `i P_l`.
    pub fn nabla(&self, u: &ChaosFunction, l: usize) -> ChaosFunction {
        let t = self.table(u.level);
        ChaosFunction {
            level: u.level,
            values: u.values.iter().zip(&t.p).map(|(v, p)| v * I * p[l]).collect(),
        }
    }

    /// `Δ`: multiplication by `-|P|²`.
    pub fn delta(&self, u: &ChaosFunction) -> ChaosFunction {
        let t = self.table(u.level);
        ChaosFunction {
            level: u.level,
            values: u.values.iter().zip(&t.abs_p).map(|(v, a)| -v * a * a).collect(),
        }
    }

    /// `|Δ|^{-1/2}`: multiplication by `|P|⁻¹`. Rejects input that is non-zero where `P = 0`.
    pub fn delta_inv_sqrt(&self, u: &ChaosFunction) -> Result<ChaosFunction> {
        let t = self.table(u.level);
        let mut values = Vec::with_capacity(u.values.len());
        for ((v, &a), &m) in u.values.iter().zip(&t.abs_p).zip(&t.masked) {
            if m {
                if *v != ZERO {
                    return Err(Error::invalid(
                        "|Δ|^{-1/2} applied to a function that is non-zero where Σp = 0",
                    ));
                }
                values.push(ZERO);
            } else {
                values.push(v / a);
            }
        }
        Ok(ChaosFunction { level: u.level, values })
    }

    /// `S^{-1/2} = √2 |P|⁻¹`, with tuples at `P = 0` projected out.
    pub fn s_inv_sqrt(&self, u: &ChaosFunction) -> ChaosFunction {
        let t = self.table(u.level);
        ChaosFunction {
            level: u.level,
            values: u
                .values
                .iter()
                .zip(&t.abs_p)
                .zip(&t.masked)
                .map(|((v, &a), &m)| if m { ZERO } else { v * (2f64.sqrt() / a) })
                .collect(),
        }
    }

    /// Zeroes the entries at `P = 0`.
    pub fn mask(&self, u: &mut ChaosFunction) {
        let t = self.table(u.level);
        for (v, &m) in u.values.iter_mut().zip(&t.masked) {
            if m {
                *v = ZERO;
            }
        }
    }

    /// `Σ_l a*_l v_l` for `v_l` on level `n`, output on level `n + 1`:
    /// `(n+1)^{-1/2} Σ_m γ i p_m · v(p \ p_m)`.
    fn creation_dot(&self, v: &[&ChaosFunction], coef: &[[f64; MAX_DIM]]) -> ChaosFunction {
        let n = v[0].level;
        let m = n + 1;
        let k = self.k();
        let len = k.pow(m as u32);
        let scale = I * (self.gamma / (m as f64).sqrt());
        let mut out = vec![ZERO; len];
        let mut dig = vec![0usize; m];
        let mut s = vec![0usize; m];
        let mut rest = vec![0usize; n];
        for idx in 0..len {
            if is_sorted(&dig) {
                let mut acc = ZERO;
                for pos in 0..m {
                    let j = dig[pos];
                    rest[..pos].copy_from_slice(&dig[..pos]);
                    rest[pos..].copy_from_slice(&dig[pos + 1..]);
                    let r = encode(&rest, k);
                    for (l, vl) in v.iter().enumerate() {
                        acc += vl.values[r] * coef[j][l];
                    }
                }
                out[idx] = acc * scale;
            } else {
                s.copy_from_slice(&dig);
                s.sort_unstable();
                out[idx] = out[encode(&s, k)];
            }
            advance(&mut dig, k);
        }
        ChaosFunction { level: m, values: out }
    }

    fn axis_coef(&self, l: usize) -> Vec<[f64; MAX_DIM]> {
        self.grid
            .points
            .iter()
            .map(|p| {
                let mut c = [0.0; MAX_DIM];
                c[0] = p[l];
                c
            })
            .collect()
    }

    /// `a*_l`: level `n` to `n + 1`.
    pub fn creation(&self, u: &ChaosFunction, l: usize) -> ChaosFunction {
        self.creation_dot(&[u], &self.axis_coef(l))
    }

    /// `a_l`: level `n` to `n - 1`, `√n Σ_q (-γ i q_l) W(q) u(…, q)`.
    /// The input must be symmetric. At level 0 the result is the zero constant.
    pub fn annihilation(&self, u: &ChaosFunction, l: usize) -> ChaosFunction {
        let n = u.level;
        if n == 0 {
            return self.zeros(0);
        }
        let k = self.k();
        let c: Vec<Complex64> = (0..k)
            .map(|q| -I * (self.gamma * self.grid.points[q][l] * self.weight[q] * (n as f64).sqrt()))
            .collect();
        let values = u
            .values
            .chunks_exact(k)
            .map(|row| row.iter().zip(&c).map(|(a, b)| a * b).sum())
            .collect();
        ChaosFunction { level: n - 1, values }
    }

    /// `A₊ = Σ_l a*_l ∇_l`: level `n` to `n + 1`.
    pub fn a_plus(&self, u: &ChaosFunction) -> ChaosFunction {
        let d = self.dim();
        let grads: Vec<ChaosFunction> = (0..d).map(|l| self.nabla(u, l)).collect();
        let refs: Vec<&ChaosFunction> = grads.iter().collect();
        self.creation_dot(&refs, &self.grid.points)
    }

    /// `A₋ = Σ_l ∇_l a_l = -A₊*`: level `n` to `n - 1`.
    pub fn a_minus(&self, u: &ChaosFunction) -> ChaosFunction {
        let mut out = self.zeros(u.level.saturating_sub(1));
        if u.level == 0 {
            return out;
        }
        for l in 0..self.dim() {
            let a = self.annihilation(u, l);
            out.axpy(Complex64::new(1.0, 0.0), &self.nabla(&a, l));
        }
        out
    }

    /// Generator `G = ½Δ + A₊ + A₋` on the truncated stack; `A₊` output above `n_max` is discarded.
    pub fn generator(&self, u: &ChaosStack) -> ChaosStack {
        self.generator_parts(u, 1.0, 1.0)
    }

    /// `sym_coef · ½Δ + skew_coef · (A₊ + A₋)`.
    pub(crate) fn generator_parts(&self, u: &ChaosStack, sym_coef: f64, skew_coef: f64) -> ChaosStack {
        let n_max = u.n_max();
        let mut out = self.zero_stack(n_max);
        for n in 0..=n_max {
            if sym_coef != 0.0 {
                out.levels[n].axpy(Complex64::new(0.5 * sym_coef, 0.0), &self.delta(&u.levels[n]));
            }
            if skew_coef != 0.0 {
                if n >= 1 {
                    out.levels[n].axpy(Complex64::new(skew_coef, 0.0), &self.a_plus(&u.levels[n - 1]));
                }
                if n < n_max {
                    out.levels[n].axpy(Complex64::new(skew_coef, 0.0), &self.a_minus(&u.levels[n + 1]));
                }
            }
        }
        out
    }

    /// Coordinate drift `φ_l` on level 1: `φ̂(p) = -γ i p_l`.
    pub fn drift(&self, l: usize) -> ChaosFunction {
        ChaosFunction {
            level: 1,
            values: self
                .grid
                .points
                .iter()
                .map(|p| -I * (self.gamma * p[l]))
                .collect(),
        }
    }

    /// `‖|Δ|^{-1/2} ∇_l ↾ n‖`: the largest `|P_l| / |P|` over unmasked tuples.
    pub fn nabla_block_norm(&self, n: usize, l: usize) -> f64 {
        let t = self.table(n);
        t.p.iter()
            .zip(&t.abs_p)
            .zip(&t.masked)
            .filter(|(_, &m)| !m)
            .map(|((p, &a), _)| p[l].abs() / a)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_list() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(2), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn odometer_matches_encode() {
        let mut d = vec![0usize; 3];
        for idx in 0..27 {
            assert_eq!(encode(&d, 3), idx);
            advance(&mut d, 3);
        }
    }

    #[test]
    fn tables_mask_zero_sum_tuples_only_on_even_levels() {
        let g = ChaosGrid::half_offset(3, 2, 1.0).unwrap();
        let s = ChaosSpace::new(g, PotentialSpec::unit(3), 3).unwrap();
        assert!(s.table(1).masked.iter().all(|&m| !m));
        assert_eq!(s.table(2).masked.iter().filter(|&&m| m).count(), 8);
        assert!(s.table(3).masked.iter().all(|&m| !m));
        assert!(s.table(0).masked[0]);
    }
}
