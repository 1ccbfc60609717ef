use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::space::{ChaosFunction, ChaosSpace, ChaosStack};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventOptions {
    /// Target relative residual `‖f - (λ - G) u‖ / ‖f‖`.
    pub tol: f64,
    /// GMRES restart length.
    pub restart: usize,
    /// Total Krylov iteration budget.
    pub max_iter: usize,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions {
            tol: 1e-10,
            restart: 30,
            max_iter: 3000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventSolution {
    pub lambda: f64,
    pub u: ChaosStack,
    /// `(u_λ, f)`.
    pub pairing: f64,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Levels `1..=n_max` flattened into one vector.
struct Layout {
    n_max: usize,
    offsets: Vec<usize>,
    weight: Vec<f64>,
    diag: Vec<f64>,
    masked: Vec<bool>,
}

impl Layout {
    fn new(space: &ChaosSpace, n_max: usize, lambda: f64) -> Self {
        let mut offsets = vec![0];
        let mut weight = Vec::new();
        let mut diag = Vec::new();
        let mut masked = Vec::new();
        for n in 1..=n_max {
            let t = space.table(n);
            weight.extend_from_slice(&t.weight);
            masked.extend_from_slice(&t.masked);
            diag.extend(
                t.abs_p
                    .iter()
                    .zip(&t.masked)
                    .map(|(&a, &m)| if m { 1.0 } else { lambda + 0.5 * a * a }),
            );
            offsets.push(weight.len());
        }
        Layout {
            n_max,
            offsets,
            weight,
            diag,
            masked,
        }
    }

    fn flatten(&self, s: &ChaosStack) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.weight.len());
        for n in 1..=self.n_max {
            out.extend_from_slice(&s.levels[n].values);
        }
        out
    }

    fn unflatten(&self, space: &ChaosSpace, x: &[Complex64]) -> ChaosStack {
        let mut s = space.zero_stack(self.n_max);
        for n in 1..=self.n_max {
            s.levels[n].values = x[self.offsets[n - 1]..self.offsets[n]].to_vec();
        }
        s
    }

    fn dot_w(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        x.iter().zip(y).zip(&self.weight).map(|((a, b), &w)| a.conj() * b * w).sum()
    }

    fn dot_d(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        x.iter()
            .zip(y)
            .zip(self.weight.iter().zip(&self.diag))
            .map(|((a, b), (&w, &d))| a.conj() * b * (w * d))
            .sum()
    }
}

/// `L x = (λ + S) x - A x` on unmasked entries, identity on masked ones.
fn apply_l(space: &ChaosSpace, lay: &Layout, x: &[Complex64]) -> Vec<Complex64> {
    let mut xp = x.to_vec();
    for (v, &m) in xp.iter_mut().zip(&lay.masked) {
        if m {
            *v = ZERO;
        }
    }
    let skew = lay.flatten(&space.generator_parts(&lay.unflatten(space, &xp), 0.0, 1.0));
    x.iter()
        .zip(&skew)
        .zip(lay.diag.iter().zip(&lay.masked))
        .map(|((&xi, &si), (&d, &m))| if m { xi } else { xi * d - si })
        .collect()
}

fn norm_of(z: Complex64) -> f64 {
    z.re.max(0.0).sqrt()
}

/// Solves `(λ - G) u = f` on the truncated stack by restarted GMRES.
///
/// The system is left-preconditioned by `D = λ + S` and GMRES runs in the
/// `D`-weighted inner product, in which the preconditioned operator is the
/// identity plus a skew-adjoint part. Tuples with `Σp = 0` are excluded.
pub fn solve_resolvent(
    space: &ChaosSpace,
    lambda: f64,
    f: &ChaosStack,
    opts: &ResolventOptions,
) -> Result<ResolventSolution> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("λ must be positive, got {lambda}")));
    }
    let n_max = f.n_max();
    if n_max == 0 || n_max > space.max_level() {
        return Err(Error::invalid(format!(
            "truncation level {n_max} must be in 1..={}",
            space.max_level()
        )));
    }
    if f.levels[0].values.iter().any(|v| *v != ZERO) {
        return Err(Error::invalid("right-hand side must have no level-0 component"));
    }
    let lay = Layout::new(space, n_max, lambda);
    let mut fv = lay.flatten(f);
    for (v, &m) in fv.iter_mut().zip(&lay.masked) {
        if m {
            *v = ZERO;
        }
    }
    let f_norm = norm_of(lay.dot_w(&fv, &fv));
    let len = fv.len();
    if f_norm == 0.0 {
        return Ok(ResolventSolution {
            lambda,
            u: space.zero_stack(n_max),
            pairing: 0.0,
            residual: 0.0,
            iterations: 0,
            residual_history: vec![0.0],
        });
    }
    let precond = |y: Vec<Complex64>| -> Vec<Complex64> {
        y.into_iter().zip(&lay.diag).map(|(v, &d)| v / d).collect()
    };
    let b = precond(fv.clone());
    let b_norm = norm_of(lay.dot_d(&b, &b));
    let m = opts.restart.max(1);
    let mut x = vec![ZERO; len];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut r = b.clone();
    loop {
        let beta = norm_of(lay.dot_d(&r, &r));
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut cols = 0;
        for j in 0..m {
            let mut w = precond(apply_l(space, &lay, &basis[j]));
            for (i, vi) in basis.iter().enumerate() {
                let hij = lay.dot_d(vi, &w);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm_of(lay.dot_d(&w, &w));
            h[j + 1][j] = Complex64::new(hn, 0.0);
            for i in 0..j {
                let (a, bb) = (h[i][j], h[i + 1][j]);
                h[i][j] = a * cs[i] + sn[i] * bb;
                h[i + 1][j] = -sn[i].conj() * a + bb * cs[i];
            }
            let (a, bb) = (h[j][j], h[j + 1][j]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = bb.conj() / bb.norm();
            } else {
                cs[j] = a.norm() / denom;
                sn[j] = (a / a.norm()) * bb.conj() / denom;
            }
            h[j][j] = a * cs[j] + sn[j] * bb;
            h[j + 1][j] = ZERO;
            let gj = g[j];
            g[j] = gj * cs[j];
            g[j + 1] = -sn[j].conj() * gj;
            iterations += 1;
            cols = j + 1;
            let est = g[j + 1].norm() / b_norm;
            if est <= 0.1 * opts.tol || hn <= 1e-14 * beta || iterations >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut y = vec![ZERO; cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for k in i + 1..cols {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[i]) {
                *xk += yi * vk;
            }
        }
        let lx = apply_l(space, &lay, &x);
        let res: Vec<Complex64> = fv.iter().zip(&lx).map(|(a, b)| a - b).collect();
        let true_res = norm_of(lay.dot_w(&res, &res)) / f_norm;
        history.push(true_res);
        if true_res <= opts.tol {
            let u = lay.unflatten(space, &x);
            let pairing = lay.dot_w(&fv, &x).re;
            return Ok(ResolventSolution {
                lambda,
                u,
                pairing,
                residual: true_res,
                iterations,
                residual_history: history,
            });
        }
        if iterations >= opts.max_iter {
            let tail: Vec<String> = history.iter().map(|v| format!("{v:.3e}")).collect();
            return Err(Error::numerical(format!(
                "resolvent solve at λ = {lambda} did not reach {} within {} iterations; residuals by restart: {}",
                opts.tol,
                opts.max_iter,
                tail.join(", ")
            )));
        }
        r = precond(res);
    }
}

/// Right-hand side `φ_l` on level 1 of a stack truncated at `n_max`.
pub fn drift_stack(space: &ChaosSpace, n_max: usize, l: usize) -> ChaosStack {
    let mut f = space.zero_stack(n_max);
    f.levels[1] = space.drift(l);
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub pairing: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Report {
    pub n_max: usize,
    pub component: usize,
    pub grid: String,
    /// `1 + 2 lim_{λ→0} (u_λ, φ_l)`.
    pub sigma2: f64,
    pub pairing_limit: f64,
    pub table: Vec<LambdaRow>,
    /// `|σ²(n_max) - σ²(n_max - 1)|`, when `n_max >= 2`.
    pub truncation_diagnostic: Option<f64>,
    pub sigma2_lower_truncation: Option<f64>,
}

impl Sigma2Report {
    pub fn table_csv(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "lambda,pairing,residual,iterations").unwrap();
        for r in &self.table {
            writeln!(out, "{},{},{},{}", r.lambda, r.pairing, r.residual, r.iterations).unwrap();
        }
        out
    }
}

fn extrapolate(table: &[LambdaRow]) -> Result<f64> {
    if table.len() < 2 {
        return Err(Error::invalid("λ extrapolation needs at least two values"));
    }
    for w in table.windows(2) {
        if !(w[1].lambda < w[0].lambda) {
            return Err(Error::invalid("λ sequence must be strictly decreasing"));
        }
    }
    // (u_λ, f) must not decrease as λ decreases
    let scale = table.iter().map(|r| r.pairing.abs()).fold(0.0, f64::max);
    let slack = 1e-9 * scale + 1e-14;
    if let Some(w) = table.windows(2).find(|w| w[1].pairing < w[0].pairing - slack) {
        return Err(Error::numerical(format!(
            "non-monotone λ tail: (u_λ, f) = {} at λ = {} but {} at λ = {}",
            w[0].pairing, w[0].lambda, w[1].pairing, w[1].lambda
        )));
    }
    let a = &table[table.len() - 2];
    let b = &table[table.len() - 1];
    // linear in λ near 0: the discrete generator has a spectral gap on the unmasked tuples
    Ok(b.pairing + (b.pairing - a.pairing) * b.lambda / (a.lambda - b.lambda))
}

fn sigma2_single(
    space: &ChaosSpace,
    lambdas: &[f64],
    n_max: usize,
    l: usize,
    opts: &ResolventOptions,
) -> Result<(f64, f64, Vec<LambdaRow>)> {
    let f = drift_stack(space, n_max, l);
    let mut table = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let s = solve_resolvent(space, lam, &f, opts)?;
        table.push(LambdaRow {
            lambda: lam,
            pairing: s.pairing,
            residual: s.residual,
            iterations: s.iterations,
        });
    }
    let lim = extrapolate(&table)?;
    Ok((1.0 + 2.0 * lim, lim, table))
}

/// Kipnis–Varadhan variance of one coordinate, `1 + 2 lim_{λ→0} (u_λ, φ_l)`,
/// with the `n_max - 1` result as truncation diagnostic.
pub fn sigma2_kv(
    space: &ChaosSpace,
    lambdas: &[f64],
    n_max: usize,
    l: usize,
    opts: &ResolventOptions,
) -> Result<Sigma2Report> {
    if l >= space.dim() {
        return Err(Error::invalid("component out of range"));
    }
    let (sigma2, lim, table) = sigma2_single(space, lambdas, n_max, l, opts)?;
    let lower = if n_max >= 2 {
        Some(sigma2_single(space, lambdas, n_max - 1, l, opts)?.0)
    } else {
        None
    };
    Ok(Sigma2Report {
        n_max,
        component: l,
        grid: space.grid.label.clone(),
        sigma2,
        pairing_limit: lim,
        table,
        truncation_diagnostic: lower.map(|s| (sigma2 - s).abs()),
        sigma2_lower_truncation: lower,
    })
}

/// Geometric λ sequence `λ0, λ0/ratio, …` of length `count`.
pub fn lambda_sequence(lambda0: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lambda0 / ratio.powi(i as i32)).collect()
}

/// `(u_λ, f)` of the level-1 truncation in closed form, `Σ |f̂|² W / (λ + ½|p|²)`.
pub fn level1_pairing(space: &ChaosSpace, lambda: f64, f: &ChaosFunction) -> f64 {
    let t = space.table(1);
    f.values
        .iter()
        .zip(&t.weight)
        .zip(&t.abs_p)
        .map(|((v, &w), &a)| v.norm_sqr() * w / (lambda + 0.5 * a * a))
        .sum()
}
