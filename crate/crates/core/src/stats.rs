//! Small statistical helpers shared by the estimators.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Mean and its standard error.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    (mean(x), (variance(x) / x.len() as f64).sqrt())
}

/// Standard error of the unbiased variance estimate, from the fourth central moment.
pub fn variance_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let s2 = variance(x);
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let var_s2 = (m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n;
    (s2, var_s2.max(0.0).sqrt())
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("linear fit needs at least three points"));
    }
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("linear fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (rss / (n - 2.0) / sxx).sqrt(),
    })
}

/// Least squares for `y ≈ Σ_j β_j f_j(x)` with a handful of basis functions.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.len() < k || k == 0 {
        return Err(Error::invalid("least squares is underdetermined"));
    }
    // normal equations with column scaling
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let s = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &yy) in rows.iter().zip(y) {
        for i in 0..k {
            let ri = r[i] / scale[i];
            for j in 0..k {
                a[i][j] += ri * r[j] / scale[j];
            }
            a[i][k] += ri * yy;
        }
    }
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[piv][c].abs() < 1e-12 {
            return Err(Error::numerical("least squares system is singular"));
        }
        a.swap(c, piv);
        for i in 0..k {
            if i != c {
                let f = a[i][c] / a[c][c];
                for j in c..=k {
                    a[i][j] -= f * a[c][j];
                }
            }
        }
    }
    Ok((0..k).map(|i| a[i][k] / a[i][i] / scale[i]).collect())
}

/// Linear-interpolated empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over resampled indices `0..n`.
pub fn bootstrap<R: Rng>(
    n: usize,
    reps: usize,
    rng: &mut R,
    mut stat: impl FnMut(&[usize]) -> Option<f64>,
) -> Vec<f64> {
    let mut idx = vec![0usize; n];
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        for i in idx.iter_mut() {
            *i = rng.gen_range(0..n);
        }
        if let Some(v) = stat(&idx) {
            out.push(v);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Two-sided normal p-value of a z-score.
pub fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    2.0 * n.cdf(-z.abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JarqueBera {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn jarque_bera(x: &[f64]) -> JarqueBera {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let statistic = n / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0);
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(statistic);
    JarqueBera {
        skewness,
        excess_kurtosis,
        statistic,
        p_value,
    }
}
