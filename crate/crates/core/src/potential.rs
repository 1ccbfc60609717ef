//! The self-interaction potential.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::MAX_DIM;

/// Shape of the interaction. Only the Gaussian family is available.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    Gaussian,
}

/// `V(x) = A exp(-|x|² / (2w²))` in dimension `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default)]
    pub kind: PotentialKind,
    pub dim: usize,
    pub amplitude: f64,
    pub width: f64,
}

impl PotentialSpec {
    /// Validated constructor. `amplitude = 0` is accepted and switches the interaction off.
    pub fn gaussian(dim: usize, amplitude: f64, width: f64) -> Result<Self> {
        let spec = PotentialSpec {
            kind: PotentialKind::Gaussian,
            dim,
            amplitude,
            width,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `A = w = 1`.
    pub fn unit(dim: usize) -> Self {
        PotentialSpec {
            kind: PotentialKind::Gaussian,
            dim,
            amplitude: 1.0,
            width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::invalid(format!(
                "dimension must be in 1..={MAX_DIM}, got {}",
                self.dim
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::invalid(format!(
                "amplitude must be finite and non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::invalid(format!(
                "width must be finite and positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    /// `V` as a function of `|x|²`.
    #[inline]
    pub fn v_r2(&self, r2: f64) -> f64 {
        self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp()
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.v_r2(norm2(x))
    }

    /// `F = -grad V = (x / w²) V(x)`, written into `out`.
    pub fn force_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let s = self.v(x) / (self.width * self.width);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi * s;
        }
    }

    pub fn force(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.force_into(x, &mut out);
        out
    }

    /// `V̂` as a function of `|p|²`.
    #[inline]
    pub fn fourier_p2(&self, p2: f64) -> f64 {
        let w = self.width;
        self.amplitude * w.powi(self.dim as i32) * (-0.5 * w * w * p2).exp()
    }

    /// `V̂(p) = A w^d exp(-w²|p|²/2)`.
    pub fn fourier(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        self.fourier_p2(norm2(p))
    }

    /// Covariance spectrum `Ĉ(p) = V̂(p) / |p|²` as a function of `|p|²`.
    #[inline]
    pub fn covariance_spectrum_p2(&self, p2: f64) -> f64 {
        self.fourier_p2(p2) / p2
    }

    /// `∫ V dx = A (2π)^{d/2} w^d`.
    pub fn integral(&self) -> f64 {
        self.amplitude * (2.0 * PI).powf(self.dim as f64 / 2.0) * self.width.powi(self.dim as i32)
    }

    /// Radius beyond which `V` is treated as zero when depositing (`6w`).
    pub fn cutoff_radius(&self) -> f64 {
        6.0 * self.width
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
