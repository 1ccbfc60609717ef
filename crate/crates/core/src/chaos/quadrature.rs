use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

const TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho2Convention {
    /// `d⁻¹ ∫ |p|⁻² V̂(p) dp` with no further constants.
    Literal,
    /// Scaled to the variance rate of one coordinate of `∫ φ` in random scenery,
    /// `2‖S^{-1/2} φ_l‖² = 4 (2π)^{-d/2} × literal`.
    Derivation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rho2 {
    pub convention: Rho2Convention,
    pub value: f64,
    /// Multiplier applied to the literal integral.
    pub scale: f64,
    pub literal: f64,
    pub error_estimate: f64,
}

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

fn require_d3(spec: &PotentialSpec) -> Result<()> {
    spec.validate()?;
    if spec.dim < 3 {
        return Err(Error::invalid(format!(
            "∫|p|⁻²V̂ diverges at p = 0 for d = {}",
            spec.dim
        )));
    }
    Ok(())
}

/// `ρ² = d⁻¹ ∫ |p|⁻² V̂(p) dp` by radial double-exponential quadrature.
pub fn rho2_quadrature(spec: &PotentialSpec, convention: Rho2Convention) -> Result<Rho2> {
    require_d3(spec)?;
    let d = spec.dim;
    let r_max = 12.0 / spec.width;
    let q = quadrature::integrate(
        |r| r.powi(d as i32 - 3) * spec.fourier_p2(r * r),
        0.0,
        r_max,
        TOL,
    );
    let literal = sphere_area(d) * q.integral / d as f64;
    let scale = match convention {
        Rho2Convention::Literal => 1.0,
        Rho2Convention::Derivation => 4.0 * (2.0 * PI).powf(-(d as f64) / 2.0),
    };
    Ok(Rho2 {
        convention,
        value: scale * literal,
        scale,
        literal,
        error_estimate: sphere_area(d) * q.error_estimate / d as f64 * scale,
    })
}

/// `F(s) = ∫ V̂(p + q) |q|⁻² dq` at `|p| = s`.
pub fn sector_profile(spec: &PotentialSpec, s: f64) -> Result<f64> {
    require_d3(spec)?;
    let d = spec.dim;
    let (a, w) = (spec.amplitude, spec.width);
    let w2 = w * w;
    let r_max = s + 12.0 / w;
    let amp = a * w.powi(d as i32);
    if d == 3 {
        // angular integral in closed form: ∫ e^{-w² r s μ} dμ = 2 sinh(w² r s) / (w² r s)
        let f = |r: f64| {
            let x = w2 * r * s;
            if x < 1e-8 {
                2.0 * (-0.5 * w2 * (r * r + s * s)).exp()
            } else {
                ((-0.5 * w2 * (r - s) * (r - s)).exp() - (-0.5 * w2 * (r + s) * (r + s)).exp()) / x
            }
        };
        let q = quadrature::integrate(f, 0.0, r_max, TOL);
        return Ok(2.0 * PI * amp * q.integral);
    }
    let ring = sphere_area(d - 1);
    let half = (d as f64 - 3.0) / 2.0;
    let outer = |r: f64| {
        let inner = quadrature::integrate(
            |mu: f64| (-0.5 * w2 * (r * r + s * s + 2.0 * r * s * mu)).exp() * (1.0 - mu * mu).powf(half),
            -1.0,
            1.0,
            TOL,
        );
        r.powi(d as i32 - 3) * inner.integral
    };
    Ok(ring * amp * quadrature::integrate(outer, 0.0, r_max, 1e-12).integral)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorConstant {
    /// `C² = sup_p ∫ V̂(p + q) |q|⁻² dq`.
    pub c2: f64,
    pub c: f64,
    /// `|p|` at which the supremum is attained on the scan.
    pub argmax: f64,
    /// `(|p|, F(|p|))` scan.
    pub profile: Vec<(f64, f64)>,
}

/// Locates the supremum of [`sector_profile`] on a radial scan `|p| ∈ [0, 4/w]`.
pub fn sector_constant(spec: &PotentialSpec) -> Result<SectorConstant> {
    require_d3(spec)?;
    let steps = 80;
    let profile: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let s = 4.0 / spec.width * i as f64 / steps as f64;
            sector_profile(spec, s).map(|v| (s, v))
        })
        .collect::<Result<_>>()?;
    let (argmax, c2) = profile
        .iter()
        .cloned()
        .fold((0.0, f64::MIN), |acc, v| if v.1 > acc.1 { v } else { acc });
    Ok(SectorConstant {
        c2,
        c: c2.sqrt(),
        argmax,
        profile,
    })
}
