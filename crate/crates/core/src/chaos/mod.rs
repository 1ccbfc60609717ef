//! Wiener-chaos (Fock-space) operators in the Fourier representation.
//!
//! Level-`n` vectors are symmetric functions of `n` momenta on a discrete
//! [`ChaosGrid`]. The module provides `∇`, `Δ`, `|Δ|^{-1/2}`, creation and
//! annihilation, the generator `G = ½Δ + A₊ + A₋`, graded sector norms by
//! power iteration, resolvent solves and the Kipnis–Varadhan variance, and
//! radial quadratures for `ρ²` and the sector constant.

mod grid;
mod norms;
mod quadrature;
mod resolvent;
mod space;

pub use grid::ChaosGrid;
pub use norms::{
    creation_norm, delta_creation_norm, graded_sector_norm, nabla_block_report, power_norm,
    sector_adjoint, sector_apply, NormReport, PowerOptions,
};
pub use quadrature::{
    rho2_quadrature, sector_constant, sector_profile, sphere_area, Rho2, Rho2Convention,
    SectorConstant,
};
pub use resolvent::{
    drift_stack, lambda_sequence, level1_pairing, sigma2_kv, solve_resolvent, LambdaRow,
    ResolventOptions, ResolventSolution, Sigma2Report,
};
pub use space::{ChaosFunction, ChaosSpace, ChaosStack, LevelTable};
