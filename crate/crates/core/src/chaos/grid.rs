use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MAX_DIM;

/// Per-argument momentum grid: quadrature nodes `p_k` with cell volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosGrid {
    pub dim: usize,
    pub points: Vec<[f64; MAX_DIM]>,
    pub volumes: Vec<f64>,
    /// Short human-readable description used in reports.
    pub label: String,
}

impl ChaosGrid {
    /// `nc` points per axis at `(i - nc/2 + 1/2) dp`, so no node sits at `p = 0`.
    pub fn half_offset(dim: usize, nc: usize, dp: f64) -> Result<Self> {
        Self::half_offset_ball(dim, nc, dp, f64::INFINITY)
    }

    /// Half-offset grid restricted to the ball `|p| <= p_max`.
    pub fn half_offset_ball(dim: usize, nc: usize, dp: f64, p_max: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension {dim} out of range")));
        }
        if nc == 0 || nc % 2 != 0 {
            return Err(Error::invalid("points per axis must be even and positive"));
        }
        if !(dp.is_finite() && dp > 0.0) {
            return Err(Error::invalid("momentum spacing must be positive"));
        }
        let axis: Vec<f64> = (0..nc)
            .map(|i| (i as f64 - nc as f64 / 2.0 + 0.5) * dp)
            .collect();
        let total = nc.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut p = [0.0; MAX_DIM];
            let mut r = flat;
            for a in (0..dim).rev() {
                p[a] = axis[r % nc];
                r /= nc;
            }
            if p.iter().map(|v| v * v).sum::<f64>() <= p_max * p_max {
                points.push(p);
            }
        }
        if points.is_empty() {
            return Err(Error::invalid("momentum grid is empty"));
        }
        let volumes = vec![dp.powi(dim as i32); points.len()];
        let label = if p_max.is_finite() {
            format!("half-offset nc={nc} dp={dp} |p|<={p_max} (K={})", points.len())
        } else {
            format!("half-offset nc={nc} dp={dp} (K={})", points.len())
        };
        Ok(ChaosGrid {
            dim,
            points,
            volumes,
            label,
        })
    }

    /// Arbitrary nodes; the set must be closed under `p -> -p` and avoid `p = 0`.
    pub fn from_points(dim: usize, points: &[Vec<f64>], volumes: &[f64]) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension {dim} out of range")));
        }
        if points.len() != volumes.len() || points.is_empty() {
            return Err(Error::invalid("points and volumes must be non-empty and of equal length"));
        }
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::invalid("momentum point has wrong dimension"));
            }
            if p.iter().all(|&v| v == 0.0) {
                return Err(Error::invalid("momentum grid must exclude p = 0"));
            }
            let mut q = [0.0; MAX_DIM];
            q[..dim].copy_from_slice(p);
            pts.push(q);
        }
        if volumes.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::invalid("cell volumes must be positive"));
        }
        let g = ChaosGrid {
            dim,
            points: pts,
            volumes: volumes.to_vec(),
            label: format!("custom (K={})", points.len()),
        };
        if !g.is_symmetric() {
            return Err(Error::invalid("momentum grid must be symmetric under p -> -p"));
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of `-p_k`, if present.
    pub fn mirror(&self, k: usize) -> Option<usize> {
        let p = &self.points[k];
        self.points.iter().position(|q| (0..self.dim).all(|a| q[a] == -p[a]))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|k| {
            self.mirror(k)
                .map(|m| self.volumes[m] == self.volumes[k])
                .unwrap_or(false)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_offset_avoids_origin_and_is_symmetric() {
        let g = ChaosGrid::half_offset(3, 4, 0.5).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.is_symmetric());
        assert!(g.points.iter().all(|p| p[..3].iter().all(|&v| v != 0.0)));
        let b = ChaosGrid::half_offset_ball(3, 4, 0.75, 1.3).unwrap();
        assert_eq!(b.len(), 32);
        assert!(b.is_symmetric());
    }

    #[test]
    fn from_points_validates() {
        let ok = ChaosGrid::from_points(1, &[vec![0.5], vec![-0.5]], &[1.0, 1.0]);
        assert!(ok.is_ok());
        assert!(ChaosGrid::from_points(1, &[vec![0.5]], &[1.0]).is_err());
        assert!(ChaosGrid::from_points(1, &[vec![0.0]], &[1.0]).is_err());
        assert!(ChaosGrid::half_offset(3, 3, 0.5).is_err());
    }
}
