use serde::Serialize;

use super::config::{norm, ModelConfig};
use crate::error::{Error, Result};

/// Lattice momenta inside `[-Q, Q]^d`, ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumGrid {
    pub d: usize,
    pub spacing: f64,
    pub points: Vec<Vec<f64>>,
    /// `h^d`, the measure of one lattice cell.
    pub weight: f64,
}

impl MomentumGrid {
    pub fn new(d: usize, spacing: f64, halfwidth: f64, staggered: bool) -> Result<Self> {
        let axis = axis_points(spacing, halfwidth, staggered);
        if axis.is_empty() {
            return Err(Error::config("grid_halfwidth", "grid has no points"));
        }
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..d {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(Self {
            d,
            spacing,
            points,
            weight: spacing.powi(d as i32),
        })
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        Self::new(cfg.d, cfg.grid_spacing, cfg.grid_halfwidth, cfg.grid_staggered)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest coordinate magnitude present on the grid.
    pub fn max_abs_coordinate(&self) -> f64 {
        self.points
            .iter()
            .flat_map(|p| p.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }

    /// Index of the point `-p`; exists for every point.
    pub fn negated_index(&self, i: usize) -> Option<usize> {
        let target: Vec<f64> = self.points[i].iter().map(|x| -x).collect();
        self.points.iter().position(|p| {
            p.iter()
                .zip(&target)
                .all(|(a, b)| (a - b).abs() < 1e-12 * self.spacing.max(1.0))
        })
    }

    pub fn norm_of(&self, i: usize) -> f64 {
        norm(&self.points[i])
    }
}

fn axis_points(h: f64, q: f64, staggered: bool) -> Vec<f64> {
    let slack = 1e-9 * h;
    let offset = if staggered { 0.5 } else { 0.0 };
    let m_max = ((q + slack) / h - offset).floor() as i64;
    if m_max < 0 {
        return Vec::new();
    }
    let lo = if staggered { -m_max - 1 } else { -m_max };
    (lo..=m_max).map(|m| (m as f64 + offset) * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staggered_two_point_grid() {
        let g = MomentumGrid::new(1, 0.8, 0.8, true).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g.points[0][0] + 0.4).abs() < 1e-15);
        assert!((g.points[1][0] - 0.4).abs() < 1e-15);
        assert!((g.weight - 0.8).abs() < 1e-15);
    }

    #[test]
    fn integer_grid_is_symmetric() {
        let g = MomentumGrid::new(1, 0.5, 1.0, false).unwrap();
        assert_eq!(g.len(), 5);
        for i in 0..g.len() {
            assert!(g.negated_index(i).is_some());
        }
        let g2 = MomentumGrid::new(2, 1.0, 1.0, false).unwrap();
        assert_eq!(g2.len(), 9);
        assert!((g2.weight - 1.0).abs() < 1e-15);
        for i in 0..g2.len() {
            assert!(g2.negated_index(i).is_some());
        }
    }
}
