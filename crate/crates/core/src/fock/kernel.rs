use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::config::{norm, ModelConfig};
use super::grid::MomentumGrid;
use crate::error::{Error, Result};
use crate::signature::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelSpecies {
    /// Built with `g(k - q)`.
    G1,
    /// Built with `g(k + q)`.
    G2,
}

/// Discrete coupling kernel. Row index = fermion momentum `k`, column index =
/// boson momentum `q`; every entry already carries the lattice weight `h^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub species: KernelSpecies,
    pub values: DMatrix<Complex64>,
}

impl Kernel {
    pub fn zeros(species: KernelSpecies, modes: usize) -> Self {
        Self {
            species,
            values: DMatrix::zeros(modes, modes),
        }
    }

    pub fn from_fn(species: KernelSpecies, modes: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            species,
            values: DMatrix::from_fn(modes, modes, f),
        }
    }

    pub fn conj(&self) -> DMatrix<Complex64> {
        self.values.map(|v| v.conj())
    }

    /// Discrete `L^2` norm; equals the Frobenius norm because of the absorbed weight.
    pub fn l2_norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }
}

pub fn dispersion_a(q: &[f64], m_b: f64) -> f64 {
    (q.iter().map(|x| x * x).sum::<f64>() + m_b * m_b).sqrt()
}

pub fn dispersion_b(k: &[f64], m_f: f64) -> f64 {
    (k.iter().map(|x| x * x).sum::<f64>() + m_f * m_f).sqrt()
}

/// `G1` and `G2` on the grid, each entry multiplied by `h^d`.
pub fn build_kernels(cfg: &ModelConfig, grid: &MomentumGrid) -> Result<(Kernel, Kernel)> {
    if !(cfg.lambda > 0.0) {
        return Err(Error::config("Lambda", "cutoff must be > 0"));
    }
    if cfg.p <= cfg.d as f64 / 2.0 - 1.0 {
        log::warn!("kernel exponent p = {} below the renormalizability threshold", cfg.p);
    }
    let m = grid.len();
    let scaled = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v / cfg.lambda).collect() };
    let chi: Vec<f64> = grid
        .points
        .iter()
        .map(|x| cfg.chi_choice.eval(&scaled(x)))
        .collect();
    let boson_factor: Vec<f64> = grid
        .points
        .iter()
        .map(|q| dispersion_a(q, cfg.m_b).powf(-cfg.p))
        .collect();
    let build = |species: KernelSpecies, coupling: f64| {
        Kernel::from_fn(species, m, |ik, iq| {
            let k = &grid.points[ik];
            let q = &grid.points[iq];
            let arg: Vec<f64> = match species {
                KernelSpecies::G1 => k.iter().zip(q).map(|(a, b)| a - b).collect(),
                KernelSpecies::G2 => k.iter().zip(q).map(|(a, b)| a + b).collect(),
            };
            let v = coupling * boson_factor[iq] * cfg.g_choice.eval(&arg) * chi[ik] * chi[iq];
            Complex64::new(v * grid.weight, 0.0)
        })
    };
    Ok((build(KernelSpecies::G1, cfg.h1), build(KernelSpecies::G2, cfg.h2)))
}

/// The pair of kernels together with the signature table
/// `ab* → G1`, `a*b → conj G1`, `a*b* → G2`, `ab → conj G2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub g1: Kernel,
    pub g2: Kernel,
}

impl KernelSet {
    pub fn new(g1: Kernel, g2: Kernel) -> Self {
        Self { g1, g2 }
    }

    pub fn for_signature(&self, s: Signature) -> DMatrix<Complex64> {
        match s {
            Signature::ABstar => self.g1.values.clone(),
            Signature::AstarB => self.g1.conj(),
            Signature::AstarBstar => self.g2.values.clone(),
            Signature::AB => self.g2.conj(),
        }
    }

    pub fn modes(&self) -> usize {
        self.g1.values.nrows()
    }
}

/// Largest grid momentum norm, used to report whether `χ(·/Λ)` saturates.
pub fn grid_radius(grid: &MomentumGrid) -> f64 {
    grid.points.iter().map(|p| norm(p)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion_a(&[0.0], 1.0), 1.0);
        assert_eq!(dispersion_b(&[0.0], 2.0), 2.0);
        assert_eq!(dispersion_a(&[3.0], 4.0), 5.0);
    }

    #[test]
    fn zero_coupling_gives_zero_kernel() {
        let cfg = ModelConfig {
            h2: 0.0,
            ..ModelConfig::default()
        };
        let grid = MomentumGrid::from_config(&cfg).unwrap();
        let (g1, g2) = build_kernels(&cfg, &grid).unwrap();
        assert!(g2.is_zero());
        assert!(!g1.is_zero());
    }

    #[test]
    fn single_point_value() {
        // One grid point at the origin: G1(0,0) = 1 * 1^(-1/2) * g(0) * χ(0)^2 = 1.
        let cfg = ModelConfig {
            m_b: 1.0,
            p: 0.5,
            grid_spacing: 0.7,
            grid_halfwidth: 0.3,
            grid_staggered: false,
            ..ModelConfig::default()
        };
        let grid = MomentumGrid::from_config(&cfg).unwrap();
        assert_eq!(grid.len(), 1);
        let (g1, _) = build_kernels(&cfg, &grid).unwrap();
        assert!((g1.values[(0, 0)].re / grid.weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indicator_saturates_when_lambda_covers_grid() {
        let cfg = ModelConfig {
            lambda: 5.0,
            grid_halfwidth: 2.0,
            grid_spacing: 0.5,
            ..ModelConfig::default()
        };
        let grid = MomentumGrid::from_config(&cfg).unwrap();
        assert!(grid
            .points
            .iter()
            .all(|p| cfg.chi_choice.eval(&[p[0] / cfg.lambda]) == 1.0));
    }

    #[test]
    fn rejects_nonpositive_cutoff() {
        let cfg = ModelConfig {
            lambda: -1.0,
            ..ModelConfig::default()
        };
        let grid = MomentumGrid::from_config(&ModelConfig::default()).unwrap();
        assert!(build_kernels(&cfg, &grid).is_err());
    }
}
