//! Shared fixtures for the criterion benches.

use renorm_core::ModelConfig;

/// Two staggered modes, two bosons at most: a 24-dimensional Fock space.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        grid_spacing: 1.0,
        grid_halfwidth: 0.5,
        grid_staggered: true,
        boson_max: Some(2),
        ..ModelConfig::default()
    }
}
