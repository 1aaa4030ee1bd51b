//! Characterised laser source with a grid of selectable intensities.

use crate::error::{invalid, Result};
use crate::special;

/// Poisson (phase-randomised coherent) source with its intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSource {
    intensities: Vec<f64>,
}

impl PoissonSource {
    /// Builds a source from strictly increasing, non-negative intensities.
    pub fn new(intensities: Vec<f64>) -> Result<Self> {
        if intensities.is_empty() {
            return Err(invalid("source needs at least one intensity"));
        }
        if intensities.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("intensities must be finite and >= 0"));
        }
        if intensities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("intensities must be strictly increasing"));
        }
        Ok(Self { intensities })
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn x_max(&self) -> f64 {
        *self.intensities.last().expect("non-empty grid")
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// Emission probability p_n(x) at an arbitrary intensity.
    pub fn pmf(&self, x: f64, n: u32) -> f64 {
        special::pmf(x, n)
    }
}
