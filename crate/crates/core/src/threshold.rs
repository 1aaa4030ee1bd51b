//! Click/no-click detector with dark counts and a bank of attenuators.

use crate::error::{invalid, Result};

/// Threshold detector preceded by a variable attenuator.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDetector {
    dark_count: f64,
    efficiency: f64,
    attenuations: Vec<f64>,
}

impl ThresholdDetector {
    pub fn new(dark_count: f64, efficiency: f64, attenuations: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&dark_count) {
            return Err(invalid(format!(
                "dark count probability must be in [0,1), got {dark_count}"
            )));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(invalid(format!(
                "detector efficiency must be in (0,1], got {efficiency}"
            )));
        }
        if attenuations.is_empty() {
            return Err(invalid("detector needs at least one attenuation level"));
        }
        if attenuations.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(invalid("attenuation levels must lie in (0,1]"));
        }
        if attenuations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("attenuation levels must be strictly increasing"));
        }
        Ok(Self {
            dark_count,
            efficiency,
            attenuations,
        })
    }

    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn attenuations(&self) -> &[f64] {
        &self.attenuations
    }

    /// Per-photon survival factor `1 - nu * eta_det`.
    pub fn survival(&self, nu: f64) -> f64 {
        1.0 - nu * self.efficiency
    }

    /// No-click probability `(1 - p_dc)(1 - nu eta_det)^m` without checks.
    pub fn no_click(&self, nu: f64, m: u32) -> f64 {
        (1.0 - self.dark_count) * pow(self.survival(nu), m)
    }
}

pub(crate) fn pow(z: f64, m: u32) -> f64 {
    if m <= i32::MAX as u32 {
        z.powi(m as i32)
    } else {
        z.powf(m as f64)
    }
}

/// No-click probability of a threshold detector behind attenuation `nu`.
pub fn threshold_no_click(det: &ThresholdDetector, nu: f64, m: u32) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(invalid(format!("attenuation must be in (0,1], got {nu}")));
    }
    Ok(det.no_click(nu, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        let d = ThresholdDetector::new(1e-6, 1.0, vec![0.5, 1.0]).unwrap();
        assert_eq!(threshold_no_click(&d, 0.5, 0).unwrap(), 1.0 - 1e-6);
        assert_relative_eq!(
            threshold_no_click(&d, 0.5, 2).unwrap(),
            0.24999975,
            epsilon = 1e-15
        );
        let perfect = ThresholdDetector::new(0.0, 1.0, vec![1.0]).unwrap();
        assert_eq!(threshold_no_click(&perfect, 1.0, 3).unwrap(), 0.0);
        assert!(threshold_no_click(&d, 0.0, 1).is_err());
        assert!(threshold_no_click(&d, 1.5, 1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ThresholdDetector::new(1.0, 1.0, vec![1.0]).is_err());
        assert!(ThresholdDetector::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(ThresholdDetector::new(0.0, 1.0, vec![1.0, 1.0]).is_err());
    }
}
