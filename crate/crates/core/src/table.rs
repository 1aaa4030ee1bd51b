//! Observed statistics f(x_i, y_j) over the source and detector grids.

use crate::error::{invalid, Error, Result};
use crate::homodyne::HomodyneDetector;
use crate::threshold::ThresholdDetector;

/// Detector side of a measurement table; fixes the meaning of the columns.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorSpec {
    /// Columns are attenuation levels; entries are no-click probabilities.
    Threshold(ThresholdDetector),
    /// Columns are bins on |y|; entries are probability masses.
    Homodyne(HomodyneDetector),
    /// Columns are attenuation pairs `(nu_0, nu_1)` in row-major order over
    /// the two level lists; entries are probabilities of no click on both.
    ThresholdPair(ThresholdDetector, ThresholdDetector),
}

impl DetectorSpec {
    pub fn num_settings(&self) -> usize {
        match self {
            DetectorSpec::Threshold(d) => d.attenuations().len(),
            DetectorSpec::Homodyne(d) => d.num_bins(),
            DetectorSpec::ThresholdPair(a, b) => a.attenuations().len() * b.attenuations().len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DetectorSpec::Threshold(_) => "threshold",
            DetectorSpec::Homodyne(_) => "homodyne",
            DetectorSpec::ThresholdPair(..) => "threshold-pair",
        }
    }
}

/// Measured (or simulated) statistics, one row per source intensity and one
/// column per detector setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTable {
    pub intensities: Vec<f64>,
    pub detector: DetectorSpec,
    pub values: Vec<Vec<f64>>,
}

impl MeasurementTable {
    /// Validates shape and ranges.
    pub fn new(
        intensities: Vec<f64>,
        detector: DetectorSpec,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let cols = detector.num_settings();
        if values.len() != intensities.len() {
            return Err(Error::IncompleteData(format!(
                "{} rows for {} intensities",
                values.len(),
                intensities.len()
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::IncompleteData(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("row {i} has entries outside [0,1]")));
            }
            if matches!(detector, DetectorSpec::Homodyne(_)) && row.iter().sum::<f64>() > 1.0 + 1e-9
            {
                return Err(invalid(format!("row {i} bin masses sum above 1")));
            }
        }
        Ok(Self {
            intensities,
            detector,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.detector.num_settings()
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.values
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .ok_or_else(|| Error::IncompleteData(format!("no entry at ({i}, {j})")))
    }

    /// Row index of an intensity present in the table.
    pub fn row_of(&self, x: f64) -> Option<usize> {
        self.intensities.iter().position(|&v| v == x)
    }

    /// Every entry multiplied by `c` (for linearity checks); no range check.
    pub fn scaled(&self, c: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|r| r.iter().map(|v| v * c).collect())
            .collect();
        Self {
            intensities: self.intensities.clone(),
            detector: self.detector.clone(),
            values,
        }
    }
}
