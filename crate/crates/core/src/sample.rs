//! Finite-shot sampling of measurement tables with a seeded generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Result};
use crate::table::{DetectorSpec, MeasurementTable};

/// Counts of a multinomial draw over `probs` plus an implicit remainder
/// outcome carrying `1 - sum(probs)`.
pub fn sample_multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        let c = if left == 0 || mass <= 0.0 {
            0
        } else {
            let cond = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, cond)
                .map(|d| d.sample(rng))
                .unwrap_or(0)
        };
        out.push(c);
        left -= c;
        mass -= p;
    }
    out
}

/// Empirical table from `shots` trials per configuration.
///
/// Homodyne rows are one multinomial draw over the bins (plus the overflow
/// beyond `y_max`); threshold entries are independent binomial draws.
pub fn sample_table(table: &MeasurementTable, shots: u64, seed: u64) -> Result<MeasurementTable> {
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shots as f64;
    let values = table
        .values
        .iter()
        .map(|row| match table.detector {
            DetectorSpec::Homodyne(_) => sample_multinomial(row, shots, &mut rng)
                .into_iter()
                .map(|c| c as f64 / n)
                .collect(),
            _ => row
                .iter()
                .map(|&p| sample_multinomial(&[p], shots, &mut rng)[0] as f64 / n)
                .collect(),
        })
        .collect();
    MeasurementTable::new(table.intensities.clone(), table.detector.clone(), values)
}

/// Empirical version of one probability vector.
pub fn sample_vector(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_multinomial(probs, shots, &mut rng)
        .into_iter()
        .map(|c| c as f64 / shots as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PureLossChannel;
    use crate::source::PoissonSource;
    use crate::threshold::ThresholdDetector;

    fn table() -> MeasurementTable {
        let source = PoissonSource::new(vec![1e-3, 1e-2, 0.5]).unwrap();
        let det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
        PureLossChannel::new(0.5)
            .unwrap()
            .forward_table(&source, &DetectorSpec::Threshold(det))
            .unwrap()
    }

    #[test]
    fn degenerate_single_shot() {
        assert_eq!(sample_vector(&[1.0, 0.0], 1, 3).unwrap(), vec![1.0, 0.0]);
        assert_eq!(sample_vector(&[0.0, 1.0], 1, 3).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn reproducible_per_seed() {
        let t = table();
        assert_eq!(
            sample_table(&t, 1000, 7).unwrap(),
            sample_table(&t, 1000, 7).unwrap()
        );
        assert_ne!(
            sample_table(&t, 1000, 7).unwrap(),
            sample_table(&t, 1000, 8).unwrap()
        );
    }

    #[test]
    fn frequencies_within_five_sigma() {
        let t = table();
        let shots = 1_000_000u64;
        let s = sample_table(&t, shots, 11).unwrap();
        for (r, e) in s.values.iter().zip(&t.values) {
            for (a, b) in r.iter().zip(e) {
                let sigma = (b * (1.0 - b) / shots as f64).sqrt();
                assert!((a - b).abs() <= 5.0 * sigma + 1.0 / shots as f64);
            }
        }
    }
}
