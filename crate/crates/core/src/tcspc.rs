//! Time-resolved photon statistics from per-time-bin homodyne data.
//!
//! Each time bin is estimated on its own from the folded quadrature
//! histogram. The probability of a conclusive event (at least one photon) is
//! the complement of the vacuum interval, and the arrival-time distribution
//! follows from Bayes' rule with a uniform prior over the time bins.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::TcspcScene;
use crate::error::{invalid, Error, Result};
use crate::estimator::{estimate_output_targets, EstimatorConfig, IntervalEstimate};
use crate::homodyne::HomodyneDetector;
use crate::qkd::Interval;
use crate::sample::sample_vector;

/// Default detector truncation order for the time-bin designs.
pub const DEFAULT_ORDER: u32 = 5;

/// Intervals on `q_n` for each requested photon number, from one time bin.
pub fn estimate_time_bin(
    f: &[f64],
    detector: &HomodyneDetector,
    targets: &[u32],
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<Vec<IntervalEstimate<u32>>> {
    estimate_output_targets(f, detector, targets, order, cfg)
}

/// Interval on the probability of at least one photon, given the vacuum interval.
pub fn conclusive_probability(q0: Interval) -> Interval {
    Interval {
        lo: (1.0 - q0.hi).clamp(0.0, 1.0),
        hi: (1.0 - q0.lo).clamp(0.0, 1.0),
    }
}

/// Bayes-normalised arrival distribution `q^t / sum_t' q^t'`.
///
/// Each endpoint pairs the bin's own extreme with the opposite extremes of
/// all other bins. A zero numerator gives a zero endpoint. Fails when every
/// upper bound is zero (no conclusive event is possible).
pub fn arrival_distribution(qc: &[Interval]) -> Result<Vec<Interval>> {
    if qc
        .iter()
        .any(|q| !(0.0 <= q.lo && q.lo <= q.hi && q.hi <= 1.0))
    {
        return Err(invalid("conclusive intervals must lie in [0, 1]"));
    }
    let sum_lo: f64 = qc.iter().map(|q| q.lo).sum();
    let sum_hi: f64 = qc.iter().map(|q| q.hi).sum();
    if !(sum_hi > 0.0) {
        return Err(Error::Undefined(
            "no time bin admits a conclusive event".into(),
        ));
    }
    Ok(qc
        .iter()
        .map(|q| {
            let others_hi = (sum_hi - q.hi).max(0.0);
            let others_lo = (sum_lo - q.lo).max(0.0);
            let lo = if q.lo > 0.0 {
                q.lo / (q.lo + others_hi)
            } else {
                0.0
            };
            let hi = if q.hi > 0.0 {
                q.hi / (q.hi + others_lo)
            } else {
                0.0
            };
            Interval {
                lo: lo.clamp(0.0, 1.0),
                hi: hi.clamp(lo, 1.0),
            }
        })
        .collect())
}

/// One time bin of a [`TcspcReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct TcspcRow {
    /// Start of the time bin (ns).
    pub t_ns: f64,
    pub q0: Interval,
    pub q1: Interval,
    pub q1_exact: f64,
    pub q2: Interval,
    pub q2_exact: f64,
    /// Conclusive-event probability.
    pub qc: Interval,
    pub qc_exact: f64,
    /// Arrival-time probability given a conclusive event.
    pub pt: Interval,
    pub pt_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcspcReport {
    pub rows: Vec<TcspcRow>,
}

impl TcspcReport {
    pub const HEADER: &'static str =
        "t_ns,q1_lo,q1_hi,q1_exact,q2_lo,q2_hi,q2_exact,qc_lo,qc_hi,pt_lo,pt_hi,pt_exact";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let cells = [
                r.t_ns, r.q1.lo, r.q1.hi, r.q1_exact, r.q2.lo, r.q2.hi, r.q2_exact, r.qc.lo,
                r.qc.hi, r.pt.lo, r.pt.hi, r.pt_exact,
            ];
            let line: Vec<String> = cells.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn mean_width(&self, pick: impl Fn(&TcspcRow) -> Interval) -> f64 {
        self.rows.iter().map(|r| pick(r).width()).sum::<f64>() / self.rows.len().max(1) as f64
    }
}

fn clamp_unit(e: &IntervalEstimate<u32>) -> Interval {
    Interval {
        lo: e.lower,
        hi: e.upper.max(e.lower),
    }
}

/// Full pipeline over the scene's time grid: forward histograms, per-bin
/// intervals on `q_0`, `q_1`, `q_2` (in parallel), conclusive probabilities
/// and the arrival distribution, with the exact scene values attached.
pub fn run_tcspc(
    scene: &TcspcScene,
    detector: &HomodyneDetector,
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<TcspcReport> {
    run_with(scene, detector, order, cfg, &|_, t| {
        Ok(scene.pdf(t, detector))
    })
}

/// As [`run_tcspc`], with each histogram replaced by the frequencies of
/// `shots` draws. Time bin `k` uses seed `seed + k`, so the report does not
/// depend on thread scheduling.
pub fn run_tcspc_sampled(
    scene: &TcspcScene,
    detector: &HomodyneDetector,
    order: u32,
    cfg: &EstimatorConfig,
    shots: u64,
    seed: u64,
) -> Result<TcspcReport> {
    run_with(scene, detector, order, cfg, &|k, t| {
        sample_vector(&scene.pdf(t, detector), shots, seed.wrapping_add(k as u64))
    })
}

type Histogram<'a> = dyn Fn(usize, f64) -> Result<Vec<f64>> + Sync + 'a;

fn run_with(
    scene: &TcspcScene,
    detector: &HomodyneDetector,
    order: u32,
    cfg: &EstimatorConfig,
    histogram: &Histogram<'_>,
) -> Result<TcspcReport> {
    let bins: Vec<[Interval; 3]> = scene
        .times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let f = histogram(k, t)?;
            let est = estimate_time_bin(&f, detector, &[0, 1, 2], order, cfg)?;
            Ok([
                clamp_unit(&est[0]),
                clamp_unit(&est[1]),
                clamp_unit(&est[2]),
            ])
        })
        .collect::<Result<_>>()?;
    let qc: Vec<Interval> = bins.iter().map(|b| conclusive_probability(b[0])).collect();
    let pt = arrival_distribution(&qc)?;
    let qc_exact: Vec<f64> = scene.times.iter().map(|&t| 1.0 - scene.q(t, 0)).collect();
    let total: f64 = qc_exact.iter().sum();
    let rows = scene
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| TcspcRow {
            t_ns: t,
            q0: bins[k][0],
            q1: bins[k][1],
            q1_exact: scene.q(t, 1),
            q2: bins[k][2],
            q2_exact: scene.q(t, 2),
            qc: qc[k],
            qc_exact: qc_exact[k],
            pt: pt[k],
            pt_exact: if total > 0.0 {
                qc_exact[k] / total
            } else {
                0.0
            },
        })
        .collect();
    Ok(TcspcReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    #[test]
    fn complement_arithmetic() {
        assert_eq!(conclusive_probability(iv(1.0, 1.0)), iv(0.0, 0.0));
        let c = conclusive_probability(iv(0.9, 0.95));
        assert_abs_diff_eq!(c.lo, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.hi, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn uniform_and_single_bin() {
        let p = arrival_distribution(&[iv(0.2, 0.2); 4]).unwrap();
        for q in p {
            assert_abs_diff_eq!(q.lo, 0.25, epsilon = 1e-15);
            assert_abs_diff_eq!(q.hi, 0.25, epsilon = 1e-15);
        }
        let p = arrival_distribution(&[iv(0.0, 0.0), iv(0.3, 0.3), iv(0.0, 0.0)]).unwrap();
        assert_eq!(p[1], iv(1.0, 1.0));
        assert_eq!(p[0], iv(0.0, 0.0));
    }

    #[test]
    fn all_zero_is_undefined() {
        assert!(matches!(
            arrival_distribution(&[iv(0.0, 0.0); 3]),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn vacuum_scene_bin() {
        let det = HomodyneDetector::uniform(1.0, 5.0, 16).unwrap();
        let scene = TcspcScene::standard();
        let f = scene.pdf(0.0, &det);
        let est = estimate_time_bin(
            &f,
            &det,
            &[0, 1],
            DEFAULT_ORDER,
            &EstimatorConfig::new(0, DEFAULT_ORDER),
        )
        .unwrap();
        assert!(est[0].contains(1.0));
        assert!(est[1].contains(0.0));
    }

    proptest! {
        #[test]
        fn bayes_intervals_contain_point_ratio(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..0.2), 2..12),
            pick in proptest::collection::vec(0.0f64..1.0, 12),
        ) {
            let qc: Vec<Interval> = raw.iter().map(|&(a, w)| iv(a * 0.8, (a * 0.8 + w).min(1.0))).collect();
            let p = arrival_distribution(&qc).unwrap();
            let point: Vec<f64> = qc.iter().zip(&pick).map(|(q, s)| q.lo + s * q.width()).collect();
            let total: f64 = point.iter().sum();
            prop_assume!(total > 0.0);
            for (k, v) in point.iter().enumerate() {
                let r = v / total;
                prop_assert!(p[k].lo <= r + 1e-12 && r <= p[k].hi + 1e-12);
            }
        }
    }
}
