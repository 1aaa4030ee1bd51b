//! Key-rate certification for polarisation BB84 and six-state QKD with
//! decoy intensities at the source and decoy attenuations at the receiver.
//!
//! The single-photon channel statistics q(kl|1) are bounded from the
//! no-click-on-both statistics, then turned into single-photon error rates,
//! a conditional-entropy bound and a lower bound on the asymptotic key rate.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{QkdChannelModel, QkdDetectors, QkdTables};
use crate::error::{invalid, Error, Result};
use crate::estimator::{
    estimate_output_only, estimate_targets, EstimatorConfig, Occupancy, ThresholdPair,
};
use crate::source::PoissonSource;
use crate::special::{h2, pmf, shannon_entropy};
use crate::threshold::ThresholdDetector;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(invalid(format!(
                "interval endpoints out of order: [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// `[0, 1]`.
    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn scale(&self, c: f64) -> Self {
        Self {
            lo: self.lo * c,
            hi: self.hi * c,
        }
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Bb84,
    SixState,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::SixState => "six-state",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "six-state" | "sixstate" | "six_state" | "6state" => Ok(Protocol::SixState),
            other => Err(invalid(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }
}

/// Single-photon statistics in one basis, indexed by Alice's bit `a`:
/// the photon leaves in the encoded mode (`correct`) or the other (`wrong`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisStats {
    pub correct: [Interval; 2],
    pub wrong: [Interval; 2],
}

/// Single-photon statistics in all bases plus the vacuum term q(00|0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonStats {
    pub bases: [BasisStats; 3],
    pub vacuum: Interval,
}

impl SinglePhotonStats {
    pub fn basis(&self, b: Basis) -> &BasisStats {
        &self.bases[b.index()]
    }
}

/// Click weights `1 - r_k^0(nu_0) r_l^0(nu_1)` of a single arriving photon,
/// split into the (correct, wrong) parts of `p_det`.
fn detection_parts(stats: &BasisStats, det: &QkdDetectors, nu: [f64; 2]) -> (Interval, Interval) {
    let no_click = |mode: usize, m: u32| det.modes[mode].no_click(nu[mode], m);
    let mut correct = Interval::point(0.0);
    let mut wrong = Interval::point(0.0);
    for a in 0..2 {
        let (right, other) = (a, 1 - a);
        let c_right = 1.0 - no_click(right, 1) * no_click(other, 0);
        let c_wrong = 1.0 - no_click(right, 0) * no_click(other, 1);
        correct = correct.add(&stats.correct[a].scale(0.5 * c_right));
        wrong = wrong.add(&stats.wrong[a].scale(0.5 * c_wrong));
    }
    (correct, wrong)
}

/// Probability that a single photon entering the channel is detected.
pub fn qubit_detection_prob(stats: &BasisStats, det: &QkdDetectors, nu: [f64; 2]) -> Interval {
    let (c, w) = detection_parts(stats, det, nu);
    c.add(&w)
}

/// Single-photon error rate `e = w / (w + c)`, bounded through the monotone
/// structure of the fraction.
pub fn single_photon_error_rate(
    stats: &BasisStats,
    det: &QkdDetectors,
    nu: [f64; 2],
) -> Result<Interval> {
    let (c, w) = detection_parts(stats, det, nu);
    if !(c.lo + w.lo > 0.0) {
        return Err(Error::Undefined(
            "single-photon detection probability may vanish".into(),
        ));
    }
    let frac = |num: f64, other: f64| if num <= 0.0 { 0.0 } else { num / (num + other) };
    Ok(Interval {
        lo: frac(w.lo, c.hi),
        hi: frac(w.hi, c.lo),
    })
}

/// Solution of `l0+l1 = 1-e_Z, l0+l2 = 1-e_X, l0+l3 = 1-e_Y, sum l = 1`.
pub fn solve_lambda(e_x: f64, e_y: f64, e_z: f64) -> Result<[f64; 4]> {
    let lambda = lambda_unchecked(e_x, e_y, e_z);
    if lambda.iter().any(|&l| l < -1e-12) {
        return Err(Error::InadmissibleRates(format!(
            "error rates ({e_x}, {e_y}, {e_z}) give lambda {lambda:?}"
        )));
    }
    Ok(lambda)
}

fn lambda_unchecked(e_x: f64, e_y: f64, e_z: f64) -> [f64; 4] {
    let l0 = 1.0 - 0.5 * (e_x + e_y + e_z);
    [l0, 1.0 - e_z - l0, 1.0 - e_x - l0, 1.0 - e_y - l0]
}

/// Conditional entropy H(A|E) at a point.
pub fn conditional_entropy(protocol: Protocol, e_x: f64, e_y: f64, e_z: f64) -> Result<f64> {
    match protocol {
        Protocol::Bb84 => Ok(1.0 - h2(e_x)),
        Protocol::SixState => {
            let l = solve_lambda(e_x, e_y, e_z)?.map(|v| v.max(0.0));
            Ok(1.0 + h2(e_z) - shannon_entropy(&l))
        }
    }
}

/// Lower bound on H(A|E) over a box of error rates, clamped to [0, 1]
/// (the entropy of a classical bit given quantum side information is never
/// negative).
///
/// BB84 uses the largest `h2` over the `e_X` interval. For six-state,
/// `h2(e_Z)` is bounded by its endpoint minimum (concave), and `H(lambda)`,
/// concave in the error rates, by its tangent plane at the box centre.
pub fn entropy_lower_bound(protocol: Protocol, e: [Interval; 3]) -> f64 {
    let [ex, _, ez] = e;
    let h = match protocol {
        Protocol::Bb84 => 1.0 - h2(0.5f64.clamp(ex.lo, ex.hi)),
        Protocol::SixState => {
            let h2_min = h2(ez.lo).min(h2(ez.hi));
            1.0 + h2_min - max_lambda_entropy(e)
        }
    };
    h.clamp(0.0, 1.0)
}

fn max_lambda_entropy(e: [Interval; 3]) -> f64 {
    let c = lambda_unchecked(e[0].mid(), e[1].mid(), e[2].mid());
    if c.iter().any(|&l| l <= 0.0) {
        return 2.0;
    }
    // d lambda / d e_X, d e_Y, d e_Z.
    let grads = [
        [-0.5, 0.5, -0.5, 0.5],
        [-0.5, 0.5, 0.5, -0.5],
        [-0.5, -0.5, 0.5, 0.5],
    ];
    let slope = |g: &[f64; 4]| -> f64 { -g.iter().zip(&c).map(|(d, l)| d * l.log2()).sum::<f64>() };
    let spread: f64 = grads
        .iter()
        .zip(&e)
        .map(|(g, iv)| slope(g).abs() * 0.5 * iv.width())
        .sum();
    (shannon_entropy(&c) + spread).min(2.0)
}

/// Gain `Q = 1 - sum_a f^{00}/2` and error `E = 1 - sum_a f^{correct}/(2Q)`
/// from the no-click and correct-click-only probabilities per bit value.
pub fn gain_qber(no_click: [f64; 2], correct_only: [f64; 2]) -> Result<(f64, f64)> {
    let q = 1.0 - 0.5 * (no_click[0] + no_click[1]);
    if !(q > 0.0) {
        return Err(Error::Undefined(
            "zero gain leaves the error rate undefined".into(),
        ));
    }
    let e = 1.0 - 0.5 * (correct_only[0] + correct_only[1]) / q;
    Ok((q, e.clamp(0.0, 1.0)))
}

/// Upper bound on the single-photon error rate from the standard weak
/// decoy-state analysis (vacuum + weak decoy lower bounds on Y_0, Y_1).
///
/// `intensities` must be increasing; the largest is the signal, the next
/// the weak decoy and (with three or more) the smallest the second decoy.
pub fn decoy_baseline_error(intensities: &[f64], gains: &[f64], qbers: &[f64]) -> Result<f64> {
    let k = intensities.len();
    if k < 2 || gains.len() != k || qbers.len() != k {
        return Err(invalid(
            "decoy baseline needs gains and error rates for at least two intensities",
        ));
    }
    let mu = intensities[k - 1];
    let nu1 = intensities[k - 2];
    let qe = |i: usize| gains[i] * intensities[i].exp();
    let (y0, y1) = if k >= 3 {
        let nu2 = intensities[0];
        let y0 = ((nu1 * qe(0) - nu2 * qe(k - 2)) / (nu1 - nu2)).max(0.0);
        let denom = mu * nu1 - mu * nu2 - nu1 * nu1 + nu2 * nu2;
        let y1 = mu / denom
            * (qe(k - 2) - qe(0) - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (qe(k - 1) - y0));
        (y0, y1)
    } else {
        // No second decoy: Y_0 is only known to lie in [0, Q_nu e^nu], and
        // the Y_1 bound decreases in Y_0.
        let y0_hi = qe(k - 2);
        let y1 = mu / (mu * nu1 - nu1 * nu1)
            * (qe(k - 2)
                - nu1 * nu1 / (mu * mu) * qe(k - 1)
                - (mu * mu - nu1 * nu1) / (mu * mu) * y0_hi);
        (0.0, y1)
    };
    let denom = nu1 * y1;
    if !(denom > 0.0) {
        return Ok(1.0);
    }
    Ok(((qbers[k - 2] * qe(k - 2) - 0.5 * y0) / denom).clamp(0.0, 1.0))
}

/// Certified key-rate bound and its ingredients at one loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    pub loss_db: f64,
    pub protocol: Protocol,
    /// Lower bound on the key rate per pulse.
    pub key_rate: f64,
    pub gain: f64,
    pub qber: f64,
    /// Single-photon error rates in X, Y, Z.
    pub errors: [Interval; 3],
    pub p_det: Interval,
    /// Lambda vector at the upper error endpoints, when admissible.
    pub lambda: Option<[f64; 4]>,
    /// Lower bound on H(A|E).
    pub entropy: f64,
    pub vacuum_term: f64,
    pub single_photon_term: f64,
    pub leakage: f64,
    /// Decoy-state baseline upper bound on the single-photon error rate.
    pub baseline_e1: f64,
}

/// Inputs of [`key_rate`] other than the estimated statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeySetting {
    pub mu: f64,
    pub nu: [f64; 2],
    pub gain: f64,
    pub qber: f64,
}

/// `K = p_0 q(00|0)_lo (1 - r_0 r_0) + p_1 p_det_lo H_lo - Q h2(E)`, with
/// rates computed in the key basis Z.
pub fn key_rate(
    stats: &SinglePhotonStats,
    det: &QkdDetectors,
    setting: &KeySetting,
    protocol: Protocol,
) -> (f64, [Interval; 3], Interval, f64, [f64; 3]) {
    let nu = setting.nu;
    let errors = Basis::ALL
        .map(|b| single_photon_error_rate(stats.basis(b), det, nu).unwrap_or(Interval::unit()));
    let p_det = qubit_detection_prob(stats.basis(Basis::Z), det, nu);
    let h = entropy_lower_bound(protocol, errors);
    let r00 = det.modes[0].no_click(nu[0], 0) * det.modes[1].no_click(nu[1], 0);
    let vacuum = pmf(setting.mu, 0) * stats.vacuum.lo.max(0.0) * (1.0 - r00);
    let single = pmf(setting.mu, 1) * p_det.lo.max(0.0) * h;
    let leak = setting.gain * h2(setting.qber);
    (
        vacuum + single - leak,
        errors,
        p_det,
        h,
        [vacuum, single, leak],
    )
}

/// QKD link with decoy intensities and decoy attenuation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdScenario {
    pub intensities: Vec<f64>,
    pub levels: Vec<f64>,
    pub dark_count: f64,
    pub channel_error: f64,
    pub source_order: u32,
    pub detector_order: u32,
}

impl Default for QkdScenario {
    fn default() -> Self {
        Self {
            intensities: vec![1e-3, 1e-2, 0.5],
            levels: vec![0.94, 0.96, 0.98, 1.0],
            dark_count: 1e-6,
            channel_error: 0.05,
            source_order: 2,
            detector_order: 3,
        }
    }
}

impl QkdScenario {
    pub fn source(&self) -> Result<PoissonSource> {
        PoissonSource::new(self.intensities.clone())
    }

    pub fn detectors(&self) -> Result<QkdDetectors> {
        let d = ThresholdDetector::new(self.dark_count, 1.0, self.levels.clone())?;
        Ok(QkdDetectors::new(d.clone(), d))
    }

    fn config(&self) -> EstimatorConfig {
        EstimatorConfig::new(self.source_order, self.detector_order)
    }

    /// Key setting: highest intensity and highest attenuation on both detectors.
    fn key_nu(&self) -> f64 {
        self.levels.iter().copied().fold(0.0, f64::max)
    }

    /// Statistics for bit value `a` from its tables: `(correct, wrong, vacuum)`.
    pub fn estimate_bit(&self, tables: &QkdTables) -> Result<(Interval, Interval, Interval)> {
        let source = self.source()?;
        let [d0, d1] = match &tables.pair.detector {
            crate::table::DetectorSpec::ThresholdPair(a, b) => [a.clone(), b.clone()],
            _ => return Err(invalid("QKD estimation needs a threshold-pair table")),
        };
        let pair = ThresholdPair::new(d0.clone(), d1.clone());
        let cfg = self.config();
        let occupancy = qkd_occupancy(tables, &pair, &cfg)?;
        let (right, wrong) = if tables.bit == 0 {
            ((1, 0), (0, 1))
        } else {
            ((0, 1), (1, 0))
        };
        let targets = [(1, right), (1, wrong), (0, (0, 0))];
        let est = estimate_targets(
            &tables.pair,
            &source,
            &pair,
            &targets,
            &cfg,
            Some(&occupancy),
        )?;
        let iv = |k: usize| Interval {
            lo: est[k].lower,
            hi: est[k].upper,
        };
        Ok((iv(0), iv(1), iv(2)))
    }

    /// Statistics for all bases. The channel model acts identically in every
    /// basis, so one basis is estimated and shared.
    pub fn estimate_stats(&self, channel: &QkdChannelModel) -> Result<SinglePhotonStats> {
        let source = self.source()?;
        let det = self.detectors()?;
        let per_bit = (0..2)
            .into_par_iter()
            .map(|a| {
                QkdTables::forward(channel, &source, &det, a).and_then(|t| self.estimate_bit(&t))
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = BasisStats {
            correct: [per_bit[0].0, per_bit[1].0],
            wrong: [per_bit[0].1, per_bit[1].1],
        };
        let vacuum = Interval {
            lo: 0.5 * (per_bit[0].2.lo + per_bit[1].2.lo),
            hi: 0.5 * (per_bit[0].2.hi + per_bit[1].2.hi),
        };
        Ok(SinglePhotonStats {
            bases: [basis; 3],
            vacuum,
        })
    }

    /// Gain and error rate at intensity `mu` with the key attenuations.
    pub fn observables(&self, channel: &QkdChannelModel, mu: f64) -> Result<(f64, f64)> {
        let det = self.detectors()?;
        let nu = [self.key_nu(); 2];
        let no_click = [0, 1].map(|a| channel.forward_f(&det, [false, false], a, mu, nu));
        let correct = [0, 1].map(|a| {
            let mut b = [false; 2];
            b[a] = true;
            channel.forward_f(&det, b, a, mu, nu)
        });
        gain_qber(no_click, correct)
    }

    /// Reports for each protocol at one loss value.
    pub fn run(&self, loss_db: f64, protocols: &[Protocol]) -> Result<Vec<KeyRateReport>> {
        let channel = QkdChannelModel::from_loss_db(loss_db, self.channel_error)?;
        let stats = self.estimate_stats(&channel)?;
        let det = self.detectors()?;
        let obs = self
            .intensities
            .iter()
            .map(|&mu| self.observables(&channel, mu))
            .collect::<Result<Vec<_>>>()?;
        let gains: Vec<f64> = obs.iter().map(|o| o.0).collect();
        let qbers: Vec<f64> = obs.iter().map(|o| o.1).collect();
        let baseline = decoy_baseline_error(&self.intensities, &gains, &qbers)?;
        let key = obs.len() - 1;
        let setting = KeySetting {
            mu: self.intensities[key],
            nu: [self.key_nu(); 2],
            gain: gains[key],
            qber: qbers[key],
        };
        Ok(protocols
            .iter()
            .map(|&protocol| {
                let (k, errors, p_det, entropy, terms) = key_rate(&stats, &det, &setting, protocol);
                KeyRateReport {
                    loss_db,
                    protocol,
                    key_rate: k,
                    gain: setting.gain,
                    qber: setting.qber,
                    errors,
                    p_det,
                    lambda: solve_lambda(errors[0].hi, errors[1].hi, errors[2].hi).ok(),
                    entropy,
                    vacuum_term: terms[0],
                    single_photon_term: terms[1],
                    leakage: terms[2],
                    baseline_e1: baseline,
                }
            })
            .collect())
    }

    /// Reports over a list of losses, in input order.
    pub fn sweep(&self, losses: &[f64], protocols: &[Protocol]) -> Result<Vec<KeyRateReport>> {
        let per_loss = losses
            .par_iter()
            .map(|&l| self.run(l, protocols))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_loss.into_iter().flatten().collect())
    }
}

/// Occupancy bounds for the two-mode receiver: per-mode bounds from the
/// single-detector marginals and the any-photon bound from the joint table.
pub fn qkd_occupancy(
    tables: &QkdTables,
    pair: &ThresholdPair,
    cfg: &EstimatorConfig,
) -> Result<Occupancy> {
    let modes = tables
        .marginals
        .iter()
        .map(|t| {
            let det = match &t.detector {
                crate::table::DetectorSpec::Threshold(d) => d,
                _ => {
                    return Err(invalid(
                        "marginal tables must be single threshold detectors",
                    ))
                }
            };
            let order = det.attenuations().len() as u32 - 1;
            t.values
                .iter()
                .map(|row| {
                    estimate_output_only(row, det, 0, order, cfg)
                        .map(|e| (1.0 - e.lower).clamp(0.0, 1.0))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let order = pair
        .first
        .attenuations()
        .len()
        .min(pair.second.attenuations().len()) as u32
        - 1;
    let any = tables
        .pair
        .values
        .iter()
        .map(|row| {
            estimate_output_only(row, pair, (0, 0), order, cfg)
                .map(|e| (1.0 - e.lower).clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Occupancy { modes, any })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_matches_linear_solve() {
        for (ex, ey, ez) in [
            (0.0, 0.0, 0.0),
            (0.05, 0.05, 0.05),
            (0.06, 0.04, 0.07),
            (0.3, 0.25, 0.2),
        ] {
            let a = vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![1.0, 0.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ];
            let x = linalg::solve(&a, &[1.0 - ez, 1.0 - ex, 1.0 - ey, 1.0]).unwrap();
            let l = solve_lambda(ex, ey, ez).unwrap();
            for (u, v) in l.iter().zip(&x) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(l.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
        let l = solve_lambda(0.05, 0.05, 0.05).unwrap();
        for (u, v) in l.iter().zip(&[0.925, 0.025, 0.025, 0.025]) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
        assert!(matches!(
            solve_lambda(0.5, 0.0, 0.0),
            Err(Error::InadmissibleRates(_))
        ));
    }

    #[test]
    fn entropy_limits() {
        assert_eq!(
            conditional_entropy(Protocol::Bb84, 0.0, 0.0, 0.0).unwrap(),
            1.0
        );
        assert_eq!(
            conditional_entropy(Protocol::SixState, 0.0, 0.0, 0.0).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(
            conditional_entropy(Protocol::Bb84, 0.5, 0.0, 0.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let l = [0.925, 0.025, 0.025, 0.025];
        let expected = 1.0 + h2(0.05) - shannon_entropy(&l);
        assert_abs_diff_eq!(
            conditional_entropy(Protocol::SixState, 0.05, 0.05, 0.05).unwrap(),
            expected,
            epsilon = 1e-14
        );
    }

    #[test]
    fn box_bound_below_every_point() {
        let e = [
            Interval::new(0.045, 0.052).unwrap(),
            Interval::new(0.047, 0.055).unwrap(),
            Interval::new(0.049, 0.051).unwrap(),
        ];
        let lb = entropy_lower_bound(Protocol::SixState, e);
        for i in 0..=10 {
            for j in 0..=10 {
                for k in 0..=10 {
                    let p = |iv: &Interval, s: usize| iv.lo + iv.width() * s as f64 / 10.0;
                    let h = conditional_entropy(
                        Protocol::SixState,
                        p(&e[0], i),
                        p(&e[1], j),
                        p(&e[2], k),
                    )
                    .unwrap();
                    assert!(lb <= h + 1e-15);
                }
            }
        }
        assert!(lb > entropy_lower_bound(Protocol::Bb84, e));
    }

    fn stats(correct: f64, wrong: f64) -> BasisStats {
        BasisStats {
            correct: [Interval::point(correct); 2],
            wrong: [Interval::point(wrong); 2],
        }
    }

    fn perfect() -> QkdDetectors {
        let d = ThresholdDetector::new(0.0, 1.0, vec![1.0]).unwrap();
        QkdDetectors::new(d.clone(), d)
    }

    #[test]
    fn detection_and_error_limits() {
        let det = perfect();
        assert_eq!(
            qubit_detection_prob(&stats(0.0, 0.0), &det, [1.0, 1.0]),
            Interval::point(0.0)
        );
        let mut s = stats(0.0, 0.0);
        s.correct[0] = Interval::point(1.0);
        assert_eq!(qubit_detection_prob(&s, &det, [1.0, 1.0]).lo, 0.5);
        let e = single_photon_error_rate(&stats(0.3, 0.0), &det, [1.0, 1.0]).unwrap();
        assert_eq!(e, Interval::point(0.0));
        let e = single_photon_error_rate(&stats(0.2, 0.2), &det, [1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e.lo, 0.5, epsilon = 1e-15);
        let t = 0.5;
        let e = single_photon_error_rate(&stats(t * 0.95, t * 0.05), &det, [1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e.hi, 0.05, epsilon = 1e-15);
        assert!(single_photon_error_rate(&stats(0.0, 0.0), &det, [1.0, 1.0]).is_err());
    }

    #[test]
    fn gain_qber_limits() {
        assert!(gain_qber([1.0, 1.0], [0.0, 0.0]).is_err());
        let (q, e) = gain_qber([0.6, 0.6], [0.4, 0.4]).unwrap();
        assert_abs_diff_eq!(q, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn decoy_baseline_noiseless_is_zero() {
        // Lossless, errorless, no dark counts: Q = 1 - e^{-x}, E = 0.
        let xs = [1e-3, 1e-2, 0.5];
        let gains: Vec<f64> = xs.iter().map(|x: &f64| 1.0 - (-x).exp()).collect();
        let e1 = decoy_baseline_error(&xs, &gains, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(e1, 0.0, epsilon = 1e-10);
        assert_eq!(
            decoy_baseline_error(&xs, &[0.0; 3], &[0.0; 3]).unwrap(),
            1.0
        );
    }
}
