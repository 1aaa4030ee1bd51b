//! Exact forward models: channel photon statistics and the measurement
//! tables they produce through characterised devices.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::estimator::Receiver;
use crate::homodyne::HomodyneDetector;
use crate::source::PoissonSource;
use crate::special::{binomial, ln_factorial, pmf, poisson_cutoff};
use crate::table::{DetectorSpec, MeasurementTable};
use crate::threshold::ThresholdDetector;

/// Poisson series are summed until the remaining tail falls below this.
pub const SERIES_TAIL: f64 = 1e-16;

/// `C(n,m) t^m (1-t)^(n-m)`, zero for `m > n`.
pub fn loss_q(t: f64, m: u32, n: u32) -> f64 {
    if m > n {
        return 0.0;
    }
    binomial(n, m) * t.powi(m as i32) * (1.0 - t).powi((n - m) as i32)
}

/// Beam-splitter loss with transmittance `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureLossChannel {
    pub transmittance: f64,
}

impl PureLossChannel {
    pub fn new(transmittance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(invalid(format!(
                "transmittance must be in [0,1], got {transmittance}"
            )));
        }
        Ok(Self { transmittance })
    }

    pub fn q(&self, m: u32, n: u32) -> f64 {
        loss_q(self.transmittance, m, n)
    }

    /// Exact table over the source grid for a single-mode detector.
    pub fn forward_table(
        &self,
        source: &PoissonSource,
        detector: &DetectorSpec,
    ) -> Result<MeasurementTable> {
        forward_table(source, detector, |m, n| self.q(m, n))
    }
}

/// `f(x, y_j) = sum_n p_n(x) sum_m q(m|n) r_m(y_j)` for one setting.
pub fn forward_value<R, Q>(receiver: &R, setting: usize, x: f64, q: Q) -> f64
where
    R: Receiver<Outcome = u32>,
    Q: Fn(u32, u32) -> f64,
{
    let n_max = poisson_cutoff(x, SERIES_TAIL);
    let r: Vec<f64> = (0..=n_max).map(|m| receiver.response(setting, m)).collect();
    (0..=n_max)
        .map(|n| pmf(x, n) * (0..=n).map(|m| q(m, n) * r[m as usize]).sum::<f64>())
        .sum()
}

/// Exact table over the source grid for a single-mode channel `q(m|n)` that
/// never creates photons.
pub fn forward_table<Q>(
    source: &PoissonSource,
    detector: &DetectorSpec,
    q: Q,
) -> Result<MeasurementTable>
where
    Q: Fn(u32, u32) -> f64 + Sync,
{
    let xs = source.intensities().to_vec();
    let values: Vec<Vec<f64>> = match detector {
        DetectorSpec::Threshold(d) => rows(&xs, d, &q),
        DetectorSpec::Homodyne(d) => rows(&xs, d, &q),
        DetectorSpec::ThresholdPair(..) => {
            return Err(invalid(
                "single-mode forward model cannot drive a two-mode receiver",
            ));
        }
    };
    let values = values
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
        .collect();
    MeasurementTable::new(xs, detector.clone(), values)
}

fn rows<R, Q>(xs: &[f64], receiver: &R, q: &Q) -> Vec<Vec<f64>>
where
    R: Receiver<Outcome = u32>,
    Q: Fn(u32, u32) -> f64 + Sync,
{
    xs.par_iter()
        .map(|&x| {
            (0..receiver.num_settings())
                .map(|j| forward_value(receiver, j, x, q))
                .collect()
        })
        .collect()
}

/// Two-mode QKD channel: each photon independently survives with
/// probability `t` and, if it does, leaves in the wrong mode with
/// probability `e_ch`. Identical in every basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkdChannelModel {
    pub transmittance: f64,
    pub flip: f64,
}

impl QkdChannelModel {
    pub fn new(transmittance: f64, flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(invalid(format!(
                "transmittance must be in [0,1], got {transmittance}"
            )));
        }
        if !(0.0..=0.5).contains(&flip) {
            return Err(invalid(format!(
                "channel error must be in [0,0.5], got {flip}"
            )));
        }
        Ok(Self {
            transmittance,
            flip,
        })
    }

    /// Channel with `t = 10^{-loss/10}`.
    pub fn from_loss_db(loss_db: f64, flip: f64) -> Result<Self> {
        if !(loss_db >= 0.0) {
            return Err(invalid(format!(
                "loss must be nonnegative, got {loss_db} dB"
            )));
        }
        Self::new(loss_to_transmittance(loss_db), flip)
    }

    /// Probability of `k` photons in the correct mode and `l` in the wrong
    /// one given `n` sent.
    pub fn q(&self, k: u32, l: u32, n: u32) -> f64 {
        qkd_q(self, k, l, n)
    }

    /// Statistic `f^b` for bit `a`, intensity `mu` and attenuations
    /// `(nu_0, nu_1)` on the two detectors. `b[i]` is true for a click on
    /// detector `i`; bit `a` is encoded in mode `a`.
    pub fn forward_f(
        &self,
        detectors: &QkdDetectors,
        b: [bool; 2],
        a: usize,
        mu: f64,
        nu: [f64; 2],
    ) -> f64 {
        qkd_forward_f(self, detectors, b, a, mu, nu)
    }
}

/// `t = 10^{-dB/10}`.
pub fn loss_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Trinomial `n!/(k! l! (n-k-l)!) (t(1-e))^k (t e)^l (1-t)^(n-k-l)`.
pub fn qkd_q(channel: &QkdChannelModel, k: u32, l: u32, n: u32) -> f64 {
    if k + l > n {
        return 0.0;
    }
    let t = channel.transmittance;
    let e = channel.flip;
    let rest = n - k - l;
    let coef = (ln_factorial(n) - ln_factorial(k) - ln_factorial(l) - ln_factorial(rest)).exp();
    coef * (t * (1.0 - e)).powi(k as i32) * (t * e).powi(l as i32) * (1.0 - t).powi(rest as i32)
}

/// Threshold detectors on the two polarisation modes.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdDetectors {
    pub modes: [ThresholdDetector; 2],
}

impl QkdDetectors {
    pub fn new(first: ThresholdDetector, second: ThresholdDetector) -> Self {
        Self {
            modes: [first, second],
        }
    }

    fn response(&self, mode: usize, click: bool, nu: f64, m: u32) -> f64 {
        let r0 = self.modes[mode].no_click(nu, m);
        if click {
            1.0 - r0
        } else {
            r0
        }
    }
}

/// `f = sum_n p_n(mu) sum_{k+l<=n} q(k,l|n) r^{b_a}_k r^{b_{a xor 1}}_l`.
pub fn qkd_forward_f(
    channel: &QkdChannelModel,
    detectors: &QkdDetectors,
    b: [bool; 2],
    a: usize,
    mu: f64,
    nu: [f64; 2],
) -> f64 {
    let n_max = poisson_cutoff(mu, SERIES_TAIL);
    let (right, wrong) = (a, 1 - a);
    let r_right: Vec<f64> = (0..=n_max)
        .map(|m| detectors.response(right, b[right], nu[right], m))
        .collect();
    let r_wrong: Vec<f64> = (0..=n_max)
        .map(|m| detectors.response(wrong, b[wrong], nu[wrong], m))
        .collect();
    let mut total = 0.0;
    for n in 0..=n_max {
        let mut inner = 0.0;
        for k in 0..=n {
            for l in 0..=(n - k) {
                inner += qkd_q(channel, k, l, n) * r_right[k as usize] * r_wrong[l as usize];
            }
        }
        total += pmf(mu, n) * inner;
    }
    total.clamp(0.0, 1.0)
}

/// Tables the QKD estimator reads for one bit value: the joint no-click
/// table over attenuation pairs and the two single-detector marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct QkdTables {
    /// Bit value `a`: the photon is sent in mode `a`.
    pub bit: usize,
    pub pair: MeasurementTable,
    pub marginals: [MeasurementTable; 2],
}

impl QkdTables {
    /// Exact tables over the source grid and both attenuation grids.
    pub fn forward(
        channel: &QkdChannelModel,
        source: &PoissonSource,
        detectors: &QkdDetectors,
        bit: usize,
    ) -> Result<Self> {
        let xs = source.intensities().to_vec();
        let [d0, d1] = &detectors.modes;
        let top = [max_level(d0), max_level(d1)];
        let pair_values: Vec<Vec<f64>> = xs
            .par_iter()
            .map(|&mu| {
                d0.attenuations()
                    .iter()
                    .flat_map(|&n0| {
                        d1.attenuations().iter().map(move |&n1| {
                            qkd_forward_f(channel, detectors, [false, false], bit, mu, [n0, n1])
                        })
                    })
                    .collect()
            })
            .collect();
        let pair = MeasurementTable::new(
            xs.clone(),
            DetectorSpec::ThresholdPair(d0.clone(), d1.clone()),
            pair_values,
        )?;
        let marginal = |mode: usize| -> Result<MeasurementTable> {
            let det = &detectors.modes[mode];
            let values = xs
                .par_iter()
                .map(|&mu| {
                    det.attenuations()
                        .iter()
                        .map(|&nu| {
                            let mut setting = top;
                            setting[mode] = nu;
                            let mut b = [false; 2];
                            let f0 = qkd_forward_f(channel, detectors, b, bit, mu, setting);
                            b[1 - mode] = true;
                            let f1 = qkd_forward_f(channel, detectors, b, bit, mu, setting);
                            (f0 + f1).clamp(0.0, 1.0)
                        })
                        .collect()
                })
                .collect();
            MeasurementTable::new(xs.clone(), DetectorSpec::Threshold(det.clone()), values)
        };
        Ok(Self {
            bit,
            pair,
            marginals: [marginal(0)?, marginal(1)?],
        })
    }
}

fn max_level(d: &ThresholdDetector) -> f64 {
    d.attenuations().iter().copied().fold(0.0, f64::max)
}

/// Fluorescence scene for time-resolved homodyne counting.
#[derive(Debug, Clone, PartialEq)]
pub struct TcspcScene {
    /// Excitation time t_0 (ns).
    pub t0: f64,
    /// Decay time tau (ns).
    pub tau: f64,
    /// Time-bin duration T (ns).
    pub bin_width: f64,
    /// Excitation coefficient.
    pub excitation: f64,
    /// Start times of the time bins (ns).
    pub times: Vec<f64>,
}

impl TcspcScene {
    pub fn new(
        t0: f64,
        tau: f64,
        bin_width: f64,
        excitation: f64,
        times: Vec<f64>,
    ) -> Result<Self> {
        if !(tau > 0.0 && bin_width > 0.0) {
            return Err(invalid("decay time and bin width must be positive"));
        }
        if !(excitation >= 0.0) {
            return Err(invalid(format!(
                "excitation must be nonnegative, got {excitation}"
            )));
        }
        if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("time grid must be non-empty and increasing"));
        }
        Ok(Self {
            t0,
            tau,
            bin_width,
            excitation,
            times,
        })
    }

    /// Default scene: t_0 = 50 ns, tau = 100 ns, T = 5 ns, excitation 0.9,
    /// time bins starting every 5 ns from 0 to 495 ns.
    pub fn standard() -> Self {
        let times = (0..100).map(|k| 5.0 * k as f64).collect();
        Self {
            t0: 50.0,
            tau: 100.0,
            bin_width: 5.0,
            excitation: 0.9,
            times,
        }
    }

    /// Mean photon number in the bin starting at `t`.
    pub fn energy(&self, t: f64) -> f64 {
        if t < self.t0 {
            return 0.0;
        }
        self.excitation
            * (-(t - self.t0) / self.tau).exp()
            * (1.0 - (-self.bin_width / self.tau).exp())
    }

    /// Poisson photon-number distribution in the bin starting at `t`.
    pub fn q(&self, t: f64, n: u32) -> f64 {
        pmf(self.energy(t), n)
    }

    /// Per-bin homodyne masses `f_j = sum_n q_n P_n(bin_j)`.
    pub fn pdf(&self, t: f64, detector: &HomodyneDetector) -> Vec<f64> {
        let e = self.energy(t);
        let n_max = poisson_cutoff(e, SERIES_TAIL);
        (0..detector.num_bins())
            .map(|j| {
                (0..=n_max)
                    .map(|n| pmf(e, n) * detector.response(n, j))
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::homodyne_bin_prob;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_q_values() {
        assert_eq!(loss_q(0.3, 0, 0), 1.0);
        assert_abs_diff_eq!(loss_q(0.3, 1, 1), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(loss_q(0.5, 2, 3), 0.375, epsilon = 1e-15);
        assert_eq!(loss_q(0.5, 4, 3), 0.0);
    }

    #[test]
    fn trinomial_values() {
        let c = QkdChannelModel::new(0.5, 0.05).unwrap();
        assert_eq!(c.q(0, 0, 0), 1.0);
        assert_eq!(c.q(1, 0, 0), 0.0);
        assert_abs_diff_eq!(c.q(1, 0, 1), 0.475, epsilon = 1e-15);
        assert_abs_diff_eq!(c.q(1, 1, 2), 0.02375, epsilon = 1e-15);
        let total: f64 = (0..=6)
            .flat_map(|k| (0..=6 - k).map(move |l| (k, l)))
            .map(|(k, l)| c.q(k, l, 6))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    fn detectors(p_dc: f64) -> QkdDetectors {
        let d = ThresholdDetector::new(p_dc, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
        QkdDetectors::new(d.clone(), d)
    }

    #[test]
    fn forward_f_limits() {
        let c = QkdChannelModel::from_loss_db(10.0, 0.05).unwrap();
        assert_abs_diff_eq!(
            c.forward_f(&detectors(0.0), [false, false], 0, 0.0, [1.0, 1.0]),
            1.0,
            epsilon = 1e-15
        );
        let p = 1e-3;
        assert_abs_diff_eq!(
            c.forward_f(&detectors(p), [false, false], 1, 0.0, [1.0, 1.0]),
            (1.0 - p) * (1.0 - p),
            epsilon = 1e-15
        );
    }

    #[test]
    fn forward_f_matches_split_poisson() {
        // Independent splitting of a Poisson beam gives independent Poisson modes.
        let c = QkdChannelModel::from_loss_db(10.0, 0.05).unwrap();
        let det = detectors(1e-6);
        let (mu, nu) = (0.5, [0.96, 0.98]);
        for a in 0..2 {
            let mean_right = mu * c.transmittance * (1.0 - c.flip) * nu[a];
            let mean_wrong = mu * c.transmittance * c.flip * nu[1 - a];
            let exact = (1.0 - 1e-6f64).powi(2) * (-mean_right - mean_wrong).exp();
            assert_abs_diff_eq!(
                c.forward_f(&det, [false, false], a, mu, nu),
                exact,
                epsilon = 1e-14
            );
        }
        let total: f64 = [[false, false], [false, true], [true, false], [true, true]]
            .iter()
            .map(|&b| c.forward_f(&det, b, 0, mu, nu))
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn pure_loss_threshold_table_closed_form() {
        let source = PoissonSource::new(vec![1e-3, 1e-2, 0.5]).unwrap();
        let det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
        let table = PureLossChannel::new(0.1)
            .unwrap()
            .forward_table(&source, &DetectorSpec::Threshold(det.clone()))
            .unwrap();
        for (i, &x) in source.intensities().iter().enumerate() {
            for (j, &nu) in det.attenuations().iter().enumerate() {
                let exact = (1.0 - 1e-6) * (-x * 0.1 * nu).exp();
                assert_abs_diff_eq!(table.get(i, j).unwrap(), exact, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn tcspc_energy_and_q() {
        let s = TcspcScene::standard();
        let e0 = 0.9 * (1.0 - (-0.05f64).exp());
        assert_abs_diff_eq!(s.energy(50.0), e0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            s.energy(150.0) / s.energy(50.0),
            (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert_eq!(s.energy(45.0), 0.0);
        assert_eq!(s.q(0.0, 0), 1.0);
        assert_abs_diff_eq!(s.q(50.0, 1), e0 * (-e0).exp(), epsilon = 1e-15);
    }

    #[test]
    fn tcspc_pdf_matches_direct_quadrature() {
        let s = TcspcScene::standard();
        let det = HomodyneDetector::uniform(1.0, 5.0, 16).unwrap();
        let f = s.pdf(50.0, &det);
        let e = s.energy(50.0);
        for (j, fj) in f.iter().enumerate() {
            let (lo, hi) = det.bin(j);
            let direct: f64 = (0..=12)
                .map(|n| pmf(e, n) * homodyne_bin_prob(1.0, n, lo, hi).unwrap())
                .sum();
            assert_abs_diff_eq!(*fj, direct, epsilon = 1e-8);
        }
        assert!(f.iter().sum::<f64>() <= 1.0);
        let vac = s.pdf(0.0, &det);
        for (j, v) in vac.iter().enumerate() {
            assert_abs_diff_eq!(*v, det.response(0, j), epsilon = 1e-15);
        }
    }
}
