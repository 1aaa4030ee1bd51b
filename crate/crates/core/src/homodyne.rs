//! Phase-randomised homodyne detection binned on |y|.
//!
//! The response of `m` photons is the binomial mixture
//! `A_m(y) = sum_k C(m,k) eta^k (1-eta)^(m-k) a_k(y)^2`, and an `m`-photon
//! input lands in bin `[lo, hi)` of |y| with probability `2 ∫ A_m`.

use std::sync::{Arc, OnceLock};

use crate::error::{invalid, Result};
use crate::hermite::{derivative_from, hermite_functions, szego_g};
use crate::quad::{integrate, integrate_vec};
use crate::special::binomial_weights;

/// Highest photon number whose binned response is tabulated exactly.
pub const ORDER_EXACT: u32 = 200;
/// Highest photon number covered by the tabulated envelope.
pub const ORDER_ENVELOPE: u32 = 400;
/// Absolute quadrature tolerance for a single bin probability.
pub const BIN_TOL: f64 = 1e-10;

const PATCH_STEP: f64 = 1e-3;
const PATCH_SAFETY: f64 = 1.01;
/// `pi^{-1/2}`, an upper bound on every a_k(y)^2.
const SUP_HERMITE_SQ: f64 = 0.564_189_583_547_756_3;

/// Binned homodyne detector with efficiency `eta`.
#[derive(Debug, Clone)]
pub struct HomodyneDetector {
    efficiency: f64,
    edges: Vec<f64>,
    tables: Arc<OnceLock<Tables>>,
}

impl PartialEq for HomodyneDetector {
    fn eq(&self, other: &Self) -> bool {
        self.efficiency == other.efficiency && self.edges == other.edges
    }
}

/// Response tables shared by all designs on one detector.
#[derive(Debug)]
pub struct Tables {
    /// `response[m][j]`: probability that `m` photons land in bin `j`.
    pub response: Vec<Vec<f64>>,
    /// `envelope[m][j]`: upper bound on `response[m][j]`, for `m <= ORDER_ENVELOPE`.
    pub envelope: Vec<Vec<f64>>,
    /// Bound on the quadrature error of every `response` entry.
    pub allowance: f64,
    /// Patched sup of a_k^2 over `[0, y_max]`.
    pub patch: Vec<f64>,
}

impl HomodyneDetector {
    /// Builds a detector whose bins on |y| are delimited by `edges`, which
    /// must start at 0 and increase strictly up to `y_max`.
    pub fn new(efficiency: f64, edges: Vec<f64>) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(invalid(format!(
                "homodyne efficiency must be in (0,1], got {efficiency}"
            )));
        }
        if edges.len() < 2 {
            return Err(invalid("homodyne detector needs at least one bin"));
        }
        if edges[0] != 0.0 {
            return Err(invalid("first bin edge must be 0"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("bin edges must be finite and strictly increasing"));
        }
        Ok(Self {
            efficiency,
            edges,
            tables: Arc::new(OnceLock::new()),
        })
    }

    /// `bins` equal-width bins over `[0, y_max]`.
    pub fn uniform(efficiency: f64, y_max: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(y_max > 0.0) {
            return Err(invalid("need at least one bin and y_max > 0"));
        }
        let edges = (0..=bins).map(|j| y_max * j as f64 / bins as f64).collect();
        Self::new(efficiency, edges)
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn y_max(&self) -> f64 {
        *self.edges.last().expect("validated edges")
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin(&self, j: usize) -> (f64, f64) {
        (self.edges[j], self.edges[j + 1])
    }

    /// Density A_m(y).
    pub fn density(&self, m: u32, y: f64) -> f64 {
        homodyne_density(self.efficiency, m, y)
    }

    /// Upper bound on the probability mass any photon number can put in bin `j`.
    pub fn bin_mass_cap(&self, j: usize) -> f64 {
        let (lo, hi) = self.bin(j);
        (2.0 * (hi - lo) * SUP_HERMITE_SQ).min(1.0)
    }

    /// Lazily built response tables.
    pub fn tables(&self) -> &Tables {
        self.tables.get_or_init(|| Tables::build(self))
    }

    /// Binned response of `m` photons, from the tables when available.
    pub fn response(&self, m: u32, j: usize) -> f64 {
        if m <= ORDER_EXACT {
            self.tables().response[m as usize][j]
        } else {
            let (lo, hi) = self.bin(j);
            homodyne_bin_prob(self.efficiency, m, lo, hi).unwrap_or(f64::NAN)
        }
    }

    /// Bounds `(inf, sup)` of `v_m = sum_j beta_j P_m(bin_{s_j})` over `m > order`.
    ///
    /// Orders up to [`ORDER_EXACT`] use the tabulated responses widened by
    /// the quadrature allowance; orders up to [`ORDER_ENVELOPE`] use the
    /// binned Szegő envelope split by the sign of `beta`. The envelope sums
    /// must be monotone over their last 50 orders to certify what lies
    /// beyond; otherwise the crude per-bin mass cap is used instead.
    pub fn tail_range(&self, beta: &[f64], settings: &[usize], order: u32) -> (f64, f64) {
        let t = self.tables();
        let abs_beta: f64 = beta.iter().map(|b| b.abs()).sum();
        let widen = t.allowance * abs_beta;
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for m in (order + 1)..=ORDER_EXACT {
            let v: f64 = beta
                .iter()
                .zip(settings)
                .map(|(b, &j)| b * t.response[m as usize][j])
                .sum();
            sup = sup.max(v + widen);
            inf = inf.min(v - widen);
        }
        let start = (order + 1).max(ORDER_EXACT + 1);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for m in start..=ORDER_ENVELOPE {
            let row = &t.envelope[m as usize];
            let (mut p, mut n) = (0.0, 0.0);
            for (b, &j) in beta.iter().zip(settings) {
                if *b > 0.0 {
                    p += b * row[j];
                } else {
                    n += b * row[j];
                }
            }
            plus.push(p);
            minus.push(n);
        }
        let tail = plus.len().saturating_sub(50);
        let monotone = plus[tail..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12))
            && minus[tail..]
                .windows(2)
                .all(|w| w[1] >= w[0] * (1.0 + 1e-12));
        if monotone {
            sup = plus.iter().fold(sup, |a, &b| a.max(b));
            inf = minus.iter().fold(inf, |a, &b| a.min(b));
        } else {
            let (mut p, mut n) = (0.0, 0.0);
            for (b, &j) in beta.iter().zip(settings) {
                let cap = self.bin_mass_cap(j);
                if *b > 0.0 {
                    p += b * cap;
                } else {
                    n += b * cap;
                }
            }
            sup = sup.max(p);
            inf = inf.min(n);
        }
        (inf, sup)
    }
}

impl Tables {
    fn build(det: &HomodyneDetector) -> Tables {
        let y_max = det.y_max();
        let patch = envelope_patch(ORDER_ENVELOPE as usize, y_max);
        let bins = det.num_bins();
        let ke = ORDER_EXACT as usize;
        let kg = ORDER_ENVELOPE as usize;
        let max_piece = 1.0 / (2.0 * kg as f64 + 1.0).sqrt();
        let mut hermite_bins = vec![vec![0.0; bins]; ke + 1];
        let mut g_bins = vec![vec![0.0; bins]; kg + 1];
        let mut allowance: f64 = 0.0;
        for j in 0..bins {
            let (lo, hi) = det.bin(j);
            let a2 = integrate_vec(
                |y, out: &mut [f64]| {
                    let a = hermite_functions(ke, y);
                    for (o, v) in out.iter_mut().zip(&a) {
                        *o = v * v;
                    }
                },
                ke + 1,
                lo,
                hi,
                0.1 * BIN_TOL,
                max_piece,
            );
            for (k, r) in a2.iter().enumerate() {
                hermite_bins[k][j] = 2.0 * r.value;
                allowance = allowance.max(2.0 * r.error);
            }
            let g = integrate_vec(
                |y, out: &mut [f64]| {
                    let a = hermite_functions(kg, y);
                    for k in 0..=kg {
                        out[k] = patched_szego(k, y, &a, patch[k]);
                    }
                },
                kg + 1,
                lo,
                hi,
                1e-9,
                max_piece,
            );
            for (k, r) in g.iter().enumerate() {
                // The error estimate is added so the binned envelope stays an upper bound.
                g_bins[k][j] = 2.0 * (r.value + r.error);
            }
        }
        let eta = det.efficiency;
        let response = (0..=ORDER_EXACT)
            .map(|m| mix(&binomial_weights(m, eta), &hermite_bins, bins))
            .collect();
        let envelope = (0..=ORDER_ENVELOPE)
            .map(|m| mix(&binomial_weights(m, eta), &g_bins, bins))
            .collect();
        Tables {
            response,
            envelope,
            allowance: 2.0 * allowance + 1e-15,
            patch,
        }
    }
}

fn mix(w: &[f64], per_k: &[Vec<f64>], bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; bins];
    for (k, wk) in w.iter().enumerate() {
        if *wk == 0.0 {
            continue;
        }
        for j in 0..bins {
            out[j] += wk * per_k[k][j];
        }
    }
    out
}

/// g̃_k(y): the Szegő bound g_k capped by the sampled sup of a_k^2 when it
/// exists, the sampled sup alone otherwise.
fn patched_szego(k: usize, y: f64, a: &[f64], patch_k: f64) -> f64 {
    match szego_g(k, y, a[k], derivative_from(k, y, a)) {
        Some(g) => g.min(patch_k),
        None => patch_k,
    }
}

/// `1.01 * max_{0 <= y <= y_max} a_k(y)^2` for `k = 0..=max_k`, sampled on a
/// 1e-3 grid.
pub fn envelope_patch(max_k: usize, y_max: f64) -> Vec<f64> {
    let steps = (y_max / PATCH_STEP).ceil() as usize;
    let mut best = vec![0.0_f64; max_k + 1];
    for s in 0..=steps {
        let y = (s as f64 * PATCH_STEP).min(y_max);
        let a = hermite_functions(max_k, y);
        for (b, v) in best.iter_mut().zip(&a) {
            *b = b.max(v * v);
        }
    }
    best.into_iter()
        .map(|b| (b * PATCH_SAFETY).min(SUP_HERMITE_SQ))
        .collect()
}

/// Density A_m(y) of the quadrature outcome for `m` photons at efficiency `eta`.
pub fn homodyne_density(eta: f64, m: u32, y: f64) -> f64 {
    let a = hermite_functions(m as usize, y);
    binomial_weights(m, eta)
        .iter()
        .zip(&a)
        .map(|(w, v)| w * v * v)
        .sum()
}

/// Probability `2 ∫_lo^hi A_m(y) dy` that `m` photons give |y| in `[lo, hi]`.
/// `hi` may be infinite.
pub fn homodyne_bin_prob(eta: f64, m: u32, lo: f64, hi: f64) -> Result<f64> {
    if !(lo >= 0.0) || !(hi >= lo) || lo.is_infinite() {
        return Err(invalid(format!("malformed bin [{lo}, {hi}]")));
    }
    // Beyond the last turning point plus 12 the density is below e^{-70}.
    let cut = (2.0 * m as f64 + 1.0).sqrt() + 12.0;
    let hi = if hi > cut { cut.max(lo) } else { hi };
    let w = binomial_weights(m, eta);
    let max_piece = (1.0 / (2.0 * m as f64 + 1.0).sqrt()).min(2.0);
    let r = integrate(
        |y| {
            let a = hermite_functions(m as usize, y);
            w.iter().zip(&a).map(|(wk, v)| wk * v * v).sum::<f64>()
        },
        lo,
        hi,
        0.5 * BIN_TOL,
        max_piece,
    );
    Ok(2.0 * r.value)
}

/// Envelope G_m(y) >= A_m(y) built from the patched Szegő bounds.
pub fn homodyne_envelope(det: &HomodyneDetector, m: u32, y: f64) -> f64 {
    let y = y.abs();
    let patch_owned;
    let patch: &[f64] = if m <= ORDER_ENVELOPE {
        &det.tables().patch
    } else {
        patch_owned = envelope_patch(m as usize, det.y_max());
        &patch_owned
    };
    let a = hermite_functions(m as usize, y);
    let w = binomial_weights(m, det.efficiency);
    let mut total = 0.0;
    for (k, wk) in w.iter().enumerate() {
        if *wk == 0.0 {
            continue;
        }
        // The sampled sup only covers [0, y_max]; past it fall back to pi^{-1/2}.
        let cap = if y <= det.y_max() {
            patch[k]
        } else {
            SUP_HERMITE_SQ
        };
        total += wk * patched_szego(k, y, &a, cap);
    }
    total
}
