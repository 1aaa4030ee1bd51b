//! Detector-side designs: coefficients beta isolating one output photon
//! number, plus certified ranges of the response combination outside the
//! truncation box.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::homodyne::{HomodyneDetector, ORDER_EXACT};
use crate::linalg;
use crate::threshold::{pow, ThresholdDetector};

/// Solved detector design.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorDesign {
    /// Detector settings (table columns) used.
    pub settings: Vec<usize>,
    pub beta: Vec<f64>,
    /// Truncation order m0 (per mode for multi-mode receivers).
    pub order: u32,
    /// Largest deviation of `v` from the Kronecker delta inside the box.
    pub box_residual: f64,
    /// Infimum of `v` over outcomes outside the box.
    pub tail_inf: f64,
    /// Supremum of `v` over outcomes outside the box.
    pub tail_sup: f64,
}

impl DetectorDesign {
    /// `v⊕ = max(0, sup v)` over outcomes outside the box.
    pub fn v_plus(&self) -> f64 {
        self.tail_sup.max(0.0)
    }

    /// `v⊖ = min(0, inf v)` over outcomes outside the box.
    pub fn v_minus(&self) -> f64 {
        self.tail_inf.min(0.0)
    }

    pub fn v_abs(&self) -> f64 {
        self.v_plus().max(-self.v_minus())
    }
}

/// A characterised measurement device seen through its setting grid.
pub trait Receiver: Sync {
    /// Photon-number outcome (one count per mode).
    type Outcome: Copy + PartialEq + Debug + Send + Sync;

    fn num_settings(&self) -> usize;

    /// Response r_m(y) of setting `setting` to outcome `m`.
    fn response(&self, setting: usize, outcome: Self::Outcome) -> f64;

    /// Outcomes inside the truncation box of the given order.
    fn box_outcomes(&self, order: u32) -> Vec<Self::Outcome>;

    /// Smallest order whose box contains the outcome.
    fn order_of(&self, outcome: Self::Outcome) -> u32;

    /// Modes that hold at least one photon in this outcome.
    fn occupied_modes(&self, outcome: Self::Outcome) -> Vec<usize>;

    fn vacuum(&self) -> Self::Outcome;

    /// Admissible setting subsets for a design of the given order. With
    /// `search == false` a single canonical subset is returned.
    fn setting_subsets(&self, order: u32, search: bool) -> Result<Vec<Vec<usize>>>;

    /// Solves for beta with `sum_j beta_j r_m(y_j) = delta_{m, target}` on
    /// the box of the given order and bounds `v` outside it.
    fn design(
        &self,
        settings: &[usize],
        target: Self::Outcome,
        order: u32,
    ) -> Result<DetectorDesign>;

    /// Supremum of the response of `setting` over outcomes of total order
    /// above `above` (or over all outcomes when `above` is `None`).
    fn response_sup(&self, setting: usize, above: Option<u32>) -> f64;
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn subsets_of(n: usize, order: u32, search: bool) -> Result<Vec<Vec<usize>>> {
    let k = order as usize + 1;
    if n < k {
        return Err(Error::DesignRejected(format!(
            "order {order} needs {k} detector settings, only {n} available"
        )));
    }
    Ok(if search {
        combinations(n, k)
    } else {
        vec![(0..k).collect()]
    })
}

fn check_target(target: u32, order: u32) -> Result<()> {
    if target > order {
        return Err(Error::DesignRejected(format!(
            "target {target} exceeds truncation order {order}"
        )));
    }
    Ok(())
}

/// `(inf, sup)` of `c sum_j beta_j z_j^m` over `m > order`. Orders past the
/// enumerated ones lie between the negative and positive parts of the sum.
fn geometric_tail_range(c: f64, beta: &[f64], z: &[f64], order: u32) -> (f64, f64) {
    let mut pw: Vec<f64> = z.iter().map(|&zj| pow(zj, order + 1)).collect();
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    let parts = |pw: &[f64]| {
        let pos: f64 = beta.iter().zip(pw).map(|(b, p)| b.max(0.0) * p).sum();
        let neg: f64 = beta.iter().zip(pw).map(|(b, p)| b.min(0.0) * p).sum();
        (c * neg, c * pos)
    };
    for _ in 0..1_000_000 {
        let v: f64 = c * beta.iter().zip(&pw).map(|(b, p)| b * p).sum::<f64>();
        inf = inf.min(v);
        sup = sup.max(v);
        for (p, zj) in pw.iter_mut().zip(z) {
            *p *= zj;
        }
        let (neg, pos) = parts(&pw);
        if pos - neg <= 1e-300 || pos - neg <= 1e-17 * sup.abs().max(inf.abs()) {
            return (inf.min(neg), sup.max(pos));
        }
    }
    let (neg, pos) = parts(&pw);
    (inf.min(neg), sup.max(pos))
}

fn solve_square(rows: Vec<Vec<f64>>, target: u32) -> Result<Vec<f64>> {
    let mut e = vec![0.0; rows.len()];
    e[target as usize] = 1.0;
    linalg::solve(&rows, &e)
}

fn box_residual_1d(rows: &[Vec<f64>], beta: &[f64], target: u32) -> f64 {
    rows.iter()
        .enumerate()
        .map(|(m, r)| {
            let v: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
            (v - if m as u32 == target { 1.0 } else { 0.0 }).abs()
        })
        .fold(0.0, f64::max)
}

impl ThresholdDetector {
    /// Coefficients over the given attenuation levels isolating `target`.
    pub fn solve_coefficients(&self, levels: &[f64], target: u32, order: u32) -> Result<Vec<f64>> {
        check_target(target, order)?;
        if levels.len() != order as usize + 1 {
            return Err(Error::DesignRejected(format!(
                "order {order} needs exactly {} levels",
                order + 1
            )));
        }
        let rows = (0..=order)
            .map(|m| levels.iter().map(|&nu| self.no_click(nu, m)).collect())
            .collect();
        solve_square(rows, target)
    }
}

impl Receiver for ThresholdDetector {
    type Outcome = u32;

    fn num_settings(&self) -> usize {
        self.attenuations().len()
    }

    fn response(&self, setting: usize, m: u32) -> f64 {
        self.no_click(self.attenuations()[setting], m)
    }

    fn box_outcomes(&self, order: u32) -> Vec<u32> {
        (0..=order).collect()
    }

    fn order_of(&self, m: u32) -> u32 {
        m
    }

    fn occupied_modes(&self, m: u32) -> Vec<usize> {
        if m > 0 {
            vec![0]
        } else {
            vec![]
        }
    }

    fn vacuum(&self) -> u32 {
        0
    }

    fn setting_subsets(&self, order: u32, search: bool) -> Result<Vec<Vec<usize>>> {
        subsets_of(self.num_settings(), order, search)
    }

    fn design(&self, settings: &[usize], target: u32, order: u32) -> Result<DetectorDesign> {
        let levels: Vec<f64> = settings.iter().map(|&j| self.attenuations()[j]).collect();
        let beta = self.solve_coefficients(&levels, target, order)?;
        let rows: Vec<Vec<f64>> = (0..=order)
            .map(|m| levels.iter().map(|&nu| self.no_click(nu, m)).collect())
            .collect();
        let box_residual = box_residual_1d(&rows, &beta, target);
        let z: Vec<f64> = levels.iter().map(|&nu| self.survival(nu)).collect();
        let (tail_inf, tail_sup) = geometric_tail_range(1.0 - self.dark_count(), &beta, &z, order);
        Ok(DetectorDesign {
            settings: settings.to_vec(),
            beta,
            order,
            box_residual,
            tail_inf,
            tail_sup,
        })
    }

    fn response_sup(&self, setting: usize, above: Option<u32>) -> f64 {
        let nu = self.attenuations()[setting];
        match above {
            None => 1.0 - self.dark_count(),
            Some(m) => self.no_click(nu, m + 1),
        }
    }
}

impl HomodyneDetector {
    /// Coefficients over the given bins isolating `target`; with more bins
    /// than `order + 1` the minimum-norm solution is returned.
    pub fn solve_coefficients(&self, bins: &[usize], target: u32, order: u32) -> Result<Vec<f64>> {
        check_target(target, order)?;
        if order >= ORDER_EXACT {
            return Err(Error::DesignRejected(format!(
                "homodyne order must stay below {ORDER_EXACT}"
            )));
        }
        if bins.len() < order as usize + 1 {
            return Err(Error::DesignRejected(format!(
                "order {order} needs at least {} bins",
                order + 1
            )));
        }
        let rows: Vec<Vec<f64>> = (0..=order)
            .map(|m| bins.iter().map(|&j| self.response(m, j)).collect())
            .collect();
        if bins.len() == rows.len() {
            solve_square(rows, target)
        } else {
            let mut e = vec![0.0; rows.len()];
            e[target as usize] = 1.0;
            linalg::min_norm_solve(&rows, &e)
        }
    }
}

impl Receiver for HomodyneDetector {
    type Outcome = u32;

    fn num_settings(&self) -> usize {
        self.num_bins()
    }

    fn response(&self, setting: usize, m: u32) -> f64 {
        HomodyneDetector::response(self, m, setting)
    }

    fn box_outcomes(&self, order: u32) -> Vec<u32> {
        (0..=order).collect()
    }

    fn order_of(&self, m: u32) -> u32 {
        m
    }

    fn occupied_modes(&self, m: u32) -> Vec<usize> {
        if m > 0 {
            vec![0]
        } else {
            vec![]
        }
    }

    fn vacuum(&self) -> u32 {
        0
    }

    fn setting_subsets(&self, order: u32, _search: bool) -> Result<Vec<Vec<usize>>> {
        // All bins at once: the minimum-norm design uses every bin.
        let n = self.num_bins();
        if n < order as usize + 1 {
            return Err(Error::DesignRejected(format!(
                "order {order} needs at least {} bins",
                order + 1
            )));
        }
        Ok(vec![(0..n).collect()])
    }

    fn design(&self, settings: &[usize], target: u32, order: u32) -> Result<DetectorDesign> {
        let beta = self.solve_coefficients(settings, target, order)?;
        let rows: Vec<Vec<f64>> = (0..=order)
            .map(|m| settings.iter().map(|&j| self.response(m, j)).collect())
            .collect();
        let abs_beta: f64 = beta.iter().map(|b| b.abs()).sum();
        let box_residual =
            box_residual_1d(&rows, &beta, target) + self.tables().allowance * abs_beta;
        let (tail_inf, tail_sup) = self.tail_range(&beta, settings, order);
        Ok(DetectorDesign {
            settings: settings.to_vec(),
            beta,
            order,
            box_residual,
            tail_inf,
            tail_sup,
        })
    }

    fn response_sup(&self, setting: usize, above: Option<u32>) -> f64 {
        match above {
            None => self.bin_mass_cap(setting),
            Some(m) => self.tail_range(&[1.0], &[setting], m).1.clamp(0.0, 1.0),
        }
    }
}

/// Two threshold detectors read jointly through their no-click-on-both
/// statistic; outcomes are photon pairs `(k, l)` in the two modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPair {
    pub first: ThresholdDetector,
    pub second: ThresholdDetector,
}

impl ThresholdPair {
    pub fn new(first: ThresholdDetector, second: ThresholdDetector) -> Self {
        Self { first, second }
    }

    fn split(&self, settings: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let n1 = self.second.num_settings();
        let mut s0: Vec<usize> = settings.iter().map(|j| j / n1).collect();
        let mut s1: Vec<usize> = settings.iter().map(|j| j % n1).collect();
        s0.sort_unstable();
        s0.dedup();
        s1.sort_unstable();
        s1.dedup();
        let product: Vec<usize> = s0
            .iter()
            .flat_map(|a| s1.iter().map(move |b| a * n1 + b))
            .collect();
        if product != settings {
            return Err(Error::DesignRejected(
                "pair settings must form a product grid in row-major order".into(),
            ));
        }
        Ok((s0, s1))
    }
}

impl Receiver for ThresholdPair {
    type Outcome = (u32, u32);

    fn num_settings(&self) -> usize {
        self.first.num_settings() * self.second.num_settings()
    }

    fn response(&self, setting: usize, (k, l): (u32, u32)) -> f64 {
        let n1 = self.second.num_settings();
        Receiver::response(&self.first, setting / n1, k)
            * Receiver::response(&self.second, setting % n1, l)
    }

    fn box_outcomes(&self, order: u32) -> Vec<(u32, u32)> {
        (0..=order)
            .flat_map(|k| (0..=order).map(move |l| (k, l)))
            .collect()
    }

    fn order_of(&self, (k, l): (u32, u32)) -> u32 {
        k.max(l)
    }

    fn occupied_modes(&self, (k, l): (u32, u32)) -> Vec<usize> {
        let mut m = Vec::new();
        if k > 0 {
            m.push(0);
        }
        if l > 0 {
            m.push(1);
        }
        m
    }

    fn vacuum(&self) -> (u32, u32) {
        (0, 0)
    }

    fn setting_subsets(&self, order: u32, search: bool) -> Result<Vec<Vec<usize>>> {
        let n1 = self.second.num_settings();
        let a = subsets_of(self.first.num_settings(), order, search)?;
        let b = subsets_of(n1, order, search)?;
        Ok(a.iter()
            .flat_map(|s0| {
                b.iter().map(move |s1| {
                    s0.iter()
                        .flat_map(|x| s1.iter().map(move |y| x * n1 + y))
                        .collect()
                })
            })
            .collect())
    }

    fn design(&self, settings: &[usize], (k, l): (u32, u32), order: u32) -> Result<DetectorDesign> {
        let (s0, s1) = self.split(settings)?;
        let d0 = self.first.design(&s0, k, order)?;
        let d1 = self.second.design(&s1, l, order)?;
        let beta: Vec<f64> = d0
            .beta
            .iter()
            .flat_map(|a| d1.beta.iter().map(move |b| a * b))
            .collect();
        let v0: Vec<f64> = (0..=order)
            .map(|m| inner(&self.first, &s0, &d0.beta, m))
            .collect();
        let v1: Vec<f64> = (0..=order)
            .map(|m| inner(&self.second, &s1, &d1.beta, m))
            .collect();
        let mut box_residual: f64 = 0.0;
        for (a, va) in v0.iter().enumerate() {
            for (b, vb) in v1.iter().enumerate() {
                let delta = if a as u32 == k && b as u32 == l {
                    1.0
                } else {
                    0.0
                };
                box_residual = box_residual.max((va * vb - delta).abs());
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut hull = |p: f64| {
            lo = lo.min(p);
            hi = hi.max(p);
        };
        for &va in &v0 {
            hull(va * d1.tail_inf);
            hull(va * d1.tail_sup);
        }
        for &vb in &v1 {
            hull(vb * d0.tail_inf);
            hull(vb * d0.tail_sup);
        }
        for a in [d0.tail_inf, d0.tail_sup] {
            for b in [d1.tail_inf, d1.tail_sup] {
                hull(a * b);
            }
        }
        Ok(DetectorDesign {
            settings: settings.to_vec(),
            beta,
            order,
            box_residual,
            tail_inf: lo,
            tail_sup: hi,
        })
    }

    fn response_sup(&self, setting: usize, above: Option<u32>) -> f64 {
        let n1 = self.second.num_settings();
        let (j0, j1) = (setting / n1, setting % n1);
        match above {
            None => self.first.response_sup(j0, None) * self.second.response_sup(j1, None),
            // Outside the box of order m one of the two modes exceeds m.
            Some(m) => {
                let a = self.first.response_sup(j0, Some(m)) * self.second.response_sup(j1, None);
                let b = self.first.response_sup(j0, None) * self.second.response_sup(j1, Some(m));
                a.max(b)
            }
        }
    }
}

fn inner(det: &ThresholdDetector, settings: &[usize], beta: &[f64], m: u32) -> f64 {
    settings
        .iter()
        .zip(beta)
        .map(|(&j, b)| b * Receiver::response(det, j, m))
        .sum()
}
