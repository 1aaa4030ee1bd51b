//! Source-side designs: coefficients alpha over a subset of intensities and
//! the bounds on the remainder they leave above the truncation order.

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{pmf, tail};

/// Solved source design over a subset of table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDesign {
    /// Table rows (intensities) used.
    pub rows: Vec<usize>,
    pub points: Vec<f64>,
    pub alpha: Vec<f64>,
    pub target: u32,
    /// Truncation order n0.
    pub order: u32,
    /// `sum_{n <= n0} |u_n - delta_{n, n*}|` of the solved system.
    pub box_residual: f64,
}

/// Range of `u_n / p_n(x_ref)` over `n > n0`, with `x_ref` the largest
/// design intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRange {
    /// Table row of `x_ref`.
    pub row: usize,
    pub inf: f64,
    pub sup: f64,
}

impl RatioRange {
    pub fn abs(&self) -> f64 {
        self.inf.abs().max(self.sup.abs())
    }
}

/// Coefficients alpha with `sum_i alpha_i p_n(x_i) = delta_{n, target}` for `n <= order`.
pub fn solve_source_coefficients(points: &[f64], target: u32, order: u32) -> Result<Vec<f64>> {
    if target > order {
        return Err(Error::DesignRejected(format!(
            "target {target} exceeds truncation order {order}"
        )));
    }
    if points.len() != order as usize + 1 {
        return Err(Error::DesignRejected(format!(
            "order {order} needs exactly {} intensities",
            order + 1
        )));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DesignRejected(
            "design intensities must be distinct and increasing".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..=order)
        .map(|n| points.iter().map(|&x| pmf(x, n)).collect())
        .collect();
    let mut e = vec![0.0; rows.len()];
    e[target as usize] = 1.0;
    linalg::solve(&rows, &e)
}

/// Sign-constancy horizon N* = max(10 (n0 + 1), 200).
pub fn sign_horizon(order: u32) -> u32 {
    (10 * (order + 1)).max(200)
}

impl SourceDesign {
    /// Solves the design on the given rows. The largest intensity must not
    /// exceed the order, which keeps the Poisson weights decreasing in `n`
    /// beyond the truncation.
    pub fn new(rows: Vec<usize>, points: Vec<f64>, target: u32, order: u32) -> Result<Self> {
        if let Some(&x_max) = points.last() {
            if x_max > order as f64 {
                return Err(Error::DesignRejected(format!(
                    "largest intensity {x_max} exceeds truncation order {order}"
                )));
            }
        }
        let alpha = solve_source_coefficients(&points, target, order)?;
        let mut design = Self {
            rows,
            points,
            alpha,
            target,
            order,
            box_residual: 0.0,
        };
        design.box_residual = (0..=order)
            .map(|n| (design.u(n) - if n == target { 1.0 } else { 0.0 }).abs())
            .sum();
        Ok(design)
    }

    /// `u_n = sum_i alpha_i p_n(x_i)`.
    pub fn u(&self, n: u32) -> f64 {
        self.alpha
            .iter()
            .zip(&self.points)
            .map(|(a, &x)| a * pmf(x, n))
            .sum()
    }

    fn x_max(&self) -> f64 {
        *self.points.last().expect("non-empty design")
    }

    /// `u_n / p_n(x_max)` computed without underflow.
    fn ratio(&self, n: u32) -> f64 {
        let xm = self.x_max();
        self.alpha
            .iter()
            .zip(&self.points)
            .map(|(a, &x)| {
                if x == xm {
                    *a
                } else if x == 0.0 {
                    0.0
                } else {
                    a * (xm - x).exp() * (x / xm).powi(n as i32)
                }
            })
            .sum()
    }

    /// `sum_{i != max} |alpha_i| e^{x_max - x_i} (x_i / x_max)^n`, which
    /// bounds `|u_n / p_n(x_max) - alpha_max|` for every order at or above `n`.
    fn ratio_tail(&self, n: u32) -> f64 {
        let xm = self.x_max();
        self.alpha
            .iter()
            .zip(&self.points)
            .filter(|(_, &x)| x != xm && x > 0.0)
            .map(|(a, &x)| a.abs() * (xm - x).exp() * (x / xm).powi(n as i32))
            .sum()
    }

    /// Upper bound on `sum_{n > n0} |u_n|`.
    pub fn abs_tail(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.points)
            .map(|(a, &x)| a.abs() * tail(x, self.order))
            .sum()
    }

    /// Interval on `R_{n0} = sum_{n > n0} u_n q(m*|n)` using only `0 <= q <= 1`.
    ///
    /// When `u_n` keeps one sign over `(n0, N*]` and the largest-intensity
    /// term dominates at `N*` (hence beyond), the remainder lies between 0
    /// and `S = sum_i alpha_i tail(x_i, n0)`. Otherwise each checked `u_n` is
    /// bounded separately and the rest by `sum_i |alpha_i| tail(x_i, N*)`.
    pub fn residual_bounds(&self) -> (f64, f64) {
        if self.alpha.iter().all(|&a| a == 0.0) || self.x_max() == 0.0 {
            return (0.0, 0.0);
        }
        let horizon = sign_horizon(self.order);
        let a_max = *self.alpha.last().expect("non-empty design");
        let mut pos = false;
        let mut neg = false;
        for n in self.order + 1..=horizon {
            let r = self.ratio(n);
            pos |= r > 0.0;
            neg |= r < 0.0;
        }
        let dominant = self.ratio_tail(horizon) < a_max.abs();
        let consistent = (pos && !neg && a_max > 0.0) || (neg && !pos && a_max < 0.0);
        if dominant && consistent {
            let s: f64 = self
                .alpha
                .iter()
                .zip(&self.points)
                .map(|(a, &x)| a * tail(x, self.order))
                .sum();
            return (s.min(0.0), s.max(0.0));
        }
        let mut lo = 0.0;
        let mut hi = 0.0;
        for n in self.order + 1..=horizon {
            let u = self.u(n);
            if u > 0.0 {
                hi += u;
            } else {
                lo += u;
            }
        }
        let rest: f64 = self
            .alpha
            .iter()
            .zip(&self.points)
            .map(|(a, &x)| a.abs() * tail(x, horizon))
            .sum();
        (lo - rest, hi + rest)
    }

    /// Range of `u_n / p_n(x_max)` over all `n > n0`; `None` for a vacuum-only design.
    pub fn ratio_range(&self) -> Option<RatioRange> {
        if self.x_max() == 0.0 {
            return None;
        }
        let horizon = sign_horizon(self.order);
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for n in self.order + 1..=horizon {
            let r = self.ratio(n);
            inf = inf.min(r);
            sup = sup.max(r);
        }
        let a_max = *self.alpha.last().expect("non-empty design");
        let t = self.ratio_tail(horizon + 1);
        inf = inf.min(a_max - t);
        sup = sup.max(a_max + t);
        Some(RatioRange {
            row: *self.rows.last().expect("non-empty design"),
            inf,
            sup,
        })
    }
}
