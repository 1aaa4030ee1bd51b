//! Normalised Hermite functions a_m(y) and the Szegő-type bounds on a_m(y)^2.

use crate::error::{invalid, Error, Result};

/// `pi^{-1/4}`.
pub const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5;

const RESCALE: f64 = 1e150;

/// Value and derivative of one Hermite function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteEval {
    pub order: i32,
    pub point: f64,
    pub value: f64,
    pub derivative: f64,
}

/// Values a_0(y), ..., a_{max_m}(y).
///
/// The recursion is run on a rescaled sequence with a separately tracked log
/// scale, so large |y| neither underflows a_0 nor overflows high orders.
pub fn hermite_functions(max_m: usize, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_m + 1);
    let mut log_scale = -0.5 * y * y;
    let mut prev = 0.0_f64;
    let mut cur = PI_QUARTER_INV;
    out.push(cur * log_scale.exp());
    for k in 0..max_m {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
        out.push(cur * log_scale.exp());
    }
    out
}

/// Derivative a_m'(y) = sqrt(2m) a_{m-1}(y) - y a_m(y).
pub fn derivative_from(m: usize, y: f64, values: &[f64]) -> f64 {
    let lower = if m == 0 { 0.0 } else { values[m - 1] };
    (2.0 * m as f64).sqrt() * lower - y * values[m]
}

/// Hermite function of order `m` with its derivative; `m = -1` is the zero
/// sentinel that starts the recursion.
pub fn hermite_fn(m: i32, y: f64) -> Result<HermiteEval> {
    if m < -1 {
        return Err(invalid(format!("Hermite order must be >= -1, got {m}")));
    }
    if m == -1 {
        return Ok(HermiteEval {
            order: m,
            point: y,
            value: 0.0,
            derivative: 0.0,
        });
    }
    let mu = m as usize;
    let a = hermite_functions(mu, y);
    Ok(HermiteEval {
        order: m,
        point: y,
        value: a[mu],
        derivative: derivative_from(mu, y, &a),
    })
}

/// Smallest order m with 2m - y^2 > 0.
pub fn min_valid_order(y: f64) -> u32 {
    (0.5 * y * y).floor() as u32 + 1
}

/// g_m from a precomputed value/derivative pair; `None` outside 2m+1 > y^2.
pub(crate) fn szego_g(m: usize, y: f64, value: f64, derivative: f64) -> Option<f64> {
    let den = 2.0 * m as f64 + 1.0 - y * y;
    (den > 0.0).then(|| value * value + derivative * derivative / den)
}

/// The pair (g_m(y), h_m(y)) bounding a_m(y)^2 from above.
pub fn szego_bounds(m: u32, y: f64) -> Result<(f64, f64)> {
    let den_h = 2.0 * m as f64 - y * y;
    if !(den_h > 0.0) {
        return Err(Error::Domain {
            order: m,
            y,
            min_order: min_valid_order(y),
        });
    }
    let a = hermite_functions(m as usize, y);
    let v = a[m as usize];
    let d = derivative_from(m as usize, y, &a);
    let g = v * v + d * d / (den_h + 1.0);
    let h = v * v + d * d / den_h;
    Ok((g, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn closed_form(m: usize, y: f64) -> f64 {
        // Physicists' Hermite polynomials H_0..H_6.
        let h = match m {
            0 => 1.0,
            1 => 2.0 * y,
            2 => 4.0 * y * y - 2.0,
            3 => 8.0 * y.powi(3) - 12.0 * y,
            4 => 16.0 * y.powi(4) - 48.0 * y * y + 12.0,
            5 => 32.0 * y.powi(5) - 160.0 * y.powi(3) + 120.0 * y,
            6 => 64.0 * y.powi(6) - 480.0 * y.powi(4) + 720.0 * y * y - 120.0,
            _ => unreachable!(),
        };
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        h * (-y * y / 2.0).exp() / (2f64.powi(m as i32) * fact * std::f64::consts::PI.sqrt()).sqrt()
    }

    #[test]
    fn matches_closed_forms() {
        for &y in &[0.0, 0.5, 1.0, 2.0] {
            let a = hermite_functions(6, y);
            for m in 0..=6 {
                assert_abs_diff_eq!(a[m], closed_form(m, y), epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(
            hermite_fn(0, 0.0).unwrap().value,
            0.7511255444,
            epsilon = 1e-10
        );
        let a1 = hermite_fn(1, 1.0).unwrap().value;
        assert_abs_diff_eq!(
            a1,
            2f64.sqrt() * (-0.5f64).exp() * PI_QUARTER_INV,
            epsilon = 1e-15
        );
        assert_eq!(hermite_fn(-1, 3.0).unwrap().value, 0.0);
        assert!(hermite_fn(-2, 0.0).is_err());
    }

    #[test]
    fn far_tail_does_not_underflow_prematurely() {
        // a_400 peaks near sqrt(801) ~ 28.3; at y = 45 a_0 underflows but a_400 does not.
        let a = hermite_functions(400, 45.0);
        assert_eq!(a[0], 0.0);
        assert!(a[400].abs() > 0.0 && a[400].is_finite());
    }

    #[test]
    fn szego_domain_error() {
        match szego_bounds(1, 2.0) {
            Err(Error::Domain { min_order, .. }) => assert_eq!(min_order, 3),
            other => panic!("expected domain error, got {other:?}"),
        }
        let (g, h) = szego_bounds(5, 0.0).unwrap();
        let e = hermite_fn(5, 0.0).unwrap();
        assert_abs_diff_eq!(
            g,
            e.value.powi(2) + e.derivative.powi(2) / 11.0,
            epsilon = 1e-15
        );
        assert!(h >= g);
    }
}
