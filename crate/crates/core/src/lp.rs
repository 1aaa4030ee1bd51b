//! Linear-programming estimator over the truncated channel table.
//!
//! Variables are `q(m|n)` for `n <= n_c`, `m <= m_c`, boxed to [0, 1] with
//! row sums at most 1. Every measured `f(x, y)` gives two rows:
//! `f - h <= sum_{n,m} p_n(x) q(m|n) r_m(y) <= f`, where `h` bounds what the
//! truncated photon numbers can contribute. Maximising and minimising the
//! target over this polytope brackets its true value.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimator::{IntervalEstimate, Receiver, ResidualBudget};
use crate::linalg::{dot2, factor, Lu};
use crate::source::PoissonSource;
use crate::special::{pmf, tail};
use crate::table::MeasurementTable;

/// Feasibility and optimality tolerance of the simplex.
pub const LP_TOL: f64 = 1e-9;
/// Tolerance of the post-solve constraint check.
pub const CHECK_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-9;
/// Measurement coefficients below this are dropped (and their largest
/// possible contribution moved into the right-hand side of the lower row).
pub const COEFF_FLOOR: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn name(self) -> &'static str {
        match self {
            Sense::Le => "le",
            Sense::Ge => "ge",
            Sense::Eq => "eq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `optimise objective . x` subject to `rows`, `0 <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    /// Variable `k` is `q(vars[k].1 | vars[k].0)`, stored as `(n, m)`.
    pub vars: Vec<(u32, u32)>,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

impl LpProblem {
    /// Problem over plain variables (no channel-table meaning), all boxed to [0, 1].
    pub fn new(objective: Vec<f64>, rows: Vec<LpRow>) -> Self {
        let n = objective.len();
        Self {
            vars: (0..n as u32).map(|k| (k, 0)).collect(),
            objective,
            rows,
            upper: vec![1.0; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Plain-text dump: a header, the variable map, the objective, then one
    /// line per constraint (`row <k> <le|ge|eq> <rhs> <col>:<coef> ...`) and
    /// one per variable box.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# lp vars={} rows={} boxes={}",
            self.num_vars(),
            self.rows.len(),
            self.upper.len()
        );
        for (k, (n, m)) in self.vars.iter().enumerate() {
            let _ = writeln!(s, "var {k} q({m}|{n})");
        }
        let _ = writeln!(s, "obj{}", sparse(&self.objective));
        for (k, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "row {k} {} {:.17e}{}",
                r.sense.name(),
                r.rhs,
                sparse(&r.coeffs)
            );
        }
        for (k, u) in self.upper.iter().enumerate() {
            let _ = writeln!(s, "box {k} 0 {u:.17e}");
        }
        s
    }
}

fn sparse(v: &[f64]) -> String {
    v.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| format!(" {k}:{c:.17e}"))
        .collect()
}

/// Dense bounded-variable simplex in revised form. Every column `j` has
/// bounds `[0, upper[j]]`; nonbasic columns sit at one of them. The basis is
/// refactored at every pivot and basic values are recomputed from the
/// nonbasic positions with one step of iterative refinement, so rounding
/// does not accumulate across pivots.
struct Simplex {
    /// Column-major constraint matrix.
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    /// Values of the nonbasic columns (entries of basic columns are unused).
    value: Vec<f64>,
    pivots: usize,
}

/// Solves `B x = r` and refines once with a compensated residual.
fn refined(lu: &Lu, rows: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let mut x = lu.solve(r);
    let res: Vec<f64> = rows
        .iter()
        .zip(r)
        .map(|(row, ri)| ri - dot2(row, &x))
        .collect();
    for (xi, d) in x.iter_mut().zip(lu.solve(&res)) {
        *xi += d;
    }
    x
}

impl Simplex {
    fn value_of(&self, j: usize) -> f64 {
        self.value[j]
    }

    fn at_upper(&self, j: usize) -> bool {
        self.value[j] > 0.5 * self.upper[j]
    }

    /// Basis rows (for residuals), its factorisation and the basic values.
    fn factor_basis(&self) -> Result<(Vec<Vec<f64>>, Lu, Vec<f64>)> {
        let m = self.rhs.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| self.basis.iter().map(|&b| self.cols[b][i]).collect())
            .collect();
        let lu = factor(&rows)
            .ok_or_else(|| Error::ToleranceFailure("singular simplex basis".into()))?;
        let mut r = self.rhs.clone();
        for j in 0..self.cols.len() {
            let v = self.value_of(j);
            if v != 0.0 && !self.basis.contains(&j) {
                for (ri, a) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= a * v;
                }
            }
        }
        let xb = refined(&lu, &rows, &r);
        Ok((rows, lu, xb))
    }

    /// Current value of every column.
    fn solution(&self) -> Result<Vec<f64>> {
        let (_, _, xb) = self.factor_basis()?;
        let mut x: Vec<f64> = (0..self.cols.len()).map(|j| self.value_of(j)).collect();
        for (&b, v) in self.basis.iter().zip(xb) {
            x[b] = v;
        }
        Ok(x)
    }

    /// Maximises `cost . x`. Entering columns follow Bland's rule; the ratio
    /// test is the two-pass variant that takes the largest pivot among the
    /// rows blocking within the feasibility tolerance.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let n = self.cols.len();
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::ToleranceFailure(
                    "simplex pivot limit reached".into(),
                ));
            }
            let (rows, lu, xb) = self.factor_basis()?;
            let cb: Vec<f64> = self.basis.iter().map(|&b| cost[b]).collect();
            let y = lu.solve_t(&cb);
            let mut in_basis = vec![false; n];
            for &b in &self.basis {
                in_basis[b] = true;
            }
            let entering = (0..n).find(|&j| {
                if in_basis[j] || !allowed[j] || self.upper[j] <= 0.0 {
                    return false;
                }
                let d = cost[j] - dot2(&y, &self.cols[j]);
                if self.at_upper(j) {
                    d < -LP_TOL
                } else {
                    d > LP_TOL
                }
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let dir = if self.at_upper(c) { -1.0 } else { 1.0 };
            let g: Vec<f64> = refined(&lu, &rows, &self.cols[c])
                .into_iter()
                .map(|a| dir * a)
                .collect();
            // Step at which basic row `i` reaches a bound, with slack `tol`.
            let limit = |i: usize, tol: f64| -> Option<f64> {
                let b = self.basis[i];
                if g[i] > PIVOT_TOL {
                    Some((xb[i].max(0.0) + tol) / g[i])
                } else if g[i] < -PIVOT_TOL && self.upper[b].is_finite() {
                    Some(((self.upper[b] - xb[i]).max(0.0) + tol) / -g[i])
                } else {
                    None
                }
            };
            let m = self.basis.len();
            let theta = (0..m)
                .filter_map(|i| limit(i, LP_TOL))
                .fold(f64::INFINITY, f64::min);
            if self.upper[c] <= theta {
                self.value[c] = if dir > 0.0 { self.upper[c] } else { 0.0 };
                self.pivots += 1;
                continue;
            }
            if !theta.is_finite() {
                return Err(Error::Unbounded);
            }
            let mut best: Option<usize> = None;
            for i in 0..m {
                if limit(i, 0.0).is_some_and(|t| t <= theta) {
                    let better = match best {
                        None => true,
                        Some(k) => {
                            g[i].abs() > g[k].abs()
                                || (g[i].abs() == g[k].abs() && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        best = Some(i);
                    }
                }
            }
            let r = best.expect("a finite step has a blocking row");
            let leaving = self.basis[r];
            // The leaving column keeps the value it reaches, which is within
            // the tolerance of its bound; snapping it onto the bound would
            // shift the other basics by that error over a possibly tiny pivot.
            let t = limit(r, 0.0).unwrap_or(0.0);
            self.value[leaving] = (xb[r] - t * g[r]).clamp(-LP_TOL, self.upper[leaving] + LP_TOL);
            self.basis[r] = c;
            self.pivots += 1;
        }
    }
}

/// A `Le`/`Ge` pair over the same coefficients becomes one equality with a
/// bounded slack `s`: `a.x + s = upper`, `0 <= s <= upper - lower`. This
/// avoids pivoting between two nearly identical rows.
fn merge_slabs(problem: &LpProblem) -> Result<(Vec<LpRow>, Vec<f64>)> {
    let nv = problem.num_vars();
    let mut paired = vec![None; problem.rows.len()];
    let mut used = vec![false; problem.rows.len()];
    for (i, r) in problem.rows.iter().enumerate() {
        if r.sense != Sense::Le || used[i] {
            continue;
        }
        if let Some(k) = (i + 1..problem.rows.len()).find(|&k| {
            !used[k] && problem.rows[k].sense == Sense::Ge && problem.rows[k].coeffs == r.coeffs
        }) {
            used[i] = true;
            used[k] = true;
            paired[i] = Some(k);
        }
    }
    let extra = paired.iter().filter(|p| p.is_some()).count();
    let mut upper = problem.upper.clone();
    let mut rows = Vec::new();
    let mut slack = nv;
    for (i, r) in problem.rows.iter().enumerate() {
        let mut coeffs = r.coeffs.clone();
        coeffs.resize(nv + extra, 0.0);
        match paired[i] {
            Some(k) => {
                let width = r.rhs - problem.rows[k].rhs;
                if width < -LP_TOL {
                    return Err(Error::Infeasible);
                }
                coeffs[slack] = 1.0;
                upper.push(width.max(0.0));
                slack += 1;
                rows.push(LpRow {
                    coeffs,
                    sense: Sense::Eq,
                    rhs: r.rhs,
                });
            }
            None if used[i] => {}
            None => rows.push(LpRow {
                coeffs,
                sense: r.sense,
                rhs: r.rhs,
            }),
        }
    }
    Ok((rows, upper))
}

/// Solves the problem in the given direction.
pub fn solve_lp(problem: &LpProblem, direction: Direction) -> Result<LpSolution> {
    for r in &problem.rows {
        if r.coeffs.len() != problem.num_vars() {
            return Err(Error::InvalidArgument(
                "constraint width differs from variable count".into(),
            ));
        }
    }
    let (rows, mut upper) = merge_slabs(problem)?;
    let nv = upper.len();
    let m = rows.len();
    let mut cols: Vec<Vec<f64>> = (0..nv)
        .map(|j| rows.iter().map(|r| r.coeffs[j]).collect())
        .collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let mut basis = Vec::with_capacity(m);
    let mut artificial = Vec::new();
    // Logical columns for inequalities; an artificial wherever the logical
    // cannot start feasible at the origin.
    let mut start = Vec::with_capacity(m);
    let mut reach = Vec::with_capacity(m);
    for (i, r) in rows.iter().enumerate() {
        let sign = match r.sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => 0.0,
        };
        // Range of `a.x` over the boxes bounds every logical and artificial.
        let lo: f64 = r
            .coeffs
            .iter()
            .zip(&upper[..nv])
            .map(|(a, u)| (a * u).min(0.0))
            .sum();
        let hi: f64 = r
            .coeffs
            .iter()
            .zip(&upper[..nv])
            .map(|(a, u)| (a * u).max(0.0))
            .sum();
        reach.push((r.rhs - lo).abs().max((hi - r.rhs).abs()));
        let mut logical = None;
        if sign != 0.0 {
            let mut col = vec![0.0; m];
            col[i] = sign;
            cols.push(col);
            upper.push(if sign > 0.0 { r.rhs - lo } else { hi - r.rhs }.max(0.0));
            logical = Some(cols.len() - 1);
        }
        start.push((logical, sign * r.rhs >= 0.0));
    }
    for (i, (logical, feasible)) in start.into_iter().enumerate() {
        match logical {
            Some(j) if feasible => basis.push(j),
            _ => {
                let mut col = vec![0.0; m];
                col[i] = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
                cols.push(col);
                upper.push(reach[i]);
                artificial.push(cols.len() - 1);
                basis.push(cols.len() - 1);
            }
        }
    }
    let n = cols.len();
    let mut sx = Simplex {
        cols,
        rhs,
        upper,
        basis,
        value: vec![0.0; n],
        pivots: 0,
    };
    let is_art = |j: usize| artificial.contains(&j);

    if !artificial.is_empty() {
        let cost: Vec<f64> = (0..n).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        sx.optimise(&cost, &vec![true; n])?;
        let x = sx.solution()?;
        let infeas: f64 = artificial.iter().map(|&j| x[j]).sum();
        if infeas > LP_TOL {
            return Err(Error::Infeasible);
        }
        // Artificials are pinned at zero for the second phase.
        for &j in &artificial {
            sx.upper[j] = 0.0;
            if !sx.basis.contains(&j) {
                sx.value[j] = 0.0;
            }
        }
    }

    let sign = match direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut cost = vec![0.0; n];
    for (c, o) in cost.iter_mut().zip(&problem.objective) {
        *c = sign * o;
    }
    let allowed: Vec<bool> = (0..n).map(|j| !is_art(j)).collect();
    sx.optimise(&cost, &allowed)?;

    let mut x = sx.solution()?;
    x.truncate(problem.num_vars());
    check_solution(problem, &x)?;
    let value = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        value,
        x,
        pivots: sx.pivots,
    })
}

fn check_solution(problem: &LpProblem, x: &[f64]) -> Result<()> {
    for (k, (&v, &u)) in x.iter().zip(&problem.upper).enumerate() {
        if v < -CHECK_TOL || v > u + CHECK_TOL {
            return Err(Error::ToleranceFailure(format!(
                "variable {k} = {v} violates its box"
            )));
        }
    }
    for (k, r) in problem.rows.iter().enumerate() {
        let lhs: f64 = r.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
        let ok = match r.sense {
            Sense::Le => lhs <= r.rhs + CHECK_TOL,
            Sense::Ge => lhs >= r.rhs - CHECK_TOL,
            Sense::Eq => (lhs - r.rhs).abs() <= CHECK_TOL,
        };
        if !ok {
            return Err(Error::ToleranceFailure(format!(
                "row {k} violated: {lhs} {} {}",
                r.sense.name(),
                r.rhs
            )));
        }
    }
    Ok(())
}

/// Upper bound on the part of `f(x, y_j)` carried by photon numbers outside
/// the truncation: `tail(x, n_c) sup_m r_m + (1 - tail(x, n_c)) sup_{m > m_c} r_m`.
pub fn slack_h<R: Receiver<Outcome = u32>>(
    receiver: &R,
    x: f64,
    setting: usize,
    nc: u32,
    mc: u32,
) -> f64 {
    let t = tail(x, nc);
    t * receiver.response_sup(setting, None) + (1.0 - t) * receiver.response_sup(setting, Some(mc))
}

/// LP for target `q(m*|n*)` over the table's full grid.
pub fn build_lp<R: Receiver<Outcome = u32>>(
    table: &MeasurementTable,
    source: &PoissonSource,
    receiver: &R,
    nc: u32,
    mc: u32,
    target: (u32, u32),
) -> Result<LpProblem> {
    let (n_star, m_star) = target;
    if n_star > nc || m_star > mc {
        return Err(Error::DesignRejected(format!(
            "target ({n_star},{m_star}) outside the LP truncation ({nc},{mc})"
        )));
    }
    if table.cols() != receiver.num_settings() {
        return Err(Error::IncompleteData(
            "table columns do not match the detector settings".into(),
        ));
    }
    if source.is_empty() || table.cols() == 0 {
        return Err(Error::InvalidArgument(
            "LP needs at least one measurement".into(),
        ));
    }
    let vars: Vec<(u32, u32)> = (0..=nc)
        .flat_map(|n| (0..=mc).map(move |m| (n, m)))
        .collect();
    let nv = vars.len();
    let mut rows = Vec::new();
    for n in 0..=nc {
        let coeffs = vars
            .iter()
            .map(|&(vn, _)| if vn == n { 1.0 } else { 0.0 })
            .collect();
        rows.push(LpRow {
            coeffs,
            sense: Sense::Le,
            rhs: 1.0,
        });
    }
    let resp: Vec<Vec<f64>> = (0..table.cols())
        .map(|j| (0..=mc).map(|m| receiver.response(j, m)).collect())
        .collect();
    for &x in source.intensities() {
        let i = table
            .row_of(x)
            .ok_or_else(|| Error::IncompleteData(format!("no table row for intensity {x}")))?;
        let p: Vec<f64> = (0..=nc).map(|n| pmf(x, n)).collect();
        for (j, r) in resp.iter().enumerate() {
            let mut dropped = 0.0;
            let coeffs: Vec<f64> = vars
                .iter()
                .map(|&(n, m)| {
                    let c = p[n as usize] * r[m as usize];
                    if c < COEFF_FLOOR {
                        dropped += c;
                        0.0
                    } else {
                        c
                    }
                })
                .collect();
            let f = table.get(i, j)?;
            let h = slack_h(receiver, x, j, nc, mc);
            rows.push(LpRow {
                coeffs: coeffs.clone(),
                sense: Sense::Le,
                rhs: f,
            });
            rows.push(LpRow {
                coeffs,
                sense: Sense::Ge,
                rhs: f - h - dropped,
            });
        }
    }
    let mut objective = vec![0.0; nv];
    let k = vars
        .iter()
        .position(|&v| v == (n_star, m_star))
        .expect("target inside truncation");
    objective[k] = 1.0;
    Ok(LpProblem {
        vars,
        objective,
        rows,
        upper: vec![1.0; nv],
    })
}

/// Interval on `q(m*|n*)` from minimising and maximising the LP. The
/// endpoints are widened by the solver tolerance before clamping.
pub fn lp_interval<R: Receiver<Outcome = u32>>(
    table: &MeasurementTable,
    source: &PoissonSource,
    receiver: &R,
    nc: u32,
    mc: u32,
    target: (u32, u32),
) -> Result<IntervalEstimate<u32>> {
    let problem = build_lp(table, source, receiver, nc, mc, target)?;
    let (hi, lo) = rayon::join(
        || solve_lp(&problem, Direction::Maximize),
        || solve_lp(&problem, Direction::Minimize),
    );
    let (hi, lo) = (hi?.value, lo?.value);
    let raw_lower = lo - LP_TOL;
    let raw_upper = hi + LP_TOL;
    let lower = raw_lower.clamp(0.0, 1.0);
    let upper = raw_upper.clamp(0.0, 1.0);
    Ok(IntervalEstimate {
        input: Some(target.0),
        output: target.1,
        lambda: 0.5 * (lo + hi),
        lower,
        upper,
        raw_lower,
        raw_upper,
        budget: ResidualBudget::default(),
        designs: 0,
        qtilde_history: Vec::new(),
        consistent: lower <= upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_boxed_variable() {
        let p = LpProblem::new(vec![1.0], vec![]);
        assert_abs_diff_eq!(solve_lp(&p, Direction::Maximize).unwrap().value, 1.0);
        assert_abs_diff_eq!(solve_lp(&p, Direction::Minimize).unwrap().value, 0.0);
    }

    #[test]
    fn pinned_variable() {
        let rows = vec![
            LpRow {
                coeffs: vec![1.0],
                sense: Sense::Le,
                rhs: 0.3,
            },
            LpRow {
                coeffs: vec![1.0],
                sense: Sense::Ge,
                rhs: 0.3,
            },
        ];
        let p = LpProblem::new(vec![1.0], rows);
        assert_abs_diff_eq!(
            solve_lp(&p, Direction::Maximize).unwrap().value,
            0.3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            solve_lp(&p, Direction::Minimize).unwrap().value,
            0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn infeasible_detected() {
        let rows = vec![LpRow {
            coeffs: vec![1.0, 1.0],
            sense: Sense::Ge,
            rhs: 3.0,
        }];
        let p = LpProblem::new(vec![1.0, 0.0], rows);
        assert!(matches!(
            solve_lp(&p, Direction::Maximize),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn small_known_optimum() {
        // max x + 2y, x + y <= 1.5, x - y >= -0.5, boxes [0,1]: optimum at (0.5, 1), value 2.5.
        let rows = vec![
            LpRow {
                coeffs: vec![1.0, 1.0],
                sense: Sense::Le,
                rhs: 1.5,
            },
            LpRow {
                coeffs: vec![1.0, -1.0],
                sense: Sense::Ge,
                rhs: -0.5,
            },
        ];
        let p = LpProblem::new(vec![1.0, 2.0], rows);
        let s = solve_lp(&p, Direction::Maximize).unwrap();
        assert_abs_diff_eq!(s.value, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[0], 0.5, epsilon = 1e-12);
        let d = p.dump();
        assert!(d.starts_with("# lp vars=2 rows=2 boxes=2"));
        assert!(d.contains("row 1 ge"));
    }
}
