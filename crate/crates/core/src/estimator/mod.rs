//! Analytical interval estimator.
//!
//! For a target element q(m*|n*), source coefficients alpha and detector
//! coefficients beta are chosen so that `Λ = sum_ij alpha_i beta_j f(x_i, y_j)`
//! equals q(m*|n*) up to contributions from photon numbers above the
//! truncation orders. Those remainders are bounded from the device models
//! alone (plus, optionally, occupancy bounds read off the same data), which
//! turns Λ into a certified interval.
//!
//! With more grid points than the order needs, every admissible sub-design
//! is evaluated and the resulting intervals are intersected.

mod receiver;
mod source;

use crate::error::{Error, Result};
use crate::source::PoissonSource;
use crate::table::MeasurementTable;

pub use receiver::{combinations, DetectorDesign, Receiver, ThresholdPair};
pub use source::{sign_horizon, solve_source_coefficients, RatioRange, SourceDesign};

/// Knobs of the analytical estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Source truncation order n0.
    pub source_order: u32,
    /// Detector truncation order m0.
    pub detector_order: u32,
    /// Intersect over all admissible sub-designs (and lower orders).
    pub search: bool,
    /// Cap on the q̃ fixed-point iterations.
    pub max_iterations: usize,
    /// Stop once q̃ changes by less than this.
    pub tolerance: f64,
}

impl EstimatorConfig {
    pub fn new(source_order: u32, detector_order: u32) -> Self {
        Self {
            source_order,
            detector_order,
            search: true,
            max_iterations: 10,
            tolerance: 1e-6,
        }
    }

    pub fn single_design(mut self) -> Self {
        self.search = false;
        self
    }
}

/// Remainder bounds attached to an interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualBudget {
    /// `[R_{n0}^-, R_{n0}^+]`.
    pub source_tail: (f64, f64),
    /// `[v⊖ q̃, v⊕ q̃]`.
    pub detector_tail: (f64, f64),
    /// Bound on `|R_{n0 m0}|`.
    pub cross: f64,
    /// Bound on `sum_{m > m0} q(m|n*)`.
    pub qtilde_upper: f64,
    /// Solve residuals, floating-point rounding and quadrature error.
    pub numerical: f64,
}

/// Certified interval on one element of the channel distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEstimate<O> {
    /// Input photon number n* (`None` for output-only estimation).
    pub input: Option<u32>,
    pub output: O,
    /// Λ of the design with the narrowest interval.
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    /// Unclamped endpoints before intersecting with [0, 1].
    pub raw_lower: f64,
    pub raw_upper: f64,
    /// Budget of the design with the narrowest interval.
    pub budget: ResidualBudget,
    /// Number of sub-designs intersected.
    pub designs: usize,
    /// q̃ after each refinement pass of the narrowest design's order.
    pub qtilde_history: Vec<f64>,
    /// False when sub-design intervals did not overlap (data inconsistent
    /// with the device models); the endpoints then collapse to a point.
    pub consistent: bool,
}

impl<O> IntervalEstimate<O> {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Upper bounds, per table row, on the probability that the channel output
/// is not vacuum in a given mode (`modes[k][i]`) or at all (`any[i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub modes: Vec<Vec<f64>>,
    pub any: Vec<f64>,
}

/// Source and detector design for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationDesign {
    pub source: SourceDesign,
    pub detector: DetectorDesign,
}

/// `Λ = sum_ij alpha_i beta_j f(x_i, y_j)`.
pub fn lambda_from_table(table: &MeasurementTable, design: &EstimationDesign) -> Result<f64> {
    let mut sum = 0.0;
    for (&i, a) in design.source.rows.iter().zip(&design.source.alpha) {
        for (&j, b) in design.detector.settings.iter().zip(&design.detector.beta) {
            sum += a * b * table.get(i, j)?;
        }
    }
    Ok(sum)
}

/// `u_n` of a solved source design.
pub fn source_sequence(design: &SourceDesign, n: u32) -> f64 {
    design.u(n)
}

/// `v_m` of a solved detector design.
pub fn detector_sequence<R: Receiver>(receiver: &R, design: &DetectorDesign, m: R::Outcome) -> f64 {
    design
        .settings
        .iter()
        .zip(&design.beta)
        .map(|(&j, b)| b * receiver.response(j, m))
        .sum()
}

/// Interval on the source remainder `R_{n0}` from `0 <= q <= 1` alone.
pub fn source_residual_bounds(design: &SourceDesign) -> (f64, f64) {
    design.residual_bounds()
}

/// `(v⊕, v⊖)`: extreme values of `v` outside the detector box.
pub fn detector_extreme_values(design: &DetectorDesign) -> (f64, f64) {
    (design.v_plus(), design.v_minus())
}

/// `(sum_{n>n0} |u_n|) * max(v⊕, -v⊖)`.
pub fn cross_residual(design: &EstimationDesign) -> f64 {
    design.source.abs_tail() * design.detector.v_abs()
}

/// `q̃ <= 1 - sum lower(q(m|n*))` over the outcomes inside the box.
pub fn refine_conditional_tail(lowers: &[f64]) -> f64 {
    (1.0 - lowers.iter().map(|l| l.clamp(0.0, 1.0)).sum::<f64>()).clamp(0.0, 1.0)
}

/// One sub-design's contribution, as a function of q̃.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    lambda: f64,
    src: (f64, f64),
    v_plus: f64,
    v_minus: f64,
    cross: f64,
    slack: f64,
}

impl Candidate {
    fn lower(&self, qt: f64) -> f64 {
        self.lambda - (self.src.1 + self.v_plus * qt + self.cross + self.slack)
    }

    fn upper(&self, qt: f64) -> f64 {
        self.lambda - (self.src.0 + self.v_minus * qt - self.cross - self.slack)
    }

    fn budget(&self, qt: f64) -> ResidualBudget {
        ResidualBudget {
            source_tail: self.src,
            detector_tail: (self.v_minus * qt, self.v_plus * qt),
            cross: self.cross,
            qtilde_upper: qt,
            numerical: self.slack,
        }
    }
}

fn rounding(terms: usize, abs_sum: f64) -> f64 {
    (terms as f64 + 2.0) * f64::EPSILON * abs_sum
}

struct SourceCandidate {
    design: SourceDesign,
    crude: (f64, f64),
    abs_tail: f64,
    ratio: Option<RatioRange>,
}

fn source_candidates(
    table: &MeasurementTable,
    rows: &[usize],
    target: u32,
    order: u32,
    search: bool,
) -> Result<Vec<SourceCandidate>> {
    let mut out = Vec::new();
    let mut last_err = None;
    let sizes: Vec<usize> = if search {
        (target as usize + 1..=order as usize + 1).collect()
    } else {
        vec![order as usize + 1]
    };
    for size in sizes {
        if size > rows.len() {
            continue;
        }
        let subsets = if search {
            combinations(rows.len(), size)
        } else {
            vec![(0..size).collect()]
        };
        for subset in subsets {
            let r: Vec<usize> = subset.iter().map(|&k| rows[k]).collect();
            let pts: Vec<f64> = r.iter().map(|&i| table.intensities[i]).collect();
            match SourceDesign::new(r, pts, target, size as u32 - 1) {
                Ok(design) => out.push(SourceCandidate {
                    crude: design.residual_bounds(),
                    abs_tail: design.abs_tail(),
                    ratio: design.ratio_range(),
                    design,
                }),
                Err(e) => last_err = Some(e),
            }
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or_else(|| {
            Error::DesignRejected(format!(
                "no admissible source design for n* = {target} at order {order}"
            ))
        }));
    }
    Ok(out)
}

fn joint_candidate<R: Receiver>(
    table: &MeasurementTable,
    receiver: &R,
    src: &SourceCandidate,
    det: &DetectorDesign,
    outcome: R::Outcome,
    occupancy: Option<&Occupancy>,
) -> Result<Candidate> {
    let mut lambda = 0.0;
    let mut abs_sum = 0.0;
    for (&i, a) in src.design.rows.iter().zip(&src.design.alpha) {
        for (&j, b) in det.settings.iter().zip(&det.beta) {
            let t = a * b * table.get(i, j)?;
            lambda += t;
            abs_sum += t.abs();
        }
    }
    let v_abs = det.v_abs();
    let mut srcr = src.crude;
    let mut cross = src.abs_tail * v_abs;
    if let (Some(occ), Some(ratio)) = (occupancy, src.ratio) {
        let d = receiver
            .occupied_modes(outcome)
            .iter()
            .filter_map(|&k| occ.modes.get(k).map(|m| m[ratio.row]))
            .fold(f64::INFINITY, f64::min);
        if d.is_finite() {
            let d = d.clamp(0.0, 1.0);
            let refined = (ratio.inf.min(0.0) * d, ratio.sup.max(0.0) * d);
            let lo = srcr.0.max(refined.0);
            let hi = srcr.1.min(refined.1);
            srcr = (lo.min(hi), hi.max(lo));
        }
        if let Some(&any) = occ.any.get(ratio.row) {
            cross = cross.min(ratio.abs() * any.clamp(0.0, 1.0) * v_abs);
        }
    }
    let db = det.box_residual;
    let sb = src.design.box_residual;
    let slack = db
        + sb * (1.0 + db)
        + sb * v_abs
        + db * src.abs_tail
        + rounding(src.design.rows.len() * det.settings.len(), abs_sum);
    Ok(Candidate {
        lambda,
        src: srcr,
        v_plus: det.v_plus(),
        v_minus: det.v_minus(),
        cross,
        slack,
    })
}

fn output_candidate(f: &[f64], det: &DetectorDesign) -> Result<Candidate> {
    let mut lambda = 0.0;
    let mut abs_sum = 0.0;
    for (&j, b) in det.settings.iter().zip(&det.beta) {
        let v = *f
            .get(j)
            .ok_or_else(|| Error::IncompleteData(format!("no entry for setting {j}")))?;
        lambda += b * v;
        abs_sum += (b * v).abs();
    }
    Ok(Candidate {
        lambda,
        src: (0.0, 0.0),
        v_plus: det.v_plus(),
        v_minus: det.v_minus(),
        cross: 0.0,
        slack: det.box_residual + rounding(det.settings.len(), abs_sum),
    })
}

/// Result of one q̃ refinement run over a detector order.
struct OrderRun {
    qt: f64,
    history: Vec<f64>,
}

fn refine(cands: &[Vec<Candidate>], cfg: &EstimatorConfig) -> OrderRun {
    let mut qt = 1.0_f64;
    let mut history = Vec::new();
    for _ in 0..cfg.max_iterations.max(1) {
        let lowers: Vec<f64> = cands
            .iter()
            .map(|cs| {
                cs.iter()
                    .map(|c| c.lower(qt).clamp(0.0, 1.0))
                    .fold(0.0, f64::max)
            })
            .collect();
        let next = refine_conditional_tail(&lowers).min(qt);
        history.push(next);
        let done = (qt - next).abs() < cfg.tolerance;
        qt = next;
        if done {
            break;
        }
    }
    OrderRun { qt, history }
}

/// Running intersection for one target.
struct Acc<O> {
    input: Option<u32>,
    output: O,
    lower: f64,
    upper: f64,
    best: Option<(f64, Candidate, f64, Vec<f64>)>,
    designs: usize,
}

impl<O: Copy> Acc<O> {
    fn new(input: Option<u32>, output: O) -> Self {
        Self {
            input,
            output,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            best: None,
            designs: 0,
        }
    }

    fn absorb(&mut self, cands: &[Candidate], run: &OrderRun) {
        for c in cands {
            let (lo, hi) = (c.lower(run.qt), c.upper(run.qt));
            self.lower = self.lower.max(lo);
            self.upper = self.upper.min(hi);
            self.designs += 1;
            let w = hi - lo;
            if self.best.as_ref().is_none_or(|b| w < b.0) {
                self.best = Some((w, *c, run.qt, run.history.clone()));
            }
        }
    }

    fn finish(self) -> Result<IntervalEstimate<O>> {
        let (_, best, qt, history) = self
            .best
            .ok_or_else(|| Error::DesignRejected("no admissible design for target".into()))?;
        let mut lower = self.lower.clamp(0.0, 1.0);
        let mut upper = self.upper.clamp(0.0, 1.0);
        let consistent = lower <= upper;
        if !consistent {
            let mid = 0.5 * (lower + upper);
            lower = mid;
            upper = mid;
        }
        Ok(IntervalEstimate {
            input: self.input,
            output: self.output,
            lambda: best.lambda,
            lower,
            upper,
            raw_lower: self.lower,
            raw_upper: self.upper,
            budget: best.budget(qt),
            designs: self.designs,
            qtilde_history: history,
            consistent,
        })
    }
}

fn detector_orders<R: Receiver>(
    receiver: &R,
    targets: &[R::Outcome],
    order: u32,
    search: bool,
) -> Result<Vec<u32>> {
    let need = targets
        .iter()
        .map(|&o| receiver.order_of(o))
        .max()
        .unwrap_or(0);
    if need > order {
        return Err(Error::DesignRejected(format!(
            "target needs detector order {need}, configured {order}"
        )));
    }
    let need = targets
        .iter()
        .map(|&o| receiver.order_of(o))
        .min()
        .unwrap_or(0);
    Ok(if search {
        (need..=order).collect()
    } else {
        vec![order]
    })
}

fn detector_designs<R: Receiver>(
    receiver: &R,
    outcome: R::Outcome,
    order: u32,
    search: bool,
) -> Result<Vec<DetectorDesign>> {
    let mut out = Vec::new();
    let mut last_err = None;
    for s in receiver.setting_subsets(order, search)? {
        match receiver.design(&s, outcome, order) {
            Ok(d) => out.push(d),
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::DesignRejected("no detector design".into())));
    }
    Ok(out)
}

fn check_table<R: Receiver>(table: &MeasurementTable, receiver: &R) -> Result<()> {
    if table.cols() != receiver.num_settings() {
        return Err(Error::IncompleteData(format!(
            "table has {} detector settings, receiver has {}",
            table.cols(),
            receiver.num_settings()
        )));
    }
    Ok(())
}

fn source_rows(table: &MeasurementTable, source: &PoissonSource) -> Result<Vec<usize>> {
    source
        .intensities()
        .iter()
        .map(|&x| {
            table
                .row_of(x)
                .ok_or_else(|| Error::IncompleteData(format!("no table row for intensity {x}")))
        })
        .collect()
}

/// Certified intervals for several targets `(n*, m*)` sharing one table.
pub fn estimate_targets<R: Receiver>(
    table: &MeasurementTable,
    source: &PoissonSource,
    receiver: &R,
    targets: &[(u32, R::Outcome)],
    cfg: &EstimatorConfig,
    occupancy: Option<&Occupancy>,
) -> Result<Vec<IntervalEstimate<R::Outcome>>> {
    check_table(table, receiver)?;
    let rows = source_rows(table, source)?;
    let mut accs: Vec<Acc<R::Outcome>> =
        targets.iter().map(|&(n, m)| Acc::new(Some(n), m)).collect();
    let mut inputs: Vec<u32> = targets.iter().map(|t| t.0).collect();
    inputs.sort_unstable();
    inputs.dedup();
    for n_star in inputs {
        if n_star > cfg.source_order {
            return Err(Error::DesignRejected(format!(
                "n* = {n_star} exceeds source order {}",
                cfg.source_order
            )));
        }
        let group: Vec<usize> = (0..targets.len())
            .filter(|&k| targets[k].0 == n_star)
            .collect();
        let outs: Vec<R::Outcome> = group.iter().map(|&k| targets[k].1).collect();
        let srcs = source_candidates(table, &rows, n_star, cfg.source_order, cfg.search)?;
        for order in detector_orders(receiver, &outs, cfg.detector_order, cfg.search)? {
            let box_outs = receiver.box_outcomes(order);
            let mut cands = Vec::with_capacity(box_outs.len());
            for &o in &box_outs {
                let dets = detector_designs(receiver, o, order, cfg.search)?;
                let mut cs = Vec::with_capacity(dets.len() * srcs.len());
                for s in &srcs {
                    for d in &dets {
                        cs.push(joint_candidate(table, receiver, s, d, o, occupancy)?);
                    }
                }
                cands.push(cs);
            }
            let run = refine(&cands, cfg);
            for &k in &group {
                if let Some(pos) = box_outs.iter().position(|&o| o == targets[k].1) {
                    accs[k].absorb(&cands[pos], &run);
                }
            }
        }
    }
    accs.into_iter().map(Acc::finish).collect()
}

/// Certified interval on q(m*|n*) from a full measurement table.
pub fn estimate_interval<R: Receiver>(
    table: &MeasurementTable,
    source: &PoissonSource,
    receiver: &R,
    target: (u32, R::Outcome),
    cfg: &EstimatorConfig,
    occupancy: Option<&Occupancy>,
) -> Result<IntervalEstimate<R::Outcome>> {
    Ok(estimate_targets(table, source, receiver, &[target], cfg, occupancy)?.remove(0))
}

/// Certified intervals on output photon-number probabilities from a single
/// vector of detector statistics (no source side). `order` is the detector
/// truncation order.
pub fn estimate_output_targets<R: Receiver>(
    f: &[f64],
    receiver: &R,
    targets: &[R::Outcome],
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<Vec<IntervalEstimate<R::Outcome>>> {
    if f.len() != receiver.num_settings() {
        return Err(Error::IncompleteData(format!(
            "{} statistics for {} detector settings",
            f.len(),
            receiver.num_settings()
        )));
    }
    let mut accs: Vec<Acc<R::Outcome>> = targets.iter().map(|&m| Acc::new(None, m)).collect();
    for ord in detector_orders(receiver, targets, order, cfg.search)? {
        let box_outs = receiver.box_outcomes(ord);
        let mut cands = Vec::with_capacity(box_outs.len());
        for &o in &box_outs {
            let dets = detector_designs(receiver, o, ord, cfg.search)?;
            cands.push(
                dets.iter()
                    .map(|d| output_candidate(f, d))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let run = refine(&cands, cfg);
        for (k, &t) in targets.iter().enumerate() {
            if let Some(pos) = box_outs.iter().position(|&o| o == t) {
                accs[k].absorb(&cands[pos], &run);
            }
        }
    }
    accs.into_iter().map(Acc::finish).collect()
}

/// Certified interval on one output photon-number probability.
pub fn estimate_output_only<R: Receiver>(
    f: &[f64],
    receiver: &R,
    target: R::Outcome,
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<IntervalEstimate<R::Outcome>> {
    Ok(estimate_output_targets(f, receiver, &[target], order, cfg)?.remove(0))
}

/// Upper bound on the probability that the output of `receiver` is not
/// vacuum, from one row of its statistics.
pub fn occupancy_bound<R: Receiver>(
    f: &[f64],
    receiver: &R,
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let est = estimate_output_only(f, receiver, receiver.vacuum(), order, cfg)?;
    Ok((1.0 - est.lower).clamp(0.0, 1.0))
}

/// Occupancy bounds for a single-mode table: per row, one minus the
/// certified lower bound on the output vacuum probability.
pub fn single_mode_occupancy<R: Receiver>(
    table: &MeasurementTable,
    receiver: &R,
    order: u32,
    cfg: &EstimatorConfig,
) -> Result<Occupancy> {
    check_table(table, receiver)?;
    let any = table
        .values
        .iter()
        .map(|row| occupancy_bound(row, receiver, order, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Occupancy {
        modes: vec![any.clone()],
        any,
    })
}
