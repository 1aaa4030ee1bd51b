use photon_bounds::channel::{loss_q, PureLossChannel};
use photon_bounds::lp::{
    build_lp, lp_interval, slack_h, solve_lp, Direction, LpProblem, LpRow, Sense,
};
use photon_bounds::table::{DetectorSpec, MeasurementTable};
use photon_bounds::{PoissonSource, ThresholdDetector};
use proptest::prelude::*;

fn source() -> PoissonSource {
    PoissonSource::new(vec![1e-3, 1e-2, 0.5]).unwrap()
}

fn detector() -> ThresholdDetector {
    ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap()
}

fn table(t: f64, source: &PoissonSource, det: &ThresholdDetector) -> MeasurementTable {
    PureLossChannel::new(t)
        .unwrap()
        .forward_table(source, &DetectorSpec::Threshold(det.clone()))
        .unwrap()
}

#[test]
fn pure_loss_containment() {
    let (source, det) = (source(), detector());
    for t in [0.05, 0.1, 0.5] {
        let table = table(t, &source, &det);
        for (n, m) in [(1, 1), (1, 0), (0, 0), (0, 1)] {
            let e = lp_interval(&table, &source, &det, 8, 8, (n, m)).unwrap();
            assert!(
                e.contains(loss_q(t, m, n)),
                "t={t} q({m}|{n}) not in [{}, {}]",
                e.lower,
                e.upper
            );
            assert_eq!(e.designs, 0);
        }
        let p = build_lp(&table, &source, &det, 8, 8, (1, 1)).unwrap();
        assert_eq!(p.rows.len(), 9 + 2 * 12);
        assert_eq!(p.upper.len(), 81);
    }
}

#[test]
fn truth_satisfies_every_row() {
    let (source, det) = (source(), detector());
    for t in [0.05, 0.3, 0.9] {
        let p = build_lp(&table(t, &source, &det), &source, &det, 8, 8, (1, 1)).unwrap();
        let x: Vec<f64> = p.vars.iter().map(|&(n, m)| loss_q(t, m, n)).collect();
        for r in &p.rows {
            let lhs: f64 = r.coeffs.iter().zip(&x).map(|(c, v)| c * v).sum();
            match r.sense {
                Sense::Le => assert!(lhs <= r.rhs + 1e-10),
                Sense::Ge => assert!(lhs >= r.rhs - 1e-10),
                Sense::Eq => assert!((lhs - r.rhs).abs() <= 1e-10),
            }
        }
    }
}

#[test]
fn larger_grid_never_widens() {
    let det = detector();
    let small_src = PoissonSource::new(vec![1e-2, 0.5]).unwrap();
    let small_det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 1.0]).unwrap();
    let big_src = source();
    let t = 0.1;
    let small = lp_interval(
        &table(t, &small_src, &small_det),
        &small_src,
        &small_det,
        8,
        8,
        (1, 1),
    )
    .unwrap();
    let big = lp_interval(&table(t, &big_src, &det), &big_src, &det, 8, 8, (1, 1)).unwrap();
    assert!(
        big.width() <= small.width() + 1e-10,
        "{} > {}",
        big.width(),
        small.width()
    );
}

#[test]
fn deterministic_pivots() {
    let (source, det) = (source(), detector());
    let p = build_lp(&table(0.1, &source, &det), &source, &det, 8, 8, (1, 1)).unwrap();
    let a = solve_lp(&p, Direction::Maximize).unwrap();
    let b = solve_lp(&p, Direction::Maximize).unwrap();
    assert_eq!(a, b);
    assert_eq!(p.dump(), p.clone().dump());
}

#[test]
fn slack_h_limits() {
    let ideal = ThresholdDetector::new(0.0, 1.0, vec![1.0]).unwrap();
    let h = slack_h(&ideal, 0.5, 0, 3, 3);
    assert!((h - photon_bounds::special::poisson_tail(0.5, 3).unwrap()).abs() < 1e-15);
    let det = detector();
    let mut last = f64::INFINITY;
    for c in 1..12 {
        let h = slack_h(&det, 0.5, 0, c, c);
        assert!(h <= last);
        last = h;
    }
    assert!(last < 1e-9);
}

#[test]
fn slack_h_covers_truncation_gap() {
    // Brute-force gap of a pure-loss forward model truncated at n_c = m_c = 8.
    let det = detector();
    let (x, nc, mc) = (0.5, 8u32, 8u32);
    for t in [0.1, 0.5, 1.0] {
        let nu_eta: f64 = 0.94;
        let mut full = 0.0;
        let mut kept = 0.0;
        for n in 0..80u32 {
            let pn = photon_bounds::special::poisson_pmf(x, n).unwrap();
            for m in 0..=n {
                let v = pn * loss_q(t, m, n) * (1.0 - 1e-6) * (1.0f64 - nu_eta).powi(m as i32);
                full += v;
                if n <= nc && m <= mc {
                    kept += v;
                }
            }
        }
        assert!(slack_h(&det, x, 0, nc, mc) >= full - kept - 1e-15);
    }
}

#[test]
fn empty_grid_rejected() {
    assert!(PoissonSource::new(vec![]).is_err());
    let (source, det) = (source(), detector());
    let t = table(0.1, &source, &det);
    assert!(build_lp(&t, &source, &det, 0, 8, (1, 1)).is_err());
}

/// Boxed LP whose optimum `x*` is planted through the optimality conditions:
/// the objective is a nonnegative combination of the active rows plus box
/// multipliers pointing out of the box at variables on a bound.
fn planted(dim: usize, rows: usize, seed: &[f64]) -> (LpProblem, f64) {
    let mut it = seed.iter().cycle().copied();
    let mut next = move || it.next().unwrap();
    let x: Vec<f64> = (0..dim)
        .map(|_| match (next() * 3.0) as u32 {
            0 => 0.0,
            1 => 1.0,
            _ => 0.1 + 0.8 * next(),
        })
        .collect();
    let mut objective = vec![0.0; dim];
    let mut lp_rows = Vec::new();
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..dim).map(|_| 2.0 * next() - 1.0).collect();
        let lhs: f64 = coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        if next() < 0.5 {
            let w = next();
            for (o, a) in objective.iter_mut().zip(&coeffs) {
                *o += w * a;
            }
            lp_rows.push(LpRow {
                coeffs,
                sense: Sense::Le,
                rhs: lhs,
            });
        } else {
            lp_rows.push(LpRow {
                coeffs,
                sense: Sense::Le,
                rhs: lhs + 0.1 + next(),
            });
        }
    }
    for (o, &v) in objective.iter_mut().zip(&x) {
        if v == 1.0 {
            *o += next();
        } else if v == 0.0 {
            *o -= next();
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    (LpProblem::new(objective, lp_rows), value)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planted_optimum_recovered(
        dim in 1usize..=20,
        rows in 0usize..=20,
        seed in proptest::collection::vec(0.0f64..1.0, 64),
    ) {
        let (p, value) = planted(dim, rows, &seed);
        let s = solve_lp(&p, Direction::Maximize).unwrap();
        prop_assert!((s.value - value).abs() <= 1e-8, "{} vs {}", s.value, value);
    }
}
