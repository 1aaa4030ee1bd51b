use photon_bounds::channel::TcspcScene;
use photon_bounds::estimator::EstimatorConfig;
use photon_bounds::tcspc::{run_tcspc, DEFAULT_ORDER};
use photon_bounds::HomodyneDetector;

fn detector() -> HomodyneDetector {
    HomodyneDetector::uniform(1.0, 5.0, 16).unwrap()
}

#[test]
fn standard_scene_containment_and_ordering() {
    let t = std::time::Instant::now();
    let scene = TcspcScene::standard();
    let cfg = EstimatorConfig::new(0, DEFAULT_ORDER);
    let r = run_tcspc(&scene, &detector(), DEFAULT_ORDER, &cfg).unwrap();
    for row in &r.rows {
        assert!(
            row.q1.contains(row.q1_exact),
            "t={} q1 {} not in {:?}",
            row.t_ns,
            row.q1_exact,
            row.q1
        );
        assert!(
            row.q2.contains(row.q2_exact),
            "t={} q2 {} not in {:?}",
            row.t_ns,
            row.q2_exact,
            row.q2
        );
        assert!(row.qc.contains(row.qc_exact));
        assert!(row.pt.contains(row.pt_exact));
    }
    let w1 = r.mean_width(|r| r.q1);
    let w2 = r.mean_width(|r| r.q2);
    println!("mean widths q1 {w1:.3e} q2 {w2:.3e} in {:?}", t.elapsed());
    assert!(w1 < 0.02);
    assert!(w2 > w1);
    let total: f64 = r.rows.iter().map(|r| r.pt_exact).sum();
    assert!((total - 1.0).abs() < 1e-10);
    for w in r.rows.windows(2).filter(|w| w[0].t_ns >= scene.t0) {
        assert!(w[1].q1.hi <= w[0].q1.hi + w[0].q1.width());
    }
}

#[test]
fn zero_excitation_contains_zero() {
    let mut scene = TcspcScene::standard();
    scene.excitation = 0.0;
    scene.times.truncate(20);
    let cfg = EstimatorConfig::new(0, DEFAULT_ORDER);
    let r = run_tcspc(&scene, &detector(), DEFAULT_ORDER, &cfg).unwrap();
    for row in &r.rows {
        assert!(row.q1.contains(0.0) && row.q2.contains(0.0));
        assert!(row.qc.lo == 0.0);
    }
}

#[test]
fn sampled_run_is_reproducible() {
    let mut scene = TcspcScene::standard();
    scene.times = (8..16).map(|k| 5.0 * k as f64).collect();
    let cfg = EstimatorConfig::new(0, DEFAULT_ORDER);
    let det = detector();
    let a = photon_bounds::tcspc::run_tcspc_sampled(&scene, &det, DEFAULT_ORDER, &cfg, 100_000, 3)
        .unwrap();
    let b = photon_bounds::tcspc::run_tcspc_sampled(&scene, &det, DEFAULT_ORDER, &cfg, 100_000, 3)
        .unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.rows.iter().all(|r| r.q1.lo <= r.q1.hi));
}
