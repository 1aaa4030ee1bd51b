use photon_bounds::qkd::{Protocol, QkdScenario};

#[test]
fn sweep_fidelity_and_monotonicity() {
    let losses: Vec<f64> = (0..=45).step_by(5).map(f64::from).collect();
    let reports = QkdScenario::default()
        .sweep(&losses, &[Protocol::Bb84, Protocol::SixState])
        .unwrap();
    let series = |p: Protocol| {
        reports
            .iter()
            .filter(move |r| r.protocol == p)
            .collect::<Vec<_>>()
    };
    let (bb, six) = (series(Protocol::Bb84), series(Protocol::SixState));
    assert_eq!(bb.len(), losses.len());
    for r in &bb {
        if r.loss_db <= 40.0 {
            assert!((r.errors[2].hi - 0.05).abs() <= 0.005, "{} dB", r.loss_db);
        }
        if r.loss_db >= 30.0 {
            assert!(r.baseline_e1 > r.errors[2].hi, "{} dB", r.loss_db);
        }
    }
    for s in [&bb, &six] {
        assert!(s.iter().find(|r| r.loss_db == 10.0).unwrap().key_rate > 0.0);
        for w in s.windows(2) {
            assert!(w[1].key_rate <= w[0].key_rate);
        }
    }
    for (b, s) in bb.iter().zip(&six) {
        assert!(s.key_rate >= b.key_rate, "{} dB", b.loss_db);
    }
}
