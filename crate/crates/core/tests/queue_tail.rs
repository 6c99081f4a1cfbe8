use cogmimo_core::sweep::{queue_table, QueueSpec, RunSettings};
use cogmimo_core::ScenarioConfig;

#[test]
fn decay_matches_theta_when_tail_is_resolvable() {
    let cfg = ScenarioConfig {
        p_int: 10.0,
        ..ScenarioConfig::default()
    };
    let settings = RunSettings {
        samples: 50_000,
        seed: 7,
        ..RunSettings::default()
    };
    let spec = QueueSpec {
        thetas: vec![0.1, 0.5],
        frames: 300_000,
        seeds: 2,
        ..QueueSpec::default()
    };
    let t = queue_table(&cfg, &settings, &spec).unwrap();
    let target = t.numeric("theta_target").unwrap();
    let hat = t.numeric("theta_hat").unwrap();
    let r2 = t.numeric("r_squared").unwrap();
    for ((th, h), r) in target.iter().zip(&hat).zip(&r2) {
        assert!((h - th).abs() <= 0.25 * th, "θ = {th}: estimated {h}");
        assert!(*r > 0.95);
    }
}

#[test]
fn queue_rows_are_theta_major_and_reproducible() {
    let settings = RunSettings {
        samples: 2_000,
        ..RunSettings::default()
    };
    let spec = QueueSpec {
        thetas: vec![0.05, 0.5],
        frames: 20_000,
        seeds: 3,
        ..QueueSpec::default()
    };
    let a = queue_table(&ScenarioConfig::default(), &settings, &spec).unwrap();
    let b = queue_table(&ScenarioConfig::default(), &settings, &spec).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.numeric("theta_target").unwrap(), vec![0.05, 0.05, 0.05, 0.5, 0.5, 0.5]);
    assert_eq!(a.numeric("seed").unwrap(), vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
}
