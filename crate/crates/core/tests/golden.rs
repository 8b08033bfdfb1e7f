use sktsim::config::{preset, ExperimentConfig, SystemKind, PRESET_NAMES};
use sktsim::nonlinearity::NonlinearityKind;
use sktsim::sde::Potential;

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn presets_serialize_to_golden_files() {
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        assert_eq!(cfg.to_toml().unwrap(), golden(name), "{name}");
        assert_eq!(ExperimentConfig::from_toml(&golden(name)).unwrap(), cfg);
    }
}

fn check_common(cfg: &ExperimentConfig) {
    assert_eq!(cfg.interaction.eta, 2.0);
    assert_eq!(cfg.interaction.alpha, 0.0);
    assert_eq!(cfg.interaction.potential, Potential::Off);
    assert_eq!(cfg.interaction.nonlinearity, NonlinearityKind::Identity);
    assert_eq!(cfg.particles.count, Some(5000));
    assert_eq!(cfg.runs, 500);
    assert_eq!(cfg.time.dt, 0.01);
    assert_eq!(cfg.time.t_final, 2.0);
    assert!(!cfg.desk_scale);
    assert_eq!(cfg.systems, vec![SystemKind::SktParticles, SystemKind::GradientParticles]);
    for mixture in &cfg.species.initial.species {
        assert_eq!(mixture.components.len(), 1);
        assert_eq!(mixture.components[0].variance, 2.0);
    }
}

fn means(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.species.initial.species.iter().map(|m| m.components[0].mean[0]).collect()
}

#[test]
fn published_parameter_values() {
    let n = preset("nsymm").unwrap();
    check_common(&n);
    assert_eq!(n.species.pair_mass, vec![vec![0.0, 355.0], vec![25.0, 0.0]]);
    assert_eq!(n.species.sigma, vec![1.0, 2.0]);
    assert_eq!(means(&n), vec![-1.0, 1.0]);
    assert_eq!(n.snapshot_times(), vec![2.0]);

    let s = preset("symm").unwrap();
    check_common(&s);
    assert_eq!(s.species.pair_mass, vec![vec![0.0, 355.0], vec![355.0, 0.0]]);
    assert_eq!(s.snapshot_times(), vec![0.01, 0.15, 2.0]);

    let t = preset("3species").unwrap();
    check_common(&t);
    assert_eq!(
        t.species.pair_mass,
        vec![vec![0.0, 355.0, 355.0], vec![25.0, 0.0, 25.0], vec![355.0, 0.0, 0.0]]
    );
    assert_eq!(t.species.sigma, vec![1.0, 2.0, 3.0]);
    assert_eq!(means(&t), vec![-1.0, 2.0, -3.0]);
}

#[test]
fn desk_scale_is_labeled() {
    let mut cfg = preset("symm").unwrap();
    cfg.apply_desk_scale();
    assert!(cfg.desk_scale);
    assert_eq!(cfg.particles.count, Some(2000));
    assert_eq!(cfg.runs, 50);
    assert!(cfg.to_toml().unwrap().contains("desk_scale = true"));
}
