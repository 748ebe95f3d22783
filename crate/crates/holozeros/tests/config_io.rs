use holozeros::config::{read_configurations, write_configurations, ConfigurationRecord, RunConfig};
use holozeros::grid::Grid;
use holozeros::potential::GridMeasure;
use holozeros::zeros::Configuration;
use holozeros::C64;

const CONFIG: &str = r#"{
  "tau": [0.1, 1.1],
  "grid": 12,
  "ensemble": {
    "n": 4,
    "kind": "fubini-study",
    "measure": { "kind": "uniform-disk", "center": [0.5, 0.5], "radius": 0.3 },
    "quadrature": 24,
    "seed": 9
  },
  "sweep": {
    "ns": [4, 8],
    "samples": 100,
    "sigma": { "kind": "rect", "a0": 0.0, "a1": 0.5, "b0": 0.0, "b1": 1.0 },
    "delta": 0.1
  }
}"#;

#[test]
fn config_loads_and_builds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, CONFIG).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.ensemble.n, 4);
    assert_eq!(cfg.sweep.as_ref().unwrap().pairs, 50);
    let torus = cfg.torus().unwrap();
    let ens = cfg.build_ensemble(&torus, None).unwrap();
    assert_eq!(ens.degree(), 4);
    let sweep = cfg.sweep_config(1, None).unwrap();
    assert_eq!(sweep.ns, vec![4, 8]);
    // a round trip through serde keeps every field
    let again: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&again).unwrap(), serde_json::to_value(&cfg).unwrap());
}

#[test]
fn config_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let unknown = CONFIG.replace("\"grid\": 12", "\"grid\": 12, \"gird\": 3");
    std::fs::write(&path, unknown).unwrap();
    assert!(RunConfig::load(&path).is_err());
    let mismatch = CONFIG.replace("\"n\": 4", "\"n\": 4, \"tau\": [0.0, 1.0]");
    std::fs::write(&path, mismatch).unwrap();
    assert!(RunConfig::load(&path).is_err());
    let zero = CONFIG.replace("\"n\": 4", "\"n\": 0");
    std::fs::write(&path, zero).unwrap();
    assert!(RunConfig::load(&path).is_err());
}

#[test]
fn configurations_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("configurations.csv");
    let recs = vec![
        ConfigurationRecord {
            cfg: Configuration::new(vec![C64::new(0.1, 0.2), C64::new(0.7, 0.3)]),
            translate: C64::new(0.0, 0.0),
            seed: 5,
            stream: 0,
        },
        ConfigurationRecord {
            cfg: Configuration::new(vec![C64::new(1.0 / 3.0, 0.9), C64::new(0.25, 0.5), C64::new(0.6, 0.1)]),
            translate: C64::new(0.125, -0.5),
            seed: 5,
            stream: 1,
        },
    ];
    write_configurations(&path, &recs).unwrap();
    assert_eq!(read_configurations(&path).unwrap(), recs);
}

#[test]
fn truncated_configuration_rows_fail() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("configurations.csv");
    std::fs::write(&path, "2,0.1,0.2,0.3,0,0,5,0\n").unwrap();
    assert!(read_configurations(&path).is_err());
}

#[test]
fn measure_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let grid = Grid::new(8);
    let mut w: Vec<f64> = (0..grid.len()).map(|k| ((k * 7919) % 13) as f64).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let mu = GridMeasure::new(grid, w).unwrap();
    mu.write_csv(&path).unwrap();
    let back = GridMeasure::read_csv(&path, grid).unwrap();
    assert_eq!(back.weights, mu.weights);
}
