use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn rotbec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotbec"))
        .args(args)
        .env_remove("ROTBEC_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(dir: &Path, sub: &str, cfg: &Value) -> Output {
    let p = write_config(dir, "run.json", cfg);
    rotbec(&[sub, "--config", p.to_str().unwrap()])
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn oscillator_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": {"dim": 3, "half_width": 8.0, "points": 32, "trap": {"kind": "harmonic", "nu": 1.0}, "g": 0.0},
        "solver": {"restarts": 1, "windings": [0, 1]},
        "outputs": {"directory": "out", "emit_fields": true, "emit_images": true}
    });
    let out = run(dir.path(), "gp-min", &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/gp.json"));
    let e = doc["energy"].as_f64().unwrap();
    assert!((e - 3.0).abs() < 1e-8, "energy {e}");
    assert!(doc["mu"].as_f64().is_some());
    for key in ["kinetic", "potential", "rotational", "interaction"] {
        assert!(doc["breakdown"][key].as_f64().is_some());
    }
    assert_eq!(doc["seed"], json!(0));
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 16);
    for f in ["phi.csv", "phi.bin", "phi.bin.hdr", "phi_density.pgm", "phi_phase.pgm"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
    let text = std::fs::read_to_string(dir.path().join("out/phi.csv")).unwrap();
    assert!(text.starts_with("ROTBEC-FIELD v1 dim=3 n=32,32,32"));
}

#[test]
fn fast_rotation_in_a_harmonic_trap_is_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": {"dim": 2, "half_width": 8.0, "points": 32, "trap": {"kind": "harmonic", "nu": 1.0}, "omega_z": 2.5, "g": 1.0}
    });
    let out = run(dir.path(), "gp-min", &cfg);
    assert_eq!(out.status.code(), Some(4));
    assert!(!out.stderr.is_empty());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let base = json!({"model": {"dim": 2, "half_width": 6.0, "points": 16, "trap": {"kind": "harmonic", "nu": 1.0}}});

    let mut typo = base.clone();
    typo["modle"] = json!({});
    let mut bad_dim = base.clone();
    bad_dim["model"]["dim"] = json!(4);
    let mut odd = base.clone();
    odd["model"]["points"] = json!(15);
    let mut both = base.clone();
    both["model"]["omega"] = json!([0.0, 0.0, 0.5]);
    both["model"]["omega_z"] = json!(0.5);
    for cfg in [typo, bad_dim, odd, both] {
        let out = run(dir.path(), "gp-min", &cfg);
        assert_eq!(out.status.code(), Some(2), "{cfg}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.lines().count(), 1, "{err}");
    }
    let missing = rotbec(&["gp-min", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let out = run(dir.path(), "sweep", &base);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vortex_count_grows_with_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let omegas: Vec<f64> = (0..10).map(|k| 0.2 * k as f64).collect();
    let cfg = json!({
        "model": {"dim": 2, "half_width": 8.0, "points": 64, "trap": {"kind": "harmonic", "nu": 1.0}, "g": 10.0},
        "solver": {"restarts": 2, "dm_ranks": []},
        "sweep": {"parameter": "omega_z", "values": omegas},
        "outputs": {"directory": "sweep"}
    });
    let out = run(dir.path(), "sweep", &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep/sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (c_om, c_v) = (col("omega_z"), col("vortex_count"));
    let rows: Vec<(f64, usize)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[c_om].parse().unwrap(), r[c_v].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), omegas.len());
    assert_eq!(rows[0].1, 0);
    for w in rows.windows(2) {
        assert!(w[1].1 >= w[0].1, "{rows:?}");
    }
    assert!(rows.last().unwrap().1 > 0);
}

#[test]
fn many_body_coherent_and_scattering_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": {"dim": 2, "half_width": 6.0, "points": 32, "trap": {"kind": "harmonic", "nu": 1.0}, "g": 0.5},
        "fock": {"modes": 3, "particles": [2, 3], "absolute": true},
        "coherent": {"truncation": 64, "z": [1.0, 1.0]},
        "scatter": {
            "potentials": [{"kind": "hard_sphere", "radius": 0.7}, {"kind": "gaussian", "amplitude": 2.0, "width": 0.5}],
            "scales": [0.5],
            "born": {"inner": 0.5, "outer": 1.0, "a": [0.04, 0.02, 0.01]}
        },
        "outputs": {"directory": "o"}
    });
    for sub in ["fock", "coherent", "scatter"] {
        let out = run(dir.path(), sub, &cfg);
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let o = dir.path().join("o");
    let fock = std::fs::read_to_string(o.join("fock.csv")).unwrap();
    assert!(fock.starts_with("N,a,E0_over_N,E_gp_truncated,condensate_fraction,E_abs,config_hash,seed"));
    assert_eq!(fock.lines().count(), 3);
    let born = std::fs::read_to_string(o.join("born.csv")).unwrap();
    assert!(born.starts_with("a,s_of_a,rel_deviation"));
    let c = read_json(&o.join("coherent.json"));
    assert!((c["number_mean"].as_f64().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "model": {"dim": 2, "half_width": 6.0, "points": 32, "trap": {"kind": "harmonic", "nu": 1.0}, "g": 8.0},
        "solver": {"restarts": 1, "seed": 17, "dm_ranks": [2]},
        "sweep": {"parameter": "omega_z", "values": [0.0, 0.9]},
        "outputs": {"directory": "d"}
    });
    let p = write_config(dir.path(), "det.json", &cfg);
    let files = ["sweep.csv", "sweep.json"];
    let mut first = Vec::new();
    for (k, workers) in ["1", "2"].iter().enumerate() {
        let out = rotbec(&["sweep", "--config", p.to_str().unwrap(), "--workers", workers]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("d").join(f)).unwrap()).collect();
        if k == 0 {
            first = bytes;
        } else {
            assert_eq!(first, bytes);
        }
    }
    let doc = read_json(&dir.path().join("d/sweep.json"));
    assert_eq!(doc["seed"], json!(17));
}
