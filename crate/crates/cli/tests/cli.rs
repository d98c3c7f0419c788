use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn example() -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples/co2_analogue.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vibropol"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap()
}

fn with_lambda(mut config: Value, lambda: f64) -> Value {
    config["system"]["photon_modes"][0]["lambda_xyz"] = json!([0.0, 0.0, lambda]);
    config
}

#[test]
fn modes_are_deterministic_and_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", &example());
    let hash = format!("{:x}", Sha256::digest(std::fs::read(&config).unwrap()));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("modes", &config, out, &[]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["modes.csv", "spectrum.csv", "force_constants.json", "equilibrium.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.contains(&hash), "{name}");
        assert!(text.contains(env!("CARGO_PKG_VERSION")), "{name}");
    }
}

#[test]
fn uncoupled_modes_are_bare_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let config = with_lambda(example(), 0.0);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("modes", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got: Vec<f64> = csv_rows(&dir.path().join("modes.csv"))
        .iter()
        .map(|r| num(&r[1]))
        .collect();

    let masses: Vec<f64> = config["system"]["atoms"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|a| [a["mass"].as_f64().unwrap() * 1822.888486209; 3])
        .collect();
    let rows: Vec<Vec<f64>> = serde_json::from_value(config["backend"]["force_constants"].clone()).unwrap();
    let d = DMatrix::from_fn(9, 9, |i, j| rows[i][j] / (masses[i] * masses[j]).sqrt());
    let mut expected: Vec<f64> = d
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.abs().sqrt() * 219474.6313632)
        .collect();
    expected.push(2430.0);
    expected.sort_by(f64::total_cmp);
    let mut got_sorted: Vec<f64> = got.iter().map(|w| w.abs()).collect();
    got_sorted.sort_by(f64::total_cmp);
    for (g, e) in got_sorted.iter().zip(&expected) {
        if *e > 1.0 {
            assert!((g - e).abs() <= 1e-10 * e, "{g} vs {e}");
        } else {
            assert!(*g < 1e-2);
        }
    }
}

#[test]
fn resonant_co2_has_two_hybrid_modes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &example());
    let o = run("modes", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let characters: Vec<f64> = csv_rows(&dir.path().join("modes.csv"))
        .iter()
        .map(|r| num(&r[2]))
        .collect();
    let hybrid = characters.iter().filter(|&&c| c > 1e-10 && c < 1.0).count();
    let pure = characters.iter().filter(|&&c| c <= 1e-10).count();
    assert_eq!((hybrid, pure), (2, characters.len() - 2));
}

#[test]
fn quadratic_relaxation_is_fast_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["system"]["atoms"][0]["xyz"] = json!([0.05, -0.03, -2.1]);
    config["system"]["atoms"][2]["xyz"] = json!([0.0, 0.02, 2.35]);
    let path = write_config(dir.path(), "c.json", &config);
    let first = dir.path().join("first");
    let o = run("relax", &path, &first, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eq: Value = serde_json::from_str(&std::fs::read_to_string(first.join("equilibrium.json")).unwrap()).unwrap();
    let iterations = eq["equilibrium"]["iterations"].as_u64().unwrap();
    assert!((1..=5).contains(&iterations), "{iterations}");

    let second = dir.path().join("second");
    let eq_path = first.join("equilibrium.json");
    let o = run("relax", &path, &second, &["--equilibrium", eq_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again: Value =
        serde_json::from_str(&std::fs::read_to_string(second.join("equilibrium.json")).unwrap()).unwrap();
    assert_eq!(again["equilibrium"]["iterations"], 0);
    assert_eq!(
        again["equilibrium"]["configuration"],
        eq["equilibrium"]["configuration"]
    );
}

#[test]
fn trust_radius_violation_names_the_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["system"]["atoms"][1]["xyz"] = json!([0.0, 1.5, 0.0]);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("relax", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(
        msg.contains("coordinate 4") && msg.contains("atom 1 C, axis y"),
        "{msg}"
    );
}

#[test]
fn malformed_lambda_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["sweep"]["lambdas"] = json!([0.0, 0.02, "0.05x"]);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("sweep", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep.lambdas[2]"), "{}", stderr(&o));
}

#[test]
fn sweep_at_zero_coupling_has_equal_variants() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["sweep"]["lambdas"] = json!([0.0]);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("sweep", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    let r: Vec<f64> = rows[0][1..9].iter().map(|c| num(c)).collect();
    for pair in r.chunks(2).skip(1) {
        assert!((pair[0] - r[0]).abs() < 1e-6 && (pair[1] - r[1]).abs() < 1e-6);
    }
}

#[test]
fn sweep_splitting_grows_with_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["sweep"]["lambdas"] = json!([0.0, 0.02, 0.05, 0.1]);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("sweep", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let split: Vec<f64> = csv_rows(&dir.path().join("sweep.csv"))
        .iter()
        .map(|r| num(&r[2]) - num(&r[1]))
        .collect();
    assert!(split.windows(2).all(|w| w[1] > w[0]), "{split:?}");
}

fn collective(n_mol: usize, direct: bool) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["collective"]["n_mol"] = json!(n_mol);
    config["collective"]["direct"] = json!(direct);
    let path = write_config(dir.path(), "c.json", &config);
    let o = run("collective", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("collective.json")).unwrap()).unwrap()
}

#[test]
fn collective_reports() {
    let one = collective(1, true);
    assert_eq!(one["report"]["dark_mode_count"], 0);
    let four = collective(4, true);
    assert_eq!(four["report"]["dark_mode_count"], 3);
    assert_eq!(four["report"]["dark_mode_count_direct"], 3);
    assert!(four["report"]["max_mode_freq_rel_diff"].as_f64().unwrap() <= 1e-6);
    let eight = collective(8, false);
    assert_eq!(eight["report"]["dark_mode_count"], 7);
    assert!(eight["report"]["splitting_direct"].is_null());
}

#[test]
fn model_compare_full_variant_tracks_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c.json", &example());
    let o = run("model-compare", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for r in csv_rows(&dir.path().join("model_compare.csv")) {
        let (pipeline, full) = (num(&r[1]), num(&r[3]));
        if pipeline.abs() > 1.0 {
            assert!((pipeline - full).abs() <= 1e-9 * pipeline.abs());
        }
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = example();
    config["format"] = json!(99);
    let path = write_config(dir.path(), "future.json", &config);
    assert_eq!(run("modes", &path, dir.path(), &[]).status.code(), Some(2));

    let mut config = example();
    config["numerics"]["typo"] = json!(1);
    let path = write_config(dir.path(), "typo.json", &config);
    assert_eq!(run("modes", &path, dir.path(), &[]).status.code(), Some(2));

    let mut config = example();
    config.as_object_mut().unwrap().remove("collective");
    let path = write_config(dir.path(), "nocoll.json", &config);
    assert_eq!(run("collective", &path, dir.path(), &[]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(run("modes", &missing, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn tabulated_surface_runs_modes_but_not_sweep() {
    let (k, w) = (0.5, 0.01);
    let xs: Vec<f64> = (-4..=4).map(|i| 0.05 * i as f64).collect();
    let qs: Vec<f64> = (-3..=3).map(|i| 2.0 * i as f64).collect();
    let mut energies = Vec::new();
    let mut dipoles = Vec::new();
    for &x in &xs {
        for &q in &qs {
            energies.push(0.5 * k * x * x + 0.5 * w * w * q * q);
            dipoles.push([0.0, 0.0, 0.3 * x]);
        }
    }
    let config = json!({
        "format": 1,
        "system": {
            "atoms": [{"label": "X", "mass": 1.0, "Z": 0.0, "xyz": [0.0, 0.0, 0.0]}],
            "photon_modes": [{"omega_cm1": w * 219474.6313632, "lambda_xyz": [0.0, 0.0, 0.01]}]
        },
        "backend": {"type": "grid", "axes": [xs, [0.0], [0.0], qs], "energies": energies, "dipoles": dipoles},
        "sweep": {"lambdas": [0.0, 0.01]}
    });
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "grid.json", &config);
    let o = run("modes", &path, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let freqs: Vec<f64> = csv_rows(&dir.path().join("modes.csv"))
        .iter()
        .map(|r| num(&r[1]))
        .collect();
    let vib = (k / 1822.888486209_f64).sqrt() * 219474.6313632;
    assert!(
        freqs.iter().any(|f| (f - vib).abs() <= 1e-8 * vib),
        "{freqs:?} vs {vib}"
    );
    assert!(
        freqs.iter().any(|f| (f - w * 219474.6313632).abs() <= 1e-6),
        "{freqs:?}"
    );
    assert_eq!(run("sweep", &path, dir.path(), &[]).status.code(), Some(2));
}
