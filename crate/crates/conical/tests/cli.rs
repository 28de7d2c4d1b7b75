use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conical"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

#[test]
fn lz_scatter_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["lz-scatter", "--threads", "1", "--config"])
        .arg(config("lz_table.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(rows(&dir.path().join("lz_table.csv")), 7);
}

#[test]
fn classical_writes_trajectory_and_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["classical", "--config"])
        .arg(config("classical.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(rows(&dir.path().join("trajectory.csv")) > 0);
    let crossing = std::fs::read_to_string(dir.path().join("crossing.csv")).unwrap();
    let t_flat: f64 = crossing.lines().find_map(|l| l.strip_prefix("t_flat,")).unwrap().parse().unwrap();
    assert!((t_flat - (2f64.sqrt() - 1.0)).abs() < 1e-9);
}

#[test]
fn missing_config_is_a_validation_error() {
    let st = bin().arg("simulate").status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "kind = \"lz-table\"\nbogus = 1\n[model]\nname = \"linear-isotropic\"\n[lz]\neta2 = [0.5]\n",
    );
    let st = bin()
        .arg("simulate")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn ascending_epsilons_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(config("crossing_single.toml"))
        .unwrap()
        .replace("[0.02, 0.01, 0.005]", "[0.005, 0.01, 0.02]");
    let cfg = write(dir.path(), &body);
    let st = bin()
        .arg("sweep")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn packet_on_the_crossing_set_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let body = std::fs::read_to_string(config("classical.toml"))
        .unwrap()
        .replace("q = [-0.5, 0.0]", "q = [0.0, 0.0]");
    let cfg = write(dir.path(), &body);
    let st = bin()
        .arg("classical")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
}
