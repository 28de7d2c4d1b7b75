//! Drive a full experiment from a TOML file, as the `conical` binary does.
//!
//!     cargo run --release --example config_run [config.toml] [out_dir]

use std::path::PathBuf;

use conical::cli::{self, ExperimentConfig};
use conical::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/lz_table.toml"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("conical-config-run"));
    let cfg = ExperimentConfig::load(&path)?;
    let report = cli::run(&cfg, &out)?;
    for (k, v) in &report.summary {
        println!("{k} = {v:.6e}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
