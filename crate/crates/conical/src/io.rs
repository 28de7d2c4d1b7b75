//! CSV tables and binary field dumps with JSON sidecars.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::Result;

/// Floats are written with 17 significant digits so that values round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table with a fixed header, written in one go.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path).map_err(std::io::Error::other)?;
        w.write_record(&self.header).map_err(std::io::Error::other)?;
        for r in &self.rows {
            w.write_record(r).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sidecar describing a raw field dump: little-endian `f64` pairs `(re, im)`,
/// row-major, components interleaved per point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldMeta {
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub components: usize,
    pub time: f64,
    pub epsilon: Option<f64>,
    pub label: String,
}

/// Write `<stem>.bin` and `<stem>.json`; returns the path of the binary file.
pub fn dump_field(dir: &Path, stem: &str, grid: &Grid, comps: &[&[Complex64]], time: f64, epsilon: Option<f64>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let bin = dir.join(format!("{stem}.bin"));
    let mut w = BufWriter::new(File::create(&bin)?);
    for i in 0..grid.len() {
        for c in comps {
            w.write_all(&c[i].re.to_le_bytes())?;
            w.write_all(&c[i].im.to_le_bytes())?;
        }
    }
    w.flush()?;
    let meta = FieldMeta {
        n: grid.n,
        lo: grid.lo.clone(),
        hi: grid.hi.clone(),
        components: comps.len(),
        time,
        epsilon,
        label: stem.to_string(),
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
    Ok(bin)
}

/// Read a dump back as `(meta, components)`.
pub fn load_field(bin: &Path) -> Result<(FieldMeta, Vec<Vec<Complex64>>)> {
    let meta: FieldMeta = serde_json::from_str(&fs::read_to_string(bin.with_extension("json"))?)?;
    let bytes = fs::read(bin)?;
    let nc = meta.components;
    let len = meta.n.pow(meta.lo.len() as u32);
    if bytes.len() != len * nc * 16 {
        return Err(crate::Error::Invalid(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            len * nc * 16
        )));
    }
    let mut comps = vec![Vec::with_capacity(len); nc];
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    for i in 0..len {
        for (c, comp) in comps.iter_mut().enumerate() {
            let k = 2 * (i * nc + c);
            comp.push(Complex64::new(f(k), f(k + 1)));
        }
    }
    Ok((meta, comps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, std::f64::consts::PI * 1e10] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn dump_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::cube(2, 4, 1.0);
        let a: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect();
        let b: Vec<Complex64> = a.iter().map(|z| z * 2.0).collect();
        let bin = dump_field(dir.path(), "f", &g, &[&a, &b], 0.25, Some(0.01)).unwrap();
        let (meta, comps) = load_field(&bin).unwrap();
        assert_eq!(meta.components, 2);
        assert_eq!(comps[0], a);
        assert_eq!(comps[1], b);
        let mut t = Table::new(&["x", "y"]);
        t.push_floats(&[1.0, 2.0]);
        let p = dir.path().join("t.csv");
        t.write(&p).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with("x,y\n1.0000000000000000e0,"));
    }
}
