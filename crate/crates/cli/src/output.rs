//! Output directory handling and the fixed-format text tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use floquet_core::{BandTable, Error, Result};

use crate::config::EffectiveConfig;

/// 17 significant digits, so values round-trip exactly.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates the directory and writes the effective configuration echo.
    pub fn create(cfg: &EffectiveConfig) -> Result<Self> {
        let root = cfg.output_dir.clone();
        std::fs::create_dir_all(&root).map_err(|source| io_error(&root, source))?;
        let dir = Self { root };
        dir.write("effective_config.toml", &cfg.to_toml())?;
        Ok(dir)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|source| io_error(&path, source))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One row per quasimomentum (the `t = -1` left limit first), one column per
/// band index. Missing values are left empty.
pub fn band_csv(table: &BandTable) -> String {
    let indices = table.indices();
    let mut s = String::from("t");
    for i in &indices {
        write!(s, ",s={i}").unwrap();
    }
    s.push('\n');
    if let Some(left) = &table.left_limit {
        s.push_str(&num(-1.0));
        for i in &indices {
            s.push(',');
            if let Some(v) = left.get(i) {
                s.push_str(&num(*v));
            }
        }
        s.push('\n');
    }
    for (row, t) in table.t_grid.iter().enumerate() {
        s.push_str(&num(*t));
        for i in &indices {
            s.push(',');
            if let Some(v) = table.bands[i].get(row) {
                s.push_str(&num(*v));
            }
        }
        s.push('\n');
    }
    s
}

pub struct DeterminantRow {
    pub lambda: f64,
    pub t: f64,
    pub abs_normalized: f64,
    pub value: Option<Complex64>,
    pub status: String,
}

pub fn determinant_csv(rows: &[DeterminantRow]) -> String {
    let mut s = String::from("lambda,t,abs_normalized,re,im,status\n");
    for r in rows {
        let (re, im) = r
            .value
            .map_or((String::new(), String::new()), |z| (num(z.re), num(z.im)));
        let abs = if r.abs_normalized.is_nan() {
            String::new()
        } else {
            num(r.abs_normalized)
        };
        // Keep the status in one field.
        let status = r.status.replace([',', '\n'], ";");
        writeln!(s, "{},{},{},{},{},{}", num(r.lambda), num(r.t), abs, re, im, status).unwrap();
    }
    s
}
