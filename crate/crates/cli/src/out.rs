use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mflq_types::linalg::Mat;
use serde::Serialize;

use crate::CliError;

/// 17 significant digits, round-trip exact.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column names `name_i_j`, row-major.
pub fn mat_header(name: &str, m: &Mat) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(format!("{name}_{i}_{j}"));
        }
    }
    out
}

pub fn mat_cells(m: &Mat) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(num(m[(i, j)]));
        }
    }
    out
}

/// Artifact directory. Creates it on first write.
pub struct Out {
    dir: PathBuf,
}

impl Out {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| CliError::io(&p, e))
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, v: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Other(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        self.text(name, &s)
    }

    /// `s, name_i_j...` for a matrix path.
    pub fn path_csv(&self, file: &str, name: &str, times: &[f64], vals: &[Mat]) -> Result<(), CliError> {
        let mut header = vec!["s".to_string()];
        if let Some(m) = vals.first() {
            header.extend(mat_header(name, m));
        }
        let rows: Vec<Vec<String>> = times
            .iter()
            .zip(vals)
            .map(|(&s, m)| {
                let mut r = vec![num(s)];
                r.extend(mat_cells(m));
                r
            })
            .collect();
        self.csv(file, &header, &rows)
    }
}
