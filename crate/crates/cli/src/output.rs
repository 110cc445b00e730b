//! CSV files with a `#`-prefixed JSON header line.
//!
//! Floats are written with 17 significant digits, so every value
//! round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::Value;

/// One CSV cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell<'a> {
    F(f64),
    I(i64),
    U(u64),
    S(&'a str),
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<i64> for Cell<'_> {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}
impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}
impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::S(v)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
    rows: u64,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &Value, columns: &[&str]) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(f);
        writeln!(out, "# {}", serde_json::to_string(header)?)?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(CsvWriter { path: path.to_path_buf(), out, columns: columns.len(), rows: 0 })
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) -> anyhow::Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.out.write_all(b",")?;
            }
            match c {
                Cell::F(v) => self.out.write_all(fmt_f64(*v).as_bytes())?,
                Cell::I(v) => write!(self.out, "{v}")?,
                Cell::U(v) => write!(self.out, "{v}")?,
                Cell::S(s) => self.out.write_all(s.as_bytes())?,
            }
        }
        self.out.write_all(b"\n")?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<(PathBuf, u64)> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))?;
        Ok((self.path, self.rows))
    }
}

/// Split a file written by [`CsvWriter`] into its header, column names and
/// rows.
pub fn read_csv(path: &Path) -> anyhow::Result<(Value, Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let head = lines.next().and_then(|l| l.strip_prefix("# ")).context("missing '# ' header line")?;
    let header: Value = serde_json::from_str(head).context("header is not JSON")?;
    let columns = lines.next().context("missing column line")?.split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.csv");
        let mut w = CsvWriter::create(&p, &json!({"seed": 3}), &["k", "x", "tag"]).unwrap();
        w.row(&[1u64.into(), 0.5.into(), "up".into()]).unwrap();
        w.row(&[(-2i64).into(), f64::NAN.into(), "down".into()]).unwrap();
        assert_eq!(w.finish().unwrap().1, 2);
        let (h, cols, rows) = read_csv(&p).unwrap();
        assert_eq!(h["seed"], 3);
        assert_eq!(cols, ["k", "x", "tag"]);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.5);
        assert_eq!(rows[1][0], "-2");
    }
}
