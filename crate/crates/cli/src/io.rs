//! CSV tables, image grids (CSV matrix or binary PGM) and JSON documents.
//!
//! CSV dialect: comma separated, `.` decimal point, a mandatory header row,
//! blank lines and lines starting with `#` ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut headers: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let Some(h) = &headers else {
                headers = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != h.len() {
                return Err(CliError::usage(format!(
                    "line {}: expected {} fields, found {}",
                    i + 1,
                    h.len(),
                    fields.len()
                )));
            }
            let row = fields
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| !v.is_infinite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| CliError::usage(format!("line {}: malformed number in '{line}'", i + 1)))?;
            rows.push(row);
        }
        let headers = headers.ok_or_else(|| CliError::usage("CSV has no header row"))?;
        Ok(Self { headers, rows })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn from_columns(headers: &[&str], columns: &[&[f64]]) -> Self {
        let n = columns.first().map_or(0, |c| c.len());
        debug_assert!(columns.iter().all(|c| c.len() == n));
        Self {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column_at(&self, j: usize) -> CliResult<Vec<f64>> {
        if j >= self.headers.len() {
            return Err(CliError::usage(format!("CSV has no column {}", j + 1)));
        }
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Column called `name`, or column `fallback` when no header matches.
    pub fn column_or(&self, name: &str, fallback: usize) -> CliResult<Vec<f64>> {
        self.column_at(self.column_index(name).unwrap_or(fallback))
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_text(path, &self.to_csv())
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> CliResult<Self> {
        if rows == 0 || cols == 0 || rows * cols != values.len() {
            return Err(CliError::usage(format!("{} pixel values do not form a {rows}x{cols} image", values.len())));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// CSV matrix: one image row per line after the header row.
    pub fn from_table(table: &Table) -> CliResult<Self> {
        let rows = table.rows.len();
        Self::new(rows, table.headers.len(), table.rows.concat())
    }

    pub fn to_table(&self) -> Table {
        Table {
            headers: (0..self.cols).map(|c| format!("c{c}")).collect(),
            rows: self.values.chunks(self.cols).map(<[f64]>::to_vec).collect(),
        }
    }

    /// Binary 8-bit PGM (P5), rescaled to `[0, 1]`.
    pub fn parse_pgm(bytes: &[u8]) -> CliResult<Self> {
        let bad = |msg: &str| CliError::usage(format!("PGM: {msg}"));
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
        }
        if tokens[0] != "P5" {
            return Err(bad("only binary P5 images are supported"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed header number"));
        let (cols, rows, maxval) = (num(tokens[1])?, num(tokens[2])?, num(tokens[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit images are supported"));
        }
        pos += 1;
        let data = bytes.get(pos..pos + rows * cols).ok_or_else(|| bad("pixel data is truncated"))?;
        Self::new(rows, cols, data.iter().map(|&b| b as f64 / maxval as f64).collect())
    }

    /// Values are clamped to `[0, 1]` and quantized to 8 bits.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    /// Reads `.pgm` files as PGM and anything else as a CSV matrix.
    pub fn read(path: &Path) -> CliResult<Self> {
        if is_pgm(path) {
            let bytes = fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            Self::parse_pgm(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        } else {
            Self::from_table(&Table::read(path)?)
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if is_pgm(path) {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            }
            fs::write(path, self.to_pgm()).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
        } else {
            self.to_table().write(path)
        }
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_skips_comments_and_names_bad_lines() {
        let t = Table::parse("# note\nt,y\n0,1.5\n\n# mid\n1,2e-3\n").unwrap();
        assert_eq!(t.headers, vec!["t", "y"]);
        assert_eq!(t.rows, vec![vec![0.0, 1.5], vec![1.0, 2e-3]]);
        let err = Table::parse("t,y\n0,1\n1,abc\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(Table::parse("t,y\n0,1,2\n").unwrap_err().to_string().contains("line 2"));
        assert!(Table::parse("# only comments\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let vals = [0.1, -1.0 / 3.0, 1e-300, 12345.678];
        let t = Table::from_columns(&["a", "b"], &[&vals, &vals]);
        assert_eq!(Table::parse(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn pgm_round_trip_is_lossless() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend([0u8, 17, 128, 200, 254, 255]);
        let img = ImageGrid::parse_pgm(&bytes).unwrap();
        assert_eq!((img.rows, img.cols), (2, 3));
        let again = ImageGrid::parse_pgm(&img.to_pgm()).unwrap();
        assert_eq!(again, img);
        assert_eq!(&again.to_pgm()[again.to_pgm().len() - 6..], &[0u8, 17, 128, 200, 254, 255]);
    }

    #[test]
    fn non_rectangular_image_csv_is_rejected() {
        assert!(Table::parse("c0,c1\n1,2\n3\n").is_err());
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
    }
}
