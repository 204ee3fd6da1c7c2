//! Append-only CSV logs with a fixed header.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum CsvField {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<i64> for CsvField {
    fn from(v: i64) -> Self {
        CsvField::Int(v)
    }
}

impl From<usize> for CsvField {
    fn from(v: usize) -> Self {
        CsvField::Int(v as i64)
    }
}

impl From<f64> for CsvField {
    fn from(v: f64) -> Self {
        CsvField::Real(v)
    }
}

impl From<&str> for CsvField {
    fn from(v: &str) -> Self {
        CsvField::Text(v.to_string())
    }
}

/// 17 significant digits in scientific notation, independent of locale.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

impl std::fmt::Display for CsvField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvField::Int(v) => write!(f, "{v}"),
            CsvField::Real(v) => f.write_str(&format_real(*v)),
            CsvField::Text(s) => f.write_str(s),
        }
    }
}

fn existing_header(path: &Path) -> Result<Option<String>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    if line.is_empty() {
        return Ok(None);
    }
    Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
}

/// Append one row, writing `header` first if the file is new or empty.
///
/// A file that already starts with a different header is left untouched and
/// an error is returned. Each call issues a single write.
pub fn append_csv(path: impl AsRef<Path>, header: &str, row: &[CsvField]) -> Result<()> {
    let path = path.as_ref();
    let columns = header.split(',').count();
    if row.len() != columns {
        return Err(Error::Shape(format!(
            "row has {} fields, header `{header}` has {columns}",
            row.len()
        )));
    }
    let mut text = String::new();
    match existing_header(path)? {
        Some(h) if h == header => {}
        Some(h) => {
            return Err(Error::Config(format!(
                "{} has header `{h}`, expected `{header}`",
                path.display()
            )))
        }
        None => {
            text.push_str(header);
            text.push('\n');
        }
    }
    let fields: Vec<String> = row.iter().map(ToString::to_string).collect();
    text.push_str(&fields.join(","));
    text.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Write a whole CSV table, replacing any existing file.
pub fn write_csv(path: impl AsRef<Path>, header: &str, rows: &[Vec<CsvField>]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(ToString::to_string).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_header_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        append_csv(&p, "step,loss", &[1usize.into(), 0.5.into()]).unwrap();
        append_csv(&p, "step,loss", &[2usize.into(), 0.25.into()]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "step,loss\n1,5.0000000000000000e-1\n2,2.5000000000000000e-1\n"
        );
    }

    #[test]
    fn mismatched_header_leaves_file_alone() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        append_csv(&p, "a,b", &[1usize.into(), 2usize.into()]).unwrap();
        let before = fs::read(&p).unwrap();
        assert!(append_csv(&p, "a,c", &[1usize.into(), 2usize.into()]).is_err());
        assert_eq!(fs::read(&p).unwrap(), before);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let v = 0.1 + 0.2;
        let s = format_real(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
