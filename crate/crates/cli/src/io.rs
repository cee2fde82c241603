//! Matrix readers and writers: Matrix Market, CSV and a raw binary layout.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use levsketch::DenseMatrix;
use serde::Serialize;
use thiserror::Error;

pub const BINARY_MAGIC: &[u8; 4] = b"LEVS";
pub const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    MatrixMarket,
    Csv,
    Binary,
}

impl MatrixFormat {
    /// Guess from the file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") | Some("mm") => MatrixFormat::MatrixMarket,
            Some("bin") | Some("levs") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Matrix(#[from] levsketch::Error),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn open(path: &Path) -> IoResult<fs::File> {
    fs::File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> IoResult<DenseMatrix> {
    let file = open(path)?;
    match format {
        MatrixFormat::MatrixMarket => read_matrix_market(BufReader::new(file)),
        MatrixFormat::Csv => read_csv(BufReader::new(file)),
        MatrixFormat::Binary => read_binary(BufReader::new(file)),
    }
}

pub fn save_matrix(path: &Path, a: &DenseMatrix, format: MatrixFormat) -> IoResult<()> {
    let bytes = match format {
        MatrixFormat::MatrixMarket => matrix_market_string(a).into_bytes(),
        MatrixFormat::Csv => csv_string(a).into_bytes(),
        MatrixFormat::Binary => binary_bytes(a),
    };
    fs::write(path, bytes).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a vector stored as a single row or a single column.
pub fn load_vector(path: &Path, format: MatrixFormat) -> IoResult<Vec<f64>> {
    let m = load_matrix(path, format)?;
    if m.rows() != 1 && m.cols() != 1 {
        return Err(parse_error(
            1,
            1,
            format!(
                "expected a vector, found a {} x {} matrix",
                m.rows(),
                m.cols()
            ),
        ));
    }
    Ok(m.into_vec())
}

fn parse_number<T: FromStr>(token: &str, line: usize, column: usize) -> IoResult<T> {
    token
        .parse()
        .map_err(|_| parse_error(line, column, format!("cannot parse {token:?}")))
}

/// Whitespace-separated tokens with their 1-based starting columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn finite(v: f64, line: usize, column: usize) -> IoResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_error(line, column, format!("non-finite value {v}")))
    }
}

/// Real or integer, general, array or coordinate. Duplicate coordinate entries are summed.
pub fn read_matrix_market<R: BufRead>(reader: R) -> IoResult<DenseMatrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, 1, "empty file"))?;
    let header = header.map_err(|e| parse_error(1, 1, e.to_string()))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_error(
            1,
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_error(1, 1, format!("unsupported format {other:?}"))),
    };
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_error(
            1,
            1,
            format!("unsupported field {:?}", fields[3]),
        ));
    }
    if fields[4] != "general" {
        return Err(parse_error(
            1,
            1,
            format!("unsupported symmetry {:?}", fields[4]),
        ));
    }

    let mut body = lines.filter_map(|(idx, l)| match l {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('%') => None,
        Ok(l) => Some(Ok((idx + 1, l))),
        Err(e) => Some(Err(parse_error(idx + 1, 1, e.to_string()))),
    });

    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_error(2, 1, "missing size line"))??;
    let size_tokens = tokens(&size);
    let expected = if coordinate { 3 } else { 2 };
    if size_tokens.len() != expected {
        return Err(parse_error(
            size_line,
            1,
            format!("size line needs {expected} integers"),
        ));
    }
    let dims: Vec<usize> = size_tokens
        .iter()
        .map(|&(c, t)| parse_number(t, size_line, c))
        .collect::<IoResult<_>>()?;
    let (rows, cols) = (dims[0], dims[1]);
    let mut a = DenseMatrix::zeros(rows, cols);

    if coordinate {
        let nnz = dims[2];
        let mut seen = 0;
        for entry in body {
            let (line, text) = entry?;
            let t = tokens(&text);
            if t.len() != 3 {
                return Err(parse_error(
                    line,
                    1,
                    "coordinate entry needs 'row col value'",
                ));
            }
            let i: usize = parse_number(t[0].1, line, t[0].0)?;
            let j: usize = parse_number(t[1].1, line, t[1].0)?;
            if i == 0 || i > rows {
                return Err(parse_error(
                    line,
                    t[0].0,
                    format!("row index {i} out of range"),
                ));
            }
            if j == 0 || j > cols {
                return Err(parse_error(
                    line,
                    t[1].0,
                    format!("column index {j} out of range"),
                ));
            }
            let v = finite(parse_number(t[2].1, line, t[2].0)?, line, t[2].0)?;
            a.row_mut(i - 1)[j - 1] += v;
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_error(
                size_line,
                size_tokens[2].0,
                format!("declared {nnz} entries, found {seen}"),
            ));
        }
    } else {
        let total = rows * cols;
        let mut k = 0;
        for entry in body {
            let (line, text) = entry?;
            for (column, tok) in tokens(&text) {
                if k == total {
                    return Err(parse_error(line, column, "more values than declared"));
                }
                let v = finite(parse_number(tok, line, column)?, line, column)?;
                // column-major order
                a.row_mut(k % rows)[k / rows] = v;
                k += 1;
            }
        }
        if k != total {
            return Err(parse_error(
                size_line,
                1,
                format!("declared {total} values, found {k}"),
            ));
        }
    }
    Ok(a)
}

/// Comma-separated rows; blank lines and lines starting with `#` are skipped.
pub fn read_csv<R: Read>(reader: R) -> IoResult<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(line, 1, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = parse_number(field, line, j + 1)?;
            row.push(finite(v, line, j + 1)?);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(
                    line,
                    row.len().min(first.len()) + 1,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

pub fn read_binary<R: Read>(mut reader: R) -> IoResult<DenseMatrix> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| parse_error(0, 0, e.to_string()))?;
    if bytes.len() < 21 || &bytes[..4] != BINARY_MAGIC {
        return Err(parse_error(0, 0, "missing LEVS header"));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(parse_error(
            0,
            4,
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let payload = &bytes[21..];
    let expected = n.checked_mul(d).and_then(|c| c.checked_mul(8));
    if expected != Some(payload.len()) {
        return Err(parse_error(
            0,
            21,
            format!("expected {n} x {d} doubles, found {} bytes", payload.len()),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DenseMatrix::new(n, d, data)?)
}

/// Array format, column-major. Values use the shortest representation that round-trips.
pub fn matrix_market_string(a: &DenseMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    writeln!(out, "{} {}", a.rows(), a.cols()).unwrap();
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            writeln!(out, "{:?}", a[(i, j)]).unwrap();
        }
    }
    out
}

pub fn csv_string(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn binary_bytes(a: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 8 * a.as_slice().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&(a.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(a.cols() as u64).to_le_bytes());
    for v in a.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_output(path: Option<&Path>, contents: &str) -> IoResult<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|source| IoError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(contents.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|source| IoError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
