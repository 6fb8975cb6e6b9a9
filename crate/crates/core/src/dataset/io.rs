use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::dataset::{check_permutation, MultiViewDataset};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Scalar};

const MVW_MAGIC: &[u8; 4] = b"MVW1";

/// On-disk encoding for view matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViewFormat {
    #[default]
    Csv,
    Binary,
}

fn view_path(dir: &Path, v: usize, ext: &str) -> PathBuf {
    dir.join(format!("view_{}.{ext}", v + 1))
}

/// Loads `view_<v>.{csv,mvw}` (1-based, consecutive) plus the optional
/// `labels.csv`, `aligned_mask.csv` and `corr_<v>.csv` files.
pub fn load_dataset<T: Scalar>(dir: impl AsRef<Path>) -> Result<MultiViewDataset<T>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::format(dir, None, "not a dataset directory"));
    }

    let mut views = Vec::new();
    let mut sources = Vec::new();
    for v in 0.. {
        let csv = view_path(dir, v, "csv");
        let bin = view_path(dir, v, "mvw");
        let m = match (csv.is_file(), bin.is_file()) {
            (true, true) => {
                return Err(Error::format(&csv, None, format!("both {} and its binary twin exist", csv.display())))
            }
            (true, false) => {
                sources.push(csv.clone());
                read_matrix_csv(&csv)?
            }
            (false, true) => {
                sources.push(bin.clone());
                read_matrix_binary(&bin)?
            }
            (false, false) => break,
        };
        views.push(m.map_to::<T>());
    }
    if views.is_empty() {
        return Err(Error::format(dir, None, "no view_1.csv or view_1.mvw found"));
    }
    let n = views[0].rows();
    for (m, path) in views.iter().zip(&sources) {
        if m.rows() != n {
            return Err(Error::format(
                path,
                None,
                format!("{} rows but {} has {n}", m.rows(), sources[0].display()),
            ));
        }
    }

    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.is_file() {
        let l = read_integers(&labels_path)?;
        if l.len() != n {
            return Err(Error::format(&labels_path, None, format!("{} labels for {n} samples", l.len())));
        }
        Some(l)
    } else {
        None
    };

    let mask_path = dir.join("aligned_mask.csv");
    let mask = if mask_path.is_file() {
        let mut mask = Vec::new();
        for (line, value) in read_numbered_integers(&mask_path)? {
            if value > 1 {
                return Err(Error::format(&mask_path, Some(line), format!("mask entry {value} is not 0 or 1")));
            }
            mask.push(value as u8);
        }
        if mask.len() != n {
            return Err(Error::format(&mask_path, None, format!("{} entries for {n} samples", mask.len())));
        }
        mask
    } else {
        vec![1; n]
    };

    let mut corr = Vec::with_capacity(views.len());
    for v in 0..views.len() {
        let path = dir.join(format!("corr_{}.csv", v + 1));
        let p = if path.is_file() {
            let p = read_integers(&path)?;
            check_permutation(&p, n).map_err(|e| Error::format(&path, None, format!("not a permutation: {e}")))?;
            p
        } else {
            (0..n).collect()
        };
        corr.push(p);
    }

    MultiViewDataset::new(views, labels, mask, corr).map_err(|e| match e {
        Error::Precondition(msg) => Error::format(dir, None, msg),
        other => other,
    })
}

/// Writes the dataset in the directory layout read by [`load_dataset`].
/// Labels, mask and correspondences are always written.
pub fn save_dataset<T: Scalar>(dir: impl AsRef<Path>, ds: &MultiViewDataset<T>, format: ViewFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (v, m) in ds.views().iter().enumerate() {
        match format {
            ViewFormat::Csv => write_matrix_csv(view_path(dir, v, "csv"), m)?,
            ViewFormat::Binary => write_matrix_binary(view_path(dir, v, "mvw"), m)?,
        }
    }
    if let Some(labels) = ds.labels() {
        write_lines(dir.join("labels.csv"), labels.iter())?;
    }
    write_lines(dir.join("aligned_mask.csv"), ds.aligned_mask().iter())?;
    for (v, corr) in ds.true_correspondence().iter().enumerate() {
        write_lines(dir.join(format!("corr_{}.csv", v + 1)), corr.iter())?;
    }
    Ok(())
}

impl<T: Scalar> Matrix<T> {
    fn map_to<U: Scalar>(&self) -> Matrix<U> {
        Matrix::from_vec(
            self.rows(),
            self.cols(),
            self.as_slice().iter().map(|&v| U::lit(v.as_f64())).collect(),
        )
        .expect("same shape")
    }
}

/// Yields `(1-based line number, trimmed content)` for non-blank lines.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn read_numbered_integers(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    numbered_lines(&text)
        .map(|(line, s)| {
            s.parse::<usize>()
                .map(|v| (line, v))
                .map_err(|_| Error::format(path, Some(line), format!("expected a non-negative integer, got {s:?}")))
        })
        .collect()
}

fn read_integers(path: &Path) -> Result<Vec<usize>> {
    Ok(read_numbered_integers(path)?.into_iter().map(|(_, v)| v).collect())
}

fn read_matrix_csv(path: &Path) -> Result<Matrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (line, s) in numbered_lines(&text) {
        let before = data.len();
        for field in s.split(',') {
            let field = field.trim();
            let value: f64 = field
                .parse()
                .map_err(|_| Error::format(path, Some(line), format!("cannot parse {field:?} as a number")))?;
            if !value.is_finite() {
                return Err(Error::format(path, Some(line), "non-finite value"));
            }
            data.push(value);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::format(path, Some(line), format!("{width} columns, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

fn write_matrix_csv<T: Scalar>(path: PathBuf, m: &Matrix<T>) -> Result<()> {
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        for row in m.row_iter() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b",")?;
                }
                // `Display` for f64 is the shortest string that parses back exactly.
                write!(w, "{}", v.as_f64())?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(&path, e))
}

/// Reads an `MVW1` file: magic, `u32` rows, `u32` cols, row-major `f64`s, all little-endian.
pub fn read_matrix_binary(path: impl AsRef<Path>) -> Result<Matrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != MVW_MAGIC {
        return Err(Error::format(path, None, "missing MVW1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::format(path, None, "header dimensions overflow"))?;
    if body.len() != expected {
        return Err(Error::format(
            path,
            None,
            format!("{rows}x{cols} header needs {expected} payload bytes, found {}", body.len()),
        ));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, None, "non-finite value"));
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_matrix_binary<T: Scalar>(path: impl AsRef<Path>, m: &Matrix<T>) -> Result<()> {
    let path = path.as_ref();
    let too_big = |what| Error::format(path, None, format!("{what} exceeds u32"));
    let rows = u32::try_from(m.rows()).map_err(|_| too_big("row count"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| too_big("column count"))?;
    let mut bytes = Vec::with_capacity(12 + 8 * m.as_slice().len());
    bytes.extend_from_slice(MVW_MAGIC);
    bytes.extend_from_slice(&rows.to_le_bytes());
    bytes.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        bytes.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_lines<I: std::fmt::Display>(path: PathBuf, items: impl Iterator<Item = I>) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&item.to_string());
        out.push('\n');
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))
}
