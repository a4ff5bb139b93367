//! Matrix Market reader.
//!
//! Square inputs (coordinate or array, `general` or `symmetric` storage)
//! become [`SymmetricOperator::Dense`]; `symmetric` storage is mirrored
//! from the stored triangle, and `general` inputs are validated as
//! numerically symmetric. Rectangular n x r inputs are interpreted as a
//! factor: each column becomes a sparse vector `x_j` and the operator is
//! `sum_j x_j x_j^T`, which is symmetric PSD by construction.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{SparseVector, SymmetricOperator, DENSE_GUARD};
use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: &Path) -> Result<SymmetricOperator> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (format, symmetry) = {
        let (lineno, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let line = io_line(path, first)?;
        parse_header(lineno + 1, &line)?
    };

    // Skip comments and blank lines up to the size line.
    let (size_lineno, size_line) = loop {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing size line"))?;
        let line = io_line(path, line)?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        break (lineno + 1, line);
    };

    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(size_lineno, &format!("bad size token '{t}'")))
        })
        .collect::<Result<_>>()?;

    match format {
        Format::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(size_lineno, "coordinate size line needs rows cols nnz"));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            check_dims(size_lineno, rows, cols)?;
            let mut entries = Vec::with_capacity(nnz);
            let mut read = 0;
            for (lineno, line) in lines {
                let line = io_line(path, line)?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                let mut toks = trimmed.split_whitespace();
                let i: usize = next_tok(&mut toks, lineno + 1)?;
                let j: usize = next_tok(&mut toks, lineno + 1)?;
                let v: f64 = next_tok(&mut toks, lineno + 1)?;
                if i < 1 || i > rows || j < 1 || j > cols {
                    return Err(parse_err(lineno + 1, &format!("index ({i}, {j}) out of range")));
                }
                if !v.is_finite() {
                    return Err(parse_err(lineno + 1, "non-finite entry"));
                }
                entries.push((i - 1, j - 1, v));
                read += 1;
            }
            if read != nnz {
                return Err(parse_err(
                    size_lineno,
                    &format!("expected {nnz} entries, found {read}"),
                ));
            }
            if rows == cols {
                square_from_entries(rows, &entries, symmetry)
            } else {
                factor_from_entries(rows, cols, &entries)
            }
        }
        Format::Array => {
            if dims.len() != 2 {
                return Err(parse_err(size_lineno, "array size line needs rows cols"));
            }
            let (rows, cols) = (dims[0], dims[1]);
            check_dims(size_lineno, rows, cols)?;
            let mut values = Vec::with_capacity(rows * cols);
            for (lineno, line) in lines {
                let line = io_line(path, line)?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                for tok in trimmed.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(lineno + 1, &format!("bad value '{tok}'")))?;
                    if !v.is_finite() {
                        return Err(parse_err(lineno + 1, "non-finite entry"));
                    }
                    values.push(v);
                }
            }
            let expected = match symmetry {
                // Array symmetric storage holds the lower triangle by columns.
                Symmetry::Symmetric => rows * (rows + 1) / 2,
                Symmetry::General => rows * cols,
            };
            if values.len() != expected {
                return Err(parse_err(
                    size_lineno,
                    &format!("expected {expected} array values, found {}", values.len()),
                ));
            }
            let matrix = match symmetry {
                Symmetry::General => DenseMatrix::from_col_major(rows, cols, values),
                Symmetry::Symmetric => {
                    let mut m = DenseMatrix::zeros(rows, rows);
                    let mut it = values.into_iter();
                    for j in 0..rows {
                        for i in j..rows {
                            let v = it.next().unwrap();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                    m
                }
            };
            if rows == cols {
                SymmetricOperator::dense(matrix)
            } else {
                let entries: Vec<(usize, usize, f64)> = (0..cols)
                    .flat_map(|j| (0..rows).map(move |i| (i, j)))
                    .map(|(i, j)| (i, j, matrix[(i, j)]))
                    .filter(|&(_, _, v)| v != 0.0)
                    .collect();
                factor_from_entries(rows, cols, &entries)
            }
        }
    }
}

fn parse_header(lineno: usize, line: &str) -> Result<(Format, Symmetry)> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some("%%MatrixMarket") {
        return Err(parse_err(lineno, "first line must start with %%MatrixMarket"));
    }
    if toks.next() != Some("matrix") {
        return Err(parse_err(lineno, "only 'matrix' objects are supported"));
    }
    let format = match toks.next() {
        Some("coordinate") => Format::Coordinate,
        Some("array") => Format::Array,
        other => {
            return Err(parse_err(
                lineno,
                &format!("unsupported format {other:?}; expected coordinate or array"),
            ))
        }
    };
    match toks.next() {
        Some("real") | Some("integer") => {}
        other => {
            return Err(parse_err(
                lineno,
                &format!("unsupported field {other:?}; expected real or integer"),
            ))
        }
    }
    let symmetry = match toks.next() {
        Some("general") | None => Symmetry::General,
        Some("symmetric") => Symmetry::Symmetric,
        other => {
            return Err(parse_err(
                lineno,
                &format!("unsupported symmetry {other:?}; expected general or symmetric"),
            ))
        }
    };
    Ok((format, symmetry))
}

fn square_from_entries(
    n: usize,
    entries: &[(usize, usize, f64)],
    symmetry: Symmetry,
) -> Result<SymmetricOperator> {
    if n > DENSE_GUARD {
        return Err(Error::TooLarge { n, limit: DENSE_GUARD });
    }
    let mut m = DenseMatrix::zeros(n, n);
    for &(i, j, v) in entries {
        m[(i, j)] += v;
        if symmetry == Symmetry::Symmetric && i != j {
            m[(j, i)] += v;
        }
    }
    SymmetricOperator::dense(m)
}

fn factor_from_entries(
    rows: usize,
    cols: usize,
    entries: &[(usize, usize, f64)],
) -> Result<SymmetricOperator> {
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cols];
    for &(i, j, v) in entries {
        columns[j].push((i, v));
    }
    let mut terms = Vec::with_capacity(cols);
    for mut col in columns {
        if col.is_empty() {
            continue;
        }
        col.sort_by_key(|&(i, _)| i);
        let (indices, values): (Vec<usize>, Vec<f64>) = col.into_iter().unzip();
        terms.push((1.0, SparseVector::new(rows, indices, values)?));
    }
    SymmetricOperator::outer_product_sum(rows, terms)
}

fn check_dims(lineno: usize, rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(parse_err(lineno, "matrix dimensions must be positive"));
    }
    Ok(())
}

fn next_tok<T: std::str::FromStr>(
    toks: &mut std::str::SplitWhitespace<'_>,
    lineno: usize,
) -> Result<T> {
    toks.next()
        .ok_or_else(|| parse_err(lineno, "missing token"))?
        .parse::<T>()
        .map_err(|_| parse_err(lineno, "malformed token"))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn io_line(path: &Path, line: std::io::Result<String>) -> Result<String> {
    line.map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
