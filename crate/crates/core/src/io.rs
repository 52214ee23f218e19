//! Plain-text matrix format: a `rows cols` header line followed by the
//! entries in row-major order, separated by whitespace.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {name} in matrix header")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {name} in matrix header: {e}")))
    };
    let rows = dim("rows")?;
    let cols = dim("cols")?;
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad matrix entry {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "matrix header says {rows}x{cols} but {} entries follow",
            values.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

/// Reads a matrix file that must hold a single column.
pub fn read_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!(
            "expected a column vector, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_header_and_rows() {
        let m = parse_matrix("2 3\n1 2 3\n4 5 6.5e-1\n").unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m[(1, 2)], 0.65);
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn rejects_wrong_count() {
        assert!(parse_matrix("2 2\n1 2 3\n").is_err());
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1 1\nx").is_err());
    }

    proptest! {
        #[test]
        fn text_format_roundtrips_exactly(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in prop::collection::vec(-1e6f64..1e6, 36),
        ) {
            let m = DMatrix::from_fn(rows, cols, |i, j| seed[i * 6 + j] / 7.0);
            let back = parse_matrix(&format_matrix(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
