//! MatrixMarket coordinate format.
//!
//! Accepted grammar:
//!
//! ```text
//! %%MatrixMarket matrix coordinate (real|integer|pattern) (general|symmetric)
//! % comment lines
//! <rows> <cols> <entries>
//! <row> <col> [value]      (1-based, one entry per line)
//! ```
//!
//! Entries become a `U_M C_K` matrix. Duplicate coordinates are rejected and
//! explicit zeros are dropped.

use std::io::{BufRead, Write};

use super::ccf::{CcfDescriptor, Dim, Role};
use super::matrix::{Payload, StoredMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<StoredMatrix> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (lno, header) = lines
        .next()
        .ok_or_else(|| mm_err(1, "empty input"))?;
    let header = header.map_err(|e| mm_err(lno, e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
    {
        return Err(mm_err(1, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(mm_err(1, format!("unsupported field `{other}`"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(mm_err(1, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut declared = 0usize;
    for (lno, line) in lines {
        let line = line.map_err(|e| mm_err(lno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let Some((rows, cols, _)) = size else {
            if parts.len() != 3 {
                return Err(mm_err(lno, "expected `<rows> <cols> <entries>`"));
            }
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| mm_err(lno, format!("bad integer `{s}`")))
            };
            let dims = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
            if dims.0 == 0 || dims.1 == 0 {
                return Err(mm_err(lno, "matrix extents must be positive"));
            }
            if symmetric && dims.0 != dims.1 {
                return Err(mm_err(lno, "symmetric matrix must be square"));
            }
            size = Some(dims);
            continue;
        };
        let want = if field == Field::Pattern { 2 } else { 3 };
        if parts.len() != want {
            return Err(mm_err(lno, format!("expected {want} fields")));
        }
        let idx = |s: &str, ext: usize| -> Result<usize> {
            let v = s
                .parse::<usize>()
                .map_err(|_| mm_err(lno, format!("bad index `{s}`")))?;
            if v == 0 || v > ext {
                return Err(mm_err(lno, format!("index {v} out of range 1..={ext}")));
            }
            Ok(v - 1)
        };
        let r = idx(parts[0], rows)?;
        let c = idx(parts[1], cols)?;
        let v = match field {
            Field::Pattern => 1.0,
            Field::Integer => parts[2]
                .parse::<i64>()
                .map_err(|_| mm_err(lno, format!("bad integer value `{}`", parts[2])))?
                as f64,
            Field::Real => parts[2]
                .parse::<f64>()
                .map_err(|_| mm_err(lno, format!("bad value `{}`", parts[2])))?,
        };
        declared += 1;
        entries.push((r, c, v));
        if symmetric && r != c {
            entries.push((c, r, v));
        }
    }
    let (rows, cols, count) = size.ok_or_else(|| mm_err(1, "missing size line"))?;
    if declared != count {
        return Err(mm_err(
            1,
            format!("size line declares {count} entries, found {declared}"),
        ));
    }
    entries.sort_by_key(|&(r, c, _)| (r, c));
    if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
        return Err(mm_err(
            1,
            format!("duplicate entry at ({}, {})", w[0].0 + 1, w[0].1 + 1),
        ));
    }

    let mut pos = vec![0usize; rows + 1];
    for &(r, _, _) in &entries {
        pos[r + 1] += 1;
    }
    for i in 0..rows {
        pos[i + 1] += pos[i];
    }
    let crd = entries.iter().map(|e| e.1).collect();
    let values = entries.iter().map(|e| e.2).collect();
    let m = StoredMatrix::from_parts(
        Role::A,
        rows,
        cols,
        CcfDescriptor::compressed(Dim::M, Dim::K),
        Payload::Compressed { pos, crd, values },
    )?;
    Ok(m.normalize())
}

/// Writes the nonzeros of `m` in row-major coordinate order.
pub fn write_matrix_market<W: Write>(m: &StoredMatrix, mut w: W) -> std::io::Result<()> {
    let grid = m.to_row_major();
    let nnz = grid.iter().filter(|v| **v != 0.0).count();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.rows(), m.cols(), nnz)?;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let v = grid[r * m.cols() + c];
            if v != 0.0 {
                writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
            }
        }
    }
    Ok(())
}
