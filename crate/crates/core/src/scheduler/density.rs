use std::ops::Range;

use crate::kernel_spec::KernelSpec;

/// Density lookup for operand blocks of a kernel.
///
/// Without attached operands every block inherits the spec's density. With
/// operands, rows of A, columns of B and the shared K index are reordered
/// densest-first so the leading (dense-designated) parts of a split get the
/// densest rows, and block densities are read off 2-D prefix counts.
#[derive(Debug, Clone)]
pub enum DensityMap {
    Uniform { d_a: f64, d_b: f64 },
    Measured(Measured),
}

#[derive(Debug, Clone)]
pub struct Measured {
    pub row_perm: Vec<usize>,
    pub k_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    // (M+1)×(K+1) and (K+1)×(N+1) prefix counts over the permuted grids
    a_pre: Vec<u32>,
    b_pre: Vec<u32>,
    k: usize,
    n: usize,
}

/// Indices sorted by descending count, ties by index.
fn densest_first(counts: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..counts.len()).collect();
    idx.sort_by(|&x, &y| counts[y].cmp(&counts[x]).then(x.cmp(&y)));
    idx
}

fn prefix(rows: usize, cols: usize, nz: impl Fn(usize, usize) -> bool) -> Vec<u32> {
    let w = cols + 1;
    let mut p = vec![0u32; (rows + 1) * w];
    for r in 0..rows {
        let mut run = 0u32;
        for c in 0..cols {
            run += u32::from(nz(r, c));
            p[(r + 1) * w + c + 1] = p[r * w + c + 1] + run;
        }
    }
    p
}

fn block(p: &[u32], w: usize, r: &Range<usize>, c: &Range<usize>) -> u64 {
    let at = |i: usize, j: usize| p[i * w + j] as u64;
    at(r.end, c.end) + at(r.start, c.start) - at(r.start, c.end) - at(r.end, c.start)
}

impl DensityMap {
    pub fn new(spec: &KernelSpec) -> Self {
        let Some(ops) = &spec.operands else {
            return DensityMap::Uniform {
                d_a: spec.d_a,
                d_b: spec.d_b,
            };
        };
        let (m, k, n) = (spec.m, spec.k, spec.n);
        let (a, b) = (ops.a.dense_values(), ops.b.dense_values());
        let row_nnz: Vec<usize> = (0..m).map(|i| (0..k).filter(|&j| a[i * k + j] != 0.0).count()).collect();
        let col_nnz: Vec<usize> = (0..n).map(|j| (0..k).filter(|&i| b[i * n + j] != 0.0).count()).collect();
        let k_nnz: Vec<usize> = (0..k)
            .map(|p| {
                (0..m).filter(|&i| a[i * k + p] != 0.0).count()
                    + (0..n).filter(|&j| b[p * n + j] != 0.0).count()
            })
            .collect();
        let row_perm = densest_first(&row_nnz);
        let col_perm = densest_first(&col_nnz);
        let k_perm = densest_first(&k_nnz);
        let a_pre = prefix(m, k, |i, p| a[row_perm[i] * k + k_perm[p]] != 0.0);
        let b_pre = prefix(k, n, |p, j| b[k_perm[p] * n + col_perm[j]] != 0.0);
        DensityMap::Measured(Measured {
            row_perm,
            k_perm,
            col_perm,
            a_pre,
            b_pre,
            k,
            n,
        })
    }

    /// Density of `A[rows, ks]` in permuted coordinates.
    pub fn a(&self, rows: Range<usize>, ks: Range<usize>) -> f64 {
        match self {
            DensityMap::Uniform { d_a, .. } => *d_a,
            DensityMap::Measured(x) => {
                let cells = rows.len() as f64 * ks.len() as f64;
                block(&x.a_pre, x.k + 1, &rows, &ks) as f64 / cells
            }
        }
    }

    /// Density of `B[ks, cols]` in permuted coordinates.
    pub fn b(&self, ks: Range<usize>, cols: Range<usize>) -> f64 {
        match self {
            DensityMap::Uniform { d_b, .. } => *d_b,
            DensityMap::Measured(x) => {
                let cells = ks.len() as f64 * cols.len() as f64;
                block(&x.b_pre, x.n + 1, &ks, &cols) as f64 / cells
            }
        }
    }

    pub fn measured(&self) -> Option<&Measured> {
        match self {
            DensityMap::Measured(x) => Some(x),
            DensityMap::Uniform { .. } => None,
        }
    }
}
