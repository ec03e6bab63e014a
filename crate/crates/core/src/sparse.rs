//! Symmetric sparse matrices stored as their lower triangle, and a sparse
//! Cholesky factorisation built on faer.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    Spd,
    Spsd,
}

/// Symmetric matrix in compressed sparse row form, lower triangle only.
/// Column indices within each row are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    order: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    definiteness: Definiteness,
}

impl SparseSymMatrix {
    /// Zero matrix with the given lower-triangular pattern.
    pub fn from_pattern(order: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, definiteness: Definiteness) -> Self {
        debug_assert_eq!(row_ptr.len(), order + 1);
        let nnz = col_idx.len();
        SparseSymMatrix { order, row_ptr, col_idx, values: vec![0.0; nnz], definiteness }
    }

    /// Builds a matrix from `(row, col, value)` triplets; entries above the
    /// diagonal are mirrored into the lower triangle and duplicates summed in
    /// input order.
    pub fn from_triplets(order: usize, triplets: &[(usize, usize, f64)], definiteness: Definiteness) -> Self {
        let mut t: Vec<(usize, usize, usize)> = triplets.iter().enumerate().map(|(k, &(r, c, _))| (r.max(c), r.min(c), k)).collect();
        t.sort_unstable();
        let mut row_ptr = vec![0usize; order + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for &(r, c, k) in &t {
            assert!(r < order, "triplet row {r} out of range");
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += triplets[k].2;
            } else {
                col_idx.push(c);
                values.push(triplets[k].2);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..order {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymMatrix { order, row_ptr, col_idx, values, definiteness }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Storage slot of entry (r, c) in either triangle.
    pub fn entry_index(&self, r: usize, c: usize) -> Option<usize> {
        let (r, c) = (r.max(c), r.min(c));
        let lo = self.row_ptr[r];
        let row = &self.col_idx[lo..self.row_ptr[r + 1]];
        row.binary_search(&c).ok().map(|k| lo + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entry_index(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Lower-triangle entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.order];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.order);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.order {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.values[k];
                acc += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
            y[r] += acc;
        }
    }

    /// xᵀ A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.order {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.values[k];
                s += if c == r { v * x[r] * x[r] } else { 2.0 * v * x[r] * x[c] };
            }
        }
        s
    }

    /// Sum of all entries, 1ᵀA1.
    pub fn total(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.order {
            for (c, v) in self.row(r) {
                s += if c == r { v } else { 2.0 * v };
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> SparseSymMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Principal submatrix on `idx` (sorted), renumbered 0..idx.len().
    pub fn principal_submatrix(&self, idx: &[usize]) -> SparseSymMatrix {
        let mut map = vec![usize::MAX; self.order];
        for (new, &old) in idx.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(idx.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &old in idx {
            let mut entries: Vec<(usize, f64)> = self.row(old).filter(|&(c, _)| map[c] != usize::MAX).map(|(c, v)| (map[c], v)).collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (c, v) in entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseSymMatrix { order: idx.len(), row_ptr, col_idx, values, definiteness: self.definiteness }
    }

    /// Dense copy (tests and small problems).
    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.order, self.order);
        for r in 0..self.order {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }

    /// Upper triangle in faer's column-compressed form (the transpose of our
    /// lower-row storage, without copying indices in a different order).
    pub fn to_faer_upper(&self) -> SparseColMat<usize, f64> {
        let symbolic = SymbolicSparseColMat::new_checked(self.order, self.order, self.row_ptr.clone(), None, self.col_idx.clone());
        SparseColMat::new(symbolic, self.values.clone())
    }

    /// Probing positivity check `vᵀAv > 0` on `n` random vectors.
    pub fn probe_positive(&self, n: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).all(|_| {
            let v: Vec<f64> = (0..self.order).map(|_| rng.random_range(-1.0..1.0)).collect();
            self.quad_form(&v) > 0.0
        })
    }

    /// Coordinate text export: `row col value` per stored entry, 17
    /// significant digits, one-based indices, lower triangle.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% symmetric {} {} {}", self.order, self.order, self.nnz_lower())?;
        for r in 0..self.order {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }

    /// Parses the coordinate text format written by [`write_coordinate`].
    pub fn read_coordinate(text: &str, definiteness: Definiteness) -> Result<SparseSymMatrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let order: usize = head
            .split_whitespace()
            .nth(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad matrix header `{head}`")))?;
        let mut trip = Vec::new();
        for l in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 3 {
                return Err(Error::Parse(format!("bad matrix line `{l}`")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
            let v = t[2].parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?;
            trip.push((p(t[0])? - 1, p(t[1])? - 1, v));
        }
        Ok(SparseSymMatrix::from_triplets(order, &trip, definiteness))
    }
}

/// Writes a coefficient vector in the coordinate format (`index value`).
pub fn write_vector<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "% vector {}", v.len())?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{} {:.16e}", i + 1, x)?;
    }
    Ok(())
}

/// Sparse LLᵀ factorisation of an SPD [`SparseSymMatrix`].
pub struct Cholesky {
    order: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cholesky").field("order", &self.order).finish()
    }
}

impl Cholesky {
    pub fn new(a: &SparseSymMatrix) -> Result<Cholesky> {
        let upper = a.to_faer_upper();
        let llt = upper.sp_cholesky(Side::Upper).map_err(|e| Error::NumericalFailure(format!("sparse Cholesky breakdown: {e:?}")))?;
        Ok(Cholesky { order: a.order(), llt })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.order);
        let rhs = MatMut::from_column_major_slice_mut(b, self.order, 1);
        self.llt.solve_in_place(rhs);
    }

    /// Solves A X = B in place for a column-major block with `ncols` columns.
    pub fn solve_block_in_place(&self, b: &mut [f64], ncols: usize) {
        assert_eq!(b.len(), self.order * ncols);
        if ncols == 0 || self.order == 0 {
            return;
        }
        let rhs = MatMut::from_column_major_slice_mut(b, self.order, ncols);
        self.llt.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
