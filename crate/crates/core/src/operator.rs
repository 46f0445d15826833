//! Compressed sparse row storage for Hermitian operators on the spin basis.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64;

/// Square complex matrix in CSR form. Entries within a row are sorted by
/// column and merged.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl HermitianOperator {
    /// Assemble from per-row `(column, value)` lists. Duplicate columns are
    /// summed and exact zeros dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                debug_assert!(c < dim);
                if v != Complex64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        HermitianOperator {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_rows(vec![Vec::new(); dim])
    }

    pub fn from_dense(m: &Array2<Complex64>) -> Self {
        let rows = m
            .outer_iter()
            .map(|r| r.iter().enumerate().map(|(c, &v)| (c, v)).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[[r, c]] = v;
            }
        }
        m
    }

    /// Largest entry magnitude (at least 1, so absolute tolerances stay
    /// meaningful for the zero operator).
    pub fn scale(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(1.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn max_imag(&self) -> f64 {
        self.vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the (real) spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    diag = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *out = acc;
        }
    }

    /// `out = (self - shift) * x` for a row-major block of column vectors
    /// (`dim × ncols`).
    pub fn apply_block_shifted(&self, shift: f64, x: ArrayView2<Complex64>, mut out: ArrayViewMut2<Complex64>) {
        let ncols = x.ncols();
        assert_eq!(x.nrows(), self.dim);
        assert_eq!(out.dim(), (self.dim, ncols));
        let xs = x.as_slice().expect("row-major input block");
        let os = out.as_slice_mut().expect("row-major output block");
        for r in 0..self.dim {
            let orow = &mut os[r * ncols..(r + 1) * ncols];
            let xdiag = &xs[r * ncols..(r + 1) * ncols];
            for (o, &xi) in orow.iter_mut().zip(xdiag) {
                *o = -shift * xi;
            }
            for (c, v) in self.row(r) {
                let xrow = &xs[c * ncols..(c + 1) * ncols];
                for (o, &xi) in orow.iter_mut().zip(xrow) {
                    *o += v * xi;
                }
            }
        }
    }

    /// Expectation value `<x|self|x>` (real part).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let hx = self.apply(x);
        x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn scaled(&self, a: f64) -> HermitianOperator {
        let rows = (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| (c, v * a)).collect())
            .collect();
        HermitianOperator::from_rows(rows)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &HermitianOperator, b: f64) -> HermitianOperator {
        assert_eq!(self.dim, other.dim);
        let rows = (0..self.dim)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, v * a))
                    .chain(other.row(r).map(|(c, v)| (c, v * b)))
                    .collect()
            })
            .collect();
        HermitianOperator::from_rows(rows)
    }
}

/// Two operators sharing one sparsity pattern, so that `base + s * slope`
/// can be formed without re-merging rows.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    pattern: HermitianOperator,
    base: Vec<Complex64>,
    slope: Vec<Complex64>,
}

impl LinearFamily {
    pub fn new(base: &HermitianOperator, slope: &HermitianOperator) -> Self {
        assert_eq!(base.dim, slope.dim);
        // union pattern with a sentinel value so no entry is dropped
        let marker = Complex64::new(1.0, 0.0);
        let rows = (0..base.dim)
            .map(|r| base.row(r).chain(slope.row(r)).map(|(c, _)| (c, marker)).collect())
            .collect::<Vec<Vec<_>>>();
        let pattern = HermitianOperator::from_rows(rows);
        let mut b = Vec::with_capacity(pattern.nnz());
        let mut s = Vec::with_capacity(pattern.nnz());
        for r in 0..pattern.dim {
            for (c, _) in pattern.row(r) {
                b.push(base.get(r, c));
                s.push(slope.get(r, c));
            }
        }
        LinearFamily {
            pattern,
            base: b,
            slope: s,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn at(&self, s: f64) -> HermitianOperator {
        let mut op = self.pattern.clone();
        for ((v, b), d) in op.vals.iter_mut().zip(&self.base).zip(&self.slope) {
            *v = b + d * s;
        }
        op
    }

    /// Overwrites `op` (which must come from [`LinearFamily::at`]) in place.
    pub fn assign(&self, s: f64, op: &mut HermitianOperator) {
        debug_assert_eq!(op.row_ptr, self.pattern.row_ptr);
        for ((v, b), d) in op.vals.iter_mut().zip(&self.base).zip(&self.slope) {
            *v = b + d * s;
        }
    }
}
