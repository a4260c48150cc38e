//! Compressed sparse row storage for the item–item adjacency.

use crate::scalar::{axpy, Scalar};
use crate::tensor::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from coordinate triplets. Duplicates are summed in input order;
    /// output is ordered by (row, col).
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        // stable: duplicates keep input order for the summation below
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Option<Self> {
        if indptr.len() != n_rows + 1
            || indices.len() != values.len()
            || indptr.last().copied() != Some(indices.len())
            || indptr.windows(2).any(|w| w[0] > w[1])
            || indices.iter().any(|&c| c >= n_cols)
        {
            return None;
        }
        Some(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => T::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|r| self.row(r).1.iter().copied().sum())
            .collect()
    }

    /// Returns a matrix with the same pattern and values `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }

    /// One row of `self · dense`, written into `out`.
    pub fn row_times_dense(&self, r: usize, dense: &Mat<T>, out: &mut [T]) {
        out.iter_mut().for_each(|x| *x = T::zero());
        let (cols, vals) = self.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            axpy(v, dense.row(c), out);
        }
    }

    /// Sparse-dense product `self · dense`.
    pub fn mul_dense(&self, dense: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n_cols, dense.rows(), "spmm shape mismatch");
        let mut out = Mat::zeros(self.n_rows, dense.cols());
        for r in 0..self.n_rows {
            self.row_times_dense(r, dense, out.row_mut(r));
        }
        out
    }

    /// Adjoint action of one row: `out[c] += value(r, c) * g` for every stored
    /// column `c` of row `r`. Summed over rows this is `selfᵀ · G`.
    pub fn scatter_row_transpose(&self, r: usize, g: &[T], out: &mut Mat<T>) {
        let (cols, vals) = self.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            axpy(v, g, out.row_mut(c));
        }
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.iter() {
            m.set(r, c, v);
        }
        m
    }

    pub fn cast<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}
