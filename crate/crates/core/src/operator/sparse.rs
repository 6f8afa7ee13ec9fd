use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::C64;

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value.re != 0.0 || value.im != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> SparseOperator {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_counts = vec![0usize; self.nrows];
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] = indptr[r] + row_counts[r];
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Compressed-row complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOperator {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(op: &Operator) -> Self {
        let d = op.dim();
        let mut b = TripletBuilder::new(d, d);
        for r in 0..d {
            for c in 0..d {
                b.push(r, c, op.get(r, c));
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Result<Operator> {
        if self.nrows != self.ncols {
            return Err(Error::InvalidDimension(format!(
                "{}x{} sparse matrix is not square",
                self.nrows, self.ncols
            )));
        }
        let mut op = Operator::zeros(self.nrows);
        for (r, c, v) in self.iter() {
            op.set(r, c, v);
        }
        Ok(op)
    }

    pub fn adjoint(&self) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.iter() {
            b.push(c, r, v.conj());
        }
        b.build()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.indptr[r], self.indptr[r + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for k in a..b {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Gershgorin bound on the spectral radius (largest absolute row sum).
    pub fn max_row_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
