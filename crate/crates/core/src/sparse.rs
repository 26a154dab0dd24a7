//! Compressed sparse row matrices over `f64` and complex entries.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::C64;

/// Entry type of a [`CsrMatrix`].
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    fn conj(self) -> Self;
    fn to_c64(self) -> C64;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for C64 {
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn to_c64(self) -> C64 {
        self
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    /// Explicit zeros are kept so that the pattern does not depend on values.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; triplets.len()];
        let mut next = counts.clone();
        for (t, &(i, _, _)) in triplets.iter().enumerate() {
            order[next[i]] = t;
            next[i] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend(order[counts[i]..counts[i + 1]].iter().map(|&t| (triplets[t].1, triplets[t].2)));
            // stable sort keeps summation order deterministic
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.iter().peekable();
            while let Some(&(j, v)) = iter.next() {
                let mut acc = v;
                while let Some(&&(j2, v2)) = iter.peek() {
                    if j2 != j {
                        break;
                    }
                    acc += v2;
                    iter.next();
                }
                indices.push(j);
                values.push(acc);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => T::zero(),
        }
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::zero();
            for (j, v) in self.row(i) {
                acc += v.to_c64() * x[j];
            }
            *yi = acc;
        }
    }

    /// `y = self^H * x`.
    pub fn mul_vec_adjoint(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = C64::zero());
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v.conj().to_c64() * xi;
            }
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_complex(&self) -> CsrMatrix<C64> {
        self.map(Scalar::to_c64)
    }

    /// `alpha * self + beta * other`, on the union of both patterns.
    pub fn lin_comb(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch");
        let trips: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trips)
    }

    pub fn conj_transpose(&self) -> Self {
        let trips: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, &trips)
    }

    /// Largest `i - j` over stored entries.
    pub fn lower_bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.saturating_sub(j)).max().unwrap_or(0)
    }

    /// Largest `j - i` over stored entries.
    pub fn upper_bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| j.saturating_sub(i)).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            col[j] += v.modulus();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).modulus())
            .fold(0.0, f64::max)
    }

    /// Deletes the rows and columns whose `keep` flag is false.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        assert!(self.is_square() && keep.len() == self.nrows);
        let mut new_id = vec![usize::MAX; self.nrows];
        let mut n = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_id[i] = n;
                n += 1;
            }
        }
        let trips: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| keep[i] && keep[j])
            .map(|(i, j, v)| (new_id[i], new_id[j], v))
            .collect();
        Self::from_triplets(n, n, &trips)
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: nalgebra::Scalar,
    {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, T::zero());
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<T>) -> Self
    where
        T: nalgebra::Scalar,
    {
        let mut trips = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != T::zero() {
                    trips.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trips)
    }
}

impl CsrMatrix<C64> {
    /// Real part, dropping the imaginary parts. Returns `None` when some
    /// imaginary part is nonzero.
    pub fn to_real(&self) -> Option<CsrMatrix<f64>> {
        self.values
            .iter()
            .all(|v| v.im == 0.0)
            .then(|| self.map(|v: C64| v.re))
    }
}
