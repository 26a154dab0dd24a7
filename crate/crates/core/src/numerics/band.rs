//! Banded factorizations. Structured meshes with lexicographic numbering give
//! matrices whose bandwidth is one grid row, so banded storage is enough for
//! every system assembled here.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, Scalar};
use crate::C64;

/// LU factorization with partial pivoting of a complex band matrix, stored
/// column by column in the layout of LAPACK `gbtrf`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// `ku + kl`, upper bandwidth of `U`.
    kv: usize,
    ldab: usize,
    ab: Vec<C64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn new<T: Scalar>(a: &CsrMatrix<T>) -> Result<Self> {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.nrows();
        let kl = a.lower_bandwidth();
        let ku = a.upper_bandwidth();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![C64::zero(); ldab * n];
        for (i, j, v) in a.triplets() {
            ab[kv + i - j + j * ldab] = v.to_c64();
        }
        let mut lu = Self {
            n,
            kl,
            kv,
            ldab,
            ab,
            ipiv: vec![0; n],
        };
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        self.kv + i - j + j * self.ldab
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for r in 0..=km {
                let v = self.ab[self.idx(j + r, j)].norm();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { column: j });
            }
            ju = ju.max((j + self.kv - self.kl + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let p = self.idx(j, c);
                    let q = self.idx(j + jp, c);
                    self.ab.swap(p, q);
                }
            }
            if km > 0 {
                let pivot_inv = C64::new(1.0, 0.0) / self.ab[self.idx(j, j)];
                for r in 1..=km {
                    let p = self.idx(j + r, j);
                    self.ab[p] *= pivot_inv;
                }
                for c in j + 1..=ju {
                    let ujc = self.ab[self.idx(j, c)];
                    if ujc == C64::zero() {
                        continue;
                    }
                    for r in 1..=km {
                        let l = self.ab[self.idx(j + r, j)];
                        let p = self.idx(j + r, c);
                        self.ab[p] -= l * ujc;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for j in 0..n.saturating_sub(1) {
            let km = self.kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            if bj != C64::zero() {
                for r in 1..=km {
                    b[j + r] -= self.ab[self.idx(j + r, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(self.kv)..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let mut acc = b[j];
            for i in j.saturating_sub(self.kv)..j {
                acc -= self.ab[self.idx(i, j)].conj() * b[i];
            }
            b[j] = acc / self.ab[self.idx(j, j)].conj();
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let km = self.kl.min(n - 1 - j);
            let mut acc = b[j];
            for r in 1..=km {
                acc -= self.ab[self.idx(j + r, j)].conj() * b[j + r];
            }
            b[j] = acc;
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Cholesky factorization `D = L L^T` of a real symmetric positive definite
/// band matrix; `L` is stored row by row with `p + 1` entries per row.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    p: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn new(d: &CsrMatrix<f64>) -> Result<Self> {
        assert!(d.is_square(), "Cholesky needs a square matrix");
        let n = d.nrows();
        let p = d.lower_bandwidth().max(d.upper_bandwidth());
        let w = p + 1;
        let mut l = vec![0.0; n * w];
        // lower triangle of D into band storage: L(i, j) at i * w + p - (i - j)
        for (i, j, v) in d.triplets() {
            if j <= i {
                l[i * w + p - (i - j)] = v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let mut s = l[i * w + p - (i - j)];
                let k0 = j0.max(j.saturating_sub(p));
                for k in k0..j {
                    s -= l[i * w + p - (i - k)] * l[j * w + p - (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * w + p] = s.sqrt();
                } else {
                    l[i * w + p - (i - j)] = s / l[j * w + p];
                }
            }
        }
        Ok(Self { n, p, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    /// Entry `L(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.p {
            0.0
        } else {
            self.l[i * (self.p + 1) + self.p - (i - j)]
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.p + 1) + self.p - (i - j)]
    }

    /// `y = L x`.
    pub fn mul_l(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = C64::zero();
            for j in i.saturating_sub(self.p)..=i {
                acc += x[j] * self.at(i, j);
            }
            y[i] = acc;
        }
    }

    /// `y = L^T x`.
    pub fn mul_lt(&self, x: &[C64], y: &mut [C64]) {
        for j in 0..self.n {
            let mut acc = C64::zero();
            for i in j..(j + self.p + 1).min(self.n) {
                acc += x[i] * self.at(i, j);
            }
            y[j] = acc;
        }
    }

    /// `x <- L^{-1} x`.
    pub fn solve_l(&self, x: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = x[i];
            for j in i.saturating_sub(self.p)..i {
                acc -= x[j] * self.at(i, j);
            }
            x[i] = acc / self.at(i, i);
        }
    }

    /// `x <- L^{-T} x`.
    pub fn solve_lt(&self, x: &mut [C64]) {
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for i in j + 1..(j + self.p + 1).min(self.n) {
                acc -= x[i] * self.at(i, j);
            }
            x[j] = acc / self.at(j, j);
        }
    }
}
