//! Matrix-free linear operators on `C^n` with adjoints, and the compositions
//! needed to express weighted norms as Euclidean ones.

use num_traits::Zero;

use super::band::{BandCholesky, BandLu};
use crate::sparse::{CsrMatrix, Scalar};
use crate::C64;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = Op x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// `y = Op^H x`.
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]);
}

impl<T: Scalar> LinearOperator for CsrMatrix<T> {
    fn dim(&self) -> usize {
        assert!(self.is_square());
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec(x, y)
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec_adjoint(x, y)
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        (**self).apply(x, y)
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        (**self).apply_adjoint(x, y)
    }
}

/// `A^{-1}` through an LU factorization.
pub struct Inverse<'a>(pub &'a BandLu);

impl LinearOperator for Inverse<'_> {
    fn dim(&self) -> usize {
        self.0.n()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.0.solve_in_place(y);
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.0.solve_adjoint_in_place(y);
    }
}

/// One of `L`, `L^T`, `L^{-1}`, `L^{-T}` for a Cholesky factor `L`.
#[derive(Clone, Copy)]
pub enum Factor<'a> {
    L(&'a BandCholesky),
    Lt(&'a BandCholesky),
    LInv(&'a BandCholesky),
    LtInv(&'a BandCholesky),
}

impl Factor<'_> {
    fn chol(&self) -> &BandCholesky {
        match self {
            Factor::L(c) | Factor::Lt(c) | Factor::LInv(c) | Factor::LtInv(c) => c,
        }
    }

    fn run(&self, x: &[C64], y: &mut [C64], adjoint: bool) {
        let c = self.chol();
        // adjoint of L is L^T and vice versa
        let which = match (self, adjoint) {
            (Factor::L(_), false) | (Factor::Lt(_), true) => 0,
            (Factor::Lt(_), false) | (Factor::L(_), true) => 1,
            (Factor::LInv(_), false) | (Factor::LtInv(_), true) => 2,
            (Factor::LtInv(_), false) | (Factor::LInv(_), true) => 3,
        };
        match which {
            0 => c.mul_l(x, y),
            1 => c.mul_lt(x, y),
            2 => {
                y.copy_from_slice(x);
                c.solve_l(y)
            }
            _ => {
                y.copy_from_slice(x);
                c.solve_lt(y)
            }
        }
    }
}

impl LinearOperator for Factor<'_> {
    fn dim(&self) -> usize {
        self.chol().n()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.run(x, y, false)
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        self.run(x, y, true)
    }
}

/// Product `ops[0] * ops[1] * ... * ops[last]`, applied right to left.
pub struct Product<'a> {
    ops: Vec<&'a dyn LinearOperator>,
}

impl<'a> Product<'a> {
    pub fn new(ops: Vec<&'a dyn LinearOperator>) -> Self {
        assert!(!ops.is_empty());
        let n = ops[0].dim();
        assert!(ops.iter().all(|o| o.dim() == n), "dimension mismatch in product");
        Self { ops }
    }
}

impl LinearOperator for Product<'_> {
    fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut cur = x.to_vec();
        let mut tmp = vec![C64::zero(); x.len()];
        for op in self.ops.iter().rev() {
            op.apply(&cur, &mut tmp);
            std::mem::swap(&mut cur, &mut tmp);
        }
        y.copy_from_slice(&cur);
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let mut cur = x.to_vec();
        let mut tmp = vec![C64::zero(); x.len()];
        for op in self.ops.iter() {
            op.apply_adjoint(&cur, &mut tmp);
            std::mem::swap(&mut cur, &mut tmp);
        }
        y.copy_from_slice(&cur);
    }
}

/// `I - Op`.
pub struct IdentityMinus<O>(pub O);

impl<O: LinearOperator> LinearOperator for IdentityMinus<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.0.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        self.0.apply_adjoint(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi;
        }
    }
}

/// `Op^H`.
pub struct Adjoint<O>(pub O);

impl<O: LinearOperator> LinearOperator for Adjoint<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.0.apply_adjoint(x, y)
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        self.0.apply(x, y)
    }
}

/// `c * I`.
pub struct ScaledIdentity {
    pub n: usize,
    pub c: C64,
}

impl LinearOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.c * xi;
        }
    }
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        let c = self.c.conj();
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = c * xi;
        }
    }
}

/// Dense materialization, column by column. For oracles and tests.
pub fn to_dense(op: &dyn LinearOperator) -> nalgebra::DMatrix<C64> {
    let n = op.dim();
    let mut m = nalgebra::DMatrix::from_element(n, n, C64::zero());
    let mut e = vec![C64::zero(); n];
    let mut col = vec![C64::zero(); n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        op.apply(&e, &mut col);
        e[j] = C64::zero();
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}
