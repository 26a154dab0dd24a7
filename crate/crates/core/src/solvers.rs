//! Direct solves, the preconditioned fixed-point iteration and full GMRES in
//! a weighted inner product.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::assemble::{assemble_load, GalerkinSystem};
use crate::error::{Error, Result};
use crate::numerics::band::BandLu;
use crate::numerics::krylov::{dot, norm2};
use crate::numerics::operator::{Inverse, LinearOperator, Product};
use crate::numerics::GramFactor;
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationKind {
    FixedPoint,
    Gmres,
}

/// Norms per iteration, starting at iteration 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub kind: IterationKind,
    /// Errors `||x - x^n||_D` for the fixed point, residual norms for GMRES.
    pub norms: Vec<f64>,
    pub c: Option<f64>,
    /// `c^n * norms[0]`.
    pub envelope_c: Vec<f64>,
    /// `(2 sqrt(c) / (1 + c)^2)^n * norms[0]`, informational.
    pub envelope_elman: Vec<f64>,
    pub converged: bool,
    pub final_relative: f64,
}

impl IterationTrace {
    fn new(kind: IterationKind, norms: Vec<f64>, converged: bool) -> Self {
        let final_relative = match (norms.first(), norms.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 0.0,
        };
        Self {
            kind,
            norms,
            c: None,
            envelope_c: Vec::new(),
            envelope_elman: Vec::new(),
            converged,
            final_relative,
        }
    }

    pub fn iterations(&self) -> usize {
        self.norms.len().saturating_sub(1)
    }

    /// Fills both envelopes for contraction factor `c`.
    pub fn with_envelope(mut self, c: f64) -> Self {
        let n = self.iterations();
        let (ec, ee) = envelopes(c, n);
        let r0 = self.norms.first().copied().unwrap_or(0.0);
        self.c = Some(c);
        self.envelope_c = ec.into_iter().map(|v| v * r0).collect();
        self.envelope_elman = ee.into_iter().map(|v| v * r0).collect();
        self
    }

    /// Every norm lies below `c^n * norms[0] * (1 + slack)`, or below
    /// `ROUNDOFF_FLOOR * norms[0]` where the envelope itself has dropped
    /// under that level.
    pub fn within_envelope(&self, slack: f64) -> bool {
        let floor = ROUNDOFF_FLOOR * self.norms.first().copied().unwrap_or(0.0);
        self.norms
            .iter()
            .zip(&self.envelope_c)
            .all(|(v, e)| *v <= e * (1.0 + slack) || *v <= floor)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.norms.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Norms below this fraction of the initial norm count as exact
/// convergence in the envelope check, so `c = 0` does not fail on rounding noise.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// `c^n` and `(2 sqrt(c) / (1 + c)^2)^n` for `n = 0..=n_max`.
pub fn envelopes(c: f64, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(c >= 0.0, "contraction factor must be non-negative");
    let e = 2.0 * c.sqrt() / ((1.0 + c) * (1.0 + c));
    let pows = |b: f64| (0..=n_max).map(|n| b.powi(n as i32)).collect();
    (pows(c), pows(e))
}

/// Solves `A x = b` by banded LU.
pub fn direct_solve(a: &CsrMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix {}x{} and right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(BandLu::new(a)?.solve(b))
}

/// `x^{n+1} = x^n + A2^{-1}(b - A1 x^n)`, with errors measured in the D norm
/// against a direct solve with `A1`. Stops once the error drops below
/// `tol` times the initial error, or after `max_it` steps.
pub fn fixed_point(
    a1: &CsrMatrix<C64>,
    a2: &CsrMatrix<C64>,
    g: &GramFactor,
    b: &[C64],
    x0: &[C64],
    max_it: usize,
    tol: f64,
) -> Result<IterationTrace> {
    let n = b.len();
    if a1.nrows() != n || a2.nrows() != n || x0.len() != n || g.n() != n {
        return Err(Error::InvalidArgument("fixed point: dimension mismatch".into()));
    }
    let exact = direct_solve(a1, b)?;
    let lu2 = BandLu::new(a2)?;
    let err = |x: &[C64]| {
        let e: Vec<C64> = exact.iter().zip(x).map(|(u, v)| u - v).collect();
        g.norm(&e)
    };
    let mut x = x0.to_vec();
    let mut norms = vec![err(&x)];
    let e0 = norms[0];
    let mut r = vec![C64::zero(); n];
    let mut converged = e0 == 0.0;
    while !converged && norms.len() <= max_it {
        a1.mul_vec(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        lu2.solve_in_place(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
        let e = err(&x);
        norms.push(e);
        converged = e <= tol * e0;
    }
    Ok(IterationTrace::new(IterationKind::FixedPoint, norms, converged))
}

/// Full GMRES from a zero initial guess, orthogonalizing by modified
/// Gram-Schmidt in `<u, v> = v^H D u` (or the Euclidean product when `inner`
/// is `None`). Returns the final iterate and the residual norms in that
/// inner product.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[C64],
    inner: Option<&GramFactor>,
    max_it: usize,
    tol: f64,
) -> Result<(Vec<C64>, IterationTrace)> {
    let n = b.len();
    if op.dim() != n || inner.is_some_and(|g| g.n() != n) {
        return Err(Error::InvalidArgument("gmres: dimension mismatch".into()));
    }
    let ip = |u: &[C64], v: &[C64]| match inner {
        Some(g) => g.inner(u, v),
        None => dot(v, u),
    };
    let nrm = |u: &[C64]| match inner {
        Some(g) => g.norm(u),
        None => norm2(u),
    };

    let beta = nrm(b);
    let mut norms = vec![beta];
    let mut x = vec![C64::zero(); n];
    if beta == 0.0 {
        return Ok((x, IterationTrace::new(IterationKind::Gmres, norms, true)));
    }
    let mut basis: Vec<Vec<C64>> = vec![b.iter().map(|v| v / beta).collect()];
    // columns of the Hessenberg matrix after the Givens rotations
    let mut r: Vec<Vec<C64>> = Vec::new();
    let mut rot: Vec<(f64, C64)> = Vec::new();
    let mut gvec = vec![C64::new(beta, 0.0)];
    let mut w = vec![C64::zero(); n];
    let mut converged = false;

    for j in 0..max_it.min(n) {
        op.apply(&basis[j], &mut w);
        let mut h = vec![C64::zero(); j + 2];
        for (i, q) in basis.iter().enumerate() {
            let c = ip(&w, q);
            h[i] = c;
            for (wk, qk) in w.iter_mut().zip(q) {
                *wk -= c * qk;
            }
        }
        let hn = nrm(&w);
        h[j + 1] = C64::new(hn, 0.0);

        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, bb) = (h[i], h[i + 1]);
            h[i] = c * a + s * bb;
            h[i + 1] = -s.conj() * a + c * bb;
        }
        // rotation zeroing h[j+1]
        let (a, bb) = (h[j], h[j + 1]);
        let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
        let (c, s) = if denom == 0.0 {
            (1.0, C64::zero())
        } else if a.norm() == 0.0 {
            (0.0, bb.conj() / bb.norm())
        } else {
            let c = a.norm() / denom;
            (c, (a / a.norm()) * bb.conj() / denom)
        };
        h[j] = c * a + s * bb;
        h[j + 1] = C64::zero();
        rot.push((c, s));
        let gj = gvec[j];
        gvec[j] = c * gj;
        gvec.push(-s.conj() * gj);
        h.truncate(j + 1);
        r.push(h);

        let res = gvec[j + 1].norm();
        norms.push(res);
        let happy = hn <= 1e-14 * beta.max(denom);
        if res <= tol * beta || happy {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / hn).collect());
    }

    // back substitution for the least-squares coefficients
    let m = r.len();
    let mut y = vec![C64::zero(); m];
    for i in (0..m).rev() {
        let mut s = gvec[i];
        for k in i + 1..m {
            s -= r[k][i] * y[k];
        }
        y[i] = s / r[i][i];
    }
    for (q, yi) in basis.iter().zip(&y) {
        for (xk, qk) in x.iter_mut().zip(q) {
            *xk += qk * yi;
        }
    }
    Ok((x, IterationTrace::new(IterationKind::Gmres, norms, converged)))
}

/// Slack on the `c^n` envelopes.
pub const ENVELOPE_SLACK: f64 = 1e-8;

/// Iteration limits for [`preconditioned_runs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub max_it: usize,
    /// Relative error target of the fixed-point iteration.
    pub fp_tol: f64,
    /// Relative residual target of GMRES.
    pub gmres_tol: f64,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_it: 500,
            fp_tol: 1e-8,
            gmres_tol: 1e-10,
        }
    }
}

/// Fixed-point and D-inner-product GMRES runs for `A1 x = b` preconditioned
/// by `A2`, both carrying the envelope of contraction factor `c`. GMRES
/// works on `A2^{-1} A1` with right-hand side `A2^{-1} b`.
pub fn preconditioned_runs(
    a1: &CsrMatrix<C64>,
    a2: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    b: &[C64],
    c: f64,
    limits: RunLimits,
) -> Result<(IterationTrace, IterationTrace)> {
    let g = GramFactor::new(d)?;
    let x0 = vec![C64::zero(); b.len()];
    let fp = fixed_point(a1, a2, &g, b, &x0, limits.max_it, limits.fp_tol)?.with_envelope(c);
    let lu2 = BandLu::new(a2)?;
    let inv = Inverse(&lu2);
    let op = Product::new(vec![&inv, a1]);
    let rhs = lu2.solve(b);
    let (_, gm) = gmres(&op, &rhs, Some(&g), limits.max_it, limits.gmres_tol)?;
    Ok((fp, gm.with_envelope(c)))
}

/// Load vector of `f = 1`.
pub fn unit_load(sys: &GalerkinSystem) -> Result<Vec<C64>> {
    let f = vec![C64::new(1.0, 0.0); sys.spec().mesh().n_elements()];
    assemble_load(sys.spec(), &f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::operator::Product;
    use crate::numerics::operator::{Inverse, ScaledIdentity};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single_element() -> CsrMatrix<C64> {
        CsrMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, c(2.0 / 3.0, -1.0)),
                (0, 1, c(-7.0 / 6.0, 0.0)),
                (1, 0, c(-7.0 / 6.0, 0.0)),
                (1, 1, c(2.0 / 3.0, -1.0)),
            ],
        )
    }

    #[test]
    fn zero_contraction_tolerates_rounding() {
        let mut t = IterationTrace::new(IterationKind::Gmres, vec![3.0, 3e-15], true).with_envelope(0.0);
        assert!(t.within_envelope(1e-8));
        t.norms[1] = 3e-9;
        assert!(!t.within_envelope(1e-8));
    }

    #[test]
    fn envelope_examples() {
        let (a, b) = envelopes(0.0, 3);
        assert_eq!(a, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b, vec![1.0, 0.0, 0.0, 0.0]);
        let (a, b) = envelopes(0.25, 1);
        assert_eq!(a[1], 0.25);
        assert!((b[1] - 0.64).abs() < 1e-15);
        let (_, b) = envelopes(1.0, 2);
        assert_eq!(b[2], 0.25);
    }

    #[test]
    fn direct_solve_examples() {
        let b = vec![c(2.0, 0.0), c(4.0, 0.0)];
        let id = CsrMatrix::<C64>::identity(2);
        assert_eq!(direct_solve(&id, &b).unwrap(), b);
        let two = id.map(|v| v * 2.0);
        assert_eq!(direct_solve(&two, &b).unwrap(), vec![c(1.0, 0.0), c(2.0, 0.0)]);

        // closed-form 2x2 inverse with load (1/2, 1/2)
        let a = single_element();
        let f = vec![c(0.5, 0.0), c(0.5, 0.0)];
        let x = direct_solve(&a, &f).unwrap();
        let (p, q) = (a.get(0, 0), a.get(0, 1));
        let det = p * p - q * q;
        let expect = (p * 0.5 - q * 0.5) / det;
        for xi in &x {
            assert!((xi - expect).norm() < 1e-14);
        }
        let sing = CsrMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0))]);
        assert!(matches!(direct_solve(&sing, &f), Err(Error::Singular { .. })));
    }

    #[test]
    fn fixed_point_trivial_cases() {
        let a = single_element();
        let g = GramFactor::new(&CsrMatrix::identity(2)).unwrap();
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let t = fixed_point(&a, &a, &g, &b, &[C64::zero(); 2], 10, 1e-12).unwrap();
        assert_eq!(t.iterations(), 1);
        assert!(t.norms[1] <= 1e-15 * t.norms[0]);
        let x = direct_solve(&a, &b).unwrap();
        let t = fixed_point(&a, &a, &g, &b, &x, 10, 1e-12).unwrap();
        assert_eq!(t.norms, vec![0.0]);
        assert!(t.converged);
    }

    #[test]
    fn gmres_identity_and_three_eigenvalues() {
        let b: Vec<C64> = (0..6).map(|i| c(i as f64 + 1.0, 0.5)).collect();
        let id = ScaledIdentity { n: 6, c: c(1.0, 0.0) };
        let (x, t) = gmres(&id, &b, None, 50, 1e-12).unwrap();
        assert_eq!(t.iterations(), 1);
        assert!(x.iter().zip(&b).all(|(u, v)| (u - v).norm() < 1e-14));

        let diag = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let trips: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, c(v, 0.0))).collect();
        let d = CsrMatrix::from_triplets(6, 6, &trips);
        let (x, t) = gmres(&d, &b, None, 50, 1e-13).unwrap();
        assert!(t.converged && t.iterations() <= 3);
        for i in 0..6 {
            assert!((x[i] * diag[i] - b[i]).norm() < 1e-12);
        }
        assert!(t.is_nonincreasing());
    }

    #[test]
    fn gmres_unit_gram_matches_euclidean() {
        let a = CsrMatrix::from_triplets(
            4,
            4,
            &[
                (0, 0, c(3.0, 1.0)),
                (0, 1, c(1.0, 0.0)),
                (1, 0, c(-1.0, 0.5)),
                (1, 1, c(2.0, 0.0)),
                (2, 2, c(1.0, -1.0)),
                (2, 3, c(0.5, 0.0)),
                (3, 2, c(0.0, 1.0)),
                (3, 3, c(4.0, 0.0)),
            ],
        );
        let b = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(-1.0, 0.0)];
        let g = GramFactor::new(&CsrMatrix::identity(4)).unwrap();
        let (_, t1) = gmres(&a, &b, None, 10, 1e-14).unwrap();
        let (_, t2) = gmres(&a, &b, Some(&g), 10, 1e-14).unwrap();
        assert_eq!(t1.norms.len(), t2.norms.len());
        for (u, v) in t1.norms.iter().zip(&t2.norms) {
            assert!((u - v).abs() <= 1e-12 * t1.norms[0]);
        }
    }

    #[test]
    fn gmres_in_d_inner_product_solves_preconditioned_system() {
        let a1 = single_element();
        let a2 = a1.map(|v| v + c(0.0, -0.2));
        let d = CsrMatrix::from_triplets(2, 2, &[(0, 0, 4.0 / 3.0), (0, 1, -5.0 / 6.0), (1, 0, -5.0 / 6.0), (1, 1, 4.0 / 3.0)]);
        let g = GramFactor::new(&d).unwrap();
        let lu = BandLu::new(&a2).unwrap();
        let inv = Inverse(&lu);
        let op = Product::new(vec![&inv, &a1]);
        let b = vec![c(1.0, 0.0), c(2.0, 0.0)];
        let rhs = lu.solve(&b);
        let (x, t) = gmres(&op, &rhs, Some(&g), 10, 1e-14).unwrap();
        assert!(t.converged);
        let exact = direct_solve(&a1, &b).unwrap();
        assert!(x.iter().zip(&exact).all(|(u, v)| (u - v).norm() < 1e-12));
    }
}
