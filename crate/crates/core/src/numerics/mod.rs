//! Weighted operator norms, discrete inf-sup constants and mass-matrix
//! extremes, computed matrix-free through banded factorizations.

pub mod band;
pub mod dense;
pub mod krylov;
pub mod operator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::C64;
use band::{BandCholesky, BandLu};
use krylov::{largest_eigenvalue, largest_singular_value, EigenEstimate, KrylovOptions};
use operator::{Factor, Inverse, LinearOperator, Product};

/// Dimension up to which `Backend::Auto` uses dense decompositions.
pub const DENSE_LIMIT: usize = 300;

/// Cholesky factorization `D = L L^T` of a real SPD Gram matrix.
#[derive(Debug, Clone)]
pub struct GramFactor {
    chol: BandCholesky,
    d: CsrMatrix<f64>,
}

impl GramFactor {
    pub fn new(d: &CsrMatrix<f64>) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::InvalidArgument(format!(
                "Gram matrix must be square, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self {
            chol: BandCholesky::new(d)?,
            d: d.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.chol.n()
    }

    pub fn cholesky(&self) -> &BandCholesky {
        &self.chol
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.d
    }

    /// `max |D - L L^T| / max |D|`.
    pub fn reconstruction_defect(&self) -> f64 {
        let n = self.n();
        let p = self.chol.bandwidth();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i.saturating_sub(p)..=i {
                let mut s = 0.0;
                for k in i.saturating_sub(p)..=j {
                    s += self.chol.get(i, k) * self.chol.get(j, k);
                }
                worst = worst.max((s - self.d.get(i, j)).abs());
            }
        }
        worst / self.d.max_abs()
    }

    /// `v^H D u`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let mut du = vec![C64::new(0.0, 0.0); u.len()];
        self.d.mul_vec(u, &mut du);
        krylov::dot(v, &du)
    }

    /// `||v||_D = ||L^T v||_2`.
    pub fn norm(&self, v: &[C64]) -> f64 {
        let mut w = vec![C64::new(0.0, 0.0); v.len()];
        self.chol.mul_lt(v, &mut w);
        krylov::norm2(&w)
    }
}

pub fn gram_factor(d: &CsrMatrix<f64>) -> Result<GramFactor> {
    GramFactor::new(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `||C||_D = sigma_max(L^T C L^{-T})`.
    D,
    /// `||C||_{D^{-1}} = sigma_max(L^{-1} C L)`.
    DInv,
    Euclid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Dense up to [`DENSE_LIMIT`] unknowns, iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

impl Backend {
    pub fn use_dense(self, n: usize) -> bool {
        match self {
            Backend::Auto => n <= DENSE_LIMIT,
            Backend::Dense => true,
            Backend::Iterative => false,
        }
    }
}

/// Operator norm of `c` in the norm selected by `mode`.
pub fn weighted_operator_norm(
    c: &dyn LinearOperator,
    g: &GramFactor,
    mode: NormMode,
    opts: &KrylovOptions,
) -> Result<EigenEstimate> {
    if mode != NormMode::Euclid && c.dim() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "operator dimension {} does not match Gram factor {}",
            c.dim(),
            g.n()
        )));
    }
    let ch = g.cholesky();
    match mode {
        NormMode::Euclid => largest_singular_value(c, opts),
        NormMode::D => {
            let (lt, ltinv) = (Factor::Lt(ch), Factor::LtInv(ch));
            largest_singular_value(&Product::new(vec![&lt, c, &ltinv]), opts)
        }
        NormMode::DInv => {
            let (linv, l) = (Factor::LInv(ch), Factor::L(ch));
            largest_singular_value(&Product::new(vec![&linv, c, &l]), opts)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    /// Discrete inf-sup constant; zero for a singular matrix.
    pub gamma: f64,
    /// `1 / gamma`, the norm of the discrete solution operator.
    pub c_dis: f64,
    pub matvecs: usize,
    pub converged: bool,
    pub singular: bool,
}

impl InfSupReport {
    fn singular() -> Self {
        Self {
            gamma: 0.0,
            c_dis: f64::INFINITY,
            matvecs: 0,
            converged: true,
            singular: true,
        }
    }

    fn from_c_dis(c_dis: f64, matvecs: usize) -> Self {
        Self {
            gamma: 1.0 / c_dis,
            c_dis,
            matvecs,
            converged: true,
            singular: false,
        }
    }
}

/// `gamma = sigma_min(L^{-1} A L^{-T})`, computed as the reciprocal of
/// `||L^T A^{-1} L||_2`.
pub fn discrete_inf_sup(a: &CsrMatrix<C64>, g: &GramFactor, opts: &KrylovOptions) -> Result<InfSupReport> {
    check_dims(a, g)?;
    match BandLu::new(a) {
        Ok(lu) => discrete_inf_sup_with(&lu, g, opts),
        Err(Error::Singular { .. }) => Ok(InfSupReport::singular()),
        Err(e) => Err(e),
    }
}

/// As [`discrete_inf_sup`], reusing an existing factorization of `A`.
pub fn discrete_inf_sup_with(lu: &BandLu, g: &GramFactor, opts: &KrylovOptions) -> Result<InfSupReport> {
    let ch = g.cholesky();
    let (lt, inv, l) = (Factor::Lt(ch), Inverse(lu), Factor::L(ch));
    let est = largest_singular_value(&Product::new(vec![&lt, &inv, &l]), opts)?;
    if !est.value.is_finite() || est.value == 0.0 {
        return Ok(InfSupReport::singular());
    }
    Ok(InfSupReport::from_c_dis(est.value, est.matvecs))
}

/// Dense counterpart of [`discrete_inf_sup`].
pub fn discrete_inf_sup_dense(a: &CsrMatrix<C64>, d: &CsrMatrix<f64>) -> Result<InfSupReport> {
    let gamma = dense::inf_sup(&a.to_dense(), &d.to_dense())?;
    if gamma == 0.0 || (1.0 / gamma).is_infinite() {
        return Ok(InfSupReport::singular());
    }
    Ok(InfSupReport {
        gamma,
        c_dis: 1.0 / gamma,
        matvecs: 0,
        converged: true,
        singular: false,
    })
}

fn check_dims(a: &CsrMatrix<C64>, g: &GramFactor) -> Result<()> {
    if !a.is_square() || a.nrows() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "matrix {}x{} does not match Gram factor of size {}",
            a.nrows(),
            a.ncols(),
            g.n()
        )));
    }
    Ok(())
}

/// Extreme eigenvalues of the mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassExtremes {
    pub m_minus_sq: f64,
    pub m_plus_sq: f64,
}

impl MassExtremes {
    /// `m_plus / m_minus`.
    pub fn ratio(&self) -> f64 {
        (self.m_plus_sq / self.m_minus_sq).sqrt()
    }
}

pub fn mass_extremes(m: &CsrMatrix<f64>, opts: &KrylovOptions) -> Result<MassExtremes> {
    let ch = BandCholesky::new(m)?;
    let n = m.nrows();
    let top = largest_eigenvalue(n, |x, y| m.mul_vec(x, y), opts)?;
    let inv = largest_eigenvalue(
        n,
        |x, y| {
            y.copy_from_slice(x);
            ch.solve_l(y);
            ch.solve_lt(y);
        },
        opts,
    )?;
    Ok(MassExtremes {
        m_minus_sq: 1.0 / inv.value,
        m_plus_sq: top.value,
    })
}

pub fn mass_extremes_dense(m: &CsrMatrix<f64>) -> Result<MassExtremes> {
    let (lo, hi) = dense::eigen_extremes(&m.to_dense());
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite { row: 0, pivot: lo });
    }
    Ok(MassExtremes {
        m_minus_sq: lo,
        m_plus_sq: hi,
    })
}

/// Discrete solution-operator norms `||L^T A^{-1} L||`, `||L^T A^{-1} R||`
/// and `||R^T A^{-1} R||` where `D = L L^T` and `M = R R^T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionOperatorNorms {
    pub hstar_to_h: f64,
    pub h0_to_h: f64,
    pub h0_to_h0: f64,
}

pub fn solution_operator_norms(
    a: &CsrMatrix<C64>,
    g: &GramFactor,
    r: &GramFactor,
    opts: &KrylovOptions,
) -> Result<SolutionOperatorNorms> {
    check_dims(a, g)?;
    check_dims(a, r)?;
    let lu = BandLu::new(a)?;
    let (lc, rc) = (g.cholesky(), r.cholesky());
    let inv = Inverse(&lu);
    let (l, lt, rr, rt) = (Factor::L(lc), Factor::Lt(lc), Factor::L(rc), Factor::Lt(rc));
    let n1 = largest_singular_value(&Product::new(vec![&lt, &inv, &l]), opts)?;
    let n2 = largest_singular_value(&Product::new(vec![&lt, &inv, &rr]), opts)?;
    let n3 = largest_singular_value(&Product::new(vec![&rt, &inv, &rr]), opts)?;
    Ok(SolutionOperatorNorms {
        hstar_to_h: n1.value,
        h0_to_h: n2.value,
        h0_to_h0: n3.value,
    })
}

pub fn solution_operator_norms_dense(
    a: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
) -> Result<SolutionOperatorNorms> {
    let (n1, n2, n3) = dense::solution_operator_norms(&a.to_dense(), &d.to_dense(), &m.to_dense())?;
    if !n1.is_finite() {
        return Err(Error::Singular { column: 0 });
    }
    Ok(SolutionOperatorNorms {
        hstar_to_h: n1,
        h0_to_h: n2,
        h0_to_h0: n3,
    })
}

/// `||L^{-1} R||_2`, bounded by one whenever `D - M` is positive semidefinite.
pub fn mass_to_gram_norm(g: &GramFactor, r: &GramFactor, opts: &KrylovOptions) -> Result<f64> {
    let (linv, rr) = (Factor::LInv(g.cholesky()), Factor::L(r.cholesky()));
    Ok(largest_singular_value(&Product::new(vec![&linv, &rr]), opts)?.value)
}
