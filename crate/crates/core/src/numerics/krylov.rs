//! Extreme eigenvalue estimation for Hermitian positive semidefinite operators.
//!
//! Restarted Lanczos with full reorthogonalization, i.e. power iteration on
//! the normal operator accelerated by keeping the whole Krylov basis. Each
//! restart begins from the current top Ritz vector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::LinearOperator;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Stop when the Ritz residual is below `tol * theta`.
    pub tol: f64,
    /// Cap on operator applications.
    pub max_matvecs: usize,
    /// Krylov basis size before restarting.
    pub subspace: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_matvecs: 50_000,
            subspace: 40,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub matvecs: usize,
    /// Ritz residual norm at exit.
    pub residual: f64,
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    // <a, b> = a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn random_unit(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given by
/// its action.
pub fn largest_eigenvalue<F>(n: usize, mut apply: F, opts: &KrylovOptions) -> Result<EigenEstimate>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if n == 0 {
        return Ok(EigenEstimate {
            value: 0.0,
            matvecs: 0,
            residual: 0.0,
        });
    }
    let m = opts.subspace.max(2).min(n);
    let mut start = random_unit(n, opts.seed);
    let mut matvecs = 0usize;
    let mut w = vec![C64::zero(); n];

    loop {
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            apply(&basis[j], &mut w);
            matvecs += 1;
            let mut alpha = 0.0;
            for _pass in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    if i == j {
                        alpha += c.re;
                    }
                    for (wk, qk) in w.iter_mut().zip(q) {
                        *wk -= c * qk;
                    }
                }
            }
            alphas.push(alpha);
            let beta = norm2(&w);

            let dim = j + 1;
            let mut t = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                t[(i, i)] = alphas[i];
                if i + 1 < dim {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (top, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            let y = eig.eigenvectors.column(top);
            let residual = beta * y[dim - 1].abs();

            let scale = theta.abs().max(f64::MIN_POSITIVE);
            let exhausted = beta <= 1e-14 * scale.max(alphas.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            if residual <= opts.tol * theta.abs() || exhausted || theta.abs() == 0.0 && beta == 0.0 {
                return Ok(EigenEstimate {
                    value: theta.max(0.0),
                    matvecs,
                    residual,
                });
            }
            if matvecs >= opts.max_matvecs {
                return Err(Error::NoConvergence {
                    iterations: matvecs,
                    last_estimate: theta,
                });
            }
            if j + 1 == m {
                // restart from the top Ritz vector
                let mut x = vec![C64::zero(); n];
                for (q, &c) in basis.iter().zip(y.iter()) {
                    for (xk, qk) in x.iter_mut().zip(q) {
                        *xk += qk * c;
                    }
                }
                let nx = norm2(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                start = x;
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|v| v / beta).collect());
        }
    }
}

/// Largest singular value of `op`, from the top eigenvalue of `op^H op`.
pub fn largest_singular_value(op: &dyn LinearOperator, opts: &KrylovOptions) -> Result<EigenEstimate> {
    let n = op.dim();
    let mut tmp = vec![C64::zero(); n];
    let est = largest_eigenvalue(
        n,
        |x, y| {
            op.apply(x, &mut tmp);
            op.apply_adjoint(&tmp, y);
        },
        opts,
    )
    .map_err(|e| match e {
        Error::NoConvergence {
            iterations,
            last_estimate,
        } => Error::NoConvergence {
            iterations,
            last_estimate: last_estimate.max(0.0).sqrt(),
        },
        other => other,
    })?;
    Ok(EigenEstimate {
        value: est.value.sqrt(),
        matvecs: est.matvecs,
        residual: est.residual,
    })
}
