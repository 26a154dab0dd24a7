//! Discrete inf-sup constants along a sequence of wavenumbers, each paired
//! with a finer reference mesh.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::BoundOptions;
use crate::assemble::{assemble_system, ProblemSpec};
use crate::coeffs::{constant_field, Coef, Role};
use crate::error::{Error, Result};
use crate::mesh::{build_interval_mesh, build_rect_mesh, BoundaryTag, SideTags};
use crate::numerics::{discrete_inf_sup, discrete_inf_sup_dense, GramFactor, InfSupReport};

/// `h(k) = scale * k^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HRule {
    pub scale: f64,
    pub exponent: f64,
}

impl HRule {
    pub fn new(scale: f64, exponent: f64) -> Self {
        Self { scale, exponent }
    }

    pub fn h(&self, k: f64) -> f64 {
        self.scale * k.powf(-self.exponent)
    }

    /// Smallest element count per unit of `extent` with spacing at most `h(k)`.
    pub fn elements(&self, k: f64, extent: f64) -> usize {
        let x = extent / self.h(k);
        // keep exact integers such as 8.000000000000002 from rounding up
        ((x * (1.0 - 1e-12)).ceil() as usize).max(1)
    }
}

/// How the reference mesh is derived from the ladder mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `factor` times as many elements per direction.
    Refine(usize),
    Rule(HRule),
}

/// A family of problems indexed by wavenumber and elements per direction.
pub trait ProblemFamily: Sync {
    /// Length along which elements are counted.
    fn extent(&self) -> f64;
    fn build(&self, k: f64, n: usize) -> Result<ProblemSpec>;
}

/// Constant coefficients on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub a: f64,
    pub b: f64,
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub mu_inv: Coef,
    pub eps: Coef,
    pub theta: f64,
}

impl IntervalFamily {
    /// `[0, 1]`, impedance at both ends, unit coefficients, `theta = 1`.
    pub fn unit_impedance() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            left: BoundaryTag::Impedance,
            right: BoundaryTag::Impedance,
            mu_inv: Coef::real(1.0),
            eps: Coef::real(1.0),
            theta: 1.0,
        }
    }
}

impl ProblemFamily for IntervalFamily {
    fn extent(&self) -> f64 {
        self.b - self.a
    }

    fn build(&self, k: f64, n: usize) -> Result<ProblemSpec> {
        let mesh = build_interval_mesh(self.a, self.b, n, self.left, self.right)?;
        let mu = constant_field(&mesh, self.mu_inv, Role::MuInv)?;
        let eps = constant_field(&mesh, self.eps, Role::Eps)?;
        ProblemSpec::new(k, Arc::new(mesh), mu, eps, self.theta)
    }
}

/// Constant coefficients on a `width x width` square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareFamily {
    pub width: f64,
    pub tags: SideTags,
    pub mu_inv: Coef,
    pub eps: Coef,
    pub theta: f64,
}

impl ProblemFamily for SquareFamily {
    fn extent(&self) -> f64 {
        self.width
    }

    fn build(&self, k: f64, n: usize) -> Result<ProblemSpec> {
        let mesh = build_rect_mesh(self.width, self.width, n, n, self.tags)?;
        let mu = constant_field(&mesh, self.mu_inv, Role::MuInv)?;
        let eps = constant_field(&mesh, self.eps, Role::Eps)?;
        ProblemSpec::new(k, Arc::new(mesh), mu, eps, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub k: f64,
    pub h: f64,
    pub n_elements: usize,
    pub h_ref: f64,
    pub n_elements_ref: usize,
    pub c_dis: f64,
    pub c_dis_ref: f64,
    /// `c_dis / c_dis_ref`; absent when either system is singular or failed.
    pub ratio: Option<f64>,
    pub singular: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InfSupLadder {
    pub rows: Vec<LadderRow>,
}

impl InfSupLadder {
    /// True when every row has a ratio inside `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.rows.iter().all(|r| r.ratio.is_some_and(|x| lo <= x && x <= hi))
    }
}

fn inf_sup_of(family: &dyn ProblemFamily, k: f64, n: usize, opts: &BoundOptions) -> Result<(f64, InfSupReport)> {
    let sys = assemble_system(&family.build(k, n)?)?;
    let rep = if opts.backend.use_dense(sys.n()) {
        discrete_inf_sup_dense(&sys.a, &sys.d)?
    } else {
        discrete_inf_sup(&sys.a, &GramFactor::new(&sys.d)?, &opts.krylov)?
    };
    Ok((sys.h(), rep))
}

fn ladder_row(family: &dyn ProblemFamily, k: f64, rule: HRule, reference: Reference, opts: &BoundOptions) -> LadderRow {
    let n = rule.elements(k, family.extent());
    let n_ref = match reference {
        Reference::Refine(f) => n * f.max(1),
        Reference::Rule(r) => r.elements(k, family.extent()),
    };
    let mut row = LadderRow {
        k,
        h: f64::NAN,
        n_elements: n,
        h_ref: f64::NAN,
        n_elements_ref: n_ref,
        c_dis: f64::NAN,
        c_dis_ref: f64::NAN,
        ratio: None,
        singular: false,
        error: None,
    };
    let coarse = inf_sup_of(family, k, n, opts);
    let fine = if n_ref == n {
        // same mesh, same system
        coarse.as_ref().map(|x| *x).map_err(|e| Error::InvalidArgument(e.to_string()))
    } else {
        inf_sup_of(family, k, n_ref, opts)
    };
    match (coarse, fine) {
        (Ok((h, c)), Ok((h_ref, f))) => {
            row.h = h;
            row.h_ref = h_ref;
            row.c_dis = c.c_dis;
            row.c_dis_ref = f.c_dis;
            row.singular = c.singular || f.singular;
            if !row.singular {
                row.ratio = Some(c.c_dis / f.c_dis);
            }
        }
        (Err(e), _) | (_, Err(e)) => row.error = Some(e.to_string()),
    }
    row
}

/// For each `k`, the discrete solution-operator norm on the mesh given by
/// `rule` and on the reference mesh, and their ratio. Failures and singular
/// systems are recorded in the row.
pub fn infsup_ladder(
    family: &dyn ProblemFamily,
    k_values: &[f64],
    rule: HRule,
    reference: Reference,
    opts: &BoundOptions,
) -> InfSupLadder {
    InfSupLadder {
        rows: k_values.iter().map(|&k| ladder_row(family, k, rule, reference, opts)).collect(),
    }
}
