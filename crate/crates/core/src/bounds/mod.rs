//! Both sides of the preconditioner-quality inequalities for a pair of
//! systems sharing one discrete space, with pass/fail margins.

mod ladder;

pub use ladder::{infsup_ladder, HRule, InfSupLadder, IntervalFamily, LadderRow, ProblemFamily, Reference, SquareFamily};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assemble::{assemble_system, check_same_space, ExternalSystem, GalerkinSystem};
use crate::coeffs::{absorption_shift, field_diff_sup_norm, AbsorptionSpec};
use crate::error::{Error, Result};
use crate::numerics::band::BandLu;
use crate::numerics::krylov::{dot, KrylovOptions};
use crate::numerics::operator::{Adjoint, IdentityMinus, Inverse, LinearOperator, Product};
use crate::numerics::{
    dense, discrete_inf_sup, discrete_inf_sup_dense, discrete_inf_sup_with, mass_extremes, mass_extremes_dense,
    mass_to_gram_norm, solution_operator_norms, solution_operator_norms_dense, weighted_operator_norm, Backend,
    GramFactor, MassExtremes, NormMode, SolutionOperatorNorms,
};
use crate::sparse::CsrMatrix;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub krylov: KrylovOptions,
    pub backend: Backend,
    /// Relative slack applied to every inequality.
    pub slack: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            krylov: KrylovOptions::default(),
            backend: Backend::Auto,
            slack: 1e-9,
        }
    }
}

/// One inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub applicable: bool,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            applicable: true,
            pass: lhs <= rhs + slack * rhs.abs(),
        }
    }

    pub fn skipped(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            applicable: false,
            pass: true,
        }
    }
}

fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GardingConstants {
    pub c_g1: f64,
    pub c_g2: f64,
}

impl GardingConstants {
    pub fn new(c_g1: f64, c_g2: f64) -> Result<Self> {
        if !(c_g1 > 0.0 && c_g2 > 0.0 && c_g1.is_finite() && c_g2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Gårding constants must be positive, got ({c_g1}, {c_g2})"
            )));
        }
        Ok(Self { c_g1, c_g2 })
    }

    /// `(1, 2)`, valid for `mu^{-1} = 1`, `eps = 1` and real `theta`.
    pub fn canonical() -> Self {
        Self { c_g1: 1.0, c_g2: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GardingReport {
    pub constants: GardingConstants,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    /// Smallest `(|V^H A V + c2 V^H M V| - c1 V^H D V) / V^H D V` seen.
    pub worst_relative_margin: f64,
    /// Largest relative defect of `Re V^H A V + 2 V^H M V = V^H D V`, when checked.
    pub identity_defect: Option<f64>,
    pub identity_pass: Option<bool>,
    pub pass: bool,
}

/// Samples the Gårding inequality on seeded random vectors. For canonical
/// systems the exact real-part identity is checked as well.
pub fn garding_check(sys: &GalerkinSystem, g: GardingConstants, n_samples: usize, seed: u64) -> GardingReport {
    garding_check_matrices(&sys.a, &sys.d, &sys.m, g, n_samples, seed, sys.spec().is_canonical())
}

pub fn garding_check_matrices(
    a: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    g: GardingConstants,
    n_samples: usize,
    seed: u64,
    check_identity: bool,
) -> GardingReport {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![C64::new(0.0, 0.0); n];
    let (mut av, mut dv, mut mv) = (v.clone(), v.clone(), v.clone());
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut defect: f64 = 0.0;
    for _ in 0..n_samples {
        for x in v.iter_mut() {
            *x = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        a.mul_vec(&v, &mut av);
        d.mul_vec(&v, &mut dv);
        m.mul_vec(&v, &mut mv);
        let qa = dot(&v, &av);
        let qd = dot(&v, &dv).re;
        let qm = dot(&v, &mv).re;
        let lhs = (qa + g.c_g2 * qm).norm();
        let rhs = g.c_g1 * qd;
        if qd > 0.0 {
            worst = worst.min((lhs - rhs) / qd);
        }
        if lhs < rhs - 1e-12 * rhs {
            violations += 1;
        }
        if check_identity && qd > 0.0 {
            defect = defect.max((qa.re + 2.0 * qm - qd).abs() / qd);
        }
    }
    let (identity_defect, identity_pass) = if check_identity {
        (Some(defect), Some(defect <= 1e-12))
    } else {
        (None, None)
    };
    GardingReport {
        constants: g,
        samples: n_samples,
        seed,
        violations,
        worst_relative_margin: if worst.is_finite() { worst } else { 0.0 },
        identity_defect,
        identity_pass,
        pass: violations == 0 && identity_pass.unwrap_or(true),
    }
}

/// Coefficient-difference norms and labels attached to a matrix pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub dmu: f64,
    pub deps: f64,
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    pub dmu: f64,
    pub deps: f64,
    pub cdis1: f64,
    pub cdis2: f64,
    pub mass_ratio: f64,
    /// `||I - A2^{-1} A1||_D`, also the contraction factor `c`.
    pub lhs_d: f64,
    /// `||I - A1 A2^{-1}||_{D^{-1}}`.
    pub lhs_dinv: f64,
    /// `||I - A2^{-1} A1||_2`.
    pub lhs_2: f64,
    /// `||I - A1 A2^{-1}||_2`.
    pub lhs_2_rev: f64,
    /// `(dmu + deps) * cdis2`.
    pub rhs_lemma: f64,
    /// `(m+/m-) * deps * cdis2`; meaningful only when `dmu = 0`.
    pub rhs_lemma_2: f64,
    /// `(dmu + deps) * cdis1`.
    pub cond: f64,
    /// `2 (dmu + deps) * cdis1`, with the measured `cdis1` standing in for
    /// the continuous solution-operator norm.
    pub rhs_proxy: f64,
    /// Relative gap between `||A2^{-1}(A2 - A1)||_D` and the D-norm of
    /// `I - A2^{-1} A1` applied directly.
    pub residual_identity_defect: f64,
    /// Relative gap between `||I - A1 A2^{-1}||_{D^{-1}}` and
    /// `||I - A2^{-H} A1^H||_D`.
    pub adjoint_defect: f64,
    pub singular_a1: bool,
    pub singular_a2: bool,
    pub dense: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl BoundReport {
    /// Contraction factor of the preconditioned fixed-point iteration.
    pub fn c(&self) -> f64 {
        self.lhs_d
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct PairQuantities {
    cdis1: f64,
    cdis2: f64,
    singular1: bool,
    singular2: bool,
    mass: MassExtremes,
    lhs_d: f64,
    lhs_dinv: f64,
    lhs_2: f64,
    lhs_2_rev: f64,
    direct_d: f64,
    adjoint_d: f64,
}

fn check_pair_dims(a1: &CsrMatrix<C64>, a2: &CsrMatrix<C64>, d: &CsrMatrix<f64>, m: &CsrMatrix<f64>) -> Result<()> {
    let n = d.nrows();
    let shapes = [
        ("A1", a1.nrows(), a1.ncols()),
        ("A2", a2.nrows(), a2.ncols()),
        ("D", d.nrows(), d.ncols()),
        ("M", m.nrows(), m.ncols()),
    ];
    for (name, r, c) in shapes {
        if r != n || c != n {
            return Err(Error::InvalidPair(format!("{name} is {r}x{c}, expected {n}x{n}")));
        }
    }
    Ok(())
}

fn dense_quantities(
    a1: &CsrMatrix<C64>,
    a2: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
) -> Result<Option<PairQuantities>> {
    let mass = mass_extremes_dense(m)?;
    let inf1 = discrete_inf_sup_dense(a1, d)?;
    let inf2 = discrete_inf_sup_dense(a2, d)?;
    let (a1d, a2d, dd) = (a1.to_dense(), a2.to_dense(), d.to_dense());
    let Some(inv2) = a2d.clone().lu().try_inverse().filter(|_| !inf2.singular) else {
        return Ok(None);
    };
    let e = &a2d - &a1d;
    let p = &inv2 * &e;
    let q = &e * &inv2;
    let n = a1.nrows();
    let direct = DMatrix::<C64>::identity(n, n) - &inv2 * &a1d;
    let adj = inv2.adjoint() * e.adjoint();
    Ok(Some(PairQuantities {
        cdis1: inf1.c_dis,
        cdis2: inf2.c_dis,
        singular1: inf1.singular,
        singular2: false,
        mass,
        lhs_d: dense::weighted_norm(&p, &dd, NormMode::D)?,
        lhs_dinv: dense::weighted_norm(&q, &dd, NormMode::DInv)?,
        lhs_2: dense::sigma_max(&p),
        lhs_2_rev: dense::sigma_max(&q),
        direct_d: dense::weighted_norm(&direct, &dd, NormMode::D)?,
        adjoint_d: dense::weighted_norm(&adj, &dd, NormMode::D)?,
    }))
}

fn iterative_quantities(
    a1: &CsrMatrix<C64>,
    a2: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    opts: &KrylovOptions,
) -> Result<Option<PairQuantities>> {
    let g = GramFactor::new(d)?;
    let mass = mass_extremes(m, opts)?;
    let inf1 = discrete_inf_sup(a1, &g, opts)?;
    let lu2 = match BandLu::new(a2) {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let inf2 = discrete_inf_sup_with(&lu2, &g, opts)?;
    if inf2.singular {
        return Ok(None);
    }
    let e = a2.lin_comb(C64::new(1.0, 0.0), a1, C64::new(-1.0, 0.0));
    let inv = Inverse(&lu2);
    let p = Product::new(vec![&inv, &e]);
    let q = Product::new(vec![&e, &inv]);
    let a2inv_a1 = Product::new(vec![&inv, a1]);
    let direct = IdentityMinus(&a2inv_a1);
    let (inv_h, e_h) = (Adjoint(&inv), Adjoint(&e));
    let adj = Product::new(vec![&inv_h as &dyn LinearOperator, &e_h]);
    let norm = |op: &dyn LinearOperator, mode| weighted_operator_norm(op, &g, mode, opts).map(|e| e.value);
    Ok(Some(PairQuantities {
        cdis1: inf1.c_dis,
        cdis2: inf2.c_dis,
        singular1: inf1.singular,
        singular2: false,
        mass,
        lhs_d: norm(&p, NormMode::D)?,
        lhs_dinv: norm(&q, NormMode::DInv)?,
        lhs_2: norm(&p, NormMode::Euclid)?,
        lhs_2_rev: norm(&q, NormMode::Euclid)?,
        direct_d: norm(&direct, NormMode::D)?,
        adjoint_d: norm(&adj, NormMode::D)?,
    }))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Bound report for an arbitrary matrix pair on one space with Gram matrix
/// `D` and mass matrix `M`.
pub fn pair_bound_report(
    a1: &CsrMatrix<C64>,
    a2: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    meta: PairMeta,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    check_pair_dims(a1, a2, d, m)?;
    let n = d.nrows();
    let dense = opts.backend.use_dense(n);
    let q = if dense {
        dense_quantities(a1, a2, d, m)?
    } else {
        iterative_quantities(a1, a2, d, m, &opts.krylov)?
    };
    let q = q.unwrap_or(PairQuantities {
        cdis1: f64::NAN,
        cdis2: f64::INFINITY,
        singular1: false,
        singular2: true,
        mass: MassExtremes {
            m_minus_sq: f64::NAN,
            m_plus_sq: f64::NAN,
        },
        lhs_d: f64::NAN,
        lhs_dinv: f64::NAN,
        lhs_2: f64::NAN,
        lhs_2_rev: f64::NAN,
        direct_d: f64::NAN,
        adjoint_d: f64::NAN,
    });

    let delta = meta.dmu + meta.deps;
    let ratio = q.mass.ratio();
    let rhs_lemma = delta * q.cdis2;
    let rhs_lemma_2 = ratio * meta.deps * q.cdis2;
    let cond = delta * q.cdis1;
    let rhs_proxy = 2.0 * delta * q.cdis1;
    let s = opts.slack;

    let mut checks = Vec::new();
    if !q.singular2 {
        checks.push(Check::le("lhs_d_le_rhs", q.lhs_d, rhs_lemma, s));
        checks.push(Check::le("lhs_dinv_le_rhs", q.lhs_dinv, rhs_lemma, s));
        if meta.dmu == 0.0 {
            checks.push(Check::le("lhs_2_le_rhs_2", q.lhs_2, rhs_lemma_2, s));
            checks.push(Check::le("lhs_2_rev_le_rhs_2", q.lhs_2_rev, rhs_lemma_2, s));
        } else {
            checks.push(Check::skipped("lhs_2_le_rhs_2", q.lhs_2, rhs_lemma_2));
            checks.push(Check::skipped("lhs_2_rev_le_rhs_2", q.lhs_2_rev, rhs_lemma_2));
        }
        let small = !q.singular1 && cond <= 0.5;
        let mk = |name: &str, lhs: f64, rhs: f64| {
            if small {
                Check::le(name, lhs, rhs, s)
            } else {
                Check::skipped(name, lhs, rhs)
            }
        };
        checks.push(mk("cdis2_le_2_cdis1", q.cdis2, 2.0 * q.cdis1));
        checks.push(mk("lhs_d_le_proxy", q.lhs_d, rhs_proxy));
        checks.push(mk("lhs_dinv_le_proxy", q.lhs_dinv, rhs_proxy));
    }
    let pass = all_pass(&checks);
    Ok(BoundReport {
        n,
        k: meta.k,
        h: meta.h,
        alpha: meta.alpha,
        dmu: meta.dmu,
        deps: meta.deps,
        cdis1: q.cdis1,
        cdis2: q.cdis2,
        mass_ratio: ratio,
        lhs_d: q.lhs_d,
        lhs_dinv: q.lhs_dinv,
        lhs_2: q.lhs_2,
        lhs_2_rev: q.lhs_2_rev,
        rhs_lemma,
        rhs_lemma_2,
        cond,
        rhs_proxy,
        residual_identity_defect: rel_gap(q.lhs_d, q.direct_d),
        adjoint_defect: rel_gap(q.lhs_dinv, q.adjoint_d),
        singular_a1: q.singular1,
        singular_a2: q.singular2,
        dense,
        checks,
        pass,
    })
}

pub fn pair_meta(sys1: &GalerkinSystem, sys2: &GalerkinSystem) -> Result<PairMeta> {
    check_same_space(sys1, sys2)?;
    Ok(PairMeta {
        dmu: field_diff_sup_norm(sys1.spec().mu_inv(), sys2.spec().mu_inv())?,
        deps: field_diff_sup_norm(sys1.spec().eps(), sys2.spec().eps())?,
        k: Some(sys1.k()),
        h: Some(sys1.h()),
        alpha: None,
    })
}

/// Report for preconditioning `sys1` with `sys2`.
pub fn nearby_bound_report(sys1: &GalerkinSystem, sys2: &GalerkinSystem, opts: &BoundOptions) -> Result<BoundReport> {
    let meta = pair_meta(sys1, sys2)?;
    pair_bound_report(&sys1.a, &sys2.a, &sys1.d, &sys1.m, meta, opts)
}

pub fn external_bound_report(sys: &ExternalSystem, meta: PairMeta, opts: &BoundOptions) -> Result<BoundReport> {
    pair_bound_report(&sys.a1, &sys.a2, &sys.d, &sys.m, meta, opts)
}

/// `sys1` with `eps` replaced by `(1 + i alpha) eps`.
pub fn absorption_pair(sys1: &GalerkinSystem, alpha: AbsorptionSpec) -> Result<GalerkinSystem> {
    let eps2 = absorption_shift(sys1.spec().eps(), alpha)?;
    assemble_system(&sys1.spec().with_eps(eps2)?)
}

pub fn absorption_report(sys1: &GalerkinSystem, alpha: AbsorptionSpec, opts: &BoundOptions) -> Result<BoundReport> {
    let sys2 = absorption_pair(sys1, alpha)?;
    let mut r = nearby_bound_report(sys1, &sys2, opts)?;
    r.alpha = Some(alpha.alpha());
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEquivalenceReport {
    pub n: usize,
    pub constants: GardingConstants,
    pub norms: SolutionOperatorNorms,
    pub gamma: f64,
    pub c_dis: f64,
    /// `||L^{-1} R||_2`.
    pub mass_to_gram: f64,
    pub dense: bool,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Solution-operator norm chains and the inf-sup lower bound they imply.
pub fn norm_equivalence_report(
    sys: &GalerkinSystem,
    g: GardingConstants,
    opts: &BoundOptions,
) -> Result<NormEquivalenceReport> {
    norm_equivalence_matrices(&sys.a, &sys.d, &sys.m, g, opts)
}

pub fn norm_equivalence_matrices(
    a: &CsrMatrix<C64>,
    d: &CsrMatrix<f64>,
    m: &CsrMatrix<f64>,
    g: GardingConstants,
    opts: &BoundOptions,
) -> Result<NormEquivalenceReport> {
    let n = d.nrows();
    let dense = opts.backend.use_dense(n);
    let (norms, inf, mass_to_gram) = if dense {
        let norms = solution_operator_norms_dense(a, d, m)?;
        let inf = discrete_inf_sup_dense(a, d)?;
        let l = dense::cholesky(&d.to_dense())?;
        let r = dense::cholesky(&m.to_dense())?;
        let lir = l
            .solve_lower_triangular(&r)
            .expect("Cholesky factor has a positive diagonal")
            .map(|v| C64::new(v, 0.0));
        (norms, inf, dense::sigma_max(&lir))
    } else {
        let gd = GramFactor::new(d)?;
        let gm = GramFactor::new(m)?;
        let norms = solution_operator_norms(a, &gd, &gm, &opts.krylov)?;
        let inf = discrete_inf_sup(a, &gd, &opts.krylov)?;
        (norms, inf, mass_to_gram_norm(&gd, &gm, &opts.krylov)?)
    };
    if inf.singular {
        return Err(Error::Singular { column: 0 });
    }
    let s = opts.slack;
    let (hs, h0, h00) = (norms.hstar_to_h, norms.h0_to_h, norms.h0_to_h0);
    let upper1 = (1.0 + g.c_g2 * h0) / g.c_g1;
    let upper2 = h00 * (g.c_g2 + 1.0 / h00).sqrt() / g.c_g1.sqrt();
    let checks = vec![
        Check::le("h0_to_h_le_hstar_to_h", h0, hs, s),
        Check::le("hstar_to_h_le_garding_bound", hs, upper1, s),
        Check::le("h0_to_h0_le_h0_to_h", h00, h0, s),
        Check::le("h0_to_h_le_garding_bound", h0, upper2, s),
        Check::le("gamma_lower_bound", 1.0 / upper1, inf.gamma, s),
        Check::le("mass_to_gram_le_1", mass_to_gram, 1.0, s),
        Check::le("cdis_matches_hstar_to_h", (inf.c_dis - hs).abs(), 1e-8 * inf.c_dis, 0.0),
    ];
    let pass = all_pass(&checks);
    Ok(NormEquivalenceReport {
        n,
        constants: g,
        norms,
        gamma: inf.gamma,
        c_dis: inf.c_dis,
        mass_to_gram,
        dense,
        checks,
        pass,
    })
}
