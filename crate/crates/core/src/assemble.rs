//! Piecewise-linear Galerkin matrices for
//! `a(u, v) = (mu^{-1} k^{-1} grad u, k^{-1} grad v) - i k^{-1} (theta u, v)_imp - (eps u, v)`.

use std::sync::Arc;

use num_traits::Zero;

use crate::coeffs::{CoefficientField, Role};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::numerics::band::BandCholesky;
use crate::sparse::CsrMatrix;
use crate::C64;

/// Wavenumber, mesh, coefficients and impedance parameter of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    k: f64,
    mesh: Arc<Mesh>,
    mu_inv: CoefficientField,
    eps: CoefficientField,
    /// One value per boundary facet; only impedance facets use it.
    theta: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(k: f64, mesh: Arc<Mesh>, mu_inv: CoefficientField, eps: CoefficientField, theta: f64) -> Result<Self> {
        let theta = vec![theta; mesh.facets().len()];
        Self::with_facet_theta(k, mesh, mu_inv, eps, theta)
    }

    pub fn with_facet_theta(
        k: f64,
        mesh: Arc<Mesh>,
        mu_inv: CoefficientField,
        eps: CoefficientField,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
        }
        if mu_inv.role() != Role::MuInv || eps.role() != Role::Eps {
            return Err(Error::InvalidArgument("coefficient roles must be (mu_inv, eps)".into()));
        }
        if mu_inv.len() != mesh.n_elements() || eps.len() != mesh.n_elements() {
            return Err(Error::InvalidArgument(format!(
                "coefficient fields have {} / {} values but the mesh has {} elements",
                mu_inv.len(),
                eps.len(),
                mesh.n_elements()
            )));
        }
        if theta.len() != mesh.facets().len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} impedance parameters, got {}",
                mesh.facets().len(),
                theta.len()
            )));
        }
        for (f, (facet, &t)) in mesh.facets().iter().zip(&theta).enumerate() {
            if facet.tag == BoundaryTag::Impedance && !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "impedance parameter must be positive on facet {f}, got {t}"
                )));
            }
        }
        Ok(Self {
            k,
            mesh,
            mu_inv,
            eps,
            theta,
        })
    }

    /// Same problem with `eps` replaced.
    pub fn with_eps(&self, eps: CoefficientField) -> Result<Self> {
        Self::with_facet_theta(self.k, self.mesh.clone(), self.mu_inv.clone(), eps, self.theta.clone())
    }

    /// Same problem with `mu^{-1}` replaced.
    pub fn with_mu_inv(&self, mu_inv: CoefficientField) -> Result<Self> {
        Self::with_facet_theta(self.k, self.mesh.clone(), mu_inv, self.eps.clone(), self.theta.clone())
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mu_inv(&self) -> &CoefficientField {
        &self.mu_inv
    }

    pub fn eps(&self) -> &CoefficientField {
        &self.eps
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `mu^{-1} = 1` and `eps = 1`: the Gårding constants are then `(1, 2)`
    /// with the identity `Re a(v, v) + 2 |v|_0^2 = |v|_H^2`.
    pub fn is_canonical(&self) -> bool {
        self.mu_inv.is_unit() && self.eps.is_unit()
    }
}

/// Assembled matrices on the free (non-Dirichlet) degrees of freedom.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    spec: ProblemSpec,
    /// Node index of every free dof.
    dof_nodes: Vec<usize>,
    /// `(mu^{-1} D phi_j, D phi_i)` with `D = k^{-1} grad`.
    pub s: CsrMatrix<C64>,
    /// `-i k^{-1} (theta phi_j, phi_i)` on impedance facets.
    pub b: CsrMatrix<C64>,
    pub m_eps: CsrMatrix<C64>,
    /// `S + B - M_eps`.
    pub a: CsrMatrix<C64>,
    /// Gram matrix of the energy norm, `k^{-2} K + M`.
    pub d: CsrMatrix<f64>,
    /// Plain mass matrix.
    pub m: CsrMatrix<f64>,
}

impl GalerkinSystem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.dof_nodes.len()
    }

    pub fn dof_nodes(&self) -> &[usize] {
        &self.dof_nodes
    }

    pub fn k(&self) -> f64 {
        self.spec.k
    }

    pub fn h(&self) -> f64 {
        self.spec.mesh.h()
    }
}

struct Triplets {
    s: Vec<(usize, usize, C64)>,
    stiff: Vec<(usize, usize, f64)>,
    m_eps: Vec<(usize, usize, C64)>,
    m: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, C64)>,
}

/// Element matrices: unweighted stiffness `K_e`, coefficient-weighted
/// stiffness, and mass `M_e` for one element.
fn element_matrices(mesh: &Mesh, e: usize, mu_inv: &crate::coeffs::Coef, out: &mut Triplets, kinv2: f64, eps: C64) {
    let el = mesh.element(e);
    let meas = mesh.measure(e);
    match mesh.dim() {
        1 => {
            let c = match mu_inv {
                crate::coeffs::Coef::Scalar(c) => *c,
                crate::coeffs::Coef::Tensor(_) => unreachable!("rejected at field construction"),
            };
            let inv = 1.0 / meas;
            for (a, &i) in el.iter().enumerate() {
                for (b, &j) in el.iter().enumerate() {
                    let kij = if a == b { inv } else { -inv };
                    let mij = if a == b { meas / 3.0 } else { meas / 6.0 };
                    out.stiff.push((i, j, kinv2 * kij));
                    out.s.push((i, j, c * (kinv2 * kij)));
                    out.m.push((i, j, mij));
                    out.m_eps.push((i, j, eps * mij));
                }
            }
        }
        _ => {
            let p: Vec<[f64; 2]> = el.iter().map(|&v| mesh.node(v)).collect();
            let inv2a = 1.0 / (2.0 * meas);
            let grads = [
                [(p[1][1] - p[2][1]) * inv2a, (p[2][0] - p[1][0]) * inv2a],
                [(p[2][1] - p[0][1]) * inv2a, (p[0][0] - p[2][0]) * inv2a],
                [(p[0][1] - p[1][1]) * inv2a, (p[1][0] - p[0][0]) * inv2a],
            ];
            let cm = mu_inv.as_matrix();
            for (a, &i) in el.iter().enumerate() {
                let gi = grads[a];
                for (b, &j) in el.iter().enumerate() {
                    let gj = grads[b];
                    let kij = meas * (gi[0] * gj[0] + gi[1] * gj[1]);
                    // g_i^T C g_j
                    let cg = [
                        cm[0][0] * gj[0] + cm[0][1] * gj[1],
                        cm[1][0] * gj[0] + cm[1][1] * gj[1],
                    ];
                    let sij = (cg[0] * gi[0] + cg[1] * gi[1]) * meas;
                    let mij = if a == b { meas / 6.0 } else { meas / 12.0 };
                    out.stiff.push((i, j, kinv2 * kij));
                    out.s.push((i, j, sij * kinv2));
                    out.m.push((i, j, mij));
                    out.m_eps.push((i, j, eps * mij));
                }
            }
        }
    }
}

/// Degree-of-freedom map: `Some(dof)` for free nodes, `None` on Dirichlet facets.
fn free_nodes(mesh: &Mesh) -> Vec<bool> {
    mesh.nodes_with_tag(BoundaryTag::Dirichlet).into_iter().map(|d| !d).collect()
}

pub fn assemble_system(spec: &ProblemSpec) -> Result<GalerkinSystem> {
    let mesh = spec.mesh.as_ref();
    let keep = free_nodes(mesh);
    let dof_nodes: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| keep[i]).collect();
    if dof_nodes.is_empty() {
        return Err(Error::DegenerateSystem("no free degrees of freedom".into()));
    }

    let kinv = 1.0 / spec.k;
    let kinv2 = kinv * kinv;
    let nel = mesh.n_elements();
    let per = (mesh.dim() + 1) * (mesh.dim() + 1);
    let mut t = Triplets {
        s: Vec::with_capacity(nel * per),
        stiff: Vec::with_capacity(nel * per),
        m_eps: Vec::with_capacity(nel * per),
        m: Vec::with_capacity(nel * per),
        b: Vec::new(),
    };
    for e in 0..nel {
        let eps = match spec.eps.value(e) {
            crate::coeffs::Coef::Scalar(z) => z,
            crate::coeffs::Coef::Tensor(_) => unreachable!("eps is scalar"),
        };
        element_matrices(mesh, e, &spec.mu_inv.value(e), &mut t, kinv2, eps);
    }
    for (facet, &theta) in mesh.facets().iter().zip(&spec.theta) {
        if facet.tag != BoundaryTag::Impedance {
            continue;
        }
        let w = C64::new(0.0, -kinv * theta);
        match facet.nodes.as_slice() {
            [v] => t.b.push((*v, *v, w)),
            [v0, v1] => {
                let len = facet.measure(mesh);
                for (a, &i) in [*v0, *v1].iter().enumerate() {
                    for (b, &j) in [*v0, *v1].iter().enumerate() {
                        let mij = if a == b { len / 3.0 } else { len / 6.0 };
                        t.b.push((i, j, w * mij));
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    let nn = mesh.n_nodes();
    let s = CsrMatrix::from_triplets(nn, nn, &t.s).restrict(&keep);
    let stiff = CsrMatrix::from_triplets(nn, nn, &t.stiff).restrict(&keep);
    let m_eps = CsrMatrix::from_triplets(nn, nn, &t.m_eps).restrict(&keep);
    let m = CsrMatrix::from_triplets(nn, nn, &t.m).restrict(&keep);
    let b = CsrMatrix::from_triplets(nn, nn, &t.b).restrict(&keep);
    let one = C64::new(1.0, 0.0);
    let a = s.lin_comb(one, &b, one).lin_comb(one, &m_eps, -one);
    let d = stiff.lin_comb(1.0, &m, 1.0);

    Ok(GalerkinSystem {
        spec: spec.clone(),
        dof_nodes,
        s,
        b,
        m_eps,
        a,
        d,
        m,
    })
}

/// Load vector `F_i = (f, phi_i)` for a piecewise-constant `f`.
pub fn assemble_load(spec: &ProblemSpec, f: &[C64]) -> Result<Vec<C64>> {
    let mesh = spec.mesh.as_ref();
    if f.len() != mesh.n_elements() {
        return Err(Error::InvalidArgument(format!(
            "load has {} values but the mesh has {} elements",
            f.len(),
            mesh.n_elements()
        )));
    }
    let keep = free_nodes(mesh);
    let mut dof = vec![usize::MAX; mesh.n_nodes()];
    let mut n = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            dof[i] = n;
            n += 1;
        }
    }
    let mut load = vec![C64::zero(); n];
    for (e, &fe) in f.iter().enumerate() {
        // each hat function integrates to measure / (dim + 1)
        let share = mesh.measure(e) / (mesh.dim() + 1) as f64;
        for &v in mesh.element(e) {
            if keep[v] {
                load[dof[v]] += fe * share;
            }
        }
    }
    Ok(load)
}

/// Matrices of a system pair supplied from outside (e.g. edge-element
/// discretisations assembled by other software).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSystem {
    pub a1: CsrMatrix<C64>,
    pub a2: CsrMatrix<C64>,
    pub d: CsrMatrix<f64>,
    pub m: CsrMatrix<f64>,
}

impl ExternalSystem {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    /// Packs an assembled pair sharing one mesh.
    pub fn from_pair(sys1: &GalerkinSystem, sys2: &GalerkinSystem) -> Result<Self> {
        check_same_space(sys1, sys2)?;
        Ok(Self {
            a1: sys1.a.clone(),
            a2: sys2.a.clone(),
            d: sys1.d.clone(),
            m: sys1.m.clone(),
        })
    }
}

pub(crate) fn check_same_space(sys1: &GalerkinSystem, sys2: &GalerkinSystem) -> Result<()> {
    if sys1.n() != sys2.n() {
        return Err(Error::InvalidPair(format!("dimension mismatch: {} vs {}", sys1.n(), sys2.n())));
    }
    if sys1.d != sys2.d || sys1.m != sys2.m {
        return Err(Error::InvalidPair(
            "systems do not share the same discrete space (D or M differ)".into(),
        ));
    }
    Ok(())
}

/// Checks dimensions, symmetry and positive definiteness of `D` and `M`.
pub fn validate_external(system: ExternalSystem) -> Result<ExternalSystem> {
    let n = system.d.nrows();
    for (name, rows, cols) in [
        ("A1", system.a1.nrows(), system.a1.ncols()),
        ("A2", system.a2.nrows(), system.a2.ncols()),
        ("D", system.d.nrows(), system.d.ncols()),
        ("M", system.m.nrows(), system.m.ncols()),
    ] {
        if rows != cols {
            return Err(Error::InvalidSystem {
                matrix: name.into(),
                reason: format!("not square ({rows}x{cols})"),
            });
        }
        if rows != n {
            return Err(Error::InvalidSystem {
                matrix: name.into(),
                reason: format!("dimension {rows} does not match D ({n})"),
            });
        }
    }
    if n == 0 {
        return Err(Error::InvalidSystem {
            matrix: "D".into(),
            reason: "empty system".into(),
        });
    }
    for (name, mat) in [("D", &system.d), ("M", &system.m)] {
        let defect = mat.hermitian_defect();
        if defect > 1e-12 * mat.max_abs() {
            return Err(Error::InvalidSystem {
                matrix: name.into(),
                reason: format!("not symmetric (defect {defect:e})"),
            });
        }
        if let Err(e) = BandCholesky::new(mat) {
            return Err(Error::InvalidSystem {
                matrix: name.into(),
                reason: e.to_string(),
            });
        }
    }
    Ok(system)
}
