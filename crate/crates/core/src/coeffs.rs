//! Piecewise-constant complex coefficient fields `mu^{-1}` and `eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    MuInv,
    Eps,
}

/// Value of a coefficient on one element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Coef {
    Scalar(C64),
    /// Symmetric 2x2 complex matrix, row major. Only meaningful for `MuInv` in 2D.
    Tensor([[C64; 2]; 2]),
}

impl Coef {
    pub fn real(x: f64) -> Self {
        Coef::Scalar(C64::new(x, 0.0))
    }

    pub fn as_matrix(&self) -> [[C64; 2]; 2] {
        match *self {
            Coef::Scalar(s) => [[s, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), s]],
            Coef::Tensor(m) => m,
        }
    }

    fn scale(&self, f: C64) -> Self {
        match *self {
            Coef::Scalar(s) => Coef::Scalar(s * f),
            Coef::Tensor(m) => Coef::Tensor([[m[0][0] * f, m[0][1] * f], [m[1][0] * f, m[1][1] * f]]),
        }
    }

    /// Operator norm of the pointwise multiplication by `self - other`.
    pub fn diff_norm(&self, other: &Coef) -> f64 {
        match (self, other) {
            (Coef::Scalar(a), Coef::Scalar(b)) => (a - b).norm(),
            _ => {
                let a = self.as_matrix();
                let b = other.as_matrix();
                let d = [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]];
                spectral_norm_2x2(d)
            }
        }
    }

    fn check(&self, role: Role, dim: usize) -> std::result::Result<(), String> {
        match self {
            Coef::Scalar(s) => {
                if !s.re.is_finite() || !s.im.is_finite() {
                    return Err(format!("non-finite value {s}"));
                }
                if role == Role::MuInv && !(s.re > 0.0) {
                    return Err(format!("Re mu^-1 must be positive, got {s}"));
                }
            }
            Coef::Tensor(m) => {
                if dim != 2 {
                    return Err("matrix-valued coefficients require a 2D mesh".into());
                }
                if role != Role::MuInv {
                    return Err("eps must be scalar valued".into());
                }
                if m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err("non-finite tensor entry".into());
                }
                if m[0][1] != m[1][0] {
                    return Err(format!("tensor is not symmetric ({} vs {})", m[0][1], m[1][0]));
                }
                // smallest eigenvalue of the real part
                let (a, b, c) = (m[0][0].re, m[0][1].re, m[1][1].re);
                let lam_min = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
                if !(lam_min > 0.0) {
                    return Err(format!("Re mu^-1 must be positive definite, smallest eigenvalue {lam_min}"));
                }
            }
        }
        Ok(())
    }
}

fn spectral_norm_2x2(d: [[C64; 2]; 2]) -> f64 {
    // largest eigenvalue of d^H d
    let h00 = d[0][0].norm_sqr() + d[1][0].norm_sqr();
    let h11 = d[0][1].norm_sqr() + d[1][1].norm_sqr();
    let h01 = d[0][0].conj() * d[0][1] + d[1][0].conj() * d[1][1];
    let tr = h00 + h11;
    let disc = (0.25 * (h00 - h11) * (h00 - h11) + h01.norm_sqr()).sqrt();
    (0.5 * tr + disc).max(0.0).sqrt()
}

/// One coefficient value per mesh element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    role: Role,
    dim: usize,
    values: Vec<Coef>,
}

/// Absorption parameter `alpha >= 0` of the shift `eps -> (1 + i alpha) eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSpec(f64);

impl AbsorptionSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("absorption must be non-negative, got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }
}

impl CoefficientField {
    fn from_values(mesh: &Mesh, values: Vec<Coef>, role: Role) -> Result<Self> {
        for (e, v) in values.iter().enumerate() {
            v.check(role, mesh.dim())
                .map_err(|msg| Error::InvalidCoefficient(format!("element {e}: {msg}")))?;
        }
        Ok(Self {
            role,
            dim: mesh.dim(),
            values,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Coef] {
        &self.values
    }

    pub fn value(&self, e: usize) -> Coef {
        self.values[e]
    }

    /// True when every value is the real scalar 1.
    pub fn is_unit(&self) -> bool {
        self.values.iter().all(|v| *v == Coef::real(1.0))
    }

    /// True when every value is real (scalars or real symmetric tensors).
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| match v {
            Coef::Scalar(s) => s.im == 0.0,
            Coef::Tensor(m) => m.iter().flatten().all(|z| z.im == 0.0),
        })
    }

    /// Largest pointwise magnitude.
    pub fn sup_norm(&self) -> f64 {
        let zero = Coef::real(0.0);
        self.values.iter().map(|v| v.diff_norm(&zero)).fold(0.0, f64::max)
    }
}

pub fn constant_field(mesh: &Mesh, value: Coef, role: Role) -> Result<CoefficientField> {
    CoefficientField::from_values(mesh, vec![value; mesh.n_elements()], role)
}

/// Evaluates `rule` at every element centroid.
pub fn piecewise_field<F>(mesh: &Mesh, rule: F, role: Role) -> Result<CoefficientField>
where
    F: Fn([f64; 2]) -> Coef,
{
    let values = (0..mesh.n_elements()).map(|e| rule(mesh.centroid(e))).collect();
    CoefficientField::from_values(mesh, values, role)
}

/// `eps -> (1 + i alpha) eps`.
pub fn absorption_shift(eps: &CoefficientField, alpha: AbsorptionSpec) -> Result<CoefficientField> {
    if eps.role != Role::Eps {
        return Err(Error::InvalidArgument("absorption shift applies to eps fields only".into()));
    }
    let f = C64::new(1.0, alpha.alpha());
    Ok(CoefficientField {
        role: Role::Eps,
        dim: eps.dim,
        values: eps.values.iter().map(|v| v.scale(f)).collect(),
    })
}

/// Quadratic complex stretching beyond `r`:
/// `s(x) = 1 + i (sigma0 / k) ((x - r) / (b - r))^2`, with `mu^{-1} = 1/s` and `eps = s`.
pub fn pml_profile_1d(
    mesh: &Mesh,
    k: f64,
    r: f64,
    sigma0: f64,
) -> Result<(CoefficientField, CoefficientField)> {
    let (a, b) = mesh
        .interval()
        .ok_or_else(|| Error::InvalidArgument("PML profile requires a 1D mesh".into()))?;
    if !(r >= a && r <= b) {
        return Err(Error::InvalidArgument(format!("PML start {r} outside [{a}, {b}]")));
    }
    if !(sigma0 >= 0.0) || !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "PML needs sigma0 >= 0 and k > 0 (got sigma0 = {sigma0}, k = {k})"
        )));
    }
    let stretch = |x: f64| -> C64 {
        if x <= r || b == r {
            C64::new(1.0, 0.0)
        } else {
            let t = (x - r) / (b - r);
            C64::new(1.0, sigma0 / k * t * t)
        }
    };
    let mu_inv = piecewise_field(mesh, |c| Coef::Scalar(stretch(c[0]).inv()), Role::MuInv)?;
    let eps = piecewise_field(mesh, |c| Coef::Scalar(stretch(c[0])), Role::Eps)?;
    Ok((mu_inv, eps))
}

/// Sup over elements of the pointwise operator norm of `f1 - f2`.
pub fn field_diff_sup_norm(f1: &CoefficientField, f2: &CoefficientField) -> Result<f64> {
    if f1.role != f2.role {
        return Err(Error::InvalidArgument(format!(
            "role mismatch: {:?} vs {:?}",
            f1.role, f2.role
        )));
    }
    if f1.len() != f2.len() || f1.dim != f2.dim {
        return Err(Error::InvalidArgument(format!(
            "fields live on different meshes ({} vs {} elements)",
            f1.len(),
            f2.len()
        )));
    }
    Ok(f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(a, b)| a.diff_norm(b))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rect_mesh, BoundaryTag, SideTags};
    use proptest::prelude::*;

    fn line(n: usize) -> Mesh {
        build_interval_mesh(0.0, 1.0, n, BoundaryTag::Impedance, BoundaryTag::Impedance).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_fields() {
        let m = line(4);
        let eps = constant_field(&m, Coef::real(1.0), Role::Eps).unwrap();
        assert!(eps.is_unit());
        assert_eq!(eps.len(), 4);
        assert!(constant_field(&m, Coef::real(2.0), Role::MuInv).is_ok());
        assert!(matches!(
            constant_field(&m, Coef::real(-1.0), Role::MuInv),
            Err(Error::InvalidCoefficient(_))
        ));
    }

    #[test]
    fn piecewise_by_centroid() {
        let m = line(4);
        let f = piecewise_field(&m, |x| Coef::real(if x[0] < 0.5 { 1.0 } else { 2.0 }), Role::Eps).unwrap();
        let v: Vec<f64> = f
            .values()
            .iter()
            .map(|v| match v {
                Coef::Scalar(s) => s.re,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(v, vec![1.0, 1.0, 2.0, 2.0]);

        let g = piecewise_field(&m, |_| Coef::real(3.0), Role::Eps).unwrap();
        assert_eq!(g, constant_field(&m, Coef::real(3.0), Role::Eps).unwrap());
    }

    #[test]
    fn checkerboard_on_rect() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2, SideTags::all(BoundaryTag::Impedance)).unwrap();
        let rule = |p: [f64; 2]| {
            let odd = ((p[0] * 2.0).floor() as i64 + (p[1] * 2.0).floor() as i64) % 2 == 1;
            Coef::real(if odd { 2.0 } else { 1.0 })
        };
        let f = piecewise_field(&m, rule, Role::Eps).unwrap();
        assert_eq!(f.len(), 8);
        // both triangles of a cell share its color; cells alternate
        let expect = [1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.0, 1.0];
        for (v, e) in f.values().iter().zip(expect) {
            assert_eq!(*v, Coef::real(e));
        }
    }

    #[test]
    fn tensor_checks() {
        let m = build_rect_mesh(1.0, 1.0, 1, 1, SideTags::all(BoundaryTag::Impedance)).unwrap();
        let ok = Coef::Tensor([[c(2.0, 0.1), c(0.5, 0.0)], [c(0.5, 0.0), c(1.0, 0.0)]]);
        assert!(constant_field(&m, ok, Role::MuInv).is_ok());
        let asym = Coef::Tensor([[c(2.0, 0.0), c(0.5, 0.0)], [c(0.4, 0.0), c(1.0, 0.0)]]);
        assert!(constant_field(&m, asym, Role::MuInv).is_err());
        let indefinite = Coef::Tensor([[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(1.0, 0.0)]]);
        assert!(constant_field(&m, indefinite, Role::MuInv).is_err());
        assert!(constant_field(&line(2), ok, Role::MuInv).is_err());
    }

    #[test]
    fn absorption_shift_values() {
        let m = line(3);
        let one = constant_field(&m, Coef::real(1.0), Role::Eps).unwrap();
        let s = absorption_shift(&one, AbsorptionSpec::new(0.5).unwrap()).unwrap();
        assert!(s.values().iter().all(|v| *v == Coef::Scalar(c(1.0, 0.5))));
        let same = absorption_shift(&one, AbsorptionSpec::new(0.0).unwrap()).unwrap();
        assert_eq!(same, one);
        let two = constant_field(&m, Coef::real(2.0), Role::Eps).unwrap();
        let s = absorption_shift(&two, AbsorptionSpec::new(1.0).unwrap()).unwrap();
        assert!(s.values().iter().all(|v| *v == Coef::Scalar(c(2.0, 2.0))));

        let mu = constant_field(&m, Coef::real(1.0), Role::MuInv).unwrap();
        assert!(absorption_shift(&mu, AbsorptionSpec::new(0.1).unwrap()).is_err());
        assert!(AbsorptionSpec::new(-0.1).is_err());
    }

    #[test]
    fn pml_profile() {
        let m = line(10);
        let (mu, eps) = pml_profile_1d(&m, 5.0, 0.5, 0.0).unwrap();
        assert!(mu.is_unit() && eps.is_unit());

        let (mu, eps) = pml_profile_1d(&m, 5.0, 0.5, 20.0).unwrap();
        for e in 0..10 {
            let x = m.centroid(e)[0];
            if x <= 0.5 {
                assert_eq!(mu.value(e), Coef::real(1.0));
                assert_eq!(eps.value(e), Coef::real(1.0));
            } else {
                let t = (x - 0.5) / 0.5;
                assert_eq!(eps.value(e), Coef::Scalar(c(1.0, 4.0 * t * t)));
            }
        }
        assert!(pml_profile_1d(&m, 5.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn pml_stretch_reaches_one_plus_i() {
        // centroids sit strictly inside the layer, so place one at t = 1/2 and
        // scale sigma0 so that (sigma0 / k) t^2 = 1
        let m = build_interval_mesh(0.0, 2.0, 2, BoundaryTag::Dirichlet, BoundaryTag::Dirichlet).unwrap();
        let (mu, eps) = pml_profile_1d(&m, 3.0, 1.0, 3.0 * 4.0).unwrap();
        assert_eq!(eps.value(1), Coef::Scalar(c(1.0, 1.0)));
        match mu.value(1) {
            Coef::Scalar(z) => assert!((z - c(0.5, -0.5)).norm() < 1e-15),
            _ => unreachable!(),
        }
        assert_eq!(eps.value(0), Coef::real(1.0));
    }

    #[test]
    fn sup_norm_differences() {
        let m = line(2);
        let a = piecewise_field(&m, |x| Coef::real(if x[0] < 0.5 { 1.0 } else { 2.0 }), Role::Eps).unwrap();
        let b = piecewise_field(&m, |x| Coef::real(if x[0] < 0.5 { 1.5 } else { 2.5 }), Role::Eps).unwrap();
        assert_eq!(field_diff_sup_norm(&a, &a).unwrap(), 0.0);
        assert!((field_diff_sup_norm(&a, &b).unwrap() - 0.5).abs() < 1e-15);

        let one = constant_field(&m, Coef::real(1.0), Role::Eps).unwrap();
        let shifted = absorption_shift(&one, AbsorptionSpec::new(0.3).unwrap()).unwrap();
        assert!((field_diff_sup_norm(&one, &shifted).unwrap() - 0.3).abs() < 1e-15);

        let mu = constant_field(&m, Coef::real(1.0), Role::MuInv).unwrap();
        assert!(field_diff_sup_norm(&one, &mu).is_err());
        let other = constant_field(&line(3), Coef::real(1.0), Role::Eps).unwrap();
        assert!(field_diff_sup_norm(&one, &other).is_err());
    }

    #[test]
    fn tensor_difference_is_spectral_norm() {
        let m = build_rect_mesh(1.0, 1.0, 1, 1, SideTags::all(BoundaryTag::Impedance)).unwrap();
        let a = constant_field(
            &m,
            Coef::Tensor([[c(3.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(3.0, 0.0)]]),
            Role::MuInv,
        )
        .unwrap();
        let b = constant_field(&m, Coef::real(1.0), Role::MuInv).unwrap();
        // difference [[2,1],[1,2]] has eigenvalues 1 and 3
        assert!((field_diff_sup_norm(&a, &b).unwrap() - 3.0).abs() < 1e-14);
    }

    fn coef_strategy() -> impl Strategy<Value = (f64, f64)> {
        (-3.0..3.0f64, -3.0..3.0f64)
    }

    proptest! {
        #[test]
        fn sup_norm_is_a_metric(
            a in prop::collection::vec(coef_strategy(), 5),
            b in prop::collection::vec(coef_strategy(), 5),
            d in prop::collection::vec(coef_strategy(), 5),
        ) {
            let m = line(5);
            let mk = |v: &Vec<(f64, f64)>| {
                let v = v.clone();
                piecewise_field(&m, move |x| {
                    let e = ((x[0] * 5.0).floor() as usize).min(4);
                    Coef::Scalar(C64::new(v[e].0, v[e].1))
                }, Role::Eps).unwrap()
            };
            let (fa, fb, fd) = (mk(&a), mk(&b), mk(&d));
            let ab = field_diff_sup_norm(&fa, &fb).unwrap();
            let ba = field_diff_sup_norm(&fb, &fa).unwrap();
            let ad = field_diff_sup_norm(&fa, &fd).unwrap();
            let db = field_diff_sup_norm(&fd, &fb).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= ad + db + 1e-12);
            prop_assert_eq!(field_diff_sup_norm(&fa, &fa).unwrap(), 0.0);
            prop_assert_eq!(ab == 0.0, fa == fb);
        }

        #[test]
        fn absorption_shifts_compose(a1 in 0.0..2.0f64, a2 in 0.0..2.0f64, v in 0.1..3.0f64) {
            let m = line(3);
            let eps = constant_field(&m, Coef::Scalar(C64::new(v, 0.2)), Role::Eps).unwrap();
            let twice = absorption_shift(
                &absorption_shift(&eps, AbsorptionSpec::new(a1).unwrap()).unwrap(),
                AbsorptionSpec::new(a2).unwrap(),
            ).unwrap();
            let f = C64::new(1.0, a1) * C64::new(1.0, a2);
            for (t, e) in twice.values().iter().zip(eps.values()) {
                match (t, e) {
                    (Coef::Scalar(t), Coef::Scalar(e)) => prop_assert!((t - e * f).norm() <= 1e-14 * (e * f).norm()),
                    _ => unreachable!(),
                }
            }
        }
    }
}
