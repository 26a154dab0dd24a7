//! Experiment configuration in TOML.
//!
//! ```toml
//! schema = 1
//!
//! [problem]
//! dimension = 1
//! k = 10.0
//! eps = { value = 1.0, regions = [{ xmin = 0.5, value = { re = 2.0, im = 0.0 } }] }
//!
//! [perturbation]
//! mode = "absorption"
//! alpha = 0.3
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assemble::ProblemSpec;
use crate::bounds::{BoundOptions, GardingConstants, HRule, Reference};
use crate::coeffs::{absorption_shift, piecewise_field, AbsorptionSpec, Coef, CoefficientField, Role};
use crate::error::{Error, Result};
use crate::mesh::{build_interval_mesh, build_rect_mesh, BoundaryTag, Mesh, SideTags};
use crate::numerics::krylov::KrylovOptions;
use crate::numerics::Backend;
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub garding: GardingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub dimension: usize,
    pub k: f64,
    /// `[a, b]` in 1D.
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    /// `[width, height]` in 2D.
    #[serde(default = "default_rect")]
    pub rect: [f64; 2],
    #[serde(default)]
    pub tags: TagConfig,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub mu_inv: CoefRule,
    #[serde(default)]
    pub eps: CoefRule,
    /// Elements per direction; when absent, taken from `h_rule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    #[serde(default = "default_h_rule")]
    pub h_rule: HRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    #[serde(default = "impedance")]
    pub left: BoundaryTag,
    #[serde(default = "impedance")]
    pub right: BoundaryTag,
    #[serde(default = "impedance")]
    pub bottom: BoundaryTag,
    #[serde(default = "impedance")]
    pub top: BoundaryTag,
}

impl Default for TagConfig {
    fn default() -> Self {
        Self {
            left: BoundaryTag::Impedance,
            right: BoundaryTag::Impedance,
            bottom: BoundaryTag::Impedance,
            top: BoundaryTag::Impedance,
        }
    }
}

/// A coefficient value: real, complex, or a real symmetric 2x2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefValue {
    Real(f64),
    Complex(ComplexValue),
    Tensor(TensorValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorValue {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl CoefValue {
    pub fn to_coef(self) -> Coef {
        match self {
            CoefValue::Real(x) => Coef::real(x),
            CoefValue::Complex(c) => Coef::Scalar(C64::new(c.re, c.im)),
            CoefValue::Tensor(t) => {
                let z = |x: f64| C64::new(x, 0.0);
                Coef::Tensor([[z(t.xx), z(t.xy)], [z(t.xy), z(t.yy)]])
            }
        }
    }
}

/// Axis-aligned box `xmin <= x < xmax`, `ymin <= y < ymax` on element
/// centroids; missing bounds are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ymin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ymax: Option<f64>,
    pub value: CoefValue,
}

impl Region {
    fn contains(&self, p: [f64; 2]) -> bool {
        self.xmin.is_none_or(|v| p[0] >= v)
            && self.xmax.is_none_or(|v| p[0] < v)
            && self.ymin.is_none_or(|v| p[1] >= v)
            && self.ymax.is_none_or(|v| p[1] < v)
    }
}

/// Background value overridden by the last matching region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefRule {
    pub value: CoefValue,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<Region>,
}

impl Default for CoefRule {
    fn default() -> Self {
        Self {
            value: CoefValue::Real(1.0),
            regions: Vec::new(),
        }
    }
}

impl CoefRule {
    pub fn uniform(value: CoefValue) -> Self {
        Self {
            value,
            regions: Vec::new(),
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> Coef {
        self.regions
            .iter()
            .rev()
            .find(|r| r.contains(p))
            .map_or(self.value, |r| r.value)
            .to_coef()
    }

    pub fn field(&self, mesh: &Mesh, role: Role) -> Result<CoefficientField> {
        piecewise_field(mesh, |p| self.eval(p), role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    #[default]
    Absorption,
    Nearby,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub mode: PerturbationMode,
    /// Absorption parameter for `eps2 = (1 + i alpha) eps`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Second coefficient set in nearby mode; missing entries repeat the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<CoefRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_inv2: Option<CoefRule>,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            mode: PerturbationMode::Absorption,
            alpha: default_alpha(),
            eps2: None,
            mu_inv2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: Vec<f64>,
    /// Absorption values; ignored in nearby mode.
    #[serde(default)]
    pub alpha: Vec<f64>,
    /// Mesh rules; defaults to the problem's `h_rule`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_rules: Vec<HRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub k: Vec<f64>,
    #[serde(default = "default_h_rule")]
    pub h_rule: HRule,
    #[serde(default = "default_refine")]
    pub refine: usize,
}

impl LadderConfig {
    pub fn reference(&self) -> Reference {
        Reference::Refine(self.refine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative error target of the fixed-point iteration.
    #[serde(default = "default_fp_tol")]
    pub tol: f64,
    #[serde(default = "default_max_it")]
    pub max_it: usize,
    /// Relative residual target of GMRES.
    #[serde(default = "default_gmres_tol")]
    pub gmres_tol: f64,
    #[serde(default = "default_krylov_tol")]
    pub norm_tol: f64,
    #[serde(default = "default_norm_max")]
    pub norm_max_matvecs: usize,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_fp_tol(),
            max_it: default_max_it(),
            gmres_tol: default_gmres_tol(),
            norm_tol: default_krylov_tol(),
            norm_max_matvecs: default_norm_max(),
            slack: default_slack(),
            backend: Backend::Auto,
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GardingConfig {
    #[serde(default = "one")]
    pub c_g1: f64,
    #[serde(default = "two")]
    pub c_g2: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for GardingConfig {
    fn default() -> Self {
        Self {
            c_g1: 1.0,
            c_g2: 2.0,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn impedance() -> BoundaryTag {
    BoundaryTag::Impedance
}
fn default_interval() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_rect() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_h_rule() -> HRule {
    HRule::new(1.0, 1.5)
}
fn default_alpha() -> f64 {
    0.3
}
fn default_refine() -> usize {
    4
}
fn default_fp_tol() -> f64 {
    1e-8
}
fn default_max_it() -> usize {
    500
}
fn default_gmres_tol() -> f64 {
    1e-10
}
fn default_krylov_tol() -> f64 {
    1e-10
}
fn default_norm_max() -> usize {
    50_000
}
fn default_slack() -> f64 {
    1e-9
}
fn default_seed() -> u64 {
    1
}
fn default_samples() -> usize {
    1000
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Parses and validates a configuration. Unknown keys are collected and
/// reported together.
pub fn read_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut unknown = Vec::new();
    let cfg: ExperimentConfig =
        serde_ignored::deserialize(de, |path| unknown.push(path.to_string())).map_err(|e| Error::Config(e.to_string()))?;
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_config(&text)
}

/// Normalized dump with every default filled in.
pub fn dump_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("configuration is always representable")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema));
        }
        let p = &self.problem;
        if p.dimension != 1 && p.dimension != 2 {
            return bad(format!("problem.dimension must be 1 or 2, got {}", p.dimension));
        }
        if !(p.k > 0.0) {
            return bad(format!("problem.k must be positive, got {}", p.k));
        }
        if p.elements == Some(0) {
            return bad("problem.elements must be at least 1".into());
        }
        if !(p.h_rule.scale > 0.0) {
            return bad("problem.h_rule.scale must be positive".into());
        }
        if self.perturbation.mode == PerturbationMode::Nearby
            && self.perturbation.eps2.is_none()
            && self.perturbation.mu_inv2.is_none()
        {
            return bad("perturbation.mode = \"nearby\" needs perturbation.eps2 or perturbation.mu_inv2".into());
        }
        if !(self.perturbation.alpha >= 0.0) {
            return bad(format!("perturbation.alpha must be non-negative, got {}", self.perturbation.alpha));
        }
        if let Some(s) = &self.sweep {
            if s.k.is_empty() {
                return bad("sweep.k must not be empty".into());
            }
            if self.perturbation.mode == PerturbationMode::Absorption && s.alpha.is_empty() {
                return bad("sweep.alpha must not be empty in absorption mode".into());
            }
            if s.k.iter().any(|k| !(*k > 0.0)) || s.alpha.iter().any(|a| !(*a >= 0.0)) {
                return bad("sweep grids need k > 0 and alpha >= 0".into());
            }
            if let Some(l) = &s.ladder {
                if l.k.is_empty() || l.refine == 0 {
                    return bad("sweep.ladder needs a non-empty k list and refine >= 1".into());
                }
            }
        }
        GardingConstants::new(self.garding.c_g1, self.garding.c_g2).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn extent(&self) -> f64 {
        match self.problem.dimension {
            1 => self.problem.interval[1] - self.problem.interval[0],
            _ => self.problem.rect[0],
        }
    }

    /// Elements per direction for wavenumber `k` under `rule`, unless fixed.
    pub fn elements_for(&self, k: f64, rule: &HRule) -> usize {
        self.problem.elements.unwrap_or_else(|| rule.elements(k, self.extent()))
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        let p = &self.problem;
        let t = p.tags;
        match p.dimension {
            1 => build_interval_mesh(p.interval[0], p.interval[1], n, t.left, t.right),
            _ => {
                let ny = ((n as f64) * p.rect[1] / p.rect[0]).round().max(1.0) as usize;
                build_rect_mesh(
                    p.rect[0],
                    p.rect[1],
                    n,
                    ny,
                    SideTags {
                        left: t.left,
                        right: t.right,
                        bottom: t.bottom,
                        top: t.top,
                    },
                )
            }
        }
    }

    /// The first problem at wavenumber `k` with `n` elements per direction.
    pub fn problem_spec(&self, k: f64, n: usize) -> Result<ProblemSpec> {
        let mesh = self.mesh(n)?;
        let mu = self.problem.mu_inv.field(&mesh, Role::MuInv)?;
        let eps = self.problem.eps.field(&mesh, Role::Eps)?;
        ProblemSpec::new(k, Arc::new(mesh), mu, eps, self.problem.theta)
    }

    /// The perturbed problem; `alpha` overrides the configured absorption.
    pub fn second_spec(&self, spec1: &ProblemSpec, alpha: Option<f64>) -> Result<ProblemSpec> {
        let pert = &self.perturbation;
        match pert.mode {
            PerturbationMode::Absorption => {
                let a = AbsorptionSpec::new(alpha.unwrap_or(pert.alpha))?;
                spec1.with_eps(absorption_shift(spec1.eps(), a)?)
            }
            PerturbationMode::Nearby => {
                let mesh = spec1.mesh();
                let mut spec = spec1.clone();
                if let Some(r) = &pert.eps2 {
                    spec = spec.with_eps(r.field(mesh, Role::Eps)?)?;
                }
                if let Some(r) = &pert.mu_inv2 {
                    spec = spec.with_mu_inv(r.field(mesh, Role::MuInv)?)?;
                }
                Ok(spec)
            }
        }
    }

    pub fn krylov_options(&self) -> KrylovOptions {
        KrylovOptions {
            tol: self.solver.norm_tol,
            max_matvecs: self.solver.norm_max_matvecs,
            seed: self.solver.seed,
            ..KrylovOptions::default()
        }
    }

    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions {
            krylov: self.krylov_options(),
            backend: self.solver.backend,
            slack: self.solver.slack,
        }
    }

    pub fn garding_constants(&self) -> GardingConstants {
        GardingConstants {
            c_g1: self.garding.c_g1,
            c_g2: self.garding.c_g2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "schema = 1\n[problem]\ndimension = 1\nk = 10.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = read_config(MINIMAL).unwrap();
        assert_eq!(cfg.problem.interval, [0.0, 1.0]);
        assert_eq!(cfg.perturbation.mode, PerturbationMode::Absorption);
        assert_eq!(cfg.perturbation.alpha, 0.3);
        assert_eq!(cfg.solver.slack, 1e-9);
        assert_eq!(cfg.garding.samples, 1000);
        assert_eq!(cfg.elements_for(10.0, &cfg.problem.h_rule), 32);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = format!("{MINIMAL}[perturbation]\nalpa = 0.1\n[solver]\ntoll = 1\n");
        let err = read_config(&text).unwrap_err().to_string();
        assert!(err.contains("alpa") && err.contains("toll"), "{err}");
    }

    #[test]
    fn missing_keys_are_named() {
        let err = read_config("schema = 1\n[problem]\ndimension = 1\n").unwrap_err().to_string();
        assert!(err.contains("`k`"), "{err}");
        let err = read_config("[problem]\ndimension = 1\nk = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("schema"), "{err}");
    }

    #[test]
    fn dump_round_trip() {
        let text = format!(
            "{MINIMAL}eps = {{ value = 1.0, regions = [{{ xmin = 0.25, xmax = 0.75, value = {{ re = 1.05, im = 0.0 }} }}] }}\n\
             [perturbation]\nmode = \"nearby\"\neps2 = {{ value = {{ re = 1.0, im = 0.1 }} }}\n\
             [sweep]\nk = [5.0, 10.0]\nalpha = []\nladder = {{ k = [10.0] }}\n"
        );
        let cfg = read_config(&text).unwrap();
        let dump = dump_config(&cfg);
        let again = read_config(&dump).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(dump, dump_config(&again));
    }

    #[test]
    fn regions_pick_centroid_values() {
        let cfg = read_config(&format!(
            "{MINIMAL}elements = 4\neps = {{ value = 1.0, regions = [{{ xmax = 0.5, value = 2.0 }}] }}\n"
        ))
        .unwrap();
        let spec = cfg.problem_spec(10.0, 4).unwrap();
        let vals: Vec<_> = spec.eps().values().to_vec();
        assert_eq!(vals, vec![Coef::real(2.0), Coef::real(2.0), Coef::real(1.0), Coef::real(1.0)]);
    }

    #[test]
    fn nearby_without_second_set_is_rejected() {
        let text = format!("{MINIMAL}[perturbation]\nmode = \"nearby\"\n");
        assert!(matches!(read_config(&text), Err(Error::Config(_))));
    }
}
