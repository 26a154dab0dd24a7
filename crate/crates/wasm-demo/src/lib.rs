//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types. Errors come back as `{"error": ...}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use helmlab::assemble::{assemble_system, GalerkinSystem};
use helmlab::bounds::{
    absorption_pair, infsup_ladder as ladder, nearby_bound_report, BoundOptions, HRule, IntervalFamily, ProblemFamily,
    Reference,
};
use helmlab::coeffs::AbsorptionSpec;
use helmlab::solvers::{preconditioned_runs, unit_load, RunLimits};
use helmlab::Result;

/// Largest 1D mesh the page will assemble.
const MAX_ELEMENTS: usize = 4000;

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn unit_interval(k: f64, elements_per_wavelength: f64) -> Result<GalerkinSystem> {
    if !(elements_per_wavelength > 0.0) {
        return Err(helmlab::Error::InvalidArgument("elements per wavelength must be positive".into()));
    }
    let n = ((k * elements_per_wavelength / std::f64::consts::TAU).ceil() as usize).max(4);
    if n > MAX_ELEMENTS {
        return Err(helmlab::Error::InvalidArgument(format!(
            "mesh of {n} elements is too large for the demo (limit {MAX_ELEMENTS})"
        )));
    }
    assemble_system(&IntervalFamily::unit_impedance().build(k, n)?)
}

#[derive(Serialize)]
struct CurvePoint {
    alpha: f64,
    lhs: f64,
    rhs: f64,
    cond: f64,
}

#[derive(Serialize)]
struct Curve {
    k: f64,
    n: usize,
    cdis1: f64,
    points: Vec<CurvePoint>,
}

/// `||I - A2^{-1} A1||_D` against its bound for `steps` absorption values in
/// `(0, alpha_max]` on the unit interval.
#[wasm_bindgen]
pub fn absorption_curve(k: f64, elements_per_wavelength: f64, alpha_max: f64, steps: usize) -> String {
    to_json((|| {
        let sys1 = unit_interval(k, elements_per_wavelength)?;
        let opts = BoundOptions::default();
        let steps = steps.clamp(1, 60);
        let mut points = Vec::with_capacity(steps);
        let mut cdis1 = f64::NAN;
        for i in 1..=steps {
            let alpha = alpha_max * i as f64 / steps as f64;
            let sys2 = absorption_pair(&sys1, AbsorptionSpec::new(alpha)?)?;
            let r = nearby_bound_report(&sys1, &sys2, &opts)?;
            cdis1 = r.cdis1;
            points.push(CurvePoint {
                alpha,
                lhs: r.lhs_d,
                rhs: r.rhs_lemma,
                cond: r.cond,
            });
        }
        Ok(Curve {
            k,
            n: sys1.n(),
            cdis1,
            points,
        })
    })())
}

#[derive(Serialize)]
struct Traces {
    c: f64,
    fixed_point: Vec<f64>,
    gmres: Vec<f64>,
    envelope: Vec<f64>,
}

/// Relative error of the fixed-point iteration and relative D-norm residual
/// of GMRES for one absorption value, with the `c^n` envelope.
#[wasm_bindgen]
pub fn convergence_traces(k: f64, elements_per_wavelength: f64, alpha: f64) -> String {
    to_json((|| {
        let sys1 = unit_interval(k, elements_per_wavelength)?;
        let sys2 = absorption_pair(&sys1, AbsorptionSpec::new(alpha)?)?;
        let r = nearby_bound_report(&sys1, &sys2, &BoundOptions::default())?;
        let b = unit_load(&sys1)?;
        let limits = RunLimits {
            max_it: 200,
            ..RunLimits::default()
        };
        let (fp, gm) = preconditioned_runs(&sys1.a, &sys2.a, &sys1.d, &b, r.c(), limits)?;
        let relative = |v: Vec<f64>| {
            let v0 = v.first().copied().filter(|x| *x > 0.0).unwrap_or(1.0);
            v.into_iter().map(|x| x / v0).collect::<Vec<_>>()
        };
        let len = fp.norms.len().max(gm.norms.len());
        let envelope = (0..len).map(|n| r.c().powi(n as i32)).collect();
        Ok(Traces {
            c: r.c(),
            fixed_point: relative(fp.norms),
            gmres: relative(gm.norms),
            envelope,
        })
    })())
}

/// Inf-sup ladder on the unit interval for `k = k_min * 2^j`, `j < levels`,
/// with `h = k^-exponent` and a reference mesh `refine` times finer.
#[wasm_bindgen]
pub fn infsup_ladder(k_min: f64, levels: usize, exponent: f64, refine: usize) -> String {
    to_json((|| {
        let ks: Vec<f64> = (0..levels.clamp(1, 6)).map(|j| k_min * 2f64.powi(j as i32)).collect();
        let rule = HRule::new(1.0, exponent);
        let finest = rule.elements(*ks.last().unwrap(), 1.0) * refine.max(2);
        if finest > 20 * MAX_ELEMENTS {
            return Err(helmlab::Error::InvalidArgument(format!(
                "reference mesh of {finest} elements is too large for the demo"
            )));
        }
        Ok(ladder(
            &IntervalFamily::unit_impedance(),
            &ks,
            rule,
            Reference::Refine(refine.max(2)),
            &BoundOptions::default(),
        ))
    })())
}
