//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when
//! any criterion fails. Runs under `cargo test` as a harness-free target.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use helmlab::assemble::{assemble_system, GalerkinSystem, ProblemSpec};
use helmlab::bounds::{
    absorption_pair, garding_check, infsup_ladder, nearby_bound_report, norm_equivalence_report, BoundOptions,
    BoundReport, GardingConstants, HRule, IntervalFamily, ProblemFamily, Reference, SquareFamily,
};
use helmlab::coeffs::{constant_field, piecewise_field, AbsorptionSpec, Coef, Role};
use helmlab::mesh::{build_interval_mesh, BoundaryTag, SideTags};
use helmlab::numerics::{
    discrete_inf_sup, discrete_inf_sup_dense, mass_extremes, mass_extremes_dense, solution_operator_norms,
    solution_operator_norms_dense, Backend, GramFactor,
};
use helmlab::solvers::{preconditioned_runs, unit_load, IterationTrace, RunLimits, ENVELOPE_SLACK, ROUNDOFF_FLOOR};
use helmlab::sparse::CsrMatrix;
use helmlab::C64;

const IDENTITY_TOL: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-8;
const LIMITS: RunLimits = RunLimits {
    max_it: 500,
    fp_tol: 1e-8,
    gmres_tol: 1e-10,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Collects failures and the worst value of a quantity across cases.
#[derive(Default)]
struct Tally {
    cases: usize,
    failures: Vec<String>,
    worst: f64,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn worst(&mut self, v: f64) {
        if v > self.worst || v.is_nan() {
            self.worst = v;
        }
    }

    fn outcome(self, label: &str) -> Outcome {
        let mut detail = format!("{} cases, worst {label} {:e}", self.cases, self.worst);
        if let Some(first) = self.failures.first() {
            detail += &format!("; {} failed, first: {first}", self.failures.len());
        }
        Outcome::new(self.failures.is_empty() && self.cases > 0, detail)
    }
}

fn interval(k: f64, n: usize) -> GalerkinSystem {
    let spec = IntervalFamily::unit_impedance().build(k, n).unwrap();
    assemble_system(&spec).unwrap()
}

/// `eps = 1 + delta` on centroids in `[0.25, 0.75)`, `1 - delta / 2` elsewhere.
fn nearby_eps(sys1: &GalerkinSystem, delta: f64) -> GalerkinSystem {
    let mesh = sys1.spec().mesh();
    let eps = piecewise_field(
        mesh,
        |p| {
            let inside = (0.25..0.75).contains(&p[0]);
            Coef::real(if inside { 1.0 + delta } else { 1.0 - 0.5 * delta })
        },
        Role::Eps,
    )
    .unwrap();
    assemble_system(&sys1.spec().with_eps(eps).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn max_entry_defect(a: &CsrMatrix<C64>, b: &CsrMatrix<C64>) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    let diff = a.lin_comb(C64::new(1.0, 0.0), b, C64::new(-1.0, 0.0));
    diff.max_abs() / scale
}

// ---------------------------------------------------------------- suite

#[derive(Clone, Copy, Debug)]
enum Perturbation {
    Absorption(f64),
    Nearby(f64),
}

impl std::fmt::Display for Perturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Perturbation::Absorption(a) => write!(f, "alpha={a}"),
            Perturbation::Nearby(d) => write!(f, "delta={d}"),
        }
    }
}

struct SuiteCase {
    label: String,
    sys1: GalerkinSystem,
    sys2: GalerkinSystem,
    report: BoundReport,
}

fn suite_meshes() -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for k in [5.0f64, 10.0, 20.0, 40.0] {
        for n in [(10.0 * k).ceil() as usize, k.powf(1.5).ceil() as usize] {
            out.push((k, n));
        }
    }
    out
}

fn suite_perturbations() -> Vec<Perturbation> {
    let mut p: Vec<Perturbation> = [0.05, 0.1, 0.3, 1.0].into_iter().map(Perturbation::Absorption).collect();
    p.extend([0.05, 0.2].into_iter().map(Perturbation::Nearby));
    p
}

fn build_suite() -> Vec<SuiteCase> {
    let opts = BoundOptions::default();
    let mut cases = Vec::new();
    for (k, n) in suite_meshes() {
        let sys1 = interval(k, n);
        for p in suite_perturbations() {
            let sys2 = match p {
                Perturbation::Absorption(a) => absorption_pair(&sys1, AbsorptionSpec::new(a).unwrap()).unwrap(),
                Perturbation::Nearby(d) => nearby_eps(&sys1, d),
            };
            let report = nearby_bound_report(&sys1, &sys2, &opts).unwrap();
            cases.push(SuiteCase {
                label: format!("k={k} n={n} {p}"),
                sys1: sys1.clone(),
                sys2,
                report,
            });
        }
    }
    cases
}

// ---------------------------------------------------------------- criteria

fn exact_identities() -> Outcome {
    let mut t = Tally::default();
    let mut spaces: Vec<GalerkinSystem> = vec![interval(10.0, 100), interval(40.0, 253)];
    let sq = SquareFamily {
        width: 1.0,
        tags: SideTags::all(BoundaryTag::Impedance),
        mu_inv: Coef::real(1.0),
        eps: Coef::real(1.0),
        theta: 1.0,
    };
    spaces.push(assemble_system(&sq.build(5.0, 8).unwrap()).unwrap());

    for sys in &spaces {
        let one = C64::new(1.0, 0.0);
        let sum = sys.s.lin_comb(one, &sys.b, one).lin_comb(one, &sys.m_eps, -one);
        let d = max_entry_defect(&sys.a, &sum);
        t.worst(d);
        t.record(d <= IDENTITY_TOL, || format!("A = S + B - M_eps defect {d:e}"));

        // D does not see the coefficients: compare against unit mu on the same mesh
        let mesh = sys.spec().mesh().clone();
        let mu = piecewise_field(&mesh, |p| Coef::real(2.0 + p[0] + 0.5 * p[1]), Role::MuInv).unwrap();
        let eps = piecewise_field(&mesh, |p| Coef::real(1.0 + p[0]), Role::Eps).unwrap();
        let varied = assemble_system(&ProblemSpec::new(sys.k(), mesh.clone(), mu, eps, 1.0).unwrap()).unwrap();
        let unit = constant_field(&mesh, Coef::real(1.0), Role::MuInv).unwrap();
        let s1 = assemble_system(&varied.spec().with_mu_inv(unit).unwrap()).unwrap().s;
        let expected = s1.lin_comb(C64::new(1.0, 0.0), &varied.m.to_complex(), C64::new(1.0, 0.0));
        let d = max_entry_defect(&varied.d.to_complex(), &expected);
        t.worst(d);
        t.record(d <= IDENTITY_TOL, || format!("D = S(mu=1) + M defect {d:e}"));

        let g = garding_check(sys, GardingConstants::canonical(), 1000, 1);
        let d = g.identity_defect.unwrap_or(f64::NAN);
        t.worst(d);
        t.record(d <= IDENTITY_TOL, || format!("Garding identity defect {d:e}"));

        for alpha in [0.05, 0.3, 1.0] {
            let sys2 = absorption_pair(sys, AbsorptionSpec::new(alpha).unwrap()).unwrap();
            let diff = sys2.a.lin_comb(C64::new(1.0, 0.0), &sys.a, C64::new(-1.0, 0.0));
            let expected = sys.m_eps.map(|v| C64::new(0.0, -alpha) * v);
            let d = max_entry_defect(&diff, &expected);
            t.worst(d);
            t.record(d <= IDENTITY_TOL, || format!("A2 - A1 = -i alpha M_eps defect {d:e} at alpha={alpha}"));
        }
    }
    t.outcome("relative defect")
}

fn perturbation_bounds(suite: &[SuiteCase]) -> Outcome {
    let mut t = Tally::default();
    for c in suite {
        let r = &c.report;
        t.worst(r.lhs_d / r.rhs_lemma.max(f64::MIN_POSITIVE));
        let ok1 = r.lhs_d <= r.rhs_lemma * (1.0 + BOUND_SLACK);
        t.record(ok1, || format!("{}: lhs_D={} rhs={}", c.label, r.lhs_d, r.rhs_lemma));
        // the mesh-norm form applies because mu is never perturbed in the suite
        let ok2 = r.dmu == 0.0 && r.lhs_2 <= r.rhs_lemma_2 * (1.0 + BOUND_SLACK);
        t.record(ok2, || format!("{}: lhs_2={} rhs_2={}", c.label, r.lhs_2, r.rhs_lemma_2));
    }
    t.outcome("lhs/rhs")
}

fn factor_two(suite: &[SuiteCase]) -> Outcome {
    let mut t = Tally::default();
    for c in suite.iter().filter(|c| c.report.cond <= 0.5) {
        let r = &c.report;
        t.worst(r.cdis2 / (2.0 * r.cdis1));
        t.record(r.cdis2 <= 2.0 * r.cdis1 * (1.0 + BOUND_SLACK), || {
            format!("{}: cdis2={} cdis1={}", c.label, r.cdis2, r.cdis1)
        });
    }
    t.outcome("cdis2/(2 cdis1)")
}

fn chains() -> Outcome {
    let mut t = Tally::default();
    let opts = BoundOptions::default();
    for (k, n) in suite_meshes() {
        let sys = interval(k, n);
        let r = norm_equivalence_report(&sys, GardingConstants::canonical(), &opts).unwrap();
        for c in &r.checks {
            if c.applicable {
                t.worst(c.lhs / c.rhs.max(f64::MIN_POSITIVE));
            }
            t.record(c.pass, || format!("k={k} n={n} {}: lhs={} rhs={}", c.name, c.lhs, c.rhs));
        }
    }
    t.outcome("lhs/rhs")
}

fn oracle_equivalence() -> Outcome {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let iterative = BoundOptions {
        backend: Backend::Iterative,
        ..BoundOptions::default()
    };
    let dense = BoundOptions {
        backend: Backend::Dense,
        ..BoundOptions::default()
    };
    for i in 0..50 {
        let k = rng.random_range(1.0..30.0);
        let n = rng.random_range(10..299);
        let mesh = Arc::new(build_interval_mesh(0.0, 1.0, n, BoundaryTag::Impedance, BoundaryTag::Impedance).unwrap());
        let a: f64 = rng.random_range(0.5..2.0);
        let b: f64 = rng.random_range(0.5..2.0);
        let mu = piecewise_field(&mesh, |p| Coef::real(a + (b - a) * p[0]), Role::MuInv).unwrap();
        let eps_vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let eps = piecewise_field(&mesh, |p| Coef::real(eps_vals[((p[0] * n as f64) as usize).min(n - 1)]), Role::Eps)
            .unwrap();
        let theta = rng.random_range(0.5..2.0);
        let sys1 = assemble_system(&ProblemSpec::new(k, mesh, mu, eps, theta).unwrap()).unwrap();
        let sys2 = if i % 2 == 0 {
            absorption_pair(&sys1, AbsorptionSpec::new(rng.random_range(0.01..1.0)).unwrap()).unwrap()
        } else {
            nearby_eps(&sys1, rng.random_range(0.01..0.5))
        };
        let label = format!("instance {i} (k={k:.3} n={n})");

        let ri = nearby_bound_report(&sys1, &sys2, &iterative).unwrap();
        let rd = nearby_bound_report(&sys1, &sys2, &dense).unwrap();
        let pairs = [
            ("cdis1", ri.cdis1, rd.cdis1),
            ("cdis2", ri.cdis2, rd.cdis2),
            ("mass_ratio", ri.mass_ratio, rd.mass_ratio),
            ("lhs_D", ri.lhs_d, rd.lhs_d),
            ("lhs_Dinv", ri.lhs_dinv, rd.lhs_dinv),
            ("lhs_2", ri.lhs_2, rd.lhs_2),
            ("lhs_2_rev", ri.lhs_2_rev, rd.lhs_2_rev),
        ];

        let kry = iterative.krylov;
        let g = GramFactor::new(&sys1.d).unwrap();
        let r = GramFactor::new(&sys1.m).unwrap();
        let gi = discrete_inf_sup(&sys1.a, &g, &kry).unwrap();
        let gd = discrete_inf_sup_dense(&sys1.a, &sys1.d).unwrap();
        let ni = solution_operator_norms(&sys1.a, &g, &r, &kry).unwrap();
        let nd = solution_operator_norms_dense(&sys1.a, &sys1.d, &sys1.m).unwrap();
        let mi = mass_extremes(&sys1.m, &kry).unwrap();
        let md = mass_extremes_dense(&sys1.m).unwrap();
        let more = [
            ("gamma", gi.gamma, gd.gamma),
            ("hstar_to_h", ni.hstar_to_h, nd.hstar_to_h),
            ("h0_to_h", ni.h0_to_h, nd.h0_to_h),
            ("h0_to_h0", ni.h0_to_h0, nd.h0_to_h0),
            ("m_plus_sq", mi.m_plus_sq, md.m_plus_sq),
            ("m_minus_sq", mi.m_minus_sq, md.m_minus_sq),
        ];
        for (name, x, y) in pairs.into_iter().chain(more) {
            let e = rel(x, y);
            t.worst(e);
            t.record(e <= ORACLE_TOL, || format!("{label} {name}: iterative {x} dense {y}"));
        }
    }
    t.outcome("relative gap")
}

fn envelope_case(t: &mut Tally, label: &str, sys1: &GalerkinSystem, sys2: &GalerkinSystem, c: f64) {
    if !(c < 1.0) {
        return;
    }
    let b = unit_load(sys1).unwrap();
    let (fp, gm) = preconditioned_runs(&sys1.a, &sys2.a, &sys1.d, &b, c, LIMITS).unwrap();
    let ratio = |tr: &IterationTrace| {
        tr.norms
            .iter()
            .zip(&tr.envelope_c)
            .skip(1)
            .filter(|(v, _)| **v > ROUNDOFF_FLOOR * tr.norms[0])
            .map(|(v, e)| v / e)
            .fold(0.0, f64::max)
    };
    t.worst(ratio(&fp).max(ratio(&gm)));
    t.record(fp.within_envelope(ENVELOPE_SLACK), || format!("{label}: fixed point above c^n (c={c})"));
    t.record(gm.within_envelope(ENVELOPE_SLACK), || format!("{label}: GMRES above c^n (c={c})"));
    t.record(gm.is_nonincreasing(), || format!("{label}: GMRES residuals increase"));
}

fn envelopes(suite: &[SuiteCase]) -> Outcome {
    let mut t = Tally::default();
    for c in suite {
        envelope_case(&mut t, &c.label, &c.sys1, &c.sys2, c.report.c());
    }
    t.outcome("norm/envelope")
}

fn ladder() -> Outcome {
    let lad = infsup_ladder(
        &IntervalFamily::unit_impedance(),
        &[10.0, 20.0, 40.0, 80.0],
        HRule::new(1.0, 1.5),
        Reference::Refine(4),
        &BoundOptions::default(),
    );
    let ratios: Vec<String> = lad
        .rows
        .iter()
        .map(|r| format!("k={} {}", r.k, r.ratio.map_or("n/a".into(), |x| format!("{x:.4}"))))
        .collect();
    Outcome::new(
        lad.rows.len() == 4 && lad.within(1.0 / 3.0, 3.0),
        format!("ratios {}", ratios.join(", ")),
    )
}

fn smoke_2d() -> Outcome {
    let mut t = Tally::default();
    let opts = BoundOptions {
        backend: Backend::Iterative,
        ..BoundOptions::default()
    };
    let fam = SquareFamily {
        width: 1.0,
        tags: SideTags::all(BoundaryTag::Impedance),
        mu_inv: Coef::real(1.0),
        eps: Coef::real(1.0),
        theta: 1.0,
    };
    let mut max_dofs = 0;
    for k in [5.0f64, 10.0] {
        let n = HRule::new(1.0, 1.5).elements(k, 1.0);
        let sys1 = assemble_system(&fam.build(k, n).unwrap()).unwrap();
        max_dofs = max_dofs.max(sys1.n());
        t.record(sys1.n() <= 20_000, || format!("k={k}: {} dofs", sys1.n()));
        for p in [Perturbation::Absorption(0.1), Perturbation::Absorption(0.3), Perturbation::Nearby(0.2)] {
            let sys2 = match p {
                Perturbation::Absorption(a) => absorption_pair(&sys1, AbsorptionSpec::new(a).unwrap()).unwrap(),
                Perturbation::Nearby(d) => nearby_eps(&sys1, d),
            };
            let label = format!("k={k} nx={n} {p}");
            let r = nearby_bound_report(&sys1, &sys2, &opts).unwrap();
            t.record(!r.dense, || format!("{label}: dense backend used"));
            t.record(r.lhs_d <= r.rhs_lemma * (1.0 + BOUND_SLACK), || {
                format!("{label}: lhs_D={} rhs={}", r.lhs_d, r.rhs_lemma)
            });
            t.record(r.lhs_2 <= r.rhs_lemma_2 * (1.0 + BOUND_SLACK), || {
                format!("{label}: lhs_2={} rhs_2={}", r.lhs_2, r.rhs_lemma_2)
            });
            envelope_case(&mut t, &label, &sys1, &sys2, r.c());
        }
    }
    let mut o = t.outcome("norm/envelope");
    o.detail += &format!(", largest system {max_dofs} dofs");
    o
}

fn determinism() -> Outcome {
    let text = "schema = 1\n\
        [problem]\ndimension = 1\nk = 10.0\n\
        [perturbation]\nmode = \"absorption\"\n\
        [sweep]\nk = [5.0, 10.0, 20.0]\nalpha = [0.0, 0.1, 0.3]\n\
        h_rules = [{ scale = 1.0, exponent = 1.5 }, { scale = 1.0, exponent = 1.0 }]\n\
        [sweep.ladder]\nk = [10.0, 20.0]\n\
        [solver]\nseed = 7\n";
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = helmlab::io::config::read_config(text).unwrap();
        cfg.output.dir = dir.path().to_path_buf();
        helmlab_cli::sweep(&cfg, Some(threads)).unwrap();
        let csv = std::fs::read(dir.path().join("sweep.csv")).unwrap();
        let ladder = std::fs::read(dir.path().join("ladder.csv")).unwrap();
        (csv, ladder)
    };
    let a = run(1);
    let b = run(4);
    let rows = a.0.iter().filter(|&&c| c == b'\n').count().saturating_sub(1);
    Outcome::new(
        a == b && rows == 18,
        format!("{rows} sweep rows, 1 vs 4 threads byte-identical: {}", a == b),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s, budget {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    };

    report("exact identities", Duration::from_secs(1), &mut exact_identities);

    let start = Instant::now();
    let suite = build_suite();
    let suite_time = start.elapsed();
    report("perturbation bound suite", Duration::from_secs(300).saturating_sub(suite_time), &mut || {
        perturbation_bounds(&suite)
    });
    report("factor-two bound", Duration::from_secs(1), &mut || factor_two(&suite));
    report("discrete chains and inf-sup lower bound", Duration::from_secs(300), &mut chains);
    report("dense oracle equivalence", Duration::from_secs(300), &mut oracle_equivalence);
    report("convergence envelopes", Duration::from_secs(300), &mut || envelopes(&suite));
    report("inf-sup ladder", Duration::from_secs(600), &mut ladder);
    report("2D smoke suite", Duration::from_secs(600), &mut smoke_2d);
    report("sweep determinism", Duration::from_secs(300), &mut determinism);

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
