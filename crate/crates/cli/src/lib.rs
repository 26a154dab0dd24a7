//! Scenario drivers behind the `helmlab` command: single verification runs,
//! parameter sweeps, and matrix import/export.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use helmlab::assemble::{assemble_system, ExternalSystem, GalerkinSystem};
use helmlab::bounds::{
    external_bound_report, garding_check, infsup_ladder, nearby_bound_report, norm_equivalence_report, pair_meta,
    BoundOptions, BoundReport, Check, InfSupLadder, PairMeta, ProblemFamily,
};
use helmlab::io::config::{dump_config, ExperimentConfig, PerturbationMode};
use helmlab::io::matrix_market::{read_external, read_matrix_exchange, write_matrix_exchange, D_FILE, M_FILE};
use helmlab::io::report::{bound_row, csv_string, fmt_f64, fmt_opt, json_string, CsvReport, BOUND_COLUMNS};
use helmlab::solvers::{preconditioned_runs, unit_load, IterationTrace, RunLimits, ENVELOPE_SLACK};
use helmlab::{Error, Result};

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Multiplies the inequality slack.
    pub tol_scale: Option<f64>,
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
        }
        if let Some(t) = self.tol_scale {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("--tol-scale must be positive, got {t}")));
            }
            cfg.solver.slack *= t;
        }
        Ok(())
    }

    pub fn bound_options(&self) -> Result<BoundOptions> {
        let mut o = BoundOptions::default();
        if let Some(s) = self.seed {
            o.krylov.seed = s;
        }
        if let Some(t) = self.tol_scale {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("--tol-scale must be positive, got {t}")));
            }
            o.slack *= t;
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryLine {
    pub name: String,
    pub pass: bool,
    pub margin: Option<f64>,
    pub note: String,
}

impl SummaryLine {
    fn new(name: impl Into<String>, pass: bool, margin: Option<f64>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            margin,
            note: note.into(),
        }
    }

    fn from_check(prefix: &str, c: &Check) -> Self {
        let note = if c.applicable {
            format!("lhs={} rhs={}", fmt_f64(c.lhs), fmt_f64(c.rhs))
        } else {
            "not applicable".to_string()
        };
        Self::new(format!("{prefix}.{}", c.name), c.pass, Some(c.margin), note)
    }
}

impl fmt::Display for SummaryLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}", self.name)?;
        if let Some(m) = self.margin {
            write!(f, " margin={}", fmt_f64(m))?;
        }
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub reports: Vec<PathBuf>,
    pub summary: Vec<SummaryLine>,
}

impl ScenarioResult {
    pub fn failed(&self) -> bool {
        self.summary.iter().any(|s| !s.pass)
    }

    /// 0 when everything passed, 1 when some check failed.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed())
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        self.reports.push(path);
        Ok(())
    }
}

/// Systems of one configured pair.
pub struct Pair {
    pub sys1: GalerkinSystem,
    pub sys2: GalerkinSystem,
    pub alpha: Option<f64>,
}

/// Assembles the pair at wavenumber `k` with `n` elements per direction;
/// `alpha` overrides the configured absorption.
pub fn build_pair(cfg: &ExperimentConfig, k: f64, n: usize, alpha: Option<f64>) -> Result<Pair> {
    let spec1 = cfg.problem_spec(k, n)?;
    let spec2 = cfg.second_spec(&spec1, alpha)?;
    let alpha = match cfg.perturbation.mode {
        PerturbationMode::Absorption => Some(alpha.unwrap_or(cfg.perturbation.alpha)),
        PerturbationMode::Nearby => None,
    };
    Ok(Pair {
        sys1: assemble_system(&spec1)?,
        sys2: assemble_system(&spec2)?,
        alpha,
    })
}

pub fn pair_report(pair: &Pair, opts: &BoundOptions) -> Result<BoundReport> {
    let mut r = nearby_bound_report(&pair.sys1, &pair.sys2, opts)?;
    r.alpha = pair.alpha;
    Ok(r)
}

fn run_limits(cfg: &ExperimentConfig) -> RunLimits {
    RunLimits {
        max_it: cfg.solver.max_it,
        fp_tol: cfg.solver.tol,
        gmres_tol: cfg.solver.gmres_tol,
    }
}

fn envelope_summary(prefix: &str, fp: &IterationTrace, gm: &IterationTrace, c: f64) -> Vec<SummaryLine> {
    let applicable = c < 1.0;
    let note = |t: &IterationTrace| {
        format!(
            "{} iterations, final relative {}{}",
            t.iterations(),
            fmt_f64(t.final_relative),
            if applicable { "" } else { ", c >= 1: envelope not asserted" }
        )
    };
    vec![
        SummaryLine::new(
            format!("{prefix}.fixed_point_envelope"),
            !applicable || fp.within_envelope(ENVELOPE_SLACK),
            None,
            note(fp),
        ),
        SummaryLine::new(
            format!("{prefix}.gmres_envelope"),
            !applicable || gm.within_envelope(ENVELOPE_SLACK),
            None,
            note(gm),
        ),
        SummaryLine::new(format!("{prefix}.gmres_monotone"), gm.is_nonincreasing(), None, ""),
    ]
}

/// Runs every check on the configured problem pair and writes the reports
/// under the output directory.
pub fn verify(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let out = cfg.output.dir.clone();
    let mut res = ScenarioResult::default();
    res.write(out.join("config.normalized.toml"), &dump_config(cfg))?;

    let k = cfg.problem.k;
    let n = cfg.elements_for(k, &cfg.problem.h_rule);
    let pair = build_pair(cfg, k, n, None)?;
    let opts = cfg.bound_options();

    let gar = garding_check(&pair.sys1, cfg.garding_constants(), cfg.garding.samples, cfg.solver.seed);
    res.write(out.join("garding.json"), &json_string(&gar)?)?;
    res.summary.push(SummaryLine::new(
        "garding.inequality",
        gar.violations == 0,
        Some(gar.worst_relative_margin),
        format!("{} violations in {} samples", gar.violations, gar.samples),
    ));
    if let (Some(d), Some(p)) = (gar.identity_defect, gar.identity_pass) {
        res.summary.push(SummaryLine::new(
            "garding.identity",
            p,
            None,
            format!("relative defect {}", fmt_f64(d)),
        ));
    }

    let ne = norm_equivalence_report(&pair.sys1, cfg.garding_constants(), &opts)?;
    res.write(out.join("norm_equivalence.json"), &json_string(&ne)?)?;
    res.summary.extend(ne.checks.iter().map(|c| SummaryLine::from_check("norms", c)));

    let rep = pair_report(&pair, &opts)?;
    res.write(out.join("bound_report.json"), &json_string(&rep)?)?;
    res.write(out.join("bound_report.csv"), &csv_string(&rep)?)?;
    if rep.singular_a2 {
        res.summary.push(SummaryLine::new("bounds.singular_a2", true, None, "A2 is singular; bounds skipped"));
        return Ok(res);
    }
    res.summary.extend(rep.checks.iter().map(|c| SummaryLine::from_check("bounds", c)));

    let b = unit_load(&pair.sys1)?;
    let (fp, gm) = preconditioned_runs(&pair.sys1.a, &pair.sys2.a, &pair.sys1.d, &b, rep.c(), run_limits(cfg))?;
    res.write(out.join("fixed_point.csv"), &csv_string(&fp)?)?;
    res.write(out.join("gmres.csv"), &csv_string(&gm)?)?;
    res.summary.extend(envelope_summary("solvers", &fp, &gm, rep.c()));
    res.write(out.join("summary.txt"), &summary_text(&res.summary))?;
    Ok(res)
}

fn summary_text(lines: &[SummaryLine]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub h_scale: f64,
    pub h_exponent: f64,
    pub alpha: Option<f64>,
    pub report: Option<BoundReport>,
    pub fp_iterations: Option<usize>,
    pub gmres_iterations: Option<usize>,
    pub fp_envelope: Option<bool>,
    pub gmres_envelope: Option<bool>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn pass(&self) -> bool {
        self.error.is_none()
            && self.report.as_ref().is_none_or(|r| r.pass)
            && self.fp_envelope.unwrap_or(true)
            && self.gmres_envelope.unwrap_or(true)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl CsvReport for SweepTable {
    fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["point", "h_scale", "h_exponent"].iter().map(|s| s.to_string()).collect();
        h.extend(BOUND_COLUMNS.iter().map(|s| s.to_string()));
        h.extend(
            ["fp_iterations", "gmres_iterations", "fp_envelope", "gmres_envelope", "error"]
                .iter()
                .map(|s| s.to_string()),
        );
        h
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_bool = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![i.to_string(), fmt_f64(r.h_scale), fmt_f64(r.h_exponent)];
                match &r.report {
                    Some(rep) => row.extend(bound_row(rep)),
                    None => {
                        let mut blank = vec![String::new(); BOUND_COLUMNS.len()];
                        blank[0] = fmt_f64(r.k);
                        blank[2] = fmt_opt(r.alpha);
                        blank[BOUND_COLUMNS.len() - 2] = "false".into();
                        row.extend(blank);
                    }
                }
                row.extend([
                    opt_usize(r.fp_iterations),
                    opt_usize(r.gmres_iterations),
                    opt_bool(r.fp_envelope),
                    opt_bool(r.gmres_envelope),
                    r.error.clone().unwrap_or_default(),
                ]);
                row
            })
            .collect()
    }
}

fn sweep_point(cfg: &ExperimentConfig, k: f64, rule: helmlab::bounds::HRule, alpha: Option<f64>) -> SweepRow {
    let mut row = SweepRow {
        k,
        h_scale: rule.scale,
        h_exponent: rule.exponent,
        alpha,
        report: None,
        fp_iterations: None,
        gmres_iterations: None,
        fp_envelope: None,
        gmres_envelope: None,
        error: None,
    };
    let run = |row: &mut SweepRow| -> Result<()> {
        let n = cfg.elements_for(k, &rule);
        let pair = build_pair(cfg, k, n, alpha)?;
        let rep = pair_report(&pair, &cfg.bound_options())?;
        let singular = rep.singular_a2;
        let c = rep.c();
        row.report = Some(rep);
        if singular {
            return Ok(());
        }
        let b = unit_load(&pair.sys1)?;
        let (fp, gm) = preconditioned_runs(&pair.sys1.a, &pair.sys2.a, &pair.sys1.d, &b, c, run_limits(cfg))?;
        row.fp_iterations = Some(fp.iterations());
        row.gmres_iterations = Some(gm.iterations());
        if c < 1.0 {
            row.fp_envelope = Some(fp.within_envelope(ENVELOPE_SLACK));
            row.gmres_envelope = Some(gm.within_envelope(ENVELOPE_SLACK) && gm.is_nonincreasing());
        }
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

/// Config-driven problem family for inf-sup ladders.
struct ConfigFamily<'a>(&'a ExperimentConfig);

impl ProblemFamily for ConfigFamily<'_> {
    fn extent(&self) -> f64 {
        self.0.extent()
    }
    fn build(&self, k: f64, n: usize) -> Result<helmlab::assemble::ProblemSpec> {
        self.0.problem_spec(k, n)
    }
}

/// Evaluates the sweep grid in the order k, mesh rule, alpha. Points run in
/// parallel; rows are gathered in grid order.
pub fn sweep_table(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<(SweepTable, Option<InfSupLadder>)> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] block".into()))?;
    let rules = if sw.h_rules.is_empty() {
        vec![cfg.problem.h_rule]
    } else {
        sw.h_rules.clone()
    };
    let alphas: Vec<Option<f64>> = match cfg.perturbation.mode {
        PerturbationMode::Absorption => sw.alpha.iter().map(|a| Some(*a)).collect(),
        PerturbationMode::Nearby => vec![None],
    };
    let mut points = Vec::new();
    for &k in &sw.k {
        for &rule in &rules {
            for &a in &alphas {
                points.push((k, rule, a));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let opts = cfg.bound_options();
    let (rows, ladder) = pool.install(|| {
        let rows: Vec<SweepRow> = points.par_iter().map(|&(k, r, a)| sweep_point(cfg, k, r, a)).collect();
        let ladder = sw
            .ladder
            .as_ref()
            .map(|l| infsup_ladder(&ConfigFamily(cfg), &l.k, l.h_rule, l.reference(), &opts));
        (rows, ladder)
    });
    Ok((SweepTable { rows }, ladder))
}

pub fn sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ScenarioResult> {
    let out = cfg.output.dir.clone();
    let mut res = ScenarioResult::default();
    res.write(out.join("config.normalized.toml"), &dump_config(cfg))?;
    let (table, ladder) = sweep_table(cfg, threads)?;
    res.write(out.join("sweep.csv"), &csv_string(&table)?)?;
    for (i, r) in table.rows.iter().enumerate() {
        let note = match (&r.error, &r.report) {
            (Some(e), _) => e.clone(),
            (None, Some(rep)) if rep.singular_a2 => "A2 singular".into(),
            (None, Some(rep)) => format!("lhs_D={} rhs={}", fmt_f64(rep.lhs_d), fmt_f64(rep.rhs_lemma)),
            _ => String::new(),
        };
        let margin = r.report.as_ref().map(|rep| rep.rhs_lemma - rep.lhs_d);
        let alpha = r.alpha.map(|a| format!(" alpha={}", fmt_f64(a))).unwrap_or_default();
        res.summary.push(SummaryLine::new(
            format!("sweep[{i}] k={} h=({})k^-{}{alpha}", fmt_f64(r.k), fmt_f64(r.h_scale), fmt_f64(r.h_exponent)),
            r.pass(),
            margin,
            note,
        ));
    }
    if let Some(l) = ladder {
        res.write(out.join("ladder.csv"), &csv_string(&l)?)?;
        for r in &l.rows {
            res.summary.push(SummaryLine::new(
                format!("ladder k={}", fmt_f64(r.k)),
                r.error.is_none(),
                None,
                format!("ratio={}", fmt_opt(r.ratio)),
            ));
        }
    }
    res.write(out.join("summary.txt"), &summary_text(&res.summary))?;
    Ok(res)
}

/// Writes the configured pair in exchange format.
pub fn export(cfg: &ExperimentConfig) -> Result<ScenarioResult> {
    let k = cfg.problem.k;
    let n = cfg.elements_for(k, &cfg.problem.h_rule);
    let pair = build_pair(cfg, k, n, None)?;
    let mut meta = pair_meta(&pair.sys1, &pair.sys2)?;
    meta.alpha = pair.alpha;
    let sys = ExternalSystem::from_pair(&pair.sys1, &pair.sys2)?;
    let files = write_matrix_exchange(&sys, Some(&meta), &cfg.output.dir)?;
    Ok(ScenarioResult {
        reports: files,
        summary: vec![SummaryLine::new("export", true, None, format!("n={}", sys.n()))],
    })
}

/// Inputs of an import run.
#[derive(Debug, Clone, Default)]
pub struct ImportArgs {
    pub matrix_dir: PathBuf,
    pub d: Option<PathBuf>,
    pub m: Option<PathBuf>,
    pub dmu: Option<f64>,
    pub deps: Option<f64>,
    pub out_dir: PathBuf,
}

/// Bound report for an externally supplied pair. Coefficient differences
/// come from `meta.json` next to the matrices unless given explicitly.
pub fn import(args: &ImportArgs, opts: &BoundOptions) -> Result<ScenarioResult> {
    let dir = &args.matrix_dir;
    let d = args.d.clone().unwrap_or_else(|| dir.join(D_FILE));
    let m = args.m.clone().unwrap_or_else(|| dir.join(M_FILE));
    for p in [&d, &m] {
        if !p.exists() {
            return Err(Error::Io {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            });
        }
    }
    let (sys, meta) = if args.d.is_none() && args.m.is_none() {
        read_matrix_exchange(dir)?
    } else {
        let sys = read_external(&dir.join("A1.mtx"), &dir.join("A2.mtx"), &d, &m)?;
        let meta = read_meta(dir)?;
        (sys, meta)
    };
    let mut meta = meta.unwrap_or(PairMeta {
        dmu: f64::NAN,
        deps: f64::NAN,
        k: None,
        h: None,
        alpha: None,
    });
    if let Some(v) = args.dmu {
        meta.dmu = v;
    }
    if let Some(v) = args.deps {
        meta.deps = v;
    }
    if !(meta.dmu >= 0.0 && meta.deps >= 0.0) {
        return Err(Error::InvalidArgument(
            "coefficient differences unknown: provide meta.json or --dmu and --deps".into(),
        ));
    }
    let rep = external_bound_report(&sys, meta, opts)?;
    let mut res = ScenarioResult::default();
    res.write(args.out_dir.join("bound_report.json"), &json_string(&rep)?)?;
    res.write(args.out_dir.join("bound_report.csv"), &csv_string(&rep)?)?;
    if rep.singular_a2 {
        res.summary.push(SummaryLine::new("bounds.singular_a2", true, None, "A2 is singular; bounds skipped"));
    }
    res.summary.extend(rep.checks.iter().map(|c| SummaryLine::from_check("bounds", c)));
    Ok(res)
}

fn read_meta(dir: &Path) -> Result<Option<PairMeta>> {
    let p = dir.join("meta.json");
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p, source: e })?;
    Ok(Some(serde_json::from_str(&text)?))
}
