use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use helmlab::io::config::load_config;
use helmlab_cli::{export, import, sweep, verify, ImportArgs, RunOptions, ScenarioResult};

/// Helmholtz preconditioner-quality checks.
///
/// Exit status: 0 when every check passes, 1 when some inequality fails,
/// 2 on configuration or runtime errors.
#[derive(Parser)]
#[command(name = "helmlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for random start vectors and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies the relative slack of every inequality check.
    #[arg(long)]
    tol_scale: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            tol_scale: self.tol_scale,
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every check on the configured pair.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the configured grid, one CSV row per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Bound report for matrices in exchange format.
    Import {
        /// Directory holding A1.mtx and A2.mtx (and by default D.mtx, M.mtx, meta.json).
        #[arg(long)]
        matrix_dir: PathBuf,
        /// Gram matrix file, if not in the matrix directory.
        #[arg(long)]
        d: Option<PathBuf>,
        /// Mass matrix file, if not in the matrix directory.
        #[arg(long)]
        m: Option<PathBuf>,
        /// Coefficient differences, overriding meta.json.
        #[arg(long)]
        dmu: Option<f64>,
        #[arg(long)]
        deps: Option<f64>,
        /// Solver settings; other sections are ignored.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the configured pair as Matrix Market files plus meta.json.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> helmlab::Result<ScenarioResult> {
    let with_config = |path: &PathBuf, common: &Common| {
        let mut cfg = load_config(path)?;
        common.options().apply(&mut cfg)?;
        Ok::<_, helmlab::Error>(cfg)
    };
    match cli.command {
        Command::Verify { config, common } => verify(&with_config(&config, &common)?),
        Command::Sweep { config, common } => sweep(&with_config(&config, &common)?, common.threads),
        Command::Export { config, common } => export(&with_config(&config, &common)?),
        Command::Import {
            matrix_dir,
            d,
            m,
            dmu,
            deps,
            config,
            common,
        } => {
            let opts = match &config {
                Some(p) => with_config(p, &common)?.bound_options(),
                None => common.options().bound_options()?,
            };
            let out_dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            import(
                &ImportArgs {
                    matrix_dir,
                    d,
                    m,
                    dmu,
                    deps,
                    out_dir,
                },
                &opts,
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(res) => {
            for line in &res.summary {
                println!("{line}");
            }
            for p in &res.reports {
                println!("wrote {}", p.display());
            }
            ExitCode::from(res.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
