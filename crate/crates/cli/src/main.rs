//! `brlab`: batch driver for the brlab-core experiments.
//!
//! Exit codes: 0 pass, 1 suite failure (or unreliable fits under
//! `--strict`), 2 usage or domain error.

mod config;
mod plot;
mod scan;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use brlab_core::exponents::emit_region_data;
use brlab_core::Error as CoreError;
use config::{parse_number, parse_pairs, RunConfig};

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(#[from] UsageError),
    #[error("{0}")]
    Core(#[from] CoreError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(CoreError::Domain(_) | CoreError::OutsideRange(_) | CoreError::TooFewPoints { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "brlab", version, about = "Bilinear Bochner-Riesz numerical laboratory")]
struct Cli {
    /// JSON run config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    /// Treat unreliable fits as failures.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exponent regions, the diagonal curve, and an SVG of both.
    Exponents(Overrides),
    /// Run one identity or inequality suite.
    Verify {
        suite: String,
        #[command(flatten)]
        o: Overrides,
    },
    /// δ-scaling scans and the counterexample fit.
    Scan {
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Re-run a stored config.
    Run { file: PathBuf },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    d: Option<u32>,
    #[arg(long, value_parser = parse_number)]
    nu: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    step: Option<f64>,
    /// Comma-separated, fractions allowed: `1/8,1/16`. Pass `""` for none.
    #[arg(long, allow_hyphen_values = true)]
    deltas: Option<String>,
    /// `p,q` pairs separated by `;`, e.g. `4,4;inf,inf`.
    #[arg(long)]
    exponents: Option<String>,
    #[arg(long, value_parser = parse_number)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    varrho: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    epsilon: Option<f64>,
    /// Taylor orders, comma-separated.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// `mc` or `quadrature`.
    #[arg(long)]
    method: Option<String>,
}

impl Overrides {
    fn into_config(self) -> Result<RunConfig, UsageError> {
        let deltas = match self.deltas {
            None => None,
            Some(s) => Some(
                s.split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(parse_number)
                    .collect::<Result<Vec<f64>, String>>()
                    .map_err(UsageError)?,
            ),
        };
        let exponents = self.exponents.as_deref().map(parse_pairs).transpose().map_err(UsageError)?;
        Ok(RunConfig {
            d: self.d,
            nu: self.nu,
            step: self.step,
            deltas,
            exponents,
            alpha: self.alpha,
            varrho: self.varrho,
            epsilon: self.epsilon,
            orders: self.orders,
            seed: self.seed,
            samples: self.samples,
            budget: self.budget,
            method: self.method,
            ..Default::default()
        })
    }
}

/// A resolved run: config, its hash and where outputs go.
pub struct Ctx {
    pub cfg: RunConfig,
    pub sha: String,
    pub out: PathBuf,
    pub strict: bool,
}

impl Ctx {
    pub fn preamble(&self) -> Vec<String> {
        vec![
            format!("config_sha256={}", self.sha),
            format!("brlab-core={} brlab-cli={}", brlab_core::VERSION, CLI_VERSION),
        ]
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Writes `body` with the hash and versions alongside.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            config_sha256: &'a str,
            brlab_core: &'a str,
            brlab_cli: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        let p = self.path(name);
        brlab_core::io::write_json(
            &p,
            &Stamped {
                config_sha256: &self.sha,
                brlab_core: brlab_core::VERSION,
                brlab_cli: CLI_VERSION,
                body,
            },
        )?;
        Ok(p)
    }
}

/// Outcome of a command once its files are written.
pub enum Status {
    Pass,
    Fail(String),
    Unreliable(String),
}

fn build_config(cli: Cli) -> Result<(RunConfig, PathBuf, bool), UsageError> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let over = match cli.cmd {
        Command::Exponents(o) => RunConfig {
            command: Some("exponents".into()),
            ..o.into_config()?
        },
        Command::Verify { suite, o } => RunConfig {
            command: Some("verify".into()),
            suite: Some(suite),
            ..o.into_config()?
        },
        Command::Scan { preset, o } => RunConfig {
            command: Some("scan".into()),
            preset,
            ..o.into_config()?
        },
        Command::Run { file } => RunConfig::load(&file)?,
    };
    Ok((base.overlay(over).resolve()?, cli.out, cli.strict))
}

fn exponents(ctx: &Ctx) -> Result<Status, CliError> {
    let c = &ctx.cfg;
    let data = emit_region_data(c.d.unwrap(), c.nu.unwrap(), c.step.unwrap())?;
    let pre = ctx.preamble();
    data.write_region_csv(&ctx.path("regions.csv"), &pre)?;
    data.write_curve_csv(&ctx.path("diagonal.csv"), &pre)?;
    let svg = data.render_svg(&pre.join(" "));
    brlab_core::io::write_text(&ctx.path("exponents.svg"), &svg)?;
    Ok(Status::Pass)
}

fn execute(ctx: &Ctx) -> Result<Status, CliError> {
    brlab_core::io::write_json(&ctx.path("config.json"), &ctx.cfg)?;
    match ctx.cfg.cmd() {
        "exponents" => exponents(ctx),
        "verify" => verify::run(ctx),
        "scan" => scan::run(ctx),
        other => Err(UsageError(format!("unknown command {other:?}")).into()),
    }
}

fn report(status: Result<Status, CliError>, strict: bool) -> ExitCode {
    match status {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Ok(Status::Unreliable(msg)) => {
            eprintln!("warning: {msg}");
            if strict {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let sequential = cli.sequential;
    let (cfg, out, strict) = match build_config(cli) {
        Ok(x) => x,
        Err(e) => return report(Err(e.into()), false),
    };
    let ctx = Ctx {
        sha: cfg.sha256(),
        cfg,
        out,
        strict,
    };
    let status = if sequential {
        brlab_core::par::sequential(|| execute(&ctx))
    } else {
        execute(&ctx)
    };
    if let Ok(Status::Pass | Status::Unreliable(_)) = &status {
        println!("config_sha256={} outputs in {}", ctx.sha, display(&ctx.out));
    }
    report(status, ctx.strict)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
