//! `qtoda`: evaluate function families on geometric grids, run the
//! verification suites, compare the two K representations.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 numeric non-convergence.

mod config;
mod suites;
mod table;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{CommonFlags, OutputFormat, RunConfig};
use suites::{CheckRow, Status, Suite, SuiteOptions};
use table::{Family, RowStatus};

#[derive(Debug, Parser)]
#[command(name = "qtoda", version, about = "q²-Bessel, relativistic Toda and U_q(sl2) tools")]
struct Cli {
    #[command(flatten)]
    flags: CommonFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a function family on the grid x₀·qⁿ, n = lo..hi
    Eval {
        #[arg(value_enum)]
        function: Family,
    },
    /// Run a verification suite and emit a report
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Shift added to the Toda eigenvalue (for negative controls)
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eigenvalue_offset: f64,
    },
    /// Contour-integral K against the two-term series K on the grid
    MellinCompare,
}

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    config: &'a RunConfig,
    rows: &'a [R],
    checks: &'a [CheckRow],
}

fn render<R: Serialize>(cfg: &RunConfig, rows: &[R], checks: &[CheckRow]) -> Result<Vec<u8>, String> {
    match cfg.format {
        OutputFormat::Json => {
            let mut v = serde_json::to_vec_pretty(&Report { config: cfg, rows, checks }).map_err(|e| e.to_string())?;
            v.push(b'\n');
            Ok(v)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            if rows.is_empty() {
                for c in checks {
                    w.serialize(c).map_err(|e| e.to_string())?;
                }
            } else {
                for r in rows {
                    w.serialize(r).map_err(|e| e.to_string())?;
                }
            }
            w.into_inner().map_err(|e| e.to_string())
        }
    }
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<(), String> {
    match &cfg.out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => std::io::stdout().write_all(bytes).map_err(|e| e.to_string()),
    }
}

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    let usage = |e: String| (EXIT_USAGE, e);
    let name = match &cli.command {
        Command::Eval { .. } => "eval",
        Command::Verify { .. } => "verify",
        Command::MellinCompare => "mellin-compare",
    };
    let cfg = RunConfig::resolve(name.to_string(), &cli.flags).map_err(usage)?;
    let ctx = cfg.ctx().map_err(usage)?;
    let tol = cfg.tolerances().map_err(usage)?;
    let io = |e: String| (EXIT_USAGE, e);
    match cli.command {
        Command::Eval { function } => {
            let rows = table::eval_table(function, &ctx, &cfg.grid(), &tol);
            emit(&cfg, &render(&cfg, &rows, &[]).map_err(io)?).map_err(io)?;
            Ok(if rows.iter().any(|r| r.status != RowStatus::Ok) { EXIT_NONCONVERGED } else { 0 })
        }
        Command::MellinCompare => {
            let rows = table::compare_table(&ctx, &cfg.grid(), &tol);
            emit(&cfg, &render(&cfg, &rows, &[]).map_err(io)?).map_err(io)?;
            let bad = rows.iter().any(|r| matches!(r.status, RowStatus::Nonconverged | RowStatus::Error));
            Ok(if bad { EXIT_NONCONVERGED } else { 0 })
        }
        Command::Verify { suite, eigenvalue_offset } => {
            let opts = SuiteOptions { eigenvalue_offset };
            let checks = suites::run(suite, &ctx, (cfg.x0, cfg.lo, cfg.hi), &tol, opts);
            let empty: [table::EvalRow; 0] = [];
            emit(&cfg, &render(&cfg, &empty, &checks).map_err(io)?).map_err(io)?;
            Ok(if checks.iter().any(|c| c.status == Status::Fail) {
                EXIT_VERIFY
            } else if checks.iter().any(|c| c.status == Status::Nonconverged) {
                EXIT_NONCONVERGED
            } else {
                0
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("qtoda: {msg}");
            ExitCode::from(code)
        }
    }
}
