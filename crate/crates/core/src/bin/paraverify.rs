use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paraverify::exprlang::parse;
use paraverify::manifold::{load_spec, load_spec_for, Point, Requirements};
use paraverify::quantity::{evaluate_quantity, Quantity};
use paraverify::report::{exit_code, render_report, run_checks, spec_digest, CheckId, Format, ReportHeader, RunOptions};

#[derive(Parser)]
#[command(name = "paraverify", version, about = "Verify para-Kähler identities and conformal Einstein solitons at sample points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks over the chart's sample plan.
    Check {
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true, env = "PARAVERIFY_TOLERANCE", default_value_t = paraverify::report::DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Override the number of sample points.
        #[arg(long)]
        points: Option<usize>,
        /// Override the sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "text")]
        format: Format,
        /// Comma-separated check names; defaults to the standard selection.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<CheckId>>,
    },
    /// Print one quantity at one point.
    Eval {
        spec: PathBuf,
        /// Comma-separated coordinates; constant expressions are allowed.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long)]
        quantity: Quantity,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// List the builtin metric and structure families.
    Builtins,
}

const BUILTINS: &str = "\
metric families ([metric] kind = ...):
  flat       g(d/dx_i, d/dy_j) = delta_ij on x1..xm, y1..ym, n = 2m >= 4
  potential  g(d/dx_i, d/dy_j) = d^2 phi / dx_i dy_j for `potential = phi`
  explicit   components g[i][j] = <expr>, upper triangle suffices
structure families ([structure] kind = ...):
  standard   F = diag(+1 on the x block, -1 on the y block)
  explicit   components F[i][j] = <expr> for F^i_j
";

fn read(spec: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(spec).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", spec.display());
        ExitCode::from(2)
    })
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn parse_point(text: &str) -> Result<Point, String> {
    text.split(',')
        .map(|c| {
            let expr = parse(c.trim()).map_err(|e| format!("coordinate `{}`: {e}", c.trim()))?;
            expr.evaluate_constant().map_err(|e| format!("coordinate `{}`: {e}", c.trim()))
        })
        .collect::<Result<Vec<f64>, String>>()
        .map(Point::new)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Builtins => {
            emit(BUILTINS);
            ExitCode::SUCCESS
        }
        Command::Check {
            spec,
            tolerance,
            points,
            seed,
            format,
            checks,
        } => {
            let text = match read(&spec) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let loaded = match load_spec(&text) {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("error: {}: {e}", spec.display());
                    return ExitCode::from(2);
                }
            };
            let options = RunOptions {
                tolerance,
                points,
                seed,
                format,
                checks,
            };
            let reports = match run_checks(&loaded.bundle, &loaded.plan, &options) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let header = ReportHeader {
                spec_digest: spec_digest(&text),
                seed: options.plan(&loaded.plan).seed(),
                tolerance,
            };
            emit(&render_report(&reports, format, &header));
            ExitCode::from(exit_code(&reports) as u8)
        }
        Command::Eval {
            spec,
            point,
            quantity,
            format,
        } => {
            let text = match read(&spec) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let loaded = match load_spec_for(&text, &Requirements::NONE) {
                Ok(l) => l,
                Err(e) => {
                    eprintln!("error: {}: {e}", spec.display());
                    return ExitCode::from(2);
                }
            };
            let x = match parse_point(&point) {
                Ok(x) => x,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if x.dim() != loaded.bundle.dim() {
                eprintln!("error: point has {} coordinates, the chart has {}", x.dim(), loaded.bundle.dim());
                return ExitCode::from(2);
            }
            match evaluate_quantity(&loaded.bundle, &x, quantity) {
                Ok(v) => {
                    match format {
                        Format::Text => emit(&v.to_text()),
                        Format::Json => emit(&v.to_json()),
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
