use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bapfactor::operator::matrix_from_rows;
use bapfactor::pipeline::{certify, factorize, opnorm};
use bapfactor::report::{to_json, Report};
use bapfactor::scenario::{gen_scenario, Scenario};
use bapfactor::space::NormTag;
use bapfactor::splitting::curve_csv;
use bapfactor::{Error, Result};

/// Certified factorization of finite-rank operators through a space with a
/// monotone basis.
#[derive(Parser)]
#[command(name = "bapfactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a scenario into rank-one atoms and certify the factorization.
    Factorize {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the global partial-sum norm curve here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Certify the approximation property from the partial sums and from
    /// the factorization, and cross-check the two.
    Certify {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exact induced norm of a matrix given as a JSON array of rows.
    Opnorm {
        matrix: PathBuf,
        #[arg(long)]
        from: NormTag,
        #[arg(long)]
        to: NormTag,
    },
    /// Write a seeded random scenario.
    Gen {
        #[arg(long)]
        seed: u64,
        /// Domain and codomain dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Domain and codomain norms.
        #[arg(long, value_delimiter = ',', required = true)]
        tags: Vec<NormTag>,
        #[arg(long)]
        blocks: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        ranks: Vec<usize>,
        #[arg(long)]
        decay: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn write_report(report: &Report, output: &Path, csv: Option<&Path>) -> Result<()> {
    std::fs::write(output, report.to_json()?)?;
    if let Some(path) = csv {
        std::fs::write(path, curve_csv(&report.curve))?;
    }
    Ok(())
}

fn describe_failure(report: &Report) -> String {
    let Some(stage) = report.first_failure() else {
        return String::new();
    };
    if let Some(e) = &stage.error {
        return format!("stage {} failed: {e}", stage.name);
    }
    let first = ["violations", "failures"]
        .iter()
        .filter_map(|k| stage.detail.get(k)?.as_array()?.first())
        .next();
    match first {
        Some(v) => format!("stage {} failed at {v}", stage.name),
        None => format!("stage {} failed", stage.name),
    }
}

fn finish(report: Report, output: &Path, csv: Option<&Path>) -> Result<ExitCode> {
    write_report(&report, output, csv)?;
    if report.pass {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("certification failed: {}", describe_failure(&report));
        Ok(ExitCode::from(1))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Factorize { scenario, output, csv } => {
            let inst = Scenario::load(&scenario)?.instance()?;
            finish(factorize(&inst)?, &output, csv.as_deref())
        }
        Command::Certify {
            scenario,
            eps,
            output,
            csv,
        } => {
            if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
                return Err(Error::InvalidArgument("tolerances must be finite and nonnegative".into()));
            }
            let inst = Scenario::load(&scenario)?.instance()?;
            finish(certify(&inst, &eps)?, &output, csv.as_deref())
        }
        Command::Opnorm { matrix, from, to } => {
            let text = std::fs::read_to_string(&matrix)?;
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("matrix: {e}")))?;
            let outcome = opnorm(&matrix_from_rows(&rows)?, from, to)?;
            print!("{}", to_json(&outcome)?);
            if outcome.agree {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("grid cross-check disagrees with the exact norm");
                Ok(ExitCode::from(1))
            }
        }
        Command::Gen {
            seed,
            dims,
            tags,
            blocks,
            ranks,
            decay,
            output,
        } => {
            if dims.len() != 2 || tags.len() != 2 {
                return Err(Error::InvalidArgument("--dims and --tags take exactly two values".into()));
            }
            let s = gen_scenario(seed, [dims[0], dims[1]], [tags[0], tags[1]], blocks, &ranks, decay)?;
            s.save(&output)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_certification_failure() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
