//! `srgeom`: analyses of sub-Riemannian manifolds described in TOML files.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod input;
mod render;

use commands::{CommandError, Run};
use input::ManifoldFile;
use render::Format;

#[derive(Parser)]
#[command(name = "srgeom", version, about = "Symbols, Morimoto connections and flatness of sub-Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Manifold description (TOML).
    #[arg(long, short)]
    input: String,
    /// Overrides the seed of the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of sample points of the file.
    #[arg(long)]
    samples: Option<usize>,
    /// Tolerance for flatness verdicts.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Base point as `name=value,...`; unnamed coordinates take the chart-box centre.
    #[arg(long)]
    base_point: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Growth vector, equiregularity and symbol.
    Analyze(Common),
    /// Morimoto grading and connection, with torsion and curvature tables.
    Connection(Common),
    /// Flatness verdict: exit code 0 if flat, 1 if not.
    Flat(Common),
    /// Normal geodesic from the base point, as CSV.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// Initial covector in coordinate components, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        covector: String,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Write the trajectory here instead of standard output.
        #[arg(long)]
        output: Option<String>,
    },
}

fn run(c: &Common) -> Result<Run, CommandError> {
    Run::new(ManifoldFile::load(&c.input)?, c.seed, c.samples, c.tolerance)
}

fn emit<T: serde::Serialize>(report: &T, format: Format) -> Result<(), CommandError> {
    let s = render::render(report, format).map_err(|e| CommandError::Unsupported(e.to_string()))?;
    print!("{s}");
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, CommandError> {
    match cli.command {
        Command::Analyze(c) => {
            emit(&commands::analyze(&run(&c)?)?, c.format)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Connection(c) => {
            let r = run(&c)?;
            let p = r.file.base_point(c.base_point.as_deref())?;
            emit(&commands::connection(&r, &p)?, c.format)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Flat(c) => {
            let report = commands::flat(&run(&c)?)?;
            emit(&report, c.format)?;
            Ok(if report.flat { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Geodesic { common, covector, t_max, step, output } => {
            let r = run(&common)?;
            let x0 = r.file.base_point(common.base_point.as_deref())?;
            let p0 = input::parse_numbers(&covector, "covector")?;
            let rows = commands::geodesic(&r, &x0, &p0, t_max, step)?;
            let csv = commands::geodesic_csv(r.manifold.coords(), &rows);
            match output {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|source| CommandError::Input(input::InputError::Io { path, source }))?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
