use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edge_msfem::harness::{self, StudyConfig};
use edge_msfem::Error;

#[derive(Parser)]
#[command(version, about = "Edge multiscale finite element studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fine-scale reference problem
    FineSolve(Common),
    /// Run a convergence study and write study.csv / study.json
    Study(Common),
    /// Dump the coefficient field as a raster
    FieldPreview(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// output directory (default: `out` from the config, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// relative residual of the fine solve
    #[arg(long)]
    tol: Option<f64>,
}

fn load(common: &Common) -> Result<(StudyConfig, PathBuf), Error> {
    let mut config = StudyConfig::from_path(&common.config)?;
    if let Some(w) = common.workers {
        config.workers = Some(w);
    }
    if let Some(t) = common.tol {
        config.tol = t;
    }
    config.validate()?;
    let out = common.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| "out".into());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::FineSolve(c) => {
            let (config, out) = load(&c)?;
            let s = harness::fine_solve_to(&config, &out)?;
            println!("fine {}: {} nodes, energy {:e}, {:.2}s", s.fine, s.nodes, s.energy, s.seconds);
            Ok(true)
        }
        Command::Study(c) => {
            let (config, out) = load(&c)?;
            let report = harness::run_study_to(&config, &out)?;
            for row in &report.rows {
                if let Some(e) = &row.error {
                    eprintln!("{} H={}: {e}", row.method, row.coarse_h);
                }
            }
            println!("{} rows written to {}", report.rows.len(), out.display());
            Ok(report.failed_rows() == 0)
        }
        Command::FieldPreview(c) => {
            let (config, out) = load(&c)?;
            let stats = harness::field_preview_to(&config, &out)?;
            println!("field.txt written (min {:e}, max {:e})", stats["min"], stats["max"]);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad flags count as a config error, not clap's default 2
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if harness::is_config_error(&e) { 1 } else { 2 })
        }
    }
}
