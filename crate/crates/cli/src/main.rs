use clap::{Parser, Subcommand};
use conflab_cli::{fixtures, load_scenario, verify, CliError, Suite};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conflab", version)]
#[command(about = "Verify conformal-geometry scenarios and write JSON/CSV reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or `fixture:NAME`) and write its report.
    Verify {
        scenario: String,
        /// Output directory; overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Radial quadrature nodes; overrides `[resolution] radial_count`.
        #[arg(long)]
        resolution: Option<usize>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run only these suites (repeatable); overrides the scenario list.
        #[arg(long = "suite")]
        suites: Vec<Suite>,
    },
    /// List the built-in scenarios, or print one as TOML.
    ListFixtures {
        #[arg(long)]
        show: Option<String>,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify {
            scenario,
            out,
            resolution,
            seed,
            suites,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(r) = resolution {
                s.resolution.radial_count = r;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if !suites.is_empty() {
                s.suites = suites;
            }
            // overrides go through the same checks as the file
            let s = conflab_cli::parse_scenario(&s.to_toml())?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&s.output.dir));
            let report = verify(&s);
            report.write(&dir)?;
            for suite in &report.suites {
                let failed = suite.rows.iter().filter(|r| !r.pass).count();
                let verdict = if suite.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {:<15} {} rows, {failed} failed", suite.suite.name(), suite.rows.len());
            }
            println!("report written to {}", dir.display());
            Ok(report.passed)
        }
        Command::ListFixtures { show } => {
            match show {
                Some(name) => {
                    let f = fixtures::find(&name).ok_or(CliError::UnknownFixture(name))?;
                    print!("{}", f.toml);
                }
                None => {
                    for f in fixtures::FIXTURES {
                        println!("{:<22} {}", f.name, f.description);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
