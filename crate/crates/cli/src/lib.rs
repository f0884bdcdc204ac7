//! Scenario-driven verification: parse a TOML scenario, run the requested
//! suites and write a JSON report with one CSV table per suite.

pub mod error;
pub mod fixtures;
pub mod report;
pub mod scenario;
pub mod suites;

pub use error::CliError;
pub use report::{Comparison, Report, Row, Scale, SuiteReport};
pub use scenario::{parse_scenario, Scenario, Suite};

use report::{Provenance, SCHEMA_VERSION};
use std::path::Path;
use std::time::Instant;

/// Reads a scenario from a file, or from a built-in fixture as `fixture:NAME`.
pub fn load_scenario(source: &str) -> Result<Scenario, CliError> {
    let text = match source.strip_prefix("fixture:") {
        Some(name) => fixtures::find(name)
            .ok_or_else(|| CliError::UnknownFixture(name.into()))?
            .toml
            .to_string(),
        None => std::fs::read_to_string(Path::new(source)).map_err(|e| CliError::Read {
            path: source.into(),
            source: e,
        })?,
    };
    parse_scenario(&text)
}

/// Runs the scenario's suites in order.
pub fn verify(scenario: &Scenario) -> Report {
    let start = Instant::now();
    let suites: Vec<SuiteReport> = scenario.suites.iter().map(|s| suites::run_suite(scenario, *s)).collect();
    Report {
        schema: SCHEMA_VERSION,
        scenario: scenario.clone(),
        passed: suites.iter().all(|s| s.passed),
        suites,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: scenario.seed,
            resolution: scenario.resolution.clone(),
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    }
}
