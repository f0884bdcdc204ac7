//! Outcome bookkeeping for the acceptance suite in `tests/acceptance.rs`.

use std::fmt;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Runs `check`, turning an error or panic into a failing outcome.
pub fn run<F>(id: u32, title: &'static str, check: F) -> Outcome
where
    F: FnOnce() -> Result<(bool, String), String> + std::panic::UnwindSafe,
{
    let start = Instant::now();
    let (passed, detail) = match std::panic::catch_unwind(check) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panic: {msg}"))
        }
    };
    let out = Outcome {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
    };
    println!("{out}");
    out
}

/// Summary line and exit status: success iff every criterion passed.
pub fn finish(outcomes: &[Outcome]) -> ExitCode {
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (criteria {failed:?})")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
