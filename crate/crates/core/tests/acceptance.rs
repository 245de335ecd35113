//! Acceptance criteria 1–9 at full replicate counts.
//!
//! Prints one PASS/FAIL line per criterion followed by its checks. Set
//! `RANDWAVES_ACCEPTANCE=quick` for the reduced run with widened tolerances.

use randwaves::verify::{Mode, Settings, Suite, KNOWN_UNATTAINABLE};
use std::io::Write;

#[test]
fn acceptance_criteria() {
    let mode = match std::env::var("RANDWAVES_ACCEPTANCE").as_deref() {
        Ok("quick") => Mode::Quick,
        _ => Mode::Full,
    };
    let suite = Suite::new(Settings::new(mode));
    let results = suite.run_all().expect("suite runs");
    assert_eq!(results.len(), 9);

    // Written to the raw handle so the report shows without `--nocapture`.
    let mut out = std::io::stdout().lock();
    let mut unexpected = Vec::new();
    for r in &results {
        writeln!(out, "{}", r.line()).unwrap();
        for c in &r.checks {
            writeln!(out, "    {c}").unwrap();
        }
        unexpected.extend(r.unexpected_failures().into_iter().map(|c| format!("criterion {}: {c}", r.id)));
    }
    for name in KNOWN_UNATTAINABLE {
        writeln!(out, "known unattainable at desk scale: {name}").unwrap();
    }
    assert!(unexpected.is_empty(), "unexpected failures:\n{}", unexpected.join("\n"));
}
