//! Output files: JSON-lines reports, CSV data and a plain-text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use levy_core::stats::{TestBundle, TestReport};
use serde::Serialize;

use crate::experiments::Outcome;
use crate::manifest::ExperimentManifest;
use crate::LabError;

/// One line of `reports.jsonl`.
#[derive(Serialize)]
struct ReportLine<'a> {
    bundle: &'a str,
    bundle_pass: bool,
    #[serde(flatten)]
    report: &'a TestReport,
}

pub fn report_lines(bundles: &[TestBundle]) -> String {
    let mut out = String::new();
    for b in bundles {
        for r in &b.reports {
            let line = ReportLine {
                bundle: &b.name,
                bundle_pass: b.pass,
                report: r,
            };
            out += &serde_json::to_string(&line).expect("reports serialize");
            out.push('\n');
        }
    }
    out
}

/// A float with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a header row; every value printed by [`fmt_f64`].
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        s += &cells.join(",");
        s.push('\n');
    }
    s
}

pub fn summary(manifest: &ExperimentManifest, outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {} seed {}", manifest.experiment, manifest.seed);
    let _ = writeln!(s, "{:<36} {:<44} {:>12} {:>12} {:>12}  verdict", "bundle", "test", "statistic", "p", "threshold");
    for b in &outcome.bundles {
        for r in &b.reports {
            let p = r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.3e}"));
            let _ = writeln!(
                s,
                "{:<36} {:<44} {:>12.4e} {:>12} {:>12.3e}  {}",
                b.name,
                r.name,
                r.statistic,
                p,
                r.threshold,
                if r.pass { "pass" } else { "FAIL" }
            );
        }
        for w in &b.warnings {
            let _ = writeln!(s, "warning [{}]: {w}", b.name);
        }
    }
    let _ = writeln!(s, "overall: {}", if outcome.pass() { "pass" } else { "FAIL" });
    s
}

/// Writes `manifest.toml`, `reports.jsonl`, `summary.txt` and the data files.
pub fn write_outputs(dir: &Path, manifest: &ExperimentManifest, outcome: &Outcome) -> Result<(), LabError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.toml"), manifest.to_toml())?;
    fs::write(dir.join("reports.jsonl"), report_lines(&outcome.bundles))?;
    fs::write(dir.join("summary.txt"), summary(manifest, outcome))?;
    for (name, body) in &outcome.data {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}
