//! Run artifacts: `report.json` with the resolved config, an aligned text
//! summary and one CSV per table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::suites::{CheckResult, Status, SuiteReport, Table};

/// Tables longer than this go to CSV only.
const INLINE_ROWS: usize = 40;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub status: Status,
    pub checks: Vec<CheckResult>,
    /// CSV files written next to the report
    pub csv: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub subcommand: String,
    pub status: Status,
    pub config: ExperimentConfig,
    pub suites: Vec<SuiteSummary>,
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Error => 3,
    }
}

fn worst(statuses: impl Iterator<Item = Status>) -> Status {
    statuses.fold(Status::Pass, |acc, s| match (acc, s) {
        (Status::Error, _) | (_, Status::Error) => Status::Error,
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        _ => Status::Pass,
    })
}

fn csv_name(suite: &str, table: &Table) -> String {
    format!("{}_{}.csv", suite.replace('-', "_"), table.name)
}

/// Writes `report.json`, `tables.txt` and the CSVs of one suite run into `dir`.
pub fn write_suite(dir: &Path, cfg: &ExperimentConfig, rep: &SuiteReport) -> Result<RunReport> {
    std::fs::create_dir_all(dir)?;
    let mut csv = vec![];
    for t in &rep.tables {
        let name = csv_name(&rep.suite, t);
        std::fs::write(dir.join(&name), t.to_csv())?;
        csv.push(name);
    }
    let run = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: rep.suite.clone(),
        status: rep.status(),
        config: cfg.clone(),
        suites: vec![SuiteSummary {
            suite: rep.suite.clone(),
            status: rep.status(),
            checks: rep.checks.clone(),
            csv,
        }],
    };
    write_json(&dir.join("report.json"), &run)?;
    std::fs::write(dir.join("tables.txt"), render(&run, &rep.tables))?;
    Ok(run)
}

fn write_json(path: &Path, run: &RunReport) -> Result<()> {
    let text = serde_json::to_string_pretty(run).map_err(|e| Error::domain("report", e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Suite reports found in the immediate subdirectories of `out`.
pub fn collect(out: &Path) -> Result<Vec<(PathBuf, RunReport)>> {
    let mut found = vec![];
    if !out.is_dir() {
        return Err(Error::Config {
            field: "--out".to_string(),
            line: None,
            detail: format!("{} is not a directory", out.display()),
        });
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for d in dirs {
        let p = d.join("report.json");
        if let Ok(text) = std::fs::read_to_string(&p) {
            let run: RunReport = serde_json::from_str(&text)
                .map_err(|e| Error::domain("report", format!("{}: {e}", p.display())))?;
            found.push((p, run));
        }
    }
    Ok(found)
}

/// Merges the suite reports under `out` into `out/report.json` and
/// `out/tables.txt`.
pub fn aggregate(out: &Path, cfg: &ExperimentConfig) -> Result<RunReport> {
    let found = collect(out)?;
    if found.is_empty() {
        return Err(Error::Config {
            field: "--out".to_string(),
            line: None,
            detail: format!("no suite reports under {}", out.display()),
        });
    }
    let suites: Vec<SuiteSummary> = found.into_iter().flat_map(|(_, r)| r.suites).collect();
    let run = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: "report".to_string(),
        status: worst(suites.iter().map(|s| s.status)),
        config: cfg.clone(),
        suites,
    };
    write_json(&out.join("report.json"), &run)?;
    std::fs::write(out.join("tables.txt"), render(&run, &[]))?;
    Ok(run)
}

fn status_label(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Error => "ERROR",
    }
}

/// Aligned text: one line per check, then the short tables.
pub fn render(run: &RunReport, tables: &[Table]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "wavekernel {} {}  n={}  h={:?}  status={}",
        run.version,
        run.subcommand,
        run.config.n,
        run.config.h,
        status_label(run.status)
    );
    let rows: Vec<(String, &CheckResult)> = run
        .suites
        .iter()
        .flat_map(|su| su.checks.iter().map(move |c| (su.suite.clone(), c)))
        .collect();
    let w_suite = rows.iter().map(|(s, _)| s.len()).max().unwrap_or(5).max(5);
    let w_name = rows.iter().map(|(_, c)| c.name.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<w_suite$}  {:<w_name$}  {:<6}  {:>9}  summary", "suite", "check", "status", "seconds");
    for (suite, c) in &rows {
        let _ = writeln!(
            s,
            "{:<w_suite$}  {:<w_name$}  {:<6}  {:>9.2}  {}",
            suite,
            c.name,
            status_label(c.status),
            c.seconds,
            c.summary
        );
    }
    for t in tables.iter().filter(|t| t.rows.len() <= INLINE_ROWS) {
        let _ = writeln!(s, "\n[{}]", t.name);
        let w = 14;
        let head: Vec<String> = t.columns.iter().map(|c| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", head.join(" "));
        for r in &t.rows {
            let cells: Vec<String> = r.iter().map(|x| format!("{x:>w$.6e}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{run_suite, Suite};

    #[test]
    fn resolvent_run_round_trips_with_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.checks = vec!["newton_constant".into(), "t_solve".into()];
        let rep = run_suite(Suite::Resolvent, &cfg);
        assert_eq!(rep.checks.len(), 2);
        let run = write_suite(&dir.path().join("resolvent"), &cfg, &rep).unwrap();
        assert_eq!(run.status, Status::Pass);
        let back = collect(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].1.config, cfg);
        let agg = aggregate(dir.path(), &cfg).unwrap();
        assert_eq!(agg.suites[0].checks.len(), 2);
        let text = std::fs::read_to_string(dir.path().join("tables.txt")).unwrap();
        assert!(text.contains("newton_constant") && text.contains("PASS"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(Status::Pass), 0);
        assert_eq!(exit_code(Status::Fail), 1);
        assert_eq!(exit_code(Status::Error), 3);
        assert_eq!(worst([Status::Pass, Status::Fail].into_iter()), Status::Fail);
        assert_eq!(worst([Status::Error, Status::Fail].into_iter()), Status::Error);
    }

    #[test]
    fn empty_out_dir_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(aggregate(dir.path(), &ExperimentConfig::default()).unwrap_err().is_config());
    }
}
