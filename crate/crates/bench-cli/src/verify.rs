//! Golden-fixture verification.
//!
//! A fixture is a `<name>.toml` config next to a `<name>.csv` golden table.
//! The config is rerun and every golden row must be reproduced: the fresh
//! value has to lie in the golden row's closed band, and so does the golden
//! value itself.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::scenarios::run_scenario;
use crate::table::ResultTable;
use crate::BenchError;

#[derive(Clone, Debug, PartialEq)]
pub enum FixtureOutcome {
    Pass,
    /// One message per mismatching row.
    Fail(Vec<String>),
    /// The golden table or the config could not be read or run.
    Error(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub fixtures: Vec<(String, FixtureOutcome)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.fixtures.is_empty() && self.fixtures.iter().all(|(_, o)| *o == FixtureOutcome::Pass)
    }

    pub fn failures(&self) -> usize {
        self.fixtures.iter().filter(|(_, o)| *o != FixtureOutcome::Pass).count()
    }
}

/// Compares a fresh table with its golden counterpart.
pub fn compare_tables(golden: &ResultTable, fresh: &ResultTable) -> Vec<String> {
    let mut problems = Vec::new();
    let fresh_rows: BTreeMap<_, _> = fresh.rows.iter().map(|r| (r.key(), r)).collect();
    for g in &golden.rows {
        let label = format!("[{}] {}", g.sweep, g.quantity);
        if !g.within_band() {
            problems.push(format!("{label}: golden value {} outside its band [{}, {}]", g.value, g.tol_lo, g.tol_hi));
        }
        match fresh_rows.get(&g.key()) {
            None => problems.push(format!("{label}: missing from the rerun")),
            Some(f) if !(g.tol_lo <= f.value && f.value <= g.tol_hi) => {
                problems.push(format!("{label}: rerun value {} outside [{}, {}]", f.value, g.tol_lo, g.tol_hi))
            }
            Some(_) => {}
        }
    }
    if golden.config_hash != fresh.config_hash {
        problems.push(format!("config hash changed: golden {} vs rerun {}", golden.config_hash, fresh.config_hash));
    }
    problems
}

fn verify_one(config_path: &Path) -> FixtureOutcome {
    let golden_path = config_path.with_extension("csv");
    let golden = match std::fs::read_to_string(&golden_path) {
        Ok(text) => match ResultTable::read_csv(&text) {
            Ok(t) => t,
            Err(e) => return FixtureOutcome::Error(format!("{}: {e}", golden_path.display())),
        },
        Err(e) => return FixtureOutcome::Error(format!("missing golden table {}: {e}", golden_path.display())),
    };
    let fresh = match ScenarioConfig::load(config_path).and_then(|c| run_scenario(&c)) {
        Ok(t) => t,
        Err(e) => return FixtureOutcome::Error(e.to_string()),
    };
    let problems = compare_tables(&golden, &fresh);
    if problems.is_empty() {
        FixtureOutcome::Pass
    } else {
        FixtureOutcome::Fail(problems)
    }
}

/// Config files of a fixture directory in name order.
pub fn fixture_configs(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Reruns every fixture in `dir`. Golden tables without a config are
/// reported as errors too.
pub fn verify_fixtures(dir: &Path) -> Result<VerifyReport, BenchError> {
    let configs = fixture_configs(dir)?;
    let mut report = VerifyReport::default();
    for path in &configs {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        report.fixtures.push((name, verify_one(path)));
    }
    let mut orphans: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && !p.with_extension("toml").exists())
        .collect();
    orphans.sort();
    for p in orphans {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        report.fixtures.push((name, FixtureOutcome::Error(format!("no config for golden table {}", p.display()))));
    }
    Ok(report)
}
