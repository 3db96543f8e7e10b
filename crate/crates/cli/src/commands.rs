//! The work behind each subcommand, kept apart from argument parsing so
//! tests can call it directly. Every command returns the text it would
//! print on success.

use std::fs;
use std::path::Path;

use resilsim_core::indicators::{report, IndicatorReport};
use resilsim_core::matching::{count_teams, enumerate_teams, RolePool};
use resilsim_core::sim::run;

use crate::loader::load_scenario;
use crate::output::{comparison_text, write_results, write_trace};
use crate::CliError;

fn load_file(path: &Path) -> Result<resilsim_core::scenario::Scenario, CliError> {
    let text = fs::read_to_string(path)?;
    let scenario = load_scenario(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Runs one scenario under one seed and writes `results.csv` and
/// `trace.log` into `out_dir`.
pub fn cmd_simulate(path: &Path, seed: u64, out_dir: &Path) -> Result<String, CliError> {
    let scenario = load_file(path)?;
    let output = run(&scenario, seed)?;
    let indicators = report(&output, &scenario.persistence)?;
    fs::create_dir_all(out_dir)?;
    write_results(&out_dir.join("results.csv"), std::slice::from_ref(&indicators))?;
    write_trace(&out_dir.join("trace.log"), &output.trace)?;
    Ok(crate::output::results_row(&indicators))
}

/// Runs every scenario under every seed and writes the combined
/// `results.csv` plus a ranked `comparison.txt` into `out_dir`.
pub fn cmd_compare(paths: &[&Path], seeds: &[u64], out_dir: &Path) -> Result<String, CliError> {
    let mut reports: Vec<IndicatorReport> = Vec::new();
    let mut horizons: Vec<(String, u64)> = Vec::new();
    for path in paths {
        let scenario = load_file(path)?;
        horizons.push((scenario.name.clone(), scenario.horizon));
        for &seed in seeds {
            let output = run(&scenario, seed)?;
            reports.push(report(&output, &scenario.persistence)?);
        }
    }
    fs::create_dir_all(out_dir)?;
    write_results(&out_dir.join("results.csv"), &reports)?;
    let text = comparison_text(&reports, seeds, &horizons);
    fs::write(out_dir.join("comparison.txt"), &text)?;
    Ok(text)
}

fn parse_pools(spec: &str) -> Result<Vec<(u32, u32, u32)>, CliError> {
    let bad = |i: usize, msg: &str| CliError::Schema {
        path: format!("pools[{i}]"),
        message: msg.to_string(),
    };
    spec.split(',')
        .enumerate()
        .map(|(i, part)| {
            let (size, bounds) = part
                .split_once(':')
                .ok_or_else(|| bad(i, "expected `size:min-max`"))?;
            let (min, max) = bounds
                .split_once('-')
                .ok_or_else(|| bad(i, "expected `size:min-max`"))?;
            let parse =
                |s: &str| s.trim().parse::<u32>().map_err(|_| bad(i, "counts must be integers"));
            Ok((parse(size)?, parse(min)?, parse(max)?))
        })
        .collect()
}

/// Counts (and with `verbose` lists) the teams a registry of role pools
/// can field. Pools are given as `size:min-max` terms joined by commas.
pub fn cmd_enumerate_teams(pools: &str, cap: u128, verbose: bool) -> Result<String, CliError> {
    let shape = parse_pools(pools)?;
    let count = count_teams(&shape)?;
    let mut text = format!("teams: {count}\n");
    if verbose {
        let pools: Vec<RolePool> = shape
            .iter()
            .enumerate()
            .map(|(i, &(size, min, max))| {
                let members = (0..size).map(|j| format!("r{i}m{j}"));
                RolePool::new(members, min, max)
            })
            .collect();
        for team in enumerate_teams(&pools, cap)? {
            let slots: Vec<String> = team
                .enrolled
                .iter()
                .map(|slot| {
                    let names: Vec<&str> = slot.iter().map(|id| id.as_str()).collect();
                    format!("{{{}}}", names.join(","))
                })
                .collect();
            text.push_str(&slots.join(" | "));
            text.push('\n');
        }
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    const SMOKE: &str = r#"
schema_version = 1
name = "smoke"
horizon = 60

[organization]
kind = "mac"
members = ["x", "n1", "n2"]

[[agents]]
id = "x"
persona = "human_being"
roles = ["patient"]

[[agents]]
id = "n1"
persona = "human_being"
roles = ["informal caregiver"]

[[agents]]
id = "n2"
persona = "human_being"
roles = ["informal caregiver"]

[[protocols]]
id = "fall"
trigger = "member_fallen"
duration = 5
deadline = 30
son_lifespan = 50
requirements = [{ role = "informal caregiver", min = 1, max = 1 }]

[[workload]]
kind = "member_fallen"
severity = "alarm"
interarrival = { fixed = 20 }
sources = { ids = ["x"] }
"#;

    fn write_fixture(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("resilsim-cmd-{tag}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn simulate_writes_both_files() {
        let dir = temp_dir("simulate");
        let path = write_fixture(&dir, "smoke.toml", SMOKE);
        let out = dir.join("out");
        let row = cmd_simulate(&path, 0, &out).unwrap();
        assert!(row.starts_with("smoke,0,"));
        let results = fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 2);
        assert!(results.starts_with("scenario,seed,"));
        let trace = fs::read_to_string(out.join("trace.log")).unwrap();
        assert!(trace.contains("notify"));
        assert!(trace.contains("complete"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn simulate_is_reproducible_byte_for_byte() {
        let dir = temp_dir("repro");
        let path = write_fixture(&dir, "smoke.toml", SMOKE);
        let out_a = dir.join("a");
        let out_b = dir.join("b");
        cmd_simulate(&path, 7, &out_a).unwrap();
        cmd_simulate(&path, 7, &out_b).unwrap();
        assert_eq!(
            fs::read(out_a.join("results.csv")).unwrap(),
            fs::read(out_b.join("results.csv")).unwrap()
        );
        assert_eq!(
            fs::read(out_a.join("trace.log")).unwrap(),
            fs::read(out_b.join("trace.log")).unwrap()
        );
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn compare_ranks_and_writes_everything() {
        let dir = temp_dir("compare");
        let a = write_fixture(&dir, "a.toml", &SMOKE.replace("\"smoke\"", "\"alpha\""));
        let b = write_fixture(&dir, "b.toml", &SMOKE.replace("\"smoke\"", "\"beta\""));
        let out = dir.join("out");
        let text = cmd_compare(&[&a, &b], &[0, 1], &out).unwrap();
        assert!(text.starts_with("seeds: 0,1\n"));
        assert!(text.contains("rank,scenario,"));
        let results = fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 5);
        assert!(out.join("comparison.txt").exists());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_scenario_file_is_an_io_error() {
        let err = cmd_simulate(Path::new("/nonexistent/fixture.toml"), 0, Path::new("/tmp")).unwrap_err();
        assert!(matches!(err, CliError::Io(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn team_counts_match_the_reference_lattice() {
        let text = cmd_enumerate_teams("1:0-1,4:0-4,1:0-1", u128::MAX, false).unwrap();
        assert_eq!(text, "teams: 64\n");
        let text = cmd_enumerate_teams("1:1-1,4:1-4,1:1-1", u128::MAX, false).unwrap();
        assert_eq!(text, "teams: 15\n");
    }

    #[test]
    fn verbose_listing_shows_every_team() {
        let text = cmd_enumerate_teams("2:1-2", u128::MAX, true).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "teams: 3");
        assert_eq!(lines[1..], ["{r0m0}", "{r0m0,r0m1}", "{r0m1}"]);
    }

    #[test]
    fn malformed_pool_specs_name_the_term() {
        match cmd_enumerate_teams("1:0-1,oops", u128::MAX, false).unwrap_err() {
            CliError::Schema { path, .. } => assert_eq!(path, "pools[1]"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
