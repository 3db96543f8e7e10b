//! Result files: the per-run indicator row, the event trace, and the
//! cross-scenario comparison summary.

use std::fs;
use std::path::Path;

use resilsim_core::indicators::IndicatorReport;
use resilsim_core::sim::Trace;

use crate::CliError;

pub const RESULTS_HEADER: &str = "scenario,seed,notifications,serviced,service_ratio,mean_latency,p95_latency,unserviced,max_escalation_depth,bop_index,mismatched_count,defections,persona_loss_class,tag_entropy,dominant_tag_share";

/// Renders a real with six fractional digits, rounding ties to even and
/// normalizing negative zero, so equal values always print identically.
pub fn fmt6(x: f64) -> String {
    let rounded = (x * 1e6).round_ties_even() / 1e6;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.6}")
}

pub fn results_row(report: &IndicatorReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        report.scenario,
        report.seed,
        report.response.notifications,
        report.response.in_time,
        fmt6(report.response.service_ratio),
        fmt6(report.response.mean_latency),
        report.response.p95_latency,
        report.response.unserviced,
        report.max_escalation_depth,
        fmt6(report.bop.bop_index),
        report.bop.mismatched_count,
        report.defections,
        report.persona_loss,
        fmt6(report.diversity.tag_entropy),
        fmt6(report.diversity.dominant_tag_share),
    )
}

pub fn write_results(path: &Path, reports: &[IndicatorReport]) -> Result<(), CliError> {
    let mut text = String::from(RESULTS_HEADER);
    text.push('\n');
    for report in reports {
        text.push_str(&results_row(report));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let mut text = String::new();
    for record in &trace.records {
        text.push_str(&record.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Ranks scenarios by mean service ratio (ties: lower mean latency, then
/// name). Seeds and any horizon mismatch are called out up front so the
/// ranking is read with the right caveats.
pub fn comparison_text(reports: &[IndicatorReport], seeds: &[u64], horizons: &[(String, u64)]) -> String {
    let mut text = String::new();
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    text.push_str(&format!("seeds: {}\n", seed_list.join(",")));
    if horizons.windows(2).any(|pair| pair[0].1 != pair[1].1) {
        let spans: Vec<String> =
            horizons.iter().map(|(name, h)| format!("{name}={h}")).collect();
        text.push_str(&format!("warning: horizons differ ({})\n", spans.join(", ")));
    }

    let mut by_scenario: Vec<(String, f64, f64)> = Vec::new();
    for (name, _) in horizons {
        let runs: Vec<&IndicatorReport> =
            reports.iter().filter(|r| &r.scenario == name).collect();
        if runs.is_empty() {
            continue;
        }
        let n = runs.len() as f64;
        let mean_ratio = runs.iter().map(|r| r.response.service_ratio).sum::<f64>() / n;
        let mean_latency = runs.iter().map(|r| r.response.mean_latency).sum::<f64>() / n;
        by_scenario.push((name.clone(), mean_ratio, mean_latency));
    }
    by_scenario.sort_by(|a, b| {
        b.1.total_cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0))
    });

    text.push_str("rank,scenario,mean_service_ratio,mean_mean_latency\n");
    for (rank, (name, ratio, latency)) in by_scenario.iter().enumerate() {
        text.push_str(&format!("{},{},{},{}\n", rank + 1, name, fmt6(*ratio), fmt6(*latency)));
    }
    text
}
