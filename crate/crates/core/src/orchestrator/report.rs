//! Campaign result serialization: canonical JSON, per-behavior CSV
//! summary, search traces and plot data.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::campaign::{CampaignResult, Status};
use crate::finder::TraceStep;

pub const CAMPAIGN_JSON: &str = "campaign.json";
pub const CAMPAIGN_CSV: &str = "campaign.csv";
pub const PLOT_CSV: &str = "plot_data.csv";

pub fn to_json(result: &CampaignResult) -> String {
    serde_json::to_string_pretty(result).expect("campaign results serialize")
}

pub fn from_json(text: &str) -> serde_json::Result<CampaignResult> {
    serde_json::from_str(text)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

/// One row per behavior: behavior, forwarder, pdr_low_pps, pdr_high_pps,
/// midpoint_kpps, cv_percent, ci95_percent, flags. Failed behaviors have
/// empty numeric cells and an `error` flag.
pub fn to_csv(result: &CampaignResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "behavior",
        "forwarder",
        "pdr_low_pps",
        "pdr_high_pps",
        "midpoint_kpps",
        "cv_percent",
        "ci95_percent",
        "flags",
    ])
    .expect("in-memory write");
    for r in &result.results {
        let mut flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
        if r.status == Status::Error {
            flags.push("error");
        }
        w.write_record([
            r.behavior.name().to_string(),
            r.forwarder.to_string(),
            opt(r.interval.map(|i| i.low)),
            opt(r.interval.map(|i| i.high)),
            opt(r.stats.map(|s| s.mean / 1000.0)),
            opt(r.stats.map(|s| s.cv_percent)),
            opt(r.stats.map(|s| s.ci95_percent)),
            flags.join(";"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

/// Every evaluated point of every search: offered rate, delivery ratio and
/// throughput, enough to draw throughput and DR against offered load.
pub fn plot_csv(result: &CampaignResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "behavior",
        "run",
        "step",
        "tx_rate_pps",
        "delivery_ratio",
        "throughput_pps",
    ])
    .expect("in-memory write");
    for r in &result.results {
        for (run, o) in r.runs.iter().enumerate() {
            for (i, s) in o.trace.steps.iter().enumerate() {
                w.write_record([
                    r.behavior.name().to_string(),
                    (run + 1).to_string(),
                    (i + 1).to_string(),
                    format!("{:.3}", s.tx_rate),
                    format!("{:.6}", s.delivery_ratio),
                    format!("{:.3}", s.rx_rate),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[derive(Serialize)]
struct TraceLine<'a> {
    run: usize,
    #[serde(flatten)]
    step: &'a TraceStep,
}

/// Search trace lines (JSON, one per evaluation) for the behavior at
/// `index`, tagged with the 1-based run number.
pub fn trace_lines(result: &CampaignResult, index: usize) -> String {
    let mut out = String::new();
    for (run, o) in result.results[index].runs.iter().enumerate() {
        for step in &o.trace.steps {
            out.push_str(&serde_json::to_string(&TraceLine { run: run + 1, step }).expect("trace serializes"));
            out.push('\n');
        }
    }
    out
}

/// Writes the JSON and CSV results, plot data and one trace file per
/// behavior into `dir`. Returns the paths written.
pub fn write_outputs(result: &CampaignResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    put(CAMPAIGN_JSON, to_json(result))?;
    put(CAMPAIGN_CSV, to_csv(result))?;
    put(PLOT_CSV, plot_csv(result))?;
    for (i, r) in result.results.iter().enumerate() {
        put(&r.trace_file, trace_lines(result, i))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::BehaviorId;
    use crate::orchestrator::{run_campaign, ExperimentConfig, TestbedConfig};
    use crate::sim::ForwarderModel;

    fn campaign() -> CampaignResult {
        let exp = ExperimentConfig {
            runs: 2,
            ..ExperimentConfig::new(vec![BehaviorId::End, BehaviorId::EndAD])
        };
        run_campaign(
            &exp,
            &TestbedConfig::sim(ForwarderModel::sharp([(BehaviorId::End, 4e6)])),
        )
    }

    #[test]
    fn json_round_trips() {
        let r = campaign();
        let text = to_json(&r);
        assert_eq!(from_json(&text).unwrap(), r);
    }

    #[test]
    fn csv_has_one_row_per_behavior() {
        let text = to_csv(&campaign());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "behavior,forwarder,pdr_low_pps,pdr_high_pps,midpoint_kpps,cv_percent,ci95_percent,flags"
        );
        assert!(lines[1].starts_with("End,sim,"));
        assert!(lines[1].ends_with(",0.000,0.000,"), "{}", lines[1]);
        assert_eq!(lines[2], "End.AD,sim,,,,,,error");
    }

    #[test]
    fn plot_and_trace_rows_match_trace_steps() {
        let r = campaign();
        let steps: usize = r.results[0].runs.iter().map(|o| o.trace.steps.len()).sum();
        assert_eq!(plot_csv(&r).lines().count(), steps + 1);
        let lines = trace_lines(&r, 0);
        assert_eq!(lines.lines().count(), steps);
        let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first["run"], 1);
        assert!(first["tx_rate"].as_f64().unwrap() > 0.0);
    }
}
