// Copyright 2026 The roq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! CSV output: raw measurements, percentile summaries, CDF tables, and
//! comparison of two result directories.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use roq_netsim::{write_csv, SimTime};

use crate::bgp::BgpReport;
use crate::ospf::{OspfReport, PacketCounts, Phase};
use crate::HarnessError;

pub const RAW_HEADER: [&str; 5] = ["prefix", "t_injected_us", "t_r2_us", "t_r3_us", "latency_us"];
pub const CDF_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub p10: u64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
    pub mean: f64,
}

/// Nearest-rank percentile of sorted `v`.
pub fn percentile(sorted: &[u64], pct: f64) -> u64 {
    assert!(!sorted.is_empty());
    // The epsilon keeps e.g. 7% of 100 from rounding up to rank 8.
    let rank = (pct * sorted.len() as f64 / 100.0 - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(values: &[u64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(Summary {
        count: v.len(),
        p10: percentile(&v, 10.0),
        p50: percentile(&v, 50.0),
        p90: percentile(&v, 90.0),
        p99: percentile(&v, 99.0),
        max: *v.last().expect("non-empty"),
        mean: v.iter().map(|x| *x as f64).sum::<f64>() / v.len() as f64,
    })
}

/// `CDF_POINTS` rows of (value, cumulative fraction) at evenly spaced
/// quantiles; the last row is the maximum at fraction 1.
pub fn cdf(values: &[u64]) -> Vec<(u64, f64)> {
    let mut v = values.to_vec();
    v.sort_unstable();
    if v.is_empty() {
        return Vec::new();
    }
    (1..=CDF_POINTS)
        .map(|i| {
            let q = i as f64 / CDF_POINTS as f64;
            (percentile(&v, i as f64 * 100.0 / CDF_POINTS as f64), q)
        })
        .collect()
}

fn us(t: Option<SimTime>) -> String {
    t.map(|t| t.as_micros().to_string()).unwrap_or_default()
}

fn dur_us(d: Option<Duration>) -> String {
    d.map(|d| d.as_micros().to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    Ok(csv::Writer::from_path(path)?)
}

fn write_metrics(path: &Path, rows: &[(String, String)]) -> Result<(), HarnessError> {
    let mut w = writer(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

fn write_events(dir: &Path, events: &[roq_netsim::Record]) -> Result<PathBuf, HarnessError> {
    let path = dir.join("events.csv");
    write_csv(io::BufWriter::new(fs::File::create(&path)?), events)?;
    Ok(path)
}

/// Writes `raw.csv`, `summary.csv`, `cdf.csv` and `events.csv` for a
/// propagation run.
pub fn emit_report(report: &BgpReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if report.records.is_empty() {
        return Err(HarnessError::Invalid("no records to report".into()));
    }
    fs::create_dir_all(dir)?;
    let raw = dir.join("raw.csv");
    let mut w = writer(&raw)?;
    w.write_record(RAW_HEADER)?;
    for r in &report.records {
        w.write_record([r.prefix.to_string(), us(r.t_injected), us(r.t_r2), us(r.t_r3), dur_us(r.latency())])?;
    }
    w.flush()?;

    let lat: Vec<u64> = report.latencies().iter().map(|d| d.as_micros() as u64).collect();
    let mut rows = vec![
        ("transport".to_string(), report.transport.to_string()),
        ("routes".into(), report.records.len().to_string()),
        ("complete".into(), lat.len().to_string()),
        ("missing".into(), (report.records.len() - lat.len()).to_string()),
        ("partial".into(), report.partial.to_string()),
        ("lower_bound_us".into(), report.lower_bound.as_micros().to_string()),
        ("loop_violations".into(), report.loop_violations.to_string()),
        ("established_us".into(), report.established_at.as_micros().to_string()),
        ("finished_us".into(), report.finished_at.as_micros().to_string()),
    ];
    if let Some(s) = summarize(&lat) {
        rows.extend([
            ("p10_us".into(), s.p10.to_string()),
            ("p50_us".into(), s.p50.to_string()),
            ("p90_us".into(), s.p90.to_string()),
            ("p99_us".into(), s.p99.to_string()),
            ("max_us".into(), s.max.to_string()),
            ("mean_us".into(), format!("{:.1}", s.mean)),
        ]);
    }
    let summary = dir.join("summary.csv");
    write_metrics(&summary, &rows)?;

    let cdf_path = dir.join("cdf.csv");
    let mut w = writer(&cdf_path)?;
    w.write_record(["latency_us", "cumulative_fraction"])?;
    for (v, q) in cdf(&lat) {
        w.write_record([v.to_string(), format!("{q:.2}")])?;
    }
    w.flush()?;
    let events = write_events(dir, &report.events)?;
    Ok(vec![raw, summary, cdf_path, events])
}

fn phase_rows(name: &str, p: &Phase, rows: &mut Vec<(String, String)>) {
    rows.push((format!("{name}_start_us"), p.started.as_micros().to_string()));
    rows.push((format!("{name}_routes_us"), dur_us(p.routes_time())));
    rows.push((format!("{name}_quiet_us"), dur_us(p.quiet_time())));
}

fn packet_rows(name: &str, c: &PacketCounts, rows: &mut Vec<(String, String)>) {
    for (ty, n) in &c.by_type {
        rows.push((format!("{name}_{ty}_packets"), n.to_string()));
    }
    rows.push((format!("{name}_bytes"), c.bytes.to_string()));
    rows.push((format!("{name}_stream_packets"), c.on_stream.to_string()));
}

/// Writes `convergence.csv`, `summary.csv` and `events.csv` for a
/// convergence run.
pub fn emit_ospf_report(report: &OspfReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let conv = dir.join("convergence.csv");
    let mut w = writer(&conv)?;
    w.write_record(["event", "t_us"])?;
    let markers = [
        ("cold_start_routes", report.cold_start.routes_settled),
        ("cold_start_converged", report.cold_start.converged),
        ("injected", Some(report.reconvergence.started)),
        ("reconvergence_routes", report.reconvergence.routes_settled),
        ("reconvergence_converged", report.reconvergence.converged),
    ];
    for (name, t) in markers {
        w.write_record([name.to_string(), us(t)])?;
    }
    w.flush()?;

    let mut rows =
        vec![("mode".to_string(), report.variant.label().to_string()), ("partial".into(), report.partial.to_string())];
    phase_rows("cold_start", &report.cold_start, &mut rows);
    phase_rows("reconvergence", &report.reconvergence, &mut rows);
    packet_rows("cold_start", &report.packets[0], &mut rows);
    packet_rows("reconvergence", &report.packets[1], &mut rows);
    let summary = dir.join("summary.csv");
    write_metrics(&summary, &rows)?;
    let events = write_events(dir, &report.events)?;
    Ok(vec![conv, summary, events])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: String,
    pub b: String,
    /// b / a, when both are numbers and a is non-zero.
    pub ratio: Option<f64>,
}

fn read_metrics(dir: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv"))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push((rec.get(0).unwrap_or("").to_string(), rec.get(1).unwrap_or("").to_string()));
    }
    Ok(out)
}

/// Pairs the summary metrics of two result directories.
pub fn compare(a: &Path, b: &Path) -> Result<Vec<ComparisonRow>, HarnessError> {
    let ma = read_metrics(a)?;
    let mb: std::collections::HashMap<String, String> = read_metrics(b)?.into_iter().collect();
    Ok(ma
        .into_iter()
        .filter_map(|(metric, va)| {
            let vb = mb.get(&metric)?.clone();
            let ratio = match (va.parse::<f64>(), vb.parse::<f64>()) {
                (Ok(x), Ok(y)) if x != 0.0 => Some(y / x),
                _ => None,
            };
            Some(ComparisonRow { metric, a: va, b: vb, ratio })
        })
        .collect())
}
