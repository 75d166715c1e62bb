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

use std::collections::BTreeMap;
use std::fs;
use std::time::Duration;

use proptest::prelude::*;
use roq_harness::*;
use roq_netsim::SimTime;

/// Smallest sample with at least `pct` percent of samples at or below it.
fn rank_oracle(values: &[u64], pct: f64) -> u64 {
    let mut c = values.to_vec();
    c.sort_unstable();
    c.dedup();
    *c.iter()
        .find(|v| values.iter().filter(|x| x <= v).count() as f64 * 100.0 >= pct * values.len() as f64 - 1e-9)
        .unwrap()
}

fn record(i: u32, inj: u64, back: [Option<u64>; 2]) -> MeasurementRecord {
    MeasurementRecord {
        prefix: format!("10.{}.{}.0/24", i / 256, i % 256).parse().unwrap(),
        t_injected: Some(SimTime::from_micros(inj)),
        t_r2: back[0].map(SimTime::from_micros),
        t_r3: back[1].map(SimTime::from_micros),
    }
}

fn report(records: Vec<MeasurementRecord>) -> BgpReport {
    BgpReport {
        transport: TransportChoice::Quic,
        records,
        partial: false,
        established_at: SimTime::from_millis(50),
        injected_at: SimTime::from_millis(50),
        finished_at: SimTime::from_millis(90),
        lower_bound: Duration::from_millis(20),
        loop_violations: 0,
        sequences: BTreeMap::new(),
        events: Vec::new(),
    }
}

fn csv_rows(path: &std::path::Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn metrics(dir: &std::path::Path) -> BTreeMap<String, String> {
    csv_rows(&dir.join("summary.csv")).into_iter().skip(1).map(|r| (r[0].clone(), r[1].clone())).collect()
}

#[test]
fn ten_thousand_records_end_the_cdf_at_one() {
    let records: Vec<_> = (0..10_000).map(|i| record(i, 1000, [Some(21_000 + i as u64), Some(22_000)])).collect();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report(records), dir.path()).unwrap();
    assert_eq!(files.len(), 4);
    let cdf = csv_rows(&dir.path().join("cdf.csv"));
    assert_eq!(cdf[0], ["latency_us", "cumulative_fraction"]);
    assert_eq!(cdf.len(), 101);
    assert_eq!(cdf.last().unwrap()[1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(cdf.last().unwrap()[0], (21_000 + 9_999 - 1000).to_string());
    let lat: Vec<u64> = cdf[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lat.windows(2).all(|w| w[0] <= w[1]));
    let raw = csv_rows(&dir.path().join("raw.csv"));
    assert_eq!(raw[0], ["prefix", "t_injected_us", "t_r2_us", "t_r3_us", "latency_us"]);
    assert_eq!(raw[1], ["10.0.0.0/24", "1000", "21000", "22000", "21000"]);
    assert_eq!(raw.len(), 10_001);
}

#[test]
fn equal_records_collapse_the_percentiles() {
    let records: Vec<_> = (0..50).map(|i| record(i, 0, [Some(7), Some(5)])).collect();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report(records), dir.path()).unwrap();
    let m = metrics(dir.path());
    for k in ["p10_us", "p50_us", "p90_us", "p99_us", "max_us"] {
        assert_eq!(m[k], "7", "{k}");
    }
    assert_eq!(m["mean_us"], "7.0");
}

#[test]
fn missing_times_leave_fields_empty() {
    let records = vec![record(0, 10, [Some(30), None]), record(1, 10, [Some(30), Some(40)])];
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report(records), dir.path()).unwrap();
    let raw = csv_rows(&dir.path().join("raw.csv"));
    assert_eq!(raw[1], ["10.0.0.0/24", "10", "30", "", ""]);
    let m = metrics(dir.path());
    assert_eq!((m["complete"].as_str(), m["missing"].as_str()), ("1", "1"));
}

#[test]
fn empty_report_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&report(vec![]), dir.path()).is_err());
}

#[test]
fn unwritable_destination_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let err = emit_report(&report(vec![record(0, 0, [Some(1), Some(1)])]), &blocker).unwrap_err();
    assert!(matches!(err, HarnessError::Io(_)), "{err:?}");
}

#[test]
fn compare_pairs_metrics_and_ratios() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&report((0..10).map(|i| record(i, 0, [Some(100), Some(50)])).collect()), a.path()).unwrap();
    emit_report(&report((0..10).map(|i| record(i, 0, [Some(150), Some(50)])).collect()), b.path()).unwrap();
    let rows = compare(a.path(), b.path()).unwrap();
    let p50 = rows.iter().find(|r| r.metric == "p50_us").unwrap();
    assert_eq!((p50.a.as_str(), p50.b.as_str(), p50.ratio), ("100", "150", Some(1.5)));
    assert!(rows.iter().find(|r| r.metric == "transport").unwrap().ratio.is_none());
}

proptest! {
    #[test]
    fn percentiles_match_nearest_rank(values in proptest::collection::vec(0u64..1000, 1..200)) {
        let s = summarize(&values).unwrap();
        prop_assert_eq!(s.count, values.len());
        prop_assert_eq!(s.p10, rank_oracle(&values, 10.0));
        prop_assert_eq!(s.p50, rank_oracle(&values, 50.0));
        prop_assert_eq!(s.p90, rank_oracle(&values, 90.0));
        prop_assert_eq!(s.p99, rank_oracle(&values, 99.0));
        prop_assert_eq!(s.max, *values.iter().max().unwrap());
        let mean = values.iter().sum::<u64>() as f64 / values.len() as f64;
        prop_assert!((s.mean - mean).abs() < 1e-6);
        let c = cdf(&values);
        prop_assert_eq!(c.len(), 100);
        for (i, (v, q)) in c.iter().enumerate() {
            prop_assert!((q - (i + 1) as f64 / 100.0).abs() < 1e-12);
            prop_assert_eq!(*v, rank_oracle(&values, (i + 1) as f64));
        }
    }
}
