//! CSV and JSON writers. Column sets are fixed; empty cells mean
//! "undefined" (for example the response time of a point without load).
//!
//! * curve: `lambda, mean_rt, ci, bucket_lt2, bucket_2to4, bucket_gt4,
//!   util_<server>..., thr_<server>...` in farm order
//! * requests: one row per delivered request, see [`RequestRow`]
//! * queues: `time` then one queue-length column per server

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::planner::SweepCurve;
use crate::sim::{QueueSeries, RequestRow};

pub type ExportResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn curve_header(servers: &[String]) -> Vec<String> {
    let mut h: Vec<String> = [
        "lambda",
        "mean_rt",
        "ci",
        "bucket_lt2",
        "bucket_2to4",
        "bucket_gt4",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(servers.iter().map(|s| format!("util_{s}")));
    h.extend(servers.iter().map(|s| format!("thr_{s}")));
    h
}

pub fn write_curve_csv<W: Write>(w: W, curve: &SweepCurve, servers: &[String]) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(curve_header(servers))?;
    for p in &curve.points {
        let mut row = vec![
            p.lambda.to_string(),
            cell(p.mean_rt),
            cell(p.ci),
            p.bucket_lt2.to_string(),
            p.bucket_2to4.to_string(),
            p.bucket_gt4.to_string(),
        ];
        let find = |name: &str| p.servers.iter().find(|s| s.name == name);
        row.extend(servers.iter().map(|s| cell(find(s).map(|x| x.utilization))));
        row.extend(servers.iter().map(|s| cell(find(s).map(|x| x.throughput))));
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_requests_csv<W: Write>(w: W, rows: &[RequestRow]) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record([
            "id",
            "session",
            "class",
            "request_type",
            "issued_at",
            "response_time",
            "wan_out",
            "wan_in",
            "queue_wait",
            "service",
        ])?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_queue_csv<W: Write>(w: W, series: &[QueueSeries]) -> ExportResult {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["time".to_string()];
    header.extend(series.iter().map(|s| s.server.clone()));
    out.write_record(&header)?;
    let n = series.iter().map(|s| s.samples.len()).min().unwrap_or(0);
    for i in 0..n {
        let mut row = vec![series[0].samples[i].0.to_string()];
        row.extend(series.iter().map(|s| s.samples[i].1.to_string()));
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> ExportResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
