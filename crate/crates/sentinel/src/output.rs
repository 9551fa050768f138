//! CSV encoders and atomic file writes.
//!
//! Everything is rendered into memory first; `write_all` then replaces each
//! target through a temporary file in the same directory, so a failed run
//! never leaves a half-written file behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use ltv_sentinel_core::model::SimulationTrace;
use ltv_sentinel_core::pipeline::DetectionReport;
use serde::Serialize;

use crate::error::AppError;

/// A rendered output file waiting to be written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("output records serialize");
        bytes.push(b'\n');
        Self::new(name, bytes)
    }
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn csv_bytes(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `k,x…,u…,y…,w…,v…`. The last row holds the terminal state `x_N` with
/// the remaining cells empty.
pub fn trace_csv(trace: &SimulationTrace) -> Vec<u8> {
    let n = trace.states[0].len();
    let l = trace.inputs.first().map_or(0, |u| u.len());
    let p = trace.outputs.first().map_or(0, |y| y.len());
    let mut header = vec!["k".to_string()];
    header.extend(numbered("x", n));
    header.extend(numbered("u", l));
    header.extend(numbered("y", p));
    header.extend(numbered("w", n));
    header.extend(numbered("v", p));
    let rows = trace.states.iter().enumerate().map(|(k, x)| {
        let mut row = vec![k.to_string()];
        row.extend(x.iter().copied().map(fmt));
        if k < trace.len() {
            for v in [
                &trace.inputs[k],
                &trace.outputs[k],
                &trace.process_noise[k],
                &trace.measurement_noise[k],
            ] {
                row.extend(v.iter().copied().map(fmt));
            }
        } else {
            row.extend(std::iter::repeat_n(String::new(), l + 2 * p + n));
        }
        row
    });
    csv_bytes(header, rows)
}

/// `k,h,theta_hat_…,r_hat,alarm`. Steps without an admissible onset have
/// `h = 0` and empty estimates.
pub fn detection_csv(report: &DetectionReport, m: usize) -> Vec<u8> {
    let mut header = vec!["k".to_string(), "h".to_string()];
    header.extend(numbered("theta_hat_", m));
    header.extend(["r_hat".to_string(), "alarm".to_string()]);
    let alarms: std::collections::BTreeSet<usize> = report.alarm_steps().collect();
    let rows = report.h.iter().enumerate().map(|(k, &h)| {
        let mut row = vec![k.to_string(), fmt(h)];
        match &report.theta_hat[k] {
            Some(t) => row.extend(t.iter().copied().map(fmt)),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        row.push(report.r_hat[k].map_or(String::new(), |r| r.to_string()));
        row.push(u8::from(alarms.contains(&k)).to_string());
        row
    });
    csv_bytes(header, rows)
}

/// `k,eps_…,sigma` for scalar-output plots of the innovation sequence;
/// `sigma` is the trace of `Σ_k`.
pub fn innovation_csv(innovations: &[(Vec<f64>, f64)]) -> Vec<u8> {
    let p = innovations.first().map_or(0, |(e, _)| e.len());
    let mut header = vec!["k".to_string()];
    header.extend(numbered("eps_", p));
    header.push("sigma".into());
    let rows = innovations.iter().enumerate().map(|(k, (eps, sigma))| {
        let mut row = vec![k.to_string()];
        row.extend(eps.iter().copied().map(fmt));
        row.push(fmt(*sigma));
        row
    });
    csv_bytes(header, rows)
}

/// `k,h,h_thresholded,r_hat,alarm`.
pub fn gir_csv(report: &DetectionReport) -> Vec<u8> {
    let header = ["k", "h", "h_thresholded", "r_hat", "alarm"]
        .map(String::from)
        .to_vec();
    let alarms: std::collections::BTreeSet<usize> = report.alarm_steps().collect();
    let rows = report.h.iter().enumerate().map(|(k, &h)| {
        vec![
            k.to_string(),
            fmt(h),
            fmt(report.thresholded[k]),
            report.r_hat[k].map_or(String::new(), |r| r.to_string()),
            u8::from(alarms.contains(&k)).to_string(),
        ]
    });
    csv_bytes(header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub config: String,
    pub seeds: usize,
    pub detect_rate: f64,
    pub false_alarm_rate: f64,
    pub mean_abs_onset_err: f64,
    pub median_h_jump: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    if rows.is_empty() {
        w.write_record([
            "config",
            "seeds",
            "detect_rate",
            "false_alarm_rate",
            "mean_abs_onset_err",
            "median_h_jump",
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

/// Creates `dir` if needed and writes every file into it.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>, AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            write_atomic(&path, &f.bytes)?;
            Ok(path)
        })
        .collect()
}
