//! CSV emission and parsing for run metrics.
//!
//! Two layouts exist:
//! - `metrics.csv`: `episode,step,policy,mean_delay_ms,mlu,acceptance_rate,reward`
//! - step logs: `step,episode,mean_delay_ms,mlu,acceptance_rate,reward` plus
//!   one `delay_<tunnel>` column per tunnel.
//!
//! Floats print with Rust's shortest round-trip formatting, so files parse
//! back losslessly and identical runs produce byte-identical output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rl::train::StepRecord;
use crate::topology::Topology;
use crate::traffic::TrafficSample;

pub const METRICS_HEADER: &str = "episode,step,policy,mean_delay_ms,mlu,acceptance_rate,reward";

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub step: u64,
    pub policy: String,
    pub mean_delay_ms: f64,
    pub mlu: f64,
    pub acceptance_rate: f64,
    pub reward: f64,
}

/// Buffered writer for `metrics.csv`.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl MetricsWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(path)?;
        Self::new(std::io::BufWriter::new(file))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_step(&mut self, policy: &str, record: &StepRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{}",
            record.episode,
            record.step,
            policy,
            record.mean_delay_ms,
            record.mlu,
            record.acceptance_rate,
            record.reward
        )?;
        Ok(())
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{}",
            row.episode, row.step, row.policy, row.mean_delay_ms, row.mlu, row.acceptance_rate, row.reward
        )?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Per-step environment log with per-tunnel delays.
pub struct StepLogWriter<W: Write> {
    out: W,
}

impl StepLogWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: &Path, topo: &Topology) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = std::fs::File::create(path)?;
        Self::new(std::io::BufWriter::new(file), topo)
    }
}

impl<W: Write> StepLogWriter<W> {
    pub fn new(mut out: W, topo: &Topology) -> Result<Self> {
        let mut header = String::from("step,episode,mean_delay_ms,mlu,acceptance_rate,reward");
        for t in topo.tunnels() {
            header.push_str(&format!(",delay_{}", t.id));
        }
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        let mut line = format!(
            "{},{},{},{},{},{}",
            record.step,
            record.episode,
            record.mean_delay_ms,
            record.mlu,
            record.acceptance_rate,
            record.reward
        );
        for d in &record.tunnel_delays {
            line.push_str(&format!(",{d}"));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Writes a demand trace as CSV: `t` plus one `demand_<tunnel>` column per
/// tunnel.
pub fn write_trace(path: &Path, topo: &Topology, trace: &[TrafficSample]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("t");
    for t in topo.tunnels() {
        header.push_str(&format!(",demand_{}", t.id));
    }
    writeln!(out, "{header}")?;
    for sample in trace {
        let mut line = format!("{}", sample.t);
        for d in &sample.demand {
            line.push_str(&format!(",{d}"));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path, topo: &Topology) -> Result<Vec<TrafficSample>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain(topo.tunnels().iter().map(|t| format!("demand_{}", t.id)))
        .collect();
    let actual: Vec<String> = headers.iter().map(str::to_string).collect();
    if actual != expected {
        return Err(crate::error::Error::Config(format!(
            "trace header {actual:?} does not match topology tunnels {expected:?}"
        )));
    }
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row?;
        let t: u64 = row[0]
            .parse()
            .map_err(|e| crate::error::Error::Config(format!("bad step index: {e}")))?;
        let demand = (1..row.len())
            .map(|i| {
                row[i]
                    .parse()
                    .map_err(|e| crate::error::Error::Config(format!("bad demand: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        samples.push(TrafficSample { t, demand });
    }
    Ok(samples)
}
