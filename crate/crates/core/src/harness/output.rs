use std::fs;
use std::path::{Path, PathBuf};

use csv::Writer;

use super::engine::{LearnerSlot, TraceRow};
use super::{Method, RunReport, SweepRow};
use crate::buffer::InsertDecision;
use crate::error::{Error, Result};

struct Table {
    path: PathBuf,
    inner: Writer<fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let path = dir.join(name);
        let inner = Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut t = Self { path, inner };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.inner.write_record(&fields).map_err(|e| csv_error(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{}: {other:?}", path.display())),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `summary.csv`, one `risk_trend_<method>.csv` per method and, when
/// the ensemble ran, `weights.csv` and `bound_check.csv`. Returns the paths
/// written.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let mut t = Table::create(dir, "summary.csv", &["method", "accuracy_mean", "accuracy_std", "final_cum_risk"])?;
    for s in &report.methods {
        t.row([
            s.method.to_string(),
            s.accuracy_mean.to_string(),
            s.accuracy_std.to_string(),
            s.final_cum_risk.to_string(),
        ])?;
    }
    written.push(t.finish()?);

    for s in &report.methods {
        let mut t = Table::create(dir, &format!("risk_trend_{}.csv", s.method), &["t", "J_t", "avg_cum_risk"])?;
        for (i, (j, avg)) in s.risk.iter().zip(&s.avg_cum_risk).enumerate() {
            t.row([(i + 1).to_string(), j.to_string(), avg.to_string()])?;
        }
        written.push(t.finish()?);
    }

    if let Some(ens) = &report.ensemble {
        let mut t = Table::create(dir, "weights.csv", &["t", "alpha1", "alpha2"])?;
        for (i, w) in ens.weights.iter().enumerate() {
            t.row([(i + 1).to_string(), w[0].to_string(), w[1].to_string()])?;
        }
        written.push(t.finish()?);

        let mut t = Table::create(
            dir,
            "bound_check.csv",
            &["t", "ens_cum_clipped", "min_base_cum_clipped", "bound"],
        )?;
        for (i, (e, m)) in ens.ens_cum_clipped.iter().zip(&ens.min_base_cum_clipped).enumerate() {
            t.row([
                (i + 1).to_string(),
                e.to_string(),
                m.to_string(),
                (m + ens.slack).to_string(),
            ])?;
        }
        written.push(t.finish()?);
    }
    Ok(written)
}

fn victim(decision: InsertDecision) -> String {
    match decision {
        InsertDecision::Replaced(i) => i.to_string(),
        _ => String::new(),
    }
}

/// Writes `buffer_trace_f1.csv` and `buffer_trace_f2.csv` (columns round,
/// decision, victim) for the ensemble of the first seed.
pub fn write_buffer_trace(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let Some(first) = report.seeds.first() else {
        return Ok(Vec::new());
    };
    let Some(run) = first.run(Method::Sf2el) else {
        return Ok(Vec::new());
    };
    ensure_dir(dir)?;
    let rows = |slot: LearnerSlot| -> Vec<TraceRow> {
        let init = first.init_trace.iter().filter(|r| slot == LearnerSlot::Old && r.slot == slot);
        init.chain(run.trace.iter().filter(|r| r.slot == slot)).copied().collect()
    };
    let mut written = Vec::new();
    for (slot, name) in [(LearnerSlot::Old, "buffer_trace_f1.csv"), (LearnerSlot::New, "buffer_trace_f2.csv")] {
        let mut t = Table::create(dir, name, &["round", "decision", "victim"])?;
        for r in rows(slot) {
            t.row([r.step.to_string(), r.decision.label().to_string(), victim(r.decision)])?;
        }
        written.push(t.finish()?);
    }
    Ok(written)
}

/// Writes `sweep_buffer.csv` with one row per (buffer, method).
pub fn write_sweep(rows: &[SweepRow], dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut t = Table::create(dir, "sweep_buffer.csv", &["buffer", "method", "accuracy_mean", "accuracy_std"])?;
    for row in rows {
        for s in &row.summaries {
            t.row([
                row.buffer.to_string(),
                s.method.to_string(),
                s.accuracy_mean.to_string(),
                s.accuracy_std.to_string(),
            ])?;
        }
    }
    t.finish()
}
