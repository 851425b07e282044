//! CSV and JSON writers.
//!
//! CSV rows end in CRLF and floats use the shortest representation that
//! round-trips (`{:?}`), so re-reading reproduces every bit. JSON key order
//! follows struct field order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mudp_core::flows::MonitorRecord;
use mudp_core::grid::nodes;
use mudp_core::{FlowState, PeriodicFunction, Trajectory};
use serde::Serialize;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Trajectory layout on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One row per `(t, x)` pair.
    Long,
    /// One row per snapshot, one column per node.
    Wide,
}

/// Named per-node fields of one snapshot.
type Fields<'a> = Vec<(&'static str, &'a PeriodicFunction)>;

fn write_fields<'a, I>(path: &Path, layout: Layout, n: usize, names: &[&str], rows: I) -> anyhow::Result<()>
where
    I: Iterator<Item = (f64, Fields<'a>)>,
{
    let mut w = csv_writer(path)?;
    let x = nodes(n);
    match layout {
        Layout::Long => {
            let mut header = vec!["t".to_string(), "x".to_string()];
            header.extend(names.iter().map(|s| s.to_string()));
            w.write_record(&header)?;
            for (t, fields) in rows {
                let tt = fmt_f64(t);
                for (j, xj) in x.iter().enumerate() {
                    let mut rec = vec![tt.clone(), fmt_f64(*xj)];
                    rec.extend(fields.iter().map(|(_, f)| fmt_f64(f.values()[j])));
                    w.write_record(&rec)?;
                }
            }
        }
        Layout::Wide => {
            let mut header = vec!["t".to_string()];
            for name in names {
                header.extend((0..n).map(|j| format!("{name}_{j}")));
            }
            w.write_record(&header)?;
            for (t, fields) in rows {
                let mut rec = vec![fmt_f64(t)];
                for (_, f) in &fields {
                    rec.extend(f.values().iter().map(|v| fmt_f64(*v)));
                }
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_eulerian(path: &Path, traj: &Trajectory<PeriodicFunction>, layout: Layout) -> anyhow::Result<()> {
    let n = traj.last().state.n();
    let rows = traj.snapshots.iter().map(|s| (s.t, vec![("u", &s.state)]));
    write_fields(path, layout, n, &["u"], rows)
}

/// Columns: lift displacement `phi - x` and Lagrangian velocity `xi`.
pub fn write_lagrangian(path: &Path, traj: &Trajectory<FlowState>, layout: Layout) -> anyhow::Result<()> {
    let n = traj.last().state.xi.n();
    let rows = traj
        .snapshots
        .iter()
        .map(|s| (s.t, vec![("phi_disp", s.state.phi.displacement()), ("xi", &s.state.xi)]));
    write_fields(path, layout, n, &["phi_disp", "xi"], rows)
}

pub fn write_monitors(path: &Path, monitors: &[MonitorRecord]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "mean_drift", "momentum_drift", "min_slope", "sup_ux"])?;
    for m in monitors {
        w.write_record([
            fmt_f64(m.t),
            fmt_f64(m.mean_drift),
            fmt_opt(m.momentum_drift),
            fmt_opt(m.min_slope),
            fmt_f64(m.sup_ux),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns with a `#` header line.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut text = format!("# {}\n", header.join(" "));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Collects the names of files written by a command, relative to its output directory.
#[derive(Debug, Default)]
pub struct FileLog {
    dir: PathBuf,
    pub names: Vec<String>,
}

impl FileLog {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), names: Vec::new() }
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }
}
