//! Per-level accounting of launches, simulated threads and transfer
//! bytes, emitted as JSON and as an aligned text table.

use crate::vdevice::TransferLedger;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelLine {
    pub launches: u64,
    pub threads: u64,
    pub h2d_bytes: u64,
    pub d2h_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    /// Interior extent per dimension of this level's grid.
    pub n: usize,
    pub kernels: BTreeMap<String, KernelLine>,
    pub launches: u64,
    pub threads: u64,
    pub h2d_bytes: u64,
    pub d2h_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub cycles: u64,
    pub levels: Vec<LevelReport>,
    pub total: KernelLine,
}

impl Report {
    pub fn new(level_sizes: &[usize]) -> Report {
        Report {
            cycles: 0,
            levels: level_sizes
                .iter()
                .enumerate()
                .map(|(level, &n)| LevelReport {
                    level,
                    n,
                    ..LevelReport::default()
                })
                .collect(),
            total: KernelLine::default(),
        }
    }

    /// Fold one ledger delta into a level, filed under `label` for the
    /// transfer bytes (kernel launches file under their own names).
    pub fn add(&mut self, level: usize, label: &str, delta: &TransferLedger) {
        let lv = &mut self.levels[level];
        for (name, stats) in &delta.kernels {
            let line = lv.kernels.entry(name.clone()).or_default();
            line.launches += stats.launches;
            line.threads += stats.threads;
        }
        let line = lv.kernels.entry(label.to_string()).or_default();
        line.h2d_bytes += delta.h2d_bytes;
        line.d2h_bytes += delta.d2h_bytes;
        lv.launches += delta.launches;
        lv.threads += delta.kernels.values().map(|k| k.threads).sum::<u64>();
        lv.h2d_bytes += delta.h2d_bytes;
        lv.d2h_bytes += delta.d2h_bytes;
        self.total.launches += delta.launches;
        self.total.threads += delta.kernels.values().map(|k| k.threads).sum::<u64>();
        self.total.h2d_bytes += delta.h2d_bytes;
        self.total.d2h_bytes += delta.d2h_bytes;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Deterministic aligned table, one row per level and kernel plus a
    /// Total row.
    pub fn render_text(&self) -> String {
        let mut rows: Vec<[String; 7]> = Vec::new();
        rows.push([
            "level".into(),
            "n".into(),
            "kernel".into(),
            "launches".into(),
            "threads".into(),
            "h2d_bytes".into(),
            "d2h_bytes".into(),
        ]);
        for lv in &self.levels {
            for (name, line) in &lv.kernels {
                rows.push([
                    lv.level.to_string(),
                    lv.n.to_string(),
                    name.clone(),
                    line.launches.to_string(),
                    line.threads.to_string(),
                    line.h2d_bytes.to_string(),
                    line.d2h_bytes.to_string(),
                ]);
            }
            rows.push([
                lv.level.to_string(),
                lv.n.to_string(),
                "(level)".into(),
                lv.launches.to_string(),
                lv.threads.to_string(),
                lv.h2d_bytes.to_string(),
                lv.d2h_bytes.to_string(),
            ]);
        }
        rows.push([
            "Total".into(),
            String::new(),
            String::new(),
            self.total.launches.to_string(),
            self.total.threads.to_string(),
            self.total.h2d_bytes.to_string(),
            self.total.d2h_bytes.to_string(),
        ]);
        let mut widths = [0usize; 7];
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        for row in rows {
            let mut line = String::new();
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    line.push_str("  ");
                }
                // Left-align the first three columns, right-align counts.
                if k < 3 {
                    line.push_str(&format!("{cell:<width$}", width = widths[k]));
                } else {
                    line.push_str(&format!("{cell:>width$}", width = widths[k]));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}
