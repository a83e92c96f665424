//! Transfer and launch accounting. Exportable as JSON; the schema is
//! the struct layout below and is documented in the README.

use super::buffer::{Direction, TransferEvent};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelStats {
    pub launches: u64,
    /// Total simulated threads over all launches.
    pub threads: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferLedger {
    pub h2d_count: u64,
    pub d2h_count: u64,
    pub h2d_bytes: u64,
    pub d2h_bytes: u64,
    pub launches: u64,
    pub kernels: BTreeMap<String, KernelStats>,
}

impl TransferLedger {
    pub fn record_transfer(&mut self, ev: &TransferEvent) {
        match ev.direction {
            Direction::H2d => {
                self.h2d_count += 1;
                self.h2d_bytes += ev.bytes;
            }
            Direction::D2h => {
                self.d2h_count += 1;
                self.d2h_bytes += ev.bytes;
            }
        }
    }

    pub fn record_launch(&mut self, kernel: &str, threads: u64) {
        self.launches += 1;
        let k = self.kernels.entry(kernel.to_string()).or_default();
        k.launches += 1;
        k.threads += threads;
    }

    /// Difference against an earlier snapshot of the same ledger.
    pub fn delta_since(&self, earlier: &TransferLedger) -> TransferLedger {
        let mut kernels = BTreeMap::new();
        for (name, now) in &self.kernels {
            let before = earlier.kernels.get(name).cloned().unwrap_or_default();
            if now.launches != before.launches || now.threads != before.threads {
                kernels.insert(
                    name.clone(),
                    KernelStats {
                        launches: now.launches - before.launches,
                        threads: now.threads - before.threads,
                    },
                );
            }
        }
        TransferLedger {
            h2d_count: self.h2d_count - earlier.h2d_count,
            d2h_count: self.d2h_count - earlier.d2h_count,
            h2d_bytes: self.h2d_bytes - earlier.h2d_bytes,
            d2h_bytes: self.d2h_bytes - earlier.d2h_bytes,
            launches: self.launches - earlier.launches,
            kernels,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}
