//! Pay-per-use metering on the logical clock.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NodeId;
use crate::domain::{Error, Result};

pub const MIB: u64 = 1 << 20;

/// Bytes held by one Up node during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub tick: u64,
    pub node: NodeId,
    pub bytes: u64,
}

impl UsageEntry {
    /// MiB-ticks charged for this entry, rounded up.
    pub fn mib_ticks(&self) -> u64 {
        self.bytes.div_ceil(MIB)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub from_tick: u64,
    pub to_tick: u64,
    pub per_node_mib_ticks: BTreeMap<NodeId, u64>,
    pub total_mib_ticks: u64,
}

/// Append-only ledger. Entries are never mutated once pushed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageLedger {
    entries: Vec<UsageEntry>,
}

impl UsageLedger {
    pub fn from_entries(entries: Vec<UsageEntry>) -> Self {
        UsageLedger { entries }
    }

    pub fn entries(&self) -> &[UsageEntry] {
        &self.entries
    }

    pub(crate) fn push(&mut self, entry: UsageEntry) {
        debug_assert!(self.entries.last().is_none_or(|last| last.tick <= entry.tick));
        self.entries.push(entry);
    }

    /// Totals over ledger entries with `from_tick <= tick < to_tick`.
    pub fn report(&self, from_tick: u64, to_tick: u64) -> Result<UsageReport> {
        if from_tick > to_tick {
            return Err(Error::validation(format!(
                "inverted tick range [{from_tick}, {to_tick})"
            )));
        }
        // Entries are tick-ordered, so the range is a contiguous slice.
        let start = self.entries.partition_point(|e| e.tick < from_tick);
        let end = self.entries.partition_point(|e| e.tick < to_tick);
        let mut per_node: BTreeMap<NodeId, u64> = BTreeMap::new();
        for entry in &self.entries[start..end] {
            *per_node.entry(entry.node).or_default() += entry.mib_ticks();
        }
        Ok(UsageReport {
            from_tick,
            to_tick,
            total_mib_ticks: per_node.values().sum(),
            per_node_mib_ticks: per_node,
        })
    }
}
