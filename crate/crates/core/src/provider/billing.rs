use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datacenter::{NodeId, UsageReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCharge {
    pub mib_ticks: u64,
    pub micro_credits: u64,
}

/// Institution-wide charge for storage held during `[from_tick, to_tick)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BillingStatement {
    pub from_tick: u64,
    pub to_tick: u64,
    pub rate_micro_per_mib_tick: u64,
    pub total_micro_credits: u64,
    pub per_node_breakdown: BTreeMap<NodeId, NodeCharge>,
}

impl BillingStatement {
    pub fn from_usage(report: &UsageReport, rate: u64) -> Self {
        let per_node_breakdown: BTreeMap<NodeId, NodeCharge> = report
            .per_node_mib_ticks
            .iter()
            .map(|(node, mib_ticks)| {
                (
                    *node,
                    NodeCharge {
                        mib_ticks: *mib_ticks,
                        micro_credits: mib_ticks * rate,
                    },
                )
            })
            .collect();
        BillingStatement {
            from_tick: report.from_tick,
            to_tick: report.to_tick,
            rate_micro_per_mib_tick: rate,
            total_micro_credits: per_node_breakdown.values().map(|c| c.micro_credits).sum(),
            per_node_breakdown,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_is_sum_of_nodes_times_rate() {
        let report = UsageReport {
            from_tick: 0,
            to_tick: 10,
            per_node_mib_ticks: BTreeMap::from([(NodeId(1), 40), (NodeId(2), 40)]),
            total_mib_ticks: 80,
        };
        let bill = BillingStatement::from_usage(&report, 1);
        assert_eq!(bill.total_micro_credits, 80);
        let bill = BillingStatement::from_usage(&report, 3);
        assert_eq!(bill.total_micro_credits, 240);
        assert_eq!(bill.per_node_breakdown[&NodeId(2)].micro_credits, 120);
    }
}
