//! Per-cycle execution records.

use crate::status::NodeStatus;
use crate::sync::resource::ResourceSet;
use crate::tree::NodeId;

/// State of the tree at the end of one root cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: u64,
    pub time: f64,
    /// Status returned by each node this cycle; `None` if it was not ticked.
    pub status: Vec<Option<NodeStatus>>,
    /// Progress of every node after the cycle.
    pub progress: Vec<f64>,
    /// Holder of every declared resource after the cycle.
    pub holders: Vec<Option<NodeId>>,
    /// Resource decorators that ticked their child this cycle, with the
    /// resources they held while doing so.
    pub grants: Vec<(NodeId, ResourceSet)>,
}

/// Full execution history of one run. Record 0 is the initial state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickTrace {
    pub dt: f64,
    pub labels: Vec<String>,
    pub records: Vec<CycleRecord>,
}

impl TickTrace {
    pub fn last(&self) -> Option<&CycleRecord> {
        self.records.last()
    }

    /// Number of cycles executed (the initial record does not count).
    pub fn cycles(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cycle)
    }

    pub fn progress_of(&self, node: NodeId) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(move |r| r.progress[node.0])
    }

    pub fn status_of(&self, node: NodeId) -> impl Iterator<Item = Option<NodeStatus>> + '_ {
        self.records.iter().map(move |r| r.status[node.0])
    }

    /// First cycle at which every listed node has progress 1.
    pub fn completion_cycle(&self, nodes: &[NodeId]) -> Option<u64> {
        self.records
            .iter()
            .find(|r| nodes.iter().all(|n| r.progress[n.0] >= 1.0))
            .map(|r| r.cycle)
    }
}
