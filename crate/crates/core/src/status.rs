use std::fmt;

use serde::Serialize;

/// Result of ticking a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeStatus {
    Success,
    Running,
    Failure,
}

impl NodeStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, NodeStatus::Running)
    }

    /// One-letter code used in traces and scripted actions.
    pub fn code(self) -> char {
        match self {
            NodeStatus::Success => 'S',
            NodeStatus::Running => 'R',
            NodeStatus::Failure => 'F',
        }
    }

    pub fn from_code(s: &str) -> Option<NodeStatus> {
        match s {
            "S" | "success" => Some(NodeStatus::Success),
            "R" | "running" => Some(NodeStatus::Running),
            "F" | "failure" => Some(NodeStatus::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeStatus::Success => "success",
            NodeStatus::Running => "running",
            NodeStatus::Failure => "failure",
        };
        f.write_str(s)
    }
}

/// Rounding tolerance for progress comparisons. Accumulating 0.1 ten times in
/// binary floating point lands just below 1, and two actions that reach 0.12
/// by different step sizes disagree in the last bit.
pub const PROGRESS_EPS: f64 = 1e-9;

/// Clamps a raw progress value into `[0, 1]`, snapping near-complete values to 1.
pub fn clamp_progress(p: f64) -> f64 {
    if p >= 1.0 - PROGRESS_EPS {
        1.0
    } else if p <= 0.0 {
        0.0
    } else {
        p
    }
}
