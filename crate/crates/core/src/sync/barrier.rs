//! Barrier computation for progress-synchronized groups.

use std::fmt;

use thiserror::Error;

use crate::status::PROGRESS_EPS;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("barrier {value} is outside (0, 1]")]
    BarrierOutOfRange { value: f64 },
    #[error("barriers must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("relative threshold {delta} is outside [0, 1]")]
    DeltaOutOfRange { delta: f64 },
}

/// How a sync group computes its barrier.
#[derive(Debug, Clone, PartialEq)]
pub enum BarrierPolicy {
    /// Fixed progress levels. The stored list is exactly what was declared;
    /// the implicit leading 0 and the trailing 1.0 sentinel are added when
    /// the barrier is evaluated.
    Absolute(Vec<f64>),
    /// Laggard's progress plus a threshold in `[0, 1]`.
    Relative(f64),
}

impl BarrierPolicy {
    pub fn absolute(levels: Vec<f64>) -> Result<Self, PolicyError> {
        let mut prev: Option<f64> = None;
        for &b in &levels {
            if !(b > 0.0 && b <= 1.0) {
                return Err(PolicyError::BarrierOutOfRange { value: b });
            }
            if let Some(p) = prev {
                if b <= p {
                    return Err(PolicyError::NotIncreasing { prev: p, next: b });
                }
            }
            prev = Some(b);
        }
        Ok(BarrierPolicy::Absolute(levels))
    }

    /// `count` equidistant barriers `i / (count + 1)`; `count = 9` yields
    /// `0.1, 0.2, ..., 0.9` and `count = 0` yields no barriers at all.
    pub fn equidistant(count: usize) -> Self {
        let denom = (count + 1) as f64;
        BarrierPolicy::Absolute((1..=count).map(|i| i as f64 / denom).collect())
    }

    pub fn relative(delta: f64) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(PolicyError::DeltaOutOfRange { delta });
        }
        Ok(BarrierPolicy::Relative(delta))
    }

    /// Whether the policy can never block a member.
    pub fn is_transparent(&self) -> bool {
        match self {
            BarrierPolicy::Absolute(levels) => levels.iter().all(|&b| b >= 1.0),
            BarrierPolicy::Relative(delta) => *delta >= 1.0,
        }
    }

    /// Barrier for the given member progresses. Panics on an empty slice.
    pub fn barrier(&self, progresses: &[f64]) -> f64 {
        match self {
            BarrierPolicy::Absolute(levels) => absolute_barrier(levels, progresses),
            BarrierPolicy::Relative(delta) => relative_barrier(*delta, progresses),
        }
    }
}

impl fmt::Display for BarrierPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarrierPolicy::Absolute(levels) => {
                f.write_str("absolute [")?;
                for (i, b) in levels.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str("]")
            }
            BarrierPolicy::Relative(delta) => write!(f, "relative {delta}"),
        }
    }
}

/// The first barrier level that not every member has reached yet.
///
/// Levels are read as `0 = b0 < b1 < ... < bn` followed by a 1.0 sentinel
/// when the list does not already end at 1. The result is the largest `bi`
/// such that every member is at or past `b(i-1)`, so members ahead of the
/// pack stop at `bi` while the laggards catch up.
pub fn absolute_barrier(levels: &[f64], progresses: &[f64]) -> f64 {
    assert!(!progresses.is_empty(), "barrier of an empty group");
    let slowest = progresses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut previous = 0.0;
    for &level in levels.iter().chain(std::iter::once(&1.0)) {
        if level <= previous {
            // sentinel already present
            continue;
        }
        if slowest < level - PROGRESS_EPS {
            return level;
        }
        previous = level;
    }
    1.0
}

/// `min(progresses) + delta`, unclamped. Panics on an empty slice.
pub fn relative_barrier(delta: f64, progresses: &[f64]) -> f64 {
    assert!(!progresses.is_empty(), "barrier of an empty group");
    progresses.iter().copied().fold(f64::INFINITY, f64::min) + delta
}
