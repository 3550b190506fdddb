//! Synchronization measures and boxplot statistics.

use thiserror::Error;

use crate::trace::TickTrace;
use crate::tree::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("progress level {0} is outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("trace has no records")]
    EmptyTrace,
    #[error("no samples to summarize")]
    NoSamples,
}

/// Sum of pairwise absolute progress differences, each pair counted once.
pub fn progress_distance(progresses: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &a) in progresses.iter().enumerate() {
        for &b in &progresses[i + 1..] {
            total += (a - b).abs();
        }
    }
    total
}

/// Mean progress distance of `members` over cycles `1..=T`, where `T` is the
/// first cycle at which every member reached 1 (or the last recorded cycle).
/// A trace with no dynamic cycles falls back to its recorded states.
pub fn mean_progress_distance(trace: &TickTrace, members: &[NodeId]) -> f64 {
    let end = trace
        .completion_cycle(members)
        .unwrap_or_else(|| trace.cycles());
    let distances: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.cycle >= 1 && r.cycle <= end)
        .map(|r| progress_distance(&members.iter().map(|m| r.progress[m.0]).collect::<Vec<_>>()))
        .collect();
    let distances = if distances.is_empty() {
        trace
            .records
            .iter()
            .map(|r| {
                progress_distance(&members.iter().map(|m| r.progress[m.0]).collect::<Vec<_>>())
            })
            .collect()
    } else {
        distances
    };
    if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    }
}

/// Gap between the time `node` is closest to `level` (earliest on ties) and
/// the expected time `expected` supplied by the reference.
pub fn predictability_distance(
    trace: &TickTrace,
    node: NodeId,
    level: f64,
    expected: f64,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&level) {
        return Err(MetricsError::LevelOutOfRange(level));
    }
    let mut best: Option<(f64, f64)> = None;
    for r in &trace.records {
        let gap = (r.progress[node.0] - level).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, r.time));
        }
    }
    let (_, actual) = best.ok_or(MetricsError::EmptyTrace)?;
    Ok((actual - expected).abs())
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(progress_distance(&[0.5, 0.5]), 0.0);
        assert!((progress_distance(&[0.2, 0.5, 0.9]) - 1.4).abs() < 1e-12);
        assert_eq!(progress_distance(&[0.0, 1.0]), 1.0);
        assert_eq!(progress_distance(&[0.3]), 0.0);
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[5.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (5.0, 5.0, 5.0, 5.0, 5.0)
        );
        assert_eq!(summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap().median, 2.5);
        let s = summarize(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (1.0, 2.0, 3.0));
        assert_eq!(summarize(&[]), Err(MetricsError::NoSamples));
    }

    #[test]
    fn quartiles_interpolate() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
    }
}
