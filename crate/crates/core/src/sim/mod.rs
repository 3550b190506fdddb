//! Seeded Monte-Carlo runs.

mod experiment;
mod output;

pub use experiment::{
    dining_source, pair_source, predictability_source, run_dining, run_experiment, scaling_source,
    CellParams, CellResult, DiningMode, DiningOutcome, ExperimentKind, ExperimentResult,
    ExperimentSpec, Grid, RunResult, Sync,
};
pub use output::{
    write_allocations_csv, write_dining_csv, write_runs_csv, write_summary_csv, write_trace_csv,
};

use std::sync::Arc;

use thiserror::Error;

use crate::engine::Engine;
use crate::trace::TickTrace;
use crate::tree::Tree;

#[derive(Debug, Error)]
pub enum RunError {
    /// The cycle cap was reached before every monitored action completed.
    /// Carries the partial trace.
    #[error("run aborted after {cap} cycles without completing")]
    Aborted { cap: u64, trace: Box<TickTrace> },
}

/// Mixes `parts` into one 64-bit seed (splitmix64 finalizer per part).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// `10 * ceil(1 / a)` for the slowest monitored action, where `a` is its
/// nominal per-tick step. Trees without stepped actions get 1000.
pub fn default_cycle_cap(tree: &Tree) -> u64 {
    let slowest = tree
        .actions()
        .iter()
        .filter_map(|&id| match &tree.node(id).kind {
            crate::tree::NodeKind::Action(a) => a.model.nominal_step(),
            _ => None,
        })
        .filter(|&s| s > 0.0)
        .reduce(f64::min);
    match slowest {
        Some(step) => 10 * (1.0 / step).ceil() as u64,
        None => 1000,
    }
}

/// Ticks `engine` until every monitored action reaches progress 1.
pub fn run_engine(mut engine: Engine, cap: u64) -> Result<TickTrace, RunError> {
    while !engine.is_complete() {
        if engine.cycle() >= cap {
            return Err(RunError::Aborted {
                cap,
                trace: Box::new(engine.into_trace()),
            });
        }
        engine.step();
    }
    Ok(engine.into_trace())
}

/// One seeded run of `tree`, capped at `cap` cycles (default
/// [`default_cycle_cap`]).
pub fn run_once(tree: &Arc<Tree>, seed: u64, cap: Option<u64>) -> Result<TickTrace, RunError> {
    let cap = cap.unwrap_or_else(|| default_cycle_cap(tree));
    run_engine(Engine::new(Arc::clone(tree), seed), cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;

    fn tree(src: &str) -> Arc<Tree> {
        Arc::new(dsl::compile(src).unwrap().tree)
    }

    #[test]
    fn seeds_differ_per_part() {
        assert_ne!(derive_seed(&[1, 0]), derive_seed(&[0, 1]));
        assert_eq!(derive_seed(&[7, 3]), derive_seed(&[7, 3]));
    }

    #[test]
    fn deterministic_pair_ends_at_slowest_action() {
        let t = tree("action a linear step=0.03 action b linear step=0.02 (par 2 (act a) (act b))");
        assert_eq!(run_once(&t, 0, None).unwrap().cycles(), 50);
    }

    #[test]
    fn single_action_step_count() {
        let t = tree("action a linear step=0.015 (act a)");
        assert_eq!(run_once(&t, 0, None).unwrap().cycles(), 67);
    }

    #[test]
    fn completed_actions_need_no_cycles() {
        let t = tree("action a linear step=0.1 start=1 (act a)");
        let trace = run_once(&t, 0, None).unwrap();
        assert_eq!(trace.cycles(), 0);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn cap_aborts_with_partial_trace() {
        let t = tree("condition no const false action a linear step=0.1 (seq (cond no) (act a))");
        match run_once(&t, 0, None) {
            Err(RunError::Aborted { cap, trace }) => {
                assert_eq!(cap, 100);
                assert_eq!(trace.cycles(), 100);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }
}
