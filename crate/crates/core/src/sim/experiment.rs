//! The numerical studies: barrier sweeps, child scaling, predictability and
//! the dining robots.

use std::fmt::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::behavior::ProfileSchedule;
use crate::dsl;
use crate::engine::Engine;
use crate::metrics::{mean_progress_distance, predictability_distance, summarize, SummaryStats};
use crate::sync::barrier::BarrierPolicy;
use crate::sync::resource::AllocationEvent;
use crate::trace::TickTrace;
use crate::tree::{NodeId, Tree};

use super::{default_cycle_cap, derive_seed, run_once, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Two actions under equidistant absolute barriers, |B| swept.
    Absolute,
    /// Two actions under a relative barrier, Δ swept.
    Relative,
    /// N identical actions under nine absolute barriers.
    ScalingAbsolute,
    /// N identical actions under a relative barrier Δ = 0.1.
    ScalingRelative,
    /// A constrained action synchronized with a reference profile.
    Predictability,
    DiningGreedy,
    DiningFair,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Absolute,
        ExperimentKind::Relative,
        ExperimentKind::ScalingAbsolute,
        ExperimentKind::ScalingRelative,
        ExperimentKind::Predictability,
        ExperimentKind::DiningGreedy,
        ExperimentKind::DiningFair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Absolute => "absolute",
            ExperimentKind::Relative => "relative",
            ExperimentKind::ScalingAbsolute => "scaling-absolute",
            ExperimentKind::ScalingRelative => "scaling-relative",
            ExperimentKind::Predictability => "predictability",
            ExperimentKind::DiningGreedy => "dining-greedy",
            ExperimentKind::DiningFair => "dining-fair",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_dining(self) -> bool {
        matches!(
            self,
            ExperimentKind::DiningGreedy | ExperimentKind::DiningFair
        )
    }
}

/// Parameter axes. Each experiment reads the axes it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub barriers: Vec<usize>,
    pub deltas: Vec<f64>,
    pub noises: Vec<f64>,
    pub children: Vec<usize>,
    pub levels: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            barriers: vec![0, 1, 3, 9],
            deltas: vec![1.0, 0.5, 0.2, 0.1],
            noises: vec![0.005, 0.01, 0.015],
            children: vec![2, 4, 8, 16],
            levels: vec![0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub grid: Grid,
    pub runs: usize,
    pub seed: u64,
    /// Nominal steps of the two actions in the pair sweeps.
    pub pair_steps: (f64, f64),
    /// Step of every action in the scaling study.
    pub scaling_step: f64,
    pub scaling_noise: f64,
    /// Reference profile step and constrained-action step.
    pub profile_step: f64,
    pub constrained_step: f64,
    /// Overrides [`default_cycle_cap`].
    pub cycle_cap: Option<u64>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            grid: Grid::default(),
            runs: 10_000,
            seed: 0,
            pair_steps: (0.03, 0.02),
            scaling_step: 0.03,
            scaling_noise: 0.015,
            profile_step: 0.1,
            constrained_step: 0.2,
            cycle_cap: None,
        }
    }
}

/// Synchronization applied in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sync {
    Absolute(usize),
    Relative(f64),
}

impl Sync {
    fn policy(self) -> BarrierPolicy {
        match self {
            Sync::Absolute(n) => BarrierPolicy::equidistant(n),
            Sync::Relative(d) => BarrierPolicy::relative(d).expect("delta within [0, 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub index: usize,
    pub barriers: Option<usize>,
    pub delta: Option<f64>,
    pub noise: Option<f64>,
    pub children: Option<usize>,
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    /// Mean progress distance, or the predictability distance.
    pub value: f64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub params: CellParams,
    pub runs: Vec<RunResult>,
    pub summary: SummaryStats,
    pub mean_cycles: f64,
}

impl CellResult {
    pub fn values(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: &'static str,
    pub cells: Vec<CellResult>,
}

/// Two stochastic linear actions, each wrapped in a progress decorator of
/// group `g` unless `sync` is `None`.
pub fn pair_source(steps: (f64, f64), noise: f64, sync: Option<Sync>) -> String {
    let mut s = String::new();
    if let Some(sync) = sync {
        writeln!(s, "group g {}", sync.policy()).unwrap();
    }
    writeln!(s, "action a1 linear step={} noise={noise}", steps.0).unwrap();
    writeln!(s, "action a2 linear step={} noise={noise}", steps.1).unwrap();
    s.push_str(&parallel_of(&["a1", "a2"], sync.is_some()));
    s
}

/// `children` identical stochastic linear actions under one group.
pub fn scaling_source(children: usize, step: f64, noise: f64, sync: Option<Sync>) -> String {
    let mut s = String::new();
    if let Some(sync) = sync {
        writeln!(s, "group g {}", sync.policy()).unwrap();
    }
    let names: Vec<String> = (1..=children).map(|i| format!("a{i}")).collect();
    for n in &names {
        writeln!(s, "action {n} linear step={step} noise={noise}").unwrap();
    }
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    s.push_str(&parallel_of(&names, sync.is_some()));
    s
}

/// A deterministic reference profile `ref` and a constrained action `arm`
/// under a relative barrier.
pub fn predictability_source(
    profile_step: f64,
    step: f64,
    noise: f64,
    delta: Option<f64>,
) -> String {
    let mut s = String::new();
    if let Some(d) = delta {
        writeln!(s, "group g {}", Sync::Relative(d).policy()).unwrap();
    }
    writeln!(s, "action ref profile step={profile_step}").unwrap();
    writeln!(s, "action arm linear step={step} noise={noise}").unwrap();
    s.push_str(&parallel_of(&["ref", "arm"], delta.is_some()));
    s
}

fn parallel_of(names: &[&str], synced: bool) -> String {
    let mut s = format!("(par {}", names.len());
    for n in names {
        if synced {
            write!(s, "\n  (psync g (act {n}))").unwrap();
        } else {
            write!(s, "\n  (act {n})").unwrap();
        }
    }
    s.push_str(")\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiningMode {
    /// Priority increment 0: holders keep their cables until charged.
    Greedy,
    /// Priority increment 1: waiting robots age and take turns.
    Fair,
}

/// Three robots charging through shared cables: robot 1 needs {A, B},
/// robot 2 {B, C}, robot 3 {C, A}.
pub fn dining_source(mode: DiningMode) -> String {
    let g = match mode {
        DiningMode::Greedy => "zero",
        DiningMode::Fair => "const 1",
    };
    format!(
        "resources {{A, B, C}}\n\
         action robot1 battery step=0.1 resources={{A, B}}\n\
         action robot2 battery step=0.1 resources={{B, C}}\n\
         action robot3 battery step=0.1 resources={{C, A}}\n\
         \n\
         (par 3\n  (rsync {g} (act robot1))\n  (rsync {g} (act robot2))\n  (rsync {g} (act robot3)))\n"
    )
}

#[derive(Debug)]
pub struct DiningOutcome {
    pub tree: Arc<Tree>,
    pub trace: TickTrace,
    pub log: Vec<AllocationEvent>,
    /// Action leaves of the three robots.
    pub robots: Vec<NodeId>,
}

pub fn run_dining(mode: DiningMode, cap: Option<u64>) -> Result<DiningOutcome, RunError> {
    let tree = compile(&dining_source(mode));
    let cap = cap.unwrap_or_else(|| default_cycle_cap(&tree));
    let mut engine = Engine::new(Arc::clone(&tree), 0);
    while !engine.is_complete() {
        if engine.cycle() >= cap {
            return Err(RunError::Aborted {
                cap,
                trace: Box::new(engine.into_trace()),
            });
        }
        engine.step();
    }
    let log = engine.allocation_log().to_vec();
    let robots = tree.actions().to_vec();
    Ok(DiningOutcome {
        trace: engine.into_trace(),
        log,
        robots,
        tree,
    })
}

fn compile(src: &str) -> Arc<Tree> {
    Arc::new(
        dsl::compile(src)
            .unwrap_or_else(|d| panic!("generated tree does not compile: {d:?}\n{src}"))
            .tree,
    )
}

/// Seeds of one cell. Cells that differ only in their synchronization
/// parameters share `stream`, so they see the same noise realizations.
fn seeds(master: u64, stream: usize, runs: usize) -> Vec<u64> {
    (0..runs)
        .map(|r| derive_seed(&[master, stream as u64, r as u64]))
        .collect()
}

fn cell_result(params: CellParams, runs: Vec<RunResult>) -> CellResult {
    let values: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let summary = summarize(&values).unwrap_or(SummaryStats {
        n: 0,
        min: f64::NAN,
        q1: f64::NAN,
        median: f64::NAN,
        q3: f64::NAN,
        max: f64::NAN,
    });
    let mean_cycles = if runs.is_empty() {
        f64::NAN
    } else {
        runs.iter().map(|r| r.cycles as f64).sum::<f64>() / runs.len() as f64
    };
    CellResult {
        params,
        runs,
        summary,
        mean_cycles,
    }
}

fn distance_cell(
    spec: &ExperimentSpec,
    src: &str,
    params: CellParams,
    stream: usize,
) -> Result<CellResult, RunError> {
    let tree = compile(src);
    let runs = seeds(spec.seed, stream, spec.runs)
        .into_par_iter()
        .enumerate()
        .map(|(run, seed)| {
            let trace = run_once(&tree, seed, spec.cycle_cap)?;
            Ok(RunResult {
                run,
                seed,
                value: mean_progress_distance(&trace, tree.actions()),
                cycles: trace.cycles(),
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(cell_result(params, runs))
}

/// Runs every cell of a Monte-Carlo experiment. Dining experiments are
/// deterministic and handled by [`run_dining`]; here they yield one cell
/// whose value is the completion cycle.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, RunError> {
    let g = &spec.grid;
    let mut cells = Vec::new();
    let mut index = 0;
    let mut next = |barriers, delta, noise, children, level| {
        let p = CellParams {
            index,
            barriers,
            delta,
            noise,
            children,
            level,
        };
        index += 1;
        p
    };
    match spec.kind {
        ExperimentKind::Absolute => {
            for &b in &g.barriers {
                for (ni, &w) in g.noises.iter().enumerate() {
                    let sync = (b > 0).then_some(Sync::Absolute(b));
                    let src = pair_source(spec.pair_steps, w, sync);
                    let params = next(Some(b), None, Some(w), Some(2), None);
                    cells.push(distance_cell(spec, &src, params, ni)?);
                }
            }
        }
        ExperimentKind::Relative => {
            for &d in &g.deltas {
                for (ni, &w) in g.noises.iter().enumerate() {
                    let src = pair_source(spec.pair_steps, w, Some(Sync::Relative(d)));
                    let params = next(None, Some(d), Some(w), Some(2), None);
                    cells.push(distance_cell(spec, &src, params, ni)?);
                }
            }
        }
        ExperimentKind::ScalingAbsolute | ExperimentKind::ScalingRelative => {
            let (sync, barriers, delta) = if spec.kind == ExperimentKind::ScalingAbsolute {
                (Sync::Absolute(9), Some(9), None)
            } else {
                (Sync::Relative(0.1), None, Some(0.1))
            };
            for (ci, &n) in g.children.iter().enumerate() {
                let w = spec.scaling_noise;
                let src = scaling_source(n, spec.scaling_step, w, Some(sync));
                let params = next(barriers, delta, Some(w), Some(n), None);
                cells.push(distance_cell(spec, &src, params, ci)?);
            }
        }
        ExperimentKind::Predictability => {
            let schedule = ProfileSchedule::Constant(spec.profile_step);
            for &d in &g.deltas {
                for (ni, &w) in g.noises.iter().enumerate() {
                    let src =
                        predictability_source(spec.profile_step, spec.constrained_step, w, Some(d));
                    let tree = compile(&src);
                    let arm = tree.find_action("arm").expect("arm is declared");
                    let traces = seeds(spec.seed, ni, spec.runs)
                        .into_par_iter()
                        .map(|seed| run_once(&tree, seed, spec.cycle_cap).map(|t| (seed, t)))
                        .collect::<Result<Vec<_>, RunError>>()?;
                    for &level in &g.levels {
                        let expected = schedule.expected_cycles(level);
                        let runs = traces
                            .iter()
                            .enumerate()
                            .map(|(run, (seed, trace))| RunResult {
                                run,
                                seed: *seed,
                                value: predictability_distance(
                                    trace,
                                    arm,
                                    level,
                                    expected * trace.dt,
                                )
                                .expect("grid levels lie in [0, 1]"),
                                cycles: trace.cycles(),
                            })
                            .collect();
                        let params = next(None, Some(d), Some(w), Some(2), Some(level));
                        cells.push(cell_result(params, runs));
                    }
                }
            }
        }
        ExperimentKind::DiningGreedy | ExperimentKind::DiningFair => {
            let mode = if spec.kind == ExperimentKind::DiningGreedy {
                DiningMode::Greedy
            } else {
                DiningMode::Fair
            };
            let out = run_dining(mode, spec.cycle_cap)?;
            let cycles = out.trace.cycles();
            let runs = vec![RunResult {
                run: 0,
                seed: 0,
                value: cycles as f64,
                cycles,
            }];
            cells.push(cell_result(next(None, None, None, Some(3), None), runs));
        }
    }
    Ok(ExperimentResult {
        name: spec.kind.name(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_sources_compile() {
        for sync in [None, Some(Sync::Absolute(3)), Some(Sync::Relative(0.2))] {
            compile(&pair_source((0.03, 0.02), 0.01, sync));
            compile(&scaling_source(4, 0.03, 0.015, sync));
        }
        compile(&predictability_source(0.1, 0.2, 0.0, Some(0.0)));
        compile(&dining_source(DiningMode::Fair));
    }

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Absolute);
        spec.runs = 8;
        spec.grid.barriers = vec![0, 3];
        spec.grid.noises = vec![0.01];
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 2);
        assert_eq!(a.cells[0].runs[3].seed, a.cells[1].runs[3].seed);
    }
}
