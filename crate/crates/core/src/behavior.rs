//! Action and condition models.
//!
//! An action leaf owns a [`Behavior`] instance created from its
//! [`ActionModel`] when an [`Engine`](crate::Engine) is built. Behaviors advance
//! synchronously: one tick, one step.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::status::{clamp_progress, NodeStatus};

/// Runtime state of an action leaf.
pub trait Behavior: Send {
    /// Performs one step and reports the resulting status.
    fn tick(&mut self) -> NodeStatus;

    /// Current progress in `[0, 1]`.
    fn progress(&self) -> f64;

    /// Called when the action stops receiving ticks while running.
    fn halt(&mut self) {}

    /// Whether the action currently needs its declared resources.
    fn needs_resources(&self) -> bool {
        self.progress() < 1.0
    }

    /// Whether run completion waits for this action to reach progress 1.
    fn is_monitored(&self) -> bool {
        true
    }
}

/// Declarative description of an action's dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionModel {
    /// `p <- clamp(p + step + w)` with `w` uniform on `[-noise, noise]`.
    Linear { step: f64, noise: f64, start: f64 },
    /// Deterministic reference profile.
    Profile(ProfileSchedule),
    /// Charges by `step` per tick.
    Battery { step: f64 },
    /// Never completes; progress is 1 while executing and 0 otherwise.
    Perpetual,
    /// Returns the listed statuses in order, repeating the last one.
    Scripted(Vec<NodeStatus>),
}

impl ActionModel {
    pub fn linear(step: f64, noise: f64) -> Self {
        ActionModel::Linear {
            step,
            noise,
            start: 0.0,
        }
    }

    pub fn instantiate(&self, seed: u64) -> Box<dyn Behavior> {
        match self {
            ActionModel::Linear { step, noise, start } => {
                Box::new(StochasticLinearAction::new(*step, *noise, *start, seed))
            }
            ActionModel::Profile(schedule) => Box::new(ProfileAction::new(schedule.clone())),
            ActionModel::Battery { step } => Box::new(BatteryAction::new(*step)),
            ActionModel::Perpetual => Box::new(PerpetualAction::default()),
            ActionModel::Scripted(script) => Box::new(ScriptedAction::new(script.clone())),
        }
    }

    /// Nominal per-tick increment, if the model has one.
    pub fn nominal_step(&self) -> Option<f64> {
        match self {
            ActionModel::Linear { step, .. } | ActionModel::Battery { step } => Some(*step),
            ActionModel::Profile(s) => s.min_increment(),
            ActionModel::Perpetual | ActionModel::Scripted(_) => None,
        }
    }
}

/// Predicate evaluated by a condition leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionModel {
    Const(bool),
    /// Reads a boolean from the engine's blackboard; missing keys are false.
    Flag(String),
}

#[derive(Debug, Clone)]
pub struct StochasticLinearAction {
    step: f64,
    noise: f64,
    progress: f64,
    rng: ChaCha8Rng,
}

impl StochasticLinearAction {
    pub fn new(step: f64, noise: f64, start: f64, seed: u64) -> Self {
        StochasticLinearAction {
            step,
            noise,
            progress: clamp_progress(start),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Behavior for StochasticLinearAction {
    fn tick(&mut self) -> NodeStatus {
        if self.progress >= 1.0 {
            return NodeStatus::Success;
        }
        let w = if self.noise > 0.0 {
            self.rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        self.progress = clamp_progress(self.progress + self.step + w);
        if self.progress >= 1.0 {
            NodeStatus::Success
        } else {
            NodeStatus::Running
        }
    }

    fn progress(&self) -> f64 {
        self.progress
    }
}

/// Per-tick increments of a reference profile.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSchedule {
    Constant(f64),
    /// Increment for tick `k` is `table[k]`; the last entry repeats.
    Table(Vec<f64>),
}

impl ProfileSchedule {
    /// A slow-fast-slow logistic profile that completes in `ticks` ticks.
    pub fn sigmoid(ticks: usize) -> Self {
        let ticks = ticks.max(1);
        let level = |k: usize| {
            let x = 12.0 * (k as f64 / ticks as f64) - 6.0;
            1.0 / (1.0 + (-x).exp())
        };
        let lo = level(0);
        let hi = level(ticks);
        let norm = |k: usize| (level(k) - lo) / (hi - lo);
        ProfileSchedule::Table((1..=ticks).map(|k| norm(k) - norm(k - 1)).collect())
    }

    pub fn increment(&self, tick: usize) -> f64 {
        match self {
            ProfileSchedule::Constant(step) => *step,
            ProfileSchedule::Table(t) => t.get(tick).or_else(|| t.last()).copied().unwrap_or(0.0),
        }
    }

    fn min_increment(&self) -> Option<f64> {
        match self {
            ProfileSchedule::Constant(step) => Some(*step),
            ProfileSchedule::Table(t) => t.iter().copied().filter(|&x| x > 0.0).reduce(f64::min),
        }
    }

    /// Cycles (possibly fractional) the profile takes to reach `level`,
    /// interpolating linearly within a tick.
    pub fn expected_cycles(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        if let ProfileSchedule::Constant(step) = self {
            return level / step;
        }
        let mut p = 0.0;
        for k in 0..100_000usize {
            let inc = self.increment(k);
            if inc <= 0.0 {
                break;
            }
            if p + inc >= level - crate::status::PROGRESS_EPS {
                return k as f64 + (level - p) / inc;
            }
            p += inc;
        }
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct ProfileAction {
    schedule: ProfileSchedule,
    ticks: usize,
    progress: f64,
}

impl ProfileAction {
    pub fn new(schedule: ProfileSchedule) -> Self {
        ProfileAction {
            schedule,
            ticks: 0,
            progress: 0.0,
        }
    }
}

impl Behavior for ProfileAction {
    fn tick(&mut self) -> NodeStatus {
        if self.progress < 1.0 {
            self.progress = clamp_progress(self.progress + self.schedule.increment(self.ticks));
            self.ticks += 1;
        }
        if self.progress >= 1.0 {
            NodeStatus::Success
        } else {
            NodeStatus::Running
        }
    }

    fn progress(&self) -> f64 {
        self.progress
    }
}

/// Battery charging by a fixed fraction per tick while plugged in.
#[derive(Debug, Clone)]
pub struct BatteryAction {
    step: f64,
    level: f64,
}

impl BatteryAction {
    pub fn new(step: f64) -> Self {
        BatteryAction { step, level: 0.0 }
    }
}

impl Behavior for BatteryAction {
    fn tick(&mut self) -> NodeStatus {
        if self.level < 1.0 {
            self.level = clamp_progress(self.level + self.step);
        }
        if self.level >= 1.0 {
            NodeStatus::Success
        } else {
            NodeStatus::Running
        }
    }

    fn progress(&self) -> f64 {
        self.level
    }
}

#[derive(Debug, Clone, Default)]
pub struct PerpetualAction {
    active: bool,
}

impl Behavior for PerpetualAction {
    fn tick(&mut self) -> NodeStatus {
        self.active = true;
        NodeStatus::Running
    }

    fn progress(&self) -> f64 {
        if self.active {
            1.0
        } else {
            0.0
        }
    }

    fn halt(&mut self) {
        self.active = false;
    }

    fn needs_resources(&self) -> bool {
        true
    }

    fn is_monitored(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAction {
    script: Vec<NodeStatus>,
    next: usize,
    succeeded: bool,
    halts: usize,
}

impl ScriptedAction {
    pub fn new(script: Vec<NodeStatus>) -> Self {
        ScriptedAction {
            script,
            next: 0,
            succeeded: false,
            halts: 0,
        }
    }
}

impl Behavior for ScriptedAction {
    fn tick(&mut self) -> NodeStatus {
        let status = self
            .script
            .get(self.next)
            .or_else(|| self.script.last())
            .copied()
            .unwrap_or(NodeStatus::Success);
        self.next += 1;
        self.succeeded = status == NodeStatus::Success;
        status
    }

    fn progress(&self) -> f64 {
        if self.succeeded {
            1.0
        } else {
            0.0
        }
    }

    fn halt(&mut self) {
        self.halts += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_reaches_one_exactly() {
        let mut a = StochasticLinearAction::new(0.02, 0.0, 0.0, 1);
        let mut ticks = 0;
        while a.tick() == NodeStatus::Running {
            ticks += 1;
        }
        assert_eq!(ticks + 1, 50);
        assert_eq!(a.progress(), 1.0);
        // completed actions keep succeeding
        assert_eq!(a.tick(), NodeStatus::Success);
    }

    #[test]
    fn noise_stays_in_band() {
        let mut a = StochasticLinearAction::new(0.03, 0.015, 0.0, 7);
        let mut prev = 0.0;
        while a.tick() == NodeStatus::Running {
            let d = a.progress() - prev;
            assert!((0.015 - 1e-12..=0.045 + 1e-12).contains(&d), "{d}");
            prev = a.progress();
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let run = |seed| {
            let mut a = StochasticLinearAction::new(0.03, 0.01, 0.0, seed);
            (0..10)
                .map(|_| {
                    a.tick();
                    a.progress()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn battery_ten_ticks() {
        let mut b = BatteryAction::new(0.1);
        let statuses: Vec<_> = (0..10).map(|_| b.tick()).collect();
        assert!(statuses[..9].iter().all(|&s| s == NodeStatus::Running));
        assert_eq!(statuses[9], NodeStatus::Success);
        assert!(!b.needs_resources());
    }

    #[test]
    fn perpetual_progress_is_binary() {
        let mut p = PerpetualAction::default();
        assert_eq!(p.progress(), 0.0);
        assert_eq!(p.tick(), NodeStatus::Running);
        assert_eq!(p.progress(), 1.0);
        p.halt();
        assert_eq!(p.progress(), 0.0);
        assert!(!p.is_monitored());
    }

    #[test]
    fn profile_expected_cycles() {
        let c = ProfileSchedule::Constant(0.1);
        assert!((c.expected_cycles(0.5) - 5.0).abs() < 1e-12);
        let s = ProfileSchedule::sigmoid(20);
        let total: f64 = (0..20).map(|k| s.increment(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((s.expected_cycles(0.5) - 10.0).abs() < 1e-9);
        assert!(s.increment(0) < s.increment(10));
    }

    #[test]
    fn scripted_repeats_last() {
        let mut s = ScriptedAction::new(vec![NodeStatus::Running, NodeStatus::Success]);
        assert_eq!(s.tick(), NodeStatus::Running);
        assert_eq!(s.tick(), NodeStatus::Success);
        assert_eq!(s.tick(), NodeStatus::Success);
        assert_eq!(s.progress(), 1.0);
    }
}
