//! Tick execution.
//!
//! One call to [`Engine::step`] is one root cycle: a synchronous depth-first
//! traversal from the root, followed by bookkeeping:
//!
//! 1. nodes that were running but received no tick this cycle are halted;
//! 2. resource decorators give back resources their child no longer needs
//!    (all of them if the decorator was not ticked);
//! 3. every sync group records its members' progress, which fixes the
//!    barriers seen during the next cycle;
//! 4. a [`CycleRecord`] is appended to the trace.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::behavior::{Behavior, ConditionModel};
use crate::sim::derive_seed;
use crate::status::{NodeStatus, PROGRESS_EPS};
use crate::sync::resource::{AllocationEvent, ResourceId, ResourceSet, ResourceTable};
use crate::trace::{CycleRecord, TickTrace};
use crate::tree::{NodeId, NodeKind, Tree};

/// Shared key/value facts read by condition leaves.
#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    flags: HashMap<String, bool>,
}

impl Blackboard {
    pub fn set(&mut self, key: impl Into<String>, value: bool) {
        self.flags.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> bool {
        self.flags.get(key).copied().unwrap_or(false)
    }
}

/// Inputs available to a runtime-registered priority increment.
#[derive(Debug, Clone, Copy)]
pub struct IncrementInput {
    pub cycle: u64,
    pub node: NodeId,
    pub priority: f64,
    pub child_progress: f64,
}

type IncrementFn = Box<dyn FnMut(&IncrementInput) -> f64 + Send>;

#[derive(Debug, Clone)]
struct GroupState {
    snapshot: Vec<f64>,
    barrier: f64,
}

pub struct Engine {
    tree: Arc<Tree>,
    behaviors: Vec<Option<Box<dyn Behavior>>>,
    increments: BTreeMap<NodeId, IncrementFn>,
    memory: Vec<Vec<Option<NodeStatus>>>,
    running: Vec<bool>,
    last_status: Vec<Option<NodeStatus>>,
    cycle_status: Vec<Option<NodeStatus>>,
    groups: Vec<GroupState>,
    resources: ResourceTable,
    grants: Vec<(NodeId, ResourceSet)>,
    blackboard: Blackboard,
    cycle: u64,
    trace: TickTrace,
}

impl Engine {
    /// Builds the runtime state for `tree`. Each action draws randomness from
    /// its own stream derived from `seed` and the action's depth-first ordinal.
    pub fn new(tree: Arc<Tree>, seed: u64) -> Engine {
        let n = tree.len();
        let behaviors = tree
            .nodes()
            .iter()
            .map(|node| match &node.kind {
                NodeKind::Action(a) => {
                    Some(a.model.instantiate(derive_seed(&[seed, a.ordinal as u64])))
                }
                _ => None,
            })
            .collect();
        let memory = tree
            .nodes()
            .iter()
            .map(|node| match node.kind {
                NodeKind::MemorySequence | NodeKind::MemoryFallback => {
                    vec![None; node.children.len()]
                }
                _ => Vec::new(),
            })
            .collect();
        let groups = tree
            .groups()
            .iter()
            .map(|g| GroupState {
                snapshot: vec![0.0; g.members.len()],
                barrier: 1.0,
            })
            .collect();
        let mut engine = Engine {
            behaviors,
            increments: BTreeMap::new(),
            memory,
            running: vec![false; n],
            last_status: vec![None; n],
            cycle_status: vec![None; n],
            groups,
            resources: ResourceTable::new(tree.resources().len(), n),
            grants: Vec::new(),
            blackboard: Blackboard::default(),
            cycle: 0,
            trace: TickTrace {
                dt: 1.0,
                labels: (0..n).map(|i| tree.label(NodeId(i))).collect(),
                records: Vec::new(),
            },
            tree,
        };
        engine.update_snapshots();
        engine.record();
        engine
    }

    /// Replaces the behavior of an action leaf, e.g. with an asynchronous
    /// action. The initial trace record is refreshed.
    pub fn set_behavior(&mut self, node: NodeId, behavior: Box<dyn Behavior>) {
        assert!(
            matches!(self.tree.node(node).kind, NodeKind::Action(_)),
            "{node} is not an action"
        );
        self.behaviors[node.0] = Some(behavior);
        if self.cycle == 0 {
            self.update_snapshots();
            self.trace.records.clear();
            self.record();
        }
    }

    /// Overrides the priority increment of a resource decorator with an
    /// arbitrary function of the current state.
    pub fn set_priority_increment(
        &mut self,
        node: NodeId,
        f: impl FnMut(&IncrementInput) -> f64 + Send + 'static,
    ) {
        assert!(
            matches!(self.tree.node(node).kind, NodeKind::ResourceSync { .. }),
            "{node} is not a resource decorator"
        );
        self.increments.insert(node, Box::new(f));
    }

    /// Sets the simulated duration of one cycle (defaults to 1).
    pub fn set_dt(&mut self, dt: f64) {
        self.trace.dt = dt;
        for r in &mut self.trace.records {
            r.time = r.cycle as f64 * dt;
        }
    }

    pub fn tree(&self) -> &Arc<Tree> {
        &self.tree
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn blackboard(&self) -> &Blackboard {
        &self.blackboard
    }

    pub fn blackboard_mut(&mut self) -> &mut Blackboard {
        &mut self.blackboard
    }

    pub fn trace(&self) -> &TickTrace {
        &self.trace
    }

    pub fn into_trace(self) -> TickTrace {
        self.trace
    }

    /// Status returned by `node` in the latest cycle, `None` if not ticked.
    pub fn status(&self, node: NodeId) -> Option<NodeStatus> {
        self.cycle_status[node.0]
    }

    pub fn is_running(&self, node: NodeId) -> bool {
        self.running[node.0]
    }

    /// Stored terminal statuses of a memory node's children.
    pub fn memory(&self, node: NodeId) -> &[Option<NodeStatus>] {
        &self.memory[node.0]
    }

    pub fn holder(&self, resource: ResourceId) -> Option<NodeId> {
        self.resources.holder(resource)
    }

    pub fn priority(&self, node: NodeId) -> f64 {
        self.resources.priority(node)
    }

    pub fn allocation_log(&self) -> &[AllocationEvent] {
        self.resources.log()
    }

    /// Barrier the members of group `index` see during the next cycle.
    pub fn group_barrier(&self, index: usize) -> f64 {
        let g = &self.tree.groups()[index];
        if g.members.is_empty() {
            1.0
        } else {
            g.policy.barrier(&self.groups[index].snapshot)
        }
    }

    /// Whether every monitored action has reached progress 1.
    pub fn is_complete(&self) -> bool {
        self.tree.actions().iter().all(|&id| {
            let b = self.behavior(id);
            !b.is_monitored() || b.progress() >= 1.0
        })
    }

    /// Runs one root cycle and returns the root's status.
    pub fn step(&mut self) -> NodeStatus {
        let tree = Arc::clone(&self.tree);
        self.cycle += 1;
        self.cycle_status.iter_mut().for_each(|s| *s = None);
        self.grants.clear();
        self.resources.begin_cycle();
        for i in 0..self.groups.len() {
            self.groups[i].barrier = self.group_barrier(i);
        }

        let status = self.tick(&tree, tree.root());

        for i in 0..tree.len() {
            if self.running[i] && self.cycle_status[i].is_none() {
                self.halt_node(&tree, NodeId(i));
            }
        }
        for node in tree.nodes() {
            if let NodeKind::ResourceSync { .. } = node.kind {
                let keep = if self.cycle_status[node.id.0].is_some() {
                    self.resources_of(node.children[0])
                } else {
                    ResourceSet::new()
                };
                self.resources.release_except(node.id, &keep, self.cycle);
            }
        }
        self.update_snapshots();
        self.record();
        status
    }

    /// Halts `node` and every running node below it.
    pub fn halt(&mut self, node: NodeId) {
        let tree = Arc::clone(&self.tree);
        for i in tree.subtree(node) {
            let id = NodeId(i);
            let holds = matches!(tree.node(id).kind, NodeKind::ResourceSync { .. })
                && !self.resources.held_by(id).is_empty();
            if self.running[i] || holds {
                self.halt_node(&tree, id);
            }
        }
    }

    /// Progress of any node, composed from its children.
    ///
    /// Sequences report `(j + p)/N` where `j` children have succeeded and `p`
    /// is the progress of the current one; fallbacks report the progress of
    /// the first child that has not failed; parallels report the minimum over
    /// their children; decorators pass their child's progress through and
    /// conditions report 0.
    pub fn progress_of(&self, node: NodeId) -> f64 {
        let n = self.tree.node(node);
        match &n.kind {
            NodeKind::Action(_) => self.behavior(node).progress(),
            NodeKind::Condition { .. } => 0.0,
            NodeKind::Sequence | NodeKind::MemorySequence => {
                let total = n.children.len();
                match self.active_sequence_child(node) {
                    Some(j) => (j as f64 + self.progress_of(n.children[j])) / total as f64,
                    None => 1.0,
                }
            }
            NodeKind::Fallback | NodeKind::MemoryFallback => {
                let j = self
                    .active_fallback_child(node)
                    .unwrap_or(n.children.len() - 1);
                self.progress_of(n.children[j])
            }
            NodeKind::Parallel { .. } => n
                .children
                .iter()
                .map(|&c| self.progress_of(c))
                .fold(1.0, f64::min),
            NodeKind::ProgressSync { .. } | NodeKind::ResourceSync { .. } => {
                self.progress_of(n.children[0])
            }
        }
    }

    /// Resources a subtree needs in its current state.
    pub fn resources_of(&self, node: NodeId) -> ResourceSet {
        let n = self.tree.node(node);
        match &n.kind {
            NodeKind::Action(a) => {
                if self.behavior(node).needs_resources() {
                    a.resources.clone()
                } else {
                    ResourceSet::new()
                }
            }
            NodeKind::Condition { .. } => ResourceSet::new(),
            NodeKind::Sequence | NodeKind::MemorySequence => self
                .active_sequence_child(node)
                .map(|j| self.resources_of(n.children[j]))
                .unwrap_or_default(),
            NodeKind::Fallback | NodeKind::MemoryFallback => self
                .active_fallback_child(node)
                .map(|j| self.resources_of(n.children[j]))
                .unwrap_or_default(),
            NodeKind::Parallel { .. } => {
                let mut set = ResourceSet::new();
                for &c in &n.children {
                    set.union_with(&self.resources_of(c));
                }
                set
            }
            NodeKind::ProgressSync { .. } | NodeKind::ResourceSync { .. } => {
                self.resources_of(n.children[0])
            }
        }
    }

    fn behavior(&self, node: NodeId) -> &dyn Behavior {
        self.behaviors[node.0]
            .as_deref()
            .expect("action leaves always have a behavior")
    }

    fn condition_holds(&self, model: &ConditionModel) -> bool {
        match model {
            ConditionModel::Const(v) => *v,
            ConditionModel::Flag(key) => self.blackboard.get(key),
        }
    }

    fn in_success_region(&self, parent: NodeId, index: usize, child: NodeId) -> bool {
        if self.memory[parent.0].get(index) == Some(&Some(NodeStatus::Success)) {
            return true;
        }
        match &self.tree.node(child).kind {
            NodeKind::Action(_) => {
                let b = self.behavior(child);
                b.is_monitored() && b.progress() >= 1.0
            }
            NodeKind::Condition { model, .. } => self.condition_holds(model),
            _ => self.last_status[child.0] == Some(NodeStatus::Success),
        }
    }

    fn in_failure_region(&self, parent: NodeId, index: usize, child: NodeId) -> bool {
        if self.memory[parent.0].get(index) == Some(&Some(NodeStatus::Failure)) {
            return true;
        }
        match &self.tree.node(child).kind {
            NodeKind::Condition { model, .. } => !self.condition_holds(model),
            _ => self.last_status[child.0] == Some(NodeStatus::Failure),
        }
    }

    fn active_sequence_child(&self, node: NodeId) -> Option<usize> {
        let children = &self.tree.node(node).children;
        children
            .iter()
            .enumerate()
            .position(|(i, &c)| !self.in_success_region(node, i, c))
    }

    fn active_fallback_child(&self, node: NodeId) -> Option<usize> {
        let children = &self.tree.node(node).children;
        children
            .iter()
            .enumerate()
            .position(|(i, &c)| !self.in_failure_region(node, i, c))
    }

    fn tick(&mut self, tree: &Tree, id: NodeId) -> NodeStatus {
        debug_assert!(
            self.cycle_status[id.0].is_none(),
            "{id} ticked twice in one cycle"
        );
        let node = tree.node(id);
        let status = match &node.kind {
            NodeKind::Sequence => self.tick_sequence(tree, &node.children),
            NodeKind::Fallback => self.tick_fallback(tree, &node.children),
            NodeKind::MemorySequence => self.tick_memory(tree, id, NodeStatus::Success),
            NodeKind::MemoryFallback => self.tick_memory(tree, id, NodeStatus::Failure),
            NodeKind::Parallel { threshold } => {
                self.tick_parallel(tree, &node.children, *threshold)
            }
            NodeKind::ProgressSync { group } => {
                let child = node.children[0];
                if self.progress_of(child) <= self.groups[group.0].barrier + PROGRESS_EPS {
                    self.tick(tree, child)
                } else {
                    NodeStatus::Running
                }
            }
            NodeKind::ResourceSync { increment } => {
                self.tick_resource_sync(tree, id, increment.value())
            }
            NodeKind::Action(_) => self.behaviors[id.0]
                .as_mut()
                .expect("action leaves always have a behavior")
                .tick(),
            NodeKind::Condition { model, .. } => {
                if self.condition_holds(model) {
                    NodeStatus::Success
                } else {
                    NodeStatus::Failure
                }
            }
        };
        self.cycle_status[id.0] = Some(status);
        self.last_status[id.0] = Some(status);
        self.running[id.0] = status == NodeStatus::Running;
        status
    }

    fn tick_sequence(&mut self, tree: &Tree, children: &[NodeId]) -> NodeStatus {
        for &c in children {
            let s = self.tick(tree, c);
            if s != NodeStatus::Success {
                return s;
            }
        }
        NodeStatus::Success
    }

    fn tick_fallback(&mut self, tree: &Tree, children: &[NodeId]) -> NodeStatus {
        for &c in children {
            let s = self.tick(tree, c);
            if s != NodeStatus::Failure {
                return s;
            }
        }
        NodeStatus::Failure
    }

    /// `skip` is the status that lets the node move on to the next child:
    /// Success for a memory sequence, Failure for a memory fallback.
    fn tick_memory(&mut self, tree: &Tree, id: NodeId, skip: NodeStatus) -> NodeStatus {
        let children = &tree.node(id).children;
        for (i, &c) in children.iter().enumerate() {
            if self.memory[id.0][i].is_some() {
                continue;
            }
            let s = self.tick(tree, c);
            if s == skip {
                self.memory[id.0][i] = Some(s);
            } else {
                if s.is_terminal() {
                    self.memory[id.0].iter_mut().for_each(|m| *m = None);
                }
                return s;
            }
        }
        self.memory[id.0].iter_mut().for_each(|m| *m = None);
        skip
    }

    fn tick_parallel(&mut self, tree: &Tree, children: &[NodeId], threshold: usize) -> NodeStatus {
        let statuses: Vec<NodeStatus> = children.iter().map(|&c| self.tick(tree, c)).collect();
        let successes = statuses
            .iter()
            .filter(|&&s| s == NodeStatus::Success)
            .count();
        let failures = statuses
            .iter()
            .filter(|&&s| s == NodeStatus::Failure)
            .count();
        let status = if successes >= threshold {
            NodeStatus::Success
        } else if failures > children.len() - threshold {
            NodeStatus::Failure
        } else {
            NodeStatus::Running
        };
        if status.is_terminal() {
            for (&c, &s) in children.iter().zip(&statuses) {
                if s == NodeStatus::Running {
                    self.halt(c);
                }
            }
        }
        status
    }

    fn tick_resource_sync(&mut self, tree: &Tree, id: NodeId, increment: f64) -> NodeStatus {
        let child = tree.node(id).children[0];
        let needs = self.resources_of(child);
        self.resources.release_except(id, &needs, self.cycle);
        if needs.is_empty() {
            return self.tick(tree, child);
        }
        if self.resources.may_acquire(id, &needs) {
            self.resources.acquire(id, &needs, self.cycle);
            self.grants.push((id, needs));
            return self.tick(tree, child);
        }
        self.resources.release_all(id, self.cycle);
        let input = IncrementInput {
            cycle: self.cycle,
            node: id,
            priority: self.resources.priority(id),
            child_progress: self.progress_of(child),
        };
        let increment = match self.increments.get_mut(&id) {
            Some(f) => f(&input),
            None => increment,
        };
        self.resources.deny(id, needs, increment);
        NodeStatus::Running
    }

    fn halt_node(&mut self, tree: &Tree, id: NodeId) {
        self.running[id.0] = false;
        match tree.node(id).kind {
            NodeKind::Action(_) => {
                if let Some(b) = self.behaviors[id.0].as_mut() {
                    b.halt();
                }
            }
            NodeKind::ResourceSync { .. } => self.resources.release_all(id, self.cycle),
            _ => {}
        }
    }

    fn update_snapshots(&mut self) {
        let values: Vec<Vec<f64>> = self
            .tree
            .groups()
            .iter()
            .map(|g| g.members.iter().map(|&m| self.progress_of(m)).collect())
            .collect();
        for (state, v) in self.groups.iter_mut().zip(values) {
            state.snapshot = v;
        }
    }

    fn record(&mut self) {
        let n = self.tree.len();
        let record = CycleRecord {
            cycle: self.cycle,
            time: self.cycle as f64 * self.trace.dt,
            status: self.cycle_status.clone(),
            progress: (0..n).map(|i| self.progress_of(NodeId(i))).collect(),
            holders: self.resources.holders().to_vec(),
            grants: self.grants.clone(),
        };
        self.trace.records.push(record);
    }
}
