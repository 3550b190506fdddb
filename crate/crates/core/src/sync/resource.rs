//! Tree-wide resource allocation with aging priorities.
//!
//! The table records which node holds each resource (the allocation map) and
//! every resource decorator's priority. A decorator may tick its child only
//! when it can hold *all* resources the child currently needs; otherwise it
//! holds none of them, its priority grows by its increment, and it is
//! registered as a contender for the next cycle.
//!
//! Contention is resolved against the contenders registered during the
//! previous cycle, so the outcome does not depend on where in the traversal
//! a decorator sits:
//!
//! * a decorator asking for free resources yields to any contender with a
//!   higher priority, or an equal priority and a smaller node id;
//! * a decorator already holding the contested resources keeps them unless a
//!   contender's priority is strictly higher, in which case it releases
//!   everything before its child is ticked.
//!
//! With a zero increment nobody ever outranks a holder, so a holder keeps its
//! resources until its child stops needing them. With a positive increment
//! every waiter eventually outranks the holders and is served.

use std::collections::BTreeSet;
use std::fmt;

use crate::tree::NodeId;

/// Index into a tree's declared resource universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(pub usize);

/// A set of resources needed by a subtree in its current state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResourceSet(BTreeSet<ResourceId>);

impl ResourceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, r: ResourceId) -> bool {
        self.0.insert(r)
    }

    pub fn contains(&self, r: ResourceId) -> bool {
        self.0.contains(&r)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.0.iter().copied()
    }

    pub fn union_with(&mut self, other: &ResourceSet) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn intersects(&self, other: &ResourceSet) -> bool {
        // sets are tiny
        self.0.iter().any(|r| other.0.contains(r))
    }

    pub fn intersection(&self, other: &ResourceSet) -> ResourceSet {
        ResourceSet(self.0.intersection(&other.0).copied().collect())
    }
}

impl FromIterator<ResourceId> for ResourceSet {
    fn from_iter<T: IntoIterator<Item = ResourceId>>(iter: T) -> Self {
        ResourceSet(iter.into_iter().collect())
    }
}

/// Priority increment applied each cycle a resource decorator is denied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorityIncrement {
    Zero,
    Const(f64),
}

impl PriorityIncrement {
    pub fn value(self) -> f64 {
        match self {
            PriorityIncrement::Zero => 0.0,
            PriorityIncrement::Const(c) => c,
        }
    }
}

impl fmt::Display for PriorityIncrement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorityIncrement::Zero => f.write_str("zero"),
            PriorityIncrement::Const(c) => write!(f, "const {c}"),
        }
    }
}

/// A change of holder for one resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationEvent {
    pub cycle: u64,
    pub resource: ResourceId,
    pub holder: Option<NodeId>,
}

#[derive(Debug, Clone)]
struct Contender {
    node: NodeId,
    priority: f64,
    needs: ResourceSet,
}

#[derive(Debug, Clone)]
pub struct ResourceTable {
    holders: Vec<Option<NodeId>>,
    priorities: Vec<f64>,
    contenders: Vec<Contender>,
    next_contenders: Vec<Contender>,
    log: Vec<AllocationEvent>,
}

impl ResourceTable {
    pub fn new(resource_count: usize, node_count: usize) -> Self {
        ResourceTable {
            holders: vec![None; resource_count],
            priorities: vec![0.0; node_count],
            contenders: Vec::new(),
            next_contenders: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn holder(&self, r: ResourceId) -> Option<NodeId> {
        self.holders[r.0]
    }

    pub fn holders(&self) -> &[Option<NodeId>] {
        &self.holders
    }

    pub fn priority(&self, node: NodeId) -> f64 {
        self.priorities[node.0]
    }

    pub fn held_by(&self, node: NodeId) -> ResourceSet {
        self.holders
            .iter()
            .enumerate()
            .filter(|(_, h)| **h == Some(node))
            .map(|(i, _)| ResourceId(i))
            .collect()
    }

    /// Every holder change so far, in order.
    pub fn log(&self) -> &[AllocationEvent] {
        &self.log
    }

    /// Contenders registered last cycle become the ones consulted this cycle.
    pub fn begin_cycle(&mut self) {
        self.contenders = std::mem::take(&mut self.next_contenders);
    }

    /// Whether `node` may take (or keep) every resource in `needs` now.
    pub fn may_acquire(&self, node: NodeId, needs: &ResourceSet) -> bool {
        if needs
            .iter()
            .any(|r| matches!(self.holders[r.0], Some(h) if h != node))
        {
            return false;
        }
        let own = self.priorities[node.0];
        let held = self.held_by(node);
        for c in &self.contenders {
            if c.node == node || !c.needs.intersects(needs) {
                continue;
            }
            let contested = c.needs.intersection(needs);
            let incumbent = contested.iter().all(|r| held.contains(r));
            let outranks = if incumbent {
                c.priority > own
            } else {
                c.priority > own || (c.priority == own && c.node < node)
            };
            if outranks {
                return false;
            }
        }
        true
    }

    /// Assigns every resource in `needs` to `node`. Returns whether anything
    /// was newly acquired, in which case the node's priority is reset.
    pub fn acquire(&mut self, node: NodeId, needs: &ResourceSet, cycle: u64) -> bool {
        let mut newly = false;
        for r in needs.iter() {
            if self.holders[r.0] != Some(node) {
                debug_assert!(self.holders[r.0].is_none(), "acquiring a held resource");
                self.set_holder(r, Some(node), cycle);
                newly = true;
            }
        }
        if newly {
            self.priorities[node.0] = 0.0;
        }
        newly
    }

    /// Releases resources held by `node` that are not in `keep`.
    pub fn release_except(&mut self, node: NodeId, keep: &ResourceSet, cycle: u64) {
        for i in 0..self.holders.len() {
            let r = ResourceId(i);
            if self.holders[i] == Some(node) && !keep.contains(r) {
                self.set_holder(r, None, cycle);
            }
        }
    }

    pub fn release_all(&mut self, node: NodeId, cycle: u64) {
        self.release_except(node, &ResourceSet::new(), cycle);
    }

    /// Records a denied request: bumps the priority by `increment` and
    /// registers the node as a contender for the next cycle.
    pub fn deny(&mut self, node: NodeId, needs: ResourceSet, increment: f64) {
        self.priorities[node.0] += increment;
        self.next_contenders.push(Contender {
            node,
            priority: self.priorities[node.0],
            needs,
        });
    }

    fn set_holder(&mut self, r: ResourceId, holder: Option<NodeId>, cycle: u64) {
        self.holders[r.0] = holder;
        self.log.push(AllocationEvent {
            cycle,
            resource: r,
            holder,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[usize]) -> ResourceSet {
        ids.iter().map(|&i| ResourceId(i)).collect()
    }

    #[test]
    fn held_resource_blocks_others() {
        let mut t = ResourceTable::new(3, 4);
        assert!(t.may_acquire(NodeId(1), &set(&[0, 1])));
        t.acquire(NodeId(1), &set(&[0, 1]), 1);
        assert!(!t.may_acquire(NodeId(2), &set(&[1, 2])));
        assert!(t.may_acquire(NodeId(1), &set(&[0, 1])));
        t.deny(NodeId(2), set(&[1, 2]), 1.0);
        assert_eq!(t.priority(NodeId(2)), 1.0);
    }

    #[test]
    fn highest_priority_waiter_wins_freed_resource() {
        let mut t = ResourceTable::new(1, 4);
        t.deny(NodeId(1), set(&[0]), 1.0);
        t.deny(NodeId(2), set(&[0]), 3.0);
        t.begin_cycle();
        assert!(!t.may_acquire(NodeId(1), &set(&[0])));
        assert!(t.may_acquire(NodeId(2), &set(&[0])));
    }

    #[test]
    fn equal_priority_ties_go_to_smaller_id() {
        let mut t = ResourceTable::new(1, 4);
        t.deny(NodeId(1), set(&[0]), 0.0);
        t.deny(NodeId(3), set(&[0]), 0.0);
        t.begin_cycle();
        assert!(t.may_acquire(NodeId(1), &set(&[0])));
        assert!(!t.may_acquire(NodeId(3), &set(&[0])));
    }

    #[test]
    fn incumbent_yields_only_to_strictly_higher_priority() {
        let mut t = ResourceTable::new(1, 4);
        t.acquire(NodeId(2), &set(&[0]), 1);
        t.deny(NodeId(1), set(&[0]), 0.0);
        t.begin_cycle();
        assert!(t.may_acquire(NodeId(2), &set(&[0])));

        t.deny(NodeId(1), set(&[0]), 1.0);
        t.begin_cycle();
        assert!(!t.may_acquire(NodeId(2), &set(&[0])));
    }

    #[test]
    fn release_logs_events() {
        let mut t = ResourceTable::new(2, 2);
        t.acquire(NodeId(0), &set(&[0, 1]), 1);
        t.release_except(NodeId(0), &set(&[1]), 2);
        assert_eq!(t.holder(ResourceId(0)), None);
        assert_eq!(t.holder(ResourceId(1)), Some(NodeId(0)));
        t.release_all(NodeId(0), 3);
        assert_eq!(t.log().len(), 4);
        assert!(t.held_by(NodeId(0)).is_empty());
    }
}
