//! Validated, immutable tree structure.
//!
//! Trees are described by a recursive [`NodeSpec`] and flattened into an
//! arena whose [`NodeId`]s follow depth-first, left-to-right order. All
//! structural checks happen in [`Tree::new`], so ticking never fails.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::behavior::{ActionModel, ConditionModel};
use crate::sync::barrier::BarrierPolicy;
use crate::sync::resource::{PriorityIncrement, ResourceId, ResourceSet};

/// Depth-first position of a node; dense in `0..tree.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Index of a sync group in [`Tree::groups`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Sequence,
    Fallback,
    MemorySequence,
    MemoryFallback,
    Parallel { threshold: usize },
    ProgressSync { group: GroupId },
    ResourceSync { increment: PriorityIncrement },
    Action(ActionNode),
    Condition { name: String, model: ConditionModel },
}

impl NodeKind {
    pub fn is_decorator(&self) -> bool {
        matches!(
            self,
            NodeKind::ProgressSync { .. } | NodeKind::ResourceSync { .. }
        )
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Action(_) | NodeKind::Condition { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode {
    pub name: String,
    pub model: ActionModel,
    /// Resources the action needs while it is not complete.
    pub resources: ResourceSet,
    /// Position among the action leaves in depth-first order; seeds the
    /// action's random stream so that adding or removing decorators does not
    /// change which stream an action draws from.
    pub ordinal: usize,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SyncGroup {
    pub name: String,
    pub policy: BarrierPolicy,
    /// ProgressSync decorators referencing this group, in id order.
    pub members: Vec<NodeId>,
}

/// Recursive description of a tree, resolved into a [`Tree`] by [`Tree::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub kind: SpecKind,
    pub children: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    Sequence,
    Fallback,
    MemorySequence,
    MemoryFallback,
    Parallel {
        threshold: usize,
    },
    ProgressSync {
        group: String,
    },
    ResourceSync {
        increment: PriorityIncrement,
    },
    Action {
        name: String,
        model: ActionModel,
        resources: Vec<String>,
    },
    Condition {
        name: String,
        model: ConditionModel,
    },
}

impl NodeSpec {
    pub fn new(kind: SpecKind, children: Vec<NodeSpec>) -> Self {
        NodeSpec { kind, children }
    }

    pub fn sequence(children: Vec<NodeSpec>) -> Self {
        Self::new(SpecKind::Sequence, children)
    }

    pub fn fallback(children: Vec<NodeSpec>) -> Self {
        Self::new(SpecKind::Fallback, children)
    }

    pub fn memory_sequence(children: Vec<NodeSpec>) -> Self {
        Self::new(SpecKind::MemorySequence, children)
    }

    pub fn memory_fallback(children: Vec<NodeSpec>) -> Self {
        Self::new(SpecKind::MemoryFallback, children)
    }

    pub fn parallel(threshold: usize, children: Vec<NodeSpec>) -> Self {
        Self::new(SpecKind::Parallel { threshold }, children)
    }

    pub fn progress_sync(group: impl Into<String>, child: NodeSpec) -> Self {
        Self::new(
            SpecKind::ProgressSync {
                group: group.into(),
            },
            vec![child],
        )
    }

    pub fn resource_sync(increment: PriorityIncrement, child: NodeSpec) -> Self {
        Self::new(SpecKind::ResourceSync { increment }, vec![child])
    }

    pub fn action(name: impl Into<String>, model: ActionModel) -> Self {
        Self::new(
            SpecKind::Action {
                name: name.into(),
                model,
                resources: Vec::new(),
            },
            Vec::new(),
        )
    }

    pub fn condition(name: impl Into<String>, model: ConditionModel) -> Self {
        Self::new(
            SpecKind::Condition {
                name: name.into(),
                model,
            },
            Vec::new(),
        )
    }

    /// Declares the resources an action leaf needs. No-op on other kinds.
    pub fn with_resources<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if let SpecKind::Action { resources, .. } = &mut self.kind {
            resources.extend(names.into_iter().map(Into::into));
        }
        self
    }
}

/// Names and policies referenced by a tree.
#[derive(Debug, Clone, Default)]
pub struct Declarations {
    pub resources: Vec<String>,
    pub groups: Vec<(String, BarrierPolicy)>,
}

impl Declarations {
    pub fn resource(mut self, name: impl Into<String>) -> Self {
        self.resources.push(name.into());
        self
    }

    pub fn group(mut self, name: impl Into<String>, policy: BarrierPolicy) -> Self {
        self.groups.push((name.into(), policy));
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("{kind} expects {expected} children, found {found}")]
    Arity {
        kind: &'static str,
        expected: &'static str,
        found: usize,
    },
    #[error("parallel threshold {threshold} is outside 1..={children}")]
    ParallelThreshold { threshold: usize, children: usize },
    #[error("unknown sync group `{0}`")]
    UnknownGroup(String),
    #[error("action `{action}` needs undeclared resource `{resource}`")]
    UnknownResource { action: String, resource: String },
    #[error("duplicate resource `{0}`")]
    DuplicateResource(String),
    #[error("duplicate sync group `{0}`")]
    DuplicateGroup(String),
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    groups: Vec<SyncGroup>,
    resources: Vec<String>,
    actions: Vec<NodeId>,
}

impl Tree {
    pub fn new(root: NodeSpec, decls: Declarations) -> Result<Tree, TreeError> {
        let mut resource_index = HashMap::new();
        for (i, name) in decls.resources.iter().enumerate() {
            if resource_index.insert(name.clone(), ResourceId(i)).is_some() {
                return Err(TreeError::DuplicateResource(name.clone()));
            }
        }
        let mut group_index = HashMap::new();
        let mut groups = Vec::with_capacity(decls.groups.len());
        for (i, (name, policy)) in decls.groups.into_iter().enumerate() {
            if group_index.insert(name.clone(), GroupId(i)).is_some() {
                return Err(TreeError::DuplicateGroup(name));
            }
            groups.push(SyncGroup {
                name,
                policy,
                members: Vec::new(),
            });
        }

        let mut builder = Builder {
            nodes: Vec::new(),
            actions: Vec::new(),
            resource_index: &resource_index,
            group_index: &group_index,
        };
        builder.add(root, None)?;
        let Builder { nodes, actions, .. } = builder;

        for node in &nodes {
            if let NodeKind::ProgressSync { group } = node.kind {
                groups[group.0].members.push(node.id);
            }
        }

        Ok(Tree {
            nodes,
            groups,
            resources: decls.resources,
            actions,
        })
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn groups(&self) -> &[SyncGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&SyncGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn resource_id(&self, name: &str) -> Option<ResourceId> {
        self.resources
            .iter()
            .position(|r| r == name)
            .map(ResourceId)
    }

    /// Action leaves in depth-first order.
    pub fn actions(&self) -> &[NodeId] {
        &self.actions
    }

    /// First action leaf with the given binding name.
    pub fn find_action(&self, name: &str) -> Option<NodeId> {
        self.actions
            .iter()
            .copied()
            .find(|&id| match &self.nodes[id.0].kind {
                NodeKind::Action(a) => a.name == name,
                _ => false,
            })
    }

    /// Short human-readable label, e.g. `par 2` or `act arm`.
    pub fn label(&self, id: NodeId) -> String {
        match &self.nodes[id.0].kind {
            NodeKind::Sequence => "seq".into(),
            NodeKind::Fallback => "fb".into(),
            NodeKind::MemorySequence => "seq*".into(),
            NodeKind::MemoryFallback => "fb*".into(),
            NodeKind::Parallel { threshold } => format!("par {threshold}"),
            NodeKind::ProgressSync { group } => format!("psync {}", self.groups[group.0].name),
            NodeKind::ResourceSync { increment } => format!("rsync {increment}"),
            NodeKind::Action(a) => format!("act {}", a.name),
            NodeKind::Condition { name, .. } => format!("cond {name}"),
        }
    }

    /// Ids of `id` and all its descendants, depth-first.
    pub fn subtree(&self, id: NodeId) -> std::ops::Range<usize> {
        // ids are assigned depth-first, so a subtree is a contiguous range
        let mut end = id.0 + 1;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            for &c in &self.nodes[n.0].children {
                end = end.max(c.0 + 1);
                stack.push(c);
            }
        }
        id.0..end
    }
}

struct Builder<'a> {
    nodes: Vec<Node>,
    actions: Vec<NodeId>,
    resource_index: &'a HashMap<String, ResourceId>,
    group_index: &'a HashMap<String, GroupId>,
}

impl Builder<'_> {
    fn add(&mut self, spec: NodeSpec, parent: Option<NodeId>) -> Result<NodeId, TreeError> {
        let n = spec.children.len();
        let arity = |kind: &'static str, expected: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(TreeError::Arity {
                    kind,
                    expected,
                    found: n,
                })
            }
        };
        let id = NodeId(self.nodes.len());
        let kind = match spec.kind {
            SpecKind::Sequence => {
                arity("sequence", "at least 1", n >= 1)?;
                NodeKind::Sequence
            }
            SpecKind::Fallback => {
                arity("fallback", "at least 1", n >= 1)?;
                NodeKind::Fallback
            }
            SpecKind::MemorySequence => {
                arity("memory sequence", "at least 1", n >= 1)?;
                NodeKind::MemorySequence
            }
            SpecKind::MemoryFallback => {
                arity("memory fallback", "at least 1", n >= 1)?;
                NodeKind::MemoryFallback
            }
            SpecKind::Parallel { threshold } => {
                arity("parallel", "at least 1", n >= 1)?;
                if threshold < 1 || threshold > n {
                    return Err(TreeError::ParallelThreshold {
                        threshold,
                        children: n,
                    });
                }
                NodeKind::Parallel { threshold }
            }
            SpecKind::ProgressSync { group } => {
                arity("progress sync", "exactly 1", n == 1)?;
                let group = *self
                    .group_index
                    .get(&group)
                    .ok_or(TreeError::UnknownGroup(group))?;
                NodeKind::ProgressSync { group }
            }
            SpecKind::ResourceSync { increment } => {
                arity("resource sync", "exactly 1", n == 1)?;
                NodeKind::ResourceSync { increment }
            }
            SpecKind::Action {
                name,
                model,
                resources,
            } => {
                arity("action", "no", n == 0)?;
                let mut set = ResourceSet::new();
                for r in resources {
                    match self.resource_index.get(&r) {
                        Some(&rid) => {
                            set.insert(rid);
                        }
                        None => {
                            return Err(TreeError::UnknownResource {
                                action: name,
                                resource: r,
                            })
                        }
                    }
                }
                let ordinal = self.actions.len();
                self.actions.push(id);
                NodeKind::Action(ActionNode {
                    name,
                    model,
                    resources: set,
                    ordinal,
                })
            }
            SpecKind::Condition { name, model } => {
                arity("condition", "no", n == 0)?;
                NodeKind::Condition { name, model }
            }
        };
        self.nodes.push(Node {
            id,
            kind,
            children: Vec::with_capacity(n),
            parent,
        });
        for child in spec.children {
            let cid = self.add(child, Some(id))?;
            self.nodes[id.0].children.push(cid);
        }
        Ok(id)
    }
}
