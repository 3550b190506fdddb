use crate::behavior::{ActionModel, ConditionModel};
use crate::sync::barrier::BarrierPolicy;
use crate::sync::resource::PriorityIncrement;

use super::diagnostic::Span;

/// A value with its source position. Equality ignores the position, so
/// documents compare structurally.
#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub value: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(value: T, span: Span) -> Self {
        Spanned { value, span }
    }

    /// A value with a default span, for documents built in code.
    pub fn bare(value: T) -> Self {
        Spanned::new(value, Span::default())
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

pub type Name = Spanned<String>;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDecl {
    pub name: Name,
    pub policy: BarrierPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDecl {
    pub name: Name,
    pub model: ActionModel,
    pub resources: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionDecl {
    pub name: Name,
    pub model: ConditionModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeHead {
    Sequence,
    MemorySequence,
    Fallback,
    MemoryFallback,
    Parallel(usize),
    ProgressSync(String),
    ResourceSync(PriorityIncrement),
    Action(String),
    Condition(String),
}

impl NodeHead {
    pub fn keyword(&self) -> &'static str {
        match self {
            NodeHead::Sequence => "seq",
            NodeHead::MemorySequence => "seq*",
            NodeHead::Fallback => "fb",
            NodeHead::MemoryFallback => "fb*",
            NodeHead::Parallel(_) => "par",
            NodeHead::ProgressSync(_) => "psync",
            NodeHead::ResourceSync(_) => "rsync",
            NodeHead::Action(_) => "act",
            NodeHead::Condition(_) => "cond",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeExpr {
    pub head: NodeHead,
    pub children: Vec<NodeExpr>,
    pub span: Span,
}

impl NodeExpr {
    pub fn new(head: NodeHead, children: Vec<NodeExpr>) -> Self {
        NodeExpr {
            head,
            children,
            span: Span::default(),
        }
    }
}

impl PartialEq for NodeExpr {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.children == other.children
    }
}

/// A parsed `.bt` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub resources: Vec<Name>,
    pub groups: Vec<GroupDecl>,
    pub conditions: Vec<ConditionDecl>,
    pub actions: Vec<ActionDecl>,
    pub root: NodeExpr,
}

impl Document {
    pub fn action(&self, name: &str) -> Option<&ActionDecl> {
        self.actions.iter().find(|a| a.name.value == name)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionDecl> {
        self.conditions.iter().find(|c| c.name.value == name)
    }

    pub fn group(&self, name: &str) -> Option<&GroupDecl> {
        self.groups.iter().find(|g| g.name.value == name)
    }
}
