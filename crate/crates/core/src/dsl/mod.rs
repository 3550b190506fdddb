//! The `.bt` tree language.
//!
//! ```text
//! # two arms kept within 0.1 progress of each other
//! resources {A, B}
//! group g relative 0.1
//! action left linear step=0.03 noise=0.01 resources={A}
//! action right linear step=0.02 noise=0.01 resources={B}
//!
//! (par 2
//!   (psync g (act left))
//!   (psync g (act right)))
//! ```
//!
//! Declarations:
//!
//! * `resources {A, B, ..}` adds to the resource universe;
//! * `group NAME absolute [b1 b2 ..]` or `group NAME relative DELTA`;
//! * `condition NAME const true|false` or `condition NAME flag KEY`;
//! * `action NAME KIND key=value ..` with kinds
//!   `linear step= noise= start=`, `profile step=|table=[..]|sigmoid=`,
//!   `battery step=`, `perpetual` and `script statuses=[..]`; every kind
//!   accepts `resources={..}`.
//!
//! Nodes: `seq`, `seq*`, `fb`, `fb*` (memory variants), `par M`,
//! `psync GROUP`, `rsync zero`, `rsync const G`, `act NAME`, `cond NAME`.

mod ast;
mod diagnostic;
mod lexer;
mod parser;
mod printer;
mod validate;

pub use ast::{ActionDecl, ConditionDecl, Document, GroupDecl, Name, NodeExpr, NodeHead, Spanned};
pub use diagnostic::{Code, Diagnostic, Severity, Span};
pub use parser::parse_syntax;
pub use printer::print;
pub use validate::validate;

use crate::tree::{Declarations, NodeSpec, SpecKind, Tree};

/// Parses and validates `src`. Warnings do not fail the parse; use
/// [`validate`] to see them.
pub fn parse(src: &str) -> Result<Document, Vec<Diagnostic>> {
    let (doc, mut diags, rejected) = parser::parse_recovering(src);
    if let Some(doc) = &doc {
        diags.extend(validate::validate_except(doc, &rejected));
    }
    match doc {
        Some(doc) if !diags.iter().any(Diagnostic::is_error) => Ok(doc),
        _ => {
            diags.retain(Diagnostic::is_error);
            Err(diags)
        }
    }
}

/// A tree ready to execute, with the warnings found on the way.
#[derive(Debug)]
pub struct Compiled {
    pub document: Document,
    pub tree: Tree,
    pub warnings: Vec<Diagnostic>,
}

/// Parses, validates and builds the executable tree.
pub fn compile(src: &str) -> Result<Compiled, Vec<Diagnostic>> {
    let document = parse(src)?;
    let warnings = validate(&document);
    let tree = to_tree(&document).expect("validated documents always build");
    Ok(Compiled {
        document,
        tree,
        warnings,
    })
}

/// Builds the executable tree of a document. Fails on documents that do
/// not validate.
pub fn to_tree(doc: &Document) -> Result<Tree, Vec<Diagnostic>> {
    let errors: Vec<Diagnostic> = validate(doc)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut decls = Declarations::default();
    for r in &doc.resources {
        decls = decls.resource(r.value.clone());
    }
    for g in &doc.groups {
        decls = decls.group(g.name.value.clone(), g.policy.clone());
    }
    Ok(Tree::new(spec(doc, &doc.root), decls).expect("validation covers tree construction"))
}

fn spec(doc: &Document, n: &NodeExpr) -> NodeSpec {
    let kind = match &n.head {
        NodeHead::Sequence => SpecKind::Sequence,
        NodeHead::MemorySequence => SpecKind::MemorySequence,
        NodeHead::Fallback => SpecKind::Fallback,
        NodeHead::MemoryFallback => SpecKind::MemoryFallback,
        NodeHead::Parallel(m) => SpecKind::Parallel { threshold: *m },
        NodeHead::ProgressSync(g) => SpecKind::ProgressSync { group: g.clone() },
        NodeHead::ResourceSync(inc) => SpecKind::ResourceSync { increment: *inc },
        NodeHead::Action(a) => {
            let decl = doc.action(a).expect("validated");
            SpecKind::Action {
                name: a.clone(),
                model: decl.model.clone(),
                resources: decl.resources.iter().map(|r| r.value.clone()).collect(),
            }
        }
        NodeHead::Condition(c) => SpecKind::Condition {
            name: c.clone(),
            model: doc.condition(c).expect("validated").model.clone(),
        },
    };
    NodeSpec::new(kind, n.children.iter().map(|c| spec(doc, c)).collect())
}
