//! Referential checks, arity rules and the static resource-conflict lint.

use std::collections::{BTreeSet, HashSet};

use super::ast::{Document, NodeExpr, NodeHead};
use super::diagnostic::{Code, Diagnostic};

/// All semantic diagnostics for `doc`, errors and warnings, in source order
/// of discovery.
pub fn validate(doc: &Document) -> Vec<Diagnostic> {
    validate_except(doc, &HashSet::new())
}

/// [`validate`], without unknown-name errors for names in `rejected`.
pub(crate) fn validate_except(doc: &Document, rejected: &HashSet<String>) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    declarations(doc, &mut diags);
    let mut used = HashSet::new();
    structure(doc, &doc.root, rejected, &mut used, &mut diags);
    conflicts(doc, &doc.root, &mut diags);
    diags
}

fn declarations(doc: &Document, diags: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for r in &doc.resources {
        if !seen.insert(r.value.as_str()) {
            diags.push(Diagnostic::new(
                Code::Duplicate,
                r.span,
                format!("resource `{}` declared twice", r.value),
            ));
        }
    }
    let mut seen = HashSet::new();
    for g in &doc.groups {
        if !seen.insert(g.name.value.as_str()) {
            diags.push(Diagnostic::new(
                Code::Duplicate,
                g.name.span,
                format!("group `{}` declared twice", g.name.value),
            ));
        }
    }
    let mut seen = HashSet::new();
    let leaves = doc
        .conditions
        .iter()
        .map(|c| &c.name)
        .chain(doc.actions.iter().map(|a| &a.name));
    for name in leaves {
        if !seen.insert(name.value.as_str()) {
            diags.push(Diagnostic::new(
                Code::Duplicate,
                name.span,
                format!("`{}` declared twice", name.value),
            ));
        }
    }
    let declared: HashSet<&str> = doc.resources.iter().map(|r| r.value.as_str()).collect();
    for a in &doc.actions {
        let mut own = HashSet::new();
        for r in &a.resources {
            if !declared.contains(r.value.as_str()) {
                diags.push(Diagnostic::new(
                    Code::UnknownResource,
                    r.span,
                    format!(
                        "action `{}` uses undeclared resource `{}`",
                        a.name.value, r.value
                    ),
                ));
            } else if !own.insert(r.value.as_str()) {
                diags.push(Diagnostic::new(
                    Code::Duplicate,
                    r.span,
                    format!(
                        "action `{}` lists resource `{}` twice",
                        a.name.value, r.value
                    ),
                ));
            }
        }
    }
}

fn structure<'a>(
    doc: &Document,
    n: &'a NodeExpr,
    rejected: &HashSet<String>,
    used: &mut HashSet<&'a str>,
    diags: &mut Vec<Diagnostic>,
) {
    let found = n.children.len();
    let arity = |expected: &str| {
        Diagnostic::new(
            Code::Arity,
            n.span,
            format!("`{}` expects {expected}, found {found}", n.head.keyword()),
        )
    };
    match &n.head {
        NodeHead::Sequence
        | NodeHead::MemorySequence
        | NodeHead::Fallback
        | NodeHead::MemoryFallback => {
            if found == 0 {
                diags.push(arity("at least one child"));
            }
        }
        NodeHead::Parallel(m) => {
            if found == 0 {
                diags.push(arity("at least one child"));
            } else if *m < 1 || *m > found {
                diags.push(Diagnostic::new(
                    Code::ParallelThreshold,
                    n.span,
                    format!("parallel threshold {m} is outside 1..={found}"),
                ));
            }
        }
        NodeHead::ProgressSync(g) => {
            if found != 1 {
                diags.push(arity("exactly one child"));
            }
            if doc.group(g).is_none() && !rejected.contains(g) {
                diags.push(Diagnostic::new(
                    Code::UnknownGroup,
                    n.span,
                    format!("unknown sync group `{g}`"),
                ));
            }
        }
        NodeHead::ResourceSync(_) => {
            if found != 1 {
                diags.push(arity("exactly one child"));
            }
        }
        NodeHead::Action(a) => {
            if found != 0 {
                diags.push(arity("no children"));
            }
            if doc.action(a).is_none() {
                if !rejected.contains(a) {
                    diags.push(Diagnostic::new(
                        Code::UnknownLeaf,
                        n.span,
                        format!("unknown action `{a}`"),
                    ));
                }
            } else if !used.insert(a.as_str()) {
                diags.push(Diagnostic::new(
                    Code::ReusedAction,
                    n.span,
                    format!("action `{a}` appears at more than one leaf"),
                ));
            }
        }
        NodeHead::Condition(c) => {
            if found != 0 {
                diags.push(arity("no children"));
            }
            if doc.condition(c).is_none() && !rejected.contains(c) {
                diags.push(Diagnostic::new(
                    Code::UnknownLeaf,
                    n.span,
                    format!("unknown condition `{c}`"),
                ));
            }
        }
    }
    for c in &n.children {
        structure(doc, c, rejected, used, diags);
    }
}

/// Worst-case resources used by actions in `n` that no resource decorator
/// inside `n` guards.
fn unguarded<'a>(doc: &'a Document, n: &NodeExpr, out: &mut BTreeSet<&'a str>) {
    match &n.head {
        NodeHead::ResourceSync(_) => {}
        NodeHead::Action(a) => {
            if let Some(decl) = doc.action(a) {
                out.extend(decl.resources.iter().map(|r| r.value.as_str()));
            }
        }
        _ => {
            for c in &n.children {
                unguarded(doc, c, out);
            }
        }
    }
}

fn conflicts(doc: &Document, n: &NodeExpr, diags: &mut Vec<Diagnostic>) {
    if let NodeHead::Parallel(_) = n.head {
        let sets: Vec<BTreeSet<&str>> = n
            .children
            .iter()
            .map(|c| {
                let mut s = BTreeSet::new();
                unguarded(doc, c, &mut s);
                s
            })
            .collect();
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                let shared: Vec<&str> = sets[i].intersection(&sets[j]).copied().collect();
                if !shared.is_empty() {
                    diags.push(Diagnostic::new(
                        Code::ResourceConflict,
                        n.span,
                        format!(
                            "branches {} and {} of this parallel may use {{{}}} at the same time; guard them with `rsync`",
                            i + 1,
                            j + 1,
                            shared.join(", ")
                        ),
                    ));
                }
            }
        }
    }
    for c in &n.children {
        conflicts(doc, c, diags);
    }
}
