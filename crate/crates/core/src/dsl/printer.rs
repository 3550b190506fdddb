use std::fmt::Write;

use crate::behavior::{ActionModel, ConditionModel, ProfileSchedule};

use super::ast::{Document, NodeExpr, NodeHead};

/// Canonical text of `doc`: declarations in the order resources, groups,
/// conditions, actions, then the root node indented by two spaces per level.
pub fn print(doc: &Document) -> String {
    let mut out = String::new();
    if !doc.resources.is_empty() {
        let names: Vec<&str> = doc.resources.iter().map(|r| r.value.as_str()).collect();
        writeln!(out, "resources {{{}}}", names.join(", ")).unwrap();
    }
    for g in &doc.groups {
        writeln!(out, "group {} {}", g.name.value, g.policy).unwrap();
    }
    for c in &doc.conditions {
        let model = match &c.model {
            ConditionModel::Const(v) => format!("const {v}"),
            ConditionModel::Flag(k) => format!("flag {k}"),
        };
        writeln!(out, "condition {} {model}", c.name.value).unwrap();
    }
    for a in &doc.actions {
        write!(out, "action {} {}", a.name.value, model_text(&a.model)).unwrap();
        if !a.resources.is_empty() {
            let names: Vec<&str> = a.resources.iter().map(|r| r.value.as_str()).collect();
            write!(out, " resources={{{}}}", names.join(", ")).unwrap();
        }
        out.push('\n');
    }
    if !out.is_empty() {
        out.push('\n');
    }
    node(&mut out, &doc.root, 0);
    out.push('\n');
    out
}

fn list(values: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", values.into_iter().collect::<Vec<_>>().join(" "))
}

fn model_text(model: &ActionModel) -> String {
    match model {
        ActionModel::Linear { step, noise, start } => {
            let mut s = format!("linear step={step}");
            if *noise != 0.0 {
                write!(s, " noise={noise}").unwrap();
            }
            if *start != 0.0 {
                write!(s, " start={start}").unwrap();
            }
            s
        }
        ActionModel::Profile(ProfileSchedule::Constant(step)) => format!("profile step={step}"),
        ActionModel::Profile(ProfileSchedule::Table(t)) => {
            format!("profile table={}", list(t.iter().map(f64::to_string)))
        }
        ActionModel::Battery { step } => format!("battery step={step}"),
        ActionModel::Perpetual => "perpetual".to_string(),
        ActionModel::Scripted(script) => {
            format!(
                "script statuses={}",
                list(script.iter().map(|s| s.to_string()))
            )
        }
    }
}

fn head_text(head: &NodeHead) -> String {
    match head {
        NodeHead::Parallel(m) => format!("par {m}"),
        NodeHead::ProgressSync(g) => format!("psync {g}"),
        NodeHead::ResourceSync(inc) => format!("rsync {inc}"),
        NodeHead::Action(a) => format!("act {a}"),
        NodeHead::Condition(c) => format!("cond {c}"),
        other => other.keyword().to_string(),
    }
}

/// Leaves, and single-child chains ending in a leaf, fit on one line.
fn is_inline(n: &NodeExpr) -> bool {
    match n.children.as_slice() {
        [] => true,
        [only] => is_inline(only),
        _ => false,
    }
}

fn node(out: &mut String, n: &NodeExpr, depth: usize) {
    out.push('(');
    out.push_str(&head_text(&n.head));
    if is_inline(n) {
        for c in &n.children {
            out.push(' ');
            node(out, c, depth + 1);
        }
    } else {
        for c in &n.children {
            out.push('\n');
            out.push_str(&"  ".repeat(depth + 1));
            node(out, c, depth + 1);
        }
    }
    out.push(')');
}
