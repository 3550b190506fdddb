//! CSV emission. Row order follows grid order and run index, so a rerun
//! with the same master seed produces identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::sync::resource::AllocationEvent;
use crate::trace::TickTrace;
use crate::tree::Tree;

use super::experiment::{CellParams, DiningOutcome, ExperimentResult};

#[derive(Serialize)]
struct RunRow<'a> {
    experiment: &'a str,
    cell: usize,
    barriers: Option<usize>,
    delta: Option<f64>,
    noise: Option<f64>,
    children: Option<usize>,
    pbar: Option<f64>,
    run: usize,
    seed: u64,
    value: f64,
    cycles: u64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    experiment: &'a str,
    cell: usize,
    barriers: Option<usize>,
    delta: Option<f64>,
    noise: Option<f64>,
    children: Option<usize>,
    pbar: Option<f64>,
    n: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    mean_cycles: f64,
}

const RUN_HEADER: [&str; 11] = [
    "experiment",
    "cell",
    "barriers",
    "delta",
    "noise",
    "children",
    "pbar",
    "run",
    "seed",
    "value",
    "cycles",
];

const SUMMARY_HEADER: [&str; 14] = [
    "experiment",
    "cell",
    "barriers",
    "delta",
    "noise",
    "children",
    "pbar",
    "n",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "mean_cycles",
];

fn writer<W: Write>(out: W, header: &[&str]) -> csv::Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

/// One row per run.
pub fn write_runs_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = writer(out, &RUN_HEADER)?;
    for cell in &result.cells {
        let CellParams {
            index,
            barriers,
            delta,
            noise,
            children,
            level,
        } = cell.params;
        for r in &cell.runs {
            w.serialize(RunRow {
                experiment: result.name,
                cell: index,
                barriers,
                delta,
                noise,
                children,
                pbar: level,
                run: r.run,
                seed: r.seed,
                value: r.value,
                cycles: r.cycles,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per cell.
pub fn write_summary_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = writer(out, &SUMMARY_HEADER)?;
    for cell in &result.cells {
        let p = &cell.params;
        let s = &cell.summary;
        w.serialize(SummaryRow {
            experiment: result.name,
            cell: p.index,
            barriers: p.barriers,
            delta: p.delta,
            noise: p.noise,
            children: p.children,
            pbar: p.level,
            n: s.n,
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
            mean_cycles: cell.mean_cycles,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format trace: one row per node per recorded cycle. Unticked nodes
/// have an empty status.
pub fn write_trace_csv<W: Write>(trace: &TickTrace, out: W) -> csv::Result<()> {
    let mut w = writer(
        out,
        &["cycle", "time", "node", "label", "status", "progress"],
    )?;
    for r in &trace.records {
        for (i, label) in trace.labels.iter().enumerate() {
            let status = r.status[i].map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                r.cycle.to_string(),
                r.time.to_string(),
                i.to_string(),
                label.clone(),
                status,
                r.progress[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Holder changes, with resources and holders by name.
pub fn write_allocations_csv<W: Write>(
    tree: &Tree,
    log: &[AllocationEvent],
    out: W,
) -> csv::Result<()> {
    let mut w = writer(out, &["cycle", "resource", "holder"])?;
    for e in log {
        let holder = e.holder.map(|h| holder_name(tree, h)).unwrap_or_default();
        w.write_record([
            e.cycle.to_string(),
            tree.resources()[e.resource.0].clone(),
            holder,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn holder_name(tree: &Tree, decorator: crate::tree::NodeId) -> String {
    let child = tree.node(decorator).children[0];
    match &tree.node(child).kind {
        crate::tree::NodeKind::Action(a) => a.name.clone(),
        _ => tree.label(decorator),
    }
}

/// Wide per-cycle view of a dining run: every robot's battery level and
/// every cable's holder.
pub fn write_dining_csv<W: Write>(outcome: &DiningOutcome, out: W) -> csv::Result<()> {
    let tree = &outcome.tree;
    let mut header = vec!["cycle".to_string()];
    for &r in &outcome.robots {
        if let crate::tree::NodeKind::Action(a) = &tree.node(r).kind {
            header.push(a.name.clone());
        }
    }
    for name in tree.resources() {
        header.push(format!("holder_{name}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = writer(out, &header)?;
    for rec in &outcome.trace.records {
        let mut row = vec![rec.cycle.to_string()];
        row.extend(outcome.robots.iter().map(|r| rec.progress[r.0].to_string()));
        row.extend(
            rec.holders
                .iter()
                .map(|h| h.map(|h| holder_name(tree, h)).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
