//! Exit criteria. Each test prints one PASS/FAIL line to stderr, outside the
//! test harness' output capture, and then asserts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use cbt::dsl;
use cbt::metrics::predictability_distance;
use cbt::sim::{
    self, pair_source, predictability_source, run_dining, run_experiment, DiningMode,
    ExperimentKind, ExperimentResult, ExperimentSpec, Sync,
};
use cbt::{ActionModel, Engine, NodeSpec, NodeStatus, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 1;

fn report(id: u32, name: &str, ok: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "\ncriterion {id:>2} {verdict}: {name} [{:.2}s / {}s] {detail}",
        elapsed.as_secs_f64(),
        budget.as_secs()
    )
    .unwrap();
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(
        within,
        "criterion {id} ({name}) exceeded {budget:?}: {elapsed:?}"
    );
}

fn tree(src: &str) -> Arc<Tree> {
    Arc::new(dsl::compile(src).unwrap().tree)
}

// ---------------------------------------------------------------- 1

fn oracle_sequence(s: &[NodeStatus]) -> (NodeStatus, usize) {
    for (i, &x) in s.iter().enumerate() {
        if x != NodeStatus::Success {
            return (x, i + 1);
        }
    }
    (NodeStatus::Success, s.len())
}

fn oracle_fallback(s: &[NodeStatus]) -> (NodeStatus, usize) {
    for (i, &x) in s.iter().enumerate() {
        if x != NodeStatus::Failure {
            return (x, i + 1);
        }
    }
    (NodeStatus::Failure, s.len())
}

fn oracle_parallel(s: &[NodeStatus], m: usize) -> NodeStatus {
    let succ = s.iter().filter(|x| **x == NodeStatus::Success).count();
    let fail = s.iter().filter(|x| **x == NodeStatus::Failure).count();
    if succ >= m {
        NodeStatus::Success
    } else if fail + m > s.len() {
        NodeStatus::Failure
    } else {
        NodeStatus::Running
    }
}

/// Case analysis of the two-child parallel composition.
fn two_child_parallel(a: NodeStatus, b: NodeStatus, m: usize) -> NodeStatus {
    use NodeStatus::*;
    match m {
        1 if a == Success || b == Success => Success,
        1 if a == Failure && b == Failure => Failure,
        2 if a == Success && b == Success => Success,
        2 if a == Failure || b == Failure => Failure,
        _ => Running,
    }
}

fn assignments(n: usize) -> Vec<Vec<NodeStatus>> {
    let all = [
        NodeStatus::Success,
        NodeStatus::Running,
        NodeStatus::Failure,
    ];
    (0..3usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let s = all[code % 3];
                    code /= 3;
                    s
                })
                .collect()
        })
        .collect()
}

/// Root status and how many leaves were ticked in one cycle.
fn tick_once(
    root: impl Fn(Vec<NodeSpec>) -> NodeSpec,
    statuses: &[NodeStatus],
) -> (NodeStatus, usize) {
    let leaves = statuses
        .iter()
        .enumerate()
        .map(|(i, &s)| NodeSpec::action(format!("c{i}"), ActionModel::Scripted(vec![s])))
        .collect();
    let t = Arc::new(Tree::new(root(leaves), Default::default()).unwrap());
    let mut e = Engine::new(Arc::clone(&t), 0);
    let status = e.step();
    let ticked = t
        .actions()
        .iter()
        .filter(|&&a| e.status(a).is_some())
        .count();
    (status, ticked)
}

#[test]
fn criterion_01_node_semantics_oracle() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut cases = 0;
    for n in 1..=4 {
        for s in assignments(n) {
            cases += 2;
            if tick_once(NodeSpec::sequence, &s) != oracle_sequence(&s) {
                mismatches.push(format!("seq {s:?}"));
            }
            if tick_once(NodeSpec::fallback, &s) != oracle_fallback(&s) {
                mismatches.push(format!("fb {s:?}"));
            }
            for m in 1..=n {
                cases += 1;
                let (got, ticked) = tick_once(|c| NodeSpec::parallel(m, c), &s);
                let want = oracle_parallel(&s, m);
                let def = if n == 2 {
                    two_child_parallel(s[0], s[1], m)
                } else {
                    want
                };
                if got != want || want != def || ticked != n {
                    mismatches.push(format!("par {m} {s:?}: {got:?}"));
                }
            }
        }
    }
    report(
        1,
        "node semantics oracle",
        mismatches.is_empty(),
        &format!("{cases} cases, mismatches: {mismatches:?}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

// ---------------------------------------------------------------- 2

/// Per-cycle (status, progress) of every action, keyed by name, plus the
/// root status.
type Footprint = (
    BTreeMap<String, Vec<(Option<NodeStatus>, u64)>>,
    Vec<Option<NodeStatus>>,
);

fn footprint(t: &Arc<Tree>, seed: u64) -> Footprint {
    let trace = sim::run_once(t, seed, None).unwrap();
    let mut per_action = BTreeMap::new();
    for &a in t.actions() {
        let cbt::NodeKind::Action(node) = &t.node(a).kind else {
            unreachable!()
        };
        let seq = trace
            .records
            .iter()
            .map(|r| (r.status[a.0], r.progress[a.0].to_bits()))
            .collect();
        per_action.insert(node.name.clone(), seq);
    }
    (per_action, trace.status_of(t.root()).collect())
}

#[test]
fn criterion_02_transparency() {
    let start = Instant::now();
    let steps = (0.03, 0.02);
    let mut differing = Vec::new();
    for noise in [0.005, 0.01, 0.015] {
        let plain = tree(&pair_source(steps, noise, None));
        let abs0 = tree(&pair_source(steps, noise, Some(Sync::Absolute(0))));
        let rel1 = tree(&pair_source(steps, noise, Some(Sync::Relative(1.0))));
        for run in 0..100u64 {
            let seed = sim::derive_seed(&[MASTER_SEED, run]);
            let base = footprint(&plain, seed);
            if footprint(&abs0, seed) != base {
                differing.push(format!("|B|=0 noise={noise} run={run}"));
            }
            if footprint(&rel1, seed) != base {
                differing.push(format!("delta=1 noise={noise} run={run}"));
            }
        }
    }
    report(
        2,
        "transparency of |B|=0 and delta=1",
        differing.is_empty(),
        &format!("300 seeds x 2 policies, differing: {differing:?}"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

// ---------------------------------------------------------------- 3, 4, 9

struct Timed {
    result: ExperimentResult,
    elapsed: Duration,
}

fn sweep(kind: ExperimentKind) -> Timed {
    let mut spec = ExperimentSpec::new(kind);
    spec.runs = 2000;
    spec.seed = MASTER_SEED;
    let start = Instant::now();
    let result = run_experiment(&spec).unwrap();
    Timed {
        result,
        elapsed: start.elapsed(),
    }
}

fn absolute_sweep() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| sweep(ExperimentKind::Absolute))
}

fn relative_sweep() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| sweep(ExperimentKind::Relative))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

#[test]
fn criterion_03_absolute_sweep_trend() {
    let t = absolute_sweep();
    let cells = &t.result.cells;
    let mut ok = true;
    let mut detail = String::new();
    for noise in [0.005, 0.01, 0.015] {
        let at = |b: usize| {
            cells
                .iter()
                .find(|c| c.params.barriers == Some(b) && c.params.noise == Some(noise))
                .unwrap()
        };
        let medians: Vec<f64> = [0, 3, 9].iter().map(|&b| at(b).summary.median).collect();
        let unsync_iqr = at(0).summary.iqr();
        let iqrs: Vec<f64> = [1, 3, 9].iter().map(|&b| at(b).summary.iqr()).collect();
        let trend = strictly_decreasing(&medians);
        let narrower = iqrs.iter().all(|&i| i < unsync_iqr);
        ok &= trend && narrower;
        detail += &format!(
            "noise={noise}: medians(0,3,9)={medians:.4?} iqr(0)={unsync_iqr:.4} iqr(1,3,9)={iqrs:.4?}; "
        );
    }
    report(
        3,
        "absolute sweep trend",
        ok,
        &detail,
        t.elapsed,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_04_relative_sweep_trend() {
    let t = relative_sweep();
    let cells = &t.result.cells;
    let mut ok = true;
    let mut detail = String::new();
    for noise in [0.005, 0.01, 0.015] {
        let medians: Vec<f64> = [1.0, 0.5, 0.2, 0.1]
            .iter()
            .map(|&d| {
                cells
                    .iter()
                    .find(|c| c.params.delta == Some(d) && c.params.noise == Some(noise))
                    .unwrap()
                    .summary
                    .median
            })
            .collect();
        let trend = strictly_decreasing(&medians);
        ok &= trend;
        detail += &format!("noise={noise}: medians(1,.5,.2,.1)={medians:.4?}; ");
    }

    // Band clause: deterministic pair under delta = 0.
    let band = tree(&pair_source((0.03, 0.02), 0.0, Some(Sync::Relative(0.0))));
    let trace = sim::run_once(&band, 0, None).unwrap();
    let limit = 0.03f64 - 0.02;
    let widest = trace
        .records
        .iter()
        .map(|r| {
            let p: Vec<f64> = band.actions().iter().map(|a| r.progress[a.0]).collect();
            (
                r.cycle,
                p.iter().cloned().fold(f64::MIN, f64::max)
                    - p.iter().cloned().fold(f64::MAX, f64::min),
            )
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let band_ok = widest.1 <= limit + 1e-12;
    ok &= band_ok;
    detail += &format!(
        "delta=0 band: widest spread {:.4} at cycle {} vs limit {limit:.4}",
        widest.1, widest.0
    );
    report(
        4,
        "relative sweep trend",
        ok,
        &detail,
        t.elapsed,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_09_time_cost() {
    let mut ok = true;
    let mut detail = String::new();
    let abs = absolute_sweep();
    let rel = relative_sweep();
    let abs_unsynced = |c: &sim::CellResult| c.params.barriers == Some(0);
    let rel_unsynced = |c: &sim::CellResult| c.params.delta == Some(1.0);
    type Baseline<'a> = &'a dyn Fn(&sim::CellResult) -> bool;
    let sweeps: [(&Timed, Baseline); 2] = [(abs, &abs_unsynced), (rel, &rel_unsynced)];
    for (t, unsynced) in sweeps {
        for c in &t.result.cells {
            if unsynced(c) {
                continue;
            }
            let base = t
                .result
                .cells
                .iter()
                .find(|b| unsynced(b) && b.params.noise == c.params.noise)
                .unwrap();
            if c.mean_cycles < base.mean_cycles {
                ok = false;
                detail += &format!(
                    "{} cell {} mean {:.3} < unsynced {:.3}; ",
                    t.result.name, c.params.index, c.mean_cycles, base.mean_cycles
                );
            }
        }
    }
    if ok {
        detail = "every synchronized cell is at least as slow as its unsynchronized cell".into();
    }
    report(
        9,
        "time cost of synchronization",
        ok,
        &detail,
        Duration::ZERO,
        Duration::from_secs(1),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_child_scaling() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for kind in [
        ExperimentKind::ScalingAbsolute,
        ExperimentKind::ScalingRelative,
    ] {
        let mut spec = ExperimentSpec::new(kind);
        spec.runs = 1000;
        spec.seed = MASTER_SEED;
        let r = run_experiment(&spec).unwrap();
        let medians: Vec<f64> = r.cells.iter().map(|c| c.summary.median).collect();
        ok &= non_decreasing(&medians);
        detail += &format!("{}: medians(2,4,8,16)={medians:.4?}; ", r.name);
    }
    report(
        5,
        "child scaling",
        ok,
        &detail,
        start.elapsed(),
        Duration::from_secs(60),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_06_predictability() {
    let start = Instant::now();
    // Deterministic oracle: 0.2/tick reaches 0.4 at cycle 2 (closest to 0.5),
    // the 0.1/tick profile reaches 0.5 at cycle 5.
    let oracle = (2.0f64 - 5.0).abs();
    let t = tree(&predictability_source(0.1, 0.2, 0.0, Some(1.0)));
    let trace = sim::run_once(&t, 0, None).unwrap();
    let arm = t.find_action("arm").unwrap();
    let p = predictability_distance(&trace, arm, 0.5, 5.0).unwrap();
    let mut ok = (p - oracle).abs() <= 1.0;
    let mut detail = format!("delta=1 P(0.5)={p} oracle={oracle}; ");

    let mut spec = ExperimentSpec::new(ExperimentKind::Predictability);
    spec.runs = 2000;
    spec.seed = MASTER_SEED;
    spec.grid.levels = vec![0.5];
    let r = run_experiment(&spec).unwrap();
    let median = |d: f64, w: f64| {
        r.cells
            .iter()
            .find(|c| c.params.delta == Some(d) && c.params.noise == Some(w))
            .unwrap()
            .summary
            .median
    };
    let mut deltas = spec.grid.deltas.clone();
    deltas.sort_by(f64::total_cmp);
    let noises = spec.grid.noises.clone();
    for &w in &noises {
        let m: Vec<f64> = deltas.iter().map(|&d| median(d, w)).collect();
        let good = non_decreasing(&m);
        ok &= good;
        detail += &format!("noise={w} over delta{deltas:?}: {m:?}; ");
    }
    for &d in &deltas {
        let m: Vec<f64> = noises.iter().map(|&w| median(d, w)).collect();
        let good = non_decreasing(&m);
        ok &= good;
        detail += &format!("delta={d} over noise: {m:?}; ");
    }
    report(
        6,
        "predictability",
        ok,
        &detail,
        start.elapsed(),
        Duration::from_secs(30),
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_dining_robots() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for mode in [DiningMode::Greedy, DiningMode::Fair] {
        let out = run_dining(mode, None).unwrap();
        let t = &out.tree;

        // mutual exclusion: decorators that ticked their child with a
        // non-empty resource set held pairwise disjoint sets
        let mut exclusive = true;
        for rec in &out.trace.records {
            for (i, (_, qa)) in rec.grants.iter().enumerate() {
                for (_, qb) in &rec.grants[i + 1..] {
                    if qa.intersects(qb) {
                        exclusive = false;
                    }
                }
            }
        }
        // independently of the grant log: robots whose battery rose in the
        // same cycle need disjoint cables
        let needs = |r: cbt::NodeId| match &t.node(r).kind {
            cbt::NodeKind::Action(n) => n.resources.clone(),
            _ => unreachable!(),
        };
        for w in out.trace.records.windows(2) {
            let charging: Vec<_> = out
                .robots
                .iter()
                .filter(|r| w[1].progress[r.0] > w[0].progress[r.0])
                .collect();
            for (i, a) in charging.iter().enumerate() {
                for b in &charging[i + 1..] {
                    exclusive &= !needs(**a).intersects(&needs(**b));
                }
            }
        }
        ok &= exclusive;
        let all_charged = out
            .robots
            .iter()
            .all(|r| out.trace.last().unwrap().progress[r.0] >= 1.0);
        ok &= all_charged;
        detail += &format!(
            "{mode:?}: exclusive={exclusive} all charged={all_charged} at cycle {}; ",
            out.trace.cycles()
        );

        if mode == DiningMode::Greedy {
            for res in 0..t.resources().len() {
                let changes = out
                    .log
                    .iter()
                    .filter(|e| e.resource.0 == res && e.holder.is_some())
                    .count();
                if changes > 3 {
                    ok = false;
                    detail += &format!(
                        "resource {} changed holder {changes} times; ",
                        t.resources()[res]
                    );
                }
            }
            for robot in &out.robots {
                let ticked: Vec<u64> = out
                    .trace
                    .records
                    .windows(2)
                    .filter(|w| w[1].progress[robot.0] > w[0].progress[robot.0])
                    .map(|w| w[1].cycle)
                    .collect();
                let block = ticked.len() == 10 && ticked.windows(2).all(|w| w[1] == w[0] + 1);
                if !block {
                    ok = false;
                    detail += &format!("robot {robot} charged at cycles {ticked:?}; ");
                }
            }
        }
    }
    report(
        7,
        "dining robots",
        ok,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_fts_preservation() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut failures = Vec::new();
    for i in 0..200 {
        let n = rng.random_range(2..=8usize);
        let policy = if rng.random_bool(0.5) {
            let count = rng.random_range(0..=9usize);
            cbt::BarrierPolicy::equidistant(count)
        } else {
            cbt::BarrierPolicy::relative(rng.random_range(0.0..=1.0)).unwrap()
        };
        let mut src = format!("group g {policy}\n");
        let mut body = format!("(par {n}");
        for k in 0..n {
            let step = rng.random_range(0.01..0.1f64);
            let noise = rng.random_range(0.0..step / 2.0);
            src += &format!("action a{k} linear step={step} noise={noise}\n");
            body += &format!(" (psync g (act a{k}))");
        }
        src += &body;
        src.push(')');
        let t = tree(&src);
        let cap = sim::default_cycle_cap(&t);
        let mut e = Engine::new(Arc::clone(&t), sim::derive_seed(&[MASTER_SEED, i]));
        let mut status = NodeStatus::Running;
        while status != NodeStatus::Success && e.cycle() < cap {
            status = e.step();
        }
        if status != NodeStatus::Success {
            failures.push(format!("tree {i}: {status:?} after {} cycles", e.cycle()));
        }
    }
    report(
        8,
        "FTS preservation",
        failures.is_empty(),
        &format!("200 trees, failures: {failures:?}"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_dsl_round_trip_and_lint() {
    let start = Instant::now();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "bt"))
        .collect();
    files.sort();
    let mut broken = Vec::new();
    for f in &files {
        let src = fs::read_to_string(f).unwrap();
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        match dsl::parse(&src) {
            Ok(doc) => {
                let text = dsl::print(&doc);
                match dsl::parse(&text) {
                    Ok(again) if again == doc && dsl::print(&again) == text => {}
                    _ => broken.push(name),
                }
            }
            Err(d) => broken.push(format!("{name}: {d:?}")),
        }
    }
    let lint = |file: &str| {
        let src = fs::read_to_string(dir.join(file)).unwrap();
        dsl::validate(&dsl::parse(&src).unwrap())
            .iter()
            .filter(|d| d.code == dsl::Code::ResourceConflict)
            .count()
    };
    let flagged = lint("shared_head_unguarded.bt");
    let silent = lint("shared_head_guarded.bt");
    let mentioned = ["dining_greedy.bt", "dining_fair.bt", "pair_relative.bt"]
        .iter()
        .all(|f| files.iter().any(|p| p.ends_with(f)));
    let ok = files.len() == 50 && broken.is_empty() && flagged == 1 && silent == 0 && mentioned;
    report(
        10,
        "DSL round trip and conflict lint",
        ok,
        &format!(
            "{} documents, broken: {broken:?}; lint unguarded={flagged} guarded={silent}",
            files.len()
        ),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

// ---------------------------------------------------------------- 11

#[test]
fn criterion_11_determinism() {
    let start = Instant::now();
    let emit = || {
        let mut spec = ExperimentSpec::new(ExperimentKind::Absolute);
        spec.runs = 2000;
        spec.seed = MASTER_SEED;
        spec.grid.barriers = vec![0];
        spec.grid.noises = vec![0.005];
        let r = run_experiment(&spec).unwrap();
        let mut runs = Vec::new();
        let mut summary = Vec::new();
        sim::write_runs_csv(&r, &mut runs).unwrap();
        sim::write_summary_csv(&r, &mut summary).unwrap();
        (runs, summary)
    };
    let a = emit();
    let b = emit();
    report(
        11,
        "determinism",
        a == b && !a.0.is_empty(),
        &format!(
            "runs.csv {} bytes, summary.csv {} bytes",
            a.0.len(),
            a.1.len()
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}
