use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cbt::dsl;
use cbt::sim::{self, DiningMode, ExperimentKind, ExperimentSpec, Grid, RunError};

#[derive(Parser)]
#[command(
    name = "cbt",
    version,
    about = "Run concurrent behavior trees and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one tree file until every action completes.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to 10 times the slowest action's nominal duration.
        #[arg(long)]
        max_cycles: Option<u64>,
        /// Where to write the per-cycle trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run a named experiment and write its CSV files into a directory.
    Experiment {
        /// absolute, relative, scaling-absolute, scaling-relative,
        /// predictability, dining-greedy or dining-fair
        name: String,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override a grid axis, e.g. `--grid noise=0.005,0.01`. Axes:
        /// barriers, delta, noise, children, pbar.
        #[arg(long, value_name = "KEY=V1,V2,..")]
        grid: Vec<String>,
        #[arg(long)]
        max_cycles: Option<u64>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Parse a tree file and print it in canonical form.
    Fmt { file: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            file,
            seed,
            max_cycles,
            trace,
            format: Format::Csv,
        } => run_tree(&file, seed, max_cycles, trace.as_deref()),
        Command::Experiment {
            name,
            runs,
            seed,
            out,
            grid,
            max_cycles,
            format: Format::Csv,
        } => {
            let Some(kind) = ExperimentKind::from_name(&name) else {
                bail!("unknown experiment `{name}`");
            };
            let mut spec = ExperimentSpec::new(kind);
            spec.runs = runs;
            spec.seed = seed;
            spec.cycle_cap = max_cycles;
            for g in &grid {
                apply_grid(&mut spec.grid, g)?;
            }
            experiment(&spec, &out)
        }
        Command::Fmt { file } => {
            let compiled = load(&file)?;
            print!("{}", dsl::print(&compiled.document));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(file: &Path) -> Result<dsl::Compiled> {
    let src = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let name = file.display().to_string();
    match dsl::compile(&src) {
        Ok(c) => {
            for w in &c.warnings {
                eprintln!("{}", w.render(&name));
            }
            Ok(c)
        }
        Err(diags) => {
            for d in &diags {
                eprintln!("{}", d.render(&name));
            }
            bail!("{name}: {} error(s)", diags.len());
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run_tree(
    file: &Path,
    seed: u64,
    cap: Option<u64>,
    trace_path: Option<&Path>,
) -> Result<ExitCode> {
    let tree = Arc::new(load(file)?.tree);
    let (trace, aborted) = match sim::run_once(&tree, seed, cap) {
        Ok(t) => (t, None),
        Err(RunError::Aborted { cap, trace }) => (*trace, Some(cap)),
    };
    match trace_path {
        Some(p) => sim::write_trace_csv(&trace, create(p)?)?,
        None => sim::write_trace_csv(&trace, io::stdout().lock())?,
    }
    if let Some(cap) = aborted {
        eprintln!("aborted: not complete after {cap} cycles");
        return Ok(ExitCode::from(2));
    }
    eprintln!("completed in {} cycles", trace.cycles());
    Ok(ExitCode::SUCCESS)
}

fn experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExitCode> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if spec.kind.is_dining() {
        let mode = if spec.kind == ExperimentKind::DiningGreedy {
            DiningMode::Greedy
        } else {
            DiningMode::Fair
        };
        return match sim::run_dining(mode, spec.cycle_cap) {
            Ok(o) => {
                sim::write_dining_csv(&o, create(&out.join("trace.csv"))?)?;
                sim::write_allocations_csv(&o.tree, &o.log, create(&out.join("allocations.csv"))?)?;
                eprintln!("all batteries charged after {} cycles", o.trace.cycles());
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("aborted: {e}");
                Ok(ExitCode::from(2))
            }
        };
    }
    let result = match sim::run_experiment(spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("aborted: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let mut runs = create(&out.join("runs.csv"))?;
    sim::write_runs_csv(&result, &mut runs)?;
    runs.flush()?;
    let mut summary = create(&out.join("summary.csv"))?;
    sim::write_summary_csv(&result, &mut summary)?;
    summary.flush()?;
    eprintln!(
        "{}: {} cells, {} runs each, written to {}",
        result.name,
        result.cells.len(),
        spec.runs,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn apply_grid(grid: &mut Grid, arg: &str) -> Result<()> {
    let Some((key, values)) = arg.split_once('=') else {
        bail!("grid override `{arg}` is not KEY=V1,V2,..");
    };
    let nums = || -> Result<Vec<f64>> {
        values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad value `{v}` for {key}"))
            })
            .collect()
    };
    let counts = || -> Result<Vec<usize>> {
        values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad value `{v}` for {key}"))
            })
            .collect()
    };
    match key.trim() {
        "barriers" => grid.barriers = counts()?,
        "delta" | "deltas" => {
            let d = nums()?;
            if let Some(bad) = d.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                bail!("delta {bad} is outside [0, 1]");
            }
            grid.deltas = d;
        }
        "noise" | "noises" => {
            let w = nums()?;
            if let Some(bad) = w.iter().find(|w| w.is_nan() || **w < 0.0) {
                bail!("noise {bad} must be non-negative");
            }
            grid.noises = w;
        }
        "children" => {
            let c = counts()?;
            if c.contains(&0) {
                bail!("child counts must be at least 1");
            }
            grid.children = c;
        }
        "pbar" | "levels" => {
            let l = nums()?;
            if let Some(bad) = l.iter().find(|l| !(0.0..=1.0).contains(*l)) {
                bail!("progress level {bad} is outside [0, 1]");
            }
            grid.levels = l;
        }
        other => bail!("unknown grid axis `{other}`"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_overrides() {
        let mut g = Grid::default();
        apply_grid(&mut g, "noise=0.1,0.2").unwrap();
        apply_grid(&mut g, "barriers=0,9").unwrap();
        assert_eq!(g.noises, vec![0.1, 0.2]);
        assert_eq!(g.barriers, vec![0, 9]);
        assert!(apply_grid(&mut g, "delta=2").is_err());
        assert!(apply_grid(&mut g, "speed=1").is_err());
        assert!(apply_grid(&mut g, "noise").is_err());
        assert!(apply_grid(&mut g, "noise=-0.1").is_err());
        assert!(apply_grid(&mut g, "children=0,2").is_err());
    }
}
