//! The `schelling` command line.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 when a
//! computation fails (no convergence, instance too large, i/o).

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_run_config, BetaList, RunConfig};
use crate::dynamics::Simulation;
use crate::error::{Error, Result};
use crate::exact::{
    beta_sweep, build_matrix, enumerate, project_to_configs, project_to_pairs, stationary_with,
    EnumerationLimits, SolveMethod, SolveOptions,
};
use crate::lattice::TorusGrid;
use crate::scheduler::SchedulerSpec;
use crate::stability::{
    build_resistance_graph, cross_check, max_segregated, stochastically_stable, SegregationLimits,
    StableReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "schelling", version, about = "Schelling segregation on a torus: simulation and exact analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of the composite chain.
    Simulate(SimulateArgs),
    /// Exact stationary distribution for each β.
    Exact(AnalysisArgs),
    /// Stochastically stable states via minimum-resistance trees.
    Stable(StableArgs),
    /// Minimum bichromatic edge count and its minimizers.
    Minseg(MinsegArgs),
    /// Checks a scheduler row file.
    ValidateScheduler(ValidateArgs),
    /// Mass on maximally segregated configurations across β.
    Sweep(AnalysisArgs),
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config step count.
    #[arg(long)]
    steps: Option<u64>,
    /// Write a PPM snapshot every k steps, starting with the initial grid.
    #[arg(long, value_name = "K")]
    snapshot_every: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Direct,
    Power,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long)]
    config: PathBuf,
    /// β list such as `1,2,4` or `geometric(1,16,5)`; defaults to the config.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Allow enumerating the 4×4 torus.
    #[arg(long)]
    allow_large: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct StableArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also compare with the exact stationary distribution at this β.
    #[arg(long, value_name = "BETA")]
    check_beta: Option<f64>,
    #[arg(long)]
    allow_large: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct MinsegArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    red: usize,
    /// Allow the 5×5 torus.
    #[arg(long)]
    allow_large: bool,
    /// Print every minimizer.
    #[arg(long)]
    list: bool,
    /// Also write minseg.json to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    file: PathBuf,
    /// Torus side; inferred from the largest coordinate when omitted.
    #[arg(long)]
    n: Option<usize>,
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Exact(a) => exact(a, argv),
        Command::Stable(a) => stable(a, argv),
        Command::Minseg(a) => minseg(a),
        Command::ValidateScheduler(a) => validate_scheduler(a),
        Command::Sweep(a) => sweep(a, argv),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: &'a [String],
    rng: &'static str,
    config: &'a RunConfig,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    betas: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_every: Option<u64>,
}

fn write_manifest(dir: &Path, command: &str, argv: &[String], config: &RunConfig, betas: Option<&[f64]>, snapshot_every: Option<u64>) -> Result<()> {
    let m = Manifest {
        tool: "schelling",
        version: VERSION,
        command,
        argv,
        rng: "ChaCha8 (rand_chacha), key from seed_from_u64(seed), stream 0",
        config,
        seed: config.seed,
        betas,
        snapshot_every,
    };
    crate::io::write_json(&dir.join("manifest.json"), &m)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn simulate(a: SimulateArgs, argv: &[String]) -> Result<()> {
    let mut cfg = load_run_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if a.snapshot_every == Some(0) {
        return Err(Error::InvalidRunConfig(vec!["--snapshot-every must be at least 1".into()]));
    }
    let mut sim = Simulation::from_run_config(&cfg, 0)?;
    let dir = &a.out.out;
    create_dir(dir)?;
    write_manifest(dir, "simulate", argv, &cfg, None, a.snapshot_every)?;

    let snap_dir = dir.join("snapshots");
    let grid = sim.grid().clone();
    if a.snapshot_every.is_some() {
        create_dir(&snap_dir)?;
        snapshot(&snap_dir, &grid, 0, &sim.state().config)?;
    }
    let trace_path = dir.join("trace.jsonl");
    let file = File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    let mut trace = BufWriter::new(file);
    sim.run(cfg.steps, |rec, config| {
        if cfg.record_every > 0 && rec.step % cfg.record_every == 0 {
            serde_json::to_writer(&mut trace, rec)?;
            trace.write_all(b"\n").map_err(|e| Error::io(&trace_path, e))?;
        }
        if let Some(k) = a.snapshot_every {
            if rec.step % k == 0 {
                snapshot(&snap_dir, &grid, rec.step, config)?;
            }
        }
        Ok(())
    })?;
    trace.flush().map_err(|e| Error::io(&trace_path, e))?;
    let summary = sim.summary();
    crate::io::write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{} steps, {} swaps, final potential {}, final bichromatic edges {}",
        summary.steps, summary.swaps, summary.final_potential, summary.final_bichromatic_edges
    );
    Ok(())
}

fn snapshot(dir: &Path, grid: &TorusGrid, step: u64, config: &crate::model::Configuration) -> Result<()> {
    crate::io::write_ppm_file(&dir.join(format!("step_{step:08}.ppm")), grid, config)
}

fn solve_options(m: MethodArg) -> SolveOptions {
    let method = match m {
        MethodArg::Auto => SolveMethod::Auto,
        MethodArg::Direct => SolveMethod::Direct,
        MethodArg::Power => SolveMethod::Power,
    };
    SolveOptions { method, ..Default::default() }
}

fn enumeration_limits(allow_large: bool) -> EnumerationLimits {
    if allow_large {
        EnumerationLimits::large()
    } else {
        EnumerationLimits::default()
    }
}

/// Loads the config and resolves the β list, command line first.
fn analysis_setup(a: &AnalysisArgs) -> Result<(RunConfig, Vec<f64>, TorusGrid, SchedulerSpec)> {
    let mut cfg = load_run_config(&a.config)?;
    if let Some(b) = &a.betas {
        cfg.betas = Some(BetaList::parse(b)?);
        cfg.validate()?;
    }
    let betas = cfg.beta_values();
    let grid = cfg.grid()?;
    let spec = cfg.scheduler.build(&grid)?;
    Ok((cfg, betas, grid, spec))
}

#[derive(Serialize)]
struct ConfigProbability {
    config: String,
    probability: f64,
}

#[derive(Serialize)]
struct PairProbability {
    pair: [[usize; 2]; 2],
    probability: f64,
}

#[derive(Serialize)]
struct StationaryEntry {
    beta: f64,
    method: SolveMethod,
    iterations: usize,
    residual: f64,
    mass_on_max_segregated: f64,
    configurations: Vec<ConfigProbability>,
    pair_marginal: Vec<PairProbability>,
}

#[derive(Serialize)]
struct StationaryReport {
    n: usize,
    red_count: usize,
    scheduler: String,
    states: usize,
    results: Vec<StationaryEntry>,
}

fn exact(a: AnalysisArgs, argv: &[String]) -> Result<()> {
    let (cfg, betas, grid, spec) = analysis_setup(&a)?;
    let space = enumerate(&grid, cfg.red_count, &spec, enumeration_limits(a.allow_large))?;
    let q = max_segregated(&grid, cfg.red_count, SegregationLimits::large())?;
    let q_set: HashSet<u64> = q.masks().iter().copied().collect();
    let opts = solve_options(a.method);
    let cells = grid.num_vertices();
    let mut results = Vec::with_capacity(betas.len());
    for &beta in &betas {
        let params = cfg.params.with_beta(beta);
        let dist = stationary_with(&build_matrix(&space, &spec, &params), &opts)?;
        let configs = project_to_configs(&space, &dist.probs);
        let pairs = project_to_pairs(&space, &dist.probs);
        let mass = configs.mass_on(&q_set);
        println!("beta {beta}: mass on max-segregated {mass:.6}, residual {:.3e}", dist.residual);
        results.push(StationaryEntry {
            beta,
            method: dist.method,
            iterations: dist.iterations,
            residual: dist.residual,
            mass_on_max_segregated: mass,
            configurations: configs
                .masks()
                .iter()
                .zip(configs.probs())
                .map(|(&m, &p)| ConfigProbability {
                    config: crate::model::Configuration::from_mask(m, cells).to_string(),
                    probability: p,
                })
                .collect(),
            pair_marginal: pairs
                .iter()
                .enumerate()
                .map(|(e, &p)| {
                    let pr = grid.pair(e);
                    PairProbability { pair: [[pr.a().row, pr.a().col], [pr.b().row, pr.b().col]], probability: p }
                })
                .collect(),
        });
    }
    let dir = &a.out.out;
    create_dir(dir)?;
    write_manifest(dir, "exact", argv, &cfg, Some(&betas), None)?;
    let report = StationaryReport {
        n: grid.side(),
        red_count: cfg.red_count,
        scheduler: spec.label(),
        states: space.len(),
        results,
    };
    crate::io::write_json(&dir.join("stationary.json"), &report)
}

fn sweep(a: AnalysisArgs, argv: &[String]) -> Result<()> {
    let (cfg, betas, grid, spec) = analysis_setup(&a)?;
    let table = beta_sweep(
        &grid,
        cfg.red_count,
        &spec,
        &cfg.params,
        &betas,
        enumeration_limits(a.allow_large),
        &solve_options(a.method),
    )?;
    let dir = &a.out.out;
    create_dir(dir)?;
    write_manifest(dir, "sweep", argv, &cfg, Some(&betas), None)?;
    table.write_files(dir)?;
    for row in &table.rows {
        println!("beta {}: mass on max-segregated {:.6}", row.beta, row.mass_on_q);
    }
    Ok(())
}

#[derive(Serialize)]
struct StableOutput {
    #[serde(flatten)]
    report: StableReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<crate::stability::CrossCheckReport>,
}

fn stable(a: StableArgs, argv: &[String]) -> Result<()> {
    let cfg = load_run_config(&a.config)?;
    if let Some(b) = a.check_beta {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParams(format!("--check-beta must be positive, got {b}")));
        }
    }
    let grid = cfg.grid()?;
    let spec = cfg.scheduler.build(&grid)?;
    let space = enumerate(&grid, cfg.red_count, &spec, enumeration_limits(a.allow_large))?;
    let graph = build_resistance_graph(&space, &spec, &cfg.params);
    let stable = stochastically_stable(&space, &graph)?;
    let q = max_segregated(&grid, cfg.red_count, SegregationLimits::large())?;
    let report = StableReport::new(&space, &spec, &stable, &q);
    let check = a.check_beta.map(|b| cross_check(&space, &spec, &cfg.params, b)).transpose()?;
    println!(
        "{} stable states in {} configurations, min resistance {}, subset of max-segregated: {}",
        report.stable_state_count,
        report.stable_configurations.len(),
        report.min_resistance,
        report.subset_of_max_segregated
    );
    if let Some(c) = &check {
        println!("cross-check at beta {}: agrees {}", c.beta, c.agrees());
    }
    let dir = &a.out.out;
    create_dir(dir)?;
    write_manifest(dir, "stable", argv, &cfg, None, None)?;
    crate::io::write_json(&dir.join("stable.json"), &StableOutput { report, cross_check: check })
}

#[derive(Serialize)]
struct MinsegOutput {
    n: usize,
    red_count: usize,
    min_bichromatic_edges: usize,
    argmin_count: usize,
    argmin: Vec<String>,
}

fn minseg(a: MinsegArgs) -> Result<()> {
    let grid = TorusGrid::new(a.n)?;
    if a.red > grid.num_vertices() {
        return Err(Error::InvalidConfiguration(format!(
            "red count {} exceeds {} cells",
            a.red,
            grid.num_vertices()
        )));
    }
    let limits = if a.allow_large { SegregationLimits::large() } else { SegregationLimits::default() };
    let q = max_segregated(&grid, a.red, limits)?;
    println!("min_bichromatic_edges {}", q.min_bichromatic());
    println!("argmin_count {}", q.len());
    let argmin: Vec<String> = q.configurations().map(|c| c.to_string()).collect();
    if a.list {
        for c in &argmin {
            println!("{c}");
        }
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        let out = MinsegOutput {
            n: a.n,
            red_count: a.red,
            min_bichromatic_edges: q.min_bichromatic(),
            argmin_count: q.len(),
            argmin,
        };
        crate::io::write_json(&dir.join("minseg.json"), &out)?;
    }
    Ok(())
}

/// One more than the largest coordinate in a scheduler file.
fn infer_side(text: &str) -> usize {
    text.lines()
        .filter_map(|l| l.split('#').next())
        .flat_map(|l| l.split_whitespace().take(8).filter_map(|f| f.parse::<usize>().ok()).collect::<Vec<_>>())
        .max()
        .map_or(0, |m| m + 1)
}

fn validate_scheduler(a: ValidateArgs) -> Result<()> {
    let text = fs::read_to_string(&a.file).map_err(|e| Error::io(&a.file, e))?;
    let grid = TorusGrid::new(a.n.unwrap_or_else(|| infer_side(&text)))?;
    let spec = SchedulerSpec::parse(&grid, &text, &a.file)?;
    spec.validate().map_err(Error::InvalidScheduler)?;
    println!(
        "ok: {} pairs on the {}x{} torus, largest support {}",
        spec.num_pairs(),
        grid.side(),
        grid.side(),
        spec.max_support_len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn side_is_inferred_from_coordinates() {
        let text = "# comment\n0 0 0 1 0 0 0 1 0.5\n2 2 2 0 0 1 1 1 0.5 # tail 9\n";
        assert_eq!(infer_side(text), 3);
        assert_eq!(infer_side(""), 0);
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(main(["schelling", "minseg", "--n"]), 1);
        assert_eq!(main(["schelling", "bogus"]), 1);
        assert_eq!(main(["schelling", "--version"]), 0);
    }

    #[test]
    fn minseg_validation() {
        assert_eq!(main(["schelling", "minseg", "--n", "3", "--red", "10"]), 1);
        assert_eq!(main(["schelling", "minseg", "--n", "2", "--red", "1"]), 1);
        assert_eq!(main(["schelling", "minseg", "--n", "6", "--red", "3"]), 2);
        assert_eq!(main(["schelling", "minseg", "--n", "3", "--red", "3"]), 0);
    }
}
