//! Exhaustive analysis of small instances: enumeration of `(configuration,
//! last pair)` states, the sparse transition matrix, stationary solves and
//! β-sweeps.
//!
//! Agent identities and `ε` offsets are left out of the state: neither the
//! swap probabilities nor the resistances depend on them.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::model::{logistic, swap_gain_units, Configuration, ModelParams};
use crate::scheduler::SchedulerSpec;
use crate::stability::{max_segregated, MaxSegregatedSet, SegregationLimits};

/// Tolerance on matrix row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Contract on `‖πP − π‖₁`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Size caps for enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_side: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_side: 3 }
    }
}

impl EnumerationLimits {
    /// Admits the 4×4 torus (about 1.5M states with balanced colors).
    pub fn large() -> Self {
        Self { max_side: 4 }
    }
}

/// All configurations with a fixed red count, crossed with all pairs.
///
/// State `(c, e)` has index `c * num_pairs + e`, where `c` indexes the
/// configuration masks in increasing order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    grid: TorusGrid,
    red_count: usize,
    configs: Vec<u64>,
    num_pairs: usize,
    // per (config, pair): swap gain in units of r, and the config after swapping
    moves: Vec<(i32, u32)>,
}

impl StateSpace {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn red_count(&self) -> usize {
        self.red_count
    }

    pub fn len(&self) -> usize {
        self.configs.len() * self.num_pairs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    pub fn config_masks(&self) -> &[u64] {
        &self.configs
    }

    pub fn configuration(&self, config_index: usize) -> Configuration {
        Configuration::from_mask(self.configs[config_index], self.grid.num_vertices())
    }

    pub fn config_index(&self, mask: u64) -> Option<usize> {
        self.configs.binary_search(&mask).ok()
    }

    pub fn index(&self, config_index: usize, pair_index: usize) -> usize {
        config_index * self.num_pairs + pair_index
    }

    /// `(config index, pair index)` of a state.
    pub fn state(&self, index: usize) -> (usize, usize) {
        (index / self.num_pairs, index % self.num_pairs)
    }

    /// Swap gain (units of `r`) and resulting configuration index when the
    /// pair `pair_index` is scheduled in configuration `config_index`.
    pub fn swap_move(&self, config_index: usize, pair_index: usize) -> (i32, usize) {
        let (gain, target) = self.moves[config_index * self.num_pairs + pair_index];
        (gain, target as usize)
    }
}

/// Enumerates every `(configuration, pair)` with `red_count` red cells.
pub fn enumerate(
    grid: &TorusGrid,
    red_count: usize,
    spec: &SchedulerSpec,
    limits: EnumerationLimits,
) -> Result<StateSpace> {
    if grid.side() > limits.max_side {
        return Err(Error::TooLarge { what: "torus side", actual: grid.side(), limit: limits.max_side });
    }
    let cells = grid.num_vertices();
    if red_count > cells {
        return Err(Error::InvalidParams(format!("red_count {red_count} exceeds {cells} cells")));
    }
    if spec.num_pairs() != grid.num_pairs() {
        return Err(Error::InvalidParams("scheduler was built for a different torus".into()));
    }
    let configs = masks_with_popcount(cells, red_count);
    let num_pairs = grid.num_pairs();
    let mut moves = Vec::with_capacity(configs.len() * num_pairs);
    let mut colors = vec![0i8; cells];
    for &mask in &configs {
        for (i, c) in colors.iter_mut().enumerate() {
            *c = if mask >> i & 1 == 1 { 1 } else { -1 };
        }
        for p in 0..num_pairs {
            let (a, b) = grid.pair_endpoints(p);
            let gain = swap_gain_units(grid, &colors, a, b);
            let target = if colors[a] == colors[b] { mask } else { mask ^ (1 << a | 1 << b) };
            let ti = configs.binary_search(&target).expect("swap leaves the color count unchanged");
            moves.push((gain, ti as u32));
        }
    }
    Ok(StateSpace { grid: grid.clone(), red_count, configs, num_pairs, moves })
}

/// All `cells`-bit masks with exactly `ones` bits set, increasing.
pub fn masks_with_popcount(cells: usize, ones: usize) -> Vec<u64> {
    assert!(cells <= 63);
    if ones == 0 {
        return vec![0];
    }
    if ones > cells {
        return Vec::new();
    }
    let limit = 1u64 << cells;
    let mut out = Vec::new();
    let mut m = (1u64 << ones) - 1;
    while m < limit {
        out.push(m);
        // next mask with the same popcount
        let low = m & m.wrapping_neg();
        let ripple = m + low;
        m = (((ripple ^ m) >> 2) / low) | ripple;
    }
    out
}

/// Row-stochastic matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds from explicit rows of `(column, probability)`.
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for &(j, p) in row {
                cols.push(j as u32);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().zip(&self.vals[span]).map(|(&j, &p)| (j as usize, p))
    }

    /// `P[i][j]`, summing duplicate entries.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, p)| p).sum()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.row(i).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `x P`, accumulated row by row in index order.
    pub fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += xi * self.vals[k];
            }
        }
    }

    /// `‖x P − x‖₁`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.left_multiply(x, &mut y);
        y.iter().zip(x).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// `P[(s,e) → (s',e')] = D_e(e') · (probability of the outcome at e' in s)`.
pub fn build_matrix(space: &StateSpace, spec: &SchedulerSpec, params: &ModelParams) -> TransitionMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..space.num_pairs).map(|e| spec.row(e)).collect();
    let x_unit = params.beta * params.r;
    let mut row_ptr = Vec::with_capacity(space.len() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for ci in 0..space.num_configs() {
        for e in 0..space.num_pairs {
            for &(next, w) in &rows[e] {
                let (gain, target) = space.swap_move(ci, next);
                if target == ci {
                    cols.push(space.index(ci, next) as u32);
                    vals.push(w);
                } else {
                    let x = x_unit * gain as f64;
                    cols.push(space.index(target, next) as u32);
                    vals.push(w * logistic(x));
                    cols.push(space.index(ci, next) as u32);
                    vals.push(w * logistic(-x));
                }
            }
            row_ptr.push(cols.len());
        }
    }
    TransitionMatrix { row_ptr, cols, vals }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Direct when the dimension is at most `direct_limit`, power iteration otherwise.
    Auto,
    /// Dense LU on `(Pᵀ − I)` with one equation replaced by normalization.
    Direct,
    Power,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub change_tolerance: f64,
    pub direct_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Auto,
            max_iterations: 1_000_000,
            residual_tolerance: RESIDUAL_TOLERANCE,
            change_tolerance: 1e-14,
            direct_limit: 8_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryDistribution> {
    stationary_with(matrix, &SolveOptions::default())
}

pub fn stationary_with(matrix: &TransitionMatrix, opts: &SolveOptions) -> Result<StationaryDistribution> {
    let n = matrix.dim();
    let method = match opts.method {
        SolveMethod::Auto if n <= opts.direct_limit => SolveMethod::Direct,
        SolveMethod::Auto => SolveMethod::Power,
        m => m,
    };
    match method {
        SolveMethod::Direct => {
            let mut probs = solve_direct(matrix);
            // A few power steps remove the rounding left by the LU solve.
            let polish = power_iterate(matrix, &mut probs, 50, 0.0);
            let residual = matrix.residual(&probs);
            if residual > opts.residual_tolerance {
                return Err(Error::NoConvergence { iterations: polish, residual });
            }
            Ok(StationaryDistribution { probs, residual, method, iterations: polish })
        }
        _ => {
            let mut probs = vec![1.0 / n as f64; n];
            let iterations = power_iterate(matrix, &mut probs, opts.max_iterations, opts.change_tolerance);
            let residual = matrix.residual(&probs);
            if residual > opts.residual_tolerance {
                return Err(Error::NoConvergence { iterations, residual });
            }
            Ok(StationaryDistribution { probs, residual, method: SolveMethod::Power, iterations })
        }
    }
}

fn solve_direct(matrix: &TransitionMatrix) -> Vec<f64> {
    let n = matrix.dim();
    let mut a = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, p) in matrix.row(i) {
            a[(j, i)] += p;
        }
    }
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = Mat::<f64>::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let x = a.partial_piv_lu().solve(&b);
    let mut probs: Vec<f64> = (0..n).map(|i| x[(i, 0)].max(0.0)).collect();
    normalize(&mut probs);
    probs
}

fn normalize(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
}

/// Iterates `x ← xP` until the L1 change drops below `change_tolerance` or
/// stalls at the rounding floor. Returns the iteration count.
fn power_iterate(matrix: &TransitionMatrix, x: &mut Vec<f64>, max_iterations: usize, change_tolerance: f64) -> usize {
    let mut y = vec![0.0; x.len()];
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for it in 1..=max_iterations {
        matrix.left_multiply(x, &mut y);
        if it % 64 == 0 {
            normalize(&mut y);
        }
        let change: f64 = y.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(x, &mut y);
        if change <= change_tolerance {
            normalize(x);
            return it;
        }
        if change < best * 0.999 {
            best = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 2_000 && best <= RESIDUAL_TOLERANCE * 1e-2 {
                normalize(x);
                return it;
            }
        }
    }
    normalize(x);
    max_iterations
}

/// Stationary mass per configuration, aligned with [`StateSpace::config_masks`].
#[derive(Debug, Clone)]
pub struct ConfigDistribution {
    cells: usize,
    masks: Vec<u64>,
    probs: Vec<f64>,
}

impl ConfigDistribution {
    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.masks.binary_search(&mask).map(|i| self.probs[i]).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mass_on(&self, set: &HashSet<u64>) -> f64 {
        self.masks.iter().zip(&self.probs).filter(|(m, _)| set.contains(m)).map(|(_, p)| p).sum()
    }

    /// Configurations by decreasing mass, ties by mask.
    pub fn ranked(&self) -> Vec<(u64, f64)> {
        let mut v: Vec<(u64, f64)> = self.masks.iter().copied().zip(self.probs.iter().copied()).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn top(&self, k: usize) -> Vec<(Configuration, f64)> {
        self.ranked()
            .into_iter()
            .take(k)
            .map(|(m, p)| (Configuration::from_mask(m, self.cells), p))
            .collect()
    }
}

/// Sums the pair component out of a state distribution.
pub fn project_to_configs(space: &StateSpace, dist: &[f64]) -> ConfigDistribution {
    let probs = dist.chunks(space.num_pairs).map(|c| c.iter().sum()).collect();
    ConfigDistribution { cells: space.grid.num_vertices(), masks: space.configs.clone(), probs }
}

/// Sums the configuration component out of a state distribution.
pub fn project_to_pairs(space: &StateSpace, dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.num_pairs];
    for (i, p) in dist.iter().enumerate() {
        out[i % space.num_pairs] += p;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedConfig {
    pub config: String,
    pub mask: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub mass_on_q: f64,
    pub residual: f64,
    pub top: Vec<RankedConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaSweep {
    pub n: usize,
    pub red_count: usize,
    pub scheduler: String,
    pub states: usize,
    pub min_bichromatic_edges: usize,
    pub max_segregated_count: usize,
    pub rows: Vec<SweepRow>,
}

/// One stationary solve per β; reports the mass on maximally segregated
/// configurations and the five heaviest configurations.
pub fn beta_sweep(
    grid: &TorusGrid,
    red_count: usize,
    spec: &SchedulerSpec,
    params: &ModelParams,
    betas: &[f64],
    limits: EnumerationLimits,
    opts: &SolveOptions,
) -> Result<BetaSweep> {
    let space = enumerate(grid, red_count, spec, limits)?;
    let q: MaxSegregatedSet = max_segregated(grid, red_count, SegregationLimits::default())?;
    let q_set: HashSet<u64> = q.masks().iter().copied().collect();
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let p = params.with_beta(beta);
        p.validate(grid)?;
        let matrix = build_matrix(&space, spec, &p);
        let dist = stationary_with(&matrix, opts)?;
        let configs = project_to_configs(&space, &dist.probs);
        let top = configs
            .ranked()
            .into_iter()
            .take(5)
            .map(|(m, prob)| RankedConfig {
                config: Configuration::from_mask(m, grid.num_vertices()).to_string(),
                mask: format!("{m:#x}"),
                probability: prob,
            })
            .collect();
        rows.push(SweepRow { beta, mass_on_q: configs.mass_on(&q_set), residual: dist.residual, top });
    }
    Ok(BetaSweep {
        n: grid.side(),
        red_count,
        scheduler: spec.label(),
        states: space.len(),
        min_bichromatic_edges: q.min_bichromatic(),
        max_segregated_count: q.len(),
        rows,
    })
}

impl BetaSweep {
    /// Flat table: `beta, mass_on_Q`, then `(config hash, probability)` columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let k = self.rows.iter().map(|r| r.top.len()).max().unwrap_or(0);
        let mut header = vec!["beta".to_string(), "mass_on_Q".to_string()];
        for i in 1..=k {
            header.push(format!("config{i}"));
            header.push(format!("prob{i}"));
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.beta.to_string(), row.mass_on_q.to_string()];
            for t in &row.top {
                rec.push(t.mask.clone());
                rec.push(t.probability.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_files(&self, dir: &Path) -> Result<()> {
        let json = dir.join("sweep.json");
        crate::io::write_json(&json, self)?;
        let csv_path = dir.join("sweep.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
