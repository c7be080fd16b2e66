//! The composite chain on (configuration, last scheduled pair) and its
//! Monte Carlo engine.
//!
//! Randomness comes from ChaCha8 keyed by `seed_from_u64(seed)`. Replica
//! `k` of a seed uses stream `k` of the same key, so replicas never share
//! draws. A step consumes the scheduler's draws for the next pair and then
//! exactly one uniform `f64` for the swap decision.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lattice::{Pair, TorusGrid};
use crate::model::{
    balance_sum, logistic, swap_gain_units, AgentPlacement, Configuration, ModelParams, MoveKind,
    BLUE, RED,
};
use crate::scheduler::SchedulerSpec;

/// Configurations are counted per visit in the summary up to this side.
pub const VISIT_COUNT_MAX_SIDE: usize = 3;

/// The generator for replica `stream` of `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A state of the composite chain. `last_pair` indexes `grid.all_pairs()`.
///
/// `placement` is only tracked when someone asks for it: the offsets it
/// carries never influence the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub config: Configuration,
    pub placement: Option<AgentPlacement>,
    pub last_pair: usize,
}

impl ChainState {
    pub fn new(config: Configuration, last_pair: usize) -> Self {
        Self { config, placement: None, last_pair }
    }

    pub fn with_placement(mut self, placement: AgentPlacement) -> Self {
        self.placement = Some(placement);
        self
    }
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub pair: usize,
    pub kind: MoveKind,
    /// Joint utility gain of swapping, in units of `r`.
    pub gain_units: i32,
    /// Change of `Σ_v w(v)`; zero unless the colors actually moved.
    pub balance_delta: i64,
}

/// Change of `Σ_v w(v)` when the occupants of `a` and `b` swap, read off
/// the edges incident to `a` or `b`.
///
/// Every other edge keeps both colors, and the edge `a–b` (if any) only
/// exchanges its endpoints, so it is skipped.
pub fn balance_sum_delta(grid: &TorusGrid, colors: &[i8], a: usize, b: usize) -> i64 {
    let (ca, cb) = (colors[a] as i64, colors[b] as i64);
    if ca == cb {
        return 0;
    }
    let mut d = 0;
    for &x in grid.neighbor_indices(a).iter().filter(|&&x| x != b) {
        d += (cb - ca) * colors[x] as i64;
    }
    for &x in grid.neighbor_indices(b).iter().filter(|&&x| x != a) {
        d += (ca - cb) * colors[x] as i64;
    }
    // each edge appears in the balance of both endpoints
    2 * d
}

/// `L(T) − L(S)` where `T` is `state` with the endpoints of `pair` swapped.
///
/// The offsets only move between cells, so their total is unchanged and
/// the difference is carried entirely by the balance term.
pub fn incremental_potential_delta(
    grid: &TorusGrid,
    state: &ChainState,
    params: &ModelParams,
    pair: usize,
) -> f64 {
    let (a, b) = grid.pair_endpoints(pair);
    params.r * balance_sum_delta(grid, state.config.colors(), a, b) as f64
}

/// One transition of the composite chain: draw `e′ ~ D_{last_pair}`, then
/// swap its endpoints with the log-linear probability.
///
/// The `ε` terms cancel in the pair's joint gain, so only the integer gain
/// in units of `r` enters the swap probability.
pub fn step<R: Rng + ?Sized>(
    grid: &TorusGrid,
    spec: &SchedulerSpec,
    params: &ModelParams,
    state: &mut ChainState,
    rng: &mut R,
) -> StepResult {
    let pair = spec.next_pair(state.last_pair, rng);
    let (a, b) = grid.pair_endpoints(pair);
    let colors = state.config.colors();
    let gain_units = swap_gain_units(grid, colors, a, b);
    let u: f64 = rng.random();
    let swap = u < logistic(params.beta * params.r * gain_units as f64);
    let mut balance_delta = 0;
    if swap {
        balance_delta = balance_sum_delta(grid, colors, a, b);
        state.config.swap_cells(a, b);
        if let Some(p) = state.placement.as_mut() {
            p.swap_cells(a, b);
        }
    }
    state.last_pair = pair;
    let kind = if swap { MoveKind::Swap } else { MoveKind::Stay };
    StepResult { pair, kind, gain_units, balance_delta }
}

/// One line of `trace.jsonl`: the state after `step` transitions.
///
/// `scheduled_pair` holds the endpoints as `[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub scheduled_pair: [[usize; 2]; 2],
    pub outcome: MoveKind,
    pub potential: f64,
    pub bichromatic_edges: usize,
}

impl TraceRecord {
    pub fn pair(&self, grid: &TorusGrid) -> Option<Pair> {
        let [[r0, c0], [r1, c1]] = self.scheduled_pair;
        let (u, v) = (grid.wrap(r0 as i64, c0 as i64), grid.wrap(r1 as i64, c1 as i64));
        Pair::new(u, v)
    }
}

/// End-of-run statistics. Averages run over every visited state, the
/// initial one included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub red_count: usize,
    pub steps: u64,
    pub seed: u64,
    pub swaps: u64,
    pub initial_config: String,
    pub final_config: String,
    pub final_pair: [[usize; 2]; 2],
    pub final_potential: f64,
    pub final_bichromatic_edges: usize,
    pub mean_potential: f64,
    pub mean_bichromatic_edges: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_counts: Option<BTreeMap<String, u64>>,
}

/// A running chain with one-pass statistics.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: TorusGrid,
    spec: SchedulerSpec,
    params: ModelParams,
    state: ChainState,
    rng: ChaCha8Rng,
    seed: u64,
    initial: Configuration,
    steps: u64,
    swaps: u64,
    balance_sum: i64,
    eps_total: f64,
    sum_balance_sum: i128,
    sum_bichromatic: u128,
    visits: Option<HashMap<u64, u64>>,
}

impl Simulation {
    /// Starts from `config` with the initial pair drawn uniformly from
    /// replica `stream` of `seed`.
    pub fn new(
        spec: SchedulerSpec,
        params: ModelParams,
        config: Configuration,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        let mut rng = chain_rng(seed, stream);
        let last_pair = rng.random_range(0..spec.num_pairs());
        Self::from_state(spec, params, ChainState::new(config, last_pair), rng, seed)
    }

    /// Builds the scheduler and the initial configuration of `cfg`, which
    /// must already be valid. A random initial configuration is a shuffle
    /// drawn before the initial pair, from the same stream.
    pub fn from_run_config(cfg: &RunConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        let grid = TorusGrid::new(cfg.n)?;
        let spec = cfg.scheduler.build(&grid)?;
        let mut rng = chain_rng(cfg.seed, stream);
        let config = match cfg.initial.colors() {
            Some(s) => Configuration::parse(s)?,
            None => random_configuration(&grid, cfg.red_count, &mut rng),
        };
        let last_pair = rng.random_range(0..spec.num_pairs());
        let mut state = ChainState::new(config, last_pair);
        if !cfg.params.eps.is_empty() {
            state.placement = Some(AgentPlacement::identity(grid.num_vertices()));
        }
        Self::from_state(spec, cfg.params.clone(), state, rng, cfg.seed)
    }

    /// Continues from an explicit state with a caller-supplied generator.
    /// `seed` is only reported in the summary.
    pub fn from_state(
        spec: SchedulerSpec,
        params: ModelParams,
        state: ChainState,
        rng: ChaCha8Rng,
        seed: u64,
    ) -> Result<Self> {
        let grid = spec.grid().clone();
        params.validate(&grid)?;
        if state.config.len() != grid.num_vertices() {
            return Err(Error::InvalidConfiguration(format!(
                "configuration has {} cells, torus has {}",
                state.config.len(),
                grid.num_vertices()
            )));
        }
        if state.last_pair >= grid.num_pairs() {
            return Err(Error::InvalidConfiguration(format!(
                "last pair index {} out of range",
                state.last_pair
            )));
        }
        if let Some(p) = &state.placement {
            if p.as_slice().len() != grid.num_vertices() {
                return Err(Error::InvalidConfiguration("placement size mismatch".into()));
            }
        }
        let balance_sum = balance_sum(&grid, &state.config);
        let eps_total = params.eps.iter().sum();
        let visits = (grid.side() <= VISIT_COUNT_MAX_SIDE).then(HashMap::new);
        let mut sim = Self {
            initial: state.config.clone(),
            grid,
            spec,
            params,
            state,
            rng,
            seed,
            steps: 0,
            swaps: 0,
            balance_sum,
            eps_total,
            sum_balance_sum: 0,
            sum_bichromatic: 0,
            visits,
        };
        sim.accumulate();
        Ok(sim)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn spec(&self) -> &SchedulerSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn swaps(&self) -> u64 {
        self.swaps
    }

    /// `Σ_v w(v)` of the current configuration.
    pub fn balance_sum(&self) -> i64 {
        self.balance_sum
    }

    pub fn potential(&self) -> f64 {
        self.params.r * self.balance_sum as f64 + self.eps_total
    }

    pub fn bichromatic_edges(&self) -> usize {
        bichromatic_from_balance(&self.grid, self.balance_sum)
    }

    /// Visits per configuration mask, counting the initial state; `None`
    /// above [`VISIT_COUNT_MAX_SIDE`].
    pub fn visit_counts(&self) -> Option<&HashMap<u64, u64>> {
        self.visits.as_ref()
    }

    fn accumulate(&mut self) {
        self.sum_balance_sum += self.balance_sum as i128;
        self.sum_bichromatic += self.bichromatic_edges() as u128;
        if let Some(v) = self.visits.as_mut() {
            let mask = self.state.config.mask().expect("small torus fits a mask");
            *v.entry(mask).or_insert(0) += 1;
        }
    }

    /// Advances one step and returns its record.
    pub fn step(&mut self) -> TraceRecord {
        let res = step(&self.grid, &self.spec, &self.params, &mut self.state, &mut self.rng);
        self.steps += 1;
        if res.kind == MoveKind::Swap {
            self.swaps += 1;
        }
        self.balance_sum += res.balance_delta;
        self.accumulate();
        TraceRecord {
            step: self.steps,
            scheduled_pair: self.pair_coords(res.pair),
            outcome: res.kind,
            potential: self.potential(),
            bichromatic_edges: self.bichromatic_edges(),
        }
    }

    /// Runs `steps` transitions, handing every record and the configuration
    /// it describes to `observe`.
    pub fn run<F>(&mut self, steps: u64, mut observe: F) -> Result<()>
    where
        F: FnMut(&TraceRecord, &Configuration) -> Result<()>,
    {
        for _ in 0..steps {
            let rec = self.step();
            observe(&rec, &self.state.config)?;
        }
        Ok(())
    }

    fn pair_coords(&self, pair: usize) -> [[usize; 2]; 2] {
        let p = self.grid.pair(pair);
        [[p.a().row, p.a().col], [p.b().row, p.b().col]]
    }

    pub fn summary(&self) -> Summary {
        let states = (self.steps + 1) as f64;
        let mean_balance = self.sum_balance_sum as f64 / states;
        let visit_counts = self.visits.as_ref().map(|v| {
            let cells = self.grid.num_vertices();
            v.iter().map(|(&m, &c)| (Configuration::from_mask(m, cells).to_string(), c)).collect()
        });
        Summary {
            n: self.grid.side(),
            red_count: self.state.config.red_count(),
            steps: self.steps,
            seed: self.seed,
            swaps: self.swaps,
            initial_config: self.initial.to_string(),
            final_config: self.state.config.to_string(),
            final_pair: self.pair_coords(self.state.last_pair),
            final_potential: self.potential(),
            final_bichromatic_edges: self.bichromatic_edges(),
            mean_potential: self.params.r * mean_balance + self.eps_total,
            mean_bichromatic_edges: self.sum_bichromatic as f64 / states,
            visit_counts,
        }
    }
}

/// Output of [`run`]: the thinned trace and the summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: Summary,
}

/// Runs `cfg` on replica stream 0, keeping every `record_every`-th record
/// (none when it is 0).
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let mut sim = Simulation::from_run_config(cfg, 0)?;
    let mut trace = Vec::new();
    sim.run(cfg.steps, |rec, _| {
        if cfg.record_every > 0 && rec.step % cfg.record_every == 0 {
            trace.push(rec.clone());
        }
        Ok(())
    })?;
    Ok(RunOutput { trace, summary: sim.summary() })
}

/// Uniformly random configuration with `red` red cells.
pub fn random_configuration<R: Rng + ?Sized>(grid: &TorusGrid, red: usize, rng: &mut R) -> Configuration {
    let cells = grid.num_vertices();
    let mut colors: Vec<i8> = (0..cells).map(|i| if i < red { RED } else { BLUE }).collect();
    colors.shuffle(rng);
    Configuration::new(colors).expect("colors are ±1")
}

/// `B = n² − Σw/4`, since `Σw = 2·(#monochromatic − #bichromatic)` over `2n²` edges.
pub fn bichromatic_from_balance(grid: &TorusGrid, balance_sum: i64) -> usize {
    (grid.num_vertices() as i64 - balance_sum / 4) as usize
}

/// Replays the recorded pairs and outcomes from `initial` and returns the
/// first record whose potential or edge count disagrees.
///
/// Needs an unthinned trace.
pub fn replay_mismatch(
    grid: &TorusGrid,
    params: &ModelParams,
    initial: &Configuration,
    trace: &[TraceRecord],
) -> Option<u64> {
    let mut config = initial.clone();
    let eps_total: f64 = params.eps.iter().sum();
    for rec in trace {
        let pair = rec.pair(grid)?;
        if rec.outcome == MoveKind::Swap {
            config.swap_cells(grid.index(pair.a()), grid.index(pair.b()));
        }
        let potential = params.r * balance_sum(grid, &config) as f64 + eps_total;
        let bichromatic = crate::model::bichromatic_edges(grid, &config);
        if potential != rec.potential || bichromatic != rec.bichromatic_edges {
            return Some(rec.step);
        }
    }
    None
}
