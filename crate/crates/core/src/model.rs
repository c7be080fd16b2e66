//! Configurations, utilities, the potential, swaps, and the log-linear
//! response rule with its move resistances.
//!
//! Utilities are `u_i = r·w(x_i) + ε_i` where `w` is the local balance
//! (same-colored minus opposite-colored neighbors). Because local balances
//! are integers, every utility gain of a swap is an integer multiple of
//! `r`; the functions suffixed `_units` work in those integer units.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Pair, TorusGrid, Vertex};

pub const RED: i8 = 1;
pub const BLUE: i8 = -1;

/// Colors of every torus cell, indexed by linearized vertex. `+1` is red.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    colors: Vec<i8>,
}

impl Configuration {
    pub fn new(colors: Vec<i8>) -> Result<Self> {
        if let Some(i) = colors.iter().position(|&c| c != RED && c != BLUE) {
            return Err(Error::InvalidConfiguration(format!(
                "cell {i} has color {}, expected +1 or -1",
                colors[i]
            )));
        }
        Ok(Self { colors })
    }

    pub fn uniform(cells: usize, color: i8) -> Self {
        assert!(color == RED || color == BLUE);
        Self { colors: vec![color; cells] }
    }

    /// Proper two-coloring; only a valid checkerboard on even sides.
    pub fn checkerboard(grid: &TorusGrid) -> Self {
        let colors = (0..grid.num_vertices())
            .map(|i| {
                let v = grid.vertex(i);
                if (v.row + v.col) % 2 == 0 {
                    RED
                } else {
                    BLUE
                }
            })
            .collect();
        Self { colors }
    }

    /// Bit `i` of `mask` set means cell `i` is red.
    pub fn from_mask(mask: u64, cells: usize) -> Self {
        assert!(cells <= 64);
        let colors = (0..cells).map(|i| if mask >> i & 1 == 1 { RED } else { BLUE }).collect();
        Self { colors }
    }

    /// Inverse of [`Configuration::from_mask`]; `None` above 64 cells.
    pub fn mask(&self) -> Option<u64> {
        if self.colors.len() > 64 {
            return None;
        }
        Some(
            self.colors
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == RED)
                .fold(0u64, |m, (i, _)| m | 1 << i),
        )
    }

    /// Parses a row-major string of `+` (red) and `-` (blue); whitespace is ignored.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '+' | 'R' | 'r' => Ok(RED),
                '-' | '−' | 'B' | 'b' => Ok(BLUE),
                other => Err(Error::InvalidConfiguration(format!(
                    "unexpected character {other:?} in color string"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(|colors| Self { colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[i8] {
        &self.colors
    }

    pub fn color(&self, index: usize) -> i8 {
        self.colors[index]
    }

    pub fn red_count(&self) -> usize {
        self.colors.iter().filter(|&&c| c == RED).count()
    }

    pub(crate) fn swap_cells(&mut self, a: usize, b: usize) {
        self.colors.swap(a, b);
    }

    /// Exchanges red and blue everywhere.
    pub fn inverted(&self) -> Self {
        Self { colors: self.colors.iter().map(|&c| -c).collect() }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in &self.colors {
            f.write_str(if c == RED { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// `r`, the noise level `beta`, and per-agent offsets `eps`.
///
/// An empty `eps` stands for the all-zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new(1.0, 1.0)
    }
}

impl ModelParams {
    pub fn new(r: f64, beta: f64) -> Self {
        Self { r, beta, eps: Vec::new() }
    }

    pub fn with_eps(mut self, eps: Vec<f64>) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.r.is_finite() && self.r > 0.0) {
            problems.push(format!("r must be positive and finite, got {}", self.r));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            problems.push(format!("beta must be positive and finite, got {}", self.beta));
        }
        if !self.eps.is_empty() && self.eps.len() != grid.num_vertices() {
            problems.push(format!(
                "eps has {} entries, expected {}",
                self.eps.len(),
                grid.num_vertices()
            ));
        }
        if self.eps.iter().any(|e| !e.is_finite()) {
            problems.push("eps entries must be finite".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }

    pub fn eps_of(&self, agent: usize) -> f64 {
        self.eps.get(agent).copied().unwrap_or(0.0)
    }
}

/// Which agent stands on each cell. Agents carry their `ε` offset along
/// when they swap.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentPlacement {
    agent_at: Vec<u32>,
}

impl AgentPlacement {
    pub fn identity(cells: usize) -> Self {
        Self { agent_at: (0..cells as u32).collect() }
    }

    pub fn from_vec(agent_at: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; agent_at.len()];
        for &a in &agent_at {
            match seen.get_mut(a as usize) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::InvalidConfiguration(
                        "agent placement is not a permutation".into(),
                    ))
                }
            }
        }
        Ok(Self { agent_at })
    }

    pub fn agent_at(&self, index: usize) -> usize {
        self.agent_at[index] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.agent_at
    }

    pub(crate) fn swap_cells(&mut self, a: usize, b: usize) {
        self.agent_at.swap(a, b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Swap,
    Stay,
}

/// The outcome of scheduling `pair`: the two agents either swap or stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub pair: Pair,
}

/// Same-colored minus opposite-colored neighbors, in `{-4, -2, 0, 2, 4}`.
pub fn local_balance(grid: &TorusGrid, config: &Configuration, v: Vertex) -> i32 {
    balance_at(grid, config.colors(), grid.index(v))
}

pub(crate) fn balance_at(grid: &TorusGrid, colors: &[i8], v: usize) -> i32 {
    let c = colors[v] as i32;
    grid.neighbor_indices(v).iter().map(|&u| c * colors[u] as i32).sum()
}

/// `Σ_v w(v)`: twice the number of monochromatic minus bichromatic edges.
pub fn balance_sum(grid: &TorusGrid, config: &Configuration) -> i64 {
    (0..grid.num_vertices()).map(|v| balance_at(grid, config.colors(), v) as i64).sum()
}

pub fn bichromatic_edges(grid: &TorusGrid, config: &Configuration) -> usize {
    let c = config.colors();
    grid.edge_indices().filter(|&(a, b)| c[a] != c[b]).count()
}

pub fn utility(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    params: &ModelParams,
    v: Vertex,
) -> f64 {
    let i = grid.index(v);
    params.r * balance_at(grid, config.colors(), i) as f64 + params.eps_of(placement.agent_at(i))
}

/// `L(s) = Σ_i u_i(s)`.
pub fn potential(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    params: &ModelParams,
) -> f64 {
    (0..grid.num_vertices())
        .map(|i| utility(grid, config, placement, params, grid.vertex(i)))
        .sum()
}

/// Exchanges the colors and the agents at the two endpoints of `pair`.
pub fn apply_swap(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    pair: &Pair,
) -> (Configuration, AgentPlacement) {
    let (a, b) = (grid.index(pair.a()), grid.index(pair.b()));
    let mut config = config.clone();
    let mut placement = placement.clone();
    config.swap_cells(a, b);
    placement.swap_cells(a, b);
    (config, placement)
}

/// Change of `w(a) + w(b)` when the occupants of cells `a` and `b` swap.
///
/// This is the joint utility gain of the two scheduled agents in units of
/// `r`. It is always even, and zero for same-colored endpoints.
pub fn swap_gain_units(grid: &TorusGrid, colors: &[i8], a: usize, b: usize) -> i32 {
    let (ca, cb) = (colors[a] as i32, colors[b] as i32);
    if ca == cb {
        return 0;
    }
    let after = |x: usize| -> i32 {
        if x == a {
            cb
        } else if x == b {
            ca
        } else {
            colors[x] as i32
        }
    };
    let balance_after = |v: usize| -> i32 {
        let c = after(v);
        grid.neighbor_indices(v).iter().map(|&u| c * after(u)).sum()
    };
    let before = balance_at(grid, colors, a) + balance_at(grid, colors, b);
    balance_after(a) + balance_after(b) - before
}

/// `[u_a(T) + u_b(T)] − [u_a(S) + u_b(S)]` for the agents scheduled on
/// `pair`, where `T` is `S` with their positions exchanged.
///
/// The two offsets travel with the agents, so the `ε` sums before and after
/// hold the same two terms and cancel exactly.
pub fn pair_utility_delta(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    params: &ModelParams,
    pair: &Pair,
) -> f64 {
    let (a, b) = (grid.index(pair.a()), grid.index(pair.b()));
    let (agent_a, agent_b) = (placement.agent_at(a), placement.agent_at(b));
    let eps_before = params.eps_of(agent_a) + params.eps_of(agent_b);
    // after the swap agent_b stands on a, agent_a on b
    let eps_after = params.eps_of(agent_b) + params.eps_of(agent_a);
    params.r * swap_gain_units(grid, config.colors(), a, b) as f64 + (eps_after - eps_before)
}

/// `1 / (1 + e^{-x})` without overflow for large `|x|`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-linear response: probability that the scheduled agents swap.
pub fn swap_probability(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    params: &ModelParams,
    pair: &Pair,
) -> f64 {
    logistic(params.beta * pair_utility_delta(grid, config, placement, params, pair))
}

/// Probability of `kind` given the joint gain `delta` of swapping.
pub fn move_probability(kind: MoveKind, beta: f64, delta: f64) -> f64 {
    match kind {
        MoveKind::Swap => logistic(beta * delta),
        MoveKind::Stay => logistic(-beta * delta),
    }
}

/// Resistance of an outcome in units of `r`, given the swap gain in units of `r`.
pub fn resistance_units(kind: MoveKind, gain_units: i32) -> u32 {
    match kind {
        MoveKind::Swap => (-gain_units).max(0) as u32,
        MoveKind::Stay => gain_units.max(0) as u32,
    }
}

/// Exponent of `ε = e^{-β}` in the probability of `outcome`: the forgone
/// joint gain. Zero for neutral moves. Independent of `beta`.
pub fn move_resistance(
    grid: &TorusGrid,
    config: &Configuration,
    placement: &AgentPlacement,
    params: &ModelParams,
    outcome: &MoveOutcome,
) -> f64 {
    let delta = pair_utility_delta(grid, config, placement, params, &outcome.pair);
    match outcome.kind {
        MoveKind::Swap => (-delta).max(0.0),
        MoveKind::Stay => delta.max(0.0),
    }
}
