//! Zero-noise analysis: the resistance digraph over enumerated states,
//! minimum-resistance rooted trees, stochastically stable states, and the
//! exhaustive maximal-segregation oracle.
//!
//! Resistances are kept as integers in units of `r`. Every swap gain is an
//! integer number of `r`, so ties between rooted trees are detected exactly.

use std::collections::{BTreeMap, HashSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::arborescence::{min_in_tree, WeightedEdge};
use crate::error::{Error, Result};
use crate::exact::{build_matrix, masks_with_popcount, project_to_configs, stationary, StateSpace};
use crate::lattice::{TorusGrid, Vertex};
use crate::model::{resistance_units, Configuration, ModelParams, MoveKind};
use crate::scheduler::SchedulerSpec;

/// Size caps for the exhaustive segregation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegregationLimits {
    pub max_side: usize,
}

impl Default for SegregationLimits {
    fn default() -> Self {
        Self { max_side: 4 }
    }
}

impl SegregationLimits {
    pub fn large() -> Self {
        Self { max_side: 5 }
    }
}

/// Configurations with the fewest bichromatic edges for a red count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxSegregatedSet {
    cells: usize,
    red_count: usize,
    min_bichromatic: usize,
    masks: Vec<u64>,
}

impl MaxSegregatedSet {
    pub fn min_bichromatic(&self) -> usize {
        self.min_bichromatic
    }

    pub fn red_count(&self) -> usize {
        self.red_count
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn contains_mask(&self, mask: u64) -> bool {
        self.masks.binary_search(&mask).is_ok()
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        config.len() == self.cells && config.mask().is_some_and(|m| self.contains_mask(m))
    }

    pub fn configurations(&self) -> impl Iterator<Item = Configuration> + '_ {
        self.masks.iter().map(|&m| Configuration::from_mask(m, self.cells))
    }
}

/// Exhaustive minimum of the bichromatic edge count over all placements of
/// `red_count` red cells, with the full set of minimizers.
pub fn max_segregated(grid: &TorusGrid, red_count: usize, limits: SegregationLimits) -> Result<MaxSegregatedSet> {
    if grid.side() > limits.max_side {
        return Err(Error::TooLarge { what: "torus side", actual: grid.side(), limit: limits.max_side });
    }
    let cells = grid.num_vertices();
    if red_count > cells {
        return Err(Error::InvalidParams(format!("red_count {red_count} exceeds {cells} cells")));
    }
    let edge_masks: Vec<(u64, u64)> = grid.edge_indices().map(|(a, b)| (1 << a, 1 << b)).collect();
    let mut best = usize::MAX;
    let mut masks = Vec::new();
    for m in masks_with_popcount(cells, red_count) {
        let bi = edge_masks.iter().filter(|&&(a, b)| (m & a != 0) != (m & b != 0)).count();
        if bi < best {
            best = bi;
            masks.clear();
        }
        if bi == best {
            masks.push(m);
        }
    }
    Ok(MaxSegregatedSet { cells, red_count, min_bichromatic: best, masks })
}

/// One edge per feasible move out of each state, weighted by its
/// resistance in units of `r`.
#[derive(Debug, Clone)]
pub struct ResistanceGraph {
    r: f64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    units: Vec<u32>,
}

impl ResistanceGraph {
    /// Builds from `(from, to, units)` triples.
    pub fn from_edges(num_nodes: usize, r: f64, edges: &[(usize, usize, u32)]) -> Self {
        let mut sorted: Vec<(usize, usize, u32)> = edges.to_vec();
        sorted.sort_by_key(|&(f, _, _)| f);
        let mut offsets = vec![0; num_nodes + 1];
        for &(f, _, _) in &sorted {
            offsets[f + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        Self {
            r,
            offsets,
            targets: sorted.iter().map(|&(_, t, _)| t as u32).collect(),
            units: sorted.iter().map(|&(_, _, u)| u).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `(edge index, to, resistance units)` for edges leaving `node`.
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        (self.offsets[node]..self.offsets[node + 1]).map(|k| (k, self.targets[k] as usize, self.units[k]))
    }

    pub fn edge_units(&self, edge: usize) -> u32 {
        self.units[edge]
    }

    pub fn edge_resistance(&self, edge: usize) -> f64 {
        self.units[edge] as f64 * self.r
    }

    /// Same graph with every resistance multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> Self {
        Self {
            r: self.r,
            offsets: self.offsets.clone(),
            targets: self.targets.clone(),
            units: self.units.iter().map(|&u| u * factor).collect(),
        }
    }

    fn weighted_edges(&self) -> Vec<WeightedEdge> {
        (0..self.num_nodes())
            .flat_map(|v| self.out_edges(v).map(move |(_, to, u)| WeightedEdge { from: v, to, weight: u as u64 }))
            .collect()
    }
}

/// Edge `(s,e) → (s',e')` for every `e'` in the support of `D_e` and both
/// outcomes at `e'` (one edge when they coincide). Scheduler weights carry
/// no resistance.
pub fn build_resistance_graph(space: &StateSpace, spec: &SchedulerSpec, params: &ModelParams) -> ResistanceGraph {
    let supports: Vec<Vec<usize>> = (0..space.num_pairs())
        .map(|e| spec.row(e).into_iter().filter(|&(_, w)| w > 0.0).map(|(j, _)| j).collect())
        .collect();
    let mut offsets = Vec::with_capacity(space.len() + 1);
    offsets.push(0);
    let mut targets = Vec::new();
    let mut units = Vec::new();
    for ci in 0..space.num_configs() {
        for support in &supports {
            for &next in support {
                let (gain, target) = space.swap_move(ci, next);
                if target != ci {
                    targets.push(space.index(target, next) as u32);
                    units.push(resistance_units(MoveKind::Swap, gain));
                    targets.push(space.index(ci, next) as u32);
                    units.push(resistance_units(MoveKind::Stay, gain));
                } else {
                    targets.push(space.index(ci, next) as u32);
                    units.push(0);
                }
            }
            offsets.push(targets.len());
        }
    }
    ResistanceGraph { r: params.r, offsets, targets, units }
}

/// A spanning tree in which every state has a unique path to `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceTree {
    pub root: usize,
    /// Tree edge (index into the graph) leaving each non-root state.
    pub parent_edges: Vec<Option<usize>>,
    pub total_units: u64,
    pub r: f64,
}

impl ResistanceTree {
    pub fn total_resistance(&self) -> f64 {
        self.total_units as f64 * self.r
    }
}

pub fn min_arborescence(graph: &ResistanceGraph, root: usize) -> Result<ResistanceTree> {
    let edges = graph.weighted_edges();
    min_arborescence_on(graph, &edges, root)
}

fn min_arborescence_on(graph: &ResistanceGraph, edges: &[WeightedEdge], root: usize) -> Result<ResistanceTree> {
    let tree = min_in_tree(graph.num_nodes(), edges, root).map_err(Error::Unreachable)?;
    Ok(ResistanceTree { root, parent_edges: tree.out_edge, total_units: tree.total, r: graph.r })
}

/// Closed classes of the zero-resistance subgraph: strongly connected sets
/// of states that no zero-resistance edge leaves.
pub fn zero_resistance_classes(graph: &ResistanceGraph) -> Vec<Vec<usize>> {
    let n = graph.num_nodes();
    let mut g = DiGraph::<(), ()>::with_capacity(n, graph.num_edges());
    for _ in 0..n {
        g.add_node(());
    }
    for v in 0..n {
        for (_, to, u) in graph.out_edges(v) {
            if u == 0 && to != v {
                g.add_edge((v as u32).into(), (to as u32).into(), ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut component = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for m in members {
            component[m.index()] = c;
        }
    }
    let mut closed = vec![true; sccs.len()];
    for v in 0..n {
        for (_, to, u) in graph.out_edges(v) {
            if u == 0 && component[to] != component[v] {
                closed[component[v]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .into_iter()
        .enumerate()
        .filter(|(c, _)| closed[*c])
        .map(|(_, members)| {
            let mut m: Vec<usize> = members.into_iter().map(|x| x.index()).collect();
            m.sort_unstable();
            m
        })
        .collect();
    classes.sort();
    classes
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableStates {
    /// Sorted state indices.
    pub states: Vec<usize>,
    pub min_resistance_units: u64,
    pub r: f64,
    /// Number of arborescence solves performed.
    pub roots_solved: usize,
}

impl StableStates {
    pub fn min_resistance(&self) -> f64 {
        self.min_resistance_units as f64 * self.r
    }

    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }

    /// Distinct configuration indices among the stable states.
    pub fn config_indices(&self, space: &StateSpace) -> Vec<usize> {
        let mut v: Vec<usize> = self.states.iter().map(|&s| space.state(s).0).collect();
        v.dedup();
        v
    }
}

/// States that root a rooted tree of globally minimal resistance.
///
/// Only members of closed zero-resistance classes can attain the minimum,
/// and all members of one class attain the same value (a zero-resistance
/// path re-roots a tree at no cost), so one tree is solved per class.
pub fn stochastically_stable(space: &StateSpace, graph: &ResistanceGraph) -> Result<StableStates> {
    assert_eq!(space.len(), graph.num_nodes());
    let edges = graph.weighted_edges();
    let classes = zero_resistance_classes(graph);
    let mut best = u64::MAX;
    let mut states = Vec::new();
    for class in &classes {
        let t = min_arborescence_on(graph, &edges, class[0])?;
        if t.total_units < best {
            best = t.total_units;
            states.clear();
        }
        if t.total_units == best {
            states.extend_from_slice(class);
        }
    }
    states.sort_unstable();
    Ok(StableStates { states, min_resistance_units: best, r: graph.r, roots_solved: classes.len() })
}

/// Solves a rooted tree for every state. Quadratic; meant for checking
/// [`stochastically_stable`] on small graphs.
pub fn stochastically_stable_exhaustive(graph: &ResistanceGraph) -> Result<StableStates> {
    let edges = graph.weighted_edges();
    let n = graph.num_nodes();
    let totals = (0..n)
        .map(|root| min_arborescence_on(graph, &edges, root).map(|t| t.total_units))
        .collect::<Result<Vec<_>>>()?;
    let best = totals.iter().copied().min().unwrap_or(0);
    let states = (0..n).filter(|&i| totals[i] == best).collect();
    Ok(StableStates { states, min_resistance_units: best, r: graph.r, roots_solved: n })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckReport {
    pub beta: f64,
    pub residual: f64,
    /// Stable configurations, as color strings.
    pub stable_configs: Vec<String>,
    /// The same number of configurations with the largest stationary mass.
    pub top_configs: Vec<String>,
    pub config_rank_agreement: bool,
    /// Whether the `|stable states|` heaviest states are exactly the stable states.
    pub state_rank_agreement: bool,
    /// Smallest stable-configuration mass minus largest other mass.
    pub config_mass_gap: f64,
    pub stable_mass: f64,
}

impl CrossCheckReport {
    pub fn agrees(&self) -> bool {
        self.config_rank_agreement && self.state_rank_agreement
    }

    pub fn ensure(self) -> Result<Self> {
        if self.agrees() {
            Ok(self)
        } else {
            Err(Error::Mismatch(format!(
                "stable configs {:?} but heaviest configs {:?} at beta {} (state ranks agree: {})",
                self.stable_configs, self.top_configs, self.beta, self.state_rank_agreement
            )))
        }
    }
}

/// Compares the arborescence-stable set with the heaviest states of the
/// exact stationary distribution at `beta_large`.
pub fn cross_check(space: &StateSpace, spec: &SchedulerSpec, params: &ModelParams, beta_large: f64) -> Result<CrossCheckReport> {
    let graph = build_resistance_graph(space, spec, params);
    let stable = stochastically_stable(space, &graph)?;
    let p = params.with_beta(beta_large);
    let dist = stationary(&build_matrix(space, spec, &p))?;
    let configs = project_to_configs(space, &dist.probs);

    let stable_cfg: HashSet<u64> =
        stable.config_indices(space).into_iter().map(|c| space.config_masks()[c]).collect();
    let ranked = configs.ranked();
    let k = stable_cfg.len();
    let top: HashSet<u64> = ranked.iter().take(k).map(|&(m, _)| m).collect();
    let min_stable = ranked.iter().filter(|(m, _)| stable_cfg.contains(m)).map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
    let max_other = ranked.iter().filter(|(m, _)| !stable_cfg.contains(m)).map(|&(_, p)| p).fold(0.0, f64::max);

    let mut state_rank: Vec<usize> = (0..space.len()).collect();
    state_rank.sort_by(|&a, &b| dist.probs[b].total_cmp(&dist.probs[a]).then(a.cmp(&b)));
    let mut top_states: Vec<usize> = state_rank[..stable.states.len()].to_vec();
    top_states.sort_unstable();

    let cells = space.grid().num_vertices();
    let show = |set: &HashSet<u64>| {
        let mut v: Vec<u64> = set.iter().copied().collect();
        v.sort_unstable();
        v.into_iter().map(|m| Configuration::from_mask(m, cells).to_string()).collect::<Vec<_>>()
    };
    Ok(CrossCheckReport {
        beta: beta_large,
        residual: dist.residual,
        stable_configs: show(&stable_cfg),
        top_configs: show(&top),
        config_rank_agreement: top == stable_cfg,
        state_rank_agreement: top_states == stable.states,
        config_mass_gap: min_stable - max_other,
        stable_mass: configs.mass_on(&stable_cfg),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StableConfigEntry {
    pub config: String,
    pub pairs: Vec<[Vertex; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegregationCertificate {
    pub min_bichromatic_edges: usize,
    pub argmin_count: usize,
}

/// Serializable summary of a stability analysis.
#[derive(Debug, Clone, Serialize)]
pub struct StableReport {
    pub n: usize,
    pub red_count: usize,
    pub scheduler: String,
    pub r: f64,
    pub states: usize,
    pub min_resistance: f64,
    pub min_resistance_units: u64,
    pub stable_state_count: usize,
    pub stable_configurations: Vec<StableConfigEntry>,
    pub max_segregated: SegregationCertificate,
    pub subset_of_max_segregated: bool,
    pub equals_max_segregated: bool,
}

impl StableReport {
    pub fn new(space: &StateSpace, spec: &SchedulerSpec, stable: &StableStates, q: &MaxSegregatedSet) -> Self {
        let grid = space.grid();
        let mut by_config: BTreeMap<usize, Vec<[Vertex; 2]>> = BTreeMap::new();
        for &s in &stable.states {
            let (c, e) = space.state(s);
            let p = grid.pair(e);
            by_config.entry(c).or_default().push([p.a(), p.b()]);
        }
        let masks: HashSet<u64> = by_config.keys().map(|&c| space.config_masks()[c]).collect();
        let subset = masks.iter().all(|&m| q.contains_mask(m));
        Self {
            n: grid.side(),
            red_count: space.red_count(),
            scheduler: spec.label(),
            r: stable.r,
            states: space.len(),
            min_resistance: stable.min_resistance(),
            min_resistance_units: stable.min_resistance_units,
            stable_state_count: stable.states.len(),
            stable_configurations: by_config
                .into_iter()
                .map(|(c, pairs)| StableConfigEntry { config: space.configuration(c).to_string(), pairs })
                .collect(),
            max_segregated: SegregationCertificate { min_bichromatic_edges: q.min_bichromatic(), argmin_count: q.len() },
            subset_of_max_segregated: subset,
            equals_max_segregated: subset && masks.len() == q.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{enumerate, EnumerationLimits};

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    #[test]
    fn segregation_small_cases() {
        let q = max_segregated(&grid(3), 0, SegregationLimits::default()).unwrap();
        assert_eq!(q.min_bichromatic(), 0);
        assert_eq!(q.masks(), &[0]);
        let q = max_segregated(&grid(3), 1, SegregationLimits::default()).unwrap();
        assert_eq!(q.min_bichromatic(), 4);
        assert_eq!(q.len(), 9);
        assert!(matches!(max_segregated(&grid(5), 3, SegregationLimits::default()), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn four_by_four_half_red_has_band_optimum() {
        let g = grid(4);
        let q = max_segregated(&g, 8, SegregationLimits::default()).unwrap();
        assert_eq!(q.min_bichromatic(), 8);
        let band = Configuration::parse("++++ ++++ ---- ----").unwrap();
        let vertical = Configuration::parse("++-- ++-- ++-- ++--").unwrap();
        assert!(q.contains(&band));
        assert!(q.contains(&vertical));
        assert!(!q.contains(&Configuration::checkerboard(&g)));
    }

    #[test]
    fn single_configuration_chain_is_all_stable() {
        let g = grid(3);
        let s = SchedulerSpec::uniform(&g);
        let space = enumerate(&g, 0, &s, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &s, &ModelParams::new(1.0, 1.0));
        let stable = stochastically_stable(&space, &graph).unwrap();
        assert_eq!(stable.states.len(), 36);
        assert_eq!(stable.min_resistance_units, 0);
    }

    #[test]
    fn outcome_edges_carry_zero_and_abs_gain() {
        let g = grid(3);
        let s = SchedulerSpec::contagion(&g, None).unwrap();
        let space = enumerate(&g, 3, &s, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &s, &ModelParams::new(1.0, 1.0));
        // direct count: per state, 2 edges per differently-colored scheduled pair, 1 otherwise
        let mut expected = 0;
        for st in 0..space.len() {
            let (c, e) = space.state(st);
            for (next, _) in s.row(e) {
                expected += if space.swap_move(c, next).1 == c { 1 } else { 2 };
            }
            let edges: Vec<_> = graph.out_edges(st).collect();
            assert!(edges.len() >= s.support_len(e));
            let mut k = 0;
            for (next, _) in s.row(e) {
                let (gain, target) = space.swap_move(c, next);
                if target == c {
                    assert_eq!(edges[k].2, 0);
                    k += 1;
                } else {
                    let (swap, stay) = (edges[k].2, edges[k + 1].2);
                    assert_eq!(swap.min(stay), 0);
                    assert_eq!(swap.max(stay), gain.unsigned_abs());
                    if gain > 0 {
                        assert_eq!(swap, 0);
                    }
                    k += 2;
                }
            }
        }
        assert_eq!(graph.num_edges(), expected);
    }

    #[test]
    fn class_pruning_matches_every_root() {
        let g = grid(3);
        for spec in [SchedulerSpec::uniform(&g), SchedulerSpec::contagion(&g, None).unwrap()] {
            for red in [1, 2] {
                let space = enumerate(&g, red, &spec, EnumerationLimits::default()).unwrap();
                let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
                let fast = stochastically_stable(&space, &graph).unwrap();
                let slow = stochastically_stable_exhaustive(&graph).unwrap();
                assert_eq!(fast.states, slow.states, "{} red={red}", spec.label());
                assert_eq!(fast.min_resistance_units, slow.min_resistance_units);
            }
        }
    }

    #[test]
    fn tree_is_spanning_and_consistent() {
        let g = grid(3);
        let s = SchedulerSpec::contagion(&g, None).unwrap();
        let space = enumerate(&g, 2, &s, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &s, &ModelParams::new(2.0, 1.0));
        let t = min_arborescence(&graph, 17).unwrap();
        assert!(t.parent_edges[17].is_none());
        let targets: Vec<usize> = (0..graph.num_nodes())
            .map(|v| t.parent_edges[v].map_or(v, |e| graph.out_edges(v).find(|&(k, _, _)| k == e).unwrap().1))
            .collect();
        for v in 0..graph.num_nodes() {
            let mut x = v;
            for _ in 0..graph.num_nodes() {
                x = targets[x];
            }
            assert_eq!(x, 17);
        }
        let sum: u64 = t.parent_edges.iter().flatten().map(|&e| graph.edge_units(e) as u64).sum();
        assert_eq!(sum, t.total_units);
        assert_eq!(t.total_resistance(), 2.0 * sum as f64);
    }
}
