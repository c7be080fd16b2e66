use std::collections::HashSet;

use schelling_core::exact::{enumerate, EnumerationLimits, StateSpace};
use schelling_core::lattice::TorusGrid;
use schelling_core::model::{Configuration, ModelParams};
use schelling_core::scheduler::SchedulerSpec;
use schelling_core::stability::{
    build_resistance_graph, max_segregated, min_arborescence, stochastically_stable, SegregationLimits,
};

fn grid3() -> TorusGrid {
    TorusGrid::new(3).unwrap()
}

fn schedulers(g: &TorusGrid) -> Vec<SchedulerSpec> {
    vec![SchedulerSpec::uniform(g), SchedulerSpec::contagion(g, None).unwrap()]
}

fn translate_state(space: &StateSpace, s: usize, dr: usize, dc: usize) -> usize {
    let g = space.grid();
    let (ci, pi) = space.state(s);
    let config = space.configuration(ci);
    let mut colors = vec![0i8; g.num_vertices()];
    for i in 0..g.num_vertices() {
        colors[g.translate(i, dr, dc)] = config.color(i);
    }
    let mask = Configuration::new(colors).unwrap().mask().unwrap();
    let (a, b) = g.pair_endpoints(pi);
    let pj = g.pair_index_of(g.translate(a, dr, dc), g.translate(b, dr, dc));
    space.index(space.config_index(mask).unwrap(), pj)
}

#[test]
fn stable_configurations_are_maximally_segregated() {
    let g = grid3();
    for red in 1..=8 {
        let q = max_segregated(&g, red, SegregationLimits::default()).unwrap();
        for spec in schedulers(&g) {
            let space = enumerate(&g, red, &spec, EnumerationLimits::default()).unwrap();
            let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
            let stable = stochastically_stable(&space, &graph).unwrap();
            for ci in stable.config_indices(&space) {
                assert!(q.contains_mask(space.config_masks()[ci]), "red {red}, {}", spec.label());
            }
        }
    }
}

#[test]
fn stable_set_is_invariant_under_rescaling() {
    let g = grid3();
    let spec = SchedulerSpec::contagion(&g, None).unwrap();
    let space = enumerate(&g, 3, &spec, EnumerationLimits::default()).unwrap();
    let base = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
    let stable = stochastically_stable(&space, &base).unwrap();
    let other_r = build_resistance_graph(&space, &spec, &ModelParams::new(2.5, 1.0));
    let s_r = stochastically_stable(&space, &other_r).unwrap();
    assert_eq!(s_r.states, stable.states);
    assert!((s_r.min_resistance() - 2.5 * stable.min_resistance()).abs() < 1e-12);
    let scaled = stochastically_stable(&space, &base.scaled(7)).unwrap();
    assert_eq!(scaled.states, stable.states);
    assert_eq!(scaled.min_resistance_units, 7 * stable.min_resistance_units);
}

#[test]
fn stable_set_is_closed_under_translation() {
    let g = grid3();
    for spec in schedulers(&g) {
        let space = enumerate(&g, 3, &spec, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
        let stable = stochastically_stable(&space, &graph).unwrap();
        let set: HashSet<usize> = stable.states.iter().copied().collect();
        for &s in &stable.states {
            for (dr, dc) in [(0, 1), (1, 0), (1, 2)] {
                assert!(set.contains(&translate_state(&space, s, dr, dc)));
            }
        }
    }
}

#[test]
fn translated_roots_have_equal_tree_resistance() {
    let g = grid3();
    let spec = SchedulerSpec::contagion(&g, Some(0.5)).unwrap();
    let space = enumerate(&g, 2, &spec, EnumerationLimits::default()).unwrap();
    let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
    for root in [0, 100, 555] {
        let t = translate_state(&space, root, 2, 1);
        let a = min_arborescence(&graph, root).unwrap();
        let b = min_arborescence(&graph, t).unwrap();
        assert_eq!(a.total_units, b.total_units);
    }
}

#[test]
fn stable_sets_for_three_by_three() {
    let g = grid3();
    for spec in schedulers(&g) {
        // three reds: one full line, six ways, reached at resistance 20
        let space = enumerate(&g, 3, &spec, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
        let stable = stochastically_stable(&space, &graph).unwrap();
        assert_eq!(stable.config_indices(&space).len(), 6);
        assert_eq!(stable.min_resistance_units, 20);
        // four reds: every maximally segregated configuration is stable
        let space = enumerate(&g, 4, &spec, EnumerationLimits::default()).unwrap();
        let graph = build_resistance_graph(&space, &spec, &ModelParams::new(1.0, 1.0));
        let stable = stochastically_stable(&space, &graph).unwrap();
        let q = max_segregated(&g, 4, SegregationLimits::default()).unwrap();
        assert_eq!(stable.config_indices(&space).len(), q.len());
    }
}
