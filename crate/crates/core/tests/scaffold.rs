mod common;

use causal_dc::datagen::sample_sem;
use causal_dc::dependence::{DependenceMeasure, MeasureKind};
use causal_dc::graph::{Skeleton, WeightedGraph};
use causal_dc::scaffold::{build_super_structure, max_spanning_tree};
use common::*;
use rand::Rng;

#[test]
fn chow_liu_recovers_a_chain() {
    let sem = chain_sem(10, 0.8);
    let truth = sem.skeleton();
    let m = DependenceMeasure::new(MeasureKind::Pearson);
    let hits = (0..100)
        .filter(|&s| build_super_structure(&sample_sem(&sem, 5000, 100 + s).unwrap(), &m).unwrap() == truth)
        .count();
    assert!(hits >= 95, "chain recovered in {hits}/100 seeds");
}

#[test]
fn p4_distinct_weights_match_all_sixteen_trees() {
    let trees = all_spanning_trees(4);
    assert_eq!(trees.len(), 16);
    let mut r = rng(7);
    for _ in 0..200 {
        let mut w = WeightedGraph::zeros(4);
        for i in 0..4 {
            for j in i + 1..4 {
                w.set(i, j, r.random::<f64>());
            }
        }
        let best = trees.iter().max_by(|a, b| w.total(a).total_cmp(&w.total(b))).unwrap();
        assert_eq!(&max_spanning_tree(&w), best);
    }
}

#[test]
fn equal_weights_pick_lexicographic_edges() {
    let w = WeightedGraph::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
    assert_eq!(max_spanning_tree(&w), Skeleton::from_edges(3, [(0, 1), (0, 2)]).unwrap());
}
