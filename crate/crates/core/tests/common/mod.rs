#![allow(dead_code)]

use epg_core::{EpgBuilder, NodeId, SealedEpg};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn graph(weights: &[f64], edges: &[(usize, usize)]) -> SealedEpg {
    let mut g = EpgBuilder::new();
    for &w in weights {
        g.add_node(w).unwrap();
    }
    for &(a, b) in edges {
        g.add_edge(NodeId::new(a), NodeId::new(b)).unwrap();
    }
    g.seal().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi DAG over insertion order.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64, unit: bool) -> SealedEpg {
    let weights: Vec<f64> = (0..n)
        .map(|_| if unit { 1.0 } else { f64::from(rng.gen_range(0u8..6)) })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    graph(&weights, &edges)
}

/// Forest of out-trees: every node has at most one parent, chosen among
/// earlier nodes.
pub fn random_out_forest(rng: &mut ChaCha8Rng, n: usize, unit: bool) -> SealedEpg {
    let weights: Vec<f64> = (0..n)
        .map(|_| if unit { 1.0 } else { f64::from(rng.gen_range(0u8..6)) })
        .collect();
    let mut edges = Vec::new();
    for child in 1..n {
        if rng.gen_bool(0.85) {
            edges.push((rng.gen_range(0..child), child));
        }
    }
    graph(&weights, &edges)
}

/// Independent reference: boolean transitive closure by Warshall's
/// algorithm, then a plain sum over each closure row.
pub fn warshall_impacts(g: &SealedEpg) -> Vec<f64> {
    let n = g.node_count();
    let mut reach = vec![vec![false; n]; n];
    for (a, b, _) in g.edges() {
        reach[a.index()][b.index()] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let w = g.weights();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j == i || reach[i][j])
                .fold(0.0, |acc, j| acc + w[j])
        })
        .collect()
}

/// Arbitrary DAG: a node count, integer-valued weights and forward edges.
pub fn arb_dag(max_nodes: usize) -> impl Strategy<Value = SealedEpg> {
    (1..=max_nodes).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..8, n),
            prop::collection::vec((0..n, 0..n), 0..n * 3),
        )
            .prop_map(|(weights, pairs)| {
                let weights: Vec<f64> = weights.into_iter().map(f64::from).collect();
                let edges: Vec<(usize, usize)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                graph(&weights, &edges)
            })
    })
}

/// Arbitrary DAG with fractional weights.
pub fn arb_real_dag(max_nodes: usize) -> impl Strategy<Value = SealedEpg> {
    (1..=max_nodes).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..10.0, n),
            prop::collection::vec((0..n, 0..n), 0..n * 3),
        )
            .prop_map(|(weights, pairs)| {
                let edges: Vec<(usize, usize)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                graph(&weights, &edges)
            })
    })
}
