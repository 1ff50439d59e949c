//! Fault injection over sealed EPGs.
//!
//! Injecting into a node marks it corrupted and lets corruption flow forward
//! along propagation edges in insertion order. In worst-case mode every
//! corrupted input corrupts the consumer, which must reproduce the global
//! impact exactly. In probabilistic mode each corrupted in-edge propagates
//! independently with probability `p`, which can only lower the observed
//! impact.
//!
//! Probabilistic runs draw from `ChaCha8Rng::seed_from_u64(seed)`, one
//! uniform `f64` per examined edge, visiting corrupted nodes in ascending
//! order and their successors in ascending order. Same seed, same outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::epg::{NodeId, SealedEpg};
use crate::impact::{impact_exact, ImpactVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("propagation probability must be in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("impact vector has {got} entries for a graph of {expected} nodes")]
    EstimateMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionOutcome {
    pub injected: NodeId,
    /// Corrupted nodes in ascending order; always contains `injected`.
    pub corrupted: Vec<NodeId>,
    pub impact_observed: f64,
    pub impact_estimated: f64,
}

impl InjectionOutcome {
    pub fn within_bound(&self) -> bool {
        self.impact_observed <= self.impact_estimated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub node: NodeId,
    pub impact_estimated: f64,
    pub impact_observed: f64,
}

/// Worst-case injection into every node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Nodes whose observed impact differs from the estimate.
    pub mismatches: Vec<NodeId>,
}

impl SweepReport {
    pub fn is_tight(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Injection driver bound to one graph and its impact estimate.
pub struct FaultSimulator<'g> {
    graph: &'g SealedEpg,
    estimates: ImpactVector,
}

impl<'g> FaultSimulator<'g> {
    /// Uses the exact backend for the estimate.
    pub fn new(graph: &'g SealedEpg) -> Self {
        FaultSimulator {
            graph,
            estimates: impact_exact(graph),
        }
    }

    pub fn with_estimates(graph: &'g SealedEpg, estimates: ImpactVector) -> Result<Self, SimError> {
        if estimates.len() != graph.node_count() {
            return Err(SimError::EstimateMismatch {
                expected: graph.node_count(),
                got: estimates.len(),
            });
        }
        Ok(FaultSimulator { graph, estimates })
    }

    pub fn estimates(&self) -> &ImpactVector {
        &self.estimates
    }

    fn check(&self, v: NodeId) -> Result<(), SimError> {
        if self.graph.contains(v) {
            Ok(())
        } else {
            Err(SimError::UnknownNode(v))
        }
    }

    fn outcome(&self, v: NodeId, corrupted: &[bool]) -> InjectionOutcome {
        let weights = self.graph.weights();
        let mut observed = 0.0;
        let mut nodes = Vec::new();
        for (u, _) in corrupted.iter().enumerate().skip(v.index()).filter(|(_, c)| **c) {
            observed += weights[u];
            nodes.push(NodeId::new(u));
        }
        InjectionOutcome {
            injected: v,
            corrupted: nodes,
            impact_observed: observed,
            impact_estimated: self.estimates[v],
        }
    }

    /// Every corrupted input corrupts the output.
    pub fn inject_worst(&self, v: NodeId) -> Result<InjectionOutcome, SimError> {
        self.check(v)?;
        let mut corrupted = vec![false; self.graph.node_count()];
        corrupted[v.index()] = true;
        for u in v.index()..self.graph.node_count() {
            if corrupted[u] {
                for &s in self.graph.raw_successors(u) {
                    corrupted[s as usize] = true;
                }
            }
        }
        Ok(self.outcome(v, &corrupted))
    }

    /// Each corrupted in-edge propagates independently with probability `p`.
    pub fn inject_prob(&self, v: NodeId, p: f64, seed: u64) -> Result<InjectionOutcome, SimError> {
        self.check(v)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidProbability(p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut corrupted = vec![false; self.graph.node_count()];
        corrupted[v.index()] = true;
        for u in v.index()..self.graph.node_count() {
            if corrupted[u] {
                for &s in self.graph.raw_successors(u) {
                    if rng.gen::<f64>() < p {
                        corrupted[s as usize] = true;
                    }
                }
            }
        }
        Ok(self.outcome(v, &corrupted))
    }

    /// Worst-case injection into every node, compared against the estimate.
    ///
    /// Simulates 64 injections at once: bit `i` of a node's lane word is set
    /// when the fault injected into the `i`-th node of the batch reached it.
    pub fn sweep(&self) -> SweepReport {
        let n = self.graph.node_count();
        let weights = self.graph.weights();
        let mut lanes = vec![0u64; n];
        let mut rows = Vec::with_capacity(n);
        let mut mismatches = Vec::new();

        for start in (0..n).step_by(64) {
            let end = (start + 64).min(n);
            lanes[start..].fill(0);
            for (i, lane) in lanes[start..end].iter_mut().enumerate() {
                *lane = 1 << i;
            }
            let mut observed = [0.0f64; 64];
            for u in start..n {
                let mask = lanes[u];
                if mask == 0 {
                    continue;
                }
                let mut bits = mask;
                while bits != 0 {
                    observed[bits.trailing_zeros() as usize] += weights[u];
                    bits &= bits - 1;
                }
                for &s in self.graph.raw_successors(u) {
                    lanes[s as usize] |= mask;
                }
            }
            for (i, v) in (start..end).enumerate() {
                let node = NodeId::new(v);
                let estimated = self.estimates[node];
                if observed[i] != estimated {
                    mismatches.push(node);
                }
                rows.push(SweepRow {
                    node,
                    impact_estimated: estimated,
                    impact_observed: observed[i],
                });
            }
        }
        SweepReport { rows, mismatches }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epg::EpgBuilder;
    use crate::impact::impact_fast_bound;

    fn graph(weights: &[f64], edges: &[(usize, usize)]) -> SealedEpg {
        let mut g = EpgBuilder::new();
        for &w in weights {
            g.add_node(w).unwrap();
        }
        for &(a, b) in edges {
            g.add_edge(NodeId::new(a), NodeId::new(b)).unwrap();
        }
        g.seal().unwrap()
    }

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId::new(i)).collect()
    }

    fn diamond() -> SealedEpg {
        graph(&[1.0; 4], &[(0, 1), (0, 2), (1, 3), (2, 3)])
    }

    #[test]
    fn worst_case_on_diamond() {
        let g = diamond();
        let sim = FaultSimulator::new(&g);
        let o = sim.inject_worst(NodeId::new(0)).unwrap();
        assert_eq!(o.corrupted, ids(&[0, 1, 2, 3]));
        assert_eq!((o.impact_observed, o.impact_estimated), (4.0, 4.0));

        let sink = sim.inject_worst(NodeId::new(3)).unwrap();
        assert_eq!(sink.corrupted, ids(&[3]));
        assert_eq!(sink.impact_observed, 1.0);
        assert_eq!(
            sim.inject_worst(NodeId::new(4)),
            Err(SimError::UnknownNode(NodeId::new(4)))
        );
    }

    #[test]
    fn chain_middle() {
        let g = graph(&[1.0; 3], &[(0, 1), (1, 2)]);
        let o = FaultSimulator::new(&g).inject_worst(NodeId::new(1)).unwrap();
        assert_eq!((o.impact_observed, o.impact_estimated), (2.0, 2.0));
    }

    #[test]
    fn probabilistic_limits() {
        let g = diamond();
        let sim = FaultSimulator::new(&g);
        let v = NodeId::new(0);
        for seed in 0..20 {
            assert_eq!(
                sim.inject_prob(v, 1.0, seed).unwrap(),
                sim.inject_worst(v).unwrap()
            );
            let none = sim.inject_prob(v, 0.0, seed).unwrap();
            assert_eq!(none.corrupted, ids(&[0]));
            assert_eq!(none.impact_observed, 1.0);
            let half = sim.inject_prob(v, 0.5, seed).unwrap();
            assert!(half.impact_observed <= 4.0);
            assert!(half.corrupted.contains(&v));
            assert_eq!(half, sim.inject_prob(v, 0.5, seed).unwrap());
        }
        assert_eq!(
            sim.inject_prob(v, 1.5, 0),
            Err(SimError::InvalidProbability(1.5))
        );
        assert!(sim.inject_prob(v, f64::NAN, 0).is_err());
    }

    #[test]
    fn sweep_is_tight_and_detects_bad_estimates() {
        let g = diamond();
        let report = FaultSimulator::new(&g).sweep();
        assert!(report.is_tight());
        assert_eq!(report.rows.len(), 4);

        let empty = graph(&[], &[]);
        assert!(FaultSimulator::new(&empty).sweep().rows.is_empty());

        // the fast bound over-counts node 0
        let loose = FaultSimulator::with_estimates(&g, impact_fast_bound(&g)).unwrap();
        assert_eq!(loose.sweep().mismatches, ids(&[0]));

        assert!(FaultSimulator::with_estimates(&g, ImpactVector::new(vec![1.0])).is_err());
    }

    #[test]
    fn sweep_batches_beyond_64_nodes() {
        // long chain crossing several lane batches, with a few shortcuts
        let n = 200;
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.extend([(3, 150), (70, 199), (0, 64)]);
        let weights: Vec<f64> = (0..n).map(|i| (i % 5) as f64 * 0.5).collect();
        let g = graph(&weights, &edges);
        let sim = FaultSimulator::new(&g);
        let report = sim.sweep();
        assert!(report.is_tight());
        for row in &report.rows {
            assert_eq!(
                row.impact_observed,
                sim.inject_worst(row.node).unwrap().impact_observed
            );
        }
    }
}
