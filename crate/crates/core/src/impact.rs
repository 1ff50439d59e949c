//! Global impact computation.
//!
//! `m_global(v) = m_local(v) + sum of m_local(u) over distinct descendants u`.
//!
//! Three backends compute it:
//!
//! - [`impact_oracle`] runs one traversal per node. `O(V * (V + E))`, used as
//!   ground truth.
//! - [`impact_exact`] builds reachability bitsets in reverse insertion order,
//!   one range of target nodes at a time, so peak memory is
//!   `chunk * V` bits instead of `V * V`.
//! - [`impact_fast_bound`] sums children's values without deduplication. It
//!   runs in `O(V + E)` and over-counts shared descendants.
//!
//! The oracle and the exact backend add weights in ascending node order,
//! starting from `v` itself, so they agree bit for bit for any weights.

use std::ops::Index;
use std::str::FromStr;

use crate::epg::{NodeId, SealedEpg};

/// Default number of target nodes per bitset range.
pub const DEFAULT_CHUNK_NODES: usize = 4096;

/// Per-node global impact, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpactVector(Vec<f64>);

impl ImpactVector {
    pub fn new(values: Vec<f64>) -> Self {
        ImpactVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, v: NodeId) -> Option<f64> {
        self.0.get(v.index()).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

impl Index<NodeId> for ImpactVector {
    type Output = f64;

    fn index(&self, v: NodeId) -> &f64 {
        &self.0[v.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImpactBackend {
    Oracle,
    #[default]
    Exact,
    FastBound,
}

impl ImpactBackend {
    pub fn compute(self, g: &SealedEpg) -> ImpactVector {
        match self {
            ImpactBackend::Oracle => impact_oracle(g),
            ImpactBackend::Exact => impact_exact(g),
            ImpactBackend::FastBound => impact_fast_bound(g),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImpactBackend::Oracle => "oracle",
            ImpactBackend::Exact => "exact",
            ImpactBackend::FastBound => "fast",
        }
    }
}

impl FromStr for ImpactBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ImpactBackend::Oracle),
            "exact" => Ok(ImpactBackend::Exact),
            "fast" => Ok(ImpactBackend::FastBound),
            other => Err(format!(
                "unknown backend `{other}` (expected oracle, exact or fast)"
            )),
        }
    }
}

/// Reference backend: one depth-first traversal per node.
pub fn impact_oracle(g: &SealedEpg) -> ImpactVector {
    let n = g.node_count();
    let weights = g.weights();
    let mut visited = vec![false; n];
    let mut stack = Vec::new();
    let mut found = Vec::new();
    let values = (0..n)
        .map(|v| {
            g.walk_descendants(v, &mut visited, &mut stack, &mut found);
            found.sort_unstable();
            found
                .iter()
                .fold(weights[v], |acc, &u| acc + weights[u as usize])
        })
        .collect();
    ImpactVector(values)
}

/// Exact backend with the default chunk size.
pub fn impact_exact(g: &SealedEpg) -> ImpactVector {
    impact_exact_chunked(g, DEFAULT_CHUNK_NODES)
}

/// Exact backend processing target nodes in ranges of `chunk_nodes`.
///
/// For a target range `[lo, hi)` only nodes below `hi` can reach it, so each
/// pass keeps `hi * ceil(chunk / 64)` words. The result does not depend on
/// `chunk_nodes`; a value of 0 is treated as 1.
pub fn impact_exact_chunked(g: &SealedEpg, chunk_nodes: usize) -> ImpactVector {
    let n = g.node_count();
    let weights = g.weights();
    let chunk = chunk_nodes.max(1);
    let unit = weights.iter().all(|&w| w == 1.0);
    let mut values = vec![0.0f64; n];
    let mut reach: Vec<u64> = Vec::new();

    let mut lo = 0;
    while lo < n {
        let hi = (lo + chunk).min(n);
        let words = (hi - lo).div_ceil(64);
        reach.clear();
        reach.resize(hi * words, 0);

        for v in (0..hi).rev() {
            // Successors have larger indices, so their rows sit after v's.
            let (head, tail) = reach.split_at_mut((v + 1) * words);
            let row = &mut head[v * words..];
            if v >= lo {
                let bit = v - lo;
                row[bit / 64] |= 1u64 << (bit % 64);
            }
            for &s in g.raw_successors(v) {
                let s = s as usize;
                if s >= hi {
                    break;
                }
                let off = (s - v - 1) * words;
                for (dst, src) in row.iter_mut().zip(&tail[off..off + words]) {
                    *dst |= *src;
                }
            }

            if unit {
                let count: u32 = row.iter().map(|w| w.count_ones()).sum();
                values[v] += f64::from(count);
            } else {
                let mut acc = values[v];
                for (wi, &word) in row.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        let b = bits.trailing_zeros() as usize;
                        acc += weights[lo + wi * 64 + b];
                        bits &= bits - 1;
                    }
                }
                values[v] = acc;
            }
        }
        lo = hi;
    }
    ImpactVector(values)
}

/// Over-approximation: `value(v) = m_local(v) + sum of value(c)` over distinct
/// children `c`. Exact on forests of out-trees.
pub fn impact_fast_bound(g: &SealedEpg) -> ImpactVector {
    let weights = g.weights();
    let mut values = vec![0.0f64; g.node_count()];
    for v in (0..g.node_count()).rev() {
        values[v] = g
            .raw_successors(v)
            .iter()
            .fold(weights[v], |acc, &c| acc + values[c as usize]);
    }
    ImpactVector(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epg::EpgBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64, unit: bool) -> SealedEpg {
        let weights: Vec<f64> = (0..n)
            .map(|_| if unit { 1.0 } else { rng.gen_range(0.0..4.0) })
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

    const DIAMOND: &[(usize, usize)] = &[(0, 1), (0, 2), (1, 3), (2, 3)];

    #[test]
    fn chain_values() {
        let g = graph(&[1.0; 3], &[(0, 1), (1, 2)]);
        for backend in [
            ImpactBackend::Oracle,
            ImpactBackend::Exact,
            ImpactBackend::FastBound,
        ] {
            assert_eq!(backend.compute(&g).values(), &[3.0, 2.0, 1.0]);
        }
    }

    #[test]
    fn diamond_counts_shared_descendant_once() {
        let g = graph(&[1.0; 4], DIAMOND);
        assert_eq!(impact_oracle(&g).values(), &[4.0, 2.0, 2.0, 1.0]);
        assert_eq!(impact_exact(&g).values(), &[4.0, 2.0, 2.0, 1.0]);
        // node 0 sees node 3 through both branches
        assert_eq!(impact_fast_bound(&g).values(), &[5.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn disconnected_nodes_keep_local_weight() {
        let g = graph(&[1.0, 2.5], &[]);
        assert_eq!(impact_exact(&g).values(), &[1.0, 2.5]);
        assert_eq!(impact_oracle(&g).values(), &[1.0, 2.5]);
        assert_eq!(impact_fast_bound(&g).values(), &[1.0, 2.5]);
    }

    #[test]
    fn empty_and_single() {
        let empty = graph(&[], &[]);
        assert!(impact_exact(&empty).is_empty());
        assert!(impact_oracle(&empty).is_empty());
        assert!(impact_fast_bound(&empty).is_empty());
        let one = graph(&[0.75], &[]);
        assert_eq!(impact_exact(&one).values(), &[0.75]);
    }

    #[test]
    fn random_200_node_dag_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for unit in [true, false] {
            let g = random_dag(&mut rng, 200, 0.05, unit);
            assert_eq!(impact_exact(&g), impact_oracle(&g));
        }
    }

    #[test]
    fn chunk_size_does_not_change_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_dag(&mut rng, 300, 0.03, false);
        let reference = impact_exact_chunked(&g, 300);
        for chunk in [0, 1, 3, 63, 64, 65, 128, 1000] {
            assert_eq!(impact_exact_chunked(&g, chunk), reference, "chunk {chunk}");
        }
        assert_eq!(reference, impact_oracle(&g));
    }

    #[test]
    fn backend_names_parse() {
        for b in [
            ImpactBackend::Oracle,
            ImpactBackend::Exact,
            ImpactBackend::FastBound,
        ] {
            assert_eq!(b.name().parse::<ImpactBackend>().unwrap(), b);
        }
        assert!("bogus".parse::<ImpactBackend>().is_err());
    }
}
