//! Error-propagation graph construction.
//!
//! Node indices are assigned densely in insertion order and every edge must
//! point from a lower to a strictly higher index. Insertion order is therefore
//! always a topological order and the graph cannot contain a cycle.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index of a task instance in an error-propagation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    /// # Panics
    ///
    /// Panics if `index` does not fit the 32-bit node index space.
    pub fn new(index: usize) -> Self {
        NodeId(u32::try_from(index).expect("node index exceeds u32 range"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpgError {
    #[error("local impact must be finite and non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("graph is sealed and can no longer be modified")]
    SealedGraph,
    #[error("edge {src} -> {dst} does not point forward in insertion order")]
    ForwardEdgeViolation { src: NodeId, dst: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// A graph that is still receiving nodes and edges.
///
/// Duplicate edges are stored once in the adjacency, but every insertion is
/// counted so that reference statistics stay available after sealing.
#[derive(Debug, Default, Clone)]
pub struct EpgBuilder {
    weights: Vec<f64>,
    successors: Vec<Vec<u32>>,
    multiplicity: HashMap<(u32, u32), u32>,
    sealed: bool,
}

impl EpgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        EpgBuilder {
            weights: Vec::with_capacity(nodes),
            successors: Vec::with_capacity(nodes),
            ..Self::default()
        }
    }

    /// Adds a task instance with local impact `m_local` and returns its id.
    pub fn add_node(&mut self, m_local: f64) -> Result<NodeId, EpgError> {
        if self.sealed {
            return Err(EpgError::SealedGraph);
        }
        if !m_local.is_finite() || m_local < 0.0 {
            return Err(EpgError::NegativeWeight(m_local));
        }
        let id = NodeId::new(self.weights.len());
        self.weights.push(m_local);
        self.successors.push(Vec::new());
        Ok(id)
    }

    /// Adds the propagation edge `src -> dst`.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId) -> Result<(), EpgError> {
        if self.sealed {
            return Err(EpgError::SealedGraph);
        }
        for id in [src, dst] {
            if id.index() >= self.weights.len() {
                return Err(EpgError::UnknownNode(id));
            }
        }
        if src >= dst {
            return Err(EpgError::ForwardEdgeViolation { src, dst });
        }
        let count = self.multiplicity.entry((src.0, dst.0)).or_insert(0);
        if *count == 0 {
            self.successors[src.index()].push(dst.0);
        }
        *count += 1;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// Number of distinct `(src, dst)` pairs.
    pub fn edge_count(&self) -> usize {
        self.multiplicity.len()
    }

    /// How many times `src -> dst` was inserted.
    pub fn multiplicity(&self, src: NodeId, dst: NodeId) -> u32 {
        self.multiplicity.get(&(src.0, dst.0)).copied().unwrap_or(0)
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Freezes the graph. The builder keeps rejecting mutations afterwards.
    pub fn seal(&mut self) -> Result<SealedEpg, EpgError> {
        if self.sealed {
            return Err(EpgError::SealedGraph);
        }
        self.sealed = true;
        let weights = std::mem::take(&mut self.weights);
        let successors = std::mem::take(&mut self.successors);
        let multiplicity = std::mem::take(&mut self.multiplicity);
        Ok(SealedEpg::from_parts(weights, successors, &multiplicity))
    }
}

/// Immutable error-propagation graph in compressed adjacency form.
///
/// Successor lists are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SealedEpg {
    weights: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    multiplicity: Vec<u32>,
}

impl SealedEpg {
    fn from_parts(
        weights: Vec<f64>,
        successors: Vec<Vec<u32>>,
        counts: &HashMap<(u32, u32), u32>,
    ) -> Self {
        let mut offsets = Vec::with_capacity(weights.len() + 1);
        let mut targets = Vec::with_capacity(counts.len());
        let mut multiplicity = Vec::with_capacity(counts.len());
        offsets.push(0);
        for (src, mut succ) in successors.into_iter().enumerate() {
            succ.sort_unstable();
            for dst in succ {
                multiplicity.push(counts[&(src as u32, dst)]);
                targets.push(dst);
            }
            offsets.push(targets.len());
        }
        SealedEpg {
            weights,
            offsets,
            targets,
            multiplicity,
        }
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Total number of edge insertions, counting duplicates.
    pub fn reference_count(&self) -> u64 {
        self.multiplicity.iter().map(|&m| u64::from(m)).sum()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.weights.len()
    }

    pub fn m_local(&self, v: NodeId) -> Option<f64> {
        self.weights.get(v.index()).copied()
    }

    /// Local impact weights indexed by node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.raw_successors(v.index()).len()
    }

    pub fn successors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.raw_successors(v.index()).iter().map(|&s| NodeId(s))
    }

    pub fn multiplicity(&self, src: NodeId, dst: NodeId) -> u32 {
        if !self.contains(src) {
            return 0;
        }
        let (lo, hi) = (self.offsets[src.index()], self.offsets[src.index() + 1]);
        match self.targets[lo..hi].binary_search(&dst.0) {
            Ok(i) => self.multiplicity[lo + i],
            Err(_) => 0,
        }
    }

    /// All distinct edges as `(src, dst, multiplicity)`, ordered by source then target.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, u32)> + '_ {
        (0..self.node_count()).flat_map(move |src| {
            let (lo, hi) = (self.offsets[src], self.offsets[src + 1]);
            (lo..hi).map(move |i| {
                (
                    NodeId(src as u32),
                    NodeId(self.targets[i]),
                    self.multiplicity[i],
                )
            })
        })
    }

    pub(crate) fn raw_successors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Every node forward-reachable from `v`, excluding `v`, in ascending order.
    pub fn descendants(&self, v: NodeId) -> Result<Vec<NodeId>, EpgError> {
        if !self.contains(v) {
            return Err(EpgError::UnknownNode(v));
        }
        let mut visited = vec![false; self.node_count()];
        let mut found = Vec::new();
        self.walk_descendants(v.index(), &mut visited, &mut Vec::new(), &mut found);
        found.sort_unstable();
        Ok(found.into_iter().map(NodeId).collect())
    }

    /// Depth-first walk used by [`descendants`](Self::descendants) and the
    /// oracle backend. `visited` must be all false on entry and is reset on
    /// exit; `found` receives descendants in visit order.
    pub(crate) fn walk_descendants(
        &self,
        v: usize,
        visited: &mut [bool],
        stack: &mut Vec<u32>,
        found: &mut Vec<u32>,
    ) {
        stack.clear();
        found.clear();
        stack.push(v as u32);
        while let Some(u) = stack.pop() {
            for &s in self.raw_successors(u as usize) {
                if !visited[s as usize] {
                    visited[s as usize] = true;
                    found.push(s);
                    stack.push(s);
                }
            }
        }
        for &s in found.iter() {
            visited[s as usize] = false;
        }
    }
}
