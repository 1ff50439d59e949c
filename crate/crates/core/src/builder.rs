//! Task/channel front end for EPG construction.
//!
//! Each task reads a set of input channels and writes exactly one output
//! channel. Reading a channel produced earlier in the same epoch adds a
//! propagation edge from its producer. Channels nobody produced are external
//! application input and add no edge, unless the epoch is strict.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::epg::{EpgBuilder, EpgError, NodeId, SealedEpg};
use crate::impact::{ImpactBackend, ImpactVector};

/// One task instance: the channels it reads, the channel it writes, and its
/// local impact.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord<C> {
    pub inputs: Vec<C>,
    pub output: C,
    pub m_local: f64,
}

impl<C> TaskRecord<C> {
    pub fn new(inputs: Vec<C>, output: C, m_local: f64) -> Self {
        TaskRecord {
            inputs,
            output,
            m_local,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("channel {0} already has a producer in this epoch")]
    ChannelRewrite(String),
    #[error("channel {0} has no producer in this epoch")]
    UnknownChannel(String),
    #[error("task reads its own output channel {0}")]
    SelfConsumption(String),
    #[error("epoch is sealed")]
    SealedEpoch,
    #[error(transparent)]
    Graph(#[from] EpgError),
}

/// An EPG under construction together with its channel producer map.
#[derive(Debug)]
pub struct Epoch<C> {
    graph: EpgBuilder,
    producers: HashMap<C, NodeId>,
    strict: bool,
    sealed: bool,
}

/// Opens an empty, lenient epoch.
pub fn open_epoch<C: Eq + Hash + Clone + Debug>() -> Epoch<C> {
    Epoch::open()
}

impl<C: Eq + Hash + Clone + Debug> Default for Epoch<C> {
    fn default() -> Self {
        Self::open()
    }
}

impl<C: Eq + Hash + Clone + Debug> Epoch<C> {
    pub fn open() -> Self {
        Epoch {
            graph: EpgBuilder::new(),
            producers: HashMap::new(),
            strict: false,
            sealed: false,
        }
    }

    /// An epoch that rejects reads of channels without a producer.
    pub fn strict() -> Self {
        Epoch {
            strict: true,
            ..Self::open()
        }
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn producer(&self, channel: &C) -> Option<NodeId> {
        self.producers.get(channel).copied()
    }

    /// Adds a task. On error the epoch is left unchanged.
    pub fn add_task(&mut self, task: &TaskRecord<C>) -> Result<NodeId, BuildError> {
        if self.sealed {
            return Err(BuildError::SealedEpoch);
        }
        if task.inputs.contains(&task.output) {
            return Err(BuildError::SelfConsumption(format!("{:?}", task.output)));
        }
        if self.producers.contains_key(&task.output) {
            return Err(BuildError::ChannelRewrite(format!("{:?}", task.output)));
        }
        if self.strict {
            if let Some(missing) = task
                .inputs
                .iter()
                .find(|c| !self.producers.contains_key(*c))
            {
                return Err(BuildError::UnknownChannel(format!("{missing:?}")));
            }
        }

        let node = self.graph.add_node(task.m_local)?;
        for input in &task.inputs {
            if let Some(&src) = self.producers.get(input) {
                self.graph.add_edge(src, node)?;
            }
        }
        self.producers.insert(task.output.clone(), node);
        Ok(node)
    }

    /// Seals the epoch and computes impacts with the exact backend.
    pub fn seal(&mut self) -> Result<(SealedEpg, ImpactVector), BuildError> {
        self.seal_with(ImpactBackend::Exact)
    }

    pub fn seal_with(
        &mut self,
        backend: ImpactBackend,
    ) -> Result<(SealedEpg, ImpactVector), BuildError> {
        if self.sealed {
            return Err(BuildError::SealedEpoch);
        }
        self.sealed = true;
        self.producers.clear();
        let graph = self.graph.seal()?;
        let impacts = backend.compute(&graph);
        Ok((graph, impacts))
    }
}
