//! Rank placement for 3D parallelism.
//!
//! Ranks are laid out with tensor-parallel index fastest, then data-parallel,
//! then pipeline stage: `rank = (pp × DP + dp) × TP + tp`, and rank `r` lives
//! on node `r / gpus_per_node`. Tensor groups therefore never straddle a node
//! when `gpus_per_node` is a multiple of TP, each data-parallel group occupies
//! a contiguous block of `DP × TP` ranks (the fewest nodes possible once TP
//! groups are fixed), and pipeline stages advance across the remaining node
//! blocks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ClusterTopology, ParallelConfig, PlannerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankCoord {
    pub rank: usize,
    pub node: usize,
    pub local_gpu: usize,
    pub dp: usize,
    pub pp: usize,
    pub tp: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankGrid {
    pub tp: usize,
    pub pp: usize,
    pub dp: usize,
    pub gpus_per_node: usize,
    pub coords: Vec<RankCoord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankGridSummary {
    pub ranks: usize,
    pub nodes: usize,
    pub tp_groups: usize,
    pub tp_groups_intra_node: usize,
    pub dp_groups: usize,
    /// Largest number of nodes touched by any data-parallel group.
    pub dp_group_max_nodes: usize,
    pub pp_groups: usize,
    pub pp_group_max_nodes: usize,
}

impl RankGrid {
    pub fn rank_of(&self, dp: usize, pp: usize, tp: usize) -> usize {
        (pp * self.dp + dp) * self.tp + tp
    }

    pub fn coord(&self, rank: usize) -> Option<&RankCoord> {
        self.coords.get(rank)
    }

    fn group_nodes<F>(&self, groups: usize, members: F) -> Vec<BTreeSet<usize>>
    where
        F: Fn(usize) -> Vec<usize>,
    {
        (0..groups).map(|g| members(g).into_iter().map(|r| self.coords[r].node).collect()).collect()
    }

    /// Nodes spanned by each tensor group, indexed by `pp × DP + dp`.
    pub fn tp_group_nodes(&self) -> Vec<BTreeSet<usize>> {
        self.group_nodes(self.dp * self.pp, |g| {
            let (pp, dp) = (g / self.dp, g % self.dp);
            (0..self.tp).map(|tp| self.rank_of(dp, pp, tp)).collect()
        })
    }

    /// Nodes spanned by each data-parallel group, indexed by `pp × TP + tp`.
    pub fn dp_group_nodes(&self) -> Vec<BTreeSet<usize>> {
        self.group_nodes(self.pp * self.tp, |g| {
            let (pp, tp) = (g / self.tp, g % self.tp);
            (0..self.dp).map(|dp| self.rank_of(dp, pp, tp)).collect()
        })
    }

    /// Nodes spanned by each pipeline, indexed by `dp × TP + tp`.
    pub fn pp_group_nodes(&self) -> Vec<BTreeSet<usize>> {
        self.group_nodes(self.dp * self.tp, |g| {
            let (dp, tp) = (g / self.tp, g % self.tp);
            (0..self.pp).map(|pp| self.rank_of(dp, pp, tp)).collect()
        })
    }

    pub fn summary(&self) -> RankGridSummary {
        let tp_nodes = self.tp_group_nodes();
        let dp_nodes = self.dp_group_nodes();
        let pp_nodes = self.pp_group_nodes();
        RankGridSummary {
            ranks: self.coords.len(),
            nodes: self.coords.len().div_ceil(self.gpus_per_node),
            tp_groups: tp_nodes.len(),
            tp_groups_intra_node: tp_nodes.iter().filter(|n| n.len() == 1).count(),
            dp_groups: dp_nodes.len(),
            dp_group_max_nodes: dp_nodes.iter().map(BTreeSet::len).max().unwrap_or(0),
            pp_groups: pp_nodes.len(),
            pp_group_max_nodes: pp_nodes.iter().map(BTreeSet::len).max().unwrap_or(0),
        }
    }
}

pub fn map_topology(topo: &ClusterTopology, parallel: &ParallelConfig) -> Result<RankGrid, PlannerError> {
    let (tp, pp, dp) = (parallel.tensor, parallel.pipeline, parallel.data);
    let gpn = topo.gpus_per_node;
    if tp == 0 || pp == 0 || dp == 0 || gpn == 0 || topo.nodes == 0 {
        return Err(PlannerError::Constraint("all parallel degrees and cluster sizes must be positive".into()));
    }
    if tp > gpn {
        return Err(PlannerError::Constraint(format!("TP ({tp}) must not exceed gpus_per_node ({gpn})")));
    }
    if !gpn.is_multiple_of(tp) {
        return Err(PlannerError::Constraint(format!("gpus_per_node ({gpn}) must be divisible by TP ({tp})")));
    }
    let gpus = topo.gpus();
    if tp * pp * dp != gpus {
        return Err(PlannerError::Constraint(format!(
            "TP × PP × DP = {tp} × {pp} × {dp} = {} must equal nodes × gpus_per_node = {gpus}",
            tp * pp * dp
        )));
    }
    let coords = (0..gpus)
        .map(|rank| RankCoord {
            rank,
            node: rank / gpn,
            local_gpu: rank % gpn,
            tp: rank % tp,
            dp: (rank / tp) % dp,
            pp: rank / (tp * dp),
        })
        .collect();
    Ok(RankGrid { tp, pp, dp, gpus_per_node: gpn, coords })
}
