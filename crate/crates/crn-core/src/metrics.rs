//! ETX tables, the queue-aware selector metric H, and candidate forwarder
//! set construction with ETX-priority ordering.

use thiserror::Error;

use crate::topology::{Availability, Channel, Deployment, Link, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("loss rate {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error("selector weights must sum to 1, got {0}")]
    WeightError(f64),
}

/// Expected transmission count of a link with effective loss rate `rho_eff`.
pub fn link_etx(rho_eff: f64) -> Result<f64, MetricsError> {
    if !(rho_eff > 0.0 && rho_eff < 1.0) {
        return Err(MetricsError::DomainError(rho_eff));
    }
    Ok(1.0 / (1.0 - rho_eff))
}

/// H_i(T) = chi * Q_i + gamma * ETX_i. Lower is better.
pub fn selector_metric(queue: f64, etx: f64, chi: f64, gamma: f64) -> Result<f64, MetricsError> {
    if (chi + gamma - 1.0).abs() > 1e-12 {
        return Err(MetricsError::WeightError(chi + gamma));
    }
    Ok(chi * queue + gamma * etx)
}

/// Per-link ETX values and per-node min-cost ETX distance to the destination.
#[derive(Debug, Clone)]
pub struct EtxTable {
    /// Aligned with `dep.links`.
    pub link_etx: Vec<f64>,
    /// node_etx[i]: Bellman-optimal distance to D; +inf when unreachable.
    pub node_etx: Vec<f64>,
    pub destination: NodeId,
}

impl EtxTable {
    /// Builds the table from explicit per-link effective loss rates
    /// (aligned with `links`). Dijkstra from the destination over reversed
    /// links; ties broken toward the lower node index.
    pub fn build(
        num_nodes: usize,
        links: &[Link],
        rho_eff: &[f64],
        destination: NodeId,
    ) -> Result<Self, MetricsError> {
        let link_costs: Result<Vec<f64>, _> = rho_eff.iter().map(|&r| link_etx(r)).collect();
        let link_costs = link_costs?;
        // in_edges[j] = (i, cost) for each link (i, j)
        let mut in_edges = vec![Vec::new(); num_nodes];
        for (idx, &(i, j)) in links.iter().enumerate() {
            in_edges[j].push((i, link_costs[idx]));
        }
        let mut dist = vec![f64::INFINITY; num_nodes];
        dist[destination] = 0.0;
        let mut done = vec![false; num_nodes];
        for _ in 0..num_nodes {
            // Lowest tentative distance, lower index on ties.
            let mut best: Option<NodeId> = None;
            for v in 0..num_nodes {
                if !done[v] && dist[v].is_finite() && best.map_or(true, |b| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
            let Some(v) = best else { break };
            done[v] = true;
            for &(u, cost) in &in_edges[v] {
                if dist[v] + cost < dist[u] {
                    dist[u] = dist[v] + cost;
                }
            }
        }
        Ok(EtxTable {
            link_etx: link_costs,
            node_etx: dist,
            destination,
        })
    }

    /// Table for a deployment. The effective loss rate of a link is the
    /// minimum over channels: ETX is a long-run metric and stays fixed while
    /// availability fluctuates per slot.
    pub fn from_deployment(dep: &Deployment) -> Result<Self, MetricsError> {
        let rho_eff: Vec<f64> = dep
            .loss_rate
            .iter()
            .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        EtxTable::build(
            dep.params.num_sus,
            &dep.links,
            &rho_eff,
            dep.params.destination,
        )
    }
}

/// One candidate forwarder entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub h_score: f64,
}

/// cfs[i][k]: ETX-decreasing neighbors of i reachable on channel k, ordered
/// ascending by node ETX (the priority order the forwarding algorithm
/// assumes).
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub cfs: Vec<Vec<Vec<Candidate>>>,
}

impl CandidateSet {
    pub fn get(&self, i: NodeId, k: Channel) -> &[Candidate] {
        &self.cfs[i][k]
    }
}

/// Builds candidate sets for the current slot. Neighbors must strictly
/// decrease node ETX (loop freedom) and be reachable per `h`; when more than
/// `max_candidates` qualify, the ones with the smallest H survive. The final
/// list is sorted by node ETX, not by H.
pub fn build_candidate_sets(
    dep: &Deployment,
    etx: &EtxTable,
    h: &Availability,
    queues: &[f64],
    chi: f64,
    gamma: f64,
    max_candidates: usize,
) -> Result<CandidateSet, MetricsError> {
    let n = dep.params.num_sus;
    let kn = dep.params.num_channels;
    let mut cfs = vec![vec![Vec::new(); kn]; n];
    for (idx, &(i, j)) in dep.links.iter().enumerate() {
        if !(etx.node_etx[j] < etx.node_etx[i]) {
            continue;
        }
        let h_score = selector_metric(queues[j], etx.node_etx[j], chi, gamma)?;
        for k in 0..kn {
            if h.link_available(idx, k) {
                cfs[i][k].push(Candidate { node: j, h_score });
            }
        }
    }
    for node_sets in &mut cfs {
        for set in node_sets.iter_mut() {
            if set.len() > max_candidates {
                // Keep the max_candidates smallest H; ties to lower index.
                set.sort_by(|a, b| {
                    a.h_score
                        .partial_cmp(&b.h_score)
                        .unwrap()
                        .then(a.node.cmp(&b.node))
                });
                set.truncate(max_candidates);
            }
            set.sort_by(|a, b| {
                etx.node_etx[a.node]
                    .partial_cmp(&etx.node_etx[b.node])
                    .unwrap()
                    .then(a.node.cmp(&b.node))
            });
        }
    }
    Ok(CandidateSet { cfs })
}
