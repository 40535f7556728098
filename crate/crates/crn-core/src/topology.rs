//! Random CRN deployments: node placement, the neighbor graph, per-link
//! interference sets under the protocol interference model, and per-slot
//! channel availability driven by primary-user on/off activity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub type NodeId = usize;
pub type Channel = usize;
/// Directed link (transmitter, receiver).
pub type Link = (NodeId, NodeId);

const GEN_TAG: u64 = 0x7030;
const PU_TAG: u64 = 0x7031;
const LOSS_TAG: u64 = 0x7032;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid deployment parameters: {0}")]
    InvalidParams(String),
    #[error("no connected deployment found after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Generation parameters for a random deployment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeploymentParams {
    pub num_sus: usize,
    pub num_pus: usize,
    pub area_width: f64,
    pub area_height: f64,
    /// SU transmission range; i and j are neighbors iff d_ij < d_s.
    pub d_s: f64,
    /// SU interference range.
    pub d_i: f64,
    pub pu_tx_range: f64,
    /// A PU active on channel k blocks k for every SU within this range.
    pub pu_if_range: f64,
    pub num_channels: usize,
    pub num_radios: usize,
    pub loss_min: f64,
    pub loss_max: f64,
    pub source: NodeId,
    pub destination: NodeId,
}

impl DeploymentParams {
    fn validate(&self) -> Result<(), TopologyError> {
        let err = |m: &str| Err(TopologyError::InvalidParams(m.to_string()));
        if self.num_sus < 2 {
            return err("need at least 2 SUs");
        }
        if self.num_channels < 1 {
            return err("need at least 1 channel");
        }
        if self.num_radios < 1 {
            return err("need at least 1 radio");
        }
        if self.area_width <= 0.0 || self.area_height <= 0.0 {
            return err("area must be positive");
        }
        if self.d_s <= 0.0 || self.d_i <= 0.0 || self.pu_tx_range <= 0.0 || self.pu_if_range <= 0.0
        {
            return err("ranges must be positive");
        }
        if self.d_s >= self.d_i {
            return err("d_s must be smaller than d_i");
        }
        if self.pu_tx_range >= self.pu_if_range {
            return err("pu_tx_range must be smaller than pu_if_range");
        }
        if !(0.0 < self.loss_min && self.loss_min <= self.loss_max && self.loss_max < 1.0) {
            return err("loss rates must satisfy 0 < min <= max < 1");
        }
        if self.source == self.destination
            || self.source >= self.num_sus
            || self.destination >= self.num_sus
        {
            return err("source and destination must be distinct valid SU indices");
        }
        Ok(())
    }
}

/// A generated deployment: positions, neighbor links, per-link per-channel
/// loss rates and interference sets. Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deployment {
    pub params: DeploymentParams,
    pub seed: u64,
    pub su_positions: Vec<Point>,
    pub pu_positions: Vec<Point>,
    /// Directed links (i, j) with d_ij < d_s, sorted lexicographically.
    pub links: Vec<Link>,
    /// loss_rate[link_idx][k] = rho_ij^k in (0, 1).
    pub loss_rate: Vec<Vec<f64>>,
    /// interference[link_idx] = indices of links in I_ij (the literal
    /// definition, so a link is a member of its own set).
    pub interference: Vec<Vec<usize>>,
    /// pus_in_range[node] = PUs whose interference range covers the node.
    pub pus_in_range: Vec<Vec<usize>>,
}

impl Deployment {
    pub fn link_index(&self, link: Link) -> Option<usize> {
        self.links.binary_search(&link).ok()
    }

    pub fn loss(&self, link: Link, k: Channel) -> f64 {
        let idx = self.link_index(link).expect("unknown link");
        self.loss_rate[idx][k]
    }

    /// Out-neighbors of `i`, ascending.
    pub fn neighbors(&self, i: NodeId) -> Vec<NodeId> {
        self.links
            .iter()
            .filter(|&&(a, _)| a == i)
            .map(|&(_, b)| b)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("deployment serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Generates a random deployment. Placement is uniform over the area;
/// attempts are repeated (up to `MAX_ATTEMPTS`) until the source and
/// destination fall in the same component of the neighbor graph.
pub fn generate(params: &DeploymentParams, seed: u64) -> Result<Deployment, TopologyError> {
    params.validate()?;
    const MAX_ATTEMPTS: usize = 100;
    for attempt in 0..MAX_ATTEMPTS {
        let dep = generate_once(params, seed, attempt as u64);
        if connected(&dep, params.source, params.destination) {
            return Ok(dep);
        }
    }
    Err(TopologyError::ConnectivityFailure {
        attempts: MAX_ATTEMPTS,
    })
}

fn generate_once(params: &DeploymentParams, seed: u64, attempt: u64) -> Deployment {
    use rand::Rng;
    let mut r = rng::stream(seed, &[GEN_TAG, attempt]);
    let mut su_positions = Vec::with_capacity(params.num_sus);
    for _ in 0..params.num_sus {
        su_positions.push(Point {
            x: r.gen::<f64>() * params.area_width,
            y: r.gen::<f64>() * params.area_height,
        });
    }
    let mut pu_positions = Vec::with_capacity(params.num_pus);
    for _ in 0..params.num_pus {
        pu_positions.push(Point {
            x: r.gen::<f64>() * params.area_width,
            y: r.gen::<f64>() * params.area_height,
        });
    }

    let mut links = Vec::new();
    for i in 0..params.num_sus {
        for j in 0..params.num_sus {
            if i != j && su_positions[i].dist(&su_positions[j]) < params.d_s {
                links.push((i, j));
            }
        }
    }
    links.sort_unstable();

    // Loss rates are keyed per (endpoints, channel) rather than drawn from
    // the running stream so that a given channel's conditions do not depend
    // on how many other channels the experiment configures.
    let mut loss_rate = Vec::with_capacity(links.len());
    for &(i, j) in &links {
        let row: Vec<f64> = (0..params.num_channels)
            .map(|k| {
                let u = rng::unit(seed, &[LOSS_TAG, attempt, i as u64, j as u64, k as u64]);
                params.loss_min + u * (params.loss_max - params.loss_min)
            })
            .collect();
        loss_rate.push(row);
    }

    let interference = interference_sets(&su_positions, &links, params.d_s);

    let pus_in_range = (0..params.num_sus)
        .map(|i| {
            (0..params.num_pus)
                .filter(|&p| pu_positions[p].dist(&su_positions[i]) <= params.pu_if_range)
                .collect()
        })
        .collect();

    Deployment {
        params: params.clone(),
        seed,
        su_positions,
        pu_positions,
        links,
        loss_rate,
        interference,
        pus_in_range,
    }
}

/// I_ij = { <u,v> in E : d_uj <= d_s or d_iv <= d_s }, taken literally
/// (boundary is <=, membership is not symmetrized, and e_ij qualifies for
/// its own set since d_ij < d_s).
pub fn interference_sets(positions: &[Point], links: &[Link], d_s: f64) -> Vec<Vec<usize>> {
    links
        .iter()
        .map(|&(i, j)| {
            links
                .iter()
                .enumerate()
                .filter(|&(_, &(u, v))| {
                    positions[u].dist(&positions[j]) <= d_s || positions[i].dist(&positions[v]) <= d_s
                })
                .map(|(idx, _)| idx)
                .collect()
        })
        .collect()
}

fn connected(dep: &Deployment, s: NodeId, d: NodeId) -> bool {
    let n = dep.params.num_sus;
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &dep.links {
        adj[a].push(b);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([s]);
    seen[s] = true;
    while let Some(x) = queue.pop_front() {
        if x == d {
            return true;
        }
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Independent two-state on/off Markov chain per (PU, channel). Sampling is
/// a pure function of (seed, slot): no hidden cursor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelProcess {
    pub num_pus: usize,
    pub num_channels: usize,
    /// Stationary probability the chain is in the busy state.
    pub busy_prob: Vec<Vec<f64>>,
    /// P(on -> on).
    pub p_stay_on: Vec<Vec<f64>>,
    /// P(off -> off).
    pub p_stay_off: Vec<Vec<f64>>,
    pub rng_seed: u64,
}

impl ChannelProcess {
    /// All chains share one (busy_prob, mean on-burst) parameterization.
    pub fn uniform(
        num_pus: usize,
        num_channels: usize,
        busy_prob: f64,
        mean_on_slots: f64,
        rng_seed: u64,
    ) -> Result<Self, TopologyError> {
        if !(0.0..=1.0).contains(&busy_prob) {
            return Err(TopologyError::InvalidParams(
                "busy_prob must lie in [0, 1]".into(),
            ));
        }
        if mean_on_slots < 1.0 {
            return Err(TopologyError::InvalidParams(
                "mean_on_slots must be >= 1".into(),
            ));
        }
        // Geometric on-bursts of mean L give P(on -> off) = 1/L; the off->on
        // rate then follows from the requested stationary distribution.
        let p_on_to_off = if busy_prob >= 1.0 {
            // Absorbing busy state; a nonzero off-rate would leak idle slots.
            0.0
        } else {
            1.0 / mean_on_slots
        };
        let p_off_to_on = if busy_prob >= 1.0 {
            1.0
        } else {
            (busy_prob * p_on_to_off / (1.0 - busy_prob)).min(1.0)
        };
        let fill = |v: f64| vec![vec![v; num_channels]; num_pus];
        Ok(ChannelProcess {
            num_pus,
            num_channels,
            busy_prob: fill(busy_prob),
            p_stay_on: fill(1.0 - p_on_to_off),
            p_stay_off: fill(1.0 - p_off_to_on),
            rng_seed,
        })
    }

    pub fn always_idle(num_pus: usize, num_channels: usize, rng_seed: u64) -> Self {
        ChannelProcess::uniform(num_pus, num_channels, 0.0, 1.0, rng_seed).unwrap()
    }

    /// Stationary busy probability implied by the transition parameters.
    pub fn stationary(&self, pu: usize, k: Channel) -> f64 {
        let p10 = 1.0 - self.p_stay_on[pu][k];
        let p01 = 1.0 - self.p_stay_off[pu][k];
        if p01 + p10 == 0.0 {
            self.busy_prob[pu][k]
        } else {
            p01 / (p01 + p10)
        }
    }

    fn step_one(&self, pu: usize, k: Channel, prev_on: bool, slot: u64) -> bool {
        let u = rng::unit(self.rng_seed, &[PU_TAG, pu as u64, k as u64, slot]);
        if prev_on {
            u < self.p_stay_on[pu][k]
        } else {
            u >= self.p_stay_off[pu][k]
        }
    }

    fn initial(&self, pu: usize, k: Channel) -> bool {
        rng::coin(
            self.rng_seed,
            &[PU_TAG, pu as u64, k as u64, u64::MAX],
            self.busy_prob[pu][k],
        )
    }

    /// Whether `pu` occupies channel `k` at `slot`. O(slot) per call; use
    /// [`OccupancyCursor`] when scanning slots sequentially.
    pub fn occupied(&self, pu: usize, k: Channel, slot: u64) -> bool {
        let mut on = self.initial(pu, k);
        for t in 0..=slot {
            on = self.step_one(pu, k, on, t);
        }
        on
    }
}

/// Sequential view over a [`ChannelProcess`]; agrees with
/// [`ChannelProcess::occupied`] at every slot.
pub struct OccupancyCursor<'a> {
    proc: &'a ChannelProcess,
    /// occupied[pu][k] for the slot most recently stepped to.
    pub occupied: Vec<Vec<bool>>,
    next_slot: u64,
}

impl<'a> OccupancyCursor<'a> {
    pub fn new(proc: &'a ChannelProcess) -> Self {
        let occupied = (0..proc.num_pus)
            .map(|pu| (0..proc.num_channels).map(|k| proc.initial(pu, k)).collect())
            .collect();
        OccupancyCursor {
            proc,
            occupied,
            next_slot: 0,
        }
    }

    /// Advance to the next slot and return the occupancy matrix for it.
    pub fn step(&mut self) -> &Vec<Vec<bool>> {
        for pu in 0..self.proc.num_pus {
            for k in 0..self.proc.num_channels {
                self.occupied[pu][k] =
                    self.proc
                        .step_one(pu, k, self.occupied[pu][k], self.next_slot);
            }
        }
        self.next_slot += 1;
        &self.occupied
    }
}

/// Per-slot channel availability: h[link_idx][k] = 1 iff the link exists and
/// no in-range PU occupies channel k at either endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Availability {
    pub h: Vec<Vec<bool>>,
}

impl Availability {
    pub fn link_available(&self, link_idx: usize, k: Channel) -> bool {
        self.h[link_idx][k]
    }
}

/// h from an explicit PU occupancy matrix (occupied[pu][k]).
pub fn availability_from_occupancy(dep: &Deployment, occupied: &[Vec<bool>]) -> Availability {
    let kn = dep.params.num_channels;
    let n = dep.params.num_sus;
    // blocked[node][k] = some in-range PU is busy on k
    let mut blocked = vec![vec![false; kn]; n];
    for (node, pus) in dep.pus_in_range.iter().enumerate() {
        for &pu in pus {
            for k in 0..kn {
                if occupied[pu][k] {
                    blocked[node][k] = true;
                }
            }
        }
    }
    let h = dep
        .links
        .iter()
        .map(|&(i, j)| (0..kn).map(|k| !blocked[i][k] && !blocked[j][k]).collect())
        .collect();
    Availability { h }
}

/// h at an absolute slot index. Deterministic given (proc.rng_seed, slot).
pub fn availability(dep: &Deployment, proc: &ChannelProcess, slot: u64) -> Availability {
    let occupied: Vec<Vec<bool>> = (0..proc.num_pus)
        .map(|pu| {
            (0..proc.num_channels)
                .map(|k| proc.occupied(pu, k, slot))
                .collect()
        })
        .collect();
    availability_from_occupancy(dep, &occupied)
}
