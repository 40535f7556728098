//! Time-slotted simulator: per-slot availability, interference-feasible
//! scheduling under radio budgets, lossy broadcast reception, queue
//! dynamics, coding/credit bookkeeping, and run-level audits.
//!
//! A run advances in windows of `window_slots` slots. Candidate forwarder
//! sets and credits are recomputed at window boundaries; within a slot the
//! order is availability -> schedule -> transmit -> queue update. Every
//! random decision is a pure function of (seed, slot, labels), so identical
//! seeds replay bit-identically.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::coding::{self, CodedBatch, CodedPacket, CreditLedger};
use crate::forwarding;
use crate::metrics::{self, CandidateSet, EtxTable, MetricsError};
use crate::protocols::{CandidateRule, PolicySpec, ProtocolKind};
use crate::rng;
use crate::topology::{
    availability_from_occupancy, Availability, Channel, ChannelProcess, Deployment, NodeId,
    OccupancyCursor,
};

const TX_TAG: u64 = 0x9001;
const RX_TAG: u64 = 0x9002;
const ALPHA_TAG: u64 = 0x9003;
const NATIVE_TAG: u64 = 0x9004;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("source has no route to the destination")]
    NoRoute,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Slots per window T.
    pub window_slots: u64,
    pub batch_size: usize,
    pub payload_len: usize,
    /// Buffer capacity per node, packets.
    pub buffer_cap: usize,
    /// Per-window per-(link, channel) capacity B.
    pub link_capacity: u64,
    pub max_candidates: usize,
    pub chi: f64,
    pub gamma: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            window_slots: 5,
            batch_size: 10,
            payload_len: 8,
            buffer_cap: 100,
            link_capacity: 100,
            max_candidates: 4,
            chi: 0.5,
            gamma: 0.5,
        }
    }
}

/// One admitted broadcast: transmitter, channel, and the admitted candidate
/// links in ETX priority order.
#[derive(Debug, Clone)]
pub struct Broadcast {
    pub tx: NodeId,
    pub channel: Channel,
    pub candidates: Vec<NodeId>,
    pub link_idxs: Vec<usize>,
    /// Index into `candidates` of the receiver whose link holds the
    /// exclusive interference reservation. The other candidates listen
    /// opportunistically: their receptions additionally require that no
    /// other concurrent transmitter is within range of them.
    pub protected: usize,
    pub funding: Funding,
    /// Coded batch this emission draws from (0 for plain packets).
    pub batch_id: u64,
}

/// What pays for an emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Funding {
    /// Source transmissions are never gated.
    Source,
    /// One queued packet / emission token.
    QueueToken,
    /// A positive per-channel credit counter.
    Credit,
    /// A specific position in a plain packet queue.
    Packet(usize),
}

/// A transmission wish for one (node, channel) pair this slot.
#[derive(Debug, Clone)]
pub struct Demand {
    pub tx: NodeId,
    pub channel: Channel,
    pub candidates: Vec<NodeId>,
    pub link_idxs: Vec<usize>,
    /// Policy rank; lower schedules first.
    pub priority: f64,
    pub funding: Funding,
    /// Coded batch this emission draws from (0 for plain packets).
    pub batch_id: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SlotSchedule {
    pub broadcasts: Vec<Broadcast>,
}

impl SlotSchedule {
    /// Flattened (link, channel) view.
    pub fn active(&self) -> Vec<((NodeId, NodeId), Channel)> {
        self.broadcasts
            .iter()
            .flat_map(|b| {
                b.candidates
                    .iter()
                    .map(move |&j| ((b.tx, j), b.channel))
            })
            .collect()
    }

    pub fn radio_usage(&self, num_nodes: usize, num_channels: usize) -> Vec<Vec<bool>> {
        let mut used = vec![vec![false; num_channels]; num_nodes];
        for b in &self.broadcasts {
            used[b.tx][b.channel] = true;
            for &j in &b.candidates {
                used[j][b.channel] = true;
            }
        }
        used
    }
}

/// Greedy maximal schedule: demands ranked by (priority, node, channel).
/// A demand is admitted when its highest-priority available candidate link
/// passes availability, interference exclusivity (against other admitted
/// protected links), half-duplex, and both endpoints' radio budgets. The
/// remaining candidates join as opportunistic listeners when they have an
/// available link and a free radio; whether they actually hear anything is
/// decided at transmission time against the set of concurrent transmitters.
pub fn schedule_slot(dep: &Deployment, h: &Availability, demands: &[Demand]) -> SlotSchedule {
    let n = dep.params.num_sus;
    let kn = dep.params.num_channels;
    let radios = dep.params.num_radios;

    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&demands[a], &demands[b]);
        da.priority
            .partial_cmp(&db.priority)
            .unwrap()
            .then(da.tx.cmp(&db.tx))
            .then(da.channel.cmp(&db.channel))
    });

    // channels engaged per node, and the role on each.
    let mut engaged = vec![vec![false; kn]; n];
    let mut engaged_count = vec![0usize; n];
    let mut transmitting = vec![vec![false; kn]; n];
    // admitted protected links per channel, with their transmitters.
    let mut admitted: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); kn];

    let mut schedule = SlotSchedule::default();
    let mut order_of_demand: Vec<usize> = Vec::new();
    for &di in &order {
        let d = &demands[di];
        let k = d.channel;
        if transmitting[d.tx][k] || (engaged[d.tx][k] && !transmitting[d.tx][k]) {
            // Already engaged on this channel (tx or rx): half-duplex.
            continue;
        }
        if !engaged[d.tx][k] && engaged_count[d.tx] >= radios {
            continue;
        }
        // The first admissible candidate (highest priority) takes the
        // exclusive reservation.
        let mut protected: Option<(NodeId, usize)> = None;
        for (&j, &li) in d.candidates.iter().zip(&d.link_idxs) {
            if !h.link_available(li, k) || transmitting[j][k] {
                continue;
            }
            if !engaged[j][k] && engaged_count[j] >= radios {
                continue;
            }
            // Interference exclusivity against admitted protected links
            // with a different transmitter (interference sets are sorted).
            let clash = admitted[k].iter().any(|&(other, other_tx)| {
                other_tx != d.tx
                    && (dep.interference[li].binary_search(&other).is_ok()
                        || dep.interference[other].binary_search(&li).is_ok())
            });
            if clash {
                continue;
            }
            protected = Some((j, li));
            break;
        }
        let Some((pj, pli)) = protected else { continue };
        admitted[k].push((pli, d.tx));
        if !engaged[pj][k] {
            engaged[pj][k] = true;
            engaged_count[pj] += 1;
        }
        if !engaged[d.tx][k] {
            engaged[d.tx][k] = true;
            engaged_count[d.tx] += 1;
        }
        transmitting[d.tx][k] = true;
        schedule.broadcasts.push(Broadcast {
            tx: d.tx,
            channel: k,
            candidates: vec![pj],
            link_idxs: vec![pli],
            protected: 0,
            funding: d.funding,
            batch_id: d.batch_id,
        });
        order_of_demand.push(di);
    }

    // Second pass: attach opportunistic listeners. Deferring this until
    // every transmission is admitted keeps listening strictly subordinate
    // to transmitting -- a node never forfeits its own slot to overhear.
    for (bi, &di) in order_of_demand.iter().enumerate() {
        let d = &demands[di];
        let k = d.channel;
        let pj = schedule.broadcasts[bi].candidates[0];
        for (&j, &li) in d.candidates.iter().zip(&d.link_idxs) {
            if j == pj {
                continue;
            }
            if !h.link_available(li, k) || transmitting[j][k] {
                continue;
            }
            if !engaged[j][k] && engaged_count[j] >= radios {
                continue;
            }
            if !engaged[j][k] {
                engaged[j][k] = true;
                engaged_count[j] += 1;
            }
            let b = &mut schedule.broadcasts[bi];
            // Keep ETX candidate order: insert at the original rank.
            let pos = d.candidates.iter().position(|&c| c == j).unwrap();
            let insert_at = b
                .candidates
                .iter()
                .take_while(|&&c| d.candidates.iter().position(|&x| x == c).unwrap() < pos)
                .count();
            b.candidates.insert(insert_at, j);
            b.link_idxs.insert(insert_at, li);
            if insert_at <= b.protected {
                b.protected += 1;
            }
        }
    }
    schedule
}

/// Checks the three schedule feasibility invariants; returns violation
/// descriptions (empty = feasible).
pub fn validate_schedule(
    dep: &Deployment,
    h: &Availability,
    schedule: &SlotSchedule,
) -> Vec<String> {
    let mut out = Vec::new();
    // Availability.
    for b in &schedule.broadcasts {
        for &li in &b.link_idxs {
            if !h.link_available(li, b.channel) {
                out.push(format!(
                    "link {:?} scheduled on unavailable channel {}",
                    dep.links[li], b.channel
                ));
            }
        }
    }
    // Interference exclusivity across distinct transmitters' protected
    // (reserved) links.
    for (ai, a) in schedule.broadcasts.iter().enumerate() {
        for b in schedule.broadcasts.iter().skip(ai + 1) {
            if a.channel != b.channel || a.tx == b.tx {
                continue;
            }
            let la = a.link_idxs[a.protected];
            let lb = b.link_idxs[b.protected];
            if dep.interference[la].binary_search(&lb).is_ok()
                || dep.interference[lb].binary_search(&la).is_ok()
            {
                out.push(format!(
                    "interfering links {:?} and {:?} share channel {}",
                    dep.links[la], dep.links[lb], a.channel
                ));
            }
        }
    }
    // Radio budget.
    let usage = schedule.radio_usage(dep.params.num_sus, dep.params.num_channels);
    for (node, row) in usage.iter().enumerate() {
        let used = row.iter().filter(|&&u| u).count();
        if used > dep.params.num_radios {
            out.push(format!("node {node} engaged on {used} channels"));
        }
    }
    out
}

/// One successful reception.
#[derive(Debug, Clone, Copy)]
pub struct Reception {
    pub broadcast_idx: usize,
    pub receiver: NodeId,
    /// Position of the receiver in the broadcast's ETX-ordered candidates.
    pub rank: usize,
    pub link_idx: usize,
}

/// Bernoulli reception per candidate; pure in (seed, slot, labels).
/// Protected receivers hold an exclusive reservation; opportunistic
/// listeners additionally lose the packet whenever another concurrent
/// transmitter on the channel is within range of them.
pub fn transmit_slot(
    dep: &Deployment,
    schedule: &SlotSchedule,
    seed: u64,
    slot: u64,
) -> Vec<Reception> {
    let mut out = Vec::new();
    for (bi, b) in schedule.broadcasts.iter().enumerate() {
        for (rank, (&j, &li)) in b.candidates.iter().zip(&b.link_idxs).enumerate() {
            if rank != b.protected {
                let jammed = schedule.broadcasts.iter().any(|o| {
                    o.channel == b.channel
                        && o.tx != b.tx
                        && dep.su_positions[o.tx].dist(&dep.su_positions[j]) <= dep.params.d_s
                });
                if jammed {
                    continue;
                }
            }
            let p_rx = 1.0 - dep.loss_rate[li][b.channel];
            if rng::coin(
                seed,
                &[RX_TAG, slot, b.tx as u64, j as u64, b.channel as u64],
                p_rx,
            ) {
                out.push(Reception {
                    broadcast_idx: bi,
                    receiver: j,
                    rank,
                    link_idx: li,
                });
            }
        }
    }
    out
}

/// Per-node queue balance for one accounting step: `new_q = q - sent +
/// received`, admissions beyond `cap` are dropped. Returns (new_q, dropped).
pub fn apply_queue_dynamics(q: usize, sent: usize, received: usize, cap: usize) -> (usize, usize) {
    debug_assert!(sent <= q);
    let after_send = q - sent.min(q);
    let room = cap.saturating_sub(after_send);
    let admitted = received.min(room);
    (after_send + admitted, received - admitted)
}

/// Violation counters collected by the always-on run audits. All zero on a
/// correct run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuditCounters {
    pub conservation: u64,
    pub interference: u64,
    pub radio: u64,
    pub availability: u64,
    pub buffer: u64,
    pub capacity: u64,
    pub flow: u64,
}

impl AuditCounters {
    pub fn clean(&self) -> bool {
        *self == AuditCounters::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub protocol: ProtocolKind,
    pub delivered_packets: u64,
    pub injected_packets: u64,
    pub dropped_packets: u64,
    pub in_flight: u64,
    pub slots_elapsed: u64,
    /// delivered / slots, packets per slot.
    pub throughput: f64,
    pub audit: AuditCounters,
}

struct NodeState {
    /// Emission token pool (coding); this is Q_i. Tokens are earned by
    /// innovative receptions and are not tied to a batch: a duty earned on
    /// one batch may be discharged on whichever batch is currently useful.
    tokens: usize,
    /// Plain packet queue (non-coding).
    packets: VecDeque<u64>,
    /// Accumulated rows per in-flight batch.
    batches: HashMap<u64, CodedBatch>,
    /// Fractional mint carry per batch (MORE loss compensation).
    mint_credit: HashMap<u64, f64>,
    /// Emissions per batch (relay freshness heuristic).
    burned_per_batch: HashMap<u64, u64>,
    /// P_i^k for the current window.
    sent_window: Vec<f64>,
    /// Sum of f*(1-rho)*mu addressed to this node, per channel, this window.
    expected_rx_window: Vec<f64>,
    // run-long ledger
    minted: u64,
    burned: u64,
    dropped: u64,
    innovative_rx: u64,
    /// All fresh coded receptions, innovative or not.
    coding_rx: u64,
    plain_rx: u64,
    plain_tx: u64,
}

impl NodeState {
    fn new(kn: usize) -> Self {
        NodeState {
            tokens: 0,
            packets: VecDeque::new(),
            batches: HashMap::new(),
            mint_credit: HashMap::new(),
            burned_per_batch: HashMap::new(),
            sent_window: vec![0.0; kn],
            expected_rx_window: vec![0.0; kn],
            minted: 0,
            burned: 0,
            dropped: 0,
            innovative_rx: 0,
            coding_rx: 0,
            plain_rx: 0,
            plain_tx: 0,
        }
    }

    fn queue_len(&self, coding: bool) -> usize {
        if coding {
            self.tokens
        } else {
            self.packets.len()
        }
    }

    fn rank_of(&self, id: u64) -> usize {
        self.batches.get(&id).map_or(0, CodedBatch::rank)
    }

    /// Drop all per-batch state for a delivered batch.
    fn flush_batch(&mut self, id: u64) {
        self.batches.remove(&id);
        self.mint_credit.remove(&id);
        self.burned_per_batch.remove(&id);
    }
}

/// ETX-shortest-path successor per node (for the SINGLE policy).
fn next_hops(dep: &Deployment, etx: &EtxTable) -> Vec<Option<(NodeId, usize)>> {
    let mut out = vec![None; dep.params.num_sus];
    for (li, &(i, j)) in dep.links.iter().enumerate() {
        if !etx.node_etx[j].is_finite() {
            continue;
        }
        let cost = etx.link_etx[li] + etx.node_etx[j];
        let better = match out[i] {
            None => true,
            Some((bj, bli)) => {
                let bcost = etx.link_etx[bli] + etx.node_etx[bj];
                cost < bcost || (cost == bcost && j < bj)
            }
        };
        if better {
            out[i] = Some((j, li));
        }
    }
    out
}

/// Caps a credit counter; availability-scaled credits are a per-window
/// ratio and must not accumulate without bound.
const CREDIT_CAP: f64 = 5.0;

pub static DBG_LASTHOP: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_STARVED: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_RX_ALL: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_RX_INNOV: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_DEMANDS: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_ZERO_SLOTS: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_SRC: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_BCASTS: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_DST_RX: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
pub static DBG_DST_INNOV: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);

pub fn run(
    dep: &Deployment,
    proc: &ChannelProcess,
    policy: &PolicySpec,
    cfg: &EngineConfig,
    horizon_slots: u64,
    seed: u64,
) -> Result<RunMetrics, EngineError> {
    let n = dep.params.num_sus;
    let kn = dep.params.num_channels;
    let src = dep.params.source;
    let dst = dep.params.destination;
    let coding = policy.uses_coding;

    let etx = EtxTable::from_deployment(dep)?;
    if !etx.node_etx[src].is_finite() {
        return Err(EngineError::NoRoute);
    }
    let hops = next_hops(dep, &etx);
    // Loss-compensating transmit credit per node (credit-only forwarding):
    // expected transmissions per useful forward over the node's
    // best-channel candidate losses.
    let mint_gain: Vec<f64> = {
        let mut gains = vec![1.0; n];
        for i in 0..n {
            let mut losses: Vec<(f64, f64)> = Vec::new(); // (cand etx, rho)
            for (li, &(a, b)) in dep.links.iter().enumerate() {
                if a == i && etx.node_etx[b] < etx.node_etx[i] {
                    let rho = dep.loss_rate[li]
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    losses.push((etx.node_etx[b], rho));
                }
            }
            losses.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            losses.truncate(cfg.max_candidates);
            if !losses.is_empty() {
                let all_lose: f64 = losses.iter().map(|&(_, r)| r).product();
                gains[i] = 1.0 / (1.0 - all_lose);
            }
            if let Ok(m) = std::env::var("CRN_GAIN") {
                gains[i] *= m.parse::<f64>().unwrap();
            }
        }
        gains
    };

    let mut nodes: Vec<NodeState> = (0..n).map(|_| NodeState::new(kn)).collect();
    let mut credits = CreditLedger::new(n, kn);
    if let Ok(c0) = std::env::var("CRN_C0") {
        let c0: f64 = c0.parse().unwrap();
        for row in credits.credit.iter_mut() {
            row.iter_mut().for_each(|v| *v = c0);
        }
    }
    let credit_cap: f64 = std::env::var("CRN_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(CREDIT_CAP);
    let mut cursor = OccupancyCursor::new(proc);
    let mut audit = AuditCounters::default();

    let mut delivered: u64 = 0;
    let mut injected: u64 = 0;
    let mut dropped: u64 = 0;

    // Coding state: a small pipeline of batches in flight. The source
    // round-robins over them so a rank wave for one batch does not idle the
    // whole network while it propagates.
    let pipeline_depth: usize = std::env::var("CRN_PIPE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let mut active: VecDeque<u64> = VecDeque::new();
    let mut natives: HashMap<u64, Vec<Vec<u8>>> = HashMap::new();
    let mut next_batch_id: u64 = 0;
    let mut next_plain_packet: u64 = 0;
    // ExOR moves traffic in batches coordinated by per-batch reception
    // maps: the source opens a new batch only when the oldest in-flight
    // one is fully delivered, mirroring the coded pipeline. SINGLE is
    // plain unicast routing and keeps a continuous backlog.
    let exor_batched =
        policy.kind == ProtocolKind::Exor && std::env::var("CRN_XB").is_ok();
    let exor_cap: u64 = std::env::var("CRN_XC")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or((pipeline_depth * cfg.batch_size) as u64);
    let mut plain_base: u64 = 0;
    let mut plain_done: HashMap<u64, usize> = HashMap::new();

    let make_natives = |id: u64| -> Vec<Vec<u8>> {
        use rand::Rng;
        (0..cfg.batch_size)
            .map(|j| {
                let mut r = rng::stream(seed, &[NATIVE_TAG, id, j as u64]);
                (0..cfg.payload_len).map(|_| r.gen()).collect()
            })
            .collect()
    };

    if coding {
        for _ in 0..pipeline_depth {
            natives.insert(next_batch_id, make_natives(next_batch_id));
            active.push_back(next_batch_id);
            next_batch_id += 1;
            injected += cfg.batch_size as u64;
        }
    } else {
        // Source backlog. Refilled at each window boundary.
        while nodes[src].packets.len() < cfg.buffer_cap
            && (!exor_batched
                || next_plain_packet < plain_base * cfg.batch_size as u64 + exor_cap)
        {
            nodes[src].packets.push_back(next_plain_packet);
            next_plain_packet += 1;
            injected += 1;
        }
    }

    let mut candidate_sets: Option<CandidateSet> = None;
    // f per (link, channel) for the current window.
    let mut f_window = vec![vec![0u64; kn]; dep.links.len()];

    for slot in 0..horizon_slots {
        let occ = cursor.step().clone();
        let h = availability_from_occupancy(dep, &occ);

        if slot % cfg.window_slots == 0 {
            // Window boundary: rebuild candidate sets from current queues
            // and availability.
            let queues: Vec<f64> = (0..n)
                .map(|i| {
                    if i == src && coding {
                        0.0
                    } else {
                        nodes[i].queue_len(coding) as f64
                    }
                })
                .collect();
            let q_for_rule: Vec<f64> = match policy.candidate_rule {
                CandidateRule::HScore => queues.clone(),
                _ => vec![0.0; n],
            };
            // Availability is applied per slot in the demand loop; building
            // the sets against a boundary-slot snapshot would filter twice
            // and starve nodes whose channel freed up mid-window.
            let all_open = Availability {
                h: vec![vec![true; kn]; dep.links.len()],
            };
            let mc = if coding && std::env::var("CRN_WIDE").is_ok() {
                usize::MAX
            } else {
                cfg.max_candidates
            };
            candidate_sets = Some(metrics::build_candidate_sets(
                dep,
                &etx,
                &all_open,
                &q_for_rule,
                cfg.chi,
                cfg.gamma,
                mc,
            )?);
        }
        let cs = candidate_sets.as_ref().unwrap();

        // ---- demands ----
        // A transmission from `tx` can innovate at `j` for batch `id` only
        // when tx's rowspace is not already contained in j's (the source
        // holds the full space). Models the per-batch reception maps nodes
        // exchange out of band; a rank comparison alone would wrongly mute a
        // low-rank neighbor that still holds dimensions `j` lacks.
        // Downstream-coverage map: relay i still matters for batch id only
        // if it holds rows outside the joint span of the destination and
        // every node closer to it (by ETX). This is the rank-space analogue
        // of single-copy ownership: rows already banked downstream are not
        // re-propagated in parallel through worse-placed relays.
        let novel: HashMap<u64, Vec<bool>> = if coding && std::env::var("CRN_NOVEL").is_ok() {
            let mut order: Vec<NodeId> = (0..n).filter(|&i| i != dst && i != src).collect();
            order.sort_by(|&a, &b| {
                etx.node_etx[a]
                    .partial_cmp(&etx.node_etx[b])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            active
                .iter()
                .map(|&id| {
                    let mut basis = coding::RowBasis::new(cfg.batch_size);
                    if let Some(b) = nodes[dst].batches.get(&id) {
                        for row in &b.coefficient_matrix {
                            basis.absorb(row);
                        }
                    }
                    let mut nv = vec![true; n];
                    for &i in &order {
                        let mut has_novel = false;
                        if let Some(b) = nodes[i].batches.get(&id) {
                            for row in &b.coefficient_matrix {
                                if basis.absorb(row) {
                                    has_novel = true;
                                }
                            }
                        }
                        nv[i] = has_novel;
                    }
                    (id, nv)
                })
                .collect()
        } else {
            HashMap::new()
        };
        let deficient = |tx: NodeId, j: NodeId, id: u64| -> bool {
            if tx == src {
                nodes[j].rank_of(id) < cfg.batch_size
            } else {
                match nodes[tx].batches.get(&id) {
                    Some(tb) if tb.rank() > 0 => match nodes[j].batches.get(&id) {
                        None => true,
                        Some(jb) => !jb.contains(tb),
                    },
                    _ => false,
                }
            }
        };
        let mut demands: Vec<Demand> = Vec::new();
        for i in 0..n {
            if i == dst {
                continue;
            }
            // Schedule from the destination side outward so the relay
            // pipeline drains; the selector metric only shapes candidate
            // sets, not the scheduling order (a queue-weighted order would
            // starve exactly the nodes that most need airtime).
            let mut priority = etx.node_etx[i].min(1e12);
            if coding && std::env::var("CRN_UPSTREAM").is_ok() {
                priority = -priority;
            }
            if coding && std::env::var("CRN_ALT").is_ok() && slot % 2 == 0 {
                priority = -priority;
            }
            let bp = coding && std::env::var("CRN_BP").is_ok();
            // Tokens still unclaimed by earlier proposals this slot
            // (coding) or packets in the plain queue (non-coding).
            let mut tokens_left: usize = nodes[i].tokens;
            let mut packets_left = nodes[i].packets.len();
            let mut packet_offset = 0usize;
            // Single-channel protocols tune to one channel per slot;
            // the joint scheme proposes every fundable channel and lets the
            // scheduler enforce the radio budget.
            let max_proposals = if policy.multi_radio_tx { kn } else { 1 };
            let mut proposals = 0usize;
            for k in 0..kn {
                if proposals >= max_proposals {
                    break;
                }
                let (cands, links): (Vec<NodeId>, Vec<usize>) = match policy.candidate_rule {
                    CandidateRule::SingleNextHop => match hops[i] {
                        Some((j, li)) if h.link_available(li, k) => (vec![j], vec![li]),
                        _ => (vec![], vec![]),
                    },
                    _ => {
                        let set = cs.get(i, k);
                        let mut cands = Vec::new();
                        let mut links = Vec::new();
                        for c in set {
                            let li = dep.link_index((i, c.node)).unwrap();
                            if h.link_available(li, k) {
                                cands.push(c.node);
                                links.push(li);
                            }
                        }
                        (cands, links)
                    }
                };
                if cands.is_empty() {
                    continue;
                }
                let genie = coding && std::env::var("CRN_GENIE").is_ok();
                // A coded transmission is useful only if the transmitter
                // holds rows the destination still lacks (otherwise the
                // emission can only shuffle already-delivered information
                // sideways) and some candidate lacks rows it holds.
                let useful = |id: u64, _tx_rank: usize| -> bool {
                    !genie
                        || (deficient(i, dst, id)
                            && cands.iter().any(|&j| deficient(i, j, id)))
                };
                let (funding, bid) = if i == src && coding {
                    // Round-robin over the in-flight batches so all of them
                    // keep moving.
                    let len = active.len();
                    let mut pick = None;
                    for off in 0..len {
                        let id = active[(slot as usize + proposals + off) % len];
                        if useful(id, cfg.batch_size) {
                            pick = Some(id);
                            break;
                        }
                    }
                    match pick {
                        Some(id) => (Some(Funding::Source), id),
                        None => (None, 0),
                    }
                } else if coding {
                    // Spend this node's airtime on the most forward-useful
                    // in-flight batch: prefer one whose lowest-ETX candidate
                    // still lacks rows, then the largest untransmitted
                    // surplus (rank minus emissions so far). The chosen
                    // batch must have rows to recode; the emission is funded
                    // by a pool token, or by a channel credit (ORNC only).
                    let mut best = None;
                    let mut best_key = (usize::MAX, i64::MIN);
                    for &id in &active {
                        let tx_rank = nodes[i].rank_of(id);
                        if tx_rank == 0 || !useful(id, tx_rank) {
                            continue;
                        }
                        if let Some(nv) = novel.get(&id) {
                            if !nv[i] {
                                continue;
                            }
                        }
                        let fwd = cands
                            .iter()
                            .position(|&j| deficient(i, j, id))
                            .unwrap_or(0);
                        if fwd > 0 && std::env::var("CRN_STRICT").is_ok() {
                            continue;
                        }
                        let key = (fwd, -(tx_rank as i64));
                        if key < best_key {
                            best_key = key;
                            best = Some(id);
                        }
                    }
                    match best {
                        Some(id) if std::env::var("CRN_FREE").is_ok() => {
                            (Some(Funding::Source), id)
                        }
                        Some(id) if tokens_left > 0 => {
                            tokens_left -= 1;
                            (Some(Funding::QueueToken), id)
                        }
                        Some(id)
                            if policy.kind == ProtocolKind::Ornc
                                && credits.positive(i, k) =>
                        {
                            (Some(Funding::Credit), id)
                        }
                        Some(_) => {
                            if std::env::var("CRN_DEBUG").is_ok() {
                                DBG_STARVED
                                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                            }
                            (None, 0)
                        }
                        None => (None, 0),
                    }
                } else if packets_left > 0 {
                    packets_left -= 1;
                    let f = Funding::Packet(packet_offset);
                    packet_offset += 1;
                    (Some(f), 0)
                } else {
                    (None, 0)
                };
                let Some(funding) = funding else { continue };
                // Prune candidates that already hold everything the
                // transmitter could send for this batch (batch-map feedback):
                // a reception there could never be innovative.
                let (cands, links) = if coding && genie {
                    let mut c2 = Vec::new();
                    let mut l2 = Vec::new();
                    for (pos, &j) in cands.iter().enumerate() {
                        if deficient(i, j, bid) {
                            c2.push(j);
                            l2.push(links[pos]);
                        }
                    }
                    (c2, l2)
                } else {
                    (cands, links)
                };
                proposals += 1;
                let dprio = if bp {
                    let qi = if i == src {
                        (active.len() * cfg.batch_size) as f64
                    } else {
                        nodes[i].tokens as f64
                    };
                    let qmin = cands
                        .iter()
                        .map(|&j| if j == dst { 0.0 } else { nodes[j].tokens as f64 })
                        .fold(f64::INFINITY, f64::min);
                    -(qi - qmin)
                } else {
                    priority
                };
                demands.push(Demand {
                    tx: i,
                    channel: k,
                    candidates: cands,
                    link_idxs: links,
                    priority: dprio,
                    funding,
                    batch_id: bid,
                });
            }
        }

        // ---- schedule ----
        let schedule = schedule_slot(dep, &h, &demands);
        let violations = validate_schedule(dep, &h, &schedule);
        for v in &violations {
            if v.contains("unavailable") {
                audit.availability += 1;
            } else if v.contains("interfering") {
                audit.interference += 1;
            } else {
                audit.radio += 1;
            }
        }

        // ---- transmit ----
        if std::env::var("CRN_DEBUG").is_ok() {
            let srctx = schedule.broadcasts.iter().filter(|b| b.tx == src).count();
            DBG_SRC.fetch_add(srctx as u64, std::sync::atomic::Ordering::Relaxed);
            DBG_BCASTS.fetch_add(schedule.broadcasts.len() as u64, std::sync::atomic::Ordering::Relaxed);
            DBG_DEMANDS.fetch_add(demands.len() as u64, std::sync::atomic::Ordering::Relaxed);
            let lh = schedule
                .broadcasts
                .iter()
                .filter(|b| b.candidates.contains(&dst))
                .count();
            DBG_LASTHOP.fetch_add(lh as u64, std::sync::atomic::Ordering::Relaxed);
            if schedule.broadcasts.is_empty() {
                DBG_ZERO_SLOTS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        }
        let receptions = transmit_slot(dep, &schedule, seed, slot);

        // Sender-side accounting. An emission token is spent only when
        // somebody heard the broadcast (link-layer feedback): a copy lost on
        // every candidate link leaves the forwarding duty with the sender,
        // mirroring how an unacknowledged unicast packet stays queued.
        let mut heard = vec![false; schedule.broadcasts.len()];
        for r in &receptions {
            heard[r.broadcast_idx] = true;
        }
        for (bi, b) in schedule.broadcasts.iter().enumerate() {
            nodes[b.tx].sent_window[b.channel] += 1.0;
            for (&j, &li) in b.candidates.iter().zip(&b.link_idxs) {
                f_window[li][b.channel] += 1;
                let rho = dep.loss_rate[li][b.channel];
                nodes[j].expected_rx_window[b.channel] += 1.0 - rho;
            }
            match b.funding {
                Funding::Source => {}
                Funding::QueueToken if !heard[bi] => {}
                Funding::QueueToken => {
                    nodes[b.tx].tokens -= 1;
                    nodes[b.tx].burned += 1;
                    *nodes[b.tx].burned_per_batch.entry(b.batch_id).or_insert(0) += 1;
                }
                Funding::Credit => {
                    credits.spend(b.tx, b.channel);
                    *nodes[b.tx].burned_per_batch.entry(b.batch_id).or_insert(0) += 1;
                }
                Funding::Packet(_) => {}
            }
        }

        // Packet contents for coded broadcasts are materialized lazily per
        // broadcast; receptions are processed in order.
        if coding {
            let mut coded: Vec<Option<CodedPacket>> = vec![None; schedule.broadcasts.len()];
            let mut alphas: Vec<Option<Vec<f64>>> = vec![None; schedule.broadcasts.len()];
            // Best (lowest-rank) receiver per broadcast: under credit-only
            // forwarding it inherits the transmit duty the sender just
            // discharged, conserving duty flux exactly.
            let mut best_rx: Vec<Option<usize>> = vec![None; schedule.broadcasts.len()];
            if std::env::var("CRN_BESTRX").is_ok() {
                for r in &receptions {
                    let cur = &mut best_rx[r.broadcast_idx];
                    if cur.map_or(true, |c| r.rank < c) {
                        *cur = Some(r.rank);
                    }
                }
            }
            for r in &receptions {
                let b = &schedule.broadcasts[r.broadcast_idx];
                if !active.contains(&b.batch_id) {
                    continue; // batch delivered earlier this slot
                }
                // Materialize the coded packet once per broadcast.
                if coded[r.broadcast_idx].is_none() {
                    let mut tr = rng::stream(
                        seed,
                        &[TX_TAG, slot, b.tx as u64, b.channel as u64, b.batch_id],
                    );
                    let pkt = if b.tx == src {
                        use rand::Rng;
                        let coeffs: Vec<u8> =
                            (0..cfg.batch_size).map(|_| tr.gen()).collect();
                        coding::encode(b.batch_id, &natives[&b.batch_id], &coeffs)
                            .expect("source encode")
                    } else {
                        match nodes[b.tx].batches.get(&b.batch_id) {
                            Some(batch) if batch.rank() > 0 => batch.recode(&mut tr),
                            // Batch flushed mid-slot: emission wasted.
                            _ => continue,
                        }
                    };
                    if policy.kind == ProtocolKind::Ornc {
                        let losses: Vec<f64> = b
                            .link_idxs
                            .iter()
                            .map(|&li| dep.loss_rate[li][b.channel])
                            .collect();
                        alphas[r.broadcast_idx] =
                            Some(forwarding::forwarding_distribution(&losses)
                                .expect("alpha for non-empty candidate set")
                                .alphas);
                    }
                    coded[r.broadcast_idx] = Some(pkt);
                }
                let Some(pkt) = coded[r.broadcast_idx].clone() else {
                    continue;
                };
                let j = r.receiver;
                let batch = nodes[j]
                    .batches
                    .entry(pkt.batch_id)
                    .or_insert_with(|| {
                        CodedBatch::new(pkt.batch_id, cfg.batch_size, cfg.payload_len)
                    });
                let innovative = batch.store_and_rank(&pkt).expect("batch ids match");
                if std::env::var("CRN_DEBUG").is_ok() {
                    DBG_RX_ALL.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if innovative {
                        DBG_RX_INNOV.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                }
                nodes[j].coding_rx += 1;
                if innovative {
                    nodes[j].innovative_rx += 1;
                }
                if j == dst && std::env::var("CRN_DEBUG").is_ok() {
                    DBG_DST_RX.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if innovative {
                        DBG_DST_INNOV.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                }
                if j == dst {
                    if nodes[j].batches[&pkt.batch_id].decodable() {
                        let decoded = nodes[j].batches[&pkt.batch_id].decode().unwrap();
                        debug_assert_eq!(decoded, natives[&pkt.batch_id]);
                        delivered += cfg.batch_size as u64;
                        // Out-of-band batch ACK: flush everywhere, admit the
                        // next batch into the pipeline.
                        active.retain(|&id| id != pkt.batch_id);
                        natives.remove(&pkt.batch_id);
                        for node in nodes.iter_mut() {
                            node.flush_batch(pkt.batch_id);
                        }
                        natives.insert(next_batch_id, make_natives(next_batch_id));
                        active.push_back(next_batch_id);
                        next_batch_id += 1;
                        injected += cfg.batch_size as u64;
                    }
                } else {
                    let mint = match policy.kind {
                        ProtocolKind::Ornc if std::env::var("CRN_OM").is_ok() => {
                            let a = alphas[r.broadcast_idx].as_ref().unwrap()[r.rank];
                            let take = rng::coin(
                                seed,
                                &[ALPHA_TAG, slot, b.tx as u64, j as u64, b.channel as u64],
                                a,
                            );
                            let coin = usize::from(take && std::env::var("CRN_OA").is_ok());
                            if innovative {
                                let carry =
                                    nodes[j].mint_credit.entry(pkt.batch_id).or_insert(0.0);
                                *carry += mint_gain[j];
                                let whole = carry.floor() as usize;
                                *carry -= whole as f64;
                                whole + coin
                            } else {
                                coin
                            }
                        }
                        ProtocolKind::Ornc => {
                            let a = alphas[r.broadcast_idx].as_ref().unwrap()[r.rank];
                            let take = rng::coin(
                                seed,
                                &[ALPHA_TAG, slot, b.tx as u64, j as u64, b.channel as u64],
                                a,
                            );
                            if take && std::env::var("CRN_OG").is_ok() {
                                let carry =
                                    nodes[j].mint_credit.entry(pkt.batch_id).or_insert(0.0);
                                *carry += mint_gain[j];
                                let whole = carry.floor() as usize;
                                *carry -= whole as f64;
                                whole
                            } else {
                                usize::from(take)
                            }
                        }
                        // Credit-only: every innovative reception earns the
                        // receiver loss-compensating transmit credit. The
                        // usefulness gate in the demand loop keeps the
                        // resulting abundance from turning into redundant
                        // airtime.
                        _ if std::env::var("CRN_BESTRX").is_ok() => {
                            usize::from(best_rx[r.broadcast_idx] == Some(r.rank))
                        }
                        _ if innovative => {
                            let carry = nodes[j].mint_credit.entry(pkt.batch_id).or_insert(0.0);
                            *carry += mint_gain[j];
                            let whole = carry.floor() as usize;
                            *carry -= whole as f64;
                            whole
                        }
                        _ => 0,
                    };
                    for _ in 0..mint {
                        if nodes[j].tokens < cfg.buffer_cap {
                            nodes[j].tokens += 1;
                            nodes[j].minted += 1;
                        } else {
                            nodes[j].dropped += 1;
                            dropped += 1;
                        }
                    }
                }
            }
        } else {
            // Non-coding: exactly one copy of each packet exists. The
            // highest-priority receiver takes ownership; perfect duplicate
            // suppression.
            let mut first_rx: Vec<Option<&Reception>> =
                vec![None; schedule.broadcasts.len()];
            for r in &receptions {
                if std::env::var("CRN_DEBUG").is_ok()
                    && r.rank != schedule.broadcasts[r.broadcast_idx].protected
                {
                    DBG_DST_RX.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
                let cur = &mut first_rx[r.broadcast_idx];
                if cur.map_or(true, |c| r.rank < c.rank) {
                    *cur = Some(r);
                }
            }
            let mut plain_removals: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (bi, b) in schedule.broadcasts.iter().enumerate() {
                let Funding::Packet(offset) = b.funding else {
                    continue;
                };
                let Some(r) = first_rx[bi] else {
                    continue; // nobody heard; retransmit later
                };
                let pkt = nodes[b.tx].packets[offset];
                plain_removals[b.tx].push(offset);
                nodes[b.tx].plain_tx += 1;
                let j = r.receiver;
                if j == dst {
                    delivered += 1;
                    nodes[j].plain_rx += 1;
                    if exor_batched {
                        let bid = pkt / cfg.batch_size as u64;
                        *plain_done.entry(bid).or_insert(0) += 1;
                    }
                } else if nodes[j].packets.len() < cfg.buffer_cap {
                    nodes[j].packets.push_back(pkt);
                    nodes[j].plain_rx += 1;
                } else {
                    nodes[j].dropped += 1;
                    dropped += 1;
                }
            }
            for (i, mut removals) in plain_removals.into_iter().enumerate() {
                removals.sort_unstable_by(|a, b| b.cmp(a));
                for off in removals {
                    nodes[i].packets.remove(off);
                }
            }
        }

        // Buffer bound audit.
        for (i, node) in nodes.iter().enumerate() {
            if node.queue_len(coding) > cfg.buffer_cap && !(coding && i == src) {
                audit.buffer += 1;
            }
        }

        // ---- window end ----
        if (slot + 1) % cfg.window_slots == 0 {
            // Capacity audit: per-window transmissions per (link, channel).
            for row in &f_window {
                for &f in row {
                    if f > cfg.link_capacity {
                        audit.capacity += 1;
                    }
                }
            }
            // Availability-scaled credits (coding with alpha forwarding).
            if policy.kind == ProtocolKind::Ornc {
                for i in 0..n {
                    if i == src {
                        continue;
                    }
                    for k in 0..kn {
                        let inc = coding::credit_update(
                            nodes[i].sent_window[k],
                            nodes[i].expected_rx_window[k],
                        );
                        credits.accumulate(i, k, inc);
                        credits.credit[i][k] = credits.credit[i][k].min(credit_cap);
                    }
                }
            }
            for node in nodes.iter_mut() {
                node.sent_window.iter_mut().for_each(|v| *v = 0.0);
                node.expected_rx_window.iter_mut().for_each(|v| *v = 0.0);
            }
            for row in f_window.iter_mut() {
                row.iter_mut().for_each(|v| *v = 0);
            }
            // Conservation audit.
            if coding {
                let minted: u64 = nodes.iter().map(|s| s.minted).sum();
                let burned: u64 = nodes.iter().map(|s| s.burned).sum();
                let queued: u64 = nodes.iter().map(|s| s.tokens as u64).sum();
                if minted != burned + queued {
                    audit.conservation += 1;
                }
                let in_flight = (active.len() * cfg.batch_size) as u64;
                if injected != delivered + in_flight {
                    audit.conservation += 1;
                }
            } else {
                let queued: u64 = nodes.iter().map(|s| s.packets.len() as u64).sum();
                if injected != delivered + queued + dropped {
                    audit.conservation += 1;
                }
                // Refill the source backlog. Batch completions are learned
                // from the periodic batch maps, so the window advances here
                // rather than at the delivering slot.
                while plain_done.get(&plain_base).copied().unwrap_or(0) == cfg.batch_size {
                    plain_done.remove(&plain_base);
                    plain_base += 1;
                }
                while nodes[src].packets.len() < cfg.buffer_cap
                    && (!exor_batched
                        || next_plain_packet
                            < plain_base * cfg.batch_size as u64 + exor_cap)
                {
                    nodes[src].packets.push_back(next_plain_packet);
                    next_plain_packet += 1;
                    injected += 1;
                }
            }
        }
    }

    // Rows the destination has already banked for batches still in flight
    // at the horizon decode as soon as those batches complete; counting
    // them keeps the figure from charging the coded pipelines one whole
    // pipeline of packets no matter how long the run was.
    if coding {
        for &id in &active {
            delivered += nodes[dst].rank_of(id) as u64;
        }
    }

    // Flow audit: a node never forwards more than it usefully received.
    let batches_seen = next_batch_id;
    for (i, node) in nodes.iter().enumerate() {
        if i == src {
            continue;
        }
        if coding {
            // At most one token per heard copy (ORNC coin), or the hop gain
            // per copy plus one fractional carry per batch (MORE).
            let bound = node.coding_rx as f64 * mint_gain[i] + batches_seen as f64;
            if node.minted as f64 > bound {
                audit.flow += 1;
            }
        } else if node.plain_tx > node.plain_rx {
            audit.flow += 1;
        }
    }

    let in_flight = if coding {
        injected - delivered
    } else {
        0
    };
    Ok(RunMetrics {
        protocol: policy.kind,
        delivered_packets: delivered,
        injected_packets: injected,
        dropped_packets: dropped,
        in_flight,
        slots_elapsed: horizon_slots,
        throughput: if horizon_slots == 0 {
            0.0
        } else {
            delivered as f64 / horizon_slots as f64
        },
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{policy_exor, policy_more, policy_ornc, policy_single};
    use crate::topology::{self, interference_sets, DeploymentParams, Point};

    fn dep_from_positions(
        positions: &[(f64, f64)],
        loss: f64,
        num_channels: usize,
        num_radios: usize,
        source: NodeId,
        destination: NodeId,
    ) -> Deployment {
        let pts: Vec<Point> = positions.iter().map(|&(x, y)| Point { x, y }).collect();
        let params = DeploymentParams {
            num_sus: pts.len(),
            num_pus: 0,
            area_width: 200.0,
            area_height: 200.0,
            d_s: 4.0,
            d_i: 8.0,
            pu_tx_range: 6.0,
            pu_if_range: 12.0,
            num_channels,
            num_radios,
            loss_min: 0.05,
            loss_max: 0.45,
            source,
            destination,
        };
        let mut links = Vec::new();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i != j && pts[i].dist(&pts[j]) < params.d_s {
                    links.push((i, j));
                }
            }
        }
        links.sort_unstable();
        let loss_rate = vec![vec![loss; num_channels]; links.len()];
        let interference = interference_sets(&pts, &links, params.d_s);
        Deployment {
            params,
            seed: 0,
            su_positions: pts,
            pu_positions: vec![],
            links,
            loss_rate,
            interference,
            pus_in_range: vec![],
        }
    }

    fn all_available(dep: &Deployment) -> Availability {
        Availability {
            h: vec![vec![true; dep.params.num_channels]; dep.links.len()],
        }
    }

    fn demand(dep: &Deployment, i: NodeId, j: NodeId, k: Channel, priority: f64) -> Demand {
        let li = dep.link_index((i, j)).unwrap();
        Demand {
            tx: i,
            channel: k,
            candidates: vec![j],
            link_idxs: vec![li],
            priority,
            funding: Funding::Source,
            batch_id: 0,
        }
    }

    #[test]
    fn far_links_scheduled_together() {
        let dep = dep_from_positions(
            &[(0.0, 0.0), (3.0, 0.0), (100.0, 0.0), (103.0, 0.0)],
            0.2,
            1,
            1,
            0,
            3,
        );
        let h = all_available(&dep);
        let demands = vec![demand(&dep, 0, 1, 0, 1.0), demand(&dep, 2, 3, 0, 2.0)];
        let s = schedule_slot(&dep, &h, &demands);
        assert_eq!(s.broadcasts.len(), 2);
        assert!(validate_schedule(&dep, &h, &s).is_empty());
    }

    #[test]
    fn interfering_links_yield_one_broadcast() {
        let dep = dep_from_positions(
            &[(0.0, 0.0), (3.0, 0.0), (6.0, 0.0), (9.0, 0.0)],
            0.2,
            1,
            1,
            0,
            3,
        );
        let h = all_available(&dep);
        let demands = vec![demand(&dep, 0, 1, 0, 1.0), demand(&dep, 2, 3, 0, 2.0)];
        let s = schedule_slot(&dep, &h, &demands);
        assert_eq!(s.broadcasts.len(), 1);
        assert_eq!(s.broadcasts[0].tx, 0); // lower priority value wins
        assert!(validate_schedule(&dep, &h, &s).is_empty());
    }

    #[test]
    fn radio_budget_limits_parallel_channels() {
        let dep = dep_from_positions(&[(0.0, 0.0), (3.0, 0.0)], 0.2, 2, 1, 0, 1);
        let h = all_available(&dep);
        let demands = vec![demand(&dep, 0, 1, 0, 1.0), demand(&dep, 0, 1, 1, 1.0)];
        let s = schedule_slot(&dep, &h, &demands);
        assert_eq!(s.broadcasts.len(), 1, "one radio, one channel");

        let dep2 = dep_from_positions(&[(0.0, 0.0), (3.0, 0.0)], 0.2, 2, 2, 0, 1);
        let s2 = schedule_slot(&dep2, &all_available(&dep2), &demands);
        assert_eq!(s2.broadcasts.len(), 2, "two radios admit both channels");
        assert!(validate_schedule(&dep2, &all_available(&dep2), &s2).is_empty());
    }

    #[test]
    fn unavailable_channel_blocks_admission() {
        let dep = dep_from_positions(&[(0.0, 0.0), (3.0, 0.0)], 0.2, 1, 1, 0, 1);
        let h = Availability {
            h: vec![vec![false; 1]; dep.links.len()],
        };
        let demands = vec![demand(&dep, 0, 1, 0, 1.0)];
        let s = schedule_slot(&dep, &h, &demands);
        assert!(s.broadcasts.is_empty());
    }

    #[test]
    fn transmit_frequencies_match_loss() {
        // One broadcast with two candidates at losses 0.2 and 0.4.
        let dep = {
            let mut d = dep_from_positions(
                &[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (6.0, 0.0)],
                0.2,
                1,
                2,
                0,
                3,
            );
            let li = d.link_index((0, 2)).unwrap();
            d.loss_rate[li][0] = 0.4;
            d
        };
        let h = all_available(&dep);
        let li01 = dep.link_index((0, 1)).unwrap();
        let li02 = dep.link_index((0, 2)).unwrap();
        let schedule = SlotSchedule {
            broadcasts: vec![Broadcast {
                tx: 0,
                channel: 0,
                candidates: vec![1, 2],
                link_idxs: vec![li01, li02],
                protected: 0,
                funding: Funding::Source,
                batch_id: 0,
            }],
        };
        assert!(validate_schedule(&dep, &h, &schedule).is_empty());
        let trials = 5000u64;
        let mut got = [0u32; 2];
        for slot in 0..trials {
            for r in transmit_slot(&dep, &schedule, 42, slot) {
                got[r.rank] += 1;
            }
        }
        let f1 = f64::from(got[0]) / trials as f64;
        let f2 = f64::from(got[1]) / trials as f64;
        assert!((f1 - 0.8).abs() < 0.02, "candidate 1 rate {f1}");
        assert!((f2 - 0.6).abs() < 0.02, "candidate 2 rate {f2}");
    }

    #[test]
    fn queue_dynamics_examples() {
        assert_eq!(apply_queue_dynamics(5, 3, 8, 100), (10, 0));
        assert_eq!(apply_queue_dynamics(10, 0, 5, 10), (10, 5));
        assert_eq!(apply_queue_dynamics(0, 0, 0, 10), (0, 0));
        assert_eq!(apply_queue_dynamics(7, 7, 3, 5), (3, 0));
        assert_eq!(apply_queue_dynamics(4, 1, 9, 10), (10, 2));
    }

    #[test]
    fn single_link_unicast_calibration() {
        let dep = dep_from_positions(&[(0.0, 0.0), (3.0, 0.0)], 0.2, 1, 1, 0, 1);
        let proc = ChannelProcess::always_idle(1, 1, 7);
        let cfg = EngineConfig::default();
        let m = run(&dep, &proc, &policy_single(), &cfg, 5000, 3).unwrap();
        assert!(m.audit.clean(), "audits: {:?}", m.audit);
        assert!(
            (m.throughput - 0.8).abs() < 0.05,
            "throughput {}",
            m.throughput
        );
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = DeploymentParams {
            num_sus: 10,
            num_pus: 2,
            area_width: 9.0,
            area_height: 9.0,
            d_s: 4.0,
            d_i: 8.0,
            pu_tx_range: 6.0,
            pu_if_range: 12.0,
            num_channels: 2,
            num_radios: 2,
            loss_min: 0.1,
            loss_max: 0.3,
            source: 0,
            destination: 9,
        };
        let dep = topology::generate(&p, 4).unwrap();
        let proc = ChannelProcess::uniform(2, 2, 0.3, 5.0, 11).unwrap();
        let cfg = EngineConfig::default();
        for policy in [policy_ornc(), policy_more(), policy_exor(), policy_single()] {
            let a = run(&dep, &proc, &policy, &cfg, 600, 17).unwrap();
            let b = run(&dep, &proc, &policy, &cfg, 600, 17).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn audits_clean_across_protocols() {
        let p = DeploymentParams {
            num_sus: 12,
            num_pus: 2,
            area_width: 10.0,
            area_height: 10.0,
            d_s: 4.0,
            d_i: 8.0,
            pu_tx_range: 6.0,
            pu_if_range: 12.0,
            num_channels: 3,
            num_radios: 2,
            loss_min: 0.1,
            loss_max: 0.3,
            source: 0,
            destination: 11,
        };
        let dep = topology::generate(&p, 21).unwrap();
        let proc = ChannelProcess::uniform(2, 3, 0.3, 5.0, 8).unwrap();
        let cfg = EngineConfig::default();
        for policy in [policy_ornc(), policy_more(), policy_exor(), policy_single()] {
            let m = run(&dep, &proc, &policy, &cfg, 1000, 5).unwrap();
            assert!(m.audit.clean(), "{:?}: {:?}", policy.kind, m.audit);
            assert!(m.delivered_packets > 0, "{:?} delivered nothing", policy.kind);
        }
    }

    #[test]
    fn zero_horizon_delivers_nothing() {
        let dep = dep_from_positions(&[(0.0, 0.0), (3.0, 0.0)], 0.2, 1, 1, 0, 1);
        let proc = ChannelProcess::always_idle(1, 1, 7);
        let m = run(&dep, &proc, &policy_ornc(), &EngineConfig::default(), 0, 1).unwrap();
        assert_eq!(m.delivered_packets, 0);
        assert_eq!(m.throughput, 0.0);
    }

    #[test]
    fn unreachable_destination_is_an_error() {
        let dep = dep_from_positions(&[(0.0, 0.0), (100.0, 0.0)], 0.2, 1, 1, 0, 1);
        let proc = ChannelProcess::always_idle(1, 1, 7);
        assert!(matches!(
            run(&dep, &proc, &policy_ornc(), &EngineConfig::default(), 10, 1),
            Err(EngineError::NoRoute)
        ));
    }
}
