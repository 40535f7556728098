//! Explicit formulation of the joint channel-assignment / routing
//! throughput program: variable vector, feasibility checker, objective,
//! randomized local-search solver, and an exhaustive grid oracle for tiny
//! instances.
//!
//! The forwarding probabilities alpha and the queue lengths Q are instance
//! data, not decision variables: they are produced by the forwarding and
//! engine layers. The search operates on the schedule probabilities mu; the
//! remaining variables (theta, f, P) have objective-optimal completions
//! that are derived, then everything is re-checked by the full constraint
//! system.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::topology::{Availability, Deployment, Link, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("assignment dimensions do not match the instance: {0}")]
    DimensionMismatch(String),
    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
}

/// One instance of the program: constants and dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NlpInstance {
    pub num_nodes: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub links: Vec<Link>,
    pub num_channels: usize,
    /// Mini-slots per window T.
    pub num_slots: usize,
    pub radios: usize,
    /// Channel capacity B, packets per slot-window.
    pub capacity: f64,
    /// rho[link][k] in (0, 1).
    pub rho: Vec<Vec<f64>>,
    /// h[link][k] in {0, 1}.
    pub h: Vec<Vec<u8>>,
    /// alpha[link][k] in [0, 1]; fixed inputs from the forwarding layer.
    pub alpha: Vec<Vec<f64>>,
    /// Q_i(T), packets.
    pub queue: Vec<f64>,
    /// interference[link_idx] = I set as link indices, sorted.
    pub interference: Vec<Vec<usize>>,
}

impl NlpInstance {
    /// Snapshot of a deployment at a given availability, with uniform
    /// alpha = 1 and empty queues.
    pub fn from_deployment(dep: &Deployment, h: &Availability, num_slots: usize) -> Self {
        NlpInstance {
            num_nodes: dep.params.num_sus,
            source: dep.params.source,
            destination: dep.params.destination,
            links: dep.links.clone(),
            num_channels: dep.params.num_channels,
            num_slots,
            radios: dep.params.num_radios,
            capacity: 100.0,
            rho: dep.loss_rate.clone(),
            h: h.h
                .iter()
                .map(|row| row.iter().map(|&b| u8::from(b)).collect())
                .collect(),
            alpha: vec![vec![1.0; dep.params.num_channels]; dep.links.len()],
            queue: vec![0.0; dep.params.num_sus],
            interference: dep.interference.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    fn in_links(&self, node: NodeId) -> Vec<usize> {
        self.links
            .iter()
            .enumerate()
            .filter(|&(_, &(_, j))| j == node)
            .map(|(li, _)| li)
            .collect()
    }
}

/// Concrete values for the decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// mu[link][k][t] in [0, 1].
    pub mu: Vec<Vec<Vec<f64>>>,
    /// theta[node][k][t] in [0, 1].
    pub theta: Vec<Vec<Vec<f64>>>,
    /// f[link][k] >= 0.
    pub flow: Vec<Vec<f64>>,
    /// P[node][k] >= 0.
    pub sent: Vec<Vec<f64>>,
}

impl Assignment {
    pub fn zeros(inst: &NlpInstance) -> Self {
        Assignment {
            mu: vec![vec![vec![0.0; inst.num_slots]; inst.num_channels]; inst.links.len()],
            theta: vec![vec![vec![0.0; inst.num_slots]; inst.num_channels]; inst.num_nodes],
            flow: vec![vec![0.0; inst.num_channels]; inst.links.len()],
            sent: vec![vec![0.0; inst.num_channels]; inst.num_nodes],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub magnitude: f64,
}

fn dims_ok(inst: &NlpInstance, asn: &Assignment) -> Result<(), OptimizerError> {
    let (e, kn, t, n) = (
        inst.links.len(),
        inst.num_channels,
        inst.num_slots,
        inst.num_nodes,
    );
    let bad = |what: &str| Err(OptimizerError::DimensionMismatch(what.to_string()));
    if asn.mu.len() != e || asn.mu.iter().any(|r| r.len() != kn || r.iter().any(|s| s.len() != t)) {
        return bad("mu");
    }
    if asn.theta.len() != n
        || asn
            .theta
            .iter()
            .any(|r| r.len() != kn || r.iter().any(|s| s.len() != t))
    {
        return bad("theta");
    }
    if asn.flow.len() != e || asn.flow.iter().any(|r| r.len() != kn) {
        return bad("flow");
    }
    if asn.sent.len() != n || asn.sent.iter().any(|r| r.len() != kn) {
        return bad("sent");
    }
    Ok(())
}

/// Evaluates every constraint row; returns the violations (empty =
/// feasible within `tol`). Equality rows use |lhs - rhs| <= tol*max(1,|rhs|).
pub fn check_feasible(
    inst: &NlpInstance,
    asn: &Assignment,
    tol: f64,
) -> Result<Vec<Violation>, OptimizerError> {
    dims_ok(inst, asn)?;
    let mut out = Vec::new();
    let mut push = |constraint: String, magnitude: f64| {
        if magnitude > tol {
            out.push(Violation {
                constraint,
                magnitude,
            });
        }
    };
    let kn = inst.num_channels;
    let nt = inst.num_slots;

    for (li, link) in inst.links.iter().enumerate() {
        for k in 0..kn {
            // data rows
            let rho = inst.rho[li][k];
            if !(rho > 0.0 && rho < 1.0) {
                push(format!("rho bounds {link:?} ch{k}"), 1.0);
            }
            let a = inst.alpha[li][k];
            push(format!("alpha bounds {link:?} ch{k}"), (-a).max(a - 1.0));

            for t in 0..nt {
                let mu = asn.mu[li][k][t];
                push(format!("mu bounds {link:?} ch{k} t{t}"), (-mu).max(mu - 1.0));
                push(
                    format!("availability {link:?} ch{k} t{t}"),
                    mu - f64::from(inst.h[li][k]),
                );
                // interference row: sum over I_ij
                let sum: f64 = inst.interference[li]
                    .iter()
                    .map(|&o| asn.mu[o][k][t])
                    .sum();
                push(format!("interference {link:?} ch{k} t{t}"), sum - 1.0);
                // theta coupling
                let (i, j) = *link;
                if i != inst.destination {
                    push(
                        format!("theta out-edge {link:?} ch{k} t{t}"),
                        mu - asn.theta[i][k][t],
                    );
                }
                if j != inst.source {
                    push(
                        format!("theta in-edge {link:?} ch{k} t{t}"),
                        mu - asn.theta[j][k][t],
                    );
                }
            }
            // capacity row
            let mu_sum: f64 = asn.mu[li][k].iter().sum();
            let f = asn.flow[li][k];
            push(format!("flow lower {link:?} ch{k}"), -f);
            push(
                format!("capacity {link:?} ch{k}"),
                f - mu_sum * inst.capacity,
            );
        }
    }

    for i in 0..inst.num_nodes {
        for t in 0..nt {
            let mut theta_sum = 0.0;
            for k in 0..kn {
                let th = asn.theta[i][k][t];
                push(format!("theta bounds node{i} ch{k} t{t}"), (-th).max(th - 1.0));
                theta_sum += th;
            }
            push(
                format!("radio budget node{i} t{t}"),
                theta_sum - inst.radios as f64,
            );
        }
        for k in 0..kn {
            push(format!("sent lower node{i} ch{k}"), -asn.sent[i][k]);
        }
        // flow balance (i != S)
        if i != inst.source {
            let lhs: f64 = inst
                .in_links(i)
                .iter()
                .flat_map(|&li| {
                    (0..kn).map(move |k| (li, k))
                })
                .map(|(li, k)| asn.flow[li][k] * (1.0 - inst.rho[li][k]) * inst.alpha[li][k])
                .sum();
            let rhs: f64 = asn.sent[i].iter().sum::<f64>() + inst.queue[i];
            let gap = (lhs - rhs).abs() / 1.0f64.max(rhs.abs());
            push(format!("flow balance node{i}"), gap);
        }
    }
    Ok(out)
}

/// Eq-(12) objective: expected packets arriving at the destination.
pub fn objective(inst: &NlpInstance, asn: &Assignment) -> f64 {
    inst.in_links(inst.destination)
        .iter()
        .map(|&li| {
            (0..inst.num_channels)
                .map(|k| asn.flow[li][k] * (1.0 - inst.rho[li][k]))
                .sum::<f64>()
        })
        .sum()
}

/// Completes a mu choice into a full assignment: minimal theta per the
/// coupling rows, capacity-saturating flow, and sent counters absorbing the
/// flow-balance equality. Returns None when the balance cannot be met with
/// nonnegative P (in-flow below the queue backlog).
fn complete(inst: &NlpInstance, mu: &[Vec<Vec<f64>>]) -> Option<Assignment> {
    let kn = inst.num_channels;
    let nt = inst.num_slots;
    let mut asn = Assignment::zeros(inst);
    asn.mu = mu.to_vec();
    for (li, &(i, j)) in inst.links.iter().enumerate() {
        for k in 0..kn {
            for t in 0..nt {
                let m = mu[li][k][t];
                if i != inst.destination && m > asn.theta[i][k][t] {
                    asn.theta[i][k][t] = m;
                }
                if j != inst.source && m > asn.theta[j][k][t] {
                    asn.theta[j][k][t] = m;
                }
            }
            asn.flow[li][k] = mu[li][k].iter().sum::<f64>() * inst.capacity;
        }
    }
    for i in 0..inst.num_nodes {
        if i == inst.source {
            continue;
        }
        let lhs: f64 = inst
            .in_links(i)
            .iter()
            .flat_map(|&li| (0..kn).map(move |k| (li, k)))
            .map(|(li, k)| asn.flow[li][k] * (1.0 - inst.rho[li][k]) * inst.alpha[li][k])
            .sum();
        let p = lhs - inst.queue[i];
        if p < -1e-12 {
            return None;
        }
        asn.sent[i][0] = p.max(0.0);
    }
    Some(asn)
}

/// Scales down mu until the interference, radio, and availability rows hold.
fn repair(inst: &NlpInstance, mu: &mut [Vec<Vec<f64>>]) {
    let kn = inst.num_channels;
    let nt = inst.num_slots;
    for (li, row) in mu.iter_mut().enumerate() {
        for k in 0..kn {
            for t in 0..nt {
                row[k][t] = row[k][t].clamp(0.0, f64::from(inst.h[li][k]));
            }
        }
    }
    // Interference rows: divide every member of an overfull row by its sum.
    for _ in 0..4 {
        let mut dirty = false;
        for li in 0..inst.links.len() {
            for k in 0..kn {
                for t in 0..nt {
                    let sum: f64 = inst.interference[li].iter().map(|&o| mu[o][k][t]).sum();
                    if sum > 1.0 {
                        dirty = true;
                        for &o in &inst.interference[li] {
                            mu[o][k][t] /= sum;
                        }
                    }
                }
            }
        }
        // Radio rows via the derived theta.
        for i in 0..inst.num_nodes {
            for t in 0..nt {
                let mut theta_sum = 0.0;
                for k in 0..kn {
                    let mut th: f64 = 0.0;
                    for (li, &(a, b)) in inst.links.iter().enumerate() {
                        if (a == i && i != inst.destination) || (b == i && i != inst.source) {
                            th = th.max(mu[li][k][t]);
                        }
                    }
                    theta_sum += th;
                }
                if theta_sum > inst.radios as f64 {
                    dirty = true;
                    let scale = inst.radios as f64 / theta_sum;
                    for (li, &(a, b)) in inst.links.iter().enumerate() {
                        if a == i || b == i {
                            for k in 0..kn {
                                mu[li][k][t] *= scale;
                            }
                        }
                    }
                }
            }
        }
        if !dirty {
            break;
        }
    }
}

const FEAS_TOL: f64 = 1e-9;

/// Randomized multi-start coordinate ascent over mu. Deterministic per
/// seed; `budget` counts candidate evaluations.
pub fn solve_local(inst: &NlpInstance, seed: u64, budget: usize) -> Assignment {
    let kn = inst.num_channels;
    let nt = inst.num_slots;
    let e = inst.links.len();
    let dims = e * kn * nt;

    let mut best_mu = vec![vec![vec![0.0; nt]; kn]; e];
    let mut best_obj = complete(inst, &best_mu)
        .filter(|a| check_feasible(inst, a, FEAS_TOL).unwrap().is_empty())
        .map(|a| objective(inst, &a))
        .unwrap_or(f64::NEG_INFINITY);

    let starts = 4usize;
    let per_start = budget.max(starts) / starts;
    for start in 0..starts {
        let mut r = rng::stream(seed, &[0xab01, start as u64]);
        let mut mu = vec![vec![vec![0.0; nt]; kn]; e];
        let mut obj = f64::NEG_INFINITY;
        if let Some(a) = complete(inst, &mu) {
            if check_feasible(inst, &a, FEAS_TOL).unwrap().is_empty() {
                obj = objective(inst, &a);
            }
        }
        for _ in 0..per_start {
            if dims == 0 {
                break;
            }
            let d = r.gen_range(0..dims);
            let (li, rest) = (d / (kn * nt), d % (kn * nt));
            let (k, t) = (rest / nt, rest % nt);
            let snapshot = mu.clone();
            let old = mu[li][k][t];
            // Mostly push upward (the objective is monotone in mu mass),
            // sometimes zero out a coordinate to escape repair-induced
            // plateaus, otherwise resample uniformly.
            let roll: f64 = r.gen();
            let proposal: f64 = if roll < 0.6 {
                (old + r.gen::<f64>()).min(1.0)
            } else if roll < 0.8 {
                0.0
            } else {
                r.gen()
            };
            mu[li][k][t] = proposal;
            repair(inst, &mut mu);
            let candidate = complete(inst, &mu)
                .filter(|a| check_feasible(inst, a, FEAS_TOL).unwrap().is_empty());
            let cand_obj = candidate.as_ref().map(|a| objective(inst, a));
            match cand_obj {
                // Ties are accepted so the walk can drift off plateaus.
                Some(o) if o >= obj => {
                    obj = o;
                }
                _ => {
                    mu = snapshot;
                }
            }
        }
        if obj > best_obj {
            best_obj = obj;
            best_mu = mu;
        }
    }
    complete(inst, &best_mu).expect("best candidate completes")
}

const GRID_CAP: u128 = 10_000_000;

/// Exhaustive grid over the mu box (channels with h = 0 are pinned to 0),
/// with theta/f/P completed as in `solve_local` and every point re-checked
/// by the full constraint system. Tiny instances only.
pub fn grid_oracle(inst: &NlpInstance, resolution: f64) -> Result<Assignment, OptimizerError> {
    assert!(resolution > 0.0 && resolution <= 1.0);
    let kn = inst.num_channels;
    let nt = inst.num_slots;
    let e = inst.links.len();
    // Free dimensions: (link, k, t) with h = 1.
    let mut free = Vec::new();
    for li in 0..e {
        for k in 0..kn {
            if inst.h[li][k] != 0 {
                for t in 0..nt {
                    free.push((li, k, t));
                }
            }
        }
    }
    let steps = (1.0 / resolution).round() as usize + 1;
    let points = (steps as u128)
        .checked_pow(free.len() as u32)
        .unwrap_or(u128::MAX);
    if points > GRID_CAP {
        return Err(OptimizerError::GridTooLarge {
            points,
            cap: GRID_CAP,
        });
    }

    let mut mu = vec![vec![vec![0.0; nt]; kn]; e];
    let mut best: Option<(f64, Assignment)> = None;
    let mut counter = vec![0usize; free.len()];
    loop {
        for (d, &(li, k, t)) in free.iter().enumerate() {
            mu[li][k][t] = (counter[d] as f64 * resolution).min(1.0);
        }
        if let Some(asn) = complete(inst, &mu) {
            if check_feasible(inst, &asn, FEAS_TOL).unwrap().is_empty() {
                let o = objective(inst, &asn);
                if best.as_ref().map_or(true, |(b, _)| o > *b) {
                    best = Some((o, asn));
                }
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == free.len() {
                let (_, asn) = best.unwrap_or_else(|| {
                    let a = Assignment::zeros(inst);
                    (0.0, a)
                });
                return Ok(asn);
            }
            counter[d] += 1;
            if counter[d] < steps {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
    }
}

/// Small example instances used by the verification suite and the CLI.
pub mod instances {
    use super::*;

    /// S -> D over one link.
    pub fn single_link(rho: f64, capacity: f64, num_slots: usize) -> NlpInstance {
        NlpInstance {
            num_nodes: 2,
            source: 0,
            destination: 1,
            links: vec![(0, 1)],
            num_channels: 1,
            num_slots,
            radios: 1,
            capacity,
            rho: vec![vec![rho]],
            h: vec![vec![1]],
            alpha: vec![vec![1.0]],
            queue: vec![0.0; 2],
            interference: vec![vec![0]],
        }
    }

    /// S -> A -> D chain; both links mutually interfering.
    pub fn relay_chain(rho_sa: f64, rho_ad: f64, capacity: f64, num_channels: usize) -> NlpInstance {
        let kn = num_channels;
        NlpInstance {
            num_nodes: 3,
            source: 0,
            destination: 2,
            links: vec![(0, 1), (1, 2)],
            num_channels: kn,
            num_slots: 1,
            radios: 1,
            capacity,
            rho: vec![vec![rho_sa; kn], vec![rho_ad; kn]],
            h: vec![vec![1; kn]; 2],
            alpha: vec![vec![1.0; kn]; 2],
            queue: vec![0.0; 3],
            interference: vec![vec![0, 1], vec![0, 1]],
        }
    }

    /// Two parallel relays S -> {A, B} -> D, disjoint interference.
    pub fn diamond(rho: f64, capacity: f64) -> NlpInstance {
        NlpInstance {
            num_nodes: 4,
            source: 0,
            destination: 3,
            links: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            num_channels: 1,
            num_slots: 1,
            radios: 1,
            capacity,
            rho: vec![vec![rho]; 4],
            h: vec![vec![1]; 4],
            alpha: vec![vec![1.0]; 4],
            queue: vec![0.0; 4],
            // every pair of these links shares an endpoint neighborhood
            interference: vec![vec![0, 1, 2, 3]; 4],
        }
    }

    /// Single link with the only channel blocked by a PU.
    pub fn blocked_link(capacity: f64) -> NlpInstance {
        let mut inst = single_link(0.2, capacity, 1);
        inst.h[0][0] = 0;
        inst
    }

    /// The fixed verification suite of tiny instances.
    pub fn verification_suite() -> Vec<(String, NlpInstance)> {
        let mut out: Vec<(String, NlpInstance)> = Vec::new();
        out.push(("single_link_r02".into(), single_link(0.2, 10.0, 1)));
        out.push(("single_link_r05".into(), single_link(0.5, 10.0, 1)));
        out.push(("single_link_t2".into(), single_link(0.3, 10.0, 2)));
        out.push(("blocked_link".into(), blocked_link(10.0)));
        out.push(("relay_k1".into(), relay_chain(0.2, 0.1, 10.0, 1)));
        out.push(("relay_k2".into(), relay_chain(0.2, 0.1, 10.0, 2)));
        out.push(("relay_lossy".into(), relay_chain(0.3, 0.3, 5.0, 1)));
        out.push(("diamond".into(), diamond(0.2, 10.0)));
        out.push(("diamond_lossy".into(), diamond(0.4, 10.0)));
        out.push(("single_link_b100".into(), single_link(0.25, 100.0, 1)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_assignment_is_feasible() {
        for (_, inst) in instances::verification_suite() {
            let asn = Assignment::zeros(&inst);
            assert!(check_feasible(&inst, &asn, 1e-9).unwrap().is_empty());
        }
    }

    #[test]
    fn interference_violation_magnitude() {
        let inst = instances::relay_chain(0.2, 0.2, 10.0, 1);
        let mut asn = Assignment::zeros(&inst);
        asn.mu[0][0][0] = 0.6;
        asn.mu[1][0][0] = 0.6;
        asn.theta[0][0][0] = 0.6;
        asn.theta[1][0][0] = 0.6;
        asn.theta[2][0][0] = 0.6;
        let v = check_feasible(&inst, &asn, 1e-9).unwrap();
        let worst = v
            .iter()
            .filter(|x| x.constraint.starts_with("interference"))
            .map(|x| x.magnitude)
            .fold(0.0, f64::max);
        assert!((worst - 0.2).abs() < 1e-12);
    }

    #[test]
    fn capacity_violation_magnitude() {
        let inst = instances::single_link(0.2, 10.0, 1);
        let mut asn = Assignment::zeros(&inst);
        asn.mu[0][0][0] = 0.5;
        asn.theta[0][0][0] = 0.5;
        asn.theta[1][0][0] = 0.5;
        asn.flow[0][0] = 0.5 * 10.0 + 1.0;
        // absorb balance at D
        asn.sent[1][0] = asn.flow[0][0] * 0.8;
        let v = check_feasible(&inst, &asn, 1e-9).unwrap();
        let cap = v
            .iter()
            .find(|x| x.constraint.starts_with("capacity"))
            .expect("capacity violated");
        assert!((cap.magnitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let inst = instances::single_link(0.2, 10.0, 1);
        let asn = Assignment::zeros(&instances::diamond(0.2, 10.0));
        assert!(matches!(
            check_feasible(&inst, &asn, 1e-9),
            Err(OptimizerError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn objective_values() {
        let inst = instances::single_link(0.2, 10.0, 1);
        let mut asn = Assignment::zeros(&inst);
        asn.flow[0][0] = 10.0;
        assert!((objective(&inst, &asn) - 8.0).abs() < 1e-12);
        asn.flow[0][0] = 0.0;
        assert_eq!(objective(&inst, &asn), 0.0);

        // Two parallel channels with different losses.
        let mut inst2 = instances::single_link(0.2, 10.0, 1);
        inst2.num_channels = 2;
        inst2.rho = vec![vec![0.2, 0.4]];
        inst2.h = vec![vec![1, 1]];
        inst2.alpha = vec![vec![1.0, 1.0]];
        let mut asn2 = Assignment::zeros(&inst2);
        asn2.flow[0][0] = 5.0;
        asn2.flow[0][1] = 5.0;
        assert!((objective(&inst2, &asn2) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn objective_linear_in_flow() {
        let inst = instances::diamond(0.2, 10.0);
        let mut asn = Assignment::zeros(&inst);
        asn.flow[2][0] = 3.0;
        asn.flow[3][0] = 4.0;
        let one = objective(&inst, &asn);
        asn.flow[2][0] = 6.0;
        asn.flow[3][0] = 8.0;
        assert!((objective(&inst, &asn) - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn solve_local_single_link_near_analytic() {
        let inst = instances::single_link(0.2, 10.0, 1);
        let asn = solve_local(&inst, 1, 400);
        assert!(check_feasible(&inst, &asn, 1e-9).unwrap().is_empty());
        let analytic = 10.0 * 0.8;
        assert!(
            objective(&inst, &asn) >= analytic * 0.99,
            "objective {}",
            objective(&inst, &asn)
        );
    }

    #[test]
    fn blocked_channel_forces_zero() {
        let inst = instances::blocked_link(10.0);
        let asn = solve_local(&inst, 1, 200);
        assert!(check_feasible(&inst, &asn, 1e-9).unwrap().is_empty());
        assert_eq!(objective(&inst, &asn), 0.0);
        let g = grid_oracle(&inst, 0.1).unwrap();
        assert_eq!(objective(&inst, &g), 0.0);
    }

    #[test]
    fn grid_matches_analytic_single_link() {
        let inst = instances::single_link(0.2, 10.0, 1);
        let g = grid_oracle(&inst, 0.1).unwrap();
        let analytic = 8.0;
        assert!((objective(&inst, &g) - analytic).abs() <= 0.1 * 10.0 * 0.8 + 1e-9);
    }

    #[test]
    fn relay_local_within_grid_gap() {
        let inst = instances::relay_chain(0.2, 0.1, 10.0, 2);
        let g = grid_oracle(&inst, 0.05).unwrap();
        let l = solve_local(&inst, 3, 2000);
        assert!(check_feasible(&inst, &l, 1e-9).unwrap().is_empty());
        assert!(objective(&inst, &l) >= 0.95 * objective(&inst, &g));
    }

    #[test]
    fn grid_cap_enforced() {
        let mut inst = instances::diamond(0.2, 10.0);
        inst.num_slots = 4;
        let mut asn_dims = 0;
        for li in 0..inst.links.len() {
            for row in inst.rho[li].iter() {
                let _ = row;
                asn_dims += inst.num_slots;
            }
        }
        assert!(asn_dims >= 16);
        assert!(matches!(
            grid_oracle(&inst, 0.05),
            Err(OptimizerError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn solve_local_replay_deterministic() {
        let inst = instances::relay_chain(0.2, 0.1, 10.0, 2);
        let a = solve_local(&inst, 9, 500);
        let b = solve_local(&inst, 9, 500);
        assert_eq!(a, b);
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = instances::relay_chain(0.2, 0.1, 10.0, 2);
        let back = NlpInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.links, inst.links);
        assert_eq!(back.rho, inst.rho);
    }
}
