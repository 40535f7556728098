//! The four routing strategies the simulator compares, expressed as policy
//! descriptors consumed by the engine. All four share the same
//! availability-aware channel pick (lowest-index usable channel within the
//! radio budget); they differ only in candidate selection, forwarding rule,
//! and credits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Queue-aware candidate selection, alpha-weighted forwarding, RLNC with
    /// availability-scaled credits.
    Ornc,
    /// ETX candidate selection, RLNC, loss-compensating transmit credits.
    More,
    /// ETX candidate selection, no coding, highest-priority receiver
    /// forwards (duplicate suppression idealized as perfect).
    Exor,
    /// Fixed ETX-shortest path, unicast with per-hop retransmission.
    Single,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolKind::Ornc => "ornc",
            ProtocolKind::More => "more",
            ProtocolKind::Exor => "exor",
            ProtocolKind::Single => "single",
        };
        f.write_str(s)
    }
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ornc" => Ok(ProtocolKind::Ornc),
            "more" => Ok(ProtocolKind::More),
            "exor" => Ok(ProtocolKind::Exor),
            "single" => Ok(ProtocolKind::Single),
            other => Err(format!(
                "unknown protocol '{other}' (expected ornc, more, exor or single)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateRule {
    /// Rank by H = chi*Q + gamma*ETX, order by ETX.
    HScore,
    /// Rank and order by ETX alone.
    PureEtx,
    /// Exactly one next hop: the ETX-shortest path successor.
    SingleNextHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardingRule {
    /// Receiving candidates adopt the packet with the attached probability
    /// alpha; window credits add availability-scaled emissions.
    AlphaWeighted,
    /// Every innovative reception earns loss-compensating transmit credit.
    CreditOnly,
    /// Only the highest-priority receiver keeps the packet.
    HighestPriorityReceiver,
    /// Retransmit to the single next hop until it receives.
    UnicastRetransmit,
}

/// Immutable description of one protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicySpec {
    pub kind: ProtocolKind,
    pub uses_coding: bool,
    pub candidate_rule: CandidateRule,
    pub forwarding_rule: ForwardingRule,
    /// Whether a node may transmit on several channels in the same slot.
    /// The joint channel-assignment scheme exploits all radios; the
    /// baselines are single-channel protocols that tune per slot.
    pub multi_radio_tx: bool,
}

pub fn policy_ornc() -> PolicySpec {
    PolicySpec {
        kind: ProtocolKind::Ornc,
        multi_radio_tx: true,
        uses_coding: true,
        candidate_rule: CandidateRule::HScore,
        forwarding_rule: ForwardingRule::AlphaWeighted,
    }
}

pub fn policy_more() -> PolicySpec {
    PolicySpec {
        kind: ProtocolKind::More,
        multi_radio_tx: false,
        uses_coding: true,
        candidate_rule: CandidateRule::PureEtx,
        forwarding_rule: ForwardingRule::CreditOnly,
    }
}

pub fn policy_exor() -> PolicySpec {
    PolicySpec {
        kind: ProtocolKind::Exor,
        multi_radio_tx: false,
        uses_coding: false,
        candidate_rule: CandidateRule::PureEtx,
        forwarding_rule: ForwardingRule::HighestPriorityReceiver,
    }
}

pub fn policy_single() -> PolicySpec {
    PolicySpec {
        kind: ProtocolKind::Single,
        multi_radio_tx: false,
        uses_coding: false,
        candidate_rule: CandidateRule::SingleNextHop,
        forwarding_rule: ForwardingRule::UnicastRetransmit,
    }
}

pub fn policy_for(kind: ProtocolKind) -> PolicySpec {
    match kind {
        ProtocolKind::Ornc => policy_ornc(),
        ProtocolKind::More => policy_more(),
        ProtocolKind::Exor => policy_exor(),
        ProtocolKind::Single => policy_single(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_uses_one_next_hop() {
        let p = policy_single();
        assert_eq!(p.candidate_rule, CandidateRule::SingleNextHop);
        assert!(!p.uses_coding);
    }

    #[test]
    fn ornc_is_the_only_h_consumer() {
        for kind in [
            ProtocolKind::Ornc,
            ProtocolKind::More,
            ProtocolKind::Exor,
            ProtocolKind::Single,
        ] {
            let p = policy_for(kind);
            assert_eq!(
                p.candidate_rule == CandidateRule::HScore,
                kind == ProtocolKind::Ornc
            );
        }
    }

    #[test]
    fn parse_round_trip() {
        for kind in [
            ProtocolKind::Ornc,
            ProtocolKind::More,
            ProtocolKind::Exor,
            ProtocolKind::Single,
        ] {
            assert_eq!(kind.to_string().parse::<ProtocolKind>().unwrap(), kind);
        }
        assert!("aodv".parse::<ProtocolKind>().is_err());
    }
}
