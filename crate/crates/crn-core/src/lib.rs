//! Deterministic time-slotted simulator of multi-channel multi-radio
//! cognitive radio networks with joint channel assignment and opportunistic
//! routing, plus an explicit formulation and small-instance solver of the
//! associated throughput-maximization program.

pub mod coding;
pub mod engine;
pub mod forwarding;
pub mod metrics;
pub mod optimizer;
pub mod protocols;
pub mod rng;
pub mod topology;

pub use engine::{EngineConfig, RunMetrics};
pub use protocols::{policy_for, PolicySpec, ProtocolKind};
pub use topology::{ChannelProcess, Deployment, DeploymentParams};
