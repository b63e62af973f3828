//! Message-level channel models for the C-V2X sidelink and the cellular
//! fallback: coverage gating, loss, latency with uniform jitter, and per-link
//! token-bucket queueing.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{RngStream, SimTime};
use crate::world::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Cv2x,
    #[serde(rename = "fiveg", alias = "five_g")]
    FiveG,
}

impl ChannelKind {
    pub fn label(self) -> &'static str {
        match self {
            ChannelKind::Cv2x => "cv2x",
            ChannelKind::FiveG => "fiveg",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{field}: {constraint}")]
    Invalid { field: &'static str, constraint: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub base_latency_ms: u64,
    pub jitter_min_ms: u64,
    pub jitter_max_ms: u64,
    pub loss_prob: f64,
    /// Maximum source-destination distance; `f64::INFINITY` for cellular.
    pub coverage_m: f64,
    pub bandwidth_bps: u64,
}

/// Link budget shared by both channel defaults (bytes/s).
pub const DEFAULT_BANDWIDTH_BPS: u64 = 1_500_000;

impl ChannelSpec {
    /// Sidelink defaults: 20 ms + U[3,10] ms (mean 26.5 ms), 300 m reach.
    pub fn cv2x_default() -> Self {
        Self {
            kind: ChannelKind::Cv2x,
            base_latency_ms: 20,
            jitter_min_ms: 3,
            jitter_max_ms: 10,
            loss_prob: 0.0,
            coverage_m: 300.0,
            bandwidth_bps: DEFAULT_BANDWIDTH_BPS,
        }
    }

    /// Cellular defaults, deliberately worse than a healthy sidelink.
    pub fn fiveg_default() -> Self {
        Self {
            kind: ChannelKind::FiveG,
            base_latency_ms: 40,
            jitter_min_ms: 5,
            jitter_max_ms: 30,
            loss_prob: 0.001,
            coverage_m: f64::INFINITY,
            bandwidth_bps: DEFAULT_BANDWIDTH_BPS,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<ChannelError>> {
        let mut errs = Vec::new();
        if self.jitter_min_ms > self.jitter_max_ms {
            errs.push(ChannelError::Invalid {
                field: "jitter_min_ms/jitter_max_ms",
                constraint: format!(
                    "jitter_min_ms ({}) must be <= jitter_max_ms ({})",
                    self.jitter_min_ms, self.jitter_max_ms
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            errs.push(ChannelError::Invalid {
                field: "loss_prob",
                constraint: format!("must be in [0, 1], got {}", self.loss_prob),
            });
        }
        if !(self.coverage_m > 0.0) {
            errs.push(ChannelError::Invalid {
                field: "coverage_m",
                constraint: format!("must be > 0, got {}", self.coverage_m),
            });
        }
        if self.bandwidth_bps == 0 {
            errs.push(ChannelError::Invalid {
                field: "bandwidth_bps",
                constraint: "must be > 0".into(),
            });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Endpoint of a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    Sor(u32),
    Sov(u64),
    Cloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message<P> {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub t_send: SimTime,
    pub size_bytes: u64,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Arrives(SimTime),
    Dropped,
    OutOfCoverage,
}

#[derive(Debug, Clone, Copy, Default)]
struct LinkState {
    /// The link transmits one message at a time; this is when it frees up.
    busy_until: SimTime,
}

/// Per-directed-link transmit backlogs.
#[derive(Debug, Clone, Default)]
pub struct LinkTable {
    links: BTreeMap<(NodeRef, NodeRef), LinkState>,
}

impl LinkTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queueing delay in whole ms for `size_bytes` entering the `(src, dst)`
    /// link at `t_send`. The delay is the time to drain the bytes already
    /// queued; each message then holds the link for its transmission time
    /// rounded up to the next ms.
    pub fn account_bandwidth(
        &mut self,
        link: (NodeRef, NodeRef),
        t_send: SimTime,
        size_bytes: u64,
        bandwidth_bps: u64,
    ) -> u64 {
        assert!(bandwidth_bps > 0, "bandwidth must be positive");
        let st = self.links.entry(link).or_default();
        let delay = st.busy_until.since(t_send);
        let tx_ms = (size_bytes * 1000).div_ceil(bandwidth_bps);
        st.busy_until = t_send + delay + tx_ms;
        delay
    }
}

/// Outage window: messages sent during it, or still in flight when it
/// starts, are lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outage {
    pub from: SimTime,
    pub until: Option<SimTime>,
}

impl Outage {
    pub fn covers(&self, t: SimTime) -> bool {
        t >= self.from && self.until.is_none_or(|u| t < u)
    }

    /// Whether the window overlaps the closed interval `[a, b]`.
    pub fn overlaps(&self, a: SimTime, b: SimTime) -> bool {
        self.from <= b && self.until.is_none_or(|u| u > a)
    }
}

/// One channel: its spec, outage schedule and link backlogs.
#[derive(Debug, Clone)]
pub struct Channel {
    pub spec: ChannelSpec,
    pub outages: Vec<Outage>,
    links: LinkTable,
}

impl Channel {
    pub fn new(spec: ChannelSpec) -> Self {
        Self {
            spec,
            outages: Vec::new(),
            links: LinkTable::new(),
        }
    }

    pub fn with_outages(mut self, outages: Vec<Outage>) -> Self {
        self.outages = outages;
        self
    }

    pub fn is_down(&self, t: SimTime) -> bool {
        self.outages.iter().any(|o| o.covers(t))
    }

    pub fn deliver<P>(&mut self, msg: &Message<P>, src_pos: Vec2, dst_pos: Vec2, rng: &mut RngStream) -> Delivery {
        if self.is_down(msg.t_send) {
            return Delivery::Dropped;
        }
        match deliver(msg, &self.spec, src_pos, dst_pos, rng, &mut self.links) {
            Delivery::Arrives(at) if self.outages.iter().any(|o| o.overlaps(msg.t_send, at)) => Delivery::Dropped,
            d => d,
        }
    }
}

/// Decide the fate of `msg` on a channel described by `spec`.
pub fn deliver<P>(
    msg: &Message<P>,
    spec: &ChannelSpec,
    src_pos: Vec2,
    dst_pos: Vec2,
    rng: &mut RngStream,
    links: &mut LinkTable,
) -> Delivery {
    if src_pos.distance(dst_pos) > spec.coverage_m {
        return Delivery::OutOfCoverage;
    }
    if spec.loss_prob > 0.0 && rng.random_bool(spec.loss_prob) {
        return Delivery::Dropped;
    }
    let jitter = rng.random_range(spec.jitter_min_ms..=spec.jitter_max_ms);
    let queue = links.account_bandwidth((msg.src, msg.dst), msg.t_send, msg.size_bytes, spec.bandwidth_bps);
    Delivery::Arrives(msg.t_send + spec.base_latency_ms + jitter + queue)
}
