use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::simcore::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkState {
    Cv2xOk,
    Fallback5g,
    SafeStop,
}

impl LinkState {
    pub fn name(self) -> &'static str {
        match self {
            LinkState::Cv2xOk => "cv2x_ok",
            LinkState::Fallback5g => "fallback_5g",
            LinkState::SafeStop => "safe_stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailoverParams {
    /// Consecutive ticks without a sidelink frame before switching to 5G.
    pub silent_ticks_to_fallback: u32,
    /// Consecutive ticks without a 5G frame, once in fallback, before stopping.
    pub silent_ticks_to_stop: u32,
    pub stop_decel_mps2: f64,
}

impl Default for FailoverParams {
    fn default() -> Self {
        Self { silent_ticks_to_fallback: 5, silent_ticks_to_stop: 5, stop_decel_mps2: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinkTransition {
    pub time: SimTime,
    pub from: LinkState,
    pub to: LinkState,
}

/// Per-vehicle link supervisor, stepped once per fusion tick.
#[derive(Debug, Clone)]
pub struct LinkMonitor {
    params: FailoverParams,
    state: LinkState,
    since: SimTime,
    silent_cv2x: u32,
    silent_5g: u32,
    dwell: BTreeMap<LinkState, u64>,
    transitions: Vec<LinkTransition>,
}

impl LinkMonitor {
    pub fn new(params: FailoverParams, start: SimTime) -> Self {
        Self {
            params,
            state: LinkState::Cv2xOk,
            since: start,
            silent_cv2x: 0,
            silent_5g: 0,
            dwell: BTreeMap::new(),
            transitions: Vec::new(),
        }
    }

    pub fn state(&self) -> LinkState {
        self.state
    }

    pub fn params(&self) -> &FailoverParams {
        &self.params
    }

    pub fn transitions(&self) -> &[LinkTransition] {
        &self.transitions
    }

    /// Feed one tick: whether any sidelink / cellular frame arrived since the
    /// previous tick.
    pub fn step(&mut self, t: SimTime, cv2x_heard: bool, fiveg_heard: bool) -> Option<LinkTransition> {
        if cv2x_heard {
            self.silent_cv2x = 0;
            self.silent_5g = 0;
            return (self.state != LinkState::Cv2xOk).then(|| self.enter(t, LinkState::Cv2xOk));
        }
        self.silent_cv2x += 1;
        match self.state {
            LinkState::Cv2xOk if self.silent_cv2x >= self.params.silent_ticks_to_fallback => {
                self.silent_5g = 0;
                Some(self.enter(t, LinkState::Fallback5g))
            }
            LinkState::Fallback5g => {
                if fiveg_heard {
                    self.silent_5g = 0;
                    None
                } else {
                    self.silent_5g += 1;
                    (self.silent_5g >= self.params.silent_ticks_to_stop).then(|| self.enter(t, LinkState::SafeStop))
                }
            }
            _ => None,
        }
    }

    fn enter(&mut self, t: SimTime, to: LinkState) -> LinkTransition {
        *self.dwell.entry(self.state).or_default() += t.since(self.since);
        let tr = LinkTransition { time: t, from: self.state, to };
        self.state = to;
        self.since = t;
        self.transitions.push(tr);
        tr
    }

    /// Time spent in each state up to `end`.
    pub fn dwell_ms(&self, end: SimTime) -> BTreeMap<LinkState, u64> {
        let mut d = self.dwell.clone();
        *d.entry(self.state).or_default() += end.since(self.since);
        d
    }
}
