//! Scenario files, the mode-dependent run loop, metric reports, A/B
//! comparison and parameter sweeps.

mod config;
mod engine;
mod report;
mod sweep;

pub use config::{
    load_scenario, parse_scenario, AgentConfig, ChannelConfig, ChannelsConfig, ControlParams, CorridorConfig,
    CrossingConfig, EdgeConfig, FaultConfig, Issue, NodeConfig, OccluderConfig, PartitionConfig, PlacedSor, Scenario,
    ScenarioConfig, ScenarioError, SorConfig, SorSettings, SovConfig,
};
pub use engine::{run, FusionLogEntry, RunOutcome};
pub use report::{compare, deltas_to_table, number, Delta, MetricRecord, Report, ReportError};
pub use sweep::{sweep, sweep_table, ScenarioSource, SweepPoint};
