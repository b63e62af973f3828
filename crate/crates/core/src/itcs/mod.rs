//! Cloud-side pipeline: ingest semantic frames, fuse them into a global
//! perception map, predict, monitor lanes, plan routes, and model vertical vs
//! horizontal compute partitioning.

mod fusion;
mod lanes;
mod partition;
mod plans;

pub use fusion::{GlobalPerceptionMap, Inbox, Itcs, ItcsParams, Observation, Track, AREA_LENGTH_M};
pub use lanes::{monitor_lanes, plan_routes, route_weight, LaneStats, Origin, RouteRequest, RoutingError};
pub use partition::{
    ComputeUnit, PartitionError, PartitionMetrics, PartitionPlan, Scheme, ServiceTimes, Task,
};
pub use plans::{RoutePlan, Trajectory, TrajectoryPlan, Waypoint, PLAN_HORIZON_MS, PLAN_STEP_MS};
