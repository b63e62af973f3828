use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fusion::{GlobalPerceptionMap, Itcs, Observation};
use crate::assoc::{cluster, stitch, Candidate};
use crate::simcore::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Each unit runs every task for its own areas.
    Vertical,
    /// Each unit runs one task for all areas.
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Fusion,
    Prediction,
    Planning,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Fusion, Task::Prediction, Task::Planning];
}

/// Per-object service time of each task, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTimes {
    pub fusion_us: f64,
    pub prediction_us: f64,
    pub planning_us: f64,
}

impl ServiceTimes {
    pub fn uniform(us: f64) -> Self {
        Self { fusion_us: us, prediction_us: us, planning_us: us }
    }

    pub fn get(&self, task: Task) -> f64 {
        match task {
            Task::Fusion => self.fusion_us,
            Task::Prediction => self.prediction_us,
            Task::Planning => self.planning_us,
        }
    }

    pub fn total(&self) -> f64 {
        self.fusion_us + self.prediction_us + self.planning_us
    }
}

impl Default for ServiceTimes {
    fn default() -> Self {
        Self::uniform(10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeUnit {
    pub id: u32,
    pub service: ServiceTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PartitionPlan {
    /// area → unit
    Vertical { units: Vec<ComputeUnit>, areas: BTreeMap<u32, u32> },
    /// task → units sharing it
    Horizontal { units: Vec<ComputeUnit>, tasks: BTreeMap<Task, Vec<u32>> },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("area {0} has no compute unit")]
    UnassignedArea(u32),
    #[error("task {0:?} has no compute unit")]
    UnassignedTask(Task),
    #[error("unit {0} is referenced but not defined")]
    UnknownUnit(u32),
    #[error("unit {0} is assigned more than one task")]
    UnitReused(u32),
    #[error("a plan needs at least {0} unit(s)")]
    TooFewUnits(usize),
}

impl PartitionPlan {
    /// Areas dealt round-robin over the units in id order.
    pub fn vertical(units: Vec<ComputeUnit>, areas: &BTreeSet<u32>) -> Result<Self, PartitionError> {
        if units.is_empty() {
            return Err(PartitionError::TooFewUnits(1));
        }
        let map = areas.iter().enumerate().map(|(k, a)| (*a, units[k % units.len()].id)).collect();
        Ok(PartitionPlan::Vertical { units, areas: map })
    }

    /// Units dealt round-robin over fusion, prediction, planning.
    pub fn horizontal(units: Vec<ComputeUnit>) -> Result<Self, PartitionError> {
        if units.len() < Task::ALL.len() {
            return Err(PartitionError::TooFewUnits(Task::ALL.len()));
        }
        let mut tasks: BTreeMap<Task, Vec<u32>> = BTreeMap::new();
        for (k, u) in units.iter().enumerate() {
            tasks.entry(Task::ALL[k % Task::ALL.len()]).or_default().push(u.id);
        }
        Ok(PartitionPlan::Horizontal { units, tasks })
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            PartitionPlan::Vertical { .. } => Scheme::Vertical,
            PartitionPlan::Horizontal { .. } => Scheme::Horizontal,
        }
    }

    pub fn units(&self) -> &[ComputeUnit] {
        match self {
            PartitionPlan::Vertical { units, .. } | PartitionPlan::Horizontal { units, .. } => units,
        }
    }

    fn unit(&self, id: u32) -> Result<&ComputeUnit, PartitionError> {
        self.units().iter().find(|u| u.id == id).ok_or(PartitionError::UnknownUnit(id))
    }

    /// Check the plan against the areas present in a workload.
    pub fn validate(&self, workload_areas: &BTreeSet<u32>) -> Result<(), PartitionError> {
        match self {
            PartitionPlan::Vertical { areas, .. } => {
                for a in workload_areas {
                    let u = areas.get(a).ok_or(PartitionError::UnassignedArea(*a))?;
                    self.unit(*u)?;
                }
            }
            PartitionPlan::Horizontal { tasks, .. } => {
                let mut seen = BTreeSet::new();
                for t in Task::ALL {
                    let us = tasks.get(&t).filter(|v| !v.is_empty()).ok_or(PartitionError::UnassignedTask(t))?;
                    for u in us {
                        self.unit(*u)?;
                        if !seen.insert(*u) {
                            return Err(PartitionError::UnitReused(*u));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Analytic timing of one batch with `per_area` objects in each area.
    pub fn metrics(&self, per_area: &BTreeMap<u32, usize>) -> Result<PartitionMetrics, PartitionError> {
        let areas: BTreeSet<u32> = per_area.keys().copied().collect();
        self.validate(&areas)?;
        let total: usize = per_area.values().sum();
        let mut busy_ms: BTreeMap<u32, f64> = self.units().iter().map(|u| (u.id, 0.0)).collect();
        match self {
            PartitionPlan::Vertical { areas, .. } => {
                for (a, n) in per_area {
                    let u = areas[a];
                    *busy_ms.get_mut(&u).expect("validated") += self.unit(u)?.service.total() * *n as f64 / 1000.0;
                }
            }
            PartitionPlan::Horizontal { tasks, .. } => {
                for (task, us) in tasks {
                    let share = total as f64 / us.len() as f64;
                    for u in us {
                        *busy_ms.get_mut(u).expect("validated") = self.unit(*u)?.service.get(*task) * share / 1000.0;
                    }
                }
            }
        }
        let makespan_ms = busy_ms.values().copied().fold(0.0, f64::max);
        let utilization = busy_ms
            .iter()
            .map(|(u, b)| (*u, if makespan_ms > 0.0 { b / makespan_ms } else { 0.0 }))
            .collect();
        Ok(PartitionMetrics {
            scheme: self.scheme(),
            objects: total,
            makespan_ms,
            unit_busy_ms: busy_ms,
            utilization,
            throughput_objects_per_s: if makespan_ms > 0.0 { total as f64 / (makespan_ms / 1000.0) } else { 0.0 },
        })
    }
}

/// Timing of one batch. Under the horizontal scheme the makespan is the
/// pipeline bound, i.e. the slowest stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionMetrics {
    pub scheme: Scheme,
    pub objects: usize,
    pub makespan_ms: f64,
    pub unit_busy_ms: BTreeMap<u32, f64>,
    pub utilization: BTreeMap<u32, f64>,
    pub throughput_objects_per_s: f64,
}

impl Itcs {
    /// One fusion cycle executed under `plan`. The map is the same as
    /// [`Itcs::fuse_global`] would produce; only the timing differs.
    pub fn run_partitioned(
        &mut self,
        plan: &PartitionPlan,
        t: SimTime,
    ) -> Result<(GlobalPerceptionMap, PartitionMetrics), PartitionError> {
        let per_area = self.inbox().area_counts();
        let metrics = plan.metrics(&per_area)?;
        let obs = self.take_workload(t);
        let gate = self.params.gate();
        let cands: Vec<Candidate> = obs.iter().map(Observation::candidate).collect();

        // which shard clusters each observation
        let shard_of: Vec<usize> = match plan {
            PartitionPlan::Vertical { .. } => obs.iter().map(|o| o.area as usize).collect(),
            PartitionPlan::Horizontal { tasks, .. } => {
                let fusers = &tasks[&Task::Fusion];
                let order: BTreeMap<u32, usize> = per_area.keys().enumerate().map(|(k, a)| (*a, k % fusers.len())).collect();
                obs.iter().map(|o| order[&o.area]).collect()
            }
        };
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, s) in shard_of.iter().enumerate() {
            members.entry(*s).or_default().push(i);
        }
        let local: Vec<Vec<Vec<usize>>> = members
            .values()
            .map(|idx| {
                let sub: Vec<Candidate> = idx.iter().map(|i| cands[*i]).collect();
                cluster(&sub, gate).into_iter().map(|c| c.into_iter().map(|j| idx[j]).collect()).collect()
            })
            .collect();
        let comps = stitch(&cands, gate, &shard_of, &local);
        self.apply_components(t, &obs, &comps);
        Ok((self.map().clone(), metrics))
    }
}
