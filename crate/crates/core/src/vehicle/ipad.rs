use std::collections::BTreeMap;

use crate::itcs::TrajectoryPlan;
use crate::simcore::SimTime;
use crate::world::Vec2;

/// Position disagreement at handoff that counts as a discontinuity.
pub const HANDOFF_GAP_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlAction {
    /// Track a roadside plan.
    FollowPlan { issuer: u32, position: Vec2, target_speed_mps: f64 },
    /// No valid plan: the on-board planner keeps the current route.
    OnBoard,
}

/// Picks which roadside trajectory plan to follow and watches handoffs
/// between issuers.
#[derive(Debug, Clone, Default)]
pub struct PlanFollower {
    plans: BTreeMap<u32, TrajectoryPlan>,
    following: Option<TrajectoryPlan>,
    pub handoffs: u32,
    pub discontinuities: u32,
}

impl PlanFollower {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keep the newest valid plan per issuer.
    pub fn offer(&mut self, plan: TrajectoryPlan) {
        if !plan.is_valid() {
            return;
        }
        let newer = self.plans.get(&plan.issuer).is_none_or(|p| plan.issued_at > p.issued_at);
        if newer {
            self.plans.insert(plan.issuer, plan);
        }
    }

    pub fn follow(&mut self, t: SimTime) -> ControlAction {
        self.plans.retain(|_, p| p.valid_until >= t);
        let best = self
            .plans
            .values()
            .filter(|p| p.covers(t))
            .max_by(|a, b| a.issued_at.cmp(&b.issued_at).then(b.issuer.cmp(&a.issuer)))
            .cloned();
        let Some(plan) = best else {
            self.following = None;
            return ControlAction::OnBoard;
        };
        if let Some(prev) = &self.following {
            if prev.issuer != plan.issuer {
                self.handoffs += 1;
                let gap = match (prev.state_at(t), plan.state_at(t)) {
                    (Some((a, _)), Some((b, _))) => a.distance(b),
                    _ => f64::INFINITY,
                };
                if gap >= HANDOFF_GAP_M {
                    self.discontinuities += 1;
                }
            }
        }
        let (position, target_speed_mps) = plan.state_at(t).expect("valid plans have waypoints");
        let issuer = plan.issuer;
        self.following = Some(plan);
        ControlAction::FollowPlan { issuer, position, target_speed_mps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::AgentId;

    fn plan(issuer: u32, at: u64, y: f64) -> TrajectoryPlan {
        TrajectoryPlan::straight(AgentId(1), issuer, SimTime(at), SimTime(at), Vec2::new(at as f64 / 100.0, y), 0.0, 10.0, 10.0, 2.0, 6.0)
    }

    #[test]
    fn matching_handoff_is_seamless() {
        let mut f = PlanFollower::new();
        f.offer(plan(1, 0, 0.0));
        assert!(matches!(f.follow(SimTime(100)), ControlAction::FollowPlan { issuer: 1, .. }));
        f.offer(plan(2, 200, 0.0));
        assert!(matches!(f.follow(SimTime(300)), ControlAction::FollowPlan { issuer: 2, .. }));
        assert_eq!(f.handoffs, 1);
        assert_eq!(f.discontinuities, 0);
    }

    #[test]
    fn disagreeing_handoff_is_flagged() {
        let mut f = PlanFollower::new();
        f.offer(plan(1, 0, 0.0));
        f.follow(SimTime(100));
        f.offer(plan(2, 200, 3.0));
        f.follow(SimTime(300));
        assert_eq!(f.discontinuities, 1);
    }

    #[test]
    fn expired_plans_fall_back_to_on_board() {
        let mut f = PlanFollower::new();
        f.offer(plan(1, 0, 0.0));
        assert!(matches!(f.follow(SimTime(2000)), ControlAction::FollowPlan { .. }));
        for k in 1..=5 {
            assert_eq!(f.follow(SimTime(2000 + 100 * k)), ControlAction::OnBoard);
        }
    }
}
