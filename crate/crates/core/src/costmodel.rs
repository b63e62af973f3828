//! Physical road testing vs simulation: daily cost, distance and the derived
//! efficiency and per-km cost ratios; plus roadside deployment economics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sor::{DEFAULT_COVERAGE_EACH_DIRECTION_M, DEFAULT_POWER_W};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{field} must be {constraint}, got {value}")]
    Invalid { field: &'static str, constraint: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostParams {
    /// Test vehicles.
    pub n_v: f64,
    /// Physical test cost, $/hour/vehicle.
    pub c_p: f64,
    /// Average speed, km/h.
    pub s: f64,
    /// Simulation servers.
    pub n_s: f64,
    /// Server cost, $/hour.
    pub c_s: f64,
    /// Concurrent simulation jobs per server.
    pub cap: u32,
    /// Physical test hours per day.
    pub h_p: f64,
    /// Simulation hours per day.
    pub h_s: f64,
    /// Simulated km per wall-clock km.
    pub rtf: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { n_v: 1.0, c_p: 180.0, s: 30.0, n_s: 1.0, c_s: 8.5, cap: 4, h_p: 8.0, h_s: 24.0, rtf: 1.0 }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), Vec<CostError>> {
        let mut errs = Vec::new();
        let mut nonneg = |field, value: f64| {
            if !(value >= 0.0) || !value.is_finite() {
                errs.push(CostError::Invalid { field, constraint: ">= 0 and finite", value });
            }
        };
        nonneg("n_v", self.n_v);
        nonneg("n_s", self.n_s);
        nonneg("rtf", self.rtf);
        let mut pos = |field, value: f64| {
            if !(value > 0.0) || !value.is_finite() {
                errs.push(CostError::Invalid { field, constraint: "> 0 and finite", value });
            }
        };
        pos("c_p", self.c_p);
        pos("s", self.s);
        pos("c_s", self.c_s);
        pos("h_p", self.h_p);
        pos("h_s", self.h_s);
        if self.cap < 1 {
            errs.push(CostError::Invalid { field: "cap", constraint: ">= 1", value: self.cap as f64 });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn physical_cost_per_day(&self) -> f64 {
        self.h_p * self.n_v * self.c_p
    }

    pub fn physical_km_per_day(&self) -> f64 {
        self.h_p * self.s
    }

    pub fn sim_cost_per_day(&self) -> f64 {
        self.h_s * self.n_s * self.c_s
    }

    pub fn sim_km_per_day(&self) -> f64 {
        self.h_s * self.s * self.cap as f64 * self.rtf
    }

    /// Simulated km per day over physical km per day.
    pub fn efficiency_ratio(&self) -> f64 {
        self.h_s * self.cap as f64 * self.rtf / self.h_p
    }

    /// Physical $/km over simulated $/km; speed cancels out.
    pub fn cost_per_km_ratio(&self) -> f64 {
        self.c_p * self.cap as f64 * self.rtf / self.c_s
    }

    /// Real-time factor at which the per-km cost ratio reaches `target`.
    pub fn rtf_for_cost_ratio(&self, target: f64) -> f64 {
        target * self.c_s / (self.cap as f64 * self.c_p)
    }

    pub fn report(&self) -> Result<CostReport, Vec<CostError>> {
        self.validate()?;
        Ok(CostReport {
            physical_cost_per_day: self.physical_cost_per_day(),
            sim_cost_per_day: self.sim_cost_per_day(),
            physical_km_per_day: self.physical_km_per_day(),
            sim_km_per_day: self.sim_km_per_day(),
            physical_cost_per_km: self.c_p / self.s,
            sim_cost_per_km: self.c_s / (self.s * self.cap as f64 * self.rtf),
            cost_per_km_ratio: self.cost_per_km_ratio(),
            efficiency_ratio: self.efficiency_ratio(),
            rtf_for_250x: self.rtf_for_cost_ratio(250.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub physical_cost_per_day: f64,
    pub sim_cost_per_day: f64,
    pub physical_km_per_day: f64,
    pub sim_km_per_day: f64,
    pub physical_cost_per_km: f64,
    pub sim_cost_per_km: f64,
    pub cost_per_km_ratio: f64,
    pub efficiency_ratio: f64,
    /// The real-time factor under which the per-km cost ratio is 250.
    pub rtf_for_250x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeploymentCost {
    pub sor_count: usize,
    pub capex: f64,
    pub power_w: f64,
    pub power_cost_per_day: f64,
}

/// Roadside units needed for `corridor_km`, their capital cost, draw and
/// daily energy bill at `tariff_per_kwh`.
pub fn deployment_cost(corridor_km: f64, sor_unit_cost: f64, tariff_per_kwh: f64) -> Result<DeploymentCost, CostError> {
    for (field, value) in [("corridor_km", corridor_km), ("sor_unit_cost", sor_unit_cost), ("power_tariff", tariff_per_kwh)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(CostError::Invalid { field, constraint: ">= 0 and finite", value });
        }
    }
    let spacing_km = 2.0 * DEFAULT_COVERAGE_EACH_DIRECTION_M / 1000.0;
    // guard against 2.5/0.25 landing a hair above 10
    let sor_count = ((corridor_km / spacing_km) - 1e-9).ceil().max(0.0) as usize;
    let power_w = crate::sor::deployment_power(sor_count, DEFAULT_POWER_W);
    Ok(DeploymentCost {
        sor_count,
        capex: sor_count as f64 * sor_unit_cost,
        power_w,
        power_cost_per_day: power_w * 24.0 / 1000.0 * tariff_per_kwh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn table_examples() {
        let p = CostParams::default();
        assert_eq!(p.physical_cost_per_day(), 1440.0);
        assert_eq!(p.physical_km_per_day(), 240.0);
        assert_eq!(CostParams { n_v: 0.0, ..p }.physical_cost_per_day(), 0.0);
        assert_eq!(p.sim_cost_per_day(), 204.0);
        assert_eq!(p.sim_km_per_day(), 2880.0);
        let same = CostParams { cap: 1, h_s: 8.0, ..p };
        assert_eq!(same.sim_km_per_day(), same.physical_km_per_day());
    }

    #[test]
    fn ratio_examples() {
        let p = CostParams::default();
        assert_eq!(p.efficiency_ratio(), 12.0);
        assert_relative_eq!(p.cost_per_km_ratio(), 1440.0 / 17.0, max_relative = 1e-15);
        let fast = CostParams { rtf: p.rtf_for_cost_ratio(250.0), ..p };
        assert_relative_eq!(fast.rtf, 2.951_388_888_888_889, max_relative = 1e-12);
        assert!((fast.cost_per_km_ratio() - 250.0).abs() <= 1e-9);
    }

    #[test]
    fn deployment_examples() {
        let one = deployment_cost(1.0, 10_000.0, 0.1).unwrap();
        assert_eq!((one.sor_count, one.power_w, one.capex), (4, 3200.0, 40_000.0));
        assert_relative_eq!(one.power_cost_per_day, 7.68, max_relative = 1e-12);
        let d = deployment_cost(2.5, 1.0, 0.1).unwrap();
        assert_eq!((d.sor_count, d.power_w), (10, 8000.0));
        let q = deployment_cost(0.25, 1.0, 0.1).unwrap();
        assert_eq!((q.sor_count, q.power_w), (1, 800.0));
        assert!(deployment_cost(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn validation_lists_every_bad_field() {
        let p = CostParams { c_p: 0.0, s: -1.0, cap: 0, ..CostParams::default() };
        assert_eq!(p.validate().unwrap_err().len(), 3);
    }

    proptest! {
        #[test]
        fn cost_ratio_ignores_speed(s1 in 1.0..200.0f64, s2 in 1.0..200.0f64) {
            let a = CostParams { s: s1, ..CostParams::default() };
            let b = CostParams { s: s2, ..CostParams::default() };
            prop_assert_eq!(a.cost_per_km_ratio(), b.cost_per_km_ratio());
            let ra = a.report().unwrap();
            prop_assert!((ra.physical_cost_per_km / ra.sim_cost_per_km - a.cost_per_km_ratio()).abs() < 1e-9 * a.cost_per_km_ratio());
        }

        #[test]
        fn ratios_are_linear_in_rtf_and_cap(rtf in 0.1..10.0f64, cap in 1u32..16, k in 1u32..5) {
            let p = CostParams { rtf, cap, ..CostParams::default() };
            let scaled_rtf = CostParams { rtf: rtf * k as f64, ..p };
            let scaled_cap = CostParams { cap: cap * k, ..p };
            let kf = k as f64;
            prop_assert!((scaled_rtf.efficiency_ratio() - kf * p.efficiency_ratio()).abs() < 1e-9 * scaled_rtf.efficiency_ratio());
            prop_assert!((scaled_cap.cost_per_km_ratio() - kf * p.cost_per_km_ratio()).abs() < 1e-9 * scaled_cap.cost_per_km_ratio());
        }
    }
}
