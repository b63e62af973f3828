use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::SimTime;
use crate::world::{AgentClass, Footprint, Vec2};

/// Fixed per-frame header cost in the wire-size model.
pub const FRAME_HEADER_BYTES: u64 = 200;
/// Per-object cost in the wire-size model.
pub const OBJECT_BYTES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Vehicle,
    Pedestrian,
    Cyclist,
    Unknown,
}

impl From<AgentClass> for ObjectType {
    fn from(c: AgentClass) -> Self {
        match c {
            AgentClass::Vehicle => ObjectType::Vehicle,
            AgentClass::Pedestrian => ObjectType::Pedestrian,
            AgentClass::Cyclist => ObjectType::Cyclist,
        }
    }
}

/// One perceived object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticObject {
    /// Track id, stable per source.
    pub object_id: u64,
    pub timestamp: SimTime,
    pub object_type: ObjectType,
    pub shape: Footprint,
    pub location: Vec2,
    pub speed: f64,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
}

impl SemanticObject {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.speed, self.heading)
    }

    /// Constant-velocity position at `t`.
    pub fn location_at(&self, t: SimTime) -> Vec2 {
        let dt = (t.ms() as f64 - self.timestamp.ms() as f64) / 1000.0;
        self.location + self.velocity() * dt
    }

    pub fn check(&self) -> Result<(), FrameError> {
        let bad = |what: &str| Err(FrameError::BadObject { object_id: self.object_id, what: what.to_owned() });
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return bad("speed must be finite and >= 0");
        }
        if !(0.0..TAU).contains(&self.heading) {
            return bad("heading must be in [0, 2pi)");
        }
        if !(self.shape.length > 0.0 && self.shape.width > 0.0) {
            return bad("shape must be positive");
        }
        if !self.location.is_finite() {
            return bad("location must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Sor,
    Sov,
}

/// Who produced a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub kind: SourceKind,
    pub id: u64,
}

impl SourceRef {
    pub fn sor(id: u32) -> Self {
        Self { kind: SourceKind::Sor, id: id as u64 }
    }

    pub fn sov(id: u64) -> Self {
        Self { kind: SourceKind::Sov, id }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("object {object_id}: {what}")]
    BadObject { object_id: u64, what: String },
    #[error("object {object_id} timestamp {got} differs from frame time {frame_time}")]
    TimestampMismatch { object_id: u64, got: SimTime, frame_time: SimTime },
    #[error("size_bytes {got} does not match the size model ({expected})")]
    SizeMismatch { got: u64, expected: u64 },
}

/// A timestamped batch of objects from one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub source: SourceRef,
    /// When the underlying snapshot was taken.
    pub frame_time: SimTime,
    pub objects: Vec<SemanticObject>,
    pub size_bytes: u64,
}

impl SemanticFrame {
    pub fn new(source: SourceRef, frame_time: SimTime, objects: Vec<SemanticObject>) -> Self {
        let size_bytes = Self::size_for(objects.len());
        Self { source, frame_time, objects, size_bytes }
    }

    pub fn size_for(n_objects: usize) -> u64 {
        FRAME_HEADER_BYTES + OBJECT_BYTES * n_objects as u64
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        let expected = Self::size_for(self.objects.len());
        if self.size_bytes != expected {
            return Err(FrameError::SizeMismatch { got: self.size_bytes, expected });
        }
        for o in &self.objects {
            if o.timestamp != self.frame_time {
                return Err(FrameError::TimestampMismatch {
                    object_id: o.object_id,
                    got: o.timestamp,
                    frame_time: self.frame_time,
                });
            }
            o.check()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(speed: f64) -> SemanticObject {
        SemanticObject {
            object_id: 1,
            timestamp: SimTime(100),
            object_type: ObjectType::Vehicle,
            shape: Footprint { length: 4.5, width: 1.9 },
            location: Vec2::new(1.0, 2.0),
            speed,
            heading: 0.0,
        }
    }

    #[test]
    fn size_model() {
        assert_eq!(SemanticFrame::size_for(0), 200);
        assert_eq!(SemanticFrame::size_for(48), 5000);
        let f = SemanticFrame::new(SourceRef::sor(1), SimTime(100), vec![obj(1.0); 3]);
        assert_eq!(f.size_bytes, 500);
        assert!(f.validate().is_ok());
    }

    #[test]
    fn negative_speed_is_rejected() {
        let f = SemanticFrame::new(SourceRef::sor(1), SimTime(100), vec![obj(-1.0)]);
        assert!(matches!(f.validate(), Err(FrameError::BadObject { .. })));
    }

    #[test]
    fn timestamp_must_match() {
        let f = SemanticFrame::new(SourceRef::sor(1), SimTime(150), vec![obj(1.0)]);
        assert!(matches!(f.validate(), Err(FrameError::TimestampMismatch { .. })));
    }

    #[test]
    fn constant_velocity_extrapolation() {
        let o = obj(10.0);
        assert_eq!(o.location_at(SimTime(1100)), Vec2::new(11.0, 2.0));
    }
}
