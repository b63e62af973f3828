use crate::world::Vec2;

/// Lateral half-width of the ego path; objects predicted outside it at the
/// time they reach the ego's longitudinal position are not in conflict.
pub const DEFAULT_CONFLICT_HALF_WIDTH_M: f64 = 2.0;

/// Constant-velocity time to collision of an object with the ego vehicle.
///
/// Works in the ego frame: the object must be ahead and closing, and when it
/// reaches the ego's front it must lie within `half_width_m` of the path.
/// Returns `f64::INFINITY` otherwise.
pub fn time_to_collision(
    ego_pos: Vec2,
    ego_vel: Vec2,
    ego_heading: f64,
    obj_pos: Vec2,
    obj_vel: Vec2,
    half_width_m: f64,
) -> f64 {
    let r = (obj_pos - ego_pos).rotate(-ego_heading);
    let v = (obj_vel - ego_vel).rotate(-ego_heading);
    let closing = -v.x;
    if r.x <= 0.0 || closing <= 0.0 {
        return f64::INFINITY;
    }
    let t = r.x / closing;
    if (r.y + v.y * t).abs() <= half_width_m {
        t
    } else {
        f64::INFINITY
    }
}
