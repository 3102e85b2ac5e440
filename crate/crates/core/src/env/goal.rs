//! Goal trajectories for the hover, landing and path-following maneuvers.
//!
//! Every path starts at the origin and holds it for `stabilize_time`
//! seconds so the vehicle can recover from the fault first. Positions are
//! NED, so a descending goal has increasing `z`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalPath {
    Stationary { point: Vec3 },
    /// Goal sinks at `rate` m/s until it is `floor` metres below the origin.
    Descent { rate: f64, floor: f64 },
    CircleXY { radius: f64, period: f64 },
    CircleYZ { radius: f64, period: f64 },
    /// Horizontal circle with altitude varying as `amplitude·sin 2θ`.
    Saddle { radius: f64, amplitude: f64, period: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalTrajectory {
    pub path: GoalPath,
    pub stabilize_time: f64,
}

impl GoalTrajectory {
    pub fn hover() -> Self {
        Self {
            path: GoalPath::Stationary { point: [0.0; 3] },
            stabilize_time: 0.0,
        }
    }

    pub fn goal_at(&self, t: f64) -> Vec3 {
        let tau = (t - self.stabilize_time).max(0.0);
        match self.path {
            GoalPath::Stationary { point } => {
                if t < self.stabilize_time {
                    [0.0; 3]
                } else {
                    point
                }
            }
            GoalPath::Descent { rate, floor } => [0.0, 0.0, (rate * tau).min(floor)],
            GoalPath::CircleXY { radius, period } => {
                let th = TAU * tau / period;
                [radius * th.cos() - radius, radius * th.sin(), 0.0]
            }
            GoalPath::CircleYZ { radius, period } => {
                let th = TAU * tau / period;
                [0.0, radius * th.cos() - radius, radius * th.sin()]
            }
            GoalPath::Saddle {
                radius,
                amplitude,
                period,
            } => {
                let th = TAU * tau / period;
                [radius * th.cos() - radius, radius * th.sin(), amplitude * (2.0 * th).sin()]
            }
        }
    }
}
