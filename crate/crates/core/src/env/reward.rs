use serde::{Deserialize, Serialize};

use crate::dynamics::{Vec3, NUM_ROTORS};

use super::observation::norm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Saturation level of the position penalty.
    pub c1: f64,
    /// Position-error scale, 1/m.
    pub c2: f64,
    /// Rotor-speed change scale, rad/s.
    pub c3: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            c1: 10.0,
            c2: 0.2,
            c3: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        if [self.c1, self.c2, self.c3].iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err("reward constants c1, c2, c3 must be positive".into())
        }
    }

    /// Position term `−c1·tanh(c2·‖e‖)`.
    pub fn position_term(&self, pos_error: &Vec3) -> f64 {
        -self.c1 * (self.c2 * norm(pos_error)).tanh()
    }

    /// Smoothness term `−Σ|Δω_i|/c3` over one control step.
    pub fn smoothness_term(&self, prev_speeds: &[f64; NUM_ROTORS], curr_speeds: &[f64; NUM_ROTORS]) -> f64 {
        -prev_speeds
            .iter()
            .zip(curr_speeds)
            .map(|(p, c)| (p - c).abs())
            .sum::<f64>()
            / self.c3
    }

    pub fn reward(&self, prev_speeds: &[f64; NUM_ROTORS], curr_speeds: &[f64; NUM_ROTORS], pos_error: &Vec3) -> f64 {
        self.position_term(pos_error) + self.smoothness_term(prev_speeds, curr_speeds)
    }
}
