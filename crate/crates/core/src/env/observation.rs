use crate::dynamics::{rotation_matrix, RigidBodyState, Vec3, NUM_ROTORS};

pub const OBS_DIM: usize = 22;

/// Policy input: position error, row-major rotation, linear velocity,
/// body rates and rotor speeds, in that order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub pos_error: Vec3,
    pub rotation: [f64; 9],
    pub lin_vel: Vec3,
    pub ang_vel: Vec3,
    pub rotor_speeds: [f64; NUM_ROTORS],
}

impl Observation {
    pub fn build(state: &RigidBodyState, goal: &Vec3) -> Self {
        let r = rotation_matrix(&state.attitude);
        let mut rotation = [0.0; 9];
        for (i, row) in r.iter().enumerate() {
            rotation[3 * i..3 * i + 3].copy_from_slice(row);
        }
        Self {
            pos_error: [
                goal[0] - state.position[0],
                goal[1] - state.position[1],
                goal[2] - state.position[2],
            ],
            rotation,
            lin_vel: state.velocity,
            ang_vel: state.body_rates,
            rotor_speeds: state.rotor_speeds,
        }
    }

    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        out[0..3].copy_from_slice(&self.pos_error);
        out[3..12].copy_from_slice(&self.rotation);
        out[12..15].copy_from_slice(&self.lin_vel);
        out[15..18].copy_from_slice(&self.ang_vel);
        out[18..22].copy_from_slice(&self.rotor_speeds);
        out
    }

    /// Inverse of [`to_array`](Self::to_array); `None` on wrong length.
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != OBS_DIM {
            return None;
        }
        let mut o = Observation {
            pos_error: [0.0; 3],
            rotation: [0.0; 9],
            lin_vel: [0.0; 3],
            ang_vel: [0.0; 3],
            rotor_speeds: [0.0; NUM_ROTORS],
        };
        o.pos_error.copy_from_slice(&v[0..3]);
        o.rotation.copy_from_slice(&v[3..12]);
        o.lin_vel.copy_from_slice(&v[12..15]);
        o.ang_vel.copy_from_slice(&v[15..18]);
        o.rotor_speeds.copy_from_slice(&v[18..22]);
        Some(o)
    }

    pub fn error_norm(&self) -> f64 {
        norm(&self.pos_error)
    }
}

pub(crate) fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}
