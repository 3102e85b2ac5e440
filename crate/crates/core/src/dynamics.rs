//! Rigid-body quadrotor simulator in the NED world frame.
//!
//! Body axes are forward-right-down; thrust acts along body −z. Rotors sit
//! in a plus layout: rotor 1 on +x, rotor 2 on +y, rotor 3 on −x, rotor 4
//! on −y. Rotors 1 and 3 spin clockwise seen from above, 2 and 4
//! counter-clockwise, so each diagonal pair co-rotates.
//!
//! Rotor indices in this module are zero-based (`0..4`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];
/// Unit quaternion `[w, x, y, z]`, body → world.
pub type Quat = [f64; 4];
pub type Mat3 = [[f64; 3]; 3];

pub const NUM_ROTORS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("simulation diverged: non-finite state")]
    Diverged,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
}

/// Physical constants of the vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadParams {
    pub mass: f64,
    pub arm_length: f64,
    /// Recorded for completeness; does not enter the wrench.
    pub motor_height: f64,
    pub inertia_diag: Vec3,
    pub rotor_inertia: f64,
    pub thrust_coeff: f64,
    pub torque_coeff: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub max_thrust_per_rotor: f64,
    pub gravity: f64,
    /// First-order rotor lag; 0 makes rotors track commands instantly.
    pub motor_time_constant: f64,
    /// Linear aerodynamic damping of body rates, N·m·s/rad.
    pub angular_drag_coeff: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.2,
            arm_length: 0.16,
            motor_height: 0.05,
            inertia_diag: [0.0123, 0.0123, 0.0123],
            rotor_inertia: 2.7e-5,
            thrust_coeff: 1.076e-5,
            torque_coeff: 1.632e-7,
            omega_min: 0.0,
            omega_max: 900.0,
            max_thrust_per_rotor: 9.1,
            gravity: 9.81,
            motor_time_constant: 0.015,
            angular_drag_coeff: 0.01,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        let all = [
            self.mass,
            self.arm_length,
            self.motor_height,
            self.rotor_inertia,
            self.thrust_coeff,
            self.torque_coeff,
            self.omega_min,
            self.omega_max,
            self.max_thrust_per_rotor,
            self.gravity,
            self.motor_time_constant,
            self.angular_drag_coeff,
        ];
        if all.iter().chain(&self.inertia_diag).any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.mass <= 0.0 {
            return bad("mass must be positive");
        }
        if self.inertia_diag.iter().any(|&i| i <= 0.0) {
            return bad("inertia_diag entries must be positive");
        }
        if !(self.omega_max > self.omega_min && self.omega_min >= 0.0) {
            return bad("need omega_max > omega_min >= 0");
        }
        if self.thrust_coeff * self.omega_max.powi(2) > 1.05 * self.max_thrust_per_rotor {
            return bad("thrust_coeff * omega_max^2 exceeds 1.05 * max_thrust_per_rotor");
        }
        if self.motor_time_constant < 0.0 || self.angular_drag_coeff < 0.0 {
            return bad("motor_time_constant and angular_drag_coeff must be non-negative");
        }
        Ok(())
    }

    /// Rotor speed at which four rotors carry the weight.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.thrust_coeff)).sqrt()
    }

    /// Thrust of one rotor at `omega_max`.
    pub fn peak_thrust(&self) -> f64 {
        self.thrust_coeff * self.omega_max * self.omega_max
    }

    /// Linear PWM → commanded rotor speed map. Inputs outside `[0, 1]`
    /// are clamped.
    pub fn pwm_to_speed_command(&self, pwm: f64) -> f64 {
        pwm.clamp(0.0, 1.0) * self.omega_max
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultMask {
    pub disabled: [bool; NUM_ROTORS],
}

impl FaultMask {
    pub fn healthy() -> Self {
        Self::default()
    }

    pub fn single(rotor: usize) -> Self {
        let mut disabled = [false; NUM_ROTORS];
        disabled[rotor] = true;
        Self { disabled }
    }

    fn apply(&self, speeds: &mut [f64; NUM_ROTORS]) {
        for (s, &off) in speeds.iter_mut().zip(&self.disabled) {
            if off {
                *s = 0.0;
            }
        }
    }
}

/// Steady wind acting through linear drag on the airframe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    pub wind_velocity: Vec3,
    pub drag_coeff: f64,
    pub enabled: bool,
}

impl Default for WindModel {
    fn default() -> Self {
        Self {
            wind_velocity: [0.0; 3],
            drag_coeff: 0.3,
            enabled: false,
        }
    }
}

impl WindModel {
    pub fn calm() -> Self {
        Self::default()
    }

    pub fn force(&self, velocity: &Vec3) -> Vec3 {
        if !self.enabled {
            return [0.0; 3];
        }
        let k = self.drag_coeff;
        [
            k * (self.wind_velocity[0] - velocity[0]),
            k * (self.wind_velocity[1] - velocity[1]),
            k * (self.wind_velocity[2] - velocity[2]),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Quat,
    pub body_rates: Vec3,
    pub rotor_speeds: [f64; NUM_ROTORS],
}

impl RigidBodyState {
    /// Level, at rest at `position`, all rotors at `speed`.
    pub fn at_rest(position: Vec3, speed: f64) -> Self {
        Self {
            position,
            velocity: [0.0; 3],
            attitude: [1.0, 0.0, 0.0, 0.0],
            body_rates: [0.0; 3],
            rotor_speeds: [speed; NUM_ROTORS],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(&self.velocity)
            .chain(&self.attitude)
            .chain(&self.body_rates)
            .chain(&self.rotor_speeds)
            .all(|v| v.is_finite())
    }
}

/// Body-frame force and torque produced by the rotors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

/// Yaw reaction sign per rotor (clockwise rotors push the body −z).
const SPIN: [f64; NUM_ROTORS] = [-1.0, 1.0, -1.0, 1.0];

/// Per-rotor thrust `c_T·ω²` (zero for disabled rotors).
pub fn rotor_thrusts(speeds: &[f64; NUM_ROTORS], params: &QuadParams, fault: &FaultMask) -> [f64; NUM_ROTORS] {
    let mut f = [0.0; NUM_ROTORS];
    for i in 0..NUM_ROTORS {
        if !fault.disabled[i] {
            f[i] = params.thrust_coeff * speeds[i] * speeds[i];
        }
    }
    f
}

pub fn rotor_wrench(state: &RigidBodyState, params: &QuadParams, fault: &FaultMask) -> Wrench {
    wrench_from_speeds(&state.rotor_speeds, params, fault)
}

fn wrench_from_speeds(speeds: &[f64; NUM_ROTORS], params: &QuadParams, fault: &FaultMask) -> Wrench {
    let f = rotor_thrusts(speeds, params, fault);
    let l = params.arm_length;
    let mut yaw = 0.0;
    for i in 0..NUM_ROTORS {
        if !fault.disabled[i] {
            yaw += SPIN[i] * params.torque_coeff * speeds[i] * speeds[i];
        }
    }
    Wrench {
        force: [0.0, 0.0, -(f[0] + f[1] + f[2] + f[3])],
        torque: [l * (f[3] - f[1]), l * (f[0] - f[2]), yaw],
    }
}

/// Body → world rotation matrix of a (normalized) quaternion.
pub fn rotation_matrix(q: &Quat) -> Mat3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Flat integration vector: position, velocity, quaternion, body rates, rotor speeds.
type Flat = [f64; 17];

fn pack(s: &RigidBodyState) -> Flat {
    let mut x = [0.0; 17];
    x[0..3].copy_from_slice(&s.position);
    x[3..6].copy_from_slice(&s.velocity);
    x[6..10].copy_from_slice(&s.attitude);
    x[10..13].copy_from_slice(&s.body_rates);
    x[13..17].copy_from_slice(&s.rotor_speeds);
    x
}

fn unpack(x: &Flat) -> RigidBodyState {
    let mut s = RigidBodyState::at_rest([0.0; 3], 0.0);
    s.position.copy_from_slice(&x[0..3]);
    s.velocity.copy_from_slice(&x[3..6]);
    s.attitude.copy_from_slice(&x[6..10]);
    s.body_rates.copy_from_slice(&x[10..13]);
    s.rotor_speeds.copy_from_slice(&x[13..17]);
    s
}

struct Inputs<'a> {
    params: &'a QuadParams,
    fault: &'a FaultMask,
    wind: &'a WindModel,
    command: [f64; NUM_ROTORS],
}

fn derivative(x: &Flat, u: &Inputs<'_>) -> Flat {
    let p = u.params;
    let v: Vec3 = [x[3], x[4], x[5]];
    let q: Quat = [x[6], x[7], x[8], x[9]];
    let w: Vec3 = [x[10], x[11], x[12]];
    let speeds = [x[13], x[14], x[15], x[16]];

    let wrench = wrench_from_speeds(&speeds, p, u.fault);
    let r = rotation_matrix(&q);
    let thrust_world = mat_vec(&r, &wrench.force);
    let wind = u.wind.force(&v);

    let mut dx = [0.0; 17];
    dx[0..3].copy_from_slice(&v);
    for k in 0..3 {
        dx[3 + k] = (thrust_world[k] + wind[k]) / p.mass;
    }
    dx[5] += p.gravity;

    // q̇ = ½ q ⊗ (0, ω)
    dx[6] = 0.5 * (-q[1] * w[0] - q[2] * w[1] - q[3] * w[2]);
    dx[7] = 0.5 * (q[0] * w[0] + q[2] * w[2] - q[3] * w[1]);
    dx[8] = 0.5 * (q[0] * w[1] + q[3] * w[0] - q[1] * w[2]);
    dx[9] = 0.5 * (q[0] * w[2] + q[1] * w[1] - q[2] * w[0]);

    let inertia = p.inertia_diag;
    let iw = [inertia[0] * w[0], inertia[1] * w[1], inertia[2] * w[2]];
    let gyro = cross(&w, &iw);
    for k in 0..3 {
        dx[10 + k] = (wrench.torque[k] - gyro[k] - p.angular_drag_coeff * w[k]) / inertia[k];
    }

    if p.motor_time_constant > 0.0 {
        for i in 0..NUM_ROTORS {
            if !u.fault.disabled[i] {
                dx[13 + i] = (u.command[i] - speeds[i]) / p.motor_time_constant;
            }
        }
    }
    dx
}

fn axpy(x: &Flat, h: f64, k: &Flat) -> Flat {
    let mut out = *x;
    for (o, d) in out.iter_mut().zip(k) {
        *o += h * d;
    }
    out
}

/// Advances the vehicle by `dt` seconds under constant PWM commands.
///
/// Integration is a single classic RK4 step over the full state including
/// rotor speeds; the quaternion is renormalized and rotor speeds clamped to
/// `[omega_min, omega_max]` afterwards (disabled rotors pinned to 0).
pub fn step(
    state: &RigidBodyState,
    pwm: &[f64; NUM_ROTORS],
    params: &QuadParams,
    fault: &FaultMask,
    wind: &WindModel,
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::BadTimeStep(dt));
    }
    let mut command = [0.0; NUM_ROTORS];
    for (c, &u) in command.iter_mut().zip(pwm) {
        *c = params.pwm_to_speed_command(u);
    }
    let mut start = *state;
    if params.motor_time_constant == 0.0 {
        start.rotor_speeds = command;
    }
    fault.apply(&mut start.rotor_speeds);

    let inputs = Inputs {
        params,
        fault,
        wind,
        command,
    };
    let x0 = pack(&start);
    let k1 = derivative(&x0, &inputs);
    let k2 = derivative(&axpy(&x0, 0.5 * dt, &k1), &inputs);
    let k3 = derivative(&axpy(&x0, 0.5 * dt, &k2), &inputs);
    let k4 = derivative(&axpy(&x0, dt, &k3), &inputs);
    let mut x = x0;
    for i in 0..17 {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    let mut next = unpack(&x);
    if !next.is_finite() {
        return Err(DynamicsError::Diverged);
    }
    let n = next.attitude.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(DynamicsError::Diverged);
    }
    for c in &mut next.attitude {
        *c /= n;
    }
    for s in &mut next.rotor_speeds {
        *s = s.clamp(params.omega_min, params.omega_max);
    }
    fault.apply(&mut next.rotor_speeds);
    Ok(next)
}
