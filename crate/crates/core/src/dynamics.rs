//! Plant model and shared kinematics: the 9-state tracking dynamics of a
//! drag-affected quadrotor pursuing a moving ground target, the body/inertial
//! rotation, aim-error geometry, stage cost, analytic target motions, and the
//! fixed-step RK4 integrator.
//!
//! State convention (all in the inertial frame):
//! `x₁..₃` relative position (quad − target), `x₄..₆` relative velocity,
//! `x₇..₉` absolute quad velocity. Absolute velocity is carried separately so
//! drag acts on the physically correct quantity. Control is
//! `u = [thrust/mass, pitch, roll]`; yaw is held at zero throughout.

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 9-dimensional tracking state vector.
pub type State9 = SVector<f64, 9>;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("attitude angle out of range: pitch {pitch}, roll {roll} (|angle| must be < pi/2)")]
    AttitudeOutOfRange { pitch: f64, roll: f64 },
    #[error("non-finite state while integrating at t = {t}")]
    Diverged { t: f64 },
    #[error("invalid plant parameter: {0}")]
    InvalidParams(&'static str),
}

/// Commanded orientation. Yaw is structurally zero for this vehicle: the
/// airframe is kept facing the target and only pitch/roll are actuated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl Attitude {
    /// Both angles must stay strictly inside (−π/2, π/2) so the thrust
    /// recovery trigonometry stays invertible.
    pub fn new(pitch: f64, roll: f64) -> Result<Self, DynamicsError> {
        let lim = std::f64::consts::FRAC_PI_2;
        if !(pitch.is_finite() && roll.is_finite()) || pitch.abs() >= lim || roll.abs() >= lim {
            return Err(DynamicsError::AttitudeOutOfRange { pitch, roll });
        }
        Ok(Attitude { pitch, roll, yaw: 0.0 })
    }

    pub fn level() -> Self {
        Attitude { pitch: 0.0, roll: 0.0, yaw: 0.0 }
    }
}

/// Control input: mass-normalized collective thrust plus commanded angles.
/// The attitude loop is assumed fast enough that commanded pitch/roll are the
/// plant's actual orientation during the next control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Collective thrust divided by mass, m/s².
    pub thrust: f64,
    /// Commanded pitch, rad.
    pub pitch: f64,
    /// Commanded roll, rad.
    pub roll: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, pitch: f64, roll: f64) -> Self {
        ControlInput { thrust, pitch, roll }
    }

    /// Gravity-cancelling input for a level, stationary vehicle.
    pub fn hover(gravity: f64) -> Self {
        ControlInput { thrust: gravity, pitch: 0.0, roll: 0.0 }
    }

    pub fn attitude(&self) -> Attitude {
        Attitude { pitch: self.pitch, roll: self.roll, yaw: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.thrust, self.pitch, self.roll]
    }
}

/// Actuator envelope shared by every controller: tilt angles stay inside the
/// small-angle regime where the thrust-vector inversion is well defined, and
/// mass-normalized thrust stays between partial and double gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationLimits {
    /// |pitch| bound, rad.
    pub pitch_max: f64,
    /// |roll| bound, rad.
    pub roll_max: f64,
    /// Thrust floor, m/s² (mass-normalized).
    pub thrust_min: f64,
    /// Thrust ceiling, m/s² (mass-normalized).
    pub thrust_max: f64,
}

impl SaturationLimits {
    /// Default envelope: 0.6 rad tilt, thrust in [0.2 g, 2 g].
    pub fn for_gravity(gravity: f64) -> Self {
        SaturationLimits {
            pitch_max: 0.6,
            roll_max: 0.6,
            thrust_min: 0.2 * gravity,
            thrust_max: 2.0 * gravity,
        }
    }

    /// Clamp a command into the envelope; the flag reports whether any
    /// component actually moved.
    pub fn saturate(&self, u: &ControlInput) -> (ControlInput, bool) {
        let clamped = ControlInput {
            thrust: u.thrust.clamp(self.thrust_min, self.thrust_max),
            pitch: u.pitch.clamp(-self.pitch_max, self.pitch_max),
            roll: u.roll.clamp(-self.roll_max, self.roll_max),
        };
        let moved = clamped != *u;
        (clamped, moved)
    }
}

/// Physical constants of the vehicle and mission geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Vehicle mass, kg. Bookkeeping only: the model works with
    /// mass-normalized thrust, so the value never enters the dynamics.
    pub mass: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// Diagonal linear drag coefficients (c₁, c₂, c₃), 1/s, acting on the
    /// absolute velocity.
    pub drag: [f64; 3],
    /// Standoff distance the pursuer holds behind the target, m.
    pub safe_distance: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            mass: 1.98,
            gravity: 9.80665,
            drag: [0.1, 0.1, 0.1],
            safe_distance: 3.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParams("mass must be positive"));
        }
        if !(self.gravity > 0.0) {
            return Err(DynamicsError::InvalidParams("gravity must be positive"));
        }
        if self.drag.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(DynamicsError::InvalidParams("drag coefficients must be >= 0"));
        }
        if !(self.safe_distance > 0.0) {
            return Err(DynamicsError::InvalidParams("safe_distance must be positive"));
        }
        Ok(())
    }
}

/// Target kinematic state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Analytic target motion profiles. Positions are exact integrals of the
/// velocity laws, so sampling never accumulates numerical drift.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetMotion {
    /// Straight-line constant velocity.
    Constant { start: Vector3<f64>, velocity: Vector3<f64> },
    /// Forward speed `mean + amp·sin(2π·freq_hz·t)` along e₁.
    SinusoidX { start: Vector3<f64>, mean: f64, amp: f64, freq_hz: f64 },
    /// Uniform acceleration from rest to `top` along e₁, then constant.
    RampX { start: Vector3<f64>, accel: f64, top: f64 },
}

impl TargetMotion {
    pub fn state_at(&self, t: f64) -> TargetState {
        match self {
            TargetMotion::Constant { start, velocity } => TargetState {
                position: start + velocity * t,
                velocity: *velocity,
            },
            TargetMotion::SinusoidX { start, mean, amp, freq_hz } => {
                let w = 2.0 * std::f64::consts::PI * freq_hz;
                let vx = mean + amp * (w * t).sin();
                // ∫₀ᵗ (mean + amp·sin(wτ)) dτ = mean·t + amp·(1 − cos(wt))/w
                let dx = mean * t + amp * (1.0 - (w * t).cos()) / w;
                TargetState {
                    position: start + Vector3::new(dx, 0.0, 0.0),
                    velocity: Vector3::new(vx, 0.0, 0.0),
                }
            }
            TargetMotion::RampX { start, accel, top } => {
                let t_top = if *accel > 0.0 { top / accel } else { 0.0 };
                let (dx, vx) = if t <= t_top {
                    (0.5 * accel * t * t, accel * t)
                } else {
                    (0.5 * accel * t_top * t_top + top * (t - t_top), *top)
                };
                TargetState {
                    position: start + Vector3::new(dx, 0.0, 0.0),
                    velocity: Vector3::new(vx, 0.0, 0.0),
                }
            }
        }
    }
}

/// Tracking state fed to the controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialState {
    /// Quad position minus target position, m.
    pub rel_pos: Vector3<f64>,
    /// Quad velocity minus target velocity, m/s.
    pub rel_vel: Vector3<f64>,
    /// Absolute quad velocity, m/s (drag acts on this).
    pub abs_vel: Vector3<f64>,
}

impl InertialState {
    /// Builds a state that is internally consistent by construction:
    /// `abs_vel − rel_vel` equals the target velocity.
    pub fn from_quad_target(
        quad_pos: Vector3<f64>,
        quad_vel: Vector3<f64>,
        target: &TargetState,
    ) -> Self {
        InertialState {
            rel_pos: quad_pos - target.position,
            rel_vel: quad_vel - target.velocity,
            abs_vel: quad_vel,
        }
    }

    /// Assembles a state from raw components (any pair of velocities implies
    /// some target velocity, so consistency is the caller's concern; used by
    /// tests and the trajectory optimizers).
    pub fn from_parts(rel_pos: Vector3<f64>, rel_vel: Vector3<f64>, abs_vel: Vector3<f64>) -> Self {
        InertialState { rel_pos, rel_vel, abs_vel }
    }

    pub fn from_vector9(v: &State9) -> Self {
        InertialState {
            rel_pos: Vector3::new(v[0], v[1], v[2]),
            rel_vel: Vector3::new(v[3], v[4], v[5]),
            abs_vel: Vector3::new(v[6], v[7], v[8]),
        }
    }

    pub fn as_vector9(&self) -> State9 {
        State9::from_column_slice(&[
            self.rel_pos.x,
            self.rel_pos.y,
            self.rel_pos.z,
            self.rel_vel.x,
            self.rel_vel.y,
            self.rel_vel.z,
            self.abs_vel.x,
            self.abs_vel.y,
            self.abs_vel.z,
        ])
    }

    /// Target velocity implied by the stored components.
    pub fn target_velocity(&self) -> Vector3<f64> {
        self.abs_vel - self.rel_vel
    }
}

/// Aim-error triple: longitudinal standoff error direction, lateral offset,
/// and the vertical miss of the aim ray on the target plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetingErrors {
    /// Horizontal distance target − quad along e₁, m.
    pub d_x: f64,
    /// Lateral offset target − quad along e₂, m.
    pub d_y: f64,
    /// Vertical aim miss: d_x·tan(pitch) − (z_q − z_t), m. Zero means the
    /// forward axis extended from the vehicle intersects the target height
    /// exactly at the target's horizontal position.
    pub d_z: f64,
}

/// Computes the aim errors from absolute positions and the current pitch.
pub fn targeting_errors(
    quad_pos: &Vector3<f64>,
    target_pos: &Vector3<f64>,
    pitch: f64,
) -> TargetingErrors {
    let d_x = target_pos.x - quad_pos.x;
    let d_y = target_pos.y - quad_pos.y;
    let d_z = d_x * pitch.tan() - (quad_pos.z - target_pos.z);
    TargetingErrors { d_x, d_y, d_z }
}

/// Same errors expressed through the relative state (positions only enter as
/// differences, so the relative components suffice).
pub fn targeting_errors_from_state(x: &InertialState, pitch: f64) -> TargetingErrors {
    TargetingErrors {
        d_x: -x.rel_pos.x,
        d_y: -x.rel_pos.y,
        d_z: -x.rel_pos.x * pitch.tan() - x.rel_pos.z,
    }
}

/// Body→inertial rotation for yaw-pitch-roll angles (Rz(ψ)·Ry(θ)·Rx(φ)).
/// Yaw is zero in this application but the full form is kept for clarity.
pub fn rotation_matrix(att: &Attitude) -> Matrix3<f64> {
    let (s_ps, c_ps) = att.yaw.sin_cos();
    let (s_th, c_th) = att.pitch.sin_cos();
    let (s_ph, c_ph) = att.roll.sin_cos();
    Matrix3::new(
        c_ps * c_th,
        c_ps * s_th * s_ph - s_ps * c_ph,
        c_ps * s_th * c_ph + s_ps * s_ph,
        s_ps * c_th,
        s_ps * s_th * s_ph + c_ps * c_ph,
        s_ps * s_th * c_ph - c_ps * s_ph,
        -s_th,
        c_th * s_ph,
        c_th * c_ph,
    )
}

/// Inertial acceleration of the vehicle under thrust, gravity, and linear
/// drag on the absolute velocity.
pub fn acceleration(u: &ControlInput, abs_vel: &Vector3<f64>, p: &PlantParams) -> Vector3<f64> {
    let (s2, c2) = u.pitch.sin_cos();
    let (s3, c3) = u.roll.sin_cos();
    Vector3::new(
        u.thrust * c3 * s2 - p.drag[0] * abs_vel.x,
        -u.thrust * s3 - p.drag[1] * abs_vel.y,
        u.thrust * c3 * c2 - p.drag[2] * abs_vel.z - p.gravity,
    )
}

/// Right-hand side of the 9-state tracking dynamics. The target is treated
/// as unaccelerated within a control period, so the relative and absolute
/// velocity derivatives coincide.
pub fn targeting_dynamics(x: &InertialState, u: &ControlInput, p: &PlantParams) -> State9 {
    let a = acceleration(u, &x.abs_vel, p);
    State9::from_column_slice(&[
        x.rel_vel.x,
        x.rel_vel.y,
        x.rel_vel.z,
        a.x,
        a.y,
        a.z,
        a.x,
        a.y,
        a.z,
    ])
}

/// Weights of the pursuit running cost and its optimizer variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Standoff-distance error weight.
    pub k1: f64,
    /// Lateral offset weight.
    pub k2: f64,
    /// Vertical aim-miss weight.
    pub k3: f64,
    /// Standoff distance the cost is centered on, m.
    pub standoff: f64,
    /// Thrust level the control-energy term is centered on, m/s².
    /// 0 penalizes raw thrust; setting it to gravity makes hover cost-free,
    /// which keeps the receding-horizon optimizers from shedding altitude
    /// near the end of each horizon.
    pub thrust_ref: f64,
}

impl CostWeights {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Self {
        CostWeights { k1, k2, k3, standoff: 3.0, thrust_ref: 0.0 }
    }

    pub fn with_thrust_ref(mut self, thrust_ref: f64) -> Self {
        self.thrust_ref = thrust_ref;
        self
    }

    pub fn with_standoff(mut self, standoff: f64) -> Self {
        self.standoff = standoff;
        self
    }
}

/// Running cost: control energy plus weighted squared aim errors. The pitch
/// used for the vertical miss is passed explicitly so callers can evaluate
/// the cost at a commanded, planned, or measured pitch.
pub fn stage_cost(x: &InertialState, u: &ControlInput, pitch_for_dz: f64, w: &CostWeights) -> f64 {
    let e = targeting_errors_from_state(x, pitch_for_dz);
    let du1 = u.thrust - w.thrust_ref;
    0.5 * (du1 * du1 + u.pitch * u.pitch + u.roll * u.roll)
        + w.k1 * (e.d_x - w.standoff) * (e.d_x - w.standoff)
        + w.k2 * e.d_y * e.d_y
        + w.k3 * e.d_z * e.d_z
}

/// One RK4 step of the absolute quad dynamics (position, velocity) under a
/// zero-order-held input.
pub fn integrate_quad(
    pos: &Vector3<f64>,
    vel: &Vector3<f64>,
    u: &ControlInput,
    p: &PlantParams,
    dt: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let acc = |v: &Vector3<f64>| acceleration(u, v, p);

    let k1v = acc(vel);
    let k1p = *vel;
    let v2 = vel + k1v * (dt / 2.0);
    let k2v = acc(&v2);
    let k2p = v2;
    let v3 = vel + k2v * (dt / 2.0);
    let k3v = acc(&v3);
    let k3p = v3;
    let v4 = vel + k3v * dt;
    let k4v = acc(&v4);
    let k4p = v4;

    let new_pos = pos + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
    let new_vel = vel + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
    (new_pos, new_vel)
}

/// Advances the tracking state by `dt`: the quad's absolute states are
/// integrated by RK4 under the held input, while the target advances along
/// its exact analytic trajectory, so the relative components never inherit
/// integration error from the target side.
pub fn integrate_step(
    x: &InertialState,
    u: &ControlInput,
    motion: &TargetMotion,
    t: f64,
    dt: f64,
    p: &PlantParams,
) -> Result<InertialState, DynamicsError> {
    let target_now = motion.state_at(t);
    let quad_pos = x.rel_pos + target_now.position;
    let quad_vel = x.abs_vel;
    let (new_pos, new_vel) = integrate_quad(&quad_pos, &quad_vel, u, p, dt);
    if !(new_pos.iter().all(|v| v.is_finite()) && new_vel.iter().all(|v| v.is_finite())) {
        return Err(DynamicsError::Diverged { t: t + dt });
    }
    let target_next = motion.state_at(t + dt);
    Ok(InertialState::from_quad_target(new_pos, new_vel, &target_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: f64 = 9.80665;

    fn params() -> PlantParams {
        PlantParams::default()
    }

    #[test]
    fn rotation_matrix_pitch_only_rows() {
        let att = Attitude::new(std::f64::consts::FRAC_PI_6, 0.0).unwrap();
        let r = rotation_matrix(&att);
        let c = (std::f64::consts::FRAC_PI_6).cos();
        let s = (std::f64::consts::FRAC_PI_6).sin();
        assert_relative_eq!(r[(0, 0)], c, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 1)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 2)], s, epsilon = 1e-15);
        assert_relative_eq!(r[(2, 0)], -s, epsilon = 1e-15);
        assert_relative_eq!(r[(2, 1)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(r[(2, 2)], c, epsilon = 1e-15);
    }

    #[test]
    fn rotation_matrix_is_orthonormal_on_random_attitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let att = Attitude::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)).unwrap();
            let r = rotation_matrix(&att);
            let err = (r.transpose() * r - Matrix3::identity()).abs().max();
            assert!(err < 1e-12, "orthonormality error {err}");
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn attitude_rejects_out_of_range() {
        assert!(Attitude::new(1.6, 0.0).is_err());
        assert!(Attitude::new(0.0, -1.58).is_err());
        assert!(Attitude::new(f64::NAN, 0.0).is_err());
        assert!(Attitude::new(0.5, -0.5).is_ok());
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let x = InertialState::from_parts(Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        let u = ControlInput::hover(G);
        let dx = targeting_dynamics(&x, &u, &params());
        assert!(dx.amax() < 1e-15, "hover derivative {dx}");
    }

    #[test]
    fn drag_only_deceleration() {
        let x = InertialState::from_parts(
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let u = ControlInput::hover(G);
        let dx = targeting_dynamics(&x, &u, &params());
        assert_relative_eq!(dx[3], -0.1, epsilon = 1e-15);
        assert_relative_eq!(dx[6], -0.1, epsilon = 1e-15);
        assert_relative_eq!(dx[4], 0.0, epsilon = 1e-15);
        assert_relative_eq!(dx[5], 0.0, epsilon = 1e-15);
    }

    /// Independent re-derivation of the acceleration rows, expanded term by
    /// term, checked against the production implementation on random inputs.
    #[test]
    fn dynamics_match_symbolic_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params();
        for _ in 0..500 {
            let x = InertialState::from_parts(
                Vector3::from_fn(|_, _| rng.gen_range(-5.0..5.0)),
                Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
                Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0)),
            );
            let u = ControlInput::new(
                rng.gen_range(0.0..20.0),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let dx = targeting_dynamics(&x, &u, &p);
            let a1 = u.thrust * u.roll.cos() * u.pitch.sin() - p.drag[0] * x.abs_vel.x;
            let a2 = -u.thrust * u.roll.sin() - p.drag[1] * x.abs_vel.y;
            let a3 = u.thrust * u.roll.cos() * u.pitch.cos() - p.drag[2] * x.abs_vel.z - p.gravity;
            let expect = [
                x.rel_vel.x,
                x.rel_vel.y,
                x.rel_vel.z,
                a1,
                a2,
                a3,
                a1,
                a2,
                a3,
            ];
            for i in 0..9 {
                assert_relative_eq!(dx[i], expect[i], epsilon = 1e-14, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn targeting_errors_match_defining_formulas() {
        let e = targeting_errors(
            &Vector3::new(-3.0, 0.0, 0.61),
            &Vector3::new(0.0, 0.0, 0.61),
            0.0,
        );
        assert_relative_eq!(e.d_x, 3.0, epsilon = 1e-15);
        assert_relative_eq!(e.d_y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(e.d_z, 0.0, epsilon = 1e-15);

        // Oblique case: pitch chosen so the aim ray rises 1 m over d_x = 4.
        let e = targeting_errors(
            &Vector3::new(-4.0, 1.0, 0.61),
            &Vector3::new(0.0, 0.0, 0.61),
            0.25f64.atan(),
        );
        assert_relative_eq!(e.d_x, 4.0, epsilon = 1e-12);
        assert_relative_eq!(e.d_y, -1.0, epsilon = 1e-12);
        assert_relative_eq!(e.d_z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn errors_from_state_agree_with_absolute_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let quad = Vector3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
            let target = Vector3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
            let pitch = rng.gen_range(-1.0..1.0);
            let x = InertialState::from_parts(quad - target, Vector3::zeros(), Vector3::zeros());
            let a = targeting_errors(&quad, &target, pitch);
            let b = targeting_errors_from_state(&x, pitch);
            assert_relative_eq!(a.d_x, b.d_x, epsilon = 1e-12);
            assert_relative_eq!(a.d_y, b.d_y, epsilon = 1e-12);
            assert_relative_eq!(a.d_z, b.d_z, epsilon = 1e-12);
        }
    }

    #[test]
    fn stage_cost_frozen_value() {
        // u = 0, k1 = k3 = 50, d_x = 4, d_y = 0, d_z = 0.5 → 50·1 + 50·0.25.
        let w = CostWeights::new(50.0, 50.0, 50.0);
        // d_x = 4 → rel x = −4; pitch 0 and rel z = −0.5 → d_z = 0.5.
        let x = InertialState::from_parts(
            Vector3::new(-4.0, 0.0, -0.5),
            Vector3::zeros(),
            Vector3::zeros(),
        );
        let u = ControlInput::new(0.0, 0.0, 0.0);
        assert_relative_eq!(stage_cost(&x, &u, 0.0, &w), 62.5, epsilon = 1e-12);
    }

    #[test]
    fn target_motion_constant_and_sinusoid() {
        let case1 = TargetMotion::Constant {
            start: Vector3::new(0.0, 0.0, 0.61),
            velocity: Vector3::new(3.0, 0.0, 0.0),
        };
        let s = case1.state_at(2.5);
        assert_relative_eq!(s.position.x, 7.5, epsilon = 1e-12);
        assert_relative_eq!(s.velocity.x, 3.0, epsilon = 1e-15);

        let case2 = TargetMotion::SinusoidX {
            start: Vector3::new(0.0, 0.0, 0.61),
            mean: 2.8,
            amp: 0.2,
            freq_hz: 0.5,
        };
        assert_relative_eq!(case2.state_at(0.0).velocity.x, 2.8, epsilon = 1e-12);
        // Quarter period: speed peaks at 3.0; half period (1 s): back to 2.8.
        assert_relative_eq!(case2.state_at(0.5).velocity.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(case2.state_at(1.0).velocity.x, 2.8, epsilon = 1e-12);
        // Position is the exact integral of the speed law.
        let t = 1.7;
        let w = std::f64::consts::PI;
        let want = 2.8 * t + 0.2 * (1.0 - (w * t).cos()) / w;
        assert_relative_eq!(case2.state_at(t).position.x, want, epsilon = 1e-12);
    }

    #[test]
    fn target_motion_ramp() {
        let ramp = TargetMotion::RampX {
            start: Vector3::new(0.0, 0.0, 0.7),
            accel: 0.3,
            top: 1.5,
        };
        assert_relative_eq!(ramp.state_at(0.0).velocity.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(ramp.state_at(2.0).velocity.x, 0.6, epsilon = 1e-12);
        assert_relative_eq!(ramp.state_at(5.0).velocity.x, 1.5, epsilon = 1e-12);
        assert_relative_eq!(ramp.state_at(7.0).velocity.x, 1.5, epsilon = 1e-12);
        // Position continuous through the top-speed switch.
        let before = ramp.state_at(5.0 - 1e-9).position.x;
        let after = ramp.state_at(5.0 + 1e-9).position.x;
        assert!((after - before).abs() < 1e-7);
        assert_relative_eq!(ramp.state_at(7.0).position.x, 0.5 * 0.3 * 25.0 + 1.5 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_step_drag_free_ballistic() {
        // C = 0, hover input, quad moving 1 m/s, target 3 m/s: relative x
        // shifts by (1 − 3)·dt exactly.
        let mut p = params();
        p.drag = [0.0; 3];
        let motion = TargetMotion::Constant {
            start: Vector3::zeros(),
            velocity: Vector3::new(3.0, 0.0, 0.0),
        };
        let x = InertialState::from_parts(
            Vector3::new(-10.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0) - Vector3::new(3.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let u = ControlInput::hover(p.gravity);
        let next = integrate_step(&x, &u, &motion, 0.0, 0.02, &p).unwrap();
        assert_relative_eq!(next.rel_pos.x, -10.0 + (1.0 - 3.0) * 0.02, epsilon = 1e-13);
        assert_relative_eq!(next.abs_vel.x, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn integrate_step_hover_fixed_point() {
        let p = params();
        let motion = TargetMotion::Constant {
            start: Vector3::new(0.0, 0.0, 0.61),
            velocity: Vector3::zeros(),
        };
        let x = InertialState::from_parts(
            Vector3::new(-3.0, 0.0, 0.0),
            Vector3::zeros(),
            Vector3::zeros(),
        );
        let u = ControlInput::hover(p.gravity);
        let mut s = x;
        for k in 0..50 {
            s = integrate_step(&s, &u, &motion, k as f64 * 0.02, 0.02, &p).unwrap();
        }
        assert!((s.rel_pos - x.rel_pos).norm() < 1e-13);
        assert!(s.abs_vel.norm() < 1e-13);
    }

    /// RK4 global order against the closed-form solution of the affine drag
    /// system v̇ = T − g·e₃ − c·v (exponential relaxation).
    #[test]
    fn rk4_is_fourth_order_under_step_halving() {
        let mut p = params();
        p.drag = [0.5, 0.5, 0.5];
        let u = ControlInput::new(12.0, 0.3, -0.2);
        let v0 = Vector3::new(1.0, -2.0, 0.5);
        let p0 = Vector3::zeros();
        let t_end = 1.0;

        // Closed form: v(t) = v∞ + (v0 − v∞)·e^{−ct},
        // p(t) = p0 + v∞·t + (v0 − v∞)(1 − e^{−ct})/c.
        let c = 0.5;
        let thrust = {
            let (s2, c2) = u.pitch.sin_cos();
            let (s3, c3) = u.roll.sin_cos();
            Vector3::new(u.thrust * c3 * s2, -u.thrust * s3, u.thrust * c3 * c2 - p.gravity)
        };
        let v_inf = thrust / c;
        let exact_v = v_inf + (v0 - v_inf) * (-c * t_end).exp();
        let exact_p = p0 + v_inf * t_end + (v0 - v_inf) * (1.0 - (-c * t_end).exp()) / c;

        let run = |dt: f64| {
            let n = (t_end / dt).round() as usize;
            let (mut pos, mut vel) = (p0, v0);
            for _ in 0..n {
                let (np, nv) = integrate_quad(&pos, &vel, &u, &p, dt);
                pos = np;
                vel = nv;
            }
            ((pos - exact_p).norm().powi(2) + (vel - exact_v).norm().powi(2)).sqrt()
        };
        let e1 = run(0.02);
        let e2 = run(0.01);
        let ratio = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "step-halving error ratio {ratio} outside fourth-order band (e1={e1}, e2={e2})"
        );
    }

    #[test]
    fn integrate_step_flags_divergence() {
        let p = params();
        let motion = TargetMotion::Constant { start: Vector3::zeros(), velocity: Vector3::zeros() };
        let x = InertialState::from_parts(
            Vector3::zeros(),
            Vector3::zeros(),
            Vector3::new(f64::MAX / 2.0, 0.0, 0.0),
        );
        // Huge drag force on a near-overflow velocity overflows within a step.
        let err = integrate_step(&x, &ControlInput::hover(p.gravity), &motion, 1.0, 0.02, &p);
        assert!(matches!(err, Err(DynamicsError::Diverged { .. })));
    }
}
