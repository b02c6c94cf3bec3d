//! Egocentric pursuit regulator.
//!
//! The controller rotates the relative position/velocity into the body-fixed
//! frame and shifts the longitudinal axis by the aim offset `r*`. In that
//! frame the pursuit task becomes "drive a double integrator to the origin",
//! so a precomputed LQR gain produces the optimal virtual acceleration in one
//! matrix-vector product. Rotating back to the inertial frame and inverting
//! the thrust-vector model recovers thrust, pitch, and roll analytically; no
//! iteration happens at control time.
//!
//! The longitudinal/vertical pair is always LQR-regulated. The lateral axis
//! is either folded into a 3-axis gain or handled by an equivalent PD law
//! (the default, and exactly equivalent at zero roll).

use nalgebra::{DVector, Vector3, Vector4, Vector6};
use thiserror::Error;

use crate::care::{GainSynthesis, SynthesisError};
use crate::dynamics::{
    rotation_matrix, Attitude, ControlInput, InertialState, PlantParams, SaturationLimits,
};

#[derive(Debug, Error)]
pub enum EerError {
    #[error("gain matrix is {n}x{m}, lateral mode requires {want_n}x{want_m}")]
    GainShape { n: usize, m: usize, want_n: usize, want_m: usize },
    #[error("PD gains must be positive")]
    NonpositivePdGains,
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// Recovery failures; the strict inverse reports them, the clamped variant
/// absorbs them into a flagged step.
#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("vertical specific-force component {den:.3} is not positive; thrust would not point up")]
    ThrustNotUpright { den: f64 },
    #[error("requested specific force vanishes; attitude undefined")]
    ThrustVanishes,
    #[error("roll argument {arg:.3} outside [-1, 1]")]
    RollOutOfRange { arg: f64 },
}

/// Tracking state expressed in the body-aligned frame, shifted so the
/// desired standoff/aim condition sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualState {
    /// Rotated relative position with the aim offset added to x.
    pub pos: Vector3<f64>,
    /// Rotated relative velocity.
    pub vel: Vector3<f64>,
}

impl VirtualState {
    pub fn as_vector6(&self) -> Vector6<f64> {
        Vector6::new(self.pos.x, self.pos.y, self.pos.z, self.vel.x, self.vel.y, self.vel.z)
    }

    /// Longitudinal/vertical slice [x, z, vx, vz]: the lateral axis is
    /// removed, matching the 2-axis gain layout.
    pub fn reduced(&self) -> Vector4<f64> {
        Vector4::new(self.pos.x, self.pos.z, self.vel.x, self.vel.z)
    }
}

/// How the aim offset tracks pitch: `Exact` keeps the aim ray on the target
/// at the standoff distance (offset grows as the nose drops), `Constant`
/// freezes it at the standoff distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RStarMode {
    Exact,
    Constant,
}

/// Aim offset along the body x-axis. Held fixed within a control step; the
/// caller passes the previous step's commanded pitch.
pub fn r_star(pitch: f64, mode: RStarMode, standoff: f64) -> f64 {
    match mode {
        RStarMode::Exact => standoff / pitch.cos(),
        RStarMode::Constant => standoff,
    }
}

/// Map the tracking state into the virtual frame: block-rotate position and
/// velocity by Rᵀ and add the aim offset on x.
pub fn virtual_state(x: &InertialState, att: &Attitude, r_star: f64) -> VirtualState {
    let rt = rotation_matrix(att).transpose();
    VirtualState {
        pos: rt * x.rel_pos + Vector3::new(r_star, 0.0, 0.0),
        vel: rt * x.rel_vel,
    }
}

/// Inverse of [`virtual_state`]: recover (relative position, relative
/// velocity) from a virtual state under the same attitude and offset.
pub fn tracking_from_virtual(
    e: &VirtualState,
    att: &Attitude,
    r_star: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let r = rotation_matrix(att);
    (r * (e.pos - Vector3::new(r_star, 0.0, 0.0)), r * e.vel)
}

/// Virtual feedback `u_e = K·x_e`. The gain already carries the negative
/// sign, so this is the complete control law in the virtual frame.
pub fn virtual_control(k: &nalgebra::DMatrix<f64>, x_e: &DVector<f64>) -> DVector<f64> {
    k * x_e
}

/// Lateral acceleration from the PD law on the lateral relative position and
/// velocity. Gains are positive magnitudes; negative feedback is applied
/// here.
pub fn pd_lateral(lat_pos: f64, lat_vel: f64, kp: f64, kd: f64) -> f64 {
    -(kp * lat_pos + kd * lat_vel)
}

/// Rotate the complete virtual acceleration back into the inertial frame.
pub fn desired_acceleration(att: &Attitude, u_e: &Vector3<f64>) -> Vector3<f64> {
    rotation_matrix(att) * u_e
}

/// Which velocity feeds the drag compensation inside the recovery.
///
/// `Absolute` is the exact algebraic inverse of the plant model (drag acts
/// on absolute velocity there, so this choice closes the loop to roundoff).
/// `RelativeSigned` is a compatibility variant: target-relative velocity
/// with a reversed sign inside the thrust norm; it does not invert the model
/// whenever the vehicle moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DragRecovery {
    Absolute,
    RelativeSigned,
}

/// Invert the thrust-vector model: find (thrust, pitch, roll) whose modeled
/// acceleration equals `a_star` at the current velocity.
pub fn recover_input(
    a_star: &Vector3<f64>,
    x: &InertialState,
    params: &PlantParams,
    mode: DragRecovery,
) -> Result<ControlInput, RecoveryError> {
    let c = Vector3::from_column_slice(&params.drag);
    let g = params.gravity;
    match mode {
        DragRecovery::Absolute => {
            let f = a_star + Vector3::new(0.0, 0.0, g) + c.component_mul(&x.abs_vel);
            let thrust = f.norm();
            if thrust < 1e-12 {
                return Err(RecoveryError::ThrustVanishes);
            }
            if f.z <= 0.0 {
                return Err(RecoveryError::ThrustNotUpright { den: f.z });
            }
            let pitch = (f.x / f.z).atan();
            let roll = (-f.y / thrust).asin();
            Ok(ControlInput::new(thrust, pitch, roll))
        }
        DragRecovery::RelativeSigned => {
            let v = x.rel_vel;
            let thrust =
                (a_star + Vector3::new(0.0, 0.0, g) - c.component_mul(&v)).norm();
            if thrust < 1e-12 {
                return Err(RecoveryError::ThrustVanishes);
            }
            let den = a_star.z + c.z * v.z + g;
            if den <= 0.0 {
                return Err(RecoveryError::ThrustNotUpright { den });
            }
            let pitch = ((a_star.x + c.x * v.x) / den).atan();
            let arg = (-a_star.y - c.y * v.y) / thrust;
            if arg.abs() > 1.0 {
                return Err(RecoveryError::RollOutOfRange { arg });
            }
            Ok(ControlInput::new(thrust, pitch, arg.asin()))
        }
    }
}

/// Recovery that never fails: degenerate geometry is clamped (vertical
/// component floored, roll argument clipped) and the result saturated into
/// the actuator envelope. The flag reports whether anything was altered.
pub fn recover_input_clamped(
    a_star: &Vector3<f64>,
    x: &InertialState,
    params: &PlantParams,
    mode: DragRecovery,
    limits: &SaturationLimits,
) -> (ControlInput, bool) {
    let c = Vector3::from_column_slice(&params.drag);
    let g = params.gravity;
    let mut touched = false;
    let raw = match mode {
        DragRecovery::Absolute => {
            let f = a_star + Vector3::new(0.0, 0.0, g) + c.component_mul(&x.abs_vel);
            let fz = if f.z < 0.1 {
                touched = true;
                0.1
            } else {
                f.z
            };
            let thrust = (f.x * f.x + f.y * f.y + fz * fz).sqrt();
            ControlInput::new(thrust, (f.x / fz).atan(), (-f.y / thrust).asin())
        }
        DragRecovery::RelativeSigned => {
            let v = x.rel_vel;
            let thrust = (a_star + Vector3::new(0.0, 0.0, g) - c.component_mul(&v))
                .norm()
                .max(0.1);
            let den = a_star.z + c.z * v.z + g;
            let den = if den < 0.1 {
                touched = true;
                0.1
            } else {
                den
            };
            let arg = (-a_star.y - c.y * v.y) / thrust;
            if arg.abs() > 1.0 {
                touched = true;
            }
            ControlInput::new(thrust, ((a_star.x + c.x * v.x) / den).atan(), arg.clamp(-1.0, 1.0).asin())
        }
    };
    let (clamped, saturated) = limits.saturate(&raw);
    (clamped, touched || saturated)
}

/// Lateral-axis handling: a PD law on the lateral tracking error feeding the
/// lateral acceleration slot (default), or a third LQR axis inside the gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LateralLaw {
    Pd { kp: f64, kd: f64 },
    FullGain,
}

/// Immutable controller configuration: synthesized gain, lateral law, aim
/// offset mode, recovery convention, actuator envelope, plant constants.
#[derive(Debug, Clone)]
pub struct EerConfig {
    pub gains: GainSynthesis,
    pub lateral: LateralLaw,
    pub r_star_mode: RStarMode,
    pub drag_recovery: DragRecovery,
    pub limits: SaturationLimits,
    pub params: PlantParams,
}

impl EerConfig {
    pub fn new(
        gains: GainSynthesis,
        lateral: LateralLaw,
        params: PlantParams,
    ) -> Result<Self, EerError> {
        let (want_n, want_m) = match lateral {
            LateralLaw::Pd { kp, kd } => {
                if kp <= 0.0 || kd <= 0.0 {
                    return Err(EerError::NonpositivePdGains);
                }
                (4, 2)
            }
            LateralLaw::FullGain => (6, 3),
        };
        if gains.n() != want_n || gains.m() != want_m {
            return Err(EerError::GainShape { n: gains.n(), m: gains.m(), want_n, want_m });
        }
        let limits = SaturationLimits::for_gravity(params.gravity);
        Ok(EerConfig {
            gains,
            lateral,
            r_star_mode: RStarMode::Exact,
            drag_recovery: DragRecovery::Absolute,
            limits,
            params,
        })
    }

    /// Standard construction: synthesize the 2-axis gain from diagonal
    /// weights ([x, z, vx, vz] states, [ax, az] controls) and take the
    /// lateral PD gains directly.
    pub fn reduced_lqr(
        q1: [f64; 4],
        q2: [f64; 2],
        kp: f64,
        kd: f64,
        params: PlantParams,
    ) -> Result<Self, EerError> {
        let gains = GainSynthesis::new(
            crate::care::LinearPlant::double_integrator(2),
            DVector::from_column_slice(&q1),
            DVector::from_column_slice(&q2),
        )?;
        EerConfig::new(gains, LateralLaw::Pd { kp, kd }, params)
    }

    pub fn with_r_star_mode(mut self, mode: RStarMode) -> Self {
        self.r_star_mode = mode;
        self
    }

    pub fn with_drag_recovery(mut self, mode: DragRecovery) -> Self {
        self.drag_recovery = mode;
        self
    }

    pub fn with_limits(mut self, limits: SaturationLimits) -> Self {
        self.limits = limits;
        self
    }
}

/// One full control evaluation: virtual mapping, gain, lateral law, rotation
/// back, recovery, saturation. Pure in `(x, att, cfg)`; the flag marks any
/// clamping along the way.
pub fn eer_step(x: &InertialState, att: &Attitude, cfg: &EerConfig) -> (ControlInput, bool) {
    let rs = r_star(att.pitch, cfg.r_star_mode, cfg.params.safe_distance);
    let e = virtual_state(x, att, rs);
    let u_full = match cfg.lateral {
        LateralLaw::Pd { kp, kd } => {
            let er = e.reduced();
            let u = virtual_control(&cfg.gains.k, &DVector::from_column_slice(er.as_slice()));
            let lat = pd_lateral(x.rel_pos.y, x.rel_vel.y, kp, kd);
            Vector3::new(u[0], lat, u[1])
        }
        LateralLaw::FullGain => {
            let ev = e.as_vector6();
            let u = virtual_control(&cfg.gains.k, &DVector::from_column_slice(ev.as_slice()));
            Vector3::new(u[0], u[1], u[2])
        }
    };
    let a_star = desired_acceleration(att, &u_full);
    recover_input_clamped(&a_star, x, &cfg.params, cfg.drag_recovery, &cfg.limits)
}

/// Stateful wrapper carrying the one piece of memory the law needs: the
/// previously commanded attitude (the plant has no attitude state of its
/// own, so the mapping uses the last command; the first step flies level).
#[derive(Debug, Clone)]
pub struct EerController {
    pub cfg: EerConfig,
    last_att: Attitude,
}

impl EerController {
    pub fn new(cfg: EerConfig) -> Self {
        EerController { cfg, last_att: Attitude::level() }
    }

    pub fn step(&mut self, x: &InertialState) -> (ControlInput, bool) {
        let (u, flagged) = eer_step(x, &self.last_att, &self.cfg);
        self.last_att = u.attitude();
        (u, flagged)
    }

    pub fn reset(&mut self) {
        self.last_att = Attitude::level();
    }

    pub fn last_attitude(&self) -> Attitude {
        self.last_att
    }
}

/// The reduced-mode weight pairs used by the shipped scenario configs.
pub mod weights {
    /// Aggressive set for fast simulated pursuits.
    pub const SIM_Q1: [f64; 4] = [58.0, 264.0, 30.0, 10.0];
    pub const SIM_Q2: [f64; 2] = [40.0, 30.0];
    /// Softer set tuned for hardware-scale runs.
    pub const EXP_Q1: [f64; 4] = [116.0, 441.0, 87.0, 18.0];
    pub const EXP_Q2: [f64; 2] = [40.0, 30.0];
    /// Lateral PD pair shared by both.
    pub const LATERAL_KP: f64 = 2.0;
    pub const LATERAL_KD: f64 = 3.0;
}
