//! Indirect baseline controller.
//!
//! Instead of minimizing a transcribed cost directly, this controller writes
//! down the first-order optimality system of the pursuit problem under a
//! near-hover plant model: thrust acts on the vertical axis, pitch and roll
//! tilt gravity onto the horizontal axes, and the aim-miss term uses the
//! small-angle distance. The control is eliminated analytically through the
//! stationarity conditions, leaving a two-point boundary value problem in
//! the state and costate. Each control step solves that system by
//! Hermite-Simpson collocation on a uniform mesh with a banded damped-Newton
//! method, warm-started by time-shifting the previous solution.

use nalgebra::{DVector, SMatrix, SVector};
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::dynamics::{
    ControlInput, CostWeights, InertialState, PlantParams, SaturationLimits, State9,
};
use crate::eer::pd_lateral;
use crate::gpm::StepFlags;
use crate::linalg::{BandLu, BandMatrix};

/// State plus costate at one mesh point.
pub type Point18 = SVector<f64, 18>;
type Mat18 = SMatrix<f64, 18, 18>;

#[derive(Debug, Error)]
pub enum BvpError {
    #[error("mesh needs at least 3 points, got {0}")]
    MeshTooCoarse(usize),
    #[error("horizon must be positive, got {0}")]
    NonpositiveHorizon(f64),
}

/// Near-hover plant model: linear in the state, thrust on the vertical axis
/// only, gravity tilted by the small tilt angles on the horizontal axes.
pub fn simplified_dynamics(x: &State9, u: &[f64; 3], p: &PlantParams) -> State9 {
    let g = p.gravity;
    let c = p.drag;
    let ax = g * u[1] - c[0] * x[6];
    let ay = -g * u[2] - c[1] * x[7];
    let az = u[0] - c[2] * x[8] - g;
    State9::from_column_slice(&[x[3], x[4], x[5], ax, ay, az, ax, ay, az])
}

/// Control minimizing the pointwise Hamiltonian of the near-hover model;
/// closed form because the Hamiltonian is quadratic in the control with a
/// state-dependent pitch curvature.
pub fn stationarity_control(
    x: &State9,
    lam: &State9,
    w: &CostWeights,
    p: &PlantParams,
) -> [f64; 3] {
    let g = p.gravity;
    let thrust = w.thrust_ref - lam[5] - lam[8];
    let pitch = (-g * (lam[3] + lam[6]) - 2.0 * w.k3 * x[0] * x[2]) / (1.0 + 2.0 * w.k3 * x[0] * x[0]);
    let roll = g * (lam[4] + lam[7]);
    [thrust, pitch, roll]
}

/// Running cost of the near-hover model (small-angle aim-miss distance).
fn near_hover_cost(x: &State9, u: &[f64; 3], w: &CostWeights) -> f64 {
    let e1 = -x[0] - w.standoff;
    let dy = -x[1];
    let dz = -x[0] * u[1] - x[2];
    let du = u[0] - w.thrust_ref;
    0.5 * (du * du + u[1] * u[1] + u[2] * u[2])
        + w.k1 * e1 * e1
        + w.k2 * dy * dy
        + w.k3 * dz * dz
}

/// Costate field: the negative state gradient of the Hamiltonian.
pub fn costate_dynamics(
    x: &State9,
    lam: &State9,
    u: &[f64; 3],
    w: &CostWeights,
    p: &PlantParams,
) -> State9 {
    let c = p.drag;
    let dz = -x[0] * u[1] - x[2];
    State9::from_column_slice(&[
        -2.0 * w.k1 * (x[0] + w.standoff) + 2.0 * w.k3 * dz * u[1],
        -2.0 * w.k2 * x[1],
        2.0 * w.k3 * dz,
        -lam[0],
        -lam[1],
        -lam[2],
        c[0] * (lam[3] + lam[6]),
        c[1] * (lam[4] + lam[7]),
        c[2] * (lam[5] + lam[8]),
    ])
}

/// Pointwise Hamiltonian of the near-hover problem.
pub fn hamiltonian(
    x: &State9,
    lam: &State9,
    u: &[f64; 3],
    w: &CostWeights,
    p: &PlantParams,
) -> f64 {
    near_hover_cost(x, u, w) + lam.dot(&simplified_dynamics(x, u, p))
}

/// Combined state-costate field with the control eliminated.
fn optimality_field(y: &Point18, w: &CostWeights, p: &PlantParams) -> Point18 {
    let x = y.fixed_rows::<9>(0).into_owned();
    let lam = y.fixed_rows::<9>(9).into_owned();
    let u = stationarity_control(&x, &lam, w, p);
    let dx = simplified_dynamics(&x, &u, p);
    let dl = costate_dynamics(&x, &lam, &u, w, p);
    let mut out = Point18::zeros();
    out.fixed_rows_mut::<9>(0).copy_from(&dx);
    out.fixed_rows_mut::<9>(9).copy_from(&dl);
    out
}

/// Mesh and solver settings for the collocation solve.
#[derive(Debug, Clone, Copy)]
pub struct BvpConfig {
    pub mesh_points: usize,
    pub t_f: f64,
    pub weights: CostWeights,
    pub params: PlantParams,
    /// Convergence threshold on the residual infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Horizon shift applied when warm-starting from the previous step.
    pub control_period_s: f64,
    /// Replace the solved roll with the PD lateral law mapped through the
    /// near-hover relation (lateral acceleration = -g * roll).
    pub lateral_pd: Option<(f64, f64)>,
    pub limits: SaturationLimits,
}

impl BvpConfig {
    /// Defaults mirroring the shipped fast-pursuit scenario: 33 mesh points
    /// over a 2 s horizon, k1 = k3 = 50, hover-centered thrust term.
    pub fn standard(params: PlantParams) -> Self {
        BvpConfig {
            mesh_points: 33,
            t_f: 2.0,
            weights: CostWeights::new(50.0, 50.0, 50.0).with_thrust_ref(params.gravity),
            params,
            tol: 1e-6,
            max_iter: 40,
            control_period_s: 0.02,
            lateral_pd: Some((2.0, 3.0)),
            limits: SaturationLimits::for_gravity(params.gravity),
        }
    }

    fn validate(&self) -> Result<(), BvpError> {
        if self.mesh_points < 3 {
            return Err(BvpError::MeshTooCoarse(self.mesh_points));
        }
        if !(self.t_f > 0.0) {
            return Err(BvpError::NonpositiveHorizon(self.t_f));
        }
        Ok(())
    }
}

/// Solved boundary value problem: 18 unknowns per mesh point, flattened
/// point-major.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub y: DVector<f64>,
    pub mesh_points: usize,
    pub t_f: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub wall: Duration,
}

impl BvpSolution {
    pub fn time_at(&self, k: usize) -> f64 {
        self.t_f * k as f64 / (self.mesh_points - 1) as f64
    }

    pub fn state_at(&self, k: usize) -> State9 {
        State9::from_column_slice(&self.y.as_slice()[18 * k..18 * k + 9])
    }

    pub fn costate_at(&self, k: usize) -> State9 {
        State9::from_column_slice(&self.y.as_slice()[18 * k + 9..18 * k + 18])
    }
}

/// Hermite-Simpson collocation solver with a banded Jacobian and a chord
/// mode that reuses the last factorization while the iteration contracts.
pub struct TpbvpSolver {
    cfg: BvpConfig,
    cached_lu: Option<BandLu>,
}

impl TpbvpSolver {
    pub fn new(cfg: BvpConfig) -> Result<Self, BvpError> {
        cfg.validate()?;
        Ok(TpbvpSolver { cfg, cached_lu: None })
    }

    pub fn config(&self) -> &BvpConfig {
        &self.cfg
    }

    pub fn drop_cache(&mut self) {
        self.cached_lu = None;
    }

    fn n_unknowns(&self) -> usize {
        18 * self.cfg.mesh_points
    }

    fn step_h(&self) -> f64 {
        self.cfg.t_f / (self.cfg.mesh_points - 1) as f64
    }

    /// Straight-line guess from the measured state to the resting aim state,
    /// with zero costates.
    fn cold_start(&self, x0: &State9) -> DVector<f64> {
        let m = self.cfg.mesh_points;
        let mut y = DVector::zeros(self.n_unknowns());
        let tvel = [x0[6] - x0[3], x0[7] - x0[4], x0[8] - x0[5]];
        let goal = [
            -self.cfg.weights.standoff,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            tvel[0],
            tvel[1],
            tvel[2],
        ];
        for k in 0..m {
            let s = k as f64 / (m - 1) as f64;
            for i in 0..9 {
                y[18 * k + i] = (1.0 - s) * x0[i] + s * goal[i];
            }
        }
        y
    }

    /// Full residual: 9 initial-state rows, 18 Hermite-Simpson rows per
    /// interval, 9 terminal-costate rows.
    fn residual(&self, x0: &State9, y: &DVector<f64>, r: &mut DVector<f64>) {
        let m = self.cfg.mesh_points;
        let h = self.step_h();
        let w = &self.cfg.weights;
        let p = &self.cfg.params;
        let points: Vec<Point18> = (0..m)
            .map(|k| Point18::from_column_slice(&y.as_slice()[18 * k..18 * (k + 1)]))
            .collect();
        let fields: Vec<Point18> = points.iter().map(|pt| optimality_field(pt, w, p)).collect();
        for i in 0..9 {
            r[i] = points[0][i] - x0[i];
        }
        for k in 0..m - 1 {
            let ym = (points[k] + points[k + 1]) * 0.5 + (fields[k] - fields[k + 1]) * (h / 8.0);
            let fm = optimality_field(&ym, w, p);
            let defect =
                points[k + 1] - points[k] - (fields[k] + fm * 4.0 + fields[k + 1]) * (h / 6.0);
            r.rows_mut(9 + 18 * k, 18).copy_from(&defect);
        }
        let base = 9 + 18 * (m - 1);
        for i in 0..9 {
            r[base + i] = points[m - 1][9 + i];
        }
    }

    /// Forward-difference Jacobian of the combined field at one point.
    fn point_jacobian(&self, pt: &Point18) -> Mat18 {
        let w = &self.cfg.weights;
        let p = &self.cfg.params;
        let f0 = optimality_field(pt, w, p);
        let mut j = Mat18::zeros();
        for c in 0..18 {
            let hc = 1e-7 * (1.0 + pt[c].abs());
            let mut ptc = *pt;
            ptc[c] += hc;
            let fc = optimality_field(&ptc, w, p);
            j.set_column(c, &((fc - f0) / hc));
        }
        j
    }

    /// Assemble and factor the banded collocation Jacobian at `y`.
    fn factor_jacobian(&self, y: &DVector<f64>) -> Option<BandLu> {
        let m = self.cfg.mesh_points;
        let h = self.step_h();
        let w = &self.cfg.weights;
        let p = &self.cfg.params;
        let n = self.n_unknowns();
        let mut band = BandMatrix::zeros(n, 26, 26);
        for i in 0..9 {
            band.set(i, i, 1.0);
        }
        let base = 9 + 18 * (m - 1);
        for i in 0..9 {
            band.set(base + i, 18 * (m - 1) + 9 + i, 1.0);
        }
        let points: Vec<Point18> = (0..m)
            .map(|k| Point18::from_column_slice(&y.as_slice()[18 * k..18 * (k + 1)]))
            .collect();
        let fields: Vec<Point18> = points.iter().map(|pt| optimality_field(pt, w, p)).collect();
        let jacobians: Vec<Mat18> = points.iter().map(|pt| self.point_jacobian(pt)).collect();
        let eye = Mat18::identity();
        for k in 0..m - 1 {
            let ym = (points[k] + points[k + 1]) * 0.5 + (fields[k] - fields[k + 1]) * (h / 8.0);
            let jm = self.point_jacobian(&ym);
            let a = -eye
                - jacobians[k] * (h / 6.0)
                - jm * (eye * 0.5 + jacobians[k] * (h / 8.0)) * (2.0 * h / 3.0);
            let b = eye
                - jacobians[k + 1] * (h / 6.0)
                - jm * (eye * 0.5 - jacobians[k + 1] * (h / 8.0)) * (2.0 * h / 3.0);
            for q in 0..18 {
                let row = 9 + 18 * k + q;
                for c in 0..18 {
                    band.set(row, 18 * k + c, a[(q, c)]);
                    band.set(row, 18 * (k + 1) + c, b[(q, c)]);
                }
            }
        }
        band.factor()
    }

    /// Damped Newton solve. A warm entry (small initial residual) reuses the
    /// cached factorization as a chord iteration and only refreshes it when
    /// contraction stalls; a cold entry refreshes every iteration.
    pub fn solve(&mut self, x0: &State9, guess: Option<&DVector<f64>>) -> BvpSolution {
        let start = Instant::now();
        let n = self.n_unknowns();
        let mut y = match guess {
            Some(g) if g.len() == n => g.clone(),
            _ => self.cold_start(x0),
        };
        let mut r = DVector::zeros(n);
        self.residual(x0, &y, &mut r);
        let mut norm_r = r.amax();
        let mut chord = norm_r < 1e-2 && self.cached_lu.is_some();
        let mut best: (DVector<f64>, f64) = (y.clone(), norm_r);
        let mut iterations = 0;
        let mut converged = norm_r <= self.cfg.tol;

        while !converged && iterations < self.cfg.max_iter {
            if !chord || self.cached_lu.is_none() {
                match self.factor_jacobian(&y) {
                    Some(lu) => self.cached_lu = Some(lu),
                    None => break,
                }
            }
            let lu = self.cached_lu.as_ref().expect("factorization present");
            let mut delta = -r.clone();
            lu.solve_in_place(delta.as_mut_slice());
            let mut alpha = 1.0;
            let mut accepted = false;
            let mut y_new = y.clone();
            let mut r_new = r.clone();
            for _ in 0..7 {
                y_new = &y + &delta * alpha;
                self.residual(x0, &y_new, &mut r_new);
                let n_new = r_new.amax();
                if n_new.is_finite() && n_new < (1.0 - 1e-4 * alpha) * norm_r {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                if chord {
                    // Stale Jacobian exhausted; refresh and retry.
                    chord = false;
                    continue;
                }
                break;
            }
            iterations += 1;
            let ratio = r_new.amax() / norm_r;
            y = y_new;
            r = r_new.clone();
            norm_r = r.amax();
            if norm_r < best.1 {
                best = (y.clone(), norm_r);
            }
            converged = norm_r <= self.cfg.tol;
            // Slow contraction under a reused factorization: refresh next.
            if chord && ratio > 0.7 {
                chord = false;
            }
        }

        let (y_out, res_out) = if converged { (y, norm_r) } else { best };
        BvpSolution {
            y: y_out,
            mesh_points: self.cfg.mesh_points,
            t_f: self.cfg.t_f,
            converged,
            iterations,
            residual: res_out,
            wall: start.elapsed(),
        }
    }
}

/// Time-shift a previous solution by `dt` (linear interpolation between mesh
/// points, holding the final point past the horizon) to warm-start the next
/// solve.
pub fn shift_guess(prev: &BvpSolution, dt: f64) -> DVector<f64> {
    let m = prev.mesh_points;
    let h = prev.t_f / (m - 1) as f64;
    let mut y = DVector::zeros(18 * m);
    for k in 0..m {
        let t = k as f64 * h + dt;
        let pos = (t / h).min((m - 1) as f64).max(0.0);
        let k0 = (pos.floor() as usize).min(m - 2);
        let frac = pos - k0 as f64;
        for c in 0..18 {
            let a = prev.y[18 * k0 + c];
            let b = prev.y[18 * (k0 + 1) + c];
            y[18 * k + c] = a + frac * (b - a);
        }
    }
    y
}

/// Stateful wrapper owning the previous solution and the factorization
/// cache across steps of one run.
pub struct BvpController {
    pub cfg: BvpConfig,
    solver: TpbvpSolver,
    prev: Option<BvpSolution>,
    pub last_iterations: usize,
}

impl BvpController {
    pub fn new(cfg: BvpConfig) -> Result<Self, BvpError> {
        let solver = TpbvpSolver::new(cfg)?;
        Ok(BvpController { cfg, solver, prev: None, last_iterations: 0 })
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.solver.drop_cache();
        self.last_iterations = 0;
    }

    pub fn last_solution(&self) -> Option<&BvpSolution> {
        self.prev.as_ref()
    }

    pub fn step(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        let x0 = x.as_vector9();
        let guess = self
            .prev
            .as_ref()
            .map(|sol| shift_guess(sol, self.cfg.control_period_s));
        let solution = self.solver.solve(&x0, guess.as_ref());
        let lam0 = solution.costate_at(0);
        let raw = stationarity_control(&x0, &lam0, &self.cfg.weights, &self.cfg.params);
        let mut u = ControlInput::new(raw[0], raw[1], raw[2]);
        if let Some((kp, kd)) = self.cfg.lateral_pd {
            u.roll = -pd_lateral(x.rel_pos.y, x.rel_vel.y, kp, kd) / self.cfg.params.gravity;
        }
        let (u, saturated) = self.cfg.limits.saturate(&u);
        let flags = StepFlags { saturated, nonconverged: !solution.converged };
        self.last_iterations = solution.iterations;
        self.prev = Some(solution);
        (u, flags)
    }
}

/// Diagnostic dump of a solved mesh: one row per point with time, state,
/// costate, and the eliminated control.
pub fn write_mesh_csv<W: std::io::Write>(
    mut out: W,
    solution: &BvpSolution,
    weights: &CostWeights,
    params: &PlantParams,
) -> std::io::Result<()> {
    write!(out, "t_s")?;
    for i in 1..=9 {
        write!(out, ",x{i}")?;
    }
    for i in 1..=9 {
        write!(out, ",l{i}")?;
    }
    writeln!(out, ",u1,u2,u3")?;
    for k in 0..solution.mesh_points {
        let x = solution.state_at(k);
        let lam = solution.costate_at(k);
        let u = stationarity_control(&x, &lam, weights, params);
        write!(out, "{:.9}", solution.time_at(k))?;
        for i in 0..9 {
            write!(out, ",{:.9}", x[i])?;
        }
        for i in 0..9 {
            write!(out, ",{:.9}", lam[i])?;
        }
        writeln!(out, ",{:.9},{:.9},{:.9}", u[0], u[1], u[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: f64 = 9.80665;

    fn random_state(rng: &mut ChaCha8Rng) -> State9 {
        State9::from_fn(|_, _| rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn simplified_dynamics_matches_componentwise_expansion() {
        let p = PlantParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..50 {
            let x = random_state(&mut rng);
            let u = [
                rng.gen_range(0.0..20.0),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
            ];
            let f = simplified_dynamics(&x, &u, &p);
            let ax = p.gravity * u[1] - p.drag[0] * x[6];
            let ay = -p.gravity * u[2] - p.drag[1] * x[7];
            let az = u[0] - p.drag[2] * x[8] - p.gravity;
            let expect = [x[3], x[4], x[5], ax, ay, az, ax, ay, az];
            for i in 0..9 {
                assert!((f[i] - expect[i]).abs() < 1e-14, "row {i}");
            }
        }
    }

    #[test]
    fn stationarity_frozen_values() {
        let p = PlantParams::default();
        let w = CostWeights::new(50.0, 50.0, 50.0);
        let zero = State9::zeros();
        let u = stationarity_control(&zero, &zero, &w, &p);
        assert_eq!(u, [0.0, 0.0, 0.0]);
        // A vertical-velocity costate of -g on either velocity block makes
        // the thrust command exactly g.
        let mut lam = State9::zeros();
        lam[5] = -G;
        let u = stationarity_control(&zero, &lam, &w, &p);
        assert!((u[0] - G).abs() < 1e-15);
        let mut lam = State9::zeros();
        lam[8] = -G;
        let u = stationarity_control(&zero, &lam, &w, &p);
        assert!((u[0] - G).abs() < 1e-15);
    }

    #[test]
    fn costate_frozen_values() {
        let p = PlantParams::default();
        let w = CostWeights::new(7.0, 11.0, 13.0);
        let zero = State9::zeros();
        let s = costate_dynamics(&zero, &zero, &[0.0; 3], &w, &p);
        // At the origin only the standoff error drives the costates.
        assert!((s[0] - (-6.0 * w.k1)).abs() < 1e-12);
        for i in 1..9 {
            assert_eq!(s[i], 0.0, "row {i}");
        }
        let mut lam = State9::zeros();
        lam[0] = 1.0;
        lam[1] = 2.0;
        lam[2] = 3.0;
        let s = costate_dynamics(&zero, &lam, &[0.0; 3], &w, &p);
        assert_eq!((s[3], s[4], s[5]), (-1.0, -2.0, -3.0));
    }

    /// The costate field must equal the negative state gradient of the
    /// Hamiltonian at arbitrary points.
    #[test]
    fn costate_field_is_negative_hamiltonian_gradient() {
        let p = PlantParams::default();
        let w = CostWeights::new(50.0, 12.0, 50.0).with_thrust_ref(G);
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..50 {
            let x = random_state(&mut rng);
            let lam = random_state(&mut rng);
            let u = [
                rng.gen_range(0.0..20.0),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
            ];
            let s = costate_dynamics(&x, &lam, &u, &w, &p);
            for i in 0..9 {
                let h = 1e-6 * (1.0 + x[i].abs());
                let mut xp = x;
                xp[i] += h;
                let mut xm = x;
                xm[i] -= h;
                let fd = (hamiltonian(&xp, &lam, &u, &w, &p)
                    - hamiltonian(&xm, &lam, &u, &w, &p))
                    / (2.0 * h);
                assert!(
                    (s[i] + fd).abs() < 1e-5 * (1.0 + fd.abs()),
                    "component {i}: field {} vs -grad {}",
                    s[i],
                    -fd
                );
            }
        }
    }

    /// The eliminated control must zero the control gradient of the
    /// Hamiltonian at arbitrary state-costate pairs.
    #[test]
    fn stationarity_control_zeroes_hamiltonian_gradient() {
        let p = PlantParams::default();
        let w = CostWeights::new(50.0, 12.0, 50.0).with_thrust_ref(G);
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..200 {
            let x = random_state(&mut rng);
            let lam = random_state(&mut rng);
            let u = stationarity_control(&x, &lam, &w, &p);
            for c in 0..3 {
                let h = 1e-6 * (1.0 + u[c].abs());
                let mut up = u;
                up[c] += h;
                let mut um = u;
                um[c] -= h;
                let fd = (hamiltonian(&x, &lam, &up, &w, &p)
                    - hamiltonian(&x, &lam, &um, &w, &p))
                    / (2.0 * h);
                assert!(fd.abs() < 1e-6 * (1.0 + u[c].abs()), "du{c}: {fd}");
            }
        }
    }

    fn aim_rest_state() -> State9 {
        State9::from_column_slice(&[-3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// With the hover-centered thrust term the resting aim state solves the
    /// optimality system with identically zero costates.
    #[test]
    fn equilibrium_solution_is_hover_with_zero_costates() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let sol = solver.solve(&aim_rest_state(), None);
        assert!(sol.converged, "residual {:.3e}", sol.residual);
        for k in 0..sol.mesh_points {
            let lam = sol.costate_at(k);
            assert!(lam.amax() < 1e-6, "costate at {k}: {:.3e}", lam.amax());
        }
        let u = stationarity_control(
            &sol.state_at(0),
            &sol.costate_at(0),
            &cfg.weights,
            &cfg.params,
        );
        assert!((u[0] - cfg.params.gravity).abs() < 1e-5);
        assert!(u[1].abs() < 1e-6 && u[2].abs() < 1e-6);
    }

    fn pursuit_state() -> State9 {
        State9::from_column_slice(&[-10.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// Solved trajectories must satisfy the optimality conditions pointwise:
    /// vanishing control gradient on every mesh point, pinned initial state,
    /// free-endpoint costate at the horizon.
    #[test]
    fn solved_pursuit_satisfies_optimality_conditions() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let x0 = pursuit_state();
        let sol = solver.solve(&x0, None);
        assert!(sol.converged, "residual {:.3e}", sol.residual);
        assert!((sol.state_at(0) - x0).amax() < 1e-9);
        assert!(sol.costate_at(sol.mesh_points - 1).amax() < 1e-6);
        for k in 0..sol.mesh_points {
            let x = sol.state_at(k);
            let lam = sol.costate_at(k);
            let u = stationarity_control(&x, &lam, &cfg.weights, &cfg.params);
            for c in 0..3 {
                let h = 1e-5 * (1.0 + u[c].abs());
                let mut up = u;
                up[c] += h;
                let mut um = u;
                um[c] -= h;
                let fd = (hamiltonian(&x, &lam, &up, &cfg.weights, &cfg.params)
                    - hamiltonian(&x, &lam, &um, &cfg.weights, &cfg.params))
                    / (2.0 * h);
                assert!(fd.abs() < 1e-5, "mesh {k} du{c}: {fd:.3e}");
            }
        }
    }

    /// Restarting from a converged solution is a fixed point: the entry
    /// residual already satisfies the tolerance.
    #[test]
    fn warm_restart_at_solution_is_immediate() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let x0 = pursuit_state();
        let first = solver.solve(&x0, None);
        assert!(first.converged);
        let second = solver.solve(&x0, Some(&first.y));
        assert!(second.converged);
        assert!(second.iterations <= 2, "took {} iterations", second.iterations);
        for i in 0..second.y.len() {
            assert_eq!(first.y[i].to_bits(), second.y[i].to_bits());
        }
    }

    /// A shifted warm start one control period later must converge in a
    /// handful of chord iterations, well under a cold solve.
    #[test]
    fn shifted_warm_start_converges_quickly() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let x0 = pursuit_state();
        let first = solver.solve(&x0, None);
        assert!(first.converged);
        // Advance the plant roughly one control period along the solved
        // field and re-solve warm.
        let f0 = optimality_field(
            &Point18::from_column_slice(&first.y.as_slice()[0..18]),
            &cfg.weights,
            &cfg.params,
        );
        let mut x1 = x0;
        for i in 0..9 {
            x1[i] += cfg.control_period_s * f0[i];
        }
        let guess = shift_guess(&first, cfg.control_period_s);
        let second = solver.solve(&x1, Some(&guess));
        assert!(second.converged);
        assert!(
            second.iterations <= first.iterations,
            "warm took {} iterations (cold {})",
            second.iterations,
            first.iterations
        );
    }

    fn initial_control_at_mesh(x0: &State9, mesh_points: usize) -> [f64; 3] {
        let mut cfg = BvpConfig::standard(PlantParams::default());
        cfg.mesh_points = mesh_points;
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let sol = solver.solve(x0, None);
        assert!(sol.converged, "mesh {mesh_points} failed: {:.3e}", sol.residual);
        stationarity_control(&sol.state_at(0), &sol.costate_at(0), &cfg.weights, &cfg.params)
    }

    /// Mesh refinement: the equilibrium answer is mesh-independent, and on
    /// the aggressive pursuit start successive doublings contract the
    /// extracted control at the collocation order once past the initial
    /// boundary-layer transient, landing under 1e-4 relative to scale.
    #[test]
    fn mesh_refinement_leaves_initial_control_stable() {
        let u33 = initial_control_at_mesh(&aim_rest_state(), 33);
        let u65 = initial_control_at_mesh(&aim_rest_state(), 65);
        for c in 0..3 {
            assert!((u33[c] - u65[c]).abs() < 1e-4, "equilibrium u{c}");
        }

        let pursuit =
            State9::from_column_slice(&[-10.0, 0.0, 0.61, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a = initial_control_at_mesh(&pursuit, 129);
        let b = initial_control_at_mesh(&pursuit, 257);
        let c513 = initial_control_at_mesh(&pursuit, 513);
        let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d1 = (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0f64, f64::max);
        let d2 = (0..3).map(|c| (b[c] - c513[c]).abs()).fold(0.0f64, f64::max);
        assert!(d2 < d1 / 6.0, "refinement not contracting: {d1:.3e} -> {d2:.3e}");
        assert!(d2 < 1e-4 * scale, "refined change {d2:.3e} vs scale {scale:.1}");
    }

    #[test]
    fn controller_is_deterministic_and_hovers_at_equilibrium() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let x = InertialState::from_vector9(&aim_rest_state());
        let mut a = BvpController::new(cfg).unwrap();
        let mut b = BvpController::new(cfg).unwrap();
        for _ in 0..3 {
            let (ua, fa) = a.step(&x);
            let (ub, fb) = b.step(&x);
            assert_eq!(ua.thrust.to_bits(), ub.thrust.to_bits());
            assert_eq!(ua.pitch.to_bits(), ub.pitch.to_bits());
            assert_eq!(ua.roll.to_bits(), ub.roll.to_bits());
            assert_eq!(fa, fb);
            assert!(!fa.nonconverged);
            assert!((ua.thrust - cfg.params.gravity).abs() < 1e-4);
            assert!(ua.pitch.abs() < 1e-5 && ua.roll.abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_degenerate_configs() {
        let mut cfg = BvpConfig::standard(PlantParams::default());
        cfg.mesh_points = 2;
        assert!(matches!(TpbvpSolver::new(cfg), Err(BvpError::MeshTooCoarse(2))));
        let mut cfg = BvpConfig::standard(PlantParams::default());
        cfg.t_f = 0.0;
        assert!(matches!(TpbvpSolver::new(cfg), Err(BvpError::NonpositiveHorizon(_))));
    }

    #[test]
    fn mesh_csv_has_row_per_point() {
        let cfg = BvpConfig::standard(PlantParams::default());
        let mut solver = TpbvpSolver::new(cfg).unwrap();
        let sol = solver.solve(&aim_rest_state(), None);
        let mut buf = Vec::new();
        write_mesh_csv(&mut buf, &sol, &cfg.weights, &cfg.params).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + sol.mesh_points);
        assert!(text.starts_with("t_s,x1"));
    }
}

