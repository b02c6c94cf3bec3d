//! Direct pseudospectral baseline controller.
//!
//! Each control step transcribes the receding-horizon problem onto a
//! Legendre-Gauss collocation grid: states and controls become values at the
//! interior nodes, the dynamics become algebraic equality constraints through
//! a differentiation matrix anchored at the initial time, and the running
//! cost becomes a Gauss quadrature. The resulting equality-constrained NLP is
//! solved by an augmented-Lagrangian outer loop around a dense BFGS inner
//! minimizer with analytic gradients, warm-started from the previous step.
//! The command applied to the plant is the control polynomial evaluated at
//! the left end of the horizon.

use nalgebra::DVector;
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::dynamics::{
    targeting_dynamics, ControlInput, CostWeights, InertialState, PlantParams, SaturationLimits,
    State9,
};
use crate::eer::pd_lateral;

#[derive(Debug, Error)]
pub enum GpmError {
    #[error("node count {0} outside supported range [1, 64]")]
    NodeCountOutOfRange(usize),
    #[error("node solve failed to converge for N = {0}")]
    NodeConvergence(usize),
    #[error("horizon must be positive, got {0}")]
    NonpositiveHorizon(f64),
}

/// Legendre-Gauss collocation grid: interior nodes and quadrature weights on
/// (-1, 1), a differentiation matrix anchored at the initial point tau = -1,
/// and interpolation coefficients for evaluating node polynomials there.
#[derive(Debug, Clone, PartialEq)]
pub struct LgGrid {
    pub n: usize,
    /// Roots of the degree-n Legendre polynomial, strictly increasing.
    pub nodes: Vec<f64>,
    /// Gauss weights; sum to 2, quadrature exact through degree 2n-1.
    pub weights: Vec<f64>,
    /// n x (n+1) differentiation matrix over the points {-1, nodes...}:
    /// row k gives the derivative at node k of the interpolant through all
    /// n+1 points.
    pub d: nalgebra::DMatrix<f64>,
    /// Lagrange basis values at tau = -1 for the node-only point set; used
    /// to extract the control polynomial at the current time.
    pub at_start: Vec<f64>,
}

/// Legendre polynomial value and derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    // P'_n(x) = n (x P_n - P_{n-1}) / (x^2 - 1); nodes are interior so the
    // denominator never vanishes where this is used.
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

pub fn lg_grid(n: usize) -> Result<LgGrid, GpmError> {
    if n < 1 || n > 64 {
        return Err(GpmError::NodeCountOutOfRange(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-flavored initial guess, then Newton on the recurrence.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..60 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GpmError::NodeConvergence(n));
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Enforce exact antisymmetry; Newton leaves the pairs equal only to
    // roundoff and downstream tests lean on the symmetry.
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    // Differentiation matrix over the anchored point set s = {-1} U nodes,
    // via barycentric weights v_j = 1 / prod_{m != j} (s_j - s_m).
    let mut s = Vec::with_capacity(n + 1);
    s.push(-1.0);
    s.extend_from_slice(&nodes);
    let mut v = vec![1.0; n + 1];
    for j in 0..=n {
        for m in 0..=n {
            if m != j {
                v[j] /= s[j] - s[m];
            }
        }
    }
    let mut d = nalgebra::DMatrix::zeros(n, n + 1);
    for k in 1..=n {
        let mut diag = 0.0;
        for j in 0..=n {
            if j != k {
                let val = (v[j] / v[k]) / (s[k] - s[j]);
                d[(k - 1, j)] = val;
                diag -= val;
            }
        }
        d[(k - 1, k)] = diag;
    }

    // Node-only Lagrange basis evaluated at -1 (extrapolation weights for
    // the control polynomial, which lives on the nodes alone).
    let mut at_start = vec![1.0; n];
    for i in 0..n {
        for m in 0..n {
            if m != i {
                at_start[i] *= (-1.0 - nodes[m]) / (nodes[i] - nodes[m]);
            }
        }
    }

    Ok(LgGrid { n, nodes, weights, d, at_start })
}

/// Transcribed problem: initial state, horizon, plant and cost data bound to
/// a grid. Decision vector layout: 9 state components at n nodes each
/// (component-major), then 3 control components at n nodes each.
#[derive(Debug, Clone)]
pub struct GpmProblem<'a> {
    pub grid: &'a LgGrid,
    pub x0: State9,
    pub t_f: f64,
    pub weights: CostWeights,
    pub params: PlantParams,
}

impl<'a> GpmProblem<'a> {
    pub fn new(
        grid: &'a LgGrid,
        x0: State9,
        t_f: f64,
        weights: CostWeights,
        params: PlantParams,
    ) -> Result<Self, GpmError> {
        if !(t_f > 0.0) {
            return Err(GpmError::NonpositiveHorizon(t_f));
        }
        Ok(GpmProblem { grid, x0, t_f, weights, params })
    }

    pub fn n_vars(&self) -> usize {
        12 * self.grid.n
    }

    pub fn n_constraints(&self) -> usize {
        9 * self.grid.n
    }

    #[inline]
    fn sx(&self, i: usize, k: usize) -> usize {
        i * self.grid.n + k
    }

    #[inline]
    fn su(&self, c: usize, k: usize) -> usize {
        (9 + c) * self.grid.n + k
    }

    fn state_at(&self, z: &[f64], k: usize) -> InertialState {
        let mut v = State9::zeros();
        for i in 0..9 {
            v[i] = z[self.sx(i, k)];
        }
        InertialState::from_vector9(&v)
    }

    fn control_at(&self, z: &[f64], k: usize) -> ControlInput {
        ControlInput::new(z[self.su(0, k)], z[self.su(1, k)], z[self.su(2, k)])
    }

    /// Running cost under Gauss quadrature: (t_f/2) * sum_k w_k G(x_k, u_k),
    /// where G is the pursuit stage cost with the aim-miss term evaluated at
    /// the node's own pitch command.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let w = &self.weights;
        let mut total = 0.0;
        for k in 0..self.grid.n {
            let x1 = z[self.sx(0, k)];
            let x2 = z[self.sx(1, k)];
            let x3 = z[self.sx(2, k)];
            let u1 = z[self.su(0, k)];
            let u2 = z[self.su(1, k)];
            let u3 = z[self.su(2, k)];
            let e1 = -x1 - w.standoff;
            let e3 = -x1 * u2.tan() - x3;
            let du1 = u1 - w.thrust_ref;
            let g = 0.5 * (du1 * du1 + u2 * u2 + u3 * u3)
                + w.k1 * e1 * e1
                + w.k2 * x2 * x2
                + w.k3 * e3 * e3;
            total += self.grid.weights[k] * g;
        }
        0.5 * self.t_f * total
    }

    /// Analytic gradient of [`objective`]; layout matches the decision
    /// vector.
    pub fn objective_grad(&self, z: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let w = &self.weights;
        for k in 0..self.grid.n {
            let scale = 0.5 * self.t_f * self.grid.weights[k];
            let x1 = z[self.sx(0, k)];
            let x2 = z[self.sx(1, k)];
            let x3 = z[self.sx(2, k)];
            let u1 = z[self.su(0, k)];
            let u2 = z[self.su(1, k)];
            let u3 = z[self.su(2, k)];
            let t = u2.tan();
            let e1 = -x1 - w.standoff;
            let e3 = -x1 * t - x3;
            grad[self.sx(0, k)] += scale * (-2.0 * w.k1 * e1 - 2.0 * w.k3 * e3 * t);
            grad[self.sx(1, k)] += scale * 2.0 * w.k2 * x2;
            grad[self.sx(2, k)] += scale * (-2.0 * w.k3 * e3);
            grad[self.su(0, k)] += scale * (u1 - w.thrust_ref);
            grad[self.su(1, k)] += scale * (u2 - 2.0 * w.k3 * e3 * x1 * (1.0 + t * t));
            grad[self.su(2, k)] += scale * u3;
        }
    }

    /// Collocation defects: for every state component i and node k,
    /// sum_j D[k, j] X_i(point j) - (t_f/2) f_i(x_k, u_k), with point 0
    /// pinned to the initial state.
    pub fn constraints(&self, z: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        for k in 0..n {
            let xk = self.state_at(z, k);
            let uk = self.control_at(z, k);
            let f = targeting_dynamics(&xk, &uk, &self.params);
            for i in 0..9 {
                let mut acc = self.grid.d[(k, 0)] * self.x0[i];
                for j in 0..n {
                    acc += self.grid.d[(k, j + 1)] * z[self.sx(i, j)];
                }
                out[i * n + k] = acc - 0.5 * self.t_f * f[i];
            }
        }
    }

    /// Constraint-Jacobian-transpose product `out = J^T v`, assembled
    /// analytically. The Jacobian splits into the linear differentiation
    /// part and the per-node dynamics part; only the latter needs the
    /// thrust-vector partial derivatives.
    pub fn constraint_jtv(&self, z: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        out.fill(0.0);
        // Differentiation part: constraint (i, k) reads X_i(m) with weight
        // D[k, m+1].
        for i in 0..9 {
            for m in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.grid.d[(k, m + 1)] * v[i * n + k];
                }
                out[self.sx(i, m)] = acc;
            }
        }
        let h = 0.5 * self.t_f;
        let c = self.params.drag;
        for m in 0..n {
            let u1 = z[self.su(0, m)];
            let u2 = z[self.su(1, m)];
            let u3 = z[self.su(2, m)];
            let (s2, c2) = u2.sin_cos();
            let (s3, c3) = u3.sin_cos();
            // Velocity columns of df/dx: positions integrate relative
            // velocity, both velocity blocks share the drag diagonal.
            for j in 0..3 {
                out[self.sx(3 + j, m)] -= h * v[j * n + m];
                out[self.sx(6 + j, m)] -= h * (-c[j]) * (v[(3 + j) * n + m] + v[(6 + j) * n + m]);
            }
            // Control columns: the acceleration rows appear twice (relative
            // and absolute velocity derivatives are the same expression).
            let vsum = [
                v[3 * n + m] + v[6 * n + m],
                v[4 * n + m] + v[7 * n + m],
                v[5 * n + m] + v[8 * n + m],
            ];
            let da_du1 = [c3 * s2, -s3, c3 * c2];
            let da_du2 = [u1 * c3 * c2, 0.0, -u1 * c3 * s2];
            let da_du3 = [-u1 * s3 * s2, -u1 * c3, -u1 * s3 * c2];
            for j in 0..3 {
                out[self.su(0, m)] -= h * da_du1[j] * vsum[j];
                out[self.su(1, m)] -= h * da_du2[j] * vsum[j];
                out[self.su(2, m)] -= h * da_du3[j] * vsum[j];
            }
        }
    }

    /// Deterministic cold start: states slide linearly from the initial
    /// state to the aim condition (standoff behind a co-moving target),
    /// controls sit at hover.
    pub fn cold_start(&self) -> DVector<f64> {
        let n = self.grid.n;
        let mut z = DVector::zeros(self.n_vars());
        let target_vel = [self.x0[6] - self.x0[3], self.x0[7] - self.x0[4], self.x0[8] - self.x0[5]];
        let goal = [
            -self.weights.standoff,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            target_vel[0],
            target_vel[1],
            target_vel[2],
        ];
        for k in 0..n {
            let s = 0.5 * (self.grid.nodes[k] + 1.0);
            for i in 0..9 {
                z[self.sx(i, k)] = (1.0 - s) * self.x0[i] + s * goal[i];
            }
            z[self.su(0, k)] = self.params.gravity;
        }
        z
    }

    /// Per-variable bounds for a control box: states unbounded, each control
    /// component clamped to its actuator range at every node.
    pub fn variable_bounds(&self, limits: &SaturationLimits) -> (DVector<f64>, DVector<f64>) {
        let mut lo = DVector::from_element(self.n_vars(), f64::NEG_INFINITY);
        let mut hi = DVector::from_element(self.n_vars(), f64::INFINITY);
        let ranges = [
            (limits.thrust_min, limits.thrust_max),
            (-limits.pitch_max, limits.pitch_max),
            (-limits.roll_max, limits.roll_max),
        ];
        for (c, (l, h)) in ranges.iter().enumerate() {
            for k in 0..self.grid.n {
                lo[self.su(c, k)] = *l;
                hi[self.su(c, k)] = *h;
            }
        }
        (lo, hi)
    }

    /// Control polynomial evaluated at the start of the horizon.
    pub fn extract_initial_control(&self, z: &[f64]) -> ControlInput {
        let n = self.grid.n;
        let mut u = [0.0; 3];
        for c in 0..3 {
            for k in 0..n {
                u[c] += self.grid.at_start[k] * z[self.su(c, k)];
            }
        }
        ControlInput::new(u[0], u[1], u[2])
    }
}

/// Solver knobs. Budget is wall-clock and optional: the default keeps runs
/// deterministic and relies on the iteration caps for liveness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpSettings {
    pub outer_max: usize,
    pub inner_max: usize,
    pub feasibility_tol: f64,
    pub gradient_tol: f64,
    pub budget: Option<Duration>,
    /// Box on the control decision variables, enforced by projection inside
    /// the inner minimizer. None solves the plain unconstrained
    /// transcription. The receding-horizon controller sets this to its
    /// actuator envelope so every plan it commits to is one the plant can
    /// actually fly; without it the unconstrained optima routinely demand
    /// tens of g and the executed trajectory diverges from every plan.
    pub control_box: Option<SaturationLimits>,
}

impl Default for NlpSettings {
    fn default() -> Self {
        NlpSettings {
            outer_max: 50,
            inner_max: 200,
            feasibility_tol: 1e-6,
            gradient_tol: 1e-6,
            budget: None,
            control_box: None,
        }
    }
}

/// Solve outcome plus the data needed to restart from it.
#[derive(Debug, Clone)]
pub struct NlpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    /// max |c_i| at z.
    pub feasibility: f64,
    /// max |(grad J + J^T lambda)_i| at z.
    pub grad_norm: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub converged: bool,
    pub wall: Duration,
}

/// Warm-start carrier: previous decision vector, multipliers, and penalty.
#[derive(Debug, Clone)]
pub struct WarmCache {
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub mu: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Augmented-Lagrangian solve of the transcribed problem. Each outer pass
/// checks optimality of the true Lagrangian, minimizes the augmented
/// function by BFGS, then updates multipliers; the penalty grows tenfold
/// whenever feasibility stalls.
pub fn solve_nlp(
    problem: &GpmProblem,
    warm: Option<&WarmCache>,
    settings: &NlpSettings,
) -> (NlpSolution, WarmCache) {
    let start = Instant::now();
    let nv = problem.n_vars();
    let nc = problem.n_constraints();

    let bounds = settings.control_box.map(|b| problem.variable_bounds(&b));
    let project = |z: &mut DVector<f64>| {
        if let Some((lo, hi)) = &bounds {
            for i in 0..z.len() {
                z[i] = z[i].clamp(lo[i], hi[i]);
            }
        }
    };
    // Stationarity measure honoring the box: components pressing against an
    // active bound from the inside do not count.
    let pg_norm = |z: &DVector<f64>, g: &DVector<f64>| -> f64 {
        match &bounds {
            None => g.amax(),
            Some((lo, hi)) => {
                let mut m = 0.0f64;
                for i in 0..g.len() {
                    let blocked =
                        (z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0);
                    if !blocked {
                        m = m.max(g[i].abs());
                    }
                }
                m
            }
        }
    };

    let mut z: DVector<f64> = warm.map(|w| w.z.clone()).unwrap_or_else(|| problem.cold_start());
    project(&mut z);
    let mut lambda: DVector<f64> =
        warm.map(|w| w.lambda.clone()).unwrap_or_else(|| DVector::zeros(nc));
    // The multipliers are information worth carrying between solves; the
    // penalty is only a conditioning knob, and restarting a solve at an
    // escalated value makes the first subproblem too stiff to step on.
    let mut mu: f64 = warm.map(|w| w.mu.clamp(10.0, 1e4)).unwrap_or(10.0);

    let mut cbuf = vec![0.0; nc];
    let mut gj = vec![0.0; nv];
    let mut jtv = vec![0.0; nv];

    // Gradient of the augmented function at `z` for multipliers lam + mu*c.
    let al_grad = |z: &[f64], lambda: &DVector<f64>, mu: f64, cbuf: &mut [f64], gj: &mut [f64], jtv: &mut [f64], out: &mut DVector<f64>| {
        problem.constraints(z, cbuf);
        problem.objective_grad(z, gj);
        let shifted: Vec<f64> = cbuf.iter().zip(lambda.iter()).map(|(c, l)| l + mu * c).collect();
        problem.constraint_jtv(z, &shifted, jtv);
        for i in 0..out.len() {
            out[i] = gj[i] + jtv[i];
        }
    };

    let mut best: Option<(DVector<f64>, f64, f64)> = None; // (z, feas, objective)
    let mut outer_used = 0;
    let mut inner_total = 0;
    let mut converged = false;
    let mut prev_feas = f64::INFINITY;
    // Curvature model persists across outer passes; consecutive subproblems
    // differ only in the multiplier shift, so the old approximation stays
    // useful until the penalty jumps.
    let mut hinv = nalgebra::DMatrix::<f64>::identity(nv, nv);
    let mut hinv_fresh = true;

    'outer: for _ in 0..settings.outer_max {
        outer_used += 1;
        // True-Lagrangian optimality check; a warm start at a solution
        // exits here without touching the inner solver.
        problem.constraints(z.as_slice(), &mut cbuf);
        problem.objective_grad(z.as_slice(), &mut gj);
        let lamvec: Vec<f64> = lambda.iter().copied().collect();
        problem.constraint_jtv(z.as_slice(), &lamvec, &mut jtv);
        let feas = inf_norm(&cbuf);
        let lag = DVector::from_fn(nv, |i, _| gj[i] + jtv[i]);
        let lag_grad = pg_norm(&z, &lag);
        let obj = problem.objective(z.as_slice());
        if best.as_ref().map_or(true, |(_, bf, bo)| {
            feas < 0.999 * bf || (feas <= 1.001 * bf && obj < *bo)
        }) {
            best = Some((z.clone(), feas, obj));
        }
        if feas <= settings.feasibility_tol && lag_grad <= settings.gradient_tol {
            converged = true;
            break;
        }
        if let Some(b) = settings.budget {
            if start.elapsed() >= b {
                break;
            }
        }

        // Inner BFGS on the augmented function.
        let mut g = DVector::zeros(nv);
        al_grad(z.as_slice(), &lambda, mu, &mut cbuf, &mut gj, &mut jtv, &mut g);
        let phi = |z: &[f64], cbuf: &mut [f64]| {
            problem.constraints(z, cbuf);
            let mut val = problem.objective(z);
            for (ci, li) in cbuf.iter().zip(lambda.iter()) {
                val += li * ci + 0.5 * mu * ci * ci;
            }
            val
        };
        let mut fz = phi(z.as_slice(), &mut cbuf);
        let mut inner_solved = false;
        for inner in 0..settings.inner_max {
            if pg_norm(&z, &g) <= settings.gradient_tol {
                inner_solved = true;
                break;
            }
            if inner % 16 == 0 {
                if let Some(b) = settings.budget {
                    if start.elapsed() >= b {
                        break;
                    }
                }
            }
            inner_total += 1;
            // Freeze components pressing on an active bound out of this
            // step: their outward gradients would otherwise drag the free
            // coordinates through the dense coupling of the inverse Hessian.
            let mask: Vec<bool> = match &bounds {
                None => Vec::new(),
                Some((lo, hi)) => (0..nv)
                    .map(|i| (z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0))
                    .collect(),
            };
            let gm = if mask.is_empty() {
                g.clone()
            } else {
                DVector::from_fn(nv, |i, _| if mask[i] { 0.0 } else { g[i] })
            };
            let mut p = -(&hinv * &gm);
            for i in 0..nv {
                if mask.get(i).copied().unwrap_or(false) {
                    p[i] = 0.0;
                }
            }
            if p.dot(&gm) >= 0.0 {
                hinv = nalgebra::DMatrix::identity(nv, nv);
                hinv_fresh = true;
                p = -gm.clone();
            }
            // Armijo backtracking with an absolute allowance for the f64
            // evaluation noise floor: near the minimum the predicted
            // decrease drops below one ulp of the function value and the
            // plain sufficient-decrease test would reject every step even
            // though the analytic gradient still carries information.
            let noise = 1e-13 * (1.0 + fz.abs());
            let mut accepted = false;
            let mut z_new = z.clone();
            let mut f_new = fz;
            let mut tried_restart = false;
            loop {
                // Start the backtrack from a step of bounded length; after a
                // penalty jump the raw gradient direction can be enormous and
                // thirty halvings from unity would still overshoot.
                let mut alpha = (8.0 / p.amax()).min(1.0);
                for _ in 0..40 {
                    z_new = &z + &p * alpha;
                    project(&mut z_new);
                    f_new = phi(z_new.as_slice(), &mut cbuf);
                    // Sufficient decrease along the realized (projected)
                    // step; identical to the usual Armijo slope when no
                    // bound is active.
                    let slope = g.dot(&(&z_new - &z));
                    if f_new <= fz + 1e-4 * slope + noise {
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if accepted || tried_restart {
                    break;
                }
                // A stale curvature model can poison the search direction;
                // fall back to scaled steepest descent once before quitting.
                tried_restart = true;
                hinv = nalgebra::DMatrix::identity(nv, nv);
                hinv_fresh = true;
                p = -gm.clone();
            }
            if !accepted || (&z_new - &z).amax() == 0.0 {
                break;
            }
            let mut g_new = DVector::zeros(nv);
            al_grad(z_new.as_slice(), &lambda, mu, &mut cbuf, &mut gj, &mut jtv, &mut g_new);
            let s = &z_new - &z;
            // Curvature restricted to the subspace the step ran in.
            let y = if mask.is_empty() {
                &g_new - &g
            } else {
                DVector::from_fn(nv, |i, _| if mask[i] { 0.0 } else { g_new[i] - g[i] })
            };
            let sy = s.dot(&y);
            if sy > 1e-10 * s.norm() * y.norm() {
                if hinv_fresh {
                    hinv *= sy / y.dot(&y);
                    hinv_fresh = false;
                }
                // Inverse-Hessian BFGS update.
                let rho = 1.0 / sy;
                let hy = &hinv * &y;
                let yhy = y.dot(&hy);
                let coeff = (1.0 + rho * yhy) * rho;
                hinv += coeff * (&s * s.transpose());
                let shy = &s * hy.transpose();
                hinv -= rho * (&shy + shy.transpose());
            }
            z = z_new;
            g = g_new;
            fz = f_new;
        }

        // Multiplier and penalty updates.
        problem.constraints(z.as_slice(), &mut cbuf);
        let feas_now = inf_norm(&cbuf);
        for i in 0..nc {
            lambda[i] += mu * cbuf[i];
        }
        // Escalate the penalty only when the subproblem was actually solved
        // yet feasibility still stalled; a stall caused by hitting the inner
        // iteration cap is the minimizer's fault, and raising the penalty
        // then only worsens conditioning without any multiplier progress.
        if inner_solved && feas_now > 0.25 * prev_feas {
            mu = (mu * 10.0).min(1e6);
            // The penalty jump reshapes the augmented Hessian enough that
            // the carried approximation would mislead the next pass.
            hinv = nalgebra::DMatrix::identity(nv, nv);
            hinv_fresh = true;
        }
        prev_feas = feas_now;
        if let Some(b) = settings.budget {
            if start.elapsed() >= b {
                break 'outer;
            }
        }
    }

    let (z_out, feas_out, obj_out) = if converged {
        let f = {
            problem.constraints(z.as_slice(), &mut cbuf);
            inf_norm(&cbuf)
        };
        let o = problem.objective(z.as_slice());
        (z, f, o)
    } else {
        let (bz, bf, bo) = best.expect("at least one outer pass recorded");
        (bz, bf, bo)
    };
    // Final Lagrangian gradient at the reported point.
    problem.objective_grad(z_out.as_slice(), &mut gj);
    let lamvec: Vec<f64> = lambda.iter().copied().collect();
    problem.constraint_jtv(z_out.as_slice(), &lamvec, &mut jtv);
    let lag = DVector::from_fn(nv, |i, _| gj[i] + jtv[i]);
    let grad_norm = pg_norm(&z_out, &lag);

    let cache = WarmCache { z: z_out.clone(), lambda, mu };
    (
        NlpSolution {
            z: z_out,
            objective: obj_out,
            feasibility: feas_out,
            grad_norm,
            outer_iters: outer_used,
            inner_iters: inner_total,
            converged,
            wall: start.elapsed(),
        },
        cache,
    )
}

/// Receding-horizon configuration for the pseudospectral controller.
#[derive(Debug, Clone)]
pub struct GpmConfig {
    pub nodes: usize,
    pub t_f: f64,
    pub weights: CostWeights,
    pub params: PlantParams,
    pub settings: NlpSettings,
    /// Replace the optimizer's roll with the PD lateral law mapped through
    /// the near-hover relation (lateral acceleration = -g * roll).
    pub lateral_pd: Option<(f64, f64)>,
    pub limits: SaturationLimits,
}

impl GpmConfig {
    /// Defaults mirroring the shipped fast-pursuit scenario: 7 nodes, 2 s
    /// horizon, k1 = k3 = 50, hover-centered thrust term.
    pub fn standard(params: PlantParams) -> Self {
        let weights = CostWeights::new(50.0, 50.0, 50.0).with_thrust_ref(params.gravity);
        let limits = SaturationLimits::for_gravity(params.gravity);
        GpmConfig {
            nodes: 7,
            t_f: 2.0,
            weights,
            params,
            settings: NlpSettings::default(),
            lateral_pd: Some((2.0, 3.0)),
            limits,
        }
    }
}

/// Outcome flags a controller step can raise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepFlags {
    pub saturated: bool,
    pub nonconverged: bool,
}

/// Stateful wrapper owning the warm cache across steps of one run.
#[derive(Debug, Clone)]
pub struct GpmController {
    pub cfg: GpmConfig,
    grid: LgGrid,
    cache: Option<WarmCache>,
    pub last_solution: Option<NlpSolution>,
}

impl GpmController {
    pub fn new(cfg: GpmConfig) -> Result<Self, GpmError> {
        let grid = lg_grid(cfg.nodes)?;
        Ok(GpmController { cfg, grid, cache: None, last_solution: None })
    }

    pub fn reset(&mut self) {
        self.cache = None;
        self.last_solution = None;
    }

    pub fn step(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        let problem = GpmProblem::new(
            &self.grid,
            x.as_vector9(),
            self.cfg.t_f,
            self.cfg.weights,
            self.cfg.params,
        )
        .expect("validated at construction");
        // Plan inside the actuator envelope unless the caller picked a box
        // explicitly; an unconstrained plan can park on a zero-thrust arc the
        // plant cannot fly.
        let mut settings = self.cfg.settings;
        if settings.control_box.is_none() {
            settings.control_box = Some(self.cfg.limits);
        }
        let (solution, cache) = solve_nlp(&problem, self.cache.as_ref(), &settings);
        let mut u = problem.extract_initial_control(solution.z.as_slice());
        if let Some((kp, kd)) = self.cfg.lateral_pd {
            u.roll = -pd_lateral(x.rel_pos.y, x.rel_vel.y, kp, kd) / self.cfg.params.gravity;
        }
        let (u, saturated) = self.cfg.limits.saturate(&u);
        let flags = StepFlags { saturated, nonconverged: !solution.converged };
        self.cache = Some(cache);
        self.last_solution = Some(solution);
        (u, flags)
    }
}

/// Diagnostic dump of a decision vector: one row per node with time, states,
/// controls, and the node's worst constraint defect.
pub fn write_decision_csv<W: std::io::Write>(
    mut out: W,
    problem: &GpmProblem,
    z: &[f64],
) -> std::io::Result<()> {
    let n = problem.grid.n;
    let mut c = vec![0.0; problem.n_constraints()];
    problem.constraints(z, &mut c);
    writeln!(
        out,
        "node,tau,t_s,x1,x2,x3,x4,x5,x6,x7,x8,x9,u1,u2,u3,defect_inf"
    )?;
    for k in 0..n {
        let tau = problem.grid.nodes[k];
        let t = 0.5 * (tau + 1.0) * problem.t_f;
        let xs: Vec<String> =
            (0..9).map(|i| format!("{:.9}", z[i * n + k])).collect();
        let us: Vec<String> =
            (0..3).map(|ci| format!("{:.9}", z[(9 + ci) * n + k])).collect();
        let defect = (0..9).map(|i| c[i * n + k].abs()).fold(0.0f64, f64::max);
        writeln!(
            out,
            "{},{:.12},{:.9},{},{},{:.3e}",
            k,
            tau,
            t,
            xs.join(","),
            us.join(","),
            defect
        )?;
    }
    Ok(())
}
