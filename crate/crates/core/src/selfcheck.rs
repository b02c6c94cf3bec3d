//! Built-in verification suite.
//!
//! Each check exercises one numerical contract of the library against an
//! independently computable expectation: closed-form Riccati gains, agreement
//! of two unrelated Riccati solvers, quadrature and differentiation
//! exactness on polynomials, exact invertibility of the frame mapping and
//! the input recovery, equivalence of the two lateral-law routes, and the
//! optimality conditions of accepted trajectory solves.
//!
//! The suite is fully deterministic (fixed seeds, no timing in the output),
//! so repeated runs render byte-identical reports. A gain perturbation can
//! be injected to prove the checks are live: any nonzero perturbation must
//! flip at least one check to FAIL.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvp::{hamiltonian, stationarity_control, BvpConfig, TpbvpSolver};
use crate::care::{
    care_residual, closed_loop_spectrum, lqr_gain, solve_care, solve_care_newton, GainSynthesis,
    LinearPlant,
};
use crate::dynamics::{acceleration, Attitude, InertialState, PlantParams, State9};
use crate::eer::{
    desired_acceleration, eer_step, pd_lateral, r_star, recover_input, tracking_from_virtual,
    virtual_control, virtual_state, weights, DragRecovery, EerConfig, LateralLaw, RStarMode,
};
use crate::gpm::lg_grid;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn bounded(name: &'static str, what: &str, worst: f64, tol: f64) -> Self {
        CheckResult {
            name,
            passed: worst < tol,
            detail: format!("{what} {worst:.3e} (tol {tol:.0e})"),
        }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        CheckResult { name, passed: false, detail }
    }
}

/// Suite options. `gain_perturbation` multiplies every validated gain by
/// `1 + ε` before comparison; nonzero values exist solely to demonstrate
/// that the gain checks can fail (a negative control for the harness).
#[derive(Debug, Clone, Copy, Default)]
pub struct SelfcheckOptions {
    pub gain_perturbation: f64,
}

fn perturb(k: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    k * (1.0 + eps)
}

/// Double integrator with unit position weight and unit control weight has
/// the textbook gain (-1, -sqrt(2)).
fn check_closed_form_gain(eps: f64) -> CheckResult {
    let name = "riccati-closed-form";
    let plant = LinearPlant::double_integrator(1);
    let q1 = DVector::from_column_slice(&[1.0, 0.0]);
    let q2 = DVector::from_column_slice(&[1.0]);
    match GainSynthesis::new(plant, q1, q2) {
        Ok(synth) => {
            let k = perturb(&synth.k, eps);
            let expected = DMatrix::from_row_slice(1, 2, &[-1.0, -std::f64::consts::SQRT_2]);
            let worst = (k - expected).abs().max();
            CheckResult::bounded(name, "max gain error", worst, 1e-9)
        }
        Err(e) => CheckResult::failed(name, format!("synthesis failed: {e}")),
    }
}

/// The spectral solver and the Newton iteration are independent algorithms;
/// their Riccati solutions must coincide on every shipped weight set.
fn check_route_agreement() -> CheckResult {
    let name = "riccati-route-agreement";
    let cases: [(usize, Vec<f64>, Vec<f64>); 3] = [
        (1, vec![1.0, 0.0], vec![1.0]),
        (2, weights::SIM_Q1.to_vec(), weights::SIM_Q2.to_vec()),
        (2, weights::EXP_Q1.to_vec(), weights::EXP_Q2.to_vec()),
    ];
    let mut worst = 0.0f64;
    for (axes, q1, q2) in cases {
        let plant = LinearPlant::double_integrator(axes);
        let q1 = DVector::from_column_slice(&q1);
        let q2 = DVector::from_column_slice(&q2);
        let spectral = match solve_care(&plant, &q1, &q2) {
            Ok(p) => p,
            Err(e) => return CheckResult::failed(name, format!("spectral route failed: {e}")),
        };
        let newton = match solve_care_newton(&plant, &q1, &q2) {
            Ok(p) => p,
            Err(e) => return CheckResult::failed(name, format!("newton route failed: {e}")),
        };
        worst = worst.max((&spectral - &newton).abs().max());
        worst = worst.max(care_residual(&plant, &q1, &q2, &spectral));
        worst = worst.max(care_residual(&plant, &q1, &q2, &newton));
    }
    CheckResult::bounded(name, "max route disagreement / residual", worst, 1e-9)
}

/// Shipped weight sets synthesize gains whose Riccati residual vanishes,
/// whose gain is consistent with the solution matrix, and whose closed loop
/// is strictly stable.
fn check_gain_residual_and_stability(eps: f64) -> CheckResult {
    let name = "gain-residual-and-stability";
    let mut worst_res = 0.0f64;
    let mut worst_gain = 0.0f64;
    let mut worst_re = f64::NEG_INFINITY;
    for (q1, q2) in [
        (weights::SIM_Q1, weights::SIM_Q2),
        (weights::EXP_Q1, weights::EXP_Q2),
    ] {
        let plant = LinearPlant::double_integrator(2);
        let q1 = DVector::from_column_slice(&q1);
        let q2 = DVector::from_column_slice(&q2);
        let synth = match GainSynthesis::new(plant, q1, q2) {
            Ok(s) => s,
            Err(e) => return CheckResult::failed(name, format!("synthesis failed: {e}")),
        };
        let k = perturb(&synth.k, eps);
        worst_res = worst_res.max(care_residual(&synth.plant, &synth.q1, &synth.q2, &synth.p));
        worst_gain = worst_gain.max((&k - lqr_gain(&synth.plant, &synth.q2, &synth.p)).abs().max());
        let max_re = closed_loop_spectrum(&synth.plant, &k)
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        worst_re = worst_re.max(max_re);
    }
    if worst_re >= 0.0 {
        return CheckResult::failed(name, format!("closed loop not stable: max Re {worst_re:.3e}"));
    }
    let worst = worst_res.max(worst_gain);
    CheckResult::bounded(name, "max residual / gain inconsistency", worst, 1e-9)
}

/// A 7-node Gauss grid must integrate monomials exactly through degree 13.
fn check_quadrature_exactness() -> CheckResult {
    let name = "quadrature-exactness";
    let grid = match lg_grid(7) {
        Ok(g) => g,
        Err(e) => return CheckResult::failed(name, format!("grid construction failed: {e}")),
    };
    let mut worst = 0.0f64;
    for deg in 0..=13u32 {
        let quad: f64 = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(t, w)| w * t.powi(deg as i32))
            .sum();
        let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
        worst = worst.max((quad - exact).abs());
    }
    CheckResult::bounded(name, "max monomial error through degree 13", worst, 1e-12)
}

/// The collocation derivative matrix must differentiate polynomials exactly
/// through degree 7 (it interpolates through 8 points).
fn check_differentiation_exactness() -> CheckResult {
    let name = "differentiation-exactness";
    let grid = match lg_grid(7) {
        Ok(g) => g,
        Err(e) => return CheckResult::failed(name, format!("grid construction failed: {e}")),
    };
    let mut worst = 0.0f64;
    for deg in 0..=7u32 {
        let mut values = DVector::zeros(grid.n + 1);
        values[0] = (-1.0f64).powi(deg as i32);
        for (i, t) in grid.nodes.iter().enumerate() {
            values[i + 1] = t.powi(deg as i32);
        }
        let derivs = &grid.d * &values;
        for (k, t) in grid.nodes.iter().enumerate() {
            let exact = if deg == 0 { 0.0 } else { deg as f64 * t.powi(deg as i32 - 1) };
            worst = worst.max((derivs[k] - exact).abs());
        }
    }
    CheckResult::bounded(name, "max polynomial derivative error through degree 7", worst, 1e-10)
}

fn random_state(rng: &mut ChaCha8Rng) -> InertialState {
    InertialState::from_parts(
        Vector3::new(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        ),
        Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
        Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
    )
}

/// Frame mapping and its inverse compose to the identity on random states
/// and attitudes.
fn check_mapping_round_trip() -> CheckResult {
    let name = "virtual-map-round-trip";
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = random_state(&mut rng);
        let att = match Attitude::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)) {
            Ok(a) => a,
            Err(e) => return CheckResult::failed(name, format!("attitude rejected: {e}")),
        };
        let rs = r_star(att.pitch, RStarMode::Exact, 3.0);
        let e = virtual_state(&x, &att, rs);
        let (pos, vel) = tracking_from_virtual(&e, &att, rs);
        worst = worst.max((pos - x.rel_pos).amax());
        worst = worst.max((vel - x.rel_vel).amax());
    }
    CheckResult::bounded(name, "max round-trip error over 1000 samples", worst, 1e-12)
}

/// Substituting a recovered input back into the translational model must
/// reproduce the requested acceleration exactly.
fn check_recovery_substitution() -> CheckResult {
    let name = "input-recovery-substitution";
    let params = PlantParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = random_state(&mut rng);
        let a_star = Vector3::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
        );
        match recover_input(&a_star, &x, &params, DragRecovery::Absolute) {
            Ok(u) => {
                let a = acceleration(&u, &x.abs_vel, &params);
                worst = worst.max((a - a_star).amax());
            }
            Err(e) => {
                return CheckResult::failed(name, format!("recovery rejected a sample: {e}"))
            }
        }
    }
    CheckResult::bounded(name, "max substitution error over 1000 samples", worst, 1e-10)
}

/// At zero roll the lateral column of a full 3-axis gain reduces to the PD
/// pair, so both lateral-law routes must emit the same input.
fn check_lateral_equivalence() -> CheckResult {
    let name = "lateral-equivalence";
    let params = PlantParams::default();
    let reduced = match EerConfig::reduced_lqr(
        weights::SIM_Q1,
        weights::SIM_Q2,
        weights::LATERAL_KP,
        weights::LATERAL_KD,
        params,
    ) {
        Ok(c) => c,
        Err(e) => return CheckResult::failed(name, format!("reduced synthesis failed: {e}")),
    };
    // Lateral weights chosen so the LQR column equals the PD pair:
    // k_pos = sqrt(4) = 2, k_vel = sqrt(5 + 2*2) = 3.
    let full_gains = match GainSynthesis::new(
        LinearPlant::double_integrator(3),
        DVector::from_column_slice(&[58.0, 4.0, 264.0, 30.0, 5.0, 10.0]),
        DVector::from_column_slice(&[40.0, 1.0, 30.0]),
    ) {
        Ok(g) => g,
        Err(e) => return CheckResult::failed(name, format!("full synthesis failed: {e}")),
    };
    let full = match EerConfig::new(full_gains, LateralLaw::FullGain, params) {
        Ok(c) => c,
        Err(e) => return CheckResult::failed(name, format!("full config rejected: {e}")),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = random_state(&mut rng);
        let att = match Attitude::new(rng.gen_range(-0.5..0.5), 0.0) {
            Ok(a) => a,
            Err(e) => return CheckResult::failed(name, format!("attitude rejected: {e}")),
        };
        let rs = r_star(att.pitch, RStarMode::Exact, params.safe_distance);
        let ev = virtual_state(&x, &att, rs).as_vector6();
        let uf = virtual_control(&full.gains.k, &DVector::from_column_slice(ev.as_slice()));
        let upd = pd_lateral(x.rel_pos.y, x.rel_vel.y, weights::LATERAL_KP, weights::LATERAL_KD);
        worst = worst.max((uf[1] - upd).abs());
        // The rotated-back command norms agree too, so neither route hides a
        // frame error.
        let u3 = Vector3::new(uf[0], uf[1], uf[2]);
        worst = worst
            .max((desired_acceleration(&att, &u3).norm() - u3.norm()).abs());

        let (ur, _) = eer_step(&x, &att, &reduced);
        let (uf, _) = eer_step(&x, &att, &full);
        worst = worst.max((ur.thrust - uf.thrust).abs());
        worst = worst.max((ur.pitch - uf.pitch).abs());
        worst = worst.max((ur.roll - uf.roll).abs());
    }
    CheckResult::bounded(name, "max route mismatch over 1000 samples", worst, 1e-10)
}

/// An accepted trajectory solve satisfies the optimality conditions: the
/// control gradient of the Hamiltonian vanishes on every mesh point and the
/// costate is free (zero) at the horizon.
fn check_bvp_stationarity() -> CheckResult {
    let name = "bvp-stationarity";
    let cfg = BvpConfig::standard(PlantParams::default());
    let mut solver = match TpbvpSolver::new(cfg) {
        Ok(s) => s,
        Err(e) => return CheckResult::failed(name, format!("solver construction failed: {e}")),
    };
    let x0 = State9::from_column_slice(&[-10.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let sol = solver.solve(&x0, None);
    if !sol.converged {
        return CheckResult::failed(name, format!("solve did not converge: residual {:.3e}", sol.residual));
    }
    let terminal = sol.costate_at(sol.mesh_points - 1).amax();
    if terminal >= 1e-6 {
        return CheckResult::failed(name, format!("terminal costate {terminal:.3e} (tol 1e-6)"));
    }
    let mut worst = 0.0f64;
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
            worst = worst.max(fd.abs());
        }
    }
    CheckResult::bounded(name, "max control gradient over mesh", worst, 1e-5)
}

/// Runs every check in a fixed order.
pub fn run_selfcheck(opts: &SelfcheckOptions) -> Vec<CheckResult> {
    let eps = opts.gain_perturbation;
    vec![
        check_closed_form_gain(eps),
        check_route_agreement(),
        check_gain_residual_and_stability(eps),
        check_quadrature_exactness(),
        check_differentiation_exactness(),
        check_mapping_round_trip(),
        check_recovery_substitution(),
        check_lateral_equivalence(),
        check_bvp_stationarity(),
    ]
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// One line per check plus a summary line; stable across runs.
pub fn render_report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        let status = if r.passed { "ok  " } else { "FAIL" };
        out.push_str(&format!("{status}  {:<30}  {}\n", r.name, r.detail));
    }
    let n_pass = results.iter().filter(|r| r.passed).count();
    out.push_str(&format!("selfcheck: {n_pass}/{} checks passed\n", results.len()));
    out
}
