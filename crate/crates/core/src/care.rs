//! Infinite-horizon LQR gain synthesis for the virtual double-integrator
//! plant, via the continuous algebraic Riccati equation
//!
//! `P·A + Aᵀ·P − P·B·Q₂⁻¹·Bᵀ·P + Q₁ = 0`,   `K = −Q₂⁻¹·Bᵀ·P`.
//!
//! Two independent routes are provided and kept separate on purpose so each
//! can serve as an oracle for the other:
//!
//! * [`solve_care`] — primary: eigendecomposition of the 2n×2n Hamiltonian,
//!   assembling `P` from the stable invariant subspace;
//! * [`solve_care_newton`] — cross-check: Newton-Kleinman iteration on
//!   Lyapunov equations, seeded by a Bass-style stabilizing gain.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::solve_lyapunov;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("weight dimensions do not match the plant (n = {n}, m = {m})")]
    DimensionMismatch { n: usize, m: usize },
    #[error("state weights must be nonnegative and control weights positive")]
    IndefiniteWeights,
    #[error("Hamiltonian has {found} stable eigenvalues, expected {expected}; pair may not be stabilizable/detectable")]
    StableSubspaceDimension { found: usize, expected: usize },
    #[error("eigenvector iteration failed to converge")]
    EigenvectorFailure,
    #[error("stable subspace produced a singular or non-real solution")]
    DegenerateSubspace,
    #[error("stabilizing seed gain not found (pair may be uncontrollable)")]
    SeedGainFailure,
    #[error("Lyapunov solve failed inside the Newton iteration")]
    LyapunovFailure,
    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("solution is not positive definite")]
    NotPositiveDefinite,
    #[error("closed loop is not Hurwitz (max Re λ = {max_re:.3e})")]
    NotStabilizing { max_re: f64 },
}

/// Controlled linear pair (A, B).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "A must be square");
        assert_eq!(a.nrows(), b.nrows(), "B row count must match A");
        LinearPlant { a, b }
    }

    /// Stacked double integrators: `axes` position states driven by `axes`
    /// acceleration inputs, A = [[0, I], [0, 0]], B = [0; I]. This is the
    /// virtual plant the egocentric controller regulates (2 axes for the
    /// longitudinal/vertical pair, 3 when the lateral axis joins the LQR).
    pub fn double_integrator(axes: usize) -> Self {
        let n = 2 * axes;
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, axes);
        for i in 0..axes {
            a[(i, axes + i)] = 1.0;
            b[(axes + i, i)] = 1.0;
        }
        LinearPlant { a, b }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

fn check_weights(
    plant: &LinearPlant,
    q1: &DVector<f64>,
    q2: &DVector<f64>,
) -> Result<(), SynthesisError> {
    if q1.len() != plant.n() || q2.len() != plant.m() {
        return Err(SynthesisError::DimensionMismatch { n: plant.n(), m: plant.m() });
    }
    if q1.iter().any(|v| *v < 0.0 || !v.is_finite()) || q2.iter().any(|v| *v <= 0.0 || !v.is_finite())
    {
        return Err(SynthesisError::IndefiniteWeights);
    }
    Ok(())
}

/// `‖P·A + Aᵀ·P − P·B·Q₂⁻¹·Bᵀ·P + Q₁‖_max`.
pub fn care_residual(
    plant: &LinearPlant,
    q1: &DVector<f64>,
    q2: &DVector<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let q1m = DMatrix::from_diagonal(q1);
    let q2inv = DMatrix::from_diagonal(&q2.map(|v| 1.0 / v));
    let r = p * &plant.a + plant.a.transpose() * p - p * &plant.b * q2inv * plant.b.transpose() * p
        + q1m;
    r.abs().max()
}

/// `K = −Q₂⁻¹·Bᵀ·P`.
pub fn lqr_gain(plant: &LinearPlant, q2: &DVector<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let q2inv = DMatrix::from_diagonal(&q2.map(|v| 1.0 / v));
    -(q2inv * plant.b.transpose() * p)
}

/// Closed-loop eigenvalues of A + B·K, sorted by real part then imaginary
/// part for deterministic output.
pub fn closed_loop_spectrum(plant: &LinearPlant, k: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let acl = &plant.a + &plant.b * k;
    let mut eigs: Vec<Complex<f64>> = acl.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    eigs
}

/// Primary route: stable invariant subspace of the Hamiltonian
/// H = [[A, −B·Q₂⁻¹·Bᵀ], [−Q₁, −Aᵀ]]. Eigenvalues come from the real Schur
/// reduction; each stable eigenvector is recovered by shifted inverse
/// iteration, then P = Re(X₂·X₁⁻¹), symmetrized.
pub fn solve_care(
    plant: &LinearPlant,
    q1: &DVector<f64>,
    q2: &DVector<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    check_weights(plant, q1, q2)?;
    let n = plant.n();
    let q1m = DMatrix::from_diagonal(q1);
    let q2inv = DMatrix::from_diagonal(&q2.map(|v| 1.0 / v));
    let bq2bt = &plant.b * q2inv * plant.b.transpose();

    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&bq2bt));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q1m));
    h.view_mut((n, n), (n, n)).copy_from(&(-plant.a.transpose()));

    let mut eigs: Vec<Complex<f64>> = h.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    let stable: Vec<Complex<f64>> = eigs.into_iter().filter(|l| l.re < 0.0).collect();
    if stable.len() != n {
        return Err(SynthesisError::StableSubspaceDimension { found: stable.len(), expected: n });
    }

    let hc = h.map(|v| Complex::new(v, 0.0));
    let scale = h.abs().max().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::<Complex<f64>>::zeros(2 * n, n);
    for (col, lam) in stable.iter().enumerate() {
        let v = inverse_iteration(&hc, *lam, scale, &mut rng)?;
        x.column_mut(col).copy_from(&v);
    }

    // P = X₂·X₁⁻¹ ⇔ X₁ᵀ·Pᵀ = X₂ᵀ (plain transpose: the subspace basis is
    // complex but not conjugated here).
    let x1 = x.view((0, 0), (n, n)).into_owned();
    let x2 = x.view((n, 0), (n, n)).into_owned();
    let pt = x1
        .transpose()
        .lu()
        .solve(&x2.transpose())
        .ok_or(SynthesisError::DegenerateSubspace)?;
    let pc = pt.transpose();
    let max_im = pc.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
    let p_scale = pc.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1.0);
    if max_im > 1e-7 * p_scale {
        return Err(SynthesisError::DegenerateSubspace);
    }
    let p_re = pc.map(|v| v.re);
    let p = (&p_re + p_re.transpose()) * 0.5;

    let residual = care_residual(plant, q1, q2, &p);
    let tol = 1e-9 * (1.0 + p.abs().max());
    if residual > tol {
        return Err(SynthesisError::ResidualTooLarge { residual, tol });
    }
    Ok(p)
}

/// Shifted inverse iteration for the eigenvector of `hc` at eigenvalue
/// `lam`. The shift is perturbed off the exact eigenvalue so the factored
/// matrix stays invertible; one or two iterations suffice when the spectrum
/// is simple, with deterministic random restarts as a fallback.
fn inverse_iteration(
    hc: &DMatrix<Complex<f64>>,
    lam: Complex<f64>,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<Complex<f64>>, SynthesisError> {
    let dim = hc.nrows();
    // Target near-machine residuals; the threshold must track the matrix
    // norm tightly or large weight scalings degrade the vectors.
    let tol_done = 5.0 * f64::EPSILON * dim as f64 * scale;
    let tol_accept = 1e-10 * scale;
    let mut best: Option<(DVector<Complex<f64>>, f64)> = None;
    for attempt in 0..5 {
        let eps = 1e-9 * scale * (1.0 + attempt as f64 * 10.0);
        let mut shift = lam + Complex::new(eps, eps);
        let mut v = DVector::<Complex<f64>>::from_fn(dim, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        v /= Complex::new(v.norm(), 0.0);
        // Fixed-shift sweeps first, then Rayleigh-quotient updates: the
        // initial eigenvalue estimate carries the Schur reduction's error,
        // and refreshing the shift from the current vector removes it.
        for _round in 0..6 {
            let mut m = hc.clone();
            for i in 0..dim {
                m[(i, i)] -= shift;
            }
            let lu = m.lu();
            let mut rayleigh = shift;
            for _ in 0..4 {
                let Some(w) = lu.solve(&v) else { break };
                let nw = w.norm();
                if !nw.is_finite() || nw == 0.0 {
                    break;
                }
                v = w / Complex::new(nw, 0.0);
                let hv = hc * &v;
                rayleigh = v.dotc(&hv);
                let res = (&hv - &v * rayleigh).norm();
                if best.as_ref().map_or(true, |(_, br)| res < *br) {
                    best = Some((v.clone(), res));
                }
                if res < tol_done {
                    return Ok(v);
                }
            }
            // Keep the refined shift on the correct side of the axis; a
            // jump across would aim at the mirrored eigenvalue.
            if rayleigh.re < 0.0 && (rayleigh - lam).norm() < 0.1 * (1.0 + lam.norm()) {
                shift = rayleigh + Complex::new(0.0, 1e-13 * scale);
            }
        }
    }
    match best {
        Some((v, res)) if res < tol_accept => Ok(v),
        _ => Err(SynthesisError::EigenvectorFailure),
    }
}

/// Cross-check route: Kleinman's Newton iteration. Each step solves the
/// Lyapunov equation (A + B·Kₖ)ᵀ·P + P·(A + B·Kₖ) = −(Q₁ + KₖᵀQ₂Kₖ) and
/// refreshes the gain; convergence is quadratic from any stabilizing seed.
pub fn solve_care_newton(
    plant: &LinearPlant,
    q1: &DVector<f64>,
    q2: &DVector<f64>,
) -> Result<DMatrix<f64>, SynthesisError> {
    check_weights(plant, q1, q2)?;
    let q1m = DMatrix::from_diagonal(q1);
    let q2m = DMatrix::from_diagonal(q2);
    let mut k = bass_stabilizing_gain(plant)?;
    let mut p_prev: Option<DMatrix<f64>> = None;
    for _ in 0..100 {
        let acl = &plant.a + &plant.b * &k;
        let w = &q1m + k.transpose() * &q2m * &k;
        // aclᵀ·P + P·acl = −w ⇔ m·P + P·mᵀ = −w with m = aclᵀ.
        let p = solve_lyapunov(&acl.transpose(), &(-&w)).ok_or(SynthesisError::LyapunovFailure)?;
        let p = (&p + p.transpose()) * 0.5;
        let k_next = lqr_gain(plant, q2, &p);
        let done = p_prev
            .as_ref()
            .map(|prev| (&p - prev).abs().max() < 1e-12 * (1.0 + p.abs().max()))
            .unwrap_or(false);
        p_prev = Some(p);
        k = k_next;
        if done {
            break;
        }
    }
    let p = p_prev.ok_or(SynthesisError::LyapunovFailure)?;
    let residual = care_residual(plant, q1, q2, &p);
    let tol = 1e-9 * (1.0 + p.abs().max());
    if residual > tol {
        return Err(SynthesisError::ResidualTooLarge { residual, tol });
    }
    Ok(p)
}

/// Bass's stabilization: with β above the spectral abscissa of A, solving
/// (A + βI)·Z + Z·(A + βI)ᵀ = 2·B·Bᵀ gives Z ≻ 0 for controllable pairs and
/// K₀ = −Bᵀ·Z⁻¹ places A + B·K₀ in the open left half-plane.
fn bass_stabilizing_gain(plant: &LinearPlant) -> Result<DMatrix<f64>, SynthesisError> {
    let n = plant.n();
    let beta = plant.a.norm() + 1.0;
    let m = &plant.a + DMatrix::identity(n, n) * beta;
    let w = 2.0 * &plant.b * plant.b.transpose();
    let z = solve_lyapunov(&m, &w).ok_or(SynthesisError::SeedGainFailure)?;
    let z = (&z + z.transpose()) * 0.5;
    let zinv = z.clone().try_inverse().ok_or(SynthesisError::SeedGainFailure)?;
    let k0 = -(plant.b.transpose() * zinv);
    let max_re = closed_loop_spectrum(plant, &k0)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(SynthesisError::SeedGainFailure);
    }
    Ok(k0)
}

/// Validated LQR synthesis product: weights, Riccati solution, and gain.
/// Construction runs the primary solver and enforces the contracts
/// (residual, symmetry, positive definiteness, Hurwitz closed loop).
#[derive(Debug, Clone)]
pub struct GainSynthesis {
    pub plant: LinearPlant,
    pub q1: DVector<f64>,
    pub q2: DVector<f64>,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

impl GainSynthesis {
    pub fn new(
        plant: LinearPlant,
        q1: DVector<f64>,
        q2: DVector<f64>,
    ) -> Result<Self, SynthesisError> {
        let p = solve_care(&plant, &q1, &q2)?;
        if p.clone().cholesky().is_none() {
            return Err(SynthesisError::NotPositiveDefinite);
        }
        let k = lqr_gain(&plant, &q2, &p);
        let max_re = closed_loop_spectrum(&plant, &k)
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_re >= 0.0 {
            return Err(SynthesisError::NotStabilizing { max_re });
        }
        Ok(GainSynthesis { plant, q1, q2, p, k })
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn m(&self) -> usize {
        self.plant.m()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn double_integrator_1d() -> (LinearPlant, DVector<f64>, DVector<f64>) {
        (
            LinearPlant::double_integrator(1),
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[1.0]),
        )
    }

    /// Closed form for the scalar plant ẋ = u, Q₁ = Q₂ = 1: P = 1, K = −1.
    #[test]
    fn scalar_closed_form() {
        let plant = LinearPlant::new(
            DMatrix::from_column_slice(1, 1, &[0.0]),
            DMatrix::from_column_slice(1, 1, &[1.0]),
        );
        let q1 = DVector::from_column_slice(&[1.0]);
        let q2 = DVector::from_column_slice(&[1.0]);
        let p = solve_care(&plant, &q1, &q2).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
        let k = lqr_gain(&plant, &q2, &p);
        assert_relative_eq!(k[(0, 0)], -1.0, epsilon = 1e-12);
    }

    /// Closed form for the double integrator with Q₁ = diag(1, 0), Q₂ = 1:
    /// P = [[√2, 1], [1, √2]], K = [−1, −√2], poles −√2/2 ± i·√2/2.
    #[test]
    fn double_integrator_closed_form() {
        let (plant, q1, q2) = double_integrator_1d();
        let p = solve_care(&plant, &q1, &q2).unwrap();
        assert_relative_eq!(p[(0, 0)], SQRT2, epsilon = 1e-9);
        assert_relative_eq!(p[(0, 1)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(p[(1, 0)], 1.0, epsilon = 1e-9);
        assert_relative_eq!(p[(1, 1)], SQRT2, epsilon = 1e-9);
        let k = lqr_gain(&plant, &q2, &p);
        assert_relative_eq!(k[(0, 0)], -1.0, epsilon = 1e-9);
        assert_relative_eq!(k[(0, 1)], -SQRT2, epsilon = 1e-9);
        assert!(care_residual(&plant, &q1, &q2, &p) < 1e-9);

        let eigs = closed_loop_spectrum(&plant, &k);
        for e in &eigs {
            assert_relative_eq!(e.re, -SQRT2 / 2.0, epsilon = 1e-9);
            assert_relative_eq!(e.im.abs(), SQRT2 / 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn newton_route_matches_closed_form() {
        let (plant, q1, q2) = double_integrator_1d();
        let p = solve_care_newton(&plant, &q1, &q2).unwrap();
        assert_relative_eq!(p[(0, 0)], SQRT2, epsilon = 1e-10);
        assert_relative_eq!(p[(1, 1)], SQRT2, epsilon = 1e-10);
        assert_relative_eq!(p[(0, 1)], 1.0, epsilon = 1e-10);
    }

    /// The two routes must agree on random stabilizable problems; this is
    /// the in-repo oracle that keeps either solver honest.
    #[test]
    fn hamiltonian_and_newton_routes_agree_on_random_problems() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut solved = 0;
        for case in 0..100 {
            let n = 4;
            let m = 2;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let plant = LinearPlant::new(a, b);
            let q1 = DVector::from_fn(n, |_, _| rng.gen_range(0.1..5.0));
            let q2 = DVector::from_fn(m, |_, _| rng.gen_range(0.5..3.0));
            let p1 = solve_care(&plant, &q1, &q2)
                .unwrap_or_else(|e| panic!("hamiltonian route failed on case {case}: {e}"));
            let p2 = solve_care_newton(&plant, &q1, &q2)
                .unwrap_or_else(|e| panic!("newton route failed on case {case}: {e}"));
            let diff = (&p1 - &p2).abs().max() / (1.0 + p1.abs().max());
            assert!(diff < 1e-8, "case {case}: route disagreement {diff}");
            solved += 1;
        }
        assert_eq!(solved, 100);
    }

    /// Scaling both weight matrices by the same factor leaves the gain
    /// unchanged (P scales, K = −Q₂⁻¹BᵀP does not).
    #[test]
    fn gain_invariant_under_joint_weight_scaling() {
        let plant = LinearPlant::double_integrator(2);
        let q1 = DVector::from_column_slice(&[58.0, 264.0, 30.0, 10.0]);
        let q2 = DVector::from_column_slice(&[40.0, 30.0]);
        let p = solve_care(&plant, &q1, &q2).unwrap();
        let k = lqr_gain(&plant, &q2, &p);
        for alpha in [0.5, 2.0, 17.0] {
            let p_s = solve_care(&plant, &(q1.scale(alpha)), &(q2.scale(alpha))).unwrap();
            let k_s = lqr_gain(&plant, &(q2.scale(alpha)), &p_s);
            assert!((&k - &k_s).abs().max() < 1e-9, "alpha {alpha}");
        }
    }

    /// Shipped weight sets must synthesize diagonal-block gains with a
    /// stability margin.
    #[test]
    fn shipped_weight_sets_are_hurwitz_with_margin() {
        let plant = LinearPlant::double_integrator(2);
        for (q1v, q2v) in [
            ([58.0, 264.0, 30.0, 10.0], [40.0, 30.0]),
            ([116.0, 441.0, 87.0, 18.0], [40.0, 30.0]),
        ] {
            let q1 = DVector::from_column_slice(&q1v);
            let q2 = DVector::from_column_slice(&q2v);
            let g = GainSynthesis::new(plant.clone(), q1, q2).unwrap();
            let max_re = closed_loop_spectrum(&g.plant, &g.k)
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max_re < -1e-6, "margin violated: {max_re}");
            // The decoupled axes make the position/velocity gain blocks
            // diagonal; cross terms must vanish.
            assert!(g.k[(0, 1)].abs() < 1e-9);
            assert!(g.k[(1, 0)].abs() < 1e-9);
            assert!(g.k[(0, 3)].abs() < 1e-9);
            assert!(g.k[(1, 2)].abs() < 1e-9);
        }
    }

    /// Per-axis scalar closed form: for states (pos, vel) with weights
    /// (q_p, q_v) and control weight r, K = −[√(q_p/r), √(q_v/r + 2√(q_p/r))].
    #[test]
    fn shipped_gains_match_scalar_closed_form() {
        let plant = LinearPlant::double_integrator(2);
        let q1 = DVector::from_column_slice(&[58.0, 264.0, 30.0, 10.0]);
        let q2 = DVector::from_column_slice(&[40.0, 30.0]);
        let g = GainSynthesis::new(plant, q1, q2).unwrap();
        let kx_pos = -(58.0f64 / 40.0).sqrt();
        let kx_vel = -((30.0f64 / 40.0) + 2.0 * (58.0f64 / 40.0).sqrt()).sqrt();
        let kz_pos = -(264.0f64 / 30.0).sqrt();
        let kz_vel = -((10.0f64 / 30.0) + 2.0 * (264.0f64 / 30.0).sqrt()).sqrt();
        assert_relative_eq!(g.k[(0, 0)], kx_pos, epsilon = 1e-9);
        assert_relative_eq!(g.k[(0, 2)], kx_vel, epsilon = 1e-9);
        assert_relative_eq!(g.k[(1, 1)], kz_pos, epsilon = 1e-9);
        assert_relative_eq!(g.k[(1, 3)], kz_vel, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_weights() {
        let (plant, q1, _) = double_integrator_1d();
        let bad_q2 = DVector::from_column_slice(&[0.0]);
        assert!(matches!(
            solve_care(&plant, &q1, &bad_q2),
            Err(SynthesisError::IndefiniteWeights)
        ));
        let bad_q1 = DVector::from_column_slice(&[-1.0, 0.0]);
        let q2 = DVector::from_column_slice(&[1.0]);
        assert!(solve_care(&plant, &bad_q1, &q2).is_err());
        let wrong_dim = DVector::from_column_slice(&[1.0]);
        assert!(matches!(
            solve_care(&plant, &wrong_dim, &q2),
            Err(SynthesisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn detects_unstabilizable_pair() {
        // Unstable mode with no control authority.
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let plant = LinearPlant::new(a, b);
        let q1 = DVector::from_column_slice(&[1.0, 1.0]);
        let q2 = DVector::from_column_slice(&[1.0]);
        assert!(solve_care(&plant, &q1, &q2).is_err());
        assert!(solve_care_newton(&plant, &q1, &q2).is_err());
    }
}
