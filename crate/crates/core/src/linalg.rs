//! Small shared linear-algebra helpers: a Kronecker-product Lyapunov solver
//! for the gain synthesis routines and a banded LU factorization for the
//! block-bidiagonal collocation Jacobians.

use nalgebra::DMatrix;

/// Solves `m·x + x·mᵀ = w` for `x` by Kronecker vectorization.
///
/// Intended for the n ≤ 8 matrices used by the gain synthesis; the dense
/// n²×n² solve is exact and cheap at that size. Returns `None` when the
/// spectrum of `m` makes the equation singular (λᵢ + λⱼ = 0).
pub(crate) fn solve_lyapunov(m: &DMatrix<f64>, w: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    assert_eq!(m.ncols(), n);
    assert_eq!((w.nrows(), w.ncols()), (n, n));
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(m·x) = (I ⊗ m)·vec(x), vec(x·mᵀ) = (m ⊗ I)·vec(x)
    let lhs = eye.kronecker(m) + m.kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, w.as_slice());
    let sol = lhs.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Banded matrix in LAPACK-style storage with room for pivoting fill-in.
///
/// Entry (i, j) with i − j ∈ [−(ku + kl), kl] lives at packed row
/// `kl + ku + i − j` of column j; the extra `kl` super-diagonals hold fill
/// produced by partial pivoting.
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    stride: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let stride = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, stride, ab: vec![0.0; stride * n] }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        let d = i as isize - j as isize;
        debug_assert!(
            -((self.ku + self.kl) as isize) <= d && d <= self.kl as isize,
            "entry ({i},{j}) outside band"
        );
        j * self.stride + (d + (self.kl + self.ku) as isize) as usize
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.ab[o] = v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.offset(i, j)]
    }

    #[inline]
    fn get_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.ab[o]
    }

    /// LU factorization with partial pivoting (row swaps confined to the
    /// band). Fails on exact singularity.
    pub fn factor(mut self) -> Option<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            // Pivot search within the lower band of column j.
            let imax = (j + kl).min(n - 1);
            let mut piv = j;
            let mut pmax = self.get(j, j).abs();
            for i in (j + 1)..=imax {
                let v = self.get(i, j).abs();
                if v > pmax {
                    pmax = v;
                    piv = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return None;
            }
            ipiv[j] = piv;
            let jmax = (j + ku + kl).min(n - 1);
            if piv != j {
                for c in j..=jmax {
                    let a = self.get(j, c);
                    let b = self.get(piv, c);
                    self.set(j, c, b);
                    self.set(piv, c, a);
                }
            }
            let djj = self.get(j, j);
            for i in (j + 1)..=imax {
                let l = self.get(i, j) / djj;
                self.set(i, j, l);
                if l != 0.0 {
                    for c in (j + 1)..=jmax {
                        let u = self.get(j, c);
                        if u != 0.0 {
                            *self.get_mut(i, c) -= l * u;
                        }
                    }
                }
            }
        }
        Some(BandLu { mat: self, ipiv })
    }
}

/// Factored banded system; solves in O(n·(kl + ku)) per right-hand side.
pub(crate) struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.mat.n;
        debug_assert_eq!(b.len(), n);
        let kl = self.mat.kl;
        let ku = self.mat.ku;
        // Forward: apply permutation and L.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let imax = (j + kl).min(n - 1);
            let bj = b[j];
            if bj != 0.0 {
                for i in (j + 1)..=imax {
                    b[i] -= self.mat.get(i, j) * bj;
                }
            }
        }
        // Back substitution on U (bandwidth ku + kl after pivoting).
        for j in (0..n).rev() {
            let mut s = b[j];
            let cmax = (j + ku + kl).min(n - 1);
            for c in (j + 1)..=cmax {
                s -= self.mat.get(j, c) * b[c];
            }
            b[j] = s / self.mat.get(j, j);
        }
    }
}
