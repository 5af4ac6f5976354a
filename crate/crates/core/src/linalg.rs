//! Dense solvers for the equations behind the synthesis pipeline: discrete
//! algebraic Riccati equations (DARE), Stein / discrete Lyapunov equations,
//! two-sided Stein (discrete Sylvester) equations, singular values and
//! spectral radii.
//!
//! All solvers are pure functions over `DMatrix<f64>` and are safe to call
//! concurrently.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative update threshold for doubling / fixed-point iterations.
const ITER_TOL: f64 = 1e-13;
/// Iteration cap for the fixed-point fallback. SDA doubles and needs far less.
const MAX_FIXED_POINT: usize = 10_000;
const MAX_SDA: usize = 100;
/// Residuals of returned Riccati solutions must stay below this (relative).
pub const DARE_RESIDUAL_TOL: f64 = 1e-10;
/// Inputs this close to the unit circle are rejected by the Stein solvers.
const STABILITY_MARGIN: f64 = 1e-9;
/// Matrices below this size are solved by direct Kronecker vectorization.
const KRONECKER_LIMIT: usize = 8;

pub fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn check_symmetric(m: &Matrix) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym <= 1e-12 * m.norm().max(1.0) {
        Ok(())
    } else {
        Err(Error::NotSymmetric(asym))
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest singular value of a real matrix, accurate to 1e-12 relative.
pub fn max_singular_value(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Largest eigenvalue modulus of a product of two symmetric PSD matrices.
///
/// `A B` is similar to the symmetric `B^{1/2} A B^{1/2}`, so its spectrum is
/// real and nonnegative; this is the Hankel-type condition value used by the
/// synthesis existence check (not the same as the largest singular value of
/// the non-normal product).
pub fn psd_product_spectral_radius(a: &Matrix, b: &Matrix) -> f64 {
    spectral_radius(&(a * b))
}

// ---------------------------------------------------------------------------
// Stein and Sylvester-Stein equations
// ---------------------------------------------------------------------------

/// Solves `X = A X A^T + C`.
///
/// Requires `rho(A) < 1`. If `C` is symmetric the result is symmetric.
pub fn solve_stein(a: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if !a.is_square() || c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "stein: A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    check_finite(a, "stein A")?;
    check_finite(c, "stein C")?;
    let rho = spectral_radius(a);
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstableOperator(rho));
    }
    let x = solve_two_sided(a, &a.transpose(), c)?;
    if (&x - x.transpose()).norm() <= 1e-10 * x.norm().max(1.0) {
        Ok(symmetrize(&x))
    } else {
        Ok(x)
    }
}

/// Solves the two-sided Stein (discrete Sylvester) equation `X = A X B + C`.
///
/// Requires `rho(A) * rho(B) < 1`.
pub fn solve_sylvester_stein(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !b.is_square() || c.nrows() != a.nrows() || c.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "sylvester-stein: A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    check_finite(a, "sylvester A")?;
    check_finite(b, "sylvester B")?;
    check_finite(c, "sylvester C")?;
    let prod = spectral_radius(a) * spectral_radius(b);
    if prod >= 1.0 - STABILITY_MARGIN {
        return Err(Error::UnstablePair(prod));
    }
    solve_two_sided(a, b, c)
}

/// Dispatches `X = A X B + C` to the Kronecker or Schur backend.
fn solve_two_sided(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.nrows());
    if n <= KRONECKER_LIMIT && m <= KRONECKER_LIMIT {
        solve_two_sided_kron(a, b, c)
    } else {
        solve_two_sided_schur(a, b, c)
    }
}

/// Direct vectorized solve: `(I - B^T (x) A) vec(X) = vec(C)`.
fn solve_two_sided_kron(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.nrows());
    let dim = n * m;
    let mut sys = Matrix::identity(dim, dim);
    // vec is column-major: vec(A X B) = (B^T (x) A) vec(X)
    for bj in 0..m {
        for bi in 0..m {
            let w = b[(bi, bj)];
            if w == 0.0 {
                continue;
            }
            for aj in 0..n {
                for ai in 0..n {
                    sys[(bj * n + ai, bi * n + aj)] -= w * a[(ai, aj)];
                }
            }
        }
    }
    let rhs = DMatrix::from_column_slice(dim, 1, c.as_slice());
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoStabilizingSolution("Kronecker system singular".into()))?;
    Ok(Matrix::from_column_slice(n, m, sol.as_slice()))
}

/// Bartels-Stewart style solve via complex Schur forms of `A` and `B`.
fn solve_two_sided_schur(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let to_c = |m: &Matrix| m.map(|x| Complex64::new(x, 0.0));
    let sa = nalgebra::linalg::Schur::try_new(to_c(a), 1e-14, 10_000)
        .ok_or_else(|| Error::NoStabilizingSolution("Schur of A did not converge".into()))?;
    let sb = nalgebra::linalg::Schur::try_new(to_c(b), 1e-14, 10_000)
        .ok_or_else(|| Error::NoStabilizingSolution("Schur of B did not converge".into()))?;
    let (qa, ta) = sa.unpack();
    let (qb, tb) = sb.unpack();
    let (n, m) = (a.nrows(), b.nrows());
    let d = qa.adjoint() * to_c(c) * &qb;
    let mut y = CMatrix::zeros(n, m);
    // Y = Ta Y Tb + D with Ta, Tb upper triangular; sweep rows bottom-up,
    // columns left-to-right so every referenced entry is already known.
    for i in (0..n).rev() {
        for j in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for k in i..n {
                let taik = ta[(i, k)];
                if taik.norm_sqr() == 0.0 {
                    continue;
                }
                for l in 0..=j {
                    s += taik * y[(k, l)] * tb[(l, j)];
                }
            }
            let den = Complex64::new(1.0, 0.0) - ta[(i, i)] * tb[(j, j)];
            y[(i, j)] = (d[(i, j)] + s) / den;
        }
    }
    let x = &qa * y * qb.adjoint();
    Ok(x.map(|z| z.re))
}

// ---------------------------------------------------------------------------
// Discrete algebraic Riccati equations
// ---------------------------------------------------------------------------

/// Which side of the duality a `DareProblem` lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DareOrientation {
    /// `X = A^T X A + C - A^T X B (R + B^T X B)^{-1} B^T X A`,
    /// gain `K = (R + B^T X B)^{-1} B^T X A`, closed loop `A - B K`.
    Control,
    /// `X = A X A^T + C - A X B (R + B^T X B)^{-1} B^T X A^T` with `B`
    /// holding the transposed output map, gain `K = A X B (R + B^T X B)^{-1}`,
    /// closed loop `A - K B^T`.
    Estimation,
}

/// A discrete algebraic Riccati equation in either orientation.
///
/// `c_cost` and `r0` must be symmetric; `r0` may be indefinite (the
/// H-infinity synthesis feeds a `blkdiag(I, -level^2 I)` weight here) and
/// `c_cost` may be negative semidefinite (the Q-equation of the pipeline).
#[derive(Debug, Clone)]
pub struct DareProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub c_cost: Matrix,
    pub r0: Matrix,
    pub orientation: DareOrientation,
}

impl DareProblem {
    pub fn control(a: Matrix, b: Matrix, c_cost: Matrix, r0: Matrix) -> Result<Self> {
        Self::new(a, b, c_cost, r0, DareOrientation::Control)
    }

    /// Estimation-form problem; `c_out` is the q x n output map.
    pub fn estimation(a: Matrix, c_out: &Matrix, c_cost: Matrix, r0: Matrix) -> Result<Self> {
        Self::new(a, c_out.transpose(), c_cost, r0, DareOrientation::Estimation)
    }

    fn new(
        a: Matrix,
        b: Matrix,
        c_cost: Matrix,
        r0: Matrix,
        orientation: DareOrientation,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || !c_cost.is_square() || c_cost.nrows() != n {
            return Err(Error::DimensionMismatch("DARE blocks".into()));
        }
        if !r0.is_square() || r0.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch("DARE weight R0".into()));
        }
        check_finite(&a, "DARE A")?;
        check_finite(&b, "DARE B")?;
        check_finite(&c_cost, "DARE C")?;
        check_finite(&r0, "DARE R0")?;
        check_symmetric(&c_cost)?;
        check_symmetric(&r0)?;
        Ok(Self { a, b, c_cost, r0, orientation })
    }

    /// State dimension of the equation.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Stabilizing solution of a [`DareProblem`] together with the gain, the
/// innovation (or input-weight) matrix, its Cholesky factor when one exists,
/// and the closed-loop matrix.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: Matrix,
    pub gain: Matrix,
    /// `R0 + B^T X B`.
    pub r: Matrix,
    /// Lower Cholesky factor of `r`, when `r` is positive definite.
    pub r_sqrt: Option<Matrix>,
    pub closed_loop: Matrix,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves a DARE for its stabilizing solution.
///
/// Structure-preserving doubling is tried first; a damped fixed-point
/// iteration is the fallback. Whatever converged is accepted only if the
/// relative residual is below 1e-10 and the closed loop is strictly stable.
pub fn solve_dare(prob: &DareProblem) -> Result<RiccatiSolution> {
    // Internally everything runs in control coordinates; estimation problems
    // are the control problems of the transposed data.
    let (a, b) = match prob.orientation {
        DareOrientation::Control => (prob.a.clone(), prob.b.clone()),
        DareOrientation::Estimation => (prob.a.transpose(), prob.b.clone()),
    };
    let (x, iterations) = match sda(&a, &b, &prob.c_cost, &prob.r0) {
        Ok(done) => done,
        Err(_) => fixed_point(&a, &b, &prob.c_cost, &prob.r0)?,
    };
    finish(prob, &a, &b, x, iterations)
}

/// Builds gains, validates the residual and stability, and reorients.
fn finish(
    prob: &DareProblem,
    a: &Matrix,
    b: &Matrix,
    x: Matrix,
    iterations: usize,
) -> Result<RiccatiSolution> {
    let x = symmetrize(&x);
    let r = symmetrize(&(&prob.r0 + b.transpose() * &x * b));
    let r_lu = r.clone().lu();
    if !r_lu.is_invertible() {
        return Err(Error::SingularInnovation);
    }
    let k_ctrl = r_lu
        .solve(&(b.transpose() * &x * a))
        .ok_or(Error::SingularInnovation)?;
    let closed_ctrl = a - b * &k_ctrl;

    let rhs = a.transpose() * &x * a + &prob.c_cost
        - a.transpose() * &x * b * &k_ctrl;
    let residual = (&x - rhs).norm() / x.norm().max(1.0);
    if !residual.is_finite() || residual > DARE_RESIDUAL_TOL {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {residual:.3e} exceeds {DARE_RESIDUAL_TOL:.1e}"
        )));
    }
    let rho = spectral_radius(&closed_ctrl);
    if rho >= 1.0 {
        return Err(Error::NoStabilizingSolution(format!(
            "closed loop spectral radius {rho:.6} >= 1"
        )));
    }
    let r_sqrt = r.clone().cholesky().map(|c| c.l());
    let (gain, closed_loop) = match prob.orientation {
        DareOrientation::Control => (k_ctrl, closed_ctrl),
        // Transposing the control-coordinate results recovers the
        // estimation-form gain A X B (R + B^T X B)^{-1} and loop A - K B^T.
        DareOrientation::Estimation => (k_ctrl.transpose(), closed_ctrl.transpose()),
    };
    Ok(RiccatiSolution { x, gain, r, r_sqrt, closed_loop, residual, iterations })
}

/// Structure-preserving doubling (SDA-1) in control coordinates.
fn sda(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<(Matrix, usize)> {
    let n = a.nrows();
    let eye = Matrix::identity(n, n);
    let r_lu = r.clone().lu();
    if !r_lu.is_invertible() {
        return Err(Error::SingularInnovation);
    }
    let rinv_bt = r_lu.solve(&b.transpose()).ok_or(Error::SingularInnovation)?;
    let mut ak = a.clone();
    let mut gk = symmetrize(&(b * rinv_bt));
    let mut hk = q.clone();
    for it in 0..MAX_SDA {
        let w = &eye + &gk * &hk;
        let w_lu = w.clone().lu();
        if !w_lu.is_invertible() {
            return Err(Error::NoStabilizingSolution("SDA breakdown: I + GH singular".into()));
        }
        let v1 = w_lu
            .solve(&ak)
            .ok_or_else(|| Error::NoStabilizingSolution("SDA solve failed".into()))?;
        let v2 = w
            .transpose()
            .lu()
            .solve(&ak.transpose())
            .ok_or_else(|| Error::NoStabilizingSolution("SDA solve failed".into()))?;
        let a_next = &ak * &v1;
        let g_next = symmetrize(&(&gk + &ak * &gk * &v2));
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &v1));
        if !h_next.iter().all(|x| x.is_finite()) || !g_next.iter().all(|x| x.is_finite()) {
            return Err(Error::NoStabilizingSolution("SDA iterates diverged".into()));
        }
        let delta = (&h_next - &hk).norm() / h_next.norm().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if delta <= ITER_TOL {
            return Ok((hk, it + 1));
        }
    }
    Err(Error::IterationLimit("SDA"))
}

/// Plain fixed-point iteration on the Riccati map, control coordinates.
fn fixed_point(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<(Matrix, usize)> {
    let mut x = q.clone();
    for it in 0..MAX_FIXED_POINT {
        let rx = &r.clone() + b.transpose() * &x * b;
        let rx_lu = rx.lu();
        if !rx_lu.is_invertible() {
            return Err(Error::SingularInnovation);
        }
        let k = rx_lu.solve(&(b.transpose() * &x * a)).ok_or(Error::SingularInnovation)?;
        let next = symmetrize(&(a.transpose() * &x * a + q - a.transpose() * &x * b * k));
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NoStabilizingSolution("fixed point diverged".into()));
        }
        let delta = (&next - &x).norm() / next.norm().max(1.0);
        x = next;
        if delta <= ITER_TOL {
            return Ok((x, it + 1));
        }
    }
    Err(Error::IterationLimit("DARE fixed point"))
}
