//! State-space containers and frequency-domain evaluation.
//!
//! Transfer values are computed per frequency through an LU-factored
//! resolvent, which stays robust for non-diagonalizable state matrices
//! (the tracking plant is a Jordan block). Evaluations at distinct
//! frequencies are independent and need no synchronization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, spectral_radius};
pub use crate::linalg::{CMatrix, Matrix};

/// The plant `x' = F x + G w`, `y = H x + v`, `s = L x`.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    pub f: Matrix,
    pub g: Matrix,
    pub h: Matrix,
    pub l: Matrix,
}

impl StateSpaceModel {
    /// Validates dimensions, finiteness and detectability of `(F, H)`.
    ///
    /// Detectability is checked constructively: the Kalman Riccati equation
    /// must admit a stabilizing solution.
    pub fn new(f: Matrix, g: Matrix, h: Matrix, l: Matrix) -> Result<Self> {
        let n = f.nrows();
        if !f.is_square() || n == 0 {
            return Err(Error::DimensionMismatch("F must be square and nonempty".into()));
        }
        if g.nrows() != n || h.ncols() != n || l.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "G rows {}, H cols {}, L cols {} must equal n = {}",
                g.nrows(),
                h.ncols(),
                l.ncols(),
                n
            )));
        }
        if h.nrows() == 0 || g.ncols() == 0 || l.nrows() == 0 {
            return Err(Error::DimensionMismatch("q, m, p must all be >= 1".into()));
        }
        check_finite(&f, "F")?;
        check_finite(&g, "G")?;
        check_finite(&h, "H")?;
        check_finite(&l, "L")?;
        let model = Self { f, g, h, l };
        crate::synthesis::riccati_p(&model)?;
        Ok(model)
    }

    /// `(n, q, m, p)` = (states, disturbances, observations, targets).
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.f.nrows(), self.g.ncols(), self.h.nrows(), self.l.nrows())
    }
}

/// A realized causal filter `xi' = A xi + B y`, `s_hat = C xi + D y`.
#[derive(Debug, Clone)]
pub struct LtiFilter {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
}

impl LtiFilter {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        if !a.is_square() || b.nrows() != a.nrows() || c.ncols() != a.ncols() {
            return Err(Error::DimensionMismatch("filter state blocks".into()));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch("filter feedthrough block".into()));
        }
        check_finite(&a, "filter A")?;
        check_finite(&b, "filter B")?;
        check_finite(&c, "filter C")?;
        check_finite(&d, "filter D")?;
        let rho = spectral_radius(&a);
        if a.nrows() > 0 && rho >= 1.0 {
            return Err(Error::NoStabilizingSolution(format!(
                "filter state matrix has spectral radius {rho:.6} >= 1"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// The static filter `K(z) = D` (zero-dimensional state).
    pub fn from_static(d: Matrix) -> Self {
        let (p, m) = (d.nrows(), d.ncols());
        Self { a: Matrix::zeros(0, 0), b: Matrix::zeros(0, m), c: Matrix::zeros(p, 0), d }
    }

    /// The zero filter with `p` outputs and `m` inputs.
    pub fn zero(p: usize, m: usize) -> Self {
        Self::from_static(Matrix::zeros(p, m))
    }

    /// Internal state dimension.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Series composition `self(z) * other(z)` (apply `other` first).
    pub fn series(&self, other: &LtiFilter) -> Result<LtiFilter> {
        if self.inputs() != other.outputs() {
            return Err(Error::DimensionMismatch("series composition".into()));
        }
        let (d1, d2) = (other.dim(), self.dim());
        let mut a = Matrix::zeros(d1 + d2, d1 + d2);
        a.view_mut((0, 0), (d1, d1)).copy_from(&other.a);
        a.view_mut((d1, 0), (d2, d1)).copy_from(&(&self.b * &other.c));
        a.view_mut((d1, d1), (d2, d2)).copy_from(&self.a);
        let mut b = Matrix::zeros(d1 + d2, other.inputs());
        b.view_mut((0, 0), (d1, other.inputs())).copy_from(&other.b);
        b.view_mut((d1, 0), (d2, other.inputs())).copy_from(&(&self.b * &other.d));
        let mut c = Matrix::zeros(self.outputs(), d1 + d2);
        c.view_mut((0, 0), (self.outputs(), d1)).copy_from(&(&self.d * &other.c));
        c.view_mut((0, d1), (self.outputs(), d2)).copy_from(&self.c);
        let d = &self.d * &other.d;
        Ok(LtiFilter { a, b, c, d })
    }

    /// Parallel interconnection `self(z) + other(z)`.
    pub fn parallel(&self, other: &LtiFilter) -> Result<LtiFilter> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimensionMismatch("parallel composition".into()));
        }
        let (d1, d2) = (self.dim(), other.dim());
        let mut a = Matrix::zeros(d1 + d2, d1 + d2);
        a.view_mut((0, 0), (d1, d1)).copy_from(&self.a);
        a.view_mut((d1, d1), (d2, d2)).copy_from(&other.a);
        let mut b = Matrix::zeros(d1 + d2, self.inputs());
        b.view_mut((0, 0), (d1, self.inputs())).copy_from(&self.b);
        b.view_mut((d1, 0), (d2, self.inputs())).copy_from(&other.b);
        let mut c = Matrix::zeros(self.outputs(), d1 + d2);
        c.view_mut((0, 0), (self.outputs(), d1)).copy_from(&self.c);
        c.view_mut((0, d1), (self.outputs(), d2)).copy_from(&other.c);
        Ok(LtiFilter { a, b, c, d: &self.d + &other.d })
    }

    /// Inverse of a square system with invertible feedthrough.
    pub fn inverse(&self) -> Result<LtiFilter> {
        if self.inputs() != self.outputs() {
            return Err(Error::DimensionMismatch("inverse of non-square system".into()));
        }
        let d_lu = self.d.clone().lu();
        if !d_lu.is_invertible() {
            return Err(Error::SingularInnovation);
        }
        let d_inv = d_lu.try_inverse().ok_or(Error::SingularInnovation)?;
        let a = &self.a - &self.b * &d_inv * &self.c;
        let b = &self.b * &d_inv;
        let c = -(&d_inv * &self.c);
        Ok(LtiFilter { a, b, c, d: d_inv })
    }
}

/// One frequency-response sample: the value of a transfer matrix at
/// `z = e^{j omega}`.
#[derive(Debug, Clone)]
pub struct TransferSample {
    pub omega: f64,
    pub value: CMatrix,
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `(e^{j omega} I - A)^{-1}` as a dense complex matrix.
pub fn resolvent(a: &Matrix, omega: f64) -> Result<CMatrix> {
    let n = a.nrows();
    let z = Complex64::from_polar(1.0, omega);
    let mut m = to_complex(&(-a));
    for i in 0..n {
        m[(i, i)] += z;
    }
    m.lu().try_inverse().ok_or(Error::SingularResolvent(omega))
}

/// Evaluates `D + C (e^{j omega} I - A)^{-1} B`.
pub fn eval_transfer(filt: &LtiFilter, omega: f64) -> Result<CMatrix> {
    if filt.dim() == 0 {
        return Ok(to_complex(&filt.d));
    }
    let r = resolvent(&filt.a, omega)?;
    Ok(to_complex(&filt.d) + to_complex(&filt.c) * r * to_complex(&filt.b))
}

/// Evaluates the plant channels `H(e^{j omega})` and `L(e^{j omega})` of the
/// strictly proper realizations `(F, G, H, 0)` and `(F, G, L, 0)`.
pub fn eval_plant_channels(model: &StateSpaceModel, omega: f64) -> Result<(CMatrix, CMatrix)> {
    let r = resolvent(&model.f, omega)?;
    let rg = r * to_complex(&model.g);
    Ok((to_complex(&model.h) * &rg, to_complex(&model.l) * &rg))
}

/// One sample of the error operator `T_K = [L - K H, -K]` at `e^{j omega}`.
pub fn error_operator_sample(
    model: &StateSpaceModel,
    filt: &LtiFilter,
    omega: f64,
) -> Result<CMatrix> {
    let (_, q, m, p) = model.dims();
    if filt.inputs() != m || filt.outputs() != p {
        return Err(Error::DimensionMismatch(format!(
            "filter is {}x{}, model needs {}x{}",
            filt.outputs(),
            filt.inputs(),
            p,
            m
        )));
    }
    let (hw, lw) = eval_plant_channels(model, omega)?;
    let kw = eval_transfer(filt, omega)?;
    Ok(error_row(&lw, &hw, &kw, q, m, p))
}

/// Assembles `[L - K H, -K]` from already-evaluated samples.
pub fn error_row(lw: &CMatrix, hw: &CMatrix, kw: &CMatrix, q: usize, m: usize, p: usize) -> CMatrix {
    let left = lw - kw * hw;
    let mut t = CMatrix::zeros(p, q + m);
    t.view_mut((0, 0), (p, q)).copy_from(&left);
    t.view_mut((0, q), (p, m)).copy_from(&(-kw));
    t
}
