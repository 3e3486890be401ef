//! Differentiable objectives: the two-dimensional Rosenbrock family, a convex
//! quadratic used to exercise conjugate-direction properties, and central
//! finite-difference oracles for checking analytic derivatives.

use nalgebra::{Cholesky, DVector};

use crate::error::{Error, Result};
use crate::vector::{Matrix, RealVector};

/// Default step for [`finite_diff_gradient`].
pub const FD_GRADIENT_STEP: f64 = 1e-6;
/// Default step for [`finite_diff_hessian`].
pub const FD_HESSIAN_STEP: f64 = 1e-4;

/// A scalar function on R^n with an analytic gradient and, optionally, a
/// Hessian.
///
/// Implementations must be pure: the same point always yields the same
/// result, so runs are reproducible and objectives can be shared across
/// threads.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Objective value. May be infinite if the point is far enough out that
    /// the arithmetic overflows; callers treat that as divergence.
    fn value(&self, x: &RealVector) -> Result<f64>;

    fn gradient(&self, x: &RealVector) -> Result<RealVector>;

    fn hessian(&self, _x: &RealVector) -> Result<Matrix> {
        Err(Error::Unsupported("hessian"))
    }

    /// The quadratic form behind this objective, if it is one. Exact line
    /// minimization is only available when this returns `Some`.
    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &RealVector) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &RealVector) -> Result<RealVector> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &RealVector) -> Result<Matrix> {
        (**self).hessian(x)
    }
    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        (**self).as_quadratic()
    }
}

/// `f(x1, x2) = kappa * (x1^2 - x2)^2 + (x1 - 1)^2`, minimized at (1, 1).
///
/// `kappa = 100` is the classic banana valley; `kappa = 1` is a much gentler
/// member of the same family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rosenbrock {
    kappa: f64,
}

impl Rosenbrock {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kappa must be positive and finite, got {kappa}"
            )));
        }
        Ok(Rosenbrock { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Value at raw coordinates, without validation.
    #[inline]
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let valley = x1 * x1 - x2;
        let offset = x1 - 1.0;
        self.kappa * valley * valley + offset * offset
    }

    #[inline]
    pub fn eval_gradient(&self, x1: f64, x2: f64) -> [f64; 2] {
        let valley = x1 * x1 - x2;
        [
            4.0 * self.kappa * x1 * valley + 2.0 * (x1 - 1.0),
            -2.0 * self.kappa * valley,
        ]
    }

    #[inline]
    pub fn eval_hessian(&self, x1: f64, x2: f64) -> [[f64; 2]; 2] {
        let k = self.kappa;
        let off = -4.0 * k * x1;
        [
            [12.0 * k * x1 * x1 - 4.0 * k * x2 + 2.0, off],
            [off, 2.0 * k],
        ]
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &RealVector) -> Result<f64> {
        x.expect_dim(2)?;
        Ok(self.eval(x[0], x[1]))
    }

    fn gradient(&self, x: &RealVector) -> Result<RealVector> {
        x.expect_dim(2)?;
        RealVector::from_slice(&self.eval_gradient(x[0], x[1]))
    }

    fn hessian(&self, x: &RealVector) -> Result<Matrix> {
        x.expect_dim(2)?;
        let h = self.eval_hessian(x[0], x[1]);
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("hessian overflowed".into()));
        }
        Ok(Matrix::from_row_slice(
            2,
            2,
            &[h[0][0], h[0][1], h[1][0], h[1][1]],
        ))
    }
}

pub fn rosenbrock_value(p: &RealVector, kappa: f64) -> Result<f64> {
    Rosenbrock::new(kappa)?.value(p)
}

pub fn rosenbrock_gradient(p: &RealVector, kappa: f64) -> Result<RealVector> {
    Rosenbrock::new(kappa)?.gradient(p)
}

pub fn rosenbrock_hessian(p: &RealVector, kappa: f64) -> Result<Matrix> {
    Rosenbrock::new(kappa)?.hessian(p)
}

/// `f(x) = 0.5 x^T Q x - x^T b` with `Q` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    q: Matrix,
    b: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl QuadraticObjective {
    /// Fails unless `q` is square, exactly symmetric, positive definite and
    /// matches the length of `b`.
    pub fn new(q: Matrix, b: RealVector) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "Q must be square, got {}x{}",
                n,
                q.ncols()
            )));
        }
        if b.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: b.dim(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Q has non-finite entries".into()));
        }
        if q != q.transpose() {
            return Err(Error::InvalidInput("Q must be symmetric".into()));
        }
        let chol = Cholesky::new(q.clone())
            .ok_or_else(|| Error::InvalidInput("Q is not positive definite".into()))?;
        Ok(QuadraticObjective {
            q,
            b: b.into_dvector(),
            chol,
        })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// The unique minimizer `Q^{-1} b`.
    pub fn minimizer(&self) -> RealVector {
        RealVector::from_dvector(self.chol.solve(&self.b))
            .expect("SPD solve of finite data is finite")
    }

    /// `d^T Q d`.
    pub fn curvature(&self, d: &RealVector) -> Result<f64> {
        d.expect_dim(self.b.len())?;
        let d = d.as_dvector();
        Ok(d.dot(&(&self.q * d)))
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &RealVector) -> Result<f64> {
        x.expect_dim(self.dim())?;
        let x = x.as_dvector();
        Ok(0.5 * x.dot(&(&self.q * x)) - x.dot(&self.b))
    }

    fn gradient(&self, x: &RealVector) -> Result<RealVector> {
        x.expect_dim(self.dim())?;
        RealVector::from_dvector(&self.q * x.as_dvector() - &self.b)
    }

    fn hessian(&self, x: &RealVector) -> Result<Matrix> {
        x.expect_dim(self.dim())?;
        Ok(self.q.clone())
    }

    fn as_quadratic(&self) -> Option<&QuadraticObjective> {
        Some(self)
    }
}

fn shifted(p: &RealVector, moves: &[(usize, f64)]) -> Result<RealVector> {
    let mut v = p.as_dvector().clone();
    for &(i, delta) in moves {
        v[i] += delta;
    }
    RealVector::from_dvector(v)
}

fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )))
    }
}

/// Central-difference gradient: `(f(p + h e_i) - f(p - h e_i)) / 2h`.
pub fn finite_diff_gradient<F: Objective + ?Sized>(
    f: &F,
    p: &RealVector,
    h: f64,
) -> Result<RealVector> {
    check_step(h)?;
    p.expect_dim(f.dim())?;
    let mut g = Vec::with_capacity(p.dim());
    for i in 0..p.dim() {
        let plus = f.value(&shifted(p, &[(i, h)])?)?;
        let minus = f.value(&shifted(p, &[(i, -h)])?)?;
        g.push((plus - minus) / (2.0 * h));
    }
    RealVector::new(g)
}

/// Central second differences, symmetrized by averaging with the transpose.
///
/// Diagonal entries use the three-point stencil; off-diagonal entries use the
/// four-corner stencil `(f(++) - f(+-) - f(-+) + f(--)) / 4h^2`.
pub fn finite_diff_hessian<F: Objective + ?Sized>(f: &F, p: &RealVector, h: f64) -> Result<Matrix> {
    check_step(h)?;
    p.expect_dim(f.dim())?;
    let n = p.dim();
    let centre = f.value(p)?;
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j {
                let plus = f.value(&shifted(p, &[(i, h)])?)?;
                let minus = f.value(&shifted(p, &[(i, -h)])?)?;
                (plus - 2.0 * centre + minus) / (h * h)
            } else {
                let pp = f.value(&shifted(p, &[(i, h), (j, h)])?)?;
                let pm = f.value(&shifted(p, &[(i, h), (j, -h)])?)?;
                let mp = f.value(&shifted(p, &[(i, -h), (j, h)])?)?;
                let mm = f.value(&shifted(p, &[(i, -h), (j, -h)])?)?;
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Below this magnitude an analytic derivative entry is compared by absolute
/// rather than relative error.
pub const NEAR_ZERO_DERIVATIVE: f64 = 1e-3;

/// Relative error `|analytic - numeric| / |analytic|`, or the absolute error
/// when `|analytic| < NEAR_ZERO_DERIVATIVE`.
pub fn derivative_error(analytic: f64, numeric: f64) -> f64 {
    let err = (analytic - numeric).abs();
    if analytic.abs() < NEAR_ZERO_DERIVATIVE {
        err
    } else {
        err / analytic.abs()
    }
}

/// Worst [`derivative_error`] of the analytic gradient and Hessian against
/// the central-difference oracles over a set of probe points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
    pub probes: usize,
}

pub fn check_derivatives<F: Objective + ?Sized>(
    f: &F,
    probes: &[RealVector],
) -> Result<DerivativeCheck> {
    let mut out = DerivativeCheck {
        max_gradient_error: 0.0,
        max_hessian_error: 0.0,
        probes: probes.len(),
    };
    for p in probes {
        let g = f.gradient(p)?;
        let fg = finite_diff_gradient(f, p, FD_GRADIENT_STEP)?;
        for i in 0..g.dim() {
            out.max_gradient_error = out.max_gradient_error.max(derivative_error(g[i], fg[i]));
        }
        let h = f.hessian(p)?;
        let fh = finite_diff_hessian(f, p, FD_HESSIAN_STEP)?;
        for (a, n) in h.iter().zip(fh.iter()) {
            out.max_hessian_error = out.max_hessian_error.max(derivative_error(*a, *n));
        }
    }
    Ok(out)
}

/// `side x side` probe points evenly spaced over `[lo, hi]^2`.
pub fn probe_grid(lo: f64, hi: f64, side: usize) -> Vec<RealVector> {
    let step = if side > 1 {
        (hi - lo) / (side - 1) as f64
    } else {
        0.0
    };
    let coords: Vec<f64> = (0..side).map(|i| lo + step * i as f64).collect();
    coords
        .iter()
        .flat_map(|&x| {
            coords
                .iter()
                .map(move |&y| RealVector::from_slice(&[x, y]).expect("finite probe"))
        })
        .collect()
}
