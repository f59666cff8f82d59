//! Smooth convex objectives: constrained least squares and Huber matrix completion.

use crate::error::{check_dim, FwError, Result};
use crate::linalg::{dot, DenseMatrix, DenseVector};
use crate::scalar::Scalar;

/// A smooth convex objective over a flat coordinate space.
pub trait Objective<T: Scalar> {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> Result<T>;

    fn gradient(&self, x: &[T]) -> Result<DenseVector<T>>;

    /// `D_f(y, x) = f(y) − f(x) − ⟨∇f(x), y − x⟩`.
    fn bregman(&self, y: &[T], x: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        let g = self.gradient(x)?;
        let diff: Vec<T> = y.iter().zip(x).map(|(&a, &b)| a - b).collect();
        Ok(self.value(y)? - self.value(x)? - dot(&g, &diff))
    }

    fn describe(&self) -> String;
}

/// `f(x) = ½‖Ax − y‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionObjective<T = f64> {
    a: DenseMatrix<T>,
    y: DenseVector<T>,
    gram: DenseMatrix<T>,
    aty: DenseVector<T>,
}

impl<T: Scalar> RegressionObjective<T> {
    pub fn new(a: DenseMatrix<T>, y: DenseVector<T>) -> Result<Self> {
        check_dim(a.rows(), y.len())?;
        if !a.is_finite() || !y.is_finite() {
            return Err(FwError::InvalidParameter("regression data must be finite".into()));
        }
        let gram = a.gram();
        let aty = a.matvec_transposed(&y)?;
        Ok(RegressionObjective { a, y, gram, aty })
    }

    /// Converts an `f64` instance into another precision.
    pub fn from_f64(a: &DenseMatrix, y: &[f64]) -> Result<Self> {
        Self::new(a.cast(), y.iter().map(|&v| T::of(v)).collect())
    }

    pub fn design(&self) -> &DenseMatrix<T> {
        &self.a
    }

    pub fn target(&self) -> &DenseVector<T> {
        &self.y
    }

    /// `½ (y − x)ᵀ AᵀA (y − x)`.
    fn quadratic_form(&self, d: &[T]) -> T {
        let n = self.gram.cols();
        let mut acc = T::zero();
        for i in 0..n {
            let row = self.gram.row(i);
            acc += d[i] * dot(row, d);
        }
        T::of(0.5) * acc
    }
}

impl<T: Scalar> Objective<T> for RegressionObjective<T> {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn value(&self, x: &[T]) -> Result<T> {
        let ax = self.a.matvec(x)?;
        let sq = ax.iter().zip(self.y.iter()).fold(T::zero(), |acc, (&p, &t)| {
            let r = p - t;
            acc + r * r
        });
        Ok(T::of(0.5) * sq)
    }

    fn gradient(&self, x: &[T]) -> Result<DenseVector<T>> {
        let gx = self.gram.matvec(x)?;
        Ok(gx.iter().zip(self.aty.iter()).map(|(&a, &b)| a - b).collect())
    }

    fn bregman(&self, y: &[T], x: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), x.len())?;
        let d: Vec<T> = y.iter().zip(x).map(|(&a, &b)| a - b).collect();
        Ok(self.quadratic_form(&d))
    }

    fn describe(&self) -> String {
        format!("regression:{}x{}", self.a.rows(), self.a.cols())
    }
}

/// Huber loss with unit transition point.
pub fn huber(x: f64, rho: f64) -> f64 {
    if x.abs() <= 1.0 {
        0.5 * x * x
    } else {
        rho * (x.abs() - 0.5)
    }
}

pub fn huber_derivative(x: f64, rho: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        rho * x.signum()
    }
}

/// One observed matrix entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// `f(X) = (1/|𝓘|) Σ_{(i,j)∈𝓘} H(A_ij − X_ij)`; points are row-major flattened matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionObjective {
    observed: Vec<Observation>,
    rows: usize,
    cols: usize,
    rho: f64,
}

impl CompletionObjective {
    pub fn new(observed: Vec<Observation>, rows: usize, cols: usize) -> Result<Self> {
        Self::with_rho(observed, rows, cols, 1.0)
    }

    pub fn with_rho(observed: Vec<Observation>, rows: usize, cols: usize, rho: f64) -> Result<Self> {
        if observed.is_empty() {
            return Err(FwError::InvalidParameter("completion needs at least one observed entry".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(FwError::InvalidParameter(format!("Huber scale must be positive, got {rho}")));
        }
        for o in &observed {
            if o.row >= rows || o.col >= cols {
                return Err(FwError::InvalidParameter(format!(
                    "observed entry ({}, {}) outside a {rows}x{cols} matrix",
                    o.row, o.col
                )));
            }
            if !o.value.is_finite() {
                return Err(FwError::InvalidParameter(format!("entry ({}, {}) is not finite", o.row, o.col)));
            }
        }
        Ok(CompletionObjective { observed, rows, cols, rho })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn observed(&self) -> &[Observation] {
        &self.observed
    }

    fn residual(&self, o: &Observation, x: &[f64]) -> f64 {
        o.value - x[o.row * self.cols + o.col]
    }

    fn weight(&self) -> f64 {
        1.0 / self.observed.len() as f64
    }
}

impl Objective<f64> for CompletionObjective {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let total: f64 = self.observed.iter().map(|o| huber(self.residual(o, x), self.rho)).sum();
        Ok(total * self.weight())
    }

    fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        check_dim(self.dim(), x.len())?;
        let w = self.weight();
        let mut g = DenseVector::zeros(self.dim());
        for o in &self.observed {
            g[o.row * self.cols + o.col] -= w * huber_derivative(self.residual(o, x), self.rho);
        }
        Ok(g)
    }

    /// Summed per entry so that no large values cancel.
    fn bregman(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        check_dim(self.dim(), x.len())?;
        let total: f64 = self
            .observed
            .iter()
            .map(|o| {
                let a = self.residual(o, x);
                let b = self.residual(o, y);
                huber(b, self.rho) - huber(a, self.rho) - huber_derivative(a, self.rho) * (b - a)
            })
            .sum();
        Ok(total * self.weight())
    }

    fn describe(&self) -> String {
        format!("completion:{}x{}:{}obs", self.rows, self.cols, self.observed.len())
    }
}
