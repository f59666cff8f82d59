//! Compact convex feasible regions and their linear minimization oracles.

use crate::error::{check_dim, FwError, Result};
use crate::linalg::{
    dual_exponent, lq_norm, nuclear_norm, norm2, top_singular_triplet_seeded, DenseMatrix, DenseVector,
    DEFAULT_POWER_SEED,
};
use crate::scalar::Scalar;

/// Entries of a direction below this magnitude are treated as exactly zero.
pub const ZERO_DIRECTION: f64 = 1e-300;

/// A vertex returned by an oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Vertex<T = f64> {
    Dense(DenseVector<T>),
    /// `scale · left · rightᵀ`, flattened row-major when materialized.
    RankOne { scale: T, left: DenseVector<T>, right: DenseVector<T> },
}

impl<T: Scalar> Vertex<T> {
    pub fn to_dense(&self) -> DenseVector<T> {
        match self {
            Vertex::Dense(v) => v.clone(),
            Vertex::RankOne { scale, left, right } => DenseMatrix::outer(*scale, left, right).into_flat(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmoResult<T = f64> {
    pub vertex: Vertex<T>,
    /// `⟨c, v⟩` for the queried direction `c`.
    pub inner_product: T,
    /// Set when the direction vanished and any point of the region was a minimizer.
    pub tie: bool,
}

/// A compact convex set accessed through its linear minimization oracle.
pub trait FeasibleRegion<T: Scalar> {
    fn dim(&self) -> usize;

    fn radius(&self) -> f64;

    /// `argmin_{v ∈ C} ⟨direction, v⟩`.
    fn lmo(&self, direction: &[T]) -> Result<LmoResult<T>>;

    /// The gauge of the region (the norm whose ball it is).
    fn norm(&self, x: &[T]) -> Result<T>;

    fn contains(&self, x: &[T], tol: f64) -> Result<bool> {
        Ok(self.norm(x)? <= T::of(self.radius() * (1.0 + tol)))
    }

    /// The canonical interior point.
    fn center(&self) -> DenseVector<T> {
        DenseVector::zeros(self.dim())
    }

    fn describe(&self) -> String;
}

/// `{x ∈ ℝⁿ : ‖x‖_p <= β}` for `1 < p < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpBall {
    p: f64,
    beta: f64,
    dim: usize,
}

impl LpBall {
    pub fn new(p: f64, beta: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(FwError::InvalidParameter(format!("ℓp ball needs 1 < p < ∞, got p = {p}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(FwError::InvalidParameter(format!("radius must be positive, got {beta}")));
        }
        if dim == 0 {
            return Err(FwError::InvalidParameter("ℓp ball needs dim >= 1".into()));
        }
        Ok(LpBall { p, beta, dim })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Hölder conjugate of `p`.
    pub fn q(&self) -> f64 {
        dual_exponent(self.p)
    }
}

/// Closed-form ℓp-ball oracle `v_i = −β·sign(c_i)·|c_i|^{q−1} / ‖c‖_q^{q−1}`.
pub fn lmo_lp_ball<T: Scalar>(c: &[T], region: &LpBall) -> Result<LmoResult<T>> {
    check_dim(region.dim, c.len())?;
    let beta = T::of(region.beta);
    let tiny = T::of(ZERO_DIRECTION);
    let cmax = c.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !cmax.is_finite() {
        return Err(FwError::InvalidParameter("direction has non-finite entries".into()));
    }
    if cmax < tiny {
        let vertex = DenseVector::basis(region.dim, 0, -beta);
        let inner_product = -beta * c[0];
        return Ok(LmoResult { vertex: Vertex::Dense(vertex), inner_product, tie: true });
    }
    let cleaned: Vec<T> = c.iter().map(|&v| if v.abs() < tiny { T::zero() } else { v }).collect();
    let vertex: DenseVector<T> = if region.p == 2.0 {
        let n = norm2(&cleaned);
        cleaned.iter().map(|&v| -beta * v / n).collect()
    } else {
        let q = region.q();
        let qm1 = T::of(q - 1.0);
        // Normalize by the largest magnitude before exponentiation.
        let scaled: Vec<T> = cleaned.iter().map(|&v| v / cmax).collect();
        let denom = lq_norm(&scaled, q)?.powf(qm1);
        scaled
            .iter()
            .map(|&v| {
                if v == T::zero() {
                    T::zero()
                } else {
                    -beta * v.signum() * v.abs().powf(qm1) / denom
                }
            })
            .collect()
    };
    let inner_product = vertex.dot(c);
    Ok(LmoResult { vertex: Vertex::Dense(vertex), inner_product, tie: false })
}

impl<T: Scalar> FeasibleRegion<T> for LpBall {
    fn dim(&self) -> usize {
        self.dim
    }

    fn radius(&self) -> f64 {
        self.beta
    }

    fn lmo(&self, direction: &[T]) -> Result<LmoResult<T>> {
        lmo_lp_ball(direction, self)
    }

    fn norm(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim, x.len())?;
        lq_norm(x, self.p)
    }

    fn describe(&self) -> String {
        format!("lp:{}:{}", self.p, self.beta)
    }
}

/// `{X ∈ ℝ^{m×n} : ‖X‖_nuc <= β}`; points are flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearBall {
    beta: f64,
    rows: usize,
    cols: usize,
    /// Relative residual tolerance of the power iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl NuclearBall {
    pub fn new(beta: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(FwError::InvalidParameter(format!("radius must be positive, got {beta}")));
        }
        if rows == 0 || cols == 0 {
            return Err(FwError::InvalidParameter("nuclear ball needs a nonempty shape".into()));
        }
        Ok(NuclearBall { beta, rows, cols, tol: 1e-10, max_iter: 200_000, seed: DEFAULT_POWER_SEED })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Rank-one nuclear-ball oracle `V = −β·u₁v₁ᵀ` from the top singular pair of `G`.
pub fn lmo_nuclear_ball(g: &DenseMatrix, region: &NuclearBall, tol: f64) -> Result<LmoResult> {
    if g.shape() != region.shape() {
        return Err(FwError::Dimension { expected: region.rows * region.cols, found: g.rows() * g.cols() });
    }
    match top_singular_triplet_seeded(g, tol, region.max_iter, region.seed) {
        Ok(triplet) => Ok(LmoResult {
            vertex: Vertex::RankOne { scale: -region.beta, left: triplet.left, right: triplet.right },
            inner_product: -region.beta * triplet.sigma,
            tie: false,
        }),
        Err(FwError::ZeroMatrix) => Ok(LmoResult {
            vertex: Vertex::RankOne {
                scale: -region.beta,
                left: DenseVector::basis(region.rows, 0, 1.0),
                right: DenseVector::basis(region.cols, 0, 1.0),
            },
            inner_product: 0.0,
            tie: true,
        }),
        Err(e) => Err(e),
    }
}

impl FeasibleRegion<f64> for NuclearBall {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn radius(&self) -> f64 {
        self.beta
    }

    fn lmo(&self, direction: &[f64]) -> Result<LmoResult> {
        let g = DenseMatrix::from_row_major(self.rows, self.cols, direction.to_vec())?;
        lmo_nuclear_ball(&g, self, self.tol)
    }

    fn norm(&self, x: &[f64]) -> Result<f64> {
        let m = DenseMatrix::from_row_major(self.rows, self.cols, x.to_vec())?;
        Ok(nuclear_norm(&m))
    }

    fn describe(&self) -> String {
        format!("nuc:{}", self.beta)
    }
}

/// Region-norm membership test `‖x‖ <= β·(1 + tol)`.
pub fn membership<T: Scalar, R: FeasibleRegion<T> + ?Sized>(region: &R, x: &[T], tol: f64) -> Result<bool> {
    region.contains(x, tol)
}
