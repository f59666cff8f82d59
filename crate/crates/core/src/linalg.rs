//! Dense linear algebra used by the oracles and objectives.
//!
//! Storage is row-major and dense throughout. Matrices that act as
//! optimization variables (nuclear-norm ball) are flattened into a
//! [`DenseVector`] in row-major order, so the Frobenius inner product is
//! the ordinary dot product of the flattened storage.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, FwError, Result};
use crate::scalar::Scalar;

/// Relative pivot cutoff below which a triangular factor is declared singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Seed used for the power-iteration start vector unless one is given.
pub const DEFAULT_POWER_SEED: u64 = 0x5eed_f00d;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector<T = f64>(Vec<T>);

impl<T: Scalar> DenseVector<T> {
    pub fn new(entries: Vec<T>) -> Self {
        DenseVector(entries)
    }

    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![T::zero(); len])
    }

    /// The `index`-th canonical basis vector scaled by `scale`.
    pub fn basis(len: usize, index: usize, scale: T) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = scale;
        v
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn dot(&self, other: &[T]) -> T {
        dot(&self.0, other)
    }

    pub fn norm2(&self) -> T {
        norm2(&self.0)
    }

    pub fn scaled(&self, alpha: T) -> Self {
        DenseVector(self.0.iter().map(|&v| v * alpha).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> DenseVector<U> {
        DenseVector(self.0.iter().map(|v| U::of(v.to_f64_lossy())).collect())
    }

    pub fn to_f64(&self) -> DenseVector<f64> {
        self.cast()
    }
}

impl<T> Deref for DenseVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for DenseVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(v: Vec<T>) -> Self {
        DenseVector(v)
    }
}

impl<T: Scalar> FromIterator<T> for DenseVector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        DenseVector(iter.into_iter().collect())
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let sum = a.iter().fold(T::zero(), |acc, &v| {
        let r = v / scale;
        acc + r * r
    });
    scale * sum.sqrt()
}

/// The ℓq norm `(Σ|x_i|^q)^{1/q}`, or `max|x_i|` when `q` is infinite.
pub fn lq_norm<T: Scalar>(x: &[T], q: f64) -> Result<T> {
    if q.is_nan() || q < 1.0 {
        return Err(FwError::InvalidParameter(format!("norm exponent q = {q} must be >= 1")));
    }
    let max_abs = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if q.is_infinite() || max_abs == T::zero() {
        return Ok(max_abs);
    }
    if q == 1.0 {
        return Ok(x.iter().fold(T::zero(), |acc, v| acc + v.abs()));
    }
    if q == 2.0 {
        return Ok(norm2(x));
    }
    // Rescale by the largest magnitude so the powers neither overflow nor underflow.
    let qs = T::of(q);
    let sum = x.iter().fold(T::zero(), |acc, &v| acc + (v.abs() / max_abs).powf(qs));
    Ok(max_abs * sum.powf(T::one() / qs))
}

/// Hölder conjugate `q` with `1/p + 1/q = 1`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(DenseMatrix { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { T::zero() })
    }

    /// `scale · left · rightᵀ`.
    pub fn outer(scale: T, left: &[T], right: &[T]) -> Self {
        Self::from_fn(left.len(), right.len(), |i, j| scale * left[i] * right[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_flat(self) -> DenseVector<T> {
        DenseVector(self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `A x`.
    pub fn matvec(&self, x: &[T]) -> Result<DenseVector<T>> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ y`.
    pub fn matvec_transposed(&self, y: &[T]) -> Result<DenseVector<T>> {
        check_dim(self.rows, y.len())?;
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(DenseVector(out))
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..n {
                let ra = row[a];
                if ra == T::zero() {
                    continue;
                }
                for b in a..n {
                    g.data[a * n + b] += ra * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                g.data[a * n + b] = g.data[b * n + a];
            }
        }
        g
    }

    pub fn frobenius_dot(&self, other: &Self) -> Result<T> {
        check_dim(self.data.len(), other.data.len())?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}

/// Least-squares solution of `min ‖Ax − y‖₂` through a Householder QR factorization.
pub fn least_squares(a: &DenseMatrix, y: &[f64]) -> Result<DenseVector> {
    check_dim(a.rows, y.len())?;
    let (m, n) = a.shape();
    if m < n {
        return Err(FwError::RankDeficient { rank: m, cols: n });
    }
    // Column-major working copy: each reflector touches one column at a time.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut rhs = y.to_vec();
    let mut diag = vec![0.0; n];

    for k in 0..n {
        let norm = norm2(&cols[k][k..]);
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in cols.iter_mut().skip(k) {
            let s = 2.0 * dot(&v, &col[k..]) / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let s = 2.0 * dot(&v, &rhs[k..]) / vnorm2;
        for (r, vi) in rhs[k..].iter_mut().zip(&v) {
            *r -= s * vi;
        }
    }

    let largest = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rank = diag.iter().filter(|d| d.abs() >= RANK_TOLERANCE * largest && largest > 0.0).count();
    if rank < n {
        return Err(FwError::RankDeficient { rank, cols: n });
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= cols[j][k] * x[j];
        }
        x[k] = acc / diag[k];
    }
    Ok(DenseVector(x))
}

/// Leading singular value with its unit left and right singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub left: DenseVector,
    pub right: DenseVector,
}

/// Top singular triplet by power iteration on `GᵀG`.
///
/// Stops once `‖Gᵀu − σv‖₂ ≤ tol·σ`; by construction `Gv = σu` holds exactly
/// at the returned pair.
pub fn top_singular_triplet(g: &DenseMatrix, tol: f64, max_iter: usize) -> Result<SingularTriplet> {
    top_singular_triplet_seeded(g, tol, max_iter, DEFAULT_POWER_SEED)
}

pub fn top_singular_triplet_seeded(
    g: &DenseMatrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SingularTriplet> {
    if !(tol > 0.0) {
        return Err(FwError::InvalidParameter(format!("power-iteration tolerance {tol} must be > 0")));
    }
    if !g.is_finite() {
        return Err(FwError::InvalidParameter("matrix has non-finite entries".into()));
    }
    if g.max_abs() == 0.0 {
        return Err(FwError::ZeroMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // All-ones direction with a seeded perturbation, so the start is never
    // exactly orthogonal to the leading right singular vector.
    let mut v: Vec<f64> = (0..g.cols).map(|_| 1.0 + 0.5 * rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);

    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut u = g.matvec(&v)?.into_inner();
        let sigma = norm2(&u);
        if sigma == 0.0 {
            v = (0..g.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut v);
            continue;
        }
        u.iter_mut().for_each(|x| *x /= sigma);
        let z = g.matvec_transposed(&u)?;
        residual = z.iter().zip(&v).map(|(zi, vi)| (zi - sigma * vi).powi(2)).sum::<f64>().sqrt() / sigma;
        if residual <= tol {
            normalize(&mut u);
            return Ok(SingularTriplet { sigma, left: DenseVector(u), right: DenseVector(v) });
        }
        v = z.into_inner();
        normalize(&mut v);
    }
    Err(FwError::NoConvergence { iterations: max_iter, residual })
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// All singular values, descending, by one-sided Jacobi rotations.
///
/// Cubic cost; intended for desk-scale matrices (membership checks on the
/// nuclear-norm ball).
pub fn singular_values(g: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = g.shape();
    // Work on the orientation with fewer columns.
    let (len, mut columns): (usize, Vec<Vec<f64>>) = if rows >= cols {
        (rows, (0..cols).map(|j| (0..rows).map(|i| g.get(i, j)).collect()).collect())
    } else {
        (cols, (0..rows).map(|i| g.row(i).to_vec()).collect())
    };
    let k = columns.len();
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(&columns[p], &columns[p]);
                let beta = dot(&columns[q], &columns[q]);
                let gamma = dot(&columns[p], &columns[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = columns.split_at_mut(q);
                let (cp, cq) = (&mut head[p], &mut tail[0]);
                for i in 0..len {
                    let a = cp[i];
                    let b = cq[i];
                    cp[i] = c * a - s * b;
                    cq[i] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = columns.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn nuclear_norm(g: &DenseMatrix) -> f64 {
    singular_values(g).iter().sum()
}
