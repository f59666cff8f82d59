//! Synthetic regression instances and closed-form optima for identity designs.

use fw_core::linalg::{least_squares, lq_norm};
use fw_core::{DenseMatrix, DenseVector, FwError, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::Design;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub a: DenseMatrix,
    pub y: Vec<f64>,
    pub x_unc: DenseVector,
}

pub fn synth_regression(seed: u64, m: usize, n: usize, design: Design) -> fw_core::Result<SynthInstance> {
    if n == 0 || m < n {
        return Err(FwError::InvalidParameter(format!("synthetic regression needs m >= n >= 1, got m={m}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match design {
        Design::Identity => {
            if m != n {
                return Err(FwError::InvalidParameter("identity design needs m = n".into()));
            }
            let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            Ok(SynthInstance { a: DenseMatrix::identity(n), x_unc: y.clone().into(), y })
        }
        Design::Gaussian => {
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
            let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let x_unc = least_squares(&a, &y)?;
            Ok(SynthInstance { a, y, x_unc })
        }
    }
}

/// Minimizer and value of `½‖x − y‖²` over `{‖x‖_p <= β}`, in working precision.
pub fn identity_lp_optimum<T: Scalar>(y: &[f64], p: f64, beta: f64) -> fw_core::Result<(DenseVector<T>, T)> {
    if !(p > 1.0 && p.is_finite() && beta > 0.0) {
        return Err(FwError::InvalidParameter(format!("need 1 < p < ∞ and β > 0, got p={p}, β={beta}")));
    }
    let yt: Vec<T> = y.iter().map(|&v| T::of(v)).collect();
    let half = T::of(0.5);
    let beta_t = T::of(beta);
    if lq_norm(&yt, p)? <= beta_t {
        return Ok((yt.into(), T::zero()));
    }
    let x: Vec<T> = if p == 2.0 {
        let norm = lq_norm(&yt, 2.0)?;
        yt.iter().map(|&v| beta_t * v / norm).collect()
    } else {
        boundary_projection(&yt, p, beta_t)
    };
    let value = x.iter().zip(&yt).fold(T::zero(), |acc, (&a, &b)| acc + half * (a - b) * (a - b));
    Ok((x.into(), value))
}

/// Solves the stationarity system `z_i + μ p z_i^{p−1} = |y_i|`, `Σ z_i^p = β^p` by nested bisection.
fn boundary_projection<T: Scalar>(y: &[T], p: f64, beta: T) -> Vec<T> {
    let pt = T::of(p);
    let pm1 = T::of(p - 1.0);
    let target = beta.powf(pt);
    let mags: Vec<T> = y.iter().map(|v| v.abs()).collect();
    let solve = |mu: T| -> Vec<T> {
        let c = mu * pt;
        mags.iter()
            .map(|&a| {
                if a == T::zero() {
                    return T::zero();
                }
                let (mut lo, mut hi) = (T::zero(), a);
                for _ in 0..200 {
                    let mid = T::of(0.5) * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if mid + c * mid.powf(pm1) > a {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                T::of(0.5) * (lo + hi)
            })
            .collect()
    };
    let mass = |z: &[T]| z.iter().fold(T::zero(), |acc, &v| acc + v.powf(pt));
    let mut hi = T::one();
    while mass(&solve(hi)) > target {
        hi *= T::of(2.0);
    }
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = T::of(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(&solve(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = solve(T::of(0.5) * (lo + hi));
    z.into_iter().zip(y).map(|(zi, &yi)| zi * yi.signum()).collect()
}
