//! The Frank-Wolfe loop with per-step instrumentation.

use std::io::Write;

use crate::domains::FeasibleRegion;
use crate::error::{check_dim, FwError, Result};
use crate::linalg::{dot, DenseVector};
use crate::objectives::Objective;
use crate::scalar::Scalar;
use crate::schedules::Schedule;

/// Relative residual of the objective-reduction identity that aborts a run.
pub const IDENTITY_ABORT: f64 = 1e-6;

/// Membership tolerance applied to every checked iterate.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub const CSV_HEADER: &str = "t,eta,f,gap,dual,primaldual,subopt,bregman,identity_residual";

#[derive(Debug, Clone, PartialEq)]
pub struct IterateState<T = f64> {
    pub t: u64,
    pub x: DenseVector<T>,
    pub f_x: T,
    pub grad: DenseVector<T>,
}

impl<T: Scalar> IterateState<T> {
    pub fn new<O: Objective<T> + ?Sized>(obj: &O, t: u64, x: DenseVector<T>) -> Result<Self> {
        check_dim(obj.dim(), x.len())?;
        let f_x = obj.value(&x)?;
        let grad = obj.gradient(&x)?;
        Ok(IterateState { t, x, f_x, grad })
    }
}

/// What happened during a single step from `x_t` to `x_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T = f64> {
    pub t: u64,
    pub eta: T,
    /// `⟨∇f(x_t), x_t − v_t⟩`.
    pub gap: T,
    /// `D_f(x_{t+1}, x_t)`.
    pub bregman: T,
    pub identity_residual: f64,
    pub lmo_tie: bool,
}

/// One Frank-Wolfe iteration with the objective-reduction identity checked.
pub fn fw_step<T, O, R>(
    state: &IterateState<T>,
    schedule: &Schedule,
    region: &R,
    obj: &O,
) -> Result<(IterateState<T>, StepReport<T>)>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
{
    let t = state.t;
    let eta: T = schedule.eta_in(t)?;
    let lmo = region.lmo(&state.grad)?;
    let v = lmo.vertex.to_dense();
    check_dim(state.x.len(), v.len())?;

    let gap = state
        .grad
        .iter()
        .zip(state.x.iter().zip(v.iter()))
        .fold(T::zero(), |acc, (&g, (&x, &v))| acc + g * (x - v));
    let keep = T::one() - eta;
    let next: DenseVector<T> = state.x.iter().zip(v.iter()).map(|(&x, &v)| keep * x + eta * v).collect();

    let next_state = IterateState::new(obj, t + 1, next)?;
    let bregman = obj.bregman(&next_state.x, &state.x)?;

    let predicted = state.f_x - eta * gap + bregman;
    let scale = state
        .f_x
        .abs()
        .max(next_state.f_x.abs())
        .max((eta * gap).abs())
        .max(bregman.abs())
        .to_f64_lossy()
        .max(f64::MIN_POSITIVE);
    let identity_residual = (next_state.f_x - predicted).abs().to_f64_lossy() / scale;
    if !identity_residual.is_finite() || identity_residual > IDENTITY_ABORT {
        return Err(FwError::NumericalInconsistency {
            t,
            detail: format!("objective-reduction identity residual {identity_residual:e} exceeds {IDENTITY_ABORT:e}"),
        });
    }

    let report = StepReport { t, eta, gap, bregman, identity_residual, lmo_tie: lmo.tie };
    Ok((next_state, report))
}

/// Per-iteration measurements, stored in `f64` after differences were formed in working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: u64,
    pub eta: f64,
    pub f_x: f64,
    pub gap: f64,
    /// `f(x_t) − gap_t`, a lower bound on `f*`.
    pub dual_value: f64,
    pub best_dual: f64,
    pub primaldual: f64,
    pub subopt: Option<f64>,
    pub bregman: f64,
    pub identity_residual: f64,
    pub lmo_tie: bool,
}

/// Descriptors echoed into every trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceConfig {
    pub schedule: String,
    pub region: String,
    pub objective: String,
    pub seed: Option<u64>,
    pub precision: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: TraceConfig,
    pub records: Vec<IterationRecord>,
    pub final_point: DenseVector,
    pub final_value: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Writes the per-iteration CSV with 17 significant digits per float.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            let subopt = r.subopt.map(|s| format!("{s:.16e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                r.t, r.eta, r.f_x, r.gap, r.dual_value, r.primaldual, subopt, r.bregman, r.identity_residual
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions<T = f64> {
    /// Starting point; defaults to the oracle vertex for the gradient at the region center.
    pub x0: Option<DenseVector<T>>,
    pub f_star: Option<T>,
    /// Stop once the gap falls to this value.
    pub gap_tolerance: Option<f64>,
    /// Check membership every this many iterations (0 disables).
    pub membership_stride: u64,
    pub seed: Option<u64>,
}

impl<T> Default for RunOptions<T> {
    fn default() -> Self {
        RunOptions { x0: None, f_star: None, gap_tolerance: None, membership_stride: 1, seed: None }
    }
}

pub fn default_start<T, O, R>(obj: &O, region: &R) -> Result<DenseVector<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
{
    let center = region.center();
    let g = obj.gradient(&center)?;
    Ok(region.lmo(&g)?.vertex.to_dense())
}

pub fn fw_run<T, O, R>(obj: &O, region: &R, schedule: &Schedule, iterations: u64, opts: &RunOptions<T>) -> Result<Trace>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
{
    fw_run_observed(obj, region, schedule, iterations, opts, |_, _| {})
}

/// As [`fw_run`], calling `observer` with each iterate and its record.
pub fn fw_run_observed<T, O, R, F>(
    obj: &O,
    region: &R,
    schedule: &Schedule,
    iterations: u64,
    opts: &RunOptions<T>,
    mut observer: F,
) -> Result<Trace>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
    F: FnMut(&IterateState<T>, &IterationRecord),
{
    if iterations == 0 {
        return Err(FwError::InvalidParameter("iteration count must be at least 1".into()));
    }
    check_dim(region.dim(), obj.dim())?;
    let x0 = match &opts.x0 {
        Some(x) => x.clone(),
        None => default_start(obj, region)?,
    };
    check_dim(region.dim(), x0.len())?;
    if opts.membership_stride > 0 && !region.contains(&x0, MEMBERSHIP_TOL)? {
        return Err(FwError::InvalidParameter("starting point lies outside the feasible region".into()));
    }

    let mut state = IterateState::new(obj, 0, x0)?;
    let mut best_dual: Option<T> = None;
    let mut records = Vec::with_capacity(iterations as usize);

    for _ in 0..iterations {
        let (next, step) = fw_step(&state, schedule, region, obj)?;
        let dual = state.f_x - step.gap;
        let best = match best_dual {
            Some(b) if b >= dual => b,
            _ => dual,
        };
        best_dual = Some(best);
        let record = IterationRecord {
            t: state.t,
            eta: step.eta.to_f64_lossy(),
            f_x: state.f_x.to_f64_lossy(),
            gap: step.gap.to_f64_lossy(),
            dual_value: dual.to_f64_lossy(),
            best_dual: best.to_f64_lossy(),
            primaldual: (state.f_x - best).to_f64_lossy(),
            subopt: opts.f_star.map(|fs| (state.f_x - fs).to_f64_lossy()),
            bregman: step.bregman.to_f64_lossy(),
            identity_residual: step.identity_residual,
            lmo_tie: step.lmo_tie,
        };
        observer(&state, &record);
        let stop = opts.gap_tolerance.is_some_and(|tol| record.gap <= tol);
        records.push(record);
        if stop {
            break;
        }
        if opts.membership_stride > 0
            && next.t % opts.membership_stride == 0
            && !region.contains(&next.x, MEMBERSHIP_TOL)?
        {
            return Err(FwError::NumericalInconsistency {
                t: next.t,
                detail: "iterate left the feasible region".into(),
            });
        }
        state = next;
    }

    let final_point = state.x.to_f64();
    let final_value = state.f_x.to_f64_lossy();
    Ok(Trace {
        config: TraceConfig {
            schedule: schedule.label().to_string(),
            region: region.describe(),
            objective: obj.describe(),
            seed: opts.seed,
            precision: if std::any::TypeId::of::<T>() == std::any::TypeId::of::<f64>() {
                "f64".into()
            } else {
                "double-double".into()
            },
        },
        records,
        final_point,
        final_value,
    })
}

/// Bracket on `f*` from a long log-adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptimum {
    /// Smallest observed objective value.
    pub f_star_estimate: f64,
    /// Largest observed dual value; never exceeds the true optimum.
    pub certified_lower: f64,
}

pub fn reference_optimum<O, R>(obj: &O, region: &R, budget: u64) -> Result<ReferenceOptimum>
where
    O: Objective<f64> + ?Sized,
    R: FeasibleRegion<f64> + ?Sized,
{
    if budget < 1000 {
        return Err(FwError::InvalidParameter(format!("reference budget must be at least 1000, got {budget}")));
    }
    let opts = RunOptions { membership_stride: 0, ..RunOptions::default() };
    let trace = fw_run(obj, region, &Schedule::log_adaptive(), budget, &opts)?;
    let f_best = trace.records.iter().map(|r| r.f_x).fold(trace.final_value, f64::min);
    let lower = trace.records.iter().map(|r| r.dual_value).fold(f64::NEG_INFINITY, f64::max);
    Ok(ReferenceOptimum { f_star_estimate: f_best, certified_lower: lower })
}

/// `⟨∇f(x), x − v⟩` at an arbitrary point, for callers outside the loop.
pub fn fw_gap<T, O, R>(obj: &O, region: &R, x: &[T]) -> Result<T>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
{
    let g = obj.gradient(x)?;
    let lmo = region.lmo(&g)?;
    Ok(dot(&g, x) - lmo.inner_product)
}
