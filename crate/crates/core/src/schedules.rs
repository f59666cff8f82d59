//! Open-loop step-size rules `η_t = g(t) / (t + g(t))`.
//!
//! Two families are built in: fixed `g(t) = ℓ` and log-adaptive
//! `g(t) = 2 + ln(t + 1)`. Arbitrary `g` can be supplied as a closure; since
//! such a function can only be probed pointwise, the monotonicity assumptions
//! are validated up to an explicit horizon ([`validate_assumptions`]).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{FwError, Result};
use crate::scalar::Scalar;

/// Smallest admissible value of `g`.
pub const G_MIN: f64 = 2.0;

/// Relative slack granted to the cumulative-product comparison.
pub const PRODUCT_SLACK: f64 = 1e-12;

pub type GFn = Arc<dyn Fn(u64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ScheduleKind {
    Fixed(f64),
    LogAdaptive,
    Custom(GFn),
}

impl fmt::Debug for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Fixed(l) => f.debug_tuple("Fixed").field(l).finish(),
            ScheduleKind::LogAdaptive => f.write_str("LogAdaptive"),
            ScheduleKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A step-size rule defined by its function `g`.
#[derive(Clone, Debug)]
pub struct Schedule {
    kind: ScheduleKind,
    label: String,
}

impl Schedule {
    /// `g(t) = ℓ`, i.e. `η_t = ℓ / (t + ℓ)`.
    pub fn fixed(ell: f64) -> Result<Self> {
        if !ell.is_finite() || ell < G_MIN {
            return Err(FwError::InvalidParameter(format!("fixed schedule needs ℓ >= 2, got {ell}")));
        }
        Ok(Schedule { kind: ScheduleKind::Fixed(ell), label: format!("fixed:{ell}") })
    }

    /// `g(t) = 2 + ln(t + 1)`.
    pub fn log_adaptive() -> Self {
        Schedule { kind: ScheduleKind::LogAdaptive, label: "logadaptive".into() }
    }

    pub fn custom(label: impl Into<String>, g: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Schedule { kind: ScheduleKind::Custom(Arc::new(g)), label: label.into() }
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn g(&self, t: u64) -> Result<f64> {
        let value = match &self.kind {
            ScheduleKind::Fixed(ell) => return Ok(*ell),
            ScheduleKind::LogAdaptive => return Ok(2.0 + (t as f64).ln_1p()),
            ScheduleKind::Custom(g) => g(t),
        };
        if value.is_finite() && value >= G_MIN {
            Ok(value)
        } else {
            Err(FwError::InvalidSchedule { label: self.label.clone(), t, value })
        }
    }

    pub fn eta(&self, t: u64) -> Result<f64> {
        let g = self.g(t)?;
        Ok(g / (t as f64 + g))
    }

    /// `η_t` evaluated in the scalar type `T` (with `g(t)` taken from `f64`).
    pub fn eta_in<T: Scalar>(&self, t: u64) -> Result<T> {
        let g = T::of(self.g(t)?);
        Ok(g / (T::of(t as f64) + g))
    }

    /// One factor `1 − (1 − ε/g(i))·η_i` of the cumulative product.
    pub fn product_factor(&self, i: u64, epsilon: f64) -> Result<f64> {
        let g = self.g(i)?;
        Ok(1.0 - (1.0 - epsilon / g) * (g / (i as f64 + g)))
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for Schedule {
    type Err = FwError;

    /// Parses `fixed:<ℓ>` or `logadaptive`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("logadaptive") {
            return Ok(Schedule::log_adaptive());
        }
        match s.split_once(':') {
            Some(("fixed", ell)) => {
                let ell: f64 = ell
                    .trim()
                    .parse()
                    .map_err(|_| FwError::InvalidParameter(format!("bad fixed schedule parameter in '{s}'")))?;
                Schedule::fixed(ell)
            }
            _ => Err(FwError::InvalidParameter(format!(
                "unknown schedule '{s}' (expected fixed:<l> or logadaptive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// `g` is non-decreasing.
    A1,
    /// `t / g(t) <= (t+1) / g(t+1)`, equivalently `η` is non-increasing.
    A2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionViolation {
    pub assumption: Assumption,
    pub t: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub t_max: u64,
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub first_violation: Option<AssumptionViolation>,
}

/// Checks A1 and A2 for every `t < t_max`.
pub fn validate_assumptions(schedule: &Schedule, t_max: u64) -> Result<AssumptionReport> {
    if t_max < 1 {
        return Err(FwError::InvalidParameter("t_max must be >= 1".into()));
    }
    let mut report = AssumptionReport { t_max, a1_ok: true, a2_ok: true, first_violation: None };
    let mut g_prev = schedule.g(0)?;
    for t in 0..t_max {
        let g_next = schedule.g(t + 1)?;
        let mut record = |assumption, lhs, rhs| {
            if report.first_violation.is_none() {
                report.first_violation = Some(AssumptionViolation { assumption, t, lhs, rhs });
            }
        };
        if g_prev > g_next {
            report.a1_ok = false;
            record(Assumption::A1, g_prev, g_next);
        }
        let lhs = t as f64 / g_prev;
        let rhs = (t + 1) as f64 / g_next;
        if lhs > rhs {
            report.a2_ok = false;
            record(Assumption::A2, lhs, rhs);
        }
        g_prev = g_next;
    }
    Ok(report)
}

/// Outcome of one evaluation of the cumulative-product bound
/// `∏_{i=S}^{t} (1 − (1 − ε/g(i))·η_i) <= (η_t / η_{S−1})^{g(S) − ε}`.
///
/// Both sides are accumulated and compared in log space; `lhs`/`rhs` are the
/// exponentiated values and may underflow to zero for long horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBoundCheck {
    pub s: u64,
    pub epsilon: f64,
    pub t: u64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Incremental evaluation of the product bound for `t = S, S+1, …, t_max`.
pub struct ProductSweep<'a> {
    schedule: &'a Schedule,
    s: u64,
    epsilon: f64,
    exponent: f64,
    log_eta_before: f64,
    next_t: u64,
    t_max: u64,
    log_lhs: f64,
}

pub fn cumulative_product_sweep(schedule: &Schedule, s: u64, epsilon: f64, t_max: u64) -> Result<ProductSweep<'_>> {
    if s < 1 || s > t_max {
        return Err(FwError::InvalidParameter(format!("need 1 <= S <= t, got S = {s}, t = {t_max}")));
    }
    let g_s = schedule.g(s)?;
    if !(epsilon > 0.0 && epsilon < g_s) {
        return Err(FwError::InvalidParameter(format!("epsilon = {epsilon} must lie in ]0, g(S) = {g_s}[")));
    }
    let log_eta_before = schedule.eta(s - 1)?.ln();
    Ok(ProductSweep {
        schedule,
        s,
        epsilon,
        exponent: g_s - epsilon,
        log_eta_before,
        next_t: s,
        t_max,
        log_lhs: 0.0,
    })
}

impl Iterator for ProductSweep<'_> {
    type Item = Result<ProductBoundCheck>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_t > self.t_max {
            return None;
        }
        let t = self.next_t;
        self.next_t += 1;
        let g = match self.schedule.g(t) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let tf = t as f64;
        // The factor equals (t + ε) / (t + g(t)).
        self.log_lhs += ((self.epsilon - g) / (tf + g)).ln_1p();
        let log_eta_t = g.ln() - (tf + g).ln();
        let log_rhs = self.exponent * (log_eta_t - self.log_eta_before);
        // lhs <= rhs·(1 + slack)
        let satisfied = self.log_lhs <= log_rhs + PRODUCT_SLACK.ln_1p();
        Some(Ok(ProductBoundCheck {
            s: self.s,
            epsilon: self.epsilon,
            t,
            log_lhs: self.log_lhs,
            log_rhs,
            lhs: self.log_lhs.exp(),
            rhs: log_rhs.exp(),
            satisfied,
        }))
    }
}

pub fn cumulative_product_check(schedule: &Schedule, s: u64, epsilon: f64, t: u64) -> Result<ProductBoundCheck> {
    let mut last = None;
    for check in cumulative_product_sweep(schedule, s, epsilon, t)? {
        last = Some(check?);
    }
    Ok(last.expect("sweep over S..=t is nonempty"))
}
