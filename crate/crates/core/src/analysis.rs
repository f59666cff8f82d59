//! Growth-property certification, theorem rate envelopes and empirical rate fits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domains::FeasibleRegion;
use crate::error::{FwError, Result};
use crate::linalg::{dot, DenseVector};
use crate::objectives::Objective;
use crate::schedules::Schedule;
use crate::solver::{fw_run_observed, reference_optimum, IterationRecord, RunOptions, Trace};

/// Samples with a gap below this are treated as stationary and skipped.
pub const STATIONARY_GAP: f64 = 1e-12;

/// Relative slack allowed when comparing a trace with a theorem bound.
pub const BOUND_SLACK: f64 = 1e-6;

pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthMode {
    /// `D_f(x + η(v − x), x) <= Mη²/2 · gap(x)^r`.
    Strong,
    /// `D_f(x + η(v − x), x) · subopt(x)^{1−r} <= Mη²/2 · gap(x)`.
    Weak,
}

impl FromStr for GrowthMode {
    type Err = FwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "strong" => Ok(GrowthMode::Strong),
            "weak" => Ok(GrowthMode::Weak),
            other => Err(FwError::InvalidParameter(format!("unknown growth mode '{other}' (strong|weak)"))),
        }
    }
}

impl fmt::Display for GrowthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthMode::Strong => "strong",
            GrowthMode::Weak => "weak",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub n_samples: usize,
    pub n_eta: usize,
    pub seed: u64,
    /// Optimal value for weak mode; estimated by a reference run when absent.
    pub f_star: Option<f64>,
    /// Schedule and length of the run that supplies trajectory samples.
    pub trajectory_schedule: Schedule,
    pub trajectory_len: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            n_samples: 400,
            n_eta: 64,
            seed: 0,
            f_star: None,
            trajectory_schedule: Schedule::log_adaptive(),
            trajectory_len: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCertificate {
    pub mode: GrowthMode,
    pub r: f64,
    pub m_hat: f64,
    /// Non-stationary samples that entered the maximum.
    pub samples: usize,
    pub skipped: usize,
    pub eta_grid: usize,
    pub violations_at_m_hat: usize,
    /// `(sample index, η)` of the largest ratio.
    pub max_ratio_location: (usize, f64),
    pub f_star: Option<f64>,
}

/// `n` logarithmically spaced step sizes on `[1e-4, 1]`.
pub fn eta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 10f64.powf(-4.0 + 4.0 * j as f64 / (n - 1) as f64)).collect()
}

struct Sample {
    x: Vec<f64>,
    v: Vec<f64>,
    gap: f64,
    subopt: f64,
}

fn draw_samples<O, R>(obj: &O, region: &R, opts: &CertifyOptions, f_star: Option<f64>) -> Result<(Vec<Sample>, usize)>
where
    O: Objective<f64> + ?Sized,
    R: FeasibleRegion<f64> + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dim = region.dim();
    let n_random = opts.n_samples / 2;
    let n_traj = opts.n_samples - n_random;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(opts.n_samples);

    for _ in 0..n_random {
        let k = rng.random_range(2..=5usize);
        let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(1e-3..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut x = vec![0.0; dim];
        for w in weights {
            let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let v = region.lmo(&dir)?.vertex.to_dense();
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi += w * vi;
            }
        }
        points.push(x);
    }

    if n_traj > 0 {
        let len = opts.trajectory_len.max(1);
        // Log-uniform picks so that late iterates are represented.
        let mut wanted: Vec<u64> = (0..n_traj)
            .map(|_| {
                let u: f64 = rng.random_range(0.0..1.0);
                ((len as f64).powf(u) - 1.0).floor() as u64
            })
            .collect();
        wanted.sort_unstable();
        let mut picked = Vec::with_capacity(n_traj);
        let run_opts = RunOptions { membership_stride: 0, ..RunOptions::default() };
        let mut cursor = 0;
        fw_run_observed(obj, region, &opts.trajectory_schedule, len, &run_opts, |state, _| {
            while cursor < wanted.len() && wanted[cursor] == state.t {
                picked.push(state.x.clone().into_inner());
                cursor += 1;
            }
        })?;
        points.extend(picked);
    }

    let mut samples = Vec::with_capacity(points.len());
    let mut skipped = 0;
    for x in points {
        let g = obj.gradient(&x)?;
        let v = region.lmo(&g)?.vertex.to_dense().into_inner();
        let diff: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
        let gap = dot(&g, &diff);
        if gap < STATIONARY_GAP {
            skipped += 1;
            continue;
        }
        let subopt = match f_star {
            Some(fs) => (obj.value(&x)? - fs).max(0.0),
            None => f64::NAN,
        };
        samples.push(Sample { x, v, gap, subopt });
    }
    Ok((samples, skipped))
}

fn growth_ratio<O: Objective<f64> + ?Sized>(obj: &O, s: &Sample, eta: f64, mode: GrowthMode, r: f64) -> Result<f64> {
    let y: DenseVector = s.x.iter().zip(&s.v).map(|(&x, &v)| x + eta * (v - x)).collect();
    let d = obj.bregman(&y, &s.x)?.max(0.0);
    Ok(match mode {
        GrowthMode::Strong => 2.0 * d / (eta * eta * s.gap.powf(r)),
        GrowthMode::Weak => 2.0 * d * s.subopt.powf(1.0 - r) / (eta * eta * s.gap),
    })
}

fn validate_certify(mode: GrowthMode, r: f64, opts: &CertifyOptions) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(FwError::InvalidParameter(format!("growth exponent r must lie in [0, 1], got {r}")));
    }
    if mode == GrowthMode::Weak && r >= 1.0 {
        return Err(FwError::InvalidParameter("weak growth needs r < 1".into()));
    }
    if opts.n_samples < 10 || opts.n_eta < 10 {
        return Err(FwError::InvalidParameter("certification needs at least 10 samples and 10 step sizes".into()));
    }
    Ok(())
}

fn resolve_f_star<O, R>(obj: &O, region: &R, mode: GrowthMode, opts: &CertifyOptions) -> Result<Option<f64>>
where
    O: Objective<f64> + ?Sized,
    R: FeasibleRegion<f64> + ?Sized,
{
    match (mode, opts.f_star) {
        (_, Some(fs)) => Ok(Some(fs)),
        (GrowthMode::Weak, None) => Ok(Some(reference_optimum(obj, region, 10_000)?.f_star_estimate)),
        (GrowthMode::Strong, None) => Ok(None),
    }
}

/// Smallest `M` satisfying the sampled growth inequality.
pub fn certify_growth<O, R>(obj: &O, region: &R, mode: GrowthMode, r: f64, opts: &CertifyOptions) -> Result<GrowthCertificate>
where
    O: Objective<f64> + ?Sized,
    R: FeasibleRegion<f64> + ?Sized,
{
    validate_certify(mode, r, opts)?;
    let f_star = resolve_f_star(obj, region, mode, opts)?;
    let (samples, skipped) = draw_samples(obj, region, opts, f_star)?;
    if samples.is_empty() {
        return Err(FwError::DegenerateInstance(format!(
            "all {skipped} samples are stationary (gap below {STATIONARY_GAP:e})"
        )));
    }
    let grid = eta_grid(opts.n_eta);
    let mut m_hat = 0.0f64;
    let mut location = (0, grid[0]);
    let mut ratios = Vec::with_capacity(samples.len() * grid.len());
    for (idx, s) in samples.iter().enumerate() {
        for &eta in &grid {
            let ratio = growth_ratio(obj, s, eta, mode, r)?;
            if !ratio.is_finite() {
                return Err(FwError::NumericalInconsistency { t: 0, detail: format!("growth ratio {ratio} at sample {idx}") });
            }
            if ratio > m_hat {
                m_hat = ratio;
                location = (idx, eta);
            }
            ratios.push(ratio);
        }
    }
    if m_hat <= 0.0 {
        return Err(FwError::DegenerateInstance("objective has no curvature along any sampled step".into()));
    }
    let violations_at_m_hat = ratios.iter().filter(|&&q| q > m_hat).count();
    Ok(GrowthCertificate {
        mode,
        r,
        m_hat,
        samples: samples.len(),
        skipped,
        eta_grid: grid.len(),
        violations_at_m_hat,
        max_ratio_location: location,
        f_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Revalidation {
    pub pairs: usize,
    pub violations: usize,
    pub margin: f64,
}

impl Revalidation {
    pub fn rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.violations as f64 / self.pairs as f64
        }
    }
}

/// Re-checks a certificate on a fresh sample set against `margin · M_hat`.
pub fn revalidate_certificate<O, R>(
    obj: &O,
    region: &R,
    cert: &GrowthCertificate,
    opts: &CertifyOptions,
    margin: f64,
) -> Result<Revalidation>
where
    O: Objective<f64> + ?Sized,
    R: FeasibleRegion<f64> + ?Sized,
{
    validate_certify(cert.mode, cert.r, opts)?;
    let f_star = match cert.f_star {
        Some(fs) => Some(fs),
        None => resolve_f_star(obj, region, cert.mode, opts)?,
    };
    let (samples, _) = draw_samples(obj, region, opts, f_star)?;
    let threshold = margin * cert.m_hat;
    let grid = eta_grid(opts.n_eta);
    let mut pairs = 0;
    let mut violations = 0;
    for s in &samples {
        for &eta in &grid {
            pairs += 1;
            if growth_ratio(obj, s, eta, cert.mode, cert.r)? > threshold {
                violations += 1;
            }
        }
    }
    Ok(Revalidation { pairs, violations, margin })
}

/// Parameters of a theorem rate bound.
#[derive(Debug, Clone)]
pub struct RateEnvelope {
    pub mode: GrowthMode,
    pub s: u64,
    pub epsilon: f64,
    pub k: f64,
    pub m: f64,
    pub r: f64,
    pub schedule: Schedule,
}

/// `min{g(S) − ε, 1/(1−r)}`, additionally capped at 2 in weak mode.
pub fn envelope_exponent(mode: GrowthMode, g_s: f64, epsilon: f64, r: f64) -> f64 {
    let k = (g_s - epsilon).min(1.0 / (1.0 - r));
    match mode {
        GrowthMode::Strong => k,
        GrowthMode::Weak => k.min(2.0),
    }
}

impl RateEnvelope {
    pub fn new(mode: GrowthMode, schedule: Schedule, s: u64, epsilon: f64, m: f64, r: f64) -> Result<Self> {
        if s < 1 {
            return Err(FwError::InvalidParameter("S must be at least 1".into()));
        }
        let g_s = schedule.g(s)?;
        if !(epsilon > 0.0 && epsilon < g_s) {
            return Err(FwError::InvalidParameter(format!("ε = {epsilon} must lie in ]0, g(S)[ = ]0, {g_s}[")));
        }
        if !(0.0..1.0).contains(&r) {
            return Err(FwError::InvalidParameter(format!("rate envelopes need r in [0, 1[, got {r}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(FwError::InvalidParameter(format!("M must be positive, got {m}")));
        }
        let k = envelope_exponent(mode, g_s, epsilon, r);
        Ok(RateEnvelope { mode, s, epsilon, k, m, r, schedule })
    }

    pub fn strong(schedule: Schedule, s: u64, epsilon: f64, m: f64, r: f64) -> Result<Self> {
        Self::new(GrowthMode::Strong, schedule, s, epsilon, m, r)
    }

    pub fn weak(schedule: Schedule, s: u64, epsilon: f64, m: f64, r: f64) -> Result<Self> {
        Self::new(GrowthMode::Weak, schedule, s, epsilon, m, r)
    }

    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(self.mode, self.schedule.clone(), self.s, self.epsilon, m, self.r)
    }

    /// Envelope value at `t` given the measure at `S`.
    pub fn bound(&self, value_at_s: f64, t: u64) -> Result<f64> {
        if t < self.s {
            return Err(FwError::InvalidParameter(format!("bound needs t >= S = {}, got {t}", self.s)));
        }
        let g_s = self.schedule.g(self.s)?;
        let eta_prev = self.schedule.eta(t - 1)?;
        let eta_s_prev = self.schedule.eta(self.s - 1)?;
        let contraction = value_at_s * (eta_prev / eta_s_prev).powf(g_s - self.epsilon);
        let base = (self.m * self.schedule.g(t - 1)? / (2.0 * self.epsilon)).powf(1.0 / (1.0 - self.r));
        let coefficient = match self.mode {
            GrowthMode::Strong => base,
            GrowthMode::Weak => base + self.m / 2.0,
        };
        Ok(contraction.max(coefficient * eta_prev.powf(self.k)))
    }
}

/// Primal-dual bound under strong growth.
pub fn strong_rate_bound(env: &RateEnvelope, primaldual_s: f64, t: u64) -> Result<f64> {
    if env.mode != GrowthMode::Strong {
        return Err(FwError::InvalidParameter("envelope was built for weak growth".into()));
    }
    env.bound(primaldual_s, t)
}

/// Suboptimality bound under strong (M,0) and weak (M,r) growth.
pub fn weak_rate_bound(env: &RateEnvelope, subopt_s: f64, t: u64) -> Result<f64> {
    if env.mode != GrowthMode::Weak {
        return Err(FwError::InvalidParameter("envelope was built for strong growth".into()));
    }
    env.bound(subopt_s, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Gap,
    PrimalDual,
    Subopt,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Gap, Measure::PrimalDual, Measure::Subopt];

    pub fn of(&self, record: &IterationRecord) -> Option<f64> {
        match self {
            Measure::Gap => Some(record.gap),
            Measure::PrimalDual => Some(record.primaldual),
            Measure::Subopt => record.subopt,
        }
    }
}

impl FromStr for Measure {
    type Err = FwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gap" => Ok(Measure::Gap),
            "primaldual" => Ok(Measure::PrimalDual),
            "subopt" => Ok(Measure::Subopt),
            other => Err(FwError::InvalidParameter(format!("unknown measure '{other}'"))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Gap => "gap",
            Measure::PrimalDual => "primaldual",
            Measure::Subopt => "subopt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub t: u64,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares each `t ∈ [S, last]` of a trace with the envelope.
pub fn check_trace_against_bound(trace: &Trace, env: &RateEnvelope, measure: Measure) -> Result<BoundReport> {
    let at = |t: u64| -> Result<f64> {
        let rec = trace
            .records
            .get(t as usize)
            .ok_or(FwError::InsufficientData { found: trace.len(), required: t as usize + 1 })?;
        measure
            .of(rec)
            .ok_or_else(|| FwError::InvalidParameter(format!("trace has no {measure} values (missing f*)")))
    };
    let value_at_s = at(env.s)?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for t in env.s..trace.len() as u64 {
        let measured = at(t)?;
        let bound = env.bound(value_at_s, t)?;
        checked += 1;
        if measured > bound * (1.0 + BOUND_SLACK) {
            violations.push(BoundViolation { t, measured, bound });
        }
    }
    Ok(BoundReport { checked, violations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub window: (u64, u64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Ordinary least squares of `ln m` on `ln t` over positive, finite values.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<(f64, f64, f64, usize)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, m)| *t > 0.0 && *m > 0.0 && m.is_finite())
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    let n = logs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(FwError::InsufficientData { found: n, required: MIN_FIT_SAMPLES });
    }
    let nf = n as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope, intercept, r_squared, n))
}

pub fn fit_rate_slope(trace: &Trace, measure: Measure, t_lo: u64, t_hi: u64) -> Result<SlopeFit> {
    if t_lo < 1 || t_hi <= 2 * t_lo {
        return Err(FwError::InvalidParameter(format!("fit window [{t_lo}, {t_hi}] needs t_lo >= 1 and t_hi > 2·t_lo")));
    }
    if t_hi as usize > trace.len() {
        return Err(FwError::InvalidParameter(format!("fit window ends at {t_hi} beyond trace length {}", trace.len())));
    }
    let points: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter(|r| r.t >= t_lo && r.t <= t_hi)
        .filter_map(|r| measure.of(r).map(|m| (r.t as f64, m)))
        .collect();
    let (slope, intercept, r_squared, samples) = fit_power_law(&points)?;
    Ok(SlopeFit { window: (t_lo, t_hi), slope, intercept, r_squared, samples })
}
