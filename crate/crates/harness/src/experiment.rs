//! End-to-end experiment runs: build the instance, run each schedule, write traces and summaries.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fw_core::analysis::{certify_growth, revalidate_certificate, CertifyOptions, Revalidation};
use fw_core::linalg::lq_norm;
use fw_core::{
    fit_rate_slope, fw_run, reference_optimum, DenseMatrix, DenseVector, DoubleDouble, FeasibleRegion,
    GrowthCertificate, GrowthMode, LpBall, Measure, NuclearBall, Objective, Precision, RegressionObjective,
    RunOptions, Scalar, Trace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{Design, ExperimentConfig, ProblemConfig};
use crate::data::{load_dense_csv, load_movielens, Subsample};
use crate::error::{HarnessError, Result};
use crate::synth::{identity_lp_optimum, synth_regression};
use fw_core::CompletionObjective;

pub const SUMMARY_HEADER: &str = "schedule,measure,final_value,slope,r_squared";
pub const GUIDE_HEADER: &str = "t,t_pow_minus_2";

/// Where the optimal value used for `subopt` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FStarSource {
    Analytic,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub kind: String,
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub region: String,
    pub objective: String,
    pub dim: usize,
    pub beta: f64,
    pub f_star: f64,
    pub f_star_source: FStarSource,
    /// Dual lower bound from the reference run, when one was made.
    pub f_star_lower: Option<f64>,
    pub start_seed: u64,
    pub fit_window: (u64, u64),
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub schedule: String,
    pub measure: Measure,
    pub final_value: Option<f64>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest: Manifest,
    pub traces: Vec<Trace>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn trace(&self, schedule: &str) -> Option<&Trace> {
        self.traces.iter().find(|t| t.config.schedule == schedule)
    }

    pub fn summary_row(&self, schedule: &str, measure: Measure) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.schedule == schedule && r.measure == measure)
    }
}

/// A resolved problem instance in f64, before precision dispatch.
pub enum Instance {
    Regression {
        a: DenseMatrix,
        y: Vec<f64>,
        /// Set for synthetic identity designs, where the optimum is known in closed form.
        identity: bool,
        region: LpBall,
    },
    Completion { objective: CompletionObjective, region: NuclearBall },
}

impl Instance {
    pub fn dim(&self) -> usize {
        match self {
            Instance::Regression { a, .. } => a.cols(),
            Instance::Completion { objective, .. } => objective.dim(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Instance::Regression { region, .. } => region.beta(),
            Instance::Completion { region, .. } => region.beta(),
        }
    }

    pub fn describe(&self) -> (String, String) {
        match self {
            Instance::Regression { a, y, region, .. } => {
                let obj = RegressionObjective::<f64>::from_f64(a, y).map(|o| o.describe()).unwrap_or_default();
                (FeasibleRegion::<f64>::describe(region), obj)
            }
            Instance::Completion { objective, region } => (region.describe(), objective.describe()),
        }
    }
}

/// Loads or generates the data and resolves the radius.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    cfg.validate()?;
    let region_cfg = &cfg.region;
    match &cfg.problem {
        ProblemConfig::Synthetic { seed, m, n, design } => {
            let s = synth_regression(*seed, *m, *n, *design)?;
            let beta = resolve_beta(cfg, &s.x_unc)?;
            let region = LpBall::new(region_cfg.p, beta, s.a.cols())?;
            Ok(Instance::Regression { a: s.a, y: s.y, identity: *design == Design::Identity, region })
        }
        ProblemConfig::Regression { path, target } => {
            let bundle = load_dense_csv(path, target)?;
            let x_unc = fw_core::linalg::least_squares(&bundle.a, &bundle.y)?;
            let beta = resolve_beta(cfg, &x_unc)?;
            let region = LpBall::new(region_cfg.p, beta, bundle.a.cols())?;
            Ok(Instance::Regression { a: bundle.a, y: bundle.y, identity: false, region })
        }
        ProblemConfig::Completion { path, max_users, max_items, subsample_seed } => {
            let subsample = match (max_users, max_items) {
                (None, None) => None,
                (u, i) => Some(Subsample {
                    max_users: u.unwrap_or(usize::MAX),
                    max_items: i.unwrap_or(usize::MAX),
                    seed: *subsample_seed,
                }),
            };
            let bundle = load_movielens(path, subsample)?;
            let objective = CompletionObjective::new(bundle.observed, bundle.rows, bundle.cols)?;
            let beta = region_cfg.beta.ok_or_else(|| HarnessError::Config("completion needs region.beta".into()))?;
            let region = NuclearBall::new(beta, bundle.rows, bundle.cols)?;
            Ok(Instance::Completion { objective, region })
        }
    }
}

/// `β = factor·‖x_unc‖_p` under the factor policy, else the configured value.
pub fn resolve_beta(cfg: &ExperimentConfig, x_unc: &[f64]) -> Result<f64> {
    let beta = match (cfg.region.beta, cfg.region.beta_factor) {
        (Some(b), None) => b,
        (None, Some(f)) => f * lq_norm(x_unc, cfg.region.p)?,
        _ => return Err(HarnessError::Config("exactly one of region.beta and region.beta_factor is required".into())),
    };
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(HarnessError::Data(format!("resolved radius {beta} is not positive (x_unc = 0?)")));
    }
    Ok(beta)
}

/// Tail window `[max(10, T/100), T]` used for slope fits.
pub fn fit_window(horizon: u64) -> (u64, u64) {
    ((horizon / 100).max(10), horizon)
}

/// File-name-safe schedule label: `fixed:2` becomes `fixed-2`.
pub fn trace_file_name(label: &str) -> String {
    let safe: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '-' }).collect();
    format!("trace_{safe}.csv")
}

/// Mixed into the start seed so the start direction never replays the synthetic data stream.
const START_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Oracle vertex for a seeded Gaussian direction; shared by every schedule of a run.
pub fn random_vertex<T, R>(region: &R, seed: u64) -> Result<DenseVector<T>>
where
    T: Scalar,
    R: FeasibleRegion<T> + ?Sized,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ START_STREAM);
    let d: Vec<T> = (0..region.dim()).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    Ok(region.lmo(&d)?.vertex.to_dense())
}

struct Solved {
    traces: Vec<Trace>,
    f_star: f64,
    source: FStarSource,
    lower: Option<f64>,
}

fn run_regression<T: Scalar>(
    cfg: &ExperimentConfig,
    a: &DenseMatrix,
    y: &[f64],
    identity: bool,
    region: &LpBall,
) -> Result<Solved> {
    let (f_star, source, lower): (T, FStarSource, Option<f64>) = if identity {
        let (_, v) = identity_lp_optimum::<T>(y, region.p(), region.beta())?;
        (v, FStarSource::Analytic, None)
    } else {
        let obj64 = RegressionObjective::from_f64(a, y)?;
        let r = reference_optimum(&obj64, region, cfg.run.reference_budget)?;
        (T::of(r.f_star_estimate), FStarSource::Reference, Some(r.certified_lower))
    };
    let obj = RegressionObjective::<T>::from_f64(a, y)?;
    let x0 = random_vertex::<T, _>(region, cfg.run.seed)?;
    let traces = run_schedules(cfg, &obj, region, x0, f_star)?;
    Ok(Solved { traces, f_star: f_star.to_f64_lossy(), source, lower })
}

fn run_schedules<T, O, R>(cfg: &ExperimentConfig, obj: &O, region: &R, x0: DenseVector<T>, f_star: T) -> Result<Vec<Trace>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    R: FeasibleRegion<T> + ?Sized,
{
    let opts = RunOptions {
        x0: Some(x0),
        f_star: Some(f_star),
        gap_tolerance: None,
        membership_stride: cfg.run.membership_stride,
        seed: Some(cfg.run.seed),
    };
    cfg.schedules()?
        .iter()
        .map(|s| fw_run(obj, region, s, cfg.run.horizon, &opts).map_err(HarnessError::from))
        .collect()
}

fn solve(cfg: &ExperimentConfig, instance: &Instance) -> Result<Solved> {
    match instance {
        Instance::Regression { a, y, identity, region } => match cfg.precision()? {
            Precision::Double => run_regression::<f64>(cfg, a, y, *identity, region),
            Precision::DoubleDouble => run_regression::<DoubleDouble>(cfg, a, y, *identity, region),
        },
        Instance::Completion { objective, region } => {
            let r = reference_optimum(objective, region, cfg.run.reference_budget)?;
            let x0 = random_vertex::<f64, _>(region, cfg.run.seed)?;
            let traces = run_schedules(cfg, objective, region, x0, r.f_star_estimate)?;
            Ok(Solved { traces, f_star: r.f_star_estimate, source: FStarSource::Reference, lower: Some(r.certified_lower) })
        }
    }
}

pub fn summarize(traces: &[Trace], window: (u64, u64)) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for trace in traces {
        for measure in Measure::ALL {
            let final_value = trace.last().and_then(|r| measure.of(r));
            let fit = fit_rate_slope(trace, measure, window.0, window.1).ok();
            rows.push(SummaryRow {
                schedule: trace.config.schedule.clone(),
                measure,
                final_value,
                slope: fit.map(|f| f.slope),
                r_squared: fit.map(|f| f.r_squared),
            });
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Tracks files written so far and deletes them unless the run completes.
struct OutputGuard {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    done: bool,
}

impl OutputGuard {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(OutputGuard { dir: dir.to_path_buf(), created_dir, files: Vec::new(), done: false })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        let file = fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| HarnessError::io(&path, e))
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs every configured schedule and writes traces, `summary.csv`, `guide.csv` and `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let instance = build_instance(cfg)?;
    let solved = solve(cfg, &instance)?;
    let window = fit_window(cfg.run.horizon);
    let summary = summarize(&solved.traces, window);

    let mut guard = OutputGuard::new(&cfg.run.out)?;
    let mut outputs = Vec::new();
    for trace in &solved.traces {
        let name = trace_file_name(&trace.config.schedule);
        guard.write(&name, |w| trace.write_csv(w))?;
        outputs.push(OutputFile { kind: "trace".into(), file: name, schedule: Some(trace.config.schedule.clone()) });
    }
    guard.write("summary.csv", |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for r in &summary {
            writeln!(w, "{},{},{},{},{}", r.schedule, r.measure, opt(r.final_value), opt(r.slope), opt(r.r_squared))?;
        }
        Ok(())
    })?;
    outputs.push(OutputFile { kind: "summary".into(), file: "summary.csv".into(), schedule: None });
    guard.write("guide.csv", |w| {
        writeln!(w, "{GUIDE_HEADER}")?;
        for t in window.0..=window.1 {
            let ratio = window.0 as f64 / t as f64;
            writeln!(w, "{t},{:.16e}", ratio * ratio)?;
        }
        Ok(())
    })?;
    outputs.push(OutputFile { kind: "guide".into(), file: "guide.csv".into(), schedule: None });

    let (region, objective) = instance.describe();
    let manifest = Manifest {
        config: cfg.clone(),
        region,
        objective,
        dim: instance.dim(),
        beta: instance.beta(),
        f_star: solved.f_star,
        f_star_source: solved.source,
        f_star_lower: solved.lower,
        start_seed: cfg.run.seed,
        fit_window: window,
        outputs,
    };
    guard.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;
    guard.done = true;
    Ok(ExperimentOutput { manifest, traces: solved.traces, summary })
}

/// Sampled growth certificate for a configured instance, re-checked on a fresh seed.
#[derive(Debug, Clone)]
pub struct CertifyOutput {
    pub certificate: GrowthCertificate,
    pub revalidation: Revalidation,
}

pub const REVALIDATION_MARGIN: f64 = 1.05;

pub fn run_certify(cfg: &ExperimentConfig, mode: GrowthMode, r: f64, samples: usize, seed: u64) -> Result<CertifyOutput> {
    let instance = build_instance(cfg)?;
    let mut opts = CertifyOptions { n_samples: samples, seed, ..CertifyOptions::default() };
    let certify = |obj: &dyn Objective<f64>, region: &dyn FeasibleRegion<f64>, opts: &mut CertifyOptions| {
        let certificate = certify_growth(obj, region, mode, r, opts)?;
        let fresh = CertifyOptions { seed: seed.wrapping_add(1), ..opts.clone() };
        let revalidation = revalidate_certificate(obj, region, &certificate, &fresh, REVALIDATION_MARGIN)?;
        Ok::<_, HarnessError>(CertifyOutput { certificate, revalidation })
    };
    match &instance {
        Instance::Regression { a, y, identity, region } => {
            if *identity && mode == GrowthMode::Weak {
                opts.f_star = Some(identity_lp_optimum::<f64>(y, region.p(), region.beta())?.1);
            }
            let obj = RegressionObjective::from_f64(a, y)?;
            certify(&obj, region, &mut opts)
        }
        Instance::Completion { objective, region } => certify(objective, region, &mut opts),
    }
}

/// Writes a certificate as `key,value` rows.
pub fn write_certificate(path: &Path, out: &CertifyOutput) -> Result<()> {
    let c = &out.certificate;
    let rows = [
        ("mode", c.mode.to_string()),
        ("r", format!("{}", c.r)),
        ("m_hat", format!("{:.16e}", c.m_hat)),
        ("samples", c.samples.to_string()),
        ("skipped", c.skipped.to_string()),
        ("eta_grid", c.eta_grid.to_string()),
        ("violations_at_m_hat", c.violations_at_m_hat.to_string()),
        ("max_ratio_sample", c.max_ratio_location.0.to_string()),
        ("max_ratio_eta", format!("{:.16e}", c.max_ratio_location.1)),
        ("f_star", opt(c.f_star)),
        ("revalidation_margin", format!("{}", out.revalidation.margin)),
        ("revalidation_pairs", out.revalidation.pairs.to_string()),
        ("revalidation_violations", out.revalidation.violations.to_string()),
    ];
    let mut body = String::from("key,value\n");
    for (k, v) in rows {
        body.push_str(&format!("{k},{v}\n"));
    }
    fs::write(path, body).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_and_file_names() {
        assert_eq!(fit_window(10_000), (100, 10_000));
        assert_eq!(fit_window(500), (10, 500));
        assert_eq!(trace_file_name("fixed:2"), "trace_fixed-2.csv");
        assert_eq!(trace_file_name("fixed:2.5"), "trace_fixed-2.5.csv");
        assert_eq!(trace_file_name("logadaptive"), "trace_logadaptive.csv");
    }

    #[test]
    fn beta_factor_resolution() {
        let mut cfg = ExperimentConfig::from_toml_str(
            "[problem]\nkind = \"synthetic\"\nm = 20\nn = 20\ndesign = \"identity\"\n[region]\np = 5.0\nbeta_factor = 0.5\n",
        )
        .unwrap();
        let inst = build_instance(&cfg).unwrap();
        let Instance::Regression { y, .. } = &inst else { panic!() };
        let expected = 0.5 * lq_norm(y, 5.0).unwrap();
        assert!((inst.beta() - expected).abs() <= 1e-12 * expected);
        cfg.region.beta_factor = None;
        cfg.region.beta = Some(3.0);
        assert_eq!(build_instance(&cfg).unwrap().beta(), 3.0);
    }

    #[test]
    fn random_vertex_is_on_the_boundary() {
        let ball = LpBall::new(3.0, 2.0, 6).unwrap();
        let v = random_vertex::<f64, _>(&ball, 5).unwrap();
        assert!((lq_norm(&v, 3.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(v, random_vertex::<f64, _>(&ball, 5).unwrap());
    }
}
