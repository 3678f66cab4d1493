//! End-to-end experiment driver: configuration, presets, artifacts.
//!
//! An [`ExperimentConfig`] names a space, a signal, a sampling rule and a
//! solver. [`run_experiment`] samples the signal, reconstructs it and
//! measures the error on a grid; [`ExperimentOutcome::write`] emits the
//! CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SolveInfo;
use crate::metrics::{errors_from_values, eval_grid, ErrorReport};
use crate::presets;
use crate::recon::{
    adaptive_weights_reconstruct, project_quadrature, synthesize_at, Coefficients, LsqReconstructor, SampledData,
};
use crate::sampling::{adaptive_weights, coverage, gen_gap_set, gen_rho_set, verify_sufficiency, GroupCheck, SamplingSet, SufficiencyReport};
use crate::signals::{full_random_signal, sparse_random_signal, ChirpParams, GwChirp};
use crate::wilson::{BandwidthSeq, BasisSet, SpaceDoc, SpaceMode, SpaceSpec};
use crate::window::WindowKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SignalConfig {
    /// Random coefficients on the top frequency of each slot.
    Sparse { seed: u64 },
    /// Random coefficients on every basis element.
    Full { seed: u64 },
    Chirp(ChirpParams<f64>),
    Gw(GwChirp<f64>),
}

impl SignalConfig {
    fn in_space(&self) -> bool {
        matches!(self, SignalConfig::Sparse { .. } | SignalConfig::Full { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    /// Points spaced exactly at the gap bound.
    Gap,
    /// `⌊ρμ⌋ + 1` equispaced points per half-integer cell.
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub kind: SamplingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Extra sampling range on both sides of the interval.
    #[serde(default)]
    pub margin: f64,
    /// Explicit cells `[k_min, k_max]`; overrides the margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<[i64; 2]>,
}

impl SamplingConfig {
    pub fn cells(&self, interval: (f64, f64)) -> RangeInclusive<i64> {
        match self.coverage {
            Some([lo, hi]) => lo..=hi,
            None => coverage(interval, self.margin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Lsq,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Neumann terms for the adaptive method.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Quadrature step for cell integrals and projections.
    #[serde(default = "default_step")]
    pub quad_step: f64,
    /// Rank tolerance; `None` picks `max(m, n)·ε·σ_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::Lsq, iterations: default_iterations(), quad_step: default_step(), tol: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default = "default_step")]
    pub step: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { step: default_step() }
    }
}

fn default_iterations() -> usize {
    200
}

fn default_step() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub space: SpaceDoc,
    pub signal: SignalConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.space.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::EmptyInterval(a, b));
        }
        let m = self.sampling.margin;
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidParameter(format!("extension margin must be non-negative, got {m}")));
        }
        if let Some([lo, hi]) = self.sampling.coverage {
            if lo > hi {
                return Err(Error::InvalidParameter(format!("coverage {lo}:{hi} is empty")));
            }
        }
        if self.sampling.kind == SamplingKind::Rho {
            match self.sampling.rho {
                Some(r) if r.is_finite() && r > 0.0 => {}
                Some(r) => return Err(Error::InvalidParameter(format!("rho must be positive, got {r}"))),
                None => return Err(Error::Config("sampling kind 'rho' needs a rho value".into())),
            }
        }
        for (what, v) in [("quadrature step", self.solver.quad_step), ("evaluation step", self.eval.step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")));
            }
        }
        if self.solver.method == SolverMethod::Adaptive && self.solver.iterations == 0 {
            return Err(Error::InvalidParameter("adaptive solver needs at least one iteration".into()));
        }
        match &self.signal {
            SignalConfig::Chirp(p) => p.validate()?,
            SignalConfig::Gw(g) => {
                // Projections integrate over the full window support past β.
                let reach = b + self.space.window.build::<f64>().half_width();
                let end = ((*self.sampling.cells((a, b)).end() + 1) as f64 * 0.5).max(reach);
                if !(g.t0 > end) {
                    return Err(Error::InvalidParameter(format!(
                        "coalescence time {} must lie beyond the sampled range ending at {end}",
                        g.t0
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn spec(&self) -> SpaceSpec<f64> {
        self.space.to_spec()
    }
}

fn doc(spec: &SpaceSpec<f64>) -> SpaceDoc {
    SpaceDoc {
        interval: [spec.interval.0, spec.interval.1],
        mode: spec.mode,
        window: WindowKind::Cosine,
        bandwidths: spec.bandwidths.clone(),
    }
}

fn gap(margin: f64) -> SamplingConfig {
    SamplingConfig { kind: SamplingKind::Gap, rho: None, margin, coverage: None }
}

fn config(name: &str, spec: SpaceSpec<f64>, signal: SignalConfig, sampling: SamplingConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        space: doc(&spec),
        signal,
        sampling,
        solver: SolverConfig::default(),
        eval: EvalConfig::default(),
        output: None,
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 10] = [
    "paper-5.1-sparse",
    "paper-5.1-full",
    "paper-5.2-boundary",
    "paper-5.2-extended",
    "paper-5.3-chirp",
    "small-sparse",
    "small-full",
    "small-boundary",
    "small-extended",
    "small-chirp",
];

/// Built-in configurations. The `paper-*` ones run on `[0, 6]` with the
/// realized bandwidth sequences from [`presets`]; the `small-*` ones are
/// scaled-down analogues on `[0, 3]`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use SignalConfig::*;
    let cfg = match name {
        "paper-5.1-sparse" => config(name, presets::paper_sparse_space(), Sparse { seed: 1 }, gap(0.0)),
        "paper-5.1-full" => config(name, presets::paper_sparse_space(), Full { seed: 2 }, gap(0.0)),
        "paper-5.2-boundary" => config(name, presets::paper_extended_space(), Sparse { seed: 3 }, gap(0.0)),
        "paper-5.2-extended" => config(name, presets::paper_extended_space(), Sparse { seed: 3 }, gap(0.5)),
        "paper-5.3-chirp" => config(name, presets::paper_chirp_space(), Chirp(presets::paper_chirp()), gap(0.5)),
        "small-sparse" => config(name, presets::small_sparse_space(), Sparse { seed: 1 }, gap(0.0)),
        "small-full" => config(name, presets::small_sparse_space(), Full { seed: 2 }, gap(0.0)),
        "small-boundary" => config(name, presets::small_extended_space(), Sparse { seed: 3 }, gap(0.0)),
        "small-extended" => config(name, presets::small_extended_space(), Sparse { seed: 3 }, gap(0.5)),
        "small-chirp" => config(name, presets::small_chirp_space(), Chirp(presets::small_chirp()), gap(0.5)),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(cfg)
}

/// A signal ready for evaluation, with its exact coefficients when it lies
/// in the space.
pub enum Signal {
    InSpace { basis: BasisSet, coefficients: Coefficients<f64>, spec: SpaceSpec<f64> },
    Chirp(ChirpParams<f64>),
    Gw(GwChirp<f64>),
}

impl Signal {
    pub fn build(cfg: &SignalConfig, spec: &SpaceSpec<f64>) -> Result<Self> {
        Ok(match cfg {
            SignalConfig::Sparse { seed } => {
                let basis = spec.enumerate()?;
                let coefficients = sparse_random_signal(&basis, *seed);
                Signal::InSpace { basis, coefficients, spec: spec.clone() }
            }
            SignalConfig::Full { seed } => {
                let basis = spec.enumerate()?;
                let coefficients = full_random_signal(&basis, *seed);
                Signal::InSpace { basis, coefficients, spec: spec.clone() }
            }
            SignalConfig::Chirp(p) => {
                p.validate()?;
                Signal::Chirp(*p)
            }
            SignalConfig::Gw(g) => Signal::Gw(*g),
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            Signal::InSpace { basis, coefficients, spec } => {
                Ok(synthesize_at(coefficients.values(), basis, &spec.window, x))
            }
            Signal::Chirp(p) => Ok(p.eval(x)),
            Signal::Gw(g) => g.eval(x),
        }
    }

    pub fn eval_all(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SufficiencySummary {
    pub constant_d: f64,
    /// `(D/π)·max δμ`; below one means the strict condition holds.
    pub gamma: f64,
    pub all_pass: bool,
    pub all_strict: bool,
    pub literal_offsets_ok: bool,
    pub failures: usize,
    pub groups: Vec<GroupCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub method: SolverMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info: Option<SolveInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
}

/// Max pointwise error near the ends of the interval against the middle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionErrors {
    /// Over `[α, α + 1/2) ∪ [β - 1/2, β)`.
    pub boundary_max: f64,
    /// Over `[α + 1, β - 1)`.
    pub interior_max: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub points: usize,
    /// Oversampling `points / dim`.
    pub q: f64,
    /// Half-integer cells sampled, `[k_min, k_max]`.
    pub coverage: [i64; 2],
    pub sufficiency: SufficiencySummary,
    pub solver: SolverReport,
    pub errors: ErrorReport,
    /// Error of the quadrature projection, for signals outside the space.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_errors: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionErrors>,
    /// `‖c̃ - c‖/‖c‖` for signals generated in the space.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient_error: Option<f64>,
}

pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub basis: BasisSet,
    pub samples: SamplingSet<f64>,
    pub sample_values: Vec<f64>,
    pub coefficients: Coefficients<f64>,
    pub grid: Vec<f64>,
    pub reference: Vec<f64>,
    pub approx: Vec<f64>,
    pub report: ExperimentReport,
}

impl ExperimentOutcome {
    /// Writes `samples.csv`, `coefficients.csv`, `reconstruction.csv`,
    /// `errors.json` and `report.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join("samples.csv"))?);
        writeln!(out, "k,j,x,value")?;
        let mut it = self.sample_values.iter();
        for (k, pts) in self.samples.groups() {
            for (j, x) in pts.iter().enumerate() {
                let v = it.next().expect("one value per sample");
                writeln!(out, "{k},{j},{x:?},{v:?}")?;
            }
        }
        out.flush()?;

        let out = BufWriter::new(File::create(dir.join("coefficients.csv"))?);
        self.coefficients.write_csv(&self.basis, out)?;

        let mut out = BufWriter::new(File::create(dir.join("reconstruction.csv"))?);
        writeln!(out, "x,f,f_tilde,diff")?;
        for ((x, f), g) in self.grid.iter().zip(&self.reference).zip(&self.approx) {
            writeln!(out, "{x:?},{f:?},{g:?},{:?}", g - f)?;
        }
        out.flush()?;

        write_json(&dir.join("errors.json"), &self.report.errors)?;
        write_json(&dir.join("report.json"), &self.report)
    }
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Sampling set for `cfg` on the cells covering the interval plus margin.
pub fn sampling_set(cfg: &ExperimentConfig, spec: &SpaceSpec<f64>) -> Result<SamplingSet<f64>> {
    let cov = cfg.sampling.cells(spec.interval);
    match cfg.sampling.kind {
        SamplingKind::Gap => gen_gap_set(spec, cov),
        SamplingKind::Rho => {
            let rho = cfg.sampling.rho.ok_or_else(|| Error::Config("sampling kind 'rho' needs a rho value".into()))?;
            gen_rho_set(spec, cov, rho)
        }
    }
}

fn region_errors(interval: (f64, f64), grid: &[f64], diff: impl Fn(usize) -> f64) -> Option<RegionErrors> {
    let (a, b) = interval;
    if b - a <= 2.0 {
        return None;
    }
    let (mut boundary_max, mut interior_max) = (0.0f64, 0.0f64);
    for (i, &x) in grid.iter().enumerate() {
        let e = diff(i);
        if x < a + 0.5 || x >= b - 0.5 {
            boundary_max = boundary_max.max(e);
        } else if x >= a + 1.0 && x < b - 1.0 {
            interior_max = interior_max.max(e);
        }
    }
    Some(RegionErrors { boundary_max, interior_max, ratio: boundary_max / interior_max })
}

impl From<SufficiencyReport> for SufficiencySummary {
    fn from(r: SufficiencyReport) -> Self {
        Self {
            constant_d: r.constant_d,
            gamma: r.gamma(),
            all_pass: r.all_pass(),
            all_strict: r.all_strict(),
            literal_offsets_ok: r.groups.iter().all(|g| g.literal_offsets_ok),
            failures: r.failures().count(),
            groups: r.groups,
        }
    }
}

/// Runs the configured solver on given samples and values.
pub fn solve_samples(
    cfg: &ExperimentConfig,
    spec: &SpaceSpec<f64>,
    basis: &BasisSet,
    samples: &SamplingSet<f64>,
    values: &[f64],
) -> Result<(Coefficients<f64>, SolverReport)> {
    let points = samples.points();
    match cfg.solver.method {
        SolverMethod::Lsq => {
            let lsq = LsqReconstructor::new(&points, basis, &spec.window, cfg.solver.tol)?;
            let c = lsq.solve(values)?;
            let info = lsq.info().clone();
            Ok((c, SolverReport { method: SolverMethod::Lsq, info: Some(info), iterations: None, residual_history: Vec::new() }))
        }
        SolverMethod::Adaptive => {
            let data = SampledData::new(points, values.to_vec())?;
            let weights = adaptive_weights(samples);
            let res = adaptive_weights_reconstruct(
                &data,
                &weights,
                basis,
                &spec.window,
                cfg.solver.iterations,
                cfg.solver.quad_step,
            )?;
            let report = SolverReport {
                method: SolverMethod::Adaptive,
                info: None,
                iterations: Some(res.iterations),
                residual_history: res.residual_history,
            };
            Ok((res.coefficients, report))
        }
    }
}

/// Samples, reconstructs and measures one configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let spec = cfg.spec();
    let basis = spec.enumerate()?;
    let signal = Signal::build(&cfg.signal, &spec)?;

    let cov = cfg.sampling.cells(spec.interval);
    let samples = sampling_set(cfg, &spec)?;
    let sufficiency = verify_sufficiency(&samples, &spec, cov.clone());
    let points = samples.points();
    let sample_values = signal.eval_all(&points)?;

    let (coefficients, solver) = solve_samples(cfg, &spec, &basis, &samples, &sample_values)?;

    let grid = eval_grid(spec.interval, cfg.eval.step)?;
    let reference = signal.eval_all(&grid)?;
    let approx: Vec<f64> = grid.iter().map(|&x| synthesize_at(coefficients.values(), &basis, &spec.window, x)).collect();
    let mut errors = errors_from_values(&reference, &approx)?;
    errors.grid_step = cfg.eval.step;
    errors.interval = [spec.interval.0, spec.interval.1];

    let projection_errors = if cfg.signal.in_space() {
        None
    } else {
        let pc = project_quadrature(|x| signal.eval(x).unwrap_or(0.0), &basis, &spec.window, cfg.solver.quad_step)?;
        let proj: Vec<f64> = grid.iter().map(|&x| synthesize_at(pc.values(), &basis, &spec.window, x)).collect();
        let mut e = errors_from_values(&reference, &proj)?;
        e.grid_step = cfg.eval.step;
        e.interval = errors.interval;
        Some(e)
    };
    let regions = region_errors(spec.interval, &grid, |i| (approx[i] - reference[i]).abs());
    let coefficient_error = match &signal {
        Signal::InSpace { coefficients: truth, .. } => Some(coefficients.relative_error(truth)),
        _ => None,
    };

    let dim = basis.len();
    let report = ExperimentReport {
        name: cfg.name.clone(),
        dim,
        points: samples.len(),
        q: samples.len() as f64 / dim as f64,
        coverage: [*cov.start(), *cov.end()],
        sufficiency: sufficiency.into(),
        solver,
        errors,
        projection_errors,
        regions,
        coefficient_error,
    };
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        basis,
        samples,
        sample_values,
        coefficients,
        grid,
        reference,
        approx,
        report,
    })
}

/// One row of a ρ sweep. Failed runs keep their error message and leave the
/// measurements empty.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub points: Option<usize>,
    pub q: Option<f64>,
    pub e2: Option<f64>,
    pub einf: Option<f64>,
    pub error: Option<String>,
}

/// Reruns `cfg` with `ρ`-sets for every entry of `rhos`, in order.
pub fn rho_sweep(cfg: &ExperimentConfig, rhos: &[f64]) -> Result<Vec<SweepRow>> {
    if rhos.is_empty() {
        return Err(Error::InvalidParameter("rho list is empty".into()));
    }
    if let Some(r) = rhos.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {r}")));
    }
    Ok(rhos
        .iter()
        .map(|&rho| {
            let mut c = cfg.clone();
            c.sampling.kind = SamplingKind::Rho;
            c.sampling.rho = Some(rho);
            match run_experiment(&c) {
                Ok(o) => SweepRow {
                    rho,
                    points: Some(o.report.points),
                    q: Some(o.report.q),
                    e2: Some(o.report.errors.e2),
                    einf: Some(o.report.errors.einf),
                    error: None,
                },
                Err(e) => SweepRow { rho, points: None, q: None, e2: None, einf: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// `rho,points,q,e2,einf,status` with a header; failed rows carry the
/// error text in `status`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    fn cell<T: std::fmt::Debug>(v: &Option<T>) -> String {
        v.as_ref().map(|v| format!("{v:?}")).unwrap_or_default()
    }
    writeln!(out, "rho,points,q,e2,einf,status")?;
    for r in rows {
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"{}\"", e.replace('"', "'")),
        };
        writeln!(out, "{:?},{},{},{},{},{status}", r.rho, cell(&r.points), cell(&r.q), cell(&r.e2), cell(&r.einf))?;
    }
    Ok(())
}

/// A space document with the given bandwidths and the cosine window.
pub fn space_doc(interval: [f64; 2], mode: SpaceMode, bandwidths: BandwidthSeq) -> SpaceDoc {
    SpaceDoc { interval, mode, window: WindowKind::Cosine, bandwidths }
}
