use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use vbwilson::experiment::{
    self, preset, rho_sweep, run_experiment, solve_samples, write_sweep_csv, ExperimentConfig, SamplingConfig,
    SamplingKind, Signal, SignalConfig, SolverMethod, SufficiencySummary, PRESETS,
};
use vbwilson::metrics::{eval_grid, relative_errors, spectrogram, SpectrogramParams};
use vbwilson::recon::{project_quadrature, synthesize_at, Coefficients};
use vbwilson::sampling::{verify_sufficiency, SamplingSet};
use vbwilson::signals::{ChirpParams, GwChirp};
use vbwilson::space::{average_bandwidth, beurling_lower_density, necessary_count, KernelEvaluator};
use vbwilson::{presets, BandwidthSeq, SpaceMode, SpaceSpec, Window, WindowKind};

#[derive(Parser)]
#[command(name = "vbwilson", version, about = "Variable-bandwidth Wilson spaces: sampling and reconstruction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Window constants and orthonormality defect.
    VerifyWindow(VerifyWindowArgs),
    /// Space dimensions.
    Dims(DimsArgs),
    /// Evaluate the configured signal on a grid.
    GenSignal(GenSignalArgs),
    /// Generate a sampling set and check the gap condition.
    GenSamples(GenSamplesArgs),
    /// Reconstruct from samples and write all artifacts.
    Reconstruct(ReconstructArgs),
    /// Orthogonal projection of the signal by quadrature.
    Project(ProjectArgs),
    /// Reconstruction errors over a list of ρ values.
    RhoSweep(RhoSweepArgs),
    /// Short-time Fourier magnitudes as long-form CSV.
    Spectrogram(SpectrogramArgs),
    /// Kernel diagonal and density estimates.
    DensityReport(DensityArgs),
    /// Run an experiment from a config file or preset.
    Run(RunArgs),
    /// Print the resolved experiment config as JSON.
    Config(ConfigArgs),
    /// List built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalKind {
    Sparse,
    Full,
    Chirp,
    Gw,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Interior,
    Overlapping,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Gap,
    Rho,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Lsq,
    Adaptive,
}

/// Configuration source plus per-field overrides.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (see `presets`).
    #[arg(long)]
    preset: Option<String>,

    /// Interval as `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Bandwidths as `offset:b0,b1,...`.
    #[arg(long, allow_hyphen_values = true)]
    bandwidths: Option<String>,

    #[arg(long, value_enum)]
    signal: Option<SignalKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chirp duration T.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi0: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long = "omega-t")]
    omega_t: Option<f64>,
    /// Gravitational-wave chirp amplitude.
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Coalescence time.
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,

    #[arg(long, value_enum)]
    sampling: Option<SamplingArg>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Sampling extension beyond both ends of the interval.
    #[arg(long, allow_hyphen_values = true)]
    margin: Option<f64>,
    /// Sampled half-integer cells as `kmin:kmax`.
    #[arg(long, allow_hyphen_values = true)]
    coverage: Option<String>,

    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    quad_step: Option<f64>,
    /// Rank tolerance for least squares.
    #[arg(long)]
    tol: Option<f64>,
    /// Evaluation grid step.
    #[arg(long)]
    step: Option<f64>,
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("{what} must look like a:b, got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<T>().map_err(|_| anyhow!("bad {what} '{s}'"));
    Ok((p(a)?, p(b)?))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("bad number '{v}' in '{s}'"))).collect()
}

fn parse_bandwidths(s: &str) -> Result<BandwidthSeq> {
    let (offset, values) = s.split_once(':').ok_or_else(|| anyhow!("bandwidths must look like offset:b0,b1,..."))?;
    let offset: i64 = offset.trim().parse().map_err(|_| anyhow!("bad bandwidth offset '{offset}'"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|_| anyhow!("bad bandwidth '{v}'")))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandwidthSeq::new(offset, values))
}

impl ConfigArgs {
    fn base(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
            (Some(path), None) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(serde_json::from_str(&text).map_err(vbwilson::Error::from)?)
            }
            (None, Some(name)) => Ok(preset(name)?),
            (None, None) => {
                let (Some(_), Some(_)) = (&self.interval, &self.bandwidths) else {
                    bail!("give --config, --preset, or both --interval and --bandwidths");
                };
                Ok(ExperimentConfig {
                    name: None,
                    space: experiment::space_doc([0.0, 1.0], SpaceMode::Interior, BandwidthSeq::zero()),
                    signal: SignalConfig::Sparse { seed: 0 },
                    sampling: SamplingConfig { kind: SamplingKind::Gap, rho: None, margin: 0.0, coverage: None },
                    solver: Default::default(),
                    eval: Default::default(),
                    output: None,
                })
            }
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.base()?;
        if let Some(s) = &self.interval {
            let (a, b) = parse_pair::<f64>(s, "interval")?;
            cfg.space.interval = [a, b];
        }
        if let Some(m) = self.mode {
            cfg.space.mode = match m {
                ModeArg::Interior => SpaceMode::Interior,
                ModeArg::Overlapping => SpaceMode::Overlapping,
            };
        }
        if let Some(s) = &self.bandwidths {
            cfg.space.bandwidths = parse_bandwidths(s)?;
        }
        self.apply_signal(&mut cfg)?;

        if let Some(k) = self.sampling {
            cfg.sampling.kind = match k {
                SamplingArg::Gap => SamplingKind::Gap,
                SamplingArg::Rho => SamplingKind::Rho,
            };
        }
        if let Some(r) = self.rho {
            cfg.sampling.rho = Some(r);
        }
        if let Some(m) = self.margin {
            cfg.sampling.margin = m;
        }
        if let Some(s) = &self.coverage {
            let (lo, hi) = parse_pair::<i64>(s, "coverage")?;
            cfg.sampling.coverage = Some([lo, hi]);
        }
        if let Some(m) = self.solver {
            cfg.solver.method = match m {
                SolverArg::Lsq => SolverMethod::Lsq,
                SolverArg::Adaptive => SolverMethod::Adaptive,
            };
        }
        if let Some(n) = self.iterations {
            cfg.solver.iterations = n;
        }
        if let Some(h) = self.quad_step {
            cfg.solver.quad_step = h;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol = Some(t);
        }
        if let Some(h) = self.step {
            cfg.eval.step = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_signal(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        let seed_of = |s: &SignalConfig| match s {
            SignalConfig::Sparse { seed } | SignalConfig::Full { seed } => *seed,
            _ => 0,
        };
        if let Some(kind) = self.signal {
            let seed = seed_of(&cfg.signal);
            cfg.signal = match (kind, &cfg.signal) {
                (SignalKind::Sparse, _) => SignalConfig::Sparse { seed },
                (SignalKind::Full, _) => SignalConfig::Full { seed },
                (SignalKind::Chirp, SignalConfig::Chirp(p)) => SignalConfig::Chirp(*p),
                (SignalKind::Chirp, _) => SignalConfig::Chirp(presets::paper_chirp()),
                (SignalKind::Gw, SignalConfig::Gw(g)) => SignalConfig::Gw(*g),
                (SignalKind::Gw, _) => {
                    let t0 = self.t0.ok_or_else(|| anyhow!("--signal gw needs --t0"))?;
                    SignalConfig::Gw(GwChirp::new(1.0, 100.0, t0))
                }
            };
        }
        let chirp_flags = [self.duration, self.phi0, self.omega0, self.omega_t];
        let gw_flags = [self.amplitude, self.omega, self.t0, self.phi];
        match &mut cfg.signal {
            SignalConfig::Sparse { seed } | SignalConfig::Full { seed } => {
                if let Some(s) = self.seed {
                    *seed = s;
                }
            }
            SignalConfig::Chirp(p) => {
                let ChirpParams { duration, phi0, omega0, omega_t } = p;
                for (slot, v) in [duration, phi0, omega0, omega_t].into_iter().zip(chirp_flags) {
                    if let Some(v) = v {
                        *slot = v;
                    }
                }
            }
            SignalConfig::Gw(g) => {
                let GwChirp { amplitude, omega, t0, phi } = g;
                for (slot, v) in [amplitude, omega, t0, phi].into_iter().zip(gw_flags) {
                    if let Some(v) = v {
                        *slot = v;
                    }
                }
            }
        }
        let is_chirp = matches!(cfg.signal, SignalConfig::Chirp(_));
        let is_gw = matches!(cfg.signal, SignalConfig::Gw(_));
        if !is_chirp && chirp_flags.iter().any(Option::is_some) {
            bail!("--duration/--phi0/--omega0/--omega-t apply to chirp signals only");
        }
        if !is_gw && gw_flags.iter().any(Option::is_some) {
            bail!("--amplitude/--omega/--t0/--phi apply to gw signals only");
        }
        if self.seed.is_some() && (is_chirp || is_gw) {
            bail!("--seed applies to sparse and full signals only");
        }
        Ok(())
    }
}

#[derive(Args)]
struct VerifyWindowArgs {
    #[arg(long, default_value = "cosine")]
    window: String,
    /// Translates checked on each side.
    #[arg(long, default_value_t = 3)]
    k_range: usize,
    #[arg(long, default_value_t = 1e-4)]
    grid_step: f64,
    /// Defect above which the command fails.
    #[arg(long, default_value_t = 1e-12)]
    max_defect: f64,
}

#[derive(Args)]
struct DimsArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Report every built-in preset.
    #[arg(long)]
    all: bool,
}

#[derive(Args)]
struct GenSignalArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Grid range `a:b` (default: the interval).
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// CSV destination (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the exact coefficients of in-space signals.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

#[derive(Args)]
struct GenSamplesArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// CSV destination (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Add the signal's values as a fourth column.
    #[arg(long)]
    values: bool,
    /// Write the full sufficiency report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Samples CSV with columns k,j,x,value; without it the configured
    /// signal is sampled.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, short, default_value = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, short, default_value = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct RhoSweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated ρ values.
    #[arg(long, conflicts_with = "rho_range")]
    rhos: Option<String>,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    rho_range: Option<String>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Use the expansion with these coefficients instead of the signal.
    #[arg(long)]
    coefficients: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    win_len: f64,
    #[arg(long, default_value_t = 0.01)]
    hop: f64,
    #[arg(long, default_value_t = 4096)]
    fft_size: usize,
    #[arg(long)]
    max_freq: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated window radii.
    #[arg(long, default_value = "0.5,1,2,3")]
    radii: String,
    /// Step of the kernel-diagonal grid.
    #[arg(long, default_value_t = 1e-3)]
    kernel_step: f64,
    /// Kernel diagonal CSV (x, k(x,x)) over the interval.
    #[arg(long)]
    kernel_out: Option<PathBuf>,
    /// Density JSON destination (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config (alternative to --config/--preset).
    file: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Artifact directory (default: the config's output, else `out/<name>`).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    out.flush()?;
    Ok(())
}

fn write_json_file(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let mut w = writer(Some(path))?;
    writeln!(w, "{}", serde_json::to_string_pretty(v)?)?;
    w.flush()?;
    Ok(())
}

fn range_or(spec: &SpaceSpec<f64>, range: &Option<String>) -> Result<(f64, f64)> {
    match range {
        Some(s) => parse_pair(s, "range"),
        None => Ok(spec.interval),
    }
}

fn verify_window(a: VerifyWindowArgs) -> Result<()> {
    let kind: WindowKind = serde_json::from_value(json!(a.window)).map_err(|_| anyhow!("unknown window '{}'", a.window))?;
    let w: Window<f64> = kind.build();
    let defect = w.orthonormality_defect(a.k_range, a.grid_step)?;
    let d = w.sufficiency_constant();
    print_json(&json!({
        "window": w.name(),
        "half_width": w.half_width(),
        "sup_norm": w.sup_norm(),
        "deriv_sup_norm": w.deriv_sup_norm(),
        "constant_d": d,
        "d_over_pi": d / std::f64::consts::PI,
        "defect": defect,
        "ok": defect <= a.max_defect,
    }))?;
    if defect > a.max_defect {
        bail!("orthonormality defect {defect:e} exceeds {:e}", a.max_defect);
    }
    Ok(())
}

fn dims_of(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let spec = cfg.spec();
    Ok(json!({
        "name": cfg.name,
        "interval": cfg.space.interval,
        "mode": cfg.space.mode,
        "dim": spec.dim()?,
        "interior_dim": spec.with_mode(SpaceMode::Interior).dim()?,
        "overlapping_dim": spec.with_mode(SpaceMode::Overlapping).dim()?,
        "bandwidth_total": spec.bandwidths.total(),
    }))
}

fn dims(a: DimsArgs) -> Result<()> {
    if a.all {
        let rows = PRESETS.iter().map(|p| dims_of(&preset(p)?)).collect::<Result<Vec<_>>>()?;
        return print_json(&json!(rows));
    }
    print_json(&dims_of(&a.cfg.resolve()?)?)
}

fn gen_signal(a: GenSignalArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let spec = cfg.spec();
    let signal = Signal::build(&cfg.signal, &spec)?;
    let grid = eval_grid(range_or(&spec, &a.range)?, cfg.eval.step)?;
    let values = signal.eval_all(&grid)?;
    let mut w = writer(a.out.as_deref())?;
    writeln!(w, "x,value")?;
    for (x, v) in grid.iter().zip(&values) {
        writeln!(w, "{x:?},{v:?}")?;
    }
    w.flush()?;
    if let Some(path) = &a.coefficients {
        let Signal::InSpace { basis, coefficients, .. } = &signal else {
            bail!("--coefficients needs a sparse or full signal");
        };
        let mut w = writer(Some(path))?;
        coefficients.write_csv(basis, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn gen_samples(a: GenSamplesArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let spec = cfg.spec();
    let cells = cfg.sampling.cells(spec.interval);
    let set = experiment::sampling_set(&cfg, &spec)?;
    let report = verify_sufficiency(&set, &spec, cells.clone());
    {
        let mut w = writer(a.out.as_deref())?;
        if a.values {
            let signal = Signal::build(&cfg.signal, &spec)?;
            writeln!(w, "k,j,x,value")?;
            for (k, pts) in set.groups() {
                for (j, &x) in pts.iter().enumerate() {
                    writeln!(w, "{k},{j},{x:?},{:?}", signal.eval(x)?)?;
                }
            }
        } else {
            set.write_csv(&mut w)?;
        }
        w.flush()?;
    }
    if let Some(path) = &a.report {
        write_json_file(path, &report)?;
    }
    if a.out.is_some() {
        let dim = spec.dim()?;
        let summary = SufficiencySummary::from(report);
        print_json(&json!({
            "points": set.len(),
            "dim": dim,
            "q": set.len() as f64 / dim as f64,
            "coverage": [cells.start(), cells.end()],
            "gamma": summary.gamma,
            "all_pass": summary.all_pass,
            "all_strict": summary.all_strict,
        }))?;
    }
    Ok(())
}

/// Reads `k,j,x,value` rows.
fn read_samples(path: &Path) -> Result<(SamplingSet<f64>, Vec<f64>)> {
    let file = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut groups: Vec<(i64, Vec<f64>)> = Vec::new();
    let mut values = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('k')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || anyhow!("{} line {}: expected k,j,x,value", path.display(), i + 1);
        if cols.len() != 4 {
            return Err(bad());
        }
        let k: i64 = cols[0].parse().map_err(|_| bad())?;
        let x: f64 = cols[2].parse().map_err(|_| bad())?;
        let v: f64 = cols[3].parse().map_err(|_| bad())?;
        match groups.last_mut() {
            Some((kk, pts)) if *kk == k => pts.push(x),
            _ => groups.push((k, vec![x])),
        }
        values.push(v);
    }
    Ok((SamplingSet::new(groups)?, values))
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let Some(path) = &a.samples else {
        let out = run_experiment(&cfg)?;
        out.write(&a.output)?;
        return print_summary(&out, &a.output);
    };
    let spec = cfg.spec();
    let basis = spec.enumerate()?;
    let (set, values) = read_samples(path)?;
    let first = set.groups().first().map(|g| g.0).unwrap_or(0);
    let last = set.groups().last().map(|g| g.0).unwrap_or(-1);
    let report = verify_sufficiency(&set, &spec, first..=last);
    let (c, solver) = solve_samples(&cfg, &spec, &basis, &set, &values)?;

    fs::create_dir_all(&a.output)?;
    let mut w = writer(Some(&a.output.join("coefficients.csv")))?;
    c.write_csv(&basis, &mut w)?;
    w.flush()?;
    let grid = eval_grid(spec.interval, cfg.eval.step)?;
    let mut w = writer(Some(&a.output.join("reconstruction.csv")))?;
    writeln!(w, "x,f_tilde")?;
    for &x in &grid {
        writeln!(w, "{x:?},{:?}", synthesize_at(c.values(), &basis, &spec.window, x))?;
    }
    w.flush()?;
    let dim = basis.len();
    let report = json!({
        "dim": dim,
        "points": set.len(),
        "q": set.len() as f64 / dim as f64,
        "coverage": [first, last],
        "sufficiency": SufficiencySummary::from(report),
        "solver": solver,
    });
    write_json_file(&a.output.join("report.json"), &report)?;
    print_json(&json!({"dim": dim, "points": set.len(), "output": a.output}))
}

fn project(a: ProjectArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let spec = cfg.spec();
    let basis = spec.enumerate()?;
    let signal = Signal::build(&cfg.signal, &spec)?;
    // Evaluate once up front so domain errors surface instead of reading as zero.
    let window_reach = spec.window.half_width();
    signal.eval(spec.interval.1 + window_reach)?;
    let c = project_quadrature(|x| signal.eval(x).unwrap_or(0.0), &basis, &spec.window, cfg.solver.quad_step)?;
    let errors = relative_errors(
        |x| signal.eval(x).unwrap_or(0.0),
        |x| synthesize_at(c.values(), &basis, &spec.window, x),
        spec.interval,
        cfg.eval.step,
    )?;
    fs::create_dir_all(&a.output)?;
    let mut w = writer(Some(&a.output.join("coefficients.csv")))?;
    c.write_csv(&basis, &mut w)?;
    w.flush()?;
    write_json_file(&a.output.join("errors.json"), &errors)?;
    print_json(&json!({"dim": basis.len(), "errors": errors, "output": a.output}))
}

fn rho_list(a: &RhoSweepArgs) -> Result<Vec<f64>> {
    if let Some(s) = &a.rhos {
        return parse_list(s);
    }
    let s = a.rho_range.as_deref().unwrap_or("0.7:2.5:0.1");
    let parts = parse_list(&s.replace(':', ","))?;
    let [start, stop, step] = parts[..] else {
        bail!("--rho-range must look like start:stop:step");
    };
    if !(step > 0.0) || stop < start {
        bail!("empty ρ range '{s}'");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // Round to the step's decimals so 0.1-steps print cleanly.
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
}

fn sweep(a: RhoSweepArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let rows = rho_sweep(&cfg, &rho_list(&a)?)?;
    let mut w = writer(a.out.as_deref())?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn spectro(a: SpectrogramArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let spec = cfg.spec();
    let params = SpectrogramParams { win_len: a.win_len, hop: a.hop, fft_size: a.fft_size, max_freq: a.max_freq };
    let interval = range_or(&spec, &a.range)?;
    let sg = match &a.coefficients {
        Some(path) => {
            let basis = spec.enumerate()?;
            let file = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
            let c = Coefficients::<f64>::read_csv(&basis, file)?;
            spectrogram(|x| synthesize_at(c.values(), &basis, &spec.window, x), interval, &params)?
        }
        None => {
            let signal = Signal::build(&cfg.signal, &spec)?;
            signal.eval(interval.1 - cfg.eval.step)?;
            spectrogram(|x| signal.eval(x).unwrap_or(0.0), interval, &params)?
        }
    };
    let mut w = writer(a.out.as_deref())?;
    sg.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn density(a: DensityArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let spec = cfg.spec();
    let (alpha, beta) = spec.interval;
    let set = experiment::sampling_set(&cfg, &spec)?;
    let mut points = set.points();
    points.sort_by(f64::total_cmp);
    let centre = 0.5 * (alpha + beta);
    let radii = parse_list(&a.radii)?;
    let mut rows = Vec::new();
    for r in radii {
        let lower = beurling_lower_density(&points, r)?;
        let avg = average_bandwidth(&spec.bandwidths, centre, r)?;
        rows.push(json!({
            "r": r,
            "lower_density": lower,
            "average_bandwidth": avg,
            "necessary": 1.0 + avg,
            "holds": lower >= 1.0 + avg,
        }));
    }
    let ke = KernelEvaluator::new(spec.window.clone(), spec.bandwidths.clone());
    let grid = eval_grid(spec.interval, a.kernel_step)?;
    let diag: Vec<f64> = grid.iter().map(|&x| ke.kernel(x, x)).collect();
    let necessary = necessary_count(spec.interval, &spec.bandwidths, spec.window.half_width()).ok();
    let report = json!({
        "interval": [alpha, beta],
        "points": points.len(),
        "dim": spec.dim()?,
        "interior_dim": spec.with_mode(SpaceMode::Interior).dim()?,
        "necessary_count": necessary,
        "kernel_diag_min": diag.iter().copied().fold(f64::INFINITY, f64::min),
        "kernel_diag_max": diag.iter().copied().fold(0.0, f64::max),
        "kernel_diag_integral": diag.iter().sum::<f64>() * a.kernel_step,
        "densities": rows,
    });
    if let Some(path) = &a.kernel_out {
        let mut w = writer(Some(path))?;
        writeln!(w, "x,k")?;
        for (x, k) in grid.iter().zip(&diag) {
            writeln!(w, "{x:?},{k:?}")?;
        }
        w.flush()?;
    }
    match &a.out {
        Some(path) => write_json_file(path, &report),
        None => print_json(&report),
    }
}

fn print_summary(out: &experiment::ExperimentOutcome, dir: &Path) -> Result<()> {
    let r = &out.report;
    print_json(&json!({
        "name": r.name,
        "dim": r.dim,
        "points": r.points,
        "q": r.q,
        "e2": r.errors.e2,
        "einf": r.errors.einf,
        "output": dir,
    }))
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = match &a.file {
        Some(path) => {
            if a.cfg.config.is_some() || a.cfg.preset.is_some() {
                bail!("give the config as a positional file or via --config/--preset, not both");
            }
            ConfigArgs { config: Some(path.clone()), ..a.cfg }.resolve()?
        }
        None => a.cfg.resolve()?,
    };
    let dir = match (&a.output, &cfg.output) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("out").join(cfg.name.as_deref().unwrap_or("experiment")),
    };
    let out = run_experiment(&cfg)?;
    out.write(&dir)?;
    print_summary(&out, &dir)
}

/// Variant name of a library error, e.g. `UnknownPreset`.
fn error_kind(e: &anyhow::Error) -> String {
    match e.downcast_ref::<vbwilson::Error>() {
        Some(err) => {
            let dbg = format!("{err:?}");
            dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
        }
        None => "Usage".to_string(),
    }
}

/// A closed downstream pipe (`| head`) is not a failure.
fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| match c.downcast_ref::<io::Error>() {
        Some(io) => io.kind() == io::ErrorKind::BrokenPipe,
        None => matches!(c.downcast_ref::<vbwilson::Error>(), Some(vbwilson::Error::Io(m)) if m.contains("Broken pipe")),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({"error": {"kind": "Usage", "message": e.render().to_string().trim()}});
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let res = match cli.cmd {
        Cmd::VerifyWindow(a) => verify_window(a),
        Cmd::Dims(a) => dims(a),
        Cmd::GenSignal(a) => gen_signal(a),
        Cmd::GenSamples(a) => gen_samples(a),
        Cmd::Reconstruct(a) => reconstruct(a),
        Cmd::Project(a) => project(a),
        Cmd::RhoSweep(a) => sweep(a),
        Cmd::Spectrogram(a) => spectro(a),
        Cmd::DensityReport(a) => density(a),
        Cmd::Run(a) => run(a),
        Cmd::Config(a) => a.resolve().and_then(|c| print_json(&serde_json::to_value(c)?)),
        Cmd::Presets => print_json(&json!(PRESETS)),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = json!({"error": {"kind": error_kind(&e), "message": format!("{e:#}")}});
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
