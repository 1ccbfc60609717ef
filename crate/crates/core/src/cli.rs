//! Command-line front end.
//!
//! Parameters are resolved as defaults, then the `--config` file (JSON object
//! or `key = value` lines), then `--set key=value` pairs, then explicit flags.
//! Every command writes its outputs atomically next to a `manifest.json`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::chaos::{self, ChaosGrid, ChaosSpace, PowerOptions, ResolventOptions, Rho2Convention};
use crate::error::{Error, Result};
use crate::estimators::{self, EnvironmentSample, ExponentTarget};
use crate::field::{self, GridSpec, ScalarField, StationarySampler};
use crate::io::{self, Manifest, MANIFEST_NAME};
use crate::potential::PotentialSpec;
use crate::rng;
use crate::scenery::{self, Observable, SceneryConfig, Transient, Window};
use crate::srbp::{self, InitialMode, SrbpConfig, TrajectoryRecord};

#[derive(Parser, Debug)]
#[command(name = "srbp", version, about = "Self-repelling Brownian polymer simulation and verification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample stationary fields and check their covariance.
    Field(FieldArgs),
    /// Simulate an SRBP ensemble.
    Simulate(SimulateArgs),
    /// Run the estimator suite over a simulated ensemble.
    Estimate(EstimateArgs),
    /// Diffusion in random scenery: variance rate of the integrated drift.
    Scenery(SceneryArgs),
    /// Fock-space computations.
    Chaos(ChaosArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Config file: a JSON object or `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Continue a run in an existing output directory.
    #[arg(long)]
    pub resume: bool,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid points per side.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid spacing.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct FieldArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Number of field snapshots to write.
    #[arg(long)]
    pub snapshots: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// `stationary` or `empty`.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub record_stride: Option<usize>,
    /// Also write the final environment view of each trajectory.
    #[arg(long)]
    pub views: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory of a `simulate` run.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rho2_effective: Option<f64>,
    #[arg(long)]
    pub window_min: Option<f64>,
    #[arg(long)]
    pub window_max: Option<f64>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SceneryArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    /// `gradient`, `gradient_component` or `field_value`.
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long)]
    pub component: Option<usize>,
    #[arg(long)]
    pub window_min: Option<f64>,
    #[arg(long)]
    pub window_max: Option<f64>,
    /// `known` or `fitted` finite-time correction.
    #[arg(long)]
    pub transient: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaosTask {
    Rho2,
    SectorConstant,
    SectorNorm,
    Sigma2,
}

#[derive(Args, Debug, Clone)]
pub struct ChaosArgs {
    pub task: ChaosTask,
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    /// `literal` or `derivation`.
    #[arg(long)]
    pub convention: Option<String>,
    /// Momentum points per axis.
    #[arg(long)]
    pub nc: Option<usize>,
    /// Momentum spacing.
    #[arg(long)]
    pub dp: Option<f64>,
    /// Momentum ball radius.
    #[arg(long)]
    pub pmax: Option<f64>,
    /// Highest level for `sector-norm`.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub component: Option<usize>,
}

// ---------------------------------------------------------------------------
// resolved configurations

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldRun {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub amplitude: f64,
    pub width: f64,
    pub samples: usize,
    pub lags: Vec<usize>,
    pub alpha: f64,
    pub snapshots: usize,
    pub seed: u64,
}

impl Default for FieldRun {
    fn default() -> Self {
        FieldRun {
            dim: 3,
            n: 32,
            h: 0.5,
            amplitude: 1.0,
            width: 1.0,
            samples: 500,
            lags: (0..=10).collect(),
            alpha: 0.01,
            snapshots: 0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateRun {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub amplitude: f64,
    pub width: f64,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub initial: InitialMode,
    pub record_stride: usize,
    pub views: bool,
    pub seed: u64,
}

impl Default for SimulateRun {
    fn default() -> Self {
        SimulateRun {
            dim: 3,
            n: 64,
            h: 0.5,
            amplitude: 1.0,
            width: 1.0,
            dt: 0.01,
            horizon: 50.0,
            ensemble: 200,
            initial: InitialMode::Stationary,
            record_stride: 10,
            views: false,
            seed: 1,
        }
    }
}

impl SimulateRun {
    pub fn to_config(&self) -> Result<SrbpConfig> {
        let cfg = SrbpConfig {
            potential: PotentialSpec::gaussian(self.dim, self.amplitude, self.width)?,
            grid: GridSpec::new(self.dim, self.n, self.h)?,
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            ensemble: self.ensemble,
            initial: self.initial,
            record_stride: self.record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateRun {
    pub input: PathBuf,
    pub rho2_effective: f64,
    pub window_min: Option<f64>,
    pub window_max: Option<f64>,
    pub bootstrap: usize,
    pub exponent_lo: f64,
    pub exponent_hi: f64,
    pub lags: Vec<usize>,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for EstimateRun {
    fn default() -> Self {
        EstimateRun {
            input: PathBuf::from("out"),
            rho2_effective: 4.0 / 3.0,
            window_min: None,
            window_max: None,
            bootstrap: 200,
            exponent_lo: 0.9,
            exponent_hi: 1.1,
            lags: vec![0, 1, 2, 4, 8],
            alpha: 0.01,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneryRun {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub amplitude: f64,
    pub width: f64,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub observable: String,
    pub component: usize,
    pub record_stride: usize,
    pub window_min: Option<f64>,
    pub window_max: Option<f64>,
    /// `known` (gradient observables only) or `fitted`.
    pub transient: String,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for SceneryRun {
    fn default() -> Self {
        SceneryRun {
            dim: 3,
            n: 256,
            h: 0.25,
            amplitude: 1.0,
            width: 1.0,
            dt: 0.01,
            horizon: 100.0,
            ensemble: 400,
            observable: "gradient".into(),
            component: 0,
            record_stride: 100,
            window_min: None,
            window_max: None,
            transient: "known".into(),
            bootstrap: 400,
            seed: 1,
        }
    }
}

impl SceneryRun {
    pub fn to_config(&self) -> Result<SceneryConfig> {
        let observable = match self.observable.as_str() {
            "gradient" => Observable::Gradient,
            "gradient_component" => Observable::GradientComponent(self.component),
            "field_value" => Observable::FieldValue,
            other => return Err(Error::invalid(format!("unknown observable {other:?}"))),
        };
        let cfg = SceneryConfig {
            potential: PotentialSpec::gaussian(self.dim, self.amplitude, self.width)?,
            grid: GridSpec::new(self.dim, self.n, self.h)?,
            dt: self.dt,
            horizon: self.horizon,
            ensemble: self.ensemble,
            seed: self.seed,
            observable,
            record_stride: self.record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn transient(&self) -> Result<Transient> {
        match (self.transient.as_str(), self.observable.as_str()) {
            ("fitted", _) => Ok(Transient::Fitted),
            ("known", "gradient" | "gradient_component") => {
                scenery::gradient_transient(&PotentialSpec::gaussian(self.dim, self.amplitude, self.width)?)
            }
            ("known", _) => Err(Error::invalid(
                "the transient is known only for gradient observables; use transient=fitted",
            )),
            (other, _) => Err(Error::invalid(format!("unknown transient mode {other:?}"))),
        }
    }

    pub fn window(&self) -> Window {
        Window {
            t_min: self.window_min.unwrap_or(self.horizon / 10.0),
            t_max: self.window_max.unwrap_or(self.horizon),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosRun {
    pub dim: usize,
    pub amplitude: f64,
    pub width: f64,
    pub convention: Rho2Convention,
    pub nc: usize,
    pub dp: f64,
    pub pmax: Option<f64>,
    pub level: usize,
    pub n_max: usize,
    pub component: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub lambda0: f64,
    pub lambda_ratio: f64,
    pub lambda_count: usize,
    pub solver_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ChaosRun {
    fn default() -> Self {
        ChaosRun {
            dim: 3,
            amplitude: 1.0,
            width: 1.0,
            convention: Rho2Convention::Literal,
            nc: 4,
            dp: 0.75,
            pmax: None,
            level: 2,
            n_max: 3,
            component: 0,
            power_tol: 1e-4,
            power_max_iter: 2000,
            lambda0: 0.08,
            lambda_ratio: 2.0,
            lambda_count: 5,
            solver_tol: 1e-10,
            restart: 30,
            max_iter: 3000,
            seed: 1,
        }
    }
}

impl ChaosRun {
    fn potential(&self) -> Result<PotentialSpec> {
        PotentialSpec::gaussian(self.dim, self.amplitude, self.width)
    }

    fn grid(&self) -> Result<ChaosGrid> {
        match self.pmax {
            Some(p) => ChaosGrid::half_offset_ball(self.dim, self.nc, self.dp, p),
            None => ChaosGrid::half_offset(self.dim, self.nc, self.dp),
        }
    }
}

// ---------------------------------------------------------------------------
// configuration plumbing

/// Parses `key = value` text; values are read as JSON when possible, else as strings.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", no + 1)))?;
        m.insert(normalize_key(k), parse_value(v.trim()));
    }
    Ok(m)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

fn parse_value(v: &str) -> Value {
    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

/// Reads a config file as a JSON object or `key = value` lines.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        match serde_json::from_str::<Value>(&text)? {
            Value::Object(m) => Ok(m),
            _ => Err(Error::invalid("JSON config must be an object")),
        }
    } else {
        parse_key_values(&text)
    }
}

fn set<T: Serialize>(m: &mut Map<String, Value>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        m.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
    }
}

fn model_flags(m: &mut Map<String, Value>, f: &ModelFlags) {
    set(m, "dim", &f.dim);
    set(m, "n", &f.n);
    set(m, "h", &f.h);
    set(m, "amplitude", &f.amplitude);
    set(m, "width", &f.width);
}

/// Layers defaults, config file, `--set` pairs and flags, then deserializes strictly.
pub fn resolve<T: Serialize + DeserializeOwned + Default>(common: &Common, flags: Map<String, Value>) -> Result<T> {
    let mut base = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => unreachable!("run configs are structs"),
    };
    if let Some(p) = &common.config {
        base.extend(read_config_file(p)?);
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        base.insert(normalize_key(k), parse_value(v.trim()));
    }
    base.extend(flags);
    set(&mut base, "seed", &common.seed);
    serde_json::from_value(Value::Object(base)).map_err(|e| Error::invalid(format!("configuration: {e}")))
}

/// Creates `out`; refuses an existing manifest unless resuming, and on resume
/// requires the stored config hash to match.
fn prepare_out<T: Serialize>(out: &Path, resume: bool, config: &T) -> Result<Option<Manifest>> {
    std::fs::create_dir_all(out)?;
    if !out.join(MANIFEST_NAME).exists() {
        return Ok(None);
    }
    if !resume {
        return Err(Error::invalid(format!(
            "{} already holds a manifest; pass --resume to continue or choose another --out",
            out.display()
        )));
    }
    let m = Manifest::read(out)?;
    let h = io::config_hash(config)?;
    if m.config_hash != h {
        return Err(Error::integrity(format!(
            "cannot resume: manifest config hash {} differs from current config hash {h}",
            m.config_hash
        )));
    }
    Ok(Some(m))
}

fn finish(mut m: Manifest, out: &Path, start: Instant) -> Result<()> {
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.complete = true;
    m.write(out)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

// ---------------------------------------------------------------------------
// commands

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Field(a) => a.common.threads,
        Command::Simulate(a) => a.common.threads,
        Command::Estimate(a) => a.common.threads,
        Command::Scenery(a) => a.common.threads,
        Command::Chaos(a) => a.common.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Field(a) => cmd_field(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Scenery(a) => cmd_scenery(&a),
        Command::Chaos(a) => cmd_chaos(&a),
    })
}

pub fn cmd_field(a: &FieldArgs) -> Result<()> {
    let mut flags = Map::new();
    model_flags(&mut flags, &a.model);
    set(&mut flags, "samples", &a.samples);
    set(&mut flags, "snapshots", &a.snapshots);
    let cfg: FieldRun = resolve(&a.common, flags)?;
    let start = Instant::now();
    let out = &a.common.out;
    prepare_out(out, a.common.resume, &cfg)?;
    let spec = PotentialSpec::gaussian(cfg.dim, cfg.amplitude, cfg.width)?;
    let grid = GridSpec::new(cfg.dim, cfg.n, cfg.h)?;
    if cfg.samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let sampler = StationarySampler::new(&spec, &grid)?;
    let analytic = field::analytic_covariance(&spec, &grid)?;
    let mut m = Manifest::new("field", &cfg, cfg.seed)?;
    let pairs = cfg.samples.div_ceil(2);
    let samples: Vec<ScalarField> = {
        use rayon::prelude::*;
        let v: Vec<(ScalarField, ScalarField)> = (0..pairs)
            .into_par_iter()
            .map(|j| sampler.sample_pair(rng::derive_seed(cfg.seed, j as u64, rng::FIELD)))
            .collect();
        v.into_iter().flat_map(|(a, b)| [a, b]).take(cfg.samples).collect()
    };
    for j in 0..pairs {
        m.seeds.insert(format!("pair_{j:05}"), rng::derive_seed(cfg.seed, j as u64, rng::FIELD));
    }
    let rows = field::covariance_check(&samples, &analytic, &cfg.lags)?;
    let csv_path = out.join("covariance.csv");
    field::write_covariance_csv(&rows, cfg.h, &csv_path)?;
    m.outputs.insert("covariance.csv".into(), io::sha256_file(&csv_path)?);
    let reports = estimators::field_reports(&samples, &analytic, &cfg.lags, cfg.alpha)?;
    m.add_output(out, "field_report.json", &json_bytes(&reports)?)?;
    for (i, f) in samples.iter().take(cfg.snapshots).enumerate() {
        m.add_output(out, &format!("field_{i:05}.bin"), &f.to_bytes())?;
    }
    for r in &reports {
        println!("{:<24} {:>12.6} ± {:<10.6} {:?}", r.name, r.estimate, r.stderr, r.verdict);
    }
    finish(m, out, start)
}

fn trajectory_name(i: usize) -> String {
    format!("traj_{i:05}.csv")
}

fn view_name(i: usize) -> String {
    format!("view_{i:05}.bin")
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut flags = Map::new();
    model_flags(&mut flags, &a.model);
    set(&mut flags, "dt", &a.dt);
    set(&mut flags, "horizon", &a.horizon);
    set(&mut flags, "ensemble", &a.ensemble);
    set(&mut flags, "initial", &a.initial);
    set(&mut flags, "record_stride", &a.record_stride);
    if a.views {
        flags.insert("views".into(), Value::Bool(true));
    }
    let run: SimulateRun = resolve(&a.common, flags)?;
    let cfg = run.to_config()?;
    let start = Instant::now();
    let out = &a.common.out;
    let previous = prepare_out(out, a.common.resume, &run)?;
    let mut m = Manifest::new("simulate", &run, run.seed)?;
    // trajectories already recorded with a matching hash are kept
    let mut todo = Vec::new();
    for i in 0..cfg.ensemble {
        let name = trajectory_name(i);
        let done = previous.as_ref().and_then(|p| {
            let want = p.outputs.get(&name)?;
            let got = io::sha256_file(&out.join(&name)).ok()?;
            if &got != want {
                return None;
            }
            if run.views {
                let vn = view_name(i);
                let vw = p.outputs.get(&vn)?;
                if &io::sha256_file(&out.join(&vn)).ok()? != vw {
                    return None;
                }
                Some(vec![(name.clone(), got), (vn, vw.clone())])
            } else {
                Some(vec![(name.clone(), got)])
            }
        });
        match done {
            Some(entries) => m.outputs.extend(entries),
            None => todo.push(i),
        }
        m.seeds.insert(format!("noise_{i:05}"), i as u64);
        if cfg.initial == InitialMode::Stationary {
            m.seeds.insert(format!("field_{i:05}"), cfg.field_seed(i));
        }
    }
    if todo.len() < cfg.ensemble {
        log::info!("resuming: {} of {} trajectories already complete", cfg.ensemble - todo.len(), cfg.ensemble);
    }
    m.write(out)?;
    let chunk = 16;
    let mut warned = 0usize;
    for batch in todo.chunks(chunk) {
        let results = srbp::run_indices_with(&cfg, batch, |_, s| {
            let view = if run.views { Some(s.environment_view().to_bytes()) } else { None };
            (view, s.extent_warning())
        })?;
        for (rec, (view, warn)) in results {
            warned += warn as usize;
            m.add_output(out, &trajectory_name(rec.index), &rec.to_csv())?;
            if let Some(v) = view {
                m.add_output(out, &view_name(rec.index), &v)?;
            }
        }
        m.write(out)?;
    }
    if warned > 0 {
        eprintln!("warning: {warned} trajectories exceeded the wrap-around extent limit");
    }
    println!("wrote {} trajectories to {}", cfg.ensemble, out.display());
    finish(m, out, start)
}

/// Loads a completed `simulate` output directory after verifying its manifest.
pub fn load_simulation(dir: &Path) -> Result<(SimulateRun, Manifest, Vec<TrajectoryRecord>)> {
    let m = Manifest::read(dir)?;
    if m.command != "simulate" {
        return Err(Error::invalid(format!("{} holds a `{}` manifest, not `simulate`", dir.display(), m.command)));
    }
    m.verify(dir)?;
    if !m.complete {
        return Err(Error::integrity("simulation manifest is incomplete; finish it with --resume"));
    }
    let run: SimulateRun = serde_json::from_value(m.config.clone())
        .map_err(|e| Error::integrity(format!("manifest config does not parse: {e}")))?;
    let cfg = run.to_config()?;
    let hash = cfg.hash()?;
    let recs = (0..run.ensemble)
        .map(|i| {
            let bytes = std::fs::read(dir.join(trajectory_name(i)))?;
            TrajectoryRecord::from_csv(&bytes, i, run.seed, &hash)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((run, m, recs))
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    (0..times.len())
        .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
        .unwrap_or(0)
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let mut flags = Map::new();
    if let Some(p) = &a.input {
        flags.insert("input".into(), Value::String(p.display().to_string()));
    }
    set(&mut flags, "rho2_effective", &a.rho2_effective);
    set(&mut flags, "window_min", &a.window_min);
    set(&mut flags, "window_max", &a.window_max);
    set(&mut flags, "bootstrap", &a.bootstrap);
    let cfg: EstimateRun = resolve(&a.common, flags)?;
    let start = Instant::now();
    let out = &a.common.out;
    let (run, input_manifest, ens) = load_simulation(&cfg.input)?;
    prepare_out(out, a.common.resume, &cfg)?;
    let mut m = Manifest::new("estimate", &cfg, cfg.seed)?;
    m.inputs.insert(
        cfg.input.join(MANIFEST_NAME).display().to_string(),
        io::sha256_file(&cfg.input.join(MANIFEST_NAME))?,
    );
    for (k, v) in &input_manifest.outputs {
        m.inputs.insert(cfg.input.join(k).display().to_string(), v.clone());
    }
    let times = ens[0].times.clone();
    let last = times.len() - 1;
    let half = nearest_index(&times, times[last] / 2.0);
    let mut window = estimators::default_window(&times);
    if let Some(v) = cfg.window_min {
        window.t_min = v;
    }
    if let Some(v) = cfg.window_max {
        window.t_max = v;
    }
    let mut reports = Vec::new();
    let curve = estimators::msd(&ens, cfg.bootstrap, cfg.seed)?;
    m.add_output(out, "msd.csv", &curve.to_csv())?;
    reports.push(estimators::msd_lower_bound(&curve, 2.0));
    reports.push(estimators::sigma2_hat(&ens, window, cfg.rho2_effective)?);
    if run.dim >= 2 {
        reports.extend(estimators::isotropy_check(&ens, last)?);
    }
    reports.extend(estimators::decorrelation_check(&ens, last)?);
    reports.push(estimators::decomposition_check(&ens, 1e-12)?);
    if half > 0 && half < last {
        reports.extend(estimators::lln_check(&ens, half, last)?);
        if ens.len() >= 100 {
            reports.extend(estimators::normality_test(&ens, 0, half, last, cfg.alpha)?);
        }
    }
    let target = ExponentTarget {
        lo: cfg.exponent_lo,
        hi: cfg.exponent_hi,
        exclude: None,
    };
    match estimators::exponent_fit(&ens, window, target, cfg.bootstrap, cfg.seed) {
        Ok(fit) => {
            m.add_output(out, "exponent.csv", &fit.to_csv())?;
            reports.push(fit.report);
        }
        Err(e) => log::warn!("exponent fit skipped: {e}"),
    }
    m.add_output(out, "reports.json", &json_bytes(&reports)?)?;
    if run.views && run.initial == InitialMode::Stationary && ens.len() >= 100 {
        let sim = run.to_config()?;
        let analytic = field::analytic_covariance(&sim.potential, &sim.grid)?;
        let samples = ens
            .iter()
            .map(|r| {
                let view = ScalarField::read_snapshot(&cfg.input.join(view_name(r.index)))?;
                let fraction = r
                    .x_at(last)
                    .iter()
                    .map(|&x| {
                        let u = x / run.h;
                        u - u.floor()
                    })
                    .collect();
                Ok(EnvironmentSample { view, fraction })
            })
            .collect::<Result<Vec<_>>>()?;
        let st = estimators::stationarity_test(run.initial, &samples, &analytic, &cfg.lags, cfg.alpha)?;
        println!("{:<28} {:?}", "stationarity", st.verdict);
        m.add_output(out, "stationarity.json", &json_bytes(&st)?)?;
    }
    for r in &reports {
        println!("{:<28} {:>12.6} ± {:<10.6} {:?}", r.name, r.estimate, r.stderr, r.verdict);
    }
    finish(m, out, start)
}

#[derive(Serialize, Deserialize)]
struct SceneryOutput {
    estimate: scenery::H1Estimate,
    rho2_derivation: f64,
    relative_error: f64,
}

pub fn cmd_scenery(a: &SceneryArgs) -> Result<()> {
    let mut flags = Map::new();
    model_flags(&mut flags, &a.model);
    set(&mut flags, "dt", &a.dt);
    set(&mut flags, "horizon", &a.horizon);
    set(&mut flags, "ensemble", &a.ensemble);
    set(&mut flags, "observable", &a.observable);
    set(&mut flags, "component", &a.component);
    set(&mut flags, "window_min", &a.window_min);
    set(&mut flags, "window_max", &a.window_max);
    set(&mut flags, "transient", &a.transient);
    let run: SceneryRun = resolve(&a.common, flags)?;
    let cfg = run.to_config()?;
    let transient = run.transient()?;
    let start = Instant::now();
    let out = &a.common.out;
    prepare_out(out, a.common.resume, &run)?;
    let mut m = Manifest::new("scenery", &run, run.seed)?;
    for j in 0..cfg.ensemble.div_ceil(2) {
        m.seeds.insert(format!("field_pair_{j:05}"), rng::derive_seed(cfg.seed, j as u64, rng::FIELD));
    }
    let ens = scenery::run_scenery(&cfg)?;
    m.add_output(out, "variance.csv", &ens.variance_csv())?;
    let est = scenery::h_minus1_estimate(&ens, run.window(), transient, run.bootstrap, run.seed)?;
    let rho2 = chaos::rho2_quadrature(&cfg.potential, Rho2Convention::Derivation)?.value;
    let rel = (est.estimate - rho2) / rho2;
    println!(
        "variance rate {:.5} (95% CI [{:.5}, {:.5}]), quadrature {:.5}, relative difference {:+.4}",
        est.estimate, est.ci_low, est.ci_high, rho2, rel
    );
    m.add_output(
        out,
        "scenery.json",
        &json_bytes(&SceneryOutput {
            estimate: est,
            rho2_derivation: rho2,
            relative_error: rel,
        })?,
    )?;
    finish(m, out, start)
}

pub fn cmd_chaos(a: &ChaosArgs) -> Result<()> {
    let mut flags = Map::new();
    set(&mut flags, "dim", &a.dim);
    set(&mut flags, "amplitude", &a.amplitude);
    set(&mut flags, "width", &a.width);
    set(&mut flags, "convention", &a.convention);
    set(&mut flags, "nc", &a.nc);
    set(&mut flags, "dp", &a.dp);
    set(&mut flags, "pmax", &a.pmax);
    set(&mut flags, "level", &a.level);
    set(&mut flags, "n_max", &a.n_max);
    set(&mut flags, "component", &a.component);
    let run: ChaosRun = resolve(&a.common, flags)?;
    let start = Instant::now();
    let out = &a.common.out;
    prepare_out(out, a.common.resume, &run)?;
    let task = format!("{:?}", a.task).to_lowercase();
    let mut m = Manifest::new(&format!("chaos {task}"), &run, run.seed)?;
    let pot = run.potential()?;
    match a.task {
        ChaosTask::Rho2 => {
            let r = chaos::rho2_quadrature(&pot, run.convention)?;
            println!("{:.6}", r.value);
            m.add_output(out, "rho2.json", &json_bytes(&r)?)?;
        }
        ChaosTask::SectorConstant => {
            let s = chaos::sector_constant(&pot)?;
            println!("C^2 = {:.6} at |p| = {}", s.c2, s.argmax);
            let mut csv = String::from("p,F\n");
            for (p, f) in &s.profile {
                csv.push_str(&format!("{p},{f}\n"));
            }
            m.add_output(out, "sector_profile.csv", csv.as_bytes())?;
            m.add_output(out, "sector_constant.json", &json_bytes(&s)?)?;
        }
        ChaosTask::SectorNorm => {
            if run.level == 0 || run.level > 4 {
                return Err(Error::invalid("level must be in 1..=4"));
            }
            let space = ChaosSpace::new(run.grid()?, pot, run.level)?;
            let opts = PowerOptions {
                tol: run.power_tol,
                max_iter: run.power_max_iter,
                seed: run.seed,
            };
            let reports = (1..=run.level)
                .map(|n| chaos::graded_sector_norm(&space, n, &opts))
                .collect::<Result<Vec<_>>>()?;
            for r in &reports {
                println!("level {} norm {:.6} ({} iterations)", r.level, r.norm, r.iterations);
            }
            m.add_output(out, "sector_norms.json", &json_bytes(&reports)?)?;
        }
        ChaosTask::Sigma2 => {
            let space = ChaosSpace::new(run.grid()?, pot, run.n_max)?;
            let lams = chaos::lambda_sequence(run.lambda0, run.lambda_ratio, run.lambda_count);
            let opts = ResolventOptions {
                tol: run.solver_tol,
                restart: run.restart,
                max_iter: run.max_iter,
            };
            let r = chaos::sigma2_kv(&space, &lams, run.n_max, run.component, &opts)?;
            match r.truncation_diagnostic {
                Some(d) => println!("sigma^2 = {:.6} (truncation diagnostic {:.3e})", r.sigma2, d),
                None => println!("sigma^2 = {:.6}", r.sigma2),
            }
            m.add_output(out, "lambda_table.csv", &r.table_csv())?;
            m.add_output(out, "sigma2.json", &json_bytes(&r)?)?;
        }
    }
    finish(m, out, start)
}

