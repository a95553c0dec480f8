//! Experiment files, parameter sweeps and result records.
//!
//! An experiment is a TOML document. Physical times carry their unit in the
//! field name (`_ns`, `_ghz`, `_rad`). A `[sweep]` table maps parameter names
//! to value grids; the cartesian product is evaluated point by point, axes in
//! alphabetical order with the last axis varying fastest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dde::{FeedbackTap, InitialHistory, Nonlinearity, Scheme, SystemParams};
use crate::error::{Error, Result};
use crate::par::{map_indexed, with_threads, Execution};
use crate::reservoir::{
    default_washout, double_delay_config, make_mask, run, Engine, IntegrationSettings, MaskKind,
    ReservoirConfig,
};
use crate::tasks::{self, csv_error, decode_symbol, format_float, ChannelOptions, TaskDataset};
use crate::training::{
    cross_validate, default_lambda, memory_capacity, nmse, predict, ridge_train, ser,
    MemoryCapacity, ProbeSettings, TeacherMatrix,
};
use crate::virtual_net::{NodeGrid, SamplingRule};

pub const SANTA_FE_ENV: &str = "DELAYRC_SANTA_FE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskName {
    #[default]
    Binary,
    MultiLevel,
    UniformRandom,
    TwoToneSin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    #[serde(default)]
    pub kind: MaskName,
    pub bipolar: Option<bool>,
    pub levels: Option<u8>,
    pub p: Option<u32>,
    pub q: Option<u32>,
    /// Fixed mask seed; derived from the point seed when absent.
    pub seed: Option<u64>,
}

impl MaskSection {
    pub fn kind(&self) -> Result<MaskKind> {
        Ok(match self.kind {
            MaskName::Binary => MaskKind::Binary {
                bipolar: self.bipolar.unwrap_or(true),
            },
            MaskName::MultiLevel => MaskKind::MultiLevel {
                levels: self.levels.ok_or_else(|| Error::config("multi_level mask needs `levels`"))?,
            },
            MaskName::UniformRandom => MaskKind::UniformRandom,
            MaskName::TwoToneSin => MaskKind::TwoToneSin {
                p: self.p.ok_or_else(|| Error::config("two_tone_sin mask needs `p`"))?,
                q: self.q.ok_or_else(|| Error::config("two_tone_sin mask needs `q`"))?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapSection {
    pub delay_ns: f64,
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn one_i64() -> i64 {
    1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    #[serde(default)]
    pub engine: Engine,
    pub nodes: usize,
    #[serde(default = "one_i64")]
    pub desync: i64,
    #[serde(default = "one")]
    pub node_duration_ns: f64,
    pub response_time_ns: f64,
    /// Principal feedback gain; absent or zero in ELM mode.
    pub beta: Option<f64>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub phi0_rad: f64,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub sampling: SamplingRule,
    #[serde(default = "one_usize")]
    pub edm_sublayers: usize,
    #[serde(default)]
    pub readout_desync: f64,
    /// Relaxation-oscillation frequency; splits the loop into two taps.
    pub double_delay_ghz: Option<f64>,
    #[serde(default)]
    pub extra_taps: Vec<TapSection>,
    #[serde(default)]
    pub scheme: Scheme,
    pub step_ns: Option<f64>,
    #[serde(default)]
    pub mask: MaskSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Narma10,
    ChannelEq,
    SantaFe,
    SantaFeSurrogate,
    MemoryCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelVariant {
    #[default]
    Standard,
    Linear,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub name: TaskName,
    /// Input steps kept after washout.
    pub length: Option<usize>,
    pub train_fraction: Option<f64>,
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub channel: ChannelVariant,
    pub path: Option<PathBuf>,
    /// Fixed data seed; derived from the point seed when absent.
    pub seed: Option<u64>,
    pub probe_train: Option<usize>,
    pub probe_test: Option<usize>,
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    /// Absolute ridge parameter; the relative default applies when absent.
    pub lambda: Option<f64>,
    #[serde(default = "yes")]
    pub bias: bool,
    #[serde(default = "one_usize")]
    pub folds: usize,
    pub washout: Option<usize>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            lambda: None,
            bias: true,
            folds: 1,
            washout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub log: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, log: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SweepAxis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl SweepAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            SweepAxis::Values(v) => v.clone(),
            SweepAxis::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err(Error::config(format!(
                        "sweep range needs finite bounds and a positive step, got {start}..{stop} step {step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor();
                if count < 0.0 {
                    Vec::new()
                } else {
                    (0..=count as usize).map(|i| start + i as f64 * step).collect()
                }
            }
        };
        if v.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub reservoir: ReservoirSection,
    pub task: TaskSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub sweep: BTreeMap<String, SweepAxis>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub engine: Option<Engine>,
    pub out: Option<PathBuf>,
}

/// One resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub index: usize,
    pub swept: Vec<(String, f64)>,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub base: ExperimentConfig,
    raw: toml::Value,
    pub axes: Vec<(String, Vec<f64>)>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for grid point `index`: the leading bytes of SHA-256(master ‖ index).
pub fn point_seed(master: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Stable hash of a resolved configuration. The output section is left out.
pub fn fingerprint(config: &ExperimentConfig) -> Result<String> {
    let mut config = config.clone();
    config.output = OutputSection::default();
    let canonical = serde_json::to_string(&config)
        .map_err(|e| Error::Config(format!("cannot serialise config: {e}")))?;
    Ok(hex(&Sha256::digest(canonical.as_bytes())[..16]))
}

const SECTIONS: [&str; 4] = ["reservoir", "reservoir.mask", "task", "training"];

fn table_at<'a>(root: &'a toml::Value, path: &str) -> Option<&'a toml::Table> {
    path.split('.').try_fold(root, |v, key| v.get(key))?.as_table()
}

/// Expand a bare sweep name into its dotted path.
fn resolve_name(root: &toml::Value, name: &str) -> Result<String> {
    if name.contains('.') {
        return Ok(name.to_string());
    }
    let hits: Vec<&str> = SECTIONS
        .iter()
        .copied()
        .filter(|s| table_at(root, s).is_some_and(|t| t.contains_key(name)))
        .collect();
    match hits.as_slice() {
        [] => Ok(format!("reservoir.{name}")),
        [one] => Ok(format!("{one}.{name}")),
        _ => Err(Error::config(format!(
            "sweep name `{name}` is ambiguous; use one of {}",
            hits.iter().map(|s| format!("{s}.{name}")).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: f64) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().expect("path is non-empty");
    let mut cur = root;
    for key in parents {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("`{path}` does not name a config field")))?;
        cur = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| Error::config(format!("`{path}` does not name a config field")))?;
    let integral = value.fract() == 0.0 && value.abs() < 9.0e15;
    let v = match table.get(*last) {
        Some(toml::Value::Float(_)) => toml::Value::Float(value),
        _ if integral => toml::Value::Integer(value as i64),
        _ => toml::Value::Float(value),
    };
    table.insert(last.to_string(), v);
    Ok(())
}

fn describe_toml(e: toml::de::Error, path: Option<&Path>) -> Error {
    let place = path.map(|p| format!("{}: ", p.display())).unwrap_or_default();
    Error::Config(format!("{place}{e}"))
}

impl Experiment {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, Some(path))
    }

    pub fn from_str(text: &str) -> Result<Self> {
        Self::parse(text, None)
    }

    fn parse(text: &str, path: Option<&Path>) -> Result<Self> {
        let base: ExperimentConfig = toml::from_str(text).map_err(|e| describe_toml(e, path))?;
        let mut raw: toml::Value = toml::from_str(text).map_err(|e| describe_toml(e, path))?;
        if let Some(t) = raw.as_table_mut() {
            t.remove("sweep");
        }
        let mut axes = Vec::new();
        for (name, axis) in &base.sweep {
            let resolved = resolve_name(&raw, name)?;
            axes.push((resolved, axis.values()?));
        }
        let exp = Self { base, raw, axes };
        // every grid value must land on a real field of the right type
        for (name, values) in &exp.axes {
            let mut probe = exp.raw.clone();
            set_path(&mut probe, name, values[0])?;
            probe
                .try_into::<ExperimentConfig>()
                .map_err(|e| Error::Config(format!("sweep `{name}`: {}", e.message())))?;
        }
        Ok(exp)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.base.master_seed = seed;
            self.set_raw("master_seed", toml::Value::Integer(seed as i64));
        }
        if let Some(engine) = o.engine {
            let name = match engine {
                Engine::ContinuousDde => "continuous_dde",
                Engine::DiscreteMap => "discrete_map",
                Engine::Elm => "elm",
            };
            if let Some(t) = self.raw.get_mut("reservoir").and_then(|v| v.as_table_mut()) {
                t.insert("engine".into(), toml::Value::String(name.into()));
                if engine == Engine::Elm {
                    for key in ["beta", "double_delay_ghz", "extra_taps"] {
                        if t.remove(key).is_some() {
                            warn!("--engine elm drops `reservoir.{key}`");
                        }
                    }
                }
            }
            self.base.reservoir.engine = engine;
        }
        if let Some(out) = &o.out {
            self.base.output.dir = Some(out.clone());
        }
    }

    fn set_raw(&mut self, key: &str, v: toml::Value) {
        if let Some(t) = self.raw.as_table_mut() {
            t.insert(key.into(), v);
        }
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Resolved configuration of grid point `index`.
    pub fn point(&self, index: usize) -> Result<PointSpec> {
        let mut raw = self.raw.clone();
        let mut rest = index;
        let mut swept = vec![(String::new(), 0.0); self.axes.len()];
        for (slot, (name, values)) in self.axes.iter().enumerate().rev() {
            let v = values[rest % values.len()];
            rest /= values.len();
            set_path(&mut raw, name, v)?;
            swept[slot] = (name.clone(), v);
        }
        let mut config: ExperimentConfig = raw
            .try_into()
            .map_err(|e| Error::Config(format!("grid point {index}: {}", e.message())))?;
        config.output = self.base.output.clone();
        let seed = point_seed(config.master_seed, index as u64);
        Ok(PointSpec {
            index,
            fingerprint: fingerprint(&config)?,
            swept,
            config,
            seed,
        })
    }

    pub fn points(&self) -> Result<Vec<PointSpec>> {
        (0..self.point_count()).map(|i| self.point(i)).collect()
    }
}

/// Reservoir described by a resolved config; `seed` feeds the mask when no seed is fixed.
pub fn build_reservoir(config: &ExperimentConfig, seed: u64) -> Result<ReservoirConfig> {
    let r = &config.reservoir;
    if r.nodes == 0 {
        return Err(Error::config("reservoir.nodes must be at least 1"));
    }
    if r.desync.unsigned_abs() as usize >= r.nodes {
        return Err(Error::config(format!(
            "desync k = {} must satisfy |k| < N = {}",
            r.desync, r.nodes
        )));
    }
    let grid = NodeGrid::new(r.nodes, r.node_duration_ns, r.desync)?.with_sampling(r.sampling);
    let beta = r.beta.unwrap_or(0.0);
    let mut taps = Vec::new();
    if r.engine == Engine::Elm {
        if beta != 0.0 || !r.extra_taps.is_empty() || r.double_delay_ghz.is_some() {
            return Err(Error::config(
                "ELM mode runs open loop; remove beta, double_delay_ghz and extra_taps",
            ));
        }
    } else {
        let Some(beta) = r.beta else {
            return Err(Error::config("reservoir.beta is required unless engine = \"elm\""));
        };
        match r.double_delay_ghz {
            Some(nu) => taps.extend(double_delay_config(grid.delay(), nu, beta)?),
            None => taps.push(FeedbackTap::new(grid.delay(), beta)),
        }
        taps.extend(r.extra_taps.iter().map(|t| FeedbackTap::new(t.delay_ns, t.gain)));
    }
    let params = SystemParams::new(r.response_time_ns, taps, r.mu, r.rho, r.phi0_rad, r.nonlinearity)?;
    if r.edm_sublayers == 0 || !r.nodes.is_multiple_of(r.edm_sublayers) {
        return Err(Error::config(format!(
            "N = {} is not divisible into {} sub-reservoirs",
            r.nodes, r.edm_sublayers
        )));
    }
    let mask_seed = r.mask.seed.unwrap_or_else(|| sub_seed(seed, "mask"));
    let mask = make_mask(r.mask.kind()?, mask_seed, r.nodes / r.edm_sublayers, 1)?;
    let washout = config
        .training
        .washout
        .unwrap_or_else(|| default_washout(&grid, r.edm_sublayers));
    let cfg = ReservoirConfig {
        params,
        grid,
        mask,
        edm_sublayers: r.edm_sublayers,
        readout_desync: r.readout_desync,
        mode: r.engine,
        washout,
        integration: IntegrationSettings {
            scheme: r.scheme,
            step: r.step_ns,
        },
        initial: InitialHistory::SteadyState,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn default_length(task: TaskName) -> usize {
    match task {
        TaskName::Narma10 => 5000,
        TaskName::ChannelEq => 10_000,
        TaskName::SantaFeSurrogate => 4000,
        TaskName::SantaFe | TaskName::MemoryCapacity => 0,
    }
}

/// Dataset for a resolved config, covering washout plus the kept length.
pub fn build_dataset(config: &ExperimentConfig, washout: usize, seed: u64) -> Result<TaskDataset> {
    let t = &config.task;
    let data_seed = t.seed.unwrap_or_else(|| sub_seed(seed, "task"));
    let total = washout + t.length.unwrap_or_else(|| default_length(t.name));
    let mut ds = match t.name {
        TaskName::Narma10 => tasks::narma10(total, data_seed)?,
        TaskName::ChannelEq => {
            let snr = t.snr_db.unwrap_or(tasks::standard::CHANNEL_DEFAULT_SNR_DB);
            let opts = match t.channel {
                ChannelVariant::Standard => ChannelOptions::standard(snr),
                ChannelVariant::Linear => ChannelOptions::linear(snr),
                ChannelVariant::Identity => ChannelOptions::identity(snr),
            };
            tasks::channel_eq_with(total, &opts, data_seed)?
        }
        TaskName::SantaFe => {
            let path = t
                .path
                .clone()
                .or_else(|| std::env::var_os(SANTA_FE_ENV).map(PathBuf::from))
                .ok_or_else(|| {
                    Error::config(format!("santa_fe needs task.path or ${SANTA_FE_ENV}"))
                })?;
            tasks::santa_fe_load(&path)?
        }
        TaskName::SantaFeSurrogate => tasks::santa_fe_surrogate(total, data_seed)?,
        TaskName::MemoryCapacity => {
            return Err(Error::config("memory_capacity has no fixed dataset"));
        }
    };
    if let Some(f) = t.train_fraction {
        ds.split.train_fraction = f;
    }
    ds.washout = washout;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub nmse: Option<f64>,
    pub ser: Option<f64>,
    pub error_rate: Option<f64>,
    pub mc_linear: Option<f64>,
    pub mc_quadratic: Option<f64>,
    pub mc_cross: Option<f64>,
    pub mc_total: Option<f64>,
}

impl Metrics {
    pub const NAMES: [&'static str; 7] = [
        "nmse",
        "ser",
        "error_rate",
        "mc_linear",
        "mc_quadratic",
        "mc_cross",
        "mc_total",
    ];

    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.nmse,
            self.ser,
            self.error_rate,
            self.mc_linear,
            self.mc_quadratic,
            self.mc_cross,
            self.mc_total,
        ]
    }

    fn from_capacity(mc: &MemoryCapacity) -> Self {
        Self {
            mc_linear: Some(mc.linear_total),
            mc_quadratic: Some(mc.quadratic_total),
            mc_cross: Some(mc.cross_total),
            mc_total: Some(mc.total),
            ..Default::default()
        }
    }
}

pub fn probe_settings(config: &ExperimentConfig, seed: u64, exec: Execution) -> ProbeSettings {
    let t = &config.task;
    let d = ProbeSettings::default();
    ProbeSettings {
        train: t.probe_train.unwrap_or(d.train),
        test: t.probe_test.unwrap_or(d.test),
        max_lag: t.max_lag,
        seed: t.seed.unwrap_or_else(|| sub_seed(seed, "task")),
        lambda: config.training.lambda,
        exec,
    }
}

/// Generate, run, train and score one resolved configuration.
pub fn evaluate(config: &ExperimentConfig, seed: u64, exec: Execution) -> Result<Metrics> {
    let rc = build_reservoir(config, seed)?;
    if config.task.name == TaskName::MemoryCapacity {
        let mc = memory_capacity(&rc, &probe_settings(config, seed, exec))?;
        return Ok(Metrics::from_capacity(&mc));
    }
    let ds = build_dataset(config, rc.washout, seed)?;
    let states = run(&rc, &ds.inputs)?;
    let targets = ds.targets.columns(rc.washout, states.steps()).into_owned();
    let teacher = TeacherMatrix::regression(targets.clone());
    let lambda = config
        .training
        .lambda
        .unwrap_or_else(|| default_lambda(&states.values));
    let bias = config.training.bias;
    let symbols = config.task.name == TaskName::ChannelEq;

    if config.training.folds > 1 {
        let report = cross_validate(&states, &teacher, lambda, bias, config.training.folds, exec, |y, t| {
            nmse(y.as_slice(), t.as_slice())
        })?;
        let mut m = Metrics {
            nmse: Some(report.mean),
            ..Default::default()
        };
        if symbols {
            let r = cross_validate(&states, &teacher, lambda, bias, config.training.folds, exec, |y, t| {
                let decoded: Vec<f64> = y.iter().map(|&v| decode_symbol(v)).collect();
                ser(&decoded, t.as_slice())
            })?;
            m.ser = Some(r.mean);
            m.error_rate = m.ser;
        }
        return Ok(m);
    }

    let q = states.steps();
    let split = (q as f64 * ds.split.train_fraction).floor() as usize;
    if split == 0 || split >= q {
        return Err(Error::Length {
            needed: 2,
            available: q,
        });
    }
    let train = states.columns(0, split);
    let test = states.columns(split, q);
    let w = ridge_train(&train, &TeacherMatrix::regression(targets.columns(0, split).into_owned()), lambda, bias)?;
    let y = predict(&w, &test)?;
    let t_test: DMatrix<f64> = targets.columns(split, q - split).into_owned();
    let mut m = Metrics {
        nmse: Some(nmse(y.as_slice(), t_test.as_slice())?),
        ..Default::default()
    };
    if symbols {
        let decoded: Vec<f64> = y.iter().map(|&v| decode_symbol(v)).collect();
        m.ser = Some(ser(&decoded, t_test.as_slice())?);
        m.error_rate = m.ser;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub index: usize,
    pub fingerprint: String,
    pub seed: u64,
    pub swept: Vec<(String, f64)>,
    pub metrics: Metrics,
    /// `None` on success, the failure message otherwise.
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn evaluate_point(point: &PointSpec, exec: Execution) -> ResultRecord {
    let start = Instant::now();
    let outcome = evaluate(&point.config, point.seed, exec);
    let wall_time_s = start.elapsed().as_secs_f64();
    let (metrics, failure) = match outcome {
        Ok(m) => (m, None),
        Err(e) => {
            warn!("grid point {} failed: {e}", point.index);
            (Metrics::default(), Some(e.to_string()))
        }
    };
    ResultRecord {
        index: point.index,
        fingerprint: point.fingerprint.clone(),
        seed: point.seed,
        swept: point.swept.clone(),
        metrics,
        failure,
        wall_time_s,
    }
}

/// Check every grid point before any work starts.
pub fn validate_points(points: &[PointSpec]) -> Result<()> {
    for p in points {
        build_reservoir(&p.config, p.seed)
            .map_err(|e| Error::Config(format!("grid point {}: {e}", p.index)))?;
    }
    Ok(())
}

/// Evaluate all grid points. Points run concurrently under `Parallel`; the
/// result order is the grid order either way.
pub fn run_sweep(exp: &Experiment, exec: Execution, threads: Option<usize>) -> Result<Vec<ResultRecord>> {
    let points = exp.points()?;
    validate_points(&points)?;
    // nested parallelism inside a point would reorder nothing, but keep it flat
    let inner = if points.len() > 1 { Execution::Sequential } else { exec };
    Ok(with_threads(threads, || {
        map_indexed(points.len(), exec, |i| evaluate_point(&points[i], inner))
    }))
}

/// Header and rows of the results table. No wall-clock data, so identical
/// runs give identical bytes.
pub fn write_results_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["index".into(), "fingerprint".into(), "seed".into()];
    if let Some(first) = records.first() {
        header.extend(first.swept.iter().map(|(n, _)| n.clone()));
    }
    header.push("status".into());
    header.extend(Metrics::NAMES.iter().map(|s| s.to_string()));
    header.push("message".into());
    w.write_record(&header).map_err(csv_error)?;
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.index);
    for r in sorted {
        let mut row = vec![r.index.to_string(), r.fingerprint.clone(), r.seed.to_string()];
        row.extend(r.swept.iter().map(|(_, v)| format_float(*v)));
        row.push(if r.ok() { "ok".into() } else { "failed".into() });
        row.extend(r.metrics.values().iter().map(|v| v.map(format_float).unwrap_or_default()));
        row.push(r.failure.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per record, wall time included.
pub fn write_results_jsonl<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Config(format!("log record: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    InertiaCoupling,
    Intermediate,
    Instantaneous,
}

pub fn regime(node_duration: f64, response_time: f64) -> Regime {
    let ratio = node_duration / response_time;
    if ratio < 1.0 {
        Regime::InertiaCoupling
    } else if ratio >= 50.0 {
        Regime::Instantaneous
    } else {
        Regime::Intermediate
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub points: usize,
    pub notes: Vec<String>,
}

/// Dry run: parse, resolve every grid point and describe the dynamical regime.
pub fn validate(exp: &Experiment) -> Result<ValidationReport> {
    let points = exp.points()?;
    validate_points(&points)?;
    let mut notes = Vec::new();
    let r = &exp.base.reservoir;
    let ratio = r.node_duration_ns / r.response_time_ns;
    match regime(r.node_duration_ns, r.response_time_ns) {
        Regime::InertiaCoupling => notes.push(format!(
            "inertia-coupling regime: δτ = {ratio:.3}·T_R, neighbouring nodes couple through the response time"
        )),
        Regime::Intermediate => notes.push(format!(
            "intermediate regime: δτ = {ratio:.3}·T_R, partial inertia coupling"
        )),
        Regime::Instantaneous => notes.push(format!(
            "instantaneous regime: δτ = {ratio:.3}·T_R, nodes settle within their slot"
        )),
    }
    if r.engine == Engine::DiscreteMap && ratio < 50.0 {
        notes.push("discrete_map ignores the response time; use continuous_dde to keep inertia coupling".into());
    }
    if r.engine == Engine::Elm {
        notes.push("ELM mode: open loop, no feedback memory".into());
    }
    if r.readout_desync != 0.0 && r.edm_sublayers > 1 {
        notes.push("readout desync with EDM reads past sub-reservoir boundaries".into());
    }
    if exp.axes.is_empty() {
        notes.push("single point".into());
    } else {
        let dims: Vec<String> = exp.axes.iter().map(|(n, v)| format!("{n} × {}", v.len())).collect();
        notes.push(format!("sweep over {}: {} points", dims.join(", "), points.len()));
    }
    Ok(ValidationReport {
        points: points.len(),
        notes,
    })
}

/// Per-lag memory-capacity table.
pub fn write_capacity_csv<W: Write>(mc: &MemoryCapacity, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lag", "linear", "quadratic", "cross"]).map_err(csv_error)?;
    for d in 0..mc.linear.len() {
        w.write_record([
            d.to_string(),
            format_float(mc.linear[d]),
            format_float(mc.quadratic[d]),
            format_float(mc.cross[d]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Memory capacity of the first grid point of an experiment.
pub fn capacity_report(exp: &Experiment, exec: Execution) -> Result<MemoryCapacity> {
    let point = exp.point(0)?;
    let rc = build_reservoir(&point.config, point.seed)?;
    memory_capacity(&rc, &probe_settings(&point.config, point.seed, exec))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
master_seed = 7

[reservoir]
engine = "map"
nodes = 10
response_time_ns = 0.01
beta = 0.8
rho = 0.5
phi0_rad = 0.3

[task]
name = "narma10"
length = 500
"#;

    #[test]
    fn minimal_config_runs() {
        let exp = Experiment::from_str(MINIMAL).unwrap();
        assert_eq!(exp.point_count(), 1);
        let records = run_sweep(&exp, Execution::Sequential, None).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].ok(), "{:?}", records[0].failure);
        assert!(records[0].metrics.nmse.unwrap().is_finite());
    }

    #[test]
    fn unknown_field_is_named() {
        let text = MINIMAL.replace("beta = 0.8", "beta = 0.8\nbetta = 1");
        let err = Experiment::from_str(&text).unwrap_err().to_string();
        assert!(err.contains("betta"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn sweep_grid_and_fingerprints() {
        let text = format!(
            "{MINIMAL}\n[sweep]\nbeta = [0.2, 0.5, 0.8]\nphi0_rad = {{ start = 0.0, stop = 0.2, step = 0.1 }}\n"
        );
        let exp = Experiment::from_str(&text).unwrap();
        assert_eq!(exp.point_count(), 9);
        let points = exp.points().unwrap();
        let mut fps: Vec<&str> = points.iter().map(|p| p.fingerprint.as_str()).collect();
        fps.sort();
        fps.dedup();
        assert_eq!(fps.len(), 9);
        assert_eq!(points[1].swept[0], ("reservoir.beta".into(), 0.2));
        assert!((points[1].swept[1].1 - 0.1).abs() < 1e-15);
        assert_eq!(points[3].config.reservoir.beta, Some(0.5));
        assert_eq!(points[0].fingerprint, Experiment::from_str(&text).unwrap().points().unwrap()[0].fingerprint);
    }

    #[test]
    fn sweep_names_must_exist() {
        let text = format!("{MINIMAL}\n[sweep]\nbogus = [1.0]\n");
        assert!(Experiment::from_str(&text).is_err());
        let text = format!("{MINIMAL}\n[sweep]\nnodes = [10, 20]\n");
        let exp = Experiment::from_str(&text).unwrap();
        assert_eq!(exp.point(1).unwrap().config.reservoir.nodes, 20);
        let text = format!("{MINIMAL}\n[sweep]\n\"task.length\" = [400, 600]\n");
        assert_eq!(Experiment::from_str(&text).unwrap().point(0).unwrap().config.task.length, Some(400));
    }

    #[test]
    fn validation_errors_and_notes() {
        let elm = MINIMAL.replace("engine = \"map\"", "engine = \"elm\"");
        let exp = Experiment::from_str(&elm).unwrap();
        assert!(validate(&exp).is_err());

        let big_k = MINIMAL.replace("nodes = 10", "nodes = 10\ndesync = 10");
        assert!(validate(&Experiment::from_str(&big_k).unwrap()).is_err());

        let inertia = MINIMAL.replace("response_time_ns = 0.01", "response_time_ns = 5.0");
        let report = validate(&Experiment::from_str(&inertia).unwrap()).unwrap();
        assert!(report.notes[0].starts_with("inertia-coupling regime"));
    }

    #[test]
    fn csv_is_deterministic() {
        let text = format!("{MINIMAL}\n[sweep]\nbeta = [0.3, 0.6]\n");
        let exp = Experiment::from_str(&text).unwrap();
        let a = run_sweep(&exp, Execution::Sequential, None).unwrap();
        let b = run_sweep(&exp, Execution::Parallel, Some(2)).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_results_csv(&a, &mut ca).unwrap();
        write_results_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("index,fingerprint,seed,reservoir.beta,status,nmse,"));
    }

    #[test]
    fn divergence_marks_row_failed() {
        let text = MINIMAL
            .replace("engine = \"map\"", "engine = \"dde\"")
            .replace("nonlinearity", "x")
            .replace("beta = 0.8", "beta = 3.0\nnonlinearity = \"linear\"")
            .replace("response_time_ns = 0.01", "response_time_ns = 0.1")
            .replace("length = 500", "length = 200");
        let exp = Experiment::from_str(&text).unwrap();
        let records = run_sweep(&exp, Execution::Sequential, None).unwrap();
        assert!(!records[0].ok());
        assert!(records[0].failure.as_ref().unwrap().contains("diverged"));
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(1, 0), point_seed(1, 1));
        assert_eq!(point_seed(1, 5), point_seed(1, 5));
    }
}
