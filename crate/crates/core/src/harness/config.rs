//! Experiment configuration, read from a TOML file with `[dataset]`,
//! `[schedule]`, `[model]` and `[run]` sections. Every key is optional.
//!
//! ```toml
//! [schedule]
//! t1 = 1000
//! overlap = 10
//! t2 = 1000
//! label_prob = 0.3
//!
//! [model]
//! buffer = 60
//! lambda2 = 0.01
//!
//! [run]
//! seeds = 10
//! methods = ["SF2EL", "NOGD_MR"]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::engine::StepClock;
use crate::baselines::BaselineKind;
use crate::error::{Error, Result};
use crate::predictor::Loss;
use crate::stream::{StreamSchedule, SwissParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Baseline(BaselineKind),
    Sf2el,
}

impl Method {
    /// Every method, baselines first.
    pub fn all() -> Vec<Method> {
        let mut v: Vec<Method> = BaselineKind::ALL.into_iter().map(Method::Baseline).collect();
        v.push(Method::Sf2el);
        v
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Sf2el => "SF2EL",
            Method::Baseline(k) => k.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sf2el" | "sf²el" => Ok(Method::Sf2el),
            _ => s
                .parse::<BaselineKind>()
                .map(Method::Baseline)
                .map_err(|_| Error::Config(format!("unknown method '{s}'"))),
        }
    }
}

/// Parses a comma-separated method list; `all` selects every method.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("all") {
            out.extend(Method::all());
        } else {
            out.push(item.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Swiss,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub path: Option<PathBuf>,
    pub has_header: bool,
    /// Swiss sample count.
    pub n: usize,
    pub noise: f64,
    pub inner_radius: f64,
    pub growth: f64,
    pub turns: f64,
    /// Seed of the Swiss generator; the same data is used for every run seed.
    pub seed: u64,
    /// Dimension of the projected space.
    pub d2: usize,
    /// Use the projection as the old space and the raw features as the new one.
    pub swap_spaces: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let swiss = SwissParams::default();
        Self {
            source: DatasetSource::Swiss,
            path: None,
            has_header: false,
            n: 2000,
            noise: swiss.noise_std,
            inner_radius: swiss.inner_radius,
            growth: swiss.growth,
            turns: swiss.turns,
            seed: 0,
            d2: 3,
            swap_spaces: false,
        }
    }
}

impl DatasetConfig {
    pub fn swiss_params(&self) -> SwissParams {
        SwissParams {
            inner_radius: self.inner_radius,
            growth: self.growth,
            turns: self.turns,
            noise_std: self.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub t1: usize,
    pub overlap: usize,
    pub t2: usize,
    pub label_prob: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            t1: 1000,
            overlap: 10,
            t2: 1000,
            label_prob: 0.3,
        }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Result<StreamSchedule> {
        StreamSchedule::new(self.t1, self.overlap, self.t2, self.label_prob)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub buffer: usize,
    pub unbuffered: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    pub loss: String,
    /// Fixed predictor bandwidth for both spaces. Unset: median heuristic times `sigma_scale`.
    pub sigma: Option<f64>,
    pub sigma_scale: f64,
    /// Fixed graph bandwidth for both spaces. Unset: predictor bandwidth times `graph_sigma_scale`.
    pub graph_sigma: Option<f64>,
    pub graph_sigma_scale: f64,
    /// Weight learning rate. Unset: `sqrt(ln 2 / T2)`.
    pub eta: Option<f64>,
    pub mapping_ridge: Option<f64>,
    /// Initial coefficients are drawn from `[-init_scale, init_scale]`; 0 starts from zero.
    pub init_scale: f64,
    pub cap_warmup: usize,
    pub cap_quantile: f64,
    /// Step-size clock of the recovered-space model in the new-space phase.
    pub recovered_clock: StepClock,
    /// Label-gated learners offer unlabeled samples to their reservoir too.
    pub plain_offers_all: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            buffer: 60,
            unbuffered: false,
            lambda1: 0.01,
            lambda2: 0.01,
            loss: "logistic".into(),
            sigma: None,
            sigma_scale: 0.15,
            graph_sigma: None,
            graph_sigma_scale: 1.0,
            eta: None,
            mapping_ridge: None,
            init_scale: 0.1,
            cap_warmup: crate::ensemble::DEFAULT_WARMUP,
            cap_quantile: crate::ensemble::DEFAULT_CAP_QUANTILE,
            recovered_clock: StepClock::Phase,
            plain_offers_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: usize,
    pub base_seed: u64,
    pub methods: Vec<String>,
    pub out_dir: PathBuf,
    /// Write per-round reservoir decisions of the ensemble's two learners.
    pub buffer_trace: bool,
    /// Execute seeds on a thread pool. Output does not depend on it.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            base_seed: 0,
            methods: vec!["all".into()],
            out_dir: PathBuf::from("results"),
            buffer_trace: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        parse_methods(&self.run.methods.join(","))
    }

    pub fn loss(&self) -> Result<Loss> {
        self.model.loss.parse()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.run.seeds as u64).map(|i| self.run.base_seed.wrapping_add(i))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.schedule()?;
        self.methods()?;
        self.loss()?;
        let m = &self.model;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.run.seeds < 1 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if m.buffer < 1 {
            return Err(Error::Config("buffer capacity must be >= 1".into()));
        }
        if !(m.lambda1 >= 0.0 && m.lambda2 >= 0.0) {
            return Err(Error::Config("lambda1 and lambda2 must be nonnegative".into()));
        }
        for (name, v) in [("sigma", m.sigma), ("graph_sigma", m.graph_sigma), ("eta", m.eta)] {
            if let Some(v) = v {
                if !positive(v) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("sigma_scale", m.sigma_scale), ("graph_sigma_scale", m.graph_sigma_scale)] {
            if !positive(v) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = m.mapping_ridge {
            if !(r >= 0.0) {
                return Err(Error::Config(format!("mapping_ridge must be nonnegative, got {r}")));
            }
        }
        if !(m.init_scale >= 0.0) {
            return Err(Error::Config("init_scale must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&m.cap_quantile) {
            return Err(Error::Config("cap_quantile must lie in [0, 1]".into()));
        }
        let d = &self.dataset;
        if d.d2 < 1 {
            return Err(Error::Config("d2 must be >= 1".into()));
        }
        match d.source {
            DatasetSource::Csv if d.path.is_none() => {
                Err(Error::Config("dataset source 'csv' needs a path".into()))
            }
            DatasetSource::Swiss if d.n < 2 || d.n % 2 == 1 || !(d.noise >= 0.0) => Err(Error::Config(
                "swiss needs an even n >= 2 and nonnegative noise".into(),
            )),
            _ => Ok(()),
        }
    }
}
