//! End-to-end experiments: every requested method over every seed on paired
//! streams, aggregated into a [`RunReport`] and written as CSV.

pub mod config;
pub mod engine;
mod output;

use rayon::prelude::*;

use crate::baselines::run_baseline;
use crate::ensemble::default_eta;
use crate::error::{Error, Result};
use crate::kernelspace::{median_heuristic, KernelConfig};
use crate::stream::{generate_stream_with, load_dataset, make_swiss_with, Dataset, Stream};

pub use config::{parse_methods, DatasetSource, ExperimentConfig, Method};
pub use engine::{
    initialize_phase, run_ensemble, run_single, EnsembleTrace, InitOutcome, LearnerSlot, MethodRun,
    ModelSettings, SeedContext, SingleModel, SpaceKernels, StepClock, TraceRow,
};
pub use output::{write_buffer_trace, write_report, write_sweep};

/// Samples used by the median bandwidth heuristic.
pub const HEURISTIC_SAMPLES: usize = 100;

/// Builds the configured base dataset.
pub fn load_base_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.dataset;
    match d.source {
        DatasetSource::Swiss => make_swiss_with(d.n, d.swiss_params(), d.seed),
        DatasetSource::Csv => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("dataset source 'csv' needs a path".into()))?;
            load_dataset(path, d.has_header)
        }
    }
}

pub fn make_stream(cfg: &ExperimentConfig, base: &Dataset, seed: u64) -> Result<Stream> {
    generate_stream_with(base, cfg.schedule.schedule()?, cfg.dataset.d2, seed, cfg.dataset.swap_spaces)
}

/// Fixes bandwidths and rates for one stream. Unset bandwidths come from
/// the median heuristic: old-space views of the first rounds for `S1`, the
/// overlap views for `S2`.
pub fn resolve_settings(cfg: &ExperimentConfig, stream: &Stream) -> Result<ModelSettings> {
    let m = &cfg.model;
    let kernels = |points: Vec<&[f64]>| -> Result<SpaceKernels> {
        let sigma = match m.sigma {
            Some(s) => s,
            None => median_heuristic(&points, HEURISTIC_SAMPLES).unwrap_or(1.0) * m.sigma_scale,
        };
        let predictor = KernelConfig::new(sigma)?;
        let graph = match m.graph_sigma {
            Some(g) => KernelConfig::new(g)?,
            None => KernelConfig::new(sigma * m.graph_sigma_scale)?,
        };
        Ok(SpaceKernels { predictor, graph })
    };
    let s1 = kernels(stream.init_events().iter().filter_map(|e| e.s1()).collect())?;
    let s2 = kernels(stream.init_events().iter().filter_map(|e| e.s2()).collect())?;
    Ok(ModelSettings {
        lambda1: m.lambda1,
        lambda2: m.lambda2,
        loss: cfg.loss()?,
        buffer: m.buffer,
        unbuffered: m.unbuffered,
        s1,
        s2,
        eta: m.eta.unwrap_or_else(|| default_eta(stream.schedule.t2)),
        mapping_ridge: m.mapping_ridge,
        init_scale: m.init_scale,
        cap_warmup: m.cap_warmup,
        cap_quantile: m.cap_quantile,
        recovered_clock: m.recovered_clock,
        plain_offers_all: m.plain_offers_all,
    })
}

/// Runs one method on a prepared seed context.
pub fn run_method(method: Method, ctx: &SeedContext<'_>) -> Result<MethodRun> {
    match method {
        Method::Sf2el => run_ensemble(ctx, true),
        Method::Baseline(kind) => run_baseline(kind, ctx),
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub settings: ModelSettings,
    pub runs: Vec<(Method, MethodRun)>,
    /// Reservoir decisions of the old-space phase (manifold-regularized learner).
    pub init_trace: Vec<TraceRow>,
}

impl SeedResult {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|(m, _)| *m == method).map(|(_, r)| r)
    }
}

pub fn run_seed(cfg: &ExperimentConfig, base: &Dataset, methods: &[Method], seed: u64) -> Result<SeedResult> {
    let stream = make_stream(cfg, base, seed)?;
    let settings = resolve_settings(cfg, &stream)?;
    let ctx = SeedContext::new(&stream, &settings, seed);
    let runs = methods
        .iter()
        .map(|&m| run_method(m, &ctx).map(|r| (m, r)))
        .collect::<Result<Vec<_>>>()?;
    let init_trace = if cfg.run.buffer_trace && methods.contains(&Method::Sf2el) {
        ctx.init(true)?.trace.clone()
    } else {
        Vec::new()
    };
    Ok(SeedResult {
        seed,
        settings,
        runs,
        init_trace,
    })
}

/// Seed-averaged results of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub accuracies: Vec<f64>,
    pub accuracy_mean: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub accuracy_std: f64,
    /// Mean over seeds of the summed raw risk.
    pub final_cum_risk: f64,
    /// Raw risk per round, averaged over seeds.
    pub risk: Vec<f64>,
    /// Average cumulative risk `sum_{s<=t} J_s / t`, averaged over seeds.
    pub avg_cum_risk: Vec<f64>,
}

/// Per-round ensemble weights and cumulative clipped risks, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub weights: Vec<[f64; 2]>,
    pub ens_cum_clipped: Vec<f64>,
    pub min_base_cum_clipped: Vec<f64>,
    /// `sqrt(T2 ln 2)`.
    pub slack: f64,
    pub mean_cap: f64,
    /// Seeds whose final cumulative clipped ensemble risk broke the bound.
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seeds: Vec<SeedResult>,
    pub methods: Vec<MethodSummary>,
    pub ensemble: Option<EnsembleSummary>,
}

impl RunReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn average_series(series: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for s in series {
        if sum.is_empty() {
            sum = vec![0.0; s.len()];
        }
        for (a, b) in sum.iter_mut().zip(&s) {
            *a += b;
        }
        n += 1;
    }
    sum.iter().map(|v| v / n.max(1) as f64).collect()
}

fn prefix_sums(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

pub fn summarize(seeds: &[SeedResult], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let runs: Vec<&MethodRun> = seeds.iter().filter_map(|s| s.run(method)).collect();
            let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy()).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&accuracies);
            let final_cum_risk = runs.iter().map(|r| r.cumulative_risk()).sum::<f64>() / runs.len() as f64;
            let risk = average_series(runs.iter().map(|r| r.risks.clone()));
            let avg_cum_risk = average_series(runs.iter().map(|r| {
                prefix_sums(&r.risks)
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c / (i + 1) as f64)
                    .collect()
            }));
            MethodSummary {
                method,
                accuracies,
                accuracy_mean,
                accuracy_std,
                final_cum_risk,
                risk,
                avg_cum_risk,
            }
        })
        .collect()
}

fn summarize_ensemble(seeds: &[SeedResult], t2: usize) -> Option<EnsembleSummary> {
    let traces: Vec<&EnsembleTrace> = seeds
        .iter()
        .filter_map(|s| s.run(Method::Sf2el))
        .filter_map(|r| r.ensemble.as_ref())
        .collect();
    if traces.is_empty() {
        return None;
    }
    let slack = (t2 as f64 * std::f64::consts::LN_2).sqrt();
    let mut violations = 0;
    let mut ens = Vec::new();
    let mut best = Vec::new();
    for tr in &traces {
        let e = prefix_sums(&tr.clipped_ensemble);
        let c1 = prefix_sums(&tr.clipped_base.iter().map(|c| c[0]).collect::<Vec<_>>());
        let c2 = prefix_sums(&tr.clipped_base.iter().map(|c| c[1]).collect::<Vec<_>>());
        let m: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a.min(*b)).collect();
        if e.last().copied().unwrap_or(0.0) > m.last().copied().unwrap_or(0.0) + slack {
            violations += 1;
        }
        ens.push(e);
        best.push(m);
    }
    let a1 = average_series(traces.iter().map(|t| t.weights.iter().map(|w| w[0]).collect()));
    let a2 = average_series(traces.iter().map(|t| t.weights.iter().map(|w| w[1]).collect()));
    Some(EnsembleSummary {
        weights: a1.into_iter().zip(a2).map(|(a, b)| [a, b]).collect(),
        ens_cum_clipped: average_series(ens.into_iter()),
        min_base_cum_clipped: average_series(best.into_iter()),
        slack,
        mean_cap: traces.iter().map(|t| t.cap).sum::<f64>() / traces.len() as f64,
        violations,
    })
}

/// Runs every configured method over every seed. Seeds may run in
/// parallel; results are assembled in seed order, so the report does not
/// depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let base = load_base_dataset(cfg)?;
    let methods = cfg.methods()?;
    let seeds: Vec<u64> = cfg.seeds().collect();
    let results: Vec<SeedResult> = if cfg.run.parallel {
        seeds
            .par_iter()
            .map(|&s| run_seed(cfg, &base, &methods, s))
            .collect::<Result<_>>()?
    } else {
        seeds
            .iter()
            .map(|&s| run_seed(cfg, &base, &methods, s))
            .collect::<Result<_>>()?
    };
    Ok(RunReport {
        methods: summarize(&results, &methods),
        ensemble: summarize_ensemble(&results, cfg.schedule.t2),
        seeds: results,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub buffer: usize,
    pub summaries: Vec<MethodSummary>,
}

/// Repeats [`run_experiment`] for each buffer capacity with the same seeds.
pub fn sweep_buffer(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() {
        return Err(Error::Config("buffer sweep needs at least one size".into()));
    }
    sizes
        .iter()
        .map(|&b| {
            let mut c = cfg.clone();
            c.model.buffer = b;
            let report = run_experiment(&c)?;
            Ok(SweepRow {
                buffer: b,
                summaries: report.methods,
            })
        })
        .collect()
}
