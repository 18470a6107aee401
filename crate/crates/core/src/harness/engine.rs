//! Per-seed execution: the old-space phase, the mapping fit, and the
//! new-space phase for single models and two-model ensembles.

use std::cell::OnceCell;

use rand::Rng;

use crate::buffer::{InsertDecision, ReservoirDraw};
use crate::ensemble::{EnsembleState, RiskNormalizer};
use crate::error::{Error, Result};
use crate::kernelspace::KernelConfig;
use crate::learner::{OnlineLearner, UpdateRule};
use crate::mapping::{default_ridge, fit_mapping, LinearMap};
use crate::predictor::{KernelPredictor, Label, Loss, RiskParams, Sample, SpaceId};
use crate::stream::{sub_rng, Stream};

/// Predictor and graph kernels of one feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceKernels {
    pub predictor: KernelConfig,
    pub graph: KernelConfig,
}

impl SpaceKernels {
    pub fn shared(k: KernelConfig) -> Self {
        Self { predictor: k, graph: k }
    }
}

/// Fully resolved model hyperparameters for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub lambda1: f64,
    pub lambda2: f64,
    pub loss: Loss,
    pub buffer: usize,
    /// Keep every sample instead of a reservoir.
    pub unbuffered: bool,
    pub s1: SpaceKernels,
    pub s2: SpaceKernels,
    pub eta: f64,
    pub mapping_ridge: Option<f64>,
    /// Half-width of the uniform draw for the initial coefficient; 0 starts from zero.
    pub init_scale: f64,
    pub cap_warmup: usize,
    pub cap_quantile: f64,
    pub recovered_clock: StepClock,
    /// Label-gated learners offer every sample to their reservoir, not only labeled ones.
    pub plain_offers_all: bool,
}

/// Step-size clock of the recovered-space model after the feature change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepClock {
    /// `1/sqrt(t - T1)`: restart with the new phase.
    #[default]
    Phase,
    /// `1/sqrt(t)`: keep counting from the old-space phase.
    Global,
}

impl StepClock {
    fn tau(self, step: usize, k: usize) -> f64 {
        let n = match self {
            StepClock::Phase => k,
            StepClock::Global => step,
        };
        1.0 / (n as f64).sqrt()
    }
}

/// Which buffer a trace row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerSlot {
    Old,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    pub slot: LearnerSlot,
    pub decision: InsertDecision,
}

/// State after the old-space phase.
#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub learner: OnlineLearner,
    pub mapping: LinearMap,
    /// `(x2, x1)` overlap pairs the mapping was fitted on.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrace {
    /// Weights used for the prediction of each round.
    pub weights: Vec<[f64; 2]>,
    pub base_risks: Vec<[f64; 2]>,
    pub clipped_base: Vec<[f64; 2]>,
    /// Clipped ensemble risk, charged with the post-update weights.
    pub clipped_ensemble: Vec<f64>,
    pub cap: f64,
}

/// Everything one method produced over the new-space phase of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub scores: Vec<f64>,
    pub correct: Vec<bool>,
    /// Raw instantaneous risk per round.
    pub risks: Vec<f64>,
    pub ensemble: Option<EnsembleTrace>,
    pub trace: Vec<TraceRow>,
}

impl MethodRun {
    fn with_capacity(n: usize) -> Self {
        Self {
            scores: Vec::with_capacity(n),
            correct: Vec::with_capacity(n),
            risks: Vec::with_capacity(n),
            ensemble: None,
            trace: Vec::new(),
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.correct.is_empty() {
            return 0.0;
        }
        self.correct.iter().filter(|&&c| c).count() as f64 / self.correct.len() as f64
    }

    pub fn cumulative_risk(&self) -> f64 {
        self.risks.iter().sum()
    }

    fn record(&mut self, score: f64, truth: Label, risk: f64) -> Result<()> {
        if !score.is_finite() || !risk.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite prediction or risk at new-space round {} (score {score}, risk {risk})",
                self.scores.len() + 1
            )));
        }
        self.scores.push(score);
        self.correct.push(Label::from_score(score) == truth);
        self.risks.push(risk);
        Ok(())
    }
}

/// How a single-model method obtains its new-space predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingleModel {
    /// A learner started from scratch on `x2`.
    Fresh { manifold: bool },
    /// The old-space learner applied to `psi(x2)`.
    Recovered { manifold: bool, frozen: bool },
}

/// Shared randomness and cached old-space phases for every method of one seed.
///
/// All methods read the same reservoir draw for a given step and the same
/// initial coefficients, so runs are paired.
#[derive(Debug)]
pub struct SeedContext<'a> {
    stream: &'a Stream,
    settings: &'a ModelSettings,
    draws: Vec<ReservoirDraw>,
    init_coefficients: [f64; 2],
    init_mr: OnceCell<InitOutcome>,
    init_plain: OnceCell<InitOutcome>,
}

impl<'a> SeedContext<'a> {
    pub fn new(stream: &'a Stream, settings: &'a ModelSettings, seed: u64) -> Self {
        let mut rng = sub_rng(seed, 10);
        let draws = (0..stream.events.len()).map(|_| ReservoirDraw::sample(&mut rng)).collect();
        let mut rng = sub_rng(seed, 11);
        let mut coef = || {
            if settings.init_scale > 0.0 {
                rng.gen_range(-settings.init_scale..=settings.init_scale)
            } else {
                0.0
            }
        };
        let init_coefficients = [coef(), coef()];
        Self {
            stream,
            settings,
            draws,
            init_coefficients,
            init_mr: OnceCell::new(),
            init_plain: OnceCell::new(),
        }
    }

    pub fn stream(&self) -> &Stream {
        self.stream
    }

    pub fn settings(&self) -> &ModelSettings {
        self.settings
    }

    pub fn init_coefficients(&self) -> [f64; 2] {
        self.init_coefficients
    }

    fn draw(&self, step: usize) -> ReservoirDraw {
        self.draws[step - 1]
    }

    /// The old-space phase, run once per flavour and cached.
    pub fn init(&self, manifold: bool) -> Result<&InitOutcome> {
        let cell = if manifold { &self.init_mr } else { &self.init_plain };
        if let Some(done) = cell.get() {
            return Ok(done);
        }
        let outcome = initialize_phase(self, manifold)?;
        Ok(cell.get_or_init(|| outcome))
    }

    fn learner(&self, space: SpaceId, manifold: bool) -> Result<OnlineLearner> {
        let s = self.settings;
        let (kernels, dim, c) = match space {
            SpaceId::S1 => (s.s1, self.stream.d1(), self.init_coefficients[0]),
            SpaceId::S2 => (s.s2, self.stream.d2(), self.init_coefficients[1]),
        };
        let params = RiskParams::new(
            s.lambda1,
            s.lambda2,
            1.0 / self.stream.schedule.label_prob,
            s.loss,
            kernels.graph,
        )?;
        let rule = if manifold { UpdateRule::Manifold } else { UpdateRule::LabeledOnly };
        let pred = KernelPredictor::empty(kernels.predictor, space, dim);
        let learner = if s.unbuffered {
            OnlineLearner::unbuffered(pred, params, rule)
        } else {
            OnlineLearner::buffered(pred, s.buffer, params, rule)
        };
        Ok(learner.with_initial_coefficient(c).with_unlabeled_offers(s.plain_offers_all))
    }
}

/// Trains the old-space learner over rounds `1..=T1` with step size
/// `1/sqrt(t)` and fits the mapping on the overlap pairs.
pub fn initialize_phase(ctx: &SeedContext<'_>, manifold: bool) -> Result<InitOutcome> {
    let mut learner = ctx.learner(SpaceId::S1, manifold)?;
    let mut pairs = Vec::with_capacity(ctx.stream.schedule.overlap);
    let mut trace = Vec::new();
    for ev in ctx.stream.init_events() {
        let x1 = ev
            .s1()
            .ok_or_else(|| Error::Internal(format!("step {} has no old-space view", ev.step)))?;
        let sample = Sample::new(x1.to_vec(), SpaceId::S1, ev.revealed_label, ev.step);
        let tau = 1.0 / (ev.step as f64).sqrt();
        if let Some(decision) = learner.update(&sample, ctx.draw(ev.step), tau)? {
            trace.push(TraceRow {
                step: ev.step,
                slot: LearnerSlot::Old,
                decision,
            });
        }
        if let Some(x2) = ev.s2() {
            pairs.push((x2.to_vec(), x1.to_vec()));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Config("the mapping needs an overlap period with B >= 1".into()));
    }
    let ridge = ctx.settings.mapping_ridge.unwrap_or_else(|| default_ridge(&pairs));
    let mapping = fit_mapping(&pairs, ridge)?;
    Ok(InitOutcome {
        learner,
        mapping,
        pairs,
        trace,
    })
}

struct NewRound {
    step: usize,
    k: usize,
    x2: Vec<f64>,
    label: Option<Label>,
    truth: Label,
}

fn new_rounds(stream: &Stream) -> Result<impl Iterator<Item = NewRound> + '_> {
    let t1 = stream.schedule.t1;
    if let Some(bad) = stream.new_space_events().iter().find(|e| e.s2().is_none()) {
        return Err(Error::Internal(format!("step {} has no new-space view", bad.step)));
    }
    Ok(stream.new_space_events().iter().map(move |ev| NewRound {
        step: ev.step,
        k: ev.step - t1,
        x2: ev.s2().unwrap_or_default().to_vec(),
        label: ev.revealed_label,
        truth: ev.true_label,
    }))
}

fn push_trace(trace: &mut Vec<TraceRow>, step: usize, slot: LearnerSlot, decision: Option<InsertDecision>) {
    if let Some(decision) = decision {
        trace.push(TraceRow { step, slot, decision });
    }
}

/// Runs one predictor over the new-space phase.
pub fn run_single(ctx: &SeedContext<'_>, model: SingleModel) -> Result<MethodRun> {
    let (mut learner, mapping, slot) = match model {
        SingleModel::Fresh { manifold } => (ctx.learner(SpaceId::S2, manifold)?, None, LearnerSlot::New),
        SingleModel::Recovered { manifold, frozen } => {
            let init = ctx.init(manifold)?;
            let mut l = init.learner.clone();
            if frozen {
                l.set_rule(UpdateRule::Frozen);
            }
            (l, Some(&init.mapping), LearnerSlot::Old)
        }
    };
    let space = learner.predictor().space();
    let mut run = MethodRun::with_capacity(ctx.stream.schedule.t2);
    for r in new_rounds(ctx.stream)? {
        let x = match mapping {
            Some(m) => m.apply(&r.x2)?,
            None => r.x2,
        };
        let sample = Sample::new(x, space, r.label, r.step);
        let score = learner.predict(&sample.features)?;
        let risk = learner.risk(&sample)?;
        run.record(score, r.truth, risk)?;
        let tau = match slot {
            LearnerSlot::Old => ctx.settings.recovered_clock.tau(r.step, r.k),
            LearnerSlot::New => StepClock::Phase.tau(r.step, r.k),
        };
        let decision = learner.update(&sample, ctx.draw(r.step), tau)?;
        push_trace(&mut run.trace, r.step, slot, decision);
    }
    Ok(run)
}

/// Runs the two-model ensemble over the new-space phase. With `manifold`
/// off, both bases update on labeled rounds only.
pub fn run_ensemble(ctx: &SeedContext<'_>, manifold: bool) -> Result<MethodRun> {
    let s = ctx.settings;
    let init = ctx.init(manifold)?;
    let mut f1 = init.learner.clone();
    let mut f2 = ctx.learner(SpaceId::S2, manifold)?;
    let mut state = EnsembleState::new(s.eta)?;
    let mut normalizer = RiskNormalizer::new(s.cap_warmup, s.cap_quantile);
    let t2 = ctx.stream.schedule.t2;
    let mut run = MethodRun::with_capacity(t2);
    let mut trace = EnsembleTrace {
        weights: Vec::with_capacity(t2),
        base_risks: Vec::with_capacity(t2),
        clipped_base: Vec::with_capacity(t2),
        clipped_ensemble: Vec::with_capacity(t2),
        cap: 0.0,
    };
    for r in new_rounds(ctx.stream)? {
        let s1 = Sample::new(init.mapping.apply(&r.x2)?, SpaceId::S1, r.label, r.step);
        let s2 = Sample::new(r.x2, SpaceId::S2, r.label, r.step);
        let p1 = f1.predict(&s1.features)?;
        let p2 = f2.predict(&s2.features)?;
        trace.weights.push(state.weights());
        let score = state.combine(p1, p2);

        let raw = [f1.risk(&s1)?, f2.risk(&s2)?];
        let clipped = normalizer.observe(raw);
        state.update_weights(clipped[0], clipped[1])?;
        run.record(score, r.truth, state.ensemble_risk(raw[0], raw[1]))?;
        trace.base_risks.push(raw);
        trace.clipped_base.push(clipped);
        trace.clipped_ensemble.push(state.ensemble_risk(clipped[0], clipped[1]));

        let draw = ctx.draw(r.step);
        let d1 = f1.update(&s1, draw, s.recovered_clock.tau(r.step, r.k))?;
        let d2 = f2.update(&s2, draw, StepClock::Phase.tau(r.step, r.k))?;
        push_trace(&mut run.trace, r.step, LearnerSlot::Old, d1);
        push_trace(&mut run.trace, r.step, LearnerSlot::New, d2);
    }
    trace.cap = normalizer.cap();
    run.ensemble = Some(trace);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_clocks() {
        assert_eq!(StepClock::Phase.tau(1004, 4), 0.5);
        assert_eq!(StepClock::Global.tau(16, 4), 0.25);
        assert_eq!(StepClock::default(), StepClock::Phase);
        let c: StepClock = toml::Value::String("global".into()).try_into().unwrap();
        assert_eq!(c, StepClock::Global);
    }
}
