//! A single-space online learner: a kernel predictor plus the memory that
//! feeds its manifold term, dispatching each round to the matching update
//! path of [`crate::predictor`].

use crate::buffer::{InsertDecision, ReservoirBuffer, ReservoirDraw};
use crate::error::Result;
use crate::predictor::{
    buffered_risk, full_risk_oracle, step_direct_append, step_no_insert, step_oracle,
    step_with_replacement, KernelPredictor, RiskParams, Sample,
};

/// When a learner updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Every round, labeled or not, with the manifold penalty.
    Manifold,
    /// Only on labeled rounds, with the manifold penalty disabled.
    LabeledOnly,
    /// Never.
    Frozen,
}

#[derive(Debug, Clone)]
enum Memory {
    Reservoir(ReservoirBuffer<Vec<f64>>),
    /// Every past sample; the unbuffered reference regime.
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct OnlineLearner {
    predictor: KernelPredictor,
    memory: Memory,
    params: RiskParams,
    rule: UpdateRule,
    pending_init: Option<f64>,
    init_unmerged: bool,
    offer_unlabeled: bool,
}

impl OnlineLearner {
    /// Learner whose manifold term is estimated from a reservoir of `capacity` samples.
    pub fn buffered(predictor: KernelPredictor, capacity: usize, params: RiskParams, rule: UpdateRule) -> Self {
        Self::with_memory(predictor, Memory::Reservoir(ReservoirBuffer::new(capacity)), params, rule)
    }

    /// Learner that keeps every sample and sums the manifold term over all of them.
    pub fn unbuffered(predictor: KernelPredictor, params: RiskParams, rule: UpdateRule) -> Self {
        Self::with_memory(predictor, Memory::Full(Vec::new()), params, rule)
    }

    fn with_memory(predictor: KernelPredictor, memory: Memory, params: RiskParams, rule: UpdateRule) -> Self {
        let params = match rule {
            UpdateRule::LabeledOnly => params.without_manifold(),
            _ => params,
        };
        Self {
            predictor,
            memory,
            params,
            rule,
            pending_init: None,
            init_unmerged: false,
            offer_unlabeled: false,
        }
    }

    /// Starts from `coefficient * k(x_first, .)`, where `x_first` is the
    /// first point this learner sees.
    pub fn with_initial_coefficient(mut self, coefficient: f64) -> Self {
        if coefficient != 0.0 && self.predictor.is_empty() {
            self.pending_init = Some(coefficient);
        }
        self
    }

    /// Under [`UpdateRule::LabeledOnly`], still offer unlabeled samples to the
    /// memory. Such rounds take no gradient step: an accepted sample enters
    /// with a zero coefficient and an evicted representer is projected out.
    pub fn with_unlabeled_offers(mut self, on: bool) -> Self {
        self.offer_unlabeled = on;
        self
    }

    pub fn predictor(&self) -> &KernelPredictor {
        &self.predictor
    }

    pub fn params(&self) -> &RiskParams {
        &self.params
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    /// Switches the update rule, keeping the learned state.
    pub fn set_rule(&mut self, rule: UpdateRule) {
        self.rule = rule;
    }

    /// Samples offered to this learner's memory so far.
    pub fn seen_count(&self) -> usize {
        match &self.memory {
            Memory::Reservoir(b) => b.seen_count(),
            Memory::Full(h) => h.len(),
        }
    }

    pub fn memory_points(&self) -> &[Vec<f64>] {
        match &self.memory {
            Memory::Reservoir(b) => b.contents(),
            Memory::Full(h) => h,
        }
    }

    fn materialize_init(&mut self, x: &[f64]) -> Result<()> {
        if let Some(c) = self.pending_init.take() {
            self.predictor = self.predictor.clone().with_representer(x.to_vec(), c)?;
            self.init_unmerged = true;
        }
        Ok(())
    }

    pub fn predict(&mut self, x: &[f64]) -> Result<f64> {
        self.materialize_init(x)?;
        self.predictor.evaluate(x)
    }

    /// Instantaneous risk of the current predictor on this round's sample.
    pub fn risk(&mut self, x_t: &Sample) -> Result<f64> {
        self.materialize_init(&x_t.features)?;
        match &self.memory {
            Memory::Reservoir(b) => buffered_risk(&self.predictor, x_t, b, &self.params, b.seen_count() + 1),
            Memory::Full(h) => full_risk_oracle(&self.predictor, x_t, h, &self.params),
        }
    }

    /// Would this learner update on `x_t` under its rule?
    pub fn wants_update(&self, x_t: &Sample) -> bool {
        match self.rule {
            UpdateRule::Manifold => true,
            UpdateRule::LabeledOnly => x_t.label.is_some(),
            UpdateRule::Frozen => false,
        }
    }

    /// One gradient step on `x_t`. Returns the memory decision, or `None`
    /// when the update rule skipped this round.
    pub fn update(&mut self, x_t: &Sample, draw: ReservoirDraw, tau: f64) -> Result<Option<InsertDecision>> {
        let tau = if self.wants_update(x_t) {
            tau
        } else if self.rule == UpdateRule::LabeledOnly && self.offer_unlabeled {
            0.0
        } else {
            return Ok(None);
        };
        self.materialize_init(&x_t.features)?;
        let (next, decision) = match &mut self.memory {
            Memory::Full(history) => {
                let next = step_oracle(&self.predictor, x_t, history, &self.params, tau)?;
                history.push(x_t.features.clone());
                (next, InsertDecision::AppendedDirect)
            }
            Memory::Reservoir(buf) => {
                let t = buf.seen_count() + 1;
                let decision = buf.decide(draw);
                let next = match decision {
                    InsertDecision::AppendedDirect => {
                        step_direct_append(&self.predictor, x_t, buf, &self.params, tau, t)?
                    }
                    InsertDecision::Replaced(i) => {
                        step_with_replacement(&self.predictor, x_t, buf, i, &self.params, tau, t)?
                    }
                    InsertDecision::Skipped => step_no_insert(&self.predictor, x_t, buf, &self.params, tau, t)?,
                };
                buf.apply(x_t.features.clone(), decision);
                (next, decision)
            }
        };
        self.predictor = next;
        // An initial representer sitting on the first stored sample merges with it.
        if std::mem::take(&mut self.init_unmerged) {
            self.predictor.fuse_leading_duplicate();
        }
        Ok(Some(decision))
    }
}
