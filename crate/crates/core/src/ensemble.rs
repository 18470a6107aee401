//! Exponential-weights combination of the two base predictors.

use crate::error::{Error, Result};

/// Number of rounds over which the risk normalizer estimates its cap.
pub const DEFAULT_WARMUP: usize = 50;
/// Quantile of the warm-up risks used as the cap.
pub const DEFAULT_CAP_QUANTILE: f64 = 0.95;

/// Learning rate `sqrt(ln 2 / T2)` that yields the `sqrt(T2 ln 2)` regret term.
pub fn default_eta(t2: usize) -> f64 {
    assert!(t2 >= 1, "T2 must be positive");
    (std::f64::consts::LN_2 / t2 as f64).sqrt()
}

/// Weights and cumulative risks of the two base models.
///
/// Weights are stored as log-weights and renormalized with a max shift, so
/// long streams never underflow both weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    log_weights: [f64; 2],
    cumulative: [f64; 2],
    eta: f64,
}

impl EnsembleState {
    /// Uniform weights `(1/2, 1/2)`.
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        let half = 0.5f64.ln();
        Ok(Self {
            log_weights: [half, half],
            cumulative: [0.0; 2],
            eta,
        })
    }

    pub fn with_weights(eta: f64, weights: [f64; 2]) -> Result<Self> {
        let mut s = Self::new(eta)?;
        let total = weights[0] + weights[1];
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::Config(format!("invalid initial weights {weights:?}")));
        }
        s.log_weights = [(weights[0] / total).ln(), (weights[1] / total).ln()];
        Ok(s)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn weights(&self) -> [f64; 2] {
        let [a, b] = self.log_weights;
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let z = ea + eb;
        [ea / z, eb / z]
    }

    /// Running sums of the risks fed to [`update_weights`](Self::update_weights).
    pub fn cumulative_risks(&self) -> [f64; 2] {
        self.cumulative
    }

    /// Weighted prediction `a1 p1 + a2 p2`.
    pub fn combine(&self, p1: f64, p2: f64) -> f64 {
        let [a1, a2] = self.weights();
        a1 * p1 + a2 * p2
    }

    /// Weighted risk `a1 j1 + a2 j2`.
    ///
    /// The round-`t` risk of the ensemble is charged with the weights after
    /// that round's update, i.e. with cumulative risks that include round `t`.
    /// Under that accounting the total stays within `sqrt(T2 ln 2)` of the
    /// better base model for any risks in `[0, 1]`.
    pub fn ensemble_risk(&self, j1: f64, j2: f64) -> f64 {
        self.combine(j1, j2)
    }

    /// Multiplies each weight by `exp(-eta j_i)` and renormalizes.
    pub fn update_weights(&mut self, j1: f64, j2: f64) -> Result<()> {
        if !j1.is_finite() || !j2.is_finite() {
            return Err(Error::Numerical(format!("non-finite risks ({j1}, {j2})")));
        }
        let mut lw = [
            self.log_weights[0] - self.eta * j1,
            self.log_weights[1] - self.eta * j2,
        ];
        let m = lw[0].max(lw[1]);
        let lse = m + ((lw[0] - m).exp() + (lw[1] - m).exp()).ln();
        lw[0] -= lse;
        lw[1] -= lse;
        if lw.iter().any(|w| w.is_nan()) {
            return Err(Error::Numerical("weight normalization failed".into()));
        }
        self.log_weights = lw;
        self.cumulative[0] += j1;
        self.cumulative[1] += j2;
        Ok(())
    }
}

/// Maps raw risks into `[0, 1]` via `j -> min(j / cap, 1)`.
///
/// The cap is the chosen quantile of all risks seen during the first
/// `warmup` rounds, recomputed each warm-up round and frozen afterwards.
#[derive(Debug, Clone)]
pub struct RiskNormalizer {
    warmup: usize,
    quantile: f64,
    rounds: usize,
    seen: Vec<f64>,
    cap: f64,
    frozen: bool,
}

impl RiskNormalizer {
    pub fn new(warmup: usize, quantile: f64) -> Self {
        Self {
            warmup,
            quantile: quantile.clamp(0.0, 1.0),
            rounds: 0,
            seen: Vec::new(),
            cap: 0.0,
            frozen: warmup == 0,
        }
    }

    /// Normalizer with a fixed cap.
    pub fn fixed(cap: f64) -> Self {
        Self {
            warmup: 0,
            quantile: 1.0,
            rounds: 0,
            seen: Vec::new(),
            cap,
            frozen: true,
        }
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Feeds one round of raw risks (updating the cap while warming up) and
    /// returns them clipped.
    pub fn observe(&mut self, risks: [f64; 2]) -> [f64; 2] {
        if !self.frozen {
            self.seen.extend(risks);
            self.seen.sort_by(f64::total_cmp);
            let idx = ((self.seen.len() - 1) as f64 * self.quantile).round() as usize;
            self.cap = self.seen[idx];
            self.rounds += 1;
            if self.rounds >= self.warmup {
                self.frozen = true;
                self.seen = Vec::new();
            }
        }
        [self.clip(risks[0]), self.clip(risks[1])]
    }

    pub fn clip(&self, j: f64) -> f64 {
        if self.cap > 0.0 {
            (j / self.cap).clamp(0.0, 1.0)
        } else if j > 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

impl Default for RiskNormalizer {
    fn default() -> Self {
        Self::new(DEFAULT_WARMUP, DEFAULT_CAP_QUANTILE)
    }
}
