//! Kernel-expansion predictors and their manifold-regularized online updates.
//!
//! A predictor is `f(x) = sum_s beta_s k(x_s, x)`. Each round it suffers the
//! instantaneous risk
//!
//! ```text
//! J(f) = inv_p * [label revealed] * loss(f(x_t), y_t)
//!      + lambda1 / 2 * |f|_K^2
//!      + lambda2 * scale * sum_{s in graph} (f(x_s) - f(x_t))^2 w(x_s, x_t)
//! ```
//!
//! where the graph is either the whole history (`scale = 1`) or a reservoir of
//! `b_eff` samples out of `t - 1` (`scale = (t - 1) / b_eff`). One functional
//! gradient step `f - tau * grad J` adds a representer at `x_t`; when the
//! reservoir is full the result is projected back onto the span of the
//! buffered representers.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::buffer::ReservoirBuffer;
use crate::error::{check_dim, Error, Result};
use crate::kernelspace::{cross_gram, gram_matrix, KernelConfig};

/// Ridge added to the target Gram matrix when projecting.
pub const PROJECTION_RIDGE: f64 = 1e-8;

/// Which side of the feature evolution a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceId {
    S1,
    S2,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceId::S1 => f.write_str("S1"),
            SpaceId::S2 => f.write_str("S2"),
        }
    }
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// Sign rule with ties broken towards `Positive`.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }
}

/// One observation: features in a given space plus an optional revealed label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub space: SpaceId,
    pub label: Option<Label>,
    /// Round index, starting at 1.
    pub step: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, space: SpaceId, label: Option<Label>, step: usize) -> Self {
        Self {
            features,
            space,
            label,
            step,
        }
    }

    pub fn unlabeled(features: Vec<f64>, space: SpaceId) -> Self {
        Self::new(features, space, None, 1)
    }

    pub fn labeled(features: Vec<f64>, space: SpaceId, label: Label) -> Self {
        Self::new(features, space, Some(label), 1)
    }
}

/// Supervised loss on a real-valued score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Logistic,
    Hinge,
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loss::Logistic => f.write_str("logistic"),
            Loss::Hinge => f.write_str("hinge"),
        }
    }
}

/// Loss value and its (sub)derivative with respect to the score.
pub fn prediction_loss(loss: Loss, score: f64, y: Label) -> (f64, f64) {
    let y = y.value();
    let margin = y * score;
    match loss {
        Loss::Logistic => {
            // ln(1 + e^{-m}) without overflow on either tail
            let value = if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            };
            let deriv = -y / (1.0 + margin.exp());
            (value, deriv)
        }
        Loss::Hinge => {
            if 1.0 - margin > 0.0 {
                (1.0 - margin, -y)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// Hyperparameters of the instantaneous regularized risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Inverse label probability, `1 / p_l`.
    pub inv_label_prob: f64,
    pub loss: Loss,
    pub graph_kernel: KernelConfig,
}

impl RiskParams {
    pub fn new(
        lambda1: f64,
        lambda2: f64,
        inv_label_prob: f64,
        loss: Loss,
        graph_kernel: KernelConfig,
    ) -> Result<Self> {
        if !(lambda1 >= 0.0) || !(lambda2 >= 0.0) {
            return Err(Error::Config(format!(
                "penalties must be nonnegative (lambda1 = {lambda1}, lambda2 = {lambda2})"
            )));
        }
        if !(inv_label_prob >= 1.0) || !inv_label_prob.is_finite() {
            return Err(Error::Config(format!(
                "inverse label probability must be >= 1, got {inv_label_prob}"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            inv_label_prob,
            loss,
            graph_kernel,
        })
    }

    /// Same parameters with the manifold penalty switched off.
    pub fn without_manifold(&self) -> Self {
        Self {
            lambda2: 0.0,
            ..*self
        }
    }
}

/// Kernel expansion `f(x) = sum_s beta_s k(x_s, x)` over a feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPredictor {
    kernel: KernelConfig,
    space: SpaceId,
    dim: usize,
    representers: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

impl KernelPredictor {
    /// The zero function.
    pub fn empty(kernel: KernelConfig, space: SpaceId, dim: usize) -> Self {
        Self {
            kernel,
            space,
            dim,
            representers: Vec::new(),
            coefficients: Vec::new(),
        }
    }

    pub fn from_parts(
        kernel: KernelConfig,
        space: SpaceId,
        dim: usize,
        representers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        if representers.len() != coefficients.len() {
            return Err(Error::Input(format!(
                "{} representers but {} coefficients",
                representers.len(),
                coefficients.len()
            )));
        }
        for r in &representers {
            check_dim(dim, r.len(), "representer")?;
        }
        Ok(Self {
            kernel,
            space,
            dim,
            representers,
            coefficients,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn representers(&self) -> &[Vec<f64>] {
        &self.representers
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len(), "evaluate")?;
        Ok(self.eval(x))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.representers
            .iter()
            .zip(&self.coefficients)
            .map(|(r, b)| b * self.kernel.eval(r, x))
            .sum()
    }

    /// Squared RKHS norm `beta^T G beta`, clamped at zero.
    pub fn rkhs_norm_sq(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let g = gram_matrix(&self.kernel, &self.representers)
            .expect("representers share the predictor dimension");
        let beta = DVector::from_column_slice(&self.coefficients);
        beta.dot(&(&g * &beta)).max(0.0)
    }

    /// Adds `coefficient * k(point, .)` as a new representer.
    pub fn with_representer(mut self, point: Vec<f64>, coefficient: f64) -> Result<Self> {
        check_dim(self.dim, point.len(), "with_representer")?;
        self.representers.push(point);
        self.coefficients.push(coefficient);
        Ok(self)
    }

    /// Merges the first two representers into one when they coincide.
    pub(crate) fn fuse_leading_duplicate(&mut self) {
        if self.len() >= 2 && self.representers[0] == self.representers[1] {
            let extra = self.coefficients.remove(1);
            self.representers.remove(1);
            self.coefficients[0] += extra;
        }
    }
}

/// Manifold scale for a reservoir holding `occupancy` of the `t - 1` past samples.
pub fn buffered_scale(t: usize, occupancy: usize) -> f64 {
    if occupancy == 0 {
        0.0
    } else {
        t.saturating_sub(1) as f64 / occupancy as f64
    }
}

/// Graph over which the manifold penalty is summed.
#[derive(Clone, Copy)]
struct Graph<'a> {
    points: &'a [Vec<f64>],
    scale: f64,
}

fn check_sample(f: &KernelPredictor, x_t: &Sample) -> Result<()> {
    check_dim(f.dim, x_t.features.len(), "sample")
}

fn check_points(dim: usize, points: &[Vec<f64>], what: &str) -> Result<()> {
    points.iter().try_for_each(|p| check_dim(dim, p.len(), what))
}

fn risk_core(f: &KernelPredictor, x_t: &Sample, graph: Graph<'_>, params: &RiskParams) -> f64 {
    let fx = f.eval(&x_t.features);
    let mut risk = 0.0;
    if let Some(y) = x_t.label {
        risk += params.inv_label_prob * prediction_loss(params.loss, fx, y).0;
    }
    risk += 0.5 * params.lambda1 * f.rkhs_norm_sq();
    if params.lambda2 != 0.0 && !graph.points.is_empty() {
        let manifold: f64 = graph
            .points
            .iter()
            .map(|xs| {
                let d = f.eval(xs) - fx;
                d * d * params.graph_kernel.eval(xs, &x_t.features)
            })
            .sum();
        risk += params.lambda2 * graph.scale * manifold;
    }
    risk
}

/// Manifold component `scale * sum_s (f(x_s) - f(x_t))^2 w_st` alone (no lambda2).
pub fn manifold_term(
    f: &KernelPredictor,
    x_t: &[f64],
    graph: &[Vec<f64>],
    scale: f64,
    graph_kernel: &KernelConfig,
) -> Result<f64> {
    check_dim(f.dim, x_t.len(), "manifold_term")?;
    check_points(f.dim, graph, "graph point")?;
    let fx = f.eval(x_t);
    Ok(scale
        * graph
            .iter()
            .map(|xs| {
                let d = f.eval(xs) - fx;
                d * d * graph_kernel.eval(xs, x_t)
            })
            .sum::<f64>())
}

/// Instantaneous risk with the manifold term estimated from a reservoir.
pub fn buffered_risk(
    f: &KernelPredictor,
    x_t: &Sample,
    buffer: &ReservoirBuffer<Vec<f64>>,
    params: &RiskParams,
    t: usize,
) -> Result<f64> {
    check_sample(f, x_t)?;
    check_points(f.dim, buffer.contents(), "buffered sample")?;
    let graph = Graph {
        points: buffer.contents(),
        scale: buffered_scale(t, buffer.occupancy()),
    };
    Ok(risk_core(f, x_t, graph, params))
}

/// Instantaneous risk with the manifold term summed over the whole history.
pub fn full_risk_oracle(
    f: &KernelPredictor,
    x_t: &Sample,
    history: &[Vec<f64>],
    params: &RiskParams,
) -> Result<f64> {
    check_sample(f, x_t)?;
    check_points(f.dim, history, "history sample")?;
    let graph = Graph {
        points: history,
        scale: 1.0,
    };
    Ok(risk_core(f, x_t, graph, params))
}

/// One functional-gradient step. Returns `f - tau * grad J` expressed over the
/// old representers plus `x_t` appended last.
///
/// Graph contributions land on the representer aligned with each graph point,
/// so a nonempty graph must match the representers one to one.
fn gradient_step(
    f: &KernelPredictor,
    x_t: &Sample,
    graph: Graph<'_>,
    params: &RiskParams,
    tau: f64,
) -> Result<KernelPredictor> {
    if params.lambda2 != 0.0 && !graph.points.is_empty() && graph.points.len() != f.len() {
        return Err(Error::Internal(format!(
            "graph of {} points is not aligned with {} representers",
            graph.points.len(),
            f.len()
        )));
    }
    let x = &x_t.features;
    let fx = f.eval(x);
    let shrink = 1.0 - tau * params.lambda1;
    let mut coefficients: Vec<f64> = f.coefficients.iter().map(|b| shrink * b).collect();
    let mut new_coef = 0.0;
    if params.lambda2 != 0.0 && !graph.points.is_empty() {
        let factor = 2.0 * tau * params.lambda2 * graph.scale;
        for (beta, xs) in coefficients.iter_mut().zip(graph.points) {
            let g = factor * (f.eval(xs) - fx) * params.graph_kernel.eval(xs, x);
            *beta -= g;
            new_coef += g;
        }
    }
    if let Some(y) = x_t.label {
        let (_, deriv) = prediction_loss(params.loss, fx, y);
        new_coef -= tau * params.inv_label_prob * deriv;
    }
    coefficients.push(new_coef);
    let mut representers = f.representers.clone();
    representers.push(x.clone());
    Ok(KernelPredictor {
        kernel: f.kernel,
        space: f.space,
        dim: f.dim,
        representers,
        coefficients,
    })
}

/// Update used while the reservoir still has room: `x_t` joins the expansion.
pub fn step_direct_append(
    f: &KernelPredictor,
    x_t: &Sample,
    buffer: &ReservoirBuffer<Vec<f64>>,
    params: &RiskParams,
    tau: f64,
    t: usize,
) -> Result<KernelPredictor> {
    check_sample(f, x_t)?;
    let graph = Graph {
        points: buffer.contents(),
        scale: buffered_scale(t, buffer.occupancy()),
    };
    gradient_step(f, x_t, graph, params, tau)
}

/// Unbuffered update: the manifold term runs over the full history with scale 1.
pub fn step_oracle(
    f: &KernelPredictor,
    x_t: &Sample,
    history: &[Vec<f64>],
    params: &RiskParams,
    tau: f64,
) -> Result<KernelPredictor> {
    check_sample(f, x_t)?;
    gradient_step(
        f,
        x_t,
        Graph {
            points: history,
            scale: 1.0,
        },
        params,
        tau,
    )
}

/// Update used when the reservoir replaced slot `replaced_index` with `x_t`.
///
/// The `b + 1` term intermediate is projected onto the post-replacement
/// buffer, whose slot order the returned representers follow. `buffer` is the
/// state *before* the replacement.
pub fn step_with_replacement(
    f: &KernelPredictor,
    x_t: &Sample,
    buffer: &ReservoirBuffer<Vec<f64>>,
    replaced_index: usize,
    params: &RiskParams,
    tau: f64,
    t: usize,
) -> Result<KernelPredictor> {
    check_sample(f, x_t)?;
    if replaced_index >= buffer.occupancy() {
        return Err(Error::Internal(format!(
            "replaced index {replaced_index} outside buffer of {}",
            buffer.occupancy()
        )));
    }
    let intermediate = step_direct_append(f, x_t, buffer, params, tau, t)?;
    let mut targets = buffer.contents().to_vec();
    targets[replaced_index] = x_t.features.clone();
    let projection = project_onto_span(&intermediate, &targets)?;
    Ok(KernelPredictor {
        kernel: f.kernel,
        space: f.space,
        dim: f.dim,
        representers: targets,
        coefficients: projection.coefficients,
    })
}

/// Update used when the reservoir declined `x_t`.
///
/// Unlabeled rounds only move the buffered coefficients. Labeled rounds route
/// through a temporary representer at `x_t` that is projected back out, so the
/// supervised gradient still reaches the buffered expansion.
pub fn step_no_insert(
    f: &KernelPredictor,
    x_t: &Sample,
    buffer: &ReservoirBuffer<Vec<f64>>,
    params: &RiskParams,
    tau: f64,
    t: usize,
) -> Result<KernelPredictor> {
    check_sample(f, x_t)?;
    let mut intermediate = step_direct_append(f, x_t, buffer, params, tau, t)?;
    if x_t.label.is_none() {
        intermediate.representers.pop();
        intermediate.coefficients.pop();
        return Ok(intermediate);
    }
    let targets = buffer.contents().to_vec();
    let projection = project_onto_span(&intermediate, &targets)?;
    Ok(KernelPredictor {
        kernel: f.kernel,
        space: f.space,
        dim: f.dim,
        representers: targets,
        coefficients: projection.coefficients,
    })
}

/// Best RKHS approximation of a function within the span of `target_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// `|f' - sum_s beta_s k(z_s, .)|_K^2`, clamped at zero.
    pub residual_norm_sq: f64,
}

/// Solves `(G_zz + eps I) beta = G_zr beta'` for the projection coefficients.
pub fn project_onto_span(f_prime: &KernelPredictor, target_points: &[Vec<f64>]) -> Result<Projection> {
    if target_points.is_empty() {
        return Err(Error::Input("projection needs at least one target point".into()));
    }
    check_points(f_prime.dim, target_points, "target point")?;
    let kernel = &f_prime.kernel;
    let g_zz = gram_matrix(kernel, target_points)?;
    let g_zr = cross_gram(kernel, target_points, &f_prime.representers);
    let beta_prime = DVector::from_column_slice(&f_prime.coefficients);
    let rhs = &g_zr * &beta_prime;
    let system = &g_zz + DMatrix::<f64>::identity(g_zz.nrows(), g_zz.ncols()) * PROJECTION_RIDGE;
    let beta = match system.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => system.clone().lu().solve(&rhs).ok_or_else(|| {
            Error::Numerical(format!(
                "projection system of size {} is singular even with ridge {PROJECTION_RIDGE}; \
                 target points may contain non-finite values",
                target_points.len()
            ))
        })?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical(format!(
            "projection produced non-finite coefficients over {} targets",
            target_points.len()
        )));
    }
    let g_rr = gram_matrix(kernel, &f_prime.representers)?;
    let residual = beta_prime.dot(&(&g_rr * &beta_prime)) - 2.0 * beta.dot(&rhs)
        + beta.dot(&(&g_zz * &beta));
    Ok(Projection {
        coefficients: beta.iter().copied().collect(),
        residual_norm_sq: residual.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> KernelConfig {
        KernelConfig::new(1.0).unwrap()
    }

    fn params(lambda1: f64, lambda2: f64, inv_p: f64) -> RiskParams {
        RiskParams::new(lambda1, lambda2, inv_p, Loss::Logistic, unit()).unwrap()
    }

    fn pred(reps: &[[f64; 2]], coefs: &[f64]) -> KernelPredictor {
        KernelPredictor::from_parts(
            unit(),
            SpaceId::S1,
            2,
            reps.iter().map(|r| r.to_vec()).collect(),
            coefs.to_vec(),
        )
        .unwrap()
    }

    fn buffer_of(points: &[[f64; 2]], capacity: usize) -> ReservoirBuffer<Vec<f64>> {
        let mut buf = ReservoirBuffer::new(capacity);
        let draw = crate::buffer::ReservoirDraw { accept: 0.0, victim: 0.0 };
        for p in points {
            buf.offer_with(p.to_vec(), draw);
        }
        buf
    }

    #[test]
    fn evaluate_cases() {
        let empty = KernelPredictor::empty(unit(), SpaceId::S1, 2);
        assert_eq!(empty.evaluate(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(pred(&[[0.3, 0.4]], &[2.5]).evaluate(&[0.3, 0.4]).unwrap(), 2.5);
        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, -1.0]);
        assert_relative_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), 1.0 - (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(f.evaluate(&[0.0, 0.0]).unwrap(), 0.864665, epsilon = 1e-6);
        assert!(matches!(f.evaluate(&[0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn from_parts_validates() {
        assert!(KernelPredictor::from_parts(unit(), SpaceId::S1, 2, vec![vec![0.0, 0.0]], vec![]).is_err());
        assert!(KernelPredictor::from_parts(unit(), SpaceId::S1, 2, vec![vec![0.0]], vec![1.0]).is_err());
    }

    #[test]
    fn rkhs_norm_cases() {
        assert_eq!(KernelPredictor::empty(unit(), SpaceId::S2, 3).rkhs_norm_sq(), 0.0);
        assert_relative_eq!(pred(&[[5.0, 5.0]], &[3.0]).rkhs_norm_sq(), 9.0);
        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, 1.0]);
        assert_relative_eq!(f.rkhs_norm_sq(), 2.0 + 2.0 * (-2.0f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(f.rkhs_norm_sq(), 2.270671, epsilon = 1e-6);
    }

    #[test]
    fn loss_values() {
        let (l, d) = prediction_loss(Loss::Logistic, 0.0, Label::Positive);
        assert_relative_eq!(l, std::f64::consts::LN_2);
        assert_relative_eq!(d, -0.5);
        assert_eq!(prediction_loss(Loss::Hinge, 1.0, Label::Positive), (0.0, 0.0));
        assert_eq!(prediction_loss(Loss::Hinge, -1.0, Label::Positive), (2.0, -1.0));
        assert_eq!(prediction_loss(Loss::Hinge, 0.5, Label::Negative), (1.5, 1.0));
        // tails stay finite
        let (l, d) = prediction_loss(Loss::Logistic, -800.0, Label::Positive);
        assert_relative_eq!(l, 800.0);
        assert_relative_eq!(d, -1.0);
        let (l, d) = prediction_loss(Loss::Logistic, 800.0, Label::Positive);
        assert_eq!(l, 0.0);
        assert_eq!(d, 0.0);
        assert!(matches!("squared".parse::<Loss>(), Err(Error::Config(_))));
        assert_eq!("Hinge".parse::<Loss>().unwrap(), Loss::Hinge);
    }

    #[test]
    fn risk_params_validation() {
        assert!(RiskParams::new(-0.1, 0.0, 1.0, Loss::Hinge, unit()).is_err());
        assert!(RiskParams::new(0.1, -1.0, 1.0, Loss::Hinge, unit()).is_err());
        assert!(RiskParams::new(0.1, 0.0, 0.5, Loss::Hinge, unit()).is_err());
    }

    #[test]
    fn buffered_risk_examples() {
        // unlabeled, lambda2 = 0: only the norm penalty remains
        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, 1.0]);
        let buf = buffer_of(&[[0.0, 0.0], [2.0, 0.0]], 5);
        let x = Sample::unlabeled(vec![1.0, 1.0], SpaceId::S1);
        let r = buffered_risk(&f, &x, &buf, &params(0.4, 0.0, 1.0), 3).unwrap();
        assert_relative_eq!(r, 0.2 * f.rkhs_norm_sq(), epsilon = 1e-14);

        // zero function, labeled y = +1, inverse label probability 1/0.3
        let zero = KernelPredictor::empty(unit(), SpaceId::S1, 2);
        let x = Sample::labeled(vec![1.0, 1.0], SpaceId::S1, Label::Positive);
        let r = buffered_risk(&zero, &x, &buf, &params(0.0, 1.0, 1.0 / 0.3), 3).unwrap();
        assert_relative_eq!(r, std::f64::consts::LN_2 / 0.3, epsilon = 1e-14);
        assert_relative_eq!(r, 2.310490, epsilon = 1e-6);

        // single graph edge
        let f = pred(&[[0.0, 0.0]], &[1.0]);
        let buf = buffer_of(&[[0.0, 0.0]], 5);
        let x = Sample::unlabeled(vec![2.0, 0.0], SpaceId::S1);
        let r = buffered_risk(&f, &x, &buf, &params(0.0, 1.0, 1.0), 2).unwrap();
        let e2 = (-2.0f64).exp();
        assert_relative_eq!(r, (1.0 - e2).powi(2) * e2, epsilon = 1e-15);
        assert_relative_eq!(r, 0.101183, epsilon = 1e-6);

        assert!(buffered_risk(&f, &Sample::unlabeled(vec![0.0], SpaceId::S1), &buf, &params(0.0, 1.0, 1.0), 2).is_err());
    }

    #[test]
    fn oracle_matches_buffer_when_unscaled() {
        let f = pred(&[[0.0, 0.0], [1.0, 0.5], [-0.5, 2.0]], &[0.7, -0.2, 0.4]);
        let pts = [[0.0, 0.0], [1.0, 0.5], [-0.5, 2.0]];
        let buf = buffer_of(&pts, 10);
        let hist: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let x = Sample::labeled(vec![0.2, 0.1], SpaceId::S1, Label::Negative);
        let p = params(0.1, 0.3, 2.0);
        assert_eq!(
            buffered_risk(&f, &x, &buf, &p, 4).unwrap(),
            full_risk_oracle(&f, &x, &hist, &p).unwrap()
        );
        // empty history: manifold term vanishes
        let r0 = full_risk_oracle(&f, &x, &[], &p).unwrap();
        let r_nomf = full_risk_oracle(&f, &x, &hist, &p.without_manifold()).unwrap();
        assert_relative_eq!(r0, r_nomf, epsilon = 1e-15);
    }

    #[test]
    fn direct_append_examples() {
        let zero = KernelPredictor::empty(unit(), SpaceId::S1, 2);
        let empty_buf = ReservoirBuffer::new(4);
        let x = Sample::unlabeled(vec![1.0, 0.0], SpaceId::S1);
        let f1 = step_direct_append(&zero, &x, &empty_buf, &params(0.1, 5.0, 1.0), 0.7, 1).unwrap();
        assert_eq!(f1.coefficients(), &[0.0]);

        let x = Sample::labeled(vec![1.0, 0.0], SpaceId::S1, Label::Positive);
        let f1 = step_direct_append(&zero, &x, &empty_buf, &params(0.0, 0.0, 1.0), 1.0, 1).unwrap();
        assert_eq!(f1.coefficients(), &[0.5]);
        assert_eq!(f1.representers(), &[vec![1.0, 0.0]]);

        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, -3.0]);
        let buf = buffer_of(&[[0.0, 0.0], [2.0, 0.0]], 4);
        let x = Sample::unlabeled(vec![0.5, 0.5], SpaceId::S1);
        let f1 = step_direct_append(&f, &x, &buf, &params(1.0, 0.0, 1.0), 0.5, 3).unwrap();
        assert_eq!(f1.coefficients(), &[0.5, -1.5, 0.0]);
    }

    #[test]
    fn direct_append_manifold_hand_check() {
        // one buffered point r=(0,0) with beta=1, x_t=(2,0) unlabeled
        let f = pred(&[[0.0, 0.0]], &[1.0]);
        let buf = buffer_of(&[[0.0, 0.0]], 4);
        let x = Sample::unlabeled(vec![2.0, 0.0], SpaceId::S1);
        let tau = 0.25;
        let f1 = step_direct_append(&f, &x, &buf, &params(0.0, 1.0, 1.0), tau, 2).unwrap();
        let e2 = (-2.0f64).exp();
        let g = 2.0 * tau * (1.0 - e2) * e2;
        assert_relative_eq!(f1.coefficients()[0], 1.0 - g, epsilon = 1e-15);
        assert_relative_eq!(f1.coefficients()[1], g, epsilon = 1e-15);
    }

    #[test]
    fn misaligned_graph_is_internal_error() {
        let f = pred(&[[0.0, 0.0]], &[1.0]);
        let buf = buffer_of(&[[0.0, 0.0], [1.0, 1.0]], 4);
        let x = Sample::unlabeled(vec![2.0, 0.0], SpaceId::S1);
        assert!(matches!(
            step_direct_append(&f, &x, &buf, &params(0.0, 1.0, 1.0), 0.5, 3),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn projection_examples() {
        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, 1.0]);
        let same = project_onto_span(&f, f.representers()).unwrap();
        assert_relative_eq!(same.coefficients[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(same.coefficients[1], 1.0, epsilon = 1e-6);
        assert!(same.residual_norm_sq < 1e-7);

        let single = pred(&[[0.3, -0.2]], &[-1.7]);
        let p = project_onto_span(&single, single.representers()).unwrap();
        assert_relative_eq!(p.coefficients[0], -1.7, epsilon = 1e-6);

        let e2 = (-2.0f64).exp();
        let p = project_onto_span(&f, &[vec![0.0, 0.0]]).unwrap();
        assert_relative_eq!(p.coefficients[0], 1.0 + e2, epsilon = 1e-7);
        assert_relative_eq!(p.coefficients[0], 1.135335, epsilon = 1e-6);
        assert_relative_eq!(p.residual_norm_sq, 2.0 + 2.0 * e2 - (1.0 + e2).powi(2), epsilon = 1e-7);
        assert_relative_eq!(p.residual_norm_sq, 0.981684, epsilon = 1e-6);

        assert!(matches!(project_onto_span(&f, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn replacement_exact_when_victim_has_zero_weight() {
        // f' puts no weight on the replaced slot: x_t unlabeled, lambda2 = 0 and
        // the victim's coefficient already zero.
        let f = pred(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.5]], &[0.8, 0.0, -0.6]);
        let buf = buffer_of(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.5]], 3);
        let x = Sample::labeled(vec![0.7, 0.7], SpaceId::S1, Label::Positive);
        let p = params(0.2, 0.0, 1.0);
        let inter = step_direct_append(&f, &x, &buf, &p, 0.5, 4).unwrap();
        assert_eq!(inter.coefficients()[1], 0.0);
        let g = step_with_replacement(&f, &x, &buf, 1, &p, 0.5, 4).unwrap();
        assert_eq!(g.representers()[1], vec![0.7, 0.7]);
        for q in [[0.0, 0.0], [0.3, -1.0], [2.0, 2.0], [0.7, 0.7]] {
            assert_relative_eq!(g.evaluate(&q).unwrap(), inter.evaluate(&q).unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn replacement_of_duplicate_transfers_mass() {
        // slots 0 and 1 hold the same point; replacing slot 1 moves its
        // coefficient onto slot 0 exactly.
        let f = pred(&[[1.0, 1.0], [1.0, 1.0]], &[0.5, 0.25]);
        let buf = buffer_of(&[[1.0, 1.0], [1.0, 1.0]], 2);
        let x = Sample::unlabeled(vec![-1.0, 3.0], SpaceId::S1);
        let p = params(0.0, 0.0, 1.0);
        let g = step_with_replacement(&f, &x, &buf, 1, &p, 1.0, 3).unwrap();
        // 2x2 system [[1, k],[k, 1]] beta = [0.75, 0.75 k] with k = k(z0, x_t)
        // has solution (0.75, 0) up to the ridge
        assert_relative_eq!(g.coefficients()[0], 0.75, epsilon = 1e-6);
        assert!(g.coefficients()[1].abs() < 1e-6);
    }

    #[test]
    fn projection_beats_naive_drop() {
        let f = pred(&[[0.0, 0.0], [0.8, 0.3], [-0.4, 0.9]], &[1.0, -0.7, 0.5]);
        let buf = buffer_of(&[[0.0, 0.0], [0.8, 0.3], [-0.4, 0.9]], 3);
        let x = Sample::labeled(vec![0.5, 0.5], SpaceId::S1, Label::Negative);
        let p = params(0.05, 0.3, 2.0);
        let inter = step_direct_append(&f, &x, &buf, &p, 0.5, 4).unwrap();
        let projected = step_with_replacement(&f, &x, &buf, 1, &p, 0.5, 4).unwrap();
        let mut drop = inter.clone();
        drop.coefficients[1] = 0.0;
        let dist = |g: &KernelPredictor| {
            let mut diff = inter.clone();
            for (r, c) in g.representers.iter().zip(&g.coefficients) {
                diff = diff.with_representer(r.clone(), -c).unwrap();
            }
            diff.rkhs_norm_sq()
        };
        assert!(dist(&projected) <= dist(&drop) + 1e-12);
    }

    #[test]
    fn no_insert_examples() {
        let zero = KernelPredictor::empty(unit(), SpaceId::S1, 2);
        let buf0 = ReservoirBuffer::new(2);
        let x = Sample::unlabeled(vec![1.0, 0.0], SpaceId::S1);
        let g = step_no_insert(&zero, &x, &buf0, &params(0.3, 1.0, 1.0), 1.0, 1).unwrap();
        assert!(g.is_empty());

        let f = pred(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, -3.0]);
        let buf = buffer_of(&[[0.0, 0.0], [2.0, 0.0]], 2);
        let g = step_no_insert(&f, &x, &buf, &params(0.5, 0.0, 1.0), 0.4, 9).unwrap();
        assert_relative_eq!(g.coefficients()[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(g.coefficients()[1], -2.4, epsilon = 1e-15);
        assert_eq!(g.representers(), f.representers());
    }

    #[test]
    fn no_insert_labeled_single_representer() {
        // buffer {r}, f = beta k(r, .), x_t labeled; intermediate is
        // (1 - tau l1) beta k(r,.) + c k(x_t,.), c = -tau inv_p l'(f(x_t), y)
        let r = [0.0, 0.0];
        let f = pred(&[r], &[0.4]);
        let buf = buffer_of(&[r], 1);
        let x = Sample::labeled(vec![1.0, 0.0], SpaceId::S1, Label::Positive);
        let p = params(0.1, 0.0, 2.0);
        let tau = 0.5;
        let g = step_no_insert(&f, &x, &buf, &p, tau, 5).unwrap();
        let k = (-0.5f64).exp();
        let fx = 0.4 * k;
        let deriv = -1.0 / (1.0 + fx.exp());
        let c = -tau * 2.0 * deriv;
        let expected = ((1.0 - tau * 0.1) * 0.4 + c * k) / (1.0 + PROJECTION_RIDGE);
        assert_relative_eq!(g.coefficients()[0], expected, epsilon = 1e-14);
    }

    #[test]
    fn zero_function_is_fixed_without_labels() {
        let p = params(0.1, 3.0, 1.0);
        let mut f = KernelPredictor::empty(unit(), SpaceId::S1, 2);
        let mut buf = ReservoirBuffer::new(3);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        for t in 1..=30usize {
            let xv = vec![(t as f64).sin(), (t as f64 * 0.7).cos()];
            let x = Sample::new(xv.clone(), SpaceId::S1, None, t);
            let draw = crate::buffer::ReservoirDraw::sample(&mut rng);
            let tau = 1.0 / (t as f64).sqrt();
            f = match buf.decide(draw) {
                crate::buffer::InsertDecision::AppendedDirect => step_direct_append(&f, &x, &buf, &p, tau, t).unwrap(),
                crate::buffer::InsertDecision::Replaced(i) => step_with_replacement(&f, &x, &buf, i, &p, tau, t).unwrap(),
                crate::buffer::InsertDecision::Skipped => step_no_insert(&f, &x, &buf, &p, tau, t).unwrap(),
            };
            buf.offer_with(xv, draw);
            assert!(f.coefficients().iter().all(|&c| c == 0.0));
        }
    }
}
