//! Closed-form performance bounds and quantizer step-size design.
//!
//! Every bound is a function of a few scalars collected in [`BoundInputs`]:
//! the network size N, the realizable edge count |𝓜|, the spectrum of the
//! mean Laplacian (λ2, λN), the quantizer step Δ and the weight sequence.
//! QCF bounds additionally need the initial-state bound `b`, the level
//! parameter `p` and the accuracy `ε`.
//!
//! Infinite sums and products over the weights use closed forms when
//! `tau = 1` and Euler–Maclaurin tails otherwise.

mod design;
mod probability;
mod rates;
pub mod series;

pub use design::{objective, optimize_delta, DeltaDesign};
pub use probability::{
    eps_consensus_lb, eps_consensus_terms, ratio_approx, state_sup_bound, theta_deviation_bound,
    zero_rate_lb, SupForm,
};
pub use rates::{default_varepsilon, i_epsilon, mean_contraction_bound, mean_propagate, mss_bound};

use std::f64::consts::PI;

use serde::Serialize;

use crate::consensus::WeightSequence;
use crate::graph::{mean_laplacian, spectral, LaplacianMatrix, LinkFailureModel, SPECTRAL_TOL};
use crate::{Error, Result};

/// Summary of a concrete initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct X0Stats {
    pub x_avg: f64,
    /// x0ᵀ L̄ x0.
    pub quad_form: f64,
}

impl X0Stats {
    pub fn from_state(x0: &[f64], mean_laplacian: &LaplacianMatrix) -> Self {
        Self {
            x_avg: x0.iter().sum::<f64>() / x0.len() as f64,
            quad_form: mean_laplacian.quadratic_form(x0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n_nodes: usize,
    /// |𝓜|, the number of realizable edges.
    pub m_edges: f64,
    /// E|M(i)|, the expected number of active edges per iteration.
    pub expected_active_edges: f64,
    pub delta: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub b: Option<f64>,
    pub p: Option<u64>,
    pub epsilon: Option<f64>,
    pub weights: WeightSequence,
    pub x0_stats: Option<X0Stats>,
}

impl BoundInputs {
    /// Takes |𝓜|, E|M(i)| and the spectrum of L̄ from a link-failure model.
    pub fn from_model(
        model: &LinkFailureModel,
        delta: f64,
        weights: WeightSequence,
    ) -> Result<Self> {
        let spec = spectral(&mean_laplacian(model)?)?;
        Self::new(
            model.n_nodes(),
            model.base().n_edges() as f64,
            delta,
            spec.lambda2,
            spec.lambda_n,
            weights,
        )
        .map(|s| Self {
            expected_active_edges: model.expected_active_edges(),
            ..s
        })
    }

    /// Inputs for a fixed topology (E|M(i)| = |𝓜|).
    pub fn new(
        n_nodes: usize,
        m_edges: f64,
        delta: f64,
        lambda2: f64,
        lambda_n: f64,
        weights: WeightSequence,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::param("n_nodes", "must be positive"));
        }
        if !(m_edges >= 0.0) {
            return Err(Error::param("m_edges", "must be non-negative"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidStep(delta));
        }
        if !(lambda2 > SPECTRAL_TOL) {
            return Err(Error::NotConnected(lambda2));
        }
        if !(lambda_n >= lambda2) {
            return Err(Error::param("lambda_n", "must be at least lambda2"));
        }
        Ok(Self {
            n_nodes,
            m_edges,
            expected_active_edges: m_edges,
            delta,
            lambda2,
            lambda_n,
            b: None,
            p: None,
            epsilon: None,
            weights,
            x0_stats: None,
        })
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_p(mut self, p: u64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_weights(mut self, weights: WeightSequence) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_x0_stats(mut self, stats: X0Stats) -> Self {
        self.x0_stats = Some(stats);
        self
    }

    pub fn with_expected_active_edges(mut self, e: f64) -> Self {
        self.expected_active_edges = e;
        self
    }

    fn n(&self) -> f64 {
        self.n_nodes as f64
    }

    pub(crate) fn require_b(&self) -> Result<f64> {
        match self.b {
            Some(b) if b > 0.0 && b.is_finite() => Ok(b),
            Some(b) => Err(Error::param("b", format!("must be positive, got {b}"))),
            None => Err(Error::param("b", "initial-state bound is required")),
        }
    }

    pub(crate) fn require_p(&self) -> Result<f64> {
        match self.p {
            Some(p) if p >= 1 => Ok(p as f64),
            _ => Err(Error::param("p", "level parameter p >= 1 is required")),
        }
    }

    pub(crate) fn require_epsilon(&self) -> Result<f64> {
        match self.epsilon {
            Some(e) if e > 0.0 && e.is_finite() => Ok(e),
            Some(e) => Err(Error::param(
                "epsilon",
                format!("must be positive, got {e}"),
            )),
            None => Err(Error::param("epsilon", "accuracy epsilon is required")),
        }
    }
}

/// An evaluated bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    /// Raw value; probability bounds may fall outside [0, 1].
    pub value: f64,
    /// `value` clipped to [0, 1], for probability-typed bounds only.
    pub clamped: Option<f64>,
    pub inputs: BoundInputs,
}

impl BoundReport {
    pub(crate) fn quantity(name: &str, value: f64, inputs: &BoundInputs) -> Self {
        Self {
            name: name.into(),
            value,
            clamped: None,
            inputs: inputs.clone(),
        }
    }

    pub(crate) fn probability(name: &str, value: f64, inputs: &BoundInputs) -> Self {
        Self {
            name: name.into(),
            value,
            clamped: Some(value.clamp(0.0, 1.0)),
            inputs: inputs.clone(),
        }
    }
}

fn require_square_summable(weights: &WeightSequence, what: &str) -> Result<()> {
    if weights.tau() <= 0.5 {
        return Err(Error::DivergentSeries(format!(
            "{what}: sum of alpha^2 diverges for tau = {}",
            weights.tau()
        )));
    }
    Ok(())
}

/// Σ_{j≥0} α²(j).
pub fn sum_alpha_sq(weights: &WeightSequence) -> Result<f64> {
    require_square_summable(weights, "sum_alpha_sq")?;
    let g2 = weights.gain() * weights.gain();
    Ok(if weights.tau() == 1.0 {
        g2 * PI * PI / 6.0
    } else {
        g2 * series::zeta(2.0 * weights.tau())
    })
}

/// Σ_{j<i} α²(j).
pub fn sum_alpha_sq_partial(weights: &WeightSequence, i: usize) -> f64 {
    (0..i).map(|j| weights.alpha(j).powi(2)).sum()
}

/// Σ_{j≥0} α²(j)Δ²(j), with Δ(j) = `base_delta` when no schedule is set.
pub fn sum_alpha_sq_delta_sq(weights: &WeightSequence, base_delta: f64) -> Result<f64> {
    let Some(schedule) = weights.delta_schedule() else {
        return Ok(sum_alpha_sq(weights)? * base_delta * base_delta);
    };
    let sigma = 2.0 * weights.tau() - 2.0 * schedule.tau_d;
    if !(sigma > 1.0) {
        return Err(Error::DivergentSeries(format!(
            "sum of alpha^2 Delta^2 diverges: 2 tau - 2 tau_d = {sigma} <= 1"
        )));
    }
    let scale = weights.gain() * schedule.d0;
    let z = if sigma == 2.0 {
        PI * PI / 6.0
    } else {
        series::zeta(sigma)
    };
    Ok(scale * scale * z)
}

/// c_g = max(λN³/λ2 + 4N²λN/λ2, 2|𝓜|Δ²λN/3), so that g(j) = α²(j)·c_g.
pub fn g_constant(inputs: &BoundInputs) -> f64 {
    let (l2, ln, n) = (inputs.lambda2, inputs.lambda_n, inputs.n());
    let first = ln.powi(3) / l2 + 4.0 * n * n * ln / l2;
    let second = 2.0 * inputs.m_edges * inputs.delta * inputs.delta * ln / 3.0;
    first.max(second)
}

/// g(i) = α²(i)·c_g.
pub fn g_factor(i: usize, inputs: &BoundInputs) -> f64 {
    let a = inputs.weights.alpha(i);
    a * a * g_constant(inputs)
}

/// Constants of the stochastic Lyapunov function V(x) = xᵀL̄x and the
/// supermartingale W(i, x) = (1 + V(x))·Π_{j≥i}(1 + g(j)).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovConstants {
    pub c_g: f64,
    pub sum_alpha_sq: f64,
    /// Π_{j≥0}(1 + g(j)); may be +inf when the log overflows.
    pub prod: f64,
    pub log_prod: f64,
    weights: WeightSequence,
}

impl LyapunovConstants {
    pub fn new(inputs: &BoundInputs) -> Result<Self> {
        require_square_summable(&inputs.weights, "product of (1 + g)")?;
        let c_g = g_constant(inputs);
        let log_prod = log_tail(c_g, &inputs.weights, 0)?;
        Ok(Self {
            c_g,
            sum_alpha_sq: sum_alpha_sq(&inputs.weights)?,
            prod: log_prod.exp(),
            log_prod,
            weights: inputs.weights,
        })
    }

    pub fn g(&self, j: usize) -> f64 {
        let a = self.weights.alpha(j);
        a * a * self.c_g
    }

    /// ln Π_{j≥i}(1 + g(j)).
    pub fn log_tail_product(&self, i: usize) -> f64 {
        if i == 0 {
            return self.log_prod;
        }
        log_tail(self.c_g, &self.weights, i).unwrap_or(f64::INFINITY)
    }

    /// Π_{j≥i}(1 + g(j)).
    pub fn tail_product(&self, i: usize) -> f64 {
        self.log_tail_product(i).exp()
    }
}

/// ln Π_{j≥i}(1 + c_g·α²(j)).
fn log_tail(c_g: f64, weights: &WeightSequence, i: usize) -> Result<f64> {
    let gain = weights.gain();
    let c = gain * gain * c_g;
    if c == 0.0 {
        return Ok(0.0);
    }
    if weights.tau() == 1.0 && i == 0 {
        // Π_{k≥1}(1 + x²/k²) = sinh(πx)/(πx)
        return Ok(series::ln_sinhc(PI * c.sqrt()));
    }
    series::log_product_tail(c, 2.0 * weights.tau(), i as u64 + 1)
}

/// Π_{j≥0}(1 + g(j)).
pub fn prod_one_plus_g(inputs: &BoundInputs) -> Result<f64> {
    Ok(LyapunovConstants::new(inputs)?.prod)
}

/// Which of the mean-squared-error bounds on θ to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MseVariant {
    /// 2|𝓜|Δ²/(3N²)·Σα².
    General,
    /// Single active link per iteration: |𝓜| replaced by 1.
    Gossip,
    /// |𝓜| replaced by the expected active-edge count E|M(i)|.
    Refined,
    /// 2|𝓜|/(3N²)·Σα²(i)Δ²(i) for a time-varying step.
    TimeVarying,
}

/// Upper bound on E[(θ − r)²].
pub fn mse_bound(inputs: &BoundInputs, variant: MseVariant) -> Result<BoundReport> {
    let n2 = inputs.n() * inputs.n();
    let d2 = inputs.delta * inputs.delta;
    let (name, value) = match variant {
        MseVariant::General => (
            "mse_bound",
            2.0 * inputs.m_edges * d2 / (3.0 * n2) * sum_alpha_sq(&inputs.weights)?,
        ),
        MseVariant::Gossip => (
            "mse_bound_gossip",
            2.0 * d2 / (3.0 * n2) * sum_alpha_sq(&inputs.weights)?,
        ),
        MseVariant::Refined => (
            "mse_bound_refined",
            2.0 * inputs.expected_active_edges * d2 / (3.0 * n2) * sum_alpha_sq(&inputs.weights)?,
        ),
        MseVariant::TimeVarying => {
            if !inputs.weights.persistence_check().generalized_persistent {
                return Err(Error::DivergentSeries(
                    "generalized persistence fails: sum of alpha^2 Delta^2 is not finite".into(),
                ));
            }
            (
                "mse_bound_time_varying",
                2.0 * inputs.m_edges / (3.0 * n2)
                    * sum_alpha_sq_delta_sq(&inputs.weights, inputs.delta)?,
            )
        }
    };
    Ok(BoundReport::quantity(name, value, inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p3(a: f64) -> BoundInputs {
        BoundInputs::new(3, 2.0, 1.0, 1.0, 3.0, WeightSequence::new(a, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn sum_alpha_sq_values() {
        let w = WeightSequence::new(0.1, 1.0).unwrap();
        assert_relative_eq!(
            sum_alpha_sq(&w).unwrap(),
            0.016_449_340_668,
            max_relative = 1e-10
        );
        let w = WeightSequence::new(0.01, 1.0).unwrap();
        assert_relative_eq!(
            sum_alpha_sq(&w).unwrap(),
            1.644_934_066_8e-4,
            max_relative = 1e-10
        );
        let w = WeightSequence::new(0.5, 0.75).unwrap();
        let direct: f64 = (1..4_000_000u64)
            .map(|k| 0.25 * (k as f64).powf(-1.5))
            .sum();
        let tail = 0.25 * 2.0 / 4_000_000f64.sqrt();
        assert_relative_eq!(
            sum_alpha_sq(&w).unwrap(),
            direct + tail,
            max_relative = 1e-6
        );
        assert!(sum_alpha_sq(&WeightSequence::new(1.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn scale_homogeneity() {
        let w = WeightSequence::new(0.3, 0.8).unwrap();
        let full = sum_alpha_sq(&w).unwrap();
        let half = sum_alpha_sq(&w.with_scale(0.5).unwrap()).unwrap();
        assert_relative_eq!(half, full / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn g_examples() {
        let inputs = p3(0.1);
        assert_eq!(g_constant(&inputs), 135.0);
        assert_relative_eq!(g_factor(0, &inputs), 1.35, max_relative = 1e-14);
        assert_relative_eq!(g_factor(1, &inputs), 0.3375, max_relative = 1e-14);
    }

    #[test]
    fn product_against_brute_force() {
        let lc = LyapunovConstants::new(&p3(0.1)).unwrap();
        let mut log_direct = 0.0;
        for k in 1..=10_000_000u64 {
            log_direct += (1.35 / (k as f64 * k as f64)).ln_1p();
        }
        // Remaining factors contribute about 1.35e-7.
        assert_relative_eq!(lc.prod, log_direct.exp(), max_relative = 2e-7);
        assert_relative_eq!(lc.log_prod, log_direct + 1.35e-7, max_relative = 1e-9);
    }

    #[test]
    fn product_routes_agree() {
        let lc = LyapunovConstants::new(&p3(0.1)).unwrap();
        let general = series::log_product_tail(1.35, 2.0, 1).unwrap();
        assert_relative_eq!(lc.log_prod, general, max_relative = 1e-10);
        assert_relative_eq!(lc.log_tail_product(0), general, max_relative = 1e-10);
        let head: f64 = (0..10).map(|j| lc.g(j).ln_1p()).sum();
        assert_relative_eq!(lc.log_tail_product(10), general - head, max_relative = 1e-9);
    }

    #[test]
    fn zero_scale_product_is_one() {
        let w = WeightSequence::new(0.1, 1.0)
            .unwrap()
            .with_scale(0.0)
            .unwrap();
        assert_eq!(prod_one_plus_g(&p3(0.1).with_weights(w)).unwrap(), 1.0);
    }

    #[test]
    fn mse_examples() {
        let ring = BoundInputs::new(
            10,
            10.0,
            1.0,
            0.38,
            4.0,
            WeightSequence::new(0.1, 1.0).unwrap(),
        )
        .unwrap();
        let general = mse_bound(&ring, MseVariant::General).unwrap().value;
        assert_relative_eq!(general, 1.096_622_7e-3, max_relative = 1e-6);
        let gossip = mse_bound(&ring, MseVariant::Gossip).unwrap().value;
        assert_relative_eq!(gossip, general / 10.0, max_relative = 1e-14);
        assert_eq!(
            mse_bound(&ring, MseVariant::Refined).unwrap().value,
            general
        );

        let constant = ring.clone().with_weights(
            WeightSequence::new(0.1, 1.0)
                .unwrap()
                .with_delta_schedule(1.0, 0.0)
                .unwrap(),
        );
        let tv = mse_bound(&constant, MseVariant::TimeVarying).unwrap().value;
        assert_relative_eq!(tv, general, max_relative = 1e-14);

        let bad = ring.clone().with_weights(
            WeightSequence::new(0.1, 1.0)
                .unwrap()
                .with_delta_schedule(1.0, 0.5)
                .unwrap(),
        );
        assert!(matches!(
            mse_bound(&bad, MseVariant::TimeVarying),
            Err(Error::DivergentSeries(_))
        ));
    }

    #[test]
    fn inputs_validation() {
        let w = WeightSequence::new(0.1, 1.0).unwrap();
        assert!(matches!(
            BoundInputs::new(3, 2.0, 1.0, 0.0, 3.0, w),
            Err(Error::NotConnected(_))
        ));
        assert!(BoundInputs::new(3, 2.0, 0.0, 1.0, 3.0, w).is_err());
        assert!(BoundInputs::new(3, 2.0, 1.0, 2.0, 1.0, w).is_err());
    }

    #[test]
    fn inputs_from_models() {
        use crate::graph::Topology;
        let w = WeightSequence::new(0.1, 1.0).unwrap();
        let erasure = LinkFailureModel::erasure(Topology::path(3), 0.5).unwrap();
        let inputs = BoundInputs::from_model(&erasure, 1.0, w).unwrap();
        assert_relative_eq!(inputs.lambda2, 0.5, max_relative = 1e-9);
        assert_eq!(inputs.m_edges, 2.0);
        assert_relative_eq!(inputs.expected_active_edges, 1.0);
        let gossip = LinkFailureModel::gossip(Topology::complete(4));
        let inputs = BoundInputs::from_model(&gossip, 1.0, w).unwrap();
        assert_eq!(
            mse_bound(&inputs, MseVariant::Refined).unwrap().value,
            mse_bound(&inputs, MseVariant::Gossip).unwrap().value
        );
        let split = Topology::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            BoundInputs::from_model(&LinkFailureModel::fixed(split), 1.0, w),
            Err(Error::NotConnected(_))
        ));
    }
}
