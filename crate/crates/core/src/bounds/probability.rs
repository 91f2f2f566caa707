use serde::Serialize;

use super::{BoundInputs, BoundReport, LyapunovConstants};
use crate::{Error, Result};

/// Which initial-state information the excursion bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupForm {
    /// Uses the supplied x_avg(0) and x0ᵀL̄x0.
    Concrete,
    /// Worst case over |x0_n| ≤ b.
    Ball,
}

/// (1 + q)·Π/(1 + c), evaluated in log space so huge products stay finite
/// as long as the ratio is.
fn product_ratio(q: f64, log_prod: f64, c: f64) -> f64 {
    (q.ln_1p() + log_prod - c.ln_1p()).exp()
}

/// Upper bound on P[sup_j ‖x(j)‖ > a] for QC.
///
/// The ball form bounds P[sup_{n,j} |x_n(j)| > a] uniformly over x0 in the
/// b-ball.
pub fn state_sup_bound(a: f64, inputs: &BoundInputs, form: SupForm) -> Result<BoundReport> {
    if !(a > 0.0) {
        return Err(Error::param(
            "a",
            format!("excursion level must be positive, got {a}"),
        ));
    }
    let lc = LyapunovConstants::new(inputs)?;
    let n = inputs.n_nodes as f64;
    let (x_avg_sq, quad) = match form {
        SupForm::Concrete => {
            let s = inputs.x0_stats.ok_or_else(|| {
                Error::param("x0", "concrete form needs initial-state statistics")
            })?;
            (s.x_avg * s.x_avg, s.quad_form)
        }
        SupForm::Ball => {
            let b = inputs.require_b()?;
            (b * b, n * inputs.lambda_n * b * b)
        }
    };
    let d2 = inputs.delta * inputs.delta;
    let avg_term =
        (2.0 * n * x_avg_sq + 4.0 * inputs.m_edges * d2 / (3.0 * n) * lc.sum_alpha_sq).sqrt() / a;
    let perp_term = product_ratio(quad, lc.log_prod, 0.5 * a * a * inputs.lambda2);
    let name = match form {
        SupForm::Concrete => "state_sup_bound",
        SupForm::Ball => "state_sup_bound_ball",
    };
    Ok(BoundReport::probability(name, avg_term + perp_term, inputs))
}

/// The three terms whose sum bounds P[|θ̃ − r| ≥ ε] for QCF.
pub fn eps_consensus_terms(inputs: &BoundInputs) -> Result<[f64; 3]> {
    let b = inputs.require_b()?;
    let p = inputs.require_p()?;
    let eps = inputs.require_epsilon()?;
    let lc = LyapunovConstants::new(inputs)?;
    let n = inputs.n_nodes as f64;
    let d = inputs.delta;
    let m = inputs.m_edges;
    let t1 = 2.0 * m * d * d / (3.0 * n * n * eps * eps) * lc.sum_alpha_sq;
    let t2 = (2.0 * n * b * b + 4.0 * m * d * d / (3.0 * n) * lc.sum_alpha_sq).sqrt() / (p * d);
    let t3 = product_ratio(
        n * inputs.lambda_n * b * b,
        lc.log_prod,
        0.5 * p * p * d * d * inputs.lambda2,
    );
    Ok([t1, t2, t3])
}

/// Upper bound on P[|θ̃ − r| ≥ ε]: the sum of [`eps_consensus_terms`].
pub fn theta_deviation_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let t = eps_consensus_terms(inputs)?;
    Ok(BoundReport::probability(
        "theta_deviation_bound",
        t.iter().sum(),
        inputs,
    ))
}

/// Lower bound on the probability of ε-consensus for QCF.
pub fn eps_consensus_lb(inputs: &BoundInputs) -> Result<BoundReport> {
    let t = eps_consensus_terms(inputs)?;
    Ok(BoundReport::probability(
        "eps_consensus_lb",
        1.0 - t.iter().sum::<f64>(),
        inputs,
    ))
}

/// The ε-consensus lower bound in the limit s → 0.
pub fn zero_rate_lb(inputs: &BoundInputs) -> Result<BoundReport> {
    let b = inputs.require_b()?;
    let p = inputs.require_p()?;
    let n = inputs.n_nodes as f64;
    let pd = p * inputs.delta;
    let value = 1.0
        - (2.0 * n * b * b).sqrt() / pd
        - (1.0 + n * inputs.lambda_n * b * b) / (1.0 + 0.5 * pd * pd * inputs.lambda2);
    Ok(BoundReport::probability("zero_rate_lb", value, inputs))
}

/// (2Nb²/(p²Δ²))·(λN/λ2), the large-pΔ approximation of the last term.
pub fn ratio_approx(inputs: &BoundInputs) -> Result<f64> {
    let b = inputs.require_b()?;
    let pd = inputs.require_p()? * inputs.delta;
    let n = inputs.n_nodes as f64;
    Ok(2.0 * n * b * b / (pd * pd) * inputs.lambda_n / inputs.lambda2)
}
