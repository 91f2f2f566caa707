use super::{g_constant, sum_alpha_sq_partial, BoundInputs};
use crate::consensus::WeightSequence;
use crate::graph::{spectral, LaplacianMatrix};
use crate::{Error, Result};

/// m(i+1) = (I − α(i)L̄)m(i) for i < horizon; returns m(0..=horizon).
///
/// Requires α(i) ≤ 2/(λ2 + λN) at every step.
pub fn mean_propagate(
    l_mean: &LaplacianMatrix,
    weights: &WeightSequence,
    m0: &[f64],
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    if m0.len() != l_mean.n() {
        return Err(Error::DimensionMismatch {
            expected: l_mean.n(),
            got: m0.len(),
        });
    }
    let s = spectral(l_mean)?;
    let limit = 2.0 / (s.lambda2 + s.lambda_n);
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(m0.to_vec());
    for i in 0..horizon {
        let alpha = weights.alpha(i);
        if alpha > limit {
            return Err(Error::StepSizeTooLarge {
                iteration: i,
                alpha,
                limit,
            });
        }
        let m = out.last().expect("non-empty");
        let lm = l_mean.mul_vec(m);
        out.push(m.iter().zip(&lm).map(|(v, l)| v - alpha * l).collect());
    }
    Ok(out)
}

/// exp(−λ2·Σ_{j<i} α(j))·‖m(0) − r·1‖.
pub fn mean_contraction_bound(lambda2: f64, weights: &WeightSequence, m0: &[f64], i: usize) -> f64 {
    let r = m0.iter().sum::<f64>() / m0.len() as f64;
    let dev = m0.iter().map(|v| (v - r) * (v - r)).sum::<f64>().sqrt();
    let sum_alpha: f64 = (0..i).map(|j| weights.alpha(j)).sum();
    (-lambda2 * sum_alpha).exp() * dev
}

fn check_varepsilon(inputs: &BoundInputs, varepsilon: f64) -> Result<()> {
    let upper = 2.0 * inputs.lambda2 * inputs.lambda2 / inputs.lambda_n;
    if !(varepsilon > 0.0 && varepsilon < upper) {
        return Err(Error::param(
            "varepsilon",
            format!("must lie in (0, 2 lambda2^2 / lambdaN) = (0, {upper}), got {varepsilon}"),
        ));
    }
    Ok(())
}

/// Midpoint λ2²/λN of the admissible ε range of [`i_epsilon`].
pub fn default_varepsilon(inputs: &BoundInputs) -> f64 {
    inputs.lambda2 * inputs.lambda2 / inputs.lambda_n
}

/// Smallest i with ε·α(j) ≥ g(j) for all j ≥ i, i.e. α(i) ≤ ε/c_g.
pub fn i_epsilon(inputs: &BoundInputs, varepsilon: f64) -> Result<usize> {
    check_varepsilon(inputs, varepsilon)?;
    let w = &inputs.weights;
    let threshold = varepsilon / g_constant(inputs);
    if w.gain() == 0.0 || w.alpha(0) <= threshold {
        return Ok(0);
    }
    // (i + 1)^τ ≥ gain/threshold
    let estimate = (w.gain() / threshold).powf(1.0 / w.tau()).ceil() - 1.0;
    let mut i = estimate.max(0.0) as usize;
    while i > 0 && w.alpha(i - 1) <= threshold {
        i -= 1;
    }
    while w.alpha(i) > threshold {
        i += 1;
    }
    Ok(i)
}

/// Upper bound on E‖x(i) − r·1‖² for i ≥ i_ε, given E‖x_⊥(i_ε)‖².
pub fn mss_bound(
    inputs: &BoundInputs,
    i: usize,
    varepsilon: f64,
    residual_at_i_eps: f64,
) -> Result<f64> {
    let i_eps = i_epsilon(inputs, varepsilon)?;
    if i < i_eps {
        return Err(Error::param(
            "i",
            format!("bound holds only for i >= i_epsilon = {i_eps}, got {i}"),
        ));
    }
    if !(residual_at_i_eps >= 0.0) {
        return Err(Error::param("residual_at_i_eps", "must be non-negative"));
    }
    let (l2, ln) = (inputs.lambda2, inputs.lambda_n);
    let kappa = 2.0 * l2 * l2 / ln - varepsilon;
    let c_g = g_constant(inputs);
    let w = &inputs.weights;

    // Backward pass: `suffix` = Σ_{l=j+1}^{i-1} α(l).
    let mut suffix = 0.0;
    let mut forcing = 0.0;
    for j in (i_eps..i).rev() {
        let a = w.alpha(j);
        forcing += (-kappa * suffix).exp() * a * a * c_g;
        suffix += a;
    }
    let transient = (-kappa * suffix).exp() * ln * residual_at_i_eps / l2;
    let noise =
        2.0 * inputs.m_edges * inputs.delta * inputs.delta / 3.0 * sum_alpha_sq_partial(w, i);
    Ok(transient + forcing / l2 + noise)
}
