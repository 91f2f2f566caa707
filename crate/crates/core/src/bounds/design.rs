use serde::Serialize;

use super::{eps_consensus_terms, BoundInputs};
use crate::{Error, Result};

const GRID_POINTS: usize = 200;
const GRID_LO: f64 = 1e-6;
const GRID_HI: f64 = 1e4;
const GOLDEN_REL_TOL: f64 = 1e-6;

/// Result of the step-size search, with its optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaDesign {
    pub delta_star: f64,
    /// Objective value at `delta_star`; T* = 1 − objective.
    pub objective: f64,
    pub t_star: f64,
    pub t_star_clamped: f64,
    /// Smallest objective over the log grid, and where it occurred.
    pub grid_min: f64,
    pub grid_argmin: f64,
    /// objective ≤ grid_min + 1e-9.
    pub certificate: bool,
}

/// The sum of the three ε-consensus terms as a function of Δ.
pub fn objective(inputs: &BoundInputs, delta: f64) -> Result<f64> {
    let t = match eps_consensus_terms(&inputs.clone().with_delta(delta)) {
        Ok(t) => t,
        // The product is too large to evaluate; the bound is vacuous there.
        Err(Error::InvalidParameter {
            name: "weights", ..
        }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let v = t.iter().sum::<f64>();
    Ok(if v.is_nan() { f64::INFINITY } else { v })
}

/// Minimizes the objective over Δ ∈ [1e-6·b, 1e4·b]: log grid, then golden
/// section in ln Δ around the best grid point.
pub fn optimize_delta(inputs: &BoundInputs) -> Result<DeltaDesign> {
    let b = inputs.require_b()?;
    let (lo, hi) = ((GRID_LO * b).ln(), (GRID_HI * b).ln());
    let h = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|k| lo + h * k as f64).collect();
    let values = grid
        .iter()
        .map(|&u| objective(inputs, u.exp()))
        .collect::<Result<Vec<_>>>()?;
    let (k_best, &grid_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");

    let f = |u: f64| objective(inputs, u.exp());
    let mut a = grid[k_best.saturating_sub(1)];
    let mut c = grid[(k_best + 1).min(GRID_POINTS - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while c - a > GOLDEN_REL_TOL {
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = f(x2)?;
        }
    }
    let (u_star, f_star) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let (delta_star, objective) = if f_star <= grid_min {
        (u_star.exp(), f_star)
    } else {
        (grid[k_best].exp(), grid_min)
    };
    let t_star = 1.0 - objective;
    Ok(DeltaDesign {
        delta_star,
        objective,
        t_star,
        t_star_clamped: t_star.clamp(0.0, 1.0),
        grid_min,
        grid_argmin: grid[k_best].exp(),
        certificate: objective <= grid_min + 1e-9,
    })
}
