use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::LyapunovConstants;
use crate::graph::{mean_laplacian, LaplacianMatrix};
use crate::{Error, Result};

use super::run::{run, RunConfig};
use super::{average, spread};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for trial `t`, a hash of (master_seed, t).
pub fn trial_seed(master_seed: u64, t: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(t))
}

#[derive(Debug, Clone, Default)]
pub struct EnsembleOptions {
    /// Tolerance for the ε-consensus frequency.
    pub epsilon: Option<f64>,
    /// Enables W(i, x) = (1 + xᵀL̄x)·Π_{j≥i}(1 + g(j)) at checkpoints.
    pub lyapunov: Option<LyapunovConstants>,
}

/// Per-trial quantities at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointSample {
    pub x_avg: f64,
    /// ‖x − x_avg·1‖².
    pub residual_sq: f64,
    /// ‖x − r·1‖².
    pub error_sq: f64,
    /// V = xᵀL̄x.
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub theta: f64,
    pub saturated: bool,
    pub final_spread: f64,
    pub max_norm: f64,
    pub eps_consensus: Option<bool>,
    pub checkpoints: Vec<CheckpointSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadQuantiles {
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub iteration: usize,
    pub mean_x_avg: f64,
    pub mean_residual_sq: f64,
    pub mean_residual_norm: f64,
    pub mean_sq_error: f64,
    pub mean_v: f64,
    pub mean_w: Option<f64>,
    /// Standard error of `mean_w`.
    pub sem_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub trials: usize,
    pub master_seed: u64,
    /// Initial average r.
    pub r: f64,
    pub mean_theta: f64,
    pub theta_std: f64,
    pub theta_sem: f64,
    /// (1/T)·Σ(θ̂_t − r)².
    pub empirical_mse: f64,
    pub saturation_frequency: f64,
    pub eps_consensus_frequency: Option<f64>,
    pub epsilon: Option<f64>,
    pub spread_quantiles: SpreadQuantiles,
    pub checkpoints: Vec<CheckpointStats>,
    #[serde(skip)]
    pub per_trial: Vec<TrialSummary>,
}

impl EnsembleStats {
    /// Fraction of trials with sup_j ‖x(j)‖ > a over the simulated horizon.
    pub fn excursion_frequency(&self, a: f64) -> f64 {
        let hits = self.per_trial.iter().filter(|t| t.max_norm > a).count();
        hits as f64 / self.trials as f64
    }
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(
    config: &RunConfig,
    seed: u64,
    r: f64,
    l_mean: &LaplacianMatrix,
    epsilon: Option<f64>,
) -> Result<TrialSummary> {
    let out = run(config, seed)?;
    let checkpoints = out
        .snapshots
        .iter()
        .map(|(_, x)| {
            let m = average(x);
            CheckpointSample {
                x_avg: m,
                residual_sq: x.iter().map(|v| (v - m) * (v - m)).sum(),
                error_sq: x.iter().map(|v| (v - r) * (v - r)).sum(),
                v: l_mean.quadratic_form(x),
            }
        })
        .collect();
    Ok(TrialSummary {
        seed,
        theta: out.theta(),
        saturated: out.saturated(),
        final_spread: spread(&out.final_state),
        max_norm: out.max_norm,
        eps_consensus: epsilon.map(|e| out.final_state.iter().all(|v| (v - r).abs() < e)),
        checkpoints,
    })
}

/// Runs `trials` independent QC/QCF runs (QCF when the quantizer is finite).
pub fn monte_carlo(
    config: &RunConfig,
    trials: usize,
    master_seed: u64,
    options: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let cps = config.checkpoints.clone();
    let config = config.clone().without_trajectory().with_checkpoints(cps);
    let mut probe = config.clone();
    probe.max_iter = 0;
    if config.quantizer.is_finite() {
        super::run_qcf(&probe, 0)?;
    } else {
        super::run_qc(&probe, 0)?;
    }
    let l_mean = mean_laplacian(&config.model)?;
    let r = config.initial_average();

    let per_trial: Vec<TrialSummary> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            summarize(
                &config,
                trial_seed(master_seed, t),
                r,
                &l_mean,
                options.epsilon,
            )
        })
        .collect::<Result<_>>()?;

    let thetas = per_trial.iter().map(|t| t.theta);
    let (mean_theta, theta_std) = mean_std(thetas.clone());
    let tf = trials as f64;
    let empirical_mse = thetas.map(|th| (th - r) * (th - r)).sum::<f64>() / tf;
    let saturation_frequency = per_trial.iter().filter(|t| t.saturated).count() as f64 / tf;
    let eps_consensus_frequency = options.epsilon.map(|_| {
        per_trial
            .iter()
            .filter(|t| t.eps_consensus == Some(true))
            .count() as f64
            / tf
    });

    let mut spreads: Vec<f64> = per_trial.iter().map(|t| t.final_spread).collect();
    spreads.sort_by(f64::total_cmp);
    let spread_quantiles = SpreadQuantiles {
        q05: quantile(&spreads, 0.05),
        q50: quantile(&spreads, 0.5),
        q95: quantile(&spreads, 0.95),
        max: *spreads.last().expect("trials >= 1"),
    };

    let n_cp = per_trial
        .iter()
        .map(|t| t.checkpoints.len())
        .min()
        .unwrap_or(0);
    let checkpoints = (0..n_cp)
        .map(|k| {
            let iteration = config.checkpoints[k];
            let col = per_trial.iter().map(move |t| t.checkpoints[k]);
            let mean =
                |f: fn(&CheckpointSample) -> f64| col.clone().map(|c| f(&c)).sum::<f64>() / tf;
            let (mean_w, sem_w) = match &options.lyapunov {
                Some(lc) => {
                    let tail = lc.tail_product(iteration);
                    let (m, s) = mean_std(col.clone().map(|c| (1.0 + c.v) * tail));
                    (Some(m), Some(s / tf.sqrt()))
                }
                None => (None, None),
            };
            CheckpointStats {
                iteration,
                mean_x_avg: mean(|c| c.x_avg),
                mean_residual_sq: mean(|c| c.residual_sq),
                mean_residual_norm: mean(|c| c.residual_sq.sqrt()),
                mean_sq_error: mean(|c| c.error_sq),
                mean_v: mean(|c| c.v),
                mean_w,
                sem_w,
            }
        })
        .collect();

    Ok(EnsembleStats {
        trials,
        master_seed,
        r,
        mean_theta,
        theta_std,
        theta_sem: theta_std / tf.sqrt(),
        empirical_mse,
        saturation_frequency,
        eps_consensus_frequency,
        epsilon: options.epsilon,
        spread_quantiles,
        checkpoints,
        per_trial,
    })
}
