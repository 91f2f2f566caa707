use log::warn;
use serde::Serialize;

use crate::graph::{mean_laplacian, spectral, LinkFailureModel, SPECTRAL_TOL};
use crate::quantize::QuantizerSpec;
use crate::{Error, Result};

use super::step::{advance, RunRngs, Scratch};
use super::{average, norm, residual_norm, spread, WeightSequence};

/// Consecutive recorded points below tolerance needed for early stopping.
const EARLY_STOP_WINDOW: usize = 100;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    pub model: LinkFailureModel,
    pub weights: WeightSequence,
    pub quantizer: QuantizerSpec,
    pub max_iter: usize,
    /// Trajectory stride; `None` records nothing.
    pub record_every: Option<usize>,
    /// Iterations at which the full state is captured.
    pub checkpoints: Vec<usize>,
    /// Declared bound b on |x0_n|; required by QCF.
    pub initial_bound: Option<f64>,
    /// Stop once the spread stays below this for 100 recorded points.
    pub early_stop_tol: Option<f64>,
}

impl RunConfig {
    pub fn new(
        x0: Vec<f64>,
        model: LinkFailureModel,
        weights: WeightSequence,
        quantizer: QuantizerSpec,
        max_iter: usize,
    ) -> Self {
        let stride = if x0.len() <= 32 { 1 } else { 100 };
        Self {
            x0,
            model,
            weights,
            quantizer,
            max_iter,
            record_every: Some(stride),
            checkpoints: Vec::new(),
            initial_bound: None,
            early_stop_tol: None,
        }
    }

    pub fn without_trajectory(mut self) -> Self {
        self.record_every = None;
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = Some(stride.max(1));
        self
    }

    pub fn with_checkpoints(mut self, mut checkpoints: Vec<usize>) -> Self {
        checkpoints.sort_unstable();
        checkpoints.dedup();
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_initial_bound(mut self, b: f64) -> Self {
        self.initial_bound = Some(b);
        self
    }

    pub fn with_early_stop(mut self, tol: f64) -> Self {
        self.early_stop_tol = Some(tol);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.model.n_nodes()
    }

    /// r = (1/N)·1ᵀx(0).
    pub fn initial_average(&self) -> f64 {
        average(&self.x0)
    }

    fn validate(&self) -> Result<()> {
        let n = self.model.n_nodes();
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.x0.len(),
            });
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// Spread stayed below the early-stop tolerance.
    Converged {
        iteration: usize,
        theta_hat: f64,
    },
    MaxIterations {
        theta_hat: f64,
    },
    /// QCF stopped and reset; θ̃ = 0.
    Saturated {
        stop_iteration: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub iterations: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    pub averages: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub spreads: Vec<f64>,
    pub saturated: Vec<bool>,
}

impl Trajectory {
    fn push(&mut self, i: usize, x: &[f64], saturated: bool) {
        self.iterations.push(i);
        self.states.push(x.to_vec());
        self.averages.push(average(x));
        self.residual_norms.push(residual_norm(x));
        self.spreads.push(spread(x));
        self.saturated.push(saturated);
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub final_state: Vec<f64>,
    pub trajectory: Option<Trajectory>,
    /// States at the configured checkpoints that were reached.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// sup_j ‖x(j)‖ over the iterations actually run.
    pub max_norm: f64,
    /// Number of iterations executed.
    pub iterations: usize,
}

impl RunOutcome {
    /// θ̂ (or θ̃ = 0 after saturation).
    pub fn theta(&self) -> f64 {
        match self.status {
            RunStatus::Converged { theta_hat, .. } | RunStatus::MaxIterations { theta_hat } => {
                theta_hat
            }
            RunStatus::Saturated { .. } => 0.0,
        }
    }

    pub fn saturated(&self) -> bool {
        matches!(self.status, RunStatus::Saturated { .. })
    }

    pub fn snapshot(&self, iteration: usize) -> Option<&[f64]> {
        self.snapshots
            .iter()
            .find(|(i, _)| *i == iteration)
            .map(|(_, x)| x.as_slice())
    }
}

/// QC with an unbounded quantizer.
pub fn run_qc(config: &RunConfig, seed: u64) -> Result<RunOutcome> {
    if config.quantizer.is_finite() {
        return Err(Error::param(
            "quantizer",
            "QC requires an unbounded quantizer; use run_qcf",
        ));
    }
    warn_preconditions(config);
    run(config, seed)
}

/// QCF with a finite quantizer: stop and reset to zero on saturation.
pub fn run_qcf(config: &RunConfig, seed: u64) -> Result<RunOutcome> {
    if !config.quantizer.is_finite() {
        return Err(Error::param("quantizer", "QCF requires a finite quantizer"));
    }
    let b = config
        .initial_bound
        .ok_or_else(|| Error::param("b", "QCF requires the initial-state bound b"))?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::param("b", format!("must be positive, got {b}")));
    }
    if let Some((index, &value)) = config.x0.iter().enumerate().find(|(_, v)| v.abs() > b) {
        return Err(Error::InitialStateOutOfBounds {
            index,
            value,
            bound: b,
        });
    }
    warn_preconditions(config);
    run(config, seed)
}

pub(crate) fn warn_preconditions(config: &RunConfig) {
    let max_degree = config.model.base().max_degree() as f64;
    let a0 = config.weights.alpha(0);
    if a0 * max_degree >= 1.0 {
        warn!(
            "alpha(0) * max degree = {} >= 1; early iterations may overshoot",
            a0 * max_degree
        );
    }
    if let Ok(l) = mean_laplacian(&config.model) {
        if let Ok(s) = spectral(&l) {
            if s.lambda2 <= SPECTRAL_TOL && config.model.n_nodes() > 1 {
                warn!("mean graph is not connected (lambda2 = {:e})", s.lambda2);
            }
        }
    }
}

pub(crate) fn run(config: &RunConfig, seed: u64) -> Result<RunOutcome> {
    config.validate()?;
    let n = config.n_nodes();
    let mut rngs = RunRngs::from_seed(seed, &config.quantizer);
    let mut scratch = Scratch::new(n);
    let mut x = config.x0.clone();
    let mut trajectory = config.record_every.map(|_| Trajectory::default());
    let stride = config.record_every.unwrap_or(usize::MAX);
    let mut snapshots = Vec::with_capacity(config.checkpoints.len());
    let mut checkpoints = config.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut next_checkpoint = checkpoints.into_iter().peekable();
    let mut max_norm = norm(&x);
    let mut calm = 0usize;

    for i in 0..config.max_iter {
        while next_checkpoint.peek() == Some(&i) {
            snapshots.push((i, x.clone()));
            next_checkpoint.next();
        }
        let proceed = advance(
            &x,
            &config.model,
            &config.weights,
            &config.quantizer,
            i,
            &mut rngs,
            &mut scratch,
            false,
        )?;
        if !proceed {
            x.fill(0.0);
            if let Some(t) = trajectory.as_mut() {
                t.push(i, &x, true);
            }
            if let Some(last) = snapshots.last_mut() {
                if last.0 == i {
                    last.1.fill(0.0);
                }
            }
            for c in next_checkpoint {
                snapshots.push((c, x.clone()));
            }
            return Ok(RunOutcome {
                status: RunStatus::Saturated { stop_iteration: i },
                final_state: x,
                trajectory,
                snapshots,
                max_norm,
                iterations: i,
            });
        }
        if let Some(t) = trajectory.as_mut() {
            if i % stride == 0 {
                t.push(i, &x, false);
                if let Some(tol) = config.early_stop_tol {
                    calm = if spread(&x) < tol { calm + 1 } else { 0 };
                    if calm >= EARLY_STOP_WINDOW {
                        return Ok(RunOutcome {
                            status: RunStatus::Converged {
                                iteration: i,
                                theta_hat: average(&x),
                            },
                            final_state: x,
                            trajectory,
                            snapshots,
                            max_norm,
                            iterations: i,
                        });
                    }
                }
            }
        }
        std::mem::swap(&mut x, &mut scratch.next);
        max_norm = max_norm.max(norm(&x));
    }

    let end = config.max_iter;
    for c in next_checkpoint.filter(|&c| c == end) {
        snapshots.push((c, x.clone()));
    }
    if let Some(t) = trajectory.as_mut() {
        t.push(end, &x, false);
    }
    Ok(RunOutcome {
        status: RunStatus::MaxIterations {
            theta_hat: average(&x),
        },
        final_state: x,
        trajectory,
        snapshots,
        max_norm,
        iterations: end,
    })
}
