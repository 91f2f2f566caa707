//! QC and QCF iterations, weight sequences and Monte Carlo ensembles.
//!
//! Sensor `n` keeps its own state unquantized and receives
//! `q(x_l(i) + ν_nl(i))` from every active neighbour `l`:
//!
//! ```text
//! x_n(i+1) = (1 − α(i) d_n(i)) x_n(i) + α(i) Σ_{l ∈ Ω_n(i)} q(x_l(i) + ν_nl(i))
//! ```
//!
//! QCF uses a `2p + 1` level quantizer and stops, resetting every state to
//! zero, the first time any channel input would saturate.

mod ensemble;
mod run;
mod step;

pub use ensemble::{
    monte_carlo, trial_seed, CheckpointStats, EnsembleOptions, EnsembleStats, SpreadQuantiles,
    TrialSummary,
};
pub use run::{run_qc, run_qcf, RunConfig, RunOutcome, RunStatus, Trajectory};
pub use step::{qc_step, RunRngs, StepOutcome, StepRecord};

use serde::Serialize;

use crate::{Error, Result};

/// Time-varying quantizer step Δ(i) = d0·(i+1)^tau_d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSchedule {
    pub d0: f64,
    pub tau_d: f64,
}

impl DeltaSchedule {
    pub fn new(d0: f64, tau_d: f64) -> Result<Self> {
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(Error::InvalidStep(d0));
        }
        if !(tau_d.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "tau_d must be finite, got {tau_d}"
            )));
        }
        Ok(Self { d0, tau_d })
    }

    pub fn at(&self, i: usize) -> f64 {
        self.d0 * ((i + 1) as f64).powf(self.tau_d)
    }
}

/// Link weights α(i) = s·a/(i+1)^tau with an optional Δ(i) schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSequence {
    a: f64,
    tau: f64,
    scale: f64,
    delta_schedule: Option<DeltaSchedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Persistence {
    /// Σα = ∞ and Σα² < ∞.
    pub persistent: bool,
    /// Σα = ∞ and Σα²Δ² < ∞.
    pub generalized_persistent: bool,
}

impl WeightSequence {
    pub fn new(a: f64, tau: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "a must be positive, got {a}"
            )));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(Self {
            a,
            tau,
            scale: 1.0,
            delta_schedule: None,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidWeights(format!(
                "scale must be non-negative, got {scale}"
            )));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn with_delta_schedule(mut self, d0: f64, tau_d: f64) -> Result<Self> {
        self.delta_schedule = Some(DeltaSchedule::new(d0, tau_d)?);
        Ok(self)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// s·a, the numerator of α(i).
    pub fn gain(&self) -> f64 {
        self.scale * self.a
    }

    pub fn delta_schedule(&self) -> Option<DeltaSchedule> {
        self.delta_schedule
    }

    #[inline]
    pub fn alpha(&self, i: usize) -> f64 {
        let k = (i + 1) as f64;
        if self.tau == 1.0 {
            self.gain() / k
        } else {
            self.gain() * k.powf(-self.tau)
        }
    }

    /// Quantizer step at iteration `i`: the schedule if present, else `base`.
    #[inline]
    pub fn step_at(&self, i: usize, base: f64) -> f64 {
        match &self.delta_schedule {
            Some(s) => s.at(i),
            None => base,
        }
    }

    pub fn persistence_check(&self) -> Persistence {
        let tau_d = self.delta_schedule.map_or(0.0, |s| s.tau_d);
        Persistence {
            persistent: self.tau > 0.5 && self.tau <= 1.0,
            generalized_persistent: self.tau <= 1.0 && 2.0 * self.tau - 2.0 * tau_d > 1.0,
        }
    }
}

/// Component-wise average (1/N)·1ᵀx.
pub fn average(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// ‖x − x_avg·1‖, the distance to the consensus subspace.
pub fn residual_norm(x: &[f64]) -> f64 {
    let m = average(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt()
}

/// max_n x_n − min_n x_n.
pub fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
