use rand::SeedableRng;

use crate::graph::{LaplacianMatrix, LinkFailureModel};
use crate::quantize::{dithered_quantize_at, DitherSource, Quantized, QuantizerSpec};
use crate::{Error, Result, SimRng};

use super::WeightSequence;

/// Everything one iteration produced besides the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    /// L(i) for the realized edge set M(i).
    pub sampled_laplacian: LaplacianMatrix,
    pub alpha: f64,
    /// Quantizer step used at this iteration.
    pub step: f64,
    /// Υ_n(i) = −Σ_l ν_nl(i).
    pub upsilon: Vec<f64>,
    /// Ψ_n(i) = −Σ_l ε_nl(i), with ε = q(y + ν) − (y + ν).
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Advanced {
        next_state: Vec<f64>,
        record: StepRecord,
    },
    /// Some channel input reached the finite quantizer's range limit.
    Saturated,
}

/// Independent random streams for one run: link sampling and dither.
#[derive(Debug, Clone)]
pub struct RunRngs {
    pub topology: SimRng,
    pub dither: DitherSource,
}

impl RunRngs {
    pub fn from_seed(seed: u64, spec: &QuantizerSpec) -> Self {
        let mut topology = SimRng::seed_from_u64(seed);
        topology.set_stream(0);
        let dither = DitherSource::new(seed, spec.step()).expect("spec step is validated");
        Self { topology, dither }
    }
}

/// Reusable buffers for [`advance`].
#[derive(Debug, Clone, Default)]
pub(crate) struct Scratch {
    pub active: Vec<usize>,
    pub received: Vec<f64>,
    pub degree: Vec<f64>,
    pub next: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub psi: Vec<f64>,
}

impl Scratch {
    pub fn new(n: usize) -> Self {
        Self {
            active: Vec::new(),
            received: vec![0.0; n],
            degree: vec![0.0; n],
            next: vec![0.0; n],
            upsilon: vec![0.0; n],
            psi: vec![0.0; n],
        }
    }
}

/// One iteration into `scratch.next`. Returns `false` on saturation.
///
/// Dither for active edge (u, v) is drawn for u ← v, then for v ← u. The
/// saturation guard sees the same draws the update uses.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance(
    x: &[f64],
    model: &LinkFailureModel,
    weights: &WeightSequence,
    spec: &QuantizerSpec,
    i: usize,
    rngs: &mut RunRngs,
    scratch: &mut Scratch,
    track_noise: bool,
) -> Result<bool> {
    let step = weights.step_at(i, spec.step());
    let alpha = weights.alpha(i);
    model.sample_active_edges(&mut rngs.topology, &mut scratch.active);

    scratch.received.fill(0.0);
    scratch.degree.fill(0.0);
    if track_noise {
        scratch.upsilon.fill(0.0);
        scratch.psi.fill(0.0);
    }

    let edges = model.base().edges();
    for &e in &scratch.active {
        let (u, v) = edges[e];
        for (to, from) in [(u, v), (v, u)] {
            let nu = rngs.dither.sample_with_step(step);
            let q = match dithered_quantize_at(x[from], nu, spec, step)? {
                Quantized::Value(q) => q,
                Quantized::Saturated => return Ok(false),
            };
            scratch.received[to] += q;
            scratch.degree[to] += 1.0;
            if track_noise {
                scratch.upsilon[to] -= nu;
                scratch.psi[to] -= q - (x[from] + nu);
            }
        }
    }

    for (((next, &xn), &deg), &recv) in scratch
        .next
        .iter_mut()
        .zip(x)
        .zip(&scratch.degree)
        .zip(&scratch.received)
    {
        *next = (1.0 - alpha * deg) * xn + alpha * recv;
    }
    Ok(true)
}

/// One QC/QCF iteration from `state` at iteration `i`.
pub fn qc_step(
    state: &[f64],
    model: &LinkFailureModel,
    weights: &WeightSequence,
    i: usize,
    rngs: &mut RunRngs,
    spec: &QuantizerSpec,
) -> Result<StepOutcome> {
    let n = model.n_nodes();
    if state.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.len(),
        });
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut scratch = Scratch::new(n);
    if !advance(state, model, weights, spec, i, rngs, &mut scratch, true)? {
        return Ok(StepOutcome::Saturated);
    }
    let edges = model.base().edges();
    let sampled_laplacian =
        LaplacianMatrix::weighted(n, scratch.active.iter().map(|&e| (edges[e], 1.0)));
    Ok(StepOutcome::Advanced {
        next_state: scratch.next,
        record: StepRecord {
            iteration: i,
            sampled_laplacian,
            alpha: weights.alpha(i),
            step: weights.step_at(i, spec.step()),
            upsilon: scratch.upsilon,
            psi: scratch.psi,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Topology;

    fn weights() -> WeightSequence {
        WeightSequence::new(0.3, 1.0).unwrap()
    }

    #[test]
    fn single_node_is_unchanged() {
        let model = LinkFailureModel::fixed(Topology::new(1, []).unwrap());
        let spec = QuantizerSpec::unbounded(1.0).unwrap();
        let mut rngs = RunRngs::from_seed(3, &spec);
        match qc_step(&[2.5], &model, &weights(), 0, &mut rngs, &spec).unwrap() {
            StepOutcome::Advanced { next_state, record } => {
                assert_eq!(next_state, vec![2.5]);
                assert_eq!(record.upsilon, vec![0.0]);
                assert_eq!(record.psi, vec![0.0]);
            }
            StepOutcome::Saturated => panic!("unbounded quantizer saturated"),
        }
    }

    #[test]
    fn all_links_failed_keeps_state() {
        let model = LinkFailureModel::erasure(Topology::complete(4), 1.0).unwrap();
        let spec = QuantizerSpec::unbounded(0.5).unwrap();
        let mut rngs = RunRngs::from_seed(9, &spec);
        let mut x = vec![0.3, -1.2, 4.0, 7.7];
        for i in 0..50 {
            match qc_step(&x, &model, &weights(), i, &mut rngs, &spec).unwrap() {
                StepOutcome::Advanced { next_state, .. } => {
                    assert_eq!(next_state, x);
                    x = next_state;
                }
                StepOutcome::Saturated => unreachable!(),
            }
        }
    }

    #[test]
    fn vector_identity_two_nodes() {
        let model = LinkFailureModel::fixed(Topology::path(2));
        let spec = QuantizerSpec::unbounded(0.7).unwrap();
        let mut rngs = RunRngs::from_seed(1, &spec);
        let mut x = vec![3.1, -2.0];
        for i in 0..200 {
            let StepOutcome::Advanced { next_state, record } =
                qc_step(&x, &model, &weights(), i, &mut rngs, &spec).unwrap()
            else {
                unreachable!()
            };
            let lx = record.sampled_laplacian.mul_vec(&x);
            for n in 0..2 {
                let v = x[n] - record.alpha * (lx[n] + record.upsilon[n] + record.psi[n]);
                assert!((v - next_state[n]).abs() <= 1e-12);
            }
            x = next_state;
        }
    }

    #[test]
    fn finite_quantizer_saturates() {
        let model = LinkFailureModel::fixed(Topology::path(2));
        let spec = QuantizerSpec::finite(1.0, 1).unwrap();
        let mut rngs = RunRngs::from_seed(0, &spec);
        let out = qc_step(&[10.0, -10.0], &model, &weights(), 0, &mut rngs, &spec).unwrap();
        assert_eq!(out, StepOutcome::Saturated);
    }

    #[test]
    fn rejects_bad_state() {
        let model = LinkFailureModel::fixed(Topology::path(2));
        let spec = QuantizerSpec::unbounded(1.0).unwrap();
        let mut rngs = RunRngs::from_seed(0, &spec);
        assert!(qc_step(&[1.0], &model, &weights(), 0, &mut rngs, &spec).is_err());
        assert!(qc_step(&[1.0, f64::NAN], &model, &weights(), 0, &mut rngs, &spec).is_err());
    }
}
