//! Uniform mid-tread quantization with subtractive-style uniform dither.
//!
//! `q(y) = kΔ` for `(k − 1/2)Δ ≤ y < (k + 1/2)Δ`, so the error
//! `q(y) − y` lies in `[−Δ/2, Δ/2)`. Adding dither drawn i.i.d. uniform on
//! `[−Δ/2, Δ/2)`, independent of the input, makes the quantization error
//! i.i.d. uniform and independent of the input.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::{Error, Result, SimRng};

/// Largest |y/Δ| accepted; beyond this, integers are no longer exact in f64.
pub const MAX_EXACT_RATIO: f64 = 4_503_599_627_370_496.0; // 2^52

/// ChaCha stream reserved for dither, separate from link sampling.
pub(crate) const DITHER_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantizerRange {
    /// Countable alphabet {kΔ : k ∈ ℤ}.
    Unbounded,
    /// 2p + 1 levels {lΔ : l = 0, ±1, …, ±p}.
    Finite { p: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizerSpec {
    step: f64,
    range: QuantizerRange,
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStep(step))
    }
}

impl QuantizerSpec {
    pub fn unbounded(step: f64) -> Result<Self> {
        check_step(step)?;
        Ok(Self {
            step,
            range: QuantizerRange::Unbounded,
        })
    }

    pub fn finite(step: f64, p: u64) -> Result<Self> {
        check_step(step)?;
        if p == 0 {
            return Err(Error::param("p", "level parameter must be at least 1"));
        }
        Ok(Self {
            step,
            range: QuantizerRange::Finite { p },
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn range(&self) -> QuantizerRange {
        self.range
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.range, QuantizerRange::Finite { .. })
    }

    pub fn p(&self) -> Option<u64> {
        match self.range {
            QuantizerRange::Finite { p } => Some(p),
            QuantizerRange::Unbounded => None,
        }
    }

    /// Number of output levels, 2p + 1.
    pub fn levels(&self) -> Option<u64> {
        self.p().map(|p| 2 * p + 1)
    }

    /// Bits per transmitted sample, ⌈log2(2p + 1)⌉.
    pub fn bits(&self) -> Option<u32> {
        self.levels().map(|l| (l as f64).log2().ceil() as u32)
    }

    /// Bit rate log2(2p+1) of a finite alphabet.
    pub fn bit_rate(&self) -> Option<f64> {
        self.levels().map(|l| (l as f64).log2())
    }

    /// Saturation threshold (p + 1/2)Δ for a quantizer of step `step`.
    pub fn saturation_threshold_at(&self, step: f64) -> Option<f64> {
        self.p().map(|p| (p as f64 + 0.5) * step)
    }

    pub fn saturation_threshold(&self) -> Option<f64> {
        self.saturation_threshold_at(self.step)
    }
}

/// Grid index k with (k − 1/2)Δ ≤ y < (k + 1/2)Δ.
#[inline]
pub(crate) fn level_index(y: f64, delta: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let ratio = y / delta;
    if ratio.abs() > MAX_EXACT_RATIO {
        return Err(Error::InputOutOfRange(y));
    }
    Ok((ratio + 0.5).floor())
}

/// The quantizing function q(y).
pub fn quantize(y: f64, delta: f64) -> Result<f64> {
    check_step(delta)?;
    Ok(level_index(y, delta)? * delta)
}

/// Quantization error e(y) = q(y) − y, in [−Δ/2, Δ/2).
pub fn quantization_error(y: f64, delta: f64) -> Result<f64> {
    Ok(quantize(y, delta)? - y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantized {
    Value(f64),
    Saturated,
}

impl Quantized {
    pub fn value(self) -> Option<f64> {
        match self {
            Quantized::Value(v) => Some(v),
            Quantized::Saturated => None,
        }
    }
}

/// q(y + ν) for a dither sample ν, with finite-range saturation.
///
/// `step` overrides the nominal step of `spec` (time-varying quantizers).
#[inline]
pub(crate) fn dithered_quantize_at(
    y: f64,
    nu: f64,
    spec: &QuantizerSpec,
    step: f64,
) -> Result<Quantized> {
    let input = y + nu;
    if let Some(threshold) = spec.saturation_threshold_at(step) {
        if !(input.abs() < threshold) {
            return Ok(Quantized::Saturated);
        }
    }
    let mut k = level_index(input, step)?;
    if let Some(p) = spec.p() {
        // (p + 1/2)Δ − tiny can round to k = p + 1 in floating point.
        k = k.clamp(-(p as f64), p as f64);
    }
    Ok(Quantized::Value(k * step))
}

/// Dithered quantization of a single channel input.
///
/// Rejects dither outside its support `[−Δ/2, Δ/2)`.
pub fn dithered_quantize(y: f64, nu: f64, spec: &QuantizerSpec) -> Result<Quantized> {
    let half = 0.5 * spec.step;
    if !(-half..half).contains(&nu) {
        return Err(Error::DitherOutOfSupport { nu, half });
    }
    dithered_quantize_at(y, nu, spec, spec.step)
}

/// Seeded i.i.d. uniform dither on `[−Δ/2, Δ/2)`.
#[derive(Debug, Clone)]
pub struct DitherSource {
    seed: u64,
    step: f64,
    rng: SimRng,
}

impl DitherSource {
    pub fn new(seed: u64, step: f64) -> Result<Self> {
        check_step(step)?;
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(DITHER_STREAM);
        Ok(Self { seed, step, rng })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Next sample on `[−Δ/2, Δ/2)` for the source's own step.
    pub fn sample(&mut self) -> f64 {
        self.sample_with_step(self.step)
    }

    /// Next sample on `[−step/2, step/2)`.
    #[inline]
    pub fn sample_with_step(&mut self, step: f64) -> f64 {
        let u: f64 = self.rng.random();
        let half = 0.5 * step;
        let v = (u - 0.5) * step;
        if v >= half {
            half.next_down()
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(quantize(0.74, 0.5).unwrap(), 0.5);
        assert_eq!(quantize(-0.5, 1.0).unwrap(), 0.0);
        assert_eq!(quantize(-0.51, 1.0).unwrap(), -1.0);
        assert_eq!(quantize(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(quantize(0.4999999, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn quantize_errors() {
        assert_eq!(quantize(f64::NAN, 1.0), Err(Error::NonFiniteInput));
        assert_eq!(quantize(f64::INFINITY, 1.0), Err(Error::NonFiniteInput));
        assert!(matches!(
            quantize(1e300, 1.0),
            Err(Error::InputOutOfRange(_))
        ));
        assert!(matches!(quantize(1.0, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(quantize(1.0, -1.0), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn error_lies_in_half_open_interval() {
        for i in -2000..2000 {
            let y = i as f64 * 0.01237;
            let e = quantization_error(y, 0.3).unwrap();
            assert!((-0.15..0.15).contains(&e), "y={y} e={e}");
        }
    }

    #[test]
    fn dithered_examples() {
        let unb = QuantizerSpec::unbounded(1.0).unwrap();
        assert_eq!(
            dithered_quantize(0.2, 0.25, &unb).unwrap(),
            Quantized::Value(0.0)
        );

        let fin = QuantizerSpec::finite(1.0, 1).unwrap();
        assert_eq!(
            dithered_quantize(1.2, 0.4, &fin).unwrap(),
            Quantized::Saturated
        );
        assert_eq!(
            dithered_quantize(-1.2, -0.3, &fin).unwrap(),
            Quantized::Saturated
        );
        assert_eq!(
            dithered_quantize(1.0, 0.0, &fin).unwrap(),
            Quantized::Value(1.0)
        );

        let fin3 = QuantizerSpec::finite(0.5, 3).unwrap();
        let unb_half = QuantizerSpec::unbounded(0.5).unwrap();
        for k in -3..=3 {
            let y = k as f64 * 0.5;
            assert_eq!(
                dithered_quantize(y, 0.0, &fin3).unwrap(),
                Quantized::Value(y)
            );
            assert_eq!(
                dithered_quantize(y, 0.0, &unb_half).unwrap(),
                Quantized::Value(y)
            );
        }
    }

    #[test]
    fn dither_support_is_enforced() {
        let unb = QuantizerSpec::unbounded(1.0).unwrap();
        assert!(dithered_quantize(0.0, 0.5, &unb).is_err());
        assert!(dithered_quantize(0.0, -0.5, &unb).is_ok());
        assert!(dithered_quantize(0.0, -0.6, &unb).is_err());
    }

    #[test]
    fn finite_quantizer_never_leaves_alphabet() {
        let spec = QuantizerSpec::finite(0.1, 2).unwrap();
        let t = spec.saturation_threshold().unwrap();
        for y in [t.next_down(), -t.next_down(), 0.2499999999, -0.25] {
            if let Quantized::Value(v) = dithered_quantize(y, 0.0, &spec).unwrap() {
                assert!(v.abs() <= 0.2 + 1e-15, "y={y} -> {v}");
            }
        }
    }

    #[test]
    fn spec_accessors() {
        let s = QuantizerSpec::finite(0.5, 40).unwrap();
        assert_eq!(s.levels(), Some(81));
        assert_eq!(s.bits(), Some(7));
        assert_eq!(s.saturation_threshold(), Some(20.25));
        assert!(QuantizerSpec::finite(1.0, 0).is_err());
        assert_eq!(QuantizerSpec::unbounded(1.0).unwrap().levels(), None);
    }

    #[test]
    fn dither_support_reproducibility_and_moments() {
        let mut a = DitherSource::new(11, 1.0).unwrap();
        let mut b = DitherSource::new(11, 1.0).unwrap();
        let xs: Vec<f64> = (0..100).map(|_| a.sample()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.sample()).collect();
        assert_eq!(xs, ys);

        let n = 1_000_000;
        let mut src = DitherSource::new(5, 1.0).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = src.sample();
            assert!((-0.5..0.5).contains(&v));
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() <= 0.0012, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() <= 0.01 / 12.0, "var {var}");
    }

    #[test]
    fn dither_source_rejects_bad_step() {
        assert!(DitherSource::new(0, 0.0).is_err());
        assert!(DitherSource::new(0, f64::NAN).is_err());
    }
}
