//! Harmonic decomposition of sampled waveforms by synchronous projection.
//!
//! Records produced by this crate are cycle-exact by construction, so the
//! harmonic grid is known and plain Fourier projection onto sin/cos at
//! integer multiples of the fundamental is leakage-free. Magnitudes use the
//! amplitude (peak) convention: a pure sine of amplitude A reports A at its
//! own order.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Magnitudes (and phases) at harmonic orders `1..=N` of a record.
#[derive(Debug, Clone)]
pub struct HarmonicSpectrum {
    pub f0: f64,
    /// `magnitudes[n - 1]` is the amplitude at order `n`.
    pub magnitudes: Vec<f64>,
    /// Phase in radians per order, `atan2` convention of the cos/sin pair.
    pub phases: Vec<f64>,
}

impl HarmonicSpectrum {
    /// Highest order carried by this spectrum.
    pub fn max_order(&self) -> usize {
        self.magnitudes.len()
    }

    /// Amplitude at `order`, if computed.
    pub fn magnitude(&self, order: usize) -> Option<f64> {
        if order == 0 {
            return None;
        }
        self.magnitudes.get(order - 1).copied()
    }
}

/// Projects a uniformly sampled record onto harmonics `1..=max_order` of `f0`.
///
/// The record must span an integer number of fundamental cycles and satisfy
/// `sample_rate > 2 * f0 * max_order` (Nyquist for the highest analyzed
/// order).
pub fn harmonic_spectrum(
    samples: &[f64],
    sample_rate: f64,
    f0: f64,
    max_order: usize,
) -> Result<HarmonicSpectrum> {
    if samples.is_empty() {
        return Err(domain("empty record"));
    }
    if f0 <= 0.0 || sample_rate <= 0.0 {
        return Err(domain("f0 and sample_rate must be positive"));
    }
    if max_order < 1 {
        return Err(domain("max_order must be >= 1"));
    }
    if sample_rate <= 2.0 * f0 * max_order as f64 {
        return Err(domain(format!(
            "sample_rate {sample_rate} violates Nyquist for order {max_order} at f0 {f0}"
        )));
    }
    let n = samples.len() as f64;
    let cycles = n * f0 / sample_rate;
    if (cycles - cycles.round()).abs() > 1e-6 || cycles.round() < 1.0 {
        return Err(domain(format!(
            "record spans {cycles} fundamental cycles; an integer count is required"
        )));
    }

    let mut magnitudes = Vec::with_capacity(max_order);
    let mut phases = Vec::with_capacity(max_order);
    let base = 2.0 * PI * f0 / sample_rate;
    for order in 1..=max_order {
        let w = base * order as f64;
        let mut a = 0.0;
        let mut b = 0.0;
        for (i, &v) in samples.iter().enumerate() {
            let ph = w * i as f64;
            a += v * ph.cos();
            b += v * ph.sin();
        }
        a *= 2.0 / n;
        b *= 2.0 / n;
        magnitudes.push(a.hypot(b));
        phases.push(f64::atan2(a, b));
    }
    Ok(HarmonicSpectrum {
        f0,
        magnitudes,
        phases,
    })
}

/// `sqrt(sum of h_n^2 for n in 2..=max_order) / h_1`.
pub fn thd(spectrum: &HarmonicSpectrum, max_order: usize) -> Result<f64> {
    if max_order < 1 {
        return Err(domain("max_order must be >= 1"));
    }
    if max_order > spectrum.max_order() {
        return Err(domain(format!(
            "spectrum only carries orders up to {}, requested {max_order}",
            spectrum.max_order()
        )));
    }
    let h1 = spectrum.magnitudes[0];
    if h1 <= 0.0 {
        return Err(Error::DegenerateFundamental);
    }
    let sum_sq: f64 = spectrum.magnitudes[1..max_order]
        .iter()
        .map(|h| h * h)
        .sum();
    Ok(sum_sq.sqrt() / h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(amp: f64, f: f64, fs: f64, cycles: usize) -> Vec<f64> {
        let n = (fs / f) as usize * cycles;
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn pure_sine_projects_to_its_amplitude() {
        let v = sine(10.0, 50.0, 20_000.0, 10);
        let spec = harmonic_spectrum(&v, 20_000.0, 50.0, 40).unwrap();
        assert!((spec.magnitude(1).unwrap() - 10.0).abs() < 1e-9);
        for order in 2..=40 {
            assert!(spec.magnitude(order).unwrap() < 1e-9, "order {order}");
        }
    }

    #[test]
    fn square_wave_ratio_h3_h1() {
        let fs = 200_000.0;
        let n = (fs / 50.0) as usize * 4;
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let ph = (50.0 * i as f64 / fs).fract();
                if ph < 0.5 {
                    40.0
                } else {
                    -40.0
                }
            })
            .collect();
        let spec = harmonic_spectrum(&v, fs, 50.0, 10).unwrap();
        let ratio = spec.magnitude(3).unwrap() / spec.magnitude(1).unwrap();
        assert!((ratio - 1.0 / 3.0).abs() < 1e-6, "ratio = {ratio}");
    }

    #[test]
    fn dc_offset_leaves_harmonics_unchanged() {
        let v = sine(5.0, 50.0, 20_000.0, 5);
        let shifted: Vec<f64> = v.iter().map(|x| x + 3.0).collect();
        let a = harmonic_spectrum(&v, 20_000.0, 50.0, 20).unwrap();
        let b = harmonic_spectrum(&shifted, 20_000.0, 50.0, 20).unwrap();
        for order in 1..=20 {
            assert!((a.magnitude(order).unwrap() - b.magnitude(order).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_fractional_cycles_and_nyquist() {
        let v = sine(1.0, 50.0, 20_000.0, 1);
        assert!(harmonic_spectrum(&v[..300], 20_000.0, 50.0, 5).is_err());
        assert!(harmonic_spectrum(&v, 20_000.0, 50.0, 500).is_err());
    }

    #[test]
    fn thd_of_two_tone_spectrum() {
        let spec = HarmonicSpectrum {
            f0: 50.0,
            magnitudes: vec![1.0, 0.0, 1.0],
            phases: vec![0.0; 3],
        };
        assert!((thd(&spec, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(thd(&spec, 2).unwrap(), 0.0);
        assert!(thd(&spec, 9).is_err());
    }

    #[test]
    fn thd_degenerate_fundamental() {
        let spec = HarmonicSpectrum {
            f0: 50.0,
            magnitudes: vec![0.0, 1.0],
            phases: vec![0.0; 2],
        };
        assert!(matches!(
            thd(&spec, 2).unwrap_err(),
            Error::DegenerateFundamental
        ));
    }
}
