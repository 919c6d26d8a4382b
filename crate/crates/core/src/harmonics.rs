//! Closed-form Fourier analysis and staircase synthesis for the quarter-wave
//! symmetric multilevel waveform.
//!
//! An `s`-bridge cascaded inverter driven by switching angles
//! `0 < theta_1 < ... < theta_s < pi/2` produces a staircase whose odd-order
//! harmonic amplitudes are
//!
//! ```text
//! h(n) = 4 Vdc / (n pi) * sum_k cos(n theta_k)
//! ```
//!
//! while all even orders vanish by quarter-wave symmetry. Formula evaluators
//! in this module accept angles on the closed interval `[0, pi/2]` (so square
//! waves are expressible); the strict-interior invariant is enforced by
//! [`SwitchingAngleSet`], the type solver outputs must satisfy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Margin used when clamping angles into the open interval `(0, pi/2)`.
pub const ANGLE_EPSILON: f64 = 1e-6;

/// A strictly ordered, strictly interior set of switching angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SwitchingAngleSet {
    angles: Vec<f64>,
}

impl SwitchingAngleSet {
    /// Validates `0 < theta_1 < ... < theta_s < pi/2`.
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(domain("angle set must contain at least one angle"));
        }
        let mut prev = 0.0;
        for (k, &a) in angles.iter().enumerate() {
            if !a.is_finite() {
                return Err(domain(format!("angle {} is not finite", k + 1)));
            }
            if a <= prev {
                return Err(domain(format!(
                    "angles must be strictly ascending and positive: theta_{} = {a} after {prev}",
                    k + 1
                )));
            }
            prev = a;
        }
        if prev >= PI / 2.0 {
            return Err(domain(format!("angles must stay below pi/2, got {prev}")));
        }
        Ok(Self { angles })
    }

    /// Parses angles given in degrees.
    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    /// Number of angles (= number of H-bridges).
    pub fn count(&self) -> usize {
        self.angles.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.to_degrees()).collect()
    }
}

impl TryFrom<Vec<f64>> for SwitchingAngleSet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SwitchingAngleSet> for Vec<f64> {
    fn from(s: SwitchingAngleSet) -> Vec<f64> {
        s.angles
    }
}

impl AsRef<[f64]> for SwitchingAngleSet {
    fn as_ref(&self) -> &[f64] {
        &self.angles
    }
}

/// Level-count bookkeeping for an `s`-bridge inverter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelFormulae {
    pub s: usize,
    pub levels: usize,
}

impl LevelFormulae {
    /// Levels produced by `s` bridges: `2 s + 1`.
    pub fn from_bridges(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(domain("bridge count must be at least 1"));
        }
        Ok(Self { s, levels: 2 * s + 1 })
    }

    /// Bridges required for an odd `levels`-level inverter: `(levels - 1) / 2`.
    pub fn from_levels(levels: usize) -> Result<Self> {
        if levels < 3 || levels.is_multiple_of(2) {
            return Err(domain(format!(
                "level count must be an odd integer >= 3, got {levels}"
            )));
        }
        Ok(Self { s: (levels - 1) / 2, levels })
    }
}

/// A uniformly sampled voltage record.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformTrace {
    pub sample_rate: f64,
    pub fundamental_freq: f64,
    pub samples: Vec<f64>,
}

/// Checks angles usable by the formula evaluators: finite, non-decreasing,
/// inside the closed interval `[0, pi/2]`. Boundary values are allowed here
/// so square-wave cases stay expressible.
fn check_relaxed(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(domain("angle set must contain at least one angle"));
    }
    let mut prev = 0.0;
    for &a in angles {
        if !a.is_finite() || !(0.0..=PI / 2.0).contains(&a) {
            return Err(domain(format!("angle {a} outside [0, pi/2]")));
        }
        if a < prev {
            return Err(domain("angles must be sorted ascending"));
        }
        prev = a;
    }
    Ok(())
}

/// Amplitude of harmonic `n` of the staircase, in volts.
///
/// Returns exactly zero for even `n`; odd orders follow the closed form
/// `4 Vdc / (n pi) * sum cos(n theta_k)` and carry their sign.
pub fn harmonic_amplitude(angles: &[f64], vdc: f64, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(domain("harmonic order must be >= 1"));
    }
    if vdc <= 0.0 {
        return Err(domain("vdc must be positive"));
    }
    check_relaxed(angles)?;
    if n.is_multiple_of(2) {
        return Ok(0.0);
    }
    let nf = f64::from(n);
    let sum: f64 = angles.iter().map(|&t| (nf * t).cos()).sum();
    Ok(4.0 * vdc / (nf * PI) * sum)
}

/// Per-unit modulation index from a fundamental amplitude:
/// `m = pi V1 / (4 s Vdc)`, so `m = 1` is the square-wave maximum.
pub fn modulation_index_from_fundamental(v1: f64, vdc: f64, s: usize) -> Result<f64> {
    if vdc <= 0.0 {
        return Err(domain("vdc must be positive"));
    }
    if s == 0 {
        return Err(domain("bridge count must be at least 1"));
    }
    if v1 < 0.0 {
        return Err(domain("fundamental amplitude must be non-negative"));
    }
    Ok(PI * v1 / (4.0 * s as f64 * vdc))
}

/// Signed level count of the staircase at electrical angle `x` (radians,
/// any value). This single fold is shared by waveform synthesis and the SHE
/// gating simulation so the two are sample-exact equal.
pub(crate) fn staircase_level(angles: &[f64], x: f64) -> i32 {
    let two_pi = 2.0 * PI;
    let mut w = x % two_pi;
    if w < 0.0 {
        w += two_pi;
    }
    let (sign, half) = if w < PI { (1, w) } else { (-1, w - PI) };
    // fold the half-cycle onto the first quarter
    let q = if half <= PI / 2.0 { half } else { PI - half };
    let count = angles.iter().filter(|&&t| t <= q).count() as i32;
    sign * count
}

/// Synthesizes the staircase voltage over `n_cycles` fundamental cycles.
///
/// The record starts at t = 0 and excludes the final endpoint so that it
/// spans exactly `n_cycles` cycles, which keeps downstream spectral
/// projections leakage-free.
pub fn synthesize_staircase(
    angles: &[f64],
    vdc: f64,
    f0: f64,
    sample_rate: f64,
    n_cycles: usize,
) -> Result<WaveformTrace> {
    check_relaxed(angles)?;
    if vdc <= 0.0 {
        return Err(domain("vdc must be positive"));
    }
    if f0 <= 0.0 {
        return Err(domain("fundamental frequency must be positive"));
    }
    if sample_rate < 200.0 * f0 {
        return Err(domain(format!(
            "sample_rate must be at least 200 * f0 = {}",
            200.0 * f0
        )));
    }
    if n_cycles == 0 {
        return Err(domain("n_cycles must be at least 1"));
    }
    let per_cycle = sample_rate / f0;
    if (per_cycle - per_cycle.round()).abs() > 1e-9 {
        return Err(domain(
            "sample_rate must be an integer multiple of f0 for cycle-exact records",
        ));
    }
    let n = per_cycle.round() as usize * n_cycles;
    let omega = 2.0 * PI * f0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            f64::from(staircase_level(angles, omega * t)) * vdc
        })
        .collect();
    Ok(WaveformTrace {
        sample_rate,
        fundamental_freq: f0,
        samples,
    })
}

/// THD of the staircase from the closed-form harmonic amplitudes,
/// as a dimensionless fraction over orders `2..=max_order`.
pub fn analytic_thd(angles: &[f64], max_order: u32) -> Result<f64> {
    if max_order < 1 {
        return Err(domain("max_order must be >= 1"));
    }
    check_relaxed(angles)?;
    // vdc cancels in the ratio; evaluate with a unit source.
    let h1 = harmonic_amplitude(angles, 1.0, 1)?;
    if h1 == 0.0 {
        return Err(Error::DegenerateFundamental);
    }
    let mut sum_sq = 0.0;
    for n in 2..=max_order {
        let h = harmonic_amplitude(angles, 1.0, n)?;
        sum_sq += h * h;
    }
    Ok(sum_sq.sqrt() / h1.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_set_rejects_unsorted_and_boundary() {
        assert!(SwitchingAngleSet::new(vec![0.2, 0.1]).is_err());
        assert!(SwitchingAngleSet::new(vec![0.0, 0.1]).is_err());
        assert!(SwitchingAngleSet::new(vec![0.1, PI / 2.0]).is_err());
        assert!(SwitchingAngleSet::new(vec![]).is_err());
        assert!(SwitchingAngleSet::new(vec![0.1, 0.1]).is_err());
        assert!(SwitchingAngleSet::new(vec![0.1, 0.2, 1.5]).is_ok());
    }

    #[test]
    fn level_formulae() {
        let lf = LevelFormulae::from_bridges(4).unwrap();
        assert_eq!(lf.levels, 9);
        let lf = LevelFormulae::from_levels(9).unwrap();
        assert_eq!(lf.s, 4);
        assert!(LevelFormulae::from_levels(8).is_err());
        assert!(LevelFormulae::from_bridges(0).is_err());
    }

    #[test]
    fn third_harmonic_vanishes_for_30_degrees() {
        // cos(3 * 30 deg) = 0
        let h = harmonic_amplitude(&[30f64.to_radians()], 10.0, 3).unwrap();
        assert!(h.abs() < 1e-12, "h3 = {h}");
    }

    #[test]
    fn square_wave_fundamental() {
        // all angles at zero: h1 = 4 * 10 * 4 / pi = 160 / pi
        let h = harmonic_amplitude(&[0.0, 0.0, 0.0, 0.0], 10.0, 1).unwrap();
        assert!((h - 160.0 / PI).abs() < 1e-12);
        assert!((h - 50.929_581_789_406_51).abs() < 1e-9);
    }

    #[test]
    fn fifth_harmonic_of_published_reference_row() {
        // Reference table row at m = 0.9; the value is the direct evaluation
        // of 4*10/(5 pi) * sum cos(5 theta).
        let angles: Vec<f64> = [14.01, 25.18, 35.29, 42.38]
            .iter()
            .map(|d: &f64| d.to_radians())
            .collect();
        let h5 = harmonic_amplitude(&angles, 10.0, 5).unwrap();
        assert!((h5 - (-5.327_807_750_636_841)).abs() < 1e-9, "h5 = {h5}");
    }

    #[test]
    fn even_orders_are_exactly_zero() {
        let angles = [0.2, 0.5, 0.9, 1.3];
        for n in [2u32, 4, 6, 10, 48] {
            assert_eq!(harmonic_amplitude(&angles, 17.0, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn harmonic_amplitude_rejects_bad_input() {
        assert!(harmonic_amplitude(&[0.1], 10.0, 0).is_err());
        assert!(harmonic_amplitude(&[0.1], -1.0, 1).is_err());
        assert!(harmonic_amplitude(&[0.5, 0.1], 10.0, 1).is_err());
        assert!(harmonic_amplitude(&[2.0], 10.0, 1).is_err());
    }

    #[test]
    fn modulation_index_round_trip() {
        let m = modulation_index_from_fundamental(160.0 / PI, 10.0, 4).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
        assert_eq!(modulation_index_from_fundamental(0.0, 10.0, 4).unwrap(), 0.0);
        // inverse relation V1 = 4 s Vdc m / pi
        let v1 = 4.0 * 4.0 * 10.0 * 0.73 / PI;
        let m = modulation_index_from_fundamental(v1, 10.0, 4).unwrap();
        assert!((m - 0.73).abs() < 1e-15);
    }

    #[test]
    fn staircase_boundary_values() {
        let angles: Vec<f64> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|d: &f64| d.to_radians())
            .collect();
        let trace = synthesize_staircase(&angles, 10.0, 50.0, 200_000.0, 1).unwrap();
        assert_eq!(trace.samples.len(), 4000);
        // odd symmetry at t = 0
        assert_eq!(trace.samples[0], 0.0);
        // peak at quarter cycle
        assert_eq!(trace.samples[1000], 40.0);
        // step across theta_1 = 10 deg: just below -> 0, just above -> vdc
        assert_eq!(staircase_level(&angles, 9.99f64.to_radians()), 0);
        assert_eq!(staircase_level(&angles, 10.01f64.to_radians()), 1);
    }

    #[test]
    fn staircase_rejects_fractional_cycles() {
        assert!(synthesize_staircase(&[0.3], 10.0, 50.0, 200_000.0, 0).is_err());
        assert!(synthesize_staircase(&[0.3], 10.0, 60.0, 200_000.0, 1).is_err());
        assert!(synthesize_staircase(&[0.3], 10.0, 50.0, 5_000.0, 1).is_err());
    }

    #[test]
    fn analytic_thd_trivial_cases() {
        assert_eq!(analytic_thd(&[0.3, 0.6], 1).unwrap(), 0.0);
        // square wave to order 49: sqrt(sum over odd n in 3..=49 of 1/n^2)
        let thd = analytic_thd(&[0.0, 0.0, 0.0, 0.0], 49).unwrap();
        assert!((thd - 0.472_971_333_934_498_75).abs() < 1e-12, "thd = {thd}");
    }

    #[test]
    fn analytic_thd_non_decreasing_in_order() {
        let angles = [0.2, 0.5, 0.9, 1.2];
        let mut prev = 0.0;
        for n in 1..=60 {
            let t = analytic_thd(&angles, n).unwrap();
            assert!(t >= prev, "THD dropped at order {n}");
            prev = t;
        }
    }
}
