//! Behavioral time-domain simulation of the 2s+1-level cascaded H-bridge
//! inverter under three modulation strategies: open-loop SPWM with
//! phase-disposition carriers, direct SHE gating, and a PI closed loop that
//! trims the modulation index from cycle-RMS error.
//!
//! Switches are ideal: no dead time, no conduction drop, no transients. The
//! resistive load makes the current trace an exact scalar multiple of the
//! voltage trace.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::harmonics::{staircase_level, SwitchingAngleSet};

/// Inverter and load parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterConfig {
    /// Number of H-bridges.
    pub s: usize,
    /// Per-bridge DC source voltages; length `s`.
    pub vdc: Vec<f64>,
    /// Fundamental frequency, Hz.
    pub f0: f64,
    /// Triangular carrier frequency, Hz.
    pub carrier_freq: f64,
    /// Load resistance, ohms.
    pub load_resistance: f64,
}

impl Default for InverterConfig {
    /// Bench defaults: four 10 V bridges (nine levels), 50 Hz fundamental,
    /// 5 kHz carriers, 100 ohm load, 40 V peak.
    fn default() -> Self {
        Self {
            s: 4,
            vdc: vec![10.0; 4],
            f0: 50.0,
            carrier_freq: 5_000.0,
            load_resistance: 100.0,
        }
    }
}

impl InverterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(domain("bridge count must be at least 1"));
        }
        if self.vdc.len() != self.s {
            return Err(domain(format!(
                "expected {} DC sources, got {}",
                self.s,
                self.vdc.len()
            )));
        }
        if self.vdc.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(domain("all DC source voltages must be positive"));
        }
        if !self.f0.is_finite() || self.f0 <= 0.0 {
            return Err(domain("fundamental frequency must be positive"));
        }
        if self.carrier_freq <= 2.0 * self.f0 {
            return Err(domain("carrier frequency must exceed 2 * f0"));
        }
        if !self.load_resistance.is_finite() || self.load_resistance <= 0.0 {
            return Err(domain("load resistance must be positive"));
        }
        Ok(())
    }

    /// Output levels: `2 s + 1`.
    pub fn levels(&self) -> usize {
        2 * self.s + 1
    }

    /// Sum of the DC sources (peak output voltage).
    pub fn vdc_total(&self) -> f64 {
        self.vdc.iter().sum()
    }

    fn equal_sources(&self) -> Option<f64> {
        let v0 = self.vdc[0];
        self.vdc.iter().all(|&v| v == v0).then_some(v0)
    }
}

/// PI controller gains and actuation limits for the closed loop. The
/// controller output is the modulation index, updated once per fundamental
/// cycle in velocity form and clamped to `[m_min, m_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    /// Integral gain, 1/s.
    pub ki: f64,
    pub m_min: f64,
    pub m_max: f64,
    /// Modulation index before the first correction.
    pub m_init: f64,
}

impl Default for PiGains {
    fn default() -> Self {
        Self {
            kp: 0.005,
            ki: 1.5,
            m_min: 0.0,
            m_max: 1.0,
            m_init: 0.5,
        }
    }
}

impl PiGains {
    pub fn validate(&self) -> Result<()> {
        if !self.m_min.is_finite() || !self.m_max.is_finite() || self.m_min >= self.m_max {
            return Err(domain("m_min must be below m_max"));
        }
        if !(0.0..=1.0).contains(&self.m_min) || !(0.0..=1.0).contains(&self.m_max) {
            return Err(domain("modulation limits must lie in [0, 1]"));
        }
        if !(self.m_min..=self.m_max).contains(&self.m_init) {
            return Err(domain("m_init must lie within [m_min, m_max]"));
        }
        if !self.kp.is_finite() || !self.ki.is_finite() {
            return Err(domain("gains must be finite"));
        }
        Ok(())
    }
}

/// Uniformly sampled simulation output. `current` is exactly
/// `voltage / load_resistance`; `m_trajectory` is constant in open loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub sample_rate: f64,
    pub time: Vec<f64>,
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub level_index: Vec<i32>,
    pub m_trajectory: Vec<f64>,
}

/// Unit triangle carrier, period `1 / fc`, starting at its peak:
/// 1 at t = 0, 0 at half period, back to 1.
fn carrier(t: f64, fc: f64) -> f64 {
    let phase = (t * fc).fract();
    if phase <= 0.5 {
        1.0 - 2.0 * phase
    } else {
        2.0 * phase - 1.0
    }
}

/// Level selected by phase-disposition SPWM at time `t`, without argument
/// checks. 2s unit-height carrier bands tile `[-s, s]`; the level is the
/// count of positive bands the reference reaches minus the count of negative
/// bands it falls below.
fn spwm_level_unchecked(m: f64, t: f64, config: &InverterConfig) -> i32 {
    let s = config.s as f64;
    let reference = m * s * (2.0 * PI * config.f0 * t).sin();
    let tri = carrier(t, config.carrier_freq);
    let mut level = 0i32;
    for j in 0..config.s {
        let band = j as f64 + tri;
        if reference >= band {
            level += 1;
        }
        if reference <= -band {
            level -= 1;
        }
    }
    level
}

/// Level selected by phase-disposition SPWM at time `t` for reference
/// amplitude `m * s` (per-unit m in `[0, 1]`).
pub fn spwm_level(m: f64, t: f64, config: &InverterConfig) -> Result<i32> {
    config.validate()?;
    if !(0.0..=1.0).contains(&m) {
        return Err(domain("modulation index must lie in [0, 1]"));
    }
    Ok(spwm_level_unchecked(m, t, config))
}

/// Validates a (duration, sample_rate) pair and returns
/// (total samples, samples per fundamental cycle).
fn sample_grid(config: &InverterConfig, duration: f64, sample_rate: f64) -> Result<(usize, usize)> {
    let cycles = duration * config.f0;
    if cycles < 1.0 - 1e-9 || (cycles - cycles.round()).abs() > 1e-9 {
        return Err(domain(format!(
            "duration must cover an integer number of fundamental cycles, got {cycles}"
        )));
    }
    let per_cycle = sample_rate / config.f0;
    if (per_cycle - per_cycle.round()).abs() > 1e-9 {
        return Err(domain(
            "sample_rate must be an integer multiple of f0 for cycle-exact records",
        ));
    }
    let per_cycle = per_cycle.round() as usize;
    Ok((per_cycle * cycles.round() as usize, per_cycle))
}

fn finish_trace(
    sample_rate: f64,
    time: Vec<f64>,
    level_index: Vec<i32>,
    voltage: Vec<f64>,
    m_trajectory: Vec<f64>,
    load_resistance: f64,
) -> SimulationTrace {
    let current = voltage.iter().map(|v| v / load_resistance).collect();
    SimulationTrace {
        sample_rate,
        time,
        voltage,
        current,
        level_index,
        m_trajectory,
    }
}

/// Open-loop SPWM at a fixed modulation index. Requires equal DC sources
/// (the level-to-voltage map is simply `level * vdc`).
pub fn simulate_open_loop_spwm(
    config: &InverterConfig,
    m: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<SimulationTrace> {
    config.validate()?;
    if !(0.0..=1.0).contains(&m) {
        return Err(domain("modulation index must lie in [0, 1]"));
    }
    if sample_rate < 20.0 * config.carrier_freq {
        return Err(domain("sample_rate must be at least 20 * carrier_freq"));
    }
    let Some(vdc) = config.equal_sources() else {
        return Err(domain("SPWM simulation requires equal DC sources"));
    };
    let (n, _) = sample_grid(config, duration, sample_rate)?;
    let mut time = Vec::with_capacity(n);
    let mut level_index = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sample_rate;
        let level = spwm_level_unchecked(m, t, config);
        time.push(t);
        level_index.push(level);
        voltage.push(f64::from(level) * vdc);
    }
    Ok(finish_trace(
        sample_rate,
        time,
        level_index,
        voltage,
        vec![m; n],
        config.load_resistance,
    ))
}

/// SHE gating: bridge k conducts +vdc on `omega t` in `(theta_k, pi - theta_k)`
/// and the mirrored negative half-cycle. With equal sources the summed
/// voltage reproduces `harmonics::synthesize_staircase` sample-exactly.
pub fn simulate_she(
    config: &InverterConfig,
    angles: &SwitchingAngleSet,
    duration: f64,
    sample_rate: f64,
) -> Result<SimulationTrace> {
    config.validate()?;
    if angles.count() != config.s {
        return Err(domain(format!(
            "{} angles for {} bridges",
            angles.count(),
            config.s
        )));
    }
    if sample_rate < 200.0 * config.f0 {
        return Err(domain("sample_rate must be at least 200 * f0"));
    }
    let (n, _) = sample_grid(config, duration, sample_rate)?;
    let omega = 2.0 * PI * config.f0;
    let equal = config.equal_sources();
    let th = angles.as_slice();

    let mut time = Vec::with_capacity(n);
    let mut level_index = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / sample_rate;
        let level = staircase_level(th, omega * t);
        let v = match equal {
            // identical arithmetic to synthesize_staircase
            Some(vdc) => f64::from(level) * vdc,
            None => {
                // per-bridge sum for unequal sources
                let conducting = level.unsigned_abs() as usize;
                let sum: f64 = config.vdc[..conducting].iter().sum();
                if level >= 0 {
                    sum
                } else {
                    -sum
                }
            }
        };
        time.push(t);
        level_index.push(level);
        voltage.push(v);
    }
    // modulation-index column: the per-unit fundamental the angles encode
    let m = th.iter().map(|a| a.cos()).sum::<f64>() / config.s as f64;
    Ok(finish_trace(
        sample_rate,
        time,
        level_index,
        voltage,
        vec![m; n],
        config.load_resistance,
    ))
}

/// PI closed loop: once per fundamental cycle the previous cycle's RMS
/// voltage updates the error, and the modulation index moves in velocity
/// form, `m += kp (e - e_prev) + ki T0 e`, clamped to the gain limits.
/// Clamping makes the update inherently anti-windup.
pub fn simulate_closed_loop_pi(
    config: &InverterConfig,
    v_ref_rms: f64,
    gains: &PiGains,
    duration: f64,
    sample_rate: f64,
) -> Result<SimulationTrace> {
    config.validate()?;
    gains.validate()?;
    if v_ref_rms < 0.0 {
        return Err(domain("reference RMS must be non-negative"));
    }
    if sample_rate < 20.0 * config.carrier_freq {
        return Err(domain("sample_rate must be at least 20 * carrier_freq"));
    }
    let Some(vdc) = config.equal_sources() else {
        return Err(domain("SPWM simulation requires equal DC sources"));
    };
    let (n, per_cycle) = sample_grid(config, duration, sample_rate)?;
    let cycles = n / per_cycle;
    let t0 = 1.0 / config.f0;

    let mut time = Vec::with_capacity(n);
    let mut level_index = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    let mut m_trajectory = Vec::with_capacity(n);

    let mut m = gains.m_init;
    let mut e_prev = 0.0;
    for c in 0..cycles {
        let mut sum_sq = 0.0;
        for k in 0..per_cycle {
            let i = c * per_cycle + k;
            let t = i as f64 / sample_rate;
            let level = spwm_level_unchecked(m, t, config);
            let v = f64::from(level) * vdc;
            sum_sq += v * v;
            time.push(t);
            level_index.push(level);
            voltage.push(v);
            m_trajectory.push(m);
        }
        let v_rms = (sum_sq / per_cycle as f64).sqrt();
        let e = v_ref_rms - v_rms;
        m = (m + gains.kp * (e - e_prev) + gains.ki * t0 * e).clamp(gains.m_min, gains.m_max);
        e_prev = e;
    }
    Ok(finish_trace(
        sample_rate,
        time,
        level_index,
        voltage,
        m_trajectory,
        config.load_resistance,
    ))
}

/// RMS of one channel over its final `cycles` fundamental cycles.
pub fn trailing_rms(trace: &SimulationTrace, f0: f64, cycles: usize) -> Result<f64> {
    let per_cycle = (trace.sample_rate / f0).round() as usize;
    let want = per_cycle * cycles;
    if want == 0 || want > trace.voltage.len() {
        return Err(domain("trace too short for the requested RMS window"));
    }
    let tail = &trace.voltage[trace.voltage.len() - want..];
    Ok((tail.iter().map(|v| v * v).sum::<f64>() / want as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::synthesize_staircase;

    fn config() -> InverterConfig {
        InverterConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(config().validate().is_ok());
        let mut c = config();
        c.vdc = vec![10.0; 3];
        assert!(c.validate().is_err());
        let mut c = config();
        c.carrier_freq = 60.0;
        assert!(c.validate().is_err());
        assert_eq!(config().levels(), 9);
        assert_eq!(config().vdc_total(), 40.0);
    }

    #[test]
    fn spwm_level_bounds_and_peak() {
        let c = config();
        // reference zero, carriers at band interiors
        assert_eq!(spwm_level(0.5, 0.0, &c).unwrap(), 0);
        // m = 1 at the reference peak touches the top band
        let quarter = 1.0 / (4.0 * c.f0);
        assert_eq!(spwm_level(1.0, quarter, &c).unwrap(), 4);
        assert!(spwm_level(1.5, 0.0, &c).is_err());
        for i in 0..1000 {
            let t = i as f64 * 1.3e-5;
            let lvl = spwm_level(0.9, t, &c).unwrap();
            assert!(lvl.abs() <= 4);
        }
    }

    #[test]
    fn open_loop_trace_shape() {
        let c = config();
        let trace = simulate_open_loop_spwm(&c, 0.9, 0.04, 200_000.0).unwrap();
        assert_eq!(trace.voltage.len(), 8000);
        for (v, i) in trace.voltage.iter().zip(&trace.current) {
            assert!(v.abs() <= 40.0 + 1e-12);
            assert_eq!(*i, v / 100.0);
        }
        assert!(trace.m_trajectory.iter().all(|&m| m == 0.9));
    }

    #[test]
    fn open_loop_rejects_fractional_cycles() {
        let c = config();
        assert!(simulate_open_loop_spwm(&c, 0.9, 0.013, 200_000.0).is_err());
        assert!(simulate_open_loop_spwm(&c, 0.9, 0.04, 50_000.0).is_err());
    }

    #[test]
    fn she_trace_equals_staircase_exactly() {
        let c = config();
        let angles = SwitchingAngleSet::from_degrees(&[9.84, 20.38, 38.41, 60.42]).unwrap();
        let trace = simulate_she(&c, &angles, 0.04, 200_000.0).unwrap();
        let wave = synthesize_staircase(angles.as_slice(), 10.0, 50.0, 200_000.0, 2).unwrap();
        assert_eq!(trace.voltage, wave.samples);
        // 2s + 1 = 9 distinct voltage values over a cycle
        let mut distinct: Vec<i64> = trace.voltage.iter().map(|v| v.round() as i64).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 9);
    }

    #[test]
    fn she_level_never_exceeds_bridge_count() {
        let c = config();
        let angles = SwitchingAngleSet::from_degrees(&[5.0, 15.0, 25.0, 35.0]).unwrap();
        let trace = simulate_she(&c, &angles, 0.02, 200_000.0).unwrap();
        assert!(trace.level_index.iter().all(|l| l.abs() <= 4));
        assert_eq!(trace.level_index.iter().max(), Some(&4));
        assert_eq!(trace.level_index.iter().min(), Some(&-4));
    }

    #[test]
    fn she_unequal_sources_peak() {
        let mut c = config();
        c.vdc = vec![10.0, 12.0, 8.0, 10.0];
        let angles = SwitchingAngleSet::from_degrees(&[5.0, 15.0, 25.0, 35.0]).unwrap();
        let trace = simulate_she(&c, &angles, 0.02, 200_000.0).unwrap();
        let peak = trace.voltage.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, 40.0);
    }

    #[test]
    fn zero_gains_reduce_to_open_loop() {
        let c = config();
        let gains = PiGains {
            kp: 0.0,
            ki: 0.0,
            m_init: 0.65,
            ..PiGains::default()
        };
        let closed = simulate_closed_loop_pi(&c, 25.0, &gains, 0.1, 200_000.0).unwrap();
        let open = simulate_open_loop_spwm(&c, 0.65, 0.1, 200_000.0).unwrap();
        assert_eq!(closed.voltage, open.voltage);
        assert_eq!(closed.level_index, open.level_index);
        assert!(closed.m_trajectory.iter().all(|&m| m == 0.65));
    }

    #[test]
    fn unreachable_reference_saturates_m() {
        let c = config();
        let gains = PiGains::default();
        let trace = simulate_closed_loop_pi(&c, 500.0, &gains, 0.2, 100_000.0).unwrap();
        assert_eq!(*trace.m_trajectory.last().unwrap(), gains.m_max);
    }

    #[test]
    fn pi_gains_validation() {
        assert!(PiGains::default().validate().is_ok());
        let bad = PiGains {
            m_min: 0.9,
            m_max: 0.1,
            ..PiGains::default()
        };
        assert!(bad.validate().is_err());
        let bad = PiGains {
            m_init: 1.5,
            ..PiGains::default()
        };
        assert!(bad.validate().is_err());
    }
}
