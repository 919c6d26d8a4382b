//! Python extension module exposing the SHE toolkit: the Newton angle
//! solver, staircase synthesis and harmonic analysis, the PWM simulators and
//! the angle-map network.
//!
//! Build with `cargo build -p sheforge-py --release`; the resulting
//! `libsheforge.so` imports as the `sheforge` module once renamed to
//! `sheforge.so` (see `python/smoke_test.py`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sheforge_core::ann;
use sheforge_core::harmonics;
use sheforge_core::she_solver::{self, HarmonicSet, NewtonOptions};
use sheforge_core::simulator::{self, InverterConfig, PiGains, SimulationTrace};
use sheforge_core::spectrum;
use sheforge_core::SwitchingAngleSet;

fn to_py(e: sheforge_core::Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.kind()))
}

fn harmonic_set(s: usize, harmonics: Option<Vec<u32>>) -> PyResult<HarmonicSet> {
    match harmonics {
        Some(orders) => {
            let hset = HarmonicSet::new(orders).map_err(to_py)?;
            if hset.system_size() != s {
                return Err(PyValueError::new_err(format!(
                    "{} eliminated orders need s = {}, got s = {s}",
                    hset.orders().len(),
                    hset.system_size()
                )));
            }
            Ok(hset)
        }
        None => Ok(HarmonicSet::non_triplen(s)),
    }
}

fn config_from_args(
    s: usize,
    vdc: f64,
    f0: f64,
    carrier_freq: f64,
    load_resistance: f64,
) -> PyResult<InverterConfig> {
    let config = InverterConfig {
        s,
        vdc: vec![vdc; s],
        f0,
        carrier_freq,
        load_resistance,
    };
    config.validate().map_err(to_py)?;
    Ok(config)
}

fn trace_dict<'py>(py: Python<'py>, trace: &SimulationTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sample_rate", trace.sample_rate)?;
    d.set_item("time", &trace.time)?;
    d.set_item("voltage", &trace.voltage)?;
    d.set_item("current", &trace.current)?;
    d.set_item("level", &trace.level_index)?;
    d.set_item("m", &trace.m_trajectory)?;
    Ok(d)
}

/// Solve the elimination system at one modulation index.
#[pyfunction]
#[pyo3(signature = (m, s=4, harmonics=None, tol=1e-10, seed=42))]
fn solve<'py>(
    py: Python<'py>,
    m: f64,
    s: usize,
    harmonics: Option<Vec<u32>>,
    tol: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let hset = harmonic_set(s, harmonics)?;
    let opts = NewtonOptions {
        tol,
        seed,
        ..NewtonOptions::default()
    };
    let sol = she_solver::newton_solve(m, &hset, None, &opts).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("m", sol.m)?;
    d.set_item("converged", sol.converged)?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("residual_norm", sol.residual_norm)?;
    d.set_item("eliminated_orders", hset.orders().to_vec())?;
    d.set_item(
        "angles_deg",
        sol.angles.iter().map(|a| a.to_degrees()).collect::<Vec<_>>(),
    )?;
    d.set_item("angles_rad", sol.angles)?;
    Ok(d)
}

/// Continuation sweep; returns one dict per grid point.
#[pyfunction]
#[pyo3(signature = (m_start, m_end, step, s=4, harmonics=None, seed=42))]
fn sweep<'py>(
    py: Python<'py>,
    m_start: f64,
    m_end: f64,
    step: f64,
    s: usize,
    harmonics: Option<Vec<u32>>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let hset = harmonic_set(s, harmonics)?;
    let opts = NewtonOptions {
        seed,
        ..NewtonOptions::default()
    };
    let table = she_solver::sweep_solutions(m_start, m_end, step, &hset, &opts).map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("m", row.m)?;
            d.set_item("angles_deg", &row.angles_deg)?;
            d.set_item("thd_pct", row.thd_pct)?;
            d.set_item(
                "flags",
                row.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            )?;
            Ok(d)
        })
        .collect()
}

/// Closed-form amplitude of harmonic `n` in volts.
#[pyfunction]
fn harmonic_amplitude(angles_rad: Vec<f64>, vdc: f64, n: u32) -> PyResult<f64> {
    harmonics::harmonic_amplitude(&angles_rad, vdc, n).map_err(to_py)
}

/// Closed-form THD over orders 2..=max_order, as a fraction.
#[pyfunction]
fn analytic_thd(angles_rad: Vec<f64>, max_order: u32) -> PyResult<f64> {
    harmonics::analytic_thd(&angles_rad, max_order).map_err(to_py)
}

/// Per-unit modulation index from a fundamental amplitude.
#[pyfunction]
fn modulation_index_from_fundamental(v1: f64, vdc: f64, s: usize) -> PyResult<f64> {
    harmonics::modulation_index_from_fundamental(v1, vdc, s).map_err(to_py)
}

/// Staircase waveform over `n_cycles`; returns (times, samples).
#[pyfunction]
fn synthesize_staircase(
    angles_rad: Vec<f64>,
    vdc: f64,
    f0: f64,
    sample_rate: f64,
    n_cycles: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let trace = harmonics::synthesize_staircase(&angles_rad, vdc, f0, sample_rate, n_cycles)
        .map_err(to_py)?;
    let times = (0..trace.samples.len())
        .map(|i| i as f64 / trace.sample_rate)
        .collect();
    Ok((times, trace.samples))
}

/// Synchronous-projection magnitudes at orders 1..=max_order.
#[pyfunction]
fn spectrum_magnitudes(
    samples: Vec<f64>,
    sample_rate: f64,
    f0: f64,
    max_order: usize,
) -> PyResult<Vec<f64>> {
    let spec = spectrum::harmonic_spectrum(&samples, sample_rate, f0, max_order).map_err(to_py)?;
    Ok(spec.magnitudes)
}

/// THD of a sampled record over orders 2..=max_order, as a fraction.
#[pyfunction]
fn spectrum_thd(samples: Vec<f64>, sample_rate: f64, f0: f64, max_order: usize) -> PyResult<f64> {
    let spec = spectrum::harmonic_spectrum(&samples, sample_rate, f0, max_order).map_err(to_py)?;
    spectrum::thd(&spec, max_order).map_err(to_py)
}

/// Open-loop SPWM simulation; returns a trace dict.
#[pyfunction]
#[pyo3(signature = (m, cycles=10, sample_rate=200_000.0, s=4, vdc=10.0, f0=50.0, carrier_freq=5_000.0, load_resistance=100.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_spwm<'py>(
    py: Python<'py>,
    m: f64,
    cycles: usize,
    sample_rate: f64,
    s: usize,
    vdc: f64,
    f0: f64,
    carrier_freq: f64,
    load_resistance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from_args(s, vdc, f0, carrier_freq, load_resistance)?;
    let trace =
        simulator::simulate_open_loop_spwm(&config, m, cycles as f64 / config.f0, sample_rate)
            .map_err(to_py)?;
    trace_dict(py, &trace)
}

/// SHE-gated simulation from explicit angles; returns a trace dict.
#[pyfunction]
#[pyo3(signature = (angles_rad, cycles=10, sample_rate=200_000.0, s=4, vdc=10.0, f0=50.0, carrier_freq=5_000.0, load_resistance=100.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_she<'py>(
    py: Python<'py>,
    angles_rad: Vec<f64>,
    cycles: usize,
    sample_rate: f64,
    s: usize,
    vdc: f64,
    f0: f64,
    carrier_freq: f64,
    load_resistance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from_args(s, vdc, f0, carrier_freq, load_resistance)?;
    let angles = SwitchingAngleSet::new(angles_rad).map_err(to_py)?;
    let trace = simulator::simulate_she(&config, &angles, cycles as f64 / config.f0, sample_rate)
        .map_err(to_py)?;
    trace_dict(py, &trace)
}

/// PI closed-loop simulation regulating cycle RMS; returns a trace dict.
#[pyfunction]
#[pyo3(signature = (v_ref_rms, cycles=50, sample_rate=200_000.0, kp=0.005, ki=1.5, m_init=0.5, s=4, vdc=10.0, f0=50.0, carrier_freq=5_000.0, load_resistance=100.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_pi<'py>(
    py: Python<'py>,
    v_ref_rms: f64,
    cycles: usize,
    sample_rate: f64,
    kp: f64,
    ki: f64,
    m_init: f64,
    s: usize,
    vdc: f64,
    f0: f64,
    carrier_freq: f64,
    load_resistance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = config_from_args(s, vdc, f0, carrier_freq, load_resistance)?;
    let gains = PiGains {
        kp,
        ki,
        m_init,
        ..PiGains::default()
    };
    let trace = simulator::simulate_closed_loop_pi(
        &config,
        v_ref_rms,
        &gains,
        cycles as f64 / config.f0,
        sample_rate,
    )
    .map_err(to_py)?;
    trace_dict(py, &trace)
}

/// The angle-map network: init, train, predict, save/load.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Mlp {
    inner: ann::MlpModel,
}

#[pymethods]
impl Mlp {
    /// Xavier-initialized network; `layer_sizes` starts at 1 and ends at s.
    #[new]
    #[pyo3(signature = (layer_sizes, seed=42))]
    fn new(layer_sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: ann::init_mlp(&layer_sizes, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ann::MlpModel::load(std::path::Path::new(path)).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(std::path::Path::new(path)).map_err(to_py)
    }

    /// Full-batch gradient descent on `(m, angles_rad)` rows; returns the
    /// trained copy and the loss history.
    fn train(
        &self,
        rows: Vec<(f64, Vec<f64>)>,
        epochs: usize,
        learning_rate: f64,
    ) -> PyResult<(Mlp, Vec<f64>)> {
        let dataset = ann::TrainingDataset::new(rows).map_err(to_py)?;
        let (model, history) =
            ann::train(&self.inner, &dataset, epochs, learning_rate).map_err(to_py)?;
        Ok((Mlp { inner: model }, history))
    }

    /// Predicted angles in radians; raises on out-of-range m.
    fn predict(&self, m: f64) -> PyResult<Vec<f64>> {
        Ok(ann::predict_angles(&self.inner, m)
            .map_err(to_py)?
            .as_slice()
            .to_vec())
    }

    /// Predicted angles with out-of-range m clamped into the trained
    /// interval; returns (angles_rad, clamped).
    fn predict_clamped(&self, m: f64) -> PyResult<(Vec<f64>, bool)> {
        let (set, clamped) = ann::predict_angles_clamped(&self.inner, m).map_err(to_py)?;
        Ok((set.as_slice().to_vec(), clamped))
    }

    /// Worst relative error of backprop vs central differences.
    fn gradient_check(&self, m: f64, angles_rad: Vec<f64>, epsilon: f64) -> PyResult<f64> {
        ann::gradient_check(&self.inner, (m, &angles_rad), epsilon).map_err(to_py)
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes.clone()
    }

    #[getter]
    fn train_range(&self) -> Option<(f64, f64)> {
        self.inner.train_range
    }

    fn __repr__(&self) -> String {
        format!(
            "Mlp(layer_sizes={:?}, trained={})",
            self.inner.layer_sizes,
            self.inner.train_range.is_some()
        )
    }
}

#[pymodule]
fn sheforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_thd, m)?)?;
    m.add_function(wrap_pyfunction!(modulation_index_from_fundamental, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_staircase, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_magnitudes, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_thd, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_spwm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_she, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pi, m)?)?;
    m.add_class::<Mlp>()?;
    Ok(())
}
