//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use sheforge_core::ann::{
    gradient_check, init_mlp, predict_angles, predict_angles_clamped, train, MlpModel,
    TrainingDataset,
};
use sheforge_core::error::{Error, Result};
use sheforge_core::harmonics::analytic_thd;
use sheforge_core::io::{
    fmt_f64, read_angle_table_csv, read_samples_csv, write_angle_table_csv, write_spectrum_csv,
    write_trace_csv,
};
use sheforge_core::she_solver::{
    audit_table, newton_solve, sweep_solutions, HarmonicSet, NewtonOptions,
};
use sheforge_core::simulator::{
    simulate_closed_loop_pi, simulate_open_loop_spwm, simulate_she, trailing_rms, InverterConfig,
    PiGains, SimulationTrace,
};
use sheforge_core::spectrum::{harmonic_spectrum, thd, HarmonicSpectrum};
use sheforge_core::SwitchingAngleSet;

use crate::manifest::RunManifest;
use crate::{svg, Command, PlotKind, Preset, SimMode};

pub fn run(cmd: Command, seed: u64) -> Result<()> {
    match cmd {
        Command::Solve {
            m,
            s,
            harmonics,
            preset,
            tol,
            max_iter,
            out,
        } => solve(m, s, harmonics, preset, tol, max_iter, &out, seed),
        Command::Sweep {
            from,
            to,
            step,
            s,
            harmonics,
            preset,
            tol,
            out,
        } => sweep(from, to, step, s, harmonics, preset, tol, &out, seed),
        Command::Audit {
            table,
            harmonics,
            preset,
            out,
        } => audit(&table, harmonics, preset, &out, seed),
        Command::Train {
            table,
            hidden,
            epochs,
            lr,
            out,
            loss_out,
        } => train_cmd(&table, &hidden, epochs, lr, &out, loss_out.as_deref(), seed),
        Command::Predict {
            model,
            m,
            allow_extrapolation,
            out,
        } => predict(&model, m, allow_extrapolation, &out, seed),
        Command::Simulate {
            mode,
            m,
            angles_deg,
            vref,
            kp,
            ki,
            m_init,
            cycles,
            sample_rate,
            config,
            out,
        } => simulate(
            mode,
            m,
            angles_deg,
            vref,
            kp,
            ki,
            m_init,
            cycles,
            sample_rate,
            config.as_deref(),
            &out,
            seed,
        ),
        Command::Spectrum {
            input,
            column,
            f0,
            max_order,
            out,
        } => spectrum_cmd(&input, &column, f0, max_order, &out, seed),
        Command::Compare {
            m,
            model,
            config,
            sample_rate,
            plots,
            out_dir,
        } => compare(m, &model, config.as_deref(), sample_rate, plots, &out_dir, seed),
        Command::Plot { input, kind, out } => plot(&input, kind, &out, seed),
    }
}

fn harmonic_set(s: usize, harmonics: Option<Vec<u32>>, preset: Preset) -> Result<HarmonicSet> {
    match harmonics {
        Some(orders) => {
            let hset = HarmonicSet::new(orders)?;
            if hset.system_size() != s {
                return Err(Error::Domain(format!(
                    "{} eliminated orders need s = {}, got s = {s}",
                    hset.orders().len(),
                    hset.system_size()
                )));
            }
            Ok(hset)
        }
        None => Ok(match preset {
            Preset::NonTriplen => HarmonicSet::non_triplen(s),
            Preset::ConsecutiveOdd => HarmonicSet::consecutive_odd(s),
        }),
    }
}

fn load_config(path: Option<&Path>) -> Result<InverterConfig> {
    let config = match path {
        None => InverterConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("config parse failed: {e}")))?
        }
    };
    config.validate()?;
    Ok(config)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    m: f64,
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    eliminated_orders: Vec<u32>,
    angles_rad: Vec<f64>,
    angles_deg: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn solve(
    m: f64,
    s: usize,
    harmonics: Option<Vec<u32>>,
    preset: Preset,
    tol: f64,
    max_iter: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let hset = harmonic_set(s, harmonics, preset)?;
    let opts = NewtonOptions {
        tol,
        max_iter,
        seed,
        ..NewtonOptions::default()
    };
    let sol = newton_solve(m, &hset, None, &opts)?;
    let output = SolveOutput {
        m: sol.m,
        converged: sol.converged,
        iterations: sol.iterations,
        residual_norm: sol.residual_norm,
        eliminated_orders: hset.orders().to_vec(),
        angles_deg: sol.angles.iter().map(|a| a.to_degrees()).collect(),
        angles_rad: sol.angles.clone(),
    };
    write_json(out, &output)?;
    RunManifest::new("solve", seed, vec![out.to_path_buf()]).write_alongside(out)?;
    if !sol.converged {
        return Err(Error::Numerical(format!(
            "no solution found at m={m}; best residual {:.2e} (artifacts written)",
            sol.residual_norm
        )));
    }
    println!(
        "solved m={m}: residual {:.2e} in {} iterations",
        sol.residual_norm, sol.iterations
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    from: f64,
    to: f64,
    step: f64,
    s: usize,
    harmonics: Option<Vec<u32>>,
    preset: Preset,
    tol: f64,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let hset = harmonic_set(s, harmonics, preset)?;
    let opts = NewtonOptions {
        tol,
        seed,
        ..NewtonOptions::default()
    };
    let table = sweep_solutions(from, to, step, &hset, &opts)?;
    let mut file = BufWriter::new(File::create(out)?);
    write_angle_table_csv(&mut file, &table)?;
    file.flush()?;

    let report = audit_table(&table, &hset);
    let sidecar = sidecar_path(out);
    write_json(&sidecar, &report)?;
    RunManifest::new("sweep", seed, vec![out.to_path_buf(), sidecar]).write_alongside(out)?;

    let converged = table.rows.iter().filter(|r| r.flags.is_empty()).count();
    println!("swept {} grid points, {} converged", table.rows.len(), converged);
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".audit.json");
    out.with_file_name(name)
}

fn audit(
    table_path: &Path,
    harmonics: Option<Vec<u32>>,
    preset: Preset,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let table = read_angle_table_csv(BufReader::new(File::open(table_path)?))?;
    let hset = harmonic_set(table.s, harmonics, preset)?;
    let report = audit_table(&table, &hset);
    write_json(out, &report)?;
    RunManifest::new("audit", seed, vec![out.to_path_buf()]).write_alongside(out)?;

    for (i, row) in report.rows.iter().enumerate() {
        let m = row
            .m
            .map(|v| format!("{v}"))
            .unwrap_or_else(|| "?".into());
        let rn = row
            .residual_norm
            .map(|v| format!("{v:.2e}"))
            .unwrap_or_else(|| "n/a".into());
        let flags: Vec<String> = row.flags.iter().map(|f| f.to_string()).collect();
        println!(
            "row {:2} m={m} residual_norm={rn} flags=[{}]",
            i + 1,
            flags.join(",")
        );
    }
    println!(
        "audited {} rows, {} flagged",
        report.rows.len(),
        report.flagged_rows()
    );
    Ok(())
}

fn train_cmd(
    table_path: &Path,
    hidden: &[usize],
    epochs: usize,
    lr: f64,
    out: &Path,
    loss_out: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let table = read_angle_table_csv(BufReader::new(File::open(table_path)?))?;
    let dataset = TrainingDataset::from_angle_table(&table)?;
    let mut layer_sizes = vec![1usize];
    layer_sizes.extend_from_slice(hidden);
    layer_sizes.push(dataset.angle_count());
    let model = init_mlp(&layer_sizes, seed)?;
    let (trained, history) = train(&model, &dataset, epochs, lr)?;
    trained.save(out)?;

    let mut outputs = vec![out.to_path_buf()];
    if let Some(loss_path) = loss_out {
        let mut file = BufWriter::new(File::create(loss_path)?);
        writeln!(file, "epoch,mse")?;
        for (epoch, loss) in history.iter().enumerate() {
            writeln!(file, "{epoch},{}", fmt_f64(*loss))?;
        }
        file.flush()?;
        outputs.push(loss_path.to_path_buf());
    }
    RunManifest::new("train", seed, outputs).write_alongside(out)?;

    // backprop sanity on the first row
    let first = &dataset.rows()[0];
    let grad_err = gradient_check(&trained, (first.0, &first.1), 1e-5)?;
    println!(
        "trained on {} rows for {epochs} epochs: initial MSE {:.3e}, final MSE {:.3e}, gradient check {:.2e}",
        dataset.rows().len(),
        history.first().unwrap(),
        history.last().unwrap(),
        grad_err
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictOutput {
    m_requested: f64,
    m_used: f64,
    extrapolated: bool,
    angles_rad: Vec<f64>,
    angles_deg: Vec<f64>,
    thd49_pct: f64,
}

fn predict(model_path: &Path, m: f64, allow_extrapolation: bool, out: &Path, seed: u64) -> Result<()> {
    let model = MlpModel::load(model_path)?;
    let (set, extrapolated, m_used) = if allow_extrapolation {
        let (set, clamped) = predict_angles_clamped(&model, m)?;
        let (lo, hi) = model.train_range.unwrap();
        (set, clamped, m.clamp(lo, hi))
    } else {
        (predict_angles(&model, m)?, false, m)
    };
    let output = PredictOutput {
        m_requested: m,
        m_used,
        extrapolated,
        angles_deg: set.to_degrees(),
        thd49_pct: analytic_thd(set.as_slice(), 49)? * 100.0,
        angles_rad: set.as_slice().to_vec(),
    };
    write_json(out, &output)?;
    RunManifest::new("predict", seed, vec![out.to_path_buf()]).write_alongside(out)?;
    println!(
        "predicted angles at m={m}{}: [{}] deg",
        if extrapolated { " (clamped)" } else { "" },
        output
            .angles_deg
            .iter()
            .map(|a| format!("{a:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    mode: SimMode,
    m: Option<f64>,
    angles_deg: Option<Vec<f64>>,
    vref: Option<f64>,
    kp: Option<f64>,
    ki: Option<f64>,
    m_init: Option<f64>,
    cycles: usize,
    sample_rate: f64,
    config_path: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let config = load_config(config_path)?;
    if cycles == 0 {
        return Err(Error::Domain("cycle count must be at least 1".into()));
    }
    let duration = cycles as f64 / config.f0;
    let trace: SimulationTrace = match mode {
        SimMode::Spwm => {
            let m = m.ok_or_else(|| Error::Domain("spwm mode needs --m".into()))?;
            simulate_open_loop_spwm(&config, m, duration, sample_rate)?
        }
        SimMode::She => {
            let angles = match (angles_deg, m) {
                (Some(deg), _) => SwitchingAngleSet::from_degrees(&deg)?,
                (None, Some(m)) => {
                    let hset = HarmonicSet::non_triplen(config.s);
                    let opts = NewtonOptions {
                        seed,
                        ..NewtonOptions::default()
                    };
                    let sol = newton_solve(m, &hset, None, &opts)?;
                    sol.angle_set()?
                }
                (None, None) => {
                    return Err(Error::Domain("she mode needs --angles-deg or --m".into()))
                }
            };
            simulate_she(&config, &angles, duration, sample_rate)?
        }
        SimMode::Pi => {
            let vref = vref.ok_or_else(|| Error::Domain("pi mode needs --vref".into()))?;
            let defaults = PiGains::default();
            let gains = PiGains {
                kp: kp.unwrap_or(defaults.kp),
                ki: ki.unwrap_or(defaults.ki),
                m_init: m_init.unwrap_or(defaults.m_init),
                ..defaults
            };
            simulate_closed_loop_pi(&config, vref, &gains, duration, sample_rate)?
        }
    };
    let mut file = BufWriter::new(File::create(out)?);
    write_trace_csv(&mut file, &trace)?;
    file.flush()?;
    RunManifest::new("simulate", seed, vec![out.to_path_buf()]).write_alongside(out)?;
    println!(
        "simulated {} samples ({cycles} cycles at {} Hz)",
        trace.voltage.len(),
        sample_rate
    );
    Ok(())
}

fn spectrum_cmd(
    input: &Path,
    column: &str,
    f0: f64,
    max_order: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let (samples, fs) = read_samples_csv(BufReader::new(File::open(input)?), column)?;
    let spec = harmonic_spectrum(&samples, fs, f0, max_order)?;
    let thd_pct = thd(&spec, max_order)? * 100.0;
    let mut file = BufWriter::new(File::create(out)?);
    write_spectrum_csv(&mut file, &spec, thd_pct, max_order)?;
    file.flush()?;
    RunManifest::new("spectrum", seed, vec![out.to_path_buf()]).write_alongside(out)?;
    println!("THD to order {max_order}: {thd_pct:.3}%");
    Ok(())
}

struct StrategyResult {
    name: &'static str,
    m_requested: f64,
    m_effective: f64,
    extrapolated: bool,
    spectrum: HarmonicSpectrum,
    trace: SimulationTrace,
}

fn compare(
    m: f64,
    model_path: &Path,
    config_path: Option<&Path>,
    sample_rate: f64,
    plots: bool,
    out_dir: &Path,
    seed: u64,
) -> Result<()> {
    let config = load_config(config_path)?;
    let model = MlpModel::load(model_path)?;
    std::fs::create_dir_all(out_dir)?;
    let f0 = config.f0;
    let run_cycles = 10usize;
    let duration = run_cycles as f64 / f0;

    // open-loop SPWM at the requested m
    let spwm = simulate_open_loop_spwm(&config, m, duration, sample_rate)?;
    let spwm_spec = harmonic_spectrum(&spwm.voltage, sample_rate, f0, 200)?;

    // PI closed loop regulating to the open-loop RMS, analyzed after settling
    let vref = trailing_rms(&spwm, f0, run_cycles)?;
    let pi_cycles = 50usize;
    let pi = simulate_closed_loop_pi(&config, vref, &PiGains::default(), pi_cycles as f64 / f0, sample_rate)?;
    let tail_len = (sample_rate / f0).round() as usize * run_cycles;
    let pi_tail = &pi.voltage[pi.voltage.len() - tail_len..];
    let pi_spec = harmonic_spectrum(pi_tail, sample_rate, f0, 200)?;

    // SHE gated by the network's angles; out-of-range m is clamped and flagged
    let (angles, extrapolated) = predict_angles_clamped(&model, m)?;
    let she = simulate_she(&config, &angles, duration, sample_rate)?;
    let she_spec = harmonic_spectrum(&she.voltage, sample_rate, f0, 200)?;

    let results = [
        StrategyResult {
            name: "spwm_open_loop",
            m_requested: m,
            m_effective: m,
            extrapolated: false,
            spectrum: spwm_spec,
            trace: spwm,
        },
        StrategyResult {
            name: "pi_closed_loop",
            m_requested: m,
            m_effective: *pi.m_trajectory.last().unwrap(),
            extrapolated: false,
            spectrum: pi_spec,
            trace: pi,
        },
        StrategyResult {
            name: "she_nn",
            m_requested: m,
            m_effective: angles.as_slice().iter().map(|a| a.cos()).sum::<f64>()
                / config.s as f64,
            extrapolated,
            spectrum: she_spec,
            trace: she,
        },
    ];

    let report_path = out_dir.join("report.csv");
    let mut outputs = vec![report_path.clone()];
    let mut report = BufWriter::new(File::create(&report_path)?);
    writeln!(
        report,
        "strategy,m_requested,m_effective,extrapolated,fundamental_V,thd13_pct,thd49_pct,thd200_pct,seed,tool_version"
    )?;
    for r in &results {
        let t13 = thd(&r.spectrum, 13)? * 100.0;
        let t49 = thd(&r.spectrum, 49)? * 100.0;
        let t200 = thd(&r.spectrum, 200)? * 100.0;
        writeln!(
            report,
            "{},{},{},{},{},{},{},{},{seed},{}",
            r.name,
            fmt_f64(r.m_requested),
            fmt_f64(r.m_effective),
            r.extrapolated,
            fmt_f64(r.spectrum.magnitude(1).unwrap()),
            fmt_f64(t13),
            fmt_f64(t49),
            fmt_f64(t200),
            env!("CARGO_PKG_VERSION"),
        )?;
        println!(
            "{:>15}: fundamental {:6.2} V, THD13 {:6.2}%, THD49 {:6.2}%, THD200 {:6.2}%{}",
            r.name,
            r.spectrum.magnitude(1).unwrap(),
            t13,
            t49,
            t200,
            if r.extrapolated { " (extrapolated angles)" } else { "" }
        );
    }
    report.flush()?;

    for r in &results {
        let spec_path = out_dir.join(format!("{}_spectrum.csv", r.name));
        let mut file = BufWriter::new(File::create(&spec_path)?);
        let t200 = thd(&r.spectrum, 200)? * 100.0;
        write_spectrum_csv(&mut file, &r.spectrum, t200, 200)?;
        file.flush()?;
        outputs.push(spec_path);
    }

    if plots {
        for r in &results {
            let per_cycle = (sample_rate / f0).round() as usize;
            let span = (2 * per_cycle).min(r.trace.time.len());
            let pts: Vec<(f64, f64)> = (0..span)
                .map(|i| (r.trace.time[i], r.trace.voltage[i]))
                .collect();
            let wave_svg = svg::line_chart(
                &format!("{} output voltage", r.name),
                "t [s]",
                "v [V]",
                &[("v_out".to_string(), pts)],
            );
            let wave_path = out_dir.join(format!("{}_waveform.svg", r.name));
            std::fs::write(&wave_path, wave_svg)?;
            outputs.push(wave_path);

            let bars: Vec<(f64, f64)> = r
                .spectrum
                .magnitudes
                .iter()
                .take(50)
                .enumerate()
                .map(|(i, h)| ((i + 1) as f64, *h))
                .collect();
            let spec_svg = svg::bar_chart(
                &format!("{} harmonic spectrum", r.name),
                "harmonic order",
                "magnitude [V]",
                &bars,
            );
            let spec_path = out_dir.join(format!("{}_spectrum.svg", r.name));
            std::fs::write(&spec_path, spec_svg)?;
            outputs.push(spec_path);
        }
    }

    let manifest_path = out_dir.join("report.csv");
    RunManifest::new("compare", seed, outputs).write_alongside(&manifest_path)?;
    Ok(())
}

fn plot(input: &Path, kind: PlotKind, out: &Path, seed: u64) -> Result<()> {
    let svg_text = match kind {
        PlotKind::Waveform => {
            let (v, fs) = read_samples_csv(BufReader::new(File::open(input)?), "v_out_V")?;
            let pts: Vec<(f64, f64)> = v
                .iter()
                .enumerate()
                .map(|(i, y)| (i as f64 / fs, *y))
                .collect();
            let mut series = vec![("v_out [V]".to_string(), pts)];
            if let Ok((i_samples, _)) =
                read_samples_csv(BufReader::new(File::open(input)?), "i_out_A")
            {
                series.push((
                    "i_out [A]".to_string(),
                    i_samples
                        .iter()
                        .enumerate()
                        .map(|(i, y)| (i as f64 / fs, *y))
                        .collect(),
                ));
            }
            svg::line_chart("output waveform", "t [s]", "amplitude", &series)
        }
        PlotKind::Spectrum => {
            let bars = read_spectrum_bars(input)?;
            svg::bar_chart("harmonic spectrum", "harmonic order", "magnitude", &bars)
        }
        PlotKind::Angles => {
            let table = read_angle_table_csv(BufReader::new(File::open(input)?))?;
            let mut series: Vec<(String, Vec<(f64, f64)>)> = (0..table.s)
                .map(|k| (format!("theta{}", k + 1), Vec::new()))
                .collect();
            for row in table.clean_rows() {
                if let Some(m) = row.m {
                    for (k, a) in row.angles_deg.iter().enumerate() {
                        series[k].1.push((m, *a));
                    }
                }
            }
            svg::line_chart(
                "switching angles vs modulation index",
                "m",
                "angle [deg]",
                &series,
            )
        }
        PlotKind::Thd => {
            let table = read_angle_table_csv(BufReader::new(File::open(input)?))?;
            let pts: Vec<(f64, f64)> = table
                .clean_rows()
                .filter_map(|row| Some((row.m?, row.thd_pct?)))
                .collect();
            svg::line_chart(
                "THD vs modulation index",
                "m",
                "THD [%]",
                &[("thd49".to_string(), pts)],
            )
        }
    };
    std::fs::write(out, svg_text)?;
    RunManifest::new("plot", seed, vec![out.to_path_buf()]).write_alongside(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn read_spectrum_bars(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty spectrum file".into()))?;
    if header.trim() != "order,freq_hz,magnitude" {
        return Err(Error::Format(format!(
            "expected header order,freq_hz,magnitude, got {header:?}"
        )));
    }
    let mut bars = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(Error::Format(format!("bad spectrum row {line:?}")));
        }
        let order: f64 = cells[0]
            .parse()
            .map_err(|_| Error::Format(format!("bad order cell {:?}", cells[0])))?;
        let mag: f64 = cells[2]
            .parse()
            .map_err(|_| Error::Format(format!("bad magnitude cell {:?}", cells[2])))?;
        bars.push((order, mag));
    }
    Ok(bars)
}
