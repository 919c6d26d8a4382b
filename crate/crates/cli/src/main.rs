//! `sheforge`: solve, sweep, audit, train, predict, simulate, spectrum,
//! compare and plot for the cascaded H-bridge SHE workflow.
//!
//! Exit codes: 0 success, 1 domain/numerical error (single machine-parseable
//! line on stderr), 2 usage error.

mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "sheforge", version, about = "Selective-harmonic-elimination toolkit for cascaded H-bridge inverters")]
struct Cli {
    /// Seed for anything randomized; falls back to SHEFORGE_SEED, then 42.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Odd non-triplen orders: 5, 7, 11, ...
    NonTriplen,
    /// Consecutive odd orders: 3, 5, 7, ...
    ConsecutiveOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimMode {
    Spwm,
    She,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Waveform,
    Spectrum,
    Angles,
    Thd,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the elimination system at one modulation index.
    Solve {
        #[arg(long)]
        m: f64,
        /// Number of H-bridges.
        #[arg(long, default_value_t = 4)]
        s: usize,
        /// Eliminated orders, e.g. 5,7,11. Defaults to the preset.
        #[arg(long, value_delimiter = ',')]
        harmonics: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t = Preset::NonTriplen)]
        preset: Preset,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continuation sweep over a modulation-index grid; writes the angle
    /// table CSV and a flag sidecar.
    Sweep {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value_t = 4)]
        s: usize,
        #[arg(long, value_delimiter = ',')]
        harmonics: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t = Preset::NonTriplen)]
        preset: Preset,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute residuals and THD for an ingested angle table.
    Audit {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, value_delimiter = ',')]
        harmonics: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t = Preset::NonTriplen)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the angle-map network on a solver table.
    Train {
        #[arg(long)]
        table: PathBuf,
        /// Hidden layer sizes, e.g. 16 or 16,16.
        #[arg(long, value_delimiter = ',', default_value = "16")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 20_000)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of the loss history.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Predict angles from a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        m: f64,
        /// Clamp out-of-range m to the trained interval instead of failing.
        #[arg(long)]
        allow_extrapolation: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-domain simulation; writes the trace CSV.
    Simulate {
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Modulation index (spwm, or she without explicit angles).
        #[arg(long)]
        m: Option<f64>,
        /// Explicit switching angles in degrees (she).
        #[arg(long, value_delimiter = ',')]
        angles_deg: Option<Vec<f64>>,
        /// Reference RMS voltage (pi).
        #[arg(long)]
        vref: Option<f64>,
        #[arg(long)]
        kp: Option<f64>,
        #[arg(long)]
        ki: Option<f64>,
        #[arg(long)]
        m_init: Option<f64>,
        #[arg(long, default_value_t = 10)]
        cycles: usize,
        #[arg(long, default_value_t = 200_000.0)]
        sample_rate: f64,
        /// Inverter config JSON; defaults to the bench values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Harmonic spectrum and THD of a recorded trace channel.
    Spectrum {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "v_out_V")]
        column: String,
        #[arg(long, default_value_t = 50.0)]
        f0: f64,
        #[arg(long, default_value_t = 49)]
        max_order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-way strategy comparison: open-loop SPWM, PI closed loop, and
    /// SHE with network-predicted angles, at one operating point.
    Compare {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000.0)]
        sample_rate: f64,
        /// Also emit SVG waveform/spectrum plots.
        #[arg(long)]
        plots: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render a CSV artifact as a self-contained SVG chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SHEFORGE_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(42)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let seed = resolve_seed(cli.seed);
    match commands::run(cli.command, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sheforge: error kind={} msg={:?}", e.kind(), e.to_string());
            ExitCode::from(1)
        }
    }
}
