//! CSV codecs for the file formats the CLI and bindings expose.
//!
//! Numeric cells are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite f64 exactly; readers accept any `f64`-parseable
//! decimal. Angle-table ingest never drops rows: unusable cells attach
//! per-row flags instead.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::harmonics::{SwitchingAngleSet, WaveformTrace};
use crate::she_solver::{AngleTable, AngleTableRow, RowFlag};
use crate::simulator::SimulationTrace;
use crate::spectrum::HarmonicSpectrum;

/// Round-trip-exact decimal encoding used for every CSV cell.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Waveform CSV: `t_s,v_out_V`, one row per sample.
pub fn write_waveform_csv<W: Write>(out: &mut W, trace: &WaveformTrace) -> Result<()> {
    writeln!(out, "t_s,v_out_V")?;
    for (i, v) in trace.samples.iter().enumerate() {
        let t = i as f64 / trace.sample_rate;
        writeln!(out, "{},{}", fmt_f64(t), fmt_f64(*v))?;
    }
    Ok(())
}

/// Simulation trace CSV: `t_s,v_out_V,i_out_A,level,m`.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &SimulationTrace) -> Result<()> {
    writeln!(out, "t_s,v_out_V,i_out_A,level,m")?;
    for i in 0..trace.time.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(trace.time[i]),
            fmt_f64(trace.voltage[i]),
            fmt_f64(trace.current[i]),
            trace.level_index[i],
            fmt_f64(trace.m_trajectory[i]),
        )?;
    }
    Ok(())
}

fn angle_table_header(s: usize) -> String {
    let mut h = String::from("m");
    for k in 1..=s {
        h.push_str(&format!(",theta{k}_deg"));
    }
    h.push_str(",thd_pct");
    h
}

/// Angle-table CSV: `m,theta1_deg,...,thetaN_deg,thd_pct`. Rows without a
/// solution keep their `m` cell and leave the rest empty.
pub fn write_angle_table_csv<W: Write>(out: &mut W, table: &AngleTable) -> Result<()> {
    writeln!(out, "{}", angle_table_header(table.s))?;
    for row in &table.rows {
        let mut line = row.m.map(fmt_f64).unwrap_or_default();
        for k in 0..table.s {
            line.push(',');
            if let Some(a) = row.angles_deg.get(k) {
                line.push_str(&fmt_f64(*a));
            }
        }
        line.push(',');
        if let Some(t) = row.thd_pct {
            line.push_str(&fmt_f64(t));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses an angle-table CSV, attaching validation flags per row:
/// out-of-range m, invalid angle ordering, unparseable cells, and rows with
/// no solution (empty angle cells). Never drops a row.
pub fn read_angle_table_csv<R: BufRead>(input: R) -> Result<AngleTable> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file: missing header".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 3 || cols[0] != "m" || *cols.last().unwrap() != "thd_pct" {
        return Err(Error::Format(format!(
            "expected header m,theta1_deg,...,thd_pct, got {header:?}"
        )));
    }
    let s = cols.len() - 2;
    for (k, col) in cols[1..=s].iter().enumerate() {
        if *col != format!("theta{}_deg", k + 1) {
            return Err(Error::Format(format!(
                "angle column {} is named {col:?}",
                k + 1
            )));
        }
    }

    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.trim().split(',').collect();
        let mut flags = Vec::new();
        if cells.len() != s + 2 {
            rows.push(AngleTableRow {
                m: None,
                angles_deg: Vec::new(),
                thd_pct: None,
                flags: vec![RowFlag::ParseError],
            });
            continue;
        }
        let parse_cell = |text: &str, flags: &mut Vec<RowFlag>| -> Option<f64> {
            let text = text.trim();
            if text.is_empty() {
                return None;
            }
            match text.parse::<f64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    if !flags.contains(&RowFlag::ParseError) {
                        flags.push(RowFlag::ParseError);
                    }
                    None
                }
            }
        };

        let m = parse_cell(cells[0], &mut flags);
        let mut angles_deg = Vec::with_capacity(s);
        let mut empty_angles = 0usize;
        for cell in &cells[1..=s] {
            if cell.trim().is_empty() {
                empty_angles += 1;
            } else if let Some(v) = parse_cell(cell, &mut flags) {
                angles_deg.push(v);
            }
        }
        let thd_pct = parse_cell(cells[s + 1], &mut flags);

        if empty_angles == s && m.is_some() && !flags.contains(&RowFlag::ParseError) {
            // a swept grid point with no solution
            flags.push(RowFlag::NotConverged);
            angles_deg.clear();
        } else {
            if let Some(mv) = m {
                if !(mv > 0.0 && mv < 1.0) {
                    flags.push(RowFlag::MOutOfRange);
                }
            }
            if (angles_deg.len() != s || SwitchingAngleSet::from_degrees(&angles_deg).is_err())
                && !flags.contains(&RowFlag::AnglesInvalid)
            {
                flags.push(RowFlag::AnglesInvalid);
            }
        }
        rows.push(AngleTableRow {
            m,
            angles_deg,
            thd_pct,
            flags,
        });
    }
    Ok(AngleTable { s, rows })
}

/// Spectrum CSV: `order,freq_hz,magnitude` plus a THD footer comment.
pub fn write_spectrum_csv<W: Write>(
    out: &mut W,
    spectrum: &HarmonicSpectrum,
    thd_pct: f64,
    max_order: usize,
) -> Result<()> {
    writeln!(out, "order,freq_hz,magnitude")?;
    for (i, mag) in spectrum.magnitudes.iter().enumerate() {
        let order = i + 1;
        writeln!(
            out,
            "{order},{},{}",
            fmt_f64(order as f64 * spectrum.f0),
            fmt_f64(*mag)
        )?;
    }
    writeln!(out, "# thd_pct={},max_order={max_order}", fmt_f64(thd_pct))?;
    Ok(())
}

/// Reads one named channel out of a trace or waveform CSV, returning the
/// samples and the sample rate inferred from the time column.
pub fn read_samples_csv<R: BufRead>(input: R, column: &str) -> Result<(Vec<f64>, f64)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file: missing header".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t_s") {
        return Err(Error::Format("first column must be t_s".into()));
    }
    let idx = cols
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| Error::Format(format!("no column named {column:?} in {header:?}")))?;

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Format(format!(
                "row has {} cells, header has {}",
                cells.len(),
                cols.len()
            )));
        }
        let t: f64 = cells[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad time cell {:?}", cells[0])))?;
        let v: f64 = cells[idx]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad value cell {:?}", cells[idx])))?;
        times.push(t);
        samples.push(v);
    }
    if samples.len() < 2 {
        return Err(Error::Format("need at least two samples".into()));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::Format("time column must be strictly increasing".into()));
    }
    Ok((samples, 1.0 / dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn angle_table_round_trip() {
        let table = AngleTable {
            s: 4,
            rows: vec![
                AngleTableRow {
                    m: Some(0.8),
                    angles_deg: vec![9.84, 20.38, 38.41, 60.42],
                    thd_pct: Some(8.6458),
                    flags: vec![],
                },
                AngleTableRow {
                    m: Some(0.71),
                    angles_deg: vec![],
                    thd_pct: None,
                    flags: vec![RowFlag::NotConverged],
                },
            ],
        };
        let mut buf = Vec::new();
        write_angle_table_csv(&mut buf, &table).unwrap();
        let parsed = read_angle_table_csv(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn ingest_flags_bad_rows() {
        let csv = "m,theta1_deg,theta2_deg,thd_pct\n\
                   0.8,10.0,20.0,4.1\n\
                   8.81,10.0,20.0,4.0\n\
                   0.82,20.0,10.0,3.9\n\
                   0.83,oops,20.0,3.8\n";
        let table = read_angle_table_csv(BufReader::new(csv.as_bytes())).unwrap();
        assert_eq!(table.s, 2);
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows[0].flags.is_empty());
        assert_eq!(table.rows[1].flags, vec![RowFlag::MOutOfRange]);
        assert_eq!(table.rows[2].flags, vec![RowFlag::AnglesInvalid]);
        assert!(table.rows[3].flags.contains(&RowFlag::ParseError));
    }

    #[test]
    fn ingest_empty_data_section() {
        let csv = "m,theta1_deg,theta2_deg,thd_pct\n";
        let table = read_angle_table_csv(BufReader::new(csv.as_bytes())).unwrap();
        assert!(table.rows.is_empty());
        assert!(read_angle_table_csv(BufReader::new("".as_bytes())).is_err());
        assert!(read_angle_table_csv(BufReader::new("a,b,c\n".as_bytes())).is_err());
    }

    #[test]
    fn samples_csv_round_trip() {
        let trace = SimulationTrace {
            sample_rate: 1000.0,
            time: vec![0.0, 0.001, 0.002],
            voltage: vec![1.0, -2.0, 3.0],
            current: vec![0.01, -0.02, 0.03],
            level_index: vec![1, -1, 2],
            m_trajectory: vec![0.5, 0.5, 0.5],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let (v, fs) = read_samples_csv(BufReader::new(buf.as_slice()), "v_out_V").unwrap();
        assert_eq!(v, trace.voltage);
        assert!((fs - 1000.0).abs() < 1e-6);
        let (i, _) = read_samples_csv(BufReader::new(buf.as_slice()), "i_out_A").unwrap();
        assert_eq!(i, trace.current);
        assert!(read_samples_csv(BufReader::new(buf.as_slice()), "nope").is_err());
    }

    #[test]
    fn waveform_csv_header_and_rows() {
        let trace = crate::harmonics::WaveformTrace {
            sample_rate: 1000.0,
            fundamental_freq: 50.0,
            samples: vec![0.0, 10.0, -10.0],
        };
        let mut buf = Vec::new();
        write_waveform_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_s,v_out_V"));
        assert_eq!(lines.count(), 3);
        let (v, fs) = read_samples_csv(BufReader::new(text.as_bytes()), "v_out_V").unwrap();
        assert_eq!(v, trace.samples);
        assert!((fs - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn spectrum_footer() {
        let spec = HarmonicSpectrum {
            f0: 50.0,
            magnitudes: vec![10.0, 0.5],
            phases: vec![0.0, 0.0],
        };
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &spec, 5.0, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("order,freq_hz,magnitude\n"));
        assert!(text.contains("# thd_pct=5.0000000000000000e0,max_order=2"));
    }
}
