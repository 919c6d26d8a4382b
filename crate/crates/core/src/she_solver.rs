//! Newton-Raphson solution of the selective-harmonic-elimination system.
//!
//! For `s` bridges the system couples one fundamental constraint with `s - 1`
//! eliminated orders `n_1 < ... < n_{s-1}`:
//!
//! ```text
//! sum_k cos(theta_k)       = s * m
//! sum_k cos(n_i * theta_k) = 0        for each eliminated order n_i
//! ```
//!
//! Newton iterations use the analytic Jacobian, Gaussian elimination with
//! partial pivoting, step halving when the residual does not decrease, and
//! projection of every iterate back into the ordered interior of
//! `[0, pi/2]^s`. Globalization is a deterministic cascade: caller-provided
//! guess, continuation seed, the natural-sampling guess, 20 seeded jittered
//! guesses, and finally a coarse grid scan whose best candidates are polished.
//!
//! The system is genuinely infeasible over parts of the modulation range
//! (solution branches end by an angle reaching the domain boundary); sweeps
//! therefore flag non-converged grid points instead of fabricating rows.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::harmonics::{analytic_thd, SwitchingAngleSet, ANGLE_EPSILON};

/// Harmonic orders to eliminate, sorted ascending, distinct, all >= 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct HarmonicSet {
    orders: Vec<u32>,
}

impl HarmonicSet {
    pub fn new(orders: Vec<u32>) -> Result<Self> {
        let mut prev = 1u32;
        for &n in &orders {
            if n < 2 {
                return Err(domain("eliminated orders must be >= 2"));
            }
            if n <= prev {
                return Err(domain("eliminated orders must be sorted ascending without duplicates"));
            }
            prev = n;
        }
        Ok(Self { orders })
    }

    /// Default preset for `s` bridges: the first `s - 1` odd non-triplen
    /// orders (5, 7, 11, 13, 17, ...).
    pub fn non_triplen(s: usize) -> Self {
        let mut orders = Vec::with_capacity(s.saturating_sub(1));
        let mut n = 5;
        while orders.len() + 1 < s {
            if n % 3 != 0 {
                orders.push(n);
            }
            n += 2;
        }
        Self { orders }
    }

    /// Alternate preset: consecutive odd orders starting at 3 (3, 5, 7, ...).
    pub fn consecutive_odd(s: usize) -> Self {
        let orders = (0..s.saturating_sub(1)).map(|i| 3 + 2 * i as u32).collect();
        Self { orders }
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Number of angles the closed system needs: eliminated orders + 1.
    pub fn system_size(&self) -> usize {
        self.orders.len() + 1
    }
}

impl TryFrom<Vec<u32>> for HarmonicSet {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HarmonicSet> for Vec<u32> {
    fn from(h: HarmonicSet) -> Vec<u32> {
        h.orders
    }
}

/// Outcome of a Newton solve. `angles` always carries the best iterate;
/// `converged` guarantees `residual_norm < tol` and a strictly ordered
/// interior angle set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleSolution {
    pub m: f64,
    /// Switching angles in radians, ascending.
    pub angles: Vec<f64>,
    /// Infinity norm of the residual at `angles`.
    pub residual_norm: f64,
    /// Newton iterations spent by the attempt that produced `angles`.
    pub iterations: usize,
    pub converged: bool,
}

impl AngleSolution {
    /// The validated angle set; errors if the solution did not converge to a
    /// strictly ordered interior point.
    pub fn angle_set(&self) -> Result<SwitchingAngleSet> {
        if !self.converged {
            return Err(Error::Numerical(format!(
                "no converged solution at m={}; best residual {}",
                self.m, self.residual_norm
            )));
        }
        SwitchingAngleSet::new(self.angles.clone())
    }
}

/// Residual of the elimination system; length is `hset.system_size()`.
pub fn residual_vector(angles: &[f64], m: f64, hset: &HarmonicSet) -> Result<Vec<f64>> {
    let s = hset.system_size();
    if angles.len() != s {
        return Err(domain(format!(
            "expected {s} angles for {} eliminated orders, got {}",
            hset.orders.len(),
            angles.len()
        )));
    }
    for &a in angles {
        if !(0.0..=PI / 2.0).contains(&a) {
            return Err(domain(format!("angle {a} outside [0, pi/2]")));
        }
    }
    let mut r = Vec::with_capacity(s);
    let fundamental: f64 = angles.iter().map(|&t| t.cos()).sum();
    r.push(fundamental - s as f64 * m);
    for &n in &hset.orders {
        let nf = f64::from(n);
        r.push(angles.iter().map(|&t| (nf * t).cos()).sum());
    }
    Ok(r)
}

/// Analytic Jacobian of [`residual_vector`]: `J[0][k] = -sin(theta_k)`,
/// `J[i][k] = -n_i sin(n_i theta_k)`.
pub fn jacobian(angles: &[f64], hset: &HarmonicSet) -> Result<Vec<Vec<f64>>> {
    let s = hset.system_size();
    if angles.len() != s {
        return Err(domain(format!(
            "expected {s} angles, got {}",
            angles.len()
        )));
    }
    let mut j = Vec::with_capacity(s);
    j.push(angles.iter().map(|&t| -t.sin()).collect::<Vec<_>>());
    for &n in &hset.orders {
        let nf = f64::from(n);
        j.push(angles.iter().map(|&t| -nf * (nf * t).sin()).collect());
    }
    Ok(j)
}

/// Tuning for [`newton_solve`] and [`sweep_solutions`].
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Convergence threshold on the residual infinity norm.
    pub tol: f64,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Jittered restarts before falling back to the grid scan.
    pub jitter_starts: usize,
    /// Grid spacing for the fallback scan, degrees.
    pub grid_step_deg: f64,
    /// How many best-scoring grid candidates get a Newton polish.
    pub grid_polish: usize,
    /// Seed for the jitter stream (mixed with the bits of `m`).
    pub seed: u64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            jitter_starts: 20,
            grid_step_deg: 2.0,
            grid_polish: 20,
            seed: 42,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Solves `J x = -r` in place by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut j: Vec<Vec<f64>>, r: &[f64]) -> Option<Vec<f64>> {
    let n = r.len();
    let mut b: Vec<f64> = r.iter().map(|x| -x).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b_| j[a][col].abs().partial_cmp(&j[b_][col].abs()).unwrap())?;
        if j[pivot][col].abs() < 1e-14 {
            return None;
        }
        j.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = j[row][col] / j[col][col];
            for k in col..n {
                j[row][k] -= f * j[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= j[col][k] * b[k];
        }
        b[col] = acc / j[col][col];
    }
    if b.iter().all(|x| x.is_finite()) {
        Some(b)
    } else {
        None
    }
}

/// Clamps into the interior margin and restores ascending order.
fn project(angles: &mut [f64]) {
    for a in angles.iter_mut() {
        *a = a.clamp(ANGLE_EPSILON, PI / 2.0 - ANGLE_EPSILON);
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Natural-sampling initial guess: `theta_k = arcsin((2k - 1) / (2s))`.
fn default_guess(s: usize) -> Vec<f64> {
    (1..=s)
        .map(|k| ((2 * k - 1) as f64 / (2 * s) as f64).asin())
        .collect()
}

fn strictly_valid(angles: &[f64]) -> bool {
    angles.windows(2).all(|w| w[1] > w[0])
        && angles.first().is_some_and(|&a| a > 0.0)
        && angles.last().is_some_and(|&a| a < PI / 2.0)
}

/// One damped Newton run from a fixed start. Returns the final iterate, the
/// iterations spent and whether it converged below `tol`.
fn damped_newton(
    start: &[f64],
    m: f64,
    hset: &HarmonicSet,
    opts: &NewtonOptions,
) -> (Vec<f64>, usize, bool) {
    let mut th = start.to_vec();
    project(&mut th);
    for it in 0..opts.max_iter {
        let r = match residual_vector(&th, m, hset) {
            Ok(r) => r,
            Err(_) => return (th, it, false),
        };
        let rn = inf_norm(&r);
        if rn < opts.tol {
            return (th, it, true);
        }
        let j = match jacobian(&th, hset) {
            Ok(j) => j,
            Err(_) => return (th, it, false),
        };
        let Some(step) = solve_linear(j, &r) else {
            return (th, it, false);
        };
        // halve the step until the residual norm decreases (max 10 halvings);
        // if nothing helps take the full step anyway to escape plateaus
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let mut cand: Vec<f64> = th
                .iter()
                .zip(&step)
                .map(|(t, d)| t + lambda * d)
                .collect();
            project(&mut cand);
            if let Ok(rc) = residual_vector(&cand, m, hset) {
                if inf_norm(&rc) < rn {
                    accepted = Some(cand);
                    break;
                }
            }
            lambda *= 0.5;
        }
        th = accepted.unwrap_or_else(|| {
            let mut cand: Vec<f64> = th.iter().zip(&step).map(|(t, d)| t + d).collect();
            project(&mut cand);
            cand
        });
        if th.iter().any(|a| !a.is_finite()) {
            return (th, it, false);
        }
    }
    let converged = residual_vector(&th, m, hset)
        .map(|r| inf_norm(&r) < opts.tol)
        .unwrap_or(false);
    (th, opts.max_iter, converged)
}

/// Ranks grid candidates by residual infinity norm and returns the best few
/// as polish seeds. The enumeration walks ordered combinations of the grid
/// values with precomputed cosine tables, so the scan stays cheap even at a
/// 2-degree spacing.
fn grid_seeds(m: f64, hset: &HarmonicSet, opts: &NewtonOptions) -> Vec<Vec<f64>> {
    let s = hset.system_size();
    // full enumeration is only tractable for small systems; widen the grid
    // for larger ones
    let step = if s <= 5 {
        opts.grid_step_deg
    } else {
        opts.grid_step_deg.max(6.0)
    };
    let mut values = Vec::new();
    let mut g = step;
    while g < 90.0 - 1e-9 {
        values.push(g.to_radians());
        g += step;
    }
    let nv = values.len();
    if nv < s {
        return Vec::new();
    }
    // cos tables: row 0 is the fundamental, then one row per eliminated order
    let mut tables = Vec::with_capacity(s);
    tables.push(values.iter().map(|&v| v.cos()).collect::<Vec<_>>());
    for &n in &hset.orders {
        let nf = f64::from(n);
        tables.push(values.iter().map(|&v| (nf * v).cos()).collect());
    }
    let target = s as f64 * m;

    let keep = opts.grid_polish.max(1);
    let mut best: Vec<(f64, Vec<usize>)> = Vec::with_capacity(keep + 1);
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let mut score = {
            let sum: f64 = idx.iter().map(|&i| tables[0][i]).sum();
            (sum - target).abs()
        };
        for t in tables.iter().skip(1) {
            let sum: f64 = idx.iter().map(|&i| t[i]).sum();
            score = score.max(sum.abs());
        }
        if best.len() < keep || score < best.last().unwrap().0 {
            let pos = best
                .binary_search_by(|probe| probe.0.partial_cmp(&score).unwrap())
                .unwrap_or_else(|e| e);
            best.insert(pos, (score, idx.clone()));
            best.truncate(keep);
        }
        // advance the ordered combination
        let mut level = s;
        loop {
            if level == 0 {
                break;
            }
            level -= 1;
            if idx[level] < nv - (s - level) {
                idx[level] += 1;
                for k in level + 1..s {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
            if level == 0 {
                return best
                    .into_iter()
                    .map(|(_, ix)| ix.iter().map(|&i| values[i]).collect())
                    .collect();
            }
        }
    }
}

/// Solves the elimination system at one modulation index.
///
/// A `guess` short-circuits the start cascade (useful for continuation).
/// Never errors on non-convergence: the returned solution carries
/// `converged = false` and the best iterate found.
pub fn newton_solve(
    m: f64,
    hset: &HarmonicSet,
    guess: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<AngleSolution> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Infeasible { m });
    }
    if opts.tol <= 0.0 {
        return Err(domain("tolerance must be positive"));
    }
    let s = hset.system_size();
    if let Some(g) = guess {
        if g.len() != s {
            return Err(domain(format!(
                "guess has {} angles, system needs {s}",
                g.len()
            )));
        }
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(g) = guess {
        starts.push(g.to_vec());
    }
    let base = default_guess(s);
    starts.push(base.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ m.to_bits());
    for _ in 0..opts.jitter_starts {
        let jittered: Vec<f64> = base
            .iter()
            .map(|&t| t + rng.random_range(-0.4..0.4))
            .collect();
        starts.push(jittered);
    }

    fn consider(
        best: &mut Option<AngleSolution>,
        m: f64,
        hset: &HarmonicSet,
        th: Vec<f64>,
        iters: usize,
        conv: bool,
    ) {
        let rn = residual_vector(&th, m, hset)
            .map(|r| inf_norm(&r))
            .unwrap_or(f64::INFINITY);
        let sol = AngleSolution {
            m,
            angles: th,
            residual_norm: rn,
            iterations: iters,
            converged: conv,
        };
        match best {
            Some(b) if b.residual_norm <= sol.residual_norm => {}
            _ => *best = Some(sol),
        }
    }

    let mut best: Option<AngleSolution> = None;
    for start in &starts {
        let (th, iters, conv) = damped_newton(start, m, hset, opts);
        if conv && strictly_valid(&th) {
            consider(&mut best, m, hset, th, iters, true);
            return Ok(best.unwrap());
        }
        consider(&mut best, m, hset, th, iters, false);
    }
    for seed in grid_seeds(m, hset, opts) {
        let (th, iters, conv) = damped_newton(&seed, m, hset, opts);
        if conv && strictly_valid(&th) {
            consider(&mut best, m, hset, th, iters, true);
            return Ok(best.unwrap());
        }
        consider(&mut best, m, hset, th, iters, false);
    }
    Ok(best.expect("at least one start was attempted"))
}

/// Flags attached to angle-table rows instead of dropping or fabricating
/// data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    /// Modulation index outside (0, 1).
    MOutOfRange,
    /// Angles fail the strict ordered-interior invariant.
    AnglesInvalid,
    /// The solver found no root at this grid point.
    NotConverged,
    /// A cell did not parse as a number.
    ParseError,
}

impl std::fmt::Display for RowFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RowFlag::MOutOfRange => "m_out_of_range",
            RowFlag::AnglesInvalid => "angles_invalid",
            RowFlag::NotConverged => "not_converged",
            RowFlag::ParseError => "parse_error",
        };
        f.write_str(s)
    }
}

/// One row of a modulation-index/angle table. Angles are stored in degrees,
/// matching the CSV boundary convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTableRow {
    pub m: Option<f64>,
    pub angles_deg: Vec<f64>,
    pub thd_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RowFlag>,
}

/// A table of `(m, angles, thd)` rows, the shape shared by solver sweeps and
/// ingested reference data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTable {
    /// Number of angle columns.
    pub s: usize,
    pub rows: Vec<AngleTableRow>,
}

impl AngleTable {
    /// Rows that parsed cleanly and carry no flags.
    pub fn clean_rows(&self) -> impl Iterator<Item = &AngleTableRow> {
        self.rows.iter().filter(|r| r.flags.is_empty())
    }
}

/// Continuation sweep over a modulation-index grid.
///
/// Each converged solution seeds the next grid point before the usual start
/// cascade. Non-converged points are flagged and carry no angles. An empty
/// grid (`m_start > m_end`) yields an empty table.
pub fn sweep_solutions(
    m_start: f64,
    m_end: f64,
    step: f64,
    hset: &HarmonicSet,
    opts: &NewtonOptions,
) -> Result<AngleTable> {
    let s = hset.system_size();
    if m_start > m_end {
        return Ok(AngleTable { s, rows: Vec::new() });
    }
    if step <= 0.0 {
        return Err(domain("sweep step must be positive"));
    }
    if !(m_start > 0.0 && m_end < 1.0) {
        return Err(domain("sweep range must lie inside (0, 1)"));
    }
    let mut rows = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut i = 0usize;
    loop {
        let m = m_start + i as f64 * step;
        if m > m_end + step * 1e-9 {
            break;
        }
        let sol = newton_solve(m, hset, prev.as_deref(), opts)?;
        if sol.converged {
            let thd = analytic_thd(&sol.angles, 49)? * 100.0;
            prev = Some(sol.angles.clone());
            rows.push(AngleTableRow {
                m: Some(m),
                angles_deg: sol.angles.iter().map(|a| a.to_degrees()).collect(),
                thd_pct: Some(thd),
                flags: Vec::new(),
            });
        } else {
            rows.push(AngleTableRow {
                m: Some(m),
                angles_deg: Vec::new(),
                thd_pct: None,
                flags: vec![RowFlag::NotConverged],
            });
        }
        i += 1;
    }
    Ok(AngleTable { s, rows })
}

/// Audit of one table row: residuals of the elimination system at the stored
/// angles plus a recomputed THD.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowAudit {
    pub m: Option<f64>,
    pub flags: Vec<RowFlag>,
    /// Residual vector at the stored angles (fundamental row first).
    pub residuals: Option<Vec<f64>>,
    pub residual_norm: Option<f64>,
    pub thd_stored_pct: Option<f64>,
    pub thd_recomputed_pct: Option<f64>,
}

/// Audit report for a whole table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub eliminated_orders: Vec<u32>,
    pub rows: Vec<RowAudit>,
}

impl AuditReport {
    /// Count of rows carrying at least one flag.
    pub fn flagged_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.flags.is_empty()).count()
    }
}

/// Recomputes residuals and THD for every row of a table, flagging rows whose
/// modulation index or angles are unusable. Never fails on bad rows.
pub fn audit_table(table: &AngleTable, hset: &HarmonicSet) -> AuditReport {
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut flags = row.flags.clone();
        let angles_rad: Vec<f64> = row.angles_deg.iter().map(|d| d.to_radians()).collect();

        if let Some(m) = row.m {
            if !(m > 0.0 && m < 1.0) && !flags.contains(&RowFlag::MOutOfRange) {
                flags.push(RowFlag::MOutOfRange);
            }
        }
        let angles_ok = angles_rad.len() == hset.system_size()
            && SwitchingAngleSet::new(angles_rad.clone()).is_ok();
        if !angles_ok && !angles_rad.is_empty() && !flags.contains(&RowFlag::AnglesInvalid) {
            flags.push(RowFlag::AnglesInvalid);
        }

        // residuals are still informative when m is out of range, as long as
        // the angles themselves evaluate
        let residuals = match (row.m, angles_rad.len() == hset.system_size()) {
            (Some(m), true) => residual_vector(&angles_rad, m, hset).ok(),
            _ => None,
        };
        let residual_norm = residuals.as_ref().map(|r| inf_norm(r));
        let thd_recomputed_pct = if angles_rad.len() == hset.system_size() {
            analytic_thd(&angles_rad, 49).ok().map(|t| t * 100.0)
        } else {
            None
        };
        rows.push(RowAudit {
            m: row.m,
            flags,
            residuals,
            residual_norm,
            thd_stored_pct: row.thd_pct,
            thd_recomputed_pct,
        });
    }
    AuditReport {
        eliminated_orders: hset.orders.clone(),
        rows,
    }
}
