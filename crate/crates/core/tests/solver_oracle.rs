//! Independent oracles for the Newton solver: an exhaustive coarse grid
//! search over ordered angle tuples confirms the solver lands in the basin of
//! a true root, and the published reference table is audited against the
//! elimination system it claims to solve.

use std::io::BufReader;

use sheforge_core::harmonics::analytic_thd;
use sheforge_core::io::read_angle_table_csv;
use sheforge_core::she_solver::{
    audit_table, newton_solve, residual_vector, HarmonicSet, NewtonOptions, RowFlag,
};

const REFERENCE_CSV: &str = include_str!("../../../data/reference_angle_table.csv");

/// Exhaustive 2-degree grid search over ordered 4-tuples, returning the
/// tuple with the smallest residual infinity norm. Completely independent of
/// the Newton path: plain enumeration, no derivatives, no damping.
fn grid_search_best(m: f64, hset: &HarmonicSet) -> (Vec<f64>, f64) {
    let values: Vec<f64> = (1..45).map(|k| f64::from(2 * k).to_radians()).collect();
    let nv = values.len();
    let target = 4.0 * m;
    let mut best = (Vec::new(), f64::INFINITY);
    for a in 0..nv {
        for b in a + 1..nv {
            for c in b + 1..nv {
                for d in c + 1..nv {
                    let th = [values[a], values[b], values[c], values[d]];
                    let mut score = (th.iter().map(|t| t.cos()).sum::<f64>() - target).abs();
                    for &n in hset.orders() {
                        let nf = f64::from(n);
                        let sum: f64 = th.iter().map(|t| (nf * t).cos()).sum();
                        score = score.max(sum.abs());
                    }
                    if score < best.1 {
                        best = (th.to_vec(), score);
                    }
                }
            }
        }
    }
    best
}

#[test]
fn newton_root_sits_in_the_grid_search_basin() {
    let hset = HarmonicSet::new(vec![5, 7, 11]).unwrap();
    let m = 0.8;
    let sol = newton_solve(m, &hset, None, &NewtonOptions::default()).unwrap();
    assert!(sol.converged);

    let (grid_best, grid_score) = grid_search_best(m, &hset);
    // a true root nearby must drive the coarse-grid score this low
    assert!(grid_score < 0.35, "grid score {grid_score}");
    for (ns, gs) in sol.angles.iter().zip(&grid_best) {
        let diff_deg = (ns - gs).abs().to_degrees();
        assert!(
            diff_deg <= 3.0,
            "solver angle {} deg vs grid angle {} deg",
            ns.to_degrees(),
            gs.to_degrees()
        );
    }
}

#[test]
fn reference_table_ingests_with_twelve_rows_and_one_range_flag() {
    let table = read_angle_table_csv(BufReader::new(REFERENCE_CSV.as_bytes())).unwrap();
    assert_eq!(table.s, 4);
    assert_eq!(table.rows.len(), 12);
    // row 2 carries the out-of-range modulation index 8.81
    assert_eq!(table.rows[1].m, Some(8.81));
    assert!(table.rows[1].flags.contains(&RowFlag::MOutOfRange));
    // every other row is clean
    assert_eq!(
        table.rows.iter().filter(|r| !r.flags.is_empty()).count(),
        1
    );
}

#[test]
fn reference_angles_do_not_satisfy_the_elimination_system() {
    let table = read_angle_table_csv(BufReader::new(REFERENCE_CSV.as_bytes())).unwrap();
    let hset = HarmonicSet::new(vec![5, 7, 11]).unwrap();
    let report = audit_table(&table, &hset);

    // the m = 0.9 row: |sum cos(5 theta)| must exceed 0.1 by a wide margin
    let row = report
        .rows
        .iter()
        .find(|r| r.m == Some(0.9))
        .expect("m = 0.9 row present");
    let residuals = row.residuals.as_ref().unwrap();
    assert!(
        (residuals[1].abs() - 2.0922).abs() < 5e-4,
        "5th-order residual {}",
        residuals[1]
    );
    assert!(residuals[1].abs() > 0.1);

    // and the recomputed THD disagrees with the printed column
    let recomputed = row.thd_recomputed_pct.unwrap();
    assert!(
        (recomputed - 14.283).abs() < 0.01,
        "recomputed THD {recomputed}%"
    );
    assert!((row.thd_stored_pct.unwrap() - 3.12).abs() < 1e-12);
}

#[test]
fn solver_thd_beats_reference_claims_at_08() {
    // the solver's own m = 0.8 branch point, fixed by the analytic oracle
    let hset = HarmonicSet::new(vec![5, 7, 11]).unwrap();
    let sol = newton_solve(0.8, &hset, None, &NewtonOptions::default()).unwrap();
    let thd = analytic_thd(&sol.angles, 49).unwrap();
    assert!(thd < 0.12);
    let r = residual_vector(&sol.angles, 0.8, &hset).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-10));
}
