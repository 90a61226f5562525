//! CSV emission. Every number is written with 17 significant digits so the
//! files round-trip to the exact binary values; schemas are fixed so
//! downstream plotting never has to guess.

use wavetank::diagnostics::{ConvergenceTable, EnergyTrace};

/// One `f64` with enough digits to reproduce the bits on re-parse.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn line(fields: &[String]) -> String {
    let mut out = fields.join(",");
    out.push('\n');
    out
}

/// Columns `t,E_kin,E_pot,E_tot`, one row per sample.
pub fn energy_csv(trace: &EnergyTrace) -> String {
    let mut out = String::from("t,E_kin,E_pot,E_tot\n");
    for sample in trace.samples() {
        out.push_str(&line(&[
            number(sample.time),
            number(sample.kinetic),
            number(sample.potential),
            number(sample.total()),
        ]));
    }
    out
}

/// Columns `t,eta`: the surface elevation at the probe point.
pub fn probe_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::from("t,eta\n");
    for &(t, eta) in series {
        out.push_str(&line(&[number(t), number(eta)]));
    }
    out
}

/// Columns `h,dofs,error,rate`; the first rate cell is blank because rates
/// compare consecutive rows.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("h,dofs,error,rate\n");
    for row in table.rows() {
        let rate = row.rate.map(number).unwrap_or_default();
        out.push_str(&line(&[number(row.h), format!("{}", row.dofs), number(row.error), rate]));
    }
    out
}

/// Columns `mesh,dofs,drift`: worst relative energy drift per mesh.
pub fn drift_csv(rows: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("mesh,dofs,drift\n");
    for &(mesh, dofs, drift) in rows {
        out.push_str(&line(&[format!("{mesh}"), format!("{dofs}"), number(drift)]));
    }
    out
}

/// Columns `h,dofs,period,period_exact`: measured against expected periods.
pub fn period_csv(rows: &[(f64, usize, f64, f64)]) -> String {
    let mut out = String::from("h,dofs,period,period_exact\n");
    for &(h, dofs, period, exact) in rows {
        out.push_str(&line(&[number(h), format!("{dofs}"), number(period), number(exact)]));
    }
    out
}

/// Columns `kh,c_p_numeric,c_p_analytic,rel_error` for the dispersion sweep.
pub fn dispersion_csv(rows: &[(f64, f64, f64, f64)]) -> String {
    let mut out = String::from("kh,c_p_numeric,c_p_analytic,rel_error\n");
    for &(kh, numeric, analytic, err) in rows {
        out.push_str(&line(&[number(kh), number(numeric), number(analytic), number(err)]));
    }
    out
}
