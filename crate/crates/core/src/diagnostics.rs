//! Measurements over computed wave fields: energy traces, zero-crossing
//! period estimation, formulation-norm errors against the analytic wave,
//! and convergence-rate fitting.

use crate::error::{Result, WaveError};
use crate::formulation::{FormulationKind, WaveOperators};
use crate::mesh::gauss_legendre;
use crate::timestep::WaveState;
use crate::waves::AiryWave;

/// One record of an energy trace, taken at an integer time level.
#[derive(Debug, Clone, Copy)]
pub struct EnergySample {
    pub time: f64,
    pub kinetic: f64,
    pub potential: f64,
}

impl EnergySample {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// Kinetic, potential and total energy over the course of a simulation.
#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    samples: Vec<EnergySample>,
}

impl EnergyTrace {
    pub fn new() -> Self {
        Self { samples: Vec::new() }
    }

    /// Append a record; sample times must increase strictly.
    pub fn record(&mut self, time: f64, kinetic: f64, potential: f64) {
        if let Some(last) = self.samples.last() {
            assert!(time > last.time, "energy trace times must increase strictly");
        }
        self.samples.push(EnergySample { time, kinetic, potential });
    }

    pub fn samples(&self) -> &[EnergySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest deviation of the total energy from its initial value,
    /// relative to the initial value.
    pub fn max_relative_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let e0 = first.total();
        let worst =
            self.samples.iter().map(|s| (s.total() - e0).abs()).fold(0.0, f64::max);
        worst / e0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Kinetic and potential energy of a state: `E_kin = 1/2 phi^T K phi` and
/// `E_pot = g/2 eta^T M eta`, the latter replaced by the equivalent
/// `1/(2g) phi_t^T M phi_t` whenever the state carries the surface rate
/// (the reduced path).
pub fn compute_energies(ops: &WaveOperators, state: &WaveState) -> (f64, f64) {
    let kinetic = 0.5 * ops.stiffness().bilinear(&state.phi, &state.phi);
    let potential = match &state.phi_t {
        Some(rate) => 0.5 / ops.gravity() * ops.surface_mass().bilinear(rate, rate),
        None => 0.5 * ops.gravity() * ops.surface_mass().bilinear(&state.eta, &state.eta),
    };
    (kinetic, potential)
}

/// Zero crossings of a sampled signal, located by linear interpolation
/// between bracketing samples. Samples lying exactly on zero count as
/// crossings at their own time.
pub fn zero_crossings(series: &[(f64, f64)]) -> Vec<f64> {
    let mut crossings = Vec::new();
    let push = |t: f64, out: &mut Vec<f64>| {
        if out.last().map_or(true, |&prev: &f64| t > prev) {
            out.push(t);
        }
    };
    for pair in series.windows(2) {
        let (t0, v0) = pair[0];
        let (t1, v1) = pair[1];
        if v0 == 0.0 {
            push(t0, &mut crossings);
        } else if v0 * v1 < 0.0 {
            push(t0 + (t1 - t0) * v0 / (v0 - v1), &mut crossings);
        }
    }
    if let Some(&(t, v)) = series.last() {
        if v == 0.0 {
            push(t, &mut crossings);
        }
    }
    crossings
}

/// Estimate the oscillation period of a probe signal from its zero
/// crossings: the first 2 crossings are discarded, the following 18 are
/// retained, and the period is twice the mean gap between the retained
/// crossings (consecutive crossings are half a period apart).
pub fn estimate_period(series: &[(f64, f64)]) -> Result<f64> {
    let crossings = zero_crossings(series);
    if crossings.len() < 20 {
        return Err(WaveError::Diagnostic(format!(
            "period estimation needs 20 zero crossings, found {}",
            crossings.len()
        )));
    }
    // 18 retained crossings span 17 half-period gaps.
    Ok(2.0 * (crossings[19] - crossings[2]) / 17.0)
}

/// Error of a discrete state against the analytic wave at the state's time,
/// measured in the formulation's own norm. The time step enters the norm as
/// a fixed parameter:
///
/// ```text
/// monolithic:   |grad e_phi|^2 + 2/(g dt^2) |e_phi|_s^2 + g/2 |e_eta|_s^2
/// reduced:      |grad e_phi|^2 + 4/(g dt^2) |e_phi|_s^2
/// segregated:   1/dt |e_phi|_s^2 + g^2 dt/4 |e_eta|_s^2
/// ```
///
/// where `|.|_s` is the free-surface L2 norm. Quadrature uses `p + 2`
/// points per direction so the measured rates are not polluted.
pub fn triple_norm_error(
    kind: FormulationKind,
    ops: &WaveOperators,
    state: &WaveState,
    wave: &AiryWave,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::InvalidParameter(format!(
            "norm parameter dt must be positive, got {dt}"
        )));
    }
    let mesh = ops.mesh();
    let g = ops.gravity();
    let t = state.time;
    let (w_grad, w_phi, w_eta) = match kind {
        FormulationKind::Monolithic => (1.0, 2.0 / (g * dt * dt), 0.5 * g),
        FormulationKind::Reduced => (1.0, 4.0 / (g * dt * dt), 0.0),
        FormulationKind::Segregated | FormulationKind::SegregatedLm => {
            (0.0, 1.0 / dt, 0.25 * g * g * dt)
        }
    };

    let mut total = 0.0;
    if w_grad != 0.0 {
        let qx = gauss_legendre(mesh.basis_x().degree() + 2)?;
        let qz = gauss_legendre(mesh.basis_z().degree() + 2)?;
        for e in 0..mesh.n_elems() {
            let geo = mesh.element_geometry(e);
            let (xs, wxs) = qx.mapped_to(geo.x0, geo.x0 + geo.hx);
            let (zs, wzs) = qz.mapped_to(geo.z0, geo.z0 + geo.hz);
            for (&z, &wz) in zs.iter().zip(&wzs) {
                for (&x, &wx) in xs.iter().zip(&wxs) {
                    let (dx, dz) = mesh.eval_volume_gradient(&state.phi, x, z)?;
                    let (ex, ez) = wave.grad_phi(x, z, t);
                    total += w_grad * wx * wz * ((dx - ex).powi(2) + (dz - ez).powi(2));
                }
            }
        }
    }

    let q = gauss_legendre(mesh.basis_x().degree() + 2)?;
    let phi_hat = ops.trace().restrict(&state.phi);
    for ex in 0..mesh.nx() {
        let (a, b) = mesh.basis_x().element_span(ex);
        let (xs, ws) = q.mapped_to(a, b);
        for (&x, &w) in xs.iter().zip(&ws) {
            let e_phi = mesh.eval_surface_field(&phi_hat, x)? - wave.phi(x, 0.0, t);
            let e_eta = mesh.eval_surface_field(&state.eta, x)? - wave.eta(x, t);
            total += w * (w_phi * e_phi * e_phi + w_eta * e_eta * e_eta);
        }
    }
    Ok(total.sqrt())
}

/// One row of a mesh-refinement study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dofs: usize,
    pub error: f64,
    /// Rate against the previous row, `log(e_prev/e) / log(h_prev/h)`.
    pub rate: Option<f64>,
}

/// Errors over a sequence of refined meshes, with consecutive rates.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Append a row; element sizes must decrease strictly down the table.
    pub fn push(&mut self, h: f64, dofs: usize, error: f64) -> Result<()> {
        if !(h > 0.0 && h.is_finite()) || !(error >= 0.0 && error.is_finite()) {
            return Err(WaveError::InvalidParameter(format!(
                "convergence rows need h > 0 and finite error, got h={h}, error={error}"
            )));
        }
        let rate = match self.rows.last() {
            Some(prev) => {
                if h >= prev.h {
                    return Err(WaveError::InvalidParameter(format!(
                        "mesh sizes must decrease down the table: {h} after {}",
                        prev.h
                    )));
                }
                (prev.error > 0.0 && error > 0.0)
                    .then(|| (prev.error / error).ln() / (prev.h / h).ln())
            }
            None => None,
        };
        self.rows.push(ConvergenceRow { h, dofs, error, rate });
        Ok(())
    }

    pub fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }

    /// Least-squares slope over all rows.
    pub fn fitted_rate(&self) -> Result<f64> {
        let hs: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let errors: Vec<f64> = self.rows.iter().map(|r| r.error).collect();
        fit_convergence_rate(&hs, &errors)
    }
}

impl std::fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>12} {:>8} {:>14} {:>8}", "h", "dofs", "error", "rate")?;
        for r in &self.rows {
            match r.rate {
                Some(rate) => writeln!(
                    f,
                    "{:>12.6} {:>8} {:>14.6e} {:>8.3}",
                    r.h, r.dofs, r.error, rate
                )?,
                None => writeln!(f, "{:>12.6} {:>8} {:>14.6e} {:>8}", r.h, r.dofs, r.error, "-")?,
            }
        }
        Ok(())
    }
}

/// Least-squares slope of `log(error)` against `log(h)`. Needs at least
/// three points so the fit means something.
pub fn fit_convergence_rate(hs: &[f64], errors: &[f64]) -> Result<f64> {
    if hs.len() != errors.len() {
        return Err(WaveError::DimensionMismatch(format!(
            "{} mesh sizes against {} errors",
            hs.len(),
            errors.len()
        )));
    }
    if hs.len() < 3 {
        return Err(WaveError::Diagnostic(format!(
            "rate fit needs at least 3 points, got {}",
            hs.len()
        )));
    }
    for (&h, &e) in hs.iter().zip(errors) {
        if !(h > 0.0) || !(e > 0.0) {
            return Err(WaveError::InvalidParameter(format!(
                "rate fit needs positive sizes and errors, got h={h}, error={e}"
            )));
        }
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - x_mean) * (y - y_mean);
        den += (x - x_mean) * (x - x_mean);
    }
    Ok(num / den)
}
