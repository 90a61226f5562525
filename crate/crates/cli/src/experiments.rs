//! Experiment drivers: turn a resolved configuration into meshes, runs and
//! CSV tables. Sweep points are independent, so they run in parallel; the
//! collected results keep the configured order, which keeps every output
//! byte-reproducible regardless of thread count.

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;

use wavetank::basis::Basis1d;
use wavetank::diagnostics::{
    compute_energies, estimate_period, triple_norm_error, zero_crossings, ConvergenceTable,
    EnergyTrace,
};
use wavetank::formulation::WaveOperators;
use wavetank::mesh::TensorMesh;
use wavetank::timestep::{
    advance, prepare_initial, run_simulation, SimulationRun, WaveState, WaveSystem,
};
use wavetank::waves::{project_initial_condition, AiryWave};

use crate::config::{ExperimentConfig, ExperimentKind, TimestepPolicy};
use crate::csv;

/// Period measurements want this many probe zero crossings; runs extend past
/// their nominal length (up to twice) until the count is reached.
pub const MIN_CROSSINGS: usize = 20;

/// Everything an experiment produces: named file contents plus a summary for
/// the manifest.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub files: Vec<(String, String)>,
    pub results: serde_json::Value,
}

/// One simulation setup: operators, the analytic wave, and the resolved
/// step size and nominal step count.
pub(crate) struct Case {
    pub ops: WaveOperators,
    pub wave: AiryWave,
    pub dt: f64,
    pub nominal_steps: usize,
    pub mesh_n: usize,
}

/// Mesh-coupled step rule: ten steps per period at one element per
/// wavelength, scaled linearly with `h` and halved once per degree above
/// linear.
fn coupled_dt(degree: usize, t_ex: f64, n: usize) -> f64 {
    t_ex / (10.0 * n as f64 * 2f64.powi(degree as i32 - 1))
}

/// Resolve the step size and nominal step count for one sweep point.
pub(crate) fn resolve_steps(cfg: &ExperimentConfig, wave: &AiryWave, n: usize) -> (f64, usize) {
    let t_ex = wave.period();
    let mut duration = match cfg.experiment {
        ExperimentKind::ErrorConvergence => cfg.duration_fraction * t_ex,
        _ => cfg.periods * t_ex,
    };
    if let TimestepPolicy::PeriodsPerRun(np) = cfg.timestep {
        duration = np as f64 * t_ex;
    }
    let dt = match cfg.timestep {
        TimestepPolicy::Coupled | TimestepPolicy::PeriodsPerRun(_) => {
            coupled_dt(cfg.degree, t_ex, n)
        }
        TimestepPolicy::FixedSeconds(s) => s,
        TimestepPolicy::FixedFraction(den) => duration / den as f64,
    };
    let steps = (duration / dt).round().max(1.0) as usize;
    (dt, steps)
}

pub(crate) fn build_case(cfg: &ExperimentConfig, n: usize, depth: f64) -> Result<Case> {
    let kind = cfg.basis.to_core();
    let bx = Basis1d::new(kind, cfg.degree, n, 0.0, cfg.length, true)?;
    let bz = Basis1d::new(kind, cfg.degree, n, -depth, 0.0, false)?;
    let mesh = TensorMesh::new(bx, bz)?;
    let wave = AiryWave::spanning_domain(cfg.length, depth, cfg.amplitude, cfg.gravity)?;
    let ops = WaveOperators::new(mesh, cfg.gravity)?;
    let (dt, nominal_steps) = resolve_steps(cfg, &wave, n);
    Ok(Case { ops, wave, dt, nominal_steps, mesh_n: n })
}

fn initial_state(cfg: &ExperimentConfig, case: &Case) -> Result<WaveState> {
    let (phi, eta) = project_initial_condition(case.ops.mesh(), &case.wave, 0.0, cfg.tol)?;
    Ok(WaveState::new(phi, eta))
}

/// Run the nominal number of steps.
fn simulate(cfg: &ExperimentConfig, case: &Case) -> Result<SimulationRun> {
    let system = WaveSystem::build(&case.ops, cfg.formulation.to_core(), case.dt, cfg.tol)?;
    let run = run_simulation(&system, initial_state(cfg, case)?, case.nominal_steps, cfg.probe_x)?;
    Ok(run)
}

/// Run the nominal number of steps, then keep going (up to twice the nominal
/// length) until the probe signal holds [`MIN_CROSSINGS`] zero crossings, so
/// a period can always be measured even on badly dispersive meshes.
fn simulate_for_period(cfg: &ExperimentConfig, case: &Case) -> Result<SimulationRun> {
    let system = WaveSystem::build(&case.ops, cfg.formulation.to_core(), case.dt, cfg.tol)?;
    let mut state = initial_state(cfg, case)?;
    prepare_initial(&system, &mut state)?;
    let ops = system.operators();

    let mut energy = EnergyTrace::new();
    let (kin, pot) = compute_energies(ops, &state);
    energy.record(state.time, kin, pot);
    let mut probe = Vec::with_capacity(case.nominal_steps + 1);
    probe.push((state.time, ops.mesh().eval_surface_field(&state.eta, cfg.probe_x)?));

    let cap = 2 * case.nominal_steps;
    let mut max_residual = 0.0_f64;
    let mut max_iterations = 0usize;
    let mut max_sweeps = 0usize;
    let mut step = 0usize;
    while step < case.nominal_steps
        || (step < cap && zero_crossings(&probe).len() < MIN_CROSSINGS)
    {
        let info = advance(&system, &mut state)?;
        max_residual = max_residual.max(info.residual);
        max_iterations = max_iterations.max(info.iterations);
        max_sweeps = max_sweeps.max(info.sweeps);
        let (kin, pot) = compute_energies(ops, &state);
        energy.record(state.time, kin, pot);
        probe.push((state.time, ops.mesh().eval_surface_field(&state.eta, cfg.probe_x)?));
        step += 1;
    }
    Ok(SimulationRun { energy, probe, final_state: state, max_residual, max_iterations, max_sweeps })
}

/// Worst-case solver records across a set of runs, echoed into manifests so
/// a sweep can be audited after the fact.
#[derive(Debug, Clone, Copy, Default)]
struct SolveAudit {
    residual: f64,
    iterations: usize,
    sweeps: usize,
}

impl SolveAudit {
    fn absorb(&mut self, run: &SimulationRun) {
        self.residual = self.residual.max(run.max_residual);
        self.iterations = self.iterations.max(run.max_iterations);
        self.sweeps = self.sweeps.max(run.max_sweeps);
    }
}

/// Run the configured experiment and collect its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        ExperimentKind::Single => run_single(cfg),
        ExperimentKind::EnergyTrace => run_energy_trace(cfg),
        ExperimentKind::PeriodConvergence => run_period_convergence(cfg),
        ExperimentKind::ErrorConvergence => run_error_convergence(cfg),
        ExperimentKind::Dispersion => run_dispersion(cfg),
    }
}

fn run_single(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.meshes[0];
    let case = build_case(cfg, n, cfg.depth).with_context(|| format!("mesh {n}x{n}"))?;
    let run = simulate(cfg, &case)?;
    let files = vec![
        ("energy.csv".to_string(), csv::energy_csv(&run.energy)),
        ("probe.csv".to_string(), csv::probe_csv(&run.probe)),
    ];
    let results = json!({
        "mesh": n,
        "dofs": case.ops.mesh().n_dofs(),
        "dt": case.dt,
        "steps": case.nominal_steps,
        "final_time": run.final_state.time,
        "energy_drift": run.energy.max_relative_drift(),
        "max_residual": run.max_residual,
        "max_iterations": run.max_iterations,
        "max_sweeps": run.max_sweeps,
    });
    Ok(ExperimentOutput { files, results })
}

fn run_energy_trace(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let runs: Vec<(Case, SimulationRun)> = cfg
        .meshes
        .par_iter()
        .map(|&n| {
            let case = build_case(cfg, n, cfg.depth).with_context(|| format!("mesh {n}x{n}"))?;
            let run = simulate(cfg, &case).with_context(|| format!("mesh {n}x{n}"))?;
            Ok((case, run))
        })
        .collect::<Result<_>>()?;

    let mut files = Vec::new();
    let mut drift_rows = Vec::new();
    let mut drift_json = Vec::new();
    let mut audit = SolveAudit::default();
    for (case, run) in &runs {
        let n = case.mesh_n;
        let dofs = case.ops.mesh().n_dofs();
        let drift = run.energy.max_relative_drift();
        files.push((format!("energy_{n}x{n}.csv"), csv::energy_csv(&run.energy)));
        drift_rows.push((n, dofs, drift));
        drift_json.push(json!({ "mesh": n, "dofs": dofs, "dt": case.dt, "drift": drift }));
        audit.absorb(run);
    }
    files.push(("drift.csv".to_string(), csv::drift_csv(&drift_rows)));
    let results = json!({
        "drifts": drift_json,
        "max_residual": audit.residual,
        "max_iterations": audit.iterations,
        "max_sweeps": audit.sweeps,
    });
    Ok(ExperimentOutput { files, results })
}

fn run_period_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let runs: Vec<(Case, SimulationRun, f64)> = cfg
        .meshes
        .par_iter()
        .map(|&n| {
            let case = build_case(cfg, n, cfg.depth).with_context(|| format!("mesh {n}x{n}"))?;
            let run = simulate_for_period(cfg, &case).with_context(|| format!("mesh {n}x{n}"))?;
            let period = estimate_period(&run.probe).with_context(|| format!("mesh {n}x{n}"))?;
            Ok((case, run, period))
        })
        .collect::<Result<_>>()?;

    let t_ex = runs[0].0.wave.period();
    let mut table = ConvergenceTable::new();
    let mut value_rows = Vec::new();
    let mut row_json = Vec::new();
    let mut audit = SolveAudit::default();
    for (case, run, period) in &runs {
        let h = cfg.length / case.mesh_n as f64;
        let dofs = case.ops.mesh().n_dofs();
        let rel_error = (period - t_ex).abs() / t_ex;
        table.push(h, dofs, rel_error)?;
        value_rows.push((h, dofs, *period, t_ex));
        row_json.push(json!({
            "mesh": case.mesh_n,
            "dofs": dofs,
            "dt": case.dt,
            "period": period,
            "rel_error": rel_error,
        }));
        audit.absorb(run);
    }
    let fitted = (table.rows().len() >= 3).then(|| table.fitted_rate().ok()).flatten();
    println!("{table}");

    let files = vec![
        ("period_convergence.csv".to_string(), csv::convergence_csv(&table)),
        ("period_values.csv".to_string(), csv::period_csv(&value_rows)),
    ];
    let results = json!({
        "period_exact": t_ex,
        "rows": row_json,
        "fitted_rate": fitted,
        "max_residual": audit.residual,
        "max_iterations": audit.iterations,
        "max_sweeps": audit.sweeps,
    });
    Ok(ExperimentOutput { files, results })
}

fn run_error_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let runs: Vec<(Case, SimulationRun, f64)> = cfg
        .meshes
        .par_iter()
        .map(|&n| {
            let case = build_case(cfg, n, cfg.depth).with_context(|| format!("mesh {n}x{n}"))?;
            let run = simulate(cfg, &case).with_context(|| format!("mesh {n}x{n}"))?;
            let error = triple_norm_error(
                cfg.formulation.to_core(),
                &case.ops,
                &run.final_state,
                &case.wave,
                case.dt,
            )?;
            Ok((case, run, error))
        })
        .collect::<Result<_>>()?;

    let mut table = ConvergenceTable::new();
    let mut row_json = Vec::new();
    let mut audit = SolveAudit::default();
    for (case, run, error) in &runs {
        let h = cfg.length / case.mesh_n as f64;
        let dofs = case.ops.mesh().n_dofs();
        table.push(h, dofs, *error)?;
        row_json.push(json!({
            "mesh": case.mesh_n,
            "dofs": dofs,
            "dt": case.dt,
            "error": error,
        }));
        audit.absorb(run);
    }
    let fitted = (table.rows().len() >= 3).then(|| table.fitted_rate().ok()).flatten();
    println!("{table}");

    let files = vec![("error_convergence.csv".to_string(), csv::convergence_csv(&table))];
    let results = json!({
        "rows": row_json,
        "fitted_rate": fitted,
        "max_residual": audit.residual,
        "max_iterations": audit.iterations,
        "max_sweeps": audit.sweeps,
    });
    Ok(ExperimentOutput { files, results })
}

fn run_dispersion(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.meshes[0];
    let k = 2.0 * std::f64::consts::PI / cfg.length;
    let runs: Vec<(Case, SimulationRun, f64)> = cfg
        .kh_values
        .par_iter()
        .map(|&kh| {
            let depth = kh / k;
            let case = build_case(cfg, n, depth).with_context(|| format!("kh = {kh}"))?;
            let run = simulate_for_period(cfg, &case).with_context(|| format!("kh = {kh}"))?;
            let period = estimate_period(&run.probe).with_context(|| format!("kh = {kh}"))?;
            Ok((case, run, period))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut row_json = Vec::new();
    let mut worst = 0.0_f64;
    let mut audit = SolveAudit::default();
    for ((case, run, period), &kh) in runs.iter().zip(&cfg.kh_values) {
        // One wavelength spans the domain, so c = length / period.
        let numeric = cfg.length / period;
        let analytic = case.wave.phase_speed();
        let rel_error = (numeric - analytic).abs() / analytic;
        worst = worst.max(rel_error);
        rows.push((kh, numeric, analytic, rel_error));
        row_json.push(json!({
            "kh": kh,
            "depth": kh / k,
            "dt": case.dt,
            "c_p_numeric": numeric,
            "c_p_analytic": analytic,
            "rel_error": rel_error,
        }));
        audit.absorb(run);
    }

    let files = vec![("dispersion.csv".to_string(), csv::dispersion_csv(&rows))];
    let results = json!({
        "mesh": n,
        "worst_rel_error": worst,
        "rows": row_json,
        "max_residual": audit.residual,
        "max_iterations": audit.iterations,
        "max_sweeps": audit.sweeps,
    });
    Ok(ExperimentOutput { files, results })
}
