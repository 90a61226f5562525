//! Implicit-midpoint time stepping for the wave formulations.
//!
//! Every route advances the same way: solve the formulation's midpoint
//! system for the state at `t + dt/2`, then extrapolate,
//! `x_next = 2 x_mid - x_prev`. The midpoint rate `(x_next - x_prev)/dt`
//! then agrees exactly with the rate the midpoint systems were assembled
//! around, which is what turns the formulations' algebraic conservation
//! statements into invariants of the stepped trajectories. For any
//! symmetric `A` the extrapolation satisfies, identically,
//!
//! ```text
//! (x_next^T A x_next - x_prev^T A x_prev) / (2 dt) = x_mid^T A x_rate
//! ```
//!
//! with `x_rate = (x_next - x_prev)/dt` — the discrete product rule behind
//! the exact energy balance.

use crate::diagnostics::{compute_energies, EnergyTrace};
use crate::error::{Result, WaveError};
use crate::formulation::{
    build_monolithic, build_reduced, build_segregated, FormulationKind, MonolithicSystem,
    ReducedSystem, SegregatedSystem, SweepPolicy, VerticalVelocityMethod, WaveOperators,
};

/// Discrete fields at an integer time level.
#[derive(Debug, Clone)]
pub struct WaveState {
    /// Volume potential coefficients.
    pub phi: Vec<f64>,
    /// Surface elevation coefficients.
    pub eta: Vec<f64>,
    /// Surface rate `phi_t`, carried only on the reduced path; the
    /// elevation then mirrors it through the dynamic condition
    /// `eta = -phi_t / g`.
    pub phi_t: Option<Vec<f64>>,
    /// Simulation time of the fields.
    pub time: f64,
    /// Number of steps taken so far.
    pub step: usize,
}

impl WaveState {
    pub fn new(phi: Vec<f64>, eta: Vec<f64>) -> Self {
        Self { phi, eta, phi_t: None, time: 0.0, step: 0 }
    }
}

/// Linear extrapolation through the midpoint: `2 mid - prev`.
pub fn extrapolate(prev: &[f64], mid: &[f64]) -> Vec<f64> {
    prev.iter().zip(mid).map(|(p, m)| 2.0 * m - p).collect()
}

/// Cost and accuracy record of one time step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    /// Worst true relative residual among the linear solves of the step.
    pub residual: f64,
    /// Total iterations spent (0 when every solve was a cached dense one).
    pub iterations: usize,
    /// Surface/interior sweeps used (1 unless iterating to the midpoint).
    pub sweeps: usize,
}

impl StepInfo {
    fn absorb(&mut self, report: &crate::solver::SolveReport) {
        self.residual = self.residual.max(report.residual);
        self.iterations += report.iterations;
    }
}

/// A formulation assembled and factorized for one fixed time step.
#[derive(Debug, Clone)]
pub enum WaveSystem {
    Monolithic(MonolithicSystem),
    Reduced(ReducedSystem),
    Segregated(SegregatedSystem),
}

impl WaveSystem {
    /// Build the system a [`FormulationKind`] calls for, with the sweep
    /// policy that kind implies (lagged forcing for the direct-gradient
    /// segregated route, midpoint iteration for the multiplier route).
    pub fn build(
        ops: &WaveOperators,
        kind: FormulationKind,
        dt: f64,
        tol: f64,
    ) -> Result<Self> {
        Ok(match kind {
            FormulationKind::Monolithic => Self::Monolithic(build_monolithic(ops, dt, tol)?),
            FormulationKind::Reduced => Self::Reduced(build_reduced(ops, dt, tol)?),
            FormulationKind::Segregated => Self::Segregated(build_segregated(
                ops,
                dt,
                tol,
                VerticalVelocityMethod::DirectGradient,
            )?),
            FormulationKind::SegregatedLm => Self::Segregated(build_segregated(
                ops,
                dt,
                tol,
                VerticalVelocityMethod::LmProjection,
            )?),
        })
    }

    pub fn kind(&self) -> FormulationKind {
        match self {
            Self::Monolithic(_) => FormulationKind::Monolithic,
            Self::Reduced(_) => FormulationKind::Reduced,
            Self::Segregated(s) => match s.method() {
                VerticalVelocityMethod::DirectGradient => FormulationKind::Segregated,
                VerticalVelocityMethod::LmProjection => FormulationKind::SegregatedLm,
            },
        }
    }

    pub fn operators(&self) -> &WaveOperators {
        match self {
            Self::Monolithic(s) => s.operators(),
            Self::Reduced(s) => s.operators(),
            Self::Segregated(s) => s.operators(),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Self::Monolithic(s) => s.dt(),
            Self::Reduced(s) => s.dt(),
            Self::Segregated(s) => s.dt(),
        }
    }
}

fn check_state(ops: &WaveOperators, state: &WaveState) -> Result<()> {
    if state.phi.len() != ops.n_volume() || state.eta.len() != ops.n_surface() {
        return Err(WaveError::DimensionMismatch(format!(
            "state has phi len {} / eta len {}, mesh wants {} / {}",
            state.phi.len(),
            state.eta.len(),
            ops.n_volume(),
            ops.n_surface()
        )));
    }
    if let Some(rate) = &state.phi_t {
        if rate.len() != ops.n_surface() {
            return Err(WaveError::DimensionMismatch(format!(
                "surface rate has len {}, trace has {}",
                rate.len(),
                ops.n_surface()
            )));
        }
    }
    Ok(())
}

/// Put an initial state into the shape its formulation expects: the reduced
/// path gains the surface rate `phi_t = -g eta` from the dynamic condition,
/// the segregated paths replace the interior potential with the discrete
/// harmonic extension of its own trace, and the first-order paths drop any
/// stale rate.
pub fn prepare_initial(system: &WaveSystem, state: &mut WaveState) -> Result<()> {
    let ops = system.operators();
    check_state(ops, state)?;
    match system {
        WaveSystem::Monolithic(_) => {
            state.phi_t = None;
        }
        WaveSystem::Reduced(_) => {
            let g = ops.gravity();
            let rate: Vec<f64> = state.eta.iter().map(|e| -g * e).collect();
            state.eta = rate.iter().map(|r| -r / g).collect();
            state.phi_t = Some(rate);
        }
        WaveSystem::Segregated(sys) => {
            state.phi_t = None;
            let trace = ops.trace().restrict(&state.phi);
            let (phi, _) = sys.solve_interior(&trace)?;
            state.phi = phi;
        }
    }
    Ok(())
}

fn step_monolithic(sys: &MonolithicSystem, state: &mut WaveState) -> Result<StepInfo> {
    let mut info = StepInfo { sweeps: 1, ..Default::default() };
    let (phi_mid, eta_mid, report) = sys.solve_midpoint(&state.phi, &state.eta)?;
    info.absorb(&report);
    state.phi = extrapolate(&state.phi, &phi_mid);
    state.eta = extrapolate(&state.eta, &eta_mid);
    state.time += sys.dt();
    state.step += 1;
    Ok(info)
}

fn step_segregated(sys: &SegregatedSystem, state: &mut WaveState) -> Result<StepInfo> {
    let ops = sys.operators();
    let mut info = StepInfo::default();
    let phi_hat_n = ops.trace().restrict(&state.phi);

    let (phi_hat_mid, eta_mid) = match sys.sweep_policy() {
        SweepPolicy::Lagged => {
            info.sweeps = 1;
            let forcing = sys.forcing_load(&state.phi)?;
            let (pm, em, report) = sys.solve_surface_midpoint(&phi_hat_n, &state.eta, &forcing)?;
            info.absorb(&report);
            (pm, em)
        }
        SweepPolicy::IterateToMidpoint { tol, max_sweeps } => {
            let mut forcing_field = state.phi.clone();
            let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
            loop {
                info.sweeps += 1;
                let forcing = sys.forcing_load(&forcing_field)?;
                let (pm, em, report) =
                    sys.solve_surface_midpoint(&phi_hat_n, &state.eta, &forcing)?;
                info.absorb(&report);
                if let Some((pp, pe)) = &previous {
                    let mut change = 0.0;
                    let mut scale = 0.0;
                    for (a, b) in pm.iter().zip(pp).chain(em.iter().zip(pe)) {
                        change += (a - b) * (a - b);
                        scale += a * a;
                    }
                    if change.sqrt() <= tol * scale.sqrt().max(f64::MIN_POSITIVE) {
                        previous = Some((pm, em));
                        break;
                    }
                }
                if info.sweeps >= max_sweeps {
                    return Err(WaveError::Diagnostic(format!(
                        "segregated midpoint iteration did not settle within {max_sweeps} sweeps"
                    )));
                }
                let (volume_mid, report) = sys.solve_interior(&pm)?;
                info.absorb(&report);
                forcing_field = volume_mid;
                previous = Some((pm, em));
            }
            previous.unwrap()
        }
    };

    let phi_hat_next = extrapolate(&phi_hat_n, &phi_hat_mid);
    state.eta = extrapolate(&state.eta, &eta_mid);
    let (phi_next, report) = sys.solve_interior(&phi_hat_next)?;
    info.absorb(&report);
    state.phi = phi_next;
    state.time += sys.dt();
    state.step += 1;
    Ok(info)
}

/// Advance a first-order (monolithic or segregated) state by one step.
pub fn step_first_order(system: &WaveSystem, state: &mut WaveState) -> Result<StepInfo> {
    check_state(system.operators(), state)?;
    match system {
        WaveSystem::Monolithic(sys) => step_monolithic(sys, state),
        WaveSystem::Segregated(sys) => step_segregated(sys, state),
        WaveSystem::Reduced(_) => Err(WaveError::InvalidParameter(
            "the reduced formulation advances with step_second_order".into(),
        )),
    }
}

/// Advance the reduced (second-order in time) state by one step. The state
/// must carry the surface rate `phi_t`; the elevation mirror
/// `eta = -phi_t / g` is maintained alongside it.
pub fn step_second_order(sys: &ReducedSystem, state: &mut WaveState) -> Result<StepInfo> {
    let ops = sys.operators();
    check_state(ops, state)?;
    let rate_n = state.phi_t.as_ref().ok_or_else(|| {
        WaveError::InvalidParameter(
            "reduced stepping needs the surface rate; run prepare_initial first".into(),
        )
    })?;
    let mut info = StepInfo { sweeps: 1, ..Default::default() };
    let (phi_mid, report) = sys.solve_midpoint(&state.phi, rate_n)?;
    info.absorb(&report);
    let dt = sys.dt();
    let g = ops.gravity();
    let phi_hat_mid = ops.trace().restrict(&phi_mid);
    let phi_hat_n = ops.trace().restrict(&state.phi);
    let rate_mid: Vec<f64> =
        phi_hat_mid.iter().zip(&phi_hat_n).map(|(m, p)| 2.0 / dt * (m - p)).collect();
    let rate_next = extrapolate(rate_n, &rate_mid);
    state.phi = extrapolate(&state.phi, &phi_mid);
    state.eta = rate_next.iter().map(|r| -r / g).collect();
    state.phi_t = Some(rate_next);
    state.time += dt;
    state.step += 1;
    Ok(info)
}

/// Advance any prepared system by one step.
pub fn advance(system: &WaveSystem, state: &mut WaveState) -> Result<StepInfo> {
    match system {
        WaveSystem::Reduced(sys) => step_second_order(sys, state),
        _ => step_first_order(system, state),
    }
}

/// Everything a finished run hands back: the energy trace at integer time
/// levels, the probe signal, the final state, and worst-case solve records.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub energy: EnergyTrace,
    /// `(t, eta(probe_x, t))` at every time level including `t = 0`.
    pub probe: Vec<(f64, f64)>,
    pub final_state: WaveState,
    pub max_residual: f64,
    pub max_iterations: usize,
    pub max_sweeps: usize,
}

/// Run `n_steps` of a prepared system from an initial state, recording
/// energies and the elevation at `probe_x` every step. The initial state is
/// normalized for the formulation first, and the trace starts with the
/// post-normalization record at the initial time.
pub fn run_simulation(
    system: &WaveSystem,
    initial: WaveState,
    n_steps: usize,
    probe_x: f64,
) -> Result<SimulationRun> {
    let ops = system.operators();
    let mut state = initial;
    prepare_initial(system, &mut state)?;

    let mut energy = EnergyTrace::new();
    let (kin, pot) = compute_energies(ops, &state);
    energy.record(state.time, kin, pot);
    let mut probe = Vec::with_capacity(n_steps + 1);
    probe.push((state.time, ops.mesh().eval_surface_field(&state.eta, probe_x)?));

    let mut max_residual = 0.0_f64;
    let mut max_iterations = 0usize;
    let mut max_sweeps = 0usize;
    for _ in 0..n_steps {
        let info = advance(system, &mut state)?;
        max_residual = max_residual.max(info.residual);
        max_iterations = max_iterations.max(info.iterations);
        max_sweeps = max_sweeps.max(info.sweeps);
        let (kin, pot) = compute_energies(ops, &state);
        energy.record(state.time, kin, pot);
        probe.push((state.time, ops.mesh().eval_surface_field(&state.eta, probe_x)?));
    }

    Ok(SimulationRun { energy, probe, final_state: state, max_residual, max_iterations, max_sweeps })
}
