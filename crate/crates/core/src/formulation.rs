//! Discrete weak formulations of the linear free-surface problem, set up for
//! implicit-midpoint stepping.
//!
//! All formulations solve for the *midpoint* state: with time step `dt`, the
//! unknowns are the fields at `t + dt/2`, discrete time derivatives are
//! midpoint differences such as `(2/dt) (phi_mid - phi_n)`, and the new time
//! level follows by extrapolation `phi_next = 2 phi_mid - phi_n`. The
//! parameter usually called `alpha` in the symmetrized free-surface term is
//! tied to the integrator, `alpha = 2/dt`, and is always computed from `dt`
//! rather than stored; this choice makes the discrete energy
//!
//! ```text
//! E = 1/2 phi^T K phi  +  g/2 eta^T M eta
//! ```
//!
//! an exact invariant of the monolithic scheme (`K` the volume stiffness,
//! `M` the surface mass), and likewise for the reduced scheme with
//! `1/(2g) phi_t^T M phi_t` as the potential part.
//!
//! With `R` the boolean surface restriction, the monolithic midpoint system
//! over `[phi; eta]` reads
//!
//! ```text
//! [ K + 2/(g dt^2) R^T M R     -1/dt R^T M ] [phi_mid]   [w-rows]
//! [ 1/dt M R                    g/2 M      ] [eta_mid] = [v-rows]
//! ```
//!
//! whose symmetric part is block diagonal and positive definite while the
//! off-diagonal blocks are exact negative transposes of each other. The
//! reduced formulation eliminates `eta` and solves an SPD system for the
//! potential alone. The segregated formulation advances a small free-surface
//! system forced by a reconstructed vertical velocity, then re-solves the
//! interior Laplace problem with the new surface trace as Dirichlet data.

use crate::assembly::{
    assemble_stiffness, assemble_surface_mass, surface_vertical_derivative_load, SparseMatrix,
};
use crate::error::{Result, WaveError};
use crate::mesh::{TensorMesh, TraceSpace};
use crate::solver::{PreparedSolver, SolveReport, SystemStructure};

/// Which weak formulation advances the wave problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    /// Coupled potential/elevation system with the symmetrized surface term.
    Monolithic,
    /// Potential-only system, second order in time.
    Reduced,
    /// Surface/interior splitting with the vertical velocity taken from the
    /// gradient of the (lagged) interior solution.
    Segregated,
    /// Surface/interior splitting with the vertical velocity recovered by the
    /// Lagrange-multiplier (weak flux) projection, iterated to the midpoint.
    SegregatedLm,
}

impl FormulationKind {
    pub fn is_segregated(self) -> bool {
        matches!(self, Self::Segregated | Self::SegregatedLm)
    }
}

/// How the segregated free-surface step reconstructs the vertical velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalVelocityMethod {
    /// Differentiate the interior solution and L2-project the surface trace.
    DirectGradient,
    /// Solve `(w, lambda) = -(grad w, grad phi)` for the multiplier and use
    /// `-lambda`, the weakly consistent normal flux.
    LmProjection,
}

/// Mesh-bound operators shared by every formulation: stiffness, surface
/// mass, and the trace map, together with the gravitational acceleration.
#[derive(Debug, Clone)]
pub struct WaveOperators {
    mesh: TensorMesh,
    trace: TraceSpace,
    stiffness: SparseMatrix,
    surface_mass: SparseMatrix,
    gravity: f64,
}

impl WaveOperators {
    pub fn new(mesh: TensorMesh, gravity: f64) -> Result<Self> {
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(WaveError::InvalidParameter(format!(
                "gravity must be positive, got {gravity}"
            )));
        }
        let trace = mesh.surface_trace();
        let stiffness = assemble_stiffness(&mesh)?;
        let surface_mass = assemble_surface_mass(&mesh)?;
        Ok(Self { mesh, trace, stiffness, surface_mass, gravity })
    }

    pub fn mesh(&self) -> &TensorMesh {
        &self.mesh
    }

    pub fn trace(&self) -> &TraceSpace {
        &self.trace
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn surface_mass(&self) -> &SparseMatrix {
        &self.surface_mass
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn n_volume(&self) -> usize {
        self.mesh.n_dofs()
    }

    pub fn n_surface(&self) -> usize {
        self.trace.len()
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WaveError::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// The monolithic midpoint system over the stacked unknown `[phi; eta]`.
#[derive(Debug, Clone)]
pub struct MonolithicSystem {
    ops: WaveOperators,
    matrix: SparseMatrix,
    solver: PreparedSolver,
    dt: f64,
}

impl MonolithicSystem {
    pub fn new(ops: &WaveOperators, dt: f64, tol: f64) -> Result<Self> {
        check_dt(dt)?;
        let n = ops.n_volume();
        let s = ops.n_surface();
        let g = ops.gravity();
        let mut triplets = ops.stiffness().coordinate_entries();
        let surf = ops.trace().volume_dofs();
        for (i, j, m) in ops.surface_mass().coordinate_entries() {
            triplets.push((surf[i], surf[j], 2.0 / (g * dt * dt) * m));
            triplets.push((surf[i], n + j, -(1.0 / dt) * m));
            triplets.push((n + i, surf[j], (1.0 / dt) * m));
            triplets.push((n + i, n + j, 0.5 * g * m));
        }
        let matrix = SparseMatrix::from_triplets(n + s, n + s, triplets);
        let solver = PreparedSolver::new(matrix.clone(), SystemStructure::Coercive, tol)?;
        Ok(Self { ops: ops.clone(), matrix, solver, dt })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn operators(&self) -> &WaveOperators {
        &self.ops
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Right-hand side assembled from the previous time level.
    pub fn rhs(&self, phi: &[f64], eta: &[f64]) -> Vec<f64> {
        let n = self.ops.n_volume();
        let s = self.ops.n_surface();
        let g = self.ops.gravity();
        let dt = self.dt;
        let m = self.ops.surface_mass();
        let phi_hat = self.ops.trace().restrict(phi);
        let m_phi = m.matvec(&phi_hat);
        let m_eta = m.matvec(eta);
        let mut rhs = vec![0.0; n + s];
        for (k, &dof) in self.ops.trace().volume_dofs().iter().enumerate() {
            rhs[dof] += 2.0 / (g * dt * dt) * m_phi[k] - 2.0 / dt * m_eta[k];
        }
        for k in 0..s {
            rhs[n + k] = m_phi[k] / dt;
        }
        rhs
    }

    /// Solve for the midpoint `(phi_mid, eta_mid)` given the previous level.
    pub fn solve_midpoint(
        &self,
        phi: &[f64],
        eta: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let rhs = self.rhs(phi, eta);
        let (sol, report) = self.solver.solve(&rhs)?;
        let n = self.ops.n_volume();
        let (phi_mid, eta_mid) = sol.split_at(n);
        Ok((phi_mid.to_vec(), eta_mid.to_vec(), report))
    }
}

/// Build the monolithic formulation.
pub fn build_monolithic(ops: &WaveOperators, dt: f64, tol: f64) -> Result<MonolithicSystem> {
    MonolithicSystem::new(ops, dt, tol)
}

/// The reduced (potential-only) midpoint system.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    ops: WaveOperators,
    matrix: SparseMatrix,
    solver: PreparedSolver,
    dt: f64,
}

impl ReducedSystem {
    pub fn new(ops: &WaveOperators, dt: f64, tol: f64) -> Result<Self> {
        check_dt(dt)?;
        let n = ops.n_volume();
        let g = ops.gravity();
        let surf = ops.trace().volume_dofs();
        let mut triplets = ops.stiffness().coordinate_entries();
        for (i, j, m) in ops.surface_mass().coordinate_entries() {
            triplets.push((surf[i], surf[j], 4.0 / (g * dt * dt) * m));
        }
        let matrix = SparseMatrix::from_triplets(n, n, triplets);
        let solver =
            PreparedSolver::new(matrix.clone(), SystemStructure::SymmetricPositiveDefinite, tol)?;
        Ok(Self { ops: ops.clone(), matrix, solver, dt })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn operators(&self) -> &WaveOperators {
        &self.ops
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Right-hand side from the previous potential and its surface rate.
    pub fn rhs(&self, phi: &[f64], phi_t: &[f64]) -> Vec<f64> {
        let g = self.ops.gravity();
        let dt = self.dt;
        let m = self.ops.surface_mass();
        let phi_hat = self.ops.trace().restrict(phi);
        let m_phi = m.matvec(&phi_hat);
        let m_rate = m.matvec(phi_t);
        let mut rhs = vec![0.0; self.ops.n_volume()];
        for (k, &dof) in self.ops.trace().volume_dofs().iter().enumerate() {
            rhs[dof] = 4.0 / (g * dt * dt) * m_phi[k] + 2.0 / (g * dt) * m_rate[k];
        }
        rhs
    }

    /// Solve for the midpoint potential.
    pub fn solve_midpoint(&self, phi: &[f64], phi_t: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.solver.solve(&self.rhs(phi, phi_t))
    }
}

/// Build the reduced formulation.
pub fn build_reduced(ops: &WaveOperators, dt: f64, tol: f64) -> Result<ReducedSystem> {
    ReducedSystem::new(ops, dt, tol)
}

/// Sweep policy of the segregated step: how often the surface system and the
/// interior solve exchange information within one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepPolicy {
    /// One sweep per step; the vertical-velocity forcing lags at the
    /// previous time level.
    Lagged,
    /// Repeat the surface/interior sweep until the midpoint surface state is
    /// a fixed point (relative change below `tol`), so the forcing is
    /// evaluated at the midpoint itself.
    IterateToMidpoint { tol: f64, max_sweeps: usize },
}

/// The segregated formulation: a `2s x 2s` free-surface block system over
/// `[phi_hat; eta]` plus a Dirichlet-constrained interior operator.
#[derive(Debug, Clone)]
pub struct SegregatedSystem {
    ops: WaveOperators,
    surface_matrix: SparseMatrix,
    surface_solver: PreparedSolver,
    interior_matrix: SparseMatrix,
    interior_solver: PreparedSolver,
    method: VerticalVelocityMethod,
    sweeps: SweepPolicy,
    dt: f64,
}

impl SegregatedSystem {
    pub fn new(
        ops: &WaveOperators,
        dt: f64,
        tol: f64,
        method: VerticalVelocityMethod,
        sweeps: SweepPolicy,
    ) -> Result<Self> {
        check_dt(dt)?;
        if let SweepPolicy::IterateToMidpoint { tol, max_sweeps } = sweeps {
            if !(tol > 0.0) || max_sweeps == 0 {
                return Err(WaveError::InvalidParameter(
                    "sweep iteration needs a positive tolerance and sweep budget".into(),
                ));
            }
        }
        let s = ops.n_surface();
        let g = ops.gravity();
        // Surface block over [phi_hat; eta]: the w-rows carry the dynamic
        // condition at the midpoint, the v-rows the kinematic condition with
        // the reconstructed vertical velocity on the right-hand side.
        let mut triplets = Vec::new();
        for (i, j, m) in ops.surface_mass().coordinate_entries() {
            triplets.push((i, j, 2.0 / dt * m));
            triplets.push((i, s + j, g * m));
            triplets.push((s + i, s + j, 0.5 * g * g * dt * m));
        }
        let surface_matrix = SparseMatrix::from_triplets(2 * s, 2 * s, triplets);
        let surface_solver =
            PreparedSolver::new(surface_matrix.clone(), SystemStructure::Coercive, tol)?;

        // Interior operator: stiffness rows of surface DOFs replaced by the
        // identity, so surface values enter as strong Dirichlet data.
        let surface_set: std::collections::HashSet<usize> =
            ops.trace().volume_dofs().iter().copied().collect();
        let mut interior_triplets: Vec<(usize, usize, f64)> = ops
            .stiffness()
            .coordinate_entries()
            .into_iter()
            .filter(|(r, _, _)| !surface_set.contains(r))
            .collect();
        for &d in ops.trace().volume_dofs() {
            interior_triplets.push((d, d, 1.0));
        }
        let interior_matrix =
            SparseMatrix::from_triplets(ops.n_volume(), ops.n_volume(), interior_triplets);
        let interior_solver =
            PreparedSolver::new(interior_matrix.clone(), SystemStructure::Coercive, tol)?;

        Ok(Self {
            ops: ops.clone(),
            surface_matrix,
            surface_solver,
            interior_matrix,
            interior_solver,
            method,
            sweeps,
            dt,
        })
    }

    pub fn operators(&self) -> &WaveOperators {
        &self.ops
    }

    pub fn surface_matrix(&self) -> &SparseMatrix {
        &self.surface_matrix
    }

    pub fn interior_matrix(&self) -> &SparseMatrix {
        &self.interior_matrix
    }

    pub fn method(&self) -> VerticalVelocityMethod {
        self.method
    }

    pub fn sweep_policy(&self) -> SweepPolicy {
        self.sweeps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Solve the interior Laplace problem with Dirichlet data `phi_hat` on
    /// the free surface (and natural no-penetration conditions elsewhere).
    pub fn solve_interior(&self, phi_hat: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        if phi_hat.len() != self.ops.n_surface() {
            return Err(WaveError::DimensionMismatch(format!(
                "surface data has {} entries, trace has {}",
                phi_hat.len(),
                self.ops.n_surface()
            )));
        }
        let mut rhs = vec![0.0; self.ops.n_volume()];
        for (k, &dof) in self.ops.trace().volume_dofs().iter().enumerate() {
            rhs[dof] = phi_hat[k];
        }
        self.interior_solver.solve(&rhs)
    }

    /// Surface load vector `(v, phi_z)` for the kinematic forcing, evaluated
    /// on a volume field by the configured reconstruction.
    pub fn forcing_load(&self, phi_vol: &[f64]) -> Result<Vec<f64>> {
        match self.method {
            VerticalVelocityMethod::DirectGradient => {
                surface_vertical_derivative_load(self.ops.mesh(), phi_vol)
            }
            VerticalVelocityMethod::LmProjection => {
                // (v, -lambda) with (w, lambda) = -(grad w, grad phi): the
                // surface rows of K phi are exactly the tested flux.
                let k_phi = self.ops.stiffness().matvec(phi_vol);
                Ok(self.ops.trace().restrict(&k_phi))
            }
        }
    }

    /// Right-hand side of the surface block system.
    fn surface_rhs(&self, phi_hat: &[f64], eta: &[f64], forcing: &[f64]) -> Vec<f64> {
        let s = self.ops.n_surface();
        let g = self.ops.gravity();
        let dt = self.dt;
        let m = self.ops.surface_mass();
        let m_phi = m.matvec(phi_hat);
        let m_eta = m.matvec(eta);
        let mut rhs = vec![0.0; 2 * s];
        for k in 0..s {
            rhs[k] = 2.0 / dt * m_phi[k];
            rhs[s + k] = 0.5 * g * g * dt * m_eta[k] + 0.25 * g * g * dt * dt * forcing[k];
        }
        rhs
    }

    /// Solve the surface block for the midpoint `(phi_hat_mid, eta_mid)`
    /// with a given forcing load.
    pub fn solve_surface_midpoint(
        &self,
        phi_hat: &[f64],
        eta: &[f64],
        forcing: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let rhs = self.surface_rhs(phi_hat, eta, forcing);
        let (sol, report) = self.surface_solver.solve(&rhs)?;
        let s = self.ops.n_surface();
        let (phi_mid, eta_mid) = sol.split_at(s);
        Ok((phi_mid.to_vec(), eta_mid.to_vec(), report))
    }
}

/// Build the segregated formulation with its default sweep policy: the
/// direct-gradient variant runs one lagged sweep per step, the
/// Lagrange-multiplier variant iterates the sweep until the forcing sits at
/// the midpoint (which is what makes its energy exact).
pub fn build_segregated(
    ops: &WaveOperators,
    dt: f64,
    tol: f64,
    method: VerticalVelocityMethod,
) -> Result<SegregatedSystem> {
    let sweeps = match method {
        VerticalVelocityMethod::DirectGradient => SweepPolicy::Lagged,
        VerticalVelocityMethod::LmProjection => {
            // The sweep tolerance must sit above the linear-solver noise
            // floor or the fixed point can never settle.
            SweepPolicy::IterateToMidpoint { tol: (3.0 * tol).max(1e-13), max_sweeps: 200 }
        }
    };
    SegregatedSystem::new(ops, dt, tol, method, sweeps)
}

/// Reconstruct the discrete vertical velocity `phi_z` on the free surface
/// from a volume potential, as surface coefficients.
pub fn reconstruct_vertical_velocity(
    ops: &WaveOperators,
    phi: &[f64],
    method: VerticalVelocityMethod,
    tol: f64,
) -> Result<Vec<f64>> {
    if phi.len() != ops.n_volume() {
        return Err(WaveError::DimensionMismatch(format!(
            "potential has {} entries, mesh has {} DOFs",
            phi.len(),
            ops.n_volume()
        )));
    }
    let load = match method {
        VerticalVelocityMethod::DirectGradient => {
            surface_vertical_derivative_load(ops.mesh(), phi)?
        }
        VerticalVelocityMethod::LmProjection => {
            let k_phi = ops.stiffness().matvec(phi);
            ops.trace().restrict(&k_phi)
        }
    };
    let (q, _) = crate::solver::solve_spd(ops.surface_mass(), &load, tol)?;
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Basis1d, BasisKind};
    use crate::solver::DenseLu;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn operators(kind: BasisKind, degree: usize, n: usize, periodic: bool) -> WaveOperators {
        let bx = Basis1d::new(kind, degree, n, 0.0, 1.0, periodic).unwrap();
        let bz = Basis1d::new(kind, degree, n, -1.0, 0.0, false).unwrap();
        let mesh = TensorMesh::new(bx, bz).unwrap();
        WaveOperators::new(mesh, 9.81).unwrap()
    }

    #[test]
    fn monolithic_off_diagonal_blocks_are_exact_negative_transposes() {
        let ops = operators(BasisKind::Lagrange, 1, 3, true);
        let sys = build_monolithic(&ops, 0.05, 1e-12).unwrap();
        let a = sys.matrix();
        let n = ops.n_volume();
        let s = ops.n_surface();
        let surf = ops.trace().volume_dofs();
        for &di in surf {
            for j in 0..s {
                assert_eq!(
                    a.entry(di, n + j),
                    -a.entry(n + j, di),
                    "coupling blocks must be exact negations"
                );
            }
        }
        for i in 0..s {
            for j in 0..s {
                assert_eq!(a.entry(n + i, n + j), a.entry(n + j, n + i));
            }
        }
    }

    #[test]
    fn monolithic_quadratic_form_matches_the_formulation_norm() {
        // For any W = [w; v], W^T A W must equal the coercivity norm
        // |grad w|^2 + 2/(g dt^2) |w|_s^2 + g/2 |v|_s^2: the skew coupling
        // cancels exactly.
        let ops = operators(BasisKind::BSpline, 2, 4, true);
        let dt = 0.0321;
        let sys = build_monolithic(&ops, dt, 1e-12).unwrap();
        let g = ops.gravity();
        let n = ops.n_volume();
        let s = ops.n_surface();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let w: Vec<f64> = (0..n + s).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let quad = sys.matrix().bilinear(&w, &w);
            let (wv, vv) = w.split_at(n);
            let w_hat = ops.trace().restrict(wv);
            let want = ops.stiffness().bilinear(wv, wv)
                + 2.0 / (g * dt * dt) * ops.surface_mass().bilinear(&w_hat, &w_hat)
                + 0.5 * g * ops.surface_mass().bilinear(vv, vv);
            assert_relative_eq!(quad, want, max_relative = 1e-10);
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn monolithic_step_conserves_the_discrete_energy() {
        let ops = operators(BasisKind::Lagrange, 1, 4, true);
        let g = ops.gravity();
        let dt = 0.07;
        let sys = build_monolithic(&ops, dt, 1e-13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi: Vec<f64> = (0..ops.n_volume()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eta: Vec<f64> = (0..ops.n_surface()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy = |p: &[f64], e: &[f64]| {
            0.5 * ops.stiffness().bilinear(p, p) + 0.5 * g * ops.surface_mass().bilinear(e, e)
        };
        let (phi_mid, eta_mid, _) = sys.solve_midpoint(&phi, &eta).unwrap();
        let phi1: Vec<f64> = phi.iter().zip(&phi_mid).map(|(a, m)| 2.0 * m - a).collect();
        let eta1: Vec<f64> = eta.iter().zip(&eta_mid).map(|(a, m)| 2.0 * m - a).collect();
        let (e0, e1) = (energy(&phi, &eta), energy(&phi1, &eta1));
        assert_relative_eq!(e0, e1, max_relative = 1e-11);
    }

    #[test]
    fn reduced_operator_tends_to_the_stiffness_for_large_dt() {
        let ops = operators(BasisKind::Lagrange, 1, 3, false);
        let sys = build_reduced(&ops, 1e6, 1e-12).unwrap();
        let k = ops.stiffness();
        let mut worst = 0.0_f64;
        for (r, c, v) in sys.matrix().coordinate_entries() {
            worst = worst.max((v - k.entry(r, c)).abs());
        }
        assert!(worst < 1e-11, "surface augmentation should vanish, worst {worst}");
    }

    #[test]
    fn reduced_midpoint_of_a_resting_constant_state_is_the_state_itself() {
        let ops = operators(BasisKind::BSpline, 2, 4, true);
        let sys = build_reduced(&ops, 0.01, 1e-13).unwrap();
        let phi = vec![3.25; ops.n_volume()];
        let phi_t = vec![0.0; ops.n_surface()];
        let (mid, _) = sys.solve_midpoint(&phi, &phi_t).unwrap();
        for v in mid {
            assert_relative_eq!(v, 3.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn reduced_step_conserves_its_discrete_energy() {
        let ops = operators(BasisKind::BSpline, 2, 4, true);
        let g = ops.gravity();
        let dt = 0.05;
        let sys = build_reduced(&ops, dt, 1e-13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let phi: Vec<f64> = (0..ops.n_volume()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phi_t: Vec<f64> = (0..ops.n_surface()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy = |p: &[f64], r: &[f64]| {
            0.5 * ops.stiffness().bilinear(p, p)
                + 0.5 / g * ops.surface_mass().bilinear(r, r)
        };
        let (phi_mid, _) = sys.solve_midpoint(&phi, &phi_t).unwrap();
        let phi1: Vec<f64> = phi.iter().zip(&phi_mid).map(|(a, m)| 2.0 * m - a).collect();
        let phi_hat_mid = ops.trace().restrict(&phi_mid);
        let phi_hat_n = ops.trace().restrict(&phi);
        let rate_mid: Vec<f64> = phi_hat_mid
            .iter()
            .zip(&phi_hat_n)
            .map(|(m, a)| 2.0 / dt * (m - a))
            .collect();
        let phi_t1: Vec<f64> = phi_t.iter().zip(&rate_mid).map(|(a, m)| 2.0 * m - a).collect();
        assert_relative_eq!(energy(&phi, &phi_t), energy(&phi1, &phi_t1), max_relative = 1e-11);
    }

    #[test]
    fn interior_solve_extends_constants_exactly() {
        let ops = operators(BasisKind::BSpline, 2, 4, true);
        let sys = build_segregated(&ops, 0.01, 1e-13, VerticalVelocityMethod::DirectGradient)
            .unwrap();
        let ones = vec![1.0; ops.n_surface()];
        let (phi, report) = sys.solve_interior(&ones).unwrap();
        assert!(report.residual < 1e-12);
        for v in phi {
            assert_relative_eq!(v, 1.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn interior_solve_matches_dense_oracle_and_obeys_the_discrete_maximum_bound() {
        let ops = operators(BasisKind::Lagrange, 1, 4, true);
        let sys = build_segregated(&ops, 0.01, 1e-13, VerticalVelocityMethod::DirectGradient)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data: Vec<f64> = (0..ops.n_surface()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (phi, _) = sys.solve_interior(&data).unwrap();

        let lu = DenseLu::factor(sys.interior_matrix()).unwrap();
        let mut rhs = vec![0.0; ops.n_volume()];
        for (k, &dof) in ops.trace().volume_dofs().iter().enumerate() {
            rhs[dof] = data[k];
        }
        let oracle = lu.solve(&rhs);
        for (a, b) in phi.iter().zip(&oracle) {
            assert_relative_eq!(a, b, epsilon = 1e-11, max_relative = 1e-11);
        }

        // Bilinear elements on squares form an M-matrix: the discrete
        // harmonic extension stays inside the range of its boundary data.
        let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        for v in &phi {
            assert!(*v >= lo - 1e-10 && *v <= hi + 1e-10, "{v} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn interior_solve_reproduces_the_airy_potential_up_to_discretization_error() {
        let wave = crate::waves::AiryWave::new(0.01, 2.0 * std::f64::consts::PI, 1.0, 9.81).unwrap();
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let ops = operators(BasisKind::BSpline, 2, n, true);
            let sys = build_segregated(&ops, 0.01, 1e-13, VerticalVelocityMethod::DirectGradient)
                .unwrap();
            // Dirichlet data: L2 projection of the exact surface potential.
            let phi_hat =
                crate::waves::project_surface(ops.mesh(), |x| wave.phi(x, 0.0, 0.0), 1e-13)
                    .unwrap();
            let (phi, _) = sys.solve_interior(&phi_hat).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..30 {
                let x = i as f64 / 30.0;
                for z in [-0.15, -0.5, -0.85] {
                    let err = (ops.mesh().eval_volume_field(&phi, x, z).unwrap()
                        - wave.phi(x, z, 0.0))
                    .abs();
                    worst = worst.max(err);
                }
            }
            assert!(worst < prev, "interior error should shrink with the mesh");
            prev = worst;
        }
        assert!(prev < 1e-5, "final interior error {prev}");
    }

    #[test]
    fn vertical_velocity_of_a_linear_profile_is_exact_for_both_methods() {
        for kind in [BasisKind::Lagrange, BasisKind::BSpline] {
            let ops = operators(kind, 2, 3, true);
            let nodes_z = ops.mesh().basis_z().node_points();
            let mut phi = vec![0.0; ops.n_volume()];
            for iz in 0..ops.mesh().dofs_z() {
                for ix in 0..ops.mesh().dofs_x() {
                    phi[ops.mesh().dof_index(ix, iz)] = nodes_z[iz];
                }
            }
            for method in
                [VerticalVelocityMethod::DirectGradient, VerticalVelocityMethod::LmProjection]
            {
                let q = reconstruct_vertical_velocity(&ops, &phi, method, 1e-13).unwrap();
                for v in &q {
                    assert_relative_eq!(*v, 1.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn lm_multiplier_approaches_the_true_flux_under_refinement() {
        // Harmonic extension of cos(2 pi x) has phi_z(x, 0) =
        // 2 pi tanh(2 pi) cos(2 pi x); the weak flux converges to it.
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let ops = operators(BasisKind::BSpline, 2, n, true);
            let sys = build_segregated(&ops, 0.01, 1e-13, VerticalVelocityMethod::LmProjection)
                .unwrap();
            let data = crate::waves::project_surface(ops.mesh(), |x| (two_pi * x).cos(), 1e-13)
                .unwrap();
            let (phi, _) = sys.solve_interior(&data).unwrap();
            let q = reconstruct_vertical_velocity(
                &ops,
                &phi,
                VerticalVelocityMethod::LmProjection,
                1e-13,
            )
            .unwrap();
            let mut worst = 0.0_f64;
            for i in 0..50 {
                let x = i as f64 / 50.0;
                let got = ops.mesh().eval_surface_field(&q, x).unwrap();
                let want = two_pi * two_pi.tanh() * (two_pi * x).cos();
                worst = worst.max((got - want).abs());
            }
            assert!(worst < prev, "flux error should shrink: {worst} vs {prev}");
            prev = worst;
        }
        assert!(prev < 0.05, "final flux error {prev}");
    }

    #[test]
    fn bad_construction_parameters_are_rejected() {
        let ops = operators(BasisKind::Lagrange, 1, 3, true);
        assert!(build_monolithic(&ops, 0.0, 1e-12).is_err());
        assert!(build_reduced(&ops, -1.0, 1e-12).is_err());
        assert!(SegregatedSystem::new(
            &ops,
            0.1,
            1e-12,
            VerticalVelocityMethod::LmProjection,
            SweepPolicy::IterateToMidpoint { tol: 0.0, max_sweeps: 10 },
        )
        .is_err());
        let mesh = ops.mesh().clone();
        assert!(WaveOperators::new(mesh, -9.81).is_err());
    }
}
