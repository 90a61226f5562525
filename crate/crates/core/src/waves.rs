//! Small-amplitude (Airy) standing-wave reference solutions and L2
//! projections of their initial data onto the discrete spaces.
//!
//! A right-travelling linear wave of amplitude `xi`, wavenumber `k`, and
//! water depth `H` under gravity `g` has
//!
//! ```text
//! eta(x, t)    = xi cos(k x - omega t)
//! phi(x, z, t) = (omega / k) xi cosh(k (z + H)) / sinh(k H) sin(k x - omega t)
//! omega^2      = g k tanh(k H)
//! ```
//!
//! It satisfies the Laplace equation in the strip, the no-penetration
//! condition at the bottom, and the linearized kinematic and dynamic
//! free-surface conditions, and carries equal mean kinetic and potential
//! energy `g xi^2 L / 4` per wavelength `L` of surface.

use crate::assembly::{assemble_surface_mass, assemble_volume_mass};
use crate::error::{Result, WaveError};
use crate::mesh::{gauss_legendre, TensorMesh};
use crate::solver::solve_spd;

/// Angular frequency of a linear gravity wave: `sqrt(g k tanh(k H))`.
pub fn dispersion_omega(gravity: f64, wavenumber: f64, depth: f64) -> f64 {
    (gravity * wavenumber * (wavenumber * depth).tanh()).sqrt()
}

/// Phase speed `omega / k = sqrt(g / k tanh(k H))`.
pub fn phase_speed(gravity: f64, wavenumber: f64, depth: f64) -> f64 {
    dispersion_omega(gravity, wavenumber, depth) / wavenumber
}

/// A linear travelling wave on water of finite depth.
#[derive(Debug, Clone, Copy)]
pub struct AiryWave {
    amplitude: f64,
    wavenumber: f64,
    depth: f64,
    gravity: f64,
    omega: f64,
}

impl AiryWave {
    pub fn new(amplitude: f64, wavenumber: f64, depth: f64, gravity: f64) -> Result<Self> {
        for (name, v) in
            [("amplitude", amplitude), ("wavenumber", wavenumber), ("depth", depth), ("gravity", gravity)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WaveError::InvalidParameter(format!(
                    "wave {name} must be positive and finite, got {v}"
                )));
            }
        }
        let omega = dispersion_omega(gravity, wavenumber, depth);
        Ok(Self { amplitude, wavenumber, depth, gravity, omega })
    }

    /// Wave with one full wavelength across a domain of the given length.
    pub fn spanning_domain(length: f64, depth: f64, amplitude: f64, gravity: f64) -> Result<Self> {
        Self::new(amplitude, 2.0 * std::f64::consts::PI / length, depth, gravity)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavenumber
    }

    pub fn phase_speed(&self) -> f64 {
        self.omega / self.wavenumber
    }

    fn phase(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * x - self.omega * t
    }

    /// Vertical structure `cosh(k (z + H)) / sinh(k H)` of the potential.
    fn profile(&self, z: f64) -> f64 {
        (self.wavenumber * (z + self.depth)).cosh() / (self.wavenumber * self.depth).sinh()
    }

    /// Surface elevation.
    pub fn eta(&self, x: f64, t: f64) -> f64 {
        self.amplitude * self.phase(x, t).cos()
    }

    /// Velocity potential.
    pub fn phi(&self, x: f64, z: f64, t: f64) -> f64 {
        self.omega / self.wavenumber * self.amplitude * self.profile(z) * self.phase(x, t).sin()
    }

    /// Time derivative of the potential.
    pub fn phi_t(&self, x: f64, z: f64, t: f64) -> f64 {
        -self.omega * self.omega / self.wavenumber
            * self.amplitude
            * self.profile(z)
            * self.phase(x, t).cos()
    }

    /// Spatial gradient `(phi_x, phi_z)` of the potential.
    pub fn grad_phi(&self, x: f64, z: f64, t: f64) -> (f64, f64) {
        let th = self.phase(x, t);
        let kzh = self.wavenumber * (z + self.depth);
        let denom = (self.wavenumber * self.depth).sinh();
        (
            self.omega * self.amplitude * kzh.cosh() / denom * th.cos(),
            self.omega * self.amplitude * kzh.sinh() / denom * th.sin(),
        )
    }

    /// Exact total energy per wavelength of surface: `g xi^2 L / 2`, split
    /// evenly between kinetic and potential parts at every instant.
    pub fn total_energy(&self) -> f64 {
        0.5 * self.gravity * self.amplitude * self.amplitude * self.wavelength()
    }
}

/// L2 projection of a scalar function onto the volume space. The consistent
/// mass system is solved with conjugate gradients; the load uses `p + 2`
/// Gauss points per direction.
pub fn project_volume<F>(mesh: &TensorMesh, f: F, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    let mass = assemble_volume_mass(mesh)?;
    let qx = gauss_legendre((mesh.basis_x().degree() + 2).min(crate::mesh::MAX_GAUSS_POINTS))?;
    let qz = gauss_legendre((mesh.basis_z().degree() + 2).min(crate::mesh::MAX_GAUSS_POINTS))?;
    let mut rhs = vec![0.0; mesh.n_dofs()];
    for elem in 0..mesh.n_elems() {
        let (ex, ez) = mesh.element_pair(elem);
        let (xa, xb) = mesh.basis_x().element_span(ex);
        let (za, zb) = mesh.basis_z().element_span(ez);
        let (xs, wxs) = qx.mapped_to(xa, xb);
        let (zs, wzs) = qz.mapped_to(za, zb);
        for (x, wx) in xs.iter().zip(&wxs) {
            let bx = mesh.basis_x().eval_in_element(ex, *x);
            for (z, wz) in zs.iter().zip(&wzs) {
                let bz = mesh.basis_z().eval_in_element(ez, *z);
                let w = wx * wz * f(*x, *z);
                for (jx, &gx) in bx.active.iter().enumerate() {
                    for (jz, &gz) in bz.active.iter().enumerate() {
                        rhs[mesh.dof_index(gx, gz)] += w * bx.values[jx] * bz.values[jz];
                    }
                }
            }
        }
    }
    let (coeffs, _) = solve_spd(&mass, &rhs, tol)?;
    Ok(coeffs)
}

/// L2 projection of a scalar function onto the free-surface trace space.
pub fn project_surface<F>(mesh: &TensorMesh, f: F, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    let mass = assemble_surface_mass(mesh)?;
    let basis = mesh.basis_x();
    let rule = gauss_legendre((basis.degree() + 2).min(crate::mesh::MAX_GAUSS_POINTS))?;
    let mut rhs = vec![0.0; basis.dof_count()];
    for e in 0..basis.n_elems() {
        let (a, b) = basis.element_span(e);
        let (xs, ws) = rule.mapped_to(a, b);
        for (x, w) in xs.iter().zip(&ws) {
            let ev = basis.eval_in_element(e, *x);
            let wf = w * f(*x);
            for (j, &g) in ev.active.iter().enumerate() {
                rhs[g] += wf * ev.values[j];
            }
        }
    }
    let (coeffs, _) = solve_spd(&mass, &rhs, tol)?;
    Ok(coeffs)
}

/// Project the wave's initial data at time `t`: the potential over the
/// volume and the elevation over the surface.
pub fn project_initial_condition(
    mesh: &TensorMesh,
    wave: &AiryWave,
    t: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let phi = project_volume(mesh, |x, z| wave.phi(x, z, t), tol)?;
    let eta = project_surface(mesh, |x| wave.eta(x, t), tol)?;
    Ok((phi, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Basis1d, BasisKind};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn default_wave() -> AiryWave {
        AiryWave::new(0.01, TWO_PI, 1.0, 9.81).unwrap()
    }

    #[test]
    fn dispersion_matches_hand_computed_values() {
        // g = 9.81, k = 2*pi, H = 1: tanh(kH) is within 7e-6 of 1.
        assert_relative_eq!(dispersion_omega(9.81, TWO_PI, 1.0), 7.8509, epsilon = 1e-3);
        assert_relative_eq!(phase_speed(9.81, TWO_PI, 1.0), 1.2495, epsilon = 1e-3);
        // Shallow limit: c -> sqrt(g H).
        let shallow = phase_speed(9.81, TWO_PI, 0.001);
        assert_relative_eq!(shallow, (9.81_f64 * 0.001).sqrt(), max_relative = 1e-2);
    }

    #[test]
    fn fields_satisfy_the_linearized_boundary_conditions() {
        let wave = default_wave();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (x, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0));
            // Dynamic condition at the surface: phi_t + g eta = 0.
            assert_relative_eq!(
                wave.phi_t(x, 0.0, t),
                -wave.gravity() * wave.eta(x, t),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            // Kinematic condition: eta_t = phi_z at z = 0.
            let eta_t = wave.amplitude() * wave.omega() * (wave.wavenumber() * x - wave.omega() * t).sin();
            assert_relative_eq!(wave.grad_phi(x, 0.0, t).1, eta_t, epsilon = 1e-12, max_relative = 1e-12);
            // No penetration through the bottom.
            assert_relative_eq!(wave.grad_phi(x, -1.0, t).1, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn potential_is_harmonic() {
        let wave = default_wave();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-4;
        for _ in 0..100 {
            let x = rng.gen_range(0.1..0.9);
            let z = rng.gen_range(-0.9..-0.1);
            let t = rng.gen_range(0.0..1.0);
            let lap = (wave.phi(x + h, z, t) - 2.0 * wave.phi(x, z, t) + wave.phi(x - h, z, t))
                / (h * h)
                + (wave.phi(x, z + h, t) - 2.0 * wave.phi(x, z, t) + wave.phi(x, z - h, t))
                    / (h * h);
            assert!(lap.abs() < 1e-4, "Laplacian {lap} at ({x}, {z})");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let wave = default_wave();
        let h = 1e-6;
        for (x, z, t) in [(0.3, -0.4, 0.0), (0.7, -0.1, 0.5), (0.05, -0.95, 1.3)] {
            let (gx, gz) = wave.grad_phi(x, z, t);
            let fdx = (wave.phi(x + h, z, t) - wave.phi(x - h, z, t)) / (2.0 * h);
            let fdz = (wave.phi(x, z + h, t) - wave.phi(x, z - h, t)) / (2.0 * h);
            assert_relative_eq!(gx, fdx, max_relative = 1e-8);
            assert_relative_eq!(gz, fdz, max_relative = 1e-8);
        }
    }

    #[test]
    fn analytic_energy_split_is_exact() {
        // High-order quadrature of (1/2)|grad phi|^2 over the strip and
        // (g/2) eta^2 over the surface both give g xi^2 L / 4 at any time.
        let wave = default_wave();
        let rule = gauss_legendre(10).unwrap();
        let panels = 8;
        for t in [0.0, 0.123, 0.456] {
            let mut kinetic = 0.0;
            for px in 0..panels {
                for pz in 0..panels {
                    let (xs, wxs) =
                        rule.mapped_to(px as f64 / panels as f64, (px + 1) as f64 / panels as f64);
                    let (zs, wzs) = rule.mapped_to(
                        -1.0 + pz as f64 / panels as f64,
                        -1.0 + (pz + 1) as f64 / panels as f64,
                    );
                    for (x, wx) in xs.iter().zip(&wxs) {
                        for (z, wz) in zs.iter().zip(&wzs) {
                            let (gx, gz) = wave.grad_phi(*x, *z, t);
                            kinetic += 0.5 * wx * wz * (gx * gx + gz * gz);
                        }
                    }
                }
            }
            let mut potential = 0.0;
            for px in 0..panels {
                let (xs, wxs) =
                    rule.mapped_to(px as f64 / panels as f64, (px + 1) as f64 / panels as f64);
                for (x, wx) in xs.iter().zip(&wxs) {
                    let e = wave.eta(*x, t);
                    potential += 0.5 * wave.gravity() * wx * e * e;
                }
            }
            let quarter = 0.25 * wave.gravity() * wave.amplitude() * wave.amplitude();
            assert_relative_eq!(kinetic, quarter, max_relative = 1e-10);
            assert_relative_eq!(potential, quarter, max_relative = 1e-10);
            assert_relative_eq!(kinetic + potential, wave.total_energy(), max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(AiryWave::new(0.0, TWO_PI, 1.0, 9.81).is_err());
        assert!(AiryWave::new(0.01, -1.0, 1.0, 9.81).is_err());
        assert!(AiryWave::new(0.01, TWO_PI, 0.0, 9.81).is_err());
        assert!(AiryWave::new(0.01, TWO_PI, 1.0, f64::NAN).is_err());
    }

    fn unit_mesh(kind: BasisKind, degree: usize, n: usize, periodic_x: bool) -> TensorMesh {
        let bx = Basis1d::new(kind, degree, n, 0.0, 1.0, periodic_x).unwrap();
        let bz = Basis1d::new(kind, degree, n, -1.0, 0.0, false).unwrap();
        TensorMesh::new(bx, bz).unwrap()
    }

    #[test]
    fn projection_reproduces_functions_already_in_the_space() {
        // x (1 - x) has a derivative jump across the periodic seam, so this
        // needs the clamped space.
        let mesh = unit_mesh(BasisKind::BSpline, 2, 4, false);
        // x (1 - x) z is a tensor polynomial of degree (2, 1).
        let coeffs = project_volume(&mesh, |x, z| x * (1.0 - x) * z, 1e-13).unwrap();
        for (x, z) in [(0.21, -0.37), (0.68, -0.92), (0.99, -0.04)] {
            let got = mesh.eval_volume_field(&coeffs, x, z).unwrap();
            assert_relative_eq!(got, x * (1.0 - x) * z, epsilon = 1e-10);
        }
        let surf = project_surface(&mesh, |x| 3.0 - x * (1.0 - x), 1e-13).unwrap();
        for x in [0.0, 0.33, 0.77] {
            let got = mesh.eval_surface_field(&surf, x).unwrap();
            assert_relative_eq!(got, 3.0 - x * (1.0 - x), epsilon = 1e-10);
        }
    }

    #[test]
    fn projected_wave_data_converges_to_the_exact_fields() {
        let wave = default_wave();
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let mesh = unit_mesh(BasisKind::Lagrange, 1, n, true);
            let (phi, eta) = project_initial_condition(&mesh, &wave, 0.0, 1e-13).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..40 {
                let x = i as f64 / 40.0;
                let e = (mesh.eval_surface_field(&eta, x).unwrap() - wave.eta(x, 0.0)).abs();
                let p = (mesh.eval_volume_field(&phi, x, -0.3).unwrap() - wave.phi(x, -0.3, 0.0)).abs();
                worst = worst.max(e.max(p));
            }
            assert!(worst < prev, "projection error should shrink: {worst} vs {prev}");
            prev = worst;
        }
        assert!(prev < 5e-4, "final projection error too large: {prev}");
    }
}
