//! Linear free-surface potential flow in a rectangular tank, discretized
//! with Lagrange finite elements or smooth B-splines.
//!
//! The crate solves the linearized water-wave problem. A velocity potential
//! satisfies the Laplace equation in the strip `[0, L] x [-H, 0]`; on the
//! free surface at `z = 0` the linearized dynamic and kinematic conditions
//! couple it to the surface elevation, and the remaining boundaries are
//! impermeable (the lateral ones usually periodic). Several weak forms of
//! this coupled problem are provided, all advanced in time with the implicit
//! midpoint rule:
//!
//! * a *monolithic* form solving for potential and elevation together, with
//!   a free-surface term symmetrized so that the discrete energy is exact;
//! * a *reduced* form that eliminates the elevation and works with the
//!   potential alone (second order in time);
//! * a *segregated* pair alternating a free-surface step with an interior
//!   Dirichlet solve, where the surface step is forced by a vertical
//!   velocity reconstructed either from the direct gradient of the interior
//!   solution or from a Lagrange-multiplier (weak flux) projection.
//!
//! The [`diagnostics`] module measures energy traces, numerical wave periods
//! and dispersion, and formulation-norm errors against the analytic
//! small-amplitude wave of [`waves::AiryWave`].

pub mod assembly;
pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod formulation;
pub mod mesh;
pub mod solver;
pub mod timestep;
pub mod waves;

pub use error::{Result, WaveError};
