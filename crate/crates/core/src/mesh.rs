//! Tensor-product meshes of the rectangular flow domain and Gauss quadrature.
//!
//! The computational domain is the rectangle `[0, L] x [-H, 0]`: `x` runs
//! along the free surface (optionally periodic), `z` points upward with the
//! free surface at `z = 0` and the flat bottom at `z = -H`. A mesh is the
//! tensor product of two [`Basis1d`] factors; every element is an axis-aligned
//! rectangle of size `hx x hz`, so element maps are affine with a constant
//! Jacobian determinant `hx * hz / 4` from the `[-1, 1]^2` reference square.
//!
//! Global DOF numbering is x-fastest: `dof = iz * dofs_x + ix`. Because the
//! vertical basis is clamped, exactly one vertical function is non-zero at
//! `z = 0`, so the discrete free-surface trace is spanned by the top row of
//! DOFs and is naturally identified with the horizontal basis.

use crate::basis::Basis1d;
use crate::error::{Result, WaveError};

/// Largest supported point count for [`gauss_legendre`].
pub const MAX_GAUSS_POINTS: usize = 10;

/// A quadrature rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights mapped affinely to `[a, b]`.
    pub fn mapped_to(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        (
            self.points.iter().map(|&x| mid + half * x).collect(),
            self.weights.iter().map(|&w| w * half).collect(),
        )
    }
}

/// Legendre polynomial value and derivative at `x` via the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule with `n` points (1..=10), exact for polynomials of
/// degree `2n - 1`. Nodes are found by Newton iteration from the Chebyshev
/// initial guess and are accurate to machine precision.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(WaveError::InvalidParameter(format!(
            "Gauss-Legendre point count must lie in 1..={MAX_GAUSS_POINTS}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(QuadratureRule { points: vec![0.0], weights: vec![2.0] });
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        // Store in ascending order (the Chebyshev guess walks right to left).
        points[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Symmetrize: the rule is invariant under x -> -x, so average mirrored
    // nodes to remove the last bit of Newton noise.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (points[j] - points[i]);
        points[i] = -x;
        points[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    Ok(QuadratureRule { points, weights })
}

/// Geometry of one rectangular element: the affine map from the reference
/// square `[-1, 1]^2` and its constant Jacobian determinant.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub x0: f64,
    pub z0: f64,
    pub hx: f64,
    pub hz: f64,
}

impl ElementGeometry {
    /// Physical coordinates of a reference point `(xi, eta)`.
    pub fn map(&self, xi: f64, eta: f64) -> (f64, f64) {
        (self.x0 + 0.5 * (xi + 1.0) * self.hx, self.z0 + 0.5 * (eta + 1.0) * self.hz)
    }

    /// Constant Jacobian determinant of the reference map.
    pub fn jacobian(&self) -> f64 {
        0.25 * self.hx * self.hz
    }
}

/// Tensor-product mesh of `[0, L] x [-H, 0]`.
#[derive(Debug, Clone)]
pub struct TensorMesh {
    basis_x: Basis1d,
    basis_z: Basis1d,
}

impl TensorMesh {
    /// Build a mesh from its two univariate factors. The horizontal factor
    /// must start at `x = 0`; the vertical factor must be clamped
    /// (non-periodic) and end at `z = 0` so the free surface sits at the top.
    pub fn new(basis_x: Basis1d, basis_z: Basis1d) -> Result<Self> {
        let (x0, _) = basis_x.domain();
        let (z0, z1) = basis_z.domain();
        if x0 != 0.0 {
            return Err(WaveError::InvalidParameter(format!(
                "horizontal domain must start at x = 0, got {x0}"
            )));
        }
        if z1 != 0.0 || z0 >= 0.0 {
            return Err(WaveError::InvalidParameter(format!(
                "vertical domain must be [-H, 0] with H > 0, got [{z0}, {z1}]"
            )));
        }
        if basis_z.is_periodic() {
            return Err(WaveError::InvalidParameter(
                "vertical basis must be clamped; only x may be periodic".into(),
            ));
        }
        Ok(Self { basis_x, basis_z })
    }

    pub fn basis_x(&self) -> &Basis1d {
        &self.basis_x
    }

    pub fn basis_z(&self) -> &Basis1d {
        &self.basis_z
    }

    /// Domain length `L`.
    pub fn length(&self) -> f64 {
        self.basis_x.domain().1
    }

    /// Water depth `H` (positive).
    pub fn depth(&self) -> f64 {
        -self.basis_z.domain().0
    }

    pub fn is_periodic_x(&self) -> bool {
        self.basis_x.is_periodic()
    }

    pub fn nx(&self) -> usize {
        self.basis_x.n_elems()
    }

    pub fn nz(&self) -> usize {
        self.basis_z.n_elems()
    }

    pub fn n_elems(&self) -> usize {
        self.nx() * self.nz()
    }

    pub fn dofs_x(&self) -> usize {
        self.basis_x.dof_count()
    }

    pub fn dofs_z(&self) -> usize {
        self.basis_z.dof_count()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs_x() * self.dofs_z()
    }

    /// Global DOF index of the tensor function `(ix, iz)`; x runs fastest.
    pub fn dof_index(&self, ix: usize, iz: usize) -> usize {
        debug_assert!(ix < self.dofs_x() && iz < self.dofs_z());
        iz * self.dofs_x() + ix
    }

    /// Split an element index into its `(ex, ez)` pair; x runs fastest.
    pub fn element_pair(&self, elem: usize) -> (usize, usize) {
        debug_assert!(elem < self.n_elems());
        (elem % self.nx(), elem / self.nx())
    }

    pub fn element_geometry(&self, elem: usize) -> ElementGeometry {
        let (ex, ez) = self.element_pair(elem);
        let (x0, _) = self.basis_x.element_span(ex);
        let (z0, _) = self.basis_z.element_span(ez);
        ElementGeometry { x0, z0, hx: self.basis_x.h(), hz: self.basis_z.h() }
    }

    /// The free-surface trace: volume DOFs of the top control row, ordered by
    /// increasing horizontal DOF index (i.e. increasing x).
    pub fn surface_trace(&self) -> TraceSpace {
        let top = self.dofs_z() - 1;
        TraceSpace {
            volume_dofs: (0..self.dofs_x()).map(|ix| self.dof_index(ix, top)).collect(),
        }
    }

    /// Point value of a discrete volume field at `(x, z)`.
    pub fn eval_volume_field(&self, coeffs: &[f64], x: f64, z: f64) -> Result<f64> {
        let ex = self.basis_x.eval(x)?;
        let ez = self.basis_z.eval(z)?;
        let mut acc = 0.0;
        for (jx, &gx) in ex.active.iter().enumerate() {
            for (jz, &gz) in ez.active.iter().enumerate() {
                acc += coeffs[self.dof_index(gx, gz)] * ex.values[jx] * ez.values[jz];
            }
        }
        Ok(acc)
    }

    /// Gradient `(d/dx, d/dz)` of a discrete volume field at `(x, z)`.
    pub fn eval_volume_gradient(&self, coeffs: &[f64], x: f64, z: f64) -> Result<(f64, f64)> {
        let ex = self.basis_x.eval(x)?;
        let ez = self.basis_z.eval(z)?;
        let (mut dx, mut dz) = (0.0, 0.0);
        for (jx, &gx) in ex.active.iter().enumerate() {
            for (jz, &gz) in ez.active.iter().enumerate() {
                let c = coeffs[self.dof_index(gx, gz)];
                dx += c * ex.derivatives[jx] * ez.values[jz];
                dz += c * ex.values[jx] * ez.derivatives[jz];
            }
        }
        Ok((dx, dz))
    }

    /// Point value of a surface field (coefficients in surface numbering).
    pub fn eval_surface_field(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        let ex = self.basis_x.eval(x)?;
        Ok(ex.active.iter().zip(&ex.values).map(|(&g, v)| coeffs[g] * v).sum())
    }
}

/// Identification of free-surface DOFs inside the volume numbering.
///
/// Surface DOF `k` corresponds to the horizontal basis function `k` and to
/// the volume DOF `volume_dofs[k]`. Restriction of a volume vector to the
/// surface is therefore a gather, and the surface mass matrix is the 1D mass
/// matrix of the horizontal basis.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    volume_dofs: Vec<usize>,
}

impl TraceSpace {
    pub fn len(&self) -> usize {
        self.volume_dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume_dofs.is_empty()
    }

    pub fn volume_dofs(&self) -> &[usize] {
        &self.volume_dofs
    }

    /// Gather the surface coefficients out of a volume vector.
    pub fn restrict(&self, volume: &[f64]) -> Vec<f64> {
        self.volume_dofs.iter().map(|&i| volume[i]).collect()
    }

    /// Scatter-add surface coefficients into a volume vector.
    pub fn scatter_add(&self, surface: &[f64], volume: &mut [f64]) {
        for (&dof, &v) in self.volume_dofs.iter().zip(surface) {
            volume[dof] += v;
        }
    }
}
