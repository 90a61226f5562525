//! Sparse operator assembly on tensor-product meshes.
//!
//! All operators are assembled element-by-element with Gauss rules of
//! `degree + 1` points per direction, which integrate every entry exactly on
//! the affine rectangles used here (mass integrands are degree `2p` per
//! direction, stiffness integrands at most `2p`). The results are stored in
//! compressed sparse row form.
//!
//! The operators of the discrete wave problem are
//! * the volume stiffness matrix `(grad N_a, grad N_b)`,
//! * the volume mass matrix `(N_a, N_b)` (used for L2 projections),
//! * the free-surface mass matrix, which reduces to the 1D mass matrix of
//!   the horizontal basis because the clamped vertical basis has a single
//!   unit-valued function at `z = 0`,
//! * the boolean restriction matrix gathering surface DOFs from the volume,
//! * the surface load vector testing the vertical derivative of a discrete
//!   field against the surface basis.

use crate::basis::BasisEval;
use crate::error::{Result, WaveError};
use crate::mesh::{gauss_legendre, TensorMesh};

/// A real matrix in compressed sparse row storage.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed in their
    /// insertion order, so assembly is deterministic.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        // Stable sort keeps duplicate entries in insertion order, so their
        // floating-point sum is reproducible.
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        // Rows without entries inherit the running offset.
        for r in 1..=nrows {
            row_ptr[r] = row_ptr[r].max(row_ptr[r - 1]);
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Stored value at `(r, c)`, or zero if the entry is structurally absent.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Quadratic form `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.entry(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[r][c] = v;
            }
        }
        dense
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.entry(c, r)).abs());
            }
        }
        worst
    }

    /// Stored entries as (row, col, value) triplets in row-major order.
    pub fn coordinate_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push((r, c, v));
            }
        }
        out
    }

    /// Plain-text coordinate export: a header line with the dimensions, then
    /// one `row col value` line per stored entry.
    pub fn write_coordinate<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.coordinate_entries() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Per-element tabulation of one basis direction at its Gauss points.
struct DirectionTable {
    /// `evals[elem][q]` holds active indices, values, derivatives.
    evals: Vec<Vec<BasisEval>>,
    /// `weights[elem][q]` includes the 1D element Jacobian.
    weights: Vec<Vec<f64>>,
}

fn tabulate(basis: &crate::basis::Basis1d, n_points: usize) -> Result<DirectionTable> {
    let rule = gauss_legendre(n_points)?;
    let mut evals = Vec::with_capacity(basis.n_elems());
    let mut weights = Vec::with_capacity(basis.n_elems());
    for e in 0..basis.n_elems() {
        let (a, b) = basis.element_span(e);
        let (pts, wts) = rule.mapped_to(a, b);
        evals.push(pts.iter().map(|&u| basis.eval_in_element(e, u)).collect());
        weights.push(wts);
    }
    Ok(DirectionTable { evals, weights })
}

/// Shared 2D assembly loop: `integrand(a, b)` maps the two active-function
/// tabulations at a quadrature point to the local integrand value.
fn assemble_volume<F>(mesh: &TensorMesh, integrand: F) -> Result<SparseMatrix>
where
    F: Fn(f64, f64, f64, f64, f64, f64, f64, f64) -> f64,
{
    let tx = tabulate(mesh.basis_x(), mesh.basis_x().degree() + 1)?;
    let tz = tabulate(mesh.basis_z(), mesh.basis_z().degree() + 1)?;
    let n = mesh.n_dofs();
    let nloc_x = mesh.basis_x().degree() + 1;
    let nloc_z = mesh.basis_z().degree() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_elems() * nloc_x * nloc_x * nloc_z * nloc_z);
    let mut local = vec![0.0; nloc_x * nloc_z * nloc_x * nloc_z];

    for elem in 0..mesh.n_elems() {
        let (ex, ez) = mesh.element_pair(elem);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (qx, ex_eval) in tx.evals[ex].iter().enumerate() {
            for (qz, ez_eval) in tz.evals[ez].iter().enumerate() {
                let w = tx.weights[ex][qx] * tz.weights[ez][qz];
                for ax in 0..nloc_x {
                    for az in 0..nloc_z {
                        let row_local = az * nloc_x + ax;
                        for bx in 0..nloc_x {
                            for bz in 0..nloc_z {
                                let col_local = bz * nloc_x + bx;
                                local[row_local * nloc_x * nloc_z + col_local] += w
                                    * integrand(
                                        ex_eval.values[ax],
                                        ex_eval.derivatives[ax],
                                        ez_eval.values[az],
                                        ez_eval.derivatives[az],
                                        ex_eval.values[bx],
                                        ex_eval.derivatives[bx],
                                        ez_eval.values[bz],
                                        ez_eval.derivatives[bz],
                                    );
                            }
                        }
                    }
                }
            }
        }
        let ex_active = &tx.evals[ex][0].active;
        let ez_active = &tz.evals[ez][0].active;
        for ax in 0..nloc_x {
            for az in 0..nloc_z {
                let row = mesh.dof_index(ex_active[ax], ez_active[az]);
                let row_local = az * nloc_x + ax;
                for bx in 0..nloc_x {
                    for bz in 0..nloc_z {
                        let col = mesh.dof_index(ex_active[bx], ez_active[bz]);
                        let col_local = bz * nloc_x + bx;
                        triplets.push((row, col, local[row_local * nloc_x * nloc_z + col_local]));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets))
}

/// Volume stiffness matrix `(grad N_a, grad N_b)` over the flow domain.
pub fn assemble_stiffness(mesh: &TensorMesh) -> Result<SparseMatrix> {
    // Products are grouped per test/trial function so the local matrices
    // come out bitwise symmetric.
    assemble_volume(mesh, |nxa, dxa, nza, dza, nxb, dxb, nzb, dzb| {
        (dxa * nza) * (dxb * nzb) + (nxa * dza) * (nxb * dzb)
    })
}

/// Volume mass matrix `(N_a, N_b)`.
pub fn assemble_volume_mass(mesh: &TensorMesh) -> Result<SparseMatrix> {
    assemble_volume(mesh, |nxa, _, nza, _, nxb, _, nzb, _| (nxa * nza) * (nxb * nzb))
}

/// Free-surface mass matrix in surface numbering (`dofs_x` square). Equal to
/// the 1D mass matrix of the horizontal basis.
pub fn assemble_surface_mass(mesh: &TensorMesh) -> Result<SparseMatrix> {
    let basis = mesh.basis_x();
    let table = tabulate(basis, basis.degree() + 1)?;
    let s = basis.dof_count();
    let nloc = basis.degree() + 1;
    let mut triplets = Vec::with_capacity(basis.n_elems() * nloc * nloc);
    let mut local = vec![0.0; nloc * nloc];
    for e in 0..basis.n_elems() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for (q, eval) in table.evals[e].iter().enumerate() {
            let w = table.weights[e][q];
            for a in 0..nloc {
                for b in 0..nloc {
                    // Grouped so the local matrix is bitwise symmetric.
                    local[a * nloc + b] += w * (eval.values[a] * eval.values[b]);
                }
            }
        }
        let active = &table.evals[e][0].active;
        for a in 0..nloc {
            for b in 0..nloc {
                triplets.push((active[a], active[b], local[a * nloc + b]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(s, s, triplets))
}

/// Boolean restriction matrix `R` (surface x volume): `R v` gathers the
/// surface coefficients of a volume vector.
pub fn surface_restriction(mesh: &TensorMesh) -> SparseMatrix {
    let trace = mesh.surface_trace();
    let triplets = trace
        .volume_dofs()
        .iter()
        .enumerate()
        .map(|(k, &dof)| (k, dof, 1.0))
        .collect();
    SparseMatrix::from_triplets(trace.len(), mesh.n_dofs(), triplets)
}

/// Surface load vector `b_a = (N_a, dw/dz|_{z=0})_Gamma` for a discrete
/// volume field `w`. The vertical derivative is evaluated as the one-sided
/// limit from inside the top element row.
pub fn surface_vertical_derivative_load(mesh: &TensorMesh, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != mesh.n_dofs() {
        return Err(WaveError::DimensionMismatch(format!(
            "field has {} entries, mesh has {} DOFs",
            w.len(),
            mesh.n_dofs()
        )));
    }
    let basis_x = mesh.basis_x();
    let table = tabulate(basis_x, basis_x.degree() + 1)?;
    // Vertical derivative factors at z = 0, from the top element.
    let top_elem = mesh.basis_z().n_elems() - 1;
    let dz_top = mesh.basis_z().eval_in_element(top_elem, 0.0);
    let s = basis_x.dof_count();
    let mut out = vec![0.0; s];
    for ex in 0..basis_x.n_elems() {
        for (q, eval) in table.evals[ex].iter().enumerate() {
            let wq = table.weights[ex][q];
            // dw/dz(x_q, 0) = sum_{ix, iz} w[ix, iz] N_ix(x_q) N'_iz(0)
            let mut dwdz = 0.0;
            for (jx, &gx) in eval.active.iter().enumerate() {
                for (jz, &gz) in dz_top.active.iter().enumerate() {
                    dwdz += w[mesh.dof_index(gx, gz)] * eval.values[jx] * dz_top.derivatives[jz];
                }
            }
            for (a, &ga) in eval.active.iter().enumerate() {
                out[ga] += wq * eval.values[a] * dwdz;
            }
        }
    }
    Ok(out)
}
