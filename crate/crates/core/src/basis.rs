//! One-dimensional basis families on uniform element partitions.
//!
//! Two families are supported on an interval `[a, b]` split into equal
//! elements: classical C0 Lagrange finite elements with equispaced nodes, and
//! B-splines of maximal smoothness (open/clamped knots, or fully periodic
//! knots whose basis functions wrap around the interval). Degrees 1 through 4
//! are accepted; the experiments in this crate use 1 through 3.
//!
//! Both families share the same evaluation interface: an evaluation returns
//! the list of *active* global functions at a point together with their values
//! and first derivatives with respect to the physical coordinate. Because the
//! knot/node layout lives directly in physical coordinates, no reference-map
//! chain rule is needed here; quadrature maps handle element scaling.

use crate::error::{Result, WaveError};

/// Maximum polynomial degree accepted by [`Basis1d`] constructors.
pub const MAX_DEGREE: usize = 4;

/// A non-decreasing knot sequence together with its polynomial degree.
///
/// For open (clamped) vectors the first and last knots repeat `degree + 1`
/// times. Periodic vectors store a uniform sequence extended by `degree`
/// knots on each side, so every element span can be evaluated with the same
/// span-local recurrence; the wrap to unique functions happens at the level
/// of global indices, not knots.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    values: Vec<f64>,
    degree: usize,
    periodic: bool,
}

impl KnotVector {
    /// Open (clamped) uniform knot vector on `[a, b]` with `n_elems` spans.
    ///
    /// Example: degree 1, two elements on `[0, 1]` gives `[0, 0, 0.5, 1, 1]`.
    pub fn open(degree: usize, n_elems: usize, a: f64, b: f64) -> Result<Self> {
        check_layout(degree, n_elems, a, b)?;
        let h = (b - a) / n_elems as f64;
        let mut values = vec![a; degree + 1];
        for i in 1..n_elems {
            values.push(a + h * i as f64);
        }
        values.extend(std::iter::repeat(b).take(degree + 1));
        Ok(Self { values, degree, periodic: false })
    }

    /// Uniform periodic knot vector on `[a, b]` with `n_elems` spans.
    ///
    /// The stored sequence runs from `a - degree*h` to `b + degree*h`, so the
    /// knots beyond each end are shifted copies of the knots inside the
    /// opposite end. Requires `n_elems >= degree + 1` so that the
    /// `degree + 1` functions active on any element map to distinct global
    /// functions after wrapping.
    pub fn periodic(degree: usize, n_elems: usize, a: f64, b: f64) -> Result<Self> {
        check_layout(degree, n_elems, a, b)?;
        if n_elems < degree + 1 {
            return Err(WaveError::InvalidParameter(format!(
                "periodic degree-{degree} B-spline needs at least {} elements, got {n_elems}",
                degree + 1
            )));
        }
        let h = (b - a) / n_elems as f64;
        let values = (0..=n_elems + 2 * degree)
            .map(|i| a + h * (i as f64 - degree as f64))
            .collect();
        Ok(Self { values, degree, periodic: true })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Number of elements (non-empty spans) covered by this vector.
    pub fn n_elems(&self) -> usize {
        self.values.len() - 2 * self.degree - 1
    }

    /// Index `k` into `values` such that element `e` spans
    /// `[values[k], values[k + 1]]`. Both layouts place it at `e + degree`.
    fn span_index(&self, elem: usize) -> usize {
        elem + self.degree
    }

    /// Values and first derivatives of the `degree + 1` B-spline functions
    /// that are non-zero on element `elem`, evaluated at `u`. The slice is
    /// ordered by ascending function index `k - degree ..= k` with
    /// `k = span_index(elem)`. Evaluating at an element endpoint returns the
    /// one-sided limit from inside that element.
    fn eval_span(&self, elem: usize, u: f64, vals: &mut [f64], ders: &mut [f64]) {
        let p = self.degree;
        let k = self.span_index(elem);
        let t = &self.values;

        // Triangular Cox-de Boor table, keeping the degree p-1 row for the
        // derivative formula.
        let mut left = [0.0_f64; MAX_DEGREE + 1];
        let mut right = [0.0_f64; MAX_DEGREE + 1];
        let mut n = [0.0_f64; MAX_DEGREE + 1];
        let mut n_lower = [0.0_f64; MAX_DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - t[k + 1 - j];
            right[j] = t[k + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let temp = if den != 0.0 { n[r] / den } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
            if j == p - 1 {
                n_lower[..p].copy_from_slice(&n[..p]);
            }
        }
        if p == 1 {
            n_lower[0] = 1.0;
        }

        vals[..=p].copy_from_slice(&n[..=p]);
        for r in 0..=p {
            // Global function index i = k - p + r; N_{i,p-1} = n_lower[r-1],
            // N_{i+1,p-1} = n_lower[r] in the degree p-1 numbering.
            let i = k - p + r;
            let mut d = 0.0;
            if r >= 1 {
                let den = t[i + p] - t[i];
                if den != 0.0 {
                    d += n_lower[r - 1] / den;
                }
            }
            if r <= p - 1 {
                let den = t[i + p + 1] - t[i + 1];
                if den != 0.0 {
                    d -= n_lower[r] / den;
                }
            }
            ders[r] = p as f64 * d;
        }
    }
}

fn check_layout(degree: usize, n_elems: usize, a: f64, b: f64) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(WaveError::InvalidParameter(format!(
            "basis degree must lie in 1..={MAX_DEGREE}, got {degree}"
        )));
    }
    if n_elems == 0 {
        return Err(WaveError::InvalidParameter("need at least one element".into()));
    }
    if !(b - a).is_finite() || b <= a {
        return Err(WaveError::InvalidParameter(format!(
            "degenerate parameter domain [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Which polynomial family a [`Basis1d`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// C0 Lagrange finite elements with equispaced nodes.
    Lagrange,
    /// Maximally smooth B-splines (C^{p-1} across element interfaces).
    BSpline,
}

/// Active functions at one evaluation point: global indices, values, and
/// first derivatives with respect to the physical coordinate. The three
/// vectors share the same length (`degree + 1`) and ordering.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub active: Vec<usize>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

/// A univariate basis on a uniform partition of `[start, end]`.
#[derive(Debug, Clone)]
pub struct Basis1d {
    kind: BasisKind,
    degree: usize,
    n_elems: usize,
    start: f64,
    end: f64,
    periodic: bool,
    knots: Option<KnotVector>,
}

impl Basis1d {
    /// Lagrange finite-element basis. Periodic layouts identify the last node
    /// chain with the first and need `n_elems >= 2`.
    pub fn lagrange(degree: usize, n_elems: usize, a: f64, b: f64, periodic: bool) -> Result<Self> {
        check_layout(degree, n_elems, a, b)?;
        if periodic && n_elems < 2 {
            return Err(WaveError::InvalidParameter(
                "periodic Lagrange basis needs at least 2 elements".into(),
            ));
        }
        Ok(Self { kind: BasisKind::Lagrange, degree, n_elems, start: a, end: b, periodic, knots: None })
    }

    /// B-spline basis of maximal smoothness; open (clamped) or periodic.
    pub fn bspline(degree: usize, n_elems: usize, a: f64, b: f64, periodic: bool) -> Result<Self> {
        let knots = if periodic {
            KnotVector::periodic(degree, n_elems, a, b)?
        } else {
            KnotVector::open(degree, n_elems, a, b)?
        };
        Ok(Self {
            kind: BasisKind::BSpline,
            degree,
            n_elems,
            start: a,
            end: b,
            periodic,
            knots: Some(knots),
        })
    }

    /// Convenience constructor dispatching on [`BasisKind`].
    pub fn new(kind: BasisKind, degree: usize, n_elems: usize, a: f64, b: f64, periodic: bool) -> Result<Self> {
        match kind {
            BasisKind::Lagrange => Self::lagrange(degree, n_elems, a, b, periodic),
            BasisKind::BSpline => Self::bspline(degree, n_elems, a, b, periodic),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_elems(&self) -> usize {
        self.n_elems
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    /// Uniform element width.
    pub fn h(&self) -> f64 {
        (self.end - self.start) / self.n_elems as f64
    }

    /// The knot vector backing a B-spline basis (`None` for Lagrange).
    pub fn knots(&self) -> Option<&KnotVector> {
        self.knots.as_ref()
    }

    /// Number of global degrees of freedom.
    ///
    /// Open B-spline: `n_elems + degree`. Periodic B-spline: `n_elems`.
    /// Open Lagrange: `n_elems * degree + 1`. Periodic Lagrange:
    /// `n_elems * degree`.
    pub fn dof_count(&self) -> usize {
        match (self.kind, self.periodic) {
            (BasisKind::BSpline, false) => self.n_elems + self.degree,
            (BasisKind::BSpline, true) => self.n_elems,
            (BasisKind::Lagrange, false) => self.n_elems * self.degree + 1,
            (BasisKind::Lagrange, true) => self.n_elems * self.degree,
        }
    }

    /// Physical span `[x_e, x_{e+1}]` of element `elem`.
    pub fn element_span(&self, elem: usize) -> (f64, f64) {
        let h = self.h();
        (self.start + h * elem as f64, self.start + h * (elem + 1) as f64)
    }

    /// Element containing `u`, with points on an interior breakpoint assigned
    /// to the right element and `u = end` assigned to the last.
    pub fn element_of(&self, u: f64) -> Result<usize> {
        if !(u >= self.start && u <= self.end) {
            return Err(WaveError::OutsideDomain { point: u, start: self.start, end: self.end });
        }
        let e = ((u - self.start) / self.h()).floor() as usize;
        Ok(e.min(self.n_elems - 1))
    }

    /// Evaluate all active functions at `u`.
    pub fn eval(&self, u: f64) -> Result<BasisEval> {
        let elem = self.element_of(u)?;
        Ok(self.eval_in_element(elem, u))
    }

    /// Evaluate within a given element's polynomial piece. At an element
    /// endpoint this yields the one-sided limit from inside `elem`, which is
    /// what interface-continuity checks and surface traces need.
    pub fn eval_in_element(&self, elem: usize, u: f64) -> BasisEval {
        assert!(elem < self.n_elems, "element index {elem} out of range");
        let p = self.degree;
        let mut out = BasisEval {
            active: vec![0; p + 1],
            values: vec![0.0; p + 1],
            derivatives: vec![0.0; p + 1],
        };
        match self.kind {
            BasisKind::BSpline => {
                let knots = self.knots.as_ref().expect("B-spline basis carries knots");
                knots.eval_span(elem, u, &mut out.values, &mut out.derivatives);
                for (r, a) in out.active.iter_mut().enumerate() {
                    *a = if self.periodic { (elem + r) % self.n_elems } else { elem + r };
                }
            }
            BasisKind::Lagrange => {
                let (x0, _) = self.element_span(elem);
                let h = self.h();
                let node = |i: usize| x0 + h * i as f64 / p as f64;
                for i in 0..=p {
                    let mut val = 1.0;
                    for j in 0..=p {
                        if j != i {
                            val *= (u - node(j)) / (node(i) - node(j));
                        }
                    }
                    let mut der = 0.0;
                    for m in 0..=p {
                        if m == i {
                            continue;
                        }
                        let mut term = 1.0 / (node(i) - node(m));
                        for j in 0..=p {
                            if j != i && j != m {
                                term *= (u - node(j)) / (node(i) - node(j));
                            }
                        }
                        der += term;
                    }
                    out.values[i] = val;
                    out.derivatives[i] = der;
                    let global = elem * p + i;
                    out.active[i] =
                        if self.periodic { global % self.dof_count() } else { global };
                }
            }
        }
        out
    }

    /// One representative abscissa per global function: Greville points
    /// (knot averages) for B-splines, nodal coordinates for Lagrange bases.
    /// Periodic Greville points are wrapped into `[start, end)`; the list is
    /// always in global DOF order.
    pub fn node_points(&self) -> Vec<f64> {
        let p = self.degree;
        match self.kind {
            BasisKind::Lagrange => {
                let step = self.h() / p as f64;
                (0..self.dof_count()).map(|i| self.start + step * i as f64).collect()
            }
            BasisKind::BSpline => {
                let t = self.knots.as_ref().expect("B-spline basis carries knots").values();
                (0..self.dof_count())
                    .map(|i| {
                        let g = t[i + 1..=i + p].iter().sum::<f64>() / p as f64;
                        if self.periodic {
                            let len = self.end - self.start;
                            self.start + (g - self.start).rem_euclid(len)
                        } else {
                            g
                        }
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_bases(a: f64, b: f64) -> Vec<Basis1d> {
        let mut out = Vec::new();
        for degree in 1..=MAX_DEGREE {
            for periodic in [false, true] {
                out.push(Basis1d::lagrange(degree, 6, a, b, periodic).unwrap());
                out.push(Basis1d::bspline(degree, 6, a, b, periodic).unwrap());
            }
        }
        out
    }

    #[test]
    fn open_knot_layout_matches_hand_example() {
        let k = KnotVector::open(1, 2, 0.0, 1.0).unwrap();
        assert_eq!(k.values(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(k.n_elems(), 2);
    }

    #[test]
    fn periodic_knots_are_shifted_copies_across_the_seam() {
        let k = KnotVector::periodic(2, 5, 0.0, 1.0).unwrap();
        let v = k.values();
        let n = 5;
        let len = 1.0;
        for i in 0..2 * k.degree() {
            assert_relative_eq!(v[i] + len, v[i + n], epsilon = 1e-15);
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for basis in all_bases(-0.3, 1.7) {
            for _ in 0..1000 {
                let u = rng.gen_range(-0.3..1.7);
                let e = basis.eval(u).unwrap();
                let sum: f64 = e.values.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "{basis:?} at {u}: sum {sum}");
                let dsum: f64 = e.derivatives.iter().sum();
                let scale = e.derivatives.iter().fold(1.0_f64, |m, d| m.max(d.abs()));
                assert!(dsum.abs() < 1e-11 * scale, "{basis:?} at {u}: deriv sum {dsum}");
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps = 2e-6;
        for basis in all_bases(0.0, 2.0) {
            for _ in 0..200 {
                // Stay away from breakpoints so the stencil sits in one element.
                let e = rng.gen_range(0..basis.n_elems());
                let (x0, x1) = basis.element_span(e);
                let u = rng.gen_range(x0 + 3.0 * eps..x1 - 3.0 * eps);
                let at = |x: f64| basis.eval_in_element(e, x);
                let (lo, mid, hi) = (at(u - eps), at(u), at(u + eps));
                for i in 0..mid.values.len() {
                    let fd = (hi.values[i] - lo.values[i]) / (2.0 * eps);
                    assert!(
                        (fd - mid.derivatives[i]).abs() < 1e-6 * (1.0 + mid.derivatives[i].abs()),
                        "{basis:?}: fd {fd} vs {param}",
                        param = mid.derivatives[i]
                    );
                }
            }
        }
    }

    #[test]
    fn bspline_interface_continuity_matches_smoothness() {
        // Values and first derivatives agree across interior breakpoints for
        // p >= 2 (C^{p-1} >= C^1 smoothness); hats agree in value only.
        for degree in 2..=MAX_DEGREE {
            for periodic in [false, true] {
                let basis = Basis1d::bspline(degree, 6, 0.0, 3.0, periodic).unwrap();
                for e in 1..basis.n_elems() {
                    let (u, _) = basis.element_span(e);
                    let left = basis.eval_in_element(e - 1, u);
                    let right = basis.eval_in_element(e, u);
                    for (j, &g) in right.active.iter().enumerate() {
                        let from_left = left
                            .active
                            .iter()
                            .position(|&gl| gl == g)
                            .map(|i| (left.values[i], left.derivatives[i]))
                            .unwrap_or((0.0, 0.0));
                        assert_relative_eq!(from_left.0, right.values[j], epsilon = 1e-12);
                        assert_relative_eq!(from_left.1, right.derivatives[j], epsilon = 1e-12, max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn degree_one_bspline_equals_degree_one_lagrange() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for periodic in [false, true] {
            let bs = Basis1d::bspline(1, 5, 0.0, 1.0, periodic).unwrap();
            let fe = Basis1d::lagrange(1, 5, 0.0, 1.0, periodic).unwrap();
            assert_eq!(bs.dof_count(), fe.dof_count());
            for _ in 0..300 {
                let u = rng.gen_range(0.0..1.0);
                let (eb, ef) = (bs.eval(u).unwrap(), fe.eval(u).unwrap());
                assert_eq!(eb.active, ef.active);
                for i in 0..2 {
                    assert_relative_eq!(eb.values[i], ef.values[i], epsilon = 1e-13);
                    assert_relative_eq!(eb.derivatives[i], ef.derivatives[i], epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn quadratic_spline_values_at_interior_knot() {
        // Two quadratic elements on [0,1]: at the middle knot the two middle
        // functions each carry value 1/2 and the entering function is zero.
        let basis = Basis1d::bspline(2, 2, 0.0, 1.0, false).unwrap();
        let e = basis.eval(0.5).unwrap();
        assert_eq!(e.active, vec![1, 2, 3]);
        assert_relative_eq!(e.values[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.values[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.values[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lagrange_basis_is_nodal() {
        let basis = Basis1d::lagrange(2, 1, 0.0, 1.0, false).unwrap();
        let e = basis.eval(0.5).unwrap();
        assert_eq!(e.active, vec![0, 1, 2]);
        assert_relative_eq!(e.values[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.values[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn periodic_active_indices_wrap() {
        let basis = Basis1d::bspline(2, 4, 0.0, 1.0, true).unwrap();
        assert_eq!(basis.dof_count(), 4);
        let e = basis.eval(0.9).unwrap();
        assert_eq!(e.active, vec![3, 0, 1]);
        let fe = Basis1d::lagrange(2, 4, 0.0, 1.0, true).unwrap();
        assert_eq!(fe.dof_count(), 8);
        let e = fe.eval(0.9).unwrap();
        assert_eq!(e.active, vec![6, 7, 0]);
    }

    #[test]
    fn greville_points_match_hand_values() {
        let open = Basis1d::bspline(2, 1, 0.0, 1.0, false).unwrap();
        assert_eq!(open.node_points(), vec![0.0, 0.5, 1.0]);

        let per = Basis1d::bspline(1, 4, 0.0, 1.0, true).unwrap();
        let pts = per.node_points();
        for (got, want) in pts.iter().zip([0.0, 0.25, 0.5, 0.75]) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }

        let fe = Basis1d::lagrange(2, 2, 0.0, 1.0, false).unwrap();
        assert_eq!(fe.node_points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn linear_precision_from_node_points() {
        // Coefficients taken from node_points reproduce the identity map;
        // this is the Greville property for splines and nodal exactness for
        // Lagrange elements.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for basis in all_bases(0.0, 1.0) {
            if basis.is_periodic() {
                continue; // the identity is not a periodic function
            }
            let coeffs = basis.node_points();
            for _ in 0..100 {
                let u = rng.gen_range(0.0..1.0);
                let e = basis.eval(u).unwrap();
                let val: f64 =
                    e.active.iter().zip(&e.values).map(|(&a, v)| coeffs[a] * v).sum();
                assert_relative_eq!(val, u, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(Basis1d::bspline(0, 4, 0.0, 1.0, false).is_err());
        assert!(Basis1d::bspline(5, 8, 0.0, 1.0, false).is_err());
        assert!(Basis1d::bspline(2, 2, 0.0, 1.0, true).is_err(), "self-overlapping wrap");
        assert!(Basis1d::lagrange(1, 1, 0.0, 1.0, true).is_err());
        assert!(Basis1d::lagrange(1, 0, 0.0, 1.0, false).is_err());
        assert!(Basis1d::bspline(2, 4, 1.0, 1.0, false).is_err(), "degenerate domain");
        assert!(Basis1d::bspline(2, 4, 1.0, 0.0, false).is_err());
    }

    #[test]
    fn evaluation_outside_domain_is_an_error() {
        let basis = Basis1d::bspline(2, 4, 0.0, 1.0, false).unwrap();
        assert!(matches!(basis.eval(-0.01), Err(WaveError::OutsideDomain { .. })));
        assert!(matches!(basis.eval(1.01), Err(WaveError::OutsideDomain { .. })));
        assert!(basis.eval(0.0).is_ok());
        assert!(basis.eval(1.0).is_ok());
    }
}
