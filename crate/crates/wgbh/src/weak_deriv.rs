//! Weak functions and their discrete weak second-order partial derivatives.
//!
//! A weak function carries three blocks of coefficients: a degree-k polynomial
//! `v_0` inside each element, a degree-(k-2) trace polynomial `v_b` on each
//! edge, and a degree-(k-2) gradient trace `v_g` (two components) on each
//! edge. Edge blocks are single-valued: both neighbor elements read the same
//! coefficients, parameterized along the edge's canonical low-to-high
//! direction.
//!
//! The discrete weak derivative `d2w[i][j] v` of a weak function on an element
//! `T` is the polynomial in `P_{k-2}(T)` whose moments against every test
//! polynomial `phi` in `P_{k-2}(T)` equal
//!
//! ```text
//! (v_0, d2_{ji} phi)_T - <v_b n_i, d_j phi>_bnd(T) + <v_gi, phi n_j>_bnd(T),
//! ```
//!
//! where `n` is the outward normal of `T`. Note the operator is *not*
//! symmetric in `(i, j)` for general weak functions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Vector2};

use crate::basis::{poly_dim, EdgeBasis, ElementBasis};
use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::quadrature::{edge_rule, element_rule, QuadRule1d, QuadRule2d};

/// Element quadrature degree: covers every bilinear-form integrand and leaves
/// only smooth-data terms with (negligible) quadrature error.
pub fn element_rule_degree(k: usize) -> usize {
    (2 * k).max(k + 4)
}

/// Edge quadrature degree.
pub fn edge_rule_degree(k: usize) -> usize {
    2 * k
}

/// Number of local degrees of freedom of one element: the interior block plus
/// `(v_b, v_g1, v_g2)` sub-blocks for each edge.
pub fn local_dof_count(k: usize, n_edges: usize) -> usize {
    poly_dim(k) + 3 * (k - 1) * n_edges
}

/// Per-element bases, quadrature, and Gram factorizations.
pub struct ElementContext {
    pub element: usize,
    /// Element size `h_T = sqrt(2 |T|)` used by the stabilizer weights (the
    /// diagonal for squares, the leg for the right triangles of the uniform
    /// partitions; reproduces the reference convergence tables).
    pub h: f64,
    pub basis_k: ElementBasis,
    pub basis_km2: ElementBasis,
    pub rule: QuadRule2d,
    pub gram_k: DMatrix<f64>,
    pub chol_k: Cholesky<f64, Dyn>,
    pub gram_km2: DMatrix<f64>,
    pub chol_km2: Cholesky<f64, Dyn>,
    /// Edges in the element's counterclockwise order, with this element's
    /// outward normal.
    pub edges: Vec<ElementEdge>,
}

pub struct ElementEdge {
    pub edge: usize,
    pub normal: Vector2<f64>,
}

/// Per-edge basis, rule, and (diagonal) Gram.
pub struct EdgeContext {
    pub edge: usize,
    pub basis: EdgeBasis,
    pub rule: QuadRule1d,
    pub gram_diag: Vec<f64>,
}

/// All local spaces of a mesh at degree k.
pub struct LocalSpaces {
    pub k: usize,
    pub elements: Vec<ElementContext>,
    pub edges: Vec<EdgeContext>,
}

impl LocalSpaces {
    pub fn build(mesh: &PolyMesh, k: usize) -> Result<Self> {
        Self::build_with_degrees(mesh, k, element_rule_degree(k), edge_rule_degree(k))
    }

    /// Same as [`build`](Self::build) with explicit quadrature degrees, for
    /// callers that need integrals of data fields beyond the form degrees.
    pub fn build_with_degrees(
        mesh: &PolyMesh,
        k: usize,
        elem_degree: usize,
        edge_degree: usize,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!(
                "weak Galerkin biharmonic elements need k >= 2, got {k}"
            )));
        }
        let edges = mesh
            .edges
            .iter()
            .enumerate()
            .map(|(id, edge)| {
                let (a, b) = mesh.edge_endpoints(id);
                let basis = EdgeBasis::new(k - 2);
                let rule = edge_rule(&a, &b, edge_degree)?;
                let gram_diag = basis.gram_diag(edge.length);
                Ok(EdgeContext {
                    edge: id,
                    basis,
                    rule,
                    gram_diag,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let elements = (0..mesh.elements.len())
            .map(|id| {
                let elem = &mesh.elements[id];
                let polygon = mesh.element_polygon(id);
                let rule = element_rule(&polygon, elem_degree)?;
                let basis_k = ElementBasis::new(k, elem.centroid, elem.diameter);
                let basis_km2 = ElementBasis::new(k - 2, elem.centroid, elem.diameter);
                let gram_k = gram_matrix(&basis_k, &rule);
                let gram_km2 = gram_matrix(&basis_km2, &rule);
                let chol_k = gram_k
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularGram { element: id })?;
                let chol_km2 = gram_km2
                    .clone()
                    .cholesky()
                    .ok_or(Error::SingularGram { element: id })?;
                let edges = elem
                    .edge_ids
                    .iter()
                    .map(|&eid| ElementEdge {
                        edge: eid,
                        normal: mesh.edges[eid].outward_normal(id),
                    })
                    .collect();
                Ok(ElementContext {
                    element: id,
                    h: (2.0 * elem.area).sqrt(),
                    basis_k,
                    basis_km2,
                    rule,
                    gram_k,
                    chol_k,
                    gram_km2,
                    chol_km2,
                    edges,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self { k, elements, edges })
    }

    pub fn local_dof_count(&self, mesh: &PolyMesh, elem: usize) -> usize {
        local_dof_count(self.k, mesh.elements[elem].edge_ids.len())
    }
}

fn gram_matrix(basis: &ElementBasis, rule: &QuadRule2d) -> DMatrix<f64> {
    let n = basis.dim();
    let mut gram = DMatrix::zeros(n, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = basis.eval_at(p);
        gram.ger(*w, &v, &v, 1.0);
    }
    gram
}

/// Coefficient blocks of a weak finite element function over a mesh.
#[derive(Debug, Clone)]
pub struct WeakFunction {
    pub k: usize,
    n0: usize,
    eb: usize,
    /// `n_elements * n0` interior coefficients, element-major.
    pub interior: Vec<f64>,
    /// `n_edges * eb` trace coefficients.
    pub edge_trace: Vec<f64>,
    /// `n_edges * 2 * eb` gradient-trace coefficients, per edge the first
    /// component block followed by the second.
    pub edge_grad: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(mesh: &PolyMesh, k: usize) -> Self {
        assert!(k >= 2);
        let n0 = poly_dim(k);
        let eb = k - 1;
        Self {
            k,
            n0,
            eb,
            interior: vec![0.0; mesh.elements.len() * n0],
            edge_trace: vec![0.0; mesh.edges.len() * eb],
            edge_grad: vec![0.0; mesh.edges.len() * 2 * eb],
        }
    }

    pub fn interior_dim(&self) -> usize {
        self.n0
    }

    /// Scalar coefficients per edge block.
    pub fn edge_dim(&self) -> usize {
        self.eb
    }

    pub fn interior_coeffs(&self, elem: usize) -> &[f64] {
        &self.interior[elem * self.n0..(elem + 1) * self.n0]
    }

    pub fn interior_coeffs_mut(&mut self, elem: usize) -> &mut [f64] {
        &mut self.interior[elem * self.n0..(elem + 1) * self.n0]
    }

    pub fn trace_coeffs(&self, edge: usize) -> &[f64] {
        &self.edge_trace[edge * self.eb..(edge + 1) * self.eb]
    }

    pub fn trace_coeffs_mut(&mut self, edge: usize) -> &mut [f64] {
        &mut self.edge_trace[edge * self.eb..(edge + 1) * self.eb]
    }

    /// Gradient-trace coefficients of component `comp` (0 = x, 1 = y).
    pub fn grad_coeffs(&self, edge: usize, comp: usize) -> &[f64] {
        let base = edge * 2 * self.eb + comp * self.eb;
        &self.edge_grad[base..base + self.eb]
    }

    pub fn grad_coeffs_mut(&mut self, edge: usize, comp: usize) -> &mut [f64] {
        let base = edge * 2 * self.eb + comp * self.eb;
        &mut self.edge_grad[base..base + self.eb]
    }

    /// Gathers this function's coefficients for one element in the canonical
    /// local order: interior block, then `(v_b, v_g1, v_g2)` per edge.
    pub fn local_dofs(&self, mesh: &PolyMesh, elem: usize) -> DVector<f64> {
        let el = &mesh.elements[elem];
        let mut out = Vec::with_capacity(local_dof_count(self.k, el.edge_ids.len()));
        out.extend_from_slice(self.interior_coeffs(elem));
        for &edge in &el.edge_ids {
            out.extend_from_slice(self.trace_coeffs(edge));
            out.extend_from_slice(self.grad_coeffs(edge, 0));
            out.extend_from_slice(self.grad_coeffs(edge, 1));
        }
        DVector::from_vec(out)
    }

    /// Zeroes the trace and gradient-trace blocks on boundary edges, mapping
    /// the function into the homogeneous subspace.
    pub fn zero_boundary(&mut self, mesh: &PolyMesh) {
        for (id, edge) in mesh.edges.iter().enumerate() {
            if edge.is_boundary {
                self.trace_coeffs_mut(id).fill(0.0);
                self.grad_coeffs_mut(id, 0).fill(0.0);
                self.grad_coeffs_mut(id, 1).fill(0.0);
            }
        }
    }

    /// True when all boundary-edge blocks vanish.
    pub fn in_homogeneous_space(&self, mesh: &PolyMesh) -> bool {
        mesh.edges.iter().enumerate().all(|(id, edge)| {
            !edge.is_boundary
                || (self.trace_coeffs(id).iter().all(|&c| c == 0.0)
                    && self.grad_coeffs(id, 0).iter().all(|&c| c == 0.0)
                    && self.grad_coeffs(id, 1).iter().all(|&c| c == 0.0))
        })
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.k, other.k);
        for (a, b) in self.interior.iter_mut().zip(&other.interior) {
            *a += alpha * b;
        }
        for (a, b) in self.edge_trace.iter_mut().zip(&other.edge_trace) {
            *a += alpha * b;
        }
        for (a, b) in self.edge_grad.iter_mut().zip(&other.edge_grad) {
            *a += alpha * b;
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.interior.iter_mut().for_each(|a| *a *= alpha);
        self.edge_trace.iter_mut().for_each(|a| *a *= alpha);
        self.edge_grad.iter_mut().for_each(|a| *a *= alpha);
    }
}

/// Dense realization of one discrete weak derivative on one element, mapping
/// the element's local DOF vector to `P_{k-2}(T)` coefficients.
pub struct LocalWeakDerivOp {
    pub element: usize,
    pub i: usize,
    pub j: usize,
    pub matrix: DMatrix<f64>,
}

/// Builds the operator for the pair `(i, j)` with `i, j` in `{0, 1}`.
pub fn build_weak_deriv(
    spaces: &LocalSpaces,
    elem: usize,
    i: usize,
    j: usize,
) -> LocalWeakDerivOp {
    assert!(i < 2 && j < 2);
    let ctx = &spaces.elements[elem];
    let k = spaces.k;
    let eb = k - 1;
    let m = ctx.basis_km2.dim();
    let n0 = ctx.basis_k.dim();
    let n_loc = local_dof_count(k, ctx.edges.len());
    let mut moments = DMatrix::zeros(m, n_loc);

    // (v_0, d2_{ji} phi)_T
    for (p, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
        let psi = ctx.basis_k.eval_at(p);
        let d2phi = ctx.basis_km2.second_at(p, j, i);
        moments.view_mut((0, 0), (m, n0)).ger(*w, &d2phi, &psi, 1.0);
    }

    let mut col = n0;
    for elem_edge in &ctx.edges {
        let ec = &spaces.edges[elem_edge.edge];
        let n = elem_edge.normal;
        for ((s, p), w) in ec
            .rule
            .params
            .iter()
            .zip(&ec.rule.points)
            .zip(&ec.rule.weights)
        {
            let chi = ec.basis.eval_at(*s);
            let phi = ctx.basis_km2.eval_at(p);
            let dphi_j = ctx.basis_km2.grad_at(p, j);
            // -<v_b n_i, d_j phi>
            moments
                .view_mut((0, col), (m, eb))
                .ger(-w * n[i], &dphi_j, &chi, 1.0);
            // +<v_gi, phi n_j>
            moments
                .view_mut((0, col + eb + i * eb), (m, eb))
                .ger(w * n[j], &phi, &chi, 1.0);
        }
        col += 3 * eb;
    }

    let matrix = ctx.chol_km2.solve(&moments);
    LocalWeakDerivOp {
        element: elem,
        i,
        j,
        matrix,
    }
}

/// Applies a weak-derivative operator to a local DOF vector.
pub fn apply_weak_deriv(op: &LocalWeakDerivOp, dofs: &DVector<f64>) -> Result<DVector<f64>> {
    if dofs.len() != op.matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: op.matrix.ncols(),
            got: dofs.len(),
        });
    }
    Ok(&op.matrix * dofs)
}

/// Residual of the integration-by-parts identity
///
/// ```text
/// (d2w v, phi)_T = (d2_{ij} v_0, phi)_T + <v_0 - v_b, d_j phi n_i>_bnd(T)
///                  - <d_i v_0 - v_gi, phi n_j>_bnd(T)
/// ```
///
/// over all test functions `phi` in `P_{k-2}(T)`, with both sides evaluated
/// through independent quadrature paths. Exact arithmetic makes this zero
/// for any local DOF vector.
pub fn check_identity_a001(
    spaces: &LocalSpaces,
    elem: usize,
    dofs: &DVector<f64>,
    i: usize,
    j: usize,
) -> f64 {
    let ctx = &spaces.elements[elem];
    let k = spaces.k;
    let eb = k - 1;
    let m = ctx.basis_km2.dim();
    let n0 = ctx.basis_k.dim();

    let op = build_weak_deriv(spaces, elem, i, j);
    let coeffs = apply_weak_deriv(&op, dofs).expect("matching local dimensions");
    let lhs = &ctx.gram_km2 * coeffs;

    let v0 = dofs.rows(0, n0).into_owned();
    let mut rhs = DVector::zeros(m);
    for (p, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
        let d2v0 = ctx.basis_k.second_at(p, i, j).dot(&v0);
        let phi = ctx.basis_km2.eval_at(p);
        rhs.axpy(*w * d2v0, &phi, 1.0);
    }
    let mut col = n0;
    for elem_edge in &ctx.edges {
        let ec = &spaces.edges[elem_edge.edge];
        let n = elem_edge.normal;
        let vb = dofs.rows(col, eb);
        let vgi = dofs.rows(col + eb + i * eb, eb);
        for ((s, p), w) in ec
            .rule
            .params
            .iter()
            .zip(&ec.rule.points)
            .zip(&ec.rule.weights)
        {
            let chi = ec.basis.eval_at(*s);
            let phi = ctx.basis_km2.eval_at(p);
            let dphi_j = ctx.basis_km2.grad_at(p, j);
            let v0_val = ctx.basis_k.eval_at(p).dot(&v0);
            let div0_val = ctx.basis_k.grad_at(p, i).dot(&v0);
            let vb_val = chi.dot(&vb);
            let vgi_val = chi.dot(&vgi);
            rhs.axpy(*w * (v0_val - vb_val) * n[i], &dphi_j, 1.0);
            rhs.axpy(-*w * (div0_val - vgi_val) * n[j], &phi, 1.0);
        }
        col += 3 * eb;
    }
    (lhs - rhs).amax()
}

/// Per-element operator bundle: the four weak derivatives plus the edge
/// couplings used by the stabilizer (projections of the interior trace and
/// gradient trace onto the edge spaces).
pub struct LocalOperatorSet {
    pub element: usize,
    pub n_loc: usize,
    /// Weak derivative operators indexed by `2 * i + j`.
    pub weak: Vec<LocalWeakDerivOp>,
    pub couplings: Vec<EdgeCoupling>,
}

/// `Q_b`-projection matrices of one element onto one of its edges.
pub struct EdgeCoupling {
    pub edge: usize,
    /// `Q_b(v_0|_e)` as a map from interior coefficients: `eb x n0`.
    pub trace_proj: DMatrix<f64>,
    /// `Q_b(d_c v_0|_e)` for components c = 0, 1.
    pub grad_proj: [DMatrix<f64>; 2],
}

impl LocalOperatorSet {
    pub fn build(spaces: &LocalSpaces, elem: usize) -> Self {
        let ctx = &spaces.elements[elem];
        let eb = spaces.k - 1;
        let n0 = ctx.basis_k.dim();
        let weak = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| build_weak_deriv(spaces, elem, i, j))
            .collect();
        let couplings = ctx
            .edges
            .iter()
            .map(|elem_edge| {
                let ec = &spaces.edges[elem_edge.edge];
                let mut trace = DMatrix::zeros(eb, n0);
                let mut grad = [DMatrix::zeros(eb, n0), DMatrix::zeros(eb, n0)];
                for ((s, p), w) in ec
                    .rule
                    .params
                    .iter()
                    .zip(&ec.rule.points)
                    .zip(&ec.rule.weights)
                {
                    let chi = ec.basis.eval_at(*s);
                    let psi = ctx.basis_k.eval_at(p);
                    trace.ger(*w, &chi, &psi, 1.0);
                    for (c, g) in grad.iter_mut().enumerate() {
                        let dpsi = ctx.basis_k.grad_at(p, c);
                        g.ger(*w, &chi, &dpsi, 1.0);
                    }
                }
                for row in 0..eb {
                    let inv = 1.0 / ec.gram_diag[row];
                    trace.row_mut(row).scale_mut(inv);
                    grad[0].row_mut(row).scale_mut(inv);
                    grad[1].row_mut(row).scale_mut(inv);
                }
                EdgeCoupling {
                    edge: elem_edge.edge,
                    trace_proj: trace,
                    grad_proj: grad,
                }
            })
            .collect();
        Self {
            element: elem,
            n_loc: local_dof_count(spaces.k, ctx.edges.len()),
            weak,
            couplings,
        }
    }
}
