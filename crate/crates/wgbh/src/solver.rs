//! Assembly and solution of the weak Galerkin biharmonic system.
//!
//! The bilinear form pairs the discrete weak second derivatives of trial and
//! test functions and adds the stabilizer
//!
//! ```text
//! s(w, v) = sum_T h_T^-1 <Q_b(grad w_0) - w_g, Q_b(grad v_0) - v_g>_bnd(T)
//!         + sum_T h_T^-3 <Q_b w_0 - w_b, Q_b v_0 - v_b>_bnd(T),
//! ```
//!
//! with `h_T = sqrt(2 |T|)` the element size. There is no tunable stabilization
//! parameter anywhere. Dirichlet and Neumann data enter through edge
//! projections: `u_b = Q_b xi`, and `u_g` is rebuilt per boundary edge from
//! its projected normal and tangential components. Constrained DOFs are
//! removed by symmetric elimination, which keeps the reduced matrix symmetric
//! positive definite. Element-interior unknowns can be condensed away through
//! local Schur complements before the global solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::projection::project_qb;
use crate::sparse::{solve_spd, SolveStats, SymCsc};
use crate::weak_deriv::{local_dof_count, LocalOperatorSet, LocalSpaces, WeakFunction};

/// Problem data for `laplacian^2 u = f` with `u = xi`, `du/dn = nu` on the
/// boundary. When the Dirichlet gradient is absent, the tangential derivative
/// of `xi` is recovered by a five-point stencil along each straight boundary
/// edge (which samples `xi` in a tiny neighborhood of the edge line).
pub struct BiharmonicProblem {
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    /// Neumann datum `nu = du/dn`, evaluated at a boundary point together
    /// with the outward unit normal of its edge.
    pub neumann: NormalField,
    pub dirichlet_gradient: Option<VectorField>,
}

pub type ScalarField = Box<dyn Fn(&Point2<f64>) -> f64>;
pub type VectorField = Box<dyn Fn(&Point2<f64>) -> Vector2<f64>>;
pub type NormalField = Box<dyn Fn(&Point2<f64>, &Vector2<f64>) -> f64>;

impl BiharmonicProblem {
    pub fn new(
        source: impl Fn(&Point2<f64>) -> f64 + 'static,
        dirichlet: impl Fn(&Point2<f64>) -> f64 + 'static,
        neumann: impl Fn(&Point2<f64>, &Vector2<f64>) -> f64 + 'static,
    ) -> Self {
        Self {
            source: Box::new(source),
            dirichlet: Box::new(dirichlet),
            neumann: Box::new(neumann),
            dirichlet_gradient: None,
        }
    }

    pub fn with_dirichlet_gradient(
        mut self,
        grad: impl Fn(&Point2<f64>) -> Vector2<f64> + 'static,
    ) -> Self {
        self.dirichlet_gradient = Some(Box::new(grad));
        self
    }

    /// Homogeneous data; the solution is identically zero.
    pub fn homogeneous() -> Self {
        Self::new(|_| 0.0, |_| 0.0, |_, _| 0.0).with_dirichlet_gradient(|_| Vector2::zeros())
    }
}

/// How the tangential Dirichlet derivative was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentialData {
    Analytic,
    NumericStencil,
}

impl TangentialData {
    pub fn label(self) -> &'static str {
        match self {
            TangentialData::Analytic => "analytic",
            TangentialData::NumericStencil => "numeric-stencil",
        }
    }
}

/// Global DOF numbering: element-interior coefficients first (element-major),
/// then per-edge `(v_b, v_g1, v_g2)` blocks (edge-major). The edge blocks are
/// the skeleton DOFs that survive static condensation.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub n0: usize,
    pub eb: usize,
    pub n_elements: usize,
    pub n_edges: usize,
}

impl DofMap {
    pub fn new(mesh: &PolyMesh, k: usize) -> Self {
        Self {
            k,
            n0: crate::basis::poly_dim(k),
            eb: k - 1,
            n_elements: mesh.elements.len(),
            n_edges: mesh.edges.len(),
        }
    }

    pub fn n_interior(&self) -> usize {
        self.n_elements * self.n0
    }

    pub fn n_skeleton(&self) -> usize {
        self.n_edges * 3 * self.eb
    }

    pub fn n_total(&self) -> usize {
        self.n_interior() + self.n_skeleton()
    }

    pub fn interior_dof(&self, elem: usize, coeff: usize) -> usize {
        elem * self.n0 + coeff
    }

    /// `block`: 0 = trace, 1 = first gradient component, 2 = second.
    pub fn edge_dof(&self, edge: usize, block: usize, coeff: usize) -> usize {
        self.n_interior() + edge * 3 * self.eb + block * self.eb + coeff
    }

    pub fn is_interior(&self, dof: usize) -> bool {
        dof < self.n_interior()
    }

    /// Global indices of one element's local DOFs in canonical order.
    pub fn local_to_global(&self, mesh: &PolyMesh, elem: usize) -> Vec<usize> {
        let el = &mesh.elements[elem];
        let mut out = Vec::with_capacity(local_dof_count(self.k, el.edge_ids.len()));
        for c in 0..self.n0 {
            out.push(self.interior_dof(elem, c));
        }
        for &edge in &el.edge_ids {
            for block in 0..3 {
                for c in 0..self.eb {
                    out.push(self.edge_dof(edge, block, c));
                }
            }
        }
        out
    }

    /// Unpacks a flat solution vector into weak-function blocks.
    pub fn to_weak_function(&self, mesh: &PolyMesh, x: &[f64]) -> WeakFunction {
        let mut u = WeakFunction::zeros(mesh, self.k);
        for elem in 0..self.n_elements {
            for c in 0..self.n0 {
                u.interior_coeffs_mut(elem)[c] = x[self.interior_dof(elem, c)];
            }
        }
        for edge in 0..self.n_edges {
            for c in 0..self.eb {
                u.trace_coeffs_mut(edge)[c] = x[self.edge_dof(edge, 0, c)];
                u.grad_coeffs_mut(edge, 0)[c] = x[self.edge_dof(edge, 1, c)];
                u.grad_coeffs_mut(edge, 1)[c] = x[self.edge_dof(edge, 2, c)];
            }
        }
        u
    }
}

/// One element's contribution: exactly symmetric local matrix over the
/// canonical local DOFs plus the interior load block.
pub struct LocalSystem {
    pub element: usize,
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
}

/// Assembled (unconstrained) global system.
pub struct GlobalSystem {
    pub map: DofMap,
    pub rhs: Vec<f64>,
    pub locals: Vec<LocalSystem>,
}

impl GlobalSystem {
    /// Scatters the element matrices into one sparse symmetric matrix.
    pub fn full_matrix(&self) -> SymCsc {
        let mut triplets = Vec::new();
        for local in &self.locals {
            let n = local.dofs.len();
            for c in 0..n {
                for r in 0..n {
                    let v = local.matrix[(r, c)];
                    if v != 0.0 {
                        triplets.push((local.dofs[r], local.dofs[c], v));
                    }
                }
            }
        }
        SymCsc::from_triplets(self.map.n_total(), triplets)
    }

    /// Energy product `u^T A v` evaluated from the element matrices.
    pub fn energy_product(&self, mesh: &PolyMesh, u: &WeakFunction, v: &WeakFunction) -> f64 {
        self.locals
            .iter()
            .map(|local| {
                let lu = u.local_dofs(mesh, local.element);
                let lv = v.local_dofs(mesh, local.element);
                (&local.matrix * lv).dot(&lu)
            })
            .sum()
    }
}

/// Builds one element's local stiffness matrix and load vector.
fn local_system(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    map: &DofMap,
    elem: usize,
) -> LocalSystem {
    let ctx = &spaces.elements[elem];
    let ops = LocalOperatorSet::build(spaces, elem);
    let n_loc = ops.n_loc;
    let n0 = map.n0;
    let eb = map.eb;
    let mut k_local = DMatrix::zeros(n_loc, n_loc);

    // Weak-derivative energy: sum_ij D_ij^T G D_ij.
    for op in &ops.weak {
        let gd = &ctx.gram_km2 * &op.matrix;
        k_local += op.matrix.transpose() * gd;
    }

    // Stabilizer: h^-1 gradient-trace jumps and h^-3 trace jumps.
    let h_inv = 1.0 / ctx.h;
    let h_inv3 = h_inv * h_inv * h_inv;
    for (pos, coupling) in ops.couplings.iter().enumerate() {
        let ec = &spaces.edges[coupling.edge];
        let col = n0 + pos * 3 * eb;
        // Jump operators map local DOFs to edge coefficients of
        // Q_b(..v_0..) - (edge block).
        let mut jump_b = DMatrix::zeros(eb, n_loc);
        jump_b.view_mut((0, 0), (eb, n0)).copy_from(&coupling.trace_proj);
        let mut jump_g = [DMatrix::zeros(eb, n_loc), DMatrix::zeros(eb, n_loc)];
        for (jump, proj) in jump_g.iter_mut().zip(&coupling.grad_proj) {
            jump.view_mut((0, 0), (eb, n0)).copy_from(proj);
        }
        for m in 0..eb {
            jump_b[(m, col + m)] = -1.0;
            jump_g[0][(m, col + eb + m)] = -1.0;
            jump_g[1][(m, col + 2 * eb + m)] = -1.0;
        }
        let weigh = |jump: &DMatrix<f64>, scale: f64| -> DMatrix<f64> {
            let mut gj = jump.clone();
            for m in 0..eb {
                gj.row_mut(m).scale_mut(scale * ec.gram_diag[m]);
            }
            jump.transpose() * gj
        };
        k_local += weigh(&jump_b, h_inv3);
        k_local += weigh(&jump_g[0], h_inv);
        k_local += weigh(&jump_g[1], h_inv);
    }

    // Exact symmetry, entry by entry.
    let transposed = k_local.transpose();
    k_local += &transposed;
    k_local.scale_mut(0.5);

    LocalSystem {
        element: elem,
        dofs: map.local_to_global(mesh, elem),
        matrix: k_local,
        load: DVector::zeros(n0),
    }
}

/// Assembles the global system for the given problem data: the matrix
/// realizes the weak-derivative energy plus the stabilizer, the load vector
/// is `(f, v_0)`.
pub fn assemble(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    problem: &BiharmonicProblem,
) -> Result<GlobalSystem> {
    let map = DofMap::new(mesh, spaces.k);
    let mut rhs = vec![0.0; map.n_total()];
    let mut locals = Vec::with_capacity(mesh.elements.len());
    for elem in 0..mesh.elements.len() {
        let mut local = local_system(mesh, spaces, &map, elem);
        let ctx = &spaces.elements[elem];
        for (p, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
            let f = (problem.source)(p);
            local.load.axpy(*w * f, &ctx.basis_k.eval_at(p), 1.0);
        }
        for c in 0..map.n0 {
            rhs[map.interior_dof(elem, c)] += local.load[c];
        }
        locals.push(local);
    }
    Ok(GlobalSystem { map, rhs, locals })
}

/// Prescribed values for every boundary-edge DOF.
pub struct BoundaryValues {
    pub values: Vec<(usize, f64)>,
    pub tangential: TangentialData,
}

/// Projects the boundary data onto the edge spaces: `u_b = Q_b xi` and
/// `u_g = (Q_b nu) n + (Q_b(grad xi . tau)) tau`, with `n` and `tau` constant
/// on each straight boundary edge.
pub fn boundary_values(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    map: &DofMap,
    problem: &BiharmonicProblem,
) -> BoundaryValues {
    let mut values = Vec::new();
    let tangential = if problem.dirichlet_gradient.is_some() {
        TangentialData::Analytic
    } else {
        TangentialData::NumericStencil
    };
    for (id, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary {
            continue;
        }
        let ec = &spaces.edges[id];
        let n = edge.normals[0];
        let tau = edge.unit_tangent;
        let trace = project_qb(ec, &*problem.dirichlet);
        let normal_deriv = project_qb(ec, |p| (problem.neumann)(p, &n));
        let tangent_deriv = match &problem.dirichlet_gradient {
            Some(grad) => project_qb(ec, |p| grad(p).dot(&tau)),
            None => {
                // Five-point stencil along the edge direction.
                let step = 1e-3 * edge.length;
                let xi = &problem.dirichlet;
                project_qb(ec, |p| {
                    let at = |t: f64| xi(&(p + tau * (t * step)));
                    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * step)
                })
            }
        };
        for m in 0..map.eb {
            values.push((map.edge_dof(id, 0, m), trace[m]));
            values.push((
                map.edge_dof(id, 1, m),
                n.x * normal_deriv[m] + tau.x * tangent_deriv[m],
            ));
            values.push((
                map.edge_dof(id, 2, m),
                n.y * normal_deriv[m] + tau.y * tangent_deriv[m],
            ));
        }
    }
    BoundaryValues { values, tangential }
}

/// System after symmetric elimination of the constrained DOFs.
pub struct ConstrainedSystem {
    pub matrix: SymCsc,
    pub rhs: Vec<f64>,
    /// Original index of each free DOF.
    pub free_dofs: Vec<usize>,
}

/// Eliminates the boundary-constrained DOFs from a matrix over the full DOF
/// set (or any index range containing them after applying `offset`).
pub fn apply_boundary_conditions(
    matrix: &SymCsc,
    rhs: &[f64],
    boundary: &[(usize, f64)],
    offset: usize,
) -> ConstrainedSystem {
    let shifted: Vec<(usize, f64)> = boundary
        .iter()
        .filter(|(dof, _)| *dof >= offset)
        .map(|&(dof, v)| (dof - offset, v))
        .collect();
    let (reduced, reduced_rhs, free) = matrix.eliminate(rhs, &shifted);
    ConstrainedSystem {
        matrix: reduced,
        rhs: reduced_rhs,
        free_dofs: free,
    }
}

/// Skeleton system produced by static condensation, with the per-element
/// recovery data for the interior unknowns.
pub struct CondensedSystem {
    pub map: DofMap,
    /// Matrix over the skeleton DOFs (global index minus the interior count).
    pub matrix: SymCsc,
    pub rhs: Vec<f64>,
    recovery: Vec<ElementRecovery>,
}

struct ElementRecovery {
    element: usize,
    chol: Cholesky<f64, Dyn>,
    coupling: DMatrix<f64>,
    load: DVector<f64>,
    skeleton_dofs: Vec<usize>,
}

/// Forms the per-element Schur complements onto the skeleton DOFs. The
/// interior blocks are SPD because the full matrix is SPD on the free DOFs;
/// a non-factorizable block is reported with its element id.
pub fn condense(system: &GlobalSystem) -> Result<CondensedSystem> {
    let map = system.map.clone();
    let n_int = map.n_interior();
    let n_skel = map.n_skeleton();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n_skel];
    let mut recovery = Vec::with_capacity(system.locals.len());
    for local in &system.locals {
        let n0 = map.n0;
        let ne = local.dofs.len() - n0;
        let k00 = local.matrix.view((0, 0), (n0, n0)).into_owned();
        let k0e = local.matrix.view((0, n0), (n0, ne)).into_owned();
        let kee = local.matrix.view((n0, n0), (ne, ne)).into_owned();
        let chol = k00
            .cholesky()
            .ok_or(Error::NonInvertibleInterior {
                element: local.element,
            })?;
        let w = chol.solve(&k0e);
        let mut schur = kee - k0e.transpose() * &w;
        let transposed = schur.transpose();
        schur += &transposed;
        schur.scale_mut(0.5);
        let g = -k0e.transpose() * chol.solve(&local.load);
        let skeleton_dofs: Vec<usize> =
            local.dofs[n0..].iter().map(|&d| d - n_int).collect();
        for c in 0..ne {
            for r in 0..ne {
                let v = schur[(r, c)];
                if v != 0.0 {
                    triplets.push((skeleton_dofs[r], skeleton_dofs[c], v));
                }
            }
        }
        for (i, &d) in skeleton_dofs.iter().enumerate() {
            rhs[d] += g[i];
        }
        recovery.push(ElementRecovery {
            element: local.element,
            chol,
            coupling: k0e,
            load: local.load.clone(),
            skeleton_dofs,
        });
    }
    Ok(CondensedSystem {
        map,
        matrix: SymCsc::from_triplets(n_skel, triplets),
        rhs,
        recovery,
    })
}

impl CondensedSystem {
    /// Back-substitutes the interior coefficients of every element given the
    /// full skeleton solution.
    fn recover_interiors(&self, skeleton: &[f64], x: &mut [f64]) {
        let n_int = self.map.n_interior();
        for rec in &self.recovery {
            let xe = DVector::from_iterator(
                rec.skeleton_dofs.len(),
                rec.skeleton_dofs.iter().map(|&d| skeleton[d]),
            );
            let x0 = rec.chol.solve(&(&rec.load - &rec.coupling * xe));
            for (c, &v) in x0.iter().enumerate() {
                x[self.map.interior_dof(rec.element, c)] = v;
            }
        }
        for (d, &v) in skeleton.iter().enumerate() {
            x[n_int + d] = v;
        }
    }
}

/// Which algebraic route the solve takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// Eliminate element interiors locally, solve the skeleton system.
    #[default]
    Condensed,
    /// Solve the full system over all DOFs.
    Full,
}

/// Solution of one biharmonic solve.
pub struct SolveOutcome {
    pub solution: WeakFunction,
    pub stats: SolveStats,
    pub free_dofs: usize,
    pub tangential: TangentialData,
}

/// Assembles, constrains, solves, and unpacks the solution.
pub fn solve_biharmonic(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    problem: &BiharmonicProblem,
    path: SolvePath,
) -> Result<SolveOutcome> {
    let system = assemble(mesh, spaces, problem)?;
    let map = system.map.clone();
    let bv = boundary_values(mesh, spaces, &map, problem);
    let mut x = vec![0.0; map.n_total()];
    for &(dof, value) in &bv.values {
        x[dof] = value;
    }
    let (stats, free_dofs) = match path {
        SolvePath::Full => {
            let full = system.full_matrix();
            let constrained = apply_boundary_conditions(&full, &system.rhs, &bv.values, 0);
            let (xf, stats) = solve_spd(&constrained.matrix, &constrained.rhs)?;
            for (free_idx, &dof) in constrained.free_dofs.iter().enumerate() {
                x[dof] = xf[free_idx];
            }
            (stats, constrained.free_dofs.len())
        }
        SolvePath::Condensed => {
            let condensed = condense(&system)?;
            let n_int = map.n_interior();
            let constrained =
                apply_boundary_conditions(&condensed.matrix, &condensed.rhs, &bv.values, n_int);
            let (xf, stats) = solve_spd(&constrained.matrix, &constrained.rhs)?;
            let mut skeleton = vec![0.0; map.n_skeleton()];
            for &(dof, value) in &bv.values {
                skeleton[dof - n_int] = value;
            }
            for (free_idx, &dof) in constrained.free_dofs.iter().enumerate() {
                skeleton[dof] = xf[free_idx];
            }
            condensed.recover_interiors(&skeleton, &mut x);
            (stats, constrained.free_dofs.len())
        }
    };
    Ok(SolveOutcome {
        solution: map.to_weak_function(mesh, &x),
        stats,
        free_dofs,
        tangential: bv.tangential,
    })
}
