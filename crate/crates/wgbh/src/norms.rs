//! Error measures between a weak solution and the projected exact solution.
//!
//! Four quantities per mesh: the discrete H^2 triple-bar norm built from the
//! weak second derivatives plus the stabilizer terms, the element-based L^2
//! norm of the interior block, and edge-based max norms of the trace and
//! gradient-trace blocks.

use nalgebra::DVector;

use crate::mesh::PolyMesh;
use crate::weak_deriv::{
    apply_weak_deriv, LocalOperatorSet, LocalSpaces, WeakFunction,
};

/// The four error measures of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorQuadruple {
    /// Reported mesh size.
    pub h: f64,
    /// `|| v_0 ||` over the elements.
    pub l2: f64,
    /// Triple-bar norm `||| v |||`.
    pub h2: f64,
    /// `max_e || v_b ||_inf`.
    pub ub_inf: f64,
    /// `max_e || v_g ||_inf` over both components.
    pub ug_inf: f64,
}

/// `||| v |||`: square root of the weak-derivative energy plus the stabilizer
/// terms, accumulated element by element with exact-degree quadrature.
pub fn triple_bar_norm(mesh: &PolyMesh, spaces: &LocalSpaces, v: &WeakFunction) -> f64 {
    let eb = spaces.k - 1;
    let mut total = 0.0;
    for ctx in &spaces.elements {
        let elem = ctx.element;
        let ops = LocalOperatorSet::build(spaces, elem);
        let dofs = v.local_dofs(mesh, elem);
        for op in &ops.weak {
            let coeffs = apply_weak_deriv(op, &dofs).expect("local dimensions agree");
            total += (&ctx.gram_km2 * &coeffs).dot(&coeffs);
        }
        let h_inv = 1.0 / ctx.h;
        let h_inv3 = h_inv * h_inv * h_inv;
        let v0 = DVector::from_column_slice(v.interior_coeffs(elem));
        for coupling in &ops.couplings {
            let ec = &spaces.edges[coupling.edge];
            let jump_b = &coupling.trace_proj * &v0
                - DVector::from_column_slice(v.trace_coeffs(coupling.edge));
            let jump_g = [
                &coupling.grad_proj[0] * &v0
                    - DVector::from_column_slice(v.grad_coeffs(coupling.edge, 0)),
                &coupling.grad_proj[1] * &v0
                    - DVector::from_column_slice(v.grad_coeffs(coupling.edge, 1)),
            ];
            for m in 0..eb {
                total += h_inv3 * ec.gram_diag[m] * jump_b[m] * jump_b[m];
                total += h_inv
                    * ec.gram_diag[m]
                    * (jump_g[0][m] * jump_g[0][m] + jump_g[1][m] * jump_g[1][m]);
            }
        }
    }
    total.sqrt()
}

/// Element-based L^2 norm of the interior block.
pub fn l2_norm(_mesh: &PolyMesh, spaces: &LocalSpaces, v: &WeakFunction) -> f64 {
    let mut total = 0.0;
    for ctx in &spaces.elements {
        let coeffs = DVector::from_column_slice(v.interior_coeffs(ctx.element));
        total += (&ctx.gram_k * &coeffs).dot(&coeffs);
    }
    total.sqrt()
}

/// Sample positions on an edge: quadrature nodes plus both endpoints.
fn edge_samples(spaces: &LocalSpaces, edge: usize) -> Vec<f64> {
    let mut samples = spaces.edges[edge].rule.params.clone();
    samples.push(-1.0);
    samples.push(1.0);
    samples
}

/// Edge-based max norm of the trace block.
pub fn ub_linf(_mesh: &PolyMesh, spaces: &LocalSpaces, v: &WeakFunction) -> f64 {
    let mut max = 0.0f64;
    for ec in &spaces.edges {
        for s in edge_samples(spaces, ec.edge) {
            max = max.max(ec.basis.value(v.trace_coeffs(ec.edge), s).abs());
        }
    }
    max
}

/// Edge-based max norm of the gradient-trace block (componentwise max).
pub fn ug_linf(_mesh: &PolyMesh, spaces: &LocalSpaces, v: &WeakFunction) -> f64 {
    let mut max = 0.0f64;
    for ec in &spaces.edges {
        for s in edge_samples(spaces, ec.edge) {
            for comp in 0..2 {
                max = max.max(ec.basis.value(v.grad_coeffs(ec.edge, comp), s).abs());
            }
        }
    }
    max
}

/// Evaluates all four measures of `v` at the reported mesh size `h`.
pub fn error_quadruple(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    v: &WeakFunction,
    h: f64,
) -> ErrorQuadruple {
    ErrorQuadruple {
        h,
        l2: l2_norm(mesh, spaces, v),
        h2: triple_bar_norm(mesh, spaces, v),
        ub_inf: ub_linf(mesh, spaces, v),
        ug_inf: ug_linf(mesh, spaces, v),
    }
}

/// Observed convergence orders of one error column between consecutive rows:
/// `log(e_coarse / e_fine) / log(h_coarse / h_fine)`, which is the base-2
/// logarithm of the error ratio when `h` halves. Zero or non-finite errors
/// yield `None` rather than a crash.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OrderQuadruple {
    pub l2: Option<f64>,
    pub h2: Option<f64>,
    pub ub_inf: Option<f64>,
    pub ug_inf: Option<f64>,
}

fn order_between(coarse: f64, fine: f64, h_ratio: f64) -> Option<f64> {
    if !(coarse.is_finite() && fine.is_finite()) || coarse <= 0.0 || fine <= 0.0 {
        return None;
    }
    let order = (coarse / fine).ln() / h_ratio.ln();
    order.is_finite().then_some(order)
}

/// Per-measure observed orders; the first entry is all `None`.
pub fn observed_order(errors: &[ErrorQuadruple]) -> Vec<OrderQuadruple> {
    let mut out = vec![OrderQuadruple::default(); errors.len()];
    for idx in 1..errors.len() {
        let coarse = &errors[idx - 1];
        let fine = &errors[idx];
        let h_ratio = coarse.h / fine.h;
        if !h_ratio.is_finite() || h_ratio <= 1.0 {
            continue;
        }
        out[idx] = OrderQuadruple {
            l2: order_between(coarse.l2, fine.l2, h_ratio),
            h2: order_between(coarse.h2, fine.h2, h_ratio),
            ub_inf: order_between(coarse.ub_inf, fine.ub_inf, h_ratio),
            ug_inf: order_between(coarse.ug_inf, fine.ug_inf, h_ratio),
        };
    }
    out
}
