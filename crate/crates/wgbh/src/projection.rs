//! Local L^2 projections onto element and edge polynomial spaces.
//!
//! `project_q0` projects onto `P_k(T)`, `project_cal_qh` onto `P_{k-2}(T)`,
//! and `project_qb` onto `P_{k-2}(e)`. `project_qh` combines them into the
//! weak-function projection `{Q_0 w, Q_b w, Q_b(grad w)}` used both for
//! boundary data and as the comparison target in error measurement.

use nalgebra::{DVector, Point2, Vector2};

use crate::basis::ElementBasis;
use crate::mesh::PolyMesh;
use crate::quadrature::QuadRule2d;
use crate::weak_deriv::{EdgeContext, ElementContext, LocalSpaces, WeakFunction};

fn project_element(
    basis: &ElementBasis,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    rule: &QuadRule2d,
    f: impl Fn(&Point2<f64>) -> f64,
) -> DVector<f64> {
    let mut moments = DVector::zeros(basis.dim());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        moments.axpy(*w * f(p), &basis.eval_at(p), 1.0);
    }
    chol.solve(&moments)
}

/// L^2 projection of a scalar field onto `P_k(T)`.
pub fn project_q0(ctx: &ElementContext, f: impl Fn(&Point2<f64>) -> f64) -> DVector<f64> {
    project_element(&ctx.basis_k, &ctx.chol_k, &ctx.rule, f)
}

/// L^2 projection of a scalar field onto `P_{k-2}(T)`.
pub fn project_cal_qh(ctx: &ElementContext, f: impl Fn(&Point2<f64>) -> f64) -> DVector<f64> {
    project_element(&ctx.basis_km2, &ctx.chol_km2, &ctx.rule, f)
}

/// L^2 projection of a scalar field onto `P_{k-2}(e)` (Legendre coefficients).
pub fn project_qb(ec: &EdgeContext, g: impl Fn(&Point2<f64>) -> f64) -> DVector<f64> {
    let mut coeffs = DVector::zeros(ec.basis.dim());
    for ((s, p), w) in ec
        .rule
        .params
        .iter()
        .zip(&ec.rule.points)
        .zip(&ec.rule.weights)
    {
        coeffs.axpy(*w * g(p), &ec.basis.eval_at(*s), 1.0);
    }
    for m in 0..coeffs.len() {
        coeffs[m] /= ec.gram_diag[m];
    }
    coeffs
}

/// Componentwise `Q_b` of a vector field on an edge.
pub fn project_qb_vector(
    ec: &EdgeContext,
    g: impl Fn(&Point2<f64>) -> Vector2<f64>,
) -> [DVector<f64>; 2] {
    [
        project_qb(ec, |p| g(p).x),
        project_qb(ec, |p| g(p).y),
    ]
}

/// Weak-function projection `Q_h w = {Q_0 w, Q_b w, Q_b(grad w)}`.
pub fn project_qh(
    mesh: &PolyMesh,
    spaces: &LocalSpaces,
    w: impl Fn(&Point2<f64>) -> f64,
    grad_w: impl Fn(&Point2<f64>) -> Vector2<f64>,
) -> WeakFunction {
    let mut out = WeakFunction::zeros(mesh, spaces.k);
    for ctx in &spaces.elements {
        let coeffs = project_q0(ctx, &w);
        out.interior_coeffs_mut(ctx.element)
            .copy_from_slice(coeffs.as_slice());
    }
    for ec in &spaces.edges {
        let trace = project_qb(ec, &w);
        out.trace_coeffs_mut(ec.edge)
            .copy_from_slice(trace.as_slice());
        let grads = project_qb_vector(ec, &grad_w);
        out.grad_coeffs_mut(ec.edge, 0)
            .copy_from_slice(grads[0].as_slice());
        out.grad_coeffs_mut(ec.edge, 1)
            .copy_from_slice(grads[1].as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak_deriv::{apply_weak_deriv, build_weak_deriv};
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spaces_on(mesh: &PolyMesh, k: usize) -> LocalSpaces {
        LocalSpaces::build(mesh, k).unwrap()
    }

    #[test]
    fn projection_reproduces_members_of_the_space() {
        let mesh = PolyMesh::uniform_rectangles(1).unwrap();
        let spaces = spaces_on(&mesh, 2);
        let ctx = &spaces.elements[0];
        // f(x, y) = 2 - x + 3y + x y in P_2.
        let f = |p: &Point2<f64>| 2.0 - p.x + 3.0 * p.y + p.x * p.y;
        let coeffs = project_q0(ctx, f);
        for (p, _) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
            assert!((ctx.basis_k.value(&coeffs, p) - f(p)).abs() < 1e-12);
        }
        // Idempotence, coefficientwise.
        let again = project_q0(ctx, |p| ctx.basis_k.value(&coeffs, p));
        assert!((again - coeffs).amax() < 1e-12);
    }

    #[test]
    fn residual_is_orthogonal_to_the_space() {
        // f = x^3 with k = 2 on the unit square: <f - Q_0 f, x^a y^b> = 0.
        let mesh = PolyMesh::uniform_rectangles(1).unwrap();
        let spaces = spaces_on(&mesh, 2);
        let ctx = &spaces.elements[0];
        let f = |p: &Point2<f64>| p.x * p.x * p.x;
        let coeffs = project_q0(ctx, f);
        // Use a richer rule than the projection itself so the degree-5
        // integrands below are exact.
        let rule = crate::quadrature::element_rule(&mesh.element_polygon(0), 8).unwrap();
        for a in 0..=2i32 {
            for b in 0..=(2 - a) {
                let moment = rule.integrate(|p| {
                    (f(p) - ctx.basis_k.value(&coeffs, p)) * p.x.powi(a) * p.y.powi(b)
                });
                assert!(moment.abs() < 1e-13, "x^{a} y^{b}: {moment}");
            }
        }
    }

    #[test]
    fn matches_dense_least_squares_oracle() {
        // Q_0(sin x sin y) on [0, 1/2]^2 against normal equations assembled
        // from plain quadrature samples, solved by SVD.
        let mesh = PolyMesh::from_text(
            "wgmesh 1\nv 0 0\nv 0.5 0\nv 0.5 0.5\nv 0 0.5\np 4 0 1 2 3\n",
        )
        .unwrap();
        let spaces = spaces_on(&mesh, 2);
        let ctx = &spaces.elements[0];
        let f = |p: &Point2<f64>| p.x.sin() * p.y.sin();
        let coeffs = project_q0(ctx, f);

        let rule = &ctx.rule;
        let n = ctx.basis_k.dim();
        let rows = rule.points.len();
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        for (r, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let v = ctx.basis_k.eval_at(p) * w.sqrt();
            a.row_mut(r).copy_from(&v.transpose());
            b[r] = w.sqrt() * f(p);
        }
        let oracle = a.svd(true, true).solve(&b, 1e-14).unwrap();
        assert!((coeffs - oracle).amax() < 1e-10);
    }

    #[test]
    fn edge_projection_examples() {
        let mesh = PolyMesh::uniform_rectangles(1).unwrap();
        let spaces = spaces_on(&mesh, 2);
        // Constants reproduce exactly on every edge.
        for ec in &spaces.edges {
            let c = project_qb(ec, |_| 4.5);
            assert!((c[0] - 4.5).abs() < 1e-14);
        }
        // Mean of s^2 over a unit edge is 1/3: bottom edge, s = x.
        let bottom = spaces
            .edges
            .iter()
            .find(|ec| {
                let (a, b) = mesh.edge_endpoints(ec.edge);
                a.y == 0.0 && b.y == 0.0
            })
            .unwrap();
        let c = project_qb(bottom, |p| p.x * p.x);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-14);
        // grad(x y) = (y, x) on the edge x = 1 has componentwise means (1/2, 1).
        let right = spaces
            .edges
            .iter()
            .find(|ec| {
                let (a, b) = mesh.edge_endpoints(ec.edge);
                a.x == 1.0 && b.x == 1.0
            })
            .unwrap();
        let g = project_qb_vector(right, |p| Vector2::new(p.y, p.x));
        assert!((g[0][0] - 0.5).abs() < 1e-14);
        assert!((g[1][0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projections_are_linear() {
        let mesh = PolyMesh::uniform_triangles(1).unwrap();
        let spaces = spaces_on(&mesh, 3);
        let ctx = &spaces.elements[0];
        let f = |p: &Point2<f64>| (2.0 * p.x).cos() + p.y;
        let g = |p: &Point2<f64>| p.x * p.y * p.y;
        let (alpha, beta) = (1.7, -0.4);
        let combo = project_q0(ctx, |p| alpha * f(p) + beta * g(p));
        let parts = alpha * project_q0(ctx, f) + beta * project_q0(ctx, g);
        let scale = parts.amax().max(1.0);
        let diff = (combo - parts).amax();
        assert!(diff < 1e-12 * scale, "diff {diff}");

        let ec = &spaces.edges[0];
        let combo = project_qb(ec, |p| alpha * f(p) + beta * g(p));
        let parts = alpha * project_qb(ec, f) + beta * project_qb(ec, g);
        assert!((combo - parts).amax() < 1e-13);
    }

    #[test]
    fn projection_beats_random_competitors() {
        // Best-approximation: || f - Q_0 f || <= || f - p || for random p in P_k.
        let mesh = PolyMesh::uniform_rectangles(1).unwrap();
        let spaces = spaces_on(&mesh, 2);
        let ctx = &spaces.elements[0];
        let f = |p: &Point2<f64>| (3.0 * p.x).sin() * (2.0 * p.y).cos();
        let coeffs = project_q0(ctx, f);
        let err_norm = |c: &DVector<f64>| {
            ctx.rule
                .points
                .iter()
                .zip(&ctx.rule.weights)
                .map(|(p, w)| {
                    let d = f(p) - ctx.basis_k.value(c, p);
                    w * d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        let best = err_norm(&coeffs);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut rival = coeffs.clone();
            for c in rival.iter_mut() {
                *c += rng.random_range(-0.1..0.1);
            }
            assert!(best <= err_norm(&rival) + 1e-10);
        }
    }

    #[test]
    fn cal_qh_mirrors_q0_at_reduced_degree() {
        let mesh = PolyMesh::uniform_triangles(1).unwrap();
        let spaces = spaces_on(&mesh, 4);
        let ctx = &spaces.elements[0];
        let f = |p: &Point2<f64>| 1.0 - 2.0 * p.x + p.y * p.y;
        // f is in P_2 = P_{k-2}: exact reproduction and idempotence.
        let coeffs = project_cal_qh(ctx, f);
        for p in ctx.rule.points.iter().take(5) {
            assert!((ctx.basis_km2.value(&coeffs, p) - f(p)).abs() < 1e-12);
        }
        let again = project_cal_qh(ctx, |p| ctx.basis_km2.value(&coeffs, p));
        assert!((again - coeffs).amax() < 1e-12);
        // Orthogonality of the residual for a field outside the space.
        let g = |p: &Point2<f64>| p.x.powi(4);
        let cg = project_cal_qh(ctx, g);
        let rule = crate::quadrature::element_rule(&mesh.element_polygon(0), 10).unwrap();
        for a in 0..=2i32 {
            for b in 0..=(2 - a) {
                let moment = rule.integrate(|p| {
                    (g(p) - ctx.basis_km2.value(&cg, p)) * p.x.powi(a) * p.y.powi(b)
                });
                assert!(moment.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn qh_reproduces_linears_exactly() {
        let mesh = PolyMesh::uniform_rectangles(2).unwrap();
        let spaces = spaces_on(&mesh, 2);
        let w = |p: &Point2<f64>| 1.0 + 2.0 * p.x - 0.5 * p.y;
        let grad = |_: &Point2<f64>| Vector2::new(2.0, -0.5);
        let qh = project_qh(&mesh, &spaces, w, grad);
        for ctx in &spaces.elements {
            let coeffs = DVector::from_column_slice(qh.interior_coeffs(ctx.element));
            for p in ctx.rule.points.iter().take(4) {
                assert!((ctx.basis_k.value(&coeffs, p) - w(p)).abs() < 1e-12);
            }
        }
        for ec in &spaces.edges {
            // Constant edge polynomials must match the edge means.
            let (a, b) = mesh.edge_endpoints(ec.edge);
            let mid = nalgebra::center(&a, &b);
            assert!((qh.trace_coeffs(ec.edge)[0] - w(&mid)).abs() < 1e-12);
            assert!((qh.grad_coeffs(ec.edge, 0)[0] - 2.0).abs() < 1e-13);
            assert!((qh.grad_coeffs(ec.edge, 1)[0] + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn qh_of_quadratic_has_exact_interior_and_mean_edges() {
        let mesh = PolyMesh::uniform_rectangles(2).unwrap();
        let spaces = spaces_on(&mesh, 2);
        let w = |p: &Point2<f64>| p.x * p.x + p.y * p.y;
        let grad = |p: &Point2<f64>| Vector2::new(2.0 * p.x, 2.0 * p.y);
        let qh = project_qh(&mesh, &spaces, w, grad);
        for ctx in &spaces.elements {
            let coeffs = DVector::from_column_slice(qh.interior_coeffs(ctx.element));
            for p in ctx.rule.points.iter().take(6) {
                assert!((ctx.basis_k.value(&coeffs, p) - w(p)).abs() < 1e-12);
            }
        }
        for ec in &spaces.edges {
            // Edge mean of w computed in closed form along the straight edge.
            let (a, b) = mesh.edge_endpoints(ec.edge);
            let exact = ec.rule.integrate(w) / mesh.edges[ec.edge].length;
            assert!((qh.trace_coeffs(ec.edge)[0] - exact).abs() < 1e-13);
            let gx = ec.rule.integrate(|p| 2.0 * p.x) / mesh.edges[ec.edge].length;
            assert!((qh.grad_coeffs(ec.edge, 0)[0] - gx).abs() < 1e-13);
            let _ = (a, b);
        }
    }

    #[test]
    fn weak_derivative_commutes_with_projection() {
        // d2w(Q_h w) = calQ_h(d2 w) for smooth w, on every element of both
        // structured meshes and for k = 2, 3, 4 as the data's degree permits.
        struct Case {
            w: fn(&Point2<f64>) -> f64,
            grad: fn(&Point2<f64>) -> Vector2<f64>,
            second: fn(&Point2<f64>, usize, usize) -> f64,
            polynomial: bool,
        }
        let cases = [
            // x^2 y
            Case {
                w: |p| p.x * p.x * p.y,
                grad: |p| Vector2::new(2.0 * p.x * p.y, p.x * p.x),
                second: |p, i, j| match (i, j) {
                    (0, 0) => 2.0 * p.y,
                    (1, 1) => 0.0,
                    _ => 2.0 * p.x,
                },
                polynomial: true,
            },
            // x^3 - y^3
            Case {
                w: |p| p.x.powi(3) - p.y.powi(3),
                grad: |p| Vector2::new(3.0 * p.x * p.x, -3.0 * p.y * p.y),
                second: |p, i, j| match (i, j) {
                    (0, 0) => 6.0 * p.x,
                    (1, 1) => -6.0 * p.y,
                    _ => 0.0,
                },
                polynomial: true,
            },
            // sin x sin y
            Case {
                w: |p| p.x.sin() * p.y.sin(),
                grad: |p| Vector2::new(p.x.cos() * p.y.sin(), p.x.sin() * p.y.cos()),
                second: |p, i, j| match (i, j) {
                    (0, 0) | (1, 1) => -p.x.sin() * p.y.sin(),
                    _ => p.x.cos() * p.y.cos(),
                },
                polynomial: false,
            },
            // x^2 (1-x)^2 y^2 (1-y)^2: degree 8, beyond the form-degree rules
            Case {
                w: |p| {
                    let g = |t: f64| (t * (1.0 - t)).powi(2);
                    g(p.x) * g(p.y)
                },
                grad: |p| {
                    let g = |t: f64| (t * (1.0 - t)).powi(2);
                    let dg = |t: f64| 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
                    Vector2::new(dg(p.x) * g(p.y), g(p.x) * dg(p.y))
                },
                second: |p, i, j| {
                    let g = |t: f64| (t * (1.0 - t)).powi(2);
                    let dg = |t: f64| 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
                    let ddg = |t: f64| 2.0 - 12.0 * t + 12.0 * t * t;
                    match (i, j) {
                        (0, 0) => ddg(p.x) * g(p.y),
                        (1, 1) => g(p.x) * ddg(p.y),
                        _ => dg(p.x) * dg(p.y),
                    }
                },
                polynomial: false,
            },
        ];
        for mesh in [
            PolyMesh::uniform_triangles(2).unwrap(),
            PolyMesh::uniform_rectangles(2).unwrap(),
        ] {
            for k in [2usize, 3, 4] {
                let spaces = spaces_on(&mesh, k);
                // Non-polynomial data needs quadrature beyond the form degrees
                // for the projections feeding both sides to agree at 1e-10.
                let rich = LocalSpaces::build_with_degrees(&mesh, k, 20, 20).unwrap();
                for case in &cases {
                    let spaces = if case.polynomial { &spaces } else { &rich };
                    let qh = project_qh(&mesh, spaces, case.w, case.grad);
                    for elem in 0..mesh.elements.len() {
                        let dofs = qh.local_dofs(&mesh, elem);
                        let ctx = &spaces.elements[elem];
                        for i in 0..2 {
                            for j in 0..2 {
                                let op = build_weak_deriv(spaces, elem, i, j);
                                let lhs = apply_weak_deriv(&op, &dofs).unwrap();
                                let rhs = project_cal_qh(ctx, |p| (case.second)(p, i, j));
                                assert!(
                                    (&lhs - &rhs).amax() < 1e-10,
                                    "k={k} elem={elem} ({i},{j}): {:?} vs {:?}",
                                    lhs.as_slice(),
                                    rhs.as_slice()
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn commutativity_on_random_instances() {
        // 100 random (element, field, i, j) draws with k in {2, 3}; the field
        // is a random polynomial of degree <= 3 so every integral is exact.
        let meshes = [
            PolyMesh::uniform_triangles(3).unwrap(),
            PolyMesh::uniform_rectangles(3).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let mesh = &meshes[rng.random_range(0..2)];
            let k = rng.random_range(2..=3usize);
            let spaces = spaces_on(mesh, k);
            let c: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c2 = c.clone();
            let c3 = c.clone();
            let w = move |p: &Point2<f64>| {
                let (x, y) = (p.x, p.y);
                c[0] + c[1] * x
                    + c[2] * y
                    + c[3] * x * x
                    + c[4] * x * y
                    + c[5] * y * y
                    + c[6] * x * x * x
                    + c[7] * x * x * y
                    + c[8] * x * y * y
                    + c[9] * y * y * y
            };
            let grad = move |p: &Point2<f64>| {
                let (x, y) = (p.x, p.y);
                Vector2::new(
                    c2[1] + 2.0 * c2[3] * x + c2[4] * y + 3.0 * c2[6] * x * x + 2.0 * c2[7] * x * y + c2[8] * y * y,
                    c2[2] + c2[4] * x + 2.0 * c2[5] * y + c2[7] * x * x + 2.0 * c2[8] * x * y + 3.0 * c2[9] * y * y,
                )
            };
            let second = move |p: &Point2<f64>, i: usize, j: usize| {
                let (x, y) = (p.x, p.y);
                match (i, j) {
                    (0, 0) => 2.0 * c3[3] + 6.0 * c3[6] * x + 2.0 * c3[7] * y,
                    (1, 1) => 2.0 * c3[5] + 2.0 * c3[8] * x + 6.0 * c3[9] * y,
                    _ => c3[4] + 2.0 * c3[7] * x + 2.0 * c3[8] * y,
                }
            };
            let qh = project_qh(mesh, &spaces, &w, &grad);
            let elem = rng.random_range(0..mesh.elements.len());
            let (i, j) = (rng.random_range(0..2), rng.random_range(0..2));
            let dofs = qh.local_dofs(mesh, elem);
            let op = build_weak_deriv(&spaces, elem, i, j);
            let lhs = apply_weak_deriv(&op, &dofs).unwrap();
            let rhs = project_cal_qh(&spaces.elements[elem], |p| second(p, i, j));
            assert!((&lhs - &rhs).amax() < 1e-10);
        }
    }
}
