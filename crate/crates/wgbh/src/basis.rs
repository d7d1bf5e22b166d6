//! Polynomial bases: scaled monomials on elements, Legendre on edges.
//!
//! Element bases are the monomials `((x - xc)/h)^a ((y - yc)/h)^b` of total
//! degree `a + b <= r`, centered at the element centroid and scaled by the
//! element diameter so Gram conditioning stays flat under refinement.

use nalgebra::{DVector, Point2};

/// Dimension of the polynomials of total degree `<= r` in two variables.
pub fn poly_dim(r: usize) -> usize {
    (r + 1) * (r + 2) / 2
}

/// Scaled monomial basis of `P_r` on one element.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub degree: usize,
    pub center: Point2<f64>,
    pub scale: f64,
    exponents: Vec<(i32, i32)>,
}

impl ElementBasis {
    pub fn new(degree: usize, center: Point2<f64>, scale: f64) -> Self {
        let mut exponents = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree as i32 {
            for a in (0..=d).rev() {
                exponents.push((a, d - a));
            }
        }
        Self {
            degree,
            center,
            scale,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn local(&self, p: &Point2<f64>) -> (f64, f64) {
        (
            (p.x - self.center.x) / self.scale,
            (p.y - self.center.y) / self.scale,
        )
    }

    fn pow(base: f64, e: i32) -> f64 {
        if e < 0 {
            0.0
        } else {
            base.powi(e)
        }
    }

    /// Values of all basis functions at `p`.
    pub fn eval_at(&self, p: &Point2<f64>) -> DVector<f64> {
        let (xi, eta) = self.local(p);
        DVector::from_iterator(
            self.dim(),
            self.exponents
                .iter()
                .map(|&(a, b)| Self::pow(xi, a) * Self::pow(eta, b)),
        )
    }

    /// First partial `d/dx_axis` of all basis functions at `p` (`axis` 0 = x, 1 = y).
    pub fn grad_at(&self, p: &Point2<f64>, axis: usize) -> DVector<f64> {
        let (xi, eta) = self.local(p);
        let inv = 1.0 / self.scale;
        DVector::from_iterator(
            self.dim(),
            self.exponents.iter().map(|&(a, b)| match axis {
                0 => a as f64 * inv * Self::pow(xi, a - 1) * Self::pow(eta, b),
                _ => b as f64 * inv * Self::pow(xi, a) * Self::pow(eta, b - 1),
            }),
        )
    }

    /// Second partial `d^2/(dx_i dx_j)` of all basis functions at `p`.
    pub fn second_at(&self, p: &Point2<f64>, i: usize, j: usize) -> DVector<f64> {
        let (xi, eta) = self.local(p);
        let inv2 = 1.0 / (self.scale * self.scale);
        DVector::from_iterator(
            self.dim(),
            self.exponents.iter().map(|&(a, b)| {
                let (af, bf) = (a as f64, b as f64);
                match (i, j) {
                    (0, 0) => af * (af - 1.0) * inv2 * Self::pow(xi, a - 2) * Self::pow(eta, b),
                    (1, 1) => bf * (bf - 1.0) * inv2 * Self::pow(xi, a) * Self::pow(eta, b - 2),
                    _ => af * bf * inv2 * Self::pow(xi, a - 1) * Self::pow(eta, b - 1),
                }
            }),
        )
    }

    /// Evaluate the polynomial with the given coefficients at `p`.
    pub fn value(&self, coeffs: &DVector<f64>, p: &Point2<f64>) -> f64 {
        coeffs.dot(&self.eval_at(p))
    }
}

/// Legendre basis of `P_r` in the arclength parameter `s in [-1, 1]` of an
/// edge, oriented from the low-id endpoint to the high-id endpoint.
#[derive(Debug, Clone, Copy)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    /// Values `P_0(s) .. P_r(s)`.
    pub fn eval_at(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out[0] = 1.0;
        if self.degree >= 1 {
            out[1] = s;
        }
        for m in 2..=self.degree {
            let mf = m as f64;
            out[m] = ((2.0 * mf - 1.0) * s * out[m - 1] - (mf - 1.0) * out[m - 2]) / mf;
        }
        out
    }

    /// Diagonal of the Gram matrix on an edge of the given length:
    /// `int_e P_m^2 ds = L / (2m + 1)`.
    pub fn gram_diag(&self, length: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|m| length / (2.0 * m as f64 + 1.0))
            .collect()
    }

    pub fn value(&self, coeffs: &[f64], s: f64) -> f64 {
        let vals = self.eval_at(s);
        coeffs.iter().zip(vals.iter()).map(|(c, v)| c * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{edge_rule, element_rule};
    use nalgebra::DMatrix;

    #[test]
    fn dims_follow_triangle_numbers() {
        assert_eq!(poly_dim(0), 1);
        assert_eq!(poly_dim(2), 6);
        assert_eq!(poly_dim(5), 21);
        let basis = ElementBasis::new(3, Point2::new(0.5, 0.5), 1.0);
        assert_eq!(basis.dim(), 10);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = ElementBasis::new(4, Point2::new(0.3, 0.7), 0.8);
        let p = Point2::new(0.55, 0.41);
        let eps = 1e-6;
        for axis in 0..2 {
            let step = if axis == 0 {
                nalgebra::Vector2::new(eps, 0.0)
            } else {
                nalgebra::Vector2::new(0.0, eps)
            };
            let fd = (basis.eval_at(&(p + step)) - basis.eval_at(&(p - step))) / (2.0 * eps);
            let exact = basis.grad_at(&p, axis);
            assert!((fd - &exact).amax() < 1e-8);
        }
        for i in 0..2 {
            for j in 0..2 {
                let si = if i == 0 {
                    nalgebra::Vector2::new(eps, 0.0)
                } else {
                    nalgebra::Vector2::new(0.0, eps)
                };
                let fd = (basis.grad_at(&(p + si), j) - basis.grad_at(&(p - si), j)) / (2.0 * eps);
                let exact = basis.second_at(&p, i, j);
                assert!((fd - &exact).amax() < 1e-7);
            }
        }
    }

    #[test]
    fn element_gram_is_spd() {
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 0.5),
        ];
        let basis = ElementBasis::new(5, Point2::new(0.25, 0.25), 0.5f64.hypot(0.5));
        let rule = element_rule(&square, 10).unwrap();
        let n = basis.dim();
        let mut gram = DMatrix::zeros(n, n);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let v = basis.eval_at(p);
            gram.ger(*w, &v, &v, 1.0);
        }
        let sym = (&gram - gram.transpose()).amax();
        assert!(sym < 1e-15);
        assert!(gram.cholesky().is_some(), "Gram must be positive definite");
    }

    #[test]
    fn edge_basis_is_orthogonal_under_quadrature() {
        let a = Point2::new(0.2, 0.1);
        let b = Point2::new(0.9, 0.6);
        let len = (b - a).norm();
        let basis = EdgeBasis::new(4);
        let rule = edge_rule(&a, &b, 8).unwrap();
        let expected = basis.gram_diag(len);
        for m in 0..basis.dim() {
            for l in 0..basis.dim() {
                let got: f64 = rule
                    .params
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| {
                        let v = basis.eval_at(s);
                        w * v[m] * v[l]
                    })
                    .sum();
                let want = if m == l { expected[m] } else { 0.0 };
                assert!((got - want).abs() < 1e-12, "({m},{l}): {got} vs {want}");
            }
        }
    }
}
