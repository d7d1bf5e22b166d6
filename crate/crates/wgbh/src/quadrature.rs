//! Quadrature on straight edges and polygonal elements.
//!
//! Edge rules are mapped Gauss-Legendre rules. Element rules triangulate the
//! polygon as a fan around its centroid and apply a tensor rule on each fan
//! triangle through the Duffy substitution `(x, y) = (u, v(1-u))`, which keeps
//! every weight positive and is exact for the requested total degree.

use nalgebra::Point2;

use crate::error::{Error, Result};

/// Largest supported polynomial exactness degree.
pub const MAX_DEGREE: usize = 60;

/// Quadrature nodes and weights on a polygonal element.
#[derive(Debug, Clone)]
pub struct QuadRule2d {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub exactness: usize,
}

/// Quadrature nodes and weights on a straight edge.
///
/// `params` are positions in `[-1, 1]` along the low-to-high endpoint
/// direction; `points` are the corresponding physical locations.
#[derive(Debug, Clone)]
pub struct QuadRule1d {
    pub params: Vec<f64>,
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadRule2d {
    pub fn integrate(&self, mut f: impl FnMut(&Point2<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

impl QuadRule1d {
    pub fn integrate(&self, mut f: impl FnMut(&Point2<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact through degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Rule on the segment `a -> b`, exact for polynomials of degree `<= degree`
/// along the edge. `a` must be the low endpoint of the edge's canonical
/// orientation for the `params` convention to hold.
pub fn edge_rule(a: &Point2<f64>, b: &Point2<f64>, degree: usize) -> Result<QuadRule1d> {
    check_degree(degree)?;
    let n = (degree + 1).div_ceil(2).max(1);
    let (nodes, ws) = gauss_legendre(n);
    let half = (b - a) * 0.5;
    let mid = nalgebra::center(a, b);
    let len = (b - a).norm();
    let points = nodes.iter().map(|&t| mid + half * t).collect();
    let weights = ws.iter().map(|&w| w * len * 0.5).collect();
    Ok(QuadRule1d {
        params: nodes,
        points,
        weights,
        exactness: 2 * n - 1,
    })
}

/// Area and centroid of a simple polygon with counterclockwise vertex order.
pub fn polygon_area_centroid(polygon: &[Point2<f64>]) -> (f64, Point2<f64>) {
    let mut twice_area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let m = polygon.len();
    for i in 0..m {
        let p = &polygon[i];
        let q = &polygon[(i + 1) % m];
        let cross = p.x * q.y - q.x * p.y;
        twice_area += cross;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    let area = 0.5 * twice_area;
    (area, Point2::new(cx / (3.0 * twice_area), cy / (3.0 * twice_area)))
}

/// Rule on a simple polygon, exact for total degree `<= degree`.
///
/// Triangles are integrated directly; other polygons are fanned around the
/// centroid, which must see every edge (star-shaped), as is the case for the
/// convex and mildly notched elements this solver targets.
pub fn element_rule(polygon: &[Point2<f64>], degree: usize) -> Result<QuadRule2d> {
    check_degree(degree)?;
    assert!(polygon.len() >= 3, "element needs at least three vertices");
    let nu = (degree + 2).div_ceil(2).max(1);
    let nv = (degree + 1).div_ceil(2).max(1);
    let (tu, wu) = gauss_legendre(nu);
    let (tv, wv) = gauss_legendre(nv);
    // Map [-1,1] to [0,1].
    let us: Vec<(f64, f64)> = tu.iter().zip(&wu).map(|(&t, &w)| ((t + 1.0) * 0.5, w * 0.5)).collect();
    let vs: Vec<(f64, f64)> = tv.iter().zip(&wv).map(|(&t, &w)| ((t + 1.0) * 0.5, w * 0.5)).collect();

    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut add_triangle = |p0: &Point2<f64>, p1: &Point2<f64>, p2: &Point2<f64>| {
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let twice_area = e1.x * e2.y - e1.y * e2.x;
        for &(u, wu) in &us {
            for &(v, wv) in &vs {
                let x = u;
                let y = v * (1.0 - u);
                points.push(p0 + e1 * x + e2 * y);
                weights.push(wu * wv * (1.0 - u) * twice_area);
            }
        }
    };

    if polygon.len() == 3 {
        add_triangle(&polygon[0], &polygon[1], &polygon[2]);
    } else {
        let (_, centroid) = polygon_area_centroid(polygon);
        let m = polygon.len();
        for i in 0..m {
            add_triangle(&centroid, &polygon[i], &polygon[(i + 1) % m]);
        }
    }
    Ok(QuadRule2d {
        points,
        weights,
        exactness: (2 * nu - 2).min(2 * nv - 1),
    })
}
