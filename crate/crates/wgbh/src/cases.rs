//! Built-in manufactured solutions for convergence studies.
//!
//! Each case fixes an exact solution `u` on the unit square and derives the
//! data analytically: `f = laplacian^2 u`, `xi = u` on the boundary,
//! `nu = grad u . n`, and the tangential derivative from `grad u`.

use nalgebra::{Point2, Vector2};

use crate::solver::BiharmonicProblem;

pub struct ManufacturedCase {
    pub name: &'static str,
    pub description: &'static str,
    pub solution: fn(&Point2<f64>) -> f64,
    pub gradient: fn(&Point2<f64>) -> Vector2<f64>,
    /// `laplacian^2` of the solution.
    pub source: fn(&Point2<f64>) -> f64,
}

fn bubble_1d(t: f64) -> f64 {
    let s = t * (1.0 - t);
    s * s
}

fn bubble_1d_d1(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}

fn bubble_1d_d2(t: f64) -> f64 {
    2.0 - 12.0 * t + 12.0 * t * t
}

pub const CASES: &[ManufacturedCase] = &[
    ManufacturedCase {
        name: "quad",
        description: "u = x^2 + y^2 + xy + x + y + 1 (reproduced exactly for every k >= 2)",
        solution: |p| p.x * p.x + p.y * p.y + p.x * p.y + p.x + p.y + 1.0,
        gradient: |p| Vector2::new(2.0 * p.x + p.y + 1.0, 2.0 * p.y + p.x + 1.0),
        source: |_| 0.0,
    },
    ManufacturedCase {
        name: "bubble",
        description: "u = x^2 (1-x)^2 y^2 (1-y)^2 (homogeneous Dirichlet and Neumann data)",
        solution: |p| bubble_1d(p.x) * bubble_1d(p.y),
        gradient: |p| {
            Vector2::new(
                bubble_1d_d1(p.x) * bubble_1d(p.y),
                bubble_1d(p.x) * bubble_1d_d1(p.y),
            )
        },
        source: |p| {
            24.0 * bubble_1d(p.y)
                + 2.0 * bubble_1d_d2(p.x) * bubble_1d_d2(p.y)
                + 24.0 * bubble_1d(p.x)
        },
    },
    ManufacturedCase {
        name: "trig",
        description: "u = sin(x) sin(y) (inhomogeneous boundary data)",
        solution: |p| p.x.sin() * p.y.sin(),
        gradient: |p| Vector2::new(p.x.cos() * p.y.sin(), p.x.sin() * p.y.cos()),
        source: |p| 4.0 * p.x.sin() * p.y.sin(),
    },
    ManufacturedCase {
        name: "biquad",
        description: "u = x (1-x) y (1-y)",
        solution: |p| p.x * (1.0 - p.x) * p.y * (1.0 - p.y),
        gradient: |p| {
            Vector2::new(
                (1.0 - 2.0 * p.x) * p.y * (1.0 - p.y),
                p.x * (1.0 - p.x) * (1.0 - 2.0 * p.y),
            )
        },
        source: |_| 8.0,
    },
];

pub fn by_name(name: &str) -> Option<&'static ManufacturedCase> {
    CASES.iter().find(|c| c.name == name)
}

pub fn names() -> Vec<&'static str> {
    CASES.iter().map(|c| c.name).collect()
}

impl ManufacturedCase {
    /// Problem data derived from the exact solution.
    pub fn problem(&self) -> BiharmonicProblem {
        let grad = self.gradient;
        BiharmonicProblem::new(self.source, self.solution, move |p, n| grad(p).dot(n))
            .with_dirichlet_gradient(grad)
    }
}
