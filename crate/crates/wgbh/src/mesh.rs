//! Planar polygonal meshes.
//!
//! A mesh is built from vertices and counterclockwise element polygons; edges,
//! neighbor links, outward normals, and boundary flags are derived, never
//! stored in the input. Meshes are immutable after construction.
//!
//! Shape regularity of the elements is the caller's obligation; construction
//! only enforces the topological invariants (simple CCW polygons, edges shared
//! by at most two elements, closed boundary loops).

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::quadrature::polygon_area_centroid;

/// One polygonal element.
#[derive(Debug, Clone)]
pub struct Element {
    /// Vertex ids in counterclockwise order.
    pub vertex_ids: Vec<usize>,
    /// Edge ids, ordered so edge `i` joins vertex `i` to vertex `i + 1`.
    pub edge_ids: Vec<usize>,
    pub centroid: Point2<f64>,
    /// Element diameter `h_T` (largest pairwise vertex distance).
    pub diameter: f64,
    pub area: f64,
}

/// One mesh edge, canonically oriented from the lower to the higher vertex id.
#[derive(Debug, Clone)]
pub struct Edge {
    pub endpoint_ids: (usize, usize),
    pub length: f64,
    /// Adjacent element ids (one for boundary edges, two for interior ones).
    pub neighbors: Vec<usize>,
    /// Outward unit normal of the matching entry of `neighbors`.
    pub normals: Vec<Vector2<f64>>,
    pub is_boundary: bool,
    /// +90 degree counterclockwise rotation of `normals[0]`.
    pub unit_tangent: Vector2<f64>,
}

impl Edge {
    /// Outward unit normal of `elem` on this edge.
    pub fn outward_normal(&self, elem: usize) -> Vector2<f64> {
        let slot = self
            .neighbors
            .iter()
            .position(|&e| e == elem)
            .expect("element is not a neighbor of this edge");
        self.normals[slot]
    }
}

/// Immutable polygonal mesh with derived connectivity.
#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Point2<f64>>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// Largest element diameter.
    pub h_max: f64,
}

fn rot_ccw(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

fn orient(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when segments `a-b` and `c-d` share any point.
fn segments_touch(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, d: &Point2<f64>) -> bool {
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |p: &Point2<f64>, q: &Point2<f64>, r: &Point2<f64>| {
        orient(p, q, r) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) || on_segment(c, d, b)
}

impl PolyMesh {
    /// Builds a mesh from vertices and counterclockwise element polygons,
    /// deriving edges and checking the topological invariants.
    pub fn from_polygons(vertices: Vec<Point2<f64>>, polygons: Vec<Vec<usize>>) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::Topology("mesh has no elements".into()));
        }
        let mut elements = Vec::with_capacity(polygons.len());
        // Map (lo, hi) -> edge id; per edge remember (element, traversal a->b).
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();

        for (elem_id, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::Topology(format!(
                    "element {elem_id} has fewer than 3 vertices"
                )));
            }
            for &v in poly {
                if v >= vertices.len() {
                    return Err(Error::Topology(format!(
                        "element {elem_id} references missing vertex {v}"
                    )));
                }
            }
            {
                let mut sorted = poly.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != poly.len() {
                    return Err(Error::Topology(format!(
                        "element {elem_id} repeats a vertex"
                    )));
                }
            }
            let pts: Vec<Point2<f64>> = poly.iter().map(|&v| vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::Topology(format!(
                    "element {elem_id} is clockwise or degenerate (signed area {area})"
                )));
            }
            let m = pts.len();
            // Simplicity: no two non-adjacent sides may touch.
            for i in 0..m {
                for j in (i + 1)..m {
                    if j == i + 1 || (i == 0 && j == m - 1) {
                        continue;
                    }
                    if segments_touch(&pts[i], &pts[(i + 1) % m], &pts[j], &pts[(j + 1) % m]) {
                        return Err(Error::Topology(format!(
                            "element {elem_id} is self-intersecting (sides {i} and {j})"
                        )));
                    }
                }
            }
            let mut diameter: f64 = 0.0;
            for i in 0..m {
                for j in (i + 1)..m {
                    diameter = diameter.max((pts[i] - pts[j]).norm());
                }
            }

            let mut edge_ids = Vec::with_capacity(m);
            for i in 0..m {
                let a = poly[i];
                let b = poly[(i + 1) % m];
                if a == b || vertices[a] == vertices[b] {
                    return Err(Error::Topology(format!(
                        "element {elem_id} has a zero-length side"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let dir = vertices[b] - vertices[a];
                let normal = Vector2::new(dir.y, -dir.x) / dir.norm();
                let edge_id = match edge_index.get(&key) {
                    Some(&id) => {
                        if edges[id].neighbors.len() == 2 {
                            return Err(Error::Topology(format!(
                                "edge {:?} is shared by more than two elements",
                                key
                            )));
                        }
                        edges[id].neighbors.push(elem_id);
                        edges[id].normals.push(normal);
                        id
                    }
                    None => {
                        let id = edges.len();
                        edge_index.insert(key, id);
                        edges.push(Edge {
                            endpoint_ids: key,
                            length: dir.norm(),
                            neighbors: vec![elem_id],
                            normals: vec![normal],
                            is_boundary: true,
                            unit_tangent: Vector2::zeros(),
                        });
                        id
                    }
                };
                edge_ids.push(edge_id);
            }

            elements.push(Element {
                vertex_ids: poly.clone(),
                edge_ids,
                centroid,
                diameter,
                area,
            });
        }

        let mut boundary_degree: HashMap<usize, usize> = HashMap::new();
        for edge in &mut edges {
            edge.is_boundary = edge.neighbors.len() == 1;
            edge.unit_tangent = rot_ccw(edge.normals[0]);
            if edge.is_boundary {
                *boundary_degree.entry(edge.endpoint_ids.0).or_insert(0) += 1;
                *boundary_degree.entry(edge.endpoint_ids.1).or_insert(0) += 1;
            }
        }
        for (&v, &deg) in &boundary_degree {
            if deg % 2 != 0 {
                return Err(Error::Topology(format!(
                    "boundary edges do not close up at vertex {v}"
                )));
            }
        }

        let h_max = elements
            .iter()
            .map(|e| e.diameter)
            .fold(0.0f64, f64::max);
        Ok(Self {
            vertices,
            elements,
            edges,
            h_max,
        })
    }

    /// Uniform n x n mesh of axis-aligned squares on the unit square.
    pub fn uniform_rectangles(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("mesh resolution n must be at least 1".into()));
        }
        let vertices = grid_vertices(n);
        let v = |i: usize, j: usize| j * (n + 1) + i;
        let mut polygons = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                polygons.push(vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
        Self::from_polygons(vertices, polygons)
    }

    /// Uniform triangulation: each square of the n x n grid is split by its
    /// negative-slope diagonal (top-left to bottom-right corner).
    pub fn uniform_triangles(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("mesh resolution n must be at least 1".into()));
        }
        let vertices = grid_vertices(n);
        let v = |i: usize, j: usize| j * (n + 1) + i;
        let mut polygons = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (bl, br, tr, tl) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
                polygons.push(vec![bl, br, tl]);
                polygons.push(vec![br, tr, tl]);
            }
        }
        Self::from_polygons(vertices, polygons)
    }

    /// Parses the `wgmesh 1` text format: `v x y` vertex statements followed
    /// by `p k i1 .. ik` polygon statements, `#` comments allowed.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut vertices: Vec<Point2<f64>> = Vec::new();
        let mut polygons: Vec<Vec<usize>> = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            if !saw_header {
                if content != "wgmesh 1" {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected header `wgmesh 1`, found `{content}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            match tokens.next() {
                Some("v") => {
                    let mut coord = |name: &str| -> Result<f64> {
                        tokens
                            .next()
                            .ok_or_else(|| Error::Parse {
                                line,
                                message: format!("vertex is missing {name}"),
                            })?
                            .parse()
                            .map_err(|_| Error::Parse {
                                line,
                                message: format!("vertex {name} is not a number"),
                            })
                    };
                    let x = coord("x")?;
                    let y = coord("y")?;
                    if tokens.next().is_some() {
                        return Err(Error::Parse {
                            line,
                            message: "trailing tokens after vertex".into(),
                        });
                    }
                    vertices.push(Point2::new(x, y));
                }
                Some("p") => {
                    let count: usize = tokens
                        .next()
                        .ok_or_else(|| Error::Parse {
                            line,
                            message: "polygon is missing its vertex count".into(),
                        })?
                        .parse()
                        .map_err(|_| Error::Parse {
                            line,
                            message: "polygon vertex count is not an integer".into(),
                        })?;
                    let ids: Vec<usize> = tokens
                        .map(|t| {
                            t.parse().map_err(|_| Error::Parse {
                                line,
                                message: format!("polygon index `{t}` is not an integer"),
                            })
                        })
                        .collect::<Result<_>>()?;
                    if ids.len() != count {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "polygon declares {count} vertices but lists {}",
                                ids.len()
                            ),
                        });
                    }
                    polygons.push(ids);
                }
                Some(other) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown statement `{other}`"),
                    });
                }
                None => unreachable!(),
            }
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 1,
                message: "missing `wgmesh 1` header".into(),
            });
        }
        Self::from_polygons(vertices, polygons)
    }

    /// Reads the `wgmesh 1` format from a byte stream.
    pub fn from_reader(mut reader: impl std::io::Read) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_text(&text)
    }

    /// Serializes to the `wgmesh 1` text format with round-trip coordinates.
    pub fn to_text(&self) -> String {
        let mut out = String::from("wgmesh 1\n");
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {}", v.x, v.y);
        }
        for e in &self.elements {
            let _ = write!(out, "p {}", e.vertex_ids.len());
            for &v in &e.vertex_ids {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn element_polygon(&self, elem: usize) -> Vec<Point2<f64>> {
        self.elements[elem]
            .vertex_ids
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Low and high endpoints of an edge in its canonical orientation.
    pub fn edge_endpoints(&self, edge: usize) -> (Point2<f64>, Point2<f64>) {
        let (lo, hi) = self.edges[edge].endpoint_ids;
        (self.vertices[lo], self.vertices[hi])
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary).count()
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }
}

fn grid_vertices(n: usize) -> Vec<Point2<f64>> {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    vertices
}
