//! Python bindings for the weak Galerkin biharmonic solver.
//!
//! Exposes the mesh type, weak finite element functions, single solves of the
//! built-in manufactured cases, and whole convergence studies. Build as a
//! cdylib and import as `wgbh_py` (see `python/smoke_test.py`).

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wgbh::cases;
use wgbh::error::Error;
use wgbh::mesh::PolyMesh;
use wgbh::norms::{error_quadruple, l2_norm, triple_bar_norm};
use wgbh::projection::project_qh;
use wgbh::solver::{solve_biharmonic, SolvePath};
use wgbh::study::{self, Format, MeshFamily, StudyConfig};
use wgbh::weak_deriv::{LocalSpaces, WeakFunction};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Immutable polygonal mesh.
#[pyclass(name = "PolyMesh", frozen)]
struct PyPolyMesh {
    inner: Arc<PolyMesh>,
}

#[pymethods]
impl PyPolyMesh {
    /// Uniform triangulation of the unit square (negative-slope diagonals).
    #[staticmethod]
    fn uniform_triangles(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(PolyMesh::uniform_triangles(n).map_err(to_py_err)?),
        })
    }

    /// Uniform n x n square mesh of the unit square.
    #[staticmethod]
    fn uniform_rectangles(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(PolyMesh::uniform_rectangles(n).map_err(to_py_err)?),
        })
    }

    /// Parse a mesh in the `wgmesh 1` text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(PolyMesh::from_text(text).map_err(to_py_err)?),
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.vertices.len()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.elements.len()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.edges.len()
    }

    #[getter]
    fn num_interior_edges(&self) -> usize {
        self.inner.num_interior_edges()
    }

    #[getter]
    fn h_max(&self) -> f64 {
        self.inner.h_max
    }

    #[getter]
    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn __repr__(&self) -> String {
        format!(
            "PolyMesh(elements={}, edges={}, vertices={}, h_max={:.6})",
            self.inner.elements.len(),
            self.inner.edges.len(),
            self.inner.vertices.len(),
            self.inner.h_max
        )
    }
}

/// Weak finite element function: per-element interior coefficients plus
/// per-edge trace and gradient-trace coefficients.
#[pyclass(name = "WeakFunction", frozen)]
struct PyWeakFunction {
    mesh: Arc<PolyMesh>,
    inner: WeakFunction,
}

#[pymethods]
impl PyWeakFunction {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    /// Coefficients of the interior polynomial of one element (scaled
    /// monomial basis centered at the element centroid).
    fn interior_coeffs(&self, elem: usize) -> PyResult<Vec<f64>> {
        if elem >= self.mesh.elements.len() {
            return Err(PyValueError::new_err("element index out of range"));
        }
        Ok(self.inner.interior_coeffs(elem).to_vec())
    }

    /// Legendre coefficients of the trace polynomial on one edge.
    fn trace_coeffs(&self, edge: usize) -> PyResult<Vec<f64>> {
        if edge >= self.mesh.edges.len() {
            return Err(PyValueError::new_err("edge index out of range"));
        }
        Ok(self.inner.trace_coeffs(edge).to_vec())
    }

    /// Legendre coefficients of one gradient-trace component (0 = x, 1 = y).
    fn grad_coeffs(&self, edge: usize, comp: usize) -> PyResult<Vec<f64>> {
        if edge >= self.mesh.edges.len() || comp > 1 {
            return Err(PyValueError::new_err(
                "edge index or component out of range",
            ));
        }
        Ok(self.inner.grad_coeffs(edge, comp).to_vec())
    }

    /// Discrete H2 triple-bar norm of this function.
    fn triple_bar_norm(&self) -> PyResult<f64> {
        let spaces = LocalSpaces::build(&self.mesh, self.inner.k).map_err(to_py_err)?;
        Ok(triple_bar_norm(&self.mesh, &spaces, &self.inner))
    }

    /// Element-based L2 norm of the interior block.
    fn l2_norm(&self) -> PyResult<f64> {
        let spaces = LocalSpaces::build(&self.mesh, self.inner.k).map_err(to_py_err)?;
        Ok(l2_norm(&self.mesh, &spaces, &self.inner))
    }
}

/// Result of one biharmonic solve against a manufactured case.
#[pyclass(name = "SolveOutcome", frozen)]
struct PySolveOutcome {
    #[pyo3(get)]
    l2: f64,
    #[pyo3(get)]
    h2: f64,
    #[pyo3(get)]
    ub_inf: f64,
    #[pyo3(get)]
    ug_inf: f64,
    #[pyo3(get)]
    solver_residual: f64,
    #[pyo3(get)]
    free_dofs: usize,
    solution: Py<PyWeakFunction>,
}

#[pymethods]
impl PySolveOutcome {
    /// The discrete solution as a WeakFunction.
    #[getter]
    fn solution(&self, py: Python<'_>) -> Py<PyWeakFunction> {
        self.solution.clone_ref(py)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveOutcome(l2={:.3e}, h2={:.3e}, ub_inf={:.3e}, ug_inf={:.3e}, residual={:.1e})",
            self.l2, self.h2, self.ub_inf, self.ug_inf, self.solver_residual
        )
    }
}

/// Names of the built-in manufactured solutions.
#[pyfunction]
fn case_names() -> Vec<&'static str> {
    cases::names()
}

/// Solves one manufactured case on a mesh and reports the four error
/// measures against the projected exact solution.
#[pyfunction]
#[pyo3(signature = (case, mesh, k = 2, condensed = true))]
fn solve_case(
    py: Python<'_>,
    case: &str,
    mesh: &PyPolyMesh,
    k: usize,
    condensed: bool,
) -> PyResult<PySolveOutcome> {
    let case = cases::by_name(case)
        .ok_or_else(|| PyValueError::new_err(format!("unknown case `{case}`")))?;
    let mesh_arc = Arc::clone(&mesh.inner);
    let spaces = LocalSpaces::build(&mesh_arc, k).map_err(to_py_err)?;
    let path = if condensed {
        SolvePath::Condensed
    } else {
        SolvePath::Full
    };
    let out = solve_biharmonic(&mesh_arc, &spaces, &case.problem(), path).map_err(to_py_err)?;
    let qh = project_qh(&mesh_arc, &spaces, case.solution, case.gradient);
    let diff = qh.minus(&out.solution);
    let errors = error_quadruple(&mesh_arc, &spaces, &diff, mesh_arc.h_max);
    let solution = Py::new(
        py,
        PyWeakFunction {
            mesh: mesh_arc,
            inner: out.solution,
        },
    )?;
    Ok(PySolveOutcome {
        l2: errors.l2,
        h2: errors.h2,
        ub_inf: errors.ub_inf,
        ug_inf: errors.ug_inf,
        solver_residual: out.stats.residual,
        free_dofs: out.free_dofs,
        solution,
    })
}

/// One refinement row of a convergence study.
#[pyclass(name = "StudyRow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStudyRow {
    #[pyo3(get)]
    h: f64,
    #[pyo3(get)]
    l2: f64,
    #[pyo3(get)]
    h2: f64,
    #[pyo3(get)]
    ub_inf: f64,
    #[pyo3(get)]
    ug_inf: f64,
    #[pyo3(get)]
    l2_order: Option<f64>,
    #[pyo3(get)]
    h2_order: Option<f64>,
    #[pyo3(get)]
    ub_inf_order: Option<f64>,
    #[pyo3(get)]
    ug_inf_order: Option<f64>,
    #[pyo3(get)]
    solver_residual: f64,
    #[pyo3(get)]
    wall_ms: f64,
}

/// Full convergence report of one study.
#[pyclass(name = "StudyReport", frozen)]
struct PyStudyReport {
    inner: study::ConvergenceReport,
}

#[pymethods]
impl PyStudyReport {
    #[getter]
    fn case(&self) -> &str {
        &self.inner.case
    }

    #[getter]
    fn mesh(&self) -> &str {
        &self.inner.mesh
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn rows(&self) -> Vec<PyStudyRow> {
        self.inner
            .rows
            .iter()
            .map(|r| PyStudyRow {
                h: r.errors.h,
                l2: r.errors.l2,
                h2: r.errors.h2,
                ub_inf: r.errors.ub_inf,
                ug_inf: r.errors.ug_inf,
                l2_order: r.orders.l2,
                h2_order: r.orders.h2,
                ub_inf_order: r.orders.ub_inf,
                ug_inf_order: r.orders.ug_inf,
                solver_residual: r.solver_residual,
                wall_ms: r.wall_ms,
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        study::emit(&self.inner, Format::Csv)
    }

    fn to_markdown(&self) -> String {
        study::emit(&self.inner, Format::Markdown)
    }
}

/// Runs a convergence study over a list of grid resolutions.
#[pyfunction]
#[pyo3(signature = (case, mesh, refinements, k = 2, deterministic = true))]
fn run_study(
    case: &str,
    mesh: &str,
    refinements: Vec<usize>,
    k: usize,
    deterministic: bool,
) -> PyResult<PyStudyReport> {
    let config = StudyConfig {
        case: case.into(),
        mesh: MeshFamily::parse(mesh).map_err(to_py_err)?,
        refinements,
        k,
        mesh_file: None,
        deterministic,
        path: SolvePath::Condensed,
    };
    Ok(PyStudyReport {
        inner: study::run_case(&config).map_err(to_py_err)?,
    })
}

#[pymodule]
fn wgbh_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolyMesh>()?;
    m.add_class::<PyWeakFunction>()?;
    m.add_class::<PySolveOutcome>()?;
    m.add_class::<PyStudyRow>()?;
    m.add_class::<PyStudyReport>()?;
    m.add_function(wrap_pyfunction!(case_names, m)?)?;
    m.add_function(wrap_pyfunction!(solve_case, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
