//! Batch convergence studies: refinement loops over manufactured solutions,
//! CSV/Markdown emission, and regression against baseline tables.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::cases::{self, ManufacturedCase};
use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::norms::{error_quadruple, observed_order, ErrorQuadruple, OrderQuadruple};
use crate::projection::project_qh;
use crate::solver::{solve_biharmonic, SolvePath, TangentialData};
use crate::weak_deriv::{edge_rule_degree, element_rule_degree, LocalSpaces};

/// Mesh family of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    Tri,
    Rect,
    File,
}

impl MeshFamily {
    pub fn label(self) -> &'static str {
        match self {
            MeshFamily::Tri => "tri",
            MeshFamily::Rect => "rect",
            MeshFamily::File => "file",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tri" => Ok(MeshFamily::Tri),
            "rect" => Ok(MeshFamily::Rect),
            "file" => Ok(MeshFamily::File),
            other => Err(Error::Config(format!(
                "unknown mesh family `{other}` (expected tri, rect, or file)"
            ))),
        }
    }
}

/// Configuration of one convergence study.
pub struct StudyConfig {
    pub case: String,
    pub mesh: MeshFamily,
    /// Strictly increasing grid resolutions (ignored for `MeshFamily::File`).
    pub refinements: Vec<usize>,
    pub k: usize,
    pub mesh_file: Option<PathBuf>,
    /// Suppress wall-clock times so repeated runs emit identical bytes.
    pub deterministic: bool,
    pub path: SolvePath,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<&'static ManufacturedCase> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        let case = cases::by_name(&self.case).ok_or_else(|| {
            Error::Config(format!(
                "unknown case `{}` (available: {})",
                self.case,
                cases::names().join(", ")
            ))
        })?;
        match self.mesh {
            MeshFamily::File => {
                if self.mesh_file.is_none() {
                    return Err(Error::Config(
                        "mesh family `file` needs --mesh-file".into(),
                    ));
                }
            }
            _ => {
                if self.refinements.is_empty() {
                    return Err(Error::Config("no refinement levels given".into()));
                }
                if !self.refinements.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Config(
                        "refinement levels must be strictly increasing".into(),
                    ));
                }
                if self.refinements[0] == 0 {
                    return Err(Error::Config("refinement level 0 is invalid".into()));
                }
            }
        }
        Ok(case)
    }
}

/// One refinement row of a report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub errors: ErrorQuadruple,
    pub orders: OrderQuadruple,
    pub solver_residual: f64,
    pub wall_ms: f64,
}

/// Full study output.
pub struct ConvergenceReport {
    pub case: String,
    pub mesh: String,
    pub k: usize,
    pub rows: Vec<ReportRow>,
    pub element_quadrature_degree: usize,
    pub edge_quadrature_degree: usize,
    pub tangential: TangentialData,
}

/// Runs one study: per refinement level, build the mesh, solve, and measure
/// the four errors against the projected exact solution.
pub fn run_case(config: &StudyConfig) -> Result<ConvergenceReport> {
    let case = config.validate()?;
    let levels: Vec<(usize, PolyMesh)> = match config.mesh {
        MeshFamily::File => {
            let path = config.mesh_file.as_ref().unwrap();
            let text = std::fs::read_to_string(path)?;
            vec![(0, PolyMesh::from_text(&text)?)]
        }
        MeshFamily::Tri => config
            .refinements
            .iter()
            .map(|&n| Ok((n, PolyMesh::uniform_triangles(n)?)))
            .collect::<Result<_>>()?,
        MeshFamily::Rect => config
            .refinements
            .iter()
            .map(|&n| Ok((n, PolyMesh::uniform_rectangles(n)?)))
            .collect::<Result<_>>()?,
    };

    let problem = case.problem();
    let mut rows = Vec::with_capacity(levels.len());
    let mut errors = Vec::with_capacity(levels.len());
    let mut tangential = TangentialData::Analytic;
    for (n, mesh) in &levels {
        let start = Instant::now();
        let spaces = LocalSpaces::build(mesh, config.k).map_err(|e| e.at_refinement(*n))?;
        let out = solve_biharmonic(mesh, &spaces, &problem, config.path)
            .map_err(|e| e.at_refinement(*n))?;
        let qh = project_qh(mesh, &spaces, case.solution, case.gradient);
        let diff = qh.minus(&out.solution);
        let h = if *n == 0 { mesh.h_max } else { 1.0 / *n as f64 };
        let quad = error_quadruple(mesh, &spaces, &diff, h);
        let wall_ms = if config.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64() * 1e3
        };
        tangential = out.tangential;
        errors.push(quad);
        rows.push(ReportRow {
            errors: quad,
            orders: OrderQuadruple::default(),
            solver_residual: out.stats.residual,
            wall_ms,
        });
    }
    for (row, orders) in rows.iter_mut().zip(observed_order(&errors)) {
        row.orders = orders;
    }
    Ok(ConvergenceReport {
        case: config.case.clone(),
        mesh: config.mesh.label().to_string(),
        k: config.k,
        rows,
        element_quadrature_degree: element_rule_degree(config.k),
        edge_quadrature_degree: edge_rule_degree(config.k),
        tangential,
    })
}

pub const CSV_HEADER: &str = "case,mesh,k,h,l2,l2_order,h2,h2_order,ubinf,ubinf_order,uginf,uginf_order,solver_residual,wall_ms";

fn fmt_num(v: f64) -> String {
    format!("{v:.15e}")
}

fn fmt_order(o: Option<f64>) -> String {
    o.map(fmt_num).unwrap_or_default()
}

/// Report output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Markdown),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or md)"
            ))),
        }
    }
}

/// Serializes a report; CSV carries full precision, Markdown mirrors the
/// layout of a printed convergence table.
pub fn emit(report: &ConvergenceReport, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for row in &report.rows {
                let e = &row.errors;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    report.case,
                    report.mesh,
                    report.k,
                    fmt_num(e.h),
                    fmt_num(e.l2),
                    fmt_order(row.orders.l2),
                    fmt_num(e.h2),
                    fmt_order(row.orders.h2),
                    fmt_num(e.ub_inf),
                    fmt_order(row.orders.ub_inf),
                    fmt_num(e.ug_inf),
                    fmt_order(row.orders.ug_inf),
                    fmt_num(row.solver_residual),
                    fmt_num(row.wall_ms),
                );
            }
            out
        }
        Format::Markdown => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "### case `{}` on `{}` meshes, k = {}\n",
                report.case, report.mesh, report.k
            );
            let _ = writeln!(
                out,
                "| h | l2 | order | h2 | order | ub_inf | order | ug_inf | order |"
            );
            let _ = writeln!(out, "|---|----|-------|----|-------|--------|-------|--------|-------|");
            let md_order =
                |o: Option<f64>| o.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
            for row in &report.rows {
                let e = &row.errors;
                let _ = writeln!(
                    out,
                    "| {:.6e} | {:.4e} | {} | {:.4e} | {} | {:.4e} | {} | {:.4e} | {} |",
                    e.h,
                    e.l2,
                    md_order(row.orders.l2),
                    e.h2,
                    md_order(row.orders.h2),
                    e.ub_inf,
                    md_order(row.orders.ub_inf),
                    e.ug_inf,
                    md_order(row.orders.ug_inf),
                );
            }
            out
        }
    }
}

/// One parsed CSV row. Error and order cells may be blank in baseline
/// fixtures (the reference tables do not print every column for every case);
/// blank cells are never compared.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub case: String,
    pub mesh: String,
    pub k: usize,
    pub h: f64,
    pub errors: [Option<f64>; 4],
    pub orders: [Option<f64>; 4],
    pub solver_residual: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// Parses the CSV schema emitted by [`emit`]; blank numeric cells become
/// `None` and lines starting with `#` are skipped (fixture annotations).
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !(l.trim().is_empty() || l.trim_start().starts_with('#')));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema("empty report".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Schema(format!(
            "unexpected header `{}`",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 14 {
            return Err(Error::Schema(format!(
                "line {}: expected 14 cells, found {}",
                idx + 1,
                cells.len()
            )));
        }
        let num = |cell: &str, name: &str| -> Result<f64> {
            cell.parse().map_err(|_| {
                Error::Schema(format!("line {}: bad number in {name}: `{cell}`", idx + 1))
            })
        };
        let opt = |cell: &str, name: &str| -> Result<Option<f64>> {
            if cell.is_empty() {
                Ok(None)
            } else {
                num(cell, name).map(Some)
            }
        };
        rows.push(CsvRow {
            case: cells[0].to_string(),
            mesh: cells[1].to_string(),
            k: num(cells[2], "k")? as usize,
            h: num(cells[3], "h")?,
            errors: [
                opt(cells[4], "l2")?,
                opt(cells[6], "h2")?,
                opt(cells[8], "ubinf")?,
                opt(cells[10], "uginf")?,
            ],
            orders: [
                opt(cells[5], "l2_order")?,
                opt(cells[7], "h2_order")?,
                opt(cells[9], "ubinf_order")?,
                opt(cells[11], "uginf_order")?,
            ],
            solver_residual: opt(cells[12], "solver_residual")?,
            wall_ms: opt(cells[13], "wall_ms")?,
        });
    }
    Ok(rows)
}

/// Per-column comparison tolerances for regression checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative tolerance for the l2 and h2 error columns.
    pub rel_l2_h2: f64,
    /// Relative tolerance for the edge max-norm columns.
    pub rel_inf: f64,
    /// Absolute tolerance for order columns.
    pub order_abs: f64,
    /// Errors below this are all considered solver noise and equal.
    pub noise_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_l2_h2: 0.05,
            rel_inf: 0.15,
            order_abs: 0.15,
            noise_floor: 1e-8,
        }
    }
}

/// One failed cell of a regression comparison.
#[derive(Debug, Clone)]
pub struct CellDiff {
    pub case: String,
    pub mesh: String,
    pub h: f64,
    pub measure: &'static str,
    pub got: f64,
    pub want: f64,
    pub tolerance: String,
}

impl std::fmt::Display for CellDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, h={:.6e}, {}): got {:.6e}, baseline {:.6e} (tolerance {})",
            self.case, self.mesh, self.h, self.measure, self.got, self.want, self.tolerance
        )
    }
}

/// Outcome of a regression comparison.
pub struct RegressOutcome {
    pub compared_cells: usize,
    pub diffs: Vec<CellDiff>,
}

impl RegressOutcome {
    pub fn pass(&self) -> bool {
        self.diffs.is_empty()
    }
}

const MEASURES: [&str; 4] = ["l2", "h2", "ubinf", "uginf"];

/// Compares a report against a baseline CSV cell by cell. Rows are matched on
/// (case, mesh, k, h); rows with h = 1 are skipped (single-element levels are
/// sensitive to boundary conventions); order cells compare only where both
/// sides define them; residual and timing columns are never compared.
pub fn regress(report: &[CsvRow], baseline: &[CsvRow], tol: &Tolerances) -> RegressOutcome {
    let mut compared = 0;
    let mut diffs = Vec::new();
    // Order cells are ratios against the previous baseline row; when that row
    // is skipped (or absent from the report) they are not comparable.
    let mut prev_row_compared = false;
    for base in baseline {
        if base.h == 1.0 {
            prev_row_compared = false;
            continue;
        }
        let Some(row) = report.iter().find(|r| {
            r.case == base.case && r.mesh == base.mesh && r.k == base.k
                && (r.h - base.h).abs() <= 1e-12 * base.h
        }) else {
            prev_row_compared = false;
            continue;
        };
        let orders_comparable = prev_row_compared;
        prev_row_compared = true;
        for (m, &measure) in MEASURES.iter().enumerate() {
            if let (Some(got), Some(want)) = (row.errors[m], base.errors[m]) {
                let rel = if m < 2 { tol.rel_l2_h2 } else { tol.rel_inf };
                if got.abs().max(want.abs()) <= tol.noise_floor {
                    // Solver noise: neither the cell nor its order matters.
                    continue;
                }
                compared += 1;
                if (got - want).abs() > rel * want.abs() {
                    diffs.push(CellDiff {
                        case: base.case.clone(),
                        mesh: base.mesh.clone(),
                        h: base.h,
                        measure,
                        got,
                        want,
                        tolerance: format!("{:.0}% relative", rel * 100.0),
                    });
                }
            }
            if !orders_comparable {
                continue;
            }
            if let (Some(got_o), Some(want_o)) = (row.orders[m], base.orders[m]) {
                compared += 1;
                if (got_o - want_o).abs() > tol.order_abs {
                    diffs.push(CellDiff {
                        case: base.case.clone(),
                        mesh: base.mesh.clone(),
                        h: base.h,
                        measure: match m {
                            0 => "l2_order",
                            1 => "h2_order",
                            2 => "ubinf_order",
                            _ => "uginf_order",
                        },
                        got: got_o,
                        want: want_o,
                        tolerance: format!("{:.2} absolute", tol.order_abs),
                    });
                }
            }
        }
    }
    RegressOutcome {
        compared_cells: compared,
        diffs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(case: &str, mesh: MeshFamily, ns: &[usize]) -> StudyConfig {
        StudyConfig {
            case: case.into(),
            mesh,
            refinements: ns.to_vec(),
            k: 2,
            mesh_file: None,
            deterministic: true,
            path: SolvePath::Condensed,
        }
    }

    #[test]
    fn quadratic_case_is_reproduced_to_solver_noise() {
        let report = run_case(&small_config("quad", MeshFamily::Tri, &[2, 4, 8])).unwrap();
        for row in &report.rows {
            let e = &row.errors;
            assert!(e.l2 <= 1e-8 && e.h2 <= 1e-8 && e.ub_inf <= 1e-8 && e.ug_inf <= 1e-8);
        }
    }

    #[test]
    fn bubble_orders_move_toward_two_and_one() {
        let report = run_case(&small_config("bubble", MeshFamily::Tri, &[4, 8, 16])).unwrap();
        let last = report.rows.last().unwrap();
        let l2 = last.orders.l2.unwrap();
        let h2 = last.orders.h2.unwrap();
        assert!((1.6..2.2).contains(&l2), "l2 order {l2}");
        assert!((0.7..1.2).contains(&h2), "h2 order {h2}");
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = small_config("quad", MeshFamily::Tri, &[4, 2]);
        assert!(run_case(&c).is_err());
        c.refinements = vec![0, 2];
        assert!(run_case(&c).is_err());
        c.refinements = vec![2];
        c.case = "nonsense".into();
        assert!(run_case(&c).is_err());
        let mut c = small_config("quad", MeshFamily::File, &[]);
        assert!(matches!(run_case(&c), Err(Error::Config(_))));
        c.mesh_file = Some("/definitely/not/here.wgmesh".into());
        assert!(matches!(run_case(&c), Err(Error::Io(_))));
    }

    #[test]
    fn empty_report_emits_header_only() {
        let report = ConvergenceReport {
            case: "quad".into(),
            mesh: "tri".into(),
            k: 2,
            rows: vec![],
            element_quadrature_degree: 6,
            edge_quadrature_degree: 4,
            tangential: TangentialData::Analytic,
        };
        let csv = emit(&report, Format::Csv);
        assert_eq!(csv.trim(), CSV_HEADER);
        assert!(parse_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_preserves_full_precision() {
        let report = run_case(&small_config("bubble", MeshFamily::Rect, &[2, 3, 4])).unwrap();
        let csv = emit(&report, Format::Csv);
        // Three data lines; order cells blank in the first.
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(",,"));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), report.rows.len());
        for (parsed, row) in rows.iter().zip(&report.rows) {
            let e = &row.errors;
            for (got, want) in parsed
                .errors
                .iter()
                .zip([e.l2, e.h2, e.ub_inf, e.ug_inf])
            {
                let got = got.unwrap();
                assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0));
            }
            match (parsed.orders[0], row.orders.l2) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0)),
                (None, None) => {}
                other => panic!("order mismatch: {other:?}"),
            }
        }
    }

    #[test]
    fn markdown_table_has_one_line_per_row() {
        let report = run_case(&small_config("quad", MeshFamily::Rect, &[1, 2])).unwrap();
        let md = emit(&report, Format::Markdown);
        assert_eq!(md.trim().lines().count(), 2 + 2 + report.rows.len());
        assert!(md.contains("| -"));
    }

    #[test]
    fn deterministic_runs_emit_identical_bytes() {
        let config = small_config("trig", MeshFamily::Tri, &[2, 4]);
        let a = emit(&run_case(&config).unwrap(), Format::Csv);
        let b = emit(&run_case(&config).unwrap(), Format::Csv);
        assert_eq!(a, b);
    }

    #[test]
    fn regress_passes_against_itself_and_flags_tampering() {
        let report = run_case(&small_config("bubble", MeshFamily::Tri, &[2, 4])).unwrap();
        let csv = emit(&report, Format::Csv);
        let rows = parse_csv(&csv).unwrap();
        let outcome = regress(&rows, &rows, &Tolerances::default());
        assert!(outcome.pass());
        assert!(outcome.compared_cells > 0);

        let mut tampered = rows.clone();
        tampered[1].errors[1] = tampered[1].errors[1].map(|v| v * 1.5);
        let outcome = regress(&tampered, &rows, &Tolerances::default());
        assert!(!outcome.pass());
        assert_eq!(outcome.diffs.len(), 1);
        let diff = &outcome.diffs[0];
        assert_eq!(diff.measure, "h2");
        assert_eq!(diff.case, "bubble");
        assert!((diff.h - 0.25).abs() < 1e-12);
    }

    #[test]
    fn regress_skips_unit_h_rows_and_noise() {
        let report = run_case(&small_config("quad", MeshFamily::Tri, &[1, 2])).unwrap();
        let rows = parse_csv(&emit(&report, Format::Csv)).unwrap();
        // All quad errors are solver noise; nothing is compared, nothing fails.
        let outcome = regress(&rows, &rows, &Tolerances::default());
        assert!(outcome.pass());
        assert_eq!(outcome.compared_cells, 0);
    }

    #[test]
    fn mesh_file_study_runs_single_level() {
        let mesh = PolyMesh::uniform_rectangles(2).unwrap();
        let dir = std::env::temp_dir().join("wgbh-study-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("square2.wgmesh");
        std::fs::write(&path, mesh.to_text()).unwrap();
        let config = StudyConfig {
            case: "quad".into(),
            mesh: MeshFamily::File,
            refinements: vec![],
            k: 2,
            mesh_file: Some(path),
            deterministic: true,
            path: SolvePath::Condensed,
        };
        let report = run_case(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].errors.l2 < 1e-9);
        assert!((report.rows[0].errors.h - mesh.h_max).abs() < 1e-15);
    }
}
