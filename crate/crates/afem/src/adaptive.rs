//! The solve -> estimate -> mark -> refine loop with the max marking
//! strategy, plus run records, rate fitting, and the CSV interface.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::coupled::{picard_solve, CoupledState, PicardOptions, SolveError};
use crate::estimator::{compute_indicators, EstimatorError, IndicatorField};
use crate::fem::ProblemData;
use crate::mesh::{Mesh, MeshError};

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("adaptive iteration {0}: {1}")]
    SolveFailed(usize, SolveError),
    #[error("adaptive iteration {0}: {1}")]
    EstimateFailed(usize, EstimatorError),
    #[error("adaptive iteration {0}: {1}")]
    RefineFailed(usize, MeshError),
    #[error("rate fit needs at least {0} rows, record has {1}")]
    InsufficientRows(usize, usize),
    #[error("invalid record file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the adaptive run log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunRow {
    pub iter: usize,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub ndof: usize,
    pub est_heat: f64,
    pub est_darcy: f64,
    pub est_total: f64,
    pub picard_iters: usize,
    pub marked: usize,
}

/// Per-iteration log of an adaptive run. The configuration snapshot is
/// carried as comment lines in the CSV output.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub config: Vec<String>,
}

pub const CSV_HEADER: &str = "iter,nv,nt,ndof,est_heat,est_darcy,est_total,picard_iters,marked";

impl RunRecord {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), AdaptiveError> {
        for line in &self.config {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
                r.iter,
                r.n_vertices,
                r.n_triangles,
                r.ndof,
                r.est_heat,
                r.est_darcy,
                r.est_total,
                r.picard_iters,
                r.marked
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: &mut R) -> Result<RunRecord, AdaptiveError> {
        let mut record = RunRecord::default();
        let mut saw_header = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                record.config.push(comment.trim().to_string());
                continue;
            }
            if !saw_header {
                if line != CSV_HEADER {
                    return Err(AdaptiveError::Parse(format!("unexpected header: {line}")));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(AdaptiveError::Parse(format!("bad row: {line}")));
            }
            let parse_u = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| AdaptiveError::Parse(format!("bad integer: {s}")))
            };
            let parse_f = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| AdaptiveError::Parse(format!("bad float: {s}")))
            };
            record.rows.push(RunRow {
                iter: parse_u(fields[0])?,
                n_vertices: parse_u(fields[1])?,
                n_triangles: parse_u(fields[2])?,
                ndof: parse_u(fields[3])?,
                est_heat: parse_f(fields[4])?,
                est_darcy: parse_f(fields[5])?,
                est_total: parse_f(fields[6])?,
                picard_iters: parse_u(fields[7])?,
                marked: parse_u(fields[8])?,
            });
        }
        if !saw_header {
            return Err(AdaptiveError::Parse("missing header".into()));
        }
        Ok(record)
    }
}

/// Max marking: elements whose indicator exceeds half the maximum. The
/// arg-max element is always included; all-zero indicators mark nothing.
pub fn mark_max(indicators: &[f64]) -> Vec<usize> {
    let max = indicators.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return Vec::new();
    }
    let threshold = 0.5 * max;
    (0..indicators.len())
        .filter(|&k| indicators[k] > threshold)
        .collect()
}

/// Total unknown count: velocity (2 per element) + pressure (all vertices)
/// + temperature (interior vertices) + the zero-mean multiplier.
pub fn ndof(mesh: &Mesh) -> usize {
    2 * mesh.n_triangles() + mesh.n_vertices() + mesh.n_interior_vertices() + 1
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOptions {
    pub n_iterations: usize,
    pub picard: PicardOptions,
}

/// Final state of an adaptive run.
pub struct AdaptiveRun {
    pub record: RunRecord,
    pub mesh: Mesh,
    pub state: CoupledState,
    pub indicators: IndicatorField,
}

/// Runs `n_iterations` rounds of solve/estimate/mark/refine, invoking
/// `on_iteration` after every solve (including the initial one).
pub fn adaptive_loop_with<F>(
    initial_mesh: &Mesh,
    data: &ProblemData,
    opts: &AdaptiveOptions,
    mut on_iteration: F,
) -> Result<AdaptiveRun, AdaptiveError>
where
    F: FnMut(usize, &Mesh, &CoupledState, &IndicatorField),
{
    let mut mesh = initial_mesh.clone();
    let mut record = RunRecord::default();

    for iter in 0..=opts.n_iterations {
        let state = picard_solve(&mesh, data, &opts.picard)
            .map_err(|e| AdaptiveError::SolveFailed(iter, e))?;
        let indicators = compute_indicators(&mesh, &state, data, opts.picard.quad_degree)
            .map_err(|e| AdaptiveError::EstimateFailed(iter, e))?;
        on_iteration(iter, &mesh, &state, &indicators);

        let marked = mark_max(&indicators.total_local);
        record.rows.push(RunRow {
            iter,
            n_vertices: mesh.n_vertices(),
            n_triangles: mesh.n_triangles(),
            ndof: ndof(&mesh),
            est_heat: indicators.heat_global,
            est_darcy: indicators.darcy_global,
            est_total: indicators.total_global,
            picard_iters: state.picard_iters,
            marked: marked.len(),
        });

        if iter == opts.n_iterations || marked.is_empty() {
            return Ok(AdaptiveRun {
                record,
                mesh,
                state,
                indicators,
            });
        }
        mesh = mesh
            .longest_edge_bisect(&marked)
            .map_err(|e| AdaptiveError::RefineFailed(iter, e))?;
    }
    unreachable!("loop always returns at the final iteration");
}

pub fn adaptive_loop(
    initial_mesh: &Mesh,
    data: &ProblemData,
    opts: &AdaptiveOptions,
) -> Result<AdaptiveRun, AdaptiveError> {
    adaptive_loop_with(initial_mesh, data, opts, |_, _, _, _| {})
}

/// Least-squares slope of `log(est_total)` vs `log(ndof)` over the last
/// `tail` rows of the record.
pub fn fit_rate(record: &RunRecord, tail: usize) -> Result<f64, AdaptiveError> {
    if tail < 2 || record.rows.len() < tail + 1 {
        return Err(AdaptiveError::InsufficientRows(
            tail.max(2) + 1,
            record.rows.len(),
        ));
    }
    let rows = &record.rows[record.rows.len() - tail..];
    if rows.iter().any(|r| r.est_total <= 0.0) {
        return Err(AdaptiveError::Parse(
            "estimator values must be positive for rate fitting".into(),
        ));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.ndof as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.est_total.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
