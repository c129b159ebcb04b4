//! Experiment driver: sweeps, CSV/VTK output, exit codes.
//!
//! Output layout in the output directory:
//!
//! - `steps_NNN.csv` per sweep point (NNN = sweep index), one row per step;
//! - `residuals_NNN.csv` when `output.residual_csv` is set;
//! - `m_NNN_SSSSS.vtk` snapshots when `output.vtk_every > 0`;
//! - `summary.csv`, one row per completed sweep point, rewritten after each
//!   point so it survives a later failure.
//!
//! Everything except the `wall_time_s` column is deterministic.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ExperimentConfig, SweepPoint};
use crate::error::{Error, Result};
use crate::field::MagnetizationField;
use crate::gmres::SolverStats;
use crate::mesh::Mesh;
use crate::scheme::{num_steps, run_simulation, RunSummary, StepReport, Stepper};

pub const STEP_HEADER: &str = "step,t,gmres_iterations,restarts,final_residual,gamma,d_adapt,exchange_energy";
pub const SUMMARY_HEADER: &str = "h,k,precond,alpha,alpha_p,tn_mode,avg_iterations,max_iterations,steps,wall_time_s";
pub const RESIDUAL_HEADER: &str = "step,iteration,residual";

/// Process exit code for an error: 2 for configuration/input problems,
/// 3 for solver failures, 1 for output I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidMesh(_)
        | Error::BadElement { .. }
        | Error::MeshParse(_)
        | Error::DimensionMismatch { .. }
        | Error::NotUnit { .. } => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub index: usize,
    pub h: f64,
    pub k: f64,
    pub precond: String,
    pub alpha: f64,
    pub alpha_p: f64,
    pub tn_mode: String,
    pub run: RunSummary,
    pub wall_time_s: f64,
}

impl PointSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.h,
            self.k,
            self.precond,
            self.alpha,
            self.alpha_p,
            self.tn_mode,
            self.run.avg_iterations,
            self.run.max_iterations,
            self.run.steps,
            self.wall_time_s
        )
    }
}

pub fn step_row(report: &StepReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        report.step,
        report.t,
        report.stats.iterations,
        report.stats.restarts,
        report.stats.final_relative_residual,
        report.selection.gamma,
        report.selection.d_chosen(),
        report.exchange_energy
    )
}

/// Rows `step,iteration,residual`; iteration 0 is the initial residual.
pub fn residual_rows(step: usize, stats: &SolverStats) -> Vec<String> {
    std::iter::once(stats.initial_residual)
        .chain(stats.residual_history.iter().copied())
        .enumerate()
        .map(|(i, r)| format!("{step},{i},{r}"))
        .collect()
}

/// Legacy ASCII VTK unstructured grid with the nodal vector field `m`.
pub fn write_vtk<W: Write>(mesh: &Mesh, m: &MagnetizationField, mut w: W) -> Result<()> {
    if m.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch { expected: mesh.num_nodes(), got: m.len() });
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "magnetization")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    let ne = mesh.num_elements();
    writeln!(w, "CELLS {} {}", ne, 5 * ne)?;
    for t in mesh.tets() {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "10")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
    writeln!(w, "VECTORS m double")?;
    for v in m.values() {
        writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Where relative mesh paths are resolved and where output lands.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub config_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
}

fn write_summary(out: &Path, rows: &[PointSummary]) -> Result<()> {
    let mut w = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one sweep point, streaming its per-step output.
pub fn run_point(point: &SweepPoint, paths: &RunPaths) -> Result<PointSummary> {
    let cfg = &point.config;
    let idx = point.index;
    let start = Instant::now();
    let space = cfg.build_space(paths.config_dir.as_deref())?;
    let m0 = cfg.initial.build(space.mesh().nodes())?;
    let steps = num_steps(cfg.t_final, cfg.k)?;
    let mut stepper = Stepper::new(
        space.clone(),
        cfg.coefficients()?,
        cfg.k,
        cfg.field.pi.clone(),
        cfg.field.applied.clone(),
        cfg.settings(),
    )?;

    let out = &paths.out_dir;
    let mut steps_csv = BufWriter::new(File::create(out.join(format!("steps_{idx:03}.csv")))?);
    writeln!(steps_csv, "{STEP_HEADER}")?;
    let mut residual_csv = if cfg.output.residual_csv {
        let mut w = BufWriter::new(File::create(out.join(format!("residuals_{idx:03}.csv")))?);
        writeln!(w, "{RESIDUAL_HEADER}")?;
        Some(w)
    } else {
        None
    };
    let vtk_every = cfg.output.vtk_every;
    let snapshot = |step: usize, m: &MagnetizationField| -> Result<()> {
        let f = File::create(out.join(format!("m_{idx:03}_{step:05}.vtk")))?;
        write_vtk(space.mesh(), m, BufWriter::new(f))
    };
    if vtk_every > 0 {
        snapshot(0, &m0)?;
    }

    let result = run_simulation(&mut stepper, m0, steps, &mut |state, report| {
        writeln!(steps_csv, "{}", step_row(report))?;
        steps_csv.flush()?;
        if let Some(w) = residual_csv.as_mut() {
            for row in residual_rows(report.step, &report.stats) {
                writeln!(w, "{row}")?;
            }
            w.flush()?;
        }
        if vtk_every > 0 && state.n % vtk_every == 0 {
            snapshot(state.n, &state.m)?;
        }
        Ok(())
    });
    let (_, run) = result?;
    Ok(PointSummary {
        index: idx,
        h: space.mesh().quality().h,
        k: cfg.k,
        precond: cfg.precond.kind.name().to_string(),
        alpha: cfg.alpha,
        alpha_p: cfg.precond.alpha_p,
        tn_mode: cfg.frame.tn.name().to_string(),
        run,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every sweep point in order. On failure the summary of the points
/// completed so far is kept on disk and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, paths: &RunPaths) -> Result<Vec<PointSummary>> {
    cfg.validate()?;
    std::fs::create_dir_all(&paths.out_dir)?;
    let mut rows = Vec::new();
    write_summary(&paths.out_dir, &rows)?;
    for point in cfg.sweep_points() {
        let row = run_point(&point, paths)?;
        rows.push(row);
        write_summary(&paths.out_dir, &rows)?;
    }
    Ok(rows)
}
