use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use vmsflow::linalg::write_matrix_market;
use vmsflow::navier_stokes::{NonlinearConfig, TimeStepConfig, STEP_CSV_HEADER};
use vmsflow::oseen::OseenStabilization;
use vmsflow::verification::{
    ns_cavity_jacobian, oseen_cavity_system, run_pe_sweep, run_study, solve_ns_cavity, solve_oseen_cavity,
    solve_taylor_green, ConvergenceReport, ErrorColumn, NsCavityConfig, OseenCaseConfig, PeSweepReport, SolvedCase,
    TaylorGreenConfig,
};

use crate::args::{Band, RunConfig, Study};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot write to {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Serialize)]
pub struct MeshRecord {
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_h1_u: f64,
    /// Time step of unsteady runs.
    pub dt: Option<f64>,
    pub iterations: usize,
    pub divergence_residual: f64,
    pub wall_s: f64,
}

#[derive(Debug, Serialize)]
pub struct StudyRecord {
    pub label: String,
    pub files: Vec<String>,
    pub meshes: Vec<MeshRecord>,
    pub fitted_rate_h1_u: Option<f64>,
    pub band: Option<Band>,
    /// Rate inside its band, or for sweeps the plateau and Galerkin-growth checks.
    pub within_band: Option<bool>,
    pub error: Option<String>,
    pub wall_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub solver_version: &'static str,
    pub argv: Vec<String>,
    pub config: &'a RunConfig,
    pub studies: Vec<StudyRecord>,
    pub total_wall_s: f64,
    pub exit_code: u8,
}

struct Writer<'a> {
    dir: &'a Path,
}

impl Writer<'_> {
    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn text(&self, file: &str, body: &str) -> Result<(), RunError> {
        let path = self.path(file);
        fs::write(&path, body).map_err(|source| RunError::Io { path, source })
    }
}

/// Creates the output directory and checks that it accepts files.
pub fn prepare_output(dir: &Path) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: dir.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(io)?;
    let probe = dir.join(".vmsflow-write-probe");
    fs::write(&probe, b"").map_err(io)?;
    fs::remove_file(&probe).map_err(io)
}

fn mesh_records(cases: &[SolvedCase], dt_ratio: Option<(f64, f64)>) -> Vec<MeshRecord> {
    cases
        .iter()
        .map(|c| {
            let row = c.row();
            MeshRecord {
                n: row.n,
                h: row.h,
                ndof: row.ndof,
                err_h1_u: row.err_h1_u,
                dt: dt_ratio.and_then(|(ratio, t)| {
                    TimeStepConfig::covering(t, ratio * row.h, NonlinearConfig::unsteady()).ok().map(|c| c.dt)
                }),
                iterations: c.iterations,
                divergence_residual: c.divergence_residual,
                wall_s: row.wall_s,
            }
        })
        .collect()
}

fn report_rate(label: &str, report: &ConvergenceReport, band: Band) -> (Option<f64>, Option<bool>) {
    let rate = report.fitted_rate(ErrorColumn::H1Velocity).ok();
    let ok = rate.map(|r| band.rate_band().contains(r));
    match rate {
        Some(r) => println!("{label}: fitted H1 rate {r:.3} ({}, band {})", if ok == Some(true) { "ok" } else { "outside" }, band.rate_band()),
        None => println!("{label}: no rate (fewer than two meshes solved)"),
    }
    (rate, ok)
}

fn convergence<F>(cfg: &RunConfig, w: &Writer, study: &Study, band: Band, dt: Option<(f64, f64)>, solve: F) -> Result<StudyRecord, RunError>
where
    F: Fn(usize) -> vmsflow::Result<SolvedCase> + Sync,
{
    let start = Instant::now();
    let label = study.label();
    let meshes = match study {
        Study::OseenCavity { meshes, .. } | Study::NsCavity { meshes, .. } | Study::TaylorGreen { meshes, .. } => meshes,
        Study::PeSweep { .. } => unreachable!("sweeps are not convergence studies"),
    };
    let (report, cases, error) = match run_study(&label, meshes, cfg.jobs, solve) {
        Ok((r, c)) => (r, c, None),
        Err((r, e)) => (r, Vec::new(), Some(e.to_string())),
    };
    let csv = format!("{label}.csv");
    w.text(&csv, &report.to_csv())?;
    let mut files = vec![csv];
    if dt.is_some() {
        for c in &cases {
            let name = format!("{label}-n{}-steps.csv", c.space.mesh().n_per_side());
            let mut body = String::from(STEP_CSV_HEADER);
            body.push('\n');
            for s in &c.steps {
                body.push_str(&s.csv_row());
                body.push('\n');
            }
            w.text(&name, &body)?;
            files.push(name);
        }
    }
    if cfg.dump_matrix {
        for c in &cases {
            let n = c.space.mesh().n_per_side();
            let name = format!("{label}-n{n}.mtx");
            let system = match study {
                Study::OseenCavity { .. } => oseen_cavity_system(&oseen_config(study, n)),
                Study::NsCavity { .. } => ns_cavity_jacobian(&ns_config(study, n), &c.solution),
                _ => continue,
            };
            let path = w.path(&name);
            system.and_then(|s| write_matrix_market(&s, &path)).map_err(|e| RunError::Io {
                path,
                source: std::io::Error::other(e.to_string()),
            })?;
            files.push(name);
        }
    }
    let (rate, ok) = if error.is_none() { report_rate(&label, &report, band) } else { (None, None) };
    if let Some(e) = &error {
        eprintln!("{label}: failed after {} meshes: {e}", report.rows.len());
    }
    let mut meshes = mesh_records(&cases, dt);
    if error.is_some() {
        // rows solved before the failure are still reported
        meshes = report
            .rows
            .iter()
            .map(|r| MeshRecord {
                n: r.n,
                h: r.h,
                ndof: r.ndof,
                err_h1_u: r.err_h1_u,
                dt: None,
                iterations: 0,
                divergence_residual: f64::NAN,
                wall_s: r.wall_s,
            })
            .collect();
    }
    Ok(StudyRecord {
        label,
        files,
        meshes,
        fitted_rate_h1_u: rate,
        band: Some(band),
        within_band: ok,
        error,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

fn oseen_config(study: &Study, n: usize) -> OseenCaseConfig {
    let Study::OseenCavity { element, k, nu, c_inv, galerkin, .. } = *study else { unreachable!() };
    let stabilization = if galerkin { OseenStabilization::Off } else { OseenStabilization::Sharp };
    OseenCaseConfig { family: element.family(), k, n, nu, c_inv, stabilization }
}

fn ns_config(study: &Study, n: usize) -> NsCavityConfig {
    let Study::NsCavity { element, k, nu, c_inv, .. } = *study else { unreachable!() };
    NsCavityConfig { family: element.family(), k, n, nu, c_inv, nonlinear: NonlinearConfig::default() }
}

/// Plateau of the stabilized error over Pe >= 1e4 (< 2x) and growth of
/// the Galerkin error from Pe = 1e2 to 1e8 (>= 10x), when those are present.
fn sweep_checks(report: &PeSweepReport) -> Option<bool> {
    let stab: Vec<f64> = report.rows.iter().filter(|r| r.pe >= 1e4).map(|r| r.stabilized.h1_u).collect();
    let plateau = (stab.len() >= 2).then(|| {
        stab.iter().cloned().fold(0.0, f64::max) / stab.iter().cloned().fold(f64::INFINITY, f64::min) < 2.0
    });
    let growth = match (report.galerkin_h1(1e8), report.galerkin_h1(1e2)) {
        (Some(hi), Some(lo)) => Some(hi >= 10.0 * lo),
        _ => None,
    };
    match (plateau, growth) {
        (None, None) => None,
        (a, b) => Some(a.unwrap_or(true) && b.unwrap_or(true)),
    }
}

fn sweep(cfg: &RunConfig, w: &Writer, study: &Study) -> Result<StudyRecord, RunError> {
    let start = Instant::now();
    let Study::PeSweep { element, k, n, pes, c_inv } = study else { unreachable!() };
    let label = study.label();
    let mut files = Vec::new();
    let (error, within) = match run_pe_sweep(element.family(), *k, *n, pes, *c_inv, cfg.jobs) {
        Ok(report) => {
            let csv = format!("{label}.csv");
            w.text(&csv, &report.to_csv())?;
            files.push(csv);
            for r in &report.rows {
                let gal = r.galerkin.as_ref().map_or_else(|e| format!("failed ({e})"), |g| format!("{:.4e}", g.h1_u));
                println!("{label}: Pe {:.0e} stabilized {:.4e} galerkin {gal}", r.pe, r.stabilized.h1_u);
            }
            if cfg.dump_matrix {
                for &pe in pes {
                    let name = format!("{label}-pe{pe:e}.mtx");
                    let path = w.path(&name);
                    let case = OseenCaseConfig {
                        family: element.family(),
                        k: *k,
                        n: *n,
                        nu: 0.5 / pe,
                        c_inv: *c_inv,
                        stabilization: OseenStabilization::Sharp,
                    };
                    oseen_cavity_system(&case)
                        .and_then(|s| write_matrix_market(&s, &path))
                        .map_err(|e| RunError::Io { path, source: std::io::Error::other(e.to_string()) })?;
                    files.push(name);
                }
            }
            (None, sweep_checks(&report))
        }
        Err(e) => {
            eprintln!("{label}: failed: {e}");
            (Some(e.to_string()), None)
        }
    };
    Ok(StudyRecord {
        label,
        files,
        meshes: Vec::new(),
        fitted_rate_h1_u: None,
        band: None,
        within_band: within,
        error,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

fn one(cfg: &RunConfig, w: &Writer, study: &Study) -> Result<StudyRecord, RunError> {
    match study {
        Study::OseenCavity { band, .. } => convergence(cfg, w, study, *band, None, |n| solve_oseen_cavity(&oseen_config(study, n))),
        Study::NsCavity { band, .. } => convergence(cfg, w, study, *band, None, |n| solve_ns_cavity(&ns_config(study, n))),
        Study::TaylorGreen { element, k, nu, c_inv, subscales, dt_ratio, t_final, band, .. } => {
            let solve = |n| {
                solve_taylor_green(&TaylorGreenConfig {
                    family: element.family(),
                    k: *k,
                    n,
                    nu: *nu,
                    c_inv: *c_inv,
                    subscales: subscales.model(),
                    dt_ratio: *dt_ratio,
                    t_final: *t_final,
                    nonlinear: NonlinearConfig::unsteady(),
                })
            };
            convergence(cfg, w, study, *band, Some((*dt_ratio, *t_final)), solve)
        }
        Study::PeSweep { .. } => sweep(cfg, w, study),
    }
}

/// Runs every study, writes the reports and the manifest, and returns the
/// process exit code.
pub fn run(cfg: &RunConfig, argv: Vec<String>) -> Result<u8, RunError> {
    let start = Instant::now();
    prepare_output(&cfg.out)?;
    let w = Writer { dir: &cfg.out };
    let mut studies = Vec::new();
    for study in &cfg.studies {
        studies.push(one(cfg, &w, study)?);
    }
    let failed = studies.iter().any(|s| s.error.is_some());
    let violated = studies.iter().any(|s| s.within_band == Some(false));
    let code = if failed {
        1
    } else if cfg.assert_rates && violated {
        2
    } else {
        0
    };
    let manifest = Manifest {
        tool: "vmsflow",
        version: env!("CARGO_PKG_VERSION"),
        solver_version: vmsflow::VERSION,
        argv,
        config: cfg,
        studies,
        total_wall_s: start.elapsed().as_secs_f64(),
        exit_code: code,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest fields are plain data");
    w.text("manifest.json", &json)?;
    Ok(code)
}
