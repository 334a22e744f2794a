//! End-to-end execution of a [`RunConfig`].

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adaptive::{adaptive_loop, AdaptiveConfig, AdaptiveRun};
use super::config::{Mode, ReferenceMode, RunConfig};
use super::output::{adaptive_csv, observed_order, uniform_csv, AdaptiveRow, UniformRow, SCHEMA_VERSION};
use super::reference::{hash_key, reference_key, reference_solve, Reference, ReferenceCache, Richardson};
use crate::assembly::ProblemSpec;
use crate::eigen::{direct_solve, EigenPair};
use crate::error::{Error, Result};
use crate::mesh::{build_lshape, build_unit_square, write_mesh, Domain, Hierarchy, Mesh};
use crate::mlc::{MultilevelSolver, WorkReport, WorkTiming};

pub fn base_mesh(domain: Domain, n: usize) -> Result<Mesh> {
    match domain {
        Domain::UnitSquare => build_unit_square(n),
        Domain::LShape => build_lshape(n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub lambda: f64,
    pub level: usize,
    pub dofs: usize,
    pub richardson: Option<Richardson>,
}

impl From<&Reference> for ReferenceSummary {
    fn from(r: &Reference) -> Self {
        ReferenceSummary {
            lambda: r.lambda,
            level: r.level,
            dofs: r.dofs,
            richardson: r.richardson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectLevel {
    pub level: usize,
    pub scf_iters: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

/// Adaptive and uniform eigenvalue errors at a common dof count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofComparison {
    pub iteration: usize,
    pub dofs: usize,
    pub adaptive_error: f64,
    /// Uniform error curve interpolated log-log at `dofs`.
    pub uniform_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformPoint {
    pub dofs: usize,
    pub lambda: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub converged: bool,
    pub failures: Vec<String>,
}

/// Nondeterministic measurements, kept out of every other field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub reference_seconds: f64,
    pub reference_cache_hit: bool,
    pub mlc: Option<WorkTiming>,
    pub direct_seconds: Vec<f64>,
    pub adaptive_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub generator: String,
    pub config: RunConfig,
    pub status: Status,
    pub reference: Option<ReferenceSummary>,
    pub uniform: Vec<UniformRow>,
    pub adaptive: Vec<AdaptiveRow>,
    pub adaptive_uniform_curve: Vec<UniformPoint>,
    pub adaptive_comparison: Vec<DofComparison>,
    pub work: Option<WorkReport>,
    pub direct: Vec<DirectLevel>,
    pub timing: Timing,
}

impl Report {
    fn new(cfg: &RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            generator: format!("gpe-mlc {}", env!("CARGO_PKG_VERSION")),
            config: cfg.clone(),
            status: Status::default(),
            reference: None,
            uniform: Vec::new(),
            adaptive: Vec::new(),
            adaptive_uniform_curve: Vec::new(),
            adaptive_comparison: Vec::new(),
            work: None,
            direct: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Everything a run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table_csv: String,
    pub report: Report,
    /// `(file name, contents)` of exported meshes.
    pub meshes: Vec<(String, String)>,
    pub mlc_pairs: Vec<EigenPair>,
    pub direct_pairs: Vec<EigenPair>,
    pub adaptive: Option<AdaptiveRun>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.report.status.converged
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), &self.table_csv)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        if !self.meshes.is_empty() {
            let mdir = dir.join("meshes");
            std::fs::create_dir_all(&mdir)?;
            for (name, text) in &self.meshes {
                std::fs::write(mdir.join(name), text)?;
            }
        }
        Ok(())
    }
}

/// Validates and runs `cfg`; the caller decides where outputs go.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let cache = ReferenceCache::from_env(cfg.out_dir.join("cache"));
    run_with_cache(cfg, Some(&cache))
}

pub fn run_with_cache(cfg: &RunConfig, cache: Option<&ReferenceCache>) -> Result<RunOutcome> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut out = match cfg.mode {
        Mode::Adaptive => run_adaptive(cfg, cache)?,
        _ => run_uniform(cfg, cache)?,
    };
    out.report.timing.total_seconds = clock.elapsed().as_secs_f64();
    Ok(out)
}

/// Runs `cfg`, writes its outputs into `cfg.out_dir` and returns the
/// process exit code: 0 when every stage converged, 1 otherwise.
pub fn execute(cfg: &RunConfig) -> Result<i32> {
    let out = run(cfg)?;
    out.write(&cfg.out_dir)?;
    Ok(if out.converged() { 0 } else { 1 })
}

fn load_file_reference(cfg: &RunConfig) -> Result<Reference> {
    let path = cfg
        .reference_file
        .as_ref()
        .ok_or_else(|| Error::config("reference_file", "missing"))?;
    Reference::from_file(path)
}

fn run_uniform(cfg: &RunConfig, cache: Option<&ReferenceCache>) -> Result<RunOutcome> {
    let spec = cfg.problem();
    let extra = match cfg.reference {
        ReferenceMode::ExtraLevel => cfg.reference_extra_levels,
        ReferenceMode::File => 0,
    };
    let full = Hierarchy::uniform(base_mesh(cfg.domain, cfg.base_n)?, cfg.levels + extra)?
        .with_coarse_level(cfg.coarse_level)?;
    let study = full.prefix(cfg.levels)?;
    let mut report = Report::new(cfg);
    let mut failures = Vec::new();

    let t_ref = Instant::now();
    let reference = match cfg.reference {
        ReferenceMode::ExtraLevel => {
            let mesh_id = format!(
                "uniform|{}|n={}|levels={}",
                cfg.domain,
                cfg.base_n,
                full.num_levels()
            );
            let key = reference_key(&mesh_id, &spec, &cfg.scf(), &cfg.inner());
            let r = reference_solve(&full, &spec, &cfg.scf(), &cfg.inner(), key, cache)?;
            report.timing.reference_cache_hit = r.cache_hit;
            r.reference
        }
        ReferenceMode::File => load_file_reference(cfg)?,
    };
    report.timing.reference_seconds = t_ref.elapsed().as_secs_f64();
    report.reference = Some(ReferenceSummary::from(&reference));

    let mut mlc_pairs = Vec::new();
    if cfg.mode.runs_mlc() {
        let solver = MultilevelSolver::new(&study, spec.clone(), cfg.mlc())?;
        let mut result = solver.run()?;
        if let Some(f) = &result.report.failure {
            failures.push(format!("mlc {f}"));
        }
        report.timing.mlc = Some(std::mem::take(&mut result.report.timing));
        report.work = Some(result.report);
        mlc_pairs = result.pairs;
    }

    let mut direct_pairs = Vec::new();
    if cfg.mode.runs_direct() {
        for level in cfg.start_level()..cfg.levels {
            let t = Instant::now();
            match direct_solve(&study, level, &spec, &cfg.scf(), &cfg.inner(), None) {
                Ok(d) => {
                    report.direct.push(DirectLevel {
                        level,
                        scf_iters: d.pair.scf_iters,
                        inner_iterations: d.inner_iterations,
                        converged: d.pair.converged,
                    });
                    direct_pairs.push(d.pair);
                }
                Err(e) => {
                    failures.push(format!("direct level {level}: {e}"));
                    break;
                }
            }
            report.timing.direct_seconds.push(t.elapsed().as_secs_f64());
        }
    }

    report.uniform = uniform_rows(cfg, &full, &study, &reference, &mlc_pairs, &direct_pairs, report.work.as_ref())?;
    let all_converged = mlc_pairs.iter().chain(&direct_pairs).all(|p| p.converged);
    for p in mlc_pairs.iter().chain(&direct_pairs).filter(|p| !p.converged) {
        failures.push(format!("level {}: nonlinear iteration did not converge", p.u.level));
    }
    failures.dedup();
    report.status = Status {
        converged: all_converged && failures.is_empty(),
        failures,
    };

    let meshes = if cfg.write_meshes {
        study
            .meshes()
            .iter()
            .enumerate()
            .map(|(k, m)| (format!("level_{k:02}.mesh"), write_mesh(m)))
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        table_csv: uniform_csv(&report.uniform)?,
        report,
        meshes,
        mlc_pairs,
        direct_pairs,
        adaptive: None,
    })
}

struct MethodErrors {
    lambda: f64,
    err: f64,
    h1: Option<f64>,
    l2: Option<f64>,
}

fn method_errors(full: &Hierarchy, reference: &Reference, pair: &EigenPair) -> Result<MethodErrors> {
    let fe = reference.function_errors(full, &pair.u)?;
    Ok(MethodErrors {
        lambda: pair.lambda,
        err: (pair.lambda - reference.lambda).abs(),
        h1: fe.map(|f| f.0),
        l2: fe.map(|f| f.1),
    })
}

fn uniform_rows(
    cfg: &RunConfig,
    full: &Hierarchy,
    study: &Hierarchy,
    reference: &Reference,
    mlc: &[EigenPair],
    direct: &[EigenPair],
    work: Option<&WorkReport>,
) -> Result<Vec<UniformRow>> {
    let start = cfg.start_level();
    let mut rows: Vec<UniformRow> = Vec::new();
    for level in start..cfg.levels {
        let mesh = study.mesh(level)?;
        let mut row = UniformRow {
            level,
            dofs: mesh.num_dofs(),
            h: mesh.max_diameter(),
            ..UniformRow::default()
        };
        let prev = rows.last();
        if let Some(pair) = mlc.get(level - start) {
            let e = method_errors(full, reference, pair)?;
            row.lambda_mlc = Some(e.lambda);
            row.err_lambda_mlc = Some(e.err);
            row.h1_err_mlc = e.h1;
            row.l2_err_mlc = e.l2;
            row.scf_iters_mlc = Some(pair.scf_iters);
            row.converged_mlc = Some(pair.converged);
            row.vcycles = Some(
                work.and_then(|w| w.levels.iter().find(|l| l.level == level))
                    .map_or(0, |l| l.vcycles),
            );
            if let Some(p) = prev {
                row.order_lambda_mlc = p.err_lambda_mlc.and_then(|ep| observed_order(ep, e.err, p.h, row.h));
                row.order_h1_mlc = p
                    .h1_err_mlc
                    .zip(e.h1)
                    .and_then(|(ep, ec)| observed_order(ep, ec, p.h, row.h));
            }
        }
        if let Some(pair) = direct.get(level - start) {
            let e = method_errors(full, reference, pair)?;
            row.lambda_direct = Some(e.lambda);
            row.err_lambda_direct = Some(e.err);
            row.h1_err_direct = e.h1;
            row.l2_err_direct = e.l2;
            row.scf_iters_direct = Some(pair.scf_iters);
            row.converged_direct = Some(pair.converged);
            if let Some(p) = prev {
                row.order_lambda_direct = p
                    .err_lambda_direct
                    .and_then(|ep| observed_order(ep, e.err, p.h, row.h));
                row.order_h1_direct = p
                    .h1_err_direct
                    .zip(e.h1)
                    .and_then(|(ep, ec)| observed_order(ep, ec, p.h, row.h));
            }
        }
        if let (Some(em), Some(ed)) = (row.err_lambda_mlc, row.err_lambda_direct) {
            row.error_ratio = (ed > 0.0).then(|| em / ed);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn run_adaptive(cfg: &RunConfig, cache: Option<&ReferenceCache>) -> Result<RunOutcome> {
    let spec = cfg.problem();
    let acfg = AdaptiveConfig {
        theta: cfg.dorfler_theta,
        iterations: cfg.adaptive_iterations,
        mlc: cfg.mlc(),
    };
    let mut report = Report::new(cfg);
    let run = adaptive_loop(&spec, base_mesh(cfg.domain, cfg.base_n)?, &acfg)?;
    let mut failures: Vec<String> = run.failure.iter().map(|f| format!("adaptive {f}")).collect();
    report.timing.adaptive_seconds = run.seconds.clone();
    let solved = run.pairs.len();
    if solved == 0 {
        return Err(Error::InvalidProblem(format!(
            "adaptive loop produced no solution: {}",
            run.failure.clone().unwrap_or_default()
        )));
    }

    let t_ref = Instant::now();
    let reference = match cfg.reference {
        ReferenceMode::ExtraLevel => {
            let mut ref_hier = run.hierarchy.prefix(solved)?;
            let final_mesh = write_mesh(ref_hier.finest());
            for _ in 0..cfg.reference_extra_levels {
                ref_hier.refine_uniformly()?;
            }
            let mesh_id = format!(
                "adaptive|{}|levels={}|extra={}|final-mesh={}",
                cfg.domain,
                solved,
                cfg.reference_extra_levels,
                hash_key(&final_mesh)
            );
            let key = reference_key(&mesh_id, &spec, &cfg.scf(), &cfg.inner());
            let r = reference_solve(&ref_hier, &spec, &cfg.scf(), &cfg.inner(), key, cache)?;
            report.timing.reference_cache_hit = r.cache_hit;
            r.reference
        }
        ReferenceMode::File => load_file_reference(cfg)?,
    };
    report.timing.reference_seconds = t_ref.elapsed().as_secs_f64();
    report.reference = Some(ReferenceSummary::from(&reference));

    let mut rows = run.rows.clone();
    for r in rows.iter_mut() {
        r.err_lambda = Some((r.lambda - reference.lambda).abs());
    }
    let max_dofs = rows.iter().map(|r| r.dofs).max().unwrap_or(0);
    match uniform_error_curve(cfg, &spec, reference.lambda, max_dofs) {
        Ok(curve) => {
            report.adaptive_comparison = compare_at_dofs(&rows, &curve);
            report.adaptive_uniform_curve = curve;
        }
        Err(e) => failures.push(format!("uniform comparison: {e}")),
    }
    for r in rows.iter().filter(|r| !r.converged) {
        failures.push(format!("iteration {}: nonlinear iteration did not converge", r.iteration));
    }
    report.status = Status {
        converged: failures.is_empty(),
        failures,
    };
    report.adaptive = rows;

    let meshes = if cfg.write_meshes {
        run.hierarchy.meshes()[..solved]
            .iter()
            .enumerate()
            .map(|(k, m)| (format!("iter_{k:02}.mesh"), write_mesh(m)))
            .collect()
    } else {
        Vec::new()
    };
    Ok(RunOutcome {
        table_csv: adaptive_csv(&report.adaptive)?,
        report,
        meshes,
        mlc_pairs: run.pairs.clone(),
        direct_pairs: Vec::new(),
        adaptive: Some(run),
    })
}

/// Direct solves on uniform refinements of the configured base mesh until the
/// dof count passes `max_dofs`, with errors against `lambda_ref`.
pub fn uniform_error_curve(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    lambda_ref: f64,
    max_dofs: usize,
) -> Result<Vec<UniformPoint>> {
    let mut hier = Hierarchy::uniform(base_mesh(cfg.domain, cfg.base_n)?, 1)?;
    let mut points = Vec::new();
    loop {
        let level = hier.num_levels() - 1;
        let d = direct_solve(&hier, level, spec, &cfg.scf(), &cfg.inner(), None)?;
        let dofs = hier.mesh(level)?.num_dofs();
        points.push(UniformPoint {
            dofs,
            lambda: d.pair.lambda,
            error: (d.pair.lambda - lambda_ref).abs(),
        });
        if dofs >= max_dofs {
            break;
        }
        hier.refine_uniformly()?;
    }
    Ok(points)
}

/// Log-log interpolation of the uniform curve at each adaptive dof count
/// that falls inside the curve's range.
pub fn compare_at_dofs(rows: &[AdaptiveRow], curve: &[UniformPoint]) -> Vec<DofComparison> {
    let mut out = Vec::new();
    for r in rows {
        let Some(adaptive_error) = r.err_lambda else { continue };
        let d = r.dofs as f64;
        let Some(w) = curve.windows(2).find(|w| w[0].dofs as f64 <= d && d <= w[1].dofs as f64) else {
            continue;
        };
        let (x0, x1) = ((w[0].dofs as f64).ln(), (w[1].dofs as f64).ln());
        let (y0, y1) = (w[0].error.ln(), w[1].error.ln());
        let t = if x1 > x0 { (d.ln() - x0) / (x1 - x0) } else { 0.0 };
        out.push(DofComparison {
            iteration: r.iteration,
            dofs: r.dofs,
            adaptive_error,
            uniform_error: (y0 + t * (y1 - y0)).exp(),
        });
    }
    out
}
