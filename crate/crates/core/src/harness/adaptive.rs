//! Solve → estimate → mark → refine, with the correction step as solver.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::output::AdaptiveRow;
use super::zz::{dorfler_mark, zz_estimate, ZzIndicators};
use crate::assembly::{LevelOperators, ProblemSpec};
use crate::eigen::{direct_solve_with, EigenPair};
use crate::error::Result;
use crate::mesh::{Domain, Hierarchy, Mesh, Refinement};
use crate::mlc::{MlcConfig, MultilevelSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub theta: f64,
    /// Number of refinements; the loop solves on `iterations + 1` meshes.
    pub iterations: usize,
    pub mlc: MlcConfig,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub hierarchy: Hierarchy,
    pub pairs: Vec<EigenPair>,
    pub indicators: Vec<ZzIndicators>,
    pub rows: Vec<AdaptiveRow>,
    /// Wall-clock seconds per iteration.
    pub seconds: Vec<f64>,
    pub failure: Option<String>,
}

/// Relative source-problem tolerance on a locally refined mesh. The global
/// maximum diameter stays large under local refinement, so the mean mesh
/// size `(|Ω| / N)^{1/2}` takes the place of `h`.
pub fn adaptive_mg_tolerance(cfg: &MlcConfig, mesh: &Mesh) -> f64 {
    let h2 = mesh.total_area() / (mesh.num_dofs().max(1) as f64);
    (cfg.c_mg * h2).min(0.5)
}

/// Smallest diameter of the triangles touching the reentrant corner of the
/// L-shape; `None` on other domains.
pub fn corner_min_diameter(mesh: &Mesh) -> Option<f64> {
    if mesh.domain() != Some(Domain::LShape) {
        return None;
    }
    let v = mesh.vertices();
    mesh.triangles()
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.iter().any(|&i| v[i][0].abs() < 1e-12 && v[i][1].abs() < 1e-12))
        .map(|(t, _)| mesh.diameter(t))
        .reduce(f64::min)
}

pub fn adaptive_loop(spec: &ProblemSpec, base: Mesh, cfg: &AdaptiveConfig) -> Result<AdaptiveRun> {
    let mut hier = Hierarchy::new(base, Refinement::Adaptive);
    let mut run = AdaptiveRun {
        hierarchy: hier.clone(),
        pairs: Vec::new(),
        indicators: Vec::new(),
        rows: Vec::new(),
        seconds: Vec::new(),
        failure: None,
    };
    let mut mlc = cfg.mlc;
    mlc.start_level = 0;

    for it in 0..=cfg.iterations {
        let clock = Instant::now();
        let step = (|| -> Result<(EigenPair, usize)> {
            if it == 0 {
                let ops = LevelOperators::new(hier.mesh(0)?, spec)?;
                let d = direct_solve_with(&ops, &hier, 0, &mlc.scf, &mlc.inner, None)?;
                Ok((d.pair, 0))
            } else {
                let prev = run.pairs.last().expect("previous iterate");
                let solver = MultilevelSolver::new(&hier, spec.clone(), mlc)?;
                let tol = adaptive_mg_tolerance(&mlc, hier.mesh(it)?);
                let c = solver.correction_step_with_tol(prev.lambda, &prev.u, it, tol)?;
                Ok((c.pair, c.work.vcycles))
            }
        })();
        let (pair, vcycles) = match step {
            Ok(s) => s,
            Err(e) => {
                run.failure = Some(format!("iteration {it}: {e}"));
                break;
            }
        };
        let mesh = hier.mesh(it)?;
        let z = zz_estimate(mesh, &mesh.expand(&pair.u.values))?;
        let marked = if it < cfg.iterations {
            dorfler_mark(&z.eta, cfg.theta)?
        } else {
            Vec::new()
        };
        run.rows.push(AdaptiveRow {
            iteration: it,
            dofs: mesh.num_dofs(),
            triangles: mesh.num_triangles(),
            lambda: pair.lambda,
            err_lambda: None,
            eta: z.total,
            marked: marked.len(),
            vcycles,
            scf_iters: pair.scf_iters,
            converged: pair.converged,
            corner_min_diameter: corner_min_diameter(mesh),
            max_diameter: mesh.max_diameter(),
        });
        run.pairs.push(pair);
        run.indicators.push(z);
        if it < cfg.iterations {
            if let Err(e) = hier.refine_marked(&marked) {
                run.failure = Some(format!("refinement after iteration {it}: {e}"));
                run.seconds.push(clock.elapsed().as_secs_f64());
                break;
            }
        }
        run.seconds.push(clock.elapsed().as_secs_f64());
    }
    run.hierarchy = hier;
    Ok(run)
}
