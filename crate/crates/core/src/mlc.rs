//! Multilevel correction for the ground state.
//!
//! One correction step lifts an approximation `(λ_k, u_k)` to the next level
//! by (1) solving the Laplacian source problem
//! `(∇ê, ∇v) = λ_k (u_k, v) − a(u_k; u_k, v)` with multigrid and setting
//! `ũ = u_k + ê`, then (2) solving the nonlinear eigenproblem on the small
//! space `V_H + span{ũ}`. The full scheme solves once on the first level and
//! then corrects level by level, so the only fine-grid work is linear.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{FeFunction, LevelOperators, ProblemSpec};
use crate::eigen::{
    direct_solve_with, normalize, scf_solve, smallest_pair_dense_matrix, EigenPair, InnerConfig, Linearized,
    ScfConfig, ScfSpace,
};
use crate::error::{Error, Result};
use crate::mesh::{Hierarchy, Refinement};
use crate::multigrid::{MgWorkspace, Sweeps};
use crate::sparse::{dot, CsrMatrix};

/// Schur complements below this fraction of `ũᵀMũ` trigger M-orthogonalization
/// of `ũ` against `V_H`.
pub const SCHUR_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlcConfig {
    pub scf: ScfConfig,
    pub inner: InnerConfig,
    /// Multigrid tolerance on level `k+1` is `c_mg · h_{k+1}²`.
    pub c_mg: f64,
    pub max_cycles: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    /// Hierarchy level holding `V_{h_1}`, where the scheme starts with a
    /// direct solve. Must not be below the hierarchy's coarse level.
    pub start_level: usize,
}

impl Default for MlcConfig {
    fn default() -> Self {
        MlcConfig {
            scf: ScfConfig::default(),
            inner: InnerConfig::default(),
            c_mg: 0.1,
            max_cycles: 100,
            pre_sweeps: 2,
            post_sweeps: 2,
            start_level: 0,
        }
    }
}

impl MlcConfig {
    pub fn sweeps(&self) -> Sweeps {
        Sweeps {
            pre: self.pre_sweeps,
            post: self.post_sweeps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scf.validate()?;
        if !(self.c_mg > 0.0) {
            return Err(Error::config("c_mg", "must be positive"));
        }
        if self.max_cycles == 0 {
            return Err(Error::config("mg_max_cycles", "must be at least 1"));
        }
        Ok(())
    }

    /// Relative residual target for the source problem on a mesh of size `h`.
    pub fn mg_tolerance(&self, h: f64) -> f64 {
        (self.c_mg * h * h).min(0.5)
    }
}

/// `λ M ū − (A_stiff + A_W + N(ū)) ū` for `ū` already on the level of `ops`.
pub fn aux_rhs(lambda: f64, u: &FeFunction, ops: &LevelOperators<'_>) -> Result<Vec<f64>> {
    let au = ops.apply(u)?;
    let mu = ops.mass.mul_vec(&u.values);
    Ok(mu.iter().zip(&au.values).map(|(m, a)| lambda * m - a).collect())
}

/// Enrichments whose M-orthogonal remainder falls below this fraction of
/// their norm are taken to lie in `V_H`.
const DEPENDENT_TOL: f64 = 1e-12;

/// The space `V_H + span{ũ}` represented by the fine-level columns
/// `[P_H | ũ]`, with the linear and mass blocks cached. When `ũ ∈ V_H` the
/// column is dropped and the space is `V_H` itself.
pub struct CorrectionSpace<'a, 'm> {
    ops: &'a LevelOperators<'m>,
    p_h: CsrMatrix,
    u_tilde: Option<Vec<f64>>,
    linear: DMatrix<f64>,
    mass: DMatrix<f64>,
    sign: Vec<f64>,
    /// Coordinates of the unmodified `ũ` in this basis.
    initial: Vec<f64>,
    schur: f64,
    orthogonalized: bool,
}

impl<'a, 'm> CorrectionSpace<'a, 'm> {
    /// `p_h` maps `V_H` coefficients to the level of `ops`; `u_tilde` lives on
    /// that level.
    pub fn build(ops: &'a LevelOperators<'m>, p_h: CsrMatrix, u_tilde: &[f64]) -> Result<Self> {
        let n = ops.dim();
        if p_h.nrows() != n || u_tilde.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u_tilde.len(),
            });
        }
        let nh = p_h.ncols();
        let m = &ops.mass;
        let m_hh = m.congruence(&p_h).to_dense();
        let m_hh = (&m_hh + m_hh.transpose()) * 0.5;
        let chol_hh = if nh == 0 {
            None
        } else {
            Some(Cholesky::new(m_hh.clone()).ok_or_else(|| {
                Error::NotPositiveDefinite("coarse block of the correction mass matrix".into())
            })?)
        };
        let project = |v: &[f64]| -> (DVector<f64>, f64, f64) {
            let mv = m.mul_vec(v);
            let vv = dot(v, &mv);
            let b = DVector::from_vec(p_h.tr_mul_vec(&mv));
            match &chol_hh {
                Some(c) => {
                    let coef = c.solve(&b);
                    (coef.clone(), vv, vv - b.dot(&coef))
                }
                None => (DVector::zeros(0), vv, vv),
            }
        };

        let (coef, norm2, schur) = project(u_tilde);
        if !(norm2 > 0.0) {
            return Err(Error::RankDeficient("enrichment function is zero".into()));
        }
        let mut column = u_tilde.to_vec();
        let mut coarse_part = DVector::<f64>::zeros(nh);
        let orthogonalized = schur <= SCHUR_GUARD * norm2;
        if orthogonalized {
            let mut c = coef;
            for pass in 0..2 {
                let correction = p_h.mul_vec(c.as_slice());
                column.iter_mut().zip(&correction).for_each(|(x, y)| *x -= y);
                coarse_part += &c;
                if pass == 0 {
                    c = project(&column).0;
                }
            }
        }
        let col_norm = dot(&column, &m.mul_vec(&column)).max(0.0).sqrt();
        let mut initial = coarse_part.as_slice().to_vec();
        let column = if col_norm > DEPENDENT_TOL * norm2.sqrt() {
            column.iter_mut().for_each(|x| *x /= col_norm);
            initial.push(col_norm);
            Some(column)
        } else if nh > 0 {
            None
        } else {
            return Err(Error::RankDeficient("enrichment vanishes and V_H is empty".into()));
        };

        let mass = congruence_blocks(m, &p_h, column.as_deref());
        if Cholesky::new(mass.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(format!(
                "correction mass matrix after guard (dimension {}, Schur complement {schur:e}, orthogonalized {orthogonalized})",
                mass.nrows()
            )));
        }
        let linear = congruence_blocks(&ops.linear, &p_h, column.as_deref());
        let ones = m.mul_vec(&vec![1.0; n]);
        let mut sign = p_h.tr_mul_vec(&ones);
        if let Some(c) = &column {
            sign.push(dot(c, &ones));
        }
        Ok(CorrectionSpace {
            ops,
            p_h,
            u_tilde: column,
            linear,
            mass,
            sign,
            initial,
            schur,
            orthogonalized,
        })
    }

    pub fn coarse_dim(&self) -> usize {
        self.p_h.ncols()
    }

    /// Assembled `Â` for density `w` given in this space's coordinates.
    pub fn stiffness_matrix(&self, density: Option<&[f64]>) -> Result<DMatrix<f64>> {
        match density {
            Some(c) if self.ops.zeta != 0.0 => {
                let w = self.expand(c);
                let n = self.ops.nonlinear(&w)?;
                Ok(&self.linear + congruence_blocks(&n, &self.p_h, self.u_tilde.as_deref()))
            }
            _ => Ok(self.linear.clone()),
        }
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn schur_complement(&self) -> f64 {
        self.schur
    }

    pub fn orthogonalized(&self) -> bool {
        self.orthogonalized
    }

    /// False when `ũ` was found to lie in `V_H` and its column dropped.
    pub fn enriched(&self) -> bool {
        self.u_tilde.is_some()
    }

    /// Coordinates of the enrichment function `ũ` as passed to `build`.
    pub fn initial_coordinates(&self) -> &[f64] {
        &self.initial
    }

    /// Fine-level coefficients of the composite function with coordinates `c`.
    pub fn expand(&self, c: &[f64]) -> Vec<f64> {
        let nh = self.coarse_dim();
        let mut u = self.p_h.mul_vec(&c[..nh]);
        if let Some(t) = &self.u_tilde {
            u.iter_mut().zip(t).for_each(|(x, t)| *x += c[nh] * t);
        }
        u
    }
}

/// `[P | v]ᵀ X [P | v]` (or `PᵀXP` without `v`) as a dense matrix.
fn congruence_blocks(x: &CsrMatrix, p: &CsrMatrix, v: Option<&[f64]>) -> DMatrix<f64> {
    let nh = p.ncols();
    let dim = nh + usize::from(v.is_some());
    let xp = x.congruence(p);
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..nh {
        let (cols, vals) = xp.row(i);
        for (&j, &val) in cols.iter().zip(vals) {
            out[(i, j)] = val;
        }
    }
    if let Some(v) = v {
        let xv = x.mul_vec(v);
        let ptxv = p.tr_mul_vec(&xv);
        for i in 0..nh {
            out[(i, nh)] = ptxv[i];
            out[(nh, i)] = ptxv[i];
        }
        out[(nh, nh)] = dot(v, &xv);
    }
    (&out + out.transpose()) * 0.5
}

impl ScfSpace for CorrectionSpace<'_, '_> {
    fn dim(&self) -> usize {
        self.coarse_dim() + usize::from(self.enriched())
    }

    fn linearized_pair(&mut self, density: Option<&[f64]>, _guess: Option<&[f64]>) -> Result<Linearized> {
        let a = self.stiffness_matrix(density)?;
        let density_rayleigh = density.map(|c| {
            let v = DVector::from_column_slice(c);
            v.dot(&(&a * &v)) / v.dot(&(&self.mass * &v))
        });
        let (lambda, y) = smallest_pair_dense_matrix(&a, &self.mass)?;
        Ok(Linearized {
            lambda,
            vector: y.as_slice().to_vec(),
            density_rayleigh,
        })
    }

    fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        (&self.mass * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    fn rayleigh(&self, u: &[f64]) -> Result<f64> {
        let a = self.stiffness_matrix(Some(u))?;
        let v = DVector::from_column_slice(u);
        let denom = v.dot(&(&self.mass * &v));
        if !(denom > 0.0) {
            return Err(Error::ZeroVector("rayleigh"));
        }
        Ok(v.dot(&(&a * &v)) / denom)
    }

    fn residual(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        let a = self.stiffness_matrix(Some(u))?;
        let v = DVector::from_column_slice(u);
        Ok((&a * &v - &self.mass * &v * lambda).norm())
    }

    fn sign_weights(&self) -> &[f64] {
        &self.sign
    }
}

/// Deterministic counters for one level of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelWork {
    pub level: usize,
    pub dofs: usize,
    pub vcycles: usize,
    pub mg_rel_residual: f64,
    pub scf_iters: usize,
    pub scf_converged: bool,
    pub composite_dim: usize,
    pub orthogonalized: bool,
    pub mixed_sign: bool,
}

/// Wall-clock seconds per stage. Kept apart from [`LevelWork`] because it is
/// the only nondeterministic part of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelTiming {
    pub level: usize,
    pub aux_solve: f64,
    pub space_build: f64,
    pub eigensolve: f64,
    pub total: f64,
    /// Seconds since the start of the run when the level finished.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkTiming {
    /// Time of the initial direct solve (the `M_{h_1}` proxy).
    pub first_level_seconds: f64,
    pub levels: Vec<LevelTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkReport {
    pub first_level: usize,
    pub first_level_dofs: usize,
    pub first_level_scf_iters: usize,
    pub coarse_dim: usize,
    pub levels: Vec<LevelWork>,
    /// `Σ_k ϖ_k (N_H + 1)³`, the dense-eigensolve cost on the correction spaces.
    pub coarse_work_proxy: f64,
    pub failure: Option<String>,
    /// Not serialized with the report; see [`WorkTiming`].
    #[serde(skip)]
    pub timing: WorkTiming,
}

impl WorkReport {
    pub fn max_scf_iters(&self) -> usize {
        self.levels.iter().map(|l| l.scf_iters).max().unwrap_or(0)
    }
}

/// Result of one correction step.
#[derive(Debug, Clone)]
pub struct Correction {
    pub pair: EigenPair,
    pub work: LevelWork,
    pub timing: LevelTiming,
    pub schur_complement: f64,
}

/// Results of the full scheme: one eigenpair per level from the start level.
#[derive(Debug, Clone)]
pub struct MlcRun {
    pub pairs: Vec<EigenPair>,
    pub report: WorkReport,
}

impl MlcRun {
    pub fn finest(&self) -> Option<&EigenPair> {
        self.pairs.last()
    }
}

pub struct MultilevelSolver<'h> {
    hier: &'h Hierarchy,
    spec: ProblemSpec,
    cfg: MlcConfig,
}

impl<'h> MultilevelSolver<'h> {
    pub fn new(hier: &'h Hierarchy, spec: ProblemSpec, cfg: MlcConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        if cfg.start_level < hier.coarse_level() || cfg.start_level >= hier.num_levels() {
            return Err(Error::config(
                "start_level",
                format!(
                    "must lie in [{}, {}), got {}",
                    hier.coarse_level(),
                    hier.num_levels(),
                    cfg.start_level
                ),
            ));
        }
        Ok(MultilevelSolver { hier, spec, cfg })
    }

    pub fn config(&self) -> &MlcConfig {
        &self.cfg
    }

    /// Lifts `(λ, u)` from `u.level` to `target` (one correction step) with
    /// the configured multigrid tolerance `c_mg · h²`.
    pub fn correction_step(&self, lambda: f64, u: &FeFunction, target: usize) -> Result<Correction> {
        let h = self.hier.mesh(target)?.max_diameter();
        self.correction_step_with_tol(lambda, u, target, self.cfg.mg_tolerance(h))
    }

    /// One correction step with an explicit relative tolerance for the
    /// source problem. `target == u.level` is allowed and leaves a discrete
    /// eigenpair fixed.
    pub fn correction_step_with_tol(
        &self,
        lambda: f64,
        u: &FeFunction,
        target: usize,
        mg_rel_tol: f64,
    ) -> Result<Correction> {
        let start = Instant::now();
        let hier = self.hier;
        let mesh = hier.mesh(target)?;
        if u.level > target {
            return Err(Error::LevelMismatch {
                expected: target,
                got: u.level,
            });
        }
        if u.len() != hier.mesh(u.level)?.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: hier.mesh(u.level)?.num_dofs(),
                got: u.len(),
            });
        }
        let ops = LevelOperators::new(mesh, &self.spec)?;
        let lift = hier.composite_prolongation(u.level, target)?;
        let u_bar = FeFunction::new(target, lift.apply(&u.values));

        let rhs = aux_rhs(lambda, &u_bar, &ops)?;
        let mg = MgWorkspace::from_hierarchy(hier, target, ops.stiffness.clone(), self.cfg.sweeps())?;
        let solve = mg.solve(&rhs, mg_rel_tol, self.cfg.max_cycles)?;
        if !solve.converged {
            return Err(Error::MultigridNotConverged {
                cycles: solve.cycles,
                rel_residual: solve.rel_residual,
            });
        }
        let u_tilde: Vec<f64> = u_bar.values.iter().zip(&solve.x).map(|(a, b)| a + b).collect();
        let t_aux = start.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let p_h = hier.composite_prolongation(hier.coarse_level(), target)?.dofs;
        let mut space = CorrectionSpace::build(&ops, p_h, &u_tilde)?;
        let t_space = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let initial = space.initial_coordinates().to_vec();
        let out = scf_solve(&mut space, &self.cfg.scf, Some(&initial))?;
        let fine = FeFunction::new(target, space.expand(&out.u));
        let fine = normalize(&fine, &ops.mass)?;
        let t_eig = t0.elapsed().as_secs_f64();

        let mixed_sign = matches!(hier.refinement(), Refinement::Uniform { .. }) && has_mixed_sign(&fine.values);
        let work = LevelWork {
            level: target,
            dofs: mesh.num_dofs(),
            vcycles: solve.cycles,
            mg_rel_residual: solve.rel_residual,
            scf_iters: out.iterations,
            scf_converged: out.converged,
            composite_dim: space.dim(),
            orthogonalized: space.orthogonalized(),
            mixed_sign,
        };
        let timing = LevelTiming {
            level: target,
            aux_solve: t_aux,
            space_build: t_space,
            eigensolve: t_eig,
            total: start.elapsed().as_secs_f64(),
            elapsed: 0.0,
        };
        Ok(Correction {
            pair: EigenPair {
                lambda: out.lambda,
                u: fine,
                residual: out.residual,
                scf_iters: out.iterations,
                converged: out.converged,
            },
            work,
            timing,
            schur_complement: space.schur_complement(),
        })
    }

    /// Direct solve on the start level followed by one correction step per
    /// finer level. A failing stage ends the loop; earlier levels are kept
    /// and the failure is recorded in the report.
    pub fn run(&self) -> Result<MlcRun> {
        let clock = Instant::now();
        let first = self.cfg.start_level;
        let mesh = self.hier.mesh(first)?;
        let ops = LevelOperators::new(mesh, &self.spec)?;
        let direct = direct_solve_with(&ops, self.hier, first, &self.cfg.scf, &self.cfg.inner, None)?;
        let coarse_dim = self.hier.mesh(self.hier.coarse_level())?.num_dofs();
        let mut report = WorkReport {
            first_level: first,
            first_level_dofs: mesh.num_dofs(),
            first_level_scf_iters: direct.pair.scf_iters,
            coarse_dim,
            ..WorkReport::default()
        };
        report.timing.first_level_seconds = clock.elapsed().as_secs_f64();
        let mut pairs = vec![direct.pair];

        for target in first + 1..self.hier.num_levels() {
            let prev = pairs.last().unwrap();
            match self.correction_step(prev.lambda, &prev.u, target) {
                Ok(mut c) => {
                    c.timing.elapsed = clock.elapsed().as_secs_f64();
                    report.coarse_work_proxy += c.work.scf_iters as f64 * ((coarse_dim + 1) as f64).powi(3);
                    report.levels.push(c.work);
                    report.timing.levels.push(c.timing);
                    pairs.push(c.pair);
                }
                Err(e) => {
                    report.failure = Some(format!("level {target}: {e}"));
                    break;
                }
            }
        }
        report.timing.total_seconds = clock.elapsed().as_secs_f64();
        Ok(MlcRun { pairs, report })
    }
}

/// Entries of both signs beyond `1e-8` of the largest magnitude.
fn has_mixed_sign(u: &[f64]) -> bool {
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-8 * scale;
    u.iter().any(|&v| v < -tol) && u.iter().any(|&v| v > tol)
}

/// Convenience wrapper: the full scheme on `hier` with the given settings.
pub fn multigrid_scheme(hier: &Hierarchy, spec: &ProblemSpec, cfg: &MlcConfig) -> Result<MlcRun> {
    MultilevelSolver::new(hier, spec.clone(), *cfg)?.run()
}
