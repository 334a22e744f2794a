//! Discrete ground-state eigenproblem: dense and multigrid-preconditioned
//! inner eigensolvers and the self-consistent outer loop.

mod dense;
mod lopcg;
mod scf;

pub use dense::{smallest_pair_dense, smallest_pair_dense_matrix};
pub use lopcg::{smallest_pair_iterative, IterativeConfig, IterativePair};
pub use scf::{normalize_in, scf_solve, Linearized, ScfConfig, ScfOutcome, ScfSpace};

use serde::{Deserialize, Serialize};

use crate::assembly::{FeFunction, LevelOperators, ProblemSpec};
use crate::error::{Error, Result};
use crate::mesh::Hierarchy;
use crate::multigrid::{MgWorkspace, Sweeps};
use crate::sparse::{dot, CsrMatrix};

/// Discrete chemical potential and M-normalized ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub u: FeFunction,
    pub residual: f64,
    pub scf_iters: usize,
    pub converged: bool,
}

/// `u / √(uᵀMu)`, sign chosen so that `1ᵀMu ≥ 0`.
pub fn normalize(u: &FeFunction, m: &CsrMatrix) -> Result<FeFunction> {
    if u.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: u.len(),
        });
    }
    let mu = m.mul_vec(&u.values);
    let norm2 = dot(&u.values, &mu);
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::ZeroVector("normalize"));
    }
    let mut scale = 1.0 / norm2.sqrt();
    if mu.iter().sum::<f64>() < 0.0 {
        scale = -scale;
    }
    Ok(FeFunction::new(u.level, u.values.iter().map(|v| v * scale).collect()))
}

/// How the linearized eigenproblem is solved on a full finite element space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    /// Spaces up to this dimension use the dense solver.
    pub dense_threshold: usize,
    pub iterative: IterativeSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        let it = IterativeConfig::default();
        InnerConfig {
            dense_threshold: 64,
            iterative: IterativeSettings {
                tol: it.tol,
                max_iter: it.max_iter,
            },
        }
    }
}

impl From<IterativeSettings> for IterativeConfig {
    fn from(s: IterativeSettings) -> Self {
        IterativeConfig {
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }
}

enum InnerSolver {
    Dense,
    Iterative {
        cfg: IterativeConfig,
        precond: Option<MgWorkspace>,
    },
}

/// The full P1 space of one level.
pub struct FineSpace<'a, 'm> {
    ops: &'a LevelOperators<'m>,
    solver: InnerSolver,
    sign: Vec<f64>,
    inner_iterations: usize,
}

impl<'a, 'm> FineSpace<'a, 'm> {
    pub fn dense(ops: &'a LevelOperators<'m>) -> Self {
        FineSpace::with_solver(ops, InnerSolver::Dense)
    }

    pub fn iterative(ops: &'a LevelOperators<'m>, cfg: IterativeConfig, precond: Option<MgWorkspace>) -> Self {
        FineSpace::with_solver(ops, InnerSolver::Iterative { cfg, precond })
    }

    /// Dense when small, otherwise LOPCG preconditioned by a V-cycle for
    /// `A_stiff + A_W` on the hierarchy below `level`.
    pub fn auto(ops: &'a LevelOperators<'m>, hier: &Hierarchy, level: usize, inner: &InnerConfig) -> Result<Self> {
        if ops.dim() <= inner.dense_threshold {
            return Ok(FineSpace::dense(ops));
        }
        let mg = MgWorkspace::from_hierarchy(hier, level, ops.linear.clone(), Sweeps::default())?;
        Ok(FineSpace::iterative(ops, inner.iterative.into(), Some(mg)))
    }

    fn with_solver(ops: &'a LevelOperators<'m>, solver: InnerSolver) -> Self {
        let sign = ops.mass.mul_vec(&vec![1.0; ops.dim()]);
        FineSpace {
            ops,
            solver,
            sign,
            inner_iterations: 0,
        }
    }

    /// Total inner eigensolver iterations so far (0 for the dense solver).
    pub fn inner_iterations(&self) -> usize {
        self.inner_iterations
    }
}

impl ScfSpace for FineSpace<'_, '_> {
    fn dim(&self) -> usize {
        self.ops.dim()
    }

    fn linearized_pair(&mut self, density: Option<&[f64]>, guess: Option<&[f64]>) -> Result<Linearized> {
        let a = match density {
            Some(w) => self.ops.linearized(w)?,
            None => self.ops.linear.clone(),
        };
        let density_rayleigh = density.map(|w| a.quad_form(w) / self.ops.mass.quad_form(w));
        let (lambda, vector) = match &self.solver {
            InnerSolver::Dense => smallest_pair_dense(&a, &self.ops.mass)?,
            InnerSolver::Iterative { cfg, precond } => {
                let out = smallest_pair_iterative(&a, &self.ops.mass, precond.as_ref(), guess, *cfg)?;
                self.inner_iterations += out.iterations;
                (out.lambda, out.x)
            }
        };
        Ok(Linearized {
            lambda,
            vector,
            density_rayleigh,
        })
    }

    fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        self.ops.mass.mul_vec(u)
    }

    fn rayleigh(&self, u: &[f64]) -> Result<f64> {
        self.ops.rayleigh(&FeFunction::new(self.ops.level(), u.to_vec()))
    }

    fn residual(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        self.ops.residual_norm(lambda, u)
    }

    fn sign_weights(&self) -> &[f64] {
        &self.sign
    }
}

/// Direct solve of the discrete problem on one hierarchy level.
#[derive(Debug, Clone)]
pub struct DirectSolve {
    pub pair: EigenPair,
    pub inner_iterations: usize,
}

pub fn direct_solve(
    hier: &Hierarchy,
    level: usize,
    spec: &ProblemSpec,
    scf: &ScfConfig,
    inner: &InnerConfig,
    initial: Option<&FeFunction>,
) -> Result<DirectSolve> {
    let mesh = hier.mesh(level)?;
    let ops = LevelOperators::new(mesh, spec)?;
    direct_solve_with(&ops, hier, level, scf, inner, initial)
}

pub fn direct_solve_with(
    ops: &LevelOperators<'_>,
    hier: &Hierarchy,
    level: usize,
    scf: &ScfConfig,
    inner: &InnerConfig,
    initial: Option<&FeFunction>,
) -> Result<DirectSolve> {
    if let Some(u0) = initial {
        if u0.level != ops.level() {
            return Err(Error::LevelMismatch {
                expected: ops.level(),
                got: u0.level,
            });
        }
    }
    let mut space = FineSpace::auto(ops, hier, level, inner)?;
    let out = scf_solve(&mut space, scf, initial.map(|u| u.values.as_slice()))?;
    Ok(DirectSolve {
        pair: EigenPair {
            lambda: out.lambda,
            u: FeFunction::new(ops.level(), out.u),
            residual: out.residual,
            scf_iters: out.iterations,
            converged: out.converged,
        },
        inner_iterations: space.inner_iterations(),
    })
}
