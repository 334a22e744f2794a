//! Geometric multigrid V-cycle for SPD systems on a nested hierarchy.
//!
//! Coarse operators are Galerkin products `Pᵀ A P`, the smoother is
//! Gauss–Seidel (ascending order before coarse correction, descending after)
//! and the coarsest level is solved with a dense Cholesky factorization.
//! With equal sweep counts the cycle is a symmetric operator, so it can also
//! precondition CG-type iterations.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::mesh::Hierarchy;
use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sweeps {
    pub pre: usize,
    pub post: usize,
}

impl Default for Sweeps {
    fn default() -> Self {
        Sweeps { pre: 2, post: 2 }
    }
}

#[derive(Clone)]
pub struct MgWorkspace {
    /// `matrices[0]` is the coarsest level.
    matrices: Vec<CsrMatrix>,
    diagonals: Vec<Vec<f64>>,
    /// `prolongations[k]` maps level `k` to `k + 1`.
    prolongations: Vec<CsrMatrix>,
    restrictions: Vec<CsrMatrix>,
    coarse: Option<Cholesky<f64, Dyn>>,
    sweeps: Sweeps,
}

impl std::fmt::Debug for MgWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MgWorkspace")
            .field("dims", &self.matrices.iter().map(CsrMatrix::nrows).collect::<Vec<_>>())
            .field("sweeps", &self.sweeps)
            .finish()
    }
}

/// Outcome of [`MgWorkspace::solve`].
#[derive(Debug, Clone)]
pub struct MgSolve {
    pub x: Vec<f64>,
    pub cycles: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

impl MgWorkspace {
    /// Builds the Galerkin hierarchy below `fine`. `prolongations` are ordered
    /// from the coarsest pair upwards; the last one must end at `fine`.
    pub fn new(fine: CsrMatrix, prolongations: Vec<CsrMatrix>, sweeps: Sweeps) -> Result<Self> {
        let n = fine.nrows();
        if fine.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: fine.ncols(),
            });
        }
        if let Some(last) = prolongations.last() {
            if last.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: last.nrows(),
                });
            }
        }
        let mut matrices = vec![fine];
        for p in prolongations.iter().rev() {
            let a = matrices.last().unwrap();
            if p.nrows() != a.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: a.nrows(),
                    got: p.nrows(),
                });
            }
            matrices.push(a.congruence(p));
        }
        matrices.reverse();

        let coarsest = &matrices[0];
        let coarse = if coarsest.nrows() == 0 {
            None
        } else {
            let dense = coarsest.to_dense();
            let sym = (&dense + dense.transpose()) * 0.5;
            Some(Cholesky::new(sym).ok_or_else(|| {
                Error::NotPositiveDefinite(format!(
                    "coarsest multigrid matrix ({} dofs)",
                    coarsest.nrows()
                ))
            })?)
        };
        let diagonals = matrices.iter().map(CsrMatrix::diagonal).collect::<Vec<_>>();
        if diagonals.iter().flatten().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite("nonpositive diagonal entry".into()));
        }
        let restrictions = prolongations.iter().map(CsrMatrix::transpose).collect();
        Ok(MgWorkspace {
            matrices,
            diagonals,
            prolongations,
            restrictions,
            coarse,
            sweeps,
        })
    }

    /// Workspace for `fine` living on hierarchy level `level`, using every
    /// coarser level of the hierarchy.
    pub fn from_hierarchy(hier: &Hierarchy, level: usize, fine: CsrMatrix, sweeps: Sweeps) -> Result<Self> {
        let mesh = hier.mesh(level)?;
        if fine.nrows() != mesh.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_dofs(),
                got: fine.nrows(),
            });
        }
        let ps = hier.prolongations()[..level].iter().map(|p| p.dofs.clone()).collect();
        MgWorkspace::new(fine, ps, sweeps)
    }

    pub fn num_levels(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.fine_matrix().nrows()
    }

    pub fn fine_matrix(&self) -> &CsrMatrix {
        self.matrices.last().unwrap()
    }

    /// Level matrices, coarsest first.
    pub fn level_matrices(&self) -> &[CsrMatrix] {
        &self.matrices
    }

    pub fn sweeps(&self) -> Sweeps {
        self.sweeps
    }

    /// One V-cycle starting from `x`.
    pub fn vcycle(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut ops = 0;
        self.vcycle_counted(b, x, &mut ops)
    }

    /// Like [`vcycle`](Self::vcycle), adding the number of floating-point
    /// multiply-adds performed to `ops`.
    pub fn vcycle_counted(&self, b: &[f64], x: &[f64], ops: &mut u64) -> Result<Vec<f64>> {
        let n = self.dim();
        for v in [b, x] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if !b.iter().chain(x).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("multigrid input"));
        }
        let mut x = x.to_vec();
        self.cycle(self.num_levels() - 1, b, &mut x, ops);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("multigrid iterate"));
        }
        Ok(x)
    }

    /// One V-cycle applied to `r` from a zero initial guess; an approximation
    /// of `A⁻¹ r`.
    pub fn precondition(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.vcycle(r, &vec![0.0; r.len()])
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64], ops: &mut u64) {
        if level == 0 {
            if let Some(chol) = &self.coarse {
                let sol = chol.solve(&DVector::from_column_slice(b));
                x.copy_from_slice(sol.as_slice());
                *ops += (b.len() * b.len()) as u64;
            }
            return;
        }
        let a = &self.matrices[level];
        let diag = &self.diagonals[level];
        for _ in 0..self.sweeps.pre {
            gauss_seidel(a, diag, b, x, false);
            *ops += a.nnz() as u64;
        }
        let ax = a.mul_vec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        *ops += a.nnz() as u64;
        let p = &self.prolongations[level - 1];
        let rc = self.restrictions[level - 1].mul_vec(&r);
        let mut ec = vec![0.0; rc.len()];
        self.cycle(level - 1, &rc, &mut ec, ops);
        let e = p.mul_vec(&ec);
        *ops += 2 * p.nnz() as u64;
        for (xi, ei) in x.iter_mut().zip(&e) {
            *xi += ei;
        }
        for _ in 0..self.sweeps.post {
            gauss_seidel(a, diag, b, x, true);
            *ops += a.nnz() as u64;
        }
    }

    /// Repeats V-cycles from `x = 0` until `‖b − Ax‖₂ ≤ rel_tol ‖b‖₂` or
    /// `max_cycles` is reached. Residual growth over three consecutive cycles
    /// aborts.
    pub fn solve(&self, b: &[f64], rel_tol: f64, max_cycles: usize) -> Result<MgSolve> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::config("rel_tol", format!("must lie in (0, 1), got {rel_tol}")));
        }
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(MgSolve {
                x: vec![0.0; n],
                cycles: 0,
                rel_residual: 0.0,
                converged: true,
            });
        }
        let a = self.fine_matrix();
        let mut x = vec![0.0; n];
        let mut prev = bnorm;
        let mut growth = 0;
        let mut rel = 1.0;
        for cycle in 1..=max_cycles {
            x = self.vcycle(b, &x)?;
            let ax = a.mul_vec(&x);
            let res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
            rel = res / bnorm;
            if rel <= rel_tol {
                return Ok(MgSolve {
                    x,
                    cycles: cycle,
                    rel_residual: rel,
                    converged: true,
                });
            }
            if res > prev {
                growth += 1;
                if growth >= 3 {
                    return Err(Error::MultigridDiverged { residual: res });
                }
            } else {
                growth = 0;
            }
            prev = res;
        }
        Ok(MgSolve {
            x,
            cycles: max_cycles,
            rel_residual: rel,
            converged: false,
        })
    }
}

fn gauss_seidel(a: &CsrMatrix, diag: &[f64], b: &[f64], x: &mut [f64], reverse: bool) {
    let n = a.nrows();
    let mut relax = |i: usize| {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    if reverse {
        (0..n).rev().for_each(&mut relax);
    } else {
        (0..n).for_each(&mut relax);
    }
}
