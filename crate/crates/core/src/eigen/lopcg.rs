//! Locally optimal preconditioned conjugate gradient (block size one) for
//! the smallest eigenpair of a sparse symmetric-definite pencil.
//!
//! Each step runs Rayleigh–Ritz on `span{x, T r, p}` where `T` is one
//! multigrid V-cycle (or the identity) and `p` the previous search
//! direction. The trial basis is M-orthonormalized before projection;
//! directions that become numerically dependent are dropped.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::multigrid::MgWorkspace;
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeConfig {
    /// Bound on `‖Ax − λMx‖₂ / (|λ| ‖Mx‖₂)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        IterativeConfig {
            tol: 1e-9,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterativePair {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

fn residual(a: &CsrMatrix, m: &CsrMatrix, x: &[f64]) -> (f64, Vec<f64>, f64) {
    let ax = a.mul_vec(x);
    let mx = m.mul_vec(x);
    let lambda = dot(x, &ax) / dot(x, &mx);
    let r: Vec<f64> = ax.iter().zip(&mx).map(|(p, q)| p - lambda * q).collect();
    let rel = norm2(&r) / (lambda.abs() * norm2(&mx)).max(f64::MIN_POSITIVE);
    (lambda, r, rel)
}

/// M-orthonormalizes `vectors` in order (two Gram–Schmidt passes each),
/// dropping any vector whose remainder falls below `1e-10` of its norm.
fn m_orthonormalize(m: &CsrMatrix, vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut mbasis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        let start = dot(&v, &m.mul_vec(&v)).sqrt();
        if !(start > 0.0) || !start.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for (q, mq) in basis.iter().zip(&mbasis) {
                let c = dot(mq, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let mv = m.mul_vec(&v);
        let norm = dot(&v, &mv).sqrt();
        if norm <= 1e-10 * start {
            continue;
        }
        v.iter_mut().for_each(|vi| *vi /= norm);
        basis.push(v);
        mbasis.push(mv.into_iter().map(|x| x / norm).collect());
    }
    basis
}

/// Smallest eigenpair of `(A, M)`. `A` must be symmetric positive definite so
/// the multigrid preconditioner is well defined. Without an initial guess the
/// all-ones vector is used.
pub fn smallest_pair_iterative(
    a: &CsrMatrix,
    m: &CsrMatrix,
    precond: Option<&MgWorkspace>,
    initial: Option<&[f64]>,
    cfg: IterativeConfig,
) -> Result<IterativePair> {
    let n = a.nrows();
    if m.nrows() != n || initial.is_some_and(|x| x.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows(),
        });
    }
    if let Some(p) = precond {
        if p.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.dim(),
            });
        }
    }
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let mut x = initial.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let xn = dot(&x, &m.mul_vec(&x)).sqrt();
    if !(xn > 0.0) {
        return Err(Error::ZeroVector("initial eigenvector guess"));
    }
    x.iter_mut().for_each(|v| *v /= xn);

    let mut p: Option<Vec<f64>> = None;
    let mut last_rel = f64::INFINITY;
    for it in 0..=cfg.max_iter {
        let (lambda, r, rel) = residual(a, m, &x);
        if !rel.is_finite() {
            return Err(Error::NonFinite("iterative eigensolver residual"));
        }
        last_rel = rel;
        if rel <= cfg.tol {
            return Ok(IterativePair {
                lambda,
                x,
                iterations: it,
                rel_residual: rel,
            });
        }
        if it == cfg.max_iter {
            break;
        }
        let w = match precond {
            Some(mg) => mg.precondition(&r)?,
            None => r,
        };
        let mut trial = vec![x.clone(), w];
        if let Some(p) = p.take() {
            trial.push(p);
        }
        let basis = m_orthonormalize(m, trial);
        let k = basis.len();
        let abasis: Vec<Vec<f64>> = basis.iter().map(|q| a.mul_vec(q)).collect();
        let mut proj = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = 0.5 * (dot(&basis[i], &abasis[j]) + dot(&basis[j], &abasis[i]));
                proj[(i, j)] = v;
                proj[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(proj);
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|u, v| u.1.total_cmp(v.1))
            .unwrap();
        let mut y = eig.eigenvectors.column(idx).into_owned();
        if y[0] < 0.0 {
            y.neg_mut();
        }
        let mut next = vec![0.0; n];
        let mut dir = vec![0.0; n];
        for (j, q) in basis.iter().enumerate() {
            next.iter_mut().zip(q).for_each(|(xi, qi)| *xi += y[j] * qi);
            if j > 0 {
                dir.iter_mut().zip(q).for_each(|(di, qi)| *di += y[j] * qi);
            }
        }
        x = next;
        p = (k > 1).then_some(dir);
    }
    Err(Error::EigenNotConverged {
        iterations: cfg.max_iter,
        residual: last_rel,
    })
}
