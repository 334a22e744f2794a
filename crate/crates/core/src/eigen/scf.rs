use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::dot;

/// Settings of the self-consistent (frozen density) iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScfConfig {
    /// Stop when the Rayleigh quotient changes by at most
    /// `lambda_tol · max(1, |λ|)` ...
    pub lambda_tol: f64,
    /// ... and `‖Δu‖_M ≤ u_tol`.
    pub u_tol: f64,
    pub max_iters: usize,
    /// Weight of the new eigenvector in `u ← normalize((1−α)u + αv)`.
    pub mixing: f64,
    /// Number of previous steps used for Anderson extrapolation of the
    /// mixed update; 0 gives plain linear mixing.
    pub anderson_depth: usize,
}

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            lambda_tol: 1e-10,
            u_tol: 1e-8,
            max_iters: 200,
            mixing: 1.0,
            anderson_depth: 3,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_tol > 0.0) {
            return Err(Error::config("scf_lambda_tol", "must be positive"));
        }
        if !(self.u_tol > 0.0) {
            return Err(Error::config("scf_u_tol", "must be positive"));
        }
        if self.max_iters < 1 {
            return Err(Error::config("scf_max_iters", "must be at least 1"));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::config("scf_mixing", "must lie in (0, 1]"));
        }
        if self.anderson_depth > 20 {
            return Err(Error::config("scf_anderson_depth", "must be at most 20"));
        }
        Ok(())
    }
}

/// A space on which the frozen-density eigenproblem can be posed.
pub trait ScfSpace {
    fn dim(&self) -> usize;

    /// Smallest eigenpair of `A₀ + N(w)` against the mass matrix, with
    /// `density = None` meaning `N = 0`. The vector is M-normalized.
    fn linearized_pair(&mut self, density: Option<&[f64]>, guess: Option<&[f64]>) -> Result<Linearized>;

    fn mass_apply(&self, u: &[f64]) -> Vec<f64>;

    /// `uᵀ(A₀ + N(u))u / uᵀMu`
    fn rayleigh(&self, u: &[f64]) -> Result<f64>;

    /// `‖(A₀ + N(u))u − λMu‖₂` in this space's coordinates.
    fn residual(&self, lambda: f64, u: &[f64]) -> Result<f64>;

    /// Vector `s` defining the sign convention `sᵀu ≥ 0` (for nodal
    /// coordinates `s = M·1`).
    fn sign_weights(&self) -> &[f64];
}

/// Result of one linearized eigensolve.
#[derive(Debug, Clone)]
pub struct Linearized {
    pub lambda: f64,
    pub vector: Vec<f64>,
    /// `wᵀ(A₀ + N(w))w / wᵀMw` for the density vector `w`, when one was given.
    pub density_rayleigh: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScfOutcome {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_mixing: f64,
}

/// M-normalizes `u` and flips its sign so that `sᵀu ≥ 0`.
pub fn normalize_in<S: ScfSpace + ?Sized>(space: &S, u: &[f64]) -> Result<Vec<f64>> {
    let norm2 = dot(u, &space.mass_apply(u));
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::ZeroVector("normalize"));
    }
    let mut scale = 1.0 / norm2.sqrt();
    if dot(space.sign_weights(), u) < 0.0 {
        scale = -scale;
    }
    Ok(u.iter().map(|v| v * scale).collect())
}

/// Anderson extrapolation of the residual history in the M-inner product.
/// Returns the mixed update before normalization.
fn anderson_update<S: ScfSpace + ?Sized>(
    space: &S,
    u: &[f64],
    f: &[f64],
    du_hist: &[Vec<f64>],
    df_hist: &[Vec<f64>],
    beta: f64,
) -> Vec<f64> {
    let plain = || u.iter().zip(f).map(|(a, b)| a + beta * b).collect::<Vec<f64>>();
    let m = df_hist.len();
    if m == 0 {
        return plain();
    }
    let mdf: Vec<Vec<f64>> = df_hist.iter().map(|d| space.mass_apply(d)).collect();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = dot(&df_hist[i], &mdf[j]);
        }
        rhs[i] = dot(&mdf[i], f);
    }
    // Tikhonov term relative to the Gram diagonal keeps nearly dependent
    // history columns from blowing up the coefficients.
    let scale = (0..m).map(|i| gram[(i, i)]).fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return plain();
    }
    for i in 0..m {
        gram[(i, i)] += 1e-12 * scale;
    }
    let Some(gamma) = gram.cholesky().map(|c| c.solve(&rhs)) else {
        return plain();
    };
    let mut next = plain();
    for (k, g) in gamma.iter().enumerate() {
        for ((x, a), b) in next.iter_mut().zip(&du_hist[k]).zip(&df_hist[k]) {
            *x -= g * (a + beta * b);
        }
    }
    if next.iter().all(|x| x.is_finite()) {
        next
    } else {
        plain()
    }
}

/// Frozen-density fixed-point iteration.
///
/// Each step solves the smallest eigenpair of the operator linearized at the
/// current iterate. The update is `u + α f` with `f = v − u`, extrapolated
/// over the last `anderson_depth` steps (Anderson mixing) and normalized.
/// The mixing weight halves and the history is cleared whenever the
/// eigenvalue change alternates sign twice in a row without halving in
/// magnitude.
///
/// `Δλ` is the change of the Rayleigh quotient `uᵀ(A₀ + N(u))u` over the
/// last update; it is evaluated only once `‖Δu‖_M` is below tolerance.
pub fn scf_solve<S: ScfSpace + ?Sized>(space: &mut S, cfg: &ScfConfig, initial: Option<&[f64]>) -> Result<ScfOutcome> {
    cfg.validate()?;
    if space.dim() == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let mut u = match initial {
        Some(u0) => {
            if u0.len() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    got: u0.len(),
                });
            }
            normalize_in(space, u0)?
        }
        None => {
            let lin = space.linearized_pair(None, None)?;
            normalize_in(space, &lin.vector)?
        }
    };
    let mut lambda_prev = space.rayleigh(&u)?;
    let mut alpha = cfg.mixing;
    let mut last_sign = 0.0f64;
    let mut last_change = f64::INFINITY;
    let mut alternations = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut du_hist: Vec<Vec<f64>> = Vec::new();
    let mut df_hist: Vec<Vec<f64>> = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 1..=cfg.max_iters {
        let lin = space.linearized_pair(Some(&u), Some(&u))?;
        let mu = match lin.density_rayleigh {
            Some(r) => r,
            None => space.rayleigh(&u)?,
        };
        let mut v = lin.vector;
        if dot(&v, &space.mass_apply(&u)) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let f: Vec<f64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
        if cfg.anderson_depth > 0 {
            if let Some((pu, pf)) = prev.take() {
                du_hist.push(u.iter().zip(&pu).map(|(a, b)| a - b).collect());
                df_hist.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
                if du_hist.len() > cfg.anderson_depth {
                    du_hist.remove(0);
                    df_hist.remove(0);
                }
            }
            prev = Some((u.clone(), f.clone()));
        }
        let mixed = anderson_update(space, &u, &f, &du_hist, &df_hist, alpha);
        let next = normalize_in(space, &mixed)?;
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let du = dot(&diff, &space.mass_apply(&diff)).max(0.0).sqrt();
        let dlambda = mu - lambda_prev;
        let lambda_scale = mu.abs().max(1.0);

        // Changes at round-off level carry no oscillation information, and
        // an alternating sequence that still shrinks is converging.
        if dlambda.abs() > 10.0 * cfg.lambda_tol * lambda_scale {
            let sign = dlambda.signum();
            let shrinking = dlambda.abs() < 0.5 * last_change;
            last_change = dlambda.abs();
            if last_sign != 0.0 && sign != last_sign && !shrinking {
                alternations += 1;
                if alternations >= 2 {
                    alpha *= 0.5;
                    alternations = 0;
                    du_hist.clear();
                    df_hist.clear();
                    prev = None;
                }
            } else {
                alternations = 0;
            }
            last_sign = sign;
        }

        u = next;
        lambda_prev = mu;
        if best.as_ref().is_none_or(|(b, _)| du < *b) {
            best = Some((du, u.clone()));
        }
        if du <= cfg.u_tol {
            let lambda = space.rayleigh(&u)?;
            if (lambda - mu).abs() > cfg.lambda_tol * lambda.abs().max(1.0) {
                continue;
            }
            let residual = space.residual(lambda, &u)?;
            return Ok(ScfOutcome {
                lambda,
                u,
                residual,
                iterations: it,
                converged: true,
                final_mixing: alpha,
            });
        }
    }
    let (_, u) = best.expect("at least one iteration ran");
    let lambda = space.rayleigh(&u)?;
    let residual = space.residual(lambda, &u)?;
    Ok(ScfOutcome {
        lambda,
        u,
        residual,
        iterations: cfg.max_iters,
        converged: false,
        final_mixing: alpha,
    })
}
