//! Reference eigenpairs for error measurement, with an on-disk cache.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{FeFunction, LevelOperators, ProblemSpec};
use crate::eigen::{direct_solve_with, InnerConfig, ScfConfig};
use crate::error::{Error, Result};
use crate::mesh::Hierarchy;

pub const CACHE_ENV: &str = "GPE_MLC_CACHE_DIR";

/// Three-level extrapolation of the reference eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Richardson {
    /// `λ` on the levels `L−2, L−1, L`.
    pub lambdas: [f64; 3],
    /// `log₂((λ_{L−2} − λ_{L−1}) / (λ_{L−1} − λ_L))`
    pub order: f64,
    pub extrapolated: f64,
}

impl Richardson {
    pub fn from_lambdas(lambdas: [f64; 3]) -> Self {
        let d1 = lambdas[0] - lambdas[1];
        let d2 = lambdas[1] - lambdas[2];
        let order = (d1 / d2).log2();
        let extrapolated = lambdas[2] - d2 / (2f64.powf(order) - 1.0);
        Richardson {
            lambdas,
            order,
            extrapolated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub key: String,
    pub lambda: f64,
    /// Hierarchy level the reference lives on.
    pub level: usize,
    pub dofs: usize,
    pub u: Option<Vec<f64>>,
    pub richardson: Option<Richardson>,
}

impl Reference {
    /// `λ` only, e.g. from a published value; no function errors.
    pub fn eigenvalue_only(lambda: f64) -> Self {
        Reference {
            key: String::new(),
            lambda,
            level: 0,
            dofs: 0,
            u: None,
            richardson: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            lambda: f64,
        }
        let f: File = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if !f.lambda.is_finite() {
            return Err(Error::config("reference_file", "lambda must be finite"));
        }
        Ok(Reference::eigenvalue_only(f.lambda))
    }

    /// `(H¹ seminorm, L²)` distance between `u` and the reference function,
    /// after prolongating `u` to the reference level.
    pub fn function_errors(&self, hier: &Hierarchy, u: &FeFunction) -> Result<Option<(f64, f64)>> {
        let Some(reference) = &self.u else {
            return Ok(None);
        };
        let lifted = hier.composite_prolongation(u.level, self.level)?.apply(&u.values);
        if lifted.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: lifted.len(),
            });
        }
        let mesh = hier.mesh(self.level)?;
        let k = crate::assembly::assemble_stiffness(mesh)?;
        let m = crate::assembly::assemble_mass(mesh)?;
        let d: Vec<f64> = lifted.iter().zip(reference).map(|(a, b)| a - b).collect();
        Ok(Some((k.quad_form(&d).max(0.0).sqrt(), m.quad_form(&d).max(0.0).sqrt())))
    }
}

/// Content-addressed store of reference solutions. The file name is the
/// SHA-256 of the key; the key itself is stored and compared on load.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    /// `$GPE_MLC_CACHE_DIR` when set, otherwise `fallback`.
    pub fn from_env(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => ReferenceCache::new(PathBuf::from(d)),
            _ => ReferenceCache::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("reference-{}.json", hash_key(key)))
    }

    /// The cached entry for `key`, or `None` on a miss, an unreadable file or
    /// a stored key that differs from `key`.
    pub fn load(&self, key: &str) -> Option<Reference> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let r: Reference = serde_json::from_str(&text).ok()?;
        (r.key == key).then_some(r)
    }

    pub fn store(&self, r: &Reference) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&r.key);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(r)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

pub fn hash_key(key: &str) -> String {
    Sha256::digest(key.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Key covering everything a reference solve depends on. `mesh_id`
/// identifies the reference hierarchy.
pub fn reference_key(mesh_id: &str, spec: &ProblemSpec, scf: &ScfConfig, inner: &InnerConfig) -> String {
    format!(
        "gpe-mlc-reference-v1|{mesh_id}|{}|{}|{}",
        serde_json::to_string(spec).expect("spec serializes"),
        serde_json::to_string(scf).expect("scf serializes"),
        serde_json::to_string(inner).expect("inner serializes"),
    )
}

#[derive(Debug, Clone)]
pub struct ReferenceResult {
    pub reference: Reference,
    pub cache_hit: bool,
}

/// Direct solve on the finest level of `hier`, plus the two levels below it
/// for the extrapolation check when the hierarchy is deep enough.
pub fn reference_solve(
    hier: &Hierarchy,
    spec: &ProblemSpec,
    scf: &ScfConfig,
    inner: &InnerConfig,
    key: String,
    cache: Option<&ReferenceCache>,
) -> Result<ReferenceResult> {
    if let Some(hit) = cache.and_then(|c| c.load(&key)) {
        return Ok(ReferenceResult {
            reference: hit,
            cache_hit: true,
        });
    }
    let top = hier.num_levels() - 1;
    let solve = |level: usize| -> Result<(f64, FeFunction)> {
        let ops = LevelOperators::new(hier.mesh(level)?, spec)?;
        let d = direct_solve_with(&ops, hier, level, scf, inner, None)?;
        if !d.pair.converged {
            return Err(Error::EigenNotConverged {
                iterations: d.pair.scf_iters,
                residual: d.pair.residual,
            });
        }
        Ok((d.pair.lambda, d.pair.u))
    };
    let (lambda, u) = solve(top)?;
    let richardson = if top >= hier.coarse_level() + 2 {
        let l2 = solve(top - 2)?.0;
        let l1 = solve(top - 1)?.0;
        Some(Richardson::from_lambdas([l2, l1, lambda]))
    } else {
        None
    };
    let reference = Reference {
        key,
        lambda,
        level: top,
        dofs: u.len(),
        u: Some(u.values),
        richardson,
    };
    if let Some(c) = cache {
        c.store(&reference)?;
    }
    Ok(ReferenceResult {
        reference,
        cache_hit: false,
    })
}
