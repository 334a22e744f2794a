use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Domain;

/// Trap coefficients `W(x) = γ₁x₁² + γ₂x₂²`, interaction strength `ζ` and
/// the computational domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub gamma: [f64; 2],
    pub zeta: f64,
}

impl ProblemSpec {
    pub fn new(domain: Domain, gamma: [f64; 2], zeta: f64) -> Result<Self> {
        let spec = ProblemSpec { domain, gamma, zeta };
        spec.validate()?;
        Ok(spec)
    }

    /// `W = x₁² + x₂²`, `ζ = 1`.
    pub fn harmonic(domain: Domain) -> Self {
        ProblemSpec {
            domain,
            gamma: [1.0, 1.0],
            zeta: 1.0,
        }
    }

    /// Pure Dirichlet Laplacian: `W ≡ 0`, `ζ = 0`.
    pub fn laplacian(domain: Domain) -> Self {
        ProblemSpec {
            domain,
            gamma: [0.0, 0.0],
            zeta: 0.0,
        }
    }

    /// `γᵢ = 0` is accepted so the pure Laplacian can serve as an analytic
    /// anchor; negative or non-finite values are not.
    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidProblem(format!(
                "trap coefficients must be finite and nonnegative, got {:?}",
                self.gamma
            )));
        }
        if !self.zeta.is_finite() || self.zeta < 0.0 {
            return Err(Error::InvalidProblem(format!(
                "interaction strength must be finite and nonnegative, got {}",
                self.zeta
            )));
        }
        Ok(())
    }

    pub fn potential(&self, p: [f64; 2]) -> f64 {
        self.gamma[0] * p[0] * p[0] + self.gamma[1] * p[1] * p[1]
    }

    pub fn has_potential(&self) -> bool {
        self.gamma.iter().any(|&g| g != 0.0)
    }
}

/// Coefficient vector over the free (interior) dofs of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub level: usize,
    pub values: Vec<f64>,
}

impl FeFunction {
    pub fn new(level: usize, values: Vec<f64>) -> Self {
        FeFunction { level, values }
    }

    pub fn zeros(level: usize, n: usize) -> Self {
        FeFunction {
            level,
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
