//! Conversion from physical condensate parameters to the dimensionless
//! problem `−Δu + W u + ζ|u|²u = λu`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::ProblemSpec;
use crate::error::{Error, Result};
use crate::mesh::Domain;

/// Physical inputs; the trap is `W̃(x) = ½ m (ω₁² x₁² + ω₂² x₂²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParameters {
    pub hbar: f64,
    pub mass: f64,
    pub scattering_length: f64,
    pub particles: f64,
    pub trap_frequencies: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    pub spec: ProblemSpec,
    /// `ħ²/(2m)`: multiplies a computed `λ` to give the chemical potential `μ`.
    pub mu_per_lambda: f64,
}

impl Nondimensional {
    pub fn chemical_potential(&self, lambda: f64) -> f64 {
        lambda * self.mu_per_lambda
    }

    pub fn eigenvalue(&self, mu: f64) -> f64 {
        mu / self.mu_per_lambda
    }
}

pub fn nondimensionalize(p: &PhysicalParameters, domain: Domain) -> Result<Nondimensional> {
    if !(p.mass > 0.0 && p.mass.is_finite()) {
        return Err(Error::InvalidProblem(format!("mass must be positive, got {}", p.mass)));
    }
    if !(p.hbar > 0.0 && p.hbar.is_finite()) {
        return Err(Error::InvalidProblem(format!("hbar must be positive, got {}", p.hbar)));
    }
    if !(p.particles >= 1.0) {
        return Err(Error::InvalidProblem(format!(
            "particle number must be at least 1, got {}",
            p.particles
        )));
    }
    let scale = 2.0 * p.mass / (p.hbar * p.hbar);
    let gamma = p.trap_frequencies.map(|w| scale * 0.5 * p.mass * w * w);
    let zeta = 8.0 * PI * p.scattering_length * p.particles;
    Ok(Nondimensional {
        spec: ProblemSpec::new(domain, gamma, zeta)?,
        mu_per_lambda: 1.0 / scale,
    })
}
