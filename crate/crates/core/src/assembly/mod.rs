//! P1 assembly of the forms in the weak ground-state problem:
//! stiffness `(∇u, ∇v)`, mass `(u, v)`, trap potential `(W u, v)` and the
//! frozen-density interaction term `ζ (w² u, v)`.
//!
//! Boundary vertices are eliminated, so matrices act on free coefficients
//! only. The `*_all` variants keep every vertex and exist for checks that
//! need the unconstrained operator.

mod problem;
mod quadrature;

pub use problem::{FeFunction, ProblemSpec};
pub use quadrature::QuadratureRule;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::{dot, CsrMatrix};

type Local = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dofs {
    Free,
    AllVertices,
}

fn element_dofs(mesh: &Mesh, t: usize, dofs: Dofs) -> [Option<usize>; 3] {
    let tri = mesh.triangles()[t];
    match dofs {
        Dofs::Free => tri.map(|v| mesh.dof_of_vertex(v)),
        Dofs::AllVertices => tri.map(Some),
    }
}

fn sparsity(mesh: &Mesh, dofs: Dofs) -> CsrMatrix {
    let n = match dofs {
        Dofs::Free => mesh.num_dofs(),
        Dofs::AllVertices => mesh.num_vertices(),
    };
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in 0..mesh.num_triangles() {
        let d = element_dofs(mesh, t, dofs);
        for i in d.iter().flatten() {
            for j in d.iter().flatten() {
                rows[*i].push(*j);
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable();
        row.dedup();
    }
    CsrMatrix::from_pattern(n, &rows)
}

/// Element loop in triangle order; each local matrix is scattered into the
/// zero-valued `pattern`.
fn assemble_into(
    mesh: &Mesh,
    mut pattern: CsrMatrix,
    dofs: Dofs,
    mut local: impl FnMut(usize) -> Local,
) -> Result<CsrMatrix> {
    for t in 0..mesh.num_triangles() {
        let area = mesh.area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let d = element_dofs(mesh, t, dofs);
        let k = local(t);
        for a in 0..3 {
            let Some(i) = d[a] else { continue };
            for b in 0..3 {
                if let Some(j) = d[b] {
                    pattern.add_to(i, j, k[a][b]);
                }
            }
        }
    }
    Ok(pattern)
}

pub fn local_stiffness(corners: &[[f64; 2]; 3]) -> Local {
    let area = crate::mesh::signed_area(corners[0], corners[1], corners[2]);
    let [p, q, r] = *corners;
    let g = [
        [q[1] - r[1], r[0] - q[0]],
        [r[1] - p[1], p[0] - r[0]],
        [p[1] - q[1], q[0] - p[0]],
    ];
    let scale = 1.0 / (4.0 * area);
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = scale * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    k
}

pub fn local_mass(area: f64) -> Local {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// `∫_K c(x) φ_a φ_b` by quadrature, with `c` evaluated at physical points.
fn local_weighted_mass(rule: &QuadratureRule, corners: &[[f64; 2]; 3], coeff: impl Fn(usize, [f64; 2]) -> f64) -> Local {
    let jac = 2.0 * crate::mesh::signed_area(corners[0], corners[1], corners[2]);
    let mut k = [[0.0; 3]; 3];
    for q in 0..rule.len() {
        let l = rule.points[q];
        let c = rule.weights[q] * jac * coeff(q, rule.map_point(q, corners));
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] += c * l[a] * l[b];
            }
        }
    }
    k
}

pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_into(mesh, sparsity(mesh, Dofs::Free), Dofs::Free, |t| {
        local_stiffness(&mesh.corners(t))
    })
}

/// Stiffness over all vertices, before boundary elimination.
pub fn assemble_stiffness_all(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_into(mesh, sparsity(mesh, Dofs::AllVertices), Dofs::AllVertices, |t| {
        local_stiffness(&mesh.corners(t))
    })
}

pub fn assemble_mass(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_into(mesh, sparsity(mesh, Dofs::Free), Dofs::Free, |t| local_mass(mesh.area(t)))
}

pub fn assemble_mass_all(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_into(mesh, sparsity(mesh, Dofs::AllVertices), Dofs::AllVertices, |t| {
        local_mass(mesh.area(t))
    })
}

/// `∫ c(x) φᵢ φⱼ` with the degree-4 rule; exact when `c` is quadratic.
pub fn assemble_weighted_mass(mesh: &Mesh, coeff: impl Fn([f64; 2]) -> f64) -> Result<CsrMatrix> {
    let rule = QuadratureRule::degree4();
    assemble_into(mesh, sparsity(mesh, Dofs::Free), Dofs::Free, |t| {
        local_weighted_mass(&rule, &mesh.corners(t), |_, x| coeff(x))
    })
}

pub fn assemble_potential(mesh: &Mesh, spec: &ProblemSpec) -> Result<CsrMatrix> {
    spec.validate()?;
    assemble_weighted_mass(mesh, |x| spec.potential(x))
}

/// `ζ ∫ w² φᵢ φⱼ` for a P1 density given by its values at every vertex.
pub fn assemble_density(mesh: &Mesh, vertex_values: &[f64], zeta: f64) -> Result<CsrMatrix> {
    if vertex_values.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: vertex_values.len(),
        });
    }
    density_into(mesh, sparsity(mesh, Dofs::Free), vertex_values, zeta)
}

fn density_into(mesh: &Mesh, pattern: CsrMatrix, vertex_values: &[f64], zeta: f64) -> Result<CsrMatrix> {
    if zeta == 0.0 {
        return Ok(pattern);
    }
    let rule = QuadratureRule::degree4();
    assemble_into(mesh, pattern, Dofs::Free, |t| {
        let tri = mesh.triangles()[t];
        let w = tri.map(|v| vertex_values[v]);
        local_weighted_mass(&rule, &mesh.corners(t), |q, _| {
            let l = rule.points[q];
            let wq = l[0] * w[0] + l[1] * w[1] + l[2] * w[2];
            zeta * wq * wq
        })
    })
}

/// Interaction matrix `N(w)` for a function on the same level as `mesh`.
pub fn assemble_nonlinear(mesh: &Mesh, w: &FeFunction, zeta: f64) -> Result<CsrMatrix> {
    if w.level != mesh.level_id() {
        return Err(Error::LevelMismatch {
            expected: mesh.level_id(),
            got: w.level,
        });
    }
    if w.len() != mesh.num_dofs() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_dofs(),
            got: w.len(),
        });
    }
    assemble_density(mesh, &mesh.expand(&w.values), zeta)
}

/// The assembled forms of one level plus what is needed to rebuild `N(u)`.
#[derive(Debug, Clone)]
pub struct LevelOperators<'m> {
    mesh: &'m Mesh,
    pub zeta: f64,
    pub stiffness: CsrMatrix,
    pub potential: CsrMatrix,
    pub mass: CsrMatrix,
    /// `stiffness + potential`
    pub linear: CsrMatrix,
    pattern: CsrMatrix,
}

impl<'m> LevelOperators<'m> {
    pub fn new(mesh: &'m Mesh, spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let pattern = sparsity(mesh, Dofs::Free);
        let stiffness = assemble_into(mesh, pattern.clone(), Dofs::Free, |t| {
            local_stiffness(&mesh.corners(t))
        })?;
        let mass = assemble_into(mesh, pattern.clone(), Dofs::Free, |t| local_mass(mesh.area(t)))?;
        let potential = if spec.has_potential() {
            let rule = QuadratureRule::degree4();
            assemble_into(mesh, pattern.clone(), Dofs::Free, |t| {
                local_weighted_mass(&rule, &mesh.corners(t), |_, x| spec.potential(x))
            })?
        } else {
            pattern.clone()
        };
        let linear = stiffness.add(&potential);
        Ok(LevelOperators {
            mesh,
            zeta: spec.zeta,
            stiffness,
            potential,
            mass,
            linear,
            pattern,
        })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn level(&self) -> usize {
        self.mesh.level_id()
    }

    /// `N(w)` for free coefficients `w` of this level.
    pub fn nonlinear(&self, w: &[f64]) -> Result<CsrMatrix> {
        self.check_len(w)?;
        density_into(self.mesh, self.pattern.clone(), &self.mesh.expand(w), self.zeta)
    }

    /// `stiffness + potential + N(w)`
    pub fn linearized(&self, w: &[f64]) -> Result<CsrMatrix> {
        if self.zeta == 0.0 {
            return Ok(self.linear.clone());
        }
        Ok(self.linear.add(&self.nonlinear(w)?))
    }

    /// `(A_stiff + A_W + N(u)) u`
    pub fn apply(&self, u: &FeFunction) -> Result<FeFunction> {
        self.check_level(u)?;
        let a = self.linearized(&u.values)?;
        Ok(FeFunction::new(u.level, a.mul_vec(&u.values)))
    }

    /// `uᵀ(A_stiff + A_W + N(u))u / uᵀMu`
    pub fn rayleigh(&self, u: &FeFunction) -> Result<f64> {
        self.check_level(u)?;
        let denom = self.mass.quad_form(&u.values);
        if !(denom > 0.0) {
            return Err(Error::ZeroVector("rayleigh"));
        }
        let num = dot(&u.values, &self.apply(u)?.values);
        Ok(num / denom)
    }

    /// `uᵀ(A_stiff + A_W)u + ½ uᵀN(u)u`
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let lin = self.linear.quad_form(u);
        let nl = if self.zeta == 0.0 { 0.0 } else { self.nonlinear(u)?.quad_form(u) };
        Ok(lin + 0.5 * nl)
    }

    /// `‖(A_stiff + A_W + N(u))u − λMu‖₂`
    pub fn residual_norm(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        let au = self.linearized(u)?.mul_vec(u);
        let mu = self.mass.mul_vec(u);
        Ok(au
            .iter()
            .zip(&mu)
            .map(|(a, m)| (a - lambda * m).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }

    fn check_level(&self, u: &FeFunction) -> Result<()> {
        if u.level != self.level() {
            return Err(Error::LevelMismatch {
                expected: self.level(),
                got: u.level,
            });
        }
        self.check_len(&u.values)
    }
}
