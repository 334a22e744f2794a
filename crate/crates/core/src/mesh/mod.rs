//! Conforming P1 triangulations of the unit square and the L-shape, their
//! uniform and newest-vertex refinements, and the transfer maps between
//! nested levels.
//!
//! Triangles are stored counter-clockwise with the *newest vertex* in slot
//! 0, so the refinement edge of `[a, b, c]` is always `(b, c)`.

mod build;
mod hierarchy;
mod io;
mod refine;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{build_lshape, build_unit_square};
pub use hierarchy::{Hierarchy, Refinement};
pub use io::{read_mesh, write_mesh};
pub use refine::{bisect_marked, refine_regular, Prolongation, VertexOrigin};

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    /// Whether `p` lies on the boundary of the domain.
    pub fn on_boundary(self, p: [f64; 2]) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() <= GEOM_TOL;
        let [x, y] = p;
        match self {
            Domain::UnitSquare => near(x, 0.0) || near(x, 1.0) || near(y, 0.0) || near(y, 1.0),
            Domain::LShape => {
                near(x.abs(), 1.0)
                    || near(y.abs(), 1.0)
                    || (near(y, 0.0) && x >= -GEOM_TOL)
                    || (near(x, 0.0) && y <= GEOM_TOL)
            }
        }
    }

    pub fn contains(self, p: [f64; 2]) -> bool {
        let [x, y] = p;
        let in_box = |lo: f64, hi: f64, v: f64| v >= lo - GEOM_TOL && v <= hi + GEOM_TOL;
        match self {
            Domain::UnitSquare => in_box(0.0, 1.0, x) && in_box(0.0, 1.0, y),
            Domain::LShape => {
                in_box(-1.0, 1.0, x) && in_box(-1.0, 1.0, y) && !(x > GEOM_TOL && y < -GEOM_TOL)
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::UnitSquare => "unit-square",
            Domain::LShape => "l-shape",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-square" | "unit_square" | "square" => Ok(Domain::UnitSquare),
            "l-shape" | "l_shape" | "lshape" => Ok(Domain::LShape),
            other => Err(Error::config("domain", format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Option<Domain>,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
    level_id: usize,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl Mesh {
    /// Assembles a mesh and numbers the interior vertices as degrees of freedom
    /// in vertex order. Rejects triangles without strictly positive area.
    pub fn new(
        domain: Option<Domain>,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        level_id: usize,
    ) -> Result<Self> {
        if boundary.len() != vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                got: boundary.len(),
            });
        }
        for (index, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMeshParameter(format!(
                    "triangle {index} references a missing vertex"
                )));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index, area });
            }
        }
        let mut dof_of_vertex = vec![None; vertices.len()];
        let mut vertex_of_dof = Vec::new();
        for (v, &on_bdry) in boundary.iter().enumerate() {
            if !on_bdry {
                dof_of_vertex[v] = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }
        Ok(Mesh {
            domain,
            vertices,
            triangles,
            boundary,
            dof_of_vertex,
            vertex_of_dof,
            level_id,
        })
    }

    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    pub fn vertex_of_dof(&self, d: usize) -> usize {
        self.vertex_of_dof[d]
    }

    pub fn level_id(&self) -> usize {
        self.level_id
    }

    pub(crate) fn with_level(mut self, level_id: usize) -> Self {
        self.level_id = level_id;
        self
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        signed_area(p, q, r)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [p, q, r] = self.corners(t);
        dist(p, q).max(dist(q, r)).max(dist(r, p))
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let c = self.corners(t);
            for k in 0..3 {
                let o = c[k];
                let u = [c[(k + 1) % 3][0] - o[0], c[(k + 1) % 3][1] - o[1]];
                let w = [c[(k + 2) % 3][0] - o[0], c[(k + 2) % 3][1] - o[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                best = best.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        best
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p, q, r] = self.corners(t);
        let two_area = 2.0 * signed_area(p, q, r);
        [
            [(q[1] - r[1]) / two_area, (r[0] - q[0]) / two_area],
            [(r[1] - p[1]) / two_area, (p[0] - r[0]) / two_area],
            [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area],
        ]
    }

    /// Map from each undirected edge to the triangles that contain it, in
    /// triangle order.
    pub fn edge_map(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                map.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
            }
        }
        map
    }

    /// Checks that every edge is shared by at most two triangles and that every
    /// edge seen only once lies on the boundary. A hanging node always leaves
    /// an unmatched interior edge behind, so this also rules those out.
    pub fn check_conformity(&self) -> Result<()> {
        for (&(a, b), tris) in &self.edge_map() {
            match tris.len() {
                1 => {
                    let mid = [
                        0.5 * (self.vertices[a][0] + self.vertices[b][0]),
                        0.5 * (self.vertices[a][1] + self.vertices[b][1]),
                    ];
                    let on_bdry = match self.domain {
                        Some(d) => d.on_boundary(mid) && self.boundary[a] && self.boundary[b],
                        None => self.boundary[a] && self.boundary[b],
                    };
                    if !on_bdry {
                        return Err(Error::NonConforming(format!(
                            "interior edge ({a}, {b}) belongs to a single triangle"
                        )));
                    }
                }
                2 => {}
                n => {
                    return Err(Error::NonConforming(format!(
                        "edge ({a}, {b}) shared by {n} triangles"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Checks that the boundary flags coincide with the geometric boundary.
    pub fn check_boundary_flags(&self) -> Result<()> {
        let Some(domain) = self.domain else {
            return Ok(());
        };
        for (v, &p) in self.vertices.iter().enumerate() {
            if domain.on_boundary(p) != self.boundary[v] {
                return Err(Error::NonConforming(format!(
                    "vertex {v} at ({}, {}) has boundary flag {}",
                    p[0], p[1], self.boundary[v]
                )));
            }
        }
        Ok(())
    }

    /// Runs every structural check: orientation, conformity, boundary flags
    /// and area conservation.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.num_triangles() {
            let area = self.area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }
        self.check_conformity()?;
        self.check_boundary_flags()?;
        if let Some(domain) = self.domain {
            let total = self.total_area();
            if ((total - domain.area()) / domain.area()).abs() > 1e-12 {
                return Err(Error::NonConforming(format!(
                    "total area {total} differs from domain area {}",
                    domain.area()
                )));
            }
        }
        Ok(())
    }

    /// Interpolates `f` at all vertices.
    pub fn interpolate_vertices(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.vertices.iter().map(|&p| f(p)).collect()
    }

    /// Interpolates `f` at the interior vertices (the free coefficients).
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.vertex_of_dof.iter().map(|&v| f(self.vertices[v])).collect()
    }

    /// Expands free coefficients to all vertices with zero boundary values.
    pub fn expand(&self, dofs: &[f64]) -> Vec<f64> {
        assert_eq!(dofs.len(), self.num_dofs());
        self.dof_of_vertex
            .iter()
            .map(|d| d.map_or(0.0, |d| dofs[d]))
            .collect()
    }

    /// Restricts vertex values to the free coefficients.
    pub fn restrict(&self, vertex_values: &[f64]) -> Vec<f64> {
        self.vertex_of_dof.iter().map(|&v| vertex_values[v]).collect()
    }

    /// Finds a triangle containing `p` and the barycentric coordinates of `p`
    /// in it. Linear search.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.corners(t);
            let area = signed_area(a, b, c);
            let l = [
                signed_area(p, b, c) / area,
                signed_area(a, p, c) / area,
                signed_area(a, b, p) / area,
            ];
            if l.iter().all(|&x| x >= -1e-12) {
                return Some((t, l));
            }
        }
        None
    }

    /// Evaluates the P1 function with the given vertex values at `p`.
    pub fn evaluate(&self, vertex_values: &[f64], p: [f64; 2]) -> Option<f64> {
        let (t, l) = self.locate(p)?;
        let tri = self.triangles[t];
        Some((0..3).map(|k| l[k] * vertex_values[tri[k]]).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lshape_boundary_geometry() {
        let d = Domain::LShape;
        assert!(d.on_boundary([0.0, 0.0]));
        assert!(d.on_boundary([0.5, 0.0]));
        assert!(d.on_boundary([0.0, -0.5]));
        assert!(!d.on_boundary([-0.5, 0.0]));
        assert!(!d.on_boundary([0.0, 0.5]));
        assert!(!d.contains([0.5, -0.5]));
        assert!(d.contains([-0.5, -0.5]));
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let err = Mesh::new(
            None,
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            vec![true; 3],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { index: 0, .. }));
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let err = Mesh::new(
            None,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 2, 1]],
            vec![true; 3],
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle { .. }));
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let m = build_unit_square(3).unwrap();
        for t in 0..m.num_triangles() {
            let g = m.barycentric_gradients(t);
            for k in 0..2 {
                assert!((g[0][k] + g[1][k] + g[2][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("l-shape".parse::<Domain>().unwrap(), Domain::LShape);
        assert_eq!("unit-square".parse::<Domain>().unwrap(), Domain::UnitSquare);
        assert!("disk".parse::<Domain>().is_err());
        assert_eq!(Domain::LShape.to_string(), "l-shape");
    }
}
