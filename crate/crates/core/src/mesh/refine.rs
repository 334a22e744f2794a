use std::collections::{HashMap, HashSet};

use super::{edge_key, Mesh};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Where a fine-level vertex comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexOrigin {
    Inherited(usize),
    Midpoint(usize, usize),
}

/// Coefficient transfer from a coarse level to a nested fine level.
///
/// `dofs` acts on free coefficients (boundary values are zero and dropped),
/// `vertices` on the full vertex vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    pub coarse_level: usize,
    pub fine_level: usize,
    pub dofs: CsrMatrix,
    pub vertices: CsrMatrix,
}

impl Prolongation {
    pub fn identity(mesh: &Mesh) -> Self {
        Prolongation {
            coarse_level: mesh.level_id(),
            fine_level: mesh.level_id(),
            dofs: CsrMatrix::identity(mesh.num_dofs()),
            vertices: CsrMatrix::identity(mesh.num_vertices()),
        }
    }

    pub(crate) fn from_origins(coarse: &Mesh, fine: &Mesh, origins: &[VertexOrigin]) -> Self {
        let mut vtx = Vec::with_capacity(2 * origins.len());
        let mut dof = Vec::with_capacity(2 * origins.len());
        for (v, origin) in origins.iter().enumerate() {
            let parents: &[(usize, f64)] = match *origin {
                VertexOrigin::Inherited(p) => &[(p, 1.0)],
                VertexOrigin::Midpoint(a, b) => &[(a, 0.5), (b, 0.5)],
            };
            for &(p, w) in parents {
                vtx.push((v, p, w));
                if let (Some(fd), Some(cd)) = (fine.dof_of_vertex(v), coarse.dof_of_vertex(p)) {
                    dof.push((fd, cd, w));
                }
            }
        }
        Prolongation {
            coarse_level: coarse.level_id(),
            fine_level: fine.level_id(),
            dofs: CsrMatrix::from_triplets(fine.num_dofs(), coarse.num_dofs(), &dof),
            vertices: CsrMatrix::from_triplets(fine.num_vertices(), coarse.num_vertices(), &vtx),
        }
    }

    /// `next ∘ self`: transfer from `self.coarse_level` to `next.fine_level`.
    pub fn then(&self, next: &Prolongation) -> Prolongation {
        Prolongation {
            coarse_level: self.coarse_level,
            fine_level: next.fine_level,
            dofs: next.dofs.matmul(&self.dofs),
            vertices: next.vertices.matmul(&self.vertices),
        }
    }

    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        self.dofs.mul_vec(coarse)
    }
}

struct MidpointTable<'a> {
    coarse: &'a Mesh,
    vertices: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    origins: Vec<VertexOrigin>,
    created: HashMap<(usize, usize), usize>,
    boundary_edges: HashSet<(usize, usize)>,
}

impl<'a> MidpointTable<'a> {
    fn new(coarse: &'a Mesh) -> Self {
        let boundary_edges = coarse
            .edge_map()
            .into_iter()
            .filter(|(_, tris)| tris.len() == 1)
            .map(|(e, _)| e)
            .collect();
        MidpointTable {
            coarse,
            vertices: coarse.vertices().to_vec(),
            boundary: coarse.boundary_flags().to_vec(),
            origins: (0..coarse.num_vertices()).map(VertexOrigin::Inherited).collect(),
            created: HashMap::new(),
            boundary_edges,
        }
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = self.created.get(&key) {
            return m;
        }
        let (pa, pb) = (self.coarse.vertices()[key.0], self.coarse.vertices()[key.1]);
        let m = self.vertices.len();
        self.vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        self.boundary.push(self.boundary_edges.contains(&key));
        self.origins.push(VertexOrigin::Midpoint(key.0, key.1));
        self.created.insert(key, m);
        m
    }

    fn finish(self, triangles: Vec<[usize; 3]>) -> Result<(Mesh, Prolongation)> {
        let fine = Mesh::new(
            self.coarse.domain(),
            self.vertices,
            triangles,
            self.boundary,
            self.coarse.level_id() + 1,
        )?;
        let prolongation = Prolongation::from_origins(self.coarse, &fine, &self.origins);
        Ok((fine, prolongation))
    }
}

/// Splits every triangle into four similar children by joining edge
/// midpoints. Coarse vertices keep their indices.
pub fn refine_regular(mesh: &Mesh) -> Result<(Mesh, Prolongation)> {
    let mut table = MidpointTable::new(mesh);
    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    for &[a, b, c] in mesh.triangles() {
        let mab = table.midpoint(a, b);
        let mbc = table.midpoint(b, c);
        let mca = table.midpoint(c, a);
        // Each child keeps the vertex playing the role of `a` in slot 0, so
        // newest-vertex tags stay similar to the parent's.
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mbc, mca, mab]);
    }
    table.finish(triangles)
}

/// Newest-vertex bisection of the marked triangles plus the closure needed to
/// remove hanging nodes.
///
/// Every triangle that has a bisected edge also gets its refinement edge
/// bisected. Splitting then proceeds recursively: a child is split again when
/// its refinement edge (an edge of the parent) was marked. All new vertices
/// are midpoints of input edges.
pub fn bisect_marked(mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, Prolongation)> {
    let nt = mesh.num_triangles();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for &t in marked {
        if t >= nt {
            return Err(Error::TriangleOutOfRange { index: t, count: nt });
        }
        let [_, b, c] = mesh.triangles()[t];
        edges.insert(edge_key(b, c));
    }

    let max_sweeps = nt + 2;
    let mut sweeps = 0;
    loop {
        let mut changed = false;
        for &[a, b, c] in mesh.triangles() {
            let refinement = edge_key(b, c);
            if edges.contains(&refinement) {
                continue;
            }
            if edges.contains(&edge_key(a, b)) || edges.contains(&edge_key(c, a)) {
                edges.insert(refinement);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::ClosureDiverged { sweeps });
        }
    }

    let mut table = MidpointTable::new(mesh);
    let mut triangles = Vec::with_capacity(nt + 2 * edges.len());
    let mut stack = Vec::new();
    for &tri in mesh.triangles() {
        stack.push(tri);
        while let Some(t) = stack.pop() {
            let [a, b, c] = t;
            if edges.contains(&edge_key(b, c)) {
                let m = table.midpoint(b, c);
                // Pushed in reverse so the (m, a, b) child is emitted first.
                stack.push([m, c, a]);
                stack.push([m, a, b]);
            } else {
                triangles.push(t);
            }
        }
    }
    table.finish(triangles)
}
