use std::collections::BTreeMap;

use super::{Domain, Mesh};
use crate::error::{Error, Result};

/// Structured mesh of `(0,1)²` with `n` cells per side, each cell cut along
/// its south-west/north-east diagonal.
pub fn build_unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMeshParameter(
            "unit square needs at least one cell per side".into(),
        ));
    }
    let cells: Vec<(i64, i64)> = (0..n as i64)
        .flat_map(|j| (0..n as i64).map(move |i| (i, j)))
        .collect();
    grid_mesh(Domain::UnitSquare, n, &cells)
}

/// Structured mesh of the L-shape `(-1,1)² \ [0,1)×(-1,0]` with `n` cells per
/// unit length.
pub fn build_lshape(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMeshParameter(
            "L-shape needs at least one cell per unit side".into(),
        ));
    }
    let n = n as i64;
    let cells: Vec<(i64, i64)> = (-n..n)
        .flat_map(|j| (-n..n).map(move |i| (i, j)))
        .filter(|&(i, j)| !(i >= 0 && j < 0))
        .collect();
    grid_mesh(Domain::LShape, n as usize, &cells)
}

/// Triangulates a union of grid cells of width `1/n`. Cell `(i, j)` has its
/// lower-left corner at `(i/n, j/n)`. The right-angle vertex of each triangle
/// goes in the newest-vertex slot, which tags the hypotenuse (the longest
/// edge) for bisection.
fn grid_mesh(domain: Domain, n: usize, cells: &[(i64, i64)]) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &(i, j) in cells {
        for corner in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
            index.entry((corner.1, corner.0)).or_insert(0);
        }
    }
    // Row-major numbering: by y, then x.
    let mut vertices = Vec::with_capacity(index.len());
    for (k, (&(j, i), slot)) in index.iter_mut().enumerate() {
        *slot = k;
        vertices.push([i as f64 * h, j as f64 * h]);
    }
    let id = |i: i64, j: i64| index[&(j, i)];
    let mut triangles = Vec::with_capacity(2 * cells.len());
    for &(i, j) in cells {
        let p00 = id(i, j);
        let p10 = id(i + 1, j);
        let p01 = id(i, j + 1);
        let p11 = id(i + 1, j + 1);
        triangles.push([p10, p11, p00]);
        triangles.push([p01, p00, p11]);
    }
    let boundary = vertices.iter().map(|&p| domain.on_boundary(p)).collect();
    Mesh::new(Some(domain), vertices, triangles, boundary, 0)
}
