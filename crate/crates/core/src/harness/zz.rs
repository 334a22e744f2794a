//! Gradient-recovery error indicators and bulk marking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZzIndicators {
    /// `η_K` per triangle.
    pub eta: Vec<f64>,
    /// `(Σ η_K²)^{1/2}`
    pub total: f64,
}

impl ZzIndicators {
    pub fn from_parts(eta: Vec<f64>) -> Self {
        let total = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
        ZzIndicators { eta, total }
    }
}

/// Recovered gradient at every vertex: the area-weighted mean of the
/// element gradients of `vertex_values` around it.
pub fn recovered_gradient(mesh: &Mesh, vertex_values: &[f64]) -> Vec<[f64; 2]> {
    let mut acc = vec![[0.0; 2]; mesh.num_vertices()];
    let mut weight = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = element_gradient(mesh, t, vertex_values);
        let area = mesh.area(t);
        for &v in tri {
            acc[v][0] += area * g[0];
            acc[v][1] += area * g[1];
            weight[v] += area;
        }
    }
    acc.iter()
        .zip(&weight)
        .map(|(a, &w)| if w > 0.0 { [a[0] / w, a[1] / w] } else { [0.0, 0.0] })
        .collect()
}

fn element_gradient(mesh: &Mesh, t: usize, vertex_values: &[f64]) -> [f64; 2] {
    let grads = mesh.barycentric_gradients(t);
    let tri = mesh.triangles()[t];
    let mut g = [0.0; 2];
    for (i, &v) in tri.iter().enumerate() {
        g[0] += vertex_values[v] * grads[i][0];
        g[1] += vertex_values[v] * grads[i][1];
    }
    g
}

/// `η_K = ‖G(u_h) − ∇u_h‖_{L²(K)}` with `G` the piecewise linear recovered
/// gradient. The integral is exact: the integrand is a quadratic in the
/// vertex differences, integrated with the P1 element mass matrix.
pub fn zz_estimate(mesh: &Mesh, vertex_values: &[f64]) -> Result<ZzIndicators> {
    if vertex_values.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: vertex_values.len(),
        });
    }
    let recovered = recovered_gradient(mesh, vertex_values);
    let eta = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let g = element_gradient(mesh, t, vertex_values);
            let area = mesh.area(t);
            let mut sq = 0.0;
            for c in 0..2 {
                let d = [
                    recovered[tri[0]][c] - g[c],
                    recovered[tri[1]][c] - g[c],
                    recovered[tri[2]][c] - g[c],
                ];
                let sum = d[0] + d[1] + d[2];
                let sumsq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                sq += area / 12.0 * (sumsq + sum * sum);
            }
            sq.max(0.0).sqrt()
        })
        .collect();
    Ok(ZzIndicators::from_parts(eta))
}

/// Smallest set of triangles, taken in order of decreasing indicator (ties
/// by index), whose squared indicators sum to at least `θ² η²`.
pub fn dorfler_mark(eta: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::config("dorfler_theta", format!("must lie in (0, 1), got {theta}")));
    }
    if eta.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::NonFinite("error indicators"));
    }
    let total: f64 = eta.iter().map(|e| e * e).sum();
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += eta[t] * eta[t];
        marked.push(t);
    }
    if total == 0.0 {
        marked.clear();
    }
    Ok(marked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square;

    #[test]
    fn affine_functions_have_zero_indicators() {
        let m = build_unit_square(4).unwrap();
        let u = m.interpolate_vertices(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        let z = zz_estimate(&m, &u).unwrap();
        assert!(z.eta.iter().all(|&e| e < 1e-13));
    }

    #[test]
    fn marking_takes_minimal_prefix() {
        let eta = [1.0, 3.0, 2.0, 2.0];
        // θ²η² = 0.25 · 18 = 4.5: the largest indicator alone suffices.
        assert_eq!(dorfler_mark(&eta, 0.5).unwrap(), vec![1]);
        // 0.81 · 18 = 14.58 needs 9 + 4 + 4 = 17.
        assert_eq!(dorfler_mark(&eta, 0.9).unwrap(), vec![1, 2, 3]);
        assert!(dorfler_mark(&[0.0, 0.0], 0.5).unwrap().is_empty());
        assert!(dorfler_mark(&eta, 1.0).is_err());
    }
}
