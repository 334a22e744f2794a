//! Independent oracles shared by the integration tests. The oracles read
//! only mesh accessors and the sparse container; `energy_contraction` is the
//! one measurement helper that drives a solver under test.

#![allow(dead_code, clippy::needless_range_loop, clippy::manual_memcpy)]

use std::collections::BTreeSet;

use gpe_mlc::mesh::Mesh;
use gpe_mlc::sparse::CsrMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn csr_to_dense(a: &CsrMatrix) -> Dense {
    let mut d = vec![vec![0.0; a.ncols()]; a.nrows()];
    for (i, row) in d.iter_mut().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            row[j] += v;
        }
    }
    d
}

pub fn mat_vec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Cyclic Jacobi rotations. Returns eigenvalues in ascending order and the
/// matching orthonormal eigenvectors as rows.
pub fn jacobi_eigen(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Lower-triangular `L` with `L Lᵀ = m`.
pub fn cholesky(m: &Dense) -> Dense {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                assert!(d > 0.0, "oracle Cholesky: matrix not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

pub fn forward_solve(l: &Dense, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

pub fn backward_solve_transposed(l: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// `a⁻¹ b` for SPD `a`.
pub fn spd_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let l = cholesky(a);
    backward_solve_transposed(&l, &forward_solve(&l, b))
}

/// All eigenvalues of the pencil `(a, m)` through `L⁻¹ a L⁻ᵀ`, plus the
/// M-normalized eigenvector of the smallest one.
pub fn generalized_eigen(a: &Dense, m: &Dense) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let l = cholesky(m);
    // c = L⁻¹ a L⁻ᵀ, built column by column.
    let mut tmp = vec![vec![0.0; n]; n];
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a[i][j]).collect();
        let y = forward_solve(&l, &col);
        for i in 0..n {
            tmp[i][j] = y[i];
        }
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        let y = forward_solve(&l, &tmp[i]);
        for j in 0..n {
            c[i][j] = y[j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = s;
            c[j][i] = s;
        }
    }
    let (values, vectors) = jacobi_eigen(&c);
    let x = backward_solve_transposed(&l, &vectors[0]);
    (values, x)
}

pub fn area(t: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1])).abs()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫_K Π_k f_k` where each `f_k` is the linear function with vertex values
/// `forms[k]`. Each product term `λ₀^i λ₁^j λ₂^l` integrates to
/// `2|K| i! j! l! / (i+j+l+2)!`.
pub fn integrate_linear_forms(t: &[[f64; 2]; 3], forms: &[[f64; 3]]) -> f64 {
    let k = forms.len();
    let mut total = 0.0;
    for choice in 0..3usize.pow(k as u32) {
        let mut c = choice;
        let mut exps = [0usize; 3];
        let mut coeff = 1.0;
        for f in forms {
            let slot = c % 3;
            c /= 3;
            exps[slot] += 1;
            coeff *= f[slot];
        }
        if coeff != 0.0 {
            total += coeff * factorial(exps[0]) * factorial(exps[1]) * factorial(exps[2]) / factorial(k + 2);
        }
    }
    2.0 * area(t) * total
}

pub fn x_form(t: &[[f64; 2]; 3]) -> [f64; 3] {
    [t[0][0], t[1][0], t[2][0]]
}

pub fn y_form(t: &[[f64; 2]; 3]) -> [f64; 3] {
    [t[0][1], t[1][1], t[2][1]]
}

pub fn hat(a: usize) -> [f64; 3] {
    let mut h = [0.0; 3];
    h[a] = 1.0;
    h
}

/// `∫_K x^a y^b` exactly.
pub fn monomial_integral(t: &[[f64; 2]; 3], a: usize, b: usize) -> f64 {
    let mut forms = vec![x_form(t); a];
    forms.extend(std::iter::repeat_n(y_form(t), b));
    integrate_linear_forms(t, &forms)
}

/// P1 stiffness through the cotangent formula:
/// `K_ij = −½ cot θ_k` for the angle `θ_k` opposite edge `ij`.
pub fn cot_stiffness(t: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let cot_at = |k: usize| {
        let p = t[k];
        let u = [t[(k + 1) % 3][0] - p[0], t[(k + 1) % 3][1] - p[1]];
        let v = [t[(k + 2) % 3][0] - p[0], t[(k + 2) % 3][1] - p[1]];
        let d = u[0] * v[0] + u[1] * v[1];
        let c = (u[0] * v[1] - u[1] * v[0]).abs();
        d / c
    };
    let mut k = [[0.0; 3]; 3];
    for opp in 0..3 {
        let (i, j) = ((opp + 1) % 3, (opp + 2) % 3);
        let w = -0.5 * cot_at(opp);
        k[i][j] = w;
        k[j][i] = w;
    }
    for i in 0..3 {
        k[i][i] = -(0..3).filter(|&j| j != i).map(|j| k[i][j]).sum::<f64>();
    }
    k
}

pub fn random_triangle(rng: &mut StdRng) -> [[f64; 2]; 3] {
    loop {
        let t: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        if area(&t) > 0.05 {
            // Counter-clockwise order.
            let s = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
            return if s > 0.0 { t } else { [t[0], t[2], t[1]] };
        }
    }
}

/// Vertex values of a free-dof vector, zero on the boundary.
pub fn expand(mesh: &Mesh, dofs: &[f64]) -> Vec<f64> {
    (0..mesh.num_vertices())
        .map(|v| mesh.dof_of_vertex(v).map_or(0.0, |d| dofs[d]))
        .collect()
}

pub fn corners(mesh: &Mesh, tri: [usize; 3]) -> [[f64; 2]; 3] {
    tri.map(|v| mesh.vertices()[v])
}

/// Entrywise `λ M ū − (K + W + N(ū)) ū` with every integral evaluated
/// exactly from products of linear forms.
pub fn aux_rhs_oracle(mesh: &Mesh, gamma: [f64; 2], zeta: f64, lambda: f64, u: &[f64]) -> Vec<f64> {
    let uv = expand(mesh, u);
    let mut rhs = vec![0.0; mesh.num_dofs()];
    for &tri in mesh.triangles() {
        let t = corners(mesh, tri);
        let ul = tri.map(|v| uv[v]);
        let k = cot_stiffness(&t);
        let (x, y) = (x_form(&t), y_form(&t));
        for a in 0..3 {
            let Some(i) = mesh.dof_of_vertex(tri[a]) else { continue };
            let e = hat(a);
            let grad: f64 = (0..3).map(|b| k[a][b] * ul[b]).sum();
            let mass = integrate_linear_forms(&t, &[ul, e]);
            let trap = gamma[0] * integrate_linear_forms(&t, &[x, x, ul, e])
                + gamma[1] * integrate_linear_forms(&t, &[y, y, ul, e]);
            let cubic = zeta * integrate_linear_forms(&t, &[ul, ul, ul, e]);
            rhs[i] += lambda * mass - grad - trap - cubic;
        }
    }
    rhs
}

/// `(∫|∇u|² + ∫W u² + ζ∫u⁴) / ∫u²`, exact.
pub fn rayleigh_oracle(mesh: &Mesh, gamma: [f64; 2], zeta: f64, u: &[f64]) -> f64 {
    let uv = expand(mesh, u);
    let (mut num, mut den) = (0.0, 0.0);
    for &tri in mesh.triangles() {
        let t = corners(mesh, tri);
        let ul = tri.map(|v| uv[v]);
        let k = cot_stiffness(&t);
        num += (0..3).map(|a| (0..3).map(|b| ul[a] * k[a][b] * ul[b]).sum::<f64>()).sum::<f64>();
        let (x, y) = (x_form(&t), y_form(&t));
        num += gamma[0] * integrate_linear_forms(&t, &[x, x, ul, ul]);
        num += gamma[1] * integrate_linear_forms(&t, &[y, y, ul, ul]);
        num += zeta * integrate_linear_forms(&t, &[ul, ul, ul, ul]);
        den += integrate_linear_forms(&t, &[ul, ul]);
    }
    num / den
}

type Key = (u64, u64);

fn key(p: [f64; 2]) -> Key {
    // +0.0 and −0.0 must coincide.
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

/// Triangle stored as `[newest, b, c]`; the refinement edge is `(b, c)`.
pub type Tri = [[f64; 2]; 3];

/// Recursive newest-vertex bisection on coordinate triangles. Before a
/// triangle is bisected, a neighbour that does not share its refinement
/// edge is bisected first, recursively; then the compatible pair is split
/// together.
#[derive(Debug, Clone)]
pub struct NvbOracle {
    pub tris: Vec<Tri>,
}

impl NvbOracle {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        NvbOracle {
            tris: mesh.triangles().iter().map(|&t| corners(mesh, t)).collect(),
        }
    }

    fn edge(p: [f64; 2], q: [f64; 2]) -> (Key, Key) {
        let (a, b) = (key(p), key(q));
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn refinement_edge(t: &Tri) -> (Key, Key) {
        Self::edge(t[1], t[2])
    }

    fn edges(t: &Tri) -> [(Key, Key); 3] {
        [Self::edge(t[0], t[1]), Self::edge(t[1], t[2]), Self::edge(t[2], t[0])]
    }

    fn neighbour_across(&self, idx: usize, e: (Key, Key)) -> Option<usize> {
        (0..self.tris.len()).find(|&j| j != idx && Self::edges(&self.tris[j]).contains(&e))
    }

    fn bisect(&mut self, idx: usize) {
        let [a, b, c] = self.tris[idx];
        let m = [0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1])];
        self.tris[idx] = [m, a, b];
        self.tris.push([m, c, a]);
    }

    fn refine(&mut self, idx: usize, depth: usize) {
        assert!(depth < 200, "oracle recursion did not terminate");
        let e = Self::refinement_edge(&self.tris[idx]);
        if let Some(n) = self.neighbour_across(idx, e) {
            if Self::refinement_edge(&self.tris[n]) != e {
                self.refine(n, depth + 1);
            }
            // After the recursive split exactly one child of the neighbour
            // sits across `e`, and its refinement edge is `e`.
            let n = self.neighbour_across(idx, e).expect("neighbour child across the edge");
            assert_eq!(Self::refinement_edge(&self.tris[n]), e);
            let (lo, hi) = if idx < n { (idx, n) } else { (n, idx) };
            self.bisect(hi);
            self.bisect(lo);
        } else {
            self.bisect(idx);
        }
    }

    /// Bisects every listed triangle that is still present.
    pub fn refine_marked(&mut self, marked: &[Tri]) {
        for t in marked {
            if let Some(idx) = self.tris.iter().position(|s| s == t) {
                self.refine(idx, 0);
            }
        }
    }

    /// Triangles as ordered coordinate keys, which also encodes the tags.
    pub fn tagged_set(&self) -> BTreeSet<[Key; 3]> {
        self.tris.iter().map(|t| t.map(key)).collect()
    }
}

pub fn tagged_set(mesh: &Mesh) -> BTreeSet<[Key; 3]> {
    mesh.triangles().iter().map(|&t| corners(mesh, t).map(key)).collect()
}

/// Barycentric evaluation of a P1 function on a mesh by brute-force search.
pub fn eval_p1(mesh: &Mesh, vertex_values: &[f64], p: [f64; 2]) -> Option<f64> {
    for &tri in mesh.triangles() {
        let t = corners(mesh, tri);
        let a = area(&t);
        let l0 = area(&[p, t[1], t[2]]) / a;
        let l1 = area(&[t[0], p, t[2]]) / a;
        let l2 = area(&[t[0], t[1], p]) / a;
        if (l0 + l1 + l2 - 1.0).abs() < 1e-12 {
            return Some(l0 * vertex_values[tri[0]] + l1 * vertex_values[tri[1]] + l2 * vertex_values[tri[2]]);
        }
    }
    None
}

pub fn random_point_in(rng: &mut StdRng, domain: gpe_mlc::mesh::Domain) -> [f64; 2] {
    use gpe_mlc::mesh::Domain;
    loop {
        let p = match domain {
            Domain::UnitSquare => [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            Domain::LShape => [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        };
        if domain == Domain::UnitSquare || !(p[0] >= 0.0 && p[1] < 0.0) {
            return p;
        }
    }
}

/// Largest per-cycle energy-norm error reduction of repeated V-cycles on
/// `A x = b` with a random exact solution `x*` and `b = A x*`.
pub fn energy_contraction(ws: &gpe_mlc::multigrid::MgWorkspace, seed: u64, cycles: usize) -> f64 {
    let a = ws.fine_matrix();
    let exact = random_vec(&mut rng(seed), ws.dim());
    let b = a.mul_vec(&exact);
    let energy = |x: &[f64]| {
        let e: Vec<f64> = exact.iter().zip(x).map(|(s, t)| s - t).collect();
        a.quad_form(&e).sqrt()
    };
    let mut x = vec![0.0; ws.dim()];
    let mut prev = energy(&x);
    let mut worst = 0.0f64;
    for _ in 0..cycles {
        x = ws.vcycle(&b, &x).unwrap();
        let e = energy(&x);
        worst = worst.max(e / prev);
        prev = e;
    }
    worst
}
