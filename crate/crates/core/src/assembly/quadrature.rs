/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`, stored in
/// barycentric coordinates. Weights sum to the reference area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric 6-point rule, exact up to total degree 4.
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_964_886_318_329_253_883_05;
        const W1: f64 = 0.223_381_589_678_011_465_695_007_008_433_12;
        const A2: f64 = 0.091_576_213_509_770_743_459_571_463_402_20;
        const W2: f64 = 0.109_951_743_655_321_867_638_326_324_900_21;
        let b1 = 1.0 - 2.0 * A1;
        let b2 = 1.0 - 2.0 * A2;
        let points = vec![
            [b1, A1, A1],
            [A1, b1, A1],
            [A1, A1, b1],
            [b2, A2, A2],
            [A2, b2, A2],
            [A2, A2, b2],
        ];
        let weights = [W1, W1, W1, W2, W2, W2].iter().map(|w| 0.5 * w).collect();
        QuadratureRule {
            points,
            weights,
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical location of quadrature point `q` in the triangle with the
    /// given corners.
    pub fn map_point(&self, q: usize, corners: &[[f64; 2]; 3]) -> [f64; 2] {
        let l = self.points[q];
        [
            l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
            l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
        ]
    }

    /// `∫_K f` for a triangle with the given corners.
    pub fn integrate(&self, corners: &[[f64; 2]; 3], f: impl Fn([f64; 2]) -> f64) -> f64 {
        let area = crate::mesh::signed_area(corners[0], corners[1], corners[2]);
        let jac = 2.0 * area;
        (0..self.len())
            .map(|q| self.weights[q] * jac * f(self.map_point(q, corners)))
            .sum()
    }
}
