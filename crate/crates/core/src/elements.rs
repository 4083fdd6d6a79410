//! Local shape functions and degrees of freedom on a single mesh triangle.
//!
//! Edge-based DOFs (RT0 fluxes, Morley normal derivatives) are taken with
//! respect to the *global* edge normal of [`crate::mesh::Edge`], so that two
//! neighbouring triangles share one signed DOF and inter-element continuity is
//! enforced purely by DOF numbering.

use nalgebra::{Matrix3, Matrix6, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Sym2;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::edge_quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    CrouzeixRaviart,
    Morley,
    P0,
    P1,
    RaviartThomas0,
    HellanHerrmannJohnson,
}

impl ElementKind {
    pub fn local_dimension(self) -> usize {
        match self {
            ElementKind::P0 => 1,
            ElementKind::Morley => 6,
            _ => 3,
        }
    }
}

/// Continuous piecewise-linear hat functions (the barycentric coordinates).
#[derive(Debug, Clone)]
pub struct P1Basis {
    pub gradients: [Point2; 3],
}

impl P1Basis {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        Self { gradients: mesh.barycentric_gradients(t) }
    }
}

/// Crouzeix-Raviart basis: `phi_i = 1 - 2 lambda_i`, dual to the mean over
/// edge `i`.
#[derive(Debug, Clone)]
pub struct CrBasis {
    t: usize,
    pub gradients: [Point2; 3],
}

impl CrBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let g = mesh.barycentric_gradients(t);
        Self { t, gradients: g.map(|gi| gi * -2.0) }
    }

    pub fn values(&self, mesh: &Mesh, x: Point2) -> [f64; 3] {
        mesh.barycentric(self.t, x).map(|l| 1.0 - 2.0 * l)
    }

    /// `(grad phi_i, grad phi_j)_K`
    pub fn stiffness(&self, mesh: &Mesh) -> [[f64; 3]; 3] {
        let area = mesh.area(self.t);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = area * self.gradients[i].dot(self.gradients[j]);
            }
        }
        k
    }
}

/// Morley basis: quadratics dual to the three vertex values and the three
/// edge means of the normal derivative along the global edge normals.
#[derive(Debug, Clone)]
pub struct MorleyBasis {
    center: Point2,
    scale: f64,
    /// `coeffs[i]` are the monomial coefficients of shape `i` in the scaled
    /// local variable `(x - center) / scale`, ordered `1, s, t, s^2, s t, t^2`.
    coeffs: [[f64; 6]; 6],
}

impl MorleyBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let tri = &mesh.triangles[t];
        let center = mesh.centroid(t);
        let scale = tri.edges.iter().map(|&e| mesh.edges[e].length).fold(0.0, f64::max);
        let to_local = |p: Point2| (p - center) * (1.0 / scale);

        // dof_matrix[(j, k)] = DOF_j(monomial_k)
        let mut dofs = Matrix6::zeros();
        for j in 0..3 {
            let v = to_local(mesh.vertices[tri.vertices[j]]);
            let row = [1.0, v.x, v.y, v.x * v.x, v.x * v.y, v.y * v.y];
            for (k, r) in row.iter().enumerate() {
                dofs[(j, k)] = *r;
            }
            let edge = &mesh.edges[tri.edges[j]];
            let m = to_local(edge.midpoint);
            let nu = edge.unit_normal;
            // grad of monomials in physical variables at the midpoint
            let grads = [
                Point2::ZERO,
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(2.0 * m.x, 0.0),
                Point2::new(m.y, m.x),
                Point2::new(0.0, 2.0 * m.y),
            ];
            for (k, g) in grads.iter().enumerate() {
                dofs[(3 + j, k)] = g.dot(nu) / scale;
            }
        }
        let inv = dofs.try_inverse().ok_or(Error::SingularLocalSystem(t))?;
        let mut coeffs = [[0.0; 6]; 6];
        for (i, c) in coeffs.iter_mut().enumerate() {
            for (k, ck) in c.iter_mut().enumerate() {
                *ck = inv[(k, i)];
            }
        }
        Ok(Self { center, scale, coeffs })
    }

    fn local(&self, x: Point2) -> Point2 {
        (x - self.center) * (1.0 / self.scale)
    }

    pub fn value(&self, i: usize, x: Point2) -> f64 {
        let s = self.local(x);
        let c = &self.coeffs[i];
        c[0] + c[1] * s.x + c[2] * s.y + c[3] * s.x * s.x + c[4] * s.x * s.y + c[5] * s.y * s.y
    }

    pub fn gradient(&self, i: usize, x: Point2) -> Point2 {
        let s = self.local(x);
        let c = &self.coeffs[i];
        Point2::new(c[1] + 2.0 * c[3] * s.x + c[4] * s.y, c[2] + c[4] * s.x + 2.0 * c[5] * s.y)
            * (1.0 / self.scale)
    }

    /// Constant Hessian of shape `i`.
    pub fn hessian(&self, i: usize) -> Sym2 {
        let c = &self.coeffs[i];
        Sym2::new(2.0 * c[3], c[4], 2.0 * c[5]) * (1.0 / (self.scale * self.scale))
    }

    /// `(hess phi_i, hess phi_j)_K`
    pub fn stiffness(&self, area: f64) -> [[f64; 6]; 6] {
        let h: Vec<Sym2> = (0..6).map(|i| self.hessian(i)).collect();
        let mut k = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] = area * h[i].frobenius(&h[j]);
            }
        }
        k
    }
}

/// Lowest-order Raviart-Thomas basis: `phi_i = s_i (x - z_i) / (2|K|)` with
/// `z_i` the vertex opposite edge `i` and `s_i` the sign of the global edge
/// normal relative to the outward one. `phi_i` has unit flux through edge `i`
/// along the global normal and zero flux through the other edges.
#[derive(Debug, Clone)]
pub struct Rt0Basis {
    vertices: [Point2; 3],
    signs: [f64; 3],
    area: f64,
}

impl Rt0Basis {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        Self {
            vertices: mesh.triangle_points(t),
            signs: [0, 1, 2].map(|i| mesh.normal_sign(t, i)),
            area: mesh.area(t),
        }
    }

    pub fn value(&self, i: usize, x: Point2) -> Point2 {
        (x - self.vertices[i]) * (self.signs[i] / (2.0 * self.area))
    }

    /// Constant divergence `s_i / |K|`.
    pub fn divergence(&self, i: usize) -> f64 {
        self.signs[i] / self.area
    }

    /// `(phi_i, phi_j)_K`, exact for the linear shapes.
    pub fn mass(&self) -> [[f64; 3]; 3] {
        // Midpoint-of-edges rule is exact for quadratics.
        let mids = [
            self.vertices[1].midpoint(self.vertices[2]),
            self.vertices[2].midpoint(self.vertices[0]),
            self.vertices[0].midpoint(self.vertices[1]),
        ];
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = mids.iter().map(|&p| self.value(i, p).dot(self.value(j, p))).sum();
                m[i][j] = s * self.area / 3.0;
            }
        }
        m
    }
}

/// Lowest-order Hellan-Herrmann-Johnson basis: constant symmetric matrices
/// `psi_i` with `nu_j^T psi_i nu_j = delta_ij` on the three edges.
#[derive(Debug, Clone)]
pub struct HhjBasis {
    pub shapes: [Sym2; 3],
    normals: [Point2; 3],
}

impl HhjBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Result<Self> {
        let normals = mesh.triangles[t].edges.map(|e| mesh.edges[e].unit_normal);
        let system = normal_normal_matrix(&normals);
        // The determinant is bounded below by the sines of the angles.
        if system.determinant().abs() < 1e-10 {
            return Err(Error::SingularLocalSystem(t));
        }
        let inv = system.try_inverse().ok_or(Error::SingularLocalSystem(t))?;
        let shapes = [0, 1, 2].map(|i| {
            let c = inv.column(i);
            Sym2::new(c[0], c[1], c[2])
        });
        Ok(Self { shapes, normals })
    }

    /// Recovers the constant matrix whose normal-normal traces on the three
    /// edges are `dofs`.
    pub fn reconstruct(&self, dofs: [f64; 3]) -> Sym2 {
        (0..3).fold(Sym2::ZERO, |acc, i| acc + self.shapes[i] * dofs[i])
    }

    /// Normal-normal traces of `m` on the three edges.
    pub fn dofs_of(&self, m: &Sym2) -> [f64; 3] {
        self.normals.map(|n| m.normal_normal(n))
    }

    /// `(psi_i, psi_j)_K`
    pub fn mass(&self, area: f64) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = area * self.shapes[i].frobenius(&self.shapes[j]);
            }
        }
        m
    }
}

/// Rows `[nx^2, 2 nx ny, ny^2]`: maps `(xx, xy, yy)` to normal-normal traces.
fn normal_normal_matrix(normals: &[Point2; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| {
        let n = normals[r];
        [n.x * n.x, 2.0 * n.x * n.y, n.y * n.y][c]
    })
}

/// Normal-normal traces of `m` on each edge of triangle `t`.
pub fn hhj_dofs_on_triangle(mesh: &Mesh, t: usize, m: &Sym2) -> [f64; 3] {
    mesh.triangles[t].edges.map(|e| m.normal_normal(mesh.edges[e].unit_normal))
}

/// Solves the 3x3 normal-normal system directly (dense LU), independent of
/// [`HhjBasis`]; used for cross-checks.
pub fn hhj_matrix_from_traces(mesh: &Mesh, t: usize, traces: [f64; 3]) -> Option<Sym2> {
    let normals = mesh.triangles[t].edges.map(|e| mesh.edges[e].unit_normal);
    let sol = normal_normal_matrix(&normals).lu().solve(&Vector3::from(traces))?;
    Some(Sym2::new(sol[0], sol[1], sol[2]))
}

/// Applies the six Morley DOF functionals on triangle `t` to a function given
/// by its value and gradient. Edge functionals use a Gauss rule, so this is
/// independent of the closed-form midpoint evaluation inside [`MorleyBasis`].
pub fn morley_dofs<V, G>(mesh: &Mesh, t: usize, value: V, gradient: G) -> [f64; 6]
where
    V: Fn(Point2) -> f64,
    G: Fn(Point2) -> Point2,
{
    let tri = &mesh.triangles[t];
    let rule = edge_quadrature();
    let mut d = [0.0; 6];
    for j in 0..3 {
        d[j] = value(mesh.vertices[tri.vertices[j]]);
        let e = &mesh.edges[tri.edges[j]];
        let [a, b] = e.vertices.map(|v| mesh.vertices[v]);
        d[3 + j] = rule.mean(a, b, |x| gradient(x).dot(e.unit_normal));
    }
    d
}

/// Global-normal fluxes of `q` through the three edges of triangle `t`.
pub fn rt0_dofs<Q: Fn(Point2) -> Point2>(mesh: &Mesh, t: usize, q: Q) -> [f64; 3] {
    let rule = edge_quadrature();
    mesh.triangles[t].edges.map(|ei| {
        let e = &mesh.edges[ei];
        let [a, b] = e.vertices.map(|v| mesh.vertices[v]);
        e.length * rule.mean(a, b, |x| q(x).dot(e.unit_normal))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_parallelogram_mesh, build_uniform_square_mesh};
    use crate::quadrature::triangle_quadrature;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Single-triangle mesh that is a random affine image of the reference
    /// triangle.
    fn random_triangle(rng: &mut StdRng) -> Mesh {
        loop {
            let p: Vec<Point2> = (0..3)
                .map(|_| Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect();
            let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
            let longest = [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()]
                .into_iter()
                .fold(0.0, f64::max);
            // keep the shape regular enough for a 1e-12 duality check
            if area.abs() < 0.1 * longest * longest {
                continue;
            }
            let tri = if area > 0.0 { [0, 1, 2] } else { [0, 2, 1] };
            return Mesh::from_triangles(p, vec![tri]).unwrap();
        }
    }

    #[test]
    fn cr_duality_and_reference_gradient() {
        let v = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let m = Mesh::from_triangles(v, vec![[0, 1, 2]]).unwrap();
        let b = CrBasis::new(&m, 0);
        for (j, &e) in m.triangles[0].edges.iter().enumerate() {
            let vals = b.values(&m, m.edges[e].midpoint);
            for (i, v) in vals.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-14);
            }
        }
        // lambda_0 = 1 - x - y, so grad(1 - 2 lambda_0) = (2, 2)
        assert!((b.gradients[0] - Point2::new(2.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn morley_duality_on_random_triangles() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_triangle(&mut rng);
            let b = MorleyBasis::new(&m, 0).unwrap();
            for i in 0..6 {
                let d = morley_dofs(&m, 0, |x| b.value(i, x), |x| b.gradient(i, x));
                for (j, dj) in d.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dj - expected).abs() < 1e-12, "shape {i} dof {j}: {dj}");
                }
            }
        }
    }

    #[test]
    fn morley_hessian_is_constant() {
        let m = build_uniform_parallelogram_mesh(2).unwrap();
        let b = MorleyBasis::new(&m, 3).unwrap();
        let x0 = m.centroid(3);
        let eps = 1e-3;
        for i in 0..6 {
            // second differences of the gradient at two different points
            for x in [x0, m.triangle_points(3)[0]] {
                let gx = (b.gradient(i, x + Point2::new(eps, 0.0)) - b.gradient(i, x)) * (1.0 / eps);
                let gy = (b.gradient(i, x + Point2::new(0.0, eps)) - b.gradient(i, x)) * (1.0 / eps);
                let h = b.hessian(i);
                let s = h.xx.abs() + h.yy.abs() + h.xy.abs();
                assert!((gx.x - h.xx).abs() < 1e-8 * s.max(1.0));
                assert!((gx.y - h.xy).abs() < 1e-8 * s.max(1.0));
                assert!((gy.y - h.yy).abs() < 1e-8 * s.max(1.0));
            }
        }
    }

    #[test]
    fn morley_reproduces_quadratics() {
        let m = build_uniform_square_mesh(3).unwrap();
        for t in 0..m.num_triangles() {
            let b = MorleyBasis::new(&m, t).unwrap();
            let d = morley_dofs(&m, t, |x| x.x * x.x, |x| Point2::new(2.0 * x.x, 0.0));
            let x = m.map_barycentric(t, [0.2, 0.5, 0.3]);
            let v: f64 = (0..6).map(|i| d[i] * b.value(i, x)).sum();
            assert!((v - x.x * x.x).abs() < 1e-13);
            let h = (0..6).fold(Sym2::ZERO, |acc, i| acc + b.hessian(i) * d[i]);
            assert!((h - Sym2::new(2.0, 0.0, 0.0)).norm_sq_ok(1e-20));
        }
    }

    trait NearZero {
        fn norm_sq_ok(&self, tol: f64) -> bool;
    }
    impl NearZero for Sym2 {
        fn norm_sq_ok(&self, tol: f64) -> bool {
            self.frobenius(self) < tol
        }
    }

    #[test]
    fn rt0_duality_and_divergence() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let m = random_triangle(&mut rng);
            let b = Rt0Basis::new(&m, 0);
            for i in 0..3 {
                let d = rt0_dofs(&m, 0, |x| b.value(i, x));
                for (j, dj) in d.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dj - expected).abs() < 1e-12);
                }
                // divergence theorem: int_K div phi = total outward flux
                let outward: f64 = (0..3).map(|j| m.normal_sign(0, j) * d[j]).sum();
                assert!((b.divergence(i) * m.area(0) - outward).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rt0_span_contains_constants_and_position() {
        let m = build_uniform_square_mesh(2).unwrap();
        for t in 0..m.num_triangles() {
            let b = Rt0Basis::new(&m, t);
            let x = m.map_barycentric(t, [0.1, 0.3, 0.6]);
            for q in [
                &(|_p: Point2| Point2::new(1.0, 0.0)) as &dyn Fn(Point2) -> Point2,
                &|p: Point2| p,
            ] {
                let d = rt0_dofs(&m, t, q);
                let v = (0..3).fold(Point2::ZERO, |acc, i| acc + b.value(i, x) * d[i]);
                assert!((v - q(x)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn rt0_mass_matches_quadrature() {
        let m = build_uniform_parallelogram_mesh(2).unwrap();
        let rule = triangle_quadrature(4).unwrap();
        let b = Rt0Basis::new(&m, 5);
        let mass = b.mass();
        for i in 0..3 {
            for j in 0..3 {
                let q: f64 = rule.integrate(&m, 5, |x, _| b.value(i, x).dot(b.value(j, x)));
                assert!((q - mass[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hhj_duality_and_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let m = random_triangle(&mut rng);
            let b = HhjBasis::new(&m, 0).unwrap();
            for i in 0..3 {
                let d = hhj_dofs_on_triangle(&m, 0, &b.shapes[i]);
                for (j, dj) in d.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dj - expected).abs() < 1e-12);
                }
            }
            let d = b.dofs_of(&Sym2::IDENTITY);
            for dj in d {
                assert!((dj - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hhj_equilateral_matches_dense_solve() {
        let s3 = 3f64.sqrt();
        let v = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.5, 0.5 * s3)];
        let m = Mesh::from_triangles(v, vec![[0, 1, 2]]).unwrap();
        let b = HhjBasis::new(&m, 0).unwrap();
        for i in 0..3 {
            let mut traces = [0.0; 3];
            traces[i] = 1.0;
            let dense = hhj_matrix_from_traces(&m, 0, traces).unwrap();
            assert!((dense - b.shapes[i]).frobenius(&(dense - b.shapes[i])) < 1e-26);
        }
        // Sum of the shapes reproduces the identity.
        let sum = b.reconstruct([1.0, 1.0, 1.0]);
        assert!((sum - Sym2::IDENTITY).frobenius(&(sum - Sym2::IDENTITY)) < 1e-26);
    }

    #[test]
    fn local_dimensions() {
        assert_eq!(ElementKind::Morley.local_dimension(), 6);
        assert_eq!(ElementKind::P0.local_dimension(), 1);
        assert_eq!(ElementKind::HellanHerrmannJohnson.local_dimension(), 3);
    }
}
