//! Built-in manufactured problems and the bivariate polynomial arithmetic
//! behind the plate load.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::geometry::Sym2;
use crate::mesh::{build_mesh, Domain, Point2};
use crate::norms::l2_norm;

/// Dense bivariate polynomial, `coeffs[i][j]` multiplies `x^i y^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    coeffs: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![vec![c]] }
    }

    /// `a + b x + c y`
    pub fn affine(a: f64, b: f64, c: f64) -> Self {
        Self { coeffs: vec![vec![a, c], vec![b, 0.0]] }
    }

    fn size(&self) -> usize {
        self.coeffs.len()
    }

    fn zeros(size: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; size]; size]
    }

    /// Total degree (ignores exact zeros).
    pub fn degree(&self) -> usize {
        let mut d = 0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    d = d.max(i + j);
                }
            }
        }
        d
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let size = self.size().max(other.size());
        let mut c = Self::zeros(size);
        for p in [self, other] {
            for (i, row) in p.coeffs.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    c[i][j] += v;
                }
            }
        }
        Poly2 { coeffs: c }
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        Poly2 { coeffs: self.coeffs.iter().map(|r| r.iter().map(|v| v * s).collect()).collect() }
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut c = Self::zeros(self.size() + other.size() - 1);
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, &u) in a.iter().enumerate() {
                if u == 0.0 {
                    continue;
                }
                for (k, b) in other.coeffs.iter().enumerate() {
                    for (l, &v) in b.iter().enumerate() {
                        c[i + k][j + l] += u * v;
                    }
                }
            }
        }
        Poly2 { coeffs: c }
    }

    pub fn pow(&self, e: u32) -> Poly2 {
        (0..e).fold(Poly2::constant(1.0), |acc, _| acc.mul(self))
    }

    pub fn dx(&self) -> Poly2 {
        let size = self.size();
        let mut c = Self::zeros(size);
        for i in 1..size {
            for j in 0..size {
                c[i - 1][j] = i as f64 * self.coeffs[i][j];
            }
        }
        Poly2 { coeffs: c }
    }

    pub fn dy(&self) -> Poly2 {
        let size = self.size();
        let mut c = Self::zeros(size);
        for i in 0..size {
            for j in 1..size {
                c[i][j - 1] = j as f64 * self.coeffs[i][j];
            }
        }
        Poly2 { coeffs: c }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * p.x + row.iter().rev().fold(0.0, |a, &c| a * p.y + c))
    }
}

type ScalarFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(Point2) -> Sym2 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `-Laplace u = f`
    Poisson,
    /// `Laplace^2 u = f`
    Biharmonic,
}

/// A manufactured problem: exact solution, its derivatives, the load and the
/// load norms needed by the perturbation bounds.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub domain: Domain,
    pub equation: Equation,
    pub u: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: MatrixFn,
    pub load: ScalarFn,
    /// `|f|_1` (Poisson problems).
    pub load_h1_seminorm: Option<f64>,
    /// `|f|_0` (plate problems).
    pub load_l2_norm: Option<f64>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

/// `u = sin(pi x) sin(pi y)` on the unit square, `f = 2 pi^2 u`.
pub fn square_sine_problem() -> ProblemSpec {
    ProblemSpec {
        name: "square-sine",
        domain: Domain::UnitSquare,
        equation: Equation::Poisson,
        u: Arc::new(|p| (PI * p.x).sin() * (PI * p.y).sin()),
        gradient: Arc::new(|p| {
            let (sx, cx) = (PI * p.x).sin_cos();
            let (sy, cy) = (PI * p.y).sin_cos();
            Point2::new(PI * cx * sy, PI * sx * cy)
        }),
        hessian: Arc::new(|p| {
            let (sx, cx) = (PI * p.x).sin_cos();
            let (sy, cy) = (PI * p.y).sin_cos();
            let pp = PI * PI;
            Sym2::new(-pp * sx * sy, pp * cx * cy, -pp * sx * sy)
        }),
        load: Arc::new(|p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin()),
        // |grad f|^2 integrates to 4 pi^4 * pi^2 / 2
        load_h1_seminorm: Some(2f64.sqrt() * PI.powi(3)),
        load_l2_norm: Some(PI * PI),
    }
}

/// The exact plate solution as a polynomial:
/// `(x - sqrt3 y)^2 (x - sqrt3 y - 2)^2 y^2 (sqrt3/2 - y)^2`.
pub fn plate_solution_polynomial() -> Poly2 {
    let r3 = 3f64.sqrt();
    let a = Poly2::affine(0.0, 1.0, -r3);
    let b = Poly2::affine(-2.0, 1.0, -r3);
    let c = Poly2::affine(0.0, 0.0, 1.0);
    let d = Poly2::affine(0.5 * r3, 0.0, -1.0);
    a.mul(&b).mul(&c).mul(&d).pow(2)
}

/// Clamped plate on the parallelogram `(0,0), (2,0), (7/2, sqrt3/2), (3/2, sqrt3/2)`.
pub fn parallelogram_plate_problem() -> ProblemSpec {
    let u = plate_solution_polynomial();
    let (ux, uy) = (u.dx(), u.dy());
    let (uxx, uxy, uyy) = (ux.dx(), ux.dy(), uy.dy());
    let f = uxx.dx().dx().add(&uxy.dx().dy().scale(2.0)).add(&uyy.dy().dy());
    let load_l2_norm = plate_load_l2_norm(&f);
    let fu = u.clone();
    let ff = f.clone();
    ProblemSpec {
        name: "parallelogram-plate",
        domain: Domain::Parallelogram,
        equation: Equation::Biharmonic,
        u: Arc::new(move |p| fu.eval(p)),
        gradient: Arc::new(move |p| Point2::new(ux.eval(p), uy.eval(p))),
        hessian: Arc::new(move |p| Sym2::new(uxx.eval(p), uxy.eval(p), uyy.eval(p))),
        load: Arc::new(move |p| ff.eval(p)),
        load_h1_seminorm: None,
        load_l2_norm: Some(load_l2_norm),
    }
}

/// `f` has degree 4, so the degree-8 rule on the two-triangle mesh
/// integrates `f^2` exactly.
fn plate_load_l2_norm(f: &Poly2) -> f64 {
    let mesh = build_mesh(Domain::Parallelogram, 1).expect("single-cell mesh");
    l2_norm(&mesh, 8, |p| f.eval(p)).expect("degree-8 rule")
}

impl ProblemSpec {
    /// Largest relative PDE residual at `samples` interior points, with the
    /// differential operator replaced by central finite differences of `u`.
    pub fn pde_residual<R: rand::Rng>(&self, samples: usize, rng: &mut R) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (s, t) = (rng.random_range(0.1..0.9), rng.random_range(0.1..0.9));
            let p = match self.domain {
                Domain::Parallelogram => crate::mesh::parallelogram_map(Point2::new(s, t)),
                _ => Point2::new(s, t),
            };
            let f = (self.load)(p);
            let approx = match self.equation {
                Equation::Poisson => -richardson(|d| fd_laplacian(&*self.u, p, d), 1e-3),
                Equation::Biharmonic => richardson(|d| fd_bilaplacian(&*self.u, p, d), 2e-2),
            };
            worst = worst.max((approx - f).abs() / f.abs().max(1.0));
        }
        Ok(worst)
    }
}

/// Removes the `O(d^2)` term of a second-order difference quotient.
fn richardson<D: Fn(f64) -> f64>(quotient: D, d: f64) -> f64 {
    (4.0 * quotient(0.5 * d) - quotient(d)) / 3.0
}

fn fd_laplacian(u: &dyn Fn(Point2) -> f64, p: Point2, d: f64) -> f64 {
    let at = |i: f64, j: f64| u(Point2::new(p.x + i * d, p.y + j * d));
    (at(1.0, 0.0) + at(-1.0, 0.0) + at(0.0, 1.0) + at(0.0, -1.0) - 4.0 * at(0.0, 0.0)) / (d * d)
}

fn fd_bilaplacian(u: &dyn Fn(Point2) -> f64, p: Point2, d: f64) -> f64 {
    let lap = |q: Point2| fd_laplacian(u, q, d);
    fd_laplacian(&lap, p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_eval_and_derivatives() {
        // p = 1 + 2x + 3y + x y^2
        let p = Poly2::affine(1.0, 2.0, 3.0).add(&Poly2::affine(0.0, 1.0, 0.0).mul(&Poly2::affine(0.0, 0.0, 1.0).pow(2)));
        let x = Point2::new(0.5, -2.0);
        assert_eq!(p.eval(x), 1.0 + 1.0 - 6.0 + 2.0);
        assert_eq!(p.dx().eval(x), 2.0 + 4.0);
        assert_eq!(p.dy().eval(x), 3.0 + 2.0 * 0.5 * -2.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn plate_solution_vanishes_on_boundary() {
        let u = plate_solution_polynomial();
        assert_eq!(u.degree(), 8);
        for k in 0..=10 {
            let s = k as f64 / 10.0;
            for q in [Point2::new(s, 0.0), Point2::new(s, 1.0), Point2::new(0.0, s), Point2::new(1.0, s)] {
                let x = crate::mesh::parallelogram_map(q);
                assert!(u.eval(x).abs() < 1e-13);
                assert!(u.dx().eval(x).abs() < 1e-12 && u.dy().eval(x).abs() < 1e-12);
            }
        }
    }
}
