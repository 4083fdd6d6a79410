//! Symmetric triangle rules and Gauss-Legendre edge rules.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};

/// Points are barycentric coordinates; weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Points are parameters in `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and its rotations.
    Three(f64, f64),
    /// All permutations of `(a, b, 1 - a - b)`.
    Six(f64, f64, f64),
}

// Weights below are normalized to sum 1; the constructor scales by 1/2.
const DEGREE_2: &[Orbit] = &[Orbit::Three(1.0 / 6.0, 1.0 / 3.0)];

const DEGREE_4: &[Orbit] = &[
    Orbit::Three(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
    Orbit::Three(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
];

const DEGREE_6: &[Orbit] = &[
    Orbit::Three(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
    Orbit::Three(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
    Orbit::Six(
        0.053_145_049_844_816_947_353,
        0.310_352_451_033_784_405_42,
        0.082_851_075_618_373_575_194,
    ),
];

const DEGREE_8: &[Orbit] = &[
    Orbit::Centroid(0.144_315_607_677_787_168_25),
    Orbit::Three(0.459_292_588_292_723_156_03, 0.095_091_634_267_284_624_794),
    Orbit::Three(0.170_569_307_751_760_206_62, 0.103_217_370_534_718_250_28),
    Orbit::Three(0.050_547_228_317_030_975_458, 0.032_458_497_623_198_080_311),
    Orbit::Six(
        0.008_394_777_409_957_605_337_2,
        0.263_112_829_634_638_113_42,
        0.027_230_314_174_434_994_265,
    ),
];

/// Symmetric rule exact for polynomials up to `degree` on any triangle.
pub fn triangle_quadrature(degree: usize) -> Result<TriangleRule> {
    let orbits = match degree {
        2 => DEGREE_2,
        4 => DEGREE_4,
        6 => DEGREE_6,
        8 => DEGREE_8,
        d => return Err(Error::UnsupportedQuadrature(d)),
    };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(0.5 * w);
            }
            Orbit::Three(a, w) => {
                let b = 1.0 - 2.0 * a;
                for p in [[b, a, a], [a, b, a], [a, a, b]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
        }
    }
    Ok(TriangleRule { degree, points, weights })
}

impl TriangleRule {
    /// `int_K g` over mesh triangle `t`.
    pub fn integrate<V, F>(&self, mesh: &Mesh, t: usize, mut g: F) -> V
    where
        V: crate::geometry::FieldValue,
        F: FnMut(Point2, [f64; 3]) -> V,
    {
        let jac = 2.0 * mesh.area(t);
        let mut acc = V::zero();
        for (l, &w) in self.points.iter().zip(&self.weights) {
            let x = mesh.map_barycentric(t, *l);
            acc = acc.add(g(x, *l).scale(w * jac));
        }
        acc
    }
}

/// `count`-point Gauss-Legendre rule on `[0, 1]`, exact to degree `2 count - 1`.
pub fn gauss_legendre(count: usize) -> EdgeRule {
    assert!(count >= 1, "Gauss-Legendre rule needs at least one point");
    let mut points = vec![0.0; count];
    let mut weights = vec![0.0; count];
    for i in 0..count.div_ceil(2) {
        // Chebyshev initial guess, refined by Newton on P_count.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[count - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[count - 1 - i] = 0.5 * w;
    }
    EdgeRule { points, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Edge rule exact to degree 7, used for edge means of smooth data.
pub fn edge_quadrature() -> EdgeRule {
    gauss_legendre(4)
}

impl EdgeRule {
    /// Mean of `g` over the segment `a -> b`.
    pub fn mean<V, F>(&self, a: Point2, b: Point2, mut g: F) -> V
    where
        V: crate::geometry::FieldValue,
        F: FnMut(Point2) -> V,
    {
        let mut acc = V::zero();
        for (&s, &w) in self.points.iter().zip(&self.weights) {
            acc = acc.add(g(a + (b - a) * s).scale(w));
        }
        acc
    }
}
