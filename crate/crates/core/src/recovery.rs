//! Edge-midpoint post-processing `K_h` and the canonical interpolants onto
//! the Raviart-Thomas and Hellan-Herrmann-Johnson spaces.
//!
//! `K_h` turns any field that can be evaluated on each triangle into a
//! piecewise-linear field that is continuous at edge midpoints:
//!
//! * on an interior edge the value is the average of the two one-sided
//!   values at the midpoint;
//! * on a boundary edge with midpoint `P` it is `2 K_h(N_c) - K_h(P~)`, where
//!   `N_c` is the center of a parallelogram formed by the boundary triangle
//!   and a neighbour and `P~ = 2 N_c - P`. Both are interior-edge midpoints,
//!   so interior values are computed first.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{FieldValue, Sym2};
use crate::mesh::{Domain, Mesh, Point2};
use crate::norms::l2_error;
use crate::plate::HhjField;
use crate::poisson::RtField;
use crate::quadrature::edge_quadrature;

/// Piecewise-linear field determined by one value per edge midpoint.
#[derive(Debug, Clone)]
pub struct MidpointField<'m, V> {
    pub mesh: &'m Mesh,
    pub values: Vec<V>,
}

pub type MidpointVectorField<'m> = MidpointField<'m, Point2>;
pub type MidpointMatrixField<'m> = MidpointField<'m, Sym2>;

impl<V: FieldValue> MidpointField<'_, V> {
    /// Linear interpolation of the three edge-midpoint values of `t`.
    pub fn value(&self, t: usize, x: Point2) -> V {
        let l = self.mesh.barycentric(t, x);
        let e = self.mesh.triangles[t].edges;
        (0..3).fold(V::zero(), |acc, i| acc.add(self.values[e[i]].scale(1.0 - 2.0 * l[i])))
    }
}

/// Applies `K_h` to a field given by its restriction to each triangle.
pub fn k_h<V, F>(mesh: &Mesh, field: F) -> Result<MidpointField<'_, V>>
where
    V: FieldValue,
    F: Fn(usize, Point2) -> V,
{
    if !mesh.has_boundary_extrapolation() {
        return Err(Error::UnsupportedMesh(format!(
            "post-processing needs a parallelogram stencil for every boundary edge (n = {})",
            mesh.n
        )));
    }
    let mut values = vec![V::zero(); mesh.num_edges()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if let Some(s) = edge.second {
            let p = edge.midpoint;
            values[e] = field(edge.first, p).add(field(s, p)).scale(0.5);
        }
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary() {
            let stencil = mesh.boundary_partner(e)?;
            values[e] = values[stencil.center_edge].scale(2.0).sub(values[stencil.interior_edge]);
        }
    }
    Ok(MidpointField { mesh, values })
}

/// Raviart-Thomas interpolant: edge fluxes of `q` (4-point Gauss rule).
pub fn pi_rt<Q: Fn(Point2) -> Point2>(mesh: &Mesh, q: Q) -> RtField<'_> {
    let rule = edge_quadrature();
    let fluxes = mesh
        .edges
        .iter()
        .map(|e| {
            let [a, b] = e.vertices.map(|v| mesh.vertices[v]);
            e.length * rule.mean(a, b, |x| q(x).dot(e.unit_normal))
        })
        .collect();
    RtField { mesh, fluxes }
}

/// Hellan-Herrmann-Johnson interpolant: edge means of `nu^T tau nu`.
pub fn pi_hhj<T: Fn(Point2) -> Sym2>(mesh: &Mesh, tau: T) -> Result<HhjField<'_>> {
    let rule = edge_quadrature();
    let traces = mesh
        .edges
        .iter()
        .map(|e| {
            let [a, b] = e.vertices.map(|v| mesh.vertices[v]);
            rule.mean(a, b, |x| tau(x).normal_normal(e.unit_normal))
        })
        .collect();
    Ok(HhjField { mesh, traces })
}

/// Smooth field whose interpolation-then-recovery error is measured.
pub enum ProbeField<'a> {
    /// Interpolated by `Pi_RT`.
    Vector(&'a dyn Fn(Point2) -> Point2),
    /// Interpolated by `Pi_HHJ`.
    Matrix(&'a dyn Fn(Point2) -> Sym2),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    /// `rates[i]` compares `levels[i]` with `levels[i + 1]`.
    pub rates: Vec<f64>,
}

/// Observed order `log(e_prev / e) / log(n / n_prev)`.
pub fn observed_rate(n_prev: usize, e_prev: f64, n: usize, e: f64) -> f64 {
    (e_prev / e).log2() / (n as f64 / n_prev as f64).log2()
}

impl RateReport {
    pub fn new(levels: Vec<usize>, errors: Vec<f64>) -> Self {
        let rates = levels
            .windows(2)
            .zip(errors.windows(2))
            .map(|(n, e)| observed_rate(n[0], e[0], n[1], e[1]))
            .collect();
        Self { levels, errors, rates }
    }
}

/// `|q - K_h Pi q|_0` for a single mesh.
pub fn recovery_error(mesh: &Mesh, field: &ProbeField<'_>) -> Result<f64> {
    match field {
        ProbeField::Vector(q) => {
            let interp = pi_rt(mesh, q);
            let rec = k_h(mesh, |t, x| interp.value(t, x))?;
            l2_error(mesh, q, |t, x| rec.value(t, x))
        }
        ProbeField::Matrix(tau) => {
            let interp = pi_hhj(mesh, tau)?;
            let matrices = interp.matrices();
            let rec = k_h(mesh, |t, _| matrices[t])?;
            l2_error(mesh, tau, |t, x| rec.value(t, x))
        }
    }
}

/// Measures `|q - K_h Pi q|_0` across mesh levels of `domain`.
pub fn recovery_order_probe(
    domain: Domain,
    levels: &[usize],
    field: &ProbeField<'_>,
) -> Result<RateReport> {
    let errors = levels
        .iter()
        .map(|&n| {
            let mesh = crate::mesh::build_mesh(domain, n)?;
            recovery_error(&mesh, field)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::new(levels.to_vec(), errors))
}

/// `int_N (r - Pi_HHJ r)` over the parallelogram formed by the two triangles
/// of interior edge `e`, for a field `r` that is linear on `N` (so the
/// centroid rule is exact).
pub fn parallelogram_mean_defect<R: Fn(Point2) -> Sym2>(mesh: &Mesh, e: usize, r: R) -> Result<Sym2> {
    let edge = &mesh.edges[e];
    let second = edge.second.ok_or_else(|| Error::CheckFailed(format!("edge {e} is on the boundary")))?;
    let interp = pi_hhj(mesh, &r)?;
    let mut acc = Sym2::ZERO;
    for t in [edge.first, second] {
        acc += (r(mesh.centroid(t)) - interp.matrix(t)) * mesh.area(t);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_parallelogram_mesh, build_uniform_square_mesh};

    #[test]
    fn rejects_single_cell() {
        let m = build_uniform_square_mesh(1).unwrap();
        assert!(matches!(k_h(&m, |_, _| 1.0f64), Err(Error::UnsupportedMesh(_))));
    }

    #[test]
    fn constants_are_reproduced() {
        for m in [build_uniform_square_mesh(3).unwrap(), build_uniform_parallelogram_mesh(2).unwrap()] {
            let c = Point2::new(1.5, -2.0);
            let r = k_h(&m, |_, _| c).unwrap();
            assert!(r.values.iter().all(|v| (*v - c).norm() < 1e-14));
            let s = Sym2::new(1.0, 2.0, -3.0);
            let r = k_h(&m, |_, _| s).unwrap();
            assert!(r.values.iter().all(|v| (*v - s).norm_sq() < 1e-28));
        }
    }

    #[test]
    fn interior_average() {
        let m = build_uniform_square_mesh(2).unwrap();
        let e = m.edges.iter().position(|e| !e.is_boundary()).unwrap();
        let first = m.edges[e].first;
        let r = k_h(&m, |t, _| if t == first { Point2::new(1.0, 0.0) } else { Point2::new(0.0, 1.0) })
            .unwrap();
        assert!((r.values[e] - Point2::new(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn affine_fields_are_reproduced() {
        let m = build_uniform_parallelogram_mesh(4).unwrap();
        let q = |x: Point2| Point2::new(1.0 + 2.0 * x.x - x.y, 0.5 * x.x + 3.0 * x.y);
        let r = k_h(&m, |_, x| q(x)).unwrap();
        for (e, edge) in m.edges.iter().enumerate() {
            assert!((r.values[e] - q(edge.midpoint)).norm() < 1e-13);
        }
    }

    #[test]
    fn pi_rt_reproduces_rt_fields() {
        let m = build_uniform_square_mesh(3).unwrap();
        for q in [
            &(|_x: Point2| Point2::new(1.0, 0.0)) as &dyn Fn(Point2) -> Point2,
            &|x: Point2| x,
        ] {
            let p = pi_rt(&m, q);
            for t in 0..m.num_triangles() {
                let x = m.map_barycentric(t, [0.2, 0.2, 0.6]);
                assert!((p.value(t, x) - q(x)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn pi_hhj_reproduces_constants() {
        let m = build_uniform_parallelogram_mesh(3).unwrap();
        let c = Sym2::new(0.3, -1.2, 2.0);
        let p = pi_hhj(&m, |_| c).unwrap();
        for t in 0..m.num_triangles() {
            assert!((p.matrix(t) - c).norm_sq() < 1e-26);
        }
    }
}
