//! Broken `L2` norms of piecewise fields.

use crate::error::Result;
use crate::geometry::FieldValue;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::triangle_quadrature;

/// `|exact - discrete|_0` with the degree-6 triangle rule. `discrete` is
/// evaluated per triangle so fields that jump across edges are fine.
pub fn l2_error<V, E, D>(mesh: &Mesh, exact: E, discrete: D) -> Result<f64>
where
    V: FieldValue,
    E: Fn(Point2) -> V,
    D: Fn(usize, Point2) -> V,
{
    let rule = triangle_quadrature(6)?;
    let sum: f64 = (0..mesh.num_triangles())
        .map(|t| rule.integrate(mesh, t, |x, _| exact(x).sub(discrete(t, x)).norm_sq()))
        .sum();
    Ok(sum.sqrt())
}

/// `|g|_0` of a smooth field, degree-`degree` rule.
pub fn l2_norm<V, G>(mesh: &Mesh, degree: usize, g: G) -> Result<f64>
where
    V: FieldValue,
    G: Fn(Point2) -> V,
{
    let rule = triangle_quadrature(degree)?;
    let sum: f64 = (0..mesh.num_triangles()).map(|t| rule.integrate(mesh, t, |x, _| g(x).norm_sq())).sum();
    Ok(sum.sqrt())
}
