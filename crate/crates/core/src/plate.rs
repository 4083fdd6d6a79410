//! Clamped plate problem `(hess u, hess v) = (f, v)`: the Morley element
//! (plain and with the vertex-interpolated test function in the load), the
//! lowest-order Hellan-Herrmann-Johnson mixed method, and the map between the
//! modified Morley solution and the mixed one.

use crate::elements::{HhjBasis, MorleyBasis};
use crate::error::{Error, Result};
use crate::geometry::Sym2;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::triangle_quadrature;
use crate::recovery::pi_hhj;
use crate::sparse::{solve_saddle, solve_spd, CsrMatrix, SolveReport, SolverOptions, SymMatrixBuilder};

/// Load vector variant for the Morley method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateRhsMode {
    /// `(f, v)`
    Exact,
    /// `(f, Pi_D v)`, where `Pi_D v` is the continuous piecewise-linear
    /// interpolant of the vertex values of `v`.
    VertexInterpolated,
}

/// Morley function: vertex values and edge means of the normal derivative
/// along the global edge normal; both vanish on the boundary.
#[derive(Debug, Clone)]
pub struct MorleyFunction<'m> {
    pub mesh: &'m Mesh,
    pub vertex_values: Vec<f64>,
    pub normal_derivatives: Vec<f64>,
}

impl<'m> MorleyFunction<'m> {
    pub fn zero(mesh: &'m Mesh) -> Self {
        Self {
            mesh,
            vertex_values: vec![0.0; mesh.num_vertices()],
            normal_derivatives: vec![0.0; mesh.num_edges()],
        }
    }

    fn local_dofs(&self, t: usize) -> [f64; 6] {
        let tri = &self.mesh.triangles[t];
        let mut d = [0.0; 6];
        for i in 0..3 {
            d[i] = self.vertex_values[tri.vertices[i]];
            d[3 + i] = self.normal_derivatives[tri.edges[i]];
        }
        d
    }

    fn combine<V: crate::geometry::FieldValue>(&self, t: usize, shape: impl Fn(&MorleyBasis, usize) -> V) -> V {
        let basis = MorleyBasis::new(self.mesh, t).expect("nondegenerate triangle");
        let d = self.local_dofs(t);
        (0..6).fold(V::zero(), |acc, i| acc.add(shape(&basis, i).scale(d[i])))
    }

    /// Constant Hessian on triangle `t`.
    pub fn hessian(&self, t: usize) -> Sym2 {
        self.combine(t, |b, i| b.hessian(i))
    }

    pub fn hessians(&self) -> Vec<Sym2> {
        (0..self.mesh.num_triangles()).map(|t| self.hessian(t)).collect()
    }

    pub fn value(&self, t: usize, x: Point2) -> f64 {
        self.combine(t, |b, i| b.value(i, x))
    }

    pub fn gradient(&self, t: usize, x: Point2) -> Point2 {
        self.combine(t, |b, i| b.gradient(i, x))
    }
}

/// Continuous piecewise-linear field with zero boundary values.
#[derive(Debug, Clone)]
pub struct P1Field<'m> {
    pub mesh: &'m Mesh,
    pub values: Vec<f64>,
}

impl<'m> P1Field<'m> {
    pub fn value(&self, t: usize, x: Point2) -> f64 {
        let l = self.mesh.barycentric(t, x);
        let v = self.mesh.triangles[t].vertices;
        (0..3).map(|i| l[i] * self.values[v[i]]).sum()
    }

    pub fn gradient(&self, t: usize) -> Point2 {
        let g = self.mesh.barycentric_gradients(t);
        let v = self.mesh.triangles[t].vertices;
        (0..3).fold(Point2::ZERO, |acc, i| acc + g[i] * self.values[v[i]])
    }
}

/// Hellan-Herrmann-Johnson field: the normal-normal trace on every edge.
/// The matrix on a triangle is the constant symmetric matrix with those three
/// traces.
#[derive(Debug, Clone)]
pub struct HhjField<'m> {
    pub mesh: &'m Mesh,
    pub traces: Vec<f64>,
}

impl<'m> HhjField<'m> {
    pub fn matrix(&self, t: usize) -> Sym2 {
        let basis = HhjBasis::new(self.mesh, t).expect("nondegenerate triangle");
        basis.reconstruct(self.mesh.triangles[t].edges.map(|e| self.traces[e]))
    }

    pub fn matrices(&self) -> Vec<Sym2> {
        (0..self.mesh.num_triangles()).map(|t| self.matrix(t)).collect()
    }
}

/// Numbering of the Morley unknowns: interior vertices first, then interior
/// edges.
struct MorleyNumbering {
    vertices: Vec<Option<usize>>,
    edges: Vec<Option<usize>>,
    dim: usize,
}

impl MorleyNumbering {
    fn new(mesh: &Mesh) -> Self {
        let on_boundary = mesh.boundary_vertices();
        let mut dim = 0;
        let mut next = |free: bool| {
            free.then(|| {
                dim += 1;
                dim - 1
            })
        };
        let vertices = on_boundary.iter().map(|&b| next(!b)).collect();
        let edges = mesh.edges.iter().map(|e| next(!e.is_boundary())).collect();
        Self { vertices, edges, dim }
    }

    fn local(&self, mesh: &Mesh, t: usize) -> [Option<usize>; 6] {
        let tri = &mesh.triangles[t];
        let mut d = [None; 6];
        for i in 0..3 {
            d[i] = self.vertices[tri.vertices[i]];
            d[3 + i] = self.edges[tri.edges[i]];
        }
        d
    }
}

pub fn solve_morley<'m, F: Fn(Point2) -> f64>(
    mesh: &'m Mesh,
    f: F,
    mode: PlateRhsMode,
    options: &SolverOptions,
) -> Result<(MorleyFunction<'m>, SolveReport)> {
    let numbering = MorleyNumbering::new(mesh);
    let mut stiffness = SymMatrixBuilder::new(numbering.dim);
    let mut rhs = vec![0.0; numbering.dim];
    let rule = triangle_quadrature(6)?;

    for t in 0..mesh.num_triangles() {
        let basis = MorleyBasis::new(mesh, t)?;
        let k = basis.stiffness(mesh.area(t));
        let dofs = numbering.local(mesh, t);
        let mut load = [0.0; 6];
        match mode {
            PlateRhsMode::Exact => {
                for (i, li) in load.iter_mut().enumerate() {
                    if dofs[i].is_some() {
                        *li = rule.integrate(mesh, t, |x, _| f(x) * basis.value(i, x));
                    }
                }
            }
            PlateRhsMode::VertexInterpolated => {
                // Pi_D of a vertex shape is the hat function; of an edge
                // shape it is zero.
                for i in 0..3 {
                    if dofs[i].is_some() {
                        load[i] = rule.integrate(mesh, t, |x, l| f(x) * l[i]);
                    }
                }
            }
        }
        for i in 0..6 {
            let Some(gi) = dofs[i] else { continue };
            rhs[gi] += load[i];
            for j in 0..6 {
                if let Some(gj) = dofs[j] {
                    stiffness.add(gi, gj, k[i][j]);
                }
            }
        }
    }

    let matrix = stiffness.finalize();
    let (x, report) = solve_spd(&matrix, &rhs, options)?;
    let mut u = MorleyFunction::zero(mesh);
    for (v, slot) in numbering.vertices.iter().enumerate() {
        if let Some(g) = slot {
            u.vertex_values[v] = x[*g];
        }
    }
    for (e, slot) in numbering.edges.iter().enumerate() {
        if let Some(g) = slot {
            u.normal_derivatives[e] = x[*g];
        }
    }
    Ok((u, report))
}

/// Vertex interpolation of a Morley function into continuous P1.
pub fn pi_d<'m>(v: &MorleyFunction<'m>) -> P1Field<'m> {
    let boundary = v.mesh.boundary_vertices();
    let values = v
        .vertex_values
        .iter()
        .zip(&boundary)
        .map(|(&x, &b)| if b { 0.0 } else { x })
        .collect();
    P1Field { mesh: v.mesh, values }
}

/// Vertex interpolation of a function vanishing on the boundary.
pub fn pi_d_exact<F: Fn(Point2) -> f64>(mesh: &Mesh, v: F) -> P1Field<'_> {
    let boundary = mesh.boundary_vertices();
    let values = mesh
        .vertices
        .iter()
        .zip(&boundary)
        .map(|(&p, &b)| if b { 0.0 } else { v(p) })
        .collect();
    P1Field { mesh, values }
}

/// Largest disagreement of `nu^T M nu` between the two sides of an interior
/// edge for a piecewise-constant matrix field.
pub fn hhj_conformity_defect(mesh: &Mesh, matrices: &[Sym2]) -> (f64, Option<usize>) {
    let mut worst = (0.0, None);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(s) = edge.second else { continue };
        let n = edge.unit_normal;
        let d = (matrices[edge.first].normal_normal(n) - matrices[s].normal_normal(n)).abs();
        if d > worst.0 || worst.1.is_none() {
            worst = (d, Some(e));
        }
    }
    worst
}

/// The mixed pair `(hess_h ubar_M, Pi_D ubar_M)` built from the modified
/// Morley solution. Fails if the normal-normal traces of the broken Hessian
/// are not single-valued (to `1e-10` relative), which happens when `u` does
/// not come from [`PlateRhsMode::VertexInterpolated`].
pub fn hhj_from_morley<'m>(u: &MorleyFunction<'m>) -> Result<(HhjField<'m>, P1Field<'m>)> {
    let mesh = u.mesh;
    let hessians = u.hessians();
    let traces: Vec<f64> = mesh
        .edges
        .iter()
        .map(|e| hessians[e.first].normal_normal(e.unit_normal))
        .collect();
    let scale = traces.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    let (defect, edge) = hhj_conformity_defect(mesh, &hessians);
    if defect > 1e-10 * scale {
        return Err(Error::ConformityViolation { edge: edge.unwrap_or(0), discrepancy: defect });
    }
    Ok((HhjField { mesh, traces }, pi_d(u)))
}

/// Matrix of `b(tau, lambda_z)` with one row per interior vertex `z` and one
/// column per edge trace, plus the vertex-to-row map.
pub(crate) fn hhj_coupling(mesh: &Mesh) -> (CsrMatrix, Vec<Option<usize>>) {
    let boundary = mesh.boundary_vertices();
    let mut vnum = vec![None; mesh.num_vertices()];
    let mut nv = 0;
    for (v, &b) in boundary.iter().enumerate() {
        if !b {
            vnum[v] = Some(nv);
            nv += 1;
        }
    }
    let mut coupling = Vec::new();
    for t in 0..mesh.num_triangles() {
        let tri = &mesh.triangles[t];
        let grads = mesh.barycentric_gradients(t);
        for k in 0..3 {
            let Some(row) = vnum[tri.vertices[k]] else { continue };
            for i in 0..3 {
                let e = tri.edges[i];
                let dn = grads[k].dot(mesh.outward_normal(t, i));
                coupling.push((row, e, mesh.edges[e].length * dn));
            }
        }
    }
    (CsrMatrix::from_triplets(nv, mesh.num_edges(), coupling), vnum)
}

/// Solves the lowest-order Hellan-Herrmann-Johnson system
/// `(sigma, tau) + b(tau, u) = 0`, `b(sigma, v) = (-f, v)` with
/// `b(tau, v) = sum_K int_{dK} M_nn(tau) dv/dn`.
pub fn solve_hhj_direct<'m, F: Fn(Point2) -> f64>(
    mesh: &'m Mesh,
    f: F,
    options: &SolverOptions,
) -> Result<(HhjField<'m>, P1Field<'m>, SolveReport)> {
    let ne = mesh.num_edges();
    let (b, vnum) = hhj_coupling(mesh);
    let nv = b.rows();
    let rule = triangle_quadrature(6)?;
    let mut mass = SymMatrixBuilder::new(ne);
    let mut g = vec![0.0; nv];
    for t in 0..mesh.num_triangles() {
        let basis = HhjBasis::new(mesh, t)?;
        let m = basis.mass(mesh.area(t));
        let tri = &mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                mass.add(tri.edges[i], tri.edges[j], m[i][j]);
            }
        }
        for k in 0..3 {
            if let Some(row) = vnum[tri.vertices[k]] {
                g[row] -= rule.integrate(mesh, t, |x, l| f(x) * l[k]);
            }
        }
    }
    let a = mass.finalize();
    let sol = solve_saddle(&a, &b, &vec![0.0; ne], &g, options)?;
    let mut values = vec![0.0; mesh.num_vertices()];
    for (v, slot) in vnum.iter().enumerate() {
        if let Some(r) = slot {
            values[v] = sol.multiplier[*r];
        }
    }
    Ok((HhjField { mesh, traces: sol.primal }, P1Field { mesh, values }, sol.report))
}

/// Broken `L2` norm of the Hessian difference of two Morley functions.
pub fn morley_hessian_difference(a: &MorleyFunction<'_>, b: &MorleyFunction<'_>) -> f64 {
    let mesh = a.mesh;
    (0..mesh.num_triangles())
        .map(|t| {
            let d = a.hessian(t) - b.hessian(t);
            mesh.area(t) * d.frobenius(&d)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatePerturbationReport {
    /// `|hess_h (u_M - ubar_M)|_0`
    pub difference: f64,
    pub h: f64,
    /// `difference / (h^2 |f|_0)`
    pub ratio: f64,
}

pub fn plate_perturbation_check<F: Fn(Point2) -> f64>(
    mesh: &Mesh,
    f: F,
    f_l2_norm: f64,
    options: &SolverOptions,
) -> Result<PlatePerturbationReport> {
    let (plain, _) = solve_morley(mesh, &f, PlateRhsMode::Exact, options)?;
    let (modified, _) = solve_morley(mesh, &f, PlateRhsMode::VertexInterpolated, options)?;
    let difference = morley_hessian_difference(&plain, &modified);
    let ratio = if f_l2_norm > 0.0 { difference / (mesh.h * mesh.h * f_l2_norm) } else { 0.0 };
    Ok(PlatePerturbationReport { difference, h: mesh.h, ratio })
}

/// `(sigma_h - sigma, sigma_h - Pi_HHJ sigma)` and
/// `|sigma_h - Pi_HHJ sigma|^2`, both by degree-6 quadrature.
pub fn hhj_orthogonality<S: Fn(Point2) -> Sym2>(
    sigma_h: &HhjField<'_>,
    sigma: S,
) -> Result<(f64, f64)> {
    let mesh = sigma_h.mesh;
    let rule = triangle_quadrature(6)?;
    let interp = pi_hhj(mesh, &sigma)?;
    let mut inner = 0.0;
    let mut norm_sq = 0.0;
    for t in 0..mesh.num_triangles() {
        let sh = sigma_h.matrix(t);
        let d = sh - interp.matrix(t);
        inner += rule.integrate(mesh, t, |x, _| (sh - sigma(x)).frobenius(&d));
        norm_sq += mesh.area(t) * d.frobenius(&d);
    }
    Ok((inner, norm_sq))
}
