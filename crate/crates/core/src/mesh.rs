//! Uniform triangulations of the unit square and of a parallelogram.
//!
//! A triangulation is *uniform* when every pair of triangles sharing an edge
//! forms a parallelogram. Both built-in domains are split into `n x n` cells
//! with every diagonal running from the lower-right to the upper-left corner
//! of its cell, which makes them uniform for every `n`. On the parallelogram
//! this is the short diagonal, which yields 30-60-90 triangles.
//!
//! Conventions used by every discrete space in the crate:
//!
//! * triangle vertices are counterclockwise and local edge `i` is opposite
//!   local vertex `i`;
//! * an edge's `first` triangle is the lower-indexed neighbour and the global
//!   unit normal points out of `first` (for interior edges that is towards
//!   `second`, for boundary edges it is the outward normal of the domain).

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
pub use crate::geometry::Point2;

/// Relative tolerance (scaled by `h`) for geometric identities.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    UnitSquare,
    Parallelogram,
    /// Built through [`Mesh::from_triangles`].
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    /// `edges[i]` is opposite `vertices[i]`.
    pub edges: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Sorted endpoint indices.
    pub vertices: [usize; 2],
    pub first: usize,
    pub second: Option<usize>,
    pub unit_normal: Point2,
    pub midpoint: Point2,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }

    pub fn triangles(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.first).chain(self.second)
    }

    pub fn tangent(&self) -> Point2 {
        self.unit_normal.rot_cw() * -1.0
    }
}

/// The parallelogram stencil used to extrapolate edge-midpoint values onto a
/// boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPartner {
    /// Triangle forming a parallelogram with the boundary edge's triangle.
    pub partner: usize,
    /// Center of that parallelogram (midpoint of the shared edge).
    pub center: Point2,
    /// Index of the shared interior edge; its midpoint is `center`.
    pub center_edge: usize,
    /// Reflection of the boundary midpoint through `center`.
    pub reflected: Point2,
    /// Interior edge whose midpoint is `reflected`.
    pub interior_edge: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityReport {
    pub passed: bool,
    /// Largest `|a + b - p - q|` over interior edges.
    pub worst_defect: f64,
    /// Interior edge attaining `worst_defect`.
    pub worst_edge: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Largest triangle diameter.
    pub h: f64,
    /// Cells per side for the built-in domains.
    pub n: usize,
    pub domain: Domain,
    boundary_extrapolation: Vec<Option<BoundaryPartner>>,
}

/// Affine map taking the unit square onto the parallelogram with corners
/// `(0,0), (2,0), (7/2, sqrt(3)/2), (3/2, sqrt(3)/2)`.
pub fn parallelogram_map(p: Point2) -> Point2 {
    Point2::new(2.0 * p.x + 1.5 * p.y, 0.5 * 3f64.sqrt() * p.y)
}

pub fn build_uniform_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidSubdivision(n));
    }
    let step = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 * step, j as f64 * step));
        }
    }
    let mut mesh = Mesh::from_triangles(vertices, cell_triangles(n))?;
    mesh.n = n;
    mesh.domain = Domain::UnitSquare;
    Ok(mesh)
}

pub fn build_uniform_parallelogram_mesh(n: usize) -> Result<Mesh> {
    let square = build_uniform_square_mesh(n)?;
    let vertices = square.vertices.iter().map(|&p| parallelogram_map(p)).collect();
    let mut mesh = Mesh::from_triangles(vertices, cell_triangles(n))?;
    mesh.n = n;
    mesh.domain = Domain::Parallelogram;
    Ok(mesh)
}

/// Uniform mesh of a built-in domain.
pub fn build_mesh(domain: Domain, n: usize) -> Result<Mesh> {
    match domain {
        Domain::UnitSquare => build_uniform_square_mesh(n),
        Domain::Parallelogram => build_uniform_parallelogram_mesh(n),
        Domain::Custom => Err(Error::UnsupportedMesh("custom meshes have no uniform family".into())),
    }
}

fn cell_triangles(n: usize) -> Vec<[usize; 3]> {
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            tris.push([a, b, d]);
            tris.push([b, c, d]);
        }
    }
    tris
}

impl Mesh {
    /// Builds edge topology for an arbitrary conforming triangulation.
    /// Triangles must be counterclockwise.
    pub fn from_triangles(vertices: Vec<Point2>, tris: Vec<[usize; 3]>) -> Result<Mesh> {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangles = Vec::with_capacity(tris.len());
        let mut h: f64 = 0.0;

        for (t, v) in tris.iter().enumerate() {
            let [p0, p1, p2] = v.map(|i| vertices[i]);
            let area = 0.5 * (p1 - p0).cross(p2 - p0);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { triangle: t, area });
            }
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = v[(i + 1) % 3];
                let b = v[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let tangent = vertices[b] - vertices[a];
                let length = tangent.norm();
                h = h.max(length);
                *slot = match edge_index.get(&key) {
                    Some(&e) => {
                        if edges[e].second.is_some() {
                            return Err(Error::UnsupportedMesh(format!(
                                "edge {:?} shared by more than two triangles",
                                key
                            )));
                        }
                        edges[e].second = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push(Edge {
                            vertices: key,
                            first: t,
                            second: None,
                            unit_normal: tangent.rot_cw() * (1.0 / length),
                            midpoint: vertices[a].midpoint(vertices[b]),
                            length,
                        });
                        edge_index.insert(key, e);
                        e
                    }
                };
            }
            triangles.push(Triangle { vertices: *v, edges: local });
        }

        let mut mesh = Mesh {
            vertices,
            triangles,
            edges,
            h,
            n: 0,
            domain: Domain::Custom,
            boundary_extrapolation: Vec::new(),
        };
        mesh.boundary_extrapolation = (0..mesh.edges.len())
            .map(|e| {
                if mesh.edges[e].is_boundary() {
                    mesh.find_boundary_partner(e)
                } else {
                    None
                }
            })
            .collect();
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    /// "2n x n" label used in the convergence tables.
    pub fn level_label(&self) -> String {
        format!("{}x{}", 2 * self.n, self.n)
    }

    /// Flags vertices lying on the boundary.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            flags[e.vertices[0]] = true;
            flags[e.vertices[1]] = true;
        }
        flags
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * (p1 - p0).cross(p2 - p0)
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [p0, p1, p2] = self.triangle_points(t);
        (p0 + p1 + p2) * (1.0 / 3.0)
    }

    /// Maps barycentric coordinates on triangle `t` to a physical point.
    pub fn map_barycentric(&self, t: usize, l: [f64; 3]) -> Point2 {
        let [p0, p1, p2] = self.triangle_points(t);
        p0 * l[0] + p1 * l[1] + p2 * l[2]
    }

    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let twice_area = (p1 - p0).cross(p2 - p0);
        let l1 = (p - p0).cross(p2 - p0) / twice_area;
        let l2 = (p1 - p0).cross(p - p0) / twice_area;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Constant gradients of the three barycentric coordinates.
    pub fn barycentric_gradients(&self, t: usize) -> [Point2; 3] {
        let [p0, p1, p2] = self.triangle_points(t);
        let twice_area = (p1 - p0).cross(p2 - p0);
        // grad l_i = outward-normal-of-opposite-edge rotated, scaled.
        let g = |a: Point2, b: Point2| (b - a).rot_cw() * (-1.0 / twice_area);
        [g(p1, p2), g(p2, p0), g(p0, p1)]
    }

    /// Outward unit normal of triangle `t` on its local edge `i`.
    pub fn outward_normal(&self, t: usize, i: usize) -> Point2 {
        let e = &self.edges[self.triangles[t].edges[i]];
        e.unit_normal * self.normal_sign(t, i)
    }

    /// `+1` when the global normal of local edge `i` points out of `t`.
    pub fn normal_sign(&self, t: usize, i: usize) -> f64 {
        if self.edges[self.triangles[t].edges[i]].first == t {
            1.0
        } else {
            -1.0
        }
    }

    /// Local index of edge `e` in triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> Option<usize> {
        self.triangles[t].edges.iter().position(|&x| x == e)
    }

    /// Opposite vertex of `e` inside its adjacent triangle `t`.
    fn opposite_vertex(&self, t: usize, e: usize) -> usize {
        let i = self.local_edge(t, e).expect("edge belongs to triangle");
        self.triangles[t].vertices[i]
    }

    /// Every parallelogram stencil available to boundary edge `e`, in the
    /// local edge order of its triangle.
    pub fn boundary_candidates(&self, e: usize) -> Vec<BoundaryPartner> {
        let edge = &self.edges[e];
        let k = edge.first;
        let p = edge.midpoint;
        let tol = GEOMETRY_TOL * self.h;
        let mut out = Vec::new();
        for &shared in &self.triangles[k].edges {
            let shared_edge = &self.edges[shared];
            let Some(partner) = shared_edge.triangles().find(|&t| t != k) else {
                continue;
            };
            let center = shared_edge.midpoint;
            let reflected = center * 2.0 - p;
            let hit = self.triangles[partner].edges.iter().copied().find(|&cand| {
                cand != shared && (self.edges[cand].midpoint - reflected).norm() <= tol
            });
            if let Some(interior_edge) = hit {
                if !self.edges[interior_edge].is_boundary() {
                    out.push(BoundaryPartner { partner, center, center_edge: shared, reflected, interior_edge });
                }
            }
        }
        out
    }

    fn find_boundary_partner(&self, e: usize) -> Option<BoundaryPartner> {
        self.boundary_candidates(e).into_iter().next()
    }

    /// Parallelogram extrapolation stencil for boundary edge `e`.
    pub fn boundary_partner(&self, e: usize) -> Result<BoundaryPartner> {
        if !self.edges[e].is_boundary() {
            return Err(Error::NotBoundaryEdge(e));
        }
        self.boundary_extrapolation[e].ok_or_else(|| {
            Error::UnsupportedMesh(format!(
                "boundary edge {e} has no parallelogram partner with an interior reflected midpoint"
            ))
        })
    }

    /// Whether every boundary edge has an extrapolation stencil.
    pub fn has_boundary_extrapolation(&self) -> bool {
        self.edges
            .iter()
            .zip(&self.boundary_extrapolation)
            .all(|(e, b)| !e.is_boundary() || b.is_some())
    }

    /// Checks the parallelogram identity `a + b = p + q` on every interior
    /// edge `pq` with opposite vertices `a` and `b`.
    pub fn verify_uniformity(&self) -> UniformityReport {
        let mut worst = 0.0;
        let mut worst_edge = None;
        for (e, edge) in self.edges.iter().enumerate() {
            let Some(second) = edge.second else { continue };
            let a = self.vertices[self.opposite_vertex(edge.first, e)];
            let b = self.vertices[self.opposite_vertex(second, e)];
            let [p, q] = edge.vertices.map(|v| self.vertices[v]);
            let defect = (a + b - p - q).norm();
            if defect > worst || worst_edge.is_none() {
                worst = defect;
                worst_edge = Some(e);
            }
        }
        UniformityReport {
            passed: worst <= GEOMETRY_TOL * self.h,
            worst_defect: worst,
            worst_edge,
        }
    }

    /// Plain-text dump: `v x1 x2` per vertex, then `t i j k` per triangle.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e}", p.x, p.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "t {} {} {}", t.vertices[0], t.vertices[1], t.vertices[2])?;
        }
        Ok(())
    }
}
