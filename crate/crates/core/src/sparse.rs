//! Sparse symmetric linear algebra: assembly builders, compressed-row
//! storage, a Jacobi-preconditioned conjugate gradient, an envelope Cholesky
//! factorization with reverse Cuthill-McKee ordering, and a Schur-complement
//! solver for symmetric saddle-point systems.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

/// Accumulates the upper triangle of a symmetric matrix. Entries with
/// `row > col` are ignored, so element matrices can be scattered in full.
#[derive(Debug, Clone)]
pub struct SymMatrixBuilder {
    dim: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SymMatrixBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, triplets: Vec::new() }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        if row <= col {
            self.triplets.push((row, col, value));
        }
    }

    pub fn finalize(mut self) -> SymCsr {
        // Stable sort keeps the summation order of duplicates equal to the
        // insertion order.
        self.triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(self.triplets.len());
        for (r, c, v) in self.triplets {
            match upper.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => upper.push((r, c, v)),
            }
        }
        upper.retain(|&(_, _, v)| v != 0.0);

        let mut counts = vec![0usize; self.dim];
        for &(r, c, _) in &upper {
            counts[r] += 1;
            if r != c {
                counts[c] += 1;
            }
        }
        let mut row_ptr = vec![0usize; self.dim + 1];
        for i in 0..self.dim {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[self.dim];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = row_ptr.clone();
        // Lower-triangle entries of row r come from (c, r) pairs with c < r;
        // walking `upper` in row-major order writes every row sorted.
        for &(r, c, v) in &upper {
            if r != c {
                let k = next[c];
                col_idx[k] = r;
                values[k] = v;
                next[c] += 1;
            }
            let k = next[r];
            col_idx[k] = c;
            values[k] = v;
            next[r] += 1;
        }
        let mut m = SymCsr { dim: self.dim, row_ptr, col_idx, values };
        m.sort_rows();
        m
    }
}

/// Symmetric matrix in compressed-row form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCsr {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymCsr {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn sort_rows(&mut self) {
        for i in 0..self.dim {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> =
                self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied()).collect();
            row.sort_by_key(|&(c, _)| c);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.col_idx[a + k] = c;
                self.values[a + k] = v;
            }
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] = v;
            }
        }
        d
    }
}

/// Rectangular matrix assembled from triplets (duplicates summed).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (c, v) in self.row(i) {
                x[c] += v * yi;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpdMethod {
    /// Conjugate gradient with a diagonal preconditioner.
    ConjugateGradient,
    /// Envelope Cholesky after reverse Cuthill-McKee ordering, followed by
    /// iterative refinement.
    Cholesky,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Bound on the relative residual `|Ax - b| / |b|`.
    pub tolerance: f64,
    pub method: SpdMethod,
    /// Iteration cap; defaults to `20 * dim`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, method: SpdMethod::ConjugateGradient, max_iterations: None }
    }
}

impl SolverOptions {
    pub fn with_method(mut self, method: SpdMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: SpdMethod,
    pub dimension: usize,
    /// CG iterations, or refinement sweeps after a factorization.
    pub iterations: usize,
    /// Stored entries of the factor (zero for CG).
    pub factor_entries: usize,
    pub relative_residual: f64,
    /// Componentwise backward error `max_i |b - Ax|_i / (|A||x| + |b|)_i`.
    pub backward_error: f64,
    pub tolerance: f64,
    /// The residual stalled above `tolerance` at the rounding level of `x`
    /// (backward error at most [`ROUNDING_LIMIT`]); the solve is accepted.
    pub rounding_limited: bool,
}

/// Backward error below which a solution is exact up to rounding of its
/// own entries.
pub const ROUNDING_LIMIT: f64 = 32.0 * f64::EPSILON;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|Ax - b| / |b|`, or `|Ax|` when `b = 0`.
pub fn relative_residual(a: &SymCsr, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Componentwise (Oettli-Prager) backward error of `x`.
pub fn backward_error(a: &SymCsr, x: &[f64], b: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.dim() {
        let (mut ax, mut scale) = (0.0, b[i].abs());
        for (j, v) in a.row(i) {
            ax += v * x[j];
            scale += (v * x[j]).abs();
        }
        let r = (ax - b[i]).abs();
        if r > 0.0 {
            worst = worst.max(if scale > 0.0 { r / scale } else { f64::INFINITY });
        }
    }
    worst
}

fn finish(
    a: &SymCsr,
    x: Vec<f64>,
    b: &[f64],
    method: SpdMethod,
    iterations: usize,
    factor_entries: usize,
    tolerance: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    let relative_residual = relative_residual(a, &x, b);
    let backward_error = backward_error(a, &x, b);
    let rounding_limited = relative_residual > tolerance && backward_error <= ROUNDING_LIMIT;
    if relative_residual > tolerance && !rounding_limited {
        return Err(Error::NotConverged { iterations, residual: relative_residual, tolerance });
    }
    let report = SolveReport {
        method,
        dimension: a.dim(),
        iterations,
        factor_entries,
        relative_residual,
        backward_error,
        tolerance,
        rounding_limited,
    };
    Ok((x, report))
}

/// Solves `A x = b` for symmetric positive definite `A`.
///
/// Succeeds when `|Ax - b| / |b| <= tolerance`. For very ill-conditioned
/// systems that bound can lie below what any floating-point `x` attains; a
/// solution whose componentwise backward error is at the rounding level is
/// then accepted and flagged in the report.
pub fn solve_spd(a: &SymCsr, b: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.len() });
    }
    let n = a.dim();
    if norm(b) == 0.0 {
        let report = SolveReport {
            method: options.method,
            dimension: n,
            iterations: 0,
            factor_entries: 0,
            relative_residual: 0.0,
            backward_error: 0.0,
            tolerance: options.tolerance,
            rounding_limited: false,
        };
        return Ok((vec![0.0; n], report));
    }
    match options.method {
        SpdMethod::ConjugateGradient => pcg(a, b, options),
        SpdMethod::Cholesky => {
            let factor = EnvelopeCholesky::factor(a)?;
            let max_sweeps = options.max_iterations.unwrap_or(10);
            let mut x = factor.solve(b);
            let mut berr = backward_error(a, &x, b);
            let mut sweeps = 0;
            while relative_residual(a, &x, b) > options.tolerance && berr > f64::EPSILON && sweeps < max_sweeps {
                let ax = a.mul_vec(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                let dx = factor.solve(&r);
                let candidate: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
                let next = backward_error(a, &candidate, b);
                sweeps += 1;
                if next > 0.5 * berr {
                    if next < berr {
                        x = candidate;
                    }
                    break;
                }
                x = candidate;
                berr = next;
            }
            finish(a, x, b, SpdMethod::Cholesky, sweeps, factor.entries(), options.tolerance)
        }
    }
}

fn pcg(a: &SymCsr, b: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    let cap = options.max_iterations.unwrap_or(20 * n.max(1));
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { pivot: i, value: d })
            }
        })
        .collect::<Result<_>>()?;
    let nb = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(p, q)| p * q).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    // The recurrence residual drifts from the true one; stop on the
    // recurrence, then confirm against the true residual.
    let mut restarts = 0;
    loop {
        while norm(&r) > 0.5 * options.tolerance * nb && iterations < cap {
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: iterations, value: pap });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        let residual = relative_residual(a, &x, b);
        if residual <= options.tolerance
            || iterations >= cap
            || restarts >= 3
            || backward_error(a, &x, b) <= ROUNDING_LIMIT
        {
            return finish(a, x, b, SpdMethod::ConjugateGradient, iterations, 0, options.tolerance);
        }
        // restart from the true residual
        restarts += 1;
        let ax = a.mul_vec(&x);
        for i in 0..n {
            r[i] = b[i] - ax[i];
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        rz = dot(&r, &z);
    }
}

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SymCsr) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(c, _)| c != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut start_candidates: Vec<usize> = (0..n).collect();
    start_candidates.sort_by_key(|&i| (degree[i], i));
    for &seed in &start_candidates {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                a.row(v).map(|(c, _)| c).filter(|&c| c != v && !visited[c]).collect();
            nbrs.sort_by_key(|&c| (degree[c], c));
            for c in nbrs {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SymCsr, root: usize) -> (usize, Vec<usize>) {
    let n = a.dim();
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last_level = Vec::new();
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        if level[v] > depth {
            depth = level[v];
            last_level.clear();
        }
        last_level.push(v);
        for (c, _) in a.row(v) {
            if level[c] == usize::MAX {
                level[c] = level[v] + 1;
                queue.push_back(c);
            }
        }
    }
    (depth, last_level)
}

fn pseudo_peripheral(a: &SymCsr, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut depth, mut last) = bfs_levels(a, root);
    for _ in 0..8 {
        let Some(&candidate) = last.iter().min_by_key(|&&v| (degree[v], v)) else { break };
        let (d, l) = bfs_levels(a, candidate);
        if d <= depth {
            break;
        }
        root = candidate;
        depth = d;
        last = l;
    }
    root
}

/// Row-oriented envelope (skyline) Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    /// First stored column of each row of `L`.
    first: Vec<usize>,
    /// Offset of row `i` in `data`; row `i` stores columns `first[i]..=i`.
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymCsr) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            *f = a.row(perm[i]).map(|(c, _)| inverse[c]).filter(|&c| c <= i).min().unwrap_or(i);
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (c, v) in a.row(perm[i]) {
                let j = inverse[c];
                if j <= i {
                    data[offset[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_start = offset[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_start);
                let row_j = &head[offset[j]..offset[j + 1]];
                let row_i = &mut tail[..i - fi + 1];
                let s: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(&row_j[k0 - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let row_i = &mut data[row_start..offset[i + 1]];
            let s: f64 = row_i[..i - fi].iter().map(|x| x * x).sum();
            let d = row_i[i - fi] - s;
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: perm[i], value: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self { perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn entries(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (yk, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yk -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Solution of a symmetric saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub report: SolveReport,
}

/// Solves `[[A, B^T], [B, 0]] (sigma, u) = (f, g)` through the Schur
/// complement `B A^{-1} B^T u = B A^{-1} f - g`, with `A` factorized once and
/// the Schur system solved by conjugate gradients.
pub fn solve_saddle(
    a: &SymCsr,
    b: &CsrMatrix,
    f: &[f64],
    g: &[f64],
    options: &SolverOptions,
) -> Result<SaddleSolution> {
    let n = a.dim();
    let m = b.rows();
    if b.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.cols() });
    }
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: f.len() });
    }
    if g.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: g.len() });
    }
    let rhs_norm = (dot(f, f) + dot(g, g)).sqrt();
    let report = |iterations, factor_entries, relative_residual| SolveReport {
        method: SpdMethod::Cholesky,
        dimension: n + m,
        iterations,
        factor_entries,
        relative_residual,
        backward_error: relative_residual,
        tolerance: options.tolerance,
        rounding_limited: false,
    };
    if rhs_norm == 0.0 {
        return Ok(SaddleSolution {
            primal: vec![0.0; n],
            multiplier: vec![0.0; m],
            report: report(0, 0, 0.0),
        });
    }
    let factor = EnvelopeCholesky::factor(a)?;
    let cap = options.max_iterations.unwrap_or(20 * m.max(1));
    let schur_solve = |f: &[f64], g: &[f64]| -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let schur = |v: &[f64]| b.mul_vec(&factor.solve(&b.mul_transpose_vec(v)));
        let a_inv_f = factor.solve(f);
        let rhs: Vec<f64> = b.mul_vec(&a_inv_f).iter().zip(g).map(|(p, q)| p - q).collect();
        let target = 0.1 * options.tolerance * norm(&rhs);
        let mut u = vec![0.0; m];
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut iterations = 0;
        let mut scale = 0.0f64;
        while rr.sqrt() > target && iterations < cap {
            let sp = schur(&p);
            let psp = dot(&p, &sp);
            let pp = dot(&p, &p);
            scale = scale.max(psp / pp);
            if psp <= 1e-14 * scale * pp {
                if iterations > 0 && rr.sqrt() <= 1e-10 * norm(&rhs) {
                    break;
                }
                return Err(Error::RankDeficient);
            }
            let alpha = rr / psp;
            for i in 0..m {
                u[i] += alpha * p[i];
                r[i] -= alpha * sp[i];
            }
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..m {
                p[i] = r[i] + beta * p[i];
            }
            iterations += 1;
        }
        let bt_u = b.mul_transpose_vec(&u);
        let rhs1: Vec<f64> = f.iter().zip(&bt_u).map(|(p, q)| p - q).collect();
        Ok((factor.solve(&rhs1), u, iterations))
    };

    let (mut sigma, mut u, mut iterations) = schur_solve(f, g)?;
    let mut residual = saddle_residual(a, b, &sigma, &u, f, g);
    for _ in 0..5 {
        if residual <= options.tolerance {
            break;
        }
        let a_sigma = a.mul_vec(&sigma);
        let bt_u = b.mul_transpose_vec(&u);
        let b_sigma = b.mul_vec(&sigma);
        let r1: Vec<f64> = (0..n).map(|i| f[i] - a_sigma[i] - bt_u[i]).collect();
        let r2: Vec<f64> = (0..m).map(|i| g[i] - b_sigma[i]).collect();
        let (ds, du, it) = schur_solve(&r1, &r2)?;
        iterations += it;
        let s_next: Vec<f64> = sigma.iter().zip(&ds).map(|(x, d)| x + d).collect();
        let u_next: Vec<f64> = u.iter().zip(&du).map(|(x, d)| x + d).collect();
        let next = saddle_residual(a, b, &s_next, &u_next, f, g);
        if next >= residual {
            break;
        }
        sigma = s_next;
        u = u_next;
        residual = next;
    }
    let berr = saddle_backward_error(a, b, &sigma, &u, f, g);
    let rounding_limited = residual > options.tolerance && berr <= ROUNDING_LIMIT;
    if residual > options.tolerance && !rounding_limited {
        return Err(Error::NotConverged { iterations, residual, tolerance: options.tolerance });
    }
    let mut report = report(iterations, factor.entries(), residual);
    report.backward_error = berr;
    report.rounding_limited = rounding_limited;
    Ok(SaddleSolution { primal: sigma, multiplier: u, report })
}

/// Componentwise backward error of a saddle-point solution.
pub fn saddle_backward_error(
    a: &SymCsr,
    b: &CsrMatrix,
    sigma: &[f64],
    u: &[f64],
    f: &[f64],
    g: &[f64],
) -> f64 {
    let n = a.dim();
    let mut num = vec![0.0; n + b.rows()];
    let mut den = vec![0.0; n + b.rows()];
    for i in 0..n {
        for (j, v) in a.row(i) {
            num[i] += v * sigma[j];
            den[i] += (v * sigma[j]).abs();
        }
        num[i] -= f[i];
        den[i] += f[i].abs();
    }
    for i in 0..b.rows() {
        for (j, v) in b.row(i) {
            num[j] += v * u[i];
            den[j] += (v * u[i]).abs();
            num[n + i] += v * sigma[j];
            den[n + i] += (v * sigma[j]).abs();
        }
    }
    for i in 0..b.rows() {
        num[n + i] -= g[i];
        den[n + i] += g[i].abs();
    }
    num.iter()
        .zip(&den)
        .filter(|(r, _)| **r != 0.0)
        .map(|(r, d)| if *d > 0.0 { r.abs() / d } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Relative block residual of a saddle-point solution.
pub fn saddle_residual(
    a: &SymCsr,
    b: &CsrMatrix,
    sigma: &[f64],
    u: &[f64],
    f: &[f64],
    g: &[f64],
) -> f64 {
    let a_sigma = a.mul_vec(sigma);
    let bt_u = b.mul_transpose_vec(u);
    let b_sigma = b.mul_vec(sigma);
    let mut r2 = 0.0;
    for i in 0..f.len() {
        let r = a_sigma[i] + bt_u[i] - f[i];
        r2 += r * r;
    }
    for i in 0..g.len() {
        let r = b_sigma[i] - g[i];
        r2 += r * r;
    }
    let nb = (dot(f, f) + dot(g, g)).sqrt();
    if nb > 0.0 {
        r2.sqrt() / nb
    } else {
        r2.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_dense(d: &[Vec<f64>]) -> SymCsr {
        let mut b = SymMatrixBuilder::new(d.len());
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b.add(i, j, v);
            }
        }
        b.finalize()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let b = [3.0, -1.0, 2.5];
        for method in [SpdMethod::ConjugateGradient, SpdMethod::Cholesky] {
            let (x, report) = solve_spd(&a, &b, &SolverOptions::default().with_method(method)).unwrap();
            assert_eq!(x, b.to_vec());
            assert!(report.relative_residual <= 1e-12);
        }
    }

    #[test]
    fn two_by_two() {
        let a = from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        for method in [SpdMethod::ConjugateGradient, SpdMethod::Cholesky] {
            let (x, _) = solve_spd(&a, &[3.0, 3.0], &SolverOptions::default().with_method(method)).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn builder_sums_duplicates_and_drops_zeros() {
        let mut b = SymMatrixBuilder::new(2);
        b.add(0, 1, 1.0);
        b.add(0, 1, -1.0);
        b.add(1, 0, 5.0); // lower triangle is ignored
        b.add(0, 0, 2.0);
        b.add(1, 1, 3.0);
        let a = b.finalize();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let err = solve_spd(&a, &[1.0, 0.0], &SolverOptions::default().with_method(SpdMethod::Cholesky));
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let n = 50;
        let mut b = SymMatrixBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0 + i as f64);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        let a = b.finalize();
        let rhs = vec![1.0; n];
        let opts = SolverOptions { max_iterations: Some(2), ..SolverOptions::default() };
        assert!(matches!(solve_spd(&a, &rhs, &opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn small_saddle() {
        let a = from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0)]);
        let s = solve_saddle(&a, &b, &[0.0, 0.0], &[1.0], &SolverOptions::default()).unwrap();
        assert!((s.primal[0] - 1.0).abs() < 1e-14);
        assert!(s.primal[1].abs() < 1e-14);
        assert!((s.multiplier[0] + 1.0).abs() < 1e-14);
        assert!(s.report.relative_residual <= 1e-12);
    }

    #[test]
    fn saddle_zero_rhs() {
        let a = from_dense(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let b = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]);
        let s = solve_saddle(&a, &b, &[0.0, 0.0], &[0.0], &SolverOptions::default()).unwrap();
        assert!(s.primal.iter().chain(&s.multiplier).all(|&v| v == 0.0));
    }

    #[test]
    fn rank_deficient_constraints() {
        let a = from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // two identical constraint rows
        let b = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 1.0)]);
        let r = solve_saddle(&a, &b, &[1.0, 0.0], &[1.0, 0.0], &SolverOptions::default());
        assert!(r.is_err());
    }
}
