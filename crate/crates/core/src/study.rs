//! Convergence studies on the built-in problems and the batch of exact
//! identities between the nonconforming and mixed methods.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{FieldValue, Sym2};
use crate::mesh::{build_mesh, Domain, Mesh, Point2};
use crate::norms::l2_error;
use crate::plate::{
    hhj_conformity_defect, hhj_from_morley, hhj_orthogonality, morley_hessian_difference, solve_hhj_direct, solve_morley, PlateRhsMode,
};
use crate::poisson::{
    cr_perturbation_check, marini_reconstruction, project_p0, rt_conformity_defect, solve_cr, solve_rt_mixed,
    RhsMode,
};
use crate::problems::{parallelogram_plate_problem, square_sine_problem, ProblemSpec};
use crate::recovery::{k_h, parallelogram_mean_defect, recovery_error, recovery_order_probe, ProbeField, RateReport};
use crate::sparse::{SolveReport, SolverOptions, SpdMethod};
use crate::table::ConvergenceTable;

/// Default levels of the convergence studies.
pub const STANDARD_LEVELS: [usize; 6] = [4, 8, 16, 32, 64, 128];

/// A convergence table together with the solver statistics of each level.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRun {
    pub problem: &'static str,
    pub table: ConvergenceTable,
    pub solves: Vec<SolveReport>,
    pub wall_time_seconds: f64,
}

/// JSON-friendly summary of a [`StudyRun`].
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub problem: &'static str,
    pub levels: Vec<usize>,
    pub errors_plain: Vec<f64>,
    pub errors_post: Vec<f64>,
    pub rates_plain: Vec<f64>,
    pub rates_post: Vec<f64>,
    pub solves: Vec<SolveReport>,
    pub wall_time_seconds: f64,
}

impl StudyRun {
    pub fn record(&self) -> RunRecord {
        RunRecord {
            problem: self.problem,
            levels: self.table.levels(),
            errors_plain: self.table.plain_errors(),
            errors_post: self.table.post_errors(),
            rates_plain: self.table.plain_rates(),
            rates_post: self.table.post_rates(),
            solves: self.solves.clone(),
            wall_time_seconds: self.wall_time_seconds,
        }
    }
}

fn check_levels(levels: &[usize]) -> Result<()> {
    match levels.iter().find(|&&n| n < 2) {
        Some(&n) => Err(Error::InvalidSubdivision(n)),
        None => Ok(()),
    }
}

/// Crouzeix-Raviart errors `|grad u - grad_h u_CR|` and
/// `|grad u - K_h grad_h u_CR|` on the square sine problem.
pub fn run_poisson_study(levels: &[usize], options: &SolverOptions) -> Result<StudyRun> {
    check_levels(levels)?;
    let start = Instant::now();
    let problem = square_sine_problem();
    let mut plain = Vec::new();
    let mut post = Vec::new();
    let mut solves = Vec::new();
    for &n in levels {
        let mesh = build_mesh(problem.domain, n)?;
        let (u, report) = solve_cr(&mesh, &*problem.load, RhsMode::Exact, options)?;
        let grads = u.gradients();
        plain.push(l2_error(&mesh, &*problem.gradient, |t, _| grads[t])?);
        let rec = k_h(&mesh, |t, _| grads[t])?;
        post.push(l2_error(&mesh, &*problem.gradient, |t, x| rec.value(t, x))?);
        solves.push(report);
    }
    let table = ConvergenceTable::from_errors(
        "Convergence of the Crouzeix-Raviart element",
        "‖∇u−∇ₕu_CR‖",
        "‖∇u−Kₕ∇ₕu_CR‖",
        levels,
        &plain,
        &post,
    );
    Ok(StudyRun { problem: problem.name, table, solves, wall_time_seconds: start.elapsed().as_secs_f64() })
}

/// Morley errors `|hess u - hess_h u_M|` and `|hess u - K_h hess_h u_M|` on
/// the parallelogram plate problem.
pub fn run_plate_study(levels: &[usize], options: &SolverOptions) -> Result<StudyRun> {
    check_levels(levels)?;
    let start = Instant::now();
    let problem = parallelogram_plate_problem();
    let mut plain = Vec::new();
    let mut post = Vec::new();
    let mut solves = Vec::new();
    for &n in levels {
        let mesh = build_mesh(problem.domain, n)?;
        let (u, report) = solve_morley(&mesh, &*problem.load, PlateRhsMode::Exact, options)?;
        let hess = u.hessians();
        plain.push(l2_error(&mesh, &*problem.hessian, |t, _| hess[t])?);
        let rec = k_h(&mesh, |t, _| hess[t])?;
        post.push(l2_error(&mesh, &*problem.hessian, |t, x| rec.value(t, x))?);
        solves.push(report);
    }
    let table = ConvergenceTable::from_errors(
        "Convergence of the Morley element",
        "‖∇²u−∇²ₕu_M‖",
        "‖∇²u−Kₕ∇²ₕu_M‖",
        levels,
        &plain,
        &post,
    );
    Ok(StudyRun { problem: problem.name, table, solves, wall_time_seconds: start.elapsed().as_secs_f64() })
}

/// Solver settings used by the studies: CG for the Poisson problem and the
/// factorization for the ill-conditioned plate problem.
pub fn default_options(problem: &ProblemSpec, tolerance: f64) -> SolverOptions {
    let method = match problem.equation {
        crate::problems::Equation::Poisson => SpdMethod::ConjugateGradient,
        crate::problems::Equation::Biharmonic => SpdMethod::Cholesky,
    };
    SolverOptions::default().with_method(method).with_tolerance(tolerance)
}

/// Solver settings for the identity checks: the identities hold only up to
/// the algebraic residual, so the systems are solved to rounding level.
pub fn identity_options() -> SolverOptions {
    SolverOptions::default().with_method(SpdMethod::Cholesky).with_tolerance(1e-14)
}

/// One identity evaluated on one mesh level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub level: Option<usize>,
    pub value: f64,
    pub threshold: f64,
    /// `true` when the check demands `value >= threshold` rather than
    /// `value <= threshold`.
    pub lower_bound: bool,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(name: &str, level: Option<usize>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), level, value, threshold, lower_bound: false, passed: value <= threshold }
    }

    fn at_least(name: &str, level: Option<usize>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), level, value, threshold, lower_bound: true, passed: value >= threshold }
    }

    fn within(name: &str, level: Option<usize>, value: f64, target: f64, tol: f64) -> Self {
        let mut c = Self::at_most(name, level, (value - target).abs(), tol);
        c.value = value;
        c.threshold = target;
        c
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "ok" } else { "FAILED" };
        let level = self.level.map(|n| format!(" n={n}")).unwrap_or_default();
        let op = if self.lower_bound { ">=" } else { "vs" };
        write!(f, "{status:6} {}{level}: {:.3e} {op} {:.3e}", self.name, self.value, self.threshold)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<CheckOutcome>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Tolerances of the identity suite.
pub mod thresholds {
    pub const MARINI: f64 = 1e-8;
    pub const ARNOLD: f64 = 1e-8;
    pub const DIVERGENCE: f64 = 1e-11;
    pub const CONFORMITY: f64 = 1e-10;
    pub const PARALLELOGRAM: f64 = 1e-13;
    pub const AFFINE: f64 = 1e-12;
    pub const RECOVERY_RATE: f64 = 2.0;
    pub const RECOVERY_RATE_TOL: f64 = 0.1;
    pub const GAP_RATE: f64 = 1.9;
    pub const ORTHOGONALITY: f64 = 1e-3;
}

/// Largest `|div sigma + f_K|` over the triangles.
pub fn divergence_defect(sigma: &crate::poisson::RtField<'_>, f0: &crate::poisson::P0Field) -> f64 {
    (0..sigma.mesh.num_triangles()).map(|t| (sigma.divergence(t) + f0.values[t]).abs()).fold(0.0, f64::max)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Poisson identities on one mesh: Marini cross-path, divergence, flux
/// conformity and the Bessel-constant bound.
pub fn poisson_identities(mesh: &Mesh, problem: &ProblemSpec, options: &SolverOptions) -> Result<Vec<CheckOutcome>> {
    use thresholds::*;
    let n = Some(mesh.n);
    let f = &*problem.load;
    let f0 = project_p0(mesh, f);
    let (ubar, _) = solve_cr(mesh, f, RhsMode::Projected, options)?;
    let marini = marini_reconstruction(&ubar, f);
    let (direct, _, _) = solve_rt_mixed(mesh, f, options)?;
    let scale = direct.fluxes.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut out = vec![
        CheckOutcome::at_most("marini equivalence", n, max_abs_diff(&marini.fluxes, &direct.fluxes) / scale, MARINI),
        CheckOutcome::at_most("divergence (marini)", n, divergence_defect(&marini, &f0), DIVERGENCE),
        CheckOutcome::at_most("divergence (mixed)", n, divergence_defect(&direct, &f0), DIVERGENCE),
        CheckOutcome::at_most(
            "marini flux conformity",
            n,
            rt_conformity_defect(mesh, |t, x| crate::poisson::marini_field(&ubar, &f0, t, x)),
            CONFORMITY,
        ),
    ];
    if let Some(f1) = problem.load_h1_seminorm {
        let r = cr_perturbation_check(mesh, f, f1, options)?;
        out.push(CheckOutcome::at_most("bessel bound", n, r.difference, r.bound));
    }
    Ok(out)
}

/// Plate identities on one mesh: Arnold cross-path, trace conformity of the
/// modified Morley Hessian and the orthogonality of the HHJ error.
pub fn plate_identities(mesh: &Mesh, problem: &ProblemSpec) -> Result<Vec<CheckOutcome>> {
    use thresholds::*;
    let n = Some(mesh.n);
    let f = &*problem.load;
    let opts = identity_options();
    let (ubar, _) = solve_morley(mesh, f, PlateRhsMode::VertexInterpolated, &opts)?;
    let hessians = ubar.hessians();
    let scale = hessians.iter().fold(1.0f64, |m, h| m.max(h.norm_sq().sqrt()));
    let (defect, _) = hhj_conformity_defect(mesh, &hessians);
    let conformity = CheckOutcome::at_most("hhj trace conformity", n, defect / scale, CONFORMITY);
    if !conformity.passed {
        return Ok(vec![conformity]);
    }
    let (sigma_m, u_m) = hhj_from_morley(&ubar)?;
    let (sigma_d, u_d, _) = solve_hhj_direct(mesh, f, &opts)?;
    let s_scale = sigma_d.traces.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let u_scale = u_d.values.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    let mut out = vec![
        conformity,
        CheckOutcome::at_most(
            "arnold equivalence (stress)",
            n,
            max_abs_diff(&sigma_m.traces, &sigma_d.traces) / s_scale,
            ARNOLD,
        ),
        CheckOutcome::at_most(
            "arnold equivalence (displacement)",
            n,
            max_abs_diff(&u_m.values, &u_d.values) / u_scale,
            ARNOLD,
        ),
    ];
    if mesh.n >= 8 {
        let (inner, norm_sq) = hhj_orthogonality(&sigma_d, &*problem.hessian)?;
        out.push(CheckOutcome::at_most("hhj orthogonality", n, inner.abs() / norm_sq, ORTHOGONALITY));
    }
    Ok(out)
}

/// Largest scaled `|int_N (r - Pi_HHJ r)|` over interior edges for `count`
/// random piecewise-affine symmetric fields. The scale is `|N| max|r|`.
pub fn parallelogram_lemma_defect<R: Rng>(mesh: &Mesh, count: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut c = [[0.0; 3]; 3];
        for row in &mut c {
            for v in row.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let r = |x: Point2| {
            let comp = |k: usize| c[k][0] + c[k][1] * x.x + c[k][2] * x.y;
            Sym2::new(comp(0), comp(1), comp(2))
        };
        let size = mesh.vertices.iter().fold(0.0f64, |m, p| m.max(p.norm())) + 1.0;
        for (e, edge) in mesh.edges.iter().enumerate() {
            let Some(s) = edge.second else { continue };
            let d = parallelogram_mean_defect(mesh, e, r)?;
            let area = mesh.area(edge.first) + mesh.area(s);
            worst = worst.max(d.norm_sq().sqrt() / (area * 3.0 * size));
        }
    }
    Ok(worst)
}

/// `|q - K_h Pi q|` for affine `q` (vector and matrix) on one mesh.
pub fn affine_recovery_defect(mesh: &Mesh) -> Result<f64> {
    let q = |x: Point2| Point2::new(1.0 + 2.0 * x.x - 0.5 * x.y, -0.3 + 0.7 * x.x + 1.1 * x.y);
    let tau = |x: Point2| Sym2::new(0.4 - x.x, 2.0 + 0.5 * x.y, x.x + x.y);
    let a = recovery_error(mesh, &ProbeField::Vector(&q))?;
    let b = recovery_error(mesh, &ProbeField::Matrix(&tau))?;
    Ok(a.max(b))
}

/// Recovery rates for `grad` of the square problem on the square and
/// `hess u` of the plate problem on the parallelogram.
pub fn recovery_rates(levels: &[usize]) -> Result<(RateReport, RateReport)> {
    let square = square_sine_problem();
    let plate = parallelogram_plate_problem();
    let g = &*square.gradient;
    let h = &*plate.hessian;
    let v = recovery_order_probe(Domain::UnitSquare, levels, &ProbeField::Vector(&g))?;
    let m = recovery_order_probe(Domain::Parallelogram, levels, &ProbeField::Matrix(&h))?;
    Ok((v, m))
}

/// Rate of `|hess_h (u_M - ubar_M)|` on the plate problem.
pub fn morley_gap_rates(levels: &[usize]) -> Result<RateReport> {
    let plate = parallelogram_plate_problem();
    let opts = default_options(&plate, 1e-12);
    let gaps = levels
        .iter()
        .map(|&n| {
            let mesh = build_mesh(Domain::Parallelogram, n)?;
            let (a, _) = solve_morley(&mesh, &*plate.load, PlateRhsMode::Exact, &opts)?;
            let (b, _) = solve_morley(&mesh, &*plate.load, PlateRhsMode::VertexInterpolated, &opts)?;
            Ok(morley_hessian_difference(&a, &b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport::new(levels.to_vec(), gaps))
}

/// Runs every identity between the nonconforming and the mixed methods on
/// each level, plus the rate checks (on the given levels, or on `n, 2n, 4n`
/// when fewer than two levels are given, refined by doubling until the finest
/// level is at least 16).
pub fn run_identity_suite(levels: &[usize], seed: u64) -> Result<IdentityReport> {
    use thresholds::*;
    check_levels(levels)?;
    let square = square_sine_problem();
    let plate = parallelogram_plate_problem();
    let poisson_opts = identity_options();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = IdentityReport::default();
    for &n in levels {
        let sq = build_mesh(Domain::UnitSquare, n)?;
        let pg = build_mesh(Domain::Parallelogram, n)?;
        for m in [&sq, &pg] {
            let u = m.verify_uniformity();
            report.checks.push(CheckOutcome::at_most("uniform mesh", Some(n), u.worst_defect, crate::mesh::GEOMETRY_TOL));
        }
        report.checks.extend(poisson_identities(&sq, &square, &poisson_opts)?);
        report.checks.extend(plate_identities(&pg, &plate)?);
        let lemma = parallelogram_lemma_defect(&pg, 20, &mut rng)?;
        report.checks.push(CheckOutcome::at_most("parallelogram lemma", Some(n), lemma, PARALLELOGRAM));
        for m in [&sq, &pg] {
            report.checks.push(CheckOutcome::at_most("affine recovery", Some(n), affine_recovery_defect(m)?, AFFINE));
        }
    }
    let rate_levels = rate_levels(levels);
    let (v, m) = recovery_rates(&rate_levels)?;
    for (name, r) in [("vector recovery rate", &v), ("matrix recovery rate", &m)] {
        let last = *r.rates.last().expect("two levels");
        report.checks.push(CheckOutcome::within(name, r.levels.last().copied(), last, RECOVERY_RATE, RECOVERY_RATE_TOL));
    }
    let gap = morley_gap_rates(&rate_levels)?;
    let worst = gap.rates.iter().copied().fold(f64::INFINITY, f64::min);
    report.checks.push(CheckOutcome::at_least("morley gap rate", None, worst, GAP_RATE));
    Ok(report)
}

/// Rates below this level are still pre-asymptotic.
const MIN_RATE_LEVEL: usize = 16;

fn rate_levels(levels: &[usize]) -> Vec<usize> {
    let mut l: Vec<usize> = levels.to_vec();
    l.sort_unstable();
    l.dedup();
    if l.len() < 2 {
        let n = l.first().copied().unwrap_or(4);
        l = vec![n, 2 * n, 4 * n];
    }
    while l[l.len() - 1] < MIN_RATE_LEVEL {
        let finest = l[l.len() - 1];
        l.push(2 * finest);
    }
    l
}
