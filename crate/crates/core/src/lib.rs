//! Nonconforming finite elements on uniform triangulations.
//!
//! The crate solves the Poisson problem with the Crouzeix-Raviart element and
//! the clamped plate problem with the Morley element, builds the equivalent
//! Raviart-Thomas and Hellan-Herrmann-Johnson mixed solutions from them, and
//! post-processes piecewise-constant gradients and Hessians into
//! edge-midpoint-continuous piecewise-linear fields that converge at second
//! order.
//!
//! ```
//! use ncfem::{build_uniform_square_mesh, k_h, solve_cr, RhsMode, SolverOptions};
//!
//! let mesh = build_uniform_square_mesh(8)?;
//! let f = |p: ncfem::Point2| 2.0 * std::f64::consts::PI.powi(2)
//!     * (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin();
//! let (u, _) = solve_cr(&mesh, f, RhsMode::Exact, &SolverOptions::default())?;
//! let grads = u.gradients();
//! let recovered = k_h(&mesh, |t, _| grads[t])?;
//! assert_eq!(recovered.values.len(), mesh.num_edges());
//! # Ok::<(), ncfem::Error>(())
//! ```

#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

pub mod elements;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod norms;
pub mod plate;
pub mod poisson;
pub mod problems;
pub mod quadrature;
pub mod recovery;
pub mod sparse;
pub mod study;
pub mod table;

pub use error::{Error, Result};
pub use geometry::{FieldValue, Point2, Sym2};
pub use mesh::{build_mesh, build_uniform_parallelogram_mesh, build_uniform_square_mesh, Domain, Mesh};
pub use norms::l2_error;
pub use plate::{hhj_from_morley, pi_d, solve_hhj_direct, solve_morley, PlateRhsMode};
pub use poisson::{marini_reconstruction, solve_cr, solve_rt_mixed, RhsMode};
pub use problems::{parallelogram_plate_problem, square_sine_problem, ProblemSpec};
pub use recovery::{k_h, pi_hhj, pi_rt, recovery_order_probe, MidpointField};
pub use sparse::{SolverOptions, SpdMethod};
pub use study::{run_identity_suite, run_plate_study, run_poisson_study};
pub use table::{ConvergenceTable, TableFormat};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/poisson.md")]
    mod poisson {}
    #[doc = include_str!("../../../book/src/plate.md")]
    mod plate {}
    #[doc = include_str!("../../../book/src/post-processing.md")]
    mod post_processing {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
}
