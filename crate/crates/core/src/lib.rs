//! Numerical toolkit for meromorphic quasiconformal maps of the unit disk with
//! a simple pole at `p ∈ [0,1)`.
//!
//! A map `f(z) = 1/(z−p) + Σ bₙzⁿ` with complex dilatation `μ` supported in
//! the disk is built from the Neumann series of the Beltrami equation on a
//! uniform grid. The crate then extracts the Laurent coefficients and checks
//! them, and the derivative `f′`, against sharp coefficient and distortion
//! bounds.
//!
//! ```
//! use num_complex::Complex64;
//! use qcx::{build_grid, solve_beltrami, DilatationField, PoleParam, ReconstructedMap, SolverOptions};
//!
//! let grid = build_grid(64)?;
//! let mu = DilatationField::constant(&grid, Complex64::new(0.2, 0.0))?;
//! let solution = solve_beltrami(&mu, PoleParam::zero(), &SolverOptions::default())?;
//! let f = ReconstructedMap::new(&solution);
//! // μ ≡ k gives f(z) = 1/z + k z̄.
//! assert!((f.f(Complex64::new(0.5, 0.0))? - 2.1).norm() < 0.05);
//! # Ok::<(), qcx::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod distortion;
pub mod error;
pub mod grid;
pub mod job;
pub mod neumann;
pub mod reconstruct;
pub mod transforms;
pub mod verify;

pub use coeffs::{coeff_bound, coeff_from_map, LaurentCoefficients, LaurentSource};
pub use distortion::{BoundReport, ClosedFormMap};
pub use error::{Error, Result};
pub use grid::{build_grid, DiskGrid, Exponent, GridFunction};
pub use job::{parse_config, run_job, JobConfig, JobResult};
pub use neumann::{solve_beltrami, DilatationField, NeumannSolution, PoleParam, SolverOptions};
pub use reconstruct::ReconstructedMap;
pub use transforms::{Method, TransformConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/neumann.md")]
    mod neumann {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/coefficients.md")]
    mod coefficients {}
    #[doc = include_str!("../../../book/src/distortion.md")]
    mod distortion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
