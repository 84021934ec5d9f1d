//! Best Bregman approximation from the Kuhn–Tucker set of the composite
//! monotone inclusion `0 ∈ Ax + L*BLx`.
//!
//! Given maximally monotone operators `A` and `B` (exposed only through their
//! Bregman resolvents `(∇h + γA)⁻¹`), a linear map `L`, and Legendre kernels,
//! the solver produces the Bregman projection of a reference primal–dual pair
//! `(x0, y0*)` onto
//!
//! ```text
//! Z = { (x, y*) : −L*y* ∈ Ax  and  Lx ∈ B⁻¹y* }.
//! ```
//!
//! Each iteration draws one point from the graph of `A` and one from the graph
//! of `B`, builds a half-space containing `Z`, Bregman-projects the current
//! iterate onto it, and finally projects the reference point onto the
//! intersection of two half-spaces (a Haugazeau-type outer approximation).
//!
//! # Example
//!
//! ```
//! use bregkt_core::prelude::*;
//! use nalgebra::{dmatrix, dvector};
//!
//! // A: x ↦ x − 1, B: y ↦ y, L = 1, Euclidean kernels.
//! let energy = LegendreKernel::new(KernelKind::Energy, 1);
//! let problem = CompositeProblem::builder()
//!     .a(MonotoneOperator::affine(dmatrix![1.0], dvector![-1.0]).unwrap())
//!     .b(MonotoneOperator::affine(dmatrix![1.0], dvector![0.0]).unwrap())
//!     .l(LinearMap::new(dmatrix![1.0]))
//!     .kernels(energy.clone(), energy.clone(), energy.clone(), energy)
//!     .start(dvector![0.0], dvector![0.0])
//!     .build()
//!     .unwrap();
//! let report = solve(&problem, &StepSchedule::default(), &SolveOptions::default());
//! assert!(report.converged());
//! assert!((report.point.x[0] - 0.5).abs() < 1e-6);
//! assert!((report.point.y[0] - 0.5).abs() < 1e-6);
//! ```

// `!(a < b)` is used deliberately so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod instances;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod product;
pub mod solver;
pub mod special;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{
        haugazeau_halfspace, project_halfspace, q_projection, ActiveSet, HalfSpace, ProjectionResult,
    };
    pub use crate::kernels::{BregmanValue, ExtReal, KernelKind, LegendreKernel, ProductKernel};
    pub use crate::operators::{graph_point, GraphPoint, LinearMap, MonotoneOperator, ScalarPotential};
    pub use crate::product::{assemble, solve_blocks, BlockProblem, BlockReport, DualBlock, PrimalBlock};
    pub use crate::solver::{
        kt_residual, kuhn_tucker_halfspace, solve, step, CompositeProblem, IterationState, PrimalDualPoint,
        SolveOptions, SolveReport, StepSchedule, Termination, TraceRow,
    };

    pub use crate::special::lambert_w;
}
