//! Oriented Whitney coverings, Calderón–Zygmund transforms on Lipschitz
//! domains, and discrete Carleson condition checks.

pub mod carleson;
pub mod czop;
pub mod geometry;
pub mod keylemma;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod whitney;

pub use geometry::{Domain, Frame, GeometryError, GraphProfile, Point, Shape, Window, WindowParams};
pub use whitney::{build_covering, build_covering_in, long_distance, Covering, Cube, WhitneyError};
pub use carleson::{
    check_continuous_condition, check_embedding, check_growth, check_shadow_condition, check_shadow_condition_all,
    check_tree_condition, check_tree_condition_all, cube_measure, depth_verdict, CarlesonError, CubeMeasure, TreeProblem,
    Verdict,
};
pub use czop::{beurling_kernel, kernel_by_name, Beurling, CzError, Kernel, PvSchedule, ZeroKernel};
pub use keylemma::{averaging, boundedness_probe, keylemma_sum, sobolev_norm, KeyLemmaError, ProbeSuite};
pub use poly::{project, MultiIndex, Poly, PolyError, ScalarField, SeparableField};
pub use report::{Check, Measured, SCHEMA_VERSION};
