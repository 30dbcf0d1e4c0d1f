//! Discrete laboratory for weighted weak-type estimates of multilinear
//! Calderón–Zygmund operators.
//!
//! Everything lives on a uniform grid over the box `[-L, L)^n` (`n = 1, 2`):
//!
//! * [`grid`]: grids, cell-averaged functions, weighted measures and level sets;
//! * [`cubes`]: cube geometry, fractional cube measures, Whitney decompositions;
//! * [`family`]: cube families and the sup/cover scans built on them;
//! * [`weights`]: `A_p` and multilinear `A_P` characteristics;
//! * [`maximal`]: Hardy–Littlewood and weighted maximal operators;
//! * [`operator`]: multilinear kernels, condition checks, direct summation;
//! * [`decomp`]: Calderón–Zygmund and Nazarov–Treil–Volberg decompositions;
//! * [`harness`]: weak quasinorms, end-to-end experiments and check batteries.

pub mod cubes;
pub mod decomp;
mod error;
pub mod family;
pub mod grid;
pub mod harness;
pub mod maximal;
pub mod operator;
mod par;
pub mod weights;

pub use cubes::{CellSet, Cube};
pub use error::{Error, Result};
pub use family::CubeFamily;
pub use grid::{Grid, GridFunction, WeightedMeasure};
pub use weights::{Weight, WeightVector};

/// Upper bound on the dimension handled by the grid machinery.
pub const MAX_DIM: usize = 2;

/// A point of `R^n`, padded with zeros past the grid dimension.
pub type Point = [f64; MAX_DIM];
