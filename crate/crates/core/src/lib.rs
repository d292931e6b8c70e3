//! Two-species polyatomic ES-BGK relaxation model: closure algebra,
//! attractors, discrete phase grids, space-homogeneous dynamics and the
//! reduced `(g, h)` transport solver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attractors;
pub mod chu;
pub mod closure;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod rng;

pub use error::{KineticError, Result};
