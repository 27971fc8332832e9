//! Monte Carlo verification of stochastic calculus under signed measures.
//!
//! A signed measure `Q` is carried by a density martingale `D`; its zero set
//! `H` splits time into blocks on which the restart operator `rho` and the
//! `Q`-integrals act. The crate samples ensembles, builds the `Σ`-class
//! decompositions and evaluates the identities that connect them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balayage;
pub mod classes;
pub mod density;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod identities;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{make_grid, Path, TimeGrid};
