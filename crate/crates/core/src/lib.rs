//! Second-order geometric structures on towers of finite-dimensional
//! levels: Christoffel fields, Koszul connections, Hessians, sprays and
//! dissections, with geodesic and parallel-transport solvers, the
//! level-independent existence interval for second-order equations, and a
//! spectral model of geodesics on the circle diffeomorphism group.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod error;
pub mod instances;
pub mod kv;
pub mod models;
pub mod ode;
pub mod output;
pub mod par;
pub mod poly;
pub mod structures;
pub mod tower;

pub use error::{GeoError, Result};
