//! Concrete instances: the flat connection, the direct connection on matrix
//! groups and the spectral model on the circle.

mod ch;
mod matrix_group;
mod spectral;

pub use ch::{bk_apply, ch_rhs, ch_tower, ChModel, ChRun, ChTower};
pub use matrix_group::{direct_christoffel, MatrixGroupModel};
pub use spectral::{ak_apply, ak_inverse, ak_multiplier, sobolev_seminorm, sobolev_weights, SpectralState};

use crate::structures::ChristoffelField;

/// `Γ ≡ 0` in dimension `dim`.
pub fn flat_christoffel(dim: usize) -> ChristoffelField {
    ChristoffelField::zero(dim)
}
