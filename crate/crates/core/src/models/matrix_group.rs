//! Direct connection on invertible `n × n` matrices in entry coordinates.

use crate::calculus::{BilinearMap, Matrix, Vector};
use crate::error::{check_dim, GeoError, Result};
use crate::structures::{checked_inverse, ChristoffelField};

/// `GL(n)` near its invertible points, charted by row-major entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixGroupModel {
    n: usize,
}

impl MatrixGroupModel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(GeoError::InvalidArgument("matrix size must be at least 1".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn to_matrix(&self, v: &Vector) -> Result<Matrix> {
        check_dim("matrix coordinates", self.dim(), v.len())?;
        Ok(Matrix::from_row_slice(self.n, self.n, v.as_slice()))
    }

    pub fn to_coords(&self, m: &Matrix) -> Result<Vector> {
        check_dim("matrix rows", self.n, m.nrows())?;
        check_dim("matrix columns", self.n, m.ncols())?;
        Ok(Vector::from_iterator(self.dim(), m.transpose().iter().copied()))
    }
}

/// `Γ(x)(a, b) = a·x⁻¹·b`. Singular or ill-conditioned `x` is rejected.
pub fn direct_christoffel(model: &MatrixGroupModel) -> ChristoffelField {
    let model = *model;
    ChristoffelField::new("matrix-entries", model.dim(), false, move |x| {
        let x_inv = checked_inverse(&model.to_matrix(x)?)?;
        Ok(BilinearMap::new(model.dim(), model.dim(), move |a, b| {
            let a = model.to_matrix(a).expect("checked by BilinearMap");
            let b = model.to_matrix(b).expect("checked by BilinearMap");
            model.to_coords(&(a * &x_inv * b)).expect("square product")
        }))
    })
}
