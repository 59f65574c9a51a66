//! Polynomials of degree at most two in several variables, and the vector
//! fields and Christoffel fields built from them. They carry exact
//! derivatives, which makes them the workhorse of the randomized property
//! suites and of the `custom-polynomial` config model.

use rand::Rng;

use crate::calculus::{BilinearTensor, Matrix, SmoothMap, Vector};
use crate::error::{check_dim, GeoError, Result};
use crate::structures::ChristoffelField;

/// `p(u) = c + l·u + uᵀ Q u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub constant: f64,
    pub linear: Vector,
    pub quadratic: Matrix,
}

impl Quadratic {
    pub fn zero(n: usize) -> Self {
        Self {
            constant: 0.0,
            linear: Vector::zeros(n),
            quadratic: Matrix::zeros(n, n),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            constant: c,
            ..Self::zero(n)
        }
    }

    /// Parses `[c, l_0..l_{n-1}, Q_00, Q_01, ..]`; a list of length 1 or
    /// `1 + n` leaves the higher-order part zero.
    pub fn from_coefficients(n: usize, coeffs: &[f64]) -> Result<Self> {
        let full = 1 + n + n * n;
        if coeffs.is_empty() || !(coeffs.len() == 1 || coeffs.len() == 1 + n || coeffs.len() == full) {
            return Err(GeoError::InvalidArgument(format!(
                "polynomial needs 1, {} or {} coefficients, got {}",
                1 + n,
                full,
                coeffs.len()
            )));
        }
        let mut p = Self::constant(n, coeffs[0]);
        if coeffs.len() > 1 {
            p.linear = Vector::from_row_slice(&coeffs[1..1 + n]);
        }
        if coeffs.len() == full {
            p.quadratic = Matrix::from_row_slice(n, n, &coeffs[1 + n..]);
        }
        Ok(p)
    }

    /// Coefficients uniform in `[-scale, scale]`; `degree` caps the order.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, degree: usize, scale: f64) -> Self {
        let mut draw = || rng.random_range(-scale..=scale);
        let mut p = Self::constant(n, draw());
        if degree >= 1 {
            p.linear = Vector::from_fn(n, |_, _| draw());
        }
        if degree >= 2 {
            p.quadratic = Matrix::from_fn(n, n, |_, _| draw());
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        self.constant + self.linear.dot(u) + u.dot(&(&self.quadratic * u))
    }

    pub fn gradient(&self, u: &Vector) -> Vector {
        &self.linear + (&self.quadratic + self.quadratic.transpose()) * u
    }

    pub fn hessian(&self) -> Matrix {
        &self.quadratic + self.quadratic.transpose()
    }

    /// Scalar [`SmoothMap`] with exact derivatives.
    pub fn to_scalar_map(&self) -> SmoothMap {
        PolyVectorField::new(vec![self.clone()]).to_smooth_map()
    }
}

/// A map `R^n → R^m` whose components are [`Quadratic`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    components: Vec<Quadratic>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Quadratic>) -> Self {
        assert!(!components.is_empty(), "polynomial field needs a component");
        Self { components }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, degree: usize, scale: f64) -> Self {
        Self::new((0..m).map(|_| Quadratic::random(rng, n, degree, scale)).collect())
    }

    pub fn domain_dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn eval(&self, u: &Vector) -> Vector {
        Vector::from_iterator(self.components.len(), self.components.iter().map(|p| p.eval(u)))
    }

    pub fn to_smooth_map(&self) -> SmoothMap {
        let n = self.domain_dim();
        let m = self.components.len();
        let (f0, f1, f2) = (self.clone(), self.clone(), self.clone());
        SmoothMap::new(n, m, move |u| f0.eval(u))
            .with_d1(move |u, v| {
                Vector::from_iterator(m, f1.components.iter().map(|p| p.gradient(u).dot(v)))
            })
            .with_d2(move |_, v, w| {
                Vector::from_iterator(m, f2.components.iter().map(|p| v.dot(&(p.hessian() * w))))
            })
    }
}

/// Christoffel field whose entries `Γ^k_ij(u)` are [`Quadratic`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyChristoffel {
    dim: usize,
    /// Indexed `(k * dim + i) * dim + j`.
    entries: Vec<Quadratic>,
}

impl PolyChristoffel {
    pub fn new(dim: usize, entries: Vec<Quadratic>) -> Result<Self> {
        check_dim("polynomial Christoffel entry count", dim * dim * dim, entries.len())?;
        for e in &entries {
            check_dim("polynomial Christoffel entry", dim, e.dim())?;
        }
        Ok(Self { dim, entries })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Quadratic::zero(dim); dim * dim * dim],
        }
    }

    /// Random entries of the given degree, symmetrized in `(i, j)` on
    /// request.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, degree: usize, symmetric: bool) -> Self {
        let mut g = Self::zero(dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    if symmetric && j < i {
                        let mirror = g.entry(k, j, i).clone();
                        g.set_entry(k, i, j, mirror);
                    } else {
                        g.set_entry(k, i, j, Quadratic::random(rng, dim, degree, 0.5));
                    }
                }
            }
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, k: usize, i: usize, j: usize) -> &Quadratic {
        &self.entries[(k * self.dim + i) * self.dim + j]
    }

    pub fn set_entry(&mut self, k: usize, i: usize, j: usize, q: Quadratic) {
        let n = self.dim;
        self.entries[(k * n + i) * n + j] = q;
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim;
        (0..n).all(|k| (0..n).all(|i| (0..i).all(|j| self.entry(k, i, j) == self.entry(k, j, i))))
    }

    pub fn tensor_at(&self, u: &Vector) -> BilinearTensor {
        BilinearTensor::from_fn(self.dim, self.dim, |k, i, j| self.entry(k, i, j).eval(u))
    }

    /// Wraps as a [`ChristoffelField`]; symmetric flag set iff the entries
    /// are symmetric.
    pub fn to_field(&self, chart_id: &str) -> ChristoffelField {
        let me = self.clone();
        ChristoffelField::from_tensor_fn(chart_id, self.dim, self.is_symmetric(), move |u| {
            me.tensor_at(u)
        })
    }
}
