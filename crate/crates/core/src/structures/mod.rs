//! Second-order structures in a fixed chart.
//!
//! [`ChristoffelField`] is the single source of truth. Covariant derivatives,
//! Hessians, sprays and dissections are derived from it, and the chart-change
//! law relates its representatives in two overlapping charts.

mod connection;
mod jets;
mod transform;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{random_vector, BilinearMap, BilinearTensor, SmoothMap, Vector};
use crate::error::{check_dim, GeoError, Result};

pub use connection::{covariant_derivative, hessian_apply, hessian_via_connection};
pub use jets::{
    christoffel_from_dissection, christoffel_from_spray, dissection_eval, spray_eval, Dissection,
    Spray,
};
pub use transform::{
    check_transformation_law, transform_christoffel, transform_twojet, transformed_field,
    CONDITION_LIMIT,
};
pub(crate) use transform::checked_inverse;

type GammaFn = dyn Fn(&Vector) -> Result<BilinearMap> + Send + Sync;

/// Local Christoffel map `u ↦ Γ(u)` of one chart.
#[derive(Clone)]
pub struct ChristoffelField {
    chart_id: String,
    dim: usize,
    symmetric: bool,
    gamma: Arc<GammaFn>,
}

impl fmt::Debug for ChristoffelField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChristoffelField")
            .field("chart_id", &self.chart_id)
            .field("dim", &self.dim)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

impl ChristoffelField {
    pub fn new<F>(chart_id: impl Into<String>, dim: usize, symmetric: bool, gamma: F) -> Self
    where
        F: Fn(&Vector) -> Result<BilinearMap> + Send + Sync + 'static,
    {
        Self {
            chart_id: chart_id.into(),
            dim,
            symmetric,
            gamma: Arc::new(gamma),
        }
    }

    /// Field given by dense coefficients at each point.
    pub fn from_tensor_fn<F>(chart_id: impl Into<String>, dim: usize, symmetric: bool, f: F) -> Self
    where
        F: Fn(&Vector) -> BilinearTensor + Send + Sync + 'static,
    {
        Self::new(chart_id, dim, symmetric, move |u| {
            Ok(BilinearMap::from_tensor(f(u)))
        })
    }

    /// Point-independent field; flagged symmetric iff the tensor is.
    pub fn constant(chart_id: impl Into<String>, tensor: BilinearTensor) -> Self {
        let dim = tensor.dim_in();
        let symmetric = tensor.asymmetry() == 0.0;
        Self::from_tensor_fn(chart_id, dim, symmetric, move |_| tensor.clone())
    }

    pub fn zero(dim: usize) -> Self {
        Self::new("flat", dim, true, move |_| Ok(BilinearMap::zero(dim, dim)))
    }

    pub fn chart_id(&self) -> &str {
        &self.chart_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_chart_id(mut self, id: impl Into<String>) -> Self {
        self.chart_id = id.into();
        self
    }

    /// `Γ(u)` as a bilinear map.
    pub fn at(&self, u: &Vector) -> Result<BilinearMap> {
        check_dim("Christoffel field point", self.dim, u.len())?;
        let b = (self.gamma)(u)?;
        check_dim("Christoffel value", self.dim, b.dim_in())?;
        check_dim("Christoffel value", self.dim, b.dim_out())?;
        Ok(b)
    }

    /// `Γ(u)(a, b)`.
    pub fn apply(&self, u: &Vector, a: &Vector, b: &Vector) -> Result<Vector> {
        self.at(u)?.apply(a, b)
    }

    pub fn tensor_at(&self, u: &Vector) -> Result<BilinearTensor> {
        Ok(self.at(u)?.to_tensor())
    }

    /// Adds a constant bilinear map to every value.
    pub fn perturbed(&self, delta: BilinearTensor) -> Self {
        let base = self.clone();
        let delta = Arc::new(delta);
        let symmetric = self.symmetric && delta.asymmetry() == 0.0;
        Self::new(format!("{}+delta", self.chart_id), self.dim, symmetric, move |u| {
            let b = base.at(u)?;
            let d = Arc::clone(&delta);
            Ok(BilinearMap::new(b.dim_in(), b.dim_out(), move |x, y| {
                b.apply(x, y).expect("dimensions checked") + d.apply(x, y)
            }))
        })
    }

    /// Largest bilinearity and symmetry defects at random points of
    /// `[-1, 1]^dim`.
    pub fn probe_residuals(&self, probes: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut bil, mut sym): (f64, f64) = (0.0, 0.0);
        for _ in 0..probes {
            let u = random_vector(&mut rng, self.dim);
            let g = self.at(&u)?;
            bil = bil.max(g.bilinearity_residual(&mut rng, 4));
            sym = sym.max(g.symmetry_residual(&mut rng, 4));
        }
        Ok((bil, sym))
    }
}

/// Chart transition `F = ψ∘φ⁻¹` with optional inverse `G = φ∘ψ⁻¹`.
#[derive(Debug, Clone)]
pub struct ChartTransition {
    pub forward: SmoothMap,
    pub inverse: Option<SmoothMap>,
}

impl ChartTransition {
    pub fn new(forward: SmoothMap) -> Result<Self> {
        check_dim("chart transition", forward.domain_dim(), forward.codomain_dim())?;
        Ok(Self {
            forward,
            inverse: None,
        })
    }

    pub fn with_inverse(mut self, inverse: SmoothMap) -> Result<Self> {
        check_dim("inverse chart transition", self.forward.domain_dim(), inverse.domain_dim())?;
        check_dim("inverse chart transition", self.forward.domain_dim(), inverse.codomain_dim())?;
        self.inverse = Some(inverse);
        Ok(self)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            forward: SmoothMap::identity(dim),
            inverse: Some(SmoothMap::identity(dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.forward.domain_dim()
    }

    pub fn inverse(&self) -> Result<&SmoothMap> {
        self.inverse.as_ref().ok_or(GeoError::MissingInverse)
    }

    /// Largest `|G(F(u)) − u|` over the given points.
    pub fn inverse_residual(&self, points: &[Vector]) -> Result<f64> {
        let g = self.inverse()?;
        let mut worst: f64 = 0.0;
        for u in points {
            let back = g.eval(&self.forward.eval(u)?)?;
            worst = worst.max((back - u).amax());
        }
        Ok(worst)
    }
}

/// Principal part `X_φ` of a vector field in a chart.
#[derive(Debug, Clone)]
pub struct VectorField(SmoothMap);

impl VectorField {
    pub fn new(map: SmoothMap) -> Result<Self> {
        check_dim("vector field", map.domain_dim(), map.codomain_dim())?;
        Ok(Self(map))
    }

    /// Constant field `u ↦ v`.
    pub fn constant(v: Vector) -> Self {
        Self(SmoothMap::constant(v.len(), v))
    }

    pub fn map(&self) -> &SmoothMap {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.domain_dim()
    }

    pub fn at(&self, u: &Vector) -> Result<Vector> {
        self.0.eval(u)
    }

    /// The field `u ↦ f(u) X(u)`; exact derivatives when both factors have
    /// them.
    pub fn scaled_by(&self, f: &ScalarField) -> Result<Self> {
        check_dim("scaled vector field", self.dim(), f.dim())?;
        let n = self.dim();
        let (x, s) = (self.0.clone(), f.0.clone());
        let (x1, s1) = (x.clone(), s.clone());
        let mut map = SmoothMap::try_new(n, n, move |u| Ok(x.eval(u)? * s.eval_scalar(u)?))
            .with_fd_scale(self.0.fd_scale());
        if self.0.has_analytic_d1() && f.0.has_analytic_d1() {
            map = map.with_d1(move |u, v| {
                let fu = s1.eval_scalar(u).expect("scalar field evaluates");
                let dfv = crate::calculus::directional_derivative(&s1, u, v).expect("derivative")[0];
                let xu = x1.eval(u).expect("vector field evaluates");
                let dxv = crate::calculus::directional_derivative(&x1, u, v).expect("derivative");
                xu * dfv + dxv * fu
            });
        }
        Ok(Self(map))
    }
}

/// Local representative `f_φ` of a smooth function.
#[derive(Debug, Clone)]
pub struct ScalarField(SmoothMap);

impl ScalarField {
    pub fn new(map: SmoothMap) -> Result<Self> {
        check_dim("scalar field codomain", 1, map.codomain_dim())?;
        Ok(Self(map))
    }

    pub fn map(&self) -> &SmoothMap {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.domain_dim()
    }

    pub fn at(&self, u: &Vector) -> Result<f64> {
        self.0.eval_scalar(u)
    }

    /// `Df(u)·w`.
    pub fn differential(&self, u: &Vector, w: &Vector) -> Result<f64> {
        Ok(crate::calculus::directional_derivative(&self.0, u, w)?[0])
    }

    /// `(Xf)(u) = Df(u)·X(u)`.
    pub fn derivative_along(&self, x: &VectorField, u: &Vector) -> Result<f64> {
        self.differential(u, &x.at(u)?)
    }
}

/// Local 2-jet data `α ⊕ B` with `B` a symmetric bilinear form.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoJet {
    pub alpha: Vector,
    pub form: crate::calculus::Matrix,
}

impl TwoJet {
    pub fn new(alpha: Vector, form: crate::calculus::Matrix) -> Result<Self> {
        check_dim("two-jet form rows", alpha.len(), form.nrows())?;
        check_dim("two-jet form columns", alpha.len(), form.ncols())?;
        Ok(Self { alpha, form })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            alpha: Vector::zeros(dim),
            form: crate::calculus::Matrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `B(v, w)`.
    pub fn form_apply(&self, v: &Vector, w: &Vector) -> f64 {
        v.dot(&(&self.form * w))
    }

    pub fn max_abs_diff(&self, other: &TwoJet) -> f64 {
        (&self.alpha - &other.alpha)
            .amax()
            .max((&self.form - &other.form).amax())
    }
}
