//! Differentiation substrate: smooth maps with first and second directional
//! derivatives, bilinear maps and the polarization identity.
//!
//! A [`SmoothMap`] may carry analytic derivative closures. When it does not,
//! derivatives fall back to central differences with steps
//! `h = fd_scale * max(1, |x|) * eps^(1/3)` (first order) and
//! `h = fd_scale * max(1, |x|) * eps^(1/4)` (second order).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, GeoError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

type EvalFn = dyn Fn(&Vector) -> Result<Vector> + Send + Sync;
type FirstFn = dyn Fn(&Vector, &Vector) -> Result<Vector> + Send + Sync;
type SecondFn = dyn Fn(&Vector, &Vector, &Vector) -> Result<Vector> + Send + Sync;
type ApplyFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// Step for first-order central differences, before scaling.
pub fn first_order_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Step for second-order central differences, before scaling.
pub fn second_order_step() -> f64 {
    f64::EPSILON.powf(0.25)
}

/// A map between coordinate spaces bundled with optional analytic
/// derivatives.
///
/// Closures must be pure; under that contract a `SmoothMap` can be shared
/// freely across threads.
#[derive(Clone)]
pub struct SmoothMap {
    domain_dim: usize,
    codomain_dim: usize,
    fd_scale: f64,
    eval: Arc<EvalFn>,
    d1: Option<Arc<FirstFn>>,
    d2: Option<Arc<SecondFn>>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .field("fd_scale", &self.fd_scale)
            .field("analytic_d1", &self.d1.is_some())
            .field("analytic_d2", &self.d2.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(domain_dim: usize, codomain_dim: usize, f: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self::try_new(domain_dim, codomain_dim, move |x| Ok(f(x)))
    }

    /// Like [`SmoothMap::new`] for closures that can fail, e.g. maps only
    /// defined on an open subset.
    pub fn try_new<F>(domain_dim: usize, codomain_dim: usize, f: F) -> Self
    where
        F: Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Self {
            domain_dim,
            codomain_dim,
            fd_scale: 1.0,
            eval: Arc::new(f),
            d1: None,
            d2: None,
        }
    }

    /// Scalar-valued map.
    pub fn scalar<F>(domain_dim: usize, f: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self::new(domain_dim, 1, move |x| Vector::from_element(1, f(x)))
    }

    /// Attaches an analytic first derivative `(x, v) -> Df(x)·v`.
    pub fn with_d1<F>(mut self, d1: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.d1 = Some(Arc::new(move |x, v| Ok(d1(x, v))));
        self
    }

    /// Attaches an analytic second derivative `(x, v, w) -> D²f(x)(v, w)`.
    pub fn with_d2<F>(mut self, d2: F) -> Self
    where
        F: Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        self.d2 = Some(Arc::new(move |x, v, w| Ok(d2(x, v, w))));
        self
    }

    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        assert!(scale > 0.0 && scale.is_finite(), "fd_scale must be positive");
        self.fd_scale = scale;
        self
    }

    /// Drops analytic derivatives so every derivative is finite-differenced.
    pub fn without_derivatives(mut self) -> Self {
        self.d1 = None;
        self.d2 = None;
        self
    }

    /// The linear map `x -> a·x`, with exact derivatives.
    pub fn linear(a: Matrix) -> Self {
        let (rows, cols) = a.shape();
        let a1 = a.clone();
        let a2 = a.clone();
        Self::new(cols, rows, move |x| &a1 * x)
            .with_d1(move |_, v| &a2 * v)
            .with_d2(move |_, _, _| Vector::zeros(rows))
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(Matrix::identity(dim, dim))
    }

    pub fn constant(domain_dim: usize, value: Vector) -> Self {
        let n = value.len();
        Self::new(domain_dim, n, move |_| value.clone())
            .with_d1(move |_, _| Vector::zeros(n))
            .with_d2(move |_, _, _| Vector::zeros(n))
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn fd_scale(&self) -> f64 {
        self.fd_scale
    }

    pub fn has_analytic_d1(&self) -> bool {
        self.d1.is_some()
    }

    pub fn has_analytic_d2(&self) -> bool {
        self.d2.is_some()
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim("smooth map argument", self.domain_dim, x.len())?;
        let y = (self.eval)(x)?;
        check_dim("smooth map value", self.codomain_dim, y.len())?;
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(GeoError::NonFinite("smooth map evaluation"))
        }
    }

    /// Evaluates a scalar-valued map.
    pub fn eval_scalar(&self, x: &Vector) -> Result<f64> {
        check_dim("scalar field codomain", 1, self.codomain_dim)?;
        Ok(self.eval(x)?[0])
    }

    fn analytic_d1(&self, x: &Vector, v: &Vector) -> Option<Result<Vector>> {
        self.d1.as_ref().map(|d1| d1(x, v))
    }

    fn analytic_d2(&self, x: &Vector, v: &Vector, w: &Vector) -> Option<Result<Vector>> {
        self.d2.as_ref().map(|d2| d2(x, v, w))
    }
}

fn step_base(f: &SmoothMap, x: &Vector) -> f64 {
    f.fd_scale * x.norm().max(1.0)
}

/// `Df(x)·v`: analytic when available, else a central difference.
pub fn directional_derivative(f: &SmoothMap, x: &Vector, v: &Vector) -> Result<Vector> {
    check_dim("directional derivative point", f.domain_dim, x.len())?;
    check_dim("directional derivative direction", f.domain_dim, v.len())?;
    match f.analytic_d1(x, v) {
        Some(r) => finite(r?, "analytic first derivative"),
        None => fd_directional_derivative(f, x, v),
    }
}

/// Central difference `(f(x+hv) - f(x-hv)) / 2h`, ignoring analytic
/// derivatives. The direction is normalized before stepping.
pub fn fd_directional_derivative(f: &SmoothMap, x: &Vector, v: &Vector) -> Result<Vector> {
    fd_directional_with_step(f, x, v, step_base(f, x) * first_order_step())
}

pub(crate) fn fd_directional_with_step(
    f: &SmoothMap,
    x: &Vector,
    v: &Vector,
    h: f64,
) -> Result<Vector> {
    check_dim("directional derivative point", f.domain_dim, x.len())?;
    check_dim("directional derivative direction", f.domain_dim, v.len())?;
    let scale = v.norm();
    if scale == 0.0 {
        return Ok(Vector::zeros(f.codomain_dim));
    }
    let dir = v / scale;
    let fp = f.eval(&(x + &dir * h))?;
    let fm = f.eval(&(x - &dir * h))?;
    Ok((fp - fm) * (scale / (2.0 * h)))
}

/// `D²f(x)(v, w)`, always symmetrized as `(raw(v,w) + raw(w,v)) / 2`.
pub fn second_derivative(f: &SmoothMap, x: &Vector, v: &Vector, w: &Vector) -> Result<Vector> {
    check_dim("second derivative point", f.domain_dim, x.len())?;
    check_dim("second derivative direction", f.domain_dim, v.len())?;
    check_dim("second derivative direction", f.domain_dim, w.len())?;
    if f.d2.is_some() {
        let a = f.analytic_d2(x, v, w).unwrap()?;
        let b = f.analytic_d2(x, w, v).unwrap()?;
        return finite((a + b) * 0.5, "analytic second derivative");
    }
    fd_second_derivative(f, x, v, w)
}

/// Four-point stencil for the mixed second derivative, ignoring analytic
/// derivatives.
pub fn fd_second_derivative(
    f: &SmoothMap,
    x: &Vector,
    v: &Vector,
    w: &Vector,
) -> Result<Vector> {
    check_dim("second derivative point", f.domain_dim, x.len())?;
    check_dim("second derivative direction", f.domain_dim, v.len())?;
    check_dim("second derivative direction", f.domain_dim, w.len())?;
    let h = step_base(f, x) * second_order_step();
    let a = raw_second(f, x, v, w, h)?;
    let b = raw_second(f, x, w, v, h)?;
    Ok((a + b) * 0.5)
}

fn raw_second(f: &SmoothMap, x: &Vector, v: &Vector, w: &Vector, h: f64) -> Result<Vector> {
    let (nv, nw) = (v.norm(), w.norm());
    if nv == 0.0 || nw == 0.0 {
        return Ok(Vector::zeros(f.codomain_dim));
    }
    let dv = v * (h / nv);
    let dw = w * (h / nw);
    let pp = f.eval(&(x + &dv + &dw))?;
    let pm = f.eval(&(x + &dv - &dw))?;
    let mp = f.eval(&(x - &dv + &dw))?;
    let mm = f.eval(&(x - &dv - &dw))?;
    Ok((pp - pm - mp + mm) * (nv * nw / (4.0 * h * h)))
}

/// Jacobian matrix of `f` at `x`, assembled column by column.
pub fn jacobian(f: &SmoothMap, x: &Vector) -> Result<Matrix> {
    let n = f.domain_dim;
    let mut jac = Matrix::zeros(f.codomain_dim, n);
    for i in 0..n {
        let col = directional_derivative(f, x, &basis(n, i))?;
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// Recovers the symmetric bilinear map behind a quadratic form:
/// `½(Q(v+w) − Q(v) − Q(w))`.
pub fn polarize<Q>(q: Q, v: &Vector, w: &Vector) -> Vector
where
    Q: Fn(&Vector) -> Vector,
{
    (q(&(v + w)) - q(v) - q(w)) * 0.5
}

/// Standard basis vector `e_i` of length `n`.
pub fn basis(n: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(n);
    e[i] = 1.0;
    e
}

/// Uniform random vector in `[-1, 1]^n`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

/// Random vector of unit Euclidean norm.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = random_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

fn finite(v: Vector, context: &'static str) -> Result<Vector> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(GeoError::NonFinite(context))
    }
}

/// Dense coefficients of a bilinear map `E × E → F`:
/// `out[k] = Σ_ij c[k][i][j] a_i b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearTensor {
    dim_in: usize,
    dim_out: usize,
    coeffs: Vec<f64>,
}

impl BilinearTensor {
    pub fn zeros(dim_in: usize, dim_out: usize) -> Self {
        Self {
            dim_in,
            dim_out,
            coeffs: vec![0.0; dim_in * dim_in * dim_out],
        }
    }

    /// Builds from a closure `(k, i, j) -> c[k][i][j]`.
    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        dim_in: usize,
        dim_out: usize,
        mut f: F,
    ) -> Self {
        let mut t = Self::zeros(dim_in, dim_out);
        for k in 0..dim_out {
            for i in 0..dim_in {
                for j in 0..dim_in {
                    let o = t.offset(k, i, j);
                    t.coeffs[o] = f(k, i, j);
                }
            }
        }
        t
    }

    /// Random coefficients in `[-1, 1]`, symmetric in `(i, j)` when asked.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, symmetric: bool) -> Self {
        let mut t = Self::from_fn(dim, dim, |_, _, _| rng.random_range(-1.0..=1.0));
        if symmetric {
            t = t.symmetrized();
        }
        t
    }

    fn offset(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim_in + i) * self.dim_in + j
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.coeffs[self.offset(k, i, j)]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let o = self.offset(k, i, j);
        self.coeffs[o] = value;
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn apply(&self, a: &Vector, b: &Vector) -> Vector {
        let n = self.dim_in;
        Vector::from_fn(self.dim_out, |k, _| {
            let mut acc = 0.0;
            for i in 0..n {
                let row = &self.coeffs[self.offset(k, i, 0)..self.offset(k, i, 0) + n];
                let inner: f64 = row.iter().zip(b.iter()).map(|(c, bj)| c * bj).sum();
                acc += a[i] * inner;
            }
            acc
        })
    }

    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.dim_in, self.dim_out, |k, i, j| {
            0.5 * (self.get(k, i, j) + self.get(k, j, i))
        })
    }

    /// Largest `|c[k][i][j] − c[k][j][i]|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.dim_out {
            for i in 0..self.dim_in {
                for j in 0..i {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Largest coefficient difference to `other` (same shape assumed).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

/// A bilinear map `E × E → F` with fixed dimensions.
#[derive(Clone)]
pub struct BilinearMap {
    dim_in: usize,
    dim_out: usize,
    apply: Arc<ApplyFn>,
}

impl fmt::Debug for BilinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilinearMap")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl BilinearMap {
    pub fn new<F>(dim_in: usize, dim_out: usize, f: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            dim_in,
            dim_out,
            apply: Arc::new(f),
        }
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Self::new(dim_in, dim_out, move |_, _| Vector::zeros(dim_out))
    }

    pub fn from_tensor(t: BilinearTensor) -> Self {
        let (n, m) = (t.dim_in, t.dim_out);
        Self::new(n, m, move |a, b| t.apply(a, b))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn apply(&self, a: &Vector, b: &Vector) -> Result<Vector> {
        check_dim("bilinear map first argument", self.dim_in, a.len())?;
        check_dim("bilinear map second argument", self.dim_in, b.len())?;
        let out = (self.apply)(a, b);
        check_dim("bilinear map value", self.dim_out, out.len())?;
        Ok(out)
    }

    /// Materializes the coefficients by evaluating on basis pairs.
    pub fn to_tensor(&self) -> BilinearTensor {
        let n = self.dim_in;
        let mut t = BilinearTensor::zeros(n, self.dim_out);
        for i in 0..n {
            let ei = basis(n, i);
            for j in 0..n {
                let v = (self.apply)(&ei, &basis(n, j));
                for k in 0..self.dim_out {
                    t.set(k, i, j, v[k]);
                }
            }
        }
        t
    }

    /// Largest violation of additivity and homogeneity in either slot over
    /// random probes.
    pub fn bilinearity_residual<R: Rng + ?Sized>(&self, rng: &mut R, probes: usize) -> f64 {
        let n = self.dim_in;
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let (a, a2, b) = (
                random_vector(rng, n),
                random_vector(rng, n),
                random_vector(rng, n),
            );
            let s: f64 = rng.random_range(-2.0..=2.0);
            let f = |x: &Vector, y: &Vector| (self.apply)(x, y);
            let left = f(&(&a * s + &a2), &b) - (f(&a, &b) * s + f(&a2, &b));
            let right = f(&b, &(&a * s + &a2)) - (f(&b, &a) * s + f(&b, &a2));
            worst = worst.max(left.amax()).max(right.amax());
        }
        worst
    }

    /// Largest `|B(v,w) − B(w,v)|` over random probes.
    pub fn symmetry_residual<R: Rng + ?Sized>(&self, rng: &mut R, probes: usize) -> f64 {
        let n = self.dim_in;
        (0..probes)
            .map(|_| {
                let (v, w) = (random_vector(rng, n), random_vector(rng, n));
                ((self.apply)(&v, &w) - (self.apply)(&w, &v)).amax()
            })
            .fold(0.0, f64::max)
    }
}
