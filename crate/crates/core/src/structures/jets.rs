//! Sprays and dissections, and their reconstruction of the Christoffel field.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{basis, polarize, random_vector, BilinearMap, Matrix, Vector};
use crate::error::{check_dim, GeoError, Result};

use super::{ChristoffelField, TwoJet};

/// Relative tolerance of the `Q(u, 2v) = 4 Q(u, v)` probe.
const HOMOGENEITY_TOL: f64 = 1e-9;
const HOMOGENEITY_PROBES: usize = 16;

/// `(u, v) ↦ (v, Γ(u)(v, v))` for a symmetric Christoffel field.
pub fn spray_eval(gamma: &ChristoffelField, u: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
    if !gamma.is_symmetric() {
        return Err(GeoError::NotSymmetric(gamma.chart_id().to_string()));
    }
    let q = gamma.apply(u, v, v)?;
    Ok((v.clone(), q))
}

type QuadraticFn = dyn Fn(&Vector, &Vector) -> Result<Vector> + Send + Sync;

/// Second-order vector field described by its fiber part `Q(u, v)`.
#[derive(Clone)]
pub struct Spray {
    dim: usize,
    quadratic: Arc<QuadraticFn>,
}

impl fmt::Debug for Spray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Spray(dim = {})", self.dim)
    }
}

impl Spray {
    pub fn new<F>(dim: usize, q: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Self {
            dim,
            quadratic: Arc::new(q),
        }
    }

    pub fn from_christoffel(gamma: &ChristoffelField) -> Result<Self> {
        if !gamma.is_symmetric() {
            return Err(GeoError::NotSymmetric(gamma.chart_id().to_string()));
        }
        let g = gamma.clone();
        Ok(Self::new(gamma.dim(), move |u, v| g.apply(u, v, v)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quadratic(&self, u: &Vector, v: &Vector) -> Result<Vector> {
        check_dim("spray point", self.dim, u.len())?;
        check_dim("spray velocity", self.dim, v.len())?;
        let q = (self.quadratic)(u, v)?;
        check_dim("spray value", self.dim, q.len())?;
        Ok(q)
    }

    /// `(v, Q(u, v))`.
    pub fn eval(&self, u: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
        Ok((v.clone(), self.quadratic(u, v)?))
    }
}

/// Symmetric Christoffel field obtained by polarizing the spray's fiber part.
/// The spray is first probed for quadratic homogeneity at seeded random
/// points of `[-1, 1]^dim`.
pub fn christoffel_from_spray(spray: &Spray, seed: u64) -> Result<ChristoffelField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spray.dim;
    let mut worst: f64 = 0.0;
    for _ in 0..HOMOGENEITY_PROBES {
        let u = random_vector(&mut rng, n);
        let v = random_vector(&mut rng, n);
        let q1 = spray.quadratic(&u, &v)? * 4.0;
        let q2 = spray.quadratic(&u, &(&v * 2.0))?;
        worst = worst.max((&q2 - &q1).amax() / (1.0 + q1.amax()));
    }
    if worst > HOMOGENEITY_TOL {
        return Err(GeoError::NotQuadratic { residual: worst });
    }
    let s = spray.clone();
    Ok(ChristoffelField::new("spray", n, true, move |u| {
        let (s, u) = (s.clone(), u.clone());
        // Evaluate once so failures surface here rather than inside `apply`.
        s.quadratic(&u, &Vector::zeros(n))?;
        Ok(BilinearMap::new(n, n, move |v, w| {
            polarize(|z| s.quadratic(&u, z).expect("spray evaluates"), v, w)
        }))
    }))
}

/// `α ⊕ α∘Γ(u)` for a symmetric Christoffel field.
pub fn dissection_eval(gamma: &ChristoffelField, alpha: &Vector, u: &Vector) -> Result<TwoJet> {
    if !gamma.is_symmetric() {
        return Err(GeoError::NotSymmetric(gamma.chart_id().to_string()));
    }
    let n = gamma.dim();
    check_dim("dissection covector", n, alpha.len())?;
    let g = gamma.tensor_at(u)?;
    let form = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| alpha[k] * g.get(k, i, j)).sum());
    TwoJet::new(alpha.clone(), form)
}

type JetFn = dyn Fn(&Vector, &Vector) -> Result<TwoJet> + Send + Sync;

/// Assignment `(u, α) ↦ α ⊕ B` of 2-jet representatives.
#[derive(Clone)]
pub struct Dissection {
    dim: usize,
    jet: Arc<JetFn>,
}

impl fmt::Debug for Dissection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dissection(dim = {})", self.dim)
    }
}

impl Dissection {
    pub fn new<F>(dim: usize, jet: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Result<TwoJet> + Send + Sync + 'static,
    {
        Self {
            dim,
            jet: Arc::new(jet),
        }
    }

    pub fn from_christoffel(gamma: &ChristoffelField) -> Result<Self> {
        if !gamma.is_symmetric() {
            return Err(GeoError::NotSymmetric(gamma.chart_id().to_string()));
        }
        let g = gamma.clone();
        Ok(Self::new(gamma.dim(), move |u, alpha| dissection_eval(&g, alpha, u)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, u: &Vector, alpha: &Vector) -> Result<TwoJet> {
        check_dim("dissection point", self.dim, u.len())?;
        check_dim("dissection covector", self.dim, alpha.len())?;
        let jet = (self.jet)(u, alpha)?;
        check_dim("dissection jet", self.dim, jet.dim())?;
        Ok(jet)
    }
}

/// Recovers `Γ(u)` from the forms attached to the dual basis covectors:
/// `Γ(u)(v, w)_k = B_{e_k*}(v, w)`.
pub fn christoffel_from_dissection(d: &Dissection) -> ChristoffelField {
    let n = d.dim;
    let d = d.clone();
    ChristoffelField::new("dissection", n, true, move |u| {
        let forms = (0..n)
            .map(|k| d.eval(u, &basis(n, k)).map(|j| j.form))
            .collect::<Result<Vec<_>>>()?;
        Ok(BilinearMap::new(n, n, move |v, w| {
            Vector::from_iterator(n, forms.iter().map(|b| v.dot(&(b * w))))
        }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::BilinearTensor;
    use crate::poly::PolyChristoffel;

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn product_gamma() -> ChristoffelField {
        ChristoffelField::constant("phi", BilinearTensor::from_fn(1, 1, |_, _, _| 1.0))
    }

    #[test]
    fn spray_examples() {
        let (a, b) = spray_eval(&ChristoffelField::zero(2), &Vector::zeros(2), &Vector::from_row_slice(&[1.0, 2.0])).unwrap();
        assert_eq!(a, Vector::from_row_slice(&[1.0, 2.0]));
        assert_eq!(b, Vector::zeros(2));
        let (a, b) = spray_eval(&product_gamma(), &v1(0.0), &v1(2.0)).unwrap();
        assert_eq!((a[0], b[0]), (2.0, 4.0));
        let (a, b) = spray_eval(&product_gamma(), &v1(5.0), &v1(0.0)).unwrap();
        assert_eq!((a[0], b[0]), (0.0, 0.0));
    }

    #[test]
    fn spray_rejects_non_symmetric() {
        let t = BilinearTensor::from_fn(2, 2, |k, i, j| (k + 2 * i + 3 * j) as f64);
        let g = ChristoffelField::constant("phi", t);
        assert!(matches!(spray_eval(&g, &Vector::zeros(2), &Vector::zeros(2)), Err(GeoError::NotSymmetric(_))));
        assert!(Spray::from_christoffel(&g).is_err());
        assert!(dissection_eval(&g, &Vector::zeros(2), &Vector::zeros(2)).is_err());
    }

    #[test]
    fn christoffel_from_simple_sprays() {
        let zero = christoffel_from_spray(&Spray::new(1, |_, _| Ok(Vector::zeros(1))), 1).unwrap();
        assert_eq!(zero.apply(&v1(0.0), &v1(1.0), &v1(2.0)).unwrap()[0], 0.0);
        let sq = christoffel_from_spray(&Spray::new(1, |_, v| Ok(v.map(|t| t * t))), 1).unwrap();
        assert_eq!(sq.apply(&v1(3.0), &v1(1.0), &v1(2.0)).unwrap()[0], 2.0);
        assert!(sq.is_symmetric());
    }

    #[test]
    fn non_quadratic_spray_rejected() {
        let cubic = Spray::new(1, |_, v| Ok(v.map(|t| t * t * t)));
        assert!(matches!(christoffel_from_spray(&cubic, 3), Err(GeoError::NotQuadratic { .. })));
        let affine = Spray::new(1, |_, v| Ok(v.map(|t| t * t + 1.0)));
        assert!(christoffel_from_spray(&affine, 3).is_err());
    }

    #[test]
    fn spray_round_trip_recovers_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = PolyChristoffel::random(&mut rng, 3, 2, true).to_field("phi");
        let back = christoffel_from_spray(&Spray::from_christoffel(&g).unwrap(), 9).unwrap();
        for _ in 0..100 {
            let u = random_vector(&mut rng, 3);
            let d = g.tensor_at(&u).unwrap().max_abs_diff(&back.tensor_at(&u).unwrap());
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn dissection_examples() {
        let jet = dissection_eval(&ChristoffelField::zero(2), &Vector::from_row_slice(&[1.0, -2.0]), &Vector::zeros(2)).unwrap();
        assert_eq!(jet.form, Matrix::zeros(2, 2));
        let jet = dissection_eval(&product_gamma(), &v1(3.0), &v1(0.5)).unwrap();
        assert_eq!(jet.form_apply(&v1(1.0), &v1(1.0)), 3.0);
        assert_eq!(jet.form_apply(&v1(2.0), &v1(0.5)), 3.0);
        let jet = dissection_eval(&product_gamma(), &v1(0.0), &v1(0.5)).unwrap();
        assert_eq!(jet.form[(0, 0)], 0.0);
    }

    #[test]
    fn dissection_round_trip_recovers_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = PolyChristoffel::random(&mut rng, 4, 2, true).to_field("phi");
        let back = christoffel_from_dissection(&Dissection::from_christoffel(&g).unwrap());
        for _ in 0..100 {
            let u = random_vector(&mut rng, 4);
            let d = g.tensor_at(&u).unwrap().max_abs_diff(&back.tensor_at(&u).unwrap());
            assert!(d < 1e-12);
        }
    }
}
