//! Seeded random problem instances shared by the verification subcommands
//! and the test suites.

use rand::Rng;

use crate::calculus::{random_vector, Matrix, SmoothMap, Vector};
use crate::poly::{PolyChristoffel, PolyVectorField, Quadratic};
use crate::structures::{ChartTransition, ChristoffelField, ScalarField, VectorField};

/// Christoffel field, scalar field, two vector fields and a base point, all
/// polynomial of degree at most two.
#[derive(Debug, Clone)]
pub struct HessianInstance {
    pub gamma: ChristoffelField,
    pub f: ScalarField,
    pub x: VectorField,
    pub y: VectorField,
    pub u: Vector,
}

impl HessianInstance {
    /// Dimension drawn uniformly from `1..=max_dim`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_dim: usize, symmetric: bool) -> Self {
        let n = rng.random_range(1..=max_dim.max(1));
        Self {
            gamma: PolyChristoffel::random(rng, n, 2, symmetric).to_field("phi"),
            f: ScalarField::new(Quadratic::random(rng, n, 2, 1.0).to_scalar_map()).expect("scalar map"),
            x: VectorField::new(PolyVectorField::random(rng, n, n, 2, 1.0).to_smooth_map()).expect("square field"),
            y: VectorField::new(PolyVectorField::random(rng, n, n, 2, 1.0).to_smooth_map()).expect("square field"),
            u: random_vector(rng, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// `F(x)_i = x_i + x_i²/2` on `x_i > −1`, with inverse
/// `G(y)_i = sqrt(1 + 2y_i) − 1`. With `analytic` unset, both derivatives of
/// `F` fall back to finite differences.
pub fn quadratic_transition(dim: usize, analytic: bool) -> ChartTransition {
    let forward = SmoothMap::new(dim, dim, |x| x.map(|t| t + t * t / 2.0));
    let forward = if analytic {
        forward
            .with_d1(|x, v| v.component_mul(&x.map(|t| 1.0 + t)))
            .with_d2(|_, v, w| v.component_mul(w))
    } else {
        forward
    };
    let inverse = SmoothMap::new(dim, dim, |y| y.map(|s| (1.0 + 2.0 * s).sqrt() - 1.0))
        .with_d1(|y, v| v.component_div(&y.map(|s| (1.0 + 2.0 * s).sqrt())));
    ChartTransition::new(forward)
        .and_then(|t| t.with_inverse(inverse))
        .expect("square transition")
}

/// Jacobian of [`quadratic_transition`] at `x`.
pub fn quadratic_transition_jacobian(x: &Vector) -> Matrix {
    Matrix::from_diagonal(&x.map(|t| 1.0 + t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transition_inverse_round_trip() {
        let t = quadratic_transition(3, true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vector> = (0..10).map(|_| random_vector(&mut rng, 3) * 0.5).collect();
        assert!(t.inverse_residual(&pts).unwrap() < 1e-14);
    }

    #[test]
    fn instances_are_seeded() {
        let a = HessianInstance::random(&mut ChaCha8Rng::seed_from_u64(4), 4, false);
        let b = HessianInstance::random(&mut ChaCha8Rng::seed_from_u64(4), 4, false);
        assert_eq!(a.u, b.u);
        assert_eq!(a.f.at(&a.u).unwrap(), b.f.at(&b.u).unwrap());
    }
}
