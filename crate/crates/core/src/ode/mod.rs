//! Second-order ODE engine: the existence-interval bound and Picard
//! iteration, a fixed-step RK4 integrator, geodesic and parallel-transport
//! solvers, and tower-wide integration with level-consistency residuals.

mod geodesic;
mod picard;
mod rk4;
mod tower;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{random_vector, Vector};
use crate::error::{check_dim, GeoError, Result};

pub use geodesic::{
    geodesic, geodesic_rhs, parallel_transport, ClosureCurve, Curve, SampledCurve, TransportPath,
};
pub use picard::{
    existence_interval, existence_interval_on_grid, picard_solve, tower_existence_interval,
    ExistenceInterval, PicardOptions, PicardSolution, Quadrature, Seminorm, TowerExistence,
    DEFAULT_SUP_GRID,
};
pub use rk4::{rk4_first_order, rk4_integrate, FirstOrderPath};
pub use tower::{tower_flow, tower_geodesic, ResidualEntry, TowerOptions, TowerTrajectory};

type PhiFn = dyn Fn(f64, &Vector, &Vector) -> Result<Vector> + Send + Sync;

/// Right-hand side of `x'' = Φ(t, x, x')`.
#[derive(Clone)]
pub struct SecondOrderRhs {
    dim: usize,
    lipschitz_k: Option<f64>,
    phi: Arc<PhiFn>,
}

impl fmt::Debug for SecondOrderRhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderRhs")
            .field("dim", &self.dim)
            .field("lipschitz_k", &self.lipschitz_k)
            .finish()
    }
}

impl SecondOrderRhs {
    pub fn new<F>(dim: usize, phi: F) -> Self
    where
        F: Fn(f64, &Vector, &Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz_k: None,
            phi: Arc::new(phi),
        }
    }

    /// Declares `k` as a Lipschitz bound of `Φ` in `(x, y)`.
    pub fn with_lipschitz(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(GeoError::InvalidArgument(format!(
                "Lipschitz constant must be positive, got {k}"
            )));
        }
        self.lipschitz_k = Some(k);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_k(&self) -> Option<f64> {
        self.lipschitz_k
    }

    pub fn eval(&self, t: f64, x: &Vector, y: &Vector) -> Result<Vector> {
        check_dim("ODE position", self.dim, x.len())?;
        check_dim("ODE velocity", self.dim, y.len())?;
        let v = (self.phi)(t, x, y)?;
        check_dim("ODE right-hand side", self.dim, v.len())?;
        Ok(v)
    }

    /// Largest observed ratio `|Φ(t,x₁,y₁) − Φ(t,x₂,y₂)| / |(x₁,y₁) − (x₂,y₂)|`
    /// over seeded pairs within `radius` of `(x, y)`.
    pub fn observed_lipschitz(
        &self,
        t: f64,
        x: &Vector,
        y: &Vector,
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x1 = x + random_vector(&mut rng, n) * radius;
            let y1 = y + random_vector(&mut rng, n) * radius;
            let x2 = x + random_vector(&mut rng, n) * radius;
            let y2 = y + random_vector(&mut rng, n) * radius;
            let dz = ((&x1 - &x2).norm_squared() + (&y1 - &y2).norm_squared()).sqrt();
            if dz == 0.0 {
                continue;
            }
            let d = (self.eval(t, &x1, &y1)? - self.eval(t, &x2, &y2)?).norm();
            worst = worst.max(d / dz);
        }
        Ok(worst)
    }

    /// Whether the declared constant covers [`Self::observed_lipschitz`].
    pub fn spot_check_lipschitz(
        &self,
        t: f64,
        x: &Vector,
        y: &Vector,
        radius: f64,
        samples: usize,
        seed: u64,
    ) -> Result<bool> {
        let k = self.lipschitz_k.ok_or(GeoError::MissingLipschitz)?;
        Ok(self.observed_lipschitz(t, x, y, radius, samples, seed)? <= k * (1.0 + 1e-12))
    }
}

/// Which level a trajectory lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelTag {
    Index(usize),
    Limit,
}

impl fmt::Display for LevelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelTag::Index(i) => write!(f, "{i}"),
            LevelTag::Limit => f.write_str("limit"),
        }
    }
}

/// Time-stamped `(position, velocity)` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<Vector>,
    pub ys: Vec<Vector>,
    pub level: LevelTag,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, xs: Vec<Vector>, ys: Vec<Vector>, level: LevelTag) -> Result<Self> {
        check_dim("trajectory positions", times.len(), xs.len())?;
        check_dim("trajectory velocities", times.len(), ys.len())?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeoError::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if let Some(first) = xs.first() {
            let n = first.len();
            for (x, y) in xs.iter().zip(&ys) {
                check_dim("trajectory position", n, x.len())?;
                check_dim("trajectory velocity", n, y.len())?;
            }
        }
        Ok(Self { times, xs, ys, level })
    }

    pub fn empty(level: LevelTag) -> Self {
        Self {
            times: Vec::new(),
            xs: Vec::new(),
            ys: Vec::new(),
            level,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }

    pub fn final_position(&self) -> Option<&Vector> {
        self.xs.last()
    }

    pub fn with_level(mut self, level: LevelTag) -> Self {
        self.level = level;
        self
    }
}

/// Maps solver-side non-finite failures onto the blow-up policy.
pub(crate) fn blow_up(time: f64, last: &Vector) -> GeoError {
    GeoError::BlowUp {
        time,
        last_state: last.iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lipschitz_spot_check() {
        let rhs = SecondOrderRhs::new(1, |_, x, _| Ok(x * 2.0)).with_lipschitz(2.0).unwrap();
        let z = Vector::zeros(1);
        assert!(rhs.spot_check_lipschitz(0.0, &z, &z, 1.0, 64, 1).unwrap());
        let tight = SecondOrderRhs::new(1, |_, x, _| Ok(x * 2.0)).with_lipschitz(1.0).unwrap();
        assert!(!tight.spot_check_lipschitz(0.0, &z, &z, 1.0, 64, 1).unwrap());
        assert!(SecondOrderRhs::new(1, |_, x, _| Ok(x.clone())).with_lipschitz(0.0).is_err());
    }

    #[test]
    fn trajectory_invariants() {
        let v = Vector::zeros(1);
        assert!(Trajectory::new(vec![0.0, 0.0], vec![v.clone(), v.clone()], vec![v.clone(), v.clone()], LevelTag::Limit).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![v.clone(), Vector::zeros(2)], vec![v.clone(), v.clone()], LevelTag::Limit).is_err());
        assert_eq!(LevelTag::Index(3).to_string(), "3");
        assert_eq!(LevelTag::Limit.to_string(), "limit");
    }
}
