use std::fmt;
use std::sync::Arc;

use crate::calculus::{first_order_step, Vector};
use crate::error::{check_dim, GeoError, Result};
use crate::structures::ChristoffelField;

use super::{rk4_first_order, rk4_integrate, LevelTag, SecondOrderRhs, Trajectory};

/// `Φ(t, x, y) = Γ(x)(y, y)`.
pub fn geodesic_rhs(gamma: &ChristoffelField) -> SecondOrderRhs {
    let g = gamma.clone();
    SecondOrderRhs::new(gamma.dim(), move |_, x, y| g.apply(x, y, y))
}

/// Solves `γ'' = Γ(γ)(γ', γ')` on `[0, t_end]` with RK4.
pub fn geodesic(
    gamma: &ChristoffelField,
    x0: &Vector,
    y0: &Vector,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    rk4_integrate(&geodesic_rhs(gamma), 0.0, x0, y0, t_end, steps)
}

/// Differentiable curve on a closed time span.
pub trait Curve: Sync {
    fn dim(&self) -> usize;
    fn span(&self) -> (f64, f64);
    fn position(&self, t: f64) -> Result<Vector>;
    fn velocity(&self, t: f64) -> Result<Vector>;
}

type PathFn = dyn Fn(f64) -> Vector + Send + Sync;

/// Curve given by closures. Without a velocity closure the velocity is a
/// central difference of the position.
#[derive(Clone)]
pub struct ClosureCurve {
    dim: usize,
    span: (f64, f64),
    position: Arc<PathFn>,
    velocity: Option<Arc<PathFn>>,
}

impl fmt::Debug for ClosureCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureCurve")
            .field("dim", &self.dim)
            .field("span", &self.span)
            .field("analytic_velocity", &self.velocity.is_some())
            .finish()
    }
}

impl ClosureCurve {
    pub fn new<F>(dim: usize, start: f64, end: f64, position: F) -> Result<Self>
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(GeoError::InvalidArgument(format!("curve span [{start}, {end}] is empty")));
        }
        Ok(Self {
            dim,
            span: (start, end),
            position: Arc::new(position),
            velocity: None,
        })
    }

    pub fn with_velocity<F>(mut self, velocity: F) -> Self
    where
        F: Fn(f64) -> Vector + Send + Sync + 'static,
    {
        self.velocity = Some(Arc::new(velocity));
        self
    }
}

impl Curve for ClosureCurve {
    fn dim(&self) -> usize {
        self.dim
    }

    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn position(&self, t: f64) -> Result<Vector> {
        let p = (self.position)(t);
        check_dim("curve position", self.dim, p.len())?;
        Ok(p)
    }

    fn velocity(&self, t: f64) -> Result<Vector> {
        let v = match &self.velocity {
            Some(v) => v(t),
            None => {
                let h = first_order_step() * t.abs().max(1.0);
                ((self.position)(t + h) - (self.position)(t - h)) / (2.0 * h)
            }
        };
        check_dim("curve velocity", self.dim, v.len())?;
        Ok(v)
    }
}

/// Curve through time-stamped samples, interpolated by cubic Hermite
/// segments. Missing velocities are estimated by three-point differences.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    times: Vec<f64>,
    positions: Vec<Vector>,
    velocities: Vec<Vector>,
}

impl SampledCurve {
    pub fn new(times: Vec<f64>, positions: Vec<Vector>, velocities: Option<Vec<Vector>>) -> Result<Self> {
        if times.len() < 2 {
            return Err(GeoError::InvalidArgument("a sampled curve needs at least two samples".into()));
        }
        check_dim("curve samples", times.len(), positions.len())?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeoError::InvalidArgument("curve sample times must be strictly increasing".into()));
        }
        let dim = positions[0].len();
        for p in &positions {
            check_dim("curve sample", dim, p.len())?;
        }
        let velocities = match velocities {
            Some(v) => {
                check_dim("curve velocities", times.len(), v.len())?;
                for w in &v {
                    check_dim("curve velocity sample", dim, w.len())?;
                }
                v
            }
            None => estimate_velocities(&times, &positions),
        };
        Ok(Self {
            times,
            positions,
            velocities,
        })
    }

    pub fn from_trajectory(tr: &Trajectory) -> Result<Self> {
        Self::new(tr.times.clone(), tr.xs.clone(), Some(tr.ys.clone()))
    }

    fn segment(&self, t: f64) -> Result<usize> {
        let (a, b) = self.span();
        let slack = 1e-12 * (b - a);
        if !(t >= a - slack && t <= b + slack) {
            return Err(GeoError::InvalidArgument(format!("time {t} outside curve span [{a}, {b}]")));
        }
        let i = self.times.partition_point(|&s| s <= t);
        Ok(i.clamp(1, self.times.len() - 1) - 1)
    }
}

/// Derivative of the quadratic through three neighbouring samples, which is
/// second-order accurate on non-uniform grids.
fn estimate_velocities(times: &[f64], xs: &[Vector]) -> Vec<Vector> {
    let n = times.len();
    if n == 2 {
        let v = (&xs[1] - &xs[0]) / (times[1] - times[0]);
        return vec![v.clone(), v];
    }
    let three_point = |i0: usize, at: usize| -> Vector {
        let (t0, t1, t2) = (times[i0], times[i0 + 1], times[i0 + 2]);
        let t = times[at];
        let l0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let l1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let l2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
        &xs[i0] * l0 + &xs[i0 + 1] * l1 + &xs[i0 + 2] * l2
    };
    (0..n)
        .map(|i| match i {
            0 => three_point(0, 0),
            _ if i == n - 1 => three_point(n - 3, i),
            _ => three_point(i - 1, i),
        })
        .collect()
}

impl Curve for SampledCurve {
    fn dim(&self) -> usize {
        self.positions[0].len()
    }

    fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("at least two samples"))
    }

    fn position(&self, t: f64) -> Result<Vector> {
        let i = self.segment(t)?;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(&self.positions[i] * h00
            + &self.velocities[i] * (h10 * h)
            + &self.positions[i + 1] * h01
            + &self.velocities[i + 1] * (h11 * h))
    }

    fn velocity(&self, t: f64) -> Result<Vector> {
        let i = self.segment(t)?;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        Ok(&self.positions[i] * d00
            + &self.velocities[i] * d10
            + &self.positions[i + 1] * d01
            + &self.velocities[i + 1] * d11)
    }
}

/// Vector `γ(t)` transported along the curve `c(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPath {
    pub times: Vec<f64>,
    pub positions: Vec<Vector>,
    pub vectors: Vec<Vector>,
}

impl TransportPath {
    /// Positions in the `x` columns, transported vectors in the `y` columns.
    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            xs: self.positions.clone(),
            ys: self.vectors.clone(),
            level: LevelTag::Limit,
        }
    }

    pub fn final_vector(&self) -> &Vector {
        self.vectors.last().expect("transport path is never empty")
    }
}

/// Solves `γ' = Γ(c(t))(c'(t), γ)`, `γ(t_start) = u0`, over the curve span.
pub fn parallel_transport(
    gamma: &ChristoffelField,
    curve: &dyn Curve,
    u0: &Vector,
    steps: usize,
) -> Result<TransportPath> {
    check_dim("transport curve", gamma.dim(), curve.dim())?;
    check_dim("transported vector", gamma.dim(), u0.len())?;
    let (start, end) = curve.span();
    let path = rk4_first_order(
        |t, w| {
            let c = curve.position(t)?;
            let dc = curve.velocity(t)?;
            gamma.apply(&c, &dc, w)
        },
        start,
        u0,
        end,
        steps,
    )?;
    let positions = path.times.iter().map(|&t| curve.position(t)).collect::<Result<_>>()?;
    Ok(TransportPath {
        times: path.times,
        positions,
        vectors: path.states,
    })
}
