use crate::calculus::Vector;
use crate::error::{GeoError, Result};

use super::{blow_up, LevelTag, SecondOrderRhs, Trajectory};

/// States of a first-order system on a uniform grid.
#[derive(Debug, Clone)]
pub struct FirstOrderPath {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

fn uniform_times(t0: f64, t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(GeoError::InvalidArgument("steps must be at least 1".into()));
    }
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(GeoError::InvalidArgument(format!(
            "integration interval [{t0}, {t_end}] must be finite and non-empty"
        )));
    }
    let h = (t_end - t0) / steps as f64;
    let mut times: Vec<f64> = (0..steps).map(|i| t0 + i as f64 * h).collect();
    times.push(t_end);
    Ok(times)
}

/// Classical RK4 for `z' = f(t, z)` with a fixed step.
///
/// A non-finite stage or state aborts with [`GeoError::BlowUp`] carrying the
/// last finite state. A right-hand side that itself reports a non-finite
/// value is treated the same way.
pub fn rk4_first_order<F>(f: F, t0: f64, z0: &Vector, t_end: f64, steps: usize) -> Result<FirstOrderPath>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    let times = uniform_times(t0, t_end, steps)?;
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(GeoError::NonFinite("initial state"));
    }
    let mut states = Vec::with_capacity(times.len());
    states.push(z0.clone());
    for w in times.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        let z = states.last().expect("initial state pushed");
        let stage = |tt: f64, zz: &Vector| -> Result<Vector> {
            match f(tt, zz) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(v),
                Ok(_) | Err(GeoError::NonFinite(_)) => Err(blow_up(t, z)),
                Err(e) => Err(e),
            }
        };
        let k1 = stage(t, z)?;
        let k2 = stage(t + h / 2.0, &(z + &k1 * (h / 2.0)))?;
        let k3 = stage(t + h / 2.0, &(z + &k2 * (h / 2.0)))?;
        let k4 = stage(t + h, &(z + &k3 * h))?;
        let next = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(t, z));
        }
        states.push(next);
    }
    Ok(FirstOrderPath { times, states })
}

/// Integrates `x'' = Φ(t, x, x')` through its first-order reduction
/// `z = (x, y)`, `z' = (y, Φ(t, x, y))`.
pub fn rk4_integrate(
    rhs: &SecondOrderRhs,
    t0: f64,
    x0: &Vector,
    y0: &Vector,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    let n = rhs.dim();
    crate::error::check_dim("initial position", n, x0.len())?;
    crate::error::check_dim("initial velocity", n, y0.len())?;
    let z0 = Vector::from_iterator(2 * n, x0.iter().chain(y0.iter()).copied());
    let path = rk4_first_order(
        |t, z| {
            let x = z.rows(0, n).into_owned();
            let y = z.rows(n, n).into_owned();
            let acc = rhs.eval(t, &x, &y)?;
            Ok(Vector::from_iterator(2 * n, y.iter().chain(acc.iter()).copied()))
        },
        t0,
        &z0,
        t_end,
        steps,
    )?;
    let xs = path.states.iter().map(|z| z.rows(0, n).into_owned()).collect();
    let ys = path.states.iter().map(|z| z.rows(n, n).into_owned()).collect();
    Ok(Trajectory {
        times: path.times,
        xs,
        ys,
        level: LevelTag::Limit,
    })
}
