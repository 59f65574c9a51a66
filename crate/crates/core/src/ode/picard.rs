use crate::calculus::Vector;
use crate::error::{check_dim, GeoError, Result};
use crate::tower::Tower;

use super::{LevelTag, SecondOrderRhs, Trajectory};

/// Points of the sampled grid on `[t0 − τ, t0 + τ]` used for the sup in `M`.
pub const DEFAULT_SUP_GRID: usize = 65;

pub type Seminorm<'a> = &'a dyn Fn(&Vector) -> f64;

/// Radius `a = min(τ, 1/(M + k))` together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceInterval {
    pub a: f64,
    pub sup_m: f64,
    pub lipschitz_k: f64,
    pub tau: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(GeoError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

fn sup_grid(t0: f64, tau: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![t0];
    }
    let h = 2.0 * tau / (points - 1) as f64;
    (0..points).map(|i| t0 - tau + i as f64 * h).collect()
}

/// `M = sup_{i,t} (p_i(y0)² + p_i(Φ(t, x0, y0))²)^{1/2}` over a sampled grid.
fn sup_m(
    rhs: &SecondOrderRhs,
    times: &[f64],
    x0: &Vector,
    y0: &Vector,
    seminorms: &[Seminorm],
) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &t in times {
        let phi = match rhs.eval(t, x0, y0) {
            Ok(v) => v,
            Err(GeoError::NonFinite(_)) => return Err(GeoError::UnboundedData),
            Err(e) => return Err(e),
        };
        for p in seminorms {
            let (a, b) = (p(y0), p(&phi));
            m = m.max((a * a + b * b).sqrt());
        }
    }
    if !m.is_finite() {
        return Err(GeoError::UnboundedData);
    }
    Ok(m)
}

/// Existence radius around `t0` with the default 65-point sup grid.
pub fn existence_interval(
    rhs: &SecondOrderRhs,
    t0: f64,
    x0: &Vector,
    y0: &Vector,
    tau: f64,
    seminorms: &[Seminorm],
) -> Result<ExistenceInterval> {
    existence_interval_on_grid(rhs, t0, x0, y0, tau, seminorms, DEFAULT_SUP_GRID)
}

pub fn existence_interval_on_grid(
    rhs: &SecondOrderRhs,
    t0: f64,
    x0: &Vector,
    y0: &Vector,
    tau: f64,
    seminorms: &[Seminorm],
    grid_points: usize,
) -> Result<ExistenceInterval> {
    check_tau(tau)?;
    if seminorms.is_empty() {
        return Err(GeoError::InvalidArgument("seminorm list is empty".into()));
    }
    let k = rhs.lipschitz_k().ok_or(GeoError::MissingLipschitz)?;
    let m = sup_m(rhs, &sup_grid(t0, tau, grid_points), x0, y0, seminorms)?;
    Ok(ExistenceInterval {
        a: tau.min(1.0 / (m + k)),
        sup_m: m,
        lipschitz_k: k,
        tau,
    })
}

/// Level-independent radius for a tower of second-order systems.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerExistence {
    pub interval: ExistenceInterval,
    /// `(level index, M_i)` in tower order.
    pub per_level_m: Vec<(usize, f64)>,
    /// The supremum is attained on the deepest level, so a deeper tower
    /// could push `M` higher.
    pub sup_at_top: bool,
}

/// Projects the top-level data to every level, takes the supremum of the
/// per-level `M` values and the largest declared Lipschitz constant.
pub fn tower_existence_interval(
    tower: &Tower,
    family: &[SecondOrderRhs],
    t0: f64,
    x0_top: &Vector,
    y0_top: &Vector,
    tau: f64,
) -> Result<TowerExistence> {
    check_tau(tau)?;
    check_dim("tower ODE family", tower.depth(), family.len())?;
    let top = tower.top().index();
    let times = sup_grid(t0, tau, DEFAULT_SUP_GRID);
    let mut per_level_m = Vec::with_capacity(family.len());
    let mut k: f64 = 0.0;
    for (level, rhs) in tower.levels().iter().zip(family) {
        k = k.max(rhs.lipschitz_k().ok_or(GeoError::MissingLipschitz)?);
        let proj = tower.map(top, level.index())?;
        let (x0, y0) = (&proj * x0_top, &proj * y0_top);
        let p = |v: &Vector| level.seminorm(v).unwrap_or(f64::INFINITY);
        per_level_m.push((level.index(), sup_m(rhs, &times, &x0, &y0, &[&p])?));
    }
    let m = per_level_m.iter().map(|&(_, m)| m).fold(0.0, f64::max);
    let top_m = per_level_m.last().map_or(0.0, |&(_, m)| m);
    let below = per_level_m[..per_level_m.len() - 1]
        .iter()
        .map(|&(_, m)| m)
        .fold(0.0, f64::max);
    let sup_at_top = per_level_m.len() > 1 && top_m > below;
    if sup_at_top {
        log::info!("existence bound M = {m} is attained on the deepest level {top}");
    }
    Ok(TowerExistence {
        interval: ExistenceInterval {
            a: tau.min(1.0 / (m + k)),
            sup_m: m,
            lipschitz_k: k,
            tau,
        },
        per_level_m,
        sup_at_top,
    })
}

/// Quadrature rule for the Picard integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Composite trapezoid.
    #[default]
    Trapezoid,
    /// Trapezoid with the `h²/12 (f'(b) − f'(a))` endpoint correction, the
    /// end slopes taken from second-order differences on the grid.
    CorrectedTrapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub iters: usize,
    pub tol: f64,
    /// Subintervals on each side of `t0`.
    pub grid: usize,
    pub quadrature: Quadrature,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            iters: 60,
            tol: 1e-12,
            grid: 128,
            quadrature: Quadrature::Trapezoid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// Last iterate on `[t0 − a, t0 + a]`.
    pub trajectory: Trajectory,
    /// Sup distance between the last two iterates.
    pub residual: f64,
    pub iterations: usize,
    /// Whether `a` lies inside the guaranteed radius; `None` without a
    /// declared Lipschitz constant.
    pub within_guarantee: Option<bool>,
}

/// `I_j = ∫_{t_c}^{t_j} f` at every node, `c` the centre node.
fn cumulative_integral(values: &[Vector], h: f64, centre: usize, rule: Quadrature) -> Vec<Vector> {
    let n = values.len();
    let mut out = vec![Vector::zeros(values[0].len()); n];
    for j in centre + 1..n {
        out[j] = &out[j - 1] + (&values[j - 1] + &values[j]) * (h / 2.0);
    }
    for j in (0..centre).rev() {
        out[j] = &out[j + 1] - (&values[j] + &values[j + 1]) * (h / 2.0);
    }
    if rule == Quadrature::CorrectedTrapezoid && n >= 3 {
        let slope = |j: usize| -> Vector {
            if j == 0 {
                (&values[1] * 4.0 - &values[0] * 3.0 - &values[2]) / (2.0 * h)
            } else if j == n - 1 {
                (&values[n - 1] * 3.0 - &values[n - 2] * 4.0 + &values[n - 3]) / (2.0 * h)
            } else {
                (&values[j + 1] - &values[j - 1]) / (2.0 * h)
            }
        };
        let sc = slope(centre);
        for (j, o) in out.iter_mut().enumerate() {
            *o -= (slope(j) - &sc) * (h * h / 12.0);
        }
    }
    out
}

/// Picard iteration `z_{n+1}(t) = z0 + ∫_{t0}^t Φ̃(s, z_n(s)) ds` for the
/// first-order reduction `z = (x, y)`, `Φ̃(t, z) = (y, Φ(t, x, y))`, on a
/// uniform grid of `[t0 − a, t0 + a]`.
pub fn picard_solve(
    rhs: &SecondOrderRhs,
    t0: f64,
    x0: &Vector,
    y0: &Vector,
    a: f64,
    opts: PicardOptions,
) -> Result<PicardSolution> {
    let n = rhs.dim();
    check_dim("initial position", n, x0.len())?;
    check_dim("initial velocity", n, y0.len())?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(GeoError::InvalidArgument(format!("interval radius must be positive, got {a}")));
    }
    if opts.iters == 0 {
        return Err(GeoError::InvalidArgument("iters must be at least 1".into()));
    }
    if opts.grid == 0 {
        return Err(GeoError::InvalidArgument("grid must be at least 1".into()));
    }

    let within_guarantee = match rhs.lipschitz_k() {
        Some(_) => {
            let euclid = |v: &Vector| v.norm();
            let bound = existence_interval(rhs, t0, x0, y0, a, &[&euclid])?;
            let ok = a <= bound.a * (1.0 + 1e-12);
            if !ok {
                log::warn!(
                    "Picard radius {a} exceeds the guaranteed existence radius {}",
                    bound.a
                );
            }
            Some(ok)
        }
        None => None,
    };

    let g = opts.grid;
    let h = a / g as f64;
    let times: Vec<f64> = (0..=2 * g).map(|j| t0 + (j as f64 - g as f64) * h).collect();
    let mut xs = vec![x0.clone(); times.len()];
    let mut ys = vec![y0.clone(); times.len()];
    let mut residual = f64::INFINITY;

    for iter in 1..=opts.iters {
        let integrand = times
            .iter()
            .zip(xs.iter().zip(&ys))
            .map(|(&t, (x, y))| {
                let acc = rhs.eval(t, x, y)?;
                Ok(Vector::from_iterator(2 * n, y.iter().chain(acc.iter()).copied()))
            })
            .collect::<Result<Vec<_>>>()?;
        let integral = cumulative_integral(&integrand, h, g, opts.quadrature);
        let mut dist: f64 = 0.0;
        for (j, int) in integral.iter().enumerate() {
            let nx = x0 + int.rows(0, n);
            let ny = y0 + int.rows(n, n);
            dist = dist.max((&nx - &xs[j]).amax()).max((&ny - &ys[j]).amax());
            xs[j] = nx;
            ys[j] = ny;
        }
        if !dist.is_finite() {
            return Err(GeoError::NonFinite("Picard iterate"));
        }
        residual = dist;
        if residual < opts.tol {
            return Ok(PicardSolution {
                trajectory: Trajectory {
                    times,
                    xs,
                    ys,
                    level: LevelTag::Limit,
                },
                residual,
                iterations: iter,
                within_guarantee,
            });
        }
    }
    Err(GeoError::NoConvergence {
        iterations: opts.iters,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::rk4_integrate;
    use crate::tower::Tower;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn abs(v: &Vector) -> f64 {
        v.norm()
    }

    #[test]
    fn zero_data_interval() {
        let rhs = SecondOrderRhs::new(1, |_, _, _| Ok(Vector::zeros(1))).with_lipschitz(2.0).unwrap();
        let e = existence_interval(&rhs, 0.0, &v1(0.0), &v1(0.0), 1.0, &[&abs]).unwrap();
        assert_eq!(e.sup_m, 0.0);
        assert_eq!(e.a, 0.5);
    }

    #[test]
    fn linear_force_interval() {
        let rhs = SecondOrderRhs::new(1, |_, x, _| Ok(x.clone())).with_lipschitz(1.0).unwrap();
        let e = existence_interval(&rhs, 0.0, &v1(1.0), &v1(0.0), 2.0, &[&abs]).unwrap();
        // M = sqrt(|y0|² + |x0|²) = 1, a = min(2, 1/(1 + 1)).
        assert_eq!(e.sup_m, 1.0);
        assert_eq!(e.a, 0.5);
    }

    #[test]
    fn tau_binds() {
        let rhs = SecondOrderRhs::new(1, |_, _, _| Ok(Vector::zeros(1))).with_lipschitz(1.0).unwrap();
        let e = existence_interval(&rhs, 0.0, &v1(0.0), &v1(0.0), 0.1, &[&abs]).unwrap();
        assert_eq!(e.a, 0.1);
    }

    #[test]
    fn interval_errors() {
        let bare = SecondOrderRhs::new(1, |_, _, _| Ok(Vector::zeros(1)));
        assert!(matches!(existence_interval(&bare, 0.0, &v1(0.0), &v1(0.0), 1.0, &[&abs]), Err(GeoError::MissingLipschitz)));
        let rhs = bare.clone().with_lipschitz(1.0).unwrap();
        assert!(existence_interval(&rhs, 0.0, &v1(0.0), &v1(0.0), 0.0, &[&abs]).is_err());
        assert!(existence_interval(&rhs, 0.0, &v1(0.0), &v1(0.0), 1.0, &[]).is_err());
        let huge = SecondOrderRhs::new(1, |_, _, _| Ok(v1(f64::MAX))).with_lipschitz(1.0).unwrap();
        assert_eq!(existence_interval(&huge, 0.0, &v1(0.0), &v1(f64::MAX), 1.0, &[&abs]), Err(GeoError::UnboundedData));
    }

    #[test]
    fn interval_monotone_in_k_and_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c: f64 = rng.random_range(0.0..3.0);
            let k1: f64 = rng.random_range(0.1..3.0);
            let k2 = k1 + rng.random_range(0.0..3.0);
            let tau = rng.random_range(0.05..2.0);
            let a = |k: f64, scale: f64| {
                let rhs = SecondOrderRhs::new(1, move |_, x, _| Ok(x * c)).with_lipschitz(k).unwrap();
                existence_interval(&rhs, 0.0, &v1(scale), &v1(scale), tau, &[&abs]).unwrap().a
            };
            assert!(a(k2, 1.0) <= a(k1, 1.0));
            assert!(a(k1, 2.0) <= a(k1, 1.0));
        }
    }

    #[test]
    fn tower_interval_takes_sup_over_levels() {
        let tower = Tower::drop_last(&[1, 2, 3]).unwrap();
        let family: Vec<_> = (1..=3)
            .map(|n| SecondOrderRhs::new(n, |_, x, _| Ok(x.clone())).with_lipschitz(1.0).unwrap())
            .collect();
        let x0 = Vector::from_row_slice(&[1.0, 1.0, 1.0]);
        let e = tower_existence_interval(&tower, &family, 0.0, &x0, &Vector::zeros(3), 5.0).unwrap();
        let ms: Vec<f64> = e.per_level_m.iter().map(|&(_, m)| m).collect();
        assert!((ms[0] - 1.0).abs() < 1e-15 && (ms[2] - 3f64.sqrt()).abs() < 1e-15);
        assert!(e.sup_at_top);
        assert!((e.interval.a - 1.0 / (3f64.sqrt() + 1.0)).abs() < 1e-15);
    }

    fn oscillator() -> SecondOrderRhs {
        SecondOrderRhs::new(1, |_, x, _| Ok(-x))
    }

    #[test]
    fn free_particle_picard() {
        let rhs = SecondOrderRhs::new(1, |_, _, _| Ok(Vector::zeros(1)));
        let s = picard_solve(&rhs, 0.0, &v1(0.0), &v1(1.0), 1.0, PicardOptions::default()).unwrap();
        for (t, x) in s.trajectory.times.iter().zip(&s.trajectory.xs) {
            assert!((x[0] - t).abs() < 1e-15);
        }
        assert_eq!(s.iterations, 2);
        let z = picard_solve(&rhs, 0.0, &v1(0.0), &v1(0.0), 1.0, PicardOptions::default()).unwrap();
        assert!(z.trajectory.xs.iter().all(|x| x[0] == 0.0));
        assert_eq!(z.iterations, 1);
    }

    fn cosine_error(grid: usize, quadrature: Quadrature) -> f64 {
        let opts = PicardOptions { iters: 40, tol: 1e-14, grid, quadrature };
        let s = picard_solve(&oscillator(), 0.0, &v1(1.0), &v1(0.0), 0.5, opts).unwrap();
        s.trajectory
            .times
            .iter()
            .zip(&s.trajectory.xs)
            .map(|(t, x)| (x[0] - t.cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cosine_with_corrected_trapezoid_on_coarse_grid() {
        assert!(cosine_error(64, Quadrature::CorrectedTrapezoid) < 1e-6);
    }

    #[test]
    fn plain_trapezoid_error_is_second_order() {
        let coarse = cosine_error(64, Quadrature::Trapezoid);
        assert!(coarse > 1e-6 && coarse < 2e-6, "{coarse}");
        assert!(cosine_error(128, Quadrature::Trapezoid) < 1e-6);
        let ratio = coarse / cosine_error(128, Quadrature::Trapezoid);
        assert!((ratio - 4.0).abs() < 0.2);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let opts = PicardOptions { iters: 2, tol: 1e-14, ..Default::default() };
        match picard_solve(&oscillator(), 0.0, &v1(1.0), &v1(0.0), 0.5, opts) {
            Err(GeoError::NoConvergence { iterations: 2, residual }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn guarantee_flag() {
        let rhs = oscillator().with_lipschitz(1.0).unwrap();
        let ok = picard_solve(&rhs, 0.0, &v1(1.0), &v1(0.0), 0.4, PicardOptions::default()).unwrap();
        assert_eq!(ok.within_guarantee, Some(true));
        let wide = picard_solve(&rhs, 0.0, &v1(1.0), &v1(0.0), 0.9, PicardOptions::default()).unwrap();
        assert_eq!(wide.within_guarantee, Some(false));
    }

    #[test]
    fn picard_agrees_with_rk4() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (c1, c2, c3): (f64, f64, f64) =
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5));
            let rhs = SecondOrderRhs::new(2, move |t, x, y| {
                Ok(Vector::from_row_slice(&[
                    c1 * x[1] + c3 * y[0] * y[1],
                    c2 * x[0].sin() + (c3 * t).cos() * y[1],
                ]))
            });
            let x0 = Vector::from_row_slice(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let y0 = Vector::from_row_slice(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let a = 0.3;
            let opts = PicardOptions { iters: 60, tol: 1e-13, grid: 256, quadrature: Quadrature::Trapezoid };
            let p = picard_solve(&rhs, 0.0, &x0, &y0, a, opts).unwrap();
            let r = rk4_integrate(&rhs, 0.0, &x0, &y0, a, 256).unwrap();
            let px = &p.trajectory.xs[256..];
            for (xp, xr) in px.iter().zip(&r.xs) {
                assert!((xp - xr).amax() < 1e-6);
            }
        }
    }
}
