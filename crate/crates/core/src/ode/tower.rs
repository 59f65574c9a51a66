use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::Vector;
use crate::error::{check_dim, Result};
use crate::par::{try_map_indexed, Execution};
use crate::structures::ChristoffelField;
use crate::tower::{is_compatible_bilinear_with, uniform_sampler, LevelFamilyBilinear, Sampler, Tower, DEFAULT_PROBES};

use super::{geodesic, rk4_first_order, LevelTag, Trajectory};

#[derive(Clone, Copy)]
pub struct TowerOptions<'a> {
    pub probes: usize,
    pub tol: f64,
    pub seed: u64,
    pub exec: Execution,
    /// Probe sampler for the compatibility check; uniform on `[-1, 1]^dim`
    /// when absent.
    pub sampler: Option<Sampler<'a>>,
}

impl Default for TowerOptions<'_> {
    fn default() -> Self {
        Self {
            probes: DEFAULT_PROBES,
            tol: 1e-8,
            seed: 42,
            exec: Execution::default(),
            sampler: None,
        }
    }
}

/// `‖ρ_ji(γ_j(t)) − γ_i(t)‖` at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEntry {
    pub t: f64,
    pub j: usize,
    pub i: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct TowerTrajectory {
    /// One trajectory per level, coarsest first.
    pub levels: Vec<Trajectory>,
    pub residuals: Vec<ResidualEntry>,
    /// Maximum residual of the pointwise compatibility probe.
    pub compatibility_residual: f64,
    pub warnings: Vec<String>,
}

impl TowerTrajectory {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn times(&self) -> &[f64] {
        self.levels.first().map_or(&[], |t| &t.times)
    }
}

fn projected_initial_data(tower: &Tower, top: &Vector) -> Result<Vec<Vector>> {
    check_dim("top-level initial data", tower.top().dim(), top.len())?;
    let p_top = tower.depth() - 1;
    Ok((0..tower.depth()).map(|p| tower.map_at(p_top, p) * top).collect())
}

fn consistency_residuals(tower: &Tower, levels: &[Trajectory]) -> Vec<ResidualEntry> {
    let mut out = Vec::new();
    let times = &levels[0].times;
    let maps: Vec<Vec<_>> = (0..tower.depth())
        .map(|pj| (0..pj).map(|pi| tower.map_at(pj, pi)).collect())
        .collect();
    for (step, &t) in times.iter().enumerate() {
        for pj in 1..tower.depth() {
            for pi in 0..pj {
                let r = (&maps[pj][pi] * &levels[pj].xs[step] - &levels[pi].xs[step]).norm();
                out.push(ResidualEntry {
                    t,
                    j: tower.levels()[pj].index(),
                    i: tower.levels()[pi].index(),
                    residual: r,
                });
            }
        }
    }
    out
}

fn compatibility_warning(residual: f64, tol: f64) -> Vec<String> {
    if residual > tol {
        let w = format!("level family is not compatible: probe residual {residual:e} exceeds {tol:e}");
        log::warn!("{w}");
        vec![w]
    } else {
        Vec::new()
    }
}

/// Pointwise probe of `ρ_ji Γ_j(u)(a, b) = Γ_i(ρ_ji u)(ρ_ji a, ρ_ji b)`.
fn christoffel_compatibility(family: &[ChristoffelField], tower: &Tower, opts: &TowerOptions) -> Result<f64> {
    let sampler = opts.sampler.unwrap_or(&uniform_sampler);
    let worst = try_map_indexed(opts.exec, tower.depth(), |pj| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (pj as u64).wrapping_mul(0x9E37_79B9));
        let dim = tower.levels()[pj].dim();
        let mut worst: f64 = 0.0;
        for _ in 0..opts.probes {
            let (u, a, b) = (sampler(pj, dim, &mut rng), sampler(pj, dim, &mut rng), sampler(pj, dim, &mut rng));
            let top = family[pj].apply(&u, &a, &b)?;
            for (pi, lower) in family.iter().enumerate().take(pj) {
                let rho = tower.map_at(pj, pi);
                let low = lower.apply(&(&rho * &u), &(&rho * &a), &(&rho * &b))?;
                worst = worst.max((&rho * &top - low).norm());
            }
        }
        Ok(worst)
    })?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Integrates the geodesic equation independently on every level from the
/// projected top-level data and reports level-consistency residuals.
pub fn tower_geodesic(
    family: &[ChristoffelField],
    tower: &Tower,
    x0: &Vector,
    y0: &Vector,
    t_end: f64,
    steps: usize,
    opts: TowerOptions,
) -> Result<TowerTrajectory> {
    check_dim("Christoffel family size", tower.depth(), family.len())?;
    for (g, level) in family.iter().zip(tower.levels()) {
        check_dim("level Christoffel field", level.dim(), g.dim())?;
    }
    let compat = christoffel_compatibility(family, tower, &opts)?;
    let xs = projected_initial_data(tower, x0)?;
    let ys = projected_initial_data(tower, y0)?;
    let levels = try_map_indexed(opts.exec, tower.depth(), |p| {
        geodesic(&family[p], &xs[p], &ys[p], t_end, steps)
            .map(|tr| tr.with_level(LevelTag::Index(tower.levels()[p].index())))
    })?;
    Ok(TowerTrajectory {
        residuals: consistency_residuals(tower, &levels),
        levels,
        compatibility_residual: compat,
        warnings: compatibility_warning(compat, opts.tol),
    })
}

/// Integrates the first-order flow `u' = B_i(u, u)` on every level. The
/// `y` columns of each trajectory hold the rate `B_i(u, u)`.
pub fn tower_flow(
    family: &LevelFamilyBilinear,
    tower: &Tower,
    u0: &Vector,
    t_end: f64,
    steps: usize,
    opts: TowerOptions,
) -> Result<TowerTrajectory> {
    let sampler = opts.sampler.unwrap_or(&uniform_sampler);
    let report = is_compatible_bilinear_with(family, tower, opts.probes, opts.tol, opts.seed, sampler, opts.exec)?;
    let us = projected_initial_data(tower, u0)?;
    let levels = try_map_indexed(opts.exec, tower.depth(), |p| -> Result<Trajectory> {
        let dim = tower.levels()[p].dim();
        let rate = |_: f64, u: &Vector| -> Result<Vector> {
            let v = family.apply(p, u, u);
            check_dim("level flow rate", dim, v.len())?;
            Ok(v)
        };
        let path = rk4_first_order(rate, 0.0, &us[p], t_end, steps)?;
        let ys = path.states.iter().map(|u| rate(0.0, u)).collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            times: path.times,
            xs: path.states,
            ys,
            level: LevelTag::Index(tower.levels()[p].index()),
        })
    })?;
    Ok(TowerTrajectory {
        residuals: consistency_residuals(tower, &levels),
        levels,
        compatibility_residual: report.max_residual,
        warnings: compatibility_warning(report.max_residual, opts.tol),
    })
}
