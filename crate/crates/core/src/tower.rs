//! Projective systems of finite-dimensional levels.
//!
//! A [`Tower`] stores its levels in increasing index order together with the
//! connecting map from each level onto the one directly below it. Maps
//! between non-adjacent levels are always obtained by composing adjacent
//! ones, so `ρ_ki = ρ_ji ∘ ρ_kj` holds by construction for derived maps.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{random_vector, Matrix, Vector};
use crate::error::{check_dim, GeoError, Result};
use crate::kv::{ConfigError, KvDocument};
use crate::par::Execution;

/// Default number of random probes for compatibility checks.
pub const DEFAULT_PROBES: usize = 32;

/// One level `E_i = R^dim` with the seminorm `p_i(x) = sqrt(Σ w_k x_k²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    index: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Level {
    pub fn new(index: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GeoError::InvalidTower(format!("level {index} has dimension 0")));
        }
        check_dim("level weights", dim, weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GeoError::InvalidTower(format!(
                "level {index} has a negative or non-finite seminorm weight"
            )));
        }
        Ok(Self { index, dim, weights })
    }

    /// Level with unit weights (Euclidean seminorm).
    pub fn euclidean(index: usize, dim: usize) -> Result<Self> {
        Self::new(index, dim, vec![1.0; dim])
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seminorm(&self, x: &Vector) -> Result<f64> {
        check_dim("seminorm argument", self.dim, x.len())?;
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * xi * xi)
            .sum::<f64>()
            .sqrt())
    }
}

/// Linear map from level `from_index` onto level `to_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectingMap {
    pub from_index: usize,
    pub to_index: usize,
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    levels: Vec<Level>,
    /// `adjacent[p]` maps level `p + 1` onto level `p`.
    adjacent: Vec<Matrix>,
}

impl Tower {
    /// `adjacent[p]` must map `levels[p + 1]` onto `levels[p]`.
    pub fn new(levels: Vec<Level>, adjacent: Vec<Matrix>) -> Result<Self> {
        if levels.is_empty() {
            return Err(GeoError::InvalidTower("a tower needs at least one level".into()));
        }
        if adjacent.len() + 1 != levels.len() {
            return Err(GeoError::InvalidTower(format!(
                "{} levels need {} adjacent maps, got {}",
                levels.len(),
                levels.len() - 1,
                adjacent.len()
            )));
        }
        for pair in levels.windows(2) {
            if pair[1].index <= pair[0].index {
                return Err(GeoError::InvalidTower(
                    "level indices must be strictly increasing".into(),
                ));
            }
        }
        for (p, m) in adjacent.iter().enumerate() {
            let (lo, hi) = (&levels[p], &levels[p + 1]);
            if m.shape() != (lo.dim, hi.dim) {
                return Err(GeoError::InvalidTower(format!(
                    "map {} -> {} has shape {:?}, expected ({}, {})",
                    hi.index,
                    lo.index,
                    m.shape(),
                    lo.dim,
                    hi.dim
                )));
            }
        }
        Ok(Self { levels, adjacent })
    }

    /// Nested coordinate projections keeping the leading coordinates.
    /// `dims` must be strictly increasing; levels get indices `0, 1, ...`.
    pub fn drop_last(dims: &[usize]) -> Result<Self> {
        let levels = dims
            .iter()
            .enumerate()
            .map(|(i, &d)| Level::euclidean(i, d))
            .collect::<Result<Vec<_>>>()?;
        let adjacent = dims
            .windows(2)
            .map(|w| {
                if w[1] < w[0] {
                    return Err(GeoError::InvalidTower(
                        "drop-last dims must be non-decreasing".into(),
                    ));
                }
                Ok(Matrix::identity(w[0], w[1]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, adjacent)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// The deepest (highest-index) level.
    pub fn top(&self) -> &Level {
        self.levels.last().unwrap()
    }

    pub fn position(&self, index: usize) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.index == index)
            .ok_or(GeoError::UnknownLevel(index))
    }

    pub fn level(&self, index: usize) -> Result<&Level> {
        Ok(&self.levels[self.position(index)?])
    }

    /// Stored adjacent maps as [`ConnectingMap`] values.
    pub fn adjacent_maps(&self) -> Vec<ConnectingMap> {
        self.adjacent
            .iter()
            .enumerate()
            .map(|(p, m)| ConnectingMap {
                from_index: self.levels[p + 1].index,
                to_index: self.levels[p].index,
                matrix: m.clone(),
            })
            .collect()
    }

    /// `ρ_ji` by composition of adjacent maps, with `p_from >= p_to`
    /// given as positions.
    fn map_by_position(&self, p_from: usize, p_to: usize) -> Matrix {
        let mut m = Matrix::identity(self.levels[p_from].dim, self.levels[p_from].dim);
        for p in (p_to..p_from).rev() {
            m = &self.adjacent[p] * m;
        }
        m
    }

    /// Connecting map `ρ_ji` from level `j` onto level `i`.
    pub fn map(&self, j: usize, i: usize) -> Result<Matrix> {
        let (pj, pi) = (self.position(j)?, self.position(i)?);
        if pi > pj {
            return Err(GeoError::InvalidProjection { from: j, to: i });
        }
        Ok(self.map_by_position(pj, pi))
    }

    pub fn seminorm(&self, x: &Vector, i: usize) -> Result<f64> {
        self.level(i)?.seminorm(x)
    }

    pub(crate) fn map_at(&self, p_from: usize, p_to: usize) -> Matrix {
        self.map_by_position(p_from, p_to)
    }

    /// Reads a tower from `prefix.*` keys:
    ///
    /// ```text
    /// tower.dims = 2, 3, 4            # drop-last shortcut, or:
    /// tower.levels = 2
    /// tower.level.0.dim = 2
    /// tower.level.0.index = 1         # optional, default = position
    /// tower.level.0.weights = 1, 1    # optional, default = ones
    /// tower.map.1 = 1,0,0, 0,1,0      # row-major, level 1 onto level 0
    /// ```
    pub fn from_kv(doc: &mut KvDocument, prefix: &str) -> std::result::Result<Self, ConfigError> {
        let key = |k: &str| format!("{prefix}.{k}");
        let wrap = |field: String, line: Option<usize>, e: GeoError| {
            ConfigError::new(line, field, e.to_string())
        };
        if let Some(dims) = doc.take_usize_list(&key("dims"))? {
            let line = doc.line_of(&key("dims"));
            return Tower::drop_last(&dims).map_err(|e| wrap(key("dims"), line, e));
        }
        let count = doc
            .take_usize(&key("levels"))?
            .ok_or_else(|| ConfigError::new(None, key("levels"), "missing level count"))?;
        let mut levels = Vec::with_capacity(count);
        for p in 0..count {
            let dim_key = key(&format!("level.{p}.dim"));
            let dim = doc
                .take_usize(&dim_key)?
                .ok_or_else(|| ConfigError::new(None, dim_key.clone(), "missing dimension"))?;
            let index = doc.take_usize(&key(&format!("level.{p}.index")))?.unwrap_or(p);
            let wkey = key(&format!("level.{p}.weights"));
            let line = doc.line_of(&wkey);
            let weights = doc.take_list(&wkey)?.unwrap_or_else(|| vec![1.0; dim]);
            levels.push(Level::new(index, dim, weights).map_err(|e| wrap(wkey, line, e))?);
        }
        let mut adjacent = Vec::new();
        for p in 1..count {
            let mkey = key(&format!("map.{p}"));
            let line = doc.line_of(&mkey);
            let entries = doc
                .take_list(&mkey)?
                .ok_or_else(|| ConfigError::new(None, mkey.clone(), "missing adjacent map"))?;
            let (rows, cols) = (levels[p - 1].dim, levels[p].dim);
            if entries.len() != rows * cols {
                return Err(ConfigError::new(
                    line,
                    mkey,
                    format!("expected {} entries ({rows}x{cols}), got {}", rows * cols, entries.len()),
                ));
            }
            adjacent.push(Matrix::from_row_slice(rows, cols, &entries));
        }
        Tower::new(levels, adjacent).map_err(|e| wrap(key("levels"), None, e))
    }
}

/// `ρ_ji(x)` for `x` at level `j`.
pub fn project_element(x: &Vector, j: usize, i: usize, tower: &Tower) -> Result<Vector> {
    let (pj, pi) = (tower.position(j)?, tower.position(i)?);
    if pi > pj {
        return Err(GeoError::InvalidProjection { from: j, to: i });
    }
    check_dim("projected element", tower.levels[pj].dim, x.len())?;
    let mut y = x.clone();
    for p in (pi..pj).rev() {
        y = &tower.adjacent[p] * y;
    }
    Ok(y)
}

/// Residual of `ρ_ji ∘ ρ_kj − ρ_ki` for one triple `k > j > i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceEntry {
    pub k: usize,
    pub j: usize,
    pub i: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub entries: Vec<CoherenceEntry>,
    pub tol: f64,
}

impl CoherenceReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.residual <= self.tol)
    }
}

/// Checks composition coherence of the tower's own derived maps.
pub fn check_composition_coherence(tower: &Tower, tol: f64) -> CoherenceReport {
    check_coherence_with(tower, tol, |pk, pi| tower.map_by_position(pk, pi))
}

/// Coherence check against an arbitrary map provider `(p_from, p_to) ->
/// matrix` over level positions. Residuals are Frobenius norms.
pub fn check_coherence_with<F>(tower: &Tower, tol: f64, maps: F) -> CoherenceReport
where
    F: Fn(usize, usize) -> Matrix,
{
    let n = tower.depth();
    let mut entries = Vec::new();
    for pk in 0..n {
        for pj in 0..pk {
            for pi in 0..pj {
                let composed = maps(pj, pi) * maps(pk, pj);
                let residual = (composed - maps(pk, pi)).norm();
                entries.push(CoherenceEntry {
                    k: tower.levels[pk].index,
                    j: tower.levels[pj].index,
                    i: tower.levels[pi].index,
                    residual,
                });
            }
        }
    }
    CoherenceReport { entries, tol }
}

type LevelFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type LevelBilinearFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// One map `f_i: E_i → E_i` per tower level, ordered by level position.
#[derive(Clone)]
pub struct LevelFamilyMap {
    maps: Vec<Arc<LevelFn>>,
}

impl fmt::Debug for LevelFamilyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelFamilyMap({} levels)", self.maps.len())
    }
}

impl LevelFamilyMap {
    pub fn new(maps: Vec<Arc<LevelFn>>) -> Self {
        Self { maps }
    }

    /// Builds the family from one closure receiving the level position.
    pub fn from_fn<F>(depth: usize, f: F) -> Self
    where
        F: Fn(usize, &Vector) -> Vector + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let maps = (0..depth)
            .map(|p| {
                let f = Arc::clone(&f);
                Arc::new(move |x: &Vector| f(p, x)) as Arc<LevelFn>
            })
            .collect();
        Self { maps }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn apply(&self, position: usize, x: &Vector) -> Vector {
        (self.maps[position])(x)
    }

    /// Level-wise composition `self ∘ inner`.
    pub fn compose(&self, inner: &LevelFamilyMap) -> LevelFamilyMap {
        let maps = self
            .maps
            .iter()
            .zip(&inner.maps)
            .map(|(outer, inner)| {
                let (outer, inner) = (Arc::clone(outer), Arc::clone(inner));
                Arc::new(move |x: &Vector| outer(&inner(x))) as Arc<LevelFn>
            })
            .collect();
        LevelFamilyMap { maps }
    }
}

/// One bilinear map `B_i: E_i × E_i → E_i` per tower level.
#[derive(Clone)]
pub struct LevelFamilyBilinear {
    maps: Vec<Arc<LevelBilinearFn>>,
}

impl fmt::Debug for LevelFamilyBilinear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelFamilyBilinear({} levels)", self.maps.len())
    }
}

impl LevelFamilyBilinear {
    pub fn new(maps: Vec<Arc<LevelBilinearFn>>) -> Self {
        Self { maps }
    }

    pub fn from_fn<F>(depth: usize, f: F) -> Self
    where
        F: Fn(usize, &Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let maps = (0..depth)
            .map(|p| {
                let f = Arc::clone(&f);
                Arc::new(move |x: &Vector, y: &Vector| f(p, x, y)) as Arc<LevelBilinearFn>
            })
            .collect();
        Self { maps }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn apply(&self, position: usize, x: &Vector, y: &Vector) -> Vector {
        (self.maps[position])(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub max_residual: f64,
}

/// Probe sampler: `(level position, dim, rng) -> random level vector`.
pub type Sampler<'a> = &'a (dyn Fn(usize, usize, &mut ChaCha8Rng) -> Vector + Sync);

pub(crate) fn uniform_sampler(_: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    random_vector(rng, dim)
}

/// Probabilistic check of `ρ_ji ∘ f_j = f_i ∘ ρ_ji` for all `i < j`.
pub fn is_compatible_map(
    f: &LevelFamilyMap,
    tower: &Tower,
    probes: usize,
    tol: f64,
    seed: u64,
) -> Result<CompatibilityReport> {
    is_compatible_map_with(f, tower, probes, tol, seed, &uniform_sampler, Execution::default())
}

pub fn is_compatible_map_with(
    f: &LevelFamilyMap,
    tower: &Tower,
    probes: usize,
    tol: f64,
    seed: u64,
    sampler: Sampler<'_>,
    exec: Execution,
) -> Result<CompatibilityReport> {
    check_dim("level family size", tower.depth(), f.len())?;
    if probes == 0 {
        return Err(GeoError::InvalidArgument("probes must be at least 1".into()));
    }
    let residuals = crate::par::try_map_indexed(exec, tower.depth(), |pj| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pj as u64).wrapping_mul(0x9E37_79B9));
        let level = &tower.levels[pj];
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let x = sampler(pj, level.dim, &mut rng);
            let fx = f.apply(pj, &x);
            check_dim("level map value", level.dim, fx.len())?;
            for pi in 0..pj {
                let rho = tower.map_by_position(pj, pi);
                let lhs = &rho * &fx;
                let rhs = f.apply(pi, &(&rho * &x));
                check_dim("level map value", tower.levels[pi].dim, rhs.len())?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(worst)
    })?;
    let max_residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(CompatibilityReport {
        compatible: max_residual <= tol,
        max_residual,
    })
}

/// Probabilistic check of `ρ_ji ∘ B_j = B_i ∘ (ρ_ji × ρ_ji)`.
pub fn is_compatible_bilinear(
    b: &LevelFamilyBilinear,
    tower: &Tower,
    probes: usize,
    tol: f64,
    seed: u64,
) -> Result<CompatibilityReport> {
    is_compatible_bilinear_with(b, tower, probes, tol, seed, &uniform_sampler, Execution::default())
}

pub fn is_compatible_bilinear_with(
    b: &LevelFamilyBilinear,
    tower: &Tower,
    probes: usize,
    tol: f64,
    seed: u64,
    sampler: Sampler<'_>,
    exec: Execution,
) -> Result<CompatibilityReport> {
    check_dim("level family size", tower.depth(), b.len())?;
    if probes == 0 {
        return Err(GeoError::InvalidArgument("probes must be at least 1".into()));
    }
    let residuals = crate::par::try_map_indexed(exec, tower.depth(), |pj| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pj as u64).wrapping_mul(0x9E37_79B9));
        let level = &tower.levels[pj];
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let x = sampler(pj, level.dim, &mut rng);
            let y = sampler(pj, level.dim, &mut rng);
            let bxy = b.apply(pj, &x, &y);
            check_dim("level bilinear value", level.dim, bxy.len())?;
            for pi in 0..pj {
                let rho = tower.map_by_position(pj, pi);
                let lhs = &rho * &bxy;
                let rhs = b.apply(pi, &(&rho * &x), &(&rho * &y));
                check_dim("level bilinear value", tower.levels[pi].dim, rhs.len())?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(worst)
    })?;
    let max_residual = residuals.into_iter().fold(0.0, f64::max);
    Ok(CompatibilityReport {
        compatible: max_residual <= tol,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn tower_432() -> Tower {
        Tower::new(
            vec![
                Level::euclidean(1, 2).unwrap(),
                Level::euclidean(2, 3).unwrap(),
                Level::euclidean(3, 4).unwrap(),
            ],
            vec![Matrix::identity(2, 3), Matrix::identity(3, 4)],
        )
        .unwrap()
    }

    #[test]
    fn project_drop_last() {
        let t = Tower::new(
            vec![Level::euclidean(1, 2).unwrap(), Level::euclidean(2, 3).unwrap()],
            vec![Matrix::identity(2, 3)],
        )
        .unwrap();
        assert_eq!(project_element(&v(&[1.0, 2.0, 3.0]), 2, 1, &t).unwrap(), v(&[1.0, 2.0]));
        assert_eq!(project_element(&Vector::zeros(3), 2, 1, &t).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn project_two_steps_matches_hand_composition() {
        let t = tower_432();
        let x = v(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(project_element(&x, 3, 1, &t).unwrap(), v(&[1.0, 2.0]));
        let by_hand = Matrix::identity(2, 3) * Matrix::identity(3, 4);
        assert_eq!(t.map(3, 1).unwrap(), by_hand);
    }

    #[test]
    fn projection_errors() {
        let t = tower_432();
        assert_eq!(
            project_element(&v(&[1.0, 2.0]), 1, 3, &t).unwrap_err(),
            GeoError::InvalidProjection { from: 1, to: 3 }
        );
        assert_eq!(
            project_element(&v(&[1.0, 2.0]), 7, 1, &t).unwrap_err(),
            GeoError::UnknownLevel(7)
        );
        assert!(matches!(
            project_element(&v(&[1.0, 2.0]), 3, 1, &t).unwrap_err(),
            GeoError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn invalid_towers_rejected() {
        assert!(Tower::new(vec![], vec![]).is_err());
        assert!(Level::new(0, 0, vec![]).is_err());
        assert!(Level::new(0, 2, vec![1.0, -1.0]).is_err());
        assert!(Tower::new(
            vec![Level::euclidean(2, 2).unwrap(), Level::euclidean(1, 3).unwrap()],
            vec![Matrix::identity(2, 3)]
        )
        .is_err());
        assert!(Tower::new(
            vec![Level::euclidean(0, 2).unwrap(), Level::euclidean(1, 3).unwrap()],
            vec![Matrix::identity(3, 2)]
        )
        .is_err());
    }

    #[test]
    fn coherence_exact_for_nested_projections() {
        let report = check_composition_coherence(&tower_432(), 1e-12);
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.max_residual(), 0.0);
        assert!(report.passed());
    }

    #[test]
    fn coherence_detects_injected_perturbation() {
        let t = tower_432();
        let report = check_coherence_with(&t, 1e-12, |pk, pi| {
            let mut m = t.map_at(pk, pi);
            if (pk, pi) == (2, 0) {
                m[(0, 0)] += 1e-3;
            }
            m
        });
        assert!((report.max_residual() - 1e-3).abs() < 1e-15);
        assert!(!report.passed());
    }

    #[test]
    fn single_level_has_empty_report() {
        let t = Tower::drop_last(&[3]).unwrap();
        let report = check_composition_coherence(&t, 1e-12);
        assert!(report.entries.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn identity_and_scaling_are_compatible() {
        let t = tower_432();
        let id = LevelFamilyMap::from_fn(3, |_, x| x.clone());
        let r = is_compatible_map(&id, &t, 8, 1e-12, 1).unwrap();
        assert!(r.compatible);
        assert_eq!(r.max_residual, 0.0);
        let twice = LevelFamilyMap::from_fn(3, |_, x| x * 2.0);
        assert!(is_compatible_map(&twice, &t, 8, 1e-12, 1).unwrap().compatible);
    }

    #[test]
    fn squaring_last_coordinate_only_where_dropped() {
        let t = Tower::drop_last(&[1, 2]).unwrap();
        let good = LevelFamilyMap::from_fn(2, |p, x| {
            if p == 1 {
                v(&[x[0], x[1] * x[1]])
            } else {
                x.clone()
            }
        });
        assert!(is_compatible_map(&good, &t, 16, 1e-12, 3).unwrap().compatible);
        let bad = LevelFamilyMap::from_fn(2, |p, x| {
            if p == 1 {
                v(&[x[0], x[1] * x[1]])
            } else {
                x.map(|s| s * s)
            }
        });
        let r = is_compatible_map(&bad, &t, 16, 1e-12, 3).unwrap();
        assert!(!r.compatible);
        assert!(r.max_residual > 0.0);
        // At x = (2, 3): left side 2, right side 4.
        let x = v(&[2.0, 3.0]);
        let lhs = project_element(&bad.apply(1, &x), 1, 0, &t).unwrap();
        let rhs = bad.apply(0, &project_element(&x, 1, 0, &t).unwrap());
        assert_eq!((lhs[0], rhs[0]), (2.0, 4.0));
    }

    #[test]
    fn bilinear_compatibility_examples() {
        let t = Tower::drop_last(&[1, 2]).unwrap();
        let prod = LevelFamilyBilinear::from_fn(2, |_, a, b| a.component_mul(b));
        assert!(is_compatible_bilinear(&prod, &t, 16, 1e-12, 5).unwrap().compatible);
        let zero = LevelFamilyBilinear::from_fn(2, |_, a, _| Vector::zeros(a.len()));
        assert!(is_compatible_bilinear(&zero, &t, 16, 1e-12, 5).unwrap().compatible);
        let swapped = LevelFamilyBilinear::from_fn(2, |p, a, b| {
            if p == 1 {
                v(&[a[1] * b[1], a[0] * b[0]])
            } else {
                a.component_mul(b)
            }
        });
        assert!(!is_compatible_bilinear(&swapped, &t, 16, 1e-12, 5).unwrap().compatible);
        let (a, b) = (v(&[1.0, 2.0]), v(&[3.0, 4.0]));
        let lhs = project_element(&swapped.apply(1, &a, &b), 1, 0, &t).unwrap()[0];
        let rhs = swapped.apply(0, &v(&[1.0]), &v(&[3.0]))[0];
        assert_eq!((lhs, rhs), (8.0, 3.0));
    }

    #[test]
    fn seminorm_examples() {
        let t = Tower::drop_last(&[2]).unwrap();
        assert_eq!(t.seminorm(&v(&[3.0, 4.0]), 0).unwrap(), 5.0);
        assert_eq!(t.seminorm(&Vector::zeros(2), 0).unwrap(), 0.0);
        assert!(t.seminorm(&Vector::zeros(3), 0).is_err());
    }

    #[test]
    fn zero_probes_rejected() {
        let t = Tower::drop_last(&[1, 2]).unwrap();
        let id = LevelFamilyMap::from_fn(2, |_, x| x.clone());
        assert!(is_compatible_map(&id, &t, 0, 1e-12, 0).is_err());
    }

    #[test]
    fn tower_from_config() {
        let mut doc = KvDocument::parse(
            "tower.levels = 2\n\
             tower.level.0.dim = 2\n\
             tower.level.0.weights = 1, 4\n\
             tower.level.1.dim = 3\n\
             tower.level.1.index = 5\n\
             tower.map.1 = 1,0,0, 0,1,0\n",
        )
        .unwrap();
        let t = Tower::from_kv(&mut doc, "tower").unwrap();
        doc.finish().unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.top().index(), 5);
        assert_eq!(t.seminorm(&v(&[1.0, 1.0]), 0).unwrap(), 5f64.sqrt());
        assert_eq!(project_element(&v(&[1.0, 2.0, 3.0]), 5, 0, &t).unwrap(), v(&[1.0, 2.0]));

        let mut bad = KvDocument::parse("tower.levels = 2\ntower.level.0.dim = 2\ntower.level.1.dim = 3\ntower.map.1 = 1, 0\n").unwrap();
        let err = Tower::from_kv(&mut bad, "tower").unwrap_err();
        assert_eq!(err.field, "tower.map.1");
        assert_eq!(err.line, Some(4));
    }
}
