//! The geodesic equation `u_t = B_k(u, u)` of the right-invariant `H^k`
//! connection, solved pseudo-spectrally.

use std::fmt;
use std::sync::Arc;

use crate::calculus::{Matrix, Vector};
use crate::error::{check_dim, GeoError, Result};
use crate::ode::rk4_first_order;
use crate::tower::{Level, LevelFamilyBilinear, Tower};

use super::spectral::{ak_apply, ak_inverse, sobolev_seminorm, sobolev_weights, Fourier, SpectralState};

/// Spectral model at one resolution. Products are evaluated on a grid of
/// `4N` points and the result keeps modes `≤ ⌊2N/3⌋`.
#[derive(Clone)]
pub struct ChModel {
    k: usize,
    modes: usize,
    sobolev_n: usize,
    fourier: Fourier,
}

impl fmt::Debug for ChModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChModel")
            .field("k", &self.k)
            .field("modes", &self.modes)
            .field("sobolev_n", &self.sobolev_n)
            .field("grid", &self.fourier.size())
            .finish()
    }
}

impl ChModel {
    pub fn new(k: usize, modes: usize, sobolev_n: usize) -> Result<Self> {
        if modes == 0 {
            return Err(GeoError::InvalidArgument("spectral model needs at least one mode".into()));
        }
        Ok(Self {
            k,
            modes,
            sobolev_n,
            fourier: Fourier::new(4 * modes),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn sobolev_n(&self) -> usize {
        self.sobolev_n
    }

    /// Highest mode kept after a product.
    pub fn dealiased_modes(&self) -> usize {
        2 * self.modes / 3
    }

    pub fn dim(&self) -> usize {
        2 * self.modes + 1
    }

    fn check(&self, u: &SpectralState) -> Result<()> {
        check_dim("spectral state", self.dim(), u.coeffs().len())
    }

    /// `A_k⁻¹(2 v_x A_k u + v A_k u_x)`.
    pub fn bk_apply(&self, u: &SpectralState, v: &SpectralState) -> Result<SpectralState> {
        self.check(u)?;
        self.check(v)?;
        SpectralState::new(self.bk_coeffs(u.coeffs(), v.coeffs()))
    }

    /// Unchecked coefficient form of [`Self::bk_apply`].
    pub(crate) fn bk_coeffs(&self, u: &Vector, v: &Vector) -> Vector {
        let u = SpectralState::new(u.clone()).expect("state of model dimension");
        let v = SpectralState::new(v.clone()).expect("state of model dimension");
        let au = ak_apply(&u, self.k);
        let aux = au.derivative();
        let vx = v.derivative();
        let (vx_g, au_g) = self.fourier.synthesize_pair(vx.coeffs(), au.coeffs());
        let (v_g, aux_g) = self.fourier.synthesize_pair(v.coeffs(), aux.coeffs());
        let w: Vec<f64> = (0..self.fourier.size())
            .map(|j| 2.0 * vx_g[j] * au_g[j] + v_g[j] * aux_g[j])
            .collect();
        let product = self.fourier.analyze(&w, self.modes, self.dealiased_modes());
        let product = SpectralState::new(product).expect("finite product");
        ak_inverse(&product, self.k).into_coeffs()
    }

    pub fn rhs(&self, u: &SpectralState) -> Result<SpectralState> {
        self.bk_apply(u, u)
    }

    /// `Σ_m A_k(m)(a_m² + b_m²)·π`, the `m = 0` term weighted by `2π`.
    pub fn energy(&self, u: &SpectralState) -> f64 {
        sobolev_seminorm(u, self.k).powi(2)
    }

    pub fn seminorm(&self, u: &SpectralState) -> f64 {
        sobolev_seminorm(u, self.sobolev_n)
    }

    /// RK4 on `[0, t_end]`.
    pub fn integrate(&self, u0: &SpectralState, t_end: f64, steps: usize) -> Result<ChRun> {
        self.check(u0)?;
        let path = rk4_first_order(
            |_, u| Ok(self.bk_coeffs(u, u)),
            0.0,
            u0.coeffs(),
            t_end,
            steps,
        )?;
        let states = path
            .states
            .into_iter()
            .map(SpectralState::new)
            .collect::<Result<Vec<_>>>()?;
        let energies = states.iter().map(|s| self.energy(s)).collect();
        Ok(ChRun {
            times: path.times,
            states,
            energies,
        })
    }
}

pub fn bk_apply(u: &SpectralState, v: &SpectralState, model: &ChModel) -> Result<SpectralState> {
    model.bk_apply(u, v)
}

pub fn ch_rhs(u: &SpectralState, model: &ChModel) -> Result<SpectralState> {
    model.rhs(u)
}

#[derive(Debug, Clone)]
pub struct ChRun {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
    pub energies: Vec<f64>,
}

impl ChRun {
    /// `max_t |E(t) − E(0)| / E(0)`, or the absolute drift when `E(0) = 0`.
    pub fn relative_energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        let scale = if e0 > 0.0 { e0 } else { 1.0 };
        self.energies
            .iter()
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> &SpectralState {
        self.states.last().expect("run holds the initial state")
    }
}

/// Spectral tower: one level per resolution, coarsest first, connected by
/// mode truncation, with level seminorms of the requested Sobolev order.
#[derive(Debug, Clone)]
pub struct ChTower {
    pub tower: Tower,
    pub family: LevelFamilyBilinear,
    pub models: Vec<ChModel>,
}

/// Builds the tower from `(N, n)` pairs listed from finest to coarsest.
pub fn ch_tower(k: usize, depths: &[(usize, usize)]) -> Result<ChTower> {
    if depths.is_empty() {
        return Err(GeoError::InvalidTower("spectral tower needs at least one level".into()));
    }
    if depths.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(GeoError::InvalidTower(format!(
            "mode counts must strictly decrease along the list, got {:?}",
            depths.iter().map(|d| d.0).collect::<Vec<_>>()
        )));
    }
    let models = depths
        .iter()
        .rev()
        .map(|&(modes, n)| ChModel::new(k, modes, n))
        .collect::<Result<Vec<_>>>()?;
    let levels = models
        .iter()
        .enumerate()
        .map(|(p, m)| Level::new(p, m.dim(), sobolev_weights(m.modes(), m.sobolev_n())))
        .collect::<Result<Vec<_>>>()?;
    let adjacent = models
        .windows(2)
        .map(|w| Matrix::identity(w[0].dim(), w[1].dim()))
        .collect();
    let tower = Tower::new(levels, adjacent)?;
    let shared = Arc::new(models.clone());
    let family = LevelFamilyBilinear::from_fn(models.len(), move |p, x, y| shared[p].bk_coeffs(x, y));
    Ok(ChTower { tower, family, models })
}
