//! Real trigonometric states on the circle and their Fourier multipliers.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::calculus::Vector;
use crate::error::{GeoError, Result};

/// `u(x) = a0 + Σ_{m=1}^{N} (a_m cos mx + b_m sin mx)`, stored as
/// `(a0, a1, b1, …, aN, bN)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    coeffs: Vector,
}

impl SpectralState {
    pub fn new(coeffs: Vector) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(GeoError::InvalidArgument(format!(
                "spectral state needs an odd number of coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::NonFinite("spectral coefficients"));
        }
        Ok(Self { coeffs })
    }

    pub fn from_slice(coeffs: &[f64]) -> Result<Self> {
        Self::new(Vector::from_row_slice(coeffs))
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            coeffs: Vector::zeros(2 * modes + 1),
        }
    }

    pub fn constant(modes: usize, c: f64) -> Self {
        let mut s = Self::zeros(modes);
        s.coeffs[0] = c;
        s
    }

    /// `amp·cos(m x)` with `modes ≥ m`.
    pub fn cosine(modes: usize, m: usize, amp: f64) -> Self {
        let mut s = Self::zeros(modes);
        if m == 0 {
            s.coeffs[0] = amp;
        } else {
            s.coeffs[2 * m - 1] = amp;
        }
        s
    }

    /// `amp·sin(m x)` with `1 ≤ m ≤ modes`.
    pub fn sine(modes: usize, m: usize, amp: f64) -> Self {
        let mut s = Self::zeros(modes);
        s.coeffs[2 * m] = amp;
        s
    }

    /// Random state with coefficients uniform in `[-1, 1]` up to `max_mode`
    /// and zero above, scaled by `1/(1 + m)²`.
    pub fn random_band_limited<R: Rng + ?Sized>(rng: &mut R, modes: usize, max_mode: usize) -> Self {
        let mut s = Self::zeros(modes);
        s.coeffs[0] = rng.random_range(-1.0..=1.0);
        for m in 1..=max_mode.min(modes) {
            let w = 1.0 / ((1 + m) * (1 + m)) as f64;
            s.coeffs[2 * m - 1] = w * rng.random_range(-1.0..=1.0);
            s.coeffs[2 * m] = w * rng.random_range(-1.0..=1.0);
        }
        s
    }

    /// Least-squares trigonometric fit of samples `u(2πj/M)`, `j < M`,
    /// which is exact for band-limited data when `M > 2·modes`.
    pub fn from_samples(samples: &[f64], modes: usize) -> Result<Self> {
        let m = samples.len();
        if m <= 2 * modes {
            return Err(GeoError::InvalidArgument(format!(
                "{m} samples cannot resolve {modes} modes; need more than {}",
                2 * modes
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(GeoError::NonFinite("spectral samples"));
        }
        let fourier = Fourier::new(m);
        Self::new(fourier.analyze(samples, modes, modes))
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &Vector {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vector {
        self.coeffs
    }

    /// `(a_m, b_m)`, with `b_0 = 0`.
    pub fn mode(&self, m: usize) -> (f64, f64) {
        if m == 0 {
            (self.coeffs[0], 0.0)
        } else if m <= self.modes() {
            (self.coeffs[2 * m - 1], self.coeffs[2 * m])
        } else {
            (0.0, 0.0)
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (1..=self.modes()).fold(self.coeffs[0], |acc, m| {
            let (a, b) = self.mode(m);
            let mx = m as f64 * x;
            acc + a * mx.cos() + b * mx.sin()
        })
    }

    /// Keeps modes `≤ modes`, or pads with zeros.
    pub fn resized(&self, modes: usize) -> Self {
        let mut s = Self::zeros(modes);
        let n = s.coeffs.len().min(self.coeffs.len());
        s.coeffs.rows_mut(0, n).copy_from(&self.coeffs.rows(0, n));
        s
    }

    pub fn derivative(&self) -> Self {
        let mut s = Self::zeros(self.modes());
        for m in 1..=self.modes() {
            let (a, b) = self.mode(m);
            let mf = m as f64;
            s.coeffs[2 * m - 1] = mf * b;
            s.coeffs[2 * m] = -mf * a;
        }
        s
    }

    /// Multiplies each mode pair by `f(m)`.
    pub fn scale_modes(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut s = self.clone();
        s.coeffs[0] *= f(0);
        for m in 1..=self.modes() {
            let w = f(m);
            s.coeffs[2 * m - 1] *= w;
            s.coeffs[2 * m] *= w;
        }
        s
    }
}

/// `Σ_{j=0}^{k} m^{2j}`, the symbol of `A_k` on mode `m`.
pub fn ak_multiplier(k: usize, m: usize) -> f64 {
    let m2 = (m * m) as f64;
    (0..k).fold(1.0, |acc, _| acc * m2 + 1.0)
}

pub fn ak_apply(u: &SpectralState, k: usize) -> SpectralState {
    u.scale_modes(|m| ak_multiplier(k, m))
}

pub fn ak_inverse(u: &SpectralState, k: usize) -> SpectralState {
    u.scale_modes(|m| 1.0 / ak_multiplier(k, m))
}

/// `‖u‖_n = (Σ_{i≤n} ∫ (∂ˣⁱ u)²)^{1/2}` in Parseval form.
pub fn sobolev_seminorm(u: &SpectralState, n: usize) -> f64 {
    sobolev_weights(u.modes(), n)
        .iter()
        .zip(u.coeffs.iter())
        .map(|(w, c)| w * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Per-coefficient weights whose weighted Euclidean norm is the Sobolev
/// seminorm of order `n`.
pub fn sobolev_weights(modes: usize, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(2 * modes + 1);
    w.push(2.0 * PI);
    for m in 1..=modes {
        let s = PI * ak_multiplier(n, m);
        w.push(s);
        w.push(s);
    }
    w
}

/// Complex FFT pair of one grid size, with allocation per transform.
#[derive(Clone)]
pub(crate) struct Fourier {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fourier {
    pub(crate) fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub(crate) fn size(&self) -> usize {
        self.size
    }

    fn load(&self, spec: &mut [Complex<f64>], c: &Vector, sign: Complex<f64>) {
        let m = c.len() / 2;
        spec[0] += sign * c[0];
        for k in 1..=m {
            let z = Complex::new(c[2 * k - 1], -c[2 * k]) * 0.5;
            spec[k] += sign * z;
            spec[self.size - k] += sign * z.conj();
        }
    }

    /// Grid values of two real states at `x_j = 2πj/M`, from one inverse
    /// transform of `f + i g`.
    pub(crate) fn synthesize_pair(&self, f: &Vector, g: &Vector) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        self.load(&mut buf, f, Complex::new(1.0, 0.0));
        self.load(&mut buf, g, Complex::new(0.0, 1.0));
        self.inverse.process(&mut buf);
        buf.iter().map(|z| (z.re, z.im)).unzip()
    }

    /// Coefficients of `values` up to `modes`, zeroing modes above `keep`.
    pub(crate) fn analyze(&self, values: &[f64], modes: usize, keep: usize) -> Vector {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        let mut out = Vector::zeros(2 * modes + 1);
        out[0] = buf[0].re * scale;
        for k in 1..=modes.min(keep) {
            out[2 * k - 1] = 2.0 * buf[k].re * scale;
            out[2 * k] = -2.0 * buf[k].im * scale;
        }
        out
    }
}
