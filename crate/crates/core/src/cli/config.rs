//! Run configuration read from a flat key-value document.

use std::fmt;
use std::str::FromStr;

use crate::calculus::Vector;
use crate::kv::{ConfigError, KvDocument};
use crate::models::{ChModel, MatrixGroupModel, SpectralState};
use crate::poly::{PolyChristoffel, Quadratic};
use crate::tower::Tower;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Geodesic,
    Transport,
    ConvertCheck,
    TowerCheck,
    Ch,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geodesic => "geodesic",
            Command::Transport => "transport",
            Command::ConvertCheck => "convert-check",
            Command::TowerCheck => "tower-check",
            Command::Ch => "ch",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "geodesic" => Command::Geodesic,
            "transport" => Command::Transport,
            "convert-check" => Command::ConvertCheck,
            "tower-check" => Command::TowerCheck,
            "ch" => Command::Ch,
            other => return Err(format!("unknown command `{other}`")),
        })
    }
}

#[derive(Debug, Clone)]
pub enum ModelSpec {
    Flat { dim: usize },
    MatrixGroup(MatrixGroupModel),
    Ch(ChSpec),
    CustomPolynomial(PolyChristoffel),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Flat { .. } => "flat",
            ModelSpec::MatrixGroup(_) => "matrix-group",
            ModelSpec::Ch(_) => "ch",
            ModelSpec::CustomPolynomial(_) => "custom-polynomial",
        }
    }

    /// Coordinate dimension of the model's (top) space.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Flat { dim } => *dim,
            ModelSpec::MatrixGroup(g) => g.dim(),
            ModelSpec::Ch(c) => 2 * c.modes + 1,
            ModelSpec::CustomPolynomial(p) => p.dim(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChSpec {
    pub k: usize,
    pub modes: usize,
    pub sobolev_n: usize,
    pub u0: SpectralState,
    /// Finest first; empty unless a tower was requested.
    pub levels: Vec<(usize, usize)>,
    pub energy_tol: f64,
    /// Highest mode of the compatibility probe data.
    pub band_limit: usize,
}

impl ChSpec {
    pub fn model(&self) -> ChModel {
        ChModel::new(self.k, self.modes, self.sobolev_n).expect("modes validated at parse time")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceSpec {
    pub tau: f64,
    pub lipschitz: f64,
    pub picard: bool,
    pub picard_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpec {
    /// `c(t) = x0 + t·velocity` on `[0, t_end]`.
    Line { velocity: Vector },
    /// The geodesic from `(x0, y0)` on `[0, t_end]`.
    Geodesic,
    Samples { times: Vec<f64>, points: Vec<Vector> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSpec {
    pub u0: Vector,
    pub curve: CurveSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvertSpec {
    pub instances: usize,
    pub max_dim: usize,
    pub hessian_tol: f64,
    pub roundtrip_tol: f64,
    pub transform_tol: f64,
}

impl Default for ConvertSpec {
    fn default() -> Self {
        Self {
            instances: 200,
            max_dim: 4,
            hessian_tol: 1e-5,
            roundtrip_tol: 1e-12,
            transform_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Optional in the file; the command line supplies it otherwise.
    pub command: Option<Command>,
    pub model: ModelSpec,
    pub x0: Vector,
    pub y0: Vector,
    pub t_end: f64,
    pub steps: usize,
    pub tol: f64,
    pub seed: u64,
    pub existence: Option<ExistenceSpec>,
    pub transport: Option<TransportSpec>,
    pub tower: Option<Tower>,
    pub probes: usize,
    pub convert: ConvertSpec,
}

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 42;

fn invalid(doc: &KvDocument, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(doc.line_of(key), key, msg)
}

fn positive(doc: &KvDocument, key: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(doc, key, format!("must be positive, got {value}")))
    }
}

fn take_vector(doc: &mut KvDocument, key: &str, dim: usize) -> Result<Option<Vector>, ConfigError> {
    let line = doc.line_of(key);
    match doc.take_list(key)? {
        None => Ok(None),
        Some(v) if v.len() == dim => Ok(Some(Vector::from_vec(v))),
        Some(v) => Err(ConfigError::new(line, key, format!("expected {dim} values, got {}", v.len()))),
    }
}

fn required_usize(doc: &mut KvDocument, key: &str) -> Result<usize, ConfigError> {
    doc.take_usize(key)?
        .ok_or_else(|| ConfigError::new(None, key, "missing required value"))
}

fn parse_gamma(doc: &mut KvDocument, dim: usize) -> Result<PolyChristoffel, ConfigError> {
    let mut gamma = PolyChristoffel::zero(dim);
    for key in doc.keys_with_prefix("gamma.") {
        let line = doc.line_of(&key);
        let idx: Vec<usize> = key["gamma.".len()..]
            .split('.')
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| ConfigError::new(line, key.as_str(), "expected `gamma.K.I.J` with integer indices"))?;
        if idx.len() != 3 || idx.iter().any(|&i| i >= dim) {
            return Err(ConfigError::new(line, key.as_str(), format!("indices must be three values below dim = {dim}")));
        }
        let coeffs = doc.take_list(&key)?.unwrap_or_default();
        let q = Quadratic::from_coefficients(dim, &coeffs).map_err(|e| ConfigError::new(line, key.as_str(), e.to_string()))?;
        gamma.set_entry(idx[0], idx[1], idx[2], q);
    }
    Ok(gamma)
}

fn parse_ch(doc: &mut KvDocument) -> Result<ChSpec, ConfigError> {
    let k = doc.take_usize("ch.k")?.unwrap_or(1);
    let modes = doc.take_usize("ch.modes")?.unwrap_or(64);
    if modes == 0 {
        return Err(invalid(doc, "ch.modes", "must be at least 1"));
    }
    let sobolev_n = doc.take_usize("ch.sobolev_n")?.unwrap_or(k);
    let u0_line = doc.line_of("ch.u0");
    let samples_line = doc.line_of("ch.u0_samples");
    let u0 = match (doc.take_list("ch.u0")?, doc.take_list("ch.u0_samples")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::new(samples_line, "ch.u0_samples", "give either `ch.u0` or `ch.u0_samples`, not both"));
        }
        (Some(c), None) => {
            if c.len() > 2 * modes + 1 || c.len() % 2 == 0 {
                return Err(ConfigError::new(
                    u0_line,
                    "ch.u0",
                    format!("expected an odd number of coefficients, at most {}", 2 * modes + 1),
                ));
            }
            SpectralState::from_slice(&c)
                .map_err(|e| ConfigError::new(u0_line, "ch.u0", e.to_string()))?
                .resized(modes)
        }
        (None, Some(s)) => SpectralState::from_samples(&s, modes)
            .map_err(|e| ConfigError::new(samples_line, "ch.u0_samples", e.to_string()))?,
        (None, None) => {
            // cos x + 0.3 sin 2x
            let mut c = vec![0.0; 2 * modes + 1];
            c[1] = 1.0;
            if modes >= 2 {
                c[4] = 0.3;
            }
            SpectralState::from_slice(&c).expect("finite default data")
        }
    };
    let levels_line = doc.line_of("ch.levels");
    let level_modes = doc.take_usize_list("ch.levels")?.unwrap_or_default();
    let sobolev = doc.take_usize_list("ch.sobolev")?;
    let levels = match sobolev {
        Some(s) if s.len() != level_modes.len() => {
            return Err(ConfigError::new(levels_line, "ch.sobolev", "needs one entry per `ch.levels` entry"));
        }
        Some(s) => level_modes.iter().copied().zip(s).collect(),
        None => level_modes.iter().map(|&m| (m, sobolev_n)).collect::<Vec<_>>(),
    };
    if levels.first().is_some_and(|&(m, _)| m != modes) {
        return Err(ConfigError::new(levels_line, "ch.levels", format!("first level must equal ch.modes = {modes}")));
    }
    let energy_tol = match doc.take_f64("ch.energy_tol")? {
        Some(v) => positive(doc, "ch.energy_tol", v)?,
        None => 1e-6,
    };
    let band_limit = doc.take_usize("ch.band_limit")?.unwrap_or(8);
    Ok(ChSpec {
        k,
        modes,
        sobolev_n,
        u0,
        levels,
        energy_tol,
        band_limit,
    })
}

fn parse_curve(doc: &mut KvDocument, dim: usize, y0: &Vector) -> Result<CurveSpec, ConfigError> {
    let kind = doc.take_str("transport.curve").unwrap_or_else(|| "line".into());
    match kind.as_str() {
        "line" => Ok(CurveSpec::Line {
            velocity: take_vector(doc, "transport.velocity", dim)?.unwrap_or_else(|| y0.clone()),
        }),
        "geodesic" => Ok(CurveSpec::Geodesic),
        "samples" => {
            let times = doc
                .take_list("transport.times")?
                .ok_or_else(|| ConfigError::new(None, "transport.times", "sampled curves need sample times"))?;
            let line = doc.line_of("transport.points");
            let flat = doc
                .take_list("transport.points")?
                .ok_or_else(|| ConfigError::new(None, "transport.points", "sampled curves need points"))?;
            if flat.len() != times.len() * dim {
                return Err(ConfigError::new(
                    line,
                    "transport.points",
                    format!("expected {} values ({} points of dim {dim})", times.len() * dim, times.len()),
                ));
            }
            let points = flat.chunks(dim).map(Vector::from_row_slice).collect();
            Ok(CurveSpec::Samples { times, points })
        }
        other => Err(invalid(doc, "transport.curve", format!("unknown curve kind `{other}`"))),
    }
}

/// Parses and validates a run configuration. Every key must be consumed.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut doc = KvDocument::parse(text)?;

    let command = match doc.take_str("command") {
        None => None,
        Some(c) => Some(c.parse::<Command>().map_err(|e| invalid(&doc, "command", e))?),
    };

    let model_name = doc.take_str("model").unwrap_or_else(|| "flat".into());
    let model = match model_name.as_str() {
        "flat" => ModelSpec::Flat {
            dim: doc.take_usize("dim")?.unwrap_or(2),
        },
        "matrix-group" => {
            let n = doc.take_usize("n")?.unwrap_or(2);
            ModelSpec::MatrixGroup(MatrixGroupModel::new(n).map_err(|e| invalid(&doc, "n", e.to_string()))?)
        }
        "ch" => ModelSpec::Ch(parse_ch(&mut doc)?),
        "custom-polynomial" => {
            let dim = required_usize(&mut doc, "dim")?;
            ModelSpec::CustomPolynomial(parse_gamma(&mut doc, dim)?)
        }
        other => return Err(invalid(&doc, "model", format!("unknown model `{other}`"))),
    };
    if model.dim() == 0 {
        return Err(invalid(&doc, "dim", "must be at least 1"));
    }
    let dim = model.dim();

    let default_x0 = match &model {
        ModelSpec::MatrixGroup(g) => g.to_coords(&crate::calculus::Matrix::identity(g.n(), g.n())).expect("square"),
        ModelSpec::Ch(c) => c.u0.coeffs().clone(),
        _ => Vector::zeros(dim),
    };
    let x0 = take_vector(&mut doc, "x0", dim)?.unwrap_or(default_x0);
    let y0 = take_vector(&mut doc, "y0", dim)?.unwrap_or_else(|| Vector::zeros(dim));

    let t_end = match doc.take_f64("t_end")? {
        Some(t) => positive(&doc, "t_end", t)?,
        None => 1.0,
    };
    let steps = doc.take_usize("steps")?.unwrap_or(DEFAULT_STEPS);
    if steps == 0 {
        return Err(invalid(&doc, "steps", "must be at least 1"));
    }
    let tol = match doc.take_f64("tol")? {
        Some(t) => positive(&doc, "tol", t)?,
        None => DEFAULT_TOL,
    };
    let seed = doc.take_u64("seed")?.unwrap_or(DEFAULT_SEED);

    let existence = match doc.take_f64("existence.lipschitz")? {
        None => None,
        Some(k) => {
            let lipschitz = positive(&doc, "existence.lipschitz", k)?;
            let tau = match doc.take_f64("existence.tau")? {
                Some(t) => positive(&doc, "existence.tau", t)?,
                None => t_end,
            };
            let picard = doc.take_bool("existence.picard")?.unwrap_or(false);
            let picard_tol = match doc.take_f64("existence.picard_tol")? {
                Some(t) => positive(&doc, "existence.picard_tol", t)?,
                None => 1e-6,
            };
            Some(ExistenceSpec { tau, lipschitz, picard, picard_tol })
        }
    };

    let transport = match take_vector(&mut doc, "transport.u0", dim)? {
        None if doc.contains("transport.curve") => {
            return Err(ConfigError::new(None, "transport.u0", "transport needs an initial vector"));
        }
        None => None,
        Some(u0) => Some(TransportSpec {
            u0,
            curve: parse_curve(&mut doc, dim, &y0)?,
        }),
    };

    let tower = if doc.keys_with_prefix("tower.").iter().any(|k| k != "tower.probes") {
        Some(Tower::from_kv(&mut doc, "tower")?)
    } else {
        None
    };
    let probes = doc.take_usize("tower.probes")?.unwrap_or(crate::tower::DEFAULT_PROBES);
    if probes == 0 {
        return Err(invalid(&doc, "tower.probes", "must be at least 1"));
    }

    let mut convert = ConvertSpec::default();
    if let Some(n) = doc.take_usize("convert.instances")? {
        convert.instances = n;
    }
    if let Some(n) = doc.take_usize("convert.max_dim")? {
        if n == 0 {
            return Err(invalid(&doc, "convert.max_dim", "must be at least 1"));
        }
        convert.max_dim = n;
    }
    for (key, slot) in [
        ("convert.hessian_tol", &mut convert.hessian_tol),
        ("convert.roundtrip_tol", &mut convert.roundtrip_tol),
        ("convert.transform_tol", &mut convert.transform_tol),
    ] {
        if let Some(v) = doc.take_f64(key)? {
            *slot = positive(&doc, key, v)?;
        }
    }

    doc.finish()?;
    Ok(RunConfig {
        command,
        model,
        x0,
        y0,
        t_end,
        steps,
        tol,
        seed,
        existence,
        transport,
        tower,
        probes,
        convert,
    })
}
