//! Subcommand execution: solvers, CSV artifacts and the JSON summary.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::calculus::{random_vector, BilinearMap, Matrix, Vector};
use crate::error::GeoError;
use crate::instances::{quadratic_transition, HessianInstance};
use crate::kv::ConfigError;
use crate::models::{ch_tower, direct_christoffel, flat_christoffel, SpectralState};
use crate::ode::{
    existence_interval, geodesic, geodesic_rhs, parallel_transport, picard_solve, rk4_integrate,
    tower_existence_interval, tower_flow, tower_geodesic, ClosureCurve, Curve, PicardOptions,
    SampledCurve, SecondOrderRhs, TowerOptions, TowerTrajectory,
};
use crate::output::{ch_csv, residual_csv, trajectory_csv, write_text};
use crate::par::{map_indexed, Execution};
use crate::structures::{
    check_transformation_law, christoffel_from_dissection, christoffel_from_spray, hessian_apply,
    hessian_via_connection, transformed_field, ChristoffelField, Dissection, Spray,
};
use crate::tower::{check_composition_coherence, Sampler, Tower};

use super::config::{ChSpec, Command, CurveSpec, ModelSpec, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(#[from] GeoError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

/// Named comparison against a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed() })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_text(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

fn vec_json(v: &Vector) -> Value {
    Value::from(v.iter().copied().collect::<Vec<f64>>())
}

fn christoffel(model: &ModelSpec) -> Result<ChristoffelField, CliError> {
    match model {
        ModelSpec::Flat { dim } => Ok(flat_christoffel(*dim)),
        ModelSpec::MatrixGroup(g) => Ok(direct_christoffel(g)),
        ModelSpec::CustomPolynomial(p) => Ok(p.to_field("config")),
        ModelSpec::Ch(_) => Err(CliError::Usage(
            "the ch model evolves u_t = B_k(u, u) directly; use the `ch` or `tower-check` subcommand".into(),
        )),
    }
}

/// Runs one subcommand and writes its artifacts plus `summary.json` into
/// `out_dir`.
pub fn run(command: Command, config: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    if let Some(c) = config.command {
        if c != command {
            return Err(CliError::Usage(format!(
                "configuration is for `{c}` but `{command}` was requested"
            )));
        }
    }
    let mut art = Artifacts {
        dir: out_dir,
        files: Vec::new(),
    };
    let mut summary = Map::new();
    summary.insert("command".into(), json!(command.name()));
    summary.insert("model".into(), json!(config.model.name()));
    summary.insert("seed".into(), json!(config.seed));
    let checks = match command {
        Command::Geodesic => run_geodesic(config, &mut art, &mut summary)?,
        Command::Transport => run_transport(config, &mut art, &mut summary)?,
        Command::ConvertCheck => run_convert_check(config, &mut art, &mut summary)?,
        Command::TowerCheck => run_tower_check(config, &mut art, &mut summary)?,
        Command::Ch => run_ch(config, &mut art, &mut summary)?,
    };
    summary.insert("checks".into(), Value::from(checks.iter().map(Check::to_json).collect::<Vec<_>>()));
    let passed = checks.iter().all(Check::passed);
    summary.insert("passed".into(), json!(passed));
    let summary = Value::Object(summary);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    art.write("summary.json", &text)?;
    Ok(Outcome {
        checks,
        summary,
        files: art.files,
    })
}

fn existence_report(
    config: &RunConfig,
    gamma: &ChristoffelField,
    summary: &mut Map<String, Value>,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    let Some(spec) = config.existence else {
        return Ok(());
    };
    let rhs = geodesic_rhs(gamma).with_lipschitz(spec.lipschitz)?;
    let euclid = |v: &Vector| v.norm();
    let e = existence_interval(&rhs, 0.0, &config.x0, &config.y0, spec.tau, &[&euclid])?;
    let mut entry = json!({ "a": e.a, "sup_m": e.sup_m, "lipschitz_k": e.lipschitz_k, "tau": e.tau });
    if spec.picard {
        let opts = PicardOptions::default();
        let p = picard_solve(&rhs, 0.0, &config.x0, &config.y0, e.a, opts)?;
        let r = rk4_integrate(&rhs, 0.0, &config.x0, &config.y0, e.a, opts.grid)?;
        let diff = p.trajectory.xs[opts.grid..]
            .iter()
            .zip(&r.xs)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        entry["picard_iterations"] = json!(p.iterations);
        entry["picard_residual"] = json!(p.residual);
        entry["picard_vs_rk4"] = json!(diff);
        checks.push(Check::new("picard_vs_rk4", diff, spec.picard_tol));
    }
    summary.insert("existence".into(), entry);
    Ok(())
}

fn run_geodesic(config: &RunConfig, art: &mut Artifacts, summary: &mut Map<String, Value>) -> Result<Vec<Check>, CliError> {
    let gamma = christoffel(&config.model)?;
    let tr = geodesic(&gamma, &config.x0, &config.y0, config.t_end, config.steps)?;
    art.write("trajectory.csv", &trajectory_csv(std::slice::from_ref(&tr)))?;
    let end = tr.final_position().expect("non-empty trajectory");
    summary.insert("final_position".into(), vec_json(end));
    let mut checks = Vec::new();
    match &config.model {
        ModelSpec::Flat { .. } => {
            let err = tr
                .times
                .iter()
                .zip(&tr.xs)
                .map(|(&t, x)| (x - (&config.x0 + &config.y0 * t)).amax())
                .fold(0.0, f64::max);
            checks.push(Check::new("straight_line_error", err, config.tol));
        }
        ModelSpec::MatrixGroup(g) => {
            let x0 = g.to_matrix(&config.x0)?;
            let x0_inv = x0
                .clone()
                .try_inverse()
                .ok_or(GeoError::Singular { condition: f64::INFINITY })?;
            let generator = &x0_inv * g.to_matrix(&config.y0)? * config.t_end;
            let exact: Matrix = &x0 * generator.exp();
            let err = (g.to_matrix(end)? - exact).amax();
            checks.push(Check::new("exponential_oracle_error", err, config.tol));
        }
        _ => {}
    }
    existence_report(config, &gamma, summary, &mut checks)?;
    Ok(checks)
}

fn run_transport(config: &RunConfig, art: &mut Artifacts, summary: &mut Map<String, Value>) -> Result<Vec<Check>, CliError> {
    let gamma = christoffel(&config.model)?;
    let spec = config
        .transport
        .as_ref()
        .ok_or_else(|| CliError::Usage("transport needs `transport.u0` in the configuration".into()))?;
    let curve: Box<dyn Curve> = match &spec.curve {
        CurveSpec::Line { velocity } => {
            let (p, v) = (config.x0.clone(), velocity.clone());
            let vel = v.clone();
            Box::new(
                ClosureCurve::new(p.len(), 0.0, config.t_end, move |t| &p + &v * t)?
                    .with_velocity(move |_| vel.clone()),
            )
        }
        CurveSpec::Geodesic => {
            let tr = geodesic(&gamma, &config.x0, &config.y0, config.t_end, config.steps)?;
            Box::new(SampledCurve::from_trajectory(&tr)?)
        }
        CurveSpec::Samples { times, points } => Box::new(SampledCurve::new(times.clone(), points.clone(), None)?),
    };
    let path = parallel_transport(&gamma, curve.as_ref(), &spec.u0, config.steps)?;
    art.write("transport.csv", &trajectory_csv(&[path.to_trajectory()]))?;
    summary.insert("final_vector".into(), vec_json(path.final_vector()));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let other = random_vector(&mut rng, spec.u0.len());
    let (alpha, beta): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let combo = parallel_transport(&gamma, curve.as_ref(), &(&spec.u0 * alpha + &other * beta), config.steps)?;
    let second = parallel_transport(&gamma, curve.as_ref(), &other, config.steps)?;
    let expected = path.final_vector() * alpha + second.final_vector() * beta;
    let lin = (combo.final_vector() - expected).amax();
    Ok(vec![Check::new("linearity_residual", lin, config.tol)])
}

#[derive(Debug, Clone, Copy)]
struct InstanceResult {
    dim: usize,
    hessian: f64,
    spray: f64,
    dissection: f64,
    transform: f64,
}

fn check_instance(seed: u64, max_dim: usize) -> Result<InstanceResult, GeoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = HessianInstance::random(&mut rng, max_dim, false);
    let a = hessian_apply(&s.gamma, &s.f, &s.x, &s.y, &s.u)?;
    let b = hessian_via_connection(&s.gamma, &s.f, &s.x, &s.y, &s.u)?;
    let hessian = (a - b).abs() / (1.0 + a.abs());

    let n = s.dim();
    let sym = crate::poly::PolyChristoffel::random(&mut rng, n, 2, true).to_field("phi");
    let reference = sym.tensor_at(&s.u)?;
    let from_spray = christoffel_from_spray(&Spray::from_christoffel(&sym)?, seed)?;
    let from_dissection = christoffel_from_dissection(&Dissection::from_christoffel(&sym)?);
    let spray = reference.max_abs_diff(&from_spray.tensor_at(&s.u)?);
    let dissection = reference.max_abs_diff(&from_dissection.tensor_at(&s.u)?);

    let t = quadratic_transition(n, true);
    let psi = transformed_field(&s.gamma, &t)?;
    let transform = check_transformation_law(&s.gamma, &psi, &t, &(&s.u * 0.5), 8, seed)?;
    Ok(InstanceResult {
        dim: n,
        hessian,
        spray,
        dissection,
        transform,
    })
}

fn run_convert_check(config: &RunConfig, art: &mut Artifacts, summary: &mut Map<String, Value>) -> Result<Vec<Check>, CliError> {
    let spec = config.convert;
    if spec.instances == 0 {
        return Err(CliError::Usage("convert.instances must be at least 1".into()));
    }
    let results = map_indexed(Execution::default(), spec.instances, |i| {
        check_instance(config.seed.wrapping_add(i as u64), spec.max_dim)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("instance,dim,hessian_residual,spray_residual,dissection_residual,transform_residual\n");
    for (i, r) in results.iter().enumerate() {
        use crate::output::format_number as f;
        csv.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            r.dim,
            f(r.hessian),
            f(r.spray),
            f(r.dissection),
            f(r.transform)
        ));
    }
    art.write("instances.csv", &csv)?;
    let max = |g: fn(&InstanceResult) -> f64| results.iter().map(g).fold(0.0, f64::max);
    summary.insert("instances".into(), json!(spec.instances));
    Ok(vec![
        Check::new("hessian_equivalence", max(|r| r.hessian), spec.hessian_tol),
        Check::new("spray_round_trip", max(|r| r.spray), spec.roundtrip_tol),
        Check::new("dissection_round_trip", max(|r| r.dissection), spec.roundtrip_tol),
        Check::new("transformation_law", max(|r| r.transform), spec.transform_tol),
    ])
}

/// Level-`p` field `ρ Γ_top(ρᵀu)(ρᵀa, ρᵀb)` with `ρ` the map from the top.
fn restricted_family(gamma: &ChristoffelField, tower: &Tower) -> Result<Vec<ChristoffelField>, CliError> {
    let top = tower.top().index();
    tower
        .levels()
        .iter()
        .map(|level| {
            let rho = tower.map(top, level.index())?;
            let (g, dim) = (gamma.clone(), level.dim());
            Ok(ChristoffelField::new(
                format!("level-{}", level.index()),
                dim,
                gamma.is_symmetric(),
                move |u| {
                    let inner = g.at(&(rho.transpose() * u))?;
                    let rho = rho.clone();
                    Ok(BilinearMap::new(dim, dim, move |a, b| {
                        let v = inner
                            .apply(&(rho.transpose() * a), &(rho.transpose() * b))
                            .expect("dimensions fixed by the tower");
                        &rho * v
                    }))
                },
            ))
        })
        .collect()
}

fn tower_outputs(
    tt: &TowerTrajectory,
    config: &RunConfig,
    art: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> Result<Vec<Check>, CliError> {
    art.write("levels.csv", &trajectory_csv(&tt.levels))?;
    art.write("residuals.csv", &residual_csv(&tt.residuals))?;
    summary.insert("max_residual".into(), json!(tt.max_residual()));
    summary.insert("compatibility_residual".into(), json!(tt.compatibility_residual));
    summary.insert("warnings".into(), json!(tt.warnings));
    Ok(vec![Check::new("consistency_residual", tt.max_residual(), config.tol)])
}

fn run_tower_check(config: &RunConfig, art: &mut Artifacts, summary: &mut Map<String, Value>) -> Result<Vec<Check>, CliError> {
    let opts = TowerOptions {
        probes: config.probes,
        tol: config.tol,
        seed: config.seed,
        ..Default::default()
    };
    if let ModelSpec::Ch(ch) = &config.model {
        return spectral_tower_check(ch, config, opts, art, summary);
    }
    let tower = config
        .tower
        .as_ref()
        .ok_or_else(|| CliError::Usage("tower-check needs a `[tower]` section".into()))?;
    if tower.top().dim() != config.model.dim() {
        return Err(CliError::Usage(format!(
            "model dimension {} differs from the top tower level dimension {}",
            config.model.dim(),
            tower.top().dim()
        )));
    }
    let gamma = christoffel(&config.model)?;
    let family = restricted_family(&gamma, tower)?;
    let coherence = check_composition_coherence(tower, config.tol);
    let tt = tower_geodesic(&family, tower, &config.x0, &config.y0, config.t_end, config.steps, opts)?;
    let mut checks = tower_outputs(&tt, config, art, summary)?;
    checks.push(Check::new("coherence_residual", coherence.max_residual(), config.tol));
    if let Some(spec) = config.existence {
        let rhs = family
            .iter()
            .map(|g| geodesic_rhs(g).with_lipschitz(spec.lipschitz))
            .collect::<Result<Vec<SecondOrderRhs>, _>>()?;
        let e = tower_existence_interval(tower, &rhs, 0.0, &config.x0, &config.y0, spec.tau)?;
        summary.insert(
            "existence".into(),
            json!({
                "a": e.interval.a,
                "sup_m": e.interval.sup_m,
                "lipschitz_k": e.interval.lipschitz_k,
                "tau": e.interval.tau,
                "per_level_m": e.per_level_m.iter().map(|&(i, m)| json!({ "level": i, "m": m })).collect::<Vec<_>>(),
                "sup_at_top": e.sup_at_top,
            }),
        );
    }
    Ok(checks)
}

fn spectral_tower_check(
    ch: &ChSpec,
    config: &RunConfig,
    opts: TowerOptions,
    art: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> Result<Vec<Check>, CliError> {
    if ch.levels.len() < 2 {
        return Err(CliError::Usage("spectral tower-check needs at least two `ch.levels`".into()));
    }
    let tower = ch_tower(ch.k, &ch.levels)?;
    let band = ch.band_limit;
    let band_limited = move |_: usize, dim: usize, rng: &mut ChaCha8Rng| {
        SpectralState::random_band_limited(rng, dim / 2, band).into_coeffs()
    };
    let sampler: Sampler = &band_limited;
    let opts = TowerOptions {
        sampler: Some(sampler),
        ..opts
    };
    let tt = tower_flow(&tower.family, &tower.tower, &config.x0, config.t_end, config.steps, opts)?;
    let mut checks = tower_outputs(&tt, config, art, summary)?;
    checks.push(Check::new("compatibility_residual", tt.compatibility_residual, config.tol));
    Ok(checks)
}

fn run_ch(config: &RunConfig, art: &mut Artifacts, summary: &mut Map<String, Value>) -> Result<Vec<Check>, CliError> {
    let ModelSpec::Ch(ch) = &config.model else {
        return Err(CliError::Usage("the ch subcommand needs `model = ch`".into()));
    };
    let model = ch.model();
    let u0 = SpectralState::new(config.x0.clone())?;
    let run = model.integrate(&u0, config.t_end, config.steps)?;
    art.write("ch.csv", &ch_csv(&run))?;
    let drift = run.relative_energy_drift();
    summary.insert("k".into(), json!(ch.k));
    summary.insert("modes".into(), json!(ch.modes));
    summary.insert("initial_energy".into(), json!(run.energies[0]));
    summary.insert("final_energy".into(), json!(run.energies.last()));
    summary.insert("energy_drift".into(), json!(drift));
    summary.insert("final_seminorm".into(), json!(model.seminorm(run.final_state())));
    Ok(vec![Check::new("energy_drift", drift, ch.energy_tol)])
}

/// Diagnostic text for a failed run; a blow-up shows the last finite state.
pub fn describe_error(e: &CliError) -> String {
    match e {
        CliError::Solver(GeoError::BlowUp { time, last_state }) => {
            let shown: Vec<String> = last_state.iter().take(8).map(|v| crate::output::format_number(*v)).collect();
            format!(
                "solution blew up after t = {time}; last finite state starts [{}]{}",
                shown.join(", "),
                if last_state.len() > 8 { ", ..." } else { "" }
            )
        }
        other => other.to_string(),
    }
}
