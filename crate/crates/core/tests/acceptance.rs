//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use frechet_geo::calculus::{random_vector, BilinearTensor, Vector};
use frechet_geo::instances::{quadratic_transition, quadratic_transition_jacobian, HessianInstance};
use frechet_geo::models::{direct_christoffel, flat_christoffel, ch_tower, ChModel, MatrixGroupModel, SpectralState};
use frechet_geo::ode::{
    existence_interval, geodesic, parallel_transport, picard_solve, rk4_integrate, tower_flow, tower_geodesic,
    ClosureCurve, PicardOptions, SecondOrderRhs, TowerOptions,
};
use frechet_geo::poly::PolyChristoffel;
use frechet_geo::structures::{
    check_transformation_law, christoffel_from_dissection, christoffel_from_spray, hessian_apply,
    hessian_via_connection, transformed_field, ChristoffelField, Dissection, Spray,
};
use frechet_geo::tower::{Sampler, Tower};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

fn hessian_equivalence() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = HessianInstance::random(&mut rng, 4, false);
        let a = hessian_apply(&s.gamma, &s.f, &s.x, &s.y, &s.u).map_err(|e| e.to_string())?;
        let b = hessian_via_connection(&s.gamma, &s.f, &s.x, &s.y, &s.u).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs() / (1.0 + a.abs()));
    }
    let took = within(Duration::from_secs(10), start)?;
    ensure(worst <= 1e-5, format!("max scaled residual {worst:.3e} in {took:?}"))
}

fn structure_round_trips() -> Verdict {
    let (mut spray, mut dissection): (f64, f64) = (0.0, 0.0);
    for probe in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + probe);
        let n = rng.random_range(1..=4);
        let gamma = PolyChristoffel::random(&mut rng, n, 2, true).to_field("phi");
        let u = random_vector(&mut rng, n);
        let reference = gamma.tensor_at(&u).map_err(|e| e.to_string())?;
        let s = christoffel_from_spray(&Spray::from_christoffel(&gamma).unwrap(), probe).map_err(|e| e.to_string())?;
        let d = christoffel_from_dissection(&Dissection::from_christoffel(&gamma).unwrap());
        spray = spray.max(reference.max_abs_diff(&s.tensor_at(&u).unwrap()));
        dissection = dissection.max(reference.max_abs_diff(&d.tensor_at(&u).unwrap()));
    }
    ensure(
        spray <= 1e-12 && dissection <= 1e-12,
        format!("spray {spray:.3e}, dissection {dissection:.3e}"),
    )
}

fn transformation_law() -> Verdict {
    let (mut analytic, mut fd): (f64, f64) = (0.0, 0.0);
    for case in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + case);
        let n = rng.random_range(1..=4);
        let gamma = PolyChristoffel::random(&mut rng, n, 2, false).to_field("phi");
        let u = random_vector(&mut rng, n) * 0.5;
        for (is_analytic, worst) in [(true, &mut analytic), (false, &mut fd)] {
            let t = quadratic_transition(n, is_analytic);
            let psi = transformed_field(&gamma, &t).map_err(|e| e.to_string())?;
            let r = check_transformation_law(&gamma, &psi, &t, &u, 8, case).map_err(|e| e.to_string())?;
            *worst = worst.max(r);
        }
    }
    ensure(
        analytic <= 1e-8 && fd <= 1e-4,
        format!("analytic {analytic:.3e}, finite-difference {fd:.3e}"),
    )
}

fn chart_covariance() -> Verdict {
    let x0 = v(&[0.1, -0.2, 0.3]);
    let y0 = v(&[0.3, 0.2, -0.4]);
    let t = quadratic_transition(3, true);
    let psi = transformed_field(&flat_christoffel(3), &t).map_err(|e| e.to_string())?;
    let start = t.forward.eval(&x0).unwrap();
    let velocity = quadratic_transition_jacobian(&x0) * &y0;
    let tr = geodesic(&psi, &start, &velocity, 1.0, 1000).map_err(|e| e.to_string())?;
    // The flat geodesic x0 + t·y0 pushed through F(x) = x + x²/2.
    let end = &x0 + &y0;
    let expected = end.map(|s| s + s * s / 2.0);
    let err = (tr.final_position().unwrap() - expected).amax();
    ensure(err <= 1e-6, format!("endpoint error {err:.3e}"))
}

fn direct_connection() -> Verdict {
    let start = Instant::now();
    let model = MatrixGroupModel::new(2).unwrap();
    let gamma = direct_christoffel(&model);
    let identity = v(&[1.0, 0.0, 0.0, 1.0]);
    let run = |y0: &Vector| {
        let tr = geodesic(&gamma, &identity, y0, 1.0, 1000).map_err(|e| e.to_string())?;
        Ok::<_, String>(tr.final_position().unwrap().clone())
    };
    // exp of [[0,1],[0,0]] is I + Y; exp of diag(1,-1) is diag(e, 1/e).
    let nilpotent = (run(&v(&[0.0, 1.0, 0.0, 0.0]))? - v(&[1.0, 1.0, 0.0, 1.0])).amax();
    let e = 1f64.exp();
    let diagonal = (run(&v(&[1.0, 0.0, 0.0, -1.0]))? - v(&[e, 0.0, 0.0, 1.0 / e])).amax();
    let took = within(Duration::from_secs(1), start)?;
    ensure(
        nilpotent <= 1e-9 && diagonal <= 1e-6,
        format!("nilpotent {nilpotent:.3e}, diagonal {diagonal:.3e} in {took:?}"),
    )
}

fn existence_and_picard() -> Verdict {
    let abs = |x: &Vector| x[0].abs();
    let norms: [&dyn Fn(&Vector) -> f64; 1] = [&abs];
    let one = |x: f64| Vector::from_element(1, x);
    let zero_force = SecondOrderRhs::new(1, |_, _, _| Ok(Vector::zeros(1))).with_lipschitz(2.0).unwrap();
    let a1 = existence_interval(&zero_force, 0.0, &one(0.0), &one(0.0), 1.0, &norms).unwrap().a;
    let linear = SecondOrderRhs::new(1, |_, x, _| Ok(x.clone())).with_lipschitz(1.0).unwrap();
    let a2 = existence_interval(&linear, 0.0, &one(1.0), &one(0.0), 2.0, &norms).unwrap().a;

    let oscillator = SecondOrderRhs::new(1, |_, x, _| Ok(-x)).with_lipschitz(1.0).unwrap();
    let a = existence_interval(&oscillator, 0.0, &one(1.0), &one(0.0), 1.0, &norms).unwrap().a;
    let opts = PicardOptions::default();
    let sol = picard_solve(&oscillator, 0.0, &one(1.0), &one(0.0), a, opts).map_err(|e| e.to_string())?;
    let tr = &sol.trajectory;
    let in_interval = tr.times.iter().all(|t| t.abs() <= a * (1.0 + 1e-12));
    let cosine = tr.times.iter().zip(&tr.xs).map(|(t, x)| (x[0] - t.cos()).abs()).fold(0.0, f64::max);
    // The problem is reversible, so the backward half is the forward run
    // with the initial velocity negated.
    let y0 = one(0.0);
    let forward = rk4_integrate(&oscillator, 0.0, &one(1.0), &y0, a, opts.grid).unwrap();
    let backward = rk4_integrate(&oscillator, 0.0, &one(1.0), &-&y0, a, opts.grid).unwrap();
    let c = opts.grid;
    let mut vs_rk4: f64 = 0.0;
    for j in 0..=c {
        vs_rk4 = vs_rk4.max((tr.xs[c + j][0] - forward.xs[j][0]).abs());
        vs_rk4 = vs_rk4.max((tr.xs[c - j][0] - backward.xs[j][0]).abs());
    }
    ensure(
        a1 == 0.5 && a2 == 0.5 && in_interval && cosine <= 1e-6 && vs_rk4 <= 1e-6,
        format!("a = {a1}, {a2}; Picard on a = {a}: cosine {cosine:.3e}, vs RK4 {vs_rk4:.3e}"),
    )
}

fn tower_consistency() -> Verdict {
    let tower = Tower::drop_last(&[1, 2, 3]).unwrap();
    let x0 = v(&[0.1, 0.2, -0.3]);
    let y0 = v(&[0.5, -0.2, 0.3]);
    let flat: Vec<_> = (1..=3).map(ChristoffelField::zero).collect();
    let flat_r = tower_geodesic(&flat, &tower, &x0, &y0, 1.0, 200, TowerOptions::default())
        .map_err(|e| e.to_string())?
        .max_residual();
    let product = |n: usize| {
        ChristoffelField::constant("phi", BilinearTensor::from_fn(n, n, |k, i, j| f64::from(k == i && i == j)))
    };
    let coordinatewise: Vec<_> = (1..=3).map(product).collect();
    let coord_r = tower_geodesic(&coordinatewise, &tower, &x0, &y0, 1.0, 200, TowerOptions::default())
        .map_err(|e| e.to_string())?
        .max_residual();

    let ch = ch_tower(1, &[(64, 1), (32, 1)]).map_err(|e| e.to_string())?;
    let band_limited = |_: usize, dim: usize, rng: &mut ChaCha8Rng| {
        SpectralState::random_band_limited(rng, dim / 2, 8).into_coeffs()
    };
    let sampler: Sampler = &band_limited;
    let opts = TowerOptions {
        tol: 1e-6,
        sampler: Some(sampler),
        ..Default::default()
    };
    let u0 = smooth_data(64);
    let spectral_r = tower_flow(&ch.family, &ch.tower, u0.coeffs(), 0.1, 100, opts)
        .map_err(|e| e.to_string())?
        .max_residual();
    ensure(
        flat_r <= 1e-9 && coord_r <= 1e-9 && spectral_r <= 1e-6,
        format!("flat {flat_r:.3e}, coordinatewise {coord_r:.3e}, spectral {spectral_r:.3e}"),
    )
}

fn transport() -> Verdict {
    let line = ClosureCurve::new(2, 0.0, 1.0, |t| v(&[t, 2.0 * t])).unwrap().with_velocity(|_| v(&[1.0, 2.0]));
    let u0 = v(&[0.7, -1.3]);
    let flat = (parallel_transport(&flat_christoffel(2), &line, &u0, 100).unwrap().final_vector() - &u0).amax();

    let product = ChristoffelField::constant("phi", BilinearTensor::from_fn(1, 1, |_, _, _| 1.0));
    let ramp = ClosureCurve::new(1, 0.0, 1.0, |t| v(&[t])).unwrap().with_velocity(|_| v(&[1.0]));
    let got = parallel_transport(&product, &ramp, &v(&[2.0]), 1000).unwrap().final_vector()[0];
    let exponential = (got - 2.0 * 1f64.exp()).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gamma = PolyChristoffel::random(&mut rng, 3, 2, false).to_field("phi");
    let curve = ClosureCurve::new(3, 0.0, 1.0, |t| v(&[t.sin(), t * t, 0.5 - t])).unwrap();
    let (p, q) = (random_vector(&mut rng, 3), random_vector(&mut rng, 3));
    let (alpha, beta) = (1.7, -0.6);
    let tp = |w: &Vector| parallel_transport(&gamma, &curve, w, 200).unwrap().final_vector().clone();
    let combined = tp(&(&p * alpha + &q * beta));
    let linearity = (combined - (tp(&p) * alpha + tp(&q) * beta)).amax();
    ensure(
        flat <= 1e-12 && exponential <= 1e-8 && linearity <= 1e-9,
        format!("flat {flat:.3e}, exponential {exponential:.3e}, linearity {linearity:.3e}"),
    )
}

/// `cos x + 0.3 sin 2x`.
fn smooth_data(modes: usize) -> SpectralState {
    let mut c = vec![0.0; 2 * modes + 1];
    c[1] = 1.0;
    c[4] = 0.3;
    SpectralState::from_slice(&c).unwrap()
}

fn spectral_model() -> Verdict {
    let start = Instant::now();
    let model = ChModel::new(1, 128, 1).unwrap();
    let mut equilibrium: f64 = 0.0;
    for c in [-2.0, 0.5, 3.0] {
        let u = SpectralState::constant(128, c);
        equilibrium = equilibrium.max(model.rhs(&u).unwrap().coeffs().amax());
    }
    let drift = model.integrate(&smooth_data(128), 0.5, 500).map_err(|e| e.to_string())?.relative_energy_drift();
    let fine = model.integrate(&smooth_data(128), 0.1, 100).unwrap();
    let coarse = ChModel::new(1, 64, 1).unwrap().integrate(&smooth_data(64), 0.1, 100).unwrap();
    let gap = (fine.final_state().coeffs() - coarse.final_state().resized(128).coeffs()).norm();
    let took = within(Duration::from_secs(60), start)?;
    ensure(
        equilibrium <= 1e-12 && drift <= 1e-6 && gap <= 1e-7,
        format!("equilibrium {equilibrium:.3e}, energy drift {drift:.3e}, N=128 vs 64 {gap:.3e} in {took:?}"),
    )
}

fn rk4_order() -> Verdict {
    let oscillator = SecondOrderRhs::new(1, |_, x, _| Ok(-x));
    let one = |x: f64| Vector::from_element(1, x);
    let end = |steps| rk4_integrate(&oscillator, 0.0, &one(1.0), &one(0.0), 2.0, steps).unwrap().xs[steps][0];
    let (a, b, c) = (end(10), end(20), end(40));
    let order = ((a - b).abs() / (b - c).abs()).log2();
    ensure(order >= 3.8, format!("observed order {order:.3}"))
}

const DETERMINISM_CONFIGS: [(&str, &str); 4] = [
    ("geodesic", "model = flat\ndim = 2\nx0 = 1, 2\ny0 = 0.5, -0.25\n[existence]\nlipschitz = 1\ntau = 2\npicard = true\n"),
    ("convert-check", "[convert]\ninstances = 20\n"),
    ("tower-check", "model = ch\nt_end = 0.1\nsteps = 50\ntol = 1e-6\n[ch]\nmodes = 64\nlevels = 64, 32\nband_limit = 8\n"),
    ("ch", "model = ch\nt_end = 0.1\nsteps = 50\n[ch]\nmodes = 32\n"),
];

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    for (command, config) in DETERMINISM_CONFIGS {
        let conf = root.path().join(format!("{command}.conf"));
        fs::write(&conf, config).unwrap();
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = root.path().join(format!("{command}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_frechet-geo"))
                .arg(command)
                .arg("--config")
                .arg(&conf)
                .arg("--out")
                .arg(&out)
                .env("FRECHET_GEO_LOG", "off")
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return Err(format!("{command} exited with {status}"));
            }
            outputs.push(csv_files(&out));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Err(format!("{command} outputs differ between runs"));
        }
        compared += outputs[0].len();
    }
    Ok(format!("{compared} CSV files identical across runs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("hessian equivalence", hessian_equivalence),
        ("structure round trips", structure_round_trips),
        ("transformation law", transformation_law),
        ("geodesic chart covariance", chart_covariance),
        ("direct connection", direct_connection),
        ("existence interval and Picard", existence_and_picard),
        ("tower consistency", tower_consistency),
        ("parallel transport", transport),
        ("spectral model", spectral_model),
        ("RK4 order", rk4_order),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
