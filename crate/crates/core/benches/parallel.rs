use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use frechet_geo::calculus::{BilinearTensor, Vector};
use frechet_geo::instances::HessianInstance;
use frechet_geo::models::{ch_tower, SpectralState};
use frechet_geo::ode::{tower_flow, tower_geodesic, TowerOptions};
use frechet_geo::par::{map_indexed, Execution};
use frechet_geo::structures::{hessian_apply, hessian_via_connection, ChristoffelField};
use frechet_geo::tower::Tower;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spectral_tower(c: &mut Criterion) {
    let ch = ch_tower(1, &[(128, 1), (64, 1), (32, 1)]).unwrap();
    let mut u0 = SpectralState::zeros(128).into_coeffs();
    u0[1] = 1.0;
    u0[4] = 0.3;
    let mut group = c.benchmark_group("spectral_tower_flow");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let opts = TowerOptions { exec, probes: 4, ..Default::default() };
            b.iter(|| tower_flow(&ch.family, &ch.tower, &u0, 0.05, 50, opts).unwrap())
        });
    }
    group.finish();
}

fn product_tower(c: &mut Criterion) {
    let dims = [4, 8, 12, 16];
    let tower = Tower::drop_last(&dims).unwrap();
    let family: Vec<_> = dims
        .iter()
        .map(|&n| {
            ChristoffelField::constant("phi", BilinearTensor::from_fn(n, n, |k, i, j| f64::from(k == i && i == j)))
        })
        .collect();
    let x0 = Vector::from_fn(16, |i, _| 0.01 * i as f64);
    let y0 = Vector::from_fn(16, |i, _| 0.2 - 0.01 * i as f64);
    let mut group = c.benchmark_group("product_tower_geodesic");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let opts = TowerOptions { exec, ..Default::default() };
            b.iter(|| tower_geodesic(&family, &tower, &x0, &y0, 1.0, 200, opts).unwrap())
        });
    }
    group.finish();
}

fn hessian_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("hessian_batch");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(exec, 200, |i| {
                    let s = HessianInstance::random(&mut ChaCha8Rng::seed_from_u64(i as u64), 4, false);
                    let a = hessian_apply(&s.gamma, &s.f, &s.x, &s.y, &s.u).unwrap();
                    a - hessian_via_connection(&s.gamma, &s.f, &s.x, &s.y, &s.u).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, spectral_tower, product_tower, hessian_batch);
criterion_main!(benches);
