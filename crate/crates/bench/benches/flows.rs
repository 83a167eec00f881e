use criterion::{black_box, criterion_group, criterion_main, Criterion};

use geomflow::diagnostics::h_volume_ratio;
use geomflow::estimators::{mc_semigroup, moment_exponent, MomentOptions};
use geomflow::flows::{step, integrate_driven};
use geomflow::{Executor, FlowConfig, ManifoldModel, Model, RegionSpec, Sampling, Vector};

fn stepping(c: &mut Criterion) {
    for (id, drift, x) in [
        ("sphere:2:1", "none", Vector::from([0.0, 0.0, 1.0])),
        ("torus:1:0.5", "quadratic:0.3", Vector::from([1.5, 0.0, 0.0])),
        ("hyperboloid", "quadratic:1", Vector::from([0.0, 0.0, 1.0])),
    ] {
        let m = Model::from_ids(id, drift).unwrap();
        let sys = m.system();
        let v = sys.tangent_basis(&x);
        let db = vec![0.01; sys.noise_dim()];
        c.bench_function(&format!("step+jacobian {id}"), |b| {
            b.iter(|| step(sys, black_box(&x), black_box(&v), black_box(&db), 1e-3).unwrap())
        });
    }
}

fn paths(c: &mut Criterion) {
    let m = Model::from_ids("sphere:2:1", "none").unwrap();
    let cfg = FlowConfig::new(1e-3, 1.0);
    let x = Vector::from([0.0, 0.0, 1.0]);
    c.bench_function("sphere path 1000 steps", |b| {
        b.iter(|| integrate_driven(m.system(), &x, &[], &cfg, 1, black_box(3)).unwrap())
    });
    let mut g = c.benchmark_group("estimators");
    g.sample_size(10);
    let s = Sampling::new(1000, 1).with_executor(Executor::serial());
    g.bench_function("mc_semigroup 1000 paths", |b| b.iter(|| mc_semigroup(m.system(), |y| y[2], &x, 1.0, &cfg, &s).unwrap()));
    let times = [0.25, 0.5, 0.75, 1.0];
    g.bench_function("moment_exponent 1000 paths", |b| {
        b.iter(|| moment_exponent(m.system(), &x, 1.0, &times, &MomentOptions::default(), &cfg, &s).unwrap())
    });
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let m = ManifoldModel::from_ids("torus:1:0.5", "quadratic:0.2").unwrap();
    let k = RegionSpec::from_id("cap:0", 3).unwrap();
    let mut g = c.benchmark_group("quadrature");
    g.sample_size(10);
    g.bench_function("h_volume_ratio torus half", |b| b.iter(|| h_volume_ratio(&m, &k, 1e-6).unwrap()));
    g.finish();
}

criterion_group!(benches, stepping, paths, quadrature);
criterion_main!(benches);
