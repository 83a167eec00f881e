use std::f64::consts::FRAC_PI_2;

use geomflow::flows::{
    damped_transport, integrate_driven, integrate_path, integrate_with_jacobian, ito_step, jacobian_norm, step,
    transport_curve, write_trajectories, Langevin, SampledCurve, TRAJECTORY_HEADER,
};
use geomflow::oracles::{hyperbolic_exact, langevin_exact};
use geomflow::rng::{CoarsenedNoise, RecordedNoise};
use geomflow::stats::{ks_critical, ks_statistic, ols, summarize};
use geomflow::{BrownianDriver, ExitRule, FlowConfig, ManifoldModel, Model, PathStatus, RegionSpec, StochasticSystem, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::from_slice(xs)
}

fn increments(seed: u64, path: u64, dim: usize, dt: f64, n: u64) -> Vec<Vector> {
    let mut d = BrownianDriver::new(seed, path, dim, dt);
    (0..n).map(|k| d.increment(k)).collect()
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    ols(&lx, &ly).unwrap().slope
}

/// `|F(x_ε) − F(x) − ε TF(v)|` at `t_max` for `ε ∈ {1e-2, 1e-3, 1e-4}` under
/// one recorded noise path.
fn jacobian_defects<S: StochasticSystem + ?Sized>(sys: &S, x: &Vector, w: &Vector, cfg: &FlowConfig, seed: u64) -> Vec<f64> {
    let n = cfg.n_steps().unwrap();
    let noise = RecordedNoise { increments: increments(seed, 0, sys.noise_dim(), cfg.dt, n), dt: cfg.dt };
    let base = integrate_with_jacobian(sys, x, &[w.clone()], cfg, &mut noise.clone()).unwrap();
    assert!(base.status.is_completed());
    let tv = &base.jacobian_frames.as_ref().unwrap().last().unwrap()[0];
    [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let mut y = x.clone();
            y.axpy(eps, w);
            let xe = sys.retract(&y).unwrap();
            let pert = integrate_path(sys, &xe, cfg, &mut noise.clone()).unwrap();
            let mut d = pert.final_point() - base.final_point();
            d.axpy(-eps, tv);
            d.norm()
        })
        .collect()
}

#[test]
fn pathwise_jacobian_consistency_is_second_order() {
    let cfg = FlowConfig::new(1e-3, 1.0);
    let cases: Vec<(Model, Vector, Vector)> = vec![
        (Model::from_ids("sphere:2:1", "none").unwrap(), v(&[0.0, 0.0, 1.0]), v(&[1.0, 0.0, 0.0])),
        (Model::from_ids("sphere:2:1", "quadratic:0.5").unwrap(), v(&[0.6, 0.0, 0.8]), v(&[0.0, 1.0, 0.0])),
        (Model::from_ids("torus:1:0.5", "quadratic:0.3").unwrap(), v(&[1.5, 0.0, 0.0]), v(&[0.0, 0.6, 0.8])),
    ];
    for (m, x, w) in &cases {
        let sys = m.system();
        for seed in [1, 2] {
            let d = jacobian_defects(sys, x, w, &cfg, seed);
            let slope = log_slope(&[1e-2, 1e-3, 1e-4], &d);
            assert!((1.7..2.3).contains(&slope), "{}: defects {d:?} slope {slope}", sys.id());
        }
    }
    // linear flow: the discrete map is affine so the defect is round-off
    let l = Langevin { c: 1.0, gamma: 1.0, dim: 2 };
    let d = jacobian_defects(&l, &v(&[0.3, -0.2]), &v(&[1.0, 2.0]), &cfg, 3);
    assert!(d.iter().all(|e| *e < 1e-12), "{d:?}");
}

#[test]
fn langevin_jacobian_is_exponential() {
    let l = Langevin { c: 1.0, gamma: 1.0, dim: 2 };
    let cfg = FlowConfig::new(1e-3, 1.0);
    let basis = l.tangent_basis(&v(&[0.0, 0.0]));
    let rec = integrate_driven(&l, &v(&[0.5, 0.5]), &basis, &cfg, 11, 0).unwrap();
    let frames = rec.jacobian_frames.as_ref().unwrap();
    let x = rec.final_point();
    let got = jacobian_norm(&l, x, frames.last().unwrap());
    let want = (-1.0f64).exp();
    assert!(((got - want) / want).abs() < 2e-3, "{got} vs {want}");
}

#[test]
fn langevin_one_step_matches_oracle_contraction() {
    let l = Langevin { c: 2.0, gamma: 0.7, dim: 1 };
    let dt = 1e-2;
    let (_, vs) = step(&l, &v(&[0.0]), &[v(&[1.0])], &[0.0], dt).unwrap();
    // Heun on a linear drift is the second-order Taylor polynomial
    let want = 1.0 - 2.0 * dt + 2.0 * dt * dt;
    assert!((vs[0][0] - want).abs() < 1e-15);
}

#[test]
fn flat_jacobian_is_identity() {
    let m = Model::from_ids("euclidean:2", "none").unwrap();
    let sys = m.system();
    let cfg = FlowConfig::new(1e-2, 1.0);
    let basis = sys.tangent_basis(&v(&[0.0, 0.0]));
    let rec = integrate_driven(sys, &v(&[1.0, -1.0]), &basis, &cfg, 4, 9).unwrap();
    for frame in rec.jacobian_frames.unwrap() {
        assert_eq!(frame, basis);
    }
}

#[test]
fn sphere_single_step_moment() {
    let m = ManifoldModel::from_ids("sphere:2:1", "none").unwrap();
    let x = v(&[0.0, 0.0, 1.0]);
    let w = v(&[1.0, 0.0, 0.0]);
    let dt = 1e-2;
    let n = 100_000u64;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let db = BrownianDriver::new(77, i, 3, dt).increment(0);
            let (_, vs) = step(&m, &x, &[w.clone()], db.as_slice(), dt).unwrap();
            vs[0].norm_squared()
        })
        .collect();
    let s = summarize(&vals);
    // E|v_dt|² = e^{0} for p = n = 2; the one-step bias is O(dt²)
    assert!((s.mean() - 1.0).abs() < 3.0 * s.stderr() + dt * dt, "{} ± {}", s.mean(), s.stderr());
    // p = 1: E|v_dt| = e^{−dt/2}
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let db = BrownianDriver::new(78, i, 3, dt).increment(0);
            let (_, vs) = step(&m, &x, &[w.clone()], db.as_slice(), dt).unwrap();
            vs[0].norm()
        })
        .collect();
    let s = summarize(&vals);
    let want = (-0.5 * dt).exp();
    assert!((s.mean() - want).abs() < 3.0 * s.stderr() + dt * dt, "{} vs {want} ± {}", s.mean(), s.stderr());
}

#[test]
fn sphere_second_moment_is_conserved() {
    let m = ManifoldModel::from_ids("sphere:2:1", "none").unwrap();
    let x = v(&[0.0, 0.0, 1.0]);
    let cfg = FlowConfig::new(1e-2, 1.0);
    let n = 10_000u64;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let rec = integrate_driven(&m, &x, &[v(&[1.0, 0.0, 0.0])], &cfg, 5, i).unwrap();
            rec.jacobian_frames.unwrap().last().unwrap()[0].norm_squared()
        })
        .collect();
    let s = summarize(&vals);
    assert!((s.mean() - 1.0).abs() < 3.0 * s.stderr(), "{} ± {}", s.mean(), s.stderr());
}

#[test]
fn hyperbolic_same_increment_order_one() {
    let sys = Model::from_ids("hyperbolic", "none").unwrap();
    let sys = sys.system();
    let dts = [0.01, 0.005, 0.0025, 0.00125];
    let mut errs = Vec::new();
    for &dt in &dts {
        let cfg = FlowConfig::new(dt, 1.0);
        let n = cfg.n_steps().unwrap();
        let mut sq = 0.0;
        let paths = 200;
        for p in 0..paths {
            let inc = increments(31, p, 2, dt, n);
            let exact = hyperbolic_exact(0.0, 1.0, &inc, dt).unwrap();
            let rec = integrate_path(sys, &v(&[0.0, 1.0]), &cfg, &mut RecordedNoise { increments: inc, dt }).unwrap();
            sq += (rec.final_point() - exact.points.last().unwrap()).norm_squared();
        }
        errs.push((sq / paths as f64).sqrt());
    }
    let slope = log_slope(&dts, &errs);
    eprintln!("hyperbolic same-increment slope {slope:.3}");
    assert!((0.8..1.3).contains(&slope), "{errs:?} slope {slope}");
}

#[test]
fn hyperbolic_strong_order_against_fine_reference() {
    let sys = Model::from_ids("hyperbolic", "none").unwrap();
    let sys = sys.system();
    let fine = 1e-4;
    let n_fine = 10_000u64;
    let factors = [1000u64, 500, 250, 125];
    let paths = 200;
    let mut ex = vec![0.0; factors.len()];
    let mut ey = vec![0.0; factors.len()];
    for p in 0..paths {
        let inc = increments(41, p, 2, fine, n_fine);
        let exact = hyperbolic_exact(0.0, 1.0, &inc, fine).unwrap();
        let target = exact.points.last().unwrap();
        for (j, &f) in factors.iter().enumerate() {
            let cfg = FlowConfig::new(fine * f as f64, 1.0);
            let mut noise = CoarsenedNoise::new(BrownianDriver::new(41, p, 2, fine), f);
            let rec = integrate_path(sys, &v(&[0.0, 1.0]), &cfg, &mut noise).unwrap();
            let e = rec.final_point() - target;
            ex[j] += e[0] * e[0];
            ey[j] += e[1] * e[1];
        }
    }
    let dts: Vec<f64> = factors.iter().map(|f| fine * *f as f64).collect();
    let rx: Vec<f64> = ex.iter().map(|s| (s / paths as f64).sqrt()).collect();
    let ry: Vec<f64> = ey.iter().map(|s| (s / paths as f64).sqrt()).collect();
    let sx = log_slope(&dts, &rx);
    let sy = log_slope(&dts, &ry);
    eprintln!("hyperbolic fine-reference slopes: x {sx:.3}, y {sy:.3}");
    // x feels the Lévy area of (B¹, B²); y is a scalar equation
    assert!(sx >= 0.4, "x errors {rx:?} slope {sx}");
    assert!(sy >= 0.8, "y errors {ry:?} slope {sy}");
}

#[test]
fn langevin_strong_order_against_exact_transitions() {
    let l = Langevin { c: 1.0, gamma: 0.8, dim: 2 };
    let dts = [0.04, 0.02, 0.01, 0.005];
    let mut errs = Vec::new();
    for &dt in &dts {
        let cfg = FlowConfig::new(dt, 1.0);
        let n = cfg.n_steps().unwrap();
        let mut sq = 0.0;
        for p in 0..200 {
            let inc = increments(51, p, 2, dt, n);
            let exact = langevin_exact(l.c, l.gamma, &v(&[1.0, -0.5]), &inc, dt).unwrap();
            let rec = integrate_path(&l, &v(&[1.0, -0.5]), &cfg, &mut RecordedNoise { increments: inc, dt }).unwrap();
            sq += (rec.final_point() - exact.points.last().unwrap()).norm_squared();
        }
        errs.push((sq / 200.0).sqrt());
    }
    let slope = log_slope(&dts, &errs);
    assert!(slope >= 0.9, "{errs:?} slope {slope}");
}

#[test]
fn drift_only_paths_converge_at_least_first_order() {
    let m = ManifoldModel::from_ids("torus:1:0.5", "quadratic:0.4").unwrap();
    let x = v(&[1.0, 1.0, 0.5]);
    let x = m.retract(&x).unwrap();
    let endpoint = |dt: f64| {
        let cfg = FlowConfig::new(dt, 1.0);
        let n = cfg.n_steps().unwrap() as usize;
        let mut z = RecordedNoise { increments: vec![Vector::zeros(3); n], dt };
        integrate_path(&m, &x, &cfg, &mut z).unwrap().final_point().clone()
    };
    let reference = endpoint(1e-4);
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = dts.iter().map(|&dt| (&endpoint(dt) - &reference).norm()).collect();
    let slope = log_slope(&dts, &errs);
    assert!(slope >= 1.0, "{errs:?} slope {slope}");
}

#[test]
fn ks_stepper_matches_exact_langevin_law() {
    let l = Langevin { c: 1.0, gamma: 1.0, dim: 1 };
    let cfg = FlowConfig::new(1e-2, 1.0);
    let n = 2000;
    let stepper: Vec<f64> = (0..n).map(|p| integrate_driven(&l, &v(&[1.0]), &[], &cfg, 61, p).unwrap().final_point()[0]).collect();
    let exact: Vec<f64> = (0..n)
        .map(|p| {
            let inc = increments(62, p, 1, 1e-2, 100);
            langevin_exact(1.0, 1.0, &v(&[1.0]), &inc, 1e-2).unwrap().points.last().unwrap()[0]
        })
        .collect();
    let d = ks_statistic(&stepper, &exact);
    let crit = ks_critical(0.01, n as usize, n as usize);
    assert!(d < crit, "KS {d} ≥ {crit}");
}

#[test]
fn ito_and_stratonovich_steppers_agree() {
    let m = ManifoldModel::from_ids("sphere:2:1", "quadratic:0.2").unwrap();
    let x0 = v(&[0.6, 0.0, 0.8]);
    for dt in [1e-2, 1e-3] {
        let n = (1.0 / dt) as u64;
        let mut sq = 0.0;
        let paths = 100;
        for p in 0..paths {
            let inc = increments(71, p, 3, dt, n);
            let mut xs = x0.clone();
            let mut xi = x0.clone();
            for db in &inc {
                xs = step(&m, &xs, &[], db.as_slice(), dt).unwrap().0;
                xi = ito_step(&m, &xi, db.as_slice(), dt).unwrap();
            }
            sq += (&xs - &xi).norm_squared();
        }
        let rms = (sq / paths as f64).sqrt();
        assert!(rms <= 2.0 * dt.sqrt(), "dt {dt}: rms {rms}");
    }
}

#[test]
fn paths_stay_on_manifold_and_replay_bitwise() {
    let cfg = FlowConfig::new(1e-2, 2.0);
    for (id, drift, x) in [
        ("sphere:3:2", "quadratic:0.1", v(&[0.0, 0.0, 0.0, 2.0])),
        ("torus:1:0.5", "none", v(&[1.5, 0.0, 0.0])),
        ("hyperboloid", "quadratic:1", v(&[0.0, 0.0, 1.0])),
        ("surface-of-revolution:wave", "none", v(&[])),
    ] {
        let m = Model::from_ids(id, drift).unwrap();
        let sys = m.system();
        let x = if x.len() == 0 { m.manifold().unwrap().point_from_coords(&[0.2, 0.0]).unwrap() } else { x };
        let basis = sys.tangent_basis(&x);
        let a = integrate_driven(sys, &x, &basis, &cfg, 99, 3).unwrap();
        let b = integrate_driven(sys, &x, &basis, &cfg, 99, 3).unwrap();
        assert_eq!(a, b);
        let c = integrate_driven(sys, &x, &basis, &cfg, 99, 4).unwrap();
        assert_ne!(a.points, c.points);
        for p in &a.points {
            assert!(sys.residual(p) <= cfg.retraction_tolerance, "{id}");
        }
        for (p, frame) in a.points.iter().zip(a.jacobian_frames.as_ref().unwrap()) {
            for w in frame {
                assert!((&sys.project_tangent(p, w) - w).norm() <= 1e-10 * w.norm().max(1.0));
            }
        }
    }
}

#[test]
fn stride_sums_increments_and_truncates_at_exit() {
    let m = Model::from_ids("euclidean:2", "none").unwrap();
    let sys = m.system();
    let cfg = FlowConfig::new(1e-2, 1.0).with_stride(10);
    let rec = integrate_driven(sys, &v(&[0.0, 0.0]), &[], &cfg, 3, 0).unwrap();
    assert_eq!(rec.times.len(), 11);
    let total = rec.increments.iter().fold(Vector::zeros(2), |a, b| &a + b);
    assert!((&(rec.final_point() - &rec.points[0]) - &total).max_abs() < 1e-12);
    let cfg = FlowConfig::new(1e-2, 100.0).with_exit(ExitRule::leave("ball", RegionSpec::centered_ball(2, 1.0)));
    let rec = integrate_driven(sys, &v(&[0.0, 0.0]), &[], &cfg, 3, 0).unwrap();
    match &rec.status {
        PathStatus::Exited { region, t } => {
            assert_eq!(region, "ball");
            assert_eq!(*t, rec.final_time());
            assert!(rec.final_point().norm() >= 1.0);
            assert!(rec.points[..rec.points.len() - 1].iter().all(|p| p.norm() < 1.0));
        }
        s => panic!("unexpected {s:?}"),
    }
}

#[test]
fn explosion_flag_implies_norm_bound() {
    let m = Model::from_ids("constant-drift:1,0", "none").unwrap();
    let cfg = FlowConfig::new(1e-2, 10.0).with_explosion_radius(3.0);
    let rec = integrate_driven(m.system(), &v(&[0.0, 0.0]), &[], &cfg, 1, 0).unwrap();
    match rec.status {
        PathStatus::Exploded { t } => {
            assert!((t - 3.0).abs() < 1.5e-2, "{t}");
            assert!(rec.final_point().norm() >= 3.0);
        }
        s => panic!("unexpected {s:?}"),
    }
}

#[test]
fn damped_transport_examples() {
    let cfg = FlowConfig::new(1e-3, 1.0);
    let s2 = ManifoldModel::from_ids("sphere:2:1", "none").unwrap();
    for p in 0..3 {
        let rec = integrate_driven(&s2, &v(&[0.0, 0.0, 1.0]), &[], &cfg, 81, p).unwrap();
        let w = damped_transport(&s2, &rec, &v(&[0.0, 2.0, 0.0])).unwrap();
        let got = w.last().unwrap().components.norm();
        assert!((got - 2.0 * (-0.5f64).exp()).abs() < 1e-3, "{got}");
        for (tv, x) in w.iter().zip(&rec.points) {
            assert!(tv.components.dot(x).abs() < 1e-10);
        }
    }
    let flat = ManifoldModel::from_ids("euclidean:2", "none").unwrap();
    let rec = integrate_driven(&flat, &v(&[0.0, 0.0]), &[], &cfg, 82, 0).unwrap();
    let w = damped_transport(&flat, &rec, &v(&[0.3, -0.4])).unwrap();
    assert!(w.iter().all(|tv| (&tv.components - &v(&[0.3, -0.4])).max_abs() < 1e-14));
    let c: f64 = 0.7;
    let g = ManifoldModel::from_ids("euclidean:2", &format!("gaussian:{c}")).unwrap();
    let rec = integrate_driven(&g, &v(&[0.5, 0.0]), &[], &cfg, 83, 0).unwrap();
    let w = damped_transport(&g, &rec, &v(&[1.0, 1.0])).unwrap();
    let got = w.last().unwrap().components.norm();
    let want = 2f64.sqrt() * (-c).exp();
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn damped_transport_rejects_stopped_paths() {
    let flat = ManifoldModel::from_ids("euclidean:2", "none").unwrap();
    let cfg = FlowConfig::new(1e-2, 100.0).with_exit(ExitRule::leave("ball", RegionSpec::centered_ball(2, 0.5)));
    let rec = integrate_driven(&flat, &v(&[0.0, 0.0]), &[], &cfg, 1, 0).unwrap();
    assert!(!rec.status.is_completed());
    assert!(damped_transport(&flat, &rec, &v(&[1.0, 0.0])).is_err());
}

fn segment(a: &Vector, b: &Vector, k: usize) -> SampledCurve {
    let points: Vec<Vector> = (0..k).map(|i| {
        let s = i as f64 / (k - 1) as f64;
        &a.scaled(1.0 - s) + &b.scaled(s)
    }).collect();
    let d = b - a;
    SampledCurve { tangents: vec![d; k], points, ds: 1.0 / (k - 1) as f64 }
}

#[test]
fn flat_curve_translates_rigidly() {
    let m = Model::from_ids("euclidean:2", "none").unwrap();
    let cfg = FlowConfig::new(1e-2, 1.0).with_stride(10);
    let curve = segment(&v(&[-1.0, 0.0]), &v(&[1.0, 0.5]), 21);
    let out = transport_curve(m.system(), &curve, &cfg, || BrownianDriver::new(5, 0, 2, 1e-2)).unwrap();
    let l0 = SampledCurve::polyline_length(&curve.points);
    for (l, b) in out.lengths.iter().zip(&out.bounds) {
        assert!((l - l0).abs() < 1e-12);
        assert!((b - l0).abs() < 1e-12);
    }
}

#[test]
fn punctured_plane_curve_reaches_hole_without_tearing() {
    let m = Model::from_ids("punctured-plane:0.05", "none").unwrap();
    let cfg = FlowConfig::new(1e-2, 1.0).with_stride(10);
    let curve = segment(&v(&[-0.5, 0.2]), &v(&[0.5, 0.2]), 41);
    let l0 = SampledCurve::polyline_length(&curve.points);
    let mut hit = 0;
    let trials = 50;
    for p in 0..trials {
        let out = transport_curve(m.system(), &curve, &cfg, || BrownianDriver::new(91, p, 2, 1e-2)).unwrap();
        assert!(out.lengths.iter().all(|l| (l - l0).abs() < 1e-12));
        if *out.min_norms.last().unwrap() < 0.05 {
            hit += 1;
        }
    }
    assert!(hit > 0 && hit < trials, "{hit} of {trials} curves met the hole");
}

#[test]
fn sphere_quarter_circle_length_bound() {
    let m = Model::from_ids("sphere:2:1", "none").unwrap();
    let k = 65;
    let points: Vec<Vector> = (0..k).map(|i| {
        let s = FRAC_PI_2 * i as f64 / (k - 1) as f64;
        v(&[s.cos(), s.sin(), 0.0])
    }).collect();
    let tangents: Vec<Vector> = (0..k).map(|i| {
        let s = FRAC_PI_2 * i as f64 / (k - 1) as f64;
        v(&[-s.sin(), s.cos(), 0.0])
    }).collect();
    let curve = SampledCurve { points, tangents, ds: FRAC_PI_2 / (k - 1) as f64 };
    let cfg = FlowConfig::new(1e-3, 1.0).with_stride(100);
    for p in 0..5 {
        let out = transport_curve(m.system(), &curve, &cfg, || BrownianDriver::new(95, p, 3, 1e-3)).unwrap();
        assert!(out.status.is_completed());
        for (l, b) in out.lengths.iter().zip(&out.bounds) {
            assert!(*l <= b + 1e-2, "{l} > {b}");
        }
    }
}

#[test]
fn trajectory_dump_format() {
    let m = Model::from_ids("euclidean:2", "none").unwrap();
    let cfg = FlowConfig::new(0.5, 1.0);
    let recs: Vec<_> = (0..2).map(|p| integrate_driven(m.system(), &v(&[0.0, 0.0]), &[], &cfg, 7, p).unwrap()).collect();
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &recs, &cfg.fingerprint("euclidean:2"), 7).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# fingerprint=") && lines[0].ends_with("seed=7"));
    assert_eq!(lines[1], format!("{TRAJECTORY_HEADER},x1,x2,status"));
    assert_eq!(lines.len(), 2 + 6);
    assert!(lines[2].starts_with("0,0") && lines[2].ends_with(",running"));
    assert!(lines[4].ends_with(",completed"));
    let fields: Vec<&str> = lines[7].split(',').collect();
    assert_eq!(fields[0], "1");
    let x1: f64 = fields[2].parse().unwrap();
    assert_eq!(x1, recs[1].final_point()[0]);
}
