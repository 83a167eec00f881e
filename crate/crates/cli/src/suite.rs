//! Named bundles of acceptance checks with their targets and tolerances.

use std::f64::consts::FRAC_1_SQRT_2;

use geomflow::diagnostics::{ergodic_average, explosion_probe, TANIGUCHI_MARGIN};
use geomflow::estimators::{
    bismut_gradient, grad_log_heat_kernel_ou, intertwining_check, mc_semigroup, moment_exponent, FitWindow,
    MomentMethod, MomentOptions, MomentTarget, DEFAULT_EPSILONS,
};
use geomflow::flows::{integrate_driven, integrate_path, integrate_with_jacobian};
use geomflow::oracles::{hyperbolic_exact, sphere_cap_fraction, sphere_moment_exponent, torus_first_moment, OuKernel};
use geomflow::rng::RecordedNoise;
use geomflow::stats::{ols, summarize};
use geomflow::{
    BrownianDriver, Executor, FlowConfig, ManifoldModel, Model, OracleCatalog, RegionSpec, Result,
    Sampling, TestFunction, Vector,
};

pub const SUITES: [&str; 2] = ["paper-examples", "invariants"];

const SEED: u64 = 20261014;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub criterion: String,
    pub target: String,
    pub estimate: String,
    pub tolerance: String,
    pub pass: bool,
}

/// Path counts and tolerances; quick runs use a tenth of the paths and
/// twice the tolerances.
#[derive(Debug, Clone)]
pub struct Scale {
    pub quick: bool,
    pub executor: Executor,
}

impl Scale {
    pub fn new(quick: bool, executor: Executor) -> Self {
        Scale { quick, executor }
    }

    fn paths(&self, n: u64) -> u64 {
        if self.quick { (n / 10).max(1) } else { n }
    }

    fn tol(&self, t: f64) -> f64 {
        if self.quick { 2.0 * t } else { t }
    }

    fn sampling(&self, n: u64) -> Sampling {
        Sampling::new(self.paths(n), SEED).with_executor(self.executor.clone())
    }
}

fn row(criterion: impl Into<String>, target: impl Into<String>, estimate: impl Into<String>, tolerance: impl Into<String>, pass: bool) -> CriterionRow {
    CriterionRow { criterion: criterion.into(), target: target.into(), estimate: estimate.into(), tolerance: tolerance.into(), pass }
}

/// Turn an error inside a criterion into a failing row.
fn guard(name: &str, f: impl FnOnce() -> Result<Vec<CriterionRow>>) -> Vec<CriterionRow> {
    match f() {
        Ok(r) => r,
        Err(e) => vec![row(name, "-", format!("error: {e}"), "-", false)],
    }
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_slice(xs)
}

fn model(id: &str, drift: &str) -> Result<Model> {
    Model::from_ids(id, drift)
}

pub fn c1_sphere_moment_exponent(s: &Scale) -> Vec<CriterionRow> {
    guard("1 sphere moment exponent", || {
        let m = model("sphere:2:1", "none")?;
        let times: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
        let cfg = FlowConfig::new(1e-3, 4.0);
        let opts = MomentOptions {
            target: MomentTarget::Direction(v(&[1.0, 0.0, 0.0])),
            method: MomentMethod::LogNormal,
            window: FitWindow::All,
        };
        let tol = s.tol(0.05);
        let mut out = Vec::new();
        for p in [1.0, 2.0, 3.0] {
            let r = moment_exponent(m.system(), &v(&[0.0, 0.0, 1.0]), p, &times, &opts, &cfg, &s.sampling(10_000))?;
            let want = sphere_moment_exponent(2, 1.0, p);
            out.push(row(
                format!("1 sphere S²(1) moment exponent p={p}"),
                format!("{want:+.3}"),
                format!("{:+.4}", r.slope),
                format!("±{tol}"),
                (r.slope - want).abs() <= tol,
            ));
        }
        Ok(out)
    })
}

pub fn c2_sphere_h_form(s: &Scale) -> Vec<CriterionRow> {
    guard("2 sphere H_p", || {
        let mut d = BrownianDriver::new(SEED, 2, 6, 1.0);
        let mut z = [0.0; 6];
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            d.standard_normals(k, &mut z);
            let n = 2 + (k as usize % 2);
            let r = (0.5 * z[0]).exp();
            let p = 2.5 + 1.5 * z[1];
            let m = ManifoldModel::from_ids(&format!("sphere:{n}:{r:?}"), "none")?;
            let raw = Vector::from_slice(&z[2..n + 3]);
            let x = raw.scaled(r / raw.norm());
            let e = Vector::from_iter((0..=n).map(|i| z[(i + 3) % 6] + 0.1 * i as f64));
            let tv = m.tangent_project(&x, &e)?;
            let h = m.h_quadratic_form(&tv, p)?;
            let want = (p - n as f64) * tv.components.norm_squared() / (r * r);
            worst = worst.max((h - want).abs());
        }
        let tol = s.tol(1e-8);
        Ok(vec![row("2 sphere H_p vs (p−n)|v|²/r², 100 draws", "0", format!("{worst:.2e}"), format!("≤{tol:.0e}"), worst <= tol)])
    })
}

pub fn c3_langevin_jacobian(s: &Scale) -> Vec<CriterionRow> {
    guard("3 Langevin Jacobian", || {
        let m = model("langevin:1:1:1", "none")?;
        let cfg = FlowConfig::new(1e-3, 1.0);
        let mut noise = BrownianDriver::new(SEED, 0, 1, cfg.dt);
        let tr = integrate_with_jacobian(m.system(), &v(&[0.5]), &[v(&[1.0])], &cfg, &mut noise)?;
        let tf = tr.jacobian_frames.as_ref().and_then(|f| f.last()).map(|f| f[0].norm()).unwrap_or(f64::NAN);
        let want = OracleCatalog::standard().eval("langevin-jacobian", &[("c", 1.0), ("t", 1.0)])?;
        let rel = (tf - want).abs() / want;
        let tol = s.tol(2e-3);
        Ok(vec![row("3 Langevin |TF_1| pathwise, c=1", format!("{want:.6}"), format!("{tf:.6} (rel {rel:.1e})"), format!("rel ≤{tol:.0e}"), rel <= tol)])
    })
}

pub fn c4_bismut_ou(s: &Scale) -> Vec<CriterionRow> {
    guard("4 Bismut gradient OU", || {
        let m = model("langevin:1:1:1", "none")?;
        let cfg = FlowConfig::new(1e-3, 1.0);
        let f = TestFunction::Coord(0);
        let e = bismut_gradient(m.system(), |y| f.value(y), &v(&[0.0]), &v(&[1.0]), 1.0, &cfg, &s.sampling(10_000))?;
        let want = (-1.0f64).exp();
        let k = s.tol(3.0);
        let cap = s.tol(5e-3);
        Ok(vec![
            row(
                "4 Bismut d(P_1 x)(1) on OU, within k·stderr",
                format!("{want:.5}"),
                format!("{:.5} ± {:.5}", e.value, e.stderr),
                format!("{k}σ"),
                (e.value - want).abs() <= k * e.stderr,
            ),
            row("4 Bismut stderr at 10⁴ paths", format!("≤{cap:.0e}"), format!("{:.3e}", e.stderr), "-", e.stderr <= cap),
        ])
    })
}

pub fn c5_intertwining(s: &Scale) -> Vec<CriterionRow> {
    let cases: [(&str, &str, TestFunction, Vector, Vector); 3] = [
        ("euclidean:2", "flat R²", TestFunction::Sin(0), v(&[0.3, -0.2]), v(&[1.0, 0.0])),
        ("langevin:1:1:1", "Langevin", TestFunction::Sin(0), v(&[0.4]), v(&[1.0])),
        ("sphere:2:1", "S²(1)", TestFunction::Harmonic(2), v(&[1.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0])),
    ];
    let mut out = Vec::new();
    for (id, label, f, x, w) in cases {
        out.extend(guard(&format!("5 intertwining {label}"), || {
            let m = model(id, "none")?;
            let cfg = FlowConfig::new(1e-3, 1.0);
            let r = intertwining_check(m.system(), &f, &x, &w, 1.0, &DEFAULT_EPSILONS, 10.0, &cfg, &s.sampling(10_000))?;
            // worst gap as a fraction of its allowance 3σ + 10ε
            let mut pairs = Vec::new();
            if let Some(b) = &r.bismut {
                pairs.push((&r.delta_pt, b, 0.0));
            }
            for fd in &r.finite_differences {
                pairs.push((&fd.estimate, &r.delta_pt, fd.epsilon));
                if let Some(b) = &r.bismut {
                    pairs.push((&fd.estimate, b, fd.epsilon));
                }
            }
            let worst = pairs
                .iter()
                .map(|(a, b, eps)| {
                    let sig = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                    (a.value - b.value).abs() / s.tol(3.0 * sig + 10.0 * eps)
                })
                .fold(0.0, f64::max);
            let bis = r.bismut.as_ref().map_or("-".to_string(), |b| format!("{:.4}", b.value));
            Ok(vec![row(
                format!("5 intertwining {label} ({f}): FD/δP_t/Bismut"),
                "gap/allowance ≤ 1",
                format!("{worst:.3} (δP_t {:.4}, Bismut {bis})", r.delta_pt.value),
                if s.quick { "2(3σ+10ε)" } else { "3σ+10ε" },
                worst <= 1.0,
            )])
        }));
    }
    out
}

pub fn c6_torus_first_moment(s: &Scale) -> Vec<CriterionRow> {
    guard("6 torus first moment", || {
        let a = FRAC_1_SQRT_2;
        let m = model(&format!("flat-torus:{a:?}:{a:?}"), "none")?;
        let x = m.manifold().expect("gradient model").point_from_coords(&[0.0, 0.0])?;
        let times = [0.25, 0.5, 1.0];
        let opts = MomentOptions {
            target: MomentTarget::Direction(v(&[0.0, 1.0, 0.0, 0.0])),
            method: MomentMethod::SampleMean,
            window: FitWindow::All,
        };
        let cfg = FlowConfig::new(1e-3, 1.0);
        let r = moment_exponent(m.system(), &x, 1.0, &times, &opts, &cfg, &s.sampling(20_000))?;
        let want = torus_first_moment(a, a)?;
        let tol = s.tol(0.02);
        Ok(times
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let e = r.sample_mean_log_moments[i].exp();
                row(format!("6 flat torus a=b=1/√2 E|T_xF_t v| t={t}"), format!("{want}"), format!("{e:.4}"), format!("±{tol}"), (e - want).abs() <= tol)
            })
            .collect())
    })
}

pub fn c7_grad_log_kernel(s: &Scale) -> Vec<CriterionRow> {
    guard("7 grad log kernel", || {
        let e = grad_log_heat_kernel_ou(1.0, 1.0, 0.0, 1.0, 1.0, 1000, &s.sampling(10_000))?;
        let want = OuKernel::new(1.0, 1.0, 1.0)?.dlog_dx(0.0, 1.0);
        let k = s.tol(3.0);
        Ok(vec![row(
            "7 OU ∂ₓlog p_1(0,1) by bridges",
            format!("{want:.5}"),
            format!("{:.5} ± {:.5}", e.value, e.stderr),
            format!("{k}σ"),
            (e.value - want).abs() <= k * e.stderr,
        )])
    })
}

pub fn c8_taniguchi(s: &Scale) -> Vec<CriterionRow> {
    guard("8 Taniguchi explosion", || {
        let m = model("taniguchi:0.5", "none")?;
        let cfg = FlowConfig::new(1e-3, 50.0);
        let r = explosion_probe(&m, &[v(&[0.5, 0.0])], &[50.0], TANIGUCHI_MARGIN, &cfg, &s.sampling(10_000))?;
        let e = &r.rows[0];
        let z_min = 5.0 / s.tol(1.0);
        Ok(vec![row(
            "8 Taniguchi ε=0.5 boundary reach by T=50",
            "> 0",
            format!("{:.4} ± {:.4} (z {:.1})", e.fraction, e.stderr, e.z()),
            format!("z ≥ {z_min}"),
            e.z() >= z_min,
        )])
    })
}

pub fn c9_ergodic(s: &Scale) -> Vec<CriterionRow> {
    guard("9 ergodic average", || {
        let m = ManifoldModel::from_ids("sphere:2:1", "none")?;
        let k = RegionSpec::from_id("cap:0", 3)?;
        let cfg = FlowConfig::new(1e-3, 5.0);
        let times = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = ergodic_average(&m, &k, &v(&[0.0, 0.0, 1.0]), &times, &cfg, &s.sampling(10_000))?;
        let last = r.estimates.last().expect("non-empty grid");
        let want = sphere_cap_fraction(0.0);
        let tol = s.tol(0.02);
        Ok(vec![row(
            "9 S²(1) half cap P̂_5 χ_K from the pole",
            format!("{want}"),
            format!("{:.4} ± {:.4} (quadrature {:.4})", last.value, last.stderr, r.target),
            format!("±{tol}"),
            (last.value - want).abs() <= tol,
        )])
    })
}

pub fn c11_hyperbolic(s: &Scale) -> Vec<CriterionRow> {
    guard("11 hyperbolic first moment", || {
        let dt = 1e-3;
        let times: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
        let steps: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
        let n_steps = *steps.last().unwrap() as u64;
        let n = s.paths(10_000);
        let want = OracleCatalog::standard().eval("hyperbolic-moment-exponent", &[])?;
        let horizontal = v(&[1.0, 0.0]);
        let logs: Vec<Result<Vec<f64>>> = s.executor.map_paths(n, |i| {
            let mut d = BrownianDriver::new(SEED, i, 2, dt);
            let inc: Vec<Vector> = (0..n_steps).map(|k| d.increment(k)).collect();
            let p = hyperbolic_exact(0.0, 1.0, &inc, dt)?;
            Ok(steps.iter().map(|&k| p.norm_ratio(k, &horizontal).ln()).collect())
        });
        let logs: Vec<Vec<f64>> = logs.into_iter().collect::<Result<_>>()?;
        let lm: Vec<f64> = (0..times.len())
            .map(|j| {
                let w = summarize(&logs.iter().map(|r| r[j]).collect::<Vec<_>>());
                w.mean() + 0.5 * w.variance()
            })
            .collect();
        let exact = ols(&times, &lm).expect("grid has 8 points").slope;
        let m = model("hyperbolic", "none")?;
        let opts = MomentOptions { target: MomentTarget::Direction(horizontal.clone()), method: MomentMethod::LogNormal, window: FitWindow::All };
        let cfg = FlowConfig::new(dt, 2.0);
        let generic = moment_exponent(m.system(), &v(&[0.0, 1.0]), 1.0, &times, &opts, &cfg, &s.sampling(10_000))?.slope;
        let (t1, t2) = (s.tol(0.1), s.tol(0.15));
        Ok(vec![
            row("11 hyperbolic horizontal slope, exact flow", format!("{want:+}"), format!("{exact:+.4}"), format!("±{t1}"), (exact - want).abs() <= t1),
            row("11 hyperbolic horizontal slope, generic stepper", format!("{want:+}"), format!("{generic:+.4}"), format!("±{t2}"), (generic - want).abs() <= t2),
        ])
    })
}

/// Random chart points on the two-dimensional catalog manifolds.
fn surface_models() -> Result<Vec<ManifoldModel>> {
    let a = FRAC_1_SQRT_2;
    [("sphere:2:1", "none"), ("torus:1:0.5", "quadratic:0.3"), (&format!("flat-torus:{a:?}:{a:?}") as &str, "none"), ("cylinder", "none"), ("hyperboloid", "quadratic:1")]
        .iter()
        .map(|(id, d)| ManifoldModel::from_ids(id, d))
        .collect()
}

fn chart_points(m: &ManifoldModel, n: u64, stream: u64) -> Result<Vec<Vector>> {
    let mut d = BrownianDriver::new(SEED, stream, 2, 1.0);
    let mut z = [0.0; 2];
    (0..n)
        .map(|k| {
            d.standard_normals(k, &mut z);
            m.manifold.point_from_coords(&[z[0].abs(), 3.0 * z[1]])
        })
        .collect()
}

fn draws(stream: u64, dim: usize, n: u64) -> Vec<Vector> {
    let mut d = BrownianDriver::new(SEED, stream, dim, 1.0);
    (0..n).map(|k| d.increment(k)).collect()
}

pub fn inv_jacobian_fd(s: &Scale) -> Vec<CriterionRow> {
    let cases = [("sphere:2:1", "quadratic:0.5", v(&[0.6, 0.0, 0.8]), v(&[0.0, 1.0, 0.0])), ("torus:1:0.5", "quadratic:0.3", v(&[1.5, 0.0, 0.0]), v(&[0.0, 0.6, 0.8]))];
    let mut out = Vec::new();
    for (id, drift, x, w) in cases {
        out.extend(guard(&format!("10 Jacobian vs FD {id}"), || {
            let m = model(id, drift)?;
            let sys = m.system();
            let cfg = FlowConfig::new(1e-3, 1.0);
            let n = cfg.n_steps()?;
            let mut d = BrownianDriver::new(SEED, 10, sys.noise_dim(), cfg.dt);
            let noise = RecordedNoise { increments: (0..n).map(|k| d.increment(k)).collect(), dt: cfg.dt };
            let base = integrate_with_jacobian(sys, &x, &[w.clone()], &cfg, &mut noise.clone())?;
            let tv = base.jacobian_frames.as_ref().and_then(|f| f.last()).map(|f| f[0].clone()).expect("recorded frames");
            let eps = [1e-2, 1e-3, 1e-4];
            let mut logs = Vec::new();
            for &e in &eps {
                let mut y = x.clone();
                y.axpy(e, &w);
                let pert = integrate_path(sys, &sys.retract(&y)?, &cfg, &mut noise.clone())?;
                let mut dx = pert.final_point() - base.final_point();
                dx.axpy(-e, &tv);
                logs.push(dx.norm().ln());
            }
            let le: Vec<f64> = eps.iter().map(|e: &f64| e.ln()).collect();
            let slope = ols(&le, &logs).expect("three points").slope;
            let tol = s.tol(0.3);
            Ok(vec![row(format!("10 Jacobian vs FD second order, {id} {drift}"), "2", format!("{slope:.3}"), format!("±{tol}"), (slope - 2.0).abs() <= tol)])
        }));
    }
    out
}

pub fn inv_gradient_identity(s: &Scale) -> Vec<CriterionRow> {
    guard("10 gradient identity", || {
        let mut worst: f64 = 0.0;
        for (j, m) in surface_models()?.iter().enumerate() {
            let dim = m.ambient_dim();
            for x in chart_points(m, 40, 100 + j as u64)? {
                let mut sum = Vector::zeros(dim);
                for i in 0..dim {
                    let xi = m.tangent_project(&x, &Vector::basis(dim, i))?;
                    sum += &m.nabla_x(&xi, i + 1)?.components;
                }
                worst = worst.max(sum.max_abs());
            }
        }
        let tol = s.tol(1e-8);
        Ok(vec![row("10 gradient identity Σ∇Xⁱ(Xⁱ) = 0, 5 surfaces", "0", format!("{worst:.2e}"), format!("≤{tol:.0e}"), worst <= tol)])
    })
}

pub fn inv_projection(s: &Scale) -> Vec<CriterionRow> {
    guard("10 projector", || {
        let (mut proj, mut sym, mut pair, mut retr): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for (j, m) in surface_models()?.iter().enumerate() {
            let dim = m.ambient_dim();
            let es = draws(200 + j as u64, dim, 120);
            for (k, x) in chart_points(m, 40, 300 + j as u64)?.iter().enumerate() {
                let (e1, e2, e3) = (&es[3 * k], &es[3 * k + 1], &es[3 * k + 2]);
                let t = m.tangent_project(x, e1)?;
                let nrm = m.normal_project(x, e1)?;
                let back = &(&t.components + &nrm) - e1;
                let again = &m.tangent_project(x, &t.components)?.components - &t.components;
                proj = proj.max(back.max_abs()).max(again.max_abs());
                let u = m.tangent_project(x, e2)?;
                let a_tu = m.second_fundamental_form(&t, &u)?;
                let a_ut = m.second_fundamental_form(&u, &t)?;
                sym = sym.max((&a_tu - &a_ut).max_abs());
                let nu = m.normal_project(x, e3)?;
                let shape = m.shape_operator(&t, &nu)?;
                pair = pair.max((a_tu.dot(&nu) - shape.components.dot(&u.components)).abs());
                let mut y = x.clone();
                y.axpy(1e-3, &m.normal_project(x, e2)?);
                retr = retr.max((&m.retract(&y)? - x).max_abs());
            }
        }
        let (t12, t10, t8) = (s.tol(1e-12), s.tol(1e-10), s.tol(1e-8));
        Ok(vec![
            row("10 projector P+N = I and P² = P", "0", format!("{proj:.2e}"), format!("≤{t12:.0e}"), proj <= t12),
            row("10 second fundamental form symmetric", "0", format!("{sym:.2e}"), format!("≤{t10:.0e}"), sym <= t10),
            row("10 ⟨α(u,v),ν⟩ = ⟨A_ν u, v⟩", "0", format!("{pair:.2e}"), format!("≤{t10:.0e}"), pair <= t10),
            row("10 retraction undoes a normal offset", "0", format!("{retr:.2e}"), format!("≤{t8:.0e}"), retr <= t8),
        ])
    })
}

pub fn inv_h_affine(s: &Scale) -> Vec<CriterionRow> {
    guard("10 H_p affine", || {
        let mut worst: f64 = 0.0;
        for (j, m) in surface_models()?.iter().enumerate() {
            let es = draws(400 + j as u64, m.ambient_dim(), 40);
            for (k, x) in chart_points(m, 40, 500 + j as u64)?.iter().enumerate() {
                let t = m.tangent_project(x, &es[k])?;
                let a = m.second_fundamental_form(&t, &t)?;
                let slope = a.norm_squared() / t.components.norm_squared();
                let (h1, h3) = (m.h_quadratic_form(&t, 1.0)?, m.h_quadratic_form(&t, 3.0)?);
                worst = worst.max(((h3 - h1) / 2.0 - slope).abs() / slope.max(1.0));
            }
        }
        let tol = s.tol(1e-10);
        Ok(vec![row("10 H_p affine in p with slope |α(v,v)|²/|v|²", "0", format!("{worst:.2e}"), format!("≤{tol:.0e}"), worst <= tol)])
    })
}

pub fn inv_residuals(s: &Scale) -> Vec<CriterionRow> {
    guard("10 on-manifold residuals", || {
        let cfg = FlowConfig::new(1e-3, 1.0);
        let (mut worst, mut excess, mut accepted, mut total) = (0.0f64, 0.0f64, 0u64, 0u64);
        for (j, m) in surface_models()?.iter().enumerate() {
            let x = chart_points(m, 1, 600 + j as u64)?.remove(0);
            let n = s.paths(200);
            let recs: Vec<Result<(bool, f64)>> = s.executor.map_paths(n, |i| {
                let r = integrate_driven(m, &x, &[], &cfg, SEED + j as u64, i)?;
                let res = r.points.iter().map(|p| m.residual(p)).fold(0.0, f64::max);
                Ok((r.status.is_completed(), res))
            });
            for r in recs {
                let (ok, res) = r?;
                total += 1;
                if ok {
                    accepted += 1;
                    worst = worst.max(res);
                    excess = excess.max(res / m.tolerance);
                }
            }
        }
        Ok(vec![row(
            format!("10 residual on every accepted path ({accepted}/{total})"),
            "≤ model tolerance",
            format!("{worst:.2e} ({excess:.2}× tol)"),
            "1e-10",
            excess <= 1.0 && accepted > 0,
        )])
    })
}

pub fn inv_determinism(s: &Scale) -> Vec<CriterionRow> {
    guard("10 determinism", || {
        let m = model("sphere:2:1", "quadratic:0.5")?;
        let sys = m.system();
        let cfg = FlowConfig::new(1e-3, 1.0);
        let x = v(&[0.0, 0.6, 0.8]);
        let a = integrate_driven(sys, &x, &[v(&[1.0, 0.0, 0.0])], &cfg, SEED, 7)?;
        let b = integrate_driven(sys, &x, &[v(&[1.0, 0.0, 0.0])], &cfg, SEED, 7)?;
        let replay = a == b;
        let f = |y: &Vector| y[2];
        let n = s.paths(2000);
        let e1 = mc_semigroup(sys, f, &x, 1.0, &cfg, &Sampling::new(n, SEED).with_executor(Executor::serial()))?;
        let e4 = mc_semigroup(sys, f, &x, 1.0, &cfg, &Sampling::new(n, SEED).with_executor(Executor::with_threads(4)?))?;
        let threads = e1.value.to_bits() == e4.value.to_bits() && e1.stderr.to_bits() == e4.stderr.to_bits();
        Ok(vec![
            row("10 bit-identical trajectory replay", "identical", if replay { "identical" } else { "differs" }, "exact", replay),
            row("10 estimate independent of thread count (1 vs 4)", "identical", format!("{:.17e} / {:.17e}", e1.value, e4.value), "exact", threads),
        ])
    })
}

pub fn inv_stderr_scaling(s: &Scale) -> Vec<CriterionRow> {
    guard("10 stderr scaling", || {
        let m = model("sphere:2:1", "none")?;
        let cfg = FlowConfig::new(1e-2, 1.0);
        let x = v(&[0.0, 0.0, 1.0]);
        let n = s.paths(4000);
        let f = |y: &Vector| y[0];
        let a = mc_semigroup(m.system(), f, &x, 1.0, &cfg, &s.sampling(4000).with_paths(n))?;
        let b = mc_semigroup(m.system(), f, &x, 1.0, &cfg, &s.sampling(4000).with_paths(4 * n))?;
        let ratio = a.stderr / b.stderr;
        let tol = s.tol(0.2);
        Ok(vec![row("10 stderr ratio N vs 4N follows 1/√N", "2", format!("{ratio:.3}"), format!("±{:.0}%", 100.0 * tol), (ratio / 2.0 - 1.0).abs() <= tol)])
    })
}

pub fn paper_examples(s: &Scale) -> Vec<CriterionRow> {
    let mut out = Vec::new();
    for c in [
        c1_sphere_moment_exponent,
        c2_sphere_h_form,
        c3_langevin_jacobian,
        c4_bismut_ou,
        c5_intertwining,
        c6_torus_first_moment,
        c7_grad_log_kernel,
        c8_taniguchi,
        c9_ergodic,
        c11_hyperbolic,
    ] {
        out.extend(c(s));
    }
    out
}

pub fn invariants(s: &Scale) -> Vec<CriterionRow> {
    let mut out = Vec::new();
    for c in [inv_projection, inv_gradient_identity, inv_h_affine, inv_jacobian_fd, inv_residuals, inv_determinism, inv_stderr_scaling] {
        out.extend(c(s));
    }
    out
}

pub fn run_suite(name: &str, s: &Scale) -> std::result::Result<Vec<CriterionRow>, String> {
    match name {
        "paper-examples" => Ok(paper_examples(s)),
        "invariants" => Ok(invariants(s)),
        _ => Err(format!("unknown suite `{name}`; available suites: {}", SUITES.join(", "))),
    }
}

pub fn format_table(rows: &[CriterionRow]) -> String {
    let head = ["criterion", "target", "estimate", "tolerance", "verdict"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| [r.criterion.clone(), r.target.clone(), r.estimate.clone(), r.tolerance.clone(), if r.pass { "PASS" } else { "FAIL" }.to_string()])
        .collect();
    let mut w = head.map(|h| h.chars().count());
    for c in &cells {
        for (i, s) in c.iter().enumerate() {
            w[i] = w[i].max(s.chars().count());
        }
    }
    let line = |c: &[String]| {
        let mut s = c.iter().enumerate().map(|(i, x)| format!("{x}{}", " ".repeat(w[i] - x.chars().count()))).collect::<Vec<_>>().join("  ");
        s.truncate(s.trim_end().len());
        s + "\n"
    };
    let mut out = line(&head.map(String::from));
    out.push_str(&line(&w.map(|n| "-".repeat(n))));
    for c in &cells {
        out.push_str(&line(c));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    out.push_str(&format!("{passed}/{} passed\n", rows.len()));
    out
}
