//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p ricci-lab --test acceptance`; pass criterion
//! numbers as extra arguments to run a subset.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ricci_lab::atlas::{FrameMode, TorusSpec};
use ricci_lab::autodiff::Jet;
use ricci_lab::curvature::{conformal_ricci_closed_form, curvature_report, DerivativePlan};
use ricci_lab::deform::{build_deformed, build_ga, DeformationSpec, FACTOR_SUPPORT};
use ricci_lab::metric::{
    conformal_wrap, make_reference, CandidateSeed, FieldScalar, Fiber, FourierMode, FourierPhi, MetricField,
    PerturbationMode, PerturbationParams, QuadraticPhi, ReferenceMetric, ScalarField, ScalarFn, WarpProfile,
};
use ricci_lab::net::{build_net, default_verify_resolution, verify_net, CoveringNet};
use ricci_lab::search::{objective, search, Optimizer, SearchConfig, SearchTrace};
use ricci_lab::sweep::{report, sweep, SampleGrid, SweepStatus};
use ricci_lab::Result as LabResult;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(r: &mut ChaCha8Rng, count: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| r.random_range(lo..hi)).collect()).collect()
}

fn random_ball(r: &mut ChaCha8Rng, count: usize, n: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p: Vec<f64> = (0..n).map(|_| r.random_range(-radius..radius)).collect();
        if p.iter().map(|c| c * c).sum::<f64>() < radius * radius {
            out.push(p);
        }
    }
    out
}

fn field(m: ReferenceMetric) -> Arc<dyn MetricField> {
    Arc::new(make_reference(m).expect("valid reference metric"))
}

fn sphere3() -> ReferenceMetric {
    ReferenceMetric::RoundSphere { n: 3, radius: 1.0 }
}

fn poincare3() -> ReferenceMetric {
    ReferenceMetric::HyperbolicBall { n: 3 }
}

fn flat_torus3() -> ReferenceMetric {
    ReferenceMetric::FlatTorus {
        torus: TorusSpec::new(3, 2.0 * PI).unwrap(),
    }
}

const WARP_K: f64 = 0.5;

fn warped3() -> ReferenceMetric {
    ReferenceMetric::WarpedProduct {
        n: 3,
        warp: WarpProfile::Cosh { c: 1.0, k: WARP_K },
        fiber: Fiber::UnitSphere,
    }
}

/// Eigenvalues of `g⁻¹Ric` for `dt² + f(t)²·g_F` with `g_F` of constant
/// curvature `kappa` and dimension `m`, derived by hand:
/// radial `−m·f''/f`, fiber `((m−1)(kappa − f'²) − f·f'')/f²` (multiplicity `m`).
fn warped_oracle(f: f64, df: f64, d2f: f64, m: usize, kappa: f64) -> Vec<f64> {
    let mf = m as f64;
    let radial = -mf * d2f / f;
    let fiber = ((mf - 1.0) * (kappa - df * df) - f * d2f) / (f * f);
    let mut v = vec![radial];
    v.extend(std::iter::repeat(fiber).take(m));
    v.sort_by(f64::total_cmp);
    v
}

fn criterion_1() -> Check {
    let plan = DerivativePlan::ForwardMode;
    let mut r = rng(1);
    let mut worst = [0.0f64; 4];

    let flat = field(flat_torus3());
    for x in random_points(&mut r, 100, 3, 0.0, 2.0 * PI) {
        let rep = curvature_report(flat.as_ref(), &x, &plan).map_err(|e| e.to_string())?;
        for l in &rep.eigenvalues {
            worst[0] = worst[0].max(l.abs());
        }
    }
    ensure(worst[0] < 1e-10, || format!("flat torus |lambda| = {:e}", worst[0]))?;

    let sphere = field(sphere3());
    for x in random_points(&mut r, 100, 3, -3.0, 3.0) {
        let rep = curvature_report(sphere.as_ref(), &x, &plan).map_err(|e| e.to_string())?;
        for l in &rep.eigenvalues {
            worst[1] = worst[1].max((l - 2.0).abs());
        }
    }
    ensure(worst[1] < 1e-6, || format!("sphere |lambda - 2| = {:e}", worst[1]))?;

    let ball = field(poincare3());
    for x in random_ball(&mut r, 100, 3, 0.95) {
        let rep = curvature_report(ball.as_ref(), &x, &plan).map_err(|e| e.to_string())?;
        for l in &rep.eigenvalues {
            worst[2] = worst[2].max((l + 2.0).abs());
        }
    }
    ensure(worst[2] < 1e-6, || format!("Poincare |lambda + 2| = {:e}", worst[2]))?;

    let warped = field(warped3());
    for x in random_points(&mut r, 100, 3, -2.0, 2.0) {
        let rep = curvature_report(warped.as_ref(), &x, &plan).map_err(|e| e.to_string())?;
        let t = x[0];
        let f = (WARP_K * t).cosh();
        let df = WARP_K * (WARP_K * t).sinh();
        let d2f = WARP_K * WARP_K * f;
        let oracle = warped_oracle(f, df, d2f, 2, 1.0);
        for (l, o) in rep.eigenvalues.iter().zip(&oracle) {
            worst[3] = worst[3].max((l - o).abs());
        }
    }
    ensure(worst[3] < 1e-6, || format!("warped product deviation {:e}", worst[3]))?;

    Ok(format!(
        "max deviations: flat {:.1e}, sphere {:.1e}, Poincare {:.1e}, warped {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

/// `φ(x) = a·sin(x₀)·x₁ + b·x₂²`, a non-separable test factor.
struct MixedPhi {
    a: f64,
    b: f64,
}

impl ScalarFn for MixedPhi {
    fn dimension(&self) -> usize {
        3
    }

    fn describe(&self) -> String {
        "mixed".into()
    }

    fn eval<S: FieldScalar>(&self, x: &[S]) -> LabResult<S> {
        Ok(x[0].sin() * x[1] * self.a + x[2] * x[2] * self.b)
    }
}

fn criterion_2() -> Check {
    let plan = DerivativePlan::ForwardMode;
    let bases: Vec<(&str, ReferenceMetric, f64)> = vec![
        ("euclidean", ReferenceMetric::Euclidean { n: 3 }, 2.0),
        ("sphere", sphere3(), 2.0),
        ("Poincare", poincare3(), 0.7),
    ];
    let phis: Vec<(&str, Arc<dyn ScalarField>)> = vec![
        ("quadratic", Arc::new(QuadraticPhi { n: 3, coefficient: 0.1 })),
        (
            "fourier",
            Arc::new(FourierPhi {
                side: 2.0 * PI,
                n: 3,
                modes: vec![
                    FourierMode { wave: vec![1, 0, 2], amplitude: 0.2, phase: 0.3 },
                    FourierMode { wave: vec![0, -1, 1], amplitude: 0.1, phase: -1.1 },
                ],
            }),
        ),
        ("mixed", Arc::new(MixedPhi { a: 0.3, b: -0.15 })),
    ];
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for (bname, base, radius) in &bases {
        let base_field = field(base.clone());
        for (pname, phi) in &phis {
            let wrapped = conformal_wrap(base_field.clone(), phi.clone()).map_err(|e| e.to_string())?;
            for x in random_ball(&mut r, 50, 3, *radius) {
                let engine = curvature_report(&wrapped, &x, &plan).map_err(|e| e.to_string())?;
                let base_rep = curvature_report(base_field.as_ref(), &x, &plan).map_err(|e| e.to_string())?;
                let j = phi.value_jet(&Jet::seed(&x)).map_err(|e| e.to_string())?;
                let grad = j.grad[..3].to_vec();
                let hess: Vec<f64> = (0..9).map(|ij| j.hess[ij / 3][ij % 3]).collect();
                let closed = conformal_ricci_closed_form(&base_rep, &grad, &hess).map_err(|e| e.to_string())?;
                for (a, b) in engine.ricci.iter().zip(&closed) {
                    let dev = (a - b).abs();
                    worst = worst.max(dev);
                    ensure(dev < 1e-6, || format!("{bname} x {pname} at {x:?}: deviation {dev:e}"))?;
                }
            }
        }
    }
    Ok(format!("9 combinations x 50 points, max Ricci deviation {worst:.1e}"))
}

fn criterion_3() -> Check {
    let forward = DerivativePlan::ForwardMode;
    let central = DerivativePlan::CentralDifference { step: 1e-3, richardson: true };
    let cases: Vec<(&str, ReferenceMetric, Vec<Vec<f64>>)> = {
        let mut r = rng(3);
        vec![
            ("flat torus", flat_torus3(), random_points(&mut r, 25, 3, 0.0, 2.0 * PI)),
            ("sphere", sphere3(), random_points(&mut r, 25, 3, -2.0, 2.0)),
            ("Poincare", poincare3(), random_ball(&mut r, 25, 3, 0.7)),
            ("warped", warped3(), random_points(&mut r, 25, 3, -2.0, 2.0)),
        ]
    };
    let mut summary = Vec::new();
    for (name, m, pts) in cases {
        let f = field(m);
        let mut worst = 0.0f64;
        for x in &pts {
            let a = curvature_report(f.as_ref(), x, &forward).map_err(|e| e.to_string())?;
            let b = curvature_report(f.as_ref(), x, &central).map_err(|e| e.to_string())?;
            for (u, v) in a.ricci.iter().zip(&b.ricci) {
                worst = worst.max((u - v).abs());
            }
        }
        ensure(worst < 1e-4, || format!("{name}: forward vs central deviation {worst:e}"))?;
        summary.push(format!("{name} {worst:.1e}"));
    }
    Ok(format!("max Ricci deviation: {}", summary.join(", ")))
}

fn criterion_4() -> Check {
    let side = 2.0 * PI;
    let phi: Arc<dyn ScalarField> = Arc::new(FourierPhi {
        side,
        n: 2,
        modes: vec![
            FourierMode { wave: vec![1, 0], amplitude: 0.3, phase: 0.2 },
            FourierMode { wave: vec![1, 2], amplitude: 0.2, phase: 1.0 },
            FourierMode { wave: vec![0, 3], amplitude: 0.1, phase: -0.4 },
        ],
    });
    let base = field(ReferenceMetric::FlatTorus {
        torus: TorusSpec::new(2, side).unwrap(),
    });
    let g = conformal_wrap(base, phi).map_err(|e| e.to_string())?;
    let m = 256;
    let h = side / m as f64;
    let plan = DerivativePlan::ForwardMode;
    let (mut integral, mut area, mut max_abs) = (0.0, 0.0, 0.0f64);
    for i in 0..m {
        for j in 0..m {
            let x = [i as f64 * h, j as f64 * h];
            let rep = curvature_report(&g, &x, &plan).map_err(|e| e.to_string())?;
            let det = rep.metric[0] * rep.metric[3] - rep.metric[1] * rep.metric[2];
            let da = det.sqrt() * h * h;
            integral += rep.scalar * da;
            area += da;
            max_abs = max_abs.max(rep.scalar.abs());
        }
    }
    ensure(integral.abs() < 1e-3 * area, || {
        format!("|integral R dA| = {:e} vs area {area}", integral.abs())
    })?;
    ensure(max_abs > 1e-2, || "deformation is trivially flat".into())?;
    Ok(format!(
        "256^2 grid: integral R dA = {integral:.2e}, area {area:.4}, max |R| {max_abs:.3}"
    ))
}

fn criterion_5() -> Check {
    let mut lines = Vec::new();
    for n in [2usize, 3] {
        let spec = TorusSpec::new(n, 2.0 * PI).unwrap();
        for rho in [0.05, 0.1] {
            let mut mults = Vec::new();
            let mut counts = Vec::new();
            let mut slowest = Duration::ZERO;
            for seed in 0..5u64 {
                let t0 = Instant::now();
                let net = build_net(&spec, rho, seed).map_err(|e| e.to_string())?;
                let res = default_verify_resolution(&spec, rho);
                let net = verify_net(&net, res);
                let elapsed = t0.elapsed();
                slowest = slowest.max(elapsed);
                let c = net.conditions.expect("verified");
                ensure(c.separation && c.coverage, || {
                    format!("n={n} rho={rho} seed={seed}: {:?}", net.diagnostics)
                })?;
                ensure(c.multiplicity, || {
                    format!(
                        "n={n} rho={rho} seed={seed}: multiplicity {} above {}",
                        net.multiplicity_observed,
                        net.packing_bound()
                    )
                })?;
                ensure(elapsed < Duration::from_secs(120), || {
                    format!("n={n} rho={rho} seed={seed}: {elapsed:?} > 120 s")
                })?;
                mults.push(net.multiplicity_observed);
                counts.push(net.anchors.len());
            }
            lines.push(format!(
                "n={n} rho={rho}: anchors {:?}, multiplicity {:?} <= {}, slowest {:.1}s",
                counts,
                mults,
                5usize.pow(n as u32),
                slowest.as_secs_f64()
            ));
        }
    }
    Ok(lines.join("; "))
}

fn bumpy_seed(n: usize, scale: f64, seed: u64) -> CandidateSeed {
    let params = PerturbationParams::default_basis(n, PerturbationMode::FullTensor, 1);
    let mut r = rng(seed);
    let coeffs = (0..params.basis.len()).map(|_| scale * r.random_range(-1.0..1.0)).collect();
    CandidateSeed::from_params(params.with_coefficients(coeffs).unwrap()).unwrap()
}

fn criterion_6() -> Check {
    let spec = TorusSpec::new(3, 2.0 * PI).unwrap();
    let net = build_net(&spec, 0.1, 1).map_err(|e| e.to_string())?;
    let mut r = rng(6);
    // points biased towards anchors so the seed balls are exercised
    let mut pts = random_points(&mut r, 5000, 3, 0.0, 2.0 * PI);
    for k in 0..5000 {
        let a = &net.anchors[k % net.anchors.len()].position;
        pts.push(a.iter().map(|c| c + r.random_range(-0.25..0.25)).collect());
    }

    let flat_ga = build_ga(&net, &CandidateSeed::euclidean(3)).map_err(|e| e.to_string())?;
    let identity = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    for x in &pts {
        let g = flat_ga.eval(x).map_err(|e| e.to_string())?;
        ensure(g == identity, || format!("Euclidean seed not flat at {x:?}: {g:?}"))?;
    }

    let seed = bumpy_seed(3, 0.05, 60);
    let ga = build_ga(&net, &seed).map_err(|e| e.to_string())?;
    let undeformed = build_deformed(&DeformationSpec::new(net.clone(), seed.clone(), 1.0, 0.0))
        .map_err(|e| e.to_string())?;
    let mut perturbed = 0usize;
    for x in &pts {
        let a = ga.eval(x).map_err(|e| e.to_string())?;
        let b = undeformed.eval(x).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("s = 0 differs from g_A at {x:?}"))?;
        perturbed += usize::from(a != identity);
    }
    ensure(perturbed > 0, || "seed never active at sample points".into())?;

    // a sparse anchor set leaves room for points beyond the factor support
    let sparse = CoveringNet::lattice(&spec, 0.1, 2, FrameMode::Identity).map_err(|e| e.to_string())?;
    let sparse_ga = build_ga(&sparse, &seed).map_err(|e| e.to_string())?;
    let deformed = build_deformed(&DeformationSpec::new(sparse, seed.clone(), 1.0, 0.5)).map_err(|e| e.to_string())?;
    let mut outside = 0usize;
    for x in random_points(&mut r, 10_000, 3, 0.0, 2.0 * PI) {
        if sparse_ga.nearest_anchor_distance(&x) < FACTOR_SUPPORT * 0.1 {
            continue;
        }
        outside += 1;
        ensure(deformed.conformal_exponent(&x) == 0.0, || format!("nonzero exponent at {x:?}"))?;
        let a = deformed.eval(&x).map_err(|e| e.to_string())?;
        let b = sparse_ga.eval(&x).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("factor differs from 1 at {x:?}"))?;
    }
    ensure(outside > 1000, || format!("only {outside} points beyond 9.5 rho"))?;
    Ok(format!(
        "{} points flat and s=0 exact ({perturbed} inside seed balls); {outside} points beyond 9.5 rho with factor exactly 1",
        pts.len()
    ))
}

fn criterion_7() -> Check {
    let spec = TorusSpec::new(3, 2.0 * PI).unwrap();
    let per_axis = 11;
    let net = CoveringNet::lattice(&spec, 0.1, per_axis, FrameMode::Equivariant { seed: 7 }).map_err(|e| e.to_string())?;
    let checked = verify_net(&net, default_verify_resolution(&spec, 0.1));
    ensure(checked.conditions.is_some_and(|c| c.all()), || format!("lattice net invalid: {:?}", checked.diagnostics))?;
    let m = build_deformed(&DeformationSpec::new(net.clone(), bumpy_seed(3, 0.05, 70), 1.0, 0.2))
        .map_err(|e| e.to_string())?;
    let step = spec.side / per_axis as f64;
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let a = &net.anchors[k % net.anchors.len()].position;
        let x: Vec<f64> = if k % 2 == 0 {
            a.iter().map(|c| c + r.random_range(-0.25..0.25)).collect()
        } else {
            (0..3).map(|_| r.random_range(0.0..spec.side)).collect()
        };
        let shift: Vec<f64> = (0..3).map(|_| r.random_range(-5i32..=5) as f64 * step).collect();
        let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let gx = m.eval(&x).map_err(|e| e.to_string())?;
        let gy = m.eval(&y).map_err(|e| e.to_string())?;
        for (u, v) in gx.iter().zip(&gy) {
            worst = worst.max((u - v).abs());
        }
    }
    ensure(worst < 1e-10, || format!("max entry deviation {worst:e}"))?;
    Ok(format!("1000 paired points, max entry deviation {worst:.1e}"))
}

fn criterion_8() -> Check {
    let seed = bumpy_seed(3, 0.05, 80);
    let plan = DerivativePlan::ForwardMode;
    let build = |c: f64| -> LabResult<_> {
        let spec = TorusSpec::new(3, 2.0 * PI * c)?;
        let net = CoveringNet::lattice(&spec, 0.1 * c, 11, FrameMode::Identity)?;
        build_deformed(&DeformationSpec::new(net, seed.clone(), 1.0, 0.3))
    };
    let base = build(1.0).map_err(|e| e.to_string())?;
    let mut r = rng(8);
    let side = 2.0 * PI;
    let pts: Vec<Vec<f64>> = (0..200)
        .map(|k| {
            if k % 2 == 0 {
                let a = &base.base().anchors()[k % base.base().anchors().len()].position;
                a.iter().map(|c| c + r.random_range(-0.15..0.15)).collect()
            } else {
                (0..3).map(|_| r.random_range(0.0..side)).collect()
            }
        })
        .collect();
    let mut worst = 0.0f64;
    for c in [0.5, 2.0, 3.0] {
        let scaled = build(c).map_err(|e| e.to_string())?;
        for x in &pts {
            let a = curvature_report(&base, x, &plan).map_err(|e| e.to_string())?;
            let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
            let b = curvature_report(&scaled, &cx, &plan).map_err(|e| e.to_string())?;
            for (u, v) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                let dev = (u - v * c * c).abs() / u.abs().max(1.0);
                worst = worst.max(dev);
            }
        }
    }
    ensure(worst < 1e-6, || format!("relative deviation {worst:e}"))?;
    Ok(format!("c in {{0.5, 2, 3}}, 200 points each, max relative deviation {worst:.1e}"))
}

struct SearchOutcome {
    best: Option<(PerturbationParams, f64)>,
}

fn criterion_9(out: &mut SearchOutcome) -> Check {
    let runs: Vec<(&str, SearchConfig)> = vec![
        ("conformal simplex", SearchConfig { budget: 200, ..SearchConfig::new(3, PerturbationMode::Conformal) }),
        (
            "full-tensor simplex",
            SearchConfig { budget: 300, max_degree: 1, ..SearchConfig::new(3, PerturbationMode::FullTensor) },
        ),
        (
            "full-tensor softmax",
            SearchConfig {
                budget: 300,
                max_degree: 1,
                optimizer: Optimizer::SoftmaxGradient { temperature: 0.02, step: 0.02, fd_step: 1e-6 },
                ..SearchConfig::new(3, PerturbationMode::FullTensor)
            },
        ),
    ];
    let mut lines = Vec::new();
    for (name, config) in runs {
        let trace: SearchTrace = search(&config, 9).map_err(|e| e.to_string())?;
        ensure(trace.is_monotone(), || format!("{name}: best objective increased"))?;
        let again = search(&config, 9).map_err(|e| e.to_string())?;
        ensure(trace == again, || format!("{name}: rerun differs"))?;
        ensure(trace.best_objective <= trace.records[0].j_current, || format!("{name}: best above initial"))?;
        if trace.best_objective < 0.0 {
            ensure(trace.sign_consistent(), || format!("{name}: J < 0 but scalar curvature not negative"))?;
            let alt = DerivativePlan::CentralDifference { step: 1e-3, richardson: true };
            let re = objective(&trace.best, &config.samples(), &alt, config.pd_margin);
            let dev = (re.objective - trace.best_objective).abs();
            ensure(dev < 1e-4, || format!("{name}: alternate plan deviation {dev:e}"))?;
        }
        lines.push(format!(
            "{name}: J {:.4} -> {:.4} in {} evaluations",
            trace.records[0].j_current,
            trace.best_objective,
            trace.records.len()
        ));
        if out.best.as_ref().map_or(true, |(_, j)| trace.best_objective < *j) {
            out.best = Some((trace.best.clone(), trace.best_objective));
        }
    }
    let (_, j) = out.best.as_ref().expect("at least one run");
    lines.push(if *j < 0.0 {
        format!("negative candidate found (J = {j:.4})")
    } else {
        format!("no candidate with J < 0 (best {j:.4}); best candidate used as stub")
    });
    Ok(lines.join("; "))
}

fn criterion_10(out: &SearchOutcome) -> Check {
    let params = match &out.best {
        Some((p, _)) => p.clone(),
        None => PerturbationParams::default_basis(3, PerturbationMode::Conformal, 0),
    };
    let seed = CandidateSeed::from_params(params).map_err(|e| e.to_string())?;
    let spec = TorusSpec::new(3, 2.0 * PI).unwrap();
    let t0 = Instant::now();
    let net = verify_net(&build_net(&spec, 0.1, 1).map_err(|e| e.to_string())?, default_verify_resolution(&spec, 0.1));
    net.require_valid().map_err(|e| e.to_string())?;
    let d_list: Vec<f64> = (1..=10).map(f64::from).collect();
    let s_list = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0];
    let grid = SampleGrid::new(spec, 20).map_err(|e| e.to_string())?;
    let result = sweep(&net, &seed, &d_list, &s_list, &grid, &DerivativePlan::ForwardMode).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure(elapsed < Duration::from_secs(1800), || format!("sweep took {elapsed:?}"))?;
    ensure(result.cells.len() == 100, || "grid incomplete".into())?;
    if let Some(c) = result.cells.iter().find(|c| c.error.is_some()) {
        return Err(format!("cell d={} s={} aborted: {:?}", c.d, c.s, c.error));
    }
    if let Some(c) = result.cells.iter().find(|c| c.reclassified) {
        return Err(format!("cell d={} s={} did not survive refinement", c.d, c.s));
    }
    let rep = report(&result).map_err(|e| e.to_string())?;
    match result.status {
        SweepStatus::Found => {
            let (a, b) = (result.a_obs.unwrap(), result.b_obs.unwrap());
            ensure(a >= b && b > 0.0, || format!("a_obs {a} b_obs {b}"))?;
        }
        _ => {
            ensure(result.a_obs.is_none() && result.b_obs.is_none(), || "bounds without region".into())?;
            ensure(rep.summary.contains("status: not-found"), || rep.summary.clone())?;
        }
    }
    let lmax = result
        .cells
        .iter()
        .filter_map(|c| c.base.as_ref().map(|b| b.lambda_max_global))
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "status {}, {} negative cells, smallest cell lambda_max {lmax:.3e}, {:.1}s",
        result.status.label(),
        result.negative_region.len(),
        elapsed.as_secs_f64()
    ))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut search_state = SearchOutcome { best: None };
    let mut failures = 0;

    let names = [
        "closed-form curvature oracles",
        "conformal-change identity",
        "cross-plan agreement",
        "Gauss-Bonnet on a deformed 2-torus",
        "covering nets",
        "deformation exactness",
        "translation equivariance",
        "scaling covariance",
        "seed search",
        "sweep semantics",
    ];
    for (i, name) in names.iter().enumerate() {
        let k = i + 1;
        // criterion 10 consumes the candidate from criterion 9
        if !selected(k) && !(k == 9 && selected(10)) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| match k {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(&mut search_state),
            _ => criterion_10(&search_state),
        }))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {k:>2} ({name}) [{secs:.1}s]: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {k:>2} ({name}) [{secs:.1}s]: {why}");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
