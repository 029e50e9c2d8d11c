//! Numerical search for a seed metric with negative Ricci curvature on the
//! unit ball.
//!
//! The objective is `J = max over samples of λ_max(g⁻¹Ric)`. One trace record
//! is written per objective evaluation, so the evaluation budget bounds the
//! trace length.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{curvature_report, DerivativePlan};
use crate::error::{Error, Result};
use crate::metric::{make_candidate_seed, PerturbationMode, PerturbationParams};

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    out
}

/// `k`-th Halton point in `[-1, 1]^n`.
fn halton_cube(k: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * radical_inverse(k, PRIMES[i]) - 1.0).collect()
}

/// `count` Halton points inside the open unit ball (cube points outside are skipped).
pub fn halton_ball(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut k = 1u64;
    while out.len() < count {
        let p = halton_cube(k, n);
        if p.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            out.push(p);
        }
        k += 1;
    }
    out
}

/// `count` points on the sphere of the given radius, from radially projected
/// Halton points (skipping points too close to the origin).
pub fn halton_shell(n: usize, count: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    // offset so shell points do not repeat the ball sequence
    let mut k = 1u64 << 20;
    while out.len() < count {
        let p = halton_cube(k, n);
        let r = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r > 0.25 && r < 1.0 {
            out.push(p.iter().map(|c| c * radius / r).collect());
        }
        k += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Optimizer {
    /// Nelder–Mead on the raw max-eigenvalue objective, restarted around the
    /// best point when the simplex collapses.
    Simplex { initial_step: f64, tolerance: f64 },
    /// Normalised descent on `T·log Σ exp(λ_max/T)` with forward-difference gradients.
    SoftmaxGradient {
        temperature: f64,
        step: f64,
        fd_step: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Simplex {
            initial_step: 0.1,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub dimension: usize,
    pub mode: PerturbationMode,
    /// Highest monomial degree in the basis.
    pub max_degree: u32,
    pub interior_samples: usize,
    pub shell_samples: usize,
    pub shell_radius: f64,
    pub optimizer: Optimizer,
    /// Number of objective evaluations.
    pub budget: usize,
    pub pd_margin: f64,
    /// Standard deviation of the random initial coefficients.
    pub initial_scale: f64,
    pub plan: DerivativePlan,
}

impl SearchConfig {
    pub fn new(dimension: usize, mode: PerturbationMode) -> Self {
        Self {
            dimension,
            mode,
            max_degree: 2,
            interior_samples: 200,
            shell_samples: 50,
            shell_radius: 0.98,
            optimizer: Optimizer::default(),
            budget: 200,
            pd_margin: 1e-3,
            initial_scale: 0.05,
            plan: DerivativePlan::ForwardMode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::InvalidParameter(format!(
                "seed search needs dimension >= 3, got {}",
                self.dimension
            )));
        }
        if self.dimension > PRIMES.len() {
            return Err(Error::InvalidParameter(format!(
                "seed search supports dimension <= {}",
                PRIMES.len()
            )));
        }
        if self.interior_samples + self.shell_samples == 0 {
            return Err(Error::InvalidParameter("sample set is empty".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be >= 1".into()));
        }
        if !(self.pd_margin > 0.0) {
            return Err(Error::InvalidParameter("pd_margin must be positive".into()));
        }
        if !(self.shell_radius > 0.0 && self.shell_radius < 1.0) {
            return Err(Error::InvalidParameter("shell_radius must lie in (0, 1)".into()));
        }
        if !(self.initial_scale >= 0.0 && self.initial_scale.is_finite()) {
            return Err(Error::InvalidParameter("initial_scale must be finite and >= 0".into()));
        }
        match self.optimizer {
            Optimizer::Simplex { initial_step, .. } if !(initial_step > 0.0) => {
                return Err(Error::InvalidParameter("simplex step must be positive".into()))
            }
            Optimizer::SoftmaxGradient {
                temperature,
                step,
                fd_step,
            } if !(temperature > 0.0 && step > 0.0 && fd_step > 0.0) => {
                return Err(Error::InvalidParameter(
                    "softmax temperature, step and fd_step must be positive".into(),
                ))
            }
            _ => {}
        }
        self.plan.validate()
    }

    pub fn samples(&self) -> Vec<Vec<f64>> {
        let mut s = halton_ball(self.dimension, self.interior_samples);
        s.extend(halton_shell(self.dimension, self.shell_samples, self.shell_radius));
        s
    }

    pub fn basis(&self) -> PerturbationParams {
        PerturbationParams::default_basis(self.dimension, self.mode, self.max_degree)
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `max λ_max`, or `+∞` when the candidate is rejected.
    pub objective: f64,
    /// Sample attaining the maximum, or the offending point on rejection.
    pub witness: Option<Vec<f64>>,
    /// Per-sample `λ_max` (empty on rejection).
    pub lambda_max: Vec<f64>,
    /// Largest sampled scalar curvature.
    pub scalar_max: f64,
    pub rejected: Option<String>,
}

impl Evaluation {
    fn rejected(point: Vec<f64>, why: String) -> Self {
        Self {
            objective: f64::INFINITY,
            witness: Some(point),
            lambda_max: Vec::new(),
            scalar_max: f64::INFINITY,
            rejected: Some(why),
        }
    }

    /// `T·log Σ exp(λ_i/T)`, an upper bound on the max within `T·log(m)`.
    pub fn softmax(&self, temperature: f64) -> f64 {
        if self.rejected.is_some() || self.lambda_max.is_empty() {
            return f64::INFINITY;
        }
        let m = self.objective;
        m + temperature
            * self
                .lambda_max
                .iter()
                .map(|l| ((l - m) / temperature).exp())
                .sum::<f64>()
                .ln()
    }
}

/// `J(params)` on the given samples.
pub fn objective(
    params: &PerturbationParams,
    samples: &[Vec<f64>],
    plan: &DerivativePlan,
    pd_margin: f64,
) -> Evaluation {
    let seed = match make_candidate_seed(params.clone(), samples, pd_margin) {
        Ok(s) => s,
        Err(Error::NotPositiveDefinite { point, min_eigenvalue }) => {
            return Evaluation::rejected(point, format!("not positive definite (min eigenvalue {min_eigenvalue})"))
        }
        Err(e) => return Evaluation::rejected(Vec::new(), e.to_string()),
    };
    let reports: Vec<std::result::Result<(f64, f64), (Vec<f64>, String)>> = samples
        .par_iter()
        .map(|y| {
            curvature_report(&seed, y, plan)
                .map(|r| (r.lambda_max, r.scalar))
                .map_err(|e| (y.clone(), e.to_string()))
        })
        .collect();
    let mut lambda_max = Vec::with_capacity(samples.len());
    let mut scalar_max = f64::NEG_INFINITY;
    let mut best: Option<usize> = None;
    for (i, r) in reports.into_iter().enumerate() {
        match r {
            Ok((l, s)) => {
                if best.map_or(true, |b| l > lambda_max[b]) {
                    best = Some(i);
                }
                lambda_max.push(l);
                scalar_max = scalar_max.max(s);
            }
            Err((point, why)) => return Evaluation::rejected(point, why),
        }
    }
    let b = best.expect("nonempty sample set");
    Evaluation {
        objective: lambda_max[b],
        witness: Some(samples[b].clone()),
        lambda_max,
        scalar_max,
        rejected: None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub coefficients: Vec<f64>,
    pub j_current: f64,
    pub j_best: f64,
    /// Wall-clock milliseconds spent on this evaluation.
    pub elapsed_ms: f64,
}

impl PartialEq for TraceRecord {
    fn eq(&self, other: &Self) -> bool {
        self.iteration == other.iteration
            && self.coefficients == other.coefficients
            && self.j_current.to_bits() == other.j_current.to_bits()
            && self.j_best.to_bits() == other.j_best.to_bits()
    }
}

/// Search history; equality ignores wall-clock timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub config: SearchConfig,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    pub best: PerturbationParams,
    pub best_objective: f64,
    pub best_scalar_max: f64,
}

impl SearchTrace {
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].j_best <= w[0].j_best)
    }

    /// On success (`J < 0`), sampled scalar curvature must also be negative.
    pub fn sign_consistent(&self) -> bool {
        !(self.best_objective < 0.0) || self.best_scalar_max < 0.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,J_best,J_current\n");
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e}\n", r.iteration, r.j_best, r.j_current));
        }
        out
    }
}

struct Evaluator<'a> {
    config: &'a SearchConfig,
    samples: Vec<Vec<f64>>,
    template: PerturbationParams,
    records: Vec<TraceRecord>,
    best: (Vec<f64>, f64, f64),
}

impl Evaluator<'_> {
    fn exhausted(&self) -> bool {
        self.records.len() >= self.config.budget
    }

    fn params(&self, c: &[f64]) -> PerturbationParams {
        let mut p = self.template.clone();
        p.coefficients = c.to_vec();
        p
    }

    /// Evaluates a batch concurrently and records results in order; stops at the budget.
    fn eval_batch(&mut self, points: &[Vec<f64>]) -> Vec<Evaluation> {
        let room = self.config.budget - self.records.len().min(self.config.budget);
        let points = &points[..points.len().min(room)];
        let start = Instant::now();
        let evals: Vec<Evaluation> = points
            .par_iter()
            .map(|c| objective(&self.params(c), &self.samples, &self.config.plan, self.config.pd_margin))
            .collect();
        let per = start.elapsed().as_secs_f64() * 1e3 / points.len().max(1) as f64;
        for (c, e) in points.iter().zip(&evals) {
            if e.objective < self.best.1 {
                self.best = (c.clone(), e.objective, e.scalar_max);
            }
            self.records.push(TraceRecord {
                iteration: self.records.len(),
                coefficients: c.clone(),
                j_current: e.objective,
                j_best: self.best.1,
                elapsed_ms: per,
            });
        }
        evals
    }

    fn eval(&mut self, c: &[f64]) -> Option<Evaluation> {
        self.eval_batch(&[c.to_vec()]).pop()
    }
}

fn nelder_mead(ev: &mut Evaluator, x0: Vec<f64>, initial_step: f64, tolerance: f64, rng: &mut ChaCha8Rng) {
    let k = x0.len();
    let mut step = initial_step;
    let mut start = x0;
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    while !ev.exhausted() {
        let mut simplex = vec![start.clone()];
        for i in 0..k {
            let mut v = start.clone();
            v[i] += step;
            simplex.push(v);
        }
        let evals = ev.eval_batch(&simplex);
        if evals.len() < simplex.len() {
            return;
        }
        let mut fs: Vec<f64> = evals.iter().map(|e| e.objective).collect();
        loop {
            if ev.exhausted() {
                return;
            }
            let mut order: Vec<usize> = (0..=k).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();
            let spread = fs[k] - fs[0];
            let size = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size < tolerance || (spread.is_finite() && spread.abs() < tolerance && size < 1e-3 * step) {
                break;
            }
            let centroid: Vec<f64> = (0..k)
                .map(|j| simplex[..k].iter().map(|v| v[j]).sum::<f64>() / k as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[k])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let xr = along(-1.0);
            let Some(fr) = ev.eval(&xr).map(|e| e.objective) else { return };
            if fr < fs[0] {
                let xe = along(-2.0);
                let Some(fe) = ev.eval(&xe).map(|e| e.objective) else { return };
                if fe < fr {
                    simplex[k] = xe;
                    fs[k] = fe;
                } else {
                    simplex[k] = xr;
                    fs[k] = fr;
                }
            } else if fr < fs[k - 1] {
                simplex[k] = xr;
                fs[k] = fr;
            } else {
                let (xc, outside) = if fr < fs[k] { (along(-0.5), true) } else { (along(0.5), false) };
                let Some(fc) = ev.eval(&xc).map(|e| e.objective) else { return };
                if (outside && fc <= fr) || (!outside && fc < fs[k]) {
                    simplex[k] = xc;
                    fs[k] = fc;
                } else {
                    let best = simplex[0].clone();
                    let shrunk: Vec<Vec<f64>> = simplex[1..]
                        .iter()
                        .map(|v| v.iter().zip(&best).map(|(x, b)| b + 0.5 * (x - b)).collect())
                        .collect();
                    let evals = ev.eval_batch(&shrunk);
                    if evals.len() < shrunk.len() {
                        return;
                    }
                    for (i, (v, e)) in shrunk.into_iter().zip(evals).enumerate() {
                        simplex[i + 1] = v;
                        fs[i + 1] = e.objective;
                    }
                }
            }
        }
        // restart around the incumbent with a smaller, randomly perturbed start
        step *= 0.5;
        if step < tolerance {
            step = initial_step;
        }
        start = ev
            .best
            .0
            .iter()
            .map(|c| c + 0.1 * step * jitter.sample(rng))
            .collect();
    }
}

fn softmax_descent(ev: &mut Evaluator, x0: Vec<f64>, temperature: f64, step: f64, fd_step: f64) {
    let k = x0.len();
    let mut x = x0;
    let mut step = step;
    let Some(e0) = ev.eval(&x) else { return };
    let mut fx = e0.softmax(temperature);
    while !ev.exhausted() {
        let probes: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut p = x.clone();
                p[i] += fd_step;
                p
            })
            .collect();
        let evals = ev.eval_batch(&probes);
        if evals.len() < k {
            return;
        }
        let grad: Vec<f64> = evals.iter().map(|e| (e.softmax(temperature) - fx) / fd_step).collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            step *= 0.5;
            if step < 1e-12 {
                return;
            }
            continue;
        }
        let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi - step * g / norm).collect();
        let Some(et) = ev.eval(&trial) else { return };
        let ft = et.softmax(temperature);
        if ft < fx {
            x = trial;
            fx = ft;
            step *= 1.2;
        } else {
            step *= 0.5;
        }
    }
}

/// Runs the configured optimizer; deterministic for a given `seed`.
pub fn search(config: &SearchConfig, seed: u64) -> Result<SearchTrace> {
    config.validate()?;
    let template = config.basis();
    let k = template.basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Normal::new(0.0, config.initial_scale.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let x0: Vec<f64> = (0..k)
        .map(|_| if config.initial_scale > 0.0 { init.sample(&mut rng) } else { 0.0 })
        .collect();
    let mut ev = Evaluator {
        config,
        samples: config.samples(),
        template: template.clone(),
        records: Vec::new(),
        best: (x0.clone(), f64::INFINITY, f64::INFINITY),
    };
    match config.optimizer {
        Optimizer::Simplex { initial_step, tolerance } => {
            nelder_mead(&mut ev, x0, initial_step, tolerance, &mut rng)
        }
        Optimizer::SoftmaxGradient {
            temperature,
            step,
            fd_step,
        } => softmax_descent(&mut ev, x0, temperature, step, fd_step),
    }
    let (coefficients, best_objective, best_scalar_max) = ev.best.clone();
    let mut best = template;
    best.coefficients = coefficients;
    Ok(SearchTrace {
        config: config.clone(),
        seed,
        records: ev.records,
        best,
        best_objective,
        best_scalar_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(budget: usize) -> SearchConfig {
        SearchConfig {
            interior_samples: 30,
            shell_samples: 10,
            budget,
            max_degree: 1,
            ..SearchConfig::new(3, PerturbationMode::Conformal)
        }
    }

    #[test]
    fn samples_lie_in_ball_and_shell() {
        let c = small(1);
        let s = c.samples();
        assert_eq!(s.len(), 40);
        for p in &s[..30] {
            assert!(p.iter().map(|x| x * x).sum::<f64>() < 1.0);
        }
        for p in &s[30..] {
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r - 0.98).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_are_flat() {
        let c = small(1);
        let e = objective(&c.basis(), &c.samples(), &c.plan, c.pd_margin);
        assert_eq!(e.objective, 0.0);
    }

    #[test]
    fn outside_ball_objective_vanishes() {
        let c = small(1);
        let p = c.basis().with_coefficients(vec![0.3, -0.2, 0.1, 0.4]).unwrap();
        let outside = vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.5, 0.3], vec![0.8, 0.8, 0.8]];
        assert_eq!(objective(&p, &outside, &c.plan, c.pd_margin).objective, 0.0);
    }

    #[test]
    fn indefinite_candidate_is_sentinel() {
        let c = SearchConfig::new(3, PerturbationMode::FullTensor);
        let mut coeffs = vec![0.0; c.basis().basis.len()];
        coeffs[0] = -1e3;
        let p = c.basis().with_coefficients(coeffs).unwrap();
        let e = objective(&p, &c.samples(), &c.plan, c.pd_margin);
        assert_eq!(e.objective, f64::INFINITY);
        assert!(e.witness.is_some() && e.rejected.is_some());
    }

    #[test]
    fn budget_one_is_initial_point() {
        let c = small(1);
        let t = search(&c, 5).unwrap();
        assert_eq!(t.records.len(), 1);
        let direct = objective(&t.best, &c.samples(), &c.plan, c.pd_margin);
        assert_eq!(t.records[0].j_current, direct.objective);
    }

    #[test]
    fn deterministic_and_monotone() {
        for optimizer in [
            Optimizer::default(),
            Optimizer::SoftmaxGradient {
                temperature: 0.05,
                step: 0.05,
                fd_step: 1e-5,
            },
        ] {
            let c = SearchConfig { optimizer, ..small(40) };
            let a = search(&c, 11).unwrap();
            let b = search(&c, 11).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.records.len(), 40);
            assert!(a.is_monotone());
            assert!(a.best_objective <= a.records[0].j_current);
        }
    }

    #[test]
    fn csv_header() {
        let t = search(&small(3), 1).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("iteration,J_best,J_current\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn invalid_configs() {
        assert!(search(&SearchConfig::new(2, PerturbationMode::Conformal), 0).is_err());
        assert!(search(&SearchConfig { budget: 0, ..small(1) }, 0).is_err());
        assert!(search(&SearchConfig { interior_samples: 0, shell_samples: 0, ..small(1) }, 0).is_err());
    }
}
