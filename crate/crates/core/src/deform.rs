//! The transplanted metric `g_A` and its conformal deformation `g(A, d, s)`.
//!
//! `g_A` equals `ϱ²·f*_{a,ϱ}(seed)` on each ball `B_{2ϱ}(a)` and the flat
//! metric elsewhere. The deformation multiplies it by
//! `∏_a exp(2·F(u_a)·h(u_a/ϱ))` with `u_a = 10ϱ − d(a, x)`, where `F` and `h`
//! are multiplied pointwise.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::atlas::{anchor_chart_scalar, distance_sq_unchecked, signed_offset_scalar, Anchor, TorusSpec};
use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::metric::{CandidateSeed, FieldScalar, MetricFn};
use crate::net::{AnchorIndex, CoveringNet, MULTIPLICITY_RADIUS};

/// Recorded in every report: `F` and `h` are multiplied, not composed.
pub const INTERPRETATION: &str = "pointwise-product";

/// Radius (in units of ϱ) of the balls carrying the transplanted seed.
pub const SEED_RADIUS: f64 = 2.0;
/// Distance (in units of ϱ) beyond which an anchor's conformal factor is exactly 1.
pub const FACTOR_SUPPORT: f64 = 9.5;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const PANELS: usize = 64;
const LOW: f64 = 0.5;
const HIGH: f64 = 0.75;
// exp(-1/w) peaks at e^{-64}; shifting by 64 keeps the integrand near 1
const PEAK_SHIFT: f64 = 64.0;

/// Smooth step `h` with `h ≡ 0` on `(−∞, 1/2]` and `h ≡ 1` on `[3/4, ∞)`,
/// the normalised integral of `exp(−1/((t−1/2)(3/4−t)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffProfile {
    /// `cumulative[k]` is the integral over the first `k` panels.
    cumulative: Vec<f64>,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl CutoffProfile {
    pub fn new() -> Self {
        let width = (HIGH - LOW) / PANELS as f64;
        let mut cumulative = vec![0.0; PANELS + 1];
        for p in 0..PANELS {
            let a = LOW + p as f64 * width;
            cumulative[p + 1] = cumulative[p] + Self::panel(a, a + width);
        }
        Self { cumulative }
    }

    fn panel(a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * Self::density(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn normalizer(&self) -> f64 {
        self.cumulative[PANELS]
    }

    pub fn tag(&self) -> &'static str {
        "normalized-bump-integral"
    }

    fn density(t: f64) -> f64 {
        let w = (t - LOW) * (HIGH - t);
        if w <= 0.0 {
            0.0
        } else {
            (PEAK_SHIFT - 1.0 / w).exp()
        }
    }

    fn density_derivative(t: f64) -> f64 {
        let w = (t - LOW) * (HIGH - t);
        if w <= 0.0 {
            0.0
        } else {
            let dw = (LOW + HIGH) - 2.0 * t;
            Self::density(t) * dw / (w * w)
        }
    }

    fn integral(&self, t: f64) -> f64 {
        let width = (HIGH - LOW) / PANELS as f64;
        let k = (((t - LOW) / width) as usize).min(PANELS - 1);
        let a = LOW + k as f64 * width;
        self.cumulative[k] + Self::panel(a, t)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= LOW {
            0.0
        } else if t >= HIGH {
            1.0
        } else {
            (self.integral(t) / self.normalizer()).clamp(0.0, 1.0)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        Self::density(t) / self.normalizer()
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        Self::density_derivative(t) / self.normalizer()
    }

    pub fn eval<S: Scalar>(&self, t: S) -> S {
        let v = t.value();
        if v <= LOW {
            S::zero()
        } else if v >= HIGH {
            S::one()
        } else {
            t.chain(self.value(v), self.derivative(v), self.second_derivative(v))
        }
    }
}

/// `F(t) = s·exp(−d·ϱ/t)` for `t > 0`, and `0` for `t ≤ 0`.
pub fn f_profile(rho: f64, d: f64, s: f64, t: f64) -> f64 {
    if t > 0.0 {
        s * (-d * rho / t).exp()
    } else {
        0.0
    }
}

fn f_profile_scalar<S: Scalar>(rho: f64, d: f64, s: f64, t: S) -> S {
    let v = t.value();
    if v <= 0.0 {
        return S::zero();
    }
    let e = s * (-d * rho / v).exp();
    let a = d * rho;
    // d/dt e^{-a/t} = (a/t²)·e^{-a/t};  d²/dt² = (a²/t⁴ − 2a/t³)·e^{-a/t}
    let df = e * a / (v * v);
    let d2f = e * (a * a / (v * v * v * v) - 2.0 * a / (v * v * v));
    t.chain(e, df, d2f)
}

/// The metric `g_A`: the seed transplanted into every `2ϱ`-ball.
#[derive(Clone, Debug)]
pub struct TransplantedMetric {
    torus: TorusSpec,
    rho: f64,
    anchors: Arc<Vec<Anchor>>,
    index: Arc<AnchorIndex>,
    seed: CandidateSeed,
}

pub fn build_ga(net: &CoveringNet, seed: &CandidateSeed) -> Result<TransplantedMetric> {
    let n = net.dimension();
    if MetricFn::dimension(seed) != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: MetricFn::dimension(seed),
        });
    }
    for a in &net.anchors {
        if a.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.dimension(),
            });
        }
    }
    if let Some(v) = net.separation_violation() {
        return Err(Error::NetViolation(format!("seed balls overlap: {v:?}")));
    }
    Ok(TransplantedMetric {
        torus: net.torus,
        rho: net.rho,
        index: Arc::new(AnchorIndex::build(&net.torus, MULTIPLICITY_RADIUS * net.rho, &net.anchors)),
        anchors: Arc::new(net.anchors.clone()),
        seed: seed.clone(),
    })
}

impl TransplantedMetric {
    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> &CandidateSeed {
        &self.seed
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Squared distances to every anchor closer than `radius`.
    fn anchors_within(&self, x: &[f64], radius: f64) -> Vec<(usize, f64)> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.index.for_each_candidate(x, |j| {
            let d2 = distance_sq_unchecked(self.torus.side, x, &self.anchors[j as usize].position);
            if d2 < r2 {
                out.push((j as usize, d2));
            }
        });
        out.sort_unstable_by_key(|&(j, _)| j);
        out
    }

    /// Distance to the nearest anchor (`∞` for an empty net).
    pub fn nearest_anchor_distance(&self, x: &[f64]) -> f64 {
        self.anchors
            .iter()
            .map(|a| distance_sq_unchecked(self.torus.side, x, &a.position))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    fn metric_scalar<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.torus.n;
        let mut g = vec![S::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = S::one();
        }
        if self.seed.is_euclidean() {
            return g;
        }
        let xv: Vec<f64> = x.iter().map(Scalar::value).collect();
        let near = self.anchors_within(&xv, SEED_RADIUS * self.rho);
        // condition (i) makes the seed balls disjoint: at most one anchor
        let Some(&(a, _)) = near.first() else {
            return g;
        };
        let anchor = &self.anchors[a];
        let y = anchor_chart_scalar(self.torus.side, anchor, self.rho, x);
        let Some(p) = self.seed.perturbation(&y) else {
            return g;
        };
        // ϱ²·(1/ϱ²)·Iᵀ(δ + P)I with IᵀI = δ
        let frame = &anchor.frame;
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    let fki = frame[k * n + i];
                    if fki == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        let flj = frame[l * n + j];
                        if flj != 0.0 {
                            acc += p[k * n + l] * (fki * flj);
                        }
                    }
                }
                g[i * n + j] += acc;
            }
        }
        g
    }
}

impl MetricFn for TransplantedMetric {
    fn dimension(&self) -> usize {
        self.torus.n
    }

    fn describe(&self) -> String {
        format!(
            "g_A(n={}, L={}, rho={}, {} anchors)",
            self.torus.n,
            self.torus.side,
            self.rho,
            self.anchors.len()
        )
    }

    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.metric_scalar(x))
    }
}

/// Parameters of one deformation.
#[derive(Clone, Debug)]
pub struct DeformationSpec {
    pub net: CoveringNet,
    pub seed: CandidateSeed,
    pub d: f64,
    pub s: f64,
    pub cutoff: CutoffProfile,
}

impl DeformationSpec {
    pub fn new(net: CoveringNet, seed: CandidateSeed, d: f64, s: f64) -> Self {
        Self {
            net,
            seed,
            d,
            s,
            cutoff: CutoffProfile::new(),
        }
    }

    /// `s = 0` is accepted: it is the undeformed baseline.
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidParameter(format!("d must be positive, got {}", self.d)));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter(format!("s must be nonnegative, got {}", self.s)));
        }
        let reach = MULTIPLICITY_RADIUS * self.net.rho;
        if !(reach < self.net.torus.half_side()) {
            return Err(Error::InvalidParameter(format!(
                "10*rho = {reach} must be below L/2 = {}",
                self.net.torus.half_side()
            )));
        }
        Ok(())
    }
}

/// On-disk form: file references plus the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationRecord {
    pub net: String,
    pub seed_metric: String,
    pub d: f64,
    pub s: f64,
    pub interpretation: String,
}

impl DeformationRecord {
    pub fn new(net: impl Into<String>, seed_metric: impl Into<String>, d: f64, s: f64) -> Self {
        Self {
            net: net.into(),
            seed_metric: seed_metric.into(),
            d,
            s,
            interpretation: INTERPRETATION.into(),
        }
    }
}

/// The metric `g(A, d, s)`.
#[derive(Clone, Debug)]
pub struct DeformedMetric {
    base: TransplantedMetric,
    d: f64,
    s: f64,
    cutoff: CutoffProfile,
}

pub fn build_deformed(spec: &DeformationSpec) -> Result<DeformedMetric> {
    spec.validate()?;
    Ok(DeformedMetric {
        base: build_ga(&spec.net, &spec.seed)?,
        d: spec.d,
        s: spec.s,
        cutoff: spec.cutoff.clone(),
    })
}

impl DeformedMetric {
    /// Reuses an existing `g_A` for another `(d, s)`.
    pub fn from_base(base: TransplantedMetric, d: f64, s: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite() && s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("need d > 0, s >= 0; got d={d}, s={s}")));
        }
        if !(MULTIPLICITY_RADIUS * base.rho < base.torus.half_side()) {
            return Err(Error::InvalidParameter("10*rho must be below L/2".into()));
        }
        Ok(Self {
            base,
            d,
            s,
            cutoff: CutoffProfile::new(),
        })
    }

    pub fn base(&self) -> &TransplantedMetric {
        &self.base
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `Σ_a 2·F(u_a)·h(u_a/ϱ)`, or `None` when every term vanishes identically.
    fn exponent<S: Scalar>(&self, x: &[S]) -> Option<S> {
        if self.s == 0.0 {
            return None;
        }
        let rho = self.base.rho;
        let side = self.base.torus.side;
        let xv: Vec<f64> = x.iter().map(Scalar::value).collect();
        let near = self.base.anchors_within(&xv, FACTOR_SUPPORT * rho);
        if near.is_empty() {
            return None;
        }
        let mut acc = S::zero();
        for (a, _) in near {
            let mut r2 = S::zero();
            for (&p, &xi) in self.base.anchors[a].position.iter().zip(x) {
                let o = signed_offset_scalar(p, xi, side);
                r2 += o * o;
            }
            let u = (r2.sqrt() * -1.0) + MULTIPLICITY_RADIUS * rho;
            let h = self.cutoff.eval(u * (1.0 / rho));
            if h.value() == 0.0 {
                continue;
            }
            acc += f_profile_scalar(rho, self.d, self.s, u) * h * 2.0;
        }
        Some(acc)
    }

    /// Logarithm of the conformal factor at `x`.
    pub fn conformal_exponent(&self, x: &[f64]) -> f64 {
        self.exponent(x).unwrap_or(0.0)
    }
}

impl MetricFn for DeformedMetric {
    fn dimension(&self) -> usize {
        self.base.torus.n
    }

    fn describe(&self) -> String {
        format!("deformed({}, d={}, s={}, {INTERPRETATION})", self.base.describe(), self.d, self.s)
    }

    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let mut g = self.base.metric_scalar(x);
        if let Some(e) = self.exponent(x) {
            let factor = e.exp();
            for v in &mut g {
                *v *= factor;
            }
        }
        Ok(g)
    }
}
