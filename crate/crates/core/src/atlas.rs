//! Flat torus geometry and the rescaled normal-coordinate charts around anchors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

/// Default side length of each circle factor: 2π·100.
pub const DEFAULT_SIDE: f64 = 200.0 * PI;

/// The flat torus `T^n = R^n / (L Z)^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub side: f64,
}

impl TorusSpec {
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("torus dimension must be >= 1".into()));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "torus side length must be positive, got {side}"
            )));
        }
        Ok(Self { n, side })
    }

    pub fn with_default_side(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_SIDE)
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side
    }

    /// Reduces every coordinate into `[0, L)`.
    pub fn reduce(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|&c| reduce_coord(c, self.side)).collect()
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Total volume `L^n`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.n as i32)
    }
}

#[inline]
fn reduce_coord(c: f64, side: f64) -> f64 {
    let r = c.rem_euclid(side);
    // rem_euclid can round up to `side` for tiny negative inputs
    if r >= side {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x - a` in `(-L/2, L/2]`.
#[inline]
pub fn signed_offset(a: f64, x: f64, side: f64) -> f64 {
    let r = reduce_coord(x - a, side);
    if r > 0.5 * side {
        r - side
    } else {
        r
    }
}

/// Same as [`signed_offset`] but carries derivatives with respect to `x`.
#[inline]
pub fn signed_offset_scalar<S: Scalar>(a: f64, x: S, side: f64) -> S {
    let raw = x.value() - a;
    let rep = signed_offset(a, x.value(), side);
    x - a - (raw - rep)
}

/// Geodesic distance on the flat torus.
pub fn torus_distance(spec: &TorusSpec, p: &[f64], q: &[f64]) -> Result<f64> {
    spec.check(p)?;
    spec.check(q)?;
    Ok(distance_unchecked(spec.side, p, q))
}

#[inline]
pub(crate) fn distance_unchecked(side: f64, p: &[f64], q: &[f64]) -> f64 {
    distance_sq_unchecked(side, p, q).sqrt()
}

/// Squared circle distance between coordinates `a` and `b`; summing it over
/// the axes in order gives exactly [`distance_sq_unchecked`].
#[inline]
pub(crate) fn axis_distance_sq(side: f64, a: f64, b: f64) -> f64 {
    let d = reduce_coord(a - b, side);
    let d = d.min(side - d);
    d * d
}

#[inline]
pub(crate) fn distance_sq_unchecked(side: f64, p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        acc += axis_distance_sq(side, a, b);
    }
    acc
}

/// Inverse exponential map at `a`: the shortest tangent vector from `a` to `x`.
pub fn torus_log(spec: &TorusSpec, a: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    spec.check(a)?;
    spec.check(x)?;
    let half = spec.half_side();
    a.iter()
        .zip(x)
        .enumerate()
        .map(|(axis, (&ai, &xi))| {
            let v = signed_offset(ai, xi, spec.side);
            if v == half {
                Err(Error::CutLocusAmbiguity { axis })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// How the linear isometries `I_a` are chosen across a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FrameMode {
    Identity,
    /// Independent random orthogonal frame per anchor.
    RandomOrthogonal { seed: u64 },
    /// One random orthogonal frame shared by every anchor, so the
    /// construction commutes with torus translations.
    Equivariant { seed: u64 },
}

/// An anchor point `a` together with its frame `I_a : T_a T^n -> R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub position: Vec<f64>,
    /// Row-major orthogonal `n×n` matrix.
    pub frame: Vec<f64>,
}

impl Anchor {
    pub fn new(position: Vec<f64>, frame: Vec<f64>) -> Result<Self> {
        let n = position.len();
        if frame.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: frame.len(),
            });
        }
        let anchor = Self { position, frame };
        let err = anchor.orthogonality_error();
        if err > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "anchor frame is not orthogonal (|FᵀF - I| = {err:e})"
            )));
        }
        Ok(anchor)
    }

    pub fn with_identity(position: Vec<f64>) -> Self {
        let n = position.len();
        Self {
            position,
            frame: identity(n),
        }
    }

    pub fn dimension(&self) -> usize {
        self.position.len()
    }

    /// Max-entry deviation of `frameᵀ·frame` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dimension();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n)
                    .map(|k| self.frame[k * n + i] * self.frame[k * n + j])
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Applies the frame to a tangent vector.
    pub fn apply_frame<S: Scalar>(&self, v: &[S]) -> Vec<S> {
        let n = self.dimension();
        (0..n)
            .map(|i| {
                let mut acc = S::zero();
                for (j, &vj) in v.iter().enumerate() {
                    let f = self.frame[i * n + j];
                    if f != 0.0 {
                        acc += vj * f;
                    }
                }
                acc
            })
            .collect()
    }
}

pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// The chart `f_{a,ϱ} = (1/ϱ)·I_a∘exp_a^{-1}`.
pub fn anchor_chart(spec: &TorusSpec, anchor: &Anchor, rho: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let v = torus_log(spec, &anchor.position, x)?;
    Ok(anchor.apply_frame(&v).into_iter().map(|c| c / rho).collect())
}

/// [`anchor_chart`] on derivative-carrying coordinates, without the cut-locus check.
pub(crate) fn anchor_chart_scalar<S: Scalar>(side: f64, anchor: &Anchor, rho: f64, x: &[S]) -> Vec<S> {
    let v: Vec<S> = anchor
        .position
        .iter()
        .zip(x)
        .map(|(&a, &xi)| signed_offset_scalar(a, xi, side))
        .collect();
    anchor
        .apply_frame(&v)
        .into_iter()
        .map(|c| c * (1.0 / rho))
        .collect()
}

/// Random orthogonal `n×n` matrix (QR of a Gaussian matrix, sign-normalised).
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = q[(i, j)];
        }
    }
    out
}

/// Frames for `count` anchors of dimension `n` under the given mode.
pub fn make_frames(n: usize, count: usize, mode: FrameMode) -> Vec<Vec<f64>> {
    match mode {
        FrameMode::Identity => vec![identity(n); count],
        FrameMode::RandomOrthogonal { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| random_orthogonal(n, &mut rng)).collect()
        }
        FrameMode::Equivariant { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            vec![random_orthogonal(n, &mut rng); count]
        }
    }
}
