//! Pullbacks through affine maps and conformal rescalings.

use std::sync::Arc;

use super::{check_dim, FieldScalar, MetricField, MetricFn, ScalarField};
use crate::atlas::Anchor;
use crate::error::{Error, Result};

/// `x ↦ J·x + b`, optionally restricted to a Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub n: usize,
    /// Row-major `n×n` Jacobian.
    pub jacobian: Vec<f64>,
    pub offset: Vec<f64>,
    pub domain: Option<(Vec<f64>, f64)>,
}

impl AffineMap {
    pub fn new(jacobian: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let n = offset.len();
        check_dim(n * n, jacobian.len())?;
        Ok(Self {
            n,
            jacobian,
            offset,
            domain: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            jacobian: crate::atlas::identity(n),
            offset: vec![0.0; n],
            domain: None,
        }
    }

    /// The anchor chart `x ↦ (1/ϱ)·I_a·(x - a)` on the ball of radius `radius` around `a`,
    /// i.e. the unwrapped form of the torus chart `f_{a,ϱ}`.
    pub fn anchor_chart(anchor: &Anchor, rho: f64, radius: f64) -> Self {
        let n = anchor.dimension();
        let jacobian: Vec<f64> = anchor.frame.iter().map(|f| f / rho).collect();
        let offset = (0..n)
            .map(|i| {
                -(0..n)
                    .map(|j| jacobian[i * n + j] * anchor.position[j])
                    .sum::<f64>()
            })
            .collect();
        Self {
            n,
            jacobian,
            offset,
            domain: Some((anchor.position.clone(), radius)),
        }
    }

    pub fn with_domain(mut self, center: Vec<f64>, radius: f64) -> Self {
        self.domain = Some((center, radius));
        self
    }

    pub fn apply<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        check_dim(self.n, x.len())?;
        if let Some((center, radius)) = &self.domain {
            let d2: f64 = x
                .iter()
                .zip(center)
                .map(|(xi, ci)| (xi.value() - ci).powi(2))
                .sum();
            if d2 >= radius * radius {
                return Err(Error::OutsideDomain {
                    what: "affine chart".into(),
                    point: x.iter().map(|c| c.value()).collect(),
                });
            }
        }
        let n = self.n;
        Ok((0..n)
            .map(|i| {
                let mut acc = S::constant(self.offset[i]);
                for (j, &xj) in x.iter().enumerate() {
                    let jij = self.jacobian[i * n + j];
                    if jij != 0.0 {
                        acc += xj * jij;
                    }
                }
                acc
            })
            .collect())
    }
}

/// `x ↦ scale²·Jᵀ·g(J·x + b)·J`.
pub struct Pullback {
    pub base: Arc<dyn MetricField>,
    pub map: AffineMap,
    pub scale: f64,
}

pub fn pullback(base: Arc<dyn MetricField>, map: AffineMap, scale: f64) -> Result<Pullback> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("pullback scale must be positive, got {scale}")));
    }
    check_dim(base.dimension(), map.n)?;
    Ok(Pullback { base, map, scale })
}

impl MetricFn for Pullback {
    fn dimension(&self) -> usize {
        self.map.n
    }

    fn smoothness(&self) -> u32 {
        self.base.smoothness()
    }

    fn describe(&self) -> String {
        format!("pullback({}, scale={})", self.base.describe(), self.scale)
    }

    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.map.n;
        let y = self.map.apply(x)?;
        let g = S::eval_metric(self.base.as_ref(), &y)?;
        let j = &self.map.jacobian;
        let s2 = self.scale * self.scale;
        // (Jᵀ g J)_ab = Σ_ij J_ia g_ij J_jb
        let mut gj = vec![S::zero(); n * n];
        for i in 0..n {
            for b in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    let jkb = j[k * n + b];
                    if jkb != 0.0 {
                        acc += g[i * n + k] * jkb;
                    }
                }
                gj[i * n + b] = acc;
            }
        }
        let mut out = vec![S::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = S::zero();
                for i in 0..n {
                    let jia = j[i * n + a];
                    if jia != 0.0 {
                        acc += gj[i * n + b] * jia;
                    }
                }
                out[a * n + b] = acc * s2;
            }
        }
        Ok(out)
    }
}

/// `x ↦ exp(2·φ(x))·g(x)`.
pub struct ConformalWrap {
    pub base: Arc<dyn MetricField>,
    pub phi: Arc<dyn ScalarField>,
}

pub fn conformal_wrap(base: Arc<dyn MetricField>, phi: Arc<dyn ScalarField>) -> Result<ConformalWrap> {
    check_dim(base.dimension(), phi.dimension())?;
    Ok(ConformalWrap { base, phi })
}

impl MetricFn for ConformalWrap {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn smoothness(&self) -> u32 {
        self.base.smoothness()
    }

    fn describe(&self) -> String {
        format!("exp(2*{})*{}", self.phi.describe(), self.base.describe())
    }

    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let phi = S::eval_scalar(self.phi.as_ref(), x)?;
        let factor = (phi * 2.0).exp();
        let g = S::eval_metric(self.base.as_ref(), x)?;
        Ok(g.into_iter().map(|gij| gij * factor).collect())
    }
}
