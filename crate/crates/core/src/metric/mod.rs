//! Metric fields in coordinates.
//!
//! A metric field is a map from chart points to symmetric positive-definite
//! matrices, stored row-major. Concrete fields implement [`MetricFn`] once,
//! generically over [`FieldScalar`]; the blanket impl turns that into the
//! object-safe [`MetricField`] used by the curvature engine, so every field
//! can be evaluated on plain `f64` and on second-order jets.

mod compose;
mod reference;
mod seed;

use crate::autodiff::{Jet, Scalar};
use crate::error::{Error, Result};

pub use compose::{conformal_wrap, pullback, AffineMap, ConformalWrap, Pullback};
pub use reference::{make_reference, Fiber, ReferenceMetric, WarpProfile};
pub use seed::{
    bump, make_candidate_seed, BasisElement, CandidateSeed, PerturbationMode, PerturbationParams,
    ProfileKind,
};

/// Declared smoothness for analytic / C^∞ fields.
pub const SMOOTH: u32 = u32::MAX;

/// Scalar types that can dispatch into type-erased fields.
pub trait FieldScalar: Scalar {
    fn eval_metric(field: &dyn MetricField, x: &[Self]) -> Result<Vec<Self>>;
    fn eval_scalar(field: &dyn ScalarField, x: &[Self]) -> Result<Self>;
}

impl FieldScalar for f64 {
    fn eval_metric(field: &dyn MetricField, x: &[f64]) -> Result<Vec<f64>> {
        field.eval(x)
    }

    fn eval_scalar(field: &dyn ScalarField, x: &[f64]) -> Result<f64> {
        field.value(x)
    }
}

impl FieldScalar for Jet {
    fn eval_metric(field: &dyn MetricField, x: &[Jet]) -> Result<Vec<Jet>> {
        field.eval_jet(x)
    }

    fn eval_scalar(field: &dyn ScalarField, x: &[Jet]) -> Result<Jet> {
        field.value_jet(x)
    }
}

/// Generic description of a metric field.
pub trait MetricFn: Send + Sync {
    fn dimension(&self) -> usize;

    fn smoothness(&self) -> u32 {
        SMOOTH
    }

    fn describe(&self) -> String;

    /// Row-major `n×n` metric matrix at `x`.
    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>>;
}

/// Object-safe view of a metric field.
pub trait MetricField: Send + Sync {
    fn dimension(&self) -> usize;
    fn smoothness(&self) -> u32;
    fn describe(&self) -> String;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>>;
}

impl<T: MetricFn> MetricField for T {
    fn dimension(&self) -> usize {
        MetricFn::dimension(self)
    }

    fn smoothness(&self) -> u32 {
        MetricFn::smoothness(self)
    }

    fn describe(&self) -> String {
        MetricFn::describe(self)
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(MetricFn::dimension(self), x.len())?;
        self.metric(x)
    }

    fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        check_dim(MetricFn::dimension(self), x.len())?;
        self.metric(x)
    }
}

/// Generic scalar function on a chart, e.g. a conformal exponent φ.
pub trait ScalarFn: Send + Sync {
    fn dimension(&self) -> usize;
    fn describe(&self) -> String;
    fn eval<S: FieldScalar>(&self, x: &[S]) -> Result<S>;
}

pub trait ScalarField: Send + Sync {
    fn dimension(&self) -> usize;
    fn describe(&self) -> String;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_jet(&self, x: &[Jet]) -> Result<Jet>;
}

impl<T: ScalarFn> ScalarField for T {
    fn dimension(&self) -> usize {
        ScalarFn::dimension(self)
    }

    fn describe(&self) -> String {
        ScalarFn::describe(self)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(ScalarFn::dimension(self), x.len())?;
        self.eval(x)
    }

    fn value_jet(&self, x: &[Jet]) -> Result<Jet> {
        check_dim(ScalarFn::dimension(self), x.len())?;
        self.eval(x)
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// `φ(x) = c·|x|²`.
#[derive(Clone, Debug)]
pub struct QuadraticPhi {
    pub n: usize,
    pub coefficient: f64,
}

impl ScalarFn for QuadraticPhi {
    fn dimension(&self) -> usize {
        self.n
    }

    fn describe(&self) -> String {
        format!("{}*|x|^2", self.coefficient)
    }

    fn eval<S: FieldScalar>(&self, x: &[S]) -> Result<S> {
        let mut r2 = S::zero();
        for &c in x {
            r2 += c * c;
        }
        Ok(r2 * self.coefficient)
    }
}

/// `φ ≡ c`.
#[derive(Clone, Debug)]
pub struct ConstantPhi {
    pub n: usize,
    pub value: f64,
}

impl ScalarFn for ConstantPhi {
    fn dimension(&self) -> usize {
        self.n
    }

    fn describe(&self) -> String {
        format!("const {}", self.value)
    }

    fn eval<S: FieldScalar>(&self, _x: &[S]) -> Result<S> {
        Ok(S::constant(self.value))
    }
}

/// One term `amplitude·cos(2π⟨k, x⟩/L + phase)` of a periodic function.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMode {
    pub wave: Vec<i32>,
    pub amplitude: f64,
    pub phase: f64,
}

/// A trigonometric polynomial on the torus of side `side`; periodic by construction.
#[derive(Clone, Debug)]
pub struct FourierPhi {
    pub side: f64,
    pub modes: Vec<FourierMode>,
    pub n: usize,
}

impl ScalarFn for FourierPhi {
    fn dimension(&self) -> usize {
        self.n
    }

    fn describe(&self) -> String {
        format!("fourier({} modes, L={})", self.modes.len(), self.side)
    }

    fn eval<S: FieldScalar>(&self, x: &[S]) -> Result<S> {
        let base = 2.0 * std::f64::consts::PI / self.side;
        let mut acc = S::zero();
        for mode in &self.modes {
            check_dim(self.n, mode.wave.len())?;
            let mut arg = S::constant(mode.phase);
            for (&k, &xi) in mode.wave.iter().zip(x) {
                if k != 0 {
                    arg += xi * (base * k as f64);
                }
            }
            acc += arg.cos() * mode.amplitude;
        }
        Ok(acc)
    }
}

/// Max-entry asymmetry `max |g_ij - g_ji|`.
pub fn asymmetry(g: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((g[i * n + j] - g[j * n + i]).abs());
        }
    }
    worst
}
