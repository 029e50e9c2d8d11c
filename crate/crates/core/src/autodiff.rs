//! Second-order forward-mode differentiation.
//!
//! [`Jet`] carries a value together with its gradient and Hessian with
//! respect to up to [`MAX_DIM`] seeded input variables. Metric fields are
//! written once against the [`Scalar`] trait and evaluated either on plain
//! `f64` or on jets, which yields `g`, `∂g` and `∂²g` exactly (to rounding)
//! in a single pass.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Largest number of independent variables a jet can track.
pub const MAX_DIM: usize = 6;

/// Numeric type a metric field can be evaluated on.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn constant(value: f64) -> Self;
    fn value(&self) -> f64;

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value()`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn one() -> Self {
        Self::constant(1.0)
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    fn sqrt(self) -> Self {
        let r = self.value().sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    fn sin(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.chain(c, -s, -c)
    }

    fn cosh(self) -> Self {
        let v = self.value();
        self.chain(v.cosh(), v.sinh(), v.cosh())
    }

    fn sinh(self) -> Self {
        let v = self.value();
        self.chain(v.sinh(), v.cosh(), v.sinh())
    }

    fn recip(self) -> Self {
        let v = self.value();
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn powi(self, k: i32) -> Self {
        let v = self.value();
        let kf = k as f64;
        match k {
            0 => Self::one(),
            1 => self,
            _ => self.chain(
                v.powi(k),
                kf * v.powi(k - 1),
                kf * (kf - 1.0) * v.powi(k - 2),
            ),
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(value: f64) -> Self {
        value
    }

    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn chain(self, f: f64, _df: f64, _d2f: f64) -> Self {
        f
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn sin(self) -> Self {
        f64::sin(self)
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn cosh(self) -> Self {
        f64::cosh(self)
    }

    fn sinh(self) -> Self {
        f64::sinh(self)
    }

    fn recip(self) -> Self {
        1.0 / self
    }

    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Value, gradient and Hessian of a function of `dim` variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl Jet {
    /// The `index`-th coordinate function of `dim` variables, evaluated at `value`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds MAX_DIM");
        assert!(index < dim);
        let mut jet = Self::constant(value);
        jet.grad[index] = 1.0;
        jet.dim = dim;
        jet
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[f64]) -> Vec<Jet> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(v, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn joint_dim(&self, other: &Jet) -> usize {
        self.dim.max(other.dim)
    }
}

impl Scalar for Jet {
    #[inline]
    fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
            dim: 0,
        }
    }

    #[inline]
    fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let n = self.dim;
        let mut out = Jet::constant(f);
        out.dim = n;
        for i in 0..n {
            out.grad[i] = df * self.grad[i];
            for j in 0..=i {
                let h = d2f * (self.grad[i] * self.grad[j]) + df * self.hess[i][j];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;

    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        let n = self.joint_dim(&rhs);
        self.value += rhs.value;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
            for j in 0..n {
                self.hess[i][j] += rhs.hess[i][j];
            }
        }
        self.dim = n;
    }
}

impl Sub for Jet {
    type Output = Jet;

    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet) {
        let n = self.joint_dim(&rhs);
        self.value -= rhs.value;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
            for j in 0..n {
                self.hess[i][j] -= rhs.hess[i][j];
            }
        }
        self.dim = n;
    }
}

impl Mul for Jet {
    type Output = Jet;

    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.joint_dim(&rhs);
        let mut out = Jet::constant(self.value * rhs.value);
        out.dim = n;
        for i in 0..n {
            out.grad[i] = self.value * rhs.grad[i] + rhs.value * self.grad[i];
            // lower triangle, mirrored so the Hessian stays exactly symmetric
            for j in 0..=i {
                let h = self.value * rhs.hess[i][j]
                    + rhs.value * self.hess[i][j]
                    + (self.grad[i] * rhs.grad[j] + rhs.grad[i] * self.grad[j]);
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

impl MulAssign for Jet {
    #[inline]
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Div for Jet {
    type Output = Jet;

    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;

    #[inline]
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Add<f64> for Jet {
    type Output = Jet;

    #[inline]
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;

    #[inline]
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;

    #[inline]
    fn mul(mut self, rhs: f64) -> Jet {
        let n = self.dim;
        self.value *= rhs;
        for i in 0..n {
            self.grad[i] *= rhs;
            for j in 0..n {
                self.hess[i][j] *= rhs;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;

    #[inline]
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}
