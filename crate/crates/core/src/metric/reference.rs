//! Reference metrics with known curvature.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FieldScalar, MetricFn};
use crate::atlas::TorusSpec;
use crate::autodiff::Scalar;
use crate::error::{Error, Result};

/// Warp function `f(t)` of a warped product `dt² + f(t)²·g_F`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WarpProfile {
    /// `f ≡ c`
    Constant { c: f64 },
    /// `f(t) = c·exp(k·t)`
    Exponential { c: f64, k: f64 },
    /// `f(t) = c·cosh(k·t)`
    Cosh { c: f64, k: f64 },
}

impl WarpProfile {
    fn validate(&self) -> Result<()> {
        let c = match *self {
            WarpProfile::Constant { c } => c,
            WarpProfile::Exponential { c, .. } => c,
            WarpProfile::Cosh { c, .. } => c,
        };
        if c > 0.0 && c.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("warp function must be positive, got scale {c}")))
        }
    }

    pub fn eval<S: Scalar>(&self, t: S) -> S {
        match *self {
            WarpProfile::Constant { c } => S::constant(c),
            WarpProfile::Exponential { c, k } => (t * k).exp() * c,
            WarpProfile::Cosh { c, k } => (t * k).cosh() * c,
        }
    }
}

/// Fiber of a warped product: unit round sphere (stereographic chart) or flat space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fiber {
    UnitSphere,
    Flat,
}

/// Standard coordinate expressions of metrics with known curvature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ReferenceMetric {
    Euclidean { n: usize },
    FlatTorus { torus: TorusSpec },
    /// Round sphere of the given radius in stereographic coordinates:
    /// `g = 4r⁴/(r² + |x|²)²·δ`.
    RoundSphere { n: usize, radius: f64 },
    /// Poincaré ball: `g = 4/(1 - |x|²)²·δ` on `|x| < 1`.
    HyperbolicBall { n: usize },
    /// `dt² + f(t)²·g_F` with coordinates `(t, y_1, …, y_{n-1})`.
    WarpedProduct { n: usize, warp: WarpProfile, fiber: Fiber },
}

pub fn make_reference(kind: ReferenceMetric) -> Result<ReferenceMetric> {
    let n = kind.n();
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    match &kind {
        ReferenceMetric::RoundSphere { radius, .. } if !(*radius > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "sphere radius must be positive, got {radius}"
            )))
        }
        ReferenceMetric::WarpedProduct { n, warp, .. } => {
            if *n < 2 {
                return Err(Error::InvalidParameter(
                    "warped product needs a base line and a fiber (n >= 2)".into(),
                ));
            }
            warp.validate()?;
        }
        ReferenceMetric::FlatTorus { torus } => {
            TorusSpec::new(torus.n, torus.side)?;
        }
        _ => {}
    }
    Ok(kind)
}

impl ReferenceMetric {
    pub fn n(&self) -> usize {
        match self {
            ReferenceMetric::Euclidean { n }
            | ReferenceMetric::RoundSphere { n, .. }
            | ReferenceMetric::HyperbolicBall { n }
            | ReferenceMetric::WarpedProduct { n, .. } => *n,
            ReferenceMetric::FlatTorus { torus } => torus.n,
        }
    }
}

fn conformally_flat<S: FieldScalar>(factor: S, n: usize) -> Vec<S> {
    let mut g = vec![S::zero(); n * n];
    for i in 0..n {
        g[i * n + i] = factor;
    }
    g
}

fn radius_sq<S: FieldScalar>(x: &[S]) -> S {
    let mut r2 = S::zero();
    for &c in x {
        r2 += c * c;
    }
    r2
}

impl MetricFn for ReferenceMetric {
    fn dimension(&self) -> usize {
        self.n()
    }

    fn describe(&self) -> String {
        self.to_string()
    }

    fn metric<S: FieldScalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.n();
        match *self {
            ReferenceMetric::Euclidean { .. } | ReferenceMetric::FlatTorus { .. } => {
                Ok(conformally_flat(S::one(), n))
            }
            ReferenceMetric::RoundSphere { radius, .. } => {
                let r2 = radius * radius;
                let denom = radius_sq(x) + r2;
                let factor = (denom * denom).recip() * (4.0 * r2 * r2);
                Ok(conformally_flat(factor, n))
            }
            ReferenceMetric::HyperbolicBall { .. } => {
                let r2 = radius_sq(x);
                if r2.value() >= 1.0 {
                    return Err(Error::OutsideDomain {
                        what: "Poincaré ball".into(),
                        point: x.iter().map(|c| c.value()).collect(),
                    });
                }
                let w = (r2 - 1.0) * -1.0;
                Ok(conformally_flat((w * w).recip() * 4.0, n))
            }
            ReferenceMetric::WarpedProduct { warp, fiber, .. } => {
                let f = warp.eval(x[0]);
                let fiber_factor = match fiber {
                    Fiber::Flat => S::one(),
                    Fiber::UnitSphere => {
                        let denom = radius_sq(&x[1..]) + 1.0;
                        (denom * denom).recip() * 4.0
                    }
                };
                let mut g = vec![S::zero(); n * n];
                g[0] = S::one();
                let w = f * f * fiber_factor;
                for i in 1..n {
                    g[i * n + i] = w;
                }
                Ok(g)
            }
        }
    }
}

impl fmt::Display for ReferenceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceMetric::Euclidean { n } => write!(f, "euclidean:n={n}"),
            ReferenceMetric::FlatTorus { torus } => {
                write!(f, "flat-torus:n={}:L={}", torus.n, torus.side)
            }
            ReferenceMetric::RoundSphere { n, radius } => write!(f, "sphere:r={radius}:n={n}"),
            ReferenceMetric::HyperbolicBall { n } => write!(f, "hyperbolic:n={n}"),
            ReferenceMetric::WarpedProduct { n, warp, fiber } => {
                let fiber = match fiber {
                    Fiber::UnitSphere => "sphere",
                    Fiber::Flat => "flat",
                };
                match warp {
                    WarpProfile::Constant { c } => {
                        write!(f, "warped:n={n}:warp=const:c={c}:fiber={fiber}")
                    }
                    WarpProfile::Exponential { c, k } => {
                        write!(f, "warped:n={n}:warp=exp:c={c}:k={k}:fiber={fiber}")
                    }
                    WarpProfile::Cosh { c, k } => {
                        write!(f, "warped:n={n}:warp=cosh:c={c}:k={k}:fiber={fiber}")
                    }
                }
            }
        }
    }
}

/// Parses builtin names such as `flat-torus`, `sphere:r=1:n=3`,
/// `hyperbolic:n=3` or `warped:n=3:warp=cosh:c=1:k=0.5:fiber=sphere`.
impl FromStr for ReferenceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default();
        let mut kv = std::collections::BTreeMap::new();
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("expected key=value in metric name, got '{part}'"))
            })?;
            kv.insert(k.to_string(), v.to_string());
        }
        let num = |key: &str, default: f64| -> Result<f64> {
            kv.get(key).map_or(Ok(default), |v| {
                v.parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad number for {key}: {v}")))
            })
        };
        let n = num("n", 3.0)? as usize;
        let kind = match head {
            "euclidean" => ReferenceMetric::Euclidean { n },
            "flat-torus" => ReferenceMetric::FlatTorus {
                torus: TorusSpec {
                    n,
                    side: num("L", 2.0 * std::f64::consts::PI)?,
                },
            },
            "sphere" => ReferenceMetric::RoundSphere {
                n,
                radius: num("r", 1.0)?,
            },
            "hyperbolic" => ReferenceMetric::HyperbolicBall { n },
            "warped" => {
                let c = num("c", 1.0)?;
                let k = num("k", 1.0)?;
                let warp = match kv.get("warp").map(String::as_str).unwrap_or("const") {
                    "const" => WarpProfile::Constant { c },
                    "exp" => WarpProfile::Exponential { c, k },
                    "cosh" => WarpProfile::Cosh { c, k },
                    other => {
                        return Err(Error::InvalidParameter(format!("unknown warp '{other}'")))
                    }
                };
                let fiber = match kv.get("fiber").map(String::as_str).unwrap_or("sphere") {
                    "sphere" => Fiber::UnitSphere,
                    "flat" => Fiber::Flat,
                    other => {
                        return Err(Error::InvalidParameter(format!("unknown fiber '{other}'")))
                    }
                };
                ReferenceMetric::WarpedProduct { n, warp, fiber }
            }
            other => return Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        };
        make_reference(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricField;

    #[test]
    fn euclidean_is_identity() {
        let g = make_reference(ReferenceMetric::Euclidean { n: 3 }).unwrap();
        assert_eq!(g.eval(&[0.3, -2.0, 7.0]).unwrap(), crate::atlas::identity(3));
    }

    #[test]
    fn poincare_at_origin_is_four_identity() {
        // 4/(1-|x|²)² at x = 0
        let g = make_reference(ReferenceMetric::HyperbolicBall { n: 3 }).unwrap();
        let m = g.eval(&[0.0; 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i * 3 + j], if i == j { 4.0 } else { 0.0 });
            }
        }
        assert!(matches!(g.eval(&[1.0, 0.0, 0.0]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn trivial_warp_is_block_product() {
        let g = make_reference(ReferenceMetric::WarpedProduct {
            n: 3,
            warp: WarpProfile::Constant { c: 1.0 },
            fiber: Fiber::Flat,
        })
        .unwrap();
        assert_eq!(g.eval(&[0.4, 1.0, 2.0]).unwrap(), crate::atlas::identity(3));
        let s = make_reference(ReferenceMetric::WarpedProduct {
            n: 3,
            warp: WarpProfile::Constant { c: 1.0 },
            fiber: Fiber::UnitSphere,
        })
        .unwrap();
        let m = s.eval(&[5.0, 0.0, 0.0]).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn invalid_parameters() {
        assert!(make_reference(ReferenceMetric::RoundSphere { n: 3, radius: 0.0 }).is_err());
        assert!(make_reference(ReferenceMetric::WarpedProduct {
            n: 3,
            warp: WarpProfile::Cosh { c: -1.0, k: 1.0 },
            fiber: Fiber::Flat
        })
        .is_err());
    }

    #[test]
    fn builtin_names_round_trip() {
        for name in [
            "flat-torus",
            "sphere:r=1:n=3",
            "hyperbolic:n=4",
            "euclidean:n=2",
            "warped:n=3:warp=cosh:c=1:k=0.5:fiber=sphere",
        ] {
            let m: ReferenceMetric = name.parse().unwrap();
            let again: ReferenceMetric = m.to_string().parse().unwrap();
            assert_eq!(m, again);
        }
        assert!("sphere:r=-1".parse::<ReferenceMetric>().is_err());
        assert!("blob".parse::<ReferenceMetric>().is_err());
    }
}
