//! Levi-Civita connection, Ricci and scalar curvature of a metric field at a point.
//!
//! Conventions: `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` and
//! `Ric_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_kl Γ^l_ij − Γ^k_il Γ^l_kj`,
//! under which round spheres have positive Ricci curvature. A metric is
//! negatively Ricci curved at a point when the largest eigenvalue of
//! `g⁻¹·Ric` is negative.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigenvalues, spd_inverse, symmetric_eigenvalues};
use crate::metric::MetricField;

/// Metrics whose condition number exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// How metric derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum DerivativePlan {
    /// Nested forward-mode jets; exact up to rounding.
    ForwardMode,
    /// Fourth-order central differences with optional Richardson extrapolation.
    CentralDifference { step: f64, richardson: bool },
}

impl Default for DerivativePlan {
    fn default() -> Self {
        DerivativePlan::ForwardMode
    }
}

impl DerivativePlan {
    pub fn central(step: f64) -> Self {
        DerivativePlan::CentralDifference {
            step,
            richardson: false,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DerivativePlan::ForwardMode => "forward-mode",
            DerivativePlan::CentralDifference { .. } => "central-difference",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DerivativePlan::ForwardMode => Ok(()),
            DerivativePlan::CentralDifference { step, .. } if step > 0.0 && step.is_finite() => Ok(()),
            DerivativePlan::CentralDifference { step, .. } => Err(Error::InvalidParameter(format!(
                "central-difference step must be positive, got {step}"
            ))),
        }
    }
}

/// `g`, `∂g` and `∂²g` at a point.
///
/// `dg[(i*n + j)*n + k] = ∂_k g_ij`, `ddg[((i*n + j)*n + k)*n + l] = ∂_k ∂_l g_ij`.
#[derive(Clone, Debug)]
pub struct MetricDerivatives {
    pub n: usize,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub ddg: Vec<f64>,
}

pub fn metric_derivatives(
    field: &dyn MetricField,
    x: &[f64],
    plan: &DerivativePlan,
) -> Result<MetricDerivatives> {
    plan.validate()?;
    let n = field.dimension();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if field.smoothness() < 2 {
        return Err(Error::InsufficientSmoothness {
            declared: field.smoothness(),
        });
    }
    match *plan {
        DerivativePlan::ForwardMode => forward_derivatives(field, x),
        DerivativePlan::CentralDifference { step, richardson } => {
            let coarse = central_derivatives(field, x, step)?;
            if !richardson {
                return Ok(coarse);
            }
            // fourth-order stencils: D* = (16·D(h/2) − D(h)) / 15
            let fine = central_derivatives(field, x, 0.5 * step)?;
            let extrapolate = |f: &[f64], c: &[f64]| -> Vec<f64> {
                f.iter().zip(c).map(|(f, c)| (16.0 * f - c) / 15.0).collect()
            };
            Ok(MetricDerivatives {
                n,
                dg: extrapolate(&fine.dg, &coarse.dg),
                ddg: extrapolate(&fine.ddg, &coarse.ddg),
                g: fine.g,
            })
        }
    }
}

fn forward_derivatives(field: &dyn MetricField, x: &[f64]) -> Result<MetricDerivatives> {
    let n = x.len();
    if n > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "forward mode supports dimension <= {MAX_DIM}, got {n}"
        )));
    }
    let jets = field.eval_jet(&Jet::seed(x))?;
    let mut out = MetricDerivatives {
        n,
        g: vec![0.0; n * n],
        dg: vec![0.0; n * n * n],
        ddg: vec![0.0; n * n * n * n],
    };
    for (ij, jet) in jets.iter().enumerate() {
        out.g[ij] = jet.value;
        for k in 0..n {
            out.dg[ij * n + k] = jet.grad[k];
            for l in 0..n {
                out.ddg[(ij * n + k) * n + l] = jet.hess[k][l];
            }
        }
    }
    Ok(out)
}

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

fn central_derivatives(field: &dyn MetricField, x: &[f64], h: f64) -> Result<MetricDerivatives> {
    let n = x.len();
    let nn = n * n;
    let eval_at = |moves: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut p = x.to_vec();
        for &(axis, delta) in moves {
            p[axis] += delta;
        }
        field.eval(&p)
    };
    let g = field.eval(x)?;
    let mut dg = vec![0.0; nn * n];
    let mut ddg = vec![0.0; nn * n * n];
    for k in 0..n {
        let mut first = vec![0.0; nn];
        let mut second = vec![-30.0 * 1.0; nn];
        for (s, gs) in second.iter_mut().zip(&g) {
            *s *= gs;
        }
        for &(offset, weight) in &STENCIL {
            let gk = eval_at(&[(k, offset * h)])?;
            let w2 = if offset.abs() == 1.0 { 16.0 } else { -1.0 };
            for ij in 0..nn {
                first[ij] += weight * gk[ij];
                second[ij] += w2 * gk[ij];
            }
        }
        for ij in 0..nn {
            dg[ij * n + k] = first[ij] / (12.0 * h);
            ddg[(ij * n + k) * n + k] = second[ij] / (12.0 * h * h);
        }
        for l in (k + 1)..n {
            let mut mixed = vec![0.0; nn];
            for &(ok, wk) in &STENCIL {
                for &(ol, wl) in &STENCIL {
                    let gkl = eval_at(&[(k, ok * h), (l, ol * h)])?;
                    for ij in 0..nn {
                        mixed[ij] += wk * wl * gkl[ij];
                    }
                }
            }
            for ij in 0..nn {
                let v = mixed[ij] / (144.0 * h * h);
                ddg[(ij * n + k) * n + l] = v;
                ddg[(ij * n + l) * n + k] = v;
            }
        }
    }
    Ok(MetricDerivatives { n, g, dg, ddg })
}

/// Curvature quantities at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub metric: Vec<f64>,
    pub metric_inverse: Vec<f64>,
    /// `christoffel[(k*n + i)*n + j] = Γ^k_ij`.
    pub christoffel: Vec<f64>,
    /// Row-major Ricci (0,2)-tensor as computed (not symmetrised).
    pub ricci: Vec<f64>,
    pub scalar: f64,
    /// Eigenvalues of `g⁻¹·Ric`, ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: DerivativePlan,
}

impl CurvatureReport {
    pub fn dimension(&self) -> usize {
        self.point.len()
    }

    /// `Γ^k_ij`.
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dimension();
        self.christoffel[(k * n + i) * n + j]
    }

    pub fn to_record(&self) -> CurvatureRecord {
        CurvatureRecord {
            point: self.point.clone(),
            ricci: self.ricci.clone(),
            scalar: self.scalar,
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            method: self.method.label().to_string(),
        }
    }
}

/// Serialized form of a [`CurvatureReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRecord {
    pub point: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: String,
}

fn check_metric(point: &[f64], g: &[f64], n: usize) -> Result<()> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            point: point.to_vec(),
        });
    }
    let ev = symmetric_eigenvalues(g, n);
    let (lo, hi) = (ev[0], ev[n - 1]);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite {
            point: point.to_vec(),
            min_eigenvalue: lo,
        });
    }
    let condition = hi / lo;
    if condition > MAX_CONDITION {
        return Err(Error::SingularMetric {
            point: point.to_vec(),
            condition,
        });
    }
    Ok(())
}

/// Christoffel symbols and their first derivatives from metric derivatives.
/// Returns `(ginv, Γ, ∂Γ)` with `∂Γ[((k*n + i)*n + j)*n + m] = ∂_m Γ^k_ij`.
fn connection(d: &MetricDerivatives, ginv: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = d.n;
    let dg = |i: usize, j: usize, k: usize| d.dg[(i * n + j) * n + k];
    let ddg = |i: usize, j: usize, k: usize, l: usize| d.ddg[((i * n + j) * n + k) * n + l];

    // Γ_{l,ij} (first kind) and ∂_m Γ_{l,ij}
    let mut first = vec![0.0; n * n * n];
    let mut dfirst = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                first[(l * n + i) * n + j] = 0.5 * (dg(j, l, i) + dg(i, l, j) - dg(i, j, l));
                for m in 0..n {
                    dfirst[((l * n + i) * n + j) * n + m] =
                        0.5 * (ddg(j, l, i, m) + ddg(i, l, j, m) - ddg(i, j, l, m));
                }
            }
        }
    }

    // ∂_m g^{kl} = −g^{ka} ∂_m g_ab g^{bl}
    let mut dginv = vec![0.0; n * n * n];
    for k in 0..n {
        for l in 0..n {
            for m in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    let gka = ginv[k * n + a];
                    if gka == 0.0 {
                        continue;
                    }
                    for b in 0..n {
                        acc += gka * dg(a, b, m) * ginv[b * n + l];
                    }
                }
                dginv[(k * n + l) * n + m] = -acc;
            }
        }
    }

    let mut gamma = vec![0.0; n * n * n];
    let mut dgamma = vec![0.0; n * n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..=i {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[k * n + l] * first[(l * n + i) * n + j];
                }
                gamma[(k * n + i) * n + j] = acc;
                gamma[(k * n + j) * n + i] = acc;
                for m in 0..n {
                    let mut dacc = 0.0;
                    for l in 0..n {
                        dacc += dginv[(k * n + l) * n + m] * first[(l * n + i) * n + j]
                            + ginv[k * n + l] * dfirst[((l * n + i) * n + j) * n + m];
                    }
                    dgamma[((k * n + i) * n + j) * n + m] = dacc;
                    dgamma[((k * n + j) * n + i) * n + m] = dacc;
                }
            }
        }
    }
    (gamma, dgamma)
}

fn ricci_from_connection(n: usize, gamma: &[f64], dgamma: &[f64]) -> Vec<f64> {
    let g = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dg = |k: usize, i: usize, j: usize, m: usize| dgamma[((k * n + i) * n + j) * n + m];
    // contracted Γ^k_kl
    let trace: Vec<f64> = (0..n).map(|l| (0..n).map(|k| g(k, k, l)).sum()).collect();
    let mut ric = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += dg(k, i, j, k) - dg(k, k, j, i);
                for l in 0..n {
                    acc -= g(k, i, l) * g(l, k, j);
                }
            }
            for l in 0..n {
                acc += trace[l] * g(l, i, j);
            }
            ric[i * n + j] = acc;
        }
    }
    ric
}

/// Full curvature report at `x`.
pub fn curvature_report(
    field: &dyn MetricField,
    x: &[f64],
    plan: &DerivativePlan,
) -> Result<CurvatureReport> {
    let d = metric_derivatives(field, x, plan)?;
    report_from_derivatives(x, &d, *plan)
}

pub fn report_from_derivatives(
    x: &[f64],
    d: &MetricDerivatives,
    method: DerivativePlan,
) -> Result<CurvatureReport> {
    let n = d.n;
    check_metric(x, &d.g, n)?;
    let ginv = spd_inverse(&d.g, n).ok_or_else(|| Error::NotPositiveDefinite {
        point: x.to_vec(),
        min_eigenvalue: f64::NAN,
    })?;
    let (gamma, dgamma) = connection(d, &ginv);
    let ricci = ricci_from_connection(n, &gamma, &dgamma);
    if ricci.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { point: x.to_vec() });
    }
    let scalar: f64 = (0..n * n).map(|ij| ginv[ij] * ricci[ij]).sum();
    let eigenvalues = generalized_symmetric_eigenvalues(&ricci, &d.g, n).ok_or_else(|| {
        Error::NotPositiveDefinite {
            point: x.to_vec(),
            min_eigenvalue: f64::NAN,
        }
    })?;
    Ok(CurvatureReport {
        point: x.to_vec(),
        metric: d.g.clone(),
        metric_inverse: ginv,
        christoffel: gamma,
        ricci,
        scalar,
        lambda_min: eigenvalues[0],
        lambda_max: eigenvalues[n - 1],
        eigenvalues,
        method,
    })
}

/// `Γ^k_ij` at `x`, indexed `[(k*n + i)*n + j]`.
pub fn christoffel(field: &dyn MetricField, x: &[f64], plan: &DerivativePlan) -> Result<Vec<f64>> {
    let d = metric_derivatives(field, x, plan)?;
    check_metric(x, &d.g, d.n)?;
    let ginv = spd_inverse(&d.g, d.n).ok_or_else(|| Error::NotPositiveDefinite {
        point: x.to_vec(),
        min_eigenvalue: f64::NAN,
    })?;
    Ok(connection(&d, &ginv).0)
}

pub fn ricci(field: &dyn MetricField, x: &[f64], plan: &DerivativePlan) -> Result<Vec<f64>> {
    Ok(curvature_report(field, x, plan)?.ricci)
}

/// `(λ_min, λ_max)` of `g⁻¹·Ric` at `x`.
pub fn ricci_eigen_extremes(
    field: &dyn MetricField,
    x: &[f64],
    plan: &DerivativePlan,
) -> Result<(f64, f64)> {
    let r = curvature_report(field, x, plan)?;
    Ok((r.lambda_min, r.lambda_max))
}

pub fn scalar(field: &dyn MetricField, x: &[f64], plan: &DerivativePlan) -> Result<f64> {
    Ok(curvature_report(field, x, plan)?.scalar)
}

/// Ricci tensor of `e^{2φ}·g` from the Ricci tensor of `g` and the coordinate
/// gradient / Hessian of `φ`:
/// `Ric' = Ric − (n−2)(∇²φ − dφ⊗dφ) − (Δφ + (n−2)|∇φ|²)·g`.
pub fn conformal_ricci_closed_form(
    base: &CurvatureReport,
    grad_phi: &[f64],
    hess_phi: &[f64],
) -> Result<Vec<f64>> {
    let n = base.dimension();
    if grad_phi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grad_phi.len(),
        });
    }
    if hess_phi.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: hess_phi.len(),
        });
    }
    let nf = n as f64;
    // covariant Hessian ∇²φ_ij = ∂_ij φ − Γ^k_ij ∂_k φ
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = hess_phi[i * n + j];
            for (k, gk) in grad_phi.iter().enumerate() {
                v -= base.gamma(k, i, j) * gk;
            }
            cov[i * n + j] = v;
        }
    }
    let ginv = &base.metric_inverse;
    let laplacian: f64 = (0..n * n).map(|ij| ginv[ij] * cov[ij]).sum();
    let mut grad_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            grad_sq += ginv[i * n + j] * grad_phi[i] * grad_phi[j];
        }
    }
    let trace_term = laplacian + (nf - 2.0) * grad_sq;
    Ok((0..n * n)
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            base.ricci[ij]
                - (nf - 2.0) * (cov[ij] - grad_phi[i] * grad_phi[j])
                - trace_term * base.metric[ij]
        })
        .collect())
}
