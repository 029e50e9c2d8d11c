//! Candidate seed metrics: Euclidean plus a perturbation supported in the unit ball.

use serde::{Deserialize, Serialize};

use super::{FieldScalar, MetricFn};
use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

/// Below this value of `1 - |y|²` the bump `exp(-1/(1-|y|²))` is under
/// `e^{-700}` and is treated as zero together with all its derivatives.
const BUMP_EDGE: f64 = 1.0 / 700.0;

/// `exp(-1/(1-|y|²))` inside the unit ball, `None` outside.
pub fn bump<S: Scalar>(y: &[S]) -> Option<S> {
    let mut r2 = S::zero();
    for &c in y {
        r2 += c * c;
    }
    let w = (r2 - 1.0) * -1.0;
    if w.value() <= BUMP_EDGE {
        return None;
    }
    Some((w.recip() * -1.0).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    /// `g = exp(2ψ)·δ` with `ψ = Σ c_k·φ_k`.
    Conformal,
    /// `g = δ + Σ c_k·φ_k·E_k` with `E_k` a symmetric unit matrix.
    FullTensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Bump,
}

/// `φ(y) = bump(|y|²)·Π y_i^{e_i}`, optionally attached to the tensor
/// component `(i, j)` (full-tensor mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisElement {
    pub profile: ProfileKind,
    pub monomial: Vec<u32>,
    pub component: Option<[usize; 2]>,
}

impl BasisElement {
    fn angular<S: Scalar>(&self, y: &[S]) -> S {
        let mut acc = S::one();
        for (&e, &c) in self.monomial.iter().zip(y) {
            if e > 0 {
                acc *= c.powi(e as i32);
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub dimension: usize,
    pub mode: PerturbationMode,
    pub basis: Vec<BasisElement>,
    pub coefficients: Vec<f64>,
}

/// Exponent vectors of total degree `<= max_degree`, graded then lexicographic.
fn monomials(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            if remaining == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(n, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        rec(n, degree, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

impl PerturbationParams {
    /// All bump profiles with angular monomials up to `max_degree`; in
    /// full-tensor mode each profile is repeated for every component `i <= j`.
    pub fn default_basis(n: usize, mode: PerturbationMode, max_degree: u32) -> Self {
        let mut basis = Vec::new();
        for monomial in monomials(n, max_degree) {
            match mode {
                PerturbationMode::Conformal => basis.push(BasisElement {
                    profile: ProfileKind::Bump,
                    monomial,
                    component: None,
                }),
                PerturbationMode::FullTensor => {
                    for i in 0..n {
                        for j in i..n {
                            basis.push(BasisElement {
                                profile: ProfileKind::Bump,
                                monomial: monomial.clone(),
                                component: Some([i, j]),
                            });
                        }
                    }
                }
            }
        }
        let coefficients = vec![0.0; basis.len()];
        Self {
            dimension: n,
            mode,
            basis,
            coefficients,
        }
    }

    pub fn with_coefficients(mut self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: coefficients.len(),
            });
        }
        self.coefficients = coefficients;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::InvalidParameter("seed dimension must be >= 1".into()));
        }
        if self.coefficients.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: self.coefficients.len(),
            });
        }
        if let Some(c) = self.coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {c}")));
        }
        for b in &self.basis {
            if b.monomial.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: b.monomial.len(),
                });
            }
            match (self.mode, b.component) {
                (PerturbationMode::Conformal, None) => {}
                (PerturbationMode::FullTensor, Some([i, j])) if i < n && j < n => {}
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "basis element {b:?} does not fit mode {:?}",
                        self.mode
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }
}

/// A candidate for the local seed metric: Euclidean outside the unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSeed {
    params: PerturbationParams,
}

impl CandidateSeed {
    /// The flat seed (no perturbation).
    pub fn euclidean(n: usize) -> Self {
        Self {
            params: PerturbationParams {
                dimension: n,
                mode: PerturbationMode::Conformal,
                basis: Vec::new(),
                coefficients: Vec::new(),
            },
        }
    }

    /// Validated seed without positive-definiteness screening.
    pub fn from_params(params: PerturbationParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &PerturbationParams {
        &self.params
    }

    pub fn is_euclidean(&self) -> bool {
        self.params.is_zero()
    }

    /// `g(y) - δ`, or `None` where the perturbation vanishes identically
    /// (outside the unit ball, or all coefficients zero).
    pub fn perturbation<S: Scalar>(&self, y: &[S]) -> Option<Vec<S>> {
        if self.params.is_zero() {
            return None;
        }
        let b = bump(y)?;
        let n = self.params.dimension;
        let mut p = vec![S::zero(); n * n];
        match self.params.mode {
            PerturbationMode::Conformal => {
                let mut psi = S::zero();
                for (el, &c) in self.params.basis.iter().zip(&self.params.coefficients) {
                    if c != 0.0 {
                        psi += el.angular(y) * c;
                    }
                }
                let excess = (psi * b * 2.0).exp() - 1.0;
                for i in 0..n {
                    p[i * n + i] = excess;
                }
            }
            PerturbationMode::FullTensor => {
                for (el, &c) in self.params.basis.iter().zip(&self.params.coefficients) {
                    if c == 0.0 {
                        continue;
                    }
                    let [i, j] = el.component.expect("validated full-tensor basis");
                    let term = el.angular(y) * b * c;
                    p[i * n + j] += term;
                    if i != j {
                        p[j * n + i] += term;
                    }
                }
            }
        }
        Some(p)
    }

    /// Smallest eigenvalue of the metric at `y`.
    pub fn min_eigenvalue(&self, y: &[f64]) -> f64 {
        let n = self.params.dimension;
        let g = self.metric(y).expect("dimension checked by caller");
        symmetric_eigenvalues(&g, n)[0]
    }
}

/// Builds a candidate seed, rejecting it if the metric fails to be positive
/// definite (min eigenvalue `> margin`) at any verification point.
pub fn make_candidate_seed(
    params: PerturbationParams,
    verification: &[Vec<f64>],
    margin: f64,
) -> Result<CandidateSeed> {
    params.validate()?;
    let seed = CandidateSeed { params };
    let n = seed.params.dimension;
    for y in verification {
        super::check_dim(n, y.len())?;
        let min_eigenvalue = seed.min_eigenvalue(y);
        if !(min_eigenvalue > margin) {
            return Err(Error::NotPositiveDefinite {
                point: y.clone(),
                min_eigenvalue,
            });
        }
    }
    Ok(seed)
}

impl MetricFn for CandidateSeed {
    fn dimension(&self) -> usize {
        self.params.dimension
    }

    fn describe(&self) -> String {
        format!(
            "seed({:?}, {} basis elements)",
            self.params.mode,
            self.params.basis.len()
        )
    }

    fn metric<S: FieldScalar>(&self, y: &[S]) -> Result<Vec<S>> {
        let n = self.params.dimension;
        let mut g = vec![S::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = S::one();
        }
        if let Some(p) = self.perturbation(y) {
            for (gij, pij) in g.iter_mut().zip(p) {
                *gij += pij;
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::identity;
    use crate::metric::MetricField;

    fn full(n: usize, coeff: f64) -> PerturbationParams {
        let p = PerturbationParams::default_basis(n, PerturbationMode::FullTensor, 1);
        let k = p.basis.len();
        let c = (0..k).map(|i| coeff * ((i as f64) * 0.7).sin()).collect();
        p.with_coefficients(c).unwrap()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(
            PerturbationParams::default_basis(3, PerturbationMode::FullTensor, 1).basis.len(),
            4 * 6
        );
        assert_eq!(monomials(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn zero_coefficients_are_euclidean() {
        let p = PerturbationParams::default_basis(3, PerturbationMode::Conformal, 2);
        let s = make_candidate_seed(p, &[vec![0.0; 3]], 0.0).unwrap();
        assert_eq!(s.eval(&[0.1, 0.2, 0.3]).unwrap(), identity(3));
    }

    #[test]
    fn exactly_euclidean_outside_unit_ball() {
        let s = make_candidate_seed(full(3, 0.3), &[], 0.0).unwrap();
        assert_eq!(s.eval(&[1.5, 0.0, 0.0]).unwrap(), identity(3));
        assert_eq!(s.eval(&[0.6, 0.8, 0.0]).unwrap(), identity(3));
        assert_ne!(s.eval(&[0.3, 0.1, 0.0]).unwrap(), identity(3));
    }

    #[test]
    fn rejects_indefinite_candidates() {
        let p = PerturbationParams::default_basis(2, PerturbationMode::FullTensor, 0)
            .with_coefficients(vec![-5.0, 0.0, 0.0])
            .unwrap();
        let err = make_candidate_seed(p, &[vec![0.0, 0.0]], 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = full(3, 1.0 / 3.0);
        let back = PerturbationParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        for (a, b) in p.coefficients.iter().zip(&back.coefficients) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_params_rejected() {
        let mut p = full(3, 0.1);
        p.coefficients.pop();
        assert!(p.validate().is_err());
        let mut p = full(3, 0.1);
        p.basis[0].component = Some([0, 7]);
        assert!(p.validate().is_err());
    }
}
