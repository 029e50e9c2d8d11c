//! Curvature sweeps of deformed metrics over `(d, s)` parameter grids.
//!
//! Extremes are taken over a finite sample set; reports record sample counts
//! and refinement levels and make no continuum claim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{distance_sq_unchecked, TorusSpec};
use crate::curvature::{curvature_report, DerivativePlan};
use crate::deform::{build_ga, DeformedMetric, TransplantedMetric, FACTOR_SUPPORT, INTERPRETATION, SEED_RADIUS};
use crate::error::{Error, Result};
use crate::metric::{CandidateSeed, PerturbationParams};
use crate::net::CoveringNet;

/// Samples closer than this to an anchor are dropped: the distance cone makes
/// the metric non-smooth there.
pub const ANCHOR_EXCLUSION: f64 = 1e-9;

/// Radial offset (in units of ϱ) used to straddle the support radii.
const STRADDLE: f64 = 1e-3;

/// Cell-centred grid on the torus, optionally enriched around anchors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    #[serde(flatten)]
    pub torus: TorusSpec,
    pub resolution: usize,
    /// Adds radial samples inside each `B_{2ϱ}(a)` and on both sides of the
    /// radii `2ϱ` and `9.5ϱ`.
    pub anchor_refinement: bool,
}

impl SampleGrid {
    pub fn new(torus: TorusSpec, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be >= 2, got {resolution}"
            )));
        }
        Ok(Self {
            torus,
            resolution,
            anchor_refinement: false,
        })
    }

    pub fn with_anchor_refinement(mut self, on: bool) -> Self {
        self.anchor_refinement = on;
        self
    }

    /// Same grid with about four times as many base samples.
    pub fn quadrupled(&self) -> Self {
        let m = (self.resolution as f64 * 4f64.powf(1.0 / self.torus.n as f64)).ceil() as usize;
        Self {
            resolution: m.max(self.resolution + 1),
            ..*self
        }
    }

    /// Sample points; the second value counts points dropped next to anchors.
    pub fn points(&self, net: &CoveringNet) -> (Vec<Vec<f64>>, usize) {
        let n = self.torus.n;
        let m = self.resolution;
        let h = self.torus.side / m as f64;
        let total = m.pow(n as u32);
        let mut pts = Vec::with_capacity(total);
        for i in 0..total {
            let mut rem = i;
            let mut p = vec![0.0; n];
            for axis in (0..n).rev() {
                p[axis] = ((rem % m) as f64 + 0.5) * h;
                rem /= m;
            }
            pts.push(p);
        }
        if self.anchor_refinement {
            let rho = net.rho;
            let radii = [
                0.25 * rho,
                0.5 * rho,
                0.75 * rho,
                rho,
                1.5 * rho,
                (SEED_RADIUS - STRADDLE) * rho,
                (SEED_RADIUS + STRADDLE) * rho,
                (FACTOR_SUPPORT - STRADDLE) * rho,
                (FACTOR_SUPPORT + STRADDLE) * rho,
            ];
            for a in &net.anchors {
                for axis in 0..n {
                    for sign in [-1.0, 1.0] {
                        for r in radii {
                            let mut p = a.position.clone();
                            p[axis] += sign * r;
                            pts.push(self.torus.reduce(&p));
                        }
                    }
                }
            }
        }
        let cut = ANCHOR_EXCLUSION * ANCHOR_EXCLUSION;
        let before = pts.len();
        pts.retain(|p| {
            net.anchors
                .iter()
                .all(|a| distance_sq_unchecked(self.torus.side, p, &a.position) >= cut)
        });
        let dropped = before - pts.len();
        (pts, dropped)
    }
}

/// Extremes over one sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub samples: usize,
    pub resolution: usize,
    pub lambda_max_global: f64,
    pub lambda_min_global: f64,
    pub scalar_max: f64,
    pub scalar_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub d: f64,
    pub s: f64,
    /// `None` when an engine error aborted the cell (see `error`).
    pub base: Option<CellStats>,
    pub refined: Option<CellStats>,
    pub negative: bool,
    pub reclassified: bool,
    pub error: Option<String>,
}

impl SweepCell {
    /// Extremes over base and refined samples together.
    pub fn combined(&self) -> Option<(f64, f64, f64)> {
        let b = self.base.as_ref()?;
        let (mut lmax, mut lmin, mut smax) = (b.lambda_max_global, b.lambda_min_global, b.scalar_max);
        if let Some(r) = &self.refined {
            lmax = lmax.max(r.lambda_max_global);
            lmin = lmin.min(r.lambda_min_global);
            smax = smax.max(r.scalar_max);
        }
        Some((lmax, lmin, smax))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSummary {
    pub n: usize,
    #[serde(rename = "L")]
    pub side: f64,
    pub rho: f64,
    pub seed: u64,
    pub anchors: usize,
    pub multiplicity_observed: usize,
}

impl NetSummary {
    pub fn of(net: &CoveringNet) -> Self {
        Self {
            n: net.torus.n,
            side: net.torus.side,
            rho: net.rho,
            seed: net.seed,
            anchors: net.anchors.len(),
            multiplicity_observed: net.multiplicity_observed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStatus {
    Found,
    NotFound,
    FlatBaseline,
}

impl SweepStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SweepStatus::Found => "found",
            SweepStatus::NotFound => "not-found",
            SweepStatus::FlatBaseline => "flat baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub net: NetSummary,
    pub seed_metric: PerturbationParams,
    pub d_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub grid: SampleGrid,
    pub refinement_resolution: usize,
    pub excluded_samples: usize,
    /// Row-major over `(d, s)`.
    pub cells: Vec<SweepCell>,
    pub negative_region: Vec<[f64; 2]>,
    pub a_obs: Option<f64>,
    pub b_obs: Option<f64>,
    /// Every negative cell also has negative sampled scalar curvature.
    pub scalar_consistent: bool,
    pub status: SweepStatus,
    pub interpretation: String,
    pub method: String,
    pub plan: DerivativePlan,
    pub log: Vec<String>,
}

impl SweepResult {
    pub fn cell(&self, d_index: usize, s_index: usize) -> &SweepCell {
        &self.cells[d_index * self.s_values.len() + s_index]
    }
}

/// Evaluates `(λ_min, λ_max, scalar)` extremes; the first engine error aborts.
pub fn sample_extremes(
    metric: &DeformedMetric,
    points: &[Vec<f64>],
    plan: &DerivativePlan,
) -> std::result::Result<(f64, f64, f64, f64), String> {
    let per_point: Vec<std::result::Result<(f64, f64, f64), String>> = points
        .par_iter()
        .map(|x| {
            curvature_report(metric, x, plan)
                .map(|r| (r.lambda_min, r.lambda_max, r.scalar))
                .map_err(|e| format!("{e} at {x:?}"))
        })
        .collect();
    let mut acc = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for r in per_point {
        let (lmin, lmax, sc) = r?;
        acc.0 = acc.0.min(lmin);
        acc.1 = acc.1.max(lmax);
        acc.2 = acc.2.max(sc);
        acc.3 = acc.3.min(sc);
    }
    Ok(acc)
}

fn stats(
    metric: &DeformedMetric,
    points: &[Vec<f64>],
    resolution: usize,
    plan: &DerivativePlan,
) -> std::result::Result<CellStats, String> {
    let (lmin, lmax, smax, smin) = sample_extremes(metric, points, plan)?;
    Ok(CellStats {
        samples: points.len(),
        resolution,
        lambda_max_global: lmax,
        lambda_min_global: lmin,
        scalar_max: smax,
        scalar_min: smin,
    })
}

pub fn sweep(
    net: &CoveringNet,
    seed: &CandidateSeed,
    d_list: &[f64],
    s_list: &[f64],
    grid: &SampleGrid,
    plan: &DerivativePlan,
) -> Result<SweepResult> {
    if d_list.is_empty() || s_list.is_empty() {
        return Err(Error::InvalidParameter("d and s lists must be nonempty".into()));
    }
    if let Some(d) = d_list.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter(format!("d must be positive, got {d}")));
    }
    if let Some(s) = s_list.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!("s must be nonnegative, got {s}")));
    }
    if grid.torus != net.torus {
        return Err(Error::InvalidParameter("sample grid and net live on different tori".into()));
    }
    if grid.resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be >= 2".into()));
    }
    plan.validate()?;
    let ga: TransplantedMetric = build_ga(net, seed)?;
    let (base_points, excluded) = grid.points(net);
    let fine_grid = grid.quadrupled();

    let params: Vec<(f64, f64)> = d_list
        .iter()
        .flat_map(|&d| s_list.iter().map(move |&s| (d, s)))
        .collect();
    let metrics: Vec<DeformedMetric> = params
        .iter()
        .map(|&(d, s)| DeformedMetric::from_base(ga.clone(), d, s))
        .collect::<Result<_>>()?;

    let mut cells: Vec<SweepCell> = params
        .par_iter()
        .zip(metrics.par_iter())
        .map(|(&(d, s), m)| match stats(m, &base_points, grid.resolution, plan) {
            Ok(b) => SweepCell {
                d,
                s,
                negative: b.lambda_max_global < 0.0,
                base: Some(b),
                refined: None,
                reclassified: false,
                error: None,
            },
            Err(e) => SweepCell {
                d,
                s,
                base: None,
                refined: None,
                negative: false,
                reclassified: false,
                error: Some(e),
            },
        })
        .collect();

    let mut log = Vec::new();
    for c in &cells {
        if let Some(e) = &c.error {
            log.push(format!("cell d={} s={} aborted: {e}", c.d, c.s));
        }
    }
    if excluded > 0 {
        log.push(format!("{excluded} samples within {ANCHOR_EXCLUSION} of an anchor excluded"));
    }

    if cells.iter().any(|c| c.negative) {
        let (fine_points, _) = fine_grid.points(net);
        for (c, m) in cells.iter_mut().zip(&metrics) {
            if !c.negative {
                continue;
            }
            match stats(m, &fine_points, fine_grid.resolution, plan) {
                Ok(r) => {
                    if !(r.lambda_max_global < 0.0) {
                        c.negative = false;
                        c.reclassified = true;
                        log.push(format!(
                            "cell d={} s={} reclassified: refined lambda_max {} >= 0",
                            c.d, c.s, r.lambda_max_global
                        ));
                    }
                    c.refined = Some(r);
                }
                Err(e) => {
                    c.negative = false;
                    c.reclassified = true;
                    log.push(format!("cell d={} s={} refinement aborted: {e}", c.d, c.s));
                    c.error = Some(e);
                }
            }
        }
    }

    let negative: Vec<&SweepCell> = cells.iter().filter(|c| c.negative).collect();
    let negative_region = negative.iter().map(|c| [c.d, c.s]).collect();
    let (a_obs, b_obs) = if negative.is_empty() {
        (None, None)
    } else {
        let combined: Vec<(f64, f64, f64)> = negative.iter().filter_map(|c| c.combined()).collect();
        let lmin = combined.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let lmax = combined.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
        (Some(-lmin), Some(-lmax))
    };
    let scalar_consistent = negative
        .iter()
        .filter_map(|c| c.combined())
        .all(|(_, _, smax)| smax < 0.0);
    let flat = cells.iter().all(|c| {
        c.base
            .as_ref()
            .is_some_and(|b| b.lambda_max_global == 0.0 && b.lambda_min_global == 0.0)
    });
    let status = if !negative.is_empty() {
        SweepStatus::Found
    } else if flat {
        SweepStatus::FlatBaseline
    } else {
        SweepStatus::NotFound
    };
    Ok(SweepResult {
        net: NetSummary::of(net),
        seed_metric: seed.params().clone(),
        d_values: d_list.to_vec(),
        s_values: s_list.to_vec(),
        grid: *grid,
        refinement_resolution: fine_grid.resolution,
        excluded_samples: excluded,
        cells,
        negative_region,
        a_obs,
        b_obs,
        scalar_consistent,
        status,
        interpretation: INTERPRETATION.into(),
        method: plan.label().into(),
        plan: *plan,
        log,
    })
}

/// JSON document plus a plain-text summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub json: String,
    pub summary: String,
}

pub fn report(result: &SweepResult) -> Result<SweepReport> {
    let json = serde_json::to_string_pretty(result)?;
    let mut s = String::new();
    let net = &result.net;
    s.push_str(&format!("status: {}\n", result.status.label()));
    s.push_str(&format!(
        "net: n={} L={} rho={} anchors={} multiplicity_observed={}\n",
        net.n, net.side, net.rho, net.anchors, net.multiplicity_observed
    ));
    s.push_str(&format!(
        "grid: {}^{} base samples ({} used, {} excluded), refinement {}^{}\n",
        result.grid.resolution,
        net.n,
        result.cells.first().and_then(|c| c.base.as_ref()).map_or(0, |b| b.samples),
        result.excluded_samples,
        result.refinement_resolution,
        net.n
    ));
    s.push_str(&format!(
        "cells: {} ({} d x {} s), negative: {}\n",
        result.cells.len(),
        result.d_values.len(),
        result.s_values.len(),
        result.negative_region.len()
    ));
    if !result.negative_region.is_empty() {
        let ds: Vec<f64> = result.negative_region.iter().map(|c| c[0]).collect();
        let ss: Vec<f64> = result.negative_region.iter().map(|c| c[1]).collect();
        let span = |v: &[f64]| {
            (
                v.iter().copied().fold(f64::INFINITY, f64::min),
                v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (dlo, dhi) = span(&ds);
        let (slo, shi) = span(&ss);
        s.push_str(&format!("negative region: d in [{dlo}, {dhi}], s in [{slo}, {shi}]\n"));
    }
    if let (Some(a), Some(b)) = (result.a_obs, result.b_obs) {
        s.push_str(&format!("a_obs = {a:e}, b_obs = {b:e}\n"));
        s.push_str(&format!("scalar curvature negative in negative cells: {}\n", result.scalar_consistent));
    }
    s.push_str(&format!("interpretation: {}\n", result.interpretation));
    s.push_str(&format!("method: {}\n", result.method));
    for line in &result.log {
        s.push_str(&format!("log: {line}\n"));
    }
    Ok(SweepReport { json, summary: s })
}

pub fn parse_report(json: &str) -> Result<SweepResult> {
    Ok(serde_json::from_str(json)?)
}

/// One row per `(d, s)` cell.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "d,s,lambda_max_global,lambda_min_global,scalar_max,samples,negative,reclassified,refined_lambda_max,interpretation,method\n",
    );
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for c in &result.cells {
        out.push_str(&format!(
            "{:e},{:e},{},{},{},{},{},{},{},{},{}\n",
            c.d,
            c.s,
            fmt(c.base.as_ref().map(|b| b.lambda_max_global)),
            fmt(c.base.as_ref().map(|b| b.lambda_min_global)),
            fmt(c.base.as_ref().map(|b| b.scalar_max)),
            c.base.as_ref().map_or(0, |b| b.samples),
            c.negative,
            c.reclassified,
            fmt(c.refined.as_ref().map(|r| r.lambda_max_global)),
            result.interpretation,
            result.method
        ));
    }
    out
}

/// Whether the negative regions found at several ϱ share a common `(d, s)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityProbe {
    pub rhos: Vec<f64>,
    /// Every tested ϱ produced a nonempty negative region.
    pub all_found: bool,
    pub intersection: Vec<[f64; 2]>,
    pub nonempty: bool,
}

pub fn uniformity_probe(results: &[SweepResult]) -> UniformityProbe {
    let rhos = results.iter().map(|r| r.net.rho).collect();
    let all_found = !results.is_empty() && results.iter().all(|r| !r.negative_region.is_empty());
    let intersection: Vec<[f64; 2]> = if all_found {
        results[0]
            .negative_region
            .iter()
            .filter(|c| {
                results[1..].iter().all(|r| {
                    r.negative_region
                        .iter()
                        .any(|o| o[0].to_bits() == c[0].to_bits() && o[1].to_bits() == c[1].to_bits())
                })
            })
            .copied()
            .collect()
    } else {
        Vec::new()
    };
    UniformityProbe {
        rhos,
        all_found,
        nonempty: !intersection.is_empty(),
        intersection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::FrameMode;
    use crate::deform::DeformationSpec;
    use crate::deform::build_deformed;
    use std::f64::consts::PI;

    fn small_net() -> CoveringNet {
        CoveringNet::lattice(&TorusSpec::new(3, 2.0 * PI).unwrap(), 0.1, 11, FrameMode::Identity).unwrap()
    }

    #[test]
    fn flat_baseline() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 5).unwrap();
        let r = sweep(&net, &CandidateSeed::euclidean(3), &[1.0, 2.0], &[0.0], &grid, &DerivativePlan::ForwardMode).unwrap();
        for c in &r.cells {
            let b = c.base.as_ref().unwrap();
            assert_eq!((b.lambda_max_global, b.lambda_min_global), (0.0, 0.0));
        }
        assert_eq!(r.status, SweepStatus::FlatBaseline);
        assert_eq!(r.a_obs, None);
    }

    #[test]
    fn single_cell_matches_direct_loop() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 6).unwrap();
        let plan = DerivativePlan::ForwardMode;
        let r = sweep(&net, &CandidateSeed::euclidean(3), &[1.5], &[0.2], &grid, &plan).unwrap();
        let m = build_deformed(&DeformationSpec::new(net.clone(), CandidateSeed::euclidean(3), 1.5, 0.2)).unwrap();
        let (pts, _) = grid.points(&net);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &pts {
            let rep = curvature_report(&m, p, &plan).unwrap();
            lo = lo.min(rep.lambda_min);
            hi = hi.max(rep.lambda_max);
        }
        let b = r.cells[0].base.as_ref().unwrap();
        assert_eq!(b.lambda_min_global, lo);
        assert_eq!(b.lambda_max_global, hi);
    }

    #[test]
    fn report_round_trip_and_csv() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 4).unwrap();
        let r = sweep(&net, &CandidateSeed::euclidean(3), &[1.0], &[0.0, 0.3], &grid, &DerivativePlan::ForwardMode).unwrap();
        let rep = report(&r).unwrap();
        assert_eq!(parse_report(&rep.json).unwrap(), r);
        assert!(rep.summary.contains("interpretation: pointwise-product"));
        assert!(rep.summary.contains("method: forward-mode"));
        assert_eq!(r.status, SweepStatus::NotFound);
        assert!(rep.summary.contains("status: not-found"));
        assert_eq!(to_csv(&r).lines().count(), 3);
    }

    #[test]
    fn refinement_points_avoid_anchors() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 3).unwrap().with_anchor_refinement(true);
        let (pts, _) = grid.points(&net);
        assert!(pts.len() > 27);
        for p in &pts {
            for a in &net.anchors {
                assert!(distance_sq_unchecked(net.torus.side, p, &a.position) >= ANCHOR_EXCLUSION.powi(2));
            }
        }
        let q = SampleGrid::new(net.torus, 20).unwrap().quadrupled();
        assert_eq!(q.resolution, 32);
    }

    #[test]
    fn invalid_inputs() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 3).unwrap();
        let seed = CandidateSeed::euclidean(3);
        let plan = DerivativePlan::ForwardMode;
        assert!(sweep(&net, &seed, &[0.0], &[0.1], &grid, &plan).is_err());
        assert!(sweep(&net, &seed, &[1.0], &[-0.1], &grid, &plan).is_err());
        assert!(sweep(&net, &seed, &[], &[0.1], &grid, &plan).is_err());
        assert!(SampleGrid::new(net.torus, 1).is_err());
    }

    #[test]
    fn probe_intersection() {
        let net = small_net();
        let grid = SampleGrid::new(net.torus, 3).unwrap();
        let mut a = sweep(&net, &CandidateSeed::euclidean(3), &[1.0], &[0.0], &grid, &DerivativePlan::ForwardMode).unwrap();
        let mut b = a.clone();
        assert!(!uniformity_probe(&[a.clone(), b.clone()]).all_found);
        a.negative_region = vec![[1.0, 0.1], [2.0, 0.1]];
        b.negative_region = vec![[2.0, 0.1]];
        let p = uniformity_probe(&[a, b]);
        assert!(p.all_found && p.nonempty);
        assert_eq!(p.intersection, vec![[2.0, 0.1]]);
    }
}
