//! Separated covering nets `A_ϱ` on the flat torus.
//!
//! A net is valid when
//! (i) distinct anchors are more than `5ϱ` apart,
//! (ii) the closed `5ϱ`-balls around the anchors cover the torus, and
//! (iii) no point lies in more than `c` of the open `10ϱ`-balls.
//! Nets are built greedily on a grid and certified a posteriori on a
//! (possibly different) verification grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas::{axis_distance_sq, distance_sq_unchecked, make_frames, Anchor, FrameMode, TorusSpec};
use crate::autodiff::MAX_DIM;
use crate::error::{Error, Result};

/// Separation radius of condition (i), in units of ϱ.
pub const SEPARATION: f64 = 5.0;
/// Multiplicity radius of condition (iii), in units of ϱ.
pub const MULTIPLICITY_RADIUS: f64 = 10.0;

/// Upper bound on grid points visited by greedy construction and verification.
const GRID_BUDGET: usize = 1 << 24;
/// Finest build grid, in grid points per ϱ.
const BUILD_POINTS_PER_RHO: f64 = 20.0;
/// Finest verification grid, in grid points per ϱ.
const VERIFY_POINTS_PER_RHO: f64 = 10.0;
const MAX_BUCKETS: usize = 1 << 22;
/// Uncovered grid points examined when locating the worst coverage gap.
const GAP_EXAMINED: usize = 1 << 16;

/// Uniform bucket grid over the torus for radius queries.
#[derive(Clone, Debug)]
pub struct AnchorIndex {
    n: usize,
    side: f64,
    per_axis: usize,
    buckets: Vec<Vec<u32>>,
    offsets: Vec<Vec<isize>>,
}

impl AnchorIndex {
    /// Index whose neighbour query returns every anchor within `radius`.
    pub fn new(spec: &TorusSpec, radius: f64) -> Self {
        let n = spec.n;
        let mut per_axis = (spec.side / radius).floor().max(1.0) as usize;
        while per_axis > 1 && per_axis.saturating_pow(n as u32) > MAX_BUCKETS {
            per_axis -= 1;
        }
        // with fewer than 3 buckets per axis the ±1 stencil would revisit cells
        if per_axis < 3 {
            per_axis = 1;
        }
        let total = per_axis.pow(n as u32);
        let offsets = if per_axis == 1 {
            vec![vec![0; n]]
        } else {
            let mut all = vec![Vec::with_capacity(n)];
            for _ in 0..n {
                all = all
                    .into_iter()
                    .flat_map(|prefix: Vec<isize>| {
                        (-1..=1).map(move |o| {
                            let mut p = prefix.clone();
                            p.push(o);
                            p
                        })
                    })
                    .collect();
            }
            all
        };
        Self {
            n,
            side: spec.side,
            per_axis,
            buckets: vec![Vec::new(); total],
            offsets,
        }
    }

    pub fn build(spec: &TorusSpec, radius: f64, anchors: &[Anchor]) -> Self {
        let mut index = Self::new(spec, radius);
        for (i, a) in anchors.iter().enumerate() {
            index.insert(i as u32, &a.position);
        }
        index
    }

    fn cell_of(&self, p: &[f64]) -> [isize; MAX_DIM] {
        let mut cell = [0isize; MAX_DIM];
        for (c, &x) in cell.iter_mut().zip(p) {
            let r = x.rem_euclid(self.side);
            *c = ((r / self.side * self.per_axis as f64) as isize).min(self.per_axis as isize - 1);
        }
        cell
    }

    fn flat(&self, cell: &[isize]) -> usize {
        let m = self.per_axis as isize;
        cell.iter()
            .fold(0usize, |acc, &c| acc * self.per_axis + c.rem_euclid(m) as usize)
    }

    pub fn insert(&mut self, id: u32, position: &[f64]) {
        let cell = self.cell_of(position);
        let flat = self.flat(&cell[..self.n]);
        self.buckets[flat].push(id);
    }

    /// Calls `f` with every indexed id that may lie within the index radius of `p`.
    pub fn for_each_candidate(&self, p: &[f64], mut f: impl FnMut(u32)) {
        if self.per_axis == 1 {
            self.buckets[0].iter().for_each(|&id| f(id));
            return;
        }
        let base = self.cell_of(p);
        let mut cell = [0isize; MAX_DIM];
        for off in &self.offsets {
            for i in 0..self.n {
                cell[i] = base[i] + off[i];
            }
            for &id in &self.buckets[self.flat(&cell[..self.n])] {
                f(id);
            }
        }
    }
}

/// Calls `f(index, d²)` for every point of the `m^n` grid with spacing
/// `side/m` within squared distance `radius_sq` of `center`; `slab` pins the
/// first axis to one grid index. Distances agree bit-for-bit with
/// `distance_sq_unchecked(side, grid_point, center)`.
fn for_each_grid_point_within(
    side: f64,
    m: usize,
    center: &[f64],
    radius_sq: f64,
    slab: Option<usize>,
    mut f: impl FnMut(usize, f64),
) {
    let n = center.len();
    let spacing = side / m as f64;
    let reach = radius_sq.sqrt() / spacing;
    let lists: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|axis| {
            let c = center[axis];
            let term = |j: usize| (j, axis_distance_sq(side, j as f64 * spacing, c));
            let keep = |&(_, t): &(usize, f64)| t <= radius_sq;
            match (axis, slab) {
                (0, Some(j)) => vec![term(j)].into_iter().filter(keep).collect(),
                _ if 2.0 * reach + 3.0 >= m as f64 => (0..m).map(term).filter(keep).collect(),
                _ => {
                    let mid = c / spacing;
                    let lo = (mid - reach).floor() as i64 - 1;
                    let hi = (mid + reach).ceil() as i64 + 1;
                    (lo..=hi)
                        .map(|j| term(j.rem_euclid(m as i64) as usize))
                        .filter(keep)
                        .collect()
                }
            }
        })
        .collect();

    fn rec(
        lists: &[Vec<(usize, f64)>],
        m: usize,
        idx: usize,
        acc: f64,
        radius_sq: f64,
        f: &mut dyn FnMut(usize, f64),
    ) {
        let Some((head, rest)) = lists.split_first() else {
            f(idx, acc);
            return;
        };
        for &(j, t) in head {
            let a = acc + t;
            if a <= radius_sq {
                rec(rest, m, idx * m + j, a, radius_sq, f);
            }
        }
    }
    rec(&lists, m, 0, 0.0, radius_sq, &mut f);
}

/// Which of the three net conditions passed verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConditions {
    pub separation: bool,
    pub coverage: bool,
    pub multiplicity: bool,
}

impl NetConditions {
    pub fn all(&self) -> bool {
        self.separation && self.coverage && self.multiplicity
    }
}

/// Offending witness found during verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "condition")]
pub enum NetDiagnostic {
    Separation { first: usize, second: usize, distance: f64 },
    Coverage { point: Vec<f64>, nearest: f64, radius: f64 },
    Multiplicity { point: Vec<f64>, count: usize, bound: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringNet {
    #[serde(flatten)]
    pub torus: TorusSpec,
    pub rho: f64,
    pub seed: u64,
    pub anchors: Vec<Anchor>,
    pub multiplicity_observed: usize,
    /// `None` until [`verify_net`] has run.
    pub conditions: Option<NetConditions>,
    pub frame_mode: FrameMode,
    /// Per-axis resolution of the greedy build grid (`None` for nets not built greedily).
    pub build_resolution: Option<usize>,
    /// Grid resolution used by the last verification.
    pub verify_resolution: Option<usize>,
    #[serde(default)]
    pub diagnostics: Vec<NetDiagnostic>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetOptions {
    pub frames: FrameMode,
    /// Per-axis build grid; defaults to ϱ/20 spacing capped by the grid budget.
    pub build_resolution: Option<usize>,
}

impl Default for NetOptions {
    fn default() -> Self {
        Self {
            frames: FrameMode::Identity,
            build_resolution: None,
        }
    }
}

fn budget_resolution(spec: &TorusSpec, rho: f64, points_per_rho: f64) -> usize {
    let wanted = (spec.side * points_per_rho / rho).ceil() as usize;
    let cap = (GRID_BUDGET as f64).powf(1.0 / spec.n as f64).floor() as usize;
    let minimum = (spec.side / rho).ceil() as usize;
    wanted.min(cap).max(minimum).max(2)
}

/// Default per-axis verification resolution: ϱ/10 spacing when affordable,
/// never coarser than `ceil(L/ϱ)`.
pub fn default_verify_resolution(spec: &TorusSpec, rho: f64) -> usize {
    budget_resolution(spec, rho, VERIFY_POINTS_PER_RHO)
}

fn grid_point(index: usize, n: usize, m: usize, spacing: f64, out: &mut [f64]) {
    let mut rem = index;
    for axis in (0..n).rev() {
        out[axis] = (rem % m) as f64 * spacing;
        rem /= m;
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")))
    }
}

pub fn build_net(spec: &TorusSpec, rho: f64, seed: u64) -> Result<CoveringNet> {
    build_net_with(spec, rho, seed, &NetOptions::default())
}

/// Greedy maximal `5ϱ`-separated subset of a grid, visited in a seeded
/// random order.
pub fn build_net_with(spec: &TorusSpec, rho: f64, seed: u64, opts: &NetOptions) -> Result<CoveringNet> {
    check_rho(rho)?;
    let spec = TorusSpec::new(spec.n, spec.side)?;
    let n = spec.n;
    let m = opts
        .build_resolution
        .unwrap_or_else(|| budget_resolution(&spec, rho, BUILD_POINTS_PER_RHO));
    let total = m
        .checked_pow(n as u32)
        .filter(|&t| t <= u32::MAX as usize)
        .ok_or_else(|| Error::InvalidParameter(format!("build grid {m}^{n} too large")))?;
    let spacing = spec.side / m as f64;

    let mut order: Vec<u32> = (0..total as u32).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    // a grid point is blocked once it lies within 5ϱ of an accepted anchor
    let sep = SEPARATION * rho;
    let sep_sq = sep * sep;
    let mut blocked = vec![false; total];
    let mut positions: Vec<Vec<f64>> = Vec::new();
    let mut p = vec![0.0; n];
    for &id in &order {
        if blocked[id as usize] {
            continue;
        }
        grid_point(id as usize, n, m, spacing, &mut p);
        for_each_grid_point_within(spec.side, m, &p, sep_sq, None, |q, _| blocked[q] = true);
        positions.push(p.clone());
    }

    let frames = make_frames(n, positions.len(), opts.frames);
    let anchors = positions
        .into_iter()
        .zip(frames)
        .map(|(position, frame)| Anchor { position, frame })
        .collect();
    Ok(CoveringNet {
        torus: spec,
        rho,
        seed,
        anchors,
        multiplicity_observed: 0,
        conditions: None,
        frame_mode: opts.frames,
        build_resolution: Some(m),
        verify_resolution: None,
        diagnostics: Vec::new(),
    })
}

impl CoveringNet {
    /// Regular lattice net with `per_axis` anchors per circle factor.
    pub fn lattice(spec: &TorusSpec, rho: f64, per_axis: usize, frames: FrameMode) -> Result<Self> {
        check_rho(rho)?;
        if per_axis == 0 {
            return Err(Error::InvalidParameter("lattice needs at least one anchor per axis".into()));
        }
        let n = spec.n;
        let total = per_axis.pow(n as u32);
        let spacing = spec.side / per_axis as f64;
        let frame_list = make_frames(n, total, frames);
        let anchors = (0..total)
            .zip(frame_list)
            .map(|(i, frame)| {
                let mut p = vec![0.0; n];
                grid_point(i, n, per_axis, spacing, &mut p);
                Anchor { position: p, frame }
            })
            .collect();
        Ok(Self {
            torus: *spec,
            rho,
            seed: 0,
            anchors,
            multiplicity_observed: 0,
            conditions: None,
            frame_mode: frames,
            build_resolution: None,
            verify_resolution: None,
            diagnostics: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.torus.n
    }

    /// Every anchor shifted by `shift` (positions reduced into `[0, L)`).
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.torus.n {
            return Err(Error::DimensionMismatch {
                expected: self.torus.n,
                got: shift.len(),
            });
        }
        let mut out = self.clone();
        for a in &mut out.anchors {
            let moved: Vec<f64> = a.position.iter().zip(shift).map(|(p, s)| p + s).collect();
            a.position = self.torus.reduce(&moved);
        }
        out.conditions = None;
        out.diagnostics.clear();
        Ok(out)
    }

    /// Half-diagonal of the build grid cell: the coverage slack granted to
    /// verification grid points that are not build grid points.
    pub fn coverage_slack(&self) -> f64 {
        match self.build_resolution {
            Some(m) => 0.5 * (self.torus.side / m as f64) * (self.torus.n as f64).sqrt(),
            None => 0.0,
        }
    }

    /// Volumetric bound on condition (iii): disjoint `2.5ϱ`-balls inside a
    /// `12.5ϱ`-ball give at most `5^n` anchors in any open `10ϱ`-ball.
    pub fn packing_bound(&self) -> usize {
        5usize.pow(self.torus.n as u32)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)?;
        TorusSpec::new(net.torus.n, net.torus.side)?;
        check_rho(net.rho)?;
        for a in &net.anchors {
            Anchor::new(a.position.clone(), a.frame.clone())?;
            if a.dimension() != net.torus.n {
                return Err(Error::DimensionMismatch {
                    expected: net.torus.n,
                    got: a.dimension(),
                });
            }
        }
        Ok(net)
    }

    /// Errors with the first diagnostic unless every condition verified.
    pub fn require_valid(&self) -> Result<()> {
        match self.conditions {
            Some(c) if c.all() => Ok(()),
            Some(_) => Err(Error::NetViolation(format!("{:?}", self.diagnostics.first()))),
            None => Err(Error::NetViolation("net has not been verified".into())),
        }
    }

    /// Closest anchor pair, if any pair violates separation (i).
    pub fn separation_violation(&self) -> Option<NetDiagnostic> {
        let sep = SEPARATION * self.rho;
        let index = AnchorIndex::build(&self.torus, sep, &self.anchors);
        let mut worst: Option<(usize, usize, f64)> = None;
        for (i, a) in self.anchors.iter().enumerate() {
            index.for_each_candidate(&a.position, |j| {
                let j = j as usize;
                if j <= i {
                    return;
                }
                let d = distance_sq_unchecked(self.torus.side, &a.position, &self.anchors[j].position).sqrt();
                if d <= sep && worst.map_or(true, |(_, _, w)| d < w) {
                    worst = Some((i, j, d));
                }
            });
        }
        worst.map(|(first, second, distance)| NetDiagnostic::Separation {
            first,
            second,
            distance,
        })
    }
}

/// Verifies (i)–(iii) on a `grid_resolution^n` grid, with the coverage radius
/// widened by [`CoveringNet::coverage_slack`].
pub fn verify_net(net: &CoveringNet, grid_resolution: usize) -> CoveringNet {
    verify_net_with_slack(net, grid_resolution, net.coverage_slack())
}

pub fn verify_net_with_slack(net: &CoveringNet, grid_resolution: usize, slack: f64) -> CoveringNet {
    let spec = net.torus;
    let n = spec.n;
    let m = grid_resolution.max(1);
    let spacing = spec.side / m as f64;
    let total = m.pow(n as u32);
    let cover = SEPARATION * net.rho + slack;
    let cover_sq = cover * cover;
    let mult_r = MULTIPLICITY_RADIUS * net.rho;
    let mult_sq = mult_r * mult_r;
    let reach_sq = mult_sq.max(cover_sq);
    let slab_len = m.pow(n as u32 - 1);

    // per grid point: anchors within 10ϱ, and whether some anchor covers it
    let mut counts = vec![0u32; total];
    let mut covered = vec![false; total];
    counts
        .par_chunks_mut(slab_len)
        .zip(covered.par_chunks_mut(slab_len))
        .enumerate()
        .for_each(|(i0, (cnt, cov))| {
            let x0 = i0 as f64 * spacing;
            let offset = i0 * slab_len;
            for a in &net.anchors {
                if axis_distance_sq(spec.side, x0, a.position[0]) > reach_sq {
                    continue;
                }
                for_each_grid_point_within(spec.side, m, &a.position, reach_sq, Some(i0), |q, d2| {
                    if d2 < mult_sq {
                        cnt[q - offset] += 1;
                    }
                    if d2 <= cover_sq {
                        cov[q - offset] = true;
                    }
                });
            }
        });

    let worst_gap = covered
        .iter()
        .enumerate()
        .filter(|(_, c)| !**c)
        .map(|(i, _)| i)
        .take(GAP_EXAMINED)
        .map(|i| {
            let mut p = vec![0.0; n];
            grid_point(i, n, m, spacing, &mut p);
            let nearest = net
                .anchors
                .iter()
                .map(|a| distance_sq_unchecked(spec.side, &p, &a.position))
                .fold(f64::INFINITY, f64::min);
            (i, nearest)
        })
        .fold(None, |acc: Option<(usize, f64)>, (i, d2)| match acc {
            Some((_, w)) if w >= d2 => acc,
            _ => Some((i, d2)),
        });
    let (max_at, max_count) = counts
        .iter()
        .enumerate()
        .fold((0usize, 0u32), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
    struct Scan {
        worst_gap: Option<(usize, f64)>,
        max_count: usize,
        max_at: usize,
    }
    let scan = Scan {
        worst_gap,
        max_count: max_count as usize,
        max_at,
    };

    let mut out = net.clone();
    out.diagnostics.clear();
    let separation = net.separation_violation();
    let point_of = |i: usize| {
        let mut p = vec![0.0; n];
        grid_point(i, n, m, spacing, &mut p);
        p
    };
    if let Some(d) = separation.clone() {
        out.diagnostics.push(d);
    }
    if let Some((i, d2)) = scan.worst_gap {
        out.diagnostics.push(NetDiagnostic::Coverage {
            point: point_of(i),
            nearest: d2.sqrt(),
            radius: cover,
        });
    }
    let bound = net.packing_bound();
    if scan.max_count > bound {
        out.diagnostics.push(NetDiagnostic::Multiplicity {
            point: point_of(scan.max_at),
            count: scan.max_count,
            bound,
        });
    }
    out.multiplicity_observed = scan.max_count;
    out.verify_resolution = Some(m);
    out.conditions = Some(NetConditions {
        separation: separation.is_none(),
        coverage: scan.worst_gap.is_none(),
        multiplicity: scan.max_count <= bound,
    });
    out
}
