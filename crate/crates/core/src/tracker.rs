//! Pole continuation along parameter paths, resonance trapping and
//! double-pole search.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::analytic::{self, TwoSiteDotParams};
use crate::error::invalid;
use crate::geometry::Geometry;
use crate::heff::{self, EffectiveHamiltonian, Mode};
use crate::linalg::{bilinear, norm2, CMat};
use crate::spectra::RectSpectrum2D;
use crate::Result;

/// Minimum-cost perfect matching for a square cost matrix (row `i` gets
/// column `result[i]`).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation, 1-based with a virtual column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

fn greedy(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut used = vec![false; n];
    let mut out = vec![0; n];
    for i in 0..n {
        let j = (0..n).filter(|&j| !used[j]).min_by(|&a, &b| cost[i][a].total_cmp(&cost[i][b])).unwrap_or(0);
        used[j] = true;
        out[i] = j;
    }
    out
}

/// One point of a continuation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPoint {
    /// Lead strengths at fixed energy.
    Coupling { v_l: f64, v_r: f64 },
    /// Energy at fixed strengths.
    Energy(f64),
}

impl PathPoint {
    fn lerp(self, other: PathPoint, t: f64) -> PathPoint {
        match (self, other) {
            (PathPoint::Coupling { v_l: a, v_r: b }, PathPoint::Coupling { v_l: c, v_r: d }) => {
                PathPoint::Coupling { v_l: a + (c - a) * t, v_r: b + (d - b) * t }
            }
            (PathPoint::Energy(a), PathPoint::Energy(b)) => PathPoint::Energy(a + (b - a) * t),
            _ => self,
        }
    }
}

/// A parameter path: coupling points evaluated at `energy`, or energy
/// points evaluated with the geometry's own strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPath {
    pub points: Vec<PathPoint>,
    pub energy: f64,
}

impl TrackPath {
    pub fn coupling(points: &[(f64, f64)], energy: f64) -> Self {
        TrackPath { points: points.iter().map(|&(v_l, v_r)| PathPoint::Coupling { v_l, v_r }).collect(), energy }
    }

    pub fn energies(points: &[f64]) -> Self {
        TrackPath { points: points.iter().map(|&e| PathPoint::Energy(e)).collect(), energy: 0.0 }
    }

    /// `count` evenly spaced points between two coupling pairs.
    pub fn coupling_line(from: (f64, f64), to: (f64, f64), count: usize, energy: f64) -> Self {
        let pts: Vec<(f64, f64)> = (0..count)
            .map(|i| {
                let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
                (from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t)
            })
            .collect();
        Self::coupling(&pts, energy)
    }

    pub fn energy_line(from: f64, to: f64, count: usize) -> Self {
        let pts: Vec<f64> = (0..count)
            .map(|i| from + (to - from) * if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 })
            .collect();
        Self::energies(&pts)
    }
}

/// Something noteworthy at a continuation step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepFlag {
    /// Greedy and optimal matching disagree; both are recorded.
    Ambiguous { step: usize, optimal: Vec<usize>, greedy: Vec<usize> },
    /// Continuity guard still fires after the maximum number of halvings.
    Jump { step: usize, branch: usize, ratio: f64 },
}

/// Poles followed along a path. `branches[b][s]` is branch `b` at step `s`.
#[derive(Debug, Clone)]
pub struct PoleTrajectory {
    pub params: Vec<PathPoint>,
    pub branches: Vec<Vec<Complex64>>,
    /// Permutation applied to the sorted pole list at each step.
    pub matching: Vec<Vec<usize>>,
    /// `trace(H_eff)` at each step.
    pub traces: Vec<Complex64>,
    pub flags: Vec<StepFlag>,
}

impl PoleTrajectory {
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn n_steps(&self) -> usize {
        self.params.len()
    }

    /// Poles at step `s`, in branch order.
    pub fn at(&self, s: usize) -> Vec<Complex64> {
        self.branches.iter().map(|b| b[s]).collect()
    }

    /// Largest `|sum z - trace|` over all steps.
    pub fn trace_defect(&self) -> f64 {
        (0..self.n_steps()).map(|s| (self.at(s).iter().sum::<Complex64>() - self.traces[s]).norm()).fold(0.0, f64::max)
    }

    /// Step whose coupling (`v_L` for coupling paths, `E` otherwise) is
    /// closest to `x`.
    pub fn step_nearest(&self, x: f64) -> usize {
        let key = |p: &PathPoint| match *p {
            PathPoint::Coupling { v_l, .. } => v_l,
            PathPoint::Energy(e) => e,
        };
        (0..self.n_steps())
            .min_by(|&a, &b| (key(&self.params[a]) - x).abs().total_cmp(&(key(&self.params[b]) - x).abs()))
            .unwrap_or(0)
    }
}

const GUARD_FACTOR: f64 = 10.0;
const MAX_HALVINGS: usize = 8;

fn poles_at(geometry: &Geometry, point: PathPoint, energy: f64, mode: Mode) -> Result<(Vec<Complex64>, Complex64)> {
    let (g, e) = match point {
        PathPoint::Coupling { v_l, v_r } => (geometry.with_strengths(v_l, v_r), energy),
        PathPoint::Energy(e) => (geometry.clone(), e),
    };
    let h = EffectiveHamiltonian::for_geometry(&g, e, mode)?;
    let ps = heff::eigensystem(&h)?;
    Ok((ps.poles, h.trace()))
}

fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

struct Matched {
    z: Vec<Complex64>,
    perm: Vec<usize>,
    greedy: Vec<usize>,
}

fn match_to(prev: &[Complex64], next: &[Complex64]) -> Matched {
    let cost: Vec<Vec<f64>> = prev.iter().map(|p| next.iter().map(|q| (p - q).norm()).collect()).collect();
    let perm = hungarian(&cost);
    let greedy = greedy(&cost);
    Matched { z: perm.iter().map(|&j| next[j]).collect(), perm, greedy }
}

/// Follows every pole of `geometry` along `path`, halving steps where a
/// branch jumps by more than ten times the median of its own history.
pub fn trace_poles(geometry: &Geometry, path: &TrackPath, mode: Mode) -> Result<PoleTrajectory> {
    if path.points.is_empty() {
        return Err(invalid("empty parameter path"));
    }
    let (z0, tr0) = poles_at(geometry, path.points[0], path.energy, mode)?;
    let n = z0.len();
    let mut traj = PoleTrajectory {
        params: vec![path.points[0]],
        branches: z0.iter().map(|&z| vec![z]).collect(),
        matching: vec![(0..n).collect()],
        traces: vec![tr0],
        flags: Vec::new(),
    };
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); n];

    for w in path.points.windows(2) {
        // Sub-steps from w[0] to w[1]; refined on demand.
        let mut pending: Vec<(f64, f64)> = vec![(0.0, 1.0)];
        while let Some((a, b)) = pending.pop() {
            let point = w[0].lerp(w[1], b);
            let (z, tr) = poles_at(geometry, point, path.energy, mode)?;
            let prev = traj.at(traj.n_steps() - 1);
            let m = match_to(&prev, &z);
            let depth = libm::round(libm::log2(1.0 / (b - a))) as usize;
            let mut worst: Option<(usize, f64)> = None;
            for br in 0..n {
                let d = (m.z[br] - prev[br]).norm();
                let hist = &history[br];
                if hist.len() >= 3 {
                    let med = median(hist);
                    let ratio = d / med.max(1e-12);
                    if d > 1e-9 && ratio > GUARD_FACTOR && worst.is_none_or(|(_, r)| ratio > r) {
                        worst = Some((br, ratio));
                    }
                }
            }
            if let Some((br, ratio)) = worst {
                if depth < MAX_HALVINGS {
                    let mid = 0.5 * (a + b);
                    pending.push((mid, b));
                    pending.push((a, mid));
                    continue;
                }
                traj.flags.push(StepFlag::Jump { step: traj.n_steps(), branch: br, ratio });
            }
            if m.perm != m.greedy {
                traj.flags.push(StepFlag::Ambiguous {
                    step: traj.n_steps(),
                    optimal: m.perm.clone(),
                    greedy: m.greedy.clone(),
                });
            }
            for br in 0..n {
                history[br].push((m.z[br] - prev[br]).norm());
                traj.branches[br].push(m.z[br]);
            }
            traj.params.push(point);
            traj.matching.push(m.perm);
            traj.traces.push(tr);
        }
    }
    Ok(traj)
}

/// Widths at the path end compared with a reference step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrappingReport {
    pub reference_step: usize,
    pub widths_reference: Vec<f64>,
    pub widths_end: Vec<f64>,
    /// Branches whose width grew relative to the reference.
    pub broad: Vec<usize>,
    /// Branches whose width shrank.
    pub trapped: Vec<usize>,
    /// Branches with `Re z` outside `[-2, 2]` at the end.
    pub outside_band: Vec<usize>,
}

pub fn trapping_report(traj: &PoleTrajectory, reference_step: usize) -> TrappingReport {
    let end = traj.n_steps() - 1;
    let widths = |s: usize| -> Vec<f64> { traj.branches.iter().map(|b| -2.0 * b[s].im).collect() };
    let widths_reference = widths(reference_step);
    let widths_end = widths(end);
    let broad = (0..traj.n_branches()).filter(|&b| widths_end[b] > widths_reference[b]).collect();
    let trapped = (0..traj.n_branches()).filter(|&b| widths_end[b] < widths_reference[b]).collect();
    let outside_band = (0..traj.n_branches()).filter(|&b| traj.branches[b][end].re.abs() > 2.0).collect();
    TrappingReport { reference_step, widths_reference, widths_end, broad, trapped, outside_band }
}

/// Whether the real parts of branches `a` and `b` change order along the
/// trajectory.
pub fn real_parts_swap(traj: &PoleTrajectory, a: usize, b: usize) -> bool {
    let first = traj.branches[a][0].re - traj.branches[b][0].re;
    let last = traj.branches[a][traj.n_steps() - 1].re - traj.branches[b][traj.n_steps() - 1].re;
    first * last < 0.0
}

/// Search parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Energy,
    VLeft,
    VRight,
    /// Both strengths together (the slab's single `v`).
    V,
}

/// Two-parameter search box; parameters not on an axis come from the
/// geometry and `energy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub x: (Axis, f64, f64),
    pub y: (Axis, f64, f64),
    pub energy: f64,
}

/// Evidence for a coalescence of two poles.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePoleCertificate {
    /// `(x, y)` in the search box axes.
    pub params: (f64, f64),
    pub energy: f64,
    pub strengths: (f64, f64),
    pub pole: Complex64,
    pub gap: f64,
    /// `|v^T v|` of the unit-norm eigenvector, the larger of the pair.
    pub self_overlap: f64,
    /// Distance from the closed-form condition, when one is known.
    pub analytic_residual: Option<f64>,
}

impl DoublePoleCertificate {
    pub fn is_certified(&self) -> bool {
        self.gap < 1e-6 && self.self_overlap < 1e-4
    }
}

struct Problem<'a> {
    geometry: &'a Geometry,
    bx: SearchBox,
}

impl Problem<'_> {
    fn setting(&self, x: f64, y: f64) -> (Geometry, f64) {
        let mut e = self.bx.energy;
        let (mut vl, mut vr) = self.geometry.strengths();
        for (axis, val) in [(self.bx.x.0, x), (self.bx.y.0, y)] {
            match axis {
                Axis::Energy => e = val,
                Axis::VLeft => vl = val,
                Axis::VRight => vr = val,
                Axis::V => {
                    vl = val;
                    vr = val;
                }
            }
        }
        (self.geometry.with_strengths(vl, vr), e)
    }

    fn matrix(&self, x: f64, y: f64) -> Result<CMat> {
        let (g, e) = self.setting(x, y);
        Ok(EffectiveHamiltonian::for_geometry(&g, e, Mode::AllChannels)?.matrix().clone())
    }

    fn closest_pair(&self, x: f64, y: f64) -> Result<(f64, usize, usize, Vec<Complex64>)> {
        let ps = heff::pole_set(&self.matrix(x, y)?)?;
        let z = ps.poles;
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                let d = (z[i] - z[j]).norm();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        Ok((best.0, best.1, best.2, z))
    }

    fn gap(&self, x: f64, y: f64) -> f64 {
        self.closest_pair(x, y).map(|g| g.0).unwrap_or(f64::INFINITY)
    }

    /// `(z_i - z_j)^2` of the closest pair; smooth through the coalescence.
    fn discriminant(&self, x: f64, y: f64) -> Option<Complex64> {
        let (_, i, j, z) = self.closest_pair(x, y).ok()?;
        let d = z[i] - z[j];
        Some(d * d)
    }

    fn analytic_residual(&self, x: f64, y: f64) -> Option<f64> {
        let (g, e) = self.setting(x, y);
        match g {
            Geometry::Dot2 { case, v_l, v_r } => Some(TwoSiteDotParams::new(v_l, v_r, case).double_pole_residual(e)),
            Geometry::Slab3d { nx, ny, nz: 2, v, .. } => {
                let cross = RectSpectrum2D::new(nx, ny).ok()?;
                cross
                    .states()
                    .iter()
                    .map(|s| analytic::slab_double_pole_residual(s.energy, v, e))
                    .min_by(f64::total_cmp)
            }
            _ => None,
        }
    }
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid points in each direction of the coarse scan.
const COARSE: usize = 21;

/// Searches `bx` for coalescing poles of `geometry`: coarse grid on the
/// smallest pole gap, alternating golden-section refinement of `gap^2`,
/// then Newton on the discriminant `(z_i - z_j)^2`. Returns every
/// certified coalescence (possibly none).
pub fn find_double_pole(geometry: &Geometry, bx: SearchBox) -> Result<Vec<DoublePoleCertificate>> {
    let pb = Problem { geometry, bx };
    let (x0, x1) = (bx.x.1, bx.x.2);
    let (y0, y1) = (bx.y.1, bx.y.2);
    if !(x1 > x0 && y1 > y0) {
        return Err(invalid("search box must have positive extent"));
    }
    let xs: Vec<f64> = (0..COARSE).map(|i| x0 + (x1 - x0) * i as f64 / (COARSE - 1) as f64).collect();
    let ys: Vec<f64> = (0..COARSE).map(|i| y0 + (y1 - y0) * i as f64 / (COARSE - 1) as f64).collect();
    let mut grid = vec![0.0; COARSE * COARSE];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            grid[i * COARSE + j] = pb.gap(x, y);
        }
    }
    // Local minima of the coarse gap, best first.
    let mut seeds = Vec::new();
    for i in 0..COARSE {
        for j in 0..COARSE {
            let here = grid[i * COARSE + j];
            let mut is_min = here.is_finite();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) != (0, 0)
                        && a >= 0
                        && b >= 0
                        && a < COARSE as i64
                        && b < COARSE as i64
                        && grid[a as usize * COARSE + b as usize] < here
                    {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push((here, i, j));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(4);

    let (hx, hy) = ((x1 - x0) / (COARSE - 1) as f64, (y1 - y0) / (COARSE - 1) as f64);
    let mut out: Vec<DoublePoleCertificate> = Vec::new();
    for (_, i, j) in seeds {
        let (mut x, mut y) = (xs[i], ys[j]);
        let (mut wx, mut wy) = (hx, hy);
        for _ in 0..6 {
            let yy = y;
            x = golden(
                &|t| {
                    let g = pb.gap(t, yy);
                    g * g
                },
                (x - wx).max(x0),
                (x + wx).min(x1),
                40,
            );
            let xx = x;
            y = golden(
                &|t| {
                    let g = pb.gap(xx, t);
                    g * g
                },
                (y - wy).max(y0),
                (y + wy).min(y1),
                40,
            );
            wx *= 0.5;
            wy *= 0.5;
        }
        // Newton on the two real equations Re D = Im D = 0.
        for _ in 0..40 {
            let Some(d) = pb.discriminant(x, y) else { break };
            if d.norm() < 1e-28 {
                break;
            }
            let (sx, sy) = (1e-7 * (1.0 + x.abs()), 1e-7 * (1.0 + y.abs()));
            let (Some(dxp), Some(dxm), Some(dyp), Some(dym)) = (
                pb.discriminant(x + sx, y),
                pb.discriminant(x - sx, y),
                pb.discriminant(x, y + sy),
                pb.discriminant(x, y - sy),
            ) else {
                break;
            };
            let ddx = (dxp - dxm) / (2.0 * sx);
            let ddy = (dyp - dym) / (2.0 * sy);
            let det = ddx.re * ddy.im - ddy.re * ddx.im;
            if det.abs() < 1e-300 {
                break;
            }
            let stepx = (d.re * ddy.im - ddy.re * d.im) / det;
            let stepy = (ddx.re * d.im - d.re * ddx.im) / det;
            let (nx, ny) = (x - stepx, y - stepy);
            if !(nx.is_finite() && ny.is_finite()) {
                break;
            }
            let better = pb.discriminant(nx, ny).map(|v| v.norm() < d.norm()).unwrap_or(false);
            if !better {
                break;
            }
            x = nx;
            y = ny;
            if stepx.abs() < 1e-15 * (1.0 + x.abs()) && stepy.abs() < 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        let (gap, a, b, _) = pb.closest_pair(x, y)?;
        let m = pb.matrix(x, y)?;
        let eig = crate::linalg::eigen(&m)?;
        let ps = heff::pole_set(&m)?;
        // Self-overlap from the raw unit-norm eigenvectors of the pair.
        let overlap = |z: Complex64| -> f64 {
            let idx = (0..eig.values.len())
                .min_by(|&p, &q| (eig.values[p] - z).norm().total_cmp(&(eig.values[q] - z).norm()))
                .unwrap_or(0);
            let v = eig.vectors.column(idx);
            let nv = norm2(&v);
            bilinear(&v, &v).norm() / (nv * nv)
        };
        let self_overlap = overlap(ps.poles[a]).max(overlap(ps.poles[b]));
        let (g, e) = pb.setting(x, y);
        let cert = DoublePoleCertificate {
            params: (x, y),
            energy: e,
            strengths: g.strengths(),
            pole: (ps.poles[a] + ps.poles[b]) * 0.5,
            gap,
            self_overlap,
            analytic_residual: pb.analytic_residual(x, y),
        };
        if cert.is_certified() && !out.iter().any(|c| (c.pole - cert.pole).norm() < 1e-6) {
            out.push(cert);
        }
    }
    Ok(out)
}
