//! Direct lattice wave matching, independent of the effective-Hamiltonian
//! path. Only the closed-form spectra are shared.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::coupling::SlabCase;
use crate::error::invalid;
use crate::geometry::{DotCase, Geometry};
use crate::linalg::{CMat, Lu};
use crate::spectra::{self, RectSpectrum2D};
use crate::{Error, Result};

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Chain solution in the incident-wave frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSolution1D {
    pub r: Complex64,
    pub t: Complex64,
    /// Box amplitudes `psi_j = a e^{ikj} + b e^{-ikj}`.
    pub a: Complex64,
    pub b: Complex64,
    /// Largest violation of the lattice Schroedinger equation on sites
    /// `-2 ..= N + 3`.
    pub residual: f64,
}

/// Solves the four matching equations of an `n`-site chain at `E = -2 cos k`.
pub fn solve_chain_1d(n: usize, v_l: f64, v_r: f64, k: f64) -> Result<ScatteringSolution1D> {
    if n == 0 {
        return Err(invalid("chain needs at least one site"));
    }
    let s = libm::sin(k);
    if !(k > 0.0 && k < core::f64::consts::PI) || s < 1e-14 {
        return Err(Error::BandEdge { sin_k: s });
    }
    let e = Complex64::new(-2.0 * libm::cos(k), 0.0);
    let nf = n as f64;
    let (p1, m1) = (cis(k), cis(-k));
    let (pn, mn) = (cis(k * nf), cis(-k * nf));
    let pn1 = cis(k * (nf + 1.0));
    let z = Complex64::new(0.0, 0.0);
    let vl = Complex64::new(v_l, 0.0);
    let vr = Complex64::new(v_r, 0.0);
    // Unknowns (r, a, b, t).
    #[rustfmt::skip]
    let m = CMat::from_row_slice(4, 4, &[
        p1 + e, vl * p1, vl * m1, z,
        vl, p1 * (p1 + e), m1 * (m1 + e), z,
        z, pn * (m1 + e), mn * (p1 + e), vr * pn1,
        z, vr * pn, vr * mn, pn1 * (p1 + e),
    ]);
    let rhs = [p1, -vl, z, z];
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::SingularSystem { pivot_ratio: lu.pivot_ratio() });
    }
    let x = lu.solve_vec(&rhs)?;
    let (r, a, b, t) = (x[0], x[1], x[2], x[3]);

    let psi = |j: i64| -> Complex64 {
        let jf = j as f64;
        if j <= 0 {
            cis(k * jf) + r * cis(-k * jf)
        } else if j as usize <= n {
            a * cis(k * jf) + b * cis(-k * jf)
        } else {
            t * cis(k * jf)
        }
    };
    let hop = |j: i64| -> f64 {
        // Bond between j and j + 1.
        if j == 0 {
            v_l
        } else if j == n as i64 {
            v_r
        } else {
            1.0
        }
    };
    let mut residual: f64 = 0.0;
    for j in -2..=(n as i64 + 3) {
        let lhs = e * psi(j) + psi(j - 1) * hop(j - 1) + psi(j + 1) * hop(j);
        residual = residual.max(lhs.norm());
    }
    Ok(ScatteringSolution1D { r, t, a, b, residual })
}

/// A lead as seen by the lattice: attachment sites and transverse modes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleLead {
    pub lead_id: usize,
    /// Billiard site adjacent to each cross-section site of the lead.
    pub sites: Vec<usize>,
    /// `(p, threshold, phi)` with `phi` over the cross-section.
    pub modes: Vec<(usize, f64, Vec<f64>)>,
    pub v: f64,
}

/// Billiard box plus its leads.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub dims: (usize, usize, usize),
    pub leads: Vec<OracleLead>,
}

fn site(dims: (usize, usize, usize), i: usize, j: usize, l: usize) -> usize {
    ((i - 1) * dims.1 + (j - 1)) * dims.2 + (l - 1)
}

fn point_lead(lead_id: usize, s: usize, v: f64) -> OracleLead {
    OracleLead { lead_id, sites: vec![s], modes: vec![(1, 0.0, vec![1.0])], v }
}

impl Lattice {
    pub fn from_geometry(g: &Geometry) -> Result<Self> {
        let dims = g.dims();
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(invalid("billiard dimensions must be at least one site"));
        }
        let leads = match *g {
            Geometry::Chain1d { sites, v_l, v_r } => vec![point_lead(0, 0, v_l), point_lead(1, sites - 1, v_r)],
            Geometry::Dot2 { case, v_l, v_r } => {
                let right = if case == DotCase::A { 1 } else { 0 };
                vec![point_lead(0, 0, v_l), point_lead(1, right, v_r)]
            }
            Geometry::Rect2d { nx, ny, left, right } => {
                let mut leads = Vec::new();
                for (id, spec) in [left, right].iter().enumerate() {
                    spec.validate(ny)?;
                    let i = if id == 0 { 1 } else { nx };
                    let modes = spectra::transverse_modes(spec.width())?
                        .into_iter()
                        .map(|m| (m.p, m.threshold, m.phi))
                        .collect();
                    leads.push(OracleLead {
                        lead_id: id,
                        sites: spec.rows().map(|j| site(dims, i, j, 1)).collect(),
                        modes,
                        v: spec.v,
                    });
                }
                leads
            }
            Geometry::PointContact { nx, ny, site_l, site_r, v_l, v_r } => {
                for &(i, j) in &[site_l, site_r] {
                    if !(1..=nx).contains(&i) || !(1..=ny).contains(&j) {
                        return Err(invalid("contact point outside the billiard"));
                    }
                }
                vec![
                    point_lead(0, site(dims, site_l.0, site_l.1, 1), v_l),
                    point_lead(1, site(dims, site_r.0, site_r.1, 1), v_r),
                ]
            }
            Geometry::Slab3d { nx, ny, nz, case, v } => match case {
                SlabCase::PerpendicularLeads => {
                    (0..nx * ny).map(|s| point_lead(s, site(dims, s / ny + 1, s % ny + 1, 1), v)).collect()
                }
                SlabCase::FaceLead => {
                    let cross = RectSpectrum2D::new(nx, ny)?;
                    let modes = cross
                        .states()
                        .iter()
                        .enumerate()
                        .map(|(b, st)| {
                            (b + 1, st.energy, (0..nx * ny).map(|s| cross.psi(b, s / ny + 1, s % ny + 1)).collect())
                        })
                        .collect();
                    vec![OracleLead {
                        lead_id: 0,
                        sites: (0..nx * ny).map(|s| site(dims, s / ny + 1, s % ny + 1, nz)).collect(),
                        modes,
                        v,
                    }]
                }
            },
        };
        Ok(Lattice { dims, leads })
    }

    pub fn n_sites(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn n_modes(&self) -> usize {
        self.leads.iter().map(|l| l.modes.len()).sum()
    }

    /// Nearest-neighbour pairs of the box.
    fn bonds(&self) -> Vec<(usize, usize)> {
        let (nx, ny, nz) = self.dims;
        let mut out = Vec::new();
        for i in 1..=nx {
            for j in 1..=ny {
                for l in 1..=nz {
                    let s = site(self.dims, i, j, l);
                    if i < nx {
                        out.push((s, site(self.dims, i + 1, j, l)));
                    }
                    if j < ny {
                        out.push((s, site(self.dims, i, j + 1, l)));
                    }
                    if l < nz {
                        out.push((s, site(self.dims, i, j, l + 1)));
                    }
                }
            }
        }
        out
    }

    /// Matching matrix for unknowns `(psi_B, c)` with per-mode `e^{ik}`.
    ///
    /// Billiard rows: `(E - H_B) psi + v sum_j [s_j = x] sum_p phi_p(j) c_p`.
    /// Mode rows: `c_p e^{-ik_p} - v sum_j phi_p(j) psi(s_j)`.
    fn matrix(&self, energy: Complex64, phases: &[Complex64]) -> CMat {
        let n = self.n_sites();
        let k = self.n_modes();
        let mut m = CMat::zeros(n + k, n + k);
        for x in 0..n {
            m[(x, x)] = energy;
        }
        for (a, b) in self.bonds() {
            m[(a, b)] += 1.0;
            m[(b, a)] += 1.0;
        }
        let mut col = n;
        for lead in &self.leads {
            for (_, _, phi) in &lead.modes {
                for (j, &s) in lead.sites.iter().enumerate() {
                    m[(s, col)] += lead.v * phi[j];
                    m[(col, s)] -= lead.v * phi[j];
                }
                m[(col, col)] = Complex64::new(1.0, 0.0) / phases[col - n];
                col += 1;
            }
        }
        m
    }

    fn mode_table(&self) -> Vec<(usize, usize, f64)> {
        self.leads.iter().flat_map(|l| l.modes.iter().map(move |(p, th, _)| (l.lead_id, *p, *th))).collect()
    }
}

/// Lattice S-matrix over open channels, in the resolvent frame
/// (`S = 1` for a decoupled billiard).
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    pub energy: f64,
    /// `(lead_id, p)` of each open channel, sorted.
    pub channels: Vec<(usize, usize)>,
    pub s: CMat,
    /// Column `q`: billiard wavefunction for unit incoming amplitude
    /// `e^{-iks}` in open channel `q` (lead site `s = 0` next to the billiard).
    pub interior: CMat,
    pub pivot_ratio: f64,
}

/// Mode-matching solve with every transverse mode in the lead ansatz.
pub fn solve_lattice(lattice: &Lattice, energy: f64) -> Result<LatticeSolution> {
    let table = lattice.mode_table();
    let n = lattice.n_sites();
    let moms: Vec<_> = table.iter().map(|&(_, _, th)| spectra::channel_momentum(energy, th)).collect();
    let phases: Vec<Complex64> = moms.iter().map(|m| m.phase).collect();
    let mut order: Vec<usize> = (0..table.len()).filter(|&c| moms[c].k.im == 0.0).collect();
    order.sort_by_key(|&c| (table[c].0, table[c].1));
    if order.is_empty() {
        return Err(Error::NoOpenChannel { energy });
    }
    let m = lattice.matrix(Complex64::new(energy, 0.0), &phases);
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::SingularSystem { pivot_ratio: lu.pivot_ratio() });
    }
    // Incoming amplitude moves to the right-hand side.
    let mut rhs = CMat::zeros(n + table.len(), order.len());
    let col_of: Vec<usize> = (0..table.len()).map(|c| n + c).collect();
    let mode_sites = {
        let mut v = Vec::new();
        for lead in &lattice.leads {
            for (_, _, phi) in &lead.modes {
                v.push((lead.v, lead.sites.clone(), phi.clone()));
            }
        }
        v
    };
    for (q, &c) in order.iter().enumerate() {
        let (v, sites, phi) = &mode_sites[c];
        for (j, &s) in sites.iter().enumerate() {
            rhs[(s, q)] -= *v * phi[j];
        }
        rhs[(col_of[c], q)] = -phases[c];
    }
    let x = lu.solve(&rhs)?;
    let k = order.len();
    let sin: Vec<f64> = order.iter().map(|&c| moms[c].sin_k()).collect();
    let s = CMat::from_fn(k, k, |p, q| {
        let (cp, cq) = (order[p], order[q]);
        let local = x[(col_of[cp], q)] * libm::sqrt(sin[p] / sin[q]);
        // Lead-local reference plane to the resolvent frame.
        -Complex64::from_polar(1.0, -(moms[cp].k.re + moms[cq].k.re)) * local
    });
    let interior = CMat::from_fn(n, k, |site, q| x[(site, q)]);
    Ok(LatticeSolution {
        energy,
        channels: order.iter().map(|&c| (table[c].0, table[c].1)).collect(),
        s,
        interior,
        pivot_ratio: lu.pivot_ratio(),
    })
}

pub fn solve_geometry(g: &Geometry, energy: f64) -> Result<LatticeSolution> {
    solve_lattice(&Lattice::from_geometry(g)?, energy)
}

/// Alias kept for the two-dimensional use case.
pub fn solve_lattice_2d(g: &Geometry, energy: f64) -> Result<LatticeSolution> {
    solve_geometry(g, energy)
}

/// A zero of the homogeneous matching determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePole {
    pub z: Complex64,
    /// `|det M(z)|` relative to the product of the largest row norms.
    pub residual: f64,
    pub newton_steps: usize,
}

/// Rectangle in the complex energy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

/// How the lead phases `e^{ik}` depend on the scan variable `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sheet {
    /// `e^{ik(z)}` continued to `z` itself; zeros are true resolvent poles.
    SelfConsistent,
    /// Phases frozen at a real energy; zeros are the eigenvalues of the
    /// effective Hamiltonian evaluated at that energy.
    FixedEnergy(f64),
}

fn homogeneous(lattice: &Lattice, thresholds: &[f64], sheet: Sheet, z: Complex64) -> CMat {
    let phases: Vec<Complex64> = thresholds
        .iter()
        .map(|&th| match sheet {
            Sheet::SelfConsistent => spectra::continued_phase(z, th),
            Sheet::FixedEnergy(e) => spectra::channel_momentum(e, th).phase,
        })
        .collect();
    lattice.matrix(z, &phases)
}

fn log_det(m: &CMat) -> f64 {
    let lu = Lu::new(m);
    let d = lu.determinant().norm();
    if d == 0.0 {
        f64::NEG_INFINITY
    } else {
        libm::log(d)
    }
}

/// Locates zeros of the homogeneous matching determinant in `window`;
/// `density` grid points per unit length seed a Newton polish.
pub fn oracle_pole_scan(g: &Geometry, window: Window, density: usize, sheet: Sheet) -> Result<Vec<OraclePole>> {
    let lattice = Lattice::from_geometry(g)?;
    let thresholds: Vec<f64> = lattice.mode_table().iter().map(|t| t.2).collect();
    let density = density.max(4) as f64;
    let nre = libm::ceil((window.re.1 - window.re.0) * density).max(2.0) as usize + 1;
    let nim = libm::ceil((window.im.1 - window.im.0) * density).max(2.0) as usize + 1;
    let at = |a: usize, b: usize| {
        Complex64::new(
            window.re.0 + (window.re.1 - window.re.0) * a as f64 / (nre - 1) as f64,
            window.im.0 + (window.im.1 - window.im.0) * b as f64 / (nim - 1) as f64,
        )
    };
    let mut grid = vec![0.0; nre * nim];
    for a in 0..nre {
        for b in 0..nim {
            grid[a * nim + b] = log_det(&homogeneous(&lattice, &thresholds, sheet, at(a, b)));
        }
    }
    let mut seeds = Vec::new();
    for a in 0..nre {
        for b in 0..nim {
            let here = grid[a * nim + b];
            let mut is_min = true;
            for da in -1i64..=1 {
                for db in -1i64..=1 {
                    let (x, y) = (a as i64 + da, b as i64 + db);
                    if (da, db) == (0, 0) || x < 0 || y < 0 || x >= nre as i64 || y >= nim as i64 {
                        continue;
                    }
                    if grid[x as usize * nim + y as usize] < here {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push(at(a, b));
            }
        }
    }
    let span = (window.re.1 - window.re.0).max(window.im.1 - window.im.0);
    let mut found: Vec<OraclePole> = Vec::new();
    for seed in seeds {
        let Some(p) = polish(&lattice, &thresholds, sheet, seed) else { continue };
        let margin = 0.05 * span;
        let inside = p.z.re >= window.re.0 - margin
            && p.z.re <= window.re.1 + margin
            && p.z.im >= window.im.0 - margin
            && p.z.im <= window.im.1 + margin;
        if inside && !found.iter().any(|q| (q.z - p.z).norm() < 1e-7 * (1.0 + p.z.norm())) {
            found.push(p);
        }
    }
    found.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    Ok(found)
}

/// Newton on `det M`: `z <- z - 1 / tr(M^{-1} M')`.
fn polish(lattice: &Lattice, thresholds: &[f64], sheet: Sheet, mut z: Complex64) -> Option<OraclePole> {
    for step in 0..100 {
        let m = homogeneous(lattice, thresholds, sheet, z);
        let lu = Lu::new(&m);
        // An exactly singular matrix means we landed on the zero.
        if lu.is_singular() {
            return Some(OraclePole { z, residual: lu.pivot_ratio(), newton_steps: step });
        }
        let h = 1e-6 * (1.0 + z.norm());
        let dm = homogeneous(lattice, thresholds, sheet, z + h)
            .sub(&homogeneous(lattice, thresholds, sheet, z - h))
            .scale(Complex64::new(0.5 / h, 0.0));
        let tr = lu.solve(&dm).ok()?.trace();
        if tr.norm() == 0.0 || !tr.re.is_finite() {
            return None;
        }
        let dz = Complex64::new(1.0, 0.0) / tr;
        z -= dz;
        if !z.re.is_finite() {
            return None;
        }
        if dz.norm() < 1e-13 * (1.0 + z.norm()) {
            let lu = Lu::new(&homogeneous(lattice, thresholds, sheet, z));
            return Some(OraclePole { z, residual: lu.pivot_ratio(), newton_steps: step + 1 });
        }
    }
    None
}
