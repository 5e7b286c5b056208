//! Billiard geometries and their assembly into an [`OpenSystem`].

use alloc::vec::Vec;

use crate::coupling::{self, CouplingMatrix, LeadSpec, SlabCase};
use crate::error::invalid;
use crate::linalg::RMat;
use crate::spectra::{self, RectSpectrum2D};
use crate::Result;

/// Lead topology of the two-site dot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotCase {
    /// Leads on different sites; the two-site chain.
    A,
    /// Both leads on the same site.
    C,
}

/// Every billiard/lead arrangement the crate knows how to build.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// `sites`-site chain, leads on sites `1` and `N`.
    Chain1d { sites: usize, v_l: f64, v_r: f64 },
    /// Two-site dot in topology A or C.
    Dot2 { case: DotCase, v_l: f64, v_r: f64 },
    /// `nx x ny` rectangle with straight leads on the left and right sides.
    Rect2d { nx: usize, ny: usize, left: LeadSpec, right: LeadSpec },
    /// Rectangle with single-site leads at two lattice points.
    PointContact { nx: usize, ny: usize, site_l: (usize, usize), site_r: (usize, usize), v_l: f64, v_r: f64 },
    /// Separable `nx x ny x nz` slab.
    Slab3d { nx: usize, ny: usize, nz: usize, case: SlabCase, v: f64 },
}

impl Geometry {
    pub fn label(&self) -> &'static str {
        match self {
            Geometry::Chain1d { .. } => "chain1d",
            Geometry::Dot2 { .. } => "dot2",
            Geometry::Rect2d { .. } => "rect2d",
            Geometry::PointContact { .. } => "point-contact",
            Geometry::Slab3d { .. } => "slab3d",
        }
    }

    /// Lattice extent `(nx, ny, nz)`; sites are numbered
    /// `((i - 1) ny + (j - 1)) nz + (l - 1)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        match *self {
            Geometry::Chain1d { sites, .. } => (sites, 1, 1),
            Geometry::Dot2 { .. } => (2, 1, 1),
            Geometry::Rect2d { nx, ny, .. } | Geometry::PointContact { nx, ny, .. } => (nx, ny, 1),
            Geometry::Slab3d { nx, ny, nz, .. } => (nx, ny, nz),
        }
    }

    /// Number of lattice sites in the billiard.
    pub fn site_count(&self) -> usize {
        let (a, b, c) = self.dims();
        a * b * c
    }

    /// Same geometry with every lead strength multiplied by `(alpha_l,
    /// alpha_r)`; single-strength geometries use `alpha_l`.
    pub fn with_strengths(&self, v_l: f64, v_r: f64) -> Geometry {
        let mut g = self.clone();
        match &mut g {
            Geometry::Chain1d { v_l: a, v_r: b, .. }
            | Geometry::Dot2 { v_l: a, v_r: b, .. }
            | Geometry::PointContact { v_l: a, v_r: b, .. } => {
                *a = v_l;
                *b = v_r;
            }
            Geometry::Rect2d { left, right, .. } => {
                left.v = v_l;
                right.v = v_r;
            }
            Geometry::Slab3d { v, .. } => *v = v_l,
        }
        g
    }

    /// Lead strengths `(v_L, v_R)`; single-strength geometries repeat `v`.
    pub fn strengths(&self) -> (f64, f64) {
        match *self {
            Geometry::Chain1d { v_l, v_r, .. }
            | Geometry::Dot2 { v_l, v_r, .. }
            | Geometry::PointContact { v_l, v_r, .. } => (v_l, v_r),
            Geometry::Rect2d { left, right, .. } => (left.v, right.v),
            Geometry::Slab3d { v, .. } => (v, v),
        }
    }

    pub fn open_system(&self) -> Result<OpenSystem> {
        let dims = self.dims();
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(invalid("billiard dimensions must be at least one site"));
        }
        match *self {
            Geometry::Chain1d { sites, v_l, v_r } => {
                let chain = spectra::box_eigensystem(sites)?;
                let coupling = coupling::coupling_1d(&chain, v_l, v_r)?;
                Ok(OpenSystem::new(chain.energies().to_vec(), coupling, chain.eigvecs().clone(), dims))
            }
            Geometry::Dot2 { case, v_l, v_r } => {
                let chain = spectra::box_eigensystem(2)?;
                let j_r = match case {
                    DotCase::A => 2,
                    DotCase::C => 1,
                };
                let coupling = coupling::coupling_chain_sites(&chain, 1, j_r, v_l, v_r)?;
                Ok(OpenSystem::new(chain.energies().to_vec(), coupling, chain.eigvecs().clone(), dims))
            }
            Geometry::Rect2d { nx, ny, left, right } => {
                let rect = RectSpectrum2D::new(nx, ny)?;
                let l = coupling::coupling_rect2d(&rect, &left, 0)?;
                let r = coupling::coupling_rect2d(&rect, &right, 1)?;
                let amplitudes = rect_amplitudes(&rect);
                Ok(OpenSystem::new(rect.energies(), l.concat(&r)?, amplitudes, dims))
            }
            Geometry::PointContact { nx, ny, site_l, site_r, v_l, v_r } => {
                let rect = RectSpectrum2D::new(nx, ny)?;
                let coupling = coupling::coupling_point_contact(&rect, site_l, site_r, v_l, v_r)?;
                let amplitudes = rect_amplitudes(&rect);
                Ok(OpenSystem::new(rect.energies(), coupling, amplitudes, dims))
            }
            Geometry::Slab3d { nx, ny, nz, case, v } => {
                let cross = RectSpectrum2D::new(nx, ny)?;
                let zbox = spectra::box_eigensystem(nz)?;
                let coupling = coupling::coupling_slab3d(&cross, nz, case, v)?;
                let nb = cross.states().len();
                let mut energies = Vec::with_capacity(nb * nz);
                for st in cross.states() {
                    for e in zbox.energies() {
                        energies.push(st.energy + e);
                    }
                }
                let amplitudes = RMat::from_fn(nx * ny * nz, nb * nz, |site, state| {
                    let (b, nzm) = (state / nz, state % nz + 1);
                    let l = site % nz + 1;
                    let s = site / nz;
                    cross.psi(b, s / ny + 1, s % ny + 1) * zbox.psi(nzm, l)
                });
                Ok(OpenSystem::new(energies, coupling, amplitudes, dims))
            }
        }
    }
}

fn rect_amplitudes(rect: &RectSpectrum2D) -> RMat {
    let ny = rect.ny();
    RMat::from_fn(rect.nx() * ny, rect.states().len(), |site, b| rect.psi(b, site / ny + 1, site % ny + 1))
}

/// A closed billiard (energies and lattice eigenvectors) plus its coupling
/// to all lead channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystem {
    energies: Vec<f64>,
    coupling: CouplingMatrix,
    amplitudes: RMat,
    dims: (usize, usize, usize),
}

impl OpenSystem {
    /// `amplitudes` is `sites x states` with column `b` holding `psi_b`.
    pub fn new(energies: Vec<f64>, coupling: CouplingMatrix, amplitudes: RMat, dims: (usize, usize, usize)) -> Self {
        debug_assert_eq!(energies.len(), coupling.n_states());
        debug_assert_eq!(amplitudes.cols(), energies.len());
        OpenSystem { energies, coupling, amplitudes, dims }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    pub fn amplitudes(&self) -> &RMat {
        &self.amplitudes
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// Number of distinct leads.
    pub fn n_leads(&self) -> usize {
        self.coupling.channels().iter().map(|c| c.lead_id + 1).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Side;

    #[test]
    fn amplitudes_are_orthonormal() {
        let geoms = [
            Geometry::Chain1d { sites: 4, v_l: 1.0, v_r: 1.0 },
            Geometry::Rect2d {
                nx: 3,
                ny: 4,
                left: LeadSpec::full_width(Side::Left, 4, 1.0),
                right: LeadSpec::new(Side::Right, 1, 4, 1.0),
            },
            Geometry::Slab3d { nx: 2, ny: 2, nz: 3, case: SlabCase::FaceLead, v: 1.0 },
        ];
        for g in &geoms {
            let sys = g.open_system().unwrap();
            let a = sys.amplitudes();
            assert_eq!(a.rows(), g.site_count());
            let gram = a.transpose().matmul(a);
            for i in 0..gram.rows() {
                for j in 0..gram.cols() {
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - t).abs() < 1e-12, "{}", g.label());
                }
            }
        }
    }

    #[test]
    fn lead_count_and_strengths() {
        let g = Geometry::Slab3d { nx: 2, ny: 3, nz: 1, case: SlabCase::PerpendicularLeads, v: 0.4 };
        assert_eq!(g.open_system().unwrap().n_leads(), 6);
        let g = Geometry::Chain1d { sites: 3, v_l: 0.1, v_r: 0.2 }.with_strengths(0.5, 0.6);
        assert_eq!(g.strengths(), (0.5, 0.6));
        assert!(Geometry::Chain1d { sites: 0, v_l: 1.0, v_r: 1.0 }.open_system().is_err());
    }
}
