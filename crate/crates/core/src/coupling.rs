//! Billiard-to-channel overlap matrices `W`.
//!
//! `W` has one row per closed-billiard eigenstate and one column per channel.
//! Columns are ordered by `(lead_id, p)`. `W` never depends on energy: the
//! `e^{ik}` self-energy factor and the `sqrt(sin k)` flux factor are applied
//! downstream.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::linalg::RMat;
use crate::spectra::{self, BoxSpectrum1D, Channel, RectSpectrum2D};
use crate::Result;

/// Which lateral face of a rectangle a lead is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Straight lead attached to a rectangle side between two walls.
///
/// The walls sit at rows `wall_low` and `wall_high` (exclusive), so the lead
/// covers rows `wall_low + 1 ..= wall_high - 1` and has width
/// `wall_high - wall_low - 1`. A full-width lead on an `Ny`-row billiard is
/// `(0, Ny + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadSpec {
    pub side: Side,
    pub wall_low: usize,
    pub wall_high: usize,
    pub v: f64,
}

impl LeadSpec {
    pub fn new(side: Side, wall_low: usize, wall_high: usize, v: f64) -> Self {
        LeadSpec { side, wall_low, wall_high, v }
    }

    pub fn full_width(side: Side, ny: usize, v: f64) -> Self {
        LeadSpec { side, wall_low: 0, wall_high: ny + 1, v }
    }

    pub fn width(&self) -> usize {
        self.wall_high.saturating_sub(self.wall_low + 1)
    }

    /// Billiard rows touched by the lead, 1-based.
    pub fn rows(&self) -> core::ops::Range<usize> {
        self.wall_low + 1..self.wall_high
    }

    pub fn validate(&self, ny: usize) -> Result<()> {
        if self.wall_high > ny + 1 || self.wall_low >= self.wall_high || self.width() < 1 {
            return Err(invalid(alloc::format!(
                "lead walls ({}, {}) do not fit a billiard side of {} rows",
                self.wall_low,
                self.wall_high,
                ny
            )));
        }
        check_strength(self.v)
    }
}

/// Attachment used for the slab (separable 3D) billiard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlabCase {
    /// One single-site lead on every site of the bottom face `j_z = 1`.
    PerpendicularLeads,
    /// One lead whose cross-section is the whole top face `j_z = N_z`.
    FaceLead,
}

/// Energy-independent coupling between billiard states and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    w: RMat,
    channels: Vec<Channel>,
}

impl CouplingMatrix {
    pub fn new(w: RMat, channels: Vec<Channel>) -> Result<Self> {
        if w.cols() != channels.len() {
            return Err(invalid("W column count differs from channel count"));
        }
        for pair in channels.windows(2) {
            if (pair[0].lead_id, pair[0].p) >= (pair[1].lead_id, pair[1].p) {
                return Err(invalid("channels must be sorted by (lead_id, p)"));
            }
        }
        Ok(CouplingMatrix { w, channels })
    }

    pub fn w(&self) -> &RMat {
        &self.w
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn n_states(&self) -> usize {
        self.w.rows()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Column of `W` for channel `c`.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.w.column(c)
    }

    /// Indices of channels open at `energy`.
    pub fn open_channels(&self, energy: f64) -> Vec<usize> {
        (0..self.channels.len()).filter(|&c| self.channels[c].is_open(energy)).collect()
    }

    /// Joins the channels of two couplings over the same billiard states.
    pub fn concat(&self, other: &CouplingMatrix) -> Result<Self> {
        if self.n_states() != other.n_states() {
            return Err(invalid("couplings refer to different billiards"));
        }
        let mut channels = self.channels.clone();
        channels.extend(other.channels.iter().cloned());
        CouplingMatrix::new(self.w.hstack(&other.w), channels)
    }

    /// Scales every column of lead `lead_id` (and its strength) by `alpha`.
    pub fn scale_lead(&self, lead_id: usize, alpha: f64) -> Self {
        let mut out = self.clone();
        for (c, ch) in out.channels.iter_mut().enumerate() {
            if ch.lead_id == lead_id {
                ch.v *= alpha;
                for b in 0..out.w.rows() {
                    out.w[(b, c)] *= alpha;
                }
            }
        }
        out
    }

    /// Relabels lead ids by adding `offset`.
    pub fn with_lead_offset(mut self, offset: usize) -> Self {
        for ch in self.channels.iter_mut() {
            ch.lead_id += offset;
        }
        self
    }
}

/// `V_b(E, c) = W(b, c) sqrt(|sin k_c| / pi)` for the channels open at `E`.
///
/// With this normalization `S = 1 - 2 pi i V^T G V` is unitary for the
/// `-W W^T e^{ik}` self-energy.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxNormalizedCoupling {
    pub energy: f64,
    pub open: Vec<usize>,
    pub v: RMat,
}

pub fn flux_normalized(coupling: &CouplingMatrix, energy: f64) -> FluxNormalizedCoupling {
    let open = coupling.open_channels(energy);
    let factors: Vec<f64> = open
        .iter()
        .map(|&c| {
            let m = spectra::channel_momentum(energy, coupling.channels[c].threshold);
            libm::sqrt(m.sin_k().abs() / core::f64::consts::PI)
        })
        .collect();
    let v = RMat::from_fn(coupling.n_states(), open.len(), |b, j| coupling.w[(b, open[j])] * factors[j]);
    FluxNormalizedCoupling { energy, open, v }
}

fn check_strength(v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 || !v.is_finite() {
        return Err(invalid(alloc::format!("coupling strength must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn point_channel(lead_id: usize, v: f64) -> Channel {
    Channel { lead_id, p: 1, threshold: 0.0, phi: vec![1.0], v }
}

/// Single-site leads on sites `j_l` and `j_r` of a chain (lead ids 0 and 1).
pub fn coupling_chain_sites(
    chain: &BoxSpectrum1D,
    j_l: usize,
    j_r: usize,
    v_l: f64,
    v_r: f64,
) -> Result<CouplingMatrix> {
    check_strength(v_l)?;
    check_strength(v_r)?;
    let n = chain.sites();
    if !(1..=n).contains(&j_l) || !(1..=n).contains(&j_r) {
        return Err(invalid("attachment site outside the chain"));
    }
    let w = RMat::from_fn(n, 2, |b, c| if c == 0 { v_l * chain.psi(b + 1, j_l) } else { v_r * chain.psi(b + 1, j_r) });
    CouplingMatrix::new(w, vec![point_channel(0, v_l), point_channel(1, v_r)])
}

/// Chain with leads on its end sites: `W_{n,L} = v_L psi_n(1)`,
/// `W_{n,R} = v_R psi_n(N)`.
pub fn coupling_1d(chain: &BoxSpectrum1D, v_l: f64, v_r: f64) -> Result<CouplingMatrix> {
    coupling_chain_sites(chain, 1, chain.sites(), v_l, v_r)
}

/// One straight lead on a rectangle side. Entries factor into the
/// longitudinal boundary amplitude `psi_m(1)` or `psi_m(Nx)` times the
/// transverse overlap `sum_j psi_n(j) phi_p(j - N_1)`, scaled by `v`.
pub fn coupling_rect2d(rect: &RectSpectrum2D, lead: &LeadSpec, lead_id: usize) -> Result<CouplingMatrix> {
    lead.validate(rect.ny())?;
    let modes = spectra::transverse_modes(lead.width())?;
    let column = match lead.side {
        Side::Left => 1,
        Side::Right => rect.nx(),
    };
    let states = rect.states();
    let w = RMat::from_fn(states.len(), modes.len(), |b, p| {
        let s = states[b];
        let overlap: f64 = lead.rows().map(|j| rect.y().psi(s.n, j) * modes[p].phi[j - lead.wall_low - 1]).sum();
        lead.v * rect.x().psi(s.m, column) * overlap
    });
    let channels =
        modes.into_iter().map(|m| Channel { lead_id, p: m.p, threshold: m.threshold, phi: m.phi, v: lead.v }).collect();
    CouplingMatrix::new(w, channels)
}

/// Single-site leads at lattice points of a rectangle, `(i, j)` 1-based.
pub fn coupling_point_contact(
    rect: &RectSpectrum2D,
    site_l: (usize, usize),
    site_r: (usize, usize),
    v_l: f64,
    v_r: f64,
) -> Result<CouplingMatrix> {
    check_strength(v_l)?;
    check_strength(v_r)?;
    for &(i, j) in &[site_l, site_r] {
        if !(1..=rect.nx()).contains(&i) || !(1..=rect.ny()).contains(&j) {
            return Err(invalid(alloc::format!("contact point ({i}, {j}) outside the billiard")));
        }
    }
    let n = rect.states().len();
    let w = RMat::from_fn(n, 2, |b, c| {
        if c == 0 {
            v_l * rect.psi(b, site_l.0, site_l.1)
        } else {
            v_r * rect.psi(b, site_r.0, site_r.1)
        }
    });
    CouplingMatrix::new(w, vec![point_channel(0, v_l), point_channel(1, v_r)])
}

/// States of the slab: `(b, n_z)` with `b` indexing the rectangle states of
/// the `x, y` cross-section, ordered `b`-major so every `N_z x N_z` block is
/// contiguous.
pub fn slab_state_index(b: usize, nz_mode: usize, nz: usize) -> usize {
    b * nz + (nz_mode - 1)
}

/// Coupling of the slab billiard.
///
/// * `PerpendicularLeads`: channel `s` is the single-site lead on
///   cross-section site `s` (row-major `(i, j)`), `W((b, n_z), s) = v psi_b(s) psi_{n_z}(1)`.
/// * `FaceLead`: channel `b'` is transverse mode `b'` of the face lead,
///   `W((b, n_z), b') = v delta_{bb'} psi_{n_z}(N_z)`.
pub fn coupling_slab3d(cross: &RectSpectrum2D, nz: usize, case: SlabCase, v: f64) -> Result<CouplingMatrix> {
    check_strength(v)?;
    let zbox = spectra::box_eigensystem(nz)?;
    let nb = cross.states().len();
    let (nx, ny) = (cross.nx(), cross.ny());
    match case {
        SlabCase::PerpendicularLeads => {
            let w = RMat::from_fn(nb * nz, nx * ny, |row, s| {
                let (b, nzm) = (row / nz, row % nz + 1);
                let (i, j) = (s / ny + 1, s % ny + 1);
                v * cross.psi(b, i, j) * zbox.psi(nzm, 1)
            });
            let channels = (0..nx * ny).map(|s| point_channel(s, v)).collect();
            CouplingMatrix::new(w, channels)
        }
        SlabCase::FaceLead => {
            let w = RMat::from_fn(nb * nz, nb, |row, c| {
                let (b, nzm) = (row / nz, row % nz + 1);
                if b == c {
                    v * zbox.psi(nzm, nz)
                } else {
                    0.0
                }
            });
            let channels = cross
                .states()
                .iter()
                .enumerate()
                .map(|(b, st)| Channel {
                    lead_id: 0,
                    p: b + 1,
                    threshold: st.energy,
                    phi: (0..nx * ny).map(|s| cross.psi(b, s / ny + 1, s % ny + 1)).collect(),
                    v,
                })
                .collect();
            CouplingMatrix::new(w, channels)
        }
    }
}
