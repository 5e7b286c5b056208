//! Energy-dependent effective Hamiltonian and its biorthogonal eigensystem.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::coupling::{self, CouplingMatrix, SlabCase};
use crate::error::invalid;
use crate::geometry::{Geometry, OpenSystem};
use crate::linalg::{self, bilinear, norm2, CMat, RMat};
use crate::spectra::{self, BoxSpectrum1D, RectSpectrum2D};
use crate::{Error, Result};

/// Which channels enter the self-energy, and with which phase factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Open channels only, exact `e^{ik_p}`.
    OpenOnly,
    /// Every channel; closed ones contribute the real decaying `e^{ik_p}`.
    AllChannels,
    /// Open channels with `e^{ik} ~ -(E - E_p)/2 + i`.
    WideBand,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::OpenOnly => "open-only",
            Mode::AllChannels => "all-channels",
            Mode::WideBand => "wide-band",
        }
    }
}

/// `H = diag(E_b) - sum_p W_p W_p^T e^{ik_p}` at a real energy.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    h: CMat,
    closed: Vec<f64>,
    energy: f64,
    mode: Mode,
    label: &'static str,
    phases: Vec<Option<Complex64>>,
}

fn assemble(energies: &[f64], w: &RMat, phases: &[Option<Complex64>]) -> CMat {
    let n = energies.len();
    let mut h = CMat::zeros(n, n);
    for (c, ph) in phases.iter().enumerate() {
        let Some(ph) = ph else { continue };
        for a in 0..n {
            let wa = w[(a, c)];
            if wa == 0.0 {
                continue;
            }
            for b in 0..n {
                h[(a, b)] -= *ph * (wa * w[(b, c)]);
            }
        }
    }
    for (a, e) in energies.iter().enumerate() {
        h[(a, a)] += *e;
    }
    h
}

impl EffectiveHamiltonian {
    /// Assembles `H_eff` from closed-billiard energies and a coupling.
    ///
    /// `OpenOnly` and `WideBand` fail with [`Error::NoOpenChannel`] when the
    /// coupling has channels but none is open at `energy`.
    pub fn from_parts(
        energies: &[f64],
        coupling: &CouplingMatrix,
        energy: f64,
        mode: Mode,
        label: &'static str,
    ) -> Result<Self> {
        if energies.len() != coupling.n_states() {
            return Err(invalid("energy list and coupling disagree on the state count"));
        }
        if !energy.is_finite() {
            return Err(invalid("energy must be finite"));
        }
        let phases: Vec<Option<Complex64>> = coupling
            .channels()
            .iter()
            .map(|ch| {
                let open = ch.is_open(energy);
                match mode {
                    Mode::AllChannels => Some(spectra::channel_momentum(energy, ch.threshold).phase),
                    Mode::OpenOnly if open => Some(spectra::channel_momentum(energy, ch.threshold).phase),
                    Mode::WideBand if open => Some(spectra::wide_band_phase(energy, ch.threshold)),
                    _ => None,
                }
            })
            .collect();
        if mode != Mode::AllChannels && !phases.is_empty() && phases.iter().all(Option::is_none) {
            return Err(Error::NoOpenChannel { energy });
        }
        let h = assemble(energies, coupling.w(), &phases);
        Ok(EffectiveHamiltonian { h, closed: energies.to_vec(), energy, mode, label, phases })
    }

    pub fn build(system: &OpenSystem, energy: f64, mode: Mode, label: &'static str) -> Result<Self> {
        Self::from_parts(system.energies(), system.coupling(), energy, mode, label)
    }

    pub fn for_geometry(geometry: &Geometry, energy: f64, mode: Mode) -> Result<Self> {
        Self::build(&geometry.open_system()?, energy, mode, geometry.label())
    }

    pub fn matrix(&self) -> &CMat {
        &self.h
    }

    /// Closed-billiard energies on the diagonal before coupling.
    pub fn closed_energies(&self) -> &[f64] {
        &self.closed
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    /// Phase factor per channel, `None` when the channel is left out.
    pub fn phases(&self) -> &[Option<Complex64>] {
        &self.phases
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    pub fn trace(&self) -> Complex64 {
        self.h.trace()
    }

    /// Radiation shift: real part of the self-energy `H - diag(E_b)`.
    pub fn shift_matrix(&self) -> RMat {
        let mut f = self.h.map(|z| z.re);
        for (i, e) in self.closed.iter().enumerate() {
            f[(i, i)] -= e;
        }
        f
    }

    /// Width matrix `-2 Im H`.
    pub fn width_matrix(&self) -> RMat {
        self.h.map(|z| -2.0 * z.im)
    }
}

/// `H_eff(z)` at complex energy with every channel's `e^{ik}` continued by
/// [`spectra::continued_phase`].
pub fn heff_at_complex(energies: &[f64], coupling: &CouplingMatrix, z: Complex64) -> CMat {
    let phases: Vec<Option<Complex64>> =
        coupling.channels().iter().map(|ch| Some(spectra::continued_phase(z, ch.threshold))).collect();
    assemble(energies, coupling.w(), &phases)
}

pub fn build_heff_1d(
    chain: &BoxSpectrum1D,
    coupling: &CouplingMatrix,
    energy: f64,
    mode: Mode,
) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_parts(chain.energies(), coupling, energy, mode, "chain1d")
}

/// `coupling` holds the channels of both leads (see [`CouplingMatrix::concat`]).
pub fn build_heff_rect2d(
    rect: &RectSpectrum2D,
    coupling: &CouplingMatrix,
    energy: f64,
    mode: Mode,
) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::from_parts(&rect.energies(), coupling, energy, mode, "rect2d")
}

pub fn build_heff_point_contact(
    rect: &RectSpectrum2D,
    site_l: (usize, usize),
    site_r: (usize, usize),
    v_l: f64,
    v_r: f64,
    energy: f64,
    mode: Mode,
) -> Result<EffectiveHamiltonian> {
    let w = coupling::coupling_point_contact(rect, site_l, site_r, v_l, v_r)?;
    EffectiveHamiltonian::from_parts(&rect.energies(), &w, energy, mode, "point-contact")
}

/// States ordered as in [`coupling::slab_state_index`].
pub fn build_heff_slab3d(
    cross: &RectSpectrum2D,
    nz: usize,
    case: SlabCase,
    v: f64,
    energy: f64,
    mode: Mode,
) -> Result<EffectiveHamiltonian> {
    let g = Geometry::Slab3d { nx: cross.nx(), ny: cross.ny(), nz, case, v };
    EffectiveHamiltonian::build(&g.open_system()?, energy, mode, "slab3d")
}

/// Relative gap below which two poles count as coalesced.
pub const DEFECT_TOLERANCE: f64 = 1e-6;

/// `(v|v)` below this (for unit-norm `v`) cannot be normalized.
const SELF_ORTHOGONAL: f64 = 1e-10;

/// Poles of an effective Hamiltonian with right eigenvectors normalized
/// under the transpose product `(l|l') = sum_j v_j v'_j`.
#[derive(Debug, Clone)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    /// Column `l` is `|l)`.
    pub right_eigvecs: CMat,
    pub defect: Vec<bool>,
    /// `|v^T v|` of the unit-norm eigenvector before normalization.
    pub self_overlap: Vec<f64>,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn is_defective(&self) -> bool {
        self.defect.iter().any(|&d| d)
    }

    pub fn sum(&self) -> Complex64 {
        self.poles.iter().sum()
    }

    /// `-2 Im z` per pole.
    pub fn widths(&self) -> Vec<f64> {
        self.poles.iter().map(|z| -2.0 * z.im).collect()
    }

    /// Largest `|(l|l') - delta|` over pole pairs outside defective clusters.
    pub fn biorthogonality_defect(&self) -> f64 {
        let n = self.len();
        let cols: Vec<Vec<Complex64>> = (0..n).map(|l| self.right_eigvecs.column(l)).collect();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            if self.defect[a] {
                continue;
            }
            for b in 0..n {
                if self.defect[b] {
                    continue;
                }
                let t = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((bilinear(&cols[a], &cols[b]) - t).norm());
            }
        }
        worst
    }
}

fn coalesced(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() < DEFECT_TOLERANCE * (1.0 + a.norm())
}

/// Poles sorted by `(Re z, Im z)` with biorthonormal right eigenvectors.
pub fn eigensystem(h: &EffectiveHamiltonian) -> Result<PoleSet> {
    pole_set(h.matrix())
}

/// [`eigensystem`] for a bare complex symmetric matrix.
pub fn pole_set(h: &CMat) -> Result<PoleSet> {
    if h.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("effective Hamiltonian has non-finite entries"));
    }
    let eig = linalg::eigen(h)?;
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (eig.values[a], eig.values[b]);
        za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im))
    });
    let poles: Vec<Complex64> = order.iter().map(|&i| eig.values[i]).collect();
    let mut vecs: Vec<Vec<Complex64>> = order.iter().map(|&i| eig.vectors.column(i)).collect();

    let mut defect = alloc::vec![false; n];
    for a in 0..n {
        for b in a + 1..n {
            if coalesced(poles[a], poles[b]) {
                defect[a] = true;
                defect[b] = true;
            }
        }
    }

    let mut self_overlap = alloc::vec![0.0; n];
    for l in 0..n {
        let nrm = norm2(&vecs[l]);
        if nrm > 0.0 {
            for x in vecs[l].iter_mut() {
                *x /= nrm;
            }
        }
        self_overlap[l] = bilinear(&vecs[l], &vecs[l]).norm();
        // Transpose Gram-Schmidt against earlier members of the cluster.
        if defect[l] {
            for m in 0..l {
                if defect[m] && coalesced(poles[l], poles[m]) && bilinear(&vecs[m], &vecs[m]).norm() > 0.5 {
                    let c = bilinear(&vecs[m], &vecs[l]);
                    let prev = vecs[m].clone();
                    for (x, p) in vecs[l].iter_mut().zip(prev) {
                        *x -= c * p;
                    }
                }
            }
            let nrm = norm2(&vecs[l]);
            if nrm > 1e-8 {
                for x in vecs[l].iter_mut() {
                    *x /= nrm;
                }
            } else {
                vecs[l] = eig.vectors.column(order[l]);
            }
        }
        let s = bilinear(&vecs[l], &vecs[l]);
        if s.norm() > SELF_ORTHOGONAL {
            let r = s.sqrt();
            for x in vecs[l].iter_mut() {
                *x /= r;
            }
        } else {
            defect[l] = true;
        }
        let big = vecs[l].iter().copied().fold(Complex64::new(0.0, 0.0), |acc, x| {
            if x.norm() > acc.norm() * (1.0 + 1e-12) {
                x
            } else {
                acc
            }
        });
        if big.re < 0.0 || (big.re == 0.0 && big.im < 0.0) {
            for x in vecs[l].iter_mut() {
                *x = -*x;
            }
        }
    }

    let mut right = CMat::zeros(h.rows(), n);
    for (l, v) in vecs.iter().enumerate() {
        right.set_column(l, v);
    }
    Ok(PoleSet { poles, right_eigvecs: right, defect, self_overlap })
}
