//! S-matrix, transmission, conductance and the interior scattering state.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::coupling::CouplingMatrix;
use crate::error::invalid;
use crate::geometry::OpenSystem;
use crate::heff::{self, EffectiveHamiltonian, Mode, PoleSet};
use crate::linalg::{bilinear, CMat, Lu};
use crate::spectra;
use crate::{Error, Result};

/// Channels closer than this to a band edge (`|sin k| <`) are excluded from
/// sweeps.
pub const BAND_EDGE_GUARD: f64 = 1e-6;

/// Identifies a row/column of the S-matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelLabel {
    /// Index into the full channel table.
    pub index: usize,
    pub lead_id: usize,
    pub p: usize,
}

/// S-matrix over the channels open at `energy`.
#[derive(Debug, Clone)]
pub struct SMatrixResult {
    pub energy: f64,
    pub mode: Mode,
    pub channels: Vec<ChannelLabel>,
    pub s: CMat,
    /// Smallest `sin k` over open channels.
    pub min_sin_k: f64,
}

impl SMatrixResult {
    pub fn n_open(&self) -> usize {
        self.channels.len()
    }

    fn lead_rows(&self, lead: usize) -> Vec<usize> {
        (0..self.channels.len()).filter(|&i| self.channels[i].lead_id == lead).collect()
    }

    /// Block `S(out_lead <- in_lead)`: `t` is `block(1, 0)`, `r` is
    /// `block(0, 0)`, `t'` is `block(0, 1)`, `r'` is `block(1, 1)`.
    pub fn block(&self, out_lead: usize, in_lead: usize) -> CMat {
        let rows = self.lead_rows(out_lead);
        let cols = self.lead_rows(in_lead);
        CMat::from_fn(rows.len(), cols.len(), |i, j| self.s[(rows[i], cols[j])])
    }

    /// First-channel transmission amplitude from lead 0 into lead 1.
    pub fn t(&self) -> Option<Complex64> {
        let b = self.block(1, 0);
        (b.rows() > 0 && b.cols() > 0).then(|| b[(0, 0)])
    }

    /// First-channel reflection amplitude in lead 0.
    pub fn r(&self) -> Option<Complex64> {
        let b = self.block(0, 0);
        (b.rows() > 0).then(|| b[(0, 0)])
    }

    /// `sum |t_pq|^2` from lead 0 into lead 1; zero for a single lead.
    pub fn conductance(&self) -> f64 {
        self.block(1, 0).as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn has_two_leads(&self) -> bool {
        self.channels.iter().any(|c| c.lead_id == 1) && self.channels.iter().any(|c| c.lead_id == 0)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.s.unitarity_defect()
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.s.symmetry_defect()
    }
}

/// Open channels of `h` with `Gamma_c = sqrt(2 Im e^{ik_c}) W_c`.
fn decay_couplings(
    h: &EffectiveHamiltonian,
    coupling: &CouplingMatrix,
) -> (Vec<ChannelLabel>, CMat, Vec<Complex64>, f64) {
    let energy = h.energy();
    let mut labels = Vec::new();
    let mut factors = Vec::new();
    let mut phases = Vec::new();
    let mut min_sin = f64::INFINITY;
    for (c, ch) in coupling.channels().iter().enumerate() {
        let Some(ph) = h.phases()[c] else { continue };
        if !ch.is_open(energy) {
            continue;
        }
        labels.push(ChannelLabel { index: c, lead_id: ch.lead_id, p: ch.p });
        factors.push(libm::sqrt(2.0 * ph.im.max(0.0)));
        phases.push(ph);
        min_sin = min_sin.min(spectra::channel_momentum(energy, ch.threshold).sin_k());
    }
    let w = coupling.w();
    let gamma = CMat::from_fn(coupling.n_states(), labels.len(), |b, j| {
        Complex64::new(w[(b, labels[j].index)] * factors[j], 0.0)
    });
    (labels, gamma, phases, min_sin)
}

fn resolvent_lu(h: &EffectiveHamiltonian) -> Result<Lu> {
    let n = h.dim();
    let mut q = h.matrix().scale(Complex64::new(-1.0, 0.0));
    for i in 0..n {
        q[(i, i)] += h.energy();
    }
    let lu = Lu::new(&q);
    if lu.is_singular() {
        return Err(Error::SingularResolvent { energy: h.energy(), pivot_ratio: lu.pivot_ratio() });
    }
    Ok(lu)
}

/// `S = 1 - i Gamma^T (E - H_eff)^{-1} Gamma` over open channels.
///
/// In the exact modes `Gamma = sqrt(2 sin k) W`, which is the same as
/// `S = 1 - 2 pi i V^T G V` with `V = W sqrt(sin k / pi)`.
pub fn smatrix_from_heff(h: &EffectiveHamiltonian, coupling: &CouplingMatrix) -> Result<SMatrixResult> {
    let (channels, gamma, _, min_sin_k) = decay_couplings(h, coupling);
    if channels.is_empty() {
        return Err(Error::NoOpenChannel { energy: h.energy() });
    }
    let lu = resolvent_lu(h)?;
    let x = lu.solve(&gamma)?;
    let mut s = gamma.transpose().matmul(&x).scale(Complex64::new(0.0, -1.0));
    for i in 0..channels.len() {
        s[(i, i)] += 1.0;
    }
    Ok(SMatrixResult { energy: h.energy(), mode: h.mode(), channels, s, min_sin_k })
}

pub fn smatrix(system: &OpenSystem, energy: f64, mode: Mode) -> Result<SMatrixResult> {
    let h = EffectiveHamiltonian::build(system, energy, mode, "")?;
    smatrix_from_heff(&h, system.coupling())
}

/// S-matrix from the pole expansion
/// `G = sum_l |l)(l| / (E - z_l)`; refuses defective pole sets.
pub fn smatrix_pole_expansion(
    h: &EffectiveHamiltonian,
    coupling: &CouplingMatrix,
    poles: &PoleSet,
) -> Result<SMatrixResult> {
    if poles.is_defective() {
        return Err(Error::DefectivePoles);
    }
    let (channels, gamma, _, min_sin_k) = decay_couplings(h, coupling);
    if channels.is_empty() {
        return Err(Error::NoOpenChannel { energy: h.energy() });
    }
    // Projections (l|Gamma_c).
    let proj = poles.right_eigvecs.transpose().matmul(&gamma);
    let k = channels.len();
    let mut s = CMat::identity(k);
    for l in 0..poles.len() {
        let d = Complex64::new(h.energy(), 0.0) - poles.poles[l];
        if d.norm() == 0.0 {
            return Err(Error::SingularResolvent { energy: h.energy(), pivot_ratio: 0.0 });
        }
        let f = Complex64::new(0.0, -1.0) / d;
        for p in 0..k {
            for q in 0..k {
                s[(p, q)] += f * proj[(l, p)] * proj[(l, q)];
            }
        }
    }
    Ok(SMatrixResult { energy: h.energy(), mode: h.mode(), channels, s, min_sin_k })
}

/// First-channel `t` from the pole expansion.
pub fn transmission_pole_expansion(
    h: &EffectiveHamiltonian,
    coupling: &CouplingMatrix,
    poles: &PoleSet,
) -> Result<Complex64> {
    smatrix_pole_expansion(h, coupling, poles)?
        .t()
        .ok_or_else(|| invalid("transmission needs an open channel in leads 0 and 1"))
}

/// Why a sweep row carries no transport data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Fewer than two leads: conductance reported as zero.
    SingleLead,
    NoOpenChannel,
    /// Some open channel has `|sin k| <` [`BAND_EDGE_GUARD`].
    BandEdge,
}

impl RowStatus {
    pub fn label(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::SingleLead => "single-lead",
            RowStatus::NoOpenChannel => "no-open-channel",
            RowStatus::BandEdge => "band-edge",
        }
    }
}

/// One energy of a conductance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub energy: f64,
    /// Longitudinal `k` of the first lead-0 channel (real part).
    pub k: f64,
    pub conductance: f64,
    /// Per lead-0 channel `q`: `sum_p |t_pq|^2` (zero when closed).
    pub transmission: Vec<f64>,
    /// Per lead-0 channel `q`: `arg t_qq` into the same-index lead-1 channel.
    pub phase: Vec<f64>,
    pub open_channels: usize,
    pub status: RowStatus,
}

/// Lead-0 channel indices of a coupling, in table order.
pub fn lead0_channels(coupling: &CouplingMatrix) -> Vec<usize> {
    (0..coupling.n_channels()).filter(|&c| coupling.channels()[c].lead_id == 0).collect()
}

/// A single row of [`conductance_sweep`].
pub fn sweep_point(system: &OpenSystem, energy: f64, mode: Mode) -> Result<SweepRow> {
    let coupling = system.coupling();
    let incoming = lead0_channels(coupling);
    let k = incoming
        .first()
        .map(|&c| spectra::channel_momentum(energy, coupling.channels()[c].threshold).k.re)
        .unwrap_or(f64::NAN);
    let open = coupling.open_channels(energy);
    let mut row = SweepRow {
        energy,
        k,
        conductance: 0.0,
        transmission: alloc::vec![0.0; incoming.len()],
        phase: alloc::vec![0.0; incoming.len()],
        open_channels: open.len(),
        status: RowStatus::Ok,
    };
    if open.is_empty() {
        row.status = RowStatus::NoOpenChannel;
        return Ok(row);
    }
    let min_sin = open
        .iter()
        .map(|&c| spectra::channel_momentum(energy, coupling.channels()[c].threshold).sin_k())
        .fold(f64::INFINITY, f64::min);
    if min_sin < BAND_EDGE_GUARD {
        row.status = RowStatus::BandEdge;
        return Ok(row);
    }
    let res = smatrix(system, energy, mode)?;
    if !res.has_two_leads() {
        row.status = RowStatus::SingleLead;
        return Ok(row);
    }
    row.conductance = res.conductance();
    for (slot, &q) in incoming.iter().enumerate() {
        let Some(col) = res.channels.iter().position(|c| c.index == q) else { continue };
        let p = coupling.channels()[q].p;
        let mut total = 0.0;
        for (i, ch) in res.channels.iter().enumerate() {
            if ch.lead_id == 1 {
                total += res.s[(i, col)].norm_sqr();
                if ch.p == p {
                    row.phase[slot] = res.s[(i, col)].arg();
                }
            }
        }
        row.transmission[slot] = total;
    }
    Ok(row)
}

/// Conductance and per-channel transmission on an energy grid, in grid order.
pub fn conductance_sweep(system: &OpenSystem, grid: &[f64], mode: Mode) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(invalid("energy grid is empty"));
    }
    grid.iter().map(|&e| sweep_point(system, e, mode)).collect()
}

/// Scattering state inside the billiard for a wave incident in one channel.
#[derive(Debug, Clone)]
pub struct InteriorWavefunction {
    pub energy: f64,
    /// Incident channel (index into the channel table).
    pub incident: usize,
    /// Coefficients over the closed-billiard states.
    pub f_b: Vec<Complex64>,
    /// Coefficients over the biorthogonal `H_eff` eigenvectors.
    pub f_lambda: Vec<Complex64>,
    /// `psi_B` at every lattice site from `f_b`.
    pub samples: Vec<Complex64>,
    /// `psi_B` at every lattice site from `f_lambda`; `None` when the pole
    /// set is defective.
    pub samples_from_poles: Option<Vec<Complex64>>,
    pub poles: PoleSet,
}

impl InteriorWavefunction {
    /// Largest pointwise difference between the two expansions.
    pub fn expansion_mismatch(&self) -> Option<f64> {
        self.samples_from_poles
            .as_ref()
            .map(|p| p.iter().zip(&self.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// `|f_l|^2 / sum |f_m|^2` for each pole.
    pub fn pole_weights(&self) -> Vec<f64> {
        let total: f64 = self.f_lambda.iter().map(|z| z.norm_sqr()).sum();
        self.f_lambda.iter().map(|z| if total > 0.0 { z.norm_sqr() / total } else { 0.0 }).collect()
    }
}

/// `psi_B = G sum_c V_c` for a delta-normalized incoming wave
/// `e^{-iks} / sqrt(2 pi sin k)` on lead sites `s = 0, 1, ...`, which gives
/// `f = 2i e^{ik} sin k G W_c / sqrt(2 pi sin k)`.
pub fn interior_wavefunction(
    system: &OpenSystem,
    energy: f64,
    incident: usize,
    mode: Mode,
) -> Result<InteriorWavefunction> {
    let coupling = system.coupling();
    if incident >= coupling.n_channels() {
        return Err(invalid("incident channel out of range"));
    }
    let h = EffectiveHamiltonian::build(system, energy, mode, "")?;
    let ph = match h.phases()[incident] {
        Some(ph) if coupling.channels()[incident].is_open(energy) => ph,
        _ => return Err(Error::NoOpenChannel { energy }),
    };
    let lu = resolvent_lu(&h)?;
    let sin_k = ph.im;
    let amp = Complex64::new(0.0, 2.0) * ph * sin_k / libm::sqrt(2.0 * PI * sin_k);
    let rhs: Vec<Complex64> = coupling.column(incident).iter().map(|&w| amp * w).collect();
    let f_b = lu.solve_vec(&rhs)?;
    let poles = heff::eigensystem(&h)?;
    let n = f_b.len();
    let f_lambda: Vec<Complex64> = (0..poles.len()).map(|l| bilinear(&poles.right_eigvecs.column(l), &f_b)).collect();
    let amps = system.amplitudes();
    let sample = |coef: &[Complex64]| -> Vec<Complex64> {
        (0..amps.rows()).map(|x| (0..n).map(|b| coef[b] * amps[(x, b)]).sum()).collect()
    };
    let samples = sample(&f_b);
    let samples_from_poles = (!poles.is_defective()).then(|| {
        let back = poles.right_eigvecs.matvec(&f_lambda);
        sample(&back)
    });
    Ok(InteriorWavefunction { energy, incident, f_b, f_lambda, samples, samples_from_poles, poles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{LeadSpec, Side};
    use crate::geometry::Geometry;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chain(n: usize, vl: f64, vr: f64) -> OpenSystem {
        Geometry::Chain1d { sites: n, v_l: vl, v_r: vr }.open_system().unwrap()
    }

    #[test]
    fn ideal_contacts_transmit_fully() {
        for n in [1, 2, 5, 9] {
            let sys = chain(n, 1.0, 1.0);
            for i in 1..40 {
                let e = -2.0 + 4.0 * i as f64 / 40.0;
                let s = smatrix(&sys, e, Mode::AllChannels).unwrap();
                assert_abs_diff_eq!(s.t().unwrap().norm(), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(s.r().unwrap().norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn decoupled_gives_identity() {
        let s = smatrix(&chain(4, 0.0, 0.0), 0.3, Mode::OpenOnly).unwrap();
        assert_abs_diff_eq!(s.s.sub(&CMat::identity(2)).max_abs(), 0.0, epsilon = 1e-15);
        assert_eq!(s.conductance(), 0.0);
    }

    #[test]
    fn no_open_channel_error() {
        assert!(matches!(smatrix(&chain(3, 0.5, 0.5), 2.2, Mode::AllChannels), Err(Error::NoOpenChannel { .. })));
    }

    #[test]
    fn singular_resolvent_at_closed_level() {
        let r = smatrix(&chain(3, 0.0, 0.0), 0.0, Mode::AllChannels);
        assert!(matches!(r, Err(Error::SingularResolvent { .. })));
    }

    #[test]
    fn pole_expansion_matches_resolvent() {
        let sys = chain(6, 0.45, 0.8);
        for i in 0..200 {
            let e = -1.99 + 3.98 * (i as f64 + 0.5) / 200.0;
            let h = EffectiveHamiltonian::build(&sys, e, Mode::AllChannels, "").unwrap();
            let ps = heff::eigensystem(&h).unwrap();
            let a = smatrix_from_heff(&h, sys.coupling()).unwrap();
            let b = smatrix_pole_expansion(&h, sys.coupling(), &ps).unwrap();
            assert!(a.s.sub(&b.s).max_abs() < 1e-10, "E = {e}");
        }
    }

    #[test]
    fn pole_expansion_refuses_defective() {
        let g = Geometry::Dot2 { case: crate::geometry::DotCase::A, v_l: libm::sqrt(2.5), v_r: libm::sqrt(0.5) };
        let sys = g.open_system().unwrap();
        let h = EffectiveHamiltonian::build(&sys, 0.0, Mode::AllChannels, "").unwrap();
        let ps = heff::eigensystem(&h).unwrap();
        assert!(matches!(transmission_pole_expansion(&h, sys.coupling(), &ps), Err(Error::DefectivePoles)));
        assert!(smatrix_from_heff(&h, sys.coupling()).unwrap().unitarity_defect() < 1e-12);
    }

    #[test]
    fn sweep_flags() {
        let sys = chain(3, 0.4, 0.4);
        assert!(conductance_sweep(&sys, &[], Mode::AllChannels).is_err());
        let rows = conductance_sweep(&sys, &[-2.0 + 1e-13, -2.5, 0.3], Mode::AllChannels).unwrap();
        assert_eq!(rows[0].status, RowStatus::BandEdge);
        assert_eq!(rows[1].status, RowStatus::NoOpenChannel);
        assert_eq!(rows[2].status, RowStatus::Ok);
        assert_eq!(rows[2].open_channels, 2);
        assert_abs_diff_eq!(rows[2].conductance, rows[2].transmission[0], epsilon = 1e-15);

        let closed = chain(3, 0.0, 0.0);
        let rows = conductance_sweep(&closed, &[-1.0, 0.5, 1.5], Mode::AllChannels).unwrap();
        assert!(rows.iter().all(|r| r.conductance == 0.0));

        let face = Geometry::Slab3d { nx: 1, ny: 1, nz: 2, case: crate::coupling::SlabCase::FaceLead, v: 1.0 };
        let row = sweep_point(&face.open_system().unwrap(), 0.2, Mode::AllChannels).unwrap();
        assert_eq!(row.status, RowStatus::SingleLead);
    }

    #[test]
    fn resonance_peaks_follow_poles() {
        let sys = chain(5, 0.4, 0.4);
        let grid: Vec<f64> = (0..4001).map(|i| -1.999 + 3.998 * i as f64 / 4000.0).collect();
        let rows = conductance_sweep(&sys, &grid, Mode::AllChannels).unwrap();
        let mut peaks = Vec::new();
        for i in 1..rows.len() - 1 {
            if rows[i].conductance > rows[i - 1].conductance && rows[i].conductance >= rows[i + 1].conductance {
                peaks.push(rows[i].energy);
            }
        }
        assert_eq!(peaks.len(), 5);
        for &ep in &peaks {
            let h = EffectiveHamiltonian::build(&sys, ep, Mode::AllChannels, "").unwrap();
            let ps = heff::eigensystem(&h).unwrap();
            let near = ps.poles.iter().min_by(|a, b| (a.re - ep).abs().total_cmp(&(b.re - ep).abs())).unwrap();
            assert!((near.re - ep).abs() < -near.im, "peak {ep} pole {near}");
        }
    }

    #[test]
    fn interior_state_expansions_agree() {
        let sys = chain(7, 0.6, 0.9);
        let psi = interior_wavefunction(&sys, 0.5, 0, Mode::AllChannels).unwrap();
        assert!(psi.expansion_mismatch().unwrap() < 1e-10);
        let closed = interior_wavefunction(&chain(7, 0.0, 0.0), 0.5, 0, Mode::AllChannels).unwrap();
        assert!(closed.samples.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn on_resonance_single_pole_dominates() {
        let sys = chain(5, 0.1, 0.1);
        // Self-consistent resonance position of the level nearest E = 0.5.
        let mut e = 0.5;
        let mut target = 0;
        for _ in 0..20 {
            let h = EffectiveHamiltonian::build(&sys, e, Mode::AllChannels, "").unwrap();
            let ps = heff::eigensystem(&h).unwrap();
            target = (0..5).min_by(|&a, &b| (ps.poles[a].re - e).abs().total_cmp(&(ps.poles[b].re - e).abs())).unwrap();
            e = ps.poles[target].re;
        }
        let psi = interior_wavefunction(&sys, e, 0, Mode::AllChannels).unwrap();
        assert!(psi.pole_weights()[target] > 0.9);
    }

    #[test]
    fn rect_partial_leads_open_only_records_defect() {
        let g = Geometry::Rect2d {
            nx: 5,
            ny: 5,
            left: LeadSpec::new(Side::Left, 1, 4, 1.0),
            right: LeadSpec::new(Side::Right, 0, 3, 1.0),
        };
        let sys = g.open_system().unwrap();
        let s_all = smatrix(&sys, -0.3, Mode::AllChannels).unwrap();
        assert!(s_all.unitarity_defect() < 1e-10);
        assert!(s_all.symmetry_defect() < 1e-10);
        let s_open = smatrix(&sys, -0.3, Mode::OpenOnly).unwrap();
        assert!(s_open.symmetry_defect() < 1e-10);
    }

    proptest! {
        #[test]
        fn unitary_and_reciprocal(n in 1usize..30, vl in 0.05f64..3.0, vr in 0.05f64..3.0, e in -1.98f64..1.98) {
            let s = smatrix(&chain(n, vl, vr), e, Mode::AllChannels);
            if let Ok(s) = s {
                prop_assert!(s.unitarity_defect() < 1e-8);
                prop_assert!(s.symmetry_defect() < 1e-10);
            }
        }

        #[test]
        fn mirror_energy(n in 1usize..12, vl in 0.1f64..2.0, vr in 0.1f64..2.0, e in 0.01f64..1.98) {
            let sys = chain(n, vl, vr);
            if let (Ok(a), Ok(b)) = (smatrix(&sys, e, Mode::AllChannels), smatrix(&sys, -e, Mode::AllChannels)) {
                prop_assert!((a.t().unwrap().norm() - b.t().unwrap().norm()).abs() < 1e-10);
            }
        }
    }
}
