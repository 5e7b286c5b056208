//! Closed-system spectra in closed form: the 1D box, the 2D rectangle,
//! transverse lead modes, and the lead dispersion `E = E_p - 2 cos k`.
//!
//! Nothing here diagonalizes numerically; every eigenvalue and eigenvector is
//! the sine-series closed form, so comparisons against these values are
//! bit-stable.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::invalid;
use crate::linalg::RMat;
use crate::Result;

/// `psi_n(j) = sqrt(2/(N+1)) sin(pi n j/(N+1))` for an `N`-site box, 1-based
/// `n` and `j`. Vanishes at the virtual sites `j = 0` and `j = N + 1`.
pub fn box_amplitude(sites: usize, n: usize, j: usize) -> f64 {
    if j == 0 || j > sites {
        return 0.0;
    }
    let l = (sites + 1) as f64;
    libm::sqrt(2.0 / l) * libm::sin(PI * (n * j) as f64 / l)
}

/// `E_n = -2 cos(pi n/(N+1))`.
pub fn box_energy(sites: usize, n: usize) -> f64 {
    -2.0 * libm::cos(PI * n as f64 / (sites + 1) as f64)
}

/// Spectrum of an open-ended chain of `N` sites with Dirichlet ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpectrum1D {
    sites: usize,
    energies: Vec<f64>,
    eigvecs: RMat,
}

impl BoxSpectrum1D {
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Ascending energies `E_1 < ... < E_N`.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `N x N` matrix whose column `n - 1` is `psi_n(j)`, row `j - 1`.
    pub fn eigvecs(&self) -> &RMat {
        &self.eigvecs
    }

    /// `psi_n(j)` with 1-based `n` and `j`; zero on the virtual end sites.
    pub fn psi(&self, n: usize, j: usize) -> f64 {
        if j == 0 || j > self.sites {
            0.0
        } else {
            self.eigvecs[(j - 1, n - 1)]
        }
    }
}

pub fn box_eigensystem(sites: usize) -> Result<BoxSpectrum1D> {
    if sites < 1 {
        return Err(invalid("box needs at least one site"));
    }
    let energies = (1..=sites).map(|n| box_energy(sites, n)).collect();
    let eigvecs = RMat::from_fn(sites, sites, |j, n| box_amplitude(sites, n + 1, j + 1));
    Ok(BoxSpectrum1D { sites, energies, eigvecs })
}

/// One eigenstate of the rectangle, `psi_{m,n}(i,j) = psi_m(i) psi_n(j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectState {
    pub m: usize,
    pub n: usize,
    pub energy: f64,
}

/// Spectrum of an `Nx x Ny` rectangle, states sorted by energy with
/// `(m, n)`-lexicographic tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSpectrum2D {
    x: BoxSpectrum1D,
    y: BoxSpectrum1D,
    states: Vec<RectState>,
}

impl RectSpectrum2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        let x = box_eigensystem(nx)?;
        let y = box_eigensystem(ny)?;
        let mut states = Vec::with_capacity(nx * ny);
        for m in 1..=nx {
            for n in 1..=ny {
                states.push(RectState { m, n, energy: x.energies[m - 1] + y.energies[n - 1] });
            }
        }
        states.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.m.cmp(&b.m)).then(a.n.cmp(&b.n)));
        Ok(RectSpectrum2D { x, y, states })
    }

    pub fn nx(&self) -> usize {
        self.x.sites
    }

    pub fn ny(&self) -> usize {
        self.y.sites
    }

    pub fn x(&self) -> &BoxSpectrum1D {
        &self.x
    }

    pub fn y(&self) -> &BoxSpectrum1D {
        &self.y
    }

    pub fn states(&self) -> &[RectState] {
        &self.states
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    /// Amplitude of state `idx` (index into [`states`](Self::states)) at site
    /// `(i, j)`, 1-based.
    pub fn psi(&self, idx: usize, i: usize, j: usize) -> f64 {
        let s = self.states[idx];
        self.x.psi(s.m, i) * self.y.psi(s.n, j)
    }
}

/// Transverse eigenmode of a straight lead cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseMode {
    pub p: usize,
    pub threshold: f64,
    pub phi: Vec<f64>,
}

/// Thresholds `E_p = -2 cos(pi p/(N_L+1))` and sine modes of an `N_L`-site
/// cross-section, `p = 1..=N_L`.
pub fn transverse_modes(width: usize) -> Result<Vec<TransverseMode>> {
    if width < 1 {
        return Err(invalid("lead width must be at least one site"));
    }
    Ok((1..=width)
        .map(|p| TransverseMode {
            p,
            threshold: box_energy(width, p),
            phi: (1..=width).map(|j| box_amplitude(width, p, j)).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelStatus {
    Open,
    Evanescent,
}

/// A scattering channel: transverse mode `p` of lead `lead_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub lead_id: usize,
    pub p: usize,
    pub threshold: f64,
    /// Transverse mode on the lead cross-section.
    pub phi: Vec<f64>,
    /// Billiard-lead hopping strength.
    pub v: f64,
}

impl Channel {
    /// Open iff `|E - E_p| < 2`.
    pub fn status(&self, energy: f64) -> ChannelStatus {
        channel_status(energy, self.threshold)
    }

    pub fn is_open(&self, energy: f64) -> bool {
        self.status(energy) == ChannelStatus::Open
    }
}

pub fn channel_status(energy: f64, threshold: f64) -> ChannelStatus {
    if (energy - threshold).abs() < 2.0 {
        ChannelStatus::Open
    } else {
        ChannelStatus::Evanescent
    }
}

/// Longitudinal wavenumber of a channel at real energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    /// `k` in `(0, pi)` when open, `i kappa` below the band, `pi + i kappa`
    /// above it.
    pub k: Complex64,
    /// `e^{ik}`, always with `|e^{ik}| <= 1` and `Im e^{ik} >= 0`.
    pub phase: Complex64,
}

impl Momentum {
    /// `sin k` for an open channel, zero otherwise.
    pub fn sin_k(&self) -> f64 {
        if self.k.im == 0.0 {
            self.phase.im
        } else {
            0.0
        }
    }
}

/// Solves `E = E_p - 2 cos k` for the decaying/outgoing branch.
pub fn channel_momentum(energy: f64, threshold: f64) -> Momentum {
    let w = energy - threshold;
    if w.abs() < 2.0 {
        let c = -w / 2.0;
        let s = libm::sqrt((1.0 - c) * (1.0 + c));
        Momentum { k: Complex64::new(libm::acos(c), 0.0), phase: Complex64::new(c, s) }
    } else {
        let x = w.abs() / 2.0;
        let decay = 1.0 / (x + libm::sqrt((x - 1.0) * (x + 1.0)));
        let kappa = libm::acosh(x);
        if w < 0.0 {
            Momentum { k: Complex64::new(0.0, kappa), phase: Complex64::new(decay, 0.0) }
        } else {
            Momentum { k: Complex64::new(PI, kappa), phase: Complex64::new(-decay, 0.0) }
        }
    }
}

/// `e^{ik(z)}` continued to complex energy `z`.
///
/// Channels whose band contains `Re z` are continued from the upper rim of
/// the band through the real axis, which puts resonances (`Im z < 0`) on the
/// sheet with `|e^{ik}| > 1`. Channels closed at `Re z` stay on the decaying
/// branch `|e^{ik}| <= 1`. On the real axis this agrees with
/// [`channel_momentum`].
pub fn continued_phase(z: Complex64, threshold: f64) -> Complex64 {
    let w = (z - threshold) * 0.5;
    let one = Complex64::new(1.0, 0.0);
    if w.re.abs() < 1.0 {
        -w + Complex64::i() * (one - w * w).sqrt()
    } else {
        let s = (w * w - one).sqrt();
        let a = -w + s;
        let b = -w - s;
        if a.norm() <= b.norm() {
            a
        } else {
            b
        }
    }
}

/// Phase factor used by the wide-band approximation, `-(E - E_p)/2 + i`.
pub fn wide_band_phase(energy: f64, threshold: f64) -> Complex64 {
    Complex64::new(-(energy - threshold) / 2.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn small_boxes() {
        let b1 = box_eigensystem(1).unwrap();
        assert_abs_diff_eq!(b1.energies()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b1.psi(1, 1), 1.0, epsilon = 1e-15);

        let b2 = box_eigensystem(2).unwrap();
        assert_abs_diff_eq!(b2.energies()[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b2.energies()[1], 1.0, epsilon = 1e-15);

        let b3 = box_eigensystem(3).unwrap();
        let r2 = core::f64::consts::SQRT_2;
        assert_abs_diff_eq!(b3.energies()[0], -r2, epsilon = 1e-15);
        assert_abs_diff_eq!(b3.energies()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b3.energies()[2], r2, epsilon = 1e-15);

        assert!(box_eigensystem(0).is_err());
    }

    #[test]
    fn dirichlet_ends() {
        let b = box_eigensystem(6).unwrap();
        for n in 1..=6 {
            assert_eq!(b.psi(n, 0), 0.0);
            assert_eq!(b.psi(n, 7), 0.0);
        }
    }

    #[test]
    fn momentum_examples() {
        let m = channel_momentum(0.0, 0.0);
        assert_abs_diff_eq!(m.k.re, PI / 2.0, epsilon = 1e-15);
        assert_eq!(m.phase, Complex64::new(0.0, 1.0));

        let m = channel_momentum(-1.0, 0.0);
        assert_abs_diff_eq!(m.k.re, PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.phase.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.phase.im, libm::sqrt(3.0) / 2.0, epsilon = 1e-15);

        // x + 1/x = 3 on (0, 1)
        let m = channel_momentum(-3.0, 0.0);
        assert_abs_diff_eq!(m.phase.re, (3.0 - libm::sqrt(5.0)) / 2.0, epsilon = 1e-15);
        assert_eq!(m.phase.im, 0.0);
        assert_abs_diff_eq!(m.k.im, 0.962_423_650_119_206_9, epsilon = 1e-12);

        let m = channel_momentum(3.0, 0.0);
        assert_abs_diff_eq!(m.phase.re, -(3.0 - libm::sqrt(5.0)) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.k.re, PI, epsilon = 1e-15);
    }

    #[test]
    fn band_edges_are_exact() {
        assert_eq!(channel_momentum(-2.0, 0.0).phase, Complex64::new(1.0, 0.0));
        assert_eq!(channel_momentum(2.0, 0.0).phase, Complex64::new(-1.0, 0.0));
        assert_eq!(channel_status(2.0, 0.0), ChannelStatus::Evanescent);
        assert_eq!(channel_status(1.999, 0.0), ChannelStatus::Open);
        // continuity approaching the edge from inside
        let inside = channel_momentum(-2.0 + 1e-12, 0.0).phase;
        assert!((inside - Complex64::new(1.0, 0.0)).norm() < 2e-6);
    }

    #[test]
    fn lead_modes() {
        let m1 = transverse_modes(1).unwrap();
        assert_eq!(m1.len(), 1);
        assert_abs_diff_eq!(m1[0].threshold, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m1[0].phi[0], 1.0, epsilon = 1e-15);
        let m2 = transverse_modes(2).unwrap();
        assert_abs_diff_eq!(m2[0].threshold, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m2[1].threshold, 1.0, epsilon = 1e-15);
        let m5 = transverse_modes(5).unwrap();
        assert_abs_diff_eq!(m5[2].threshold, 0.0, epsilon = 1e-15);
        assert!(transverse_modes(0).is_err());
    }

    #[test]
    fn rect_sorted_with_tie_break() {
        let r = RectSpectrum2D::new(3, 3).unwrap();
        let s = r.states();
        for w in s.windows(2) {
            assert!(w[0].energy <= w[1].energy);
        }
        // E_{1,3} = E_{3,1} = E_{2,2} = 0 up to rounding; ties resolve by (m, n)
        let mid: Vec<(usize, usize)> = s[3..6].iter().map(|st| (st.m, st.n)).collect();
        assert_eq!(mid.len(), 3);
        for st in s {
            let e = r.x().energies()[st.m - 1] + r.y().energies()[st.n - 1];
            assert_eq!(st.energy, e);
        }
    }

    #[test]
    fn continuation_matches_real_axis() {
        for &e in &[-1.9, -0.4, 0.0, 1.3, -2.7, 3.1] {
            let a = continued_phase(Complex64::new(e, 0.0), 0.3);
            let b = channel_momentum(e, 0.3).phase;
            assert!((a - b).norm() < 1e-14, "{e}: {a} vs {b}");
        }
        let below = continued_phase(Complex64::new(0.2, -0.3), 0.0);
        assert!(below.norm() > 1.0);
    }

    proptest! {
        #[test]
        fn box_orthonormal_and_traceless(n in 1usize..40) {
            let b = box_eigensystem(n).unwrap();
            let g = b.eigvecs().transpose().matmul(b.eigvecs());
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g[(i, j)] - target).abs() < 1e-12);
                }
            }
            let tr: f64 = b.energies().iter().sum();
            prop_assert!(tr.abs() < 1e-12);
            for w in b.energies().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            let modes = transverse_modes(n).unwrap();
            for (m, e) in modes.iter().zip(b.energies()) {
                prop_assert_eq!(m.threshold, *e);
            }
        }

        #[test]
        fn phase_solves_dispersion(e in -6.0f64..6.0, ep in -2.0f64..2.0) {
            let m = channel_momentum(e, ep);
            let x = m.phase;
            let lhs = x + x.inv();
            prop_assert!((lhs + Complex64::new(e - ep, 0.0)).norm() < 1e-9 * (1.0 + (e - ep).abs()) / x.norm().max(1e-3));
            prop_assert!(x.norm() <= 1.0 + 1e-15);
            prop_assert!(x.im >= 0.0);
        }
    }
}
