//! Closed-form amplitudes and poles used as exact references.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::invalid;
use crate::geometry::DotCase;
use crate::spectra;
use crate::{Error, Result};

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k < core::f64::consts::PI) {
        return Err(invalid(alloc::format!("k = {k} outside (0, pi)")));
    }
    Ok(())
}

/// Which end of the chain was decoupled when a limit was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLimit {
    LeftDecoupled,
    RightDecoupled,
}

/// Chain amplitudes in the incident-wave frame: `e^{ikj} + r e^{-ikj}` on
/// the left (`j <= 0`) and `t e^{ikj}` on the right (`j > N`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainAmplitudes {
    pub t: Complex64,
    pub r: Complex64,
    pub limit: Option<ChainLimit>,
}

/// `t = 4 sin^2 k / A` and the matching `r` for an `n`-site chain.
///
/// A vanishing coupling is handled as a limit: with `v_L = 0` the wave is
/// reflected by the hard wall at site 1, `r = -e^{2ik}`; with only `v_R = 0`
/// the finite left-coupled `r` is returned.
pub fn chain_rt(n: usize, v_l: f64, v_r: f64, k: f64) -> Result<ChainAmplitudes> {
    check_k(k)?;
    if n == 0 {
        return Err(invalid("chain needs at least one site"));
    }
    if !(v_l >= 0.0 && v_r >= 0.0) {
        return Err(invalid("couplings must be >= 0"));
    }
    let nf = n as f64;
    let e2 = cis(2.0 * k);
    let em2 = cis(-2.0 * k);
    let e2n = cis(2.0 * k * nf);
    let s = libm::sin(k);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if v_l == 0.0 {
        return Ok(ChainAmplitudes { t: zero, r: -e2, limit: Some(ChainLimit::LeftDecoupled) });
    }
    if v_r == 0.0 {
        let a = -(e2n * (v_l - 1.0 / v_l)) + (em2 * (-1.0 / v_l) + v_l);
        let r = (e2n - em2) * (4.0 * s * s) / ((one - em2) * v_l * a) - one;
        return Ok(ChainAmplitudes { t: zero, r, limit: Some(ChainLimit::RightDecoupled) });
    }
    let a = e2n * ((v_l - 1.0 / v_l) * (v_r - 1.0 / v_r)) - em2 * (e2 * v_l - 1.0 / v_l) * (e2 * v_r - 1.0 / v_r);
    let t = Complex64::new(4.0 * s * s, 0.0) / a;
    let r = t / ((one - em2) * v_l) * (em2 * (-1.0 / v_r) + v_r + e2n * (1.0 / v_r - v_r)) - one;
    Ok(ChainAmplitudes { t, r, limit: None })
}

/// Converts incident-wave-frame chain amplitudes to the resolvent frame
/// of [`crate::scattering`]: `t -> -e^{ik(N-1)} t`, `r -> -e^{-2ik} r`.
pub fn wave_to_resolvent_frame(n: usize, k: f64, t: Complex64, r: Complex64) -> (Complex64, Complex64) {
    let nf = n as f64;
    (-cis(k * (nf - 1.0)) * t, -cis(-2.0 * k) * r)
}

/// Inverse of [`wave_to_resolvent_frame`].
pub fn resolvent_to_wave_frame(n: usize, k: f64, t: Complex64, r: Complex64) -> (Complex64, Complex64) {
    let nf = n as f64;
    (-cis(-k * (nf - 1.0)) * t, -cis(2.0 * k) * r)
}

/// One-site dot, incident-wave frame: `t = -i v^2 sin k / (cos k - v^2 e^{ik})`.
pub fn dot1_transmission(v: f64, k: f64) -> Result<Complex64> {
    check_k(k)?;
    let v2 = v * v;
    Ok(Complex64::new(0.0, -v2 * libm::sin(k)) / (Complex64::new(libm::cos(k), 0.0) - cis(k) * v2))
}

/// The single pole `z_1 = -2 v^2 e^{ik}` of the one-site dot.
pub fn dot1_pole(v: f64, k: f64) -> Complex64 {
    -cis(k) * (2.0 * v * v)
}

/// Two-site dot; topology B is the same as A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSiteDotParams {
    pub v_l: f64,
    pub v_r: f64,
    pub case: DotCase,
}

impl TwoSiteDotParams {
    pub fn new(v_l: f64, v_r: f64, case: DotCase) -> Self {
        TwoSiteDotParams { v_l, v_r, case }
    }

    fn phase(energy: f64) -> Complex64 {
        spectra::channel_momentum(energy, 0.0).phase
    }

    /// `lambda = (v_L^2 + v_R^2) e^{ik} / 2`.
    pub fn lambda(&self, energy: f64) -> Complex64 {
        Self::phase(energy) * (0.5 * (self.v_l * self.v_l + self.v_r * self.v_r))
    }

    /// `mu = (v_L^2 - v_R^2) e^{ik} / 2`.
    pub fn mu(&self, energy: f64) -> Complex64 {
        Self::phase(energy) * (0.5 * (self.v_l * self.v_l - self.v_r * self.v_r))
    }

    /// Distance from the coalescence condition: `|E| + ||mu| - 1|` for A,
    /// `|E| + ||lambda| - 1|` for C.
    pub fn double_pole_residual(&self, energy: f64) -> f64 {
        let m = match self.case {
            DotCase::A => self.mu(energy).norm(),
            DotCase::C => self.lambda(energy).norm(),
        };
        energy.abs() + (m - 1.0).abs()
    }
}

/// Poles of the two-site dot: `-lambda +- sqrt(1 + mu^2)` (A) or
/// `-lambda +- sqrt(1 + lambda^2)` (C), principal square root, `+` first.
pub fn dot2_poles(params: &TwoSiteDotParams, energy: f64) -> Result<(Complex64, Complex64)> {
    if energy.abs() >= 2.0 {
        return Err(Error::NoOpenChannel { energy });
    }
    let lambda = params.lambda(energy);
    let inner = match params.case {
        DotCase::A => params.mu(energy),
        DotCase::C => lambda,
    };
    let root = (Complex64::new(1.0, 0.0) + inner * inner).sqrt();
    Ok((-lambda + root, -lambda - root))
}

/// Resolvent-frame transmission of the two-site dot:
/// `2i v_L v_R sin k / ((E - z_1)(E - z_2))` (A) and
/// `-2i v_L v_R E sin k / ((E - z_1)(E - z_2))` (C).
pub fn dot2_transmission(params: &TwoSiteDotParams, energy: f64) -> Result<Complex64> {
    let (z1, z2) = dot2_poles(params, energy)?;
    let s = libm::sqrt(1.0 - energy * energy / 4.0);
    let e = Complex64::new(energy, 0.0);
    let num = match params.case {
        DotCase::A => Complex64::new(0.0, 2.0 * params.v_l * params.v_r * s),
        DotCase::C => Complex64::new(0.0, -2.0 * params.v_l * params.v_r * energy * s),
    };
    Ok(num / ((e - z1) * (e - z2)))
}

/// A pole from a secular-equation solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleRoot {
    pub z: Complex64,
    /// `|1 - omega sum_g w_g / (E_g - z)|`; zero for unshifted levels.
    pub residual: f64,
    /// False for levels left at their closed value (zero weight at the
    /// contact, or the surplus members of a degenerate group).
    pub shifted: bool,
}

struct Groups {
    energies: Vec<f64>,
    weights: Vec<f64>,
    unshifted: Vec<f64>,
}

fn group_levels(energies: &[f64], amplitudes: &[f64]) -> Groups {
    let mut idx: Vec<usize> = (0..energies.len()).collect();
    idx.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let mut g = Groups { energies: Vec::new(), weights: Vec::new(), unshifted: Vec::new() };
    let mut i = 0;
    while i < idx.len() {
        let e0 = energies[idx[i]];
        let mut j = i;
        let mut w = 0.0;
        while j < idx.len() && (energies[idx[j]] - e0).abs() <= 1e-12 * (1.0 + e0.abs()) {
            w += amplitudes[idx[j]] * amplitudes[idx[j]];
            j += 1;
        }
        let members = j - i;
        if w > 1e-28 {
            g.energies.push(e0);
            g.weights.push(w);
            g.unshifted.extend(core::iter::repeat_n(e0, members - 1));
        } else {
            g.unshifted.extend(core::iter::repeat_n(e0, members));
        }
        i = j;
    }
    g
}

fn secular(g: &Groups, omega: Complex64, z: Complex64) -> (Complex64, Complex64) {
    let mut f = Complex64::new(1.0, 0.0);
    let mut df = Complex64::new(0.0, 0.0);
    for (e, w) in g.energies.iter().zip(&g.weights) {
        let d = Complex64::new(*e, 0.0) - z;
        f -= omega * *w / d;
        df -= omega * *w / (d * d);
    }
    (f, df)
}

/// Roots of `prod_g (E_g - z) (1 - omega sum_g w_g / (E_g - z))` by Aberth
/// iteration.
fn aberth(g: &Groups, omega: Complex64) -> Result<Vec<Complex64>> {
    let m = g.energies.len();
    let mut z: Vec<Complex64> = (0..m)
        .map(|i| {
            let jitter = Complex64::new(1e-3, 7e-4) * (1.0 + i as f64) * (1.0 + omega.norm());
            Complex64::new(g.energies[i], 0.0) - omega * g.weights[i] + jitter * 1e-3
        })
        .collect();
    let scale = 1.0 + g.energies.iter().fold(0.0f64, |a, e| a.max(e.abs())) + omega.norm();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let (f, df) = secular(g, omega, z[i]);
            // P'/P = sum_g -1/(E_g - z) + f'/f.
            let mut dlog = df / f;
            for e in &g.energies {
                dlog -= Complex64::new(1.0, 0.0) / (Complex64::new(*e, 0.0) - z[i]);
            }
            let newton = Complex64::new(1.0, 0.0) / dlog;
            let mut rep = Complex64::new(0.0, 0.0);
            for j in 0..m {
                if j != i {
                    rep += Complex64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let step = newton / (Complex64::new(1.0, 0.0) - newton * rep);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                worst = worst.max(step.norm());
            }
        }
        if worst < 1e-15 * scale {
            return Ok(z);
        }
    }
    let residual = z.iter().map(|&x| secular(g, omega, x).0.norm()).fold(0.0, f64::max);
    if residual < 1e-10 {
        Ok(z)
    } else {
        Err(Error::RootNotConverged { residual })
    }
}

fn finish(g: &Groups, roots: Vec<(Complex64, f64)>) -> Vec<PoleRoot> {
    let mut out: Vec<PoleRoot> =
        roots.into_iter().map(|(z, residual)| PoleRoot { z, residual, shifted: true }).collect();
    out.extend(g.unshifted.iter().map(|&e| PoleRoot { z: Complex64::new(e, 0.0), residual: 0.0, shifted: false }));
    out.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
    out
}

/// Poles of a billiard with both point leads on one site `j_0`, at fixed
/// real energy: roots of `1 - omega sum_b psi_b(j_0)^2 / (E_b - z) = 0`,
/// `omega = (v_L^2 + v_R^2) e^{ik(E)}`. Returns one pole per state.
pub fn point_contact_pole_roots(
    energies: &[f64],
    psi_j0: &[f64],
    v_l: f64,
    v_r: f64,
    energy: f64,
) -> Result<Vec<PoleRoot>> {
    if energies.len() != psi_j0.len() {
        return Err(invalid("energies and contact amplitudes differ in length"));
    }
    let g = group_levels(energies, psi_j0);
    let omega = spectra::channel_momentum(energy, 0.0).phase * (v_l * v_l + v_r * v_r);
    let roots = aberth(&g, omega)?;
    Ok(finish(&g, roots.into_iter().map(|z| (z, secular(&g, omega, z).0.norm())).collect()))
}

/// As [`point_contact_pole_roots`] but with `e^{ik}` evaluated at the pole
/// itself (continued to complex energy), so that `z` is a true resolvent pole.
///
/// Each root is found by fixed-point iteration on the fixed-`omega` roots,
/// seeded from `E_b`, with a Newton fallback on the scalar secular function.
pub fn point_contact_poles_self_consistent(
    energies: &[f64],
    psi_j0: &[f64],
    v_l: f64,
    v_r: f64,
) -> Result<Vec<PoleRoot>> {
    if energies.len() != psi_j0.len() {
        return Err(invalid("energies and contact amplitudes differ in length"));
    }
    let g = group_levels(energies, psi_j0);
    let strength = v_l * v_l + v_r * v_r;
    let omega_at = |z: Complex64| spectra::continued_phase(z, 0.0) * strength;
    let mut out = Vec::with_capacity(g.energies.len());
    for (i, &eb) in g.energies.iter().enumerate() {
        let mut z = Complex64::new(eb, 0.0);
        let mut converged = false;
        for _ in 0..200 {
            let roots = aberth(&g, omega_at(z))?;
            let next = if converged {
                z
            } else {
                // Follow the root belonging to level `i`: nearest to the current iterate.
                *roots.iter().min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm())).unwrap_or(&roots[i])
            };
            if (next - z).norm() < 1e-14 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
            z = next;
        }
        if !converged {
            z = newton_self_consistent(&g, &omega_at, z)?;
        }
        out.push((z, secular(&g, omega_at(z), z).0.norm()));
    }
    Ok(finish(&g, out))
}

fn newton_self_consistent(
    g: &Groups,
    omega_at: &dyn Fn(Complex64) -> Complex64,
    mut z: Complex64,
) -> Result<Complex64> {
    let f = |z: Complex64| secular(g, omega_at(z), z).0;
    for _ in 0..100 {
        let h = 1e-7 * (1.0 + z.norm());
        let d = (f(z + h) - f(z - h)) / (2.0 * h);
        let step = f(z) / d;
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    let residual = f(z).norm();
    if residual < 1e-10 {
        Ok(z)
    } else {
        Err(Error::RootNotConverged { residual })
    }
}

/// Two poles of an `N_z = 2` slab block:
/// `E_b - (v^2/2) e^{ik_b} +- sqrt(1 + (v^4/4) e^{2ik_b})`, `+` first.
pub fn slab_poles(e_b: f64, v: f64, energy: f64) -> (Complex64, Complex64) {
    let ph = spectra::channel_momentum(energy, e_b).phase;
    let v2 = v * v;
    let centre = Complex64::new(e_b, 0.0) - ph * (v2 / 2.0);
    let root = (Complex64::new(1.0, 0.0) + ph * ph * (v2 * v2 / 4.0)).sqrt();
    (centre + root, centre - root)
}

/// Distance from the slab coalescence `v^2 = 2, E = E_b`.
pub fn slab_double_pole_residual(e_b: f64, v: f64, energy: f64) -> f64 {
    (v * v - 2.0).abs() + (energy - e_b).abs()
}

/// True at the slab double pole (within `tol` of the condition).
pub fn slab_is_double_pole(e_b: f64, v: f64, energy: f64, tol: f64) -> bool {
    slab_double_pole_residual(e_b, v, energy) < tol
}

/// `(k, |t(v, v)|, |t(1/v, 1/v)|)` on a `k` grid, for comparing a chain with
/// its inverted couplings.
pub fn duality_table(n: usize, v: f64, ks: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    ks.iter().map(|&k| Ok((k, chain_rt(n, v, v, k)?.t.norm(), chain_rt(n, 1.0 / v, 1.0 / v, k)?.t.norm()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::heff::{self, EffectiveHamiltonian, Mode};
    use crate::scattering;
    use crate::spectra::RectSpectrum2D;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ideal_chain() {
        for n in [1, 2, 7] {
            for i in 1..20 {
                let a = chain_rt(n, 1.0, 1.0, PI * i as f64 / 20.0).unwrap();
                assert_abs_diff_eq!(a.t.norm(), 1.0, epsilon = 1e-13);
                assert_abs_diff_eq!(a.r.norm(), 0.0, epsilon = 1e-13);
            }
        }
        assert!(chain_rt(3, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn decoupled_limits_are_continuous() {
        let k = 0.9;
        let l = chain_rt(4, 0.0, 0.7, k).unwrap();
        assert_eq!(l.limit, Some(ChainLimit::LeftDecoupled));
        let near = chain_rt(4, 1e-9, 0.7, k).unwrap();
        assert!((near.r - l.r).norm() < 1e-6);

        let r = chain_rt(4, 0.6, 0.0, k).unwrap();
        assert_eq!(r.limit, Some(ChainLimit::RightDecoupled));
        let near = chain_rt(4, 0.6, 1e-9, k).unwrap();
        assert!((near.r - r.r).norm() < 1e-6);
        assert_abs_diff_eq!(r.r.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chain_matches_pipeline() {
        let (n, vl, vr, e) = (5, 0.5, 0.7, 0.3);
        let k = libm::acos(-e / 2.0);
        let a = chain_rt(n, vl, vr, k).unwrap();
        let (t, r) = wave_to_resolvent_frame(n, k, a.t, a.r);
        let sys = Geometry::Chain1d { sites: n, v_l: vl, v_r: vr }.open_system().unwrap();
        let s = scattering::smatrix(&sys, e, Mode::AllChannels).unwrap();
        assert_abs_diff_eq!((s.t().unwrap() - t).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((s.r().unwrap() - r).norm(), 0.0, epsilon = 1e-12);
        let (t2, r2) = resolvent_to_wave_frame(n, k, t, r);
        assert_abs_diff_eq!((t2 - a.t).norm() + (r2 - a.r).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dot1_examples() {
        assert_abs_diff_eq!((dot1_transmission(1.0, FRAC_PI_2).unwrap() - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert!(dot1_transmission(1e-8, 1.0).unwrap().norm() < 1e-15);
        for &(v, k) in &[(0.3, 0.4), (1.0, 2.0), (1.7, 1.2)] {
            let sys = Geometry::Chain1d { sites: 1, v_l: v, v_r: v }.open_system().unwrap();
            let e = -2.0 * libm::cos(k);
            let s = scattering::smatrix(&sys, e, Mode::AllChannels).unwrap();
            let (t, _) = resolvent_to_wave_frame(1, k, s.t().unwrap(), s.r().unwrap());
            assert_abs_diff_eq!((t - dot1_transmission(v, k).unwrap()).norm(), 0.0, epsilon = 1e-12);
            // Single-pole expansion.
            let z = dot1_pole(v, k);
            let t_pole = c(0.0, -2.0 * libm::sin(k) * v * v) / (c(e, 0.0) - z);
            assert_abs_diff_eq!((t_pole - s.t().unwrap()).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dot2_examples() {
        let p = TwoSiteDotParams::new(0.8, 0.8, DotCase::A);
        let (z1, z2) = dot2_poles(&p, 0.4).unwrap();
        let l = p.lambda(0.4);
        assert_abs_diff_eq!((z1 - (-l + 1.0)).norm() + (z2 - (-l - 1.0)).norm(), 0.0, epsilon = 1e-15);

        let p = TwoSiteDotParams::new(libm::sqrt(2.5), libm::sqrt(0.5), DotCase::A);
        let (z1, z2) = dot2_poles(&p, 0.0).unwrap();
        assert_abs_diff_eq!((z1 - z2).norm(), 0.0, epsilon = 1e-7);
        assert!(p.double_pole_residual(0.0) < 1e-15);

        let p = TwoSiteDotParams::new(libm::sqrt(1.2), libm::sqrt(0.8), DotCase::C);
        let (z1, z2) = dot2_poles(&p, 0.0).unwrap();
        assert_abs_diff_eq!((z1 - z2).norm(), 0.0, epsilon = 1e-7);
        assert!(p.double_pole_residual(0.0) < 1e-15);
        assert_eq!(dot2_transmission(&p, 0.0).unwrap().norm(), 0.0);

        let p = TwoSiteDotParams::new(0.8, 0.8, DotCase::A);
        assert!(dot2_transmission(&p, 1.999999).unwrap().norm() < 1e-2);
        assert!(dot2_transmission(&p, -1.999999).unwrap().norm() < 1e-2);
    }

    #[test]
    fn dot2_matches_pipeline() {
        for case in [DotCase::A, DotCase::C] {
            let p = TwoSiteDotParams::new(0.6, 1.1, case);
            let sys = Geometry::Dot2 { case, v_l: 0.6, v_r: 1.1 }.open_system().unwrap();
            for i in 0..60 {
                let e = -1.97 + 3.94 * i as f64 / 59.0;
                let s = scattering::smatrix(&sys, e, Mode::AllChannels).unwrap();
                let t = dot2_transmission(&p, e).unwrap();
                assert_abs_diff_eq!((s.t().unwrap() - t).norm(), 0.0, epsilon = 1e-12);
                let h = EffectiveHamiltonian::build(&sys, e, Mode::AllChannels, "").unwrap();
                let ps = heff::eigensystem(&h).unwrap();
                let (z1, z2) = dot2_poles(&p, e).unwrap();
                let mut want = [z1, z2];
                want.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                for (a, b) in ps.poles.iter().zip(want) {
                    assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn point_contact_single_state() {
        let r = point_contact_pole_roots(&[0.3], &[0.6], 0.5, 0.5, 0.1).unwrap();
        let omega = spectra::channel_momentum(0.1, 0.0).phase * 0.5;
        assert_abs_diff_eq!((r[0].z - (c(0.3, 0.0) - omega * 0.36)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn point_contact_matches_eigensystem() {
        let rect = RectSpectrum2D::new(4, 4).unwrap();
        let energies = rect.energies();
        let j0 = (2, 3);
        let amps: Vec<f64> = (0..16).map(|b| rect.psi(b, j0.0, j0.1)).collect();
        for &v in &[0.2, 0.5, 1.0, 2.0] {
            for &e in &[-1.3, 0.0, 0.7] {
                let roots = point_contact_pole_roots(&energies, &amps, v, 0.8 * v, e).unwrap();
                let h = heff::build_heff_point_contact(&rect, j0, j0, v, 0.8 * v, e, Mode::OpenOnly).unwrap();
                let ps = heff::eigensystem(&h).unwrap();
                assert_eq!(roots.len(), ps.len());
                let mut used = [false; 16];
                for r in &roots {
                    let (j, d) = ps
                        .poles
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| !used[*j])
                        .map(|(j, p)| (j, (p - r.z).norm()))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap();
                    used[j] = true;
                    assert!(d < 1e-9, "v={v} e={e}: {} off by {d}", r.z);
                }
            }
        }
        let roots = point_contact_pole_roots(&energies, &amps, 1e-6, 1e-6, 0.3).unwrap();
        for (r, e) in roots.iter().zip({
            let mut s = energies.clone();
            s.sort_by(f64::total_cmp);
            s
        }) {
            assert!((r.z - e).norm() < 1e-10);
        }
    }

    #[test]
    fn point_contact_self_consistent_is_a_pole() {
        let rect = RectSpectrum2D::new(3, 2).unwrap();
        let energies = rect.energies();
        let amps: Vec<f64> = (0..6).map(|b| rect.psi(b, 2, 1)).collect();
        let roots = point_contact_poles_self_consistent(&energies, &amps, 0.5, 0.4).unwrap();
        let w = crate::coupling::coupling_point_contact(&rect, (2, 1), (2, 1), 0.5, 0.4).unwrap();
        for r in roots.iter().filter(|r| r.shifted) {
            assert!(r.residual < 1e-10);
            // Levels outside the band become real bound states.
            assert!(r.z.im <= 1e-12);
            let h = heff::heff_at_complex(&energies, &w, r.z);
            let ps = heff::pole_set(&h).unwrap();
            let d = ps.poles.iter().map(|p| (p - r.z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9);
        }
    }

    #[test]
    fn slab_examples() {
        let (zp, zm) = slab_poles(0.4, libm::sqrt(2.0), 0.4);
        assert_abs_diff_eq!((zp - c(0.4, -1.0)).norm(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!((zm - c(0.4, -1.0)).norm(), 0.0, epsilon = 1e-7);
        assert!(slab_is_double_pole(0.4, libm::sqrt(2.0), 0.4, 1e-12));
        let (zp, zm) = slab_poles(-0.7, 0.0, 0.1);
        assert_abs_diff_eq!((zp - c(0.3, 0.0)).norm() + (zm - c(-1.7, 0.0)).norm(), 0.0, epsilon = 1e-15);

        let cross = RectSpectrum2D::new(2, 3).unwrap();
        let (v, e) = (0.9, 0.25);
        let h =
            heff::build_heff_slab3d(&cross, 2, crate::coupling::SlabCase::FaceLead, v, e, Mode::AllChannels).unwrap();
        let ps = heff::eigensystem(&h).unwrap();
        let mut want = Vec::new();
        for st in cross.states() {
            let (a, b) = slab_poles(st.energy, v, e);
            want.push(a);
            want.push(b);
        }
        for (x, y) in sorted(want).iter().zip(&ps.poles) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn duality_is_not_pointwise() {
        let ks: Vec<f64> = (1..10).map(|i| 0.3 * i as f64).collect();
        let tab = duality_table(5, 0.3, &ks).unwrap();
        assert!(tab.iter().any(|&(_, a, b)| (a - b).abs() > 1e-3));
    }

    proptest! {
        #[test]
        fn flux_conserved(n in 1usize..20, vl in 0.01f64..4.0, vr in 0.01f64..4.0, k in 0.01f64..3.13) {
            let a = chain_rt(n, vl, vr, k).unwrap();
            prop_assert!((a.t.norm_sqr() + a.r.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }
}
