//! `validate`: pipeline against the lattice oracle and the closed forms.
//!
//! Every check is reported with its tolerance and the largest deviation
//! seen over the energy grid. Checks of an approximate mode (open-only,
//! wide-band) against the exact oracle are informational.

use tbscatter::analytic::{self, TwoSiteDotParams};
use tbscatter::coupling::SlabCase;
use tbscatter::heff;
use tbscatter::oracle;
use tbscatter::scattering::{self, BAND_EDGE_GUARD};
use tbscatter::spectra::{self, RectSpectrum2D};
use tbscatter::{Complex64, EffectiveHamiltonian, Error, Geometry, Mode, OpenSystem, PoleSet};

use crate::config::{GridConfig, RunConfig, ValidateConfig};
use crate::table::{Cell, Table};
use crate::CliError;

/// Energies used when the config has no `[grid]`.
pub const DEFAULT_GRID: GridConfig = GridConfig { min: -1.9, max: 1.9, count: 39 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
    Skipped,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub deviation: f64,
    pub informational: bool,
    pub skipped: Option<String>,
    /// Grid energies the check actually ran on.
    pub samples: usize,
}

impl Check {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Check { name: name.into(), tolerance, deviation: 0.0, informational: false, skipped: None, samples: 0 }
    }

    fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    fn record(&mut self, d: f64) {
        self.samples += 1;
        // NaN must count as a failure.
        if d.is_nan() || d > self.deviation {
            self.deviation = if d.is_nan() { f64::INFINITY } else { d };
        }
    }

    fn skip(&mut self, why: impl Into<String>) {
        self.skipped.get_or_insert_with(|| why.into());
    }

    pub fn status(&self) -> Status {
        if self.skipped.is_some() && self.samples == 0 {
            Status::Skipped
        } else if self.informational {
            Status::Info
        } else if self.deviation <= self.tolerance {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Energies where every open channel is safely inside its band.
fn usable(sys: &OpenSystem, e: f64) -> bool {
    let c = sys.coupling();
    let open = c.open_channels(e);
    !open.is_empty()
        && open.iter().all(|&i| spectra::channel_momentum(e, c.channels()[i].threshold).sin_k() >= BAND_EDGE_GUARD)
}

/// Largest distance from a closed-form pole to the nearest computed pole.
/// At a coalescence the eigenvalues themselves are only good to
/// `sqrt(eps)`, so for poles flagged defective the squared distance (the
/// backward error) is used instead.
fn nearest_gap(want: &[Complex64], have: &PoleSet) -> f64 {
    if want.len() != have.len() {
        return f64::INFINITY;
    }
    want.iter()
        .map(|z| {
            have.poles
                .iter()
                .zip(&have.defect)
                .map(|(p, &d)| if d { (z - p).norm_sqr() } else { (z - p).norm() })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Outcome of [`run_checks`]: the checks plus grid energies skipped
/// because the resolvent was exactly singular there (a decoupled level).
pub struct Report {
    pub checks: Vec<Check>,
    pub singular: Vec<f64>,
}

pub fn run_checks(cfg: &RunConfig) -> Result<Report, CliError> {
    let g = cfg.geometry();
    let mode = cfg.mode();
    let tol: ValidateConfig = cfg.tolerances();
    let sys = g.open_system()?;
    let grid = cfg.grid.as_ref().unwrap_or(&DEFAULT_GRID).points();

    let mut s_oracle = Check::new("s_vs_oracle[all-channels]", tol.oracle);
    let mut unitarity = Check::new("unitarity[all-channels]", tol.unitarity);
    let mut reciprocity = Check::new("reciprocity[all-channels]", tol.unitarity);
    let mut h_sym = Check::new("heff_symmetry", tol.symmetry);
    let mut trace = Check::new("pole_sum_vs_trace", tol.trace);
    let mut sheet = Check::new("pole_im_nonpositive", tol.sheet);
    let mut mode_checks = if mode == Mode::AllChannels {
        None
    } else {
        Some((
            Check::new(format!("s_vs_oracle[{}]", mode.label()), tol.oracle).info(),
            Check::new(format!("unitarity[{}]", mode.label()), tol.unitarity).info(),
        ))
    };
    let mut analytic_checks = analytic_checks(&g, &tol);

    let lattice = oracle::Lattice::from_geometry(&g);
    if let Err(e) = &lattice {
        s_oracle.skip(format!("oracle does not support this geometry: {e}"));
        if let Some((m, _)) = mode_checks.as_mut() {
            m.skip("oracle does not support this geometry");
        }
    }

    let mut singular = Vec::new();
    for &e in &grid {
        if !usable(&sys, e) {
            continue;
        }
        let h = EffectiveHamiltonian::build(&sys, e, Mode::AllChannels, g.label())?;
        let pipe = match scattering::smatrix_from_heff(&h, sys.coupling()) {
            Err(Error::SingularResolvent { .. }) => {
                singular.push(e);
                continue;
            }
            r => r?,
        };
        h_sym.record(h.matrix().sub(&h.matrix().transpose()).max_abs());
        let ps = heff::eigensystem(&h)?;
        trace.record((ps.sum() - h.trace()).norm());
        sheet.record(ps.poles.iter().map(|z| z.im).fold(0.0, f64::max));
        unitarity.record(pipe.unitarity_defect());
        reciprocity.record(pipe.symmetry_defect());
        let orc = match &lattice {
            Ok(l) => Some(oracle::solve_lattice(l, e)?),
            Err(_) => None,
        };
        let labels = |r: &tbscatter::SMatrixResult| -> Vec<(usize, usize)> {
            r.channels.iter().map(|c| (c.lead_id, c.p)).collect()
        };
        let s_gap = |r: &tbscatter::SMatrixResult, o: &oracle::LatticeSolution| {
            if labels(r) == o.channels {
                r.s.sub(&o.s).max_abs()
            } else {
                f64::INFINITY
            }
        };
        if let Some(o) = &orc {
            s_oracle.record(s_gap(&pipe, o));
        }
        if let Some((m_oracle, m_unit)) = mode_checks.as_mut() {
            let approx = scattering::smatrix(&sys, e, mode)?;
            m_unit.record(approx.unitarity_defect());
            if let Some(o) = &orc {
                m_oracle.record(s_gap(&approx, o));
            }
        }
        for c in analytic_checks.iter_mut() {
            c.run(&g, &sys, e, &pipe, &ps)?;
        }
    }

    let mut out = vec![s_oracle, unitarity, reciprocity, h_sym, trace, sheet];
    if let Some((a, b)) = mode_checks {
        out.push(a);
        out.push(b);
    }
    out.extend(analytic_checks.into_iter().map(|a| a.check));
    for c in out.iter_mut() {
        if c.samples == 0 && c.skipped.is_none() {
            c.skip("no usable energy on the grid");
        }
    }
    Ok(Report { checks: out, singular })
}

#[derive(Debug, Clone, Copy)]
enum Closed {
    ChainT,
    ChainR,
    Oracle1d,
    DotT,
    DotPoles,
    PointContactPoles,
    SlabPoles,
    Unavailable,
}

struct AnalyticCheck {
    kind: Closed,
    check: Check,
}

fn analytic_checks(g: &Geometry, tol: &ValidateConfig) -> Vec<AnalyticCheck> {
    let mk = |kind, name: &str, t| AnalyticCheck { kind, check: Check::new(name, t) };
    match *g {
        Geometry::Chain1d { .. } => vec![
            mk(Closed::ChainT, "t_vs_closed_form", tol.analytic),
            mk(Closed::ChainR, "r_vs_closed_form", tol.analytic),
            mk(Closed::Oracle1d, "chain_oracle_vs_closed_form", tol.analytic),
        ],
        Geometry::Dot2 { .. } => vec![
            mk(Closed::DotT, "t_vs_closed_form", tol.analytic),
            mk(Closed::DotPoles, "poles_vs_closed_form", tol.poles),
        ],
        Geometry::PointContact { site_l, site_r, .. } => {
            let mut c = mk(Closed::PointContactPoles, "poles_vs_secular_roots", tol.poles);
            if site_l != site_r {
                c.kind = Closed::Unavailable;
                c.check.skip("secular form needs both leads on one site");
            }
            vec![c]
        }
        Geometry::Slab3d { nz, case, .. } => {
            let mut c = mk(Closed::SlabPoles, "poles_vs_closed_form", tol.poles);
            if nz != 2 || case != SlabCase::FaceLead {
                c.kind = Closed::Unavailable;
                c.check.skip("closed form needs a face lead and nz = 2");
            }
            vec![c]
        }
        Geometry::Rect2d { .. } => {
            let mut c = mk(Closed::Unavailable, "closed_form", tol.analytic);
            c.check.skip("no closed form for general rectangles");
            vec![c]
        }
    }
}

impl AnalyticCheck {
    fn run(
        &mut self,
        g: &Geometry,
        sys: &OpenSystem,
        e: f64,
        pipe: &tbscatter::SMatrixResult,
        poles: &PoleSet,
    ) -> Result<(), CliError> {
        let k = (-e / 2.0).clamp(-1.0, 1.0).acos();
        match (self.kind, g.clone()) {
            (Closed::ChainT | Closed::ChainR | Closed::Oracle1d, Geometry::Chain1d { sites, v_l, v_r }) => {
                let a = analytic::chain_rt(sites, v_l, v_r, k)?;
                match self.kind {
                    Closed::Oracle1d => {
                        let o = oracle::solve_chain_1d(sites, v_l, v_r, k)?;
                        self.check.record((o.t - a.t).norm().max((o.r - a.r).norm()));
                    }
                    Closed::ChainT => {
                        let (t, _) = analytic::wave_to_resolvent_frame(sites, k, a.t, a.r);
                        match pipe.t() {
                            Some(p) => self.check.record((p - t).norm()),
                            None => self.check.skip("a lead is decoupled"),
                        }
                    }
                    _ => {
                        let (_, r) = analytic::wave_to_resolvent_frame(sites, k, a.t, a.r);
                        match pipe.r() {
                            Some(p) => self.check.record((p - r).norm()),
                            None => self.check.skip("lead 0 is decoupled"),
                        }
                    }
                }
            }
            (Closed::DotT, Geometry::Dot2 { case, v_l, v_r }) => {
                let t = analytic::dot2_transmission(&TwoSiteDotParams::new(v_l, v_r, case), e)?;
                match pipe.t() {
                    Some(p) => self.check.record((p - t).norm()),
                    None => self.check.skip("a lead is decoupled"),
                }
            }
            (Closed::DotPoles, Geometry::Dot2 { case, v_l, v_r }) => {
                let (a, b) = analytic::dot2_poles(&TwoSiteDotParams::new(v_l, v_r, case), e)?;
                self.check.record(nearest_gap(&[a, b], poles));
            }
            (Closed::PointContactPoles, Geometry::PointContact { ny, site_l, v_l, v_r, .. }) => {
                let site = (site_l.0 - 1) * ny + (site_l.1 - 1);
                let psi: Vec<f64> = (0..sys.n_states()).map(|b| sys.amplitudes()[(site, b)]).collect();
                let roots = analytic::point_contact_pole_roots(sys.energies(), &psi, v_l, v_r, e)?;
                let zs: Vec<Complex64> = roots.iter().map(|r| r.z).collect();
                self.check.record(nearest_gap(&zs, poles));
            }
            (Closed::SlabPoles, Geometry::Slab3d { nx, ny, v, .. }) => {
                let cross = RectSpectrum2D::new(nx, ny)?;
                let mut zs = Vec::new();
                for eb in cross.energies() {
                    let (a, b) = analytic::slab_poles(eb, v, e);
                    zs.extend([a, b]);
                }
                self.check.record(nearest_gap(&zs, poles));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs every check and lays the results out as a report table. The
/// boolean is true when at least one non-informational check failed.
pub fn validate(cfg: &RunConfig) -> Result<(Table, bool), CliError> {
    let Report { checks, singular } = run_checks(cfg)?;
    let mut table = Table::new("validate", &["check", "tolerance", "deviation", "samples", "status", "detail"]);
    let mut failed = false;
    for c in &checks {
        let st = c.status();
        failed |= st == Status::Fail;
        table.push(vec![
            Cell::Text(c.name.clone()),
            Cell::Num(c.tolerance),
            Cell::Num(c.deviation),
            Cell::Int(c.samples),
            Cell::Text(st.label().into()),
            Cell::Text(c.skipped.clone().unwrap_or_default()),
        ]);
    }
    table.notes.push(format!("geometry = {}, mode = {}", cfg.geometry_section(), cfg.mode().label()));
    if !singular.is_empty() {
        let es: Vec<String> = singular.iter().map(|&e| crate::table::fmt_f64(e)).collect();
        table.notes.push(format!("skipped singular-resolvent energies: {}", es.join(" ")));
    }
    Ok((table, failed))
}
