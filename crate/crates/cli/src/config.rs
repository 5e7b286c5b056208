//! Run configuration: a TOML file with exactly one geometry section.
//!
//! ```toml
//! mode = "all-channels"      # open-only | all-channels | wide-band
//! energy = 0.0               # poles and validate
//!
//! [chain1d]
//! sites = 5
//! v = 0.4                    # both leads; v_l / v_r override
//!
//! [grid]
//! min = -1.99
//! max = 1.99
//! count = 401
//! ```
//!
//! Unknown keys are rejected. Missing optional keys take the defaults
//! `v = 1.0`, `mode = "all-channels"`, `count = 401`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tbscatter::coupling::{LeadSpec, Side, SlabCase};
use tbscatter::geometry::DotCase;
use tbscatter::tracker::TrackPath;
use tbscatter::{Geometry, Mode};

use crate::CliError;

pub const DEFAULT_COUNT: usize = 401;

fn default_v() -> f64 {
    1.0
}

fn default_count() -> usize {
    DEFAULT_COUNT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    OpenOnly,
    #[default]
    AllChannels,
    WideBand,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Mode {
        match m {
            ModeName::OpenOnly => Mode::OpenOnly,
            ModeName::AllChannels => Mode::AllChannels,
            ModeName::WideBand => Mode::WideBand,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub sites: usize,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DotCaseName {
    A,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DotConfig {
    pub case: DotCaseName,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
}

/// Leads cover rows strictly between the two walls; `[0, ny + 1]`
/// (the default) is a full-width lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_walls: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_walls: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointContactConfig {
    pub nx: usize,
    pub ny: usize,
    pub site_l: [usize; 2],
    pub site_r: [usize; 2],
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlabCaseName {
    PerpendicularLeads,
    FaceLead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub case: SlabCaseName,
    #[serde(default = "default_v")]
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

impl GridConfig {
    /// `count` evenly spaced points, both ends included.
    pub fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathParameter {
    /// Both coupling strengths together.
    V,
    VL,
    VR,
    Energy,
}

/// A straight parameter path for `track`. Coupling paths hold the energy
/// at `energy`; parameters off the path come from the geometry section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub parameter: PathParameter,
    pub from: f64,
    pub to: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

/// Tolerance overrides for `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "tol::oracle")]
    pub oracle: f64,
    #[serde(default = "tol::analytic")]
    pub analytic: f64,
    #[serde(default = "tol::unitarity")]
    pub unitarity: f64,
    #[serde(default = "tol::symmetry")]
    pub symmetry: f64,
    #[serde(default = "tol::poles")]
    pub poles: f64,
    #[serde(default = "tol::trace")]
    pub trace: f64,
    #[serde(default = "tol::sheet")]
    pub sheet: f64,
}

mod tol {
    pub fn oracle() -> f64 {
        1e-8
    }
    pub fn analytic() -> f64 {
        1e-10
    }
    pub fn unitarity() -> f64 {
        1e-10
    }
    pub fn symmetry() -> f64 {
        1e-12
    }
    pub fn poles() -> f64 {
        1e-8
    }
    pub fn trace() -> f64 {
        1e-10
    }
    pub fn sheet() -> f64 {
        1e-12
    }
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            oracle: tol::oracle(),
            analytic: tol::analytic(),
            unitarity: tol::unitarity(),
            symmetry: tol::symmetry(),
            poles: tol::poles(),
            trace: tol::trace(),
            sheet: tol::sheet(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain1d: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot2: Option<DotConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect2d: Option<RectConfig>,
    #[serde(default, rename = "point-contact", skip_serializing_if = "Option::is_none")]
    pub point_contact: Option<PointContactConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab3d: Option<SlabConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateConfig>,
}

fn config_err(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn strengths(v: f64, v_l: Option<f64>, v_r: Option<f64>) -> (f64, f64) {
    (v_l.unwrap_or(v), v_r.unwrap_or(v))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The config as it will be echoed into output files.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        let present = [
            self.chain1d.is_some(),
            self.dot2.is_some(),
            self.rect2d.is_some(),
            self.point_contact.is_some(),
            self.slab3d.is_some(),
        ]
        .iter()
        .filter(|&&p| p)
        .count();
        if present != 1 {
            return Err(config_err(
                "geometry",
                format!(
                    "expected exactly one of [chain1d], [dot2], [rect2d], [point-contact], [slab3d]; found {present}"
                ),
            ));
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(config_err("energy", "must be finite"));
            }
        }
        if let Some(g) = &self.grid {
            if g.count < 2 {
                return Err(config_err("grid.count", format!("must be at least 2, got {}", g.count)));
            }
            if !(g.min.is_finite() && g.max.is_finite()) {
                return Err(config_err("grid.min", "grid bounds must be finite"));
            }
            if g.max <= g.min {
                return Err(config_err("grid.max", format!("must exceed grid.min ({} <= {})", g.max, g.min)));
            }
        }
        if let Some(p) = &self.path {
            if p.count < 2 {
                return Err(config_err("path.count", format!("must be at least 2, got {}", p.count)));
            }
            if !(p.from.is_finite() && p.to.is_finite()) {
                return Err(config_err("path.from", "path ends must be finite"));
            }
            if p.parameter != PathParameter::Energy && (p.from < 0.0 || p.to < 0.0) {
                return Err(config_err("path.from", "coupling strengths must be >= 0"));
            }
        }
        if let Some(v) = &self.validate {
            for (name, t) in [
                ("validate.oracle", v.oracle),
                ("validate.analytic", v.analytic),
                ("validate.unitarity", v.unitarity),
                ("validate.symmetry", v.symmetry),
                ("validate.poles", v.poles),
                ("validate.trace", v.trace),
                ("validate.sheet", v.sheet),
            ] {
                if t.is_nan() || t < 0.0 {
                    return Err(config_err(name, "tolerance must be >= 0"));
                }
            }
        }
        let g = self.geometry();
        g.open_system().map_err(|e| config_err(self.geometry_section(), e))?;
        Ok(())
    }

    pub fn geometry_section(&self) -> &'static str {
        if self.chain1d.is_some() {
            "chain1d"
        } else if self.dot2.is_some() {
            "dot2"
        } else if self.rect2d.is_some() {
            "rect2d"
        } else if self.point_contact.is_some() {
            "point-contact"
        } else {
            "slab3d"
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.into()
    }

    pub fn geometry(&self) -> Geometry {
        if let Some(c) = &self.chain1d {
            let (v_l, v_r) = strengths(c.v, c.v_l, c.v_r);
            return Geometry::Chain1d { sites: c.sites, v_l, v_r };
        }
        if let Some(d) = &self.dot2 {
            let (v_l, v_r) = strengths(d.v, d.v_l, d.v_r);
            let case = match d.case {
                DotCaseName::A => DotCase::A,
                DotCaseName::C => DotCase::C,
            };
            return Geometry::Dot2 { case, v_l, v_r };
        }
        if let Some(r) = &self.rect2d {
            let (v_l, v_r) = strengths(r.v, r.v_l, r.v_r);
            let walls = |w: Option<[usize; 2]>| w.unwrap_or([0, r.ny + 1]);
            let [ll, lh] = walls(r.left_walls);
            let [rl, rh] = walls(r.right_walls);
            return Geometry::Rect2d {
                nx: r.nx,
                ny: r.ny,
                left: LeadSpec::new(Side::Left, ll, lh, v_l),
                right: LeadSpec::new(Side::Right, rl, rh, v_r),
            };
        }
        if let Some(p) = &self.point_contact {
            let (v_l, v_r) = strengths(p.v, p.v_l, p.v_r);
            return Geometry::PointContact {
                nx: p.nx,
                ny: p.ny,
                site_l: (p.site_l[0], p.site_l[1]),
                site_r: (p.site_r[0], p.site_r[1]),
                v_l,
                v_r,
            };
        }
        let s = self.slab3d.as_ref().expect("checked: one geometry section");
        let case = match s.case {
            SlabCaseName::PerpendicularLeads => SlabCase::PerpendicularLeads,
            SlabCaseName::FaceLead => SlabCase::FaceLead,
        };
        Geometry::Slab3d { nx: s.nx, ny: s.ny, nz: s.nz, case, v: s.v }
    }

    pub fn grid(&self) -> Result<&GridConfig, CliError> {
        self.grid.as_ref().ok_or_else(|| config_err("grid", "a [grid] section is required for this command"))
    }

    pub fn energy_or(&self, default: f64) -> f64 {
        self.energy.unwrap_or(default)
    }

    pub fn tolerances(&self) -> ValidateConfig {
        self.validate.clone().unwrap_or_default()
    }

    /// The `[path]` section as a tracker path.
    pub fn track_path(&self) -> Result<TrackPath, CliError> {
        let p = self.path.as_ref().ok_or_else(|| config_err("path", "a [path] section is required for track"))?;
        let xs: Vec<f64> = GridConfig { min: p.from, max: p.to, count: p.count }.points();
        if p.parameter == PathParameter::Energy {
            if p.energy.is_some() {
                return Err(config_err("path.energy", "not used when the path parameter is energy"));
            }
            return Ok(TrackPath::energies(&xs));
        }
        let energy =
            p.energy.or(self.energy).ok_or_else(|| config_err("path.energy", "coupling paths need a fixed energy"))?;
        let (v_l, v_r) = self.geometry().strengths();
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| match p.parameter {
                PathParameter::V => (x, x),
                PathParameter::VL => (x, v_r),
                PathParameter::VR => (v_l, x),
                PathParameter::Energy => unreachable!(),
            })
            .collect();
        Ok(TrackPath::coupling(&pts, energy))
    }
}
