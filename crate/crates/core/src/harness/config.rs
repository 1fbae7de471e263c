use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::SpaceParams;

/// How the permeability field is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Random straight channels of `width` cells.
    Channels {
        contrast: f64,
        count: usize,
        width: usize,
        seed: u64,
    },
    /// Random square inclusions of `size` cells.
    Inclusions {
        contrast: f64,
        count: usize,
        size: usize,
        seed: u64,
    },
    /// A raster file. With `contrast` set the file is read as a mask and
    /// nonzero cells get the contrast; otherwise the values are `κ` itself.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contrast: Option<f64>,
    },
    /// One of the channel masks shipped with the crate.
    Bundled { name: String, contrast: f64 },
}

/// How the source term is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    /// `2π² sin(πx) sin(πy)`.
    Smooth,
    /// `inside` on a centred square of the given side, `outside` elsewhere.
    Discontinuous {
        #[serde(default = "one")]
        inside: f64,
        #[serde(default)]
        outside: f64,
        #[serde(default = "default_side")]
        side: f64,
    },
    /// Cell rasters; one file is used for all times, otherwise one file per
    /// coarse time level `0..=N`.
    Custom { rasters: Vec<PathBuf> },
}

fn one() -> f64 {
    1.0
}

fn default_side() -> f64 {
    0.4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Fine,
    Cem,
    #[serde(rename = "tildeU")]
    TildeU,
    Scem,
}

impl SchemeName {
    pub const ALL: [SchemeName; 4] = [SchemeName::Fine, SchemeName::Cem, SchemeName::TildeU, SchemeName::Scem];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Fine => "fine",
            SchemeName::Cem => "cem",
            SchemeName::TildeU => "tildeU",
            SchemeName::Scem => "scem",
        }
    }
}

fn all_schemes() -> Vec<SchemeName> {
    SchemeName::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    /// final time
    #[serde(rename = "T")]
    pub t_final: f64,
    /// coarse step
    pub dt: f64,
    /// step of the fine reference
    pub dt_fine: f64,
    pub coarse_n: usize,
    pub refine: usize,
    pub layers: usize,
    #[serde(rename = "L_i")]
    pub l: usize,
    #[serde(rename = "J_i")]
    pub j: usize,
    pub field: FieldSpec,
    pub forcing: ForcingSpec,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<SchemeName>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Dump every trajectory as text. The fine one is written at the coarse
    /// time levels only.
    #[serde(default = "yes")]
    pub write_trajectories: bool,
    /// Basis cache; read when present and valid, written otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_cache: Option<PathBuf>,
}

fn ratio_of(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * n.max(1.0) && n >= 1.0).then_some(n as usize)
}

impl ExperimentConfig {
    /// The two numerical experiments: `T = 0.01`, `ΔT = 2e-5`, `δT = ΔT/5`,
    /// `H = 1/10`, `h = 1/100`, `α = 0.9`, contrast `10⁵`.
    pub fn experiment(which: u8) -> Result<Self> {
        let (name, forcing) = match which {
            1 => ("experiment1", ForcingSpec::Smooth),
            2 => (
                "experiment2",
                ForcingSpec::Discontinuous {
                    inside: 1.0,
                    outside: 0.0,
                    side: 0.4,
                },
            ),
            _ => return Err(Error::Config(format!("no experiment {which}; expected 1 or 2"))),
        };
        Ok(Self {
            alpha: 0.9,
            t_final: 0.01,
            dt: 2e-5,
            dt_fine: 4e-6,
            coarse_n: 10,
            refine: 10,
            layers: 8,
            l: 3,
            j: 3,
            field: FieldSpec::Bundled {
                name: name.into(),
                contrast: 1e5,
            },
            forcing,
            schemes: all_schemes(),
            output: PathBuf::from(format!("out/{name}")),
            write_trajectories: true,
            basis_cache: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        // relative paths in the file are taken from the config's directory
        if let Some(dir) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            };
            if let FieldSpec::File { path, .. } = &mut cfg.field {
                fix(path);
            }
            if let ForcingSpec::Custom { rasters } = &mut cfg.forcing {
                rasters.iter_mut().for_each(fix);
            }
            fix(&mut cfg.output);
            if let Some(p) = &mut cfg.basis_cache {
                fix(p);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        for (name, v) in [("T", self.t_final), ("dt", self.dt), ("dt_fine", self.dt_fine)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if ratio_of(self.t_final, self.dt).is_none() {
            return bad(format!("dt {} does not divide T {}", self.dt, self.t_final));
        }
        if ratio_of(self.dt, self.dt_fine).is_none() {
            return bad(format!("dt_fine {} does not divide dt {}", self.dt_fine, self.dt));
        }
        for (name, v) in [
            ("coarse_n", self.coarse_n),
            ("refine", self.refine),
            ("layers", self.layers),
            ("L_i", self.l),
            ("J_i", self.j),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.schemes.is_empty() {
            return bad("no schemes requested".into());
        }
        Ok(())
    }

    /// Coarse steps `N = T/ΔT`.
    pub fn steps(&self) -> usize {
        ratio_of(self.t_final, self.dt).unwrap_or(0)
    }

    /// Fine steps per coarse step.
    pub fn ratio(&self) -> usize {
        ratio_of(self.dt, self.dt_fine).unwrap_or(0)
    }

    pub fn space_params(&self) -> SpaceParams {
        SpaceParams {
            l: self.l,
            j: self.j,
            layers: self.layers,
        }
    }

    pub fn runs(&self, s: SchemeName) -> bool {
        self.schemes.contains(&s)
    }
}
