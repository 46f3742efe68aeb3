//! Run configuration shared by the command-line subcommands.
//!
//! Values are layered: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{InterpOptions, RotSpace, TransSpace};
use crate::correction::{CorrectionOptions, ScaleMode};
use crate::error::{Error, Result};
use crate::fixtures::FixtureKind;
use crate::io::DEFAULT_KITTI_RATE_HZ;
use crate::pipeline::{Method, MethodConfig};
use crate::synth::PathShape;
use crate::trajectory::DEFAULT_ASSOC_TOL;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajFormat {
    #[default]
    Tum,
    Kitti,
}

impl std::str::FromStr for TrajFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tum" => Ok(TrajFormat::Tum),
            "kitti" => Ok(TrajFormat::Kitti),
            _ => Err(Error::Config(format!("unknown trajectory format '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traj: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_index: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_old: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_new: Option<PathBuf>,
    pub format: TrajFormat,
    pub kitti_rate_hz: f64,
    /// Empty means the subcommand's default selection.
    pub methods: Vec<Method>,
    pub trans_space: TransSpace,
    pub rot_space: RotSpace,
    pub scale_squared: bool,
    pub raw_division: bool,
    pub assoc_tol: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub sequence: String,
    pub fixture: FixtureKind,
    pub shape: PathShape,
    pub scale: f64,
    pub keyframes: usize,
    pub rels_per_segment: usize,
    pub pixel_noise: f64,
    pub reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            traj: None,
            gt: None,
            kf_index: None,
            kf_old: None,
            kf_new: None,
            format: TrajFormat::Tum,
            kitti_rate_hz: DEFAULT_KITTI_RATE_HZ,
            methods: Vec::new(),
            trans_space: TransSpace::Xyz,
            rot_space: RotSpace::So3,
            scale_squared: false,
            raw_division: false,
            assoc_tol: DEFAULT_ASSOC_TOL,
            seed: 0,
            out: PathBuf::from("out"),
            threads: 1,
            sequence: "sequence".into(),
            fixture: FixtureKind::Similarity,
            shape: PathShape::Mav,
            scale: 2.0,
            keyframes: 12,
            rels_per_segment: 3,
            pixel_noise: 0.0,
            reps: 200,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.threads == 0 {
            return fail("--threads must be at least 1");
        }
        if !(self.assoc_tol > 0.0 && self.assoc_tol.is_finite()) {
            return fail("--assoc-tol must be a positive number of seconds");
        }
        if !(self.kitti_rate_hz > 0.0 && self.kitti_rate_hz.is_finite()) {
            return fail("KITTI frame rate must be positive");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return fail("similarity scale must be positive");
        }
        if !(self.pixel_noise >= 0.0 && self.pixel_noise.is_finite()) {
            return fail("pixel noise must be non-negative");
        }
        if self.keyframes < 2 {
            return fail("at least two keyframes are required");
        }
        if self.reps == 0 {
            return fail("--reps must be at least 1");
        }
        Ok(())
    }

    pub fn method_config(&self) -> MethodConfig {
        MethodConfig {
            trans_space: self.trans_space,
            rot_space: self.rot_space,
            interp: InterpOptions {
                raw_division: self.raw_division,
                ..InterpOptions::default()
            },
            correction: CorrectionOptions {
                scale_mode: if self.scale_squared {
                    ScaleMode::SquaredRatio
                } else {
                    ScaleMode::Ratio
                },
            },
        }
    }

    pub fn methods_or(&self, default: &[Method]) -> Vec<Method> {
        if self.methods.is_empty() {
            default.to_vec()
        } else {
            self.methods.clone()
        }
    }
}
