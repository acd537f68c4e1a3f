//! Run configuration: a human-editable TOML document describing the
//! scene, the sampling grid, the desired pattern, solver options and the
//! requested output cuts. Unknown keys are rejected everywhere, so typos
//! fail loudly instead of silently falling back to defaults.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::{CachePolicy, OperatorOptions};
use crate::pattern::PatternBox;
use crate::scene::{build_sampling_grid, FeederLayout, Geometry, SamplingGrid, SceneConfig};
use crate::solver::{InitMode, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub scene: SceneSection,
    pub grid: GridSection,
    pub pattern: PatternSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub ris_rows: usize,
    pub ris_cols: usize,
    /// Element spacing in meters; omit for half-wavelength at the carrier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing_m: Option<f64>,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    pub power_w: f64,
    pub feeders: FeederSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederSection {
    /// 1 (on axis) or 4 (quadrant centroids); ignored when explicit
    /// positions are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_standoff")]
    pub standoff_m: f64,
    /// Explicit feeder positions in meters, each with x < 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 3]>>,
}

fn default_standoff() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub freq_points: usize,
    pub theta_points: usize,
    pub phi_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    /// Fixed pattern height; mutually exclusive with `calibrate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateSection>,
    pub boxes: Vec<BoxSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    /// `[low, high]` elevation bounds in degrees.
    pub theta_deg: [f64; 2],
    pub phi_deg: [f64; 2],
    pub freq_hz: [f64; 2],
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mode: RunMode,
    pub seed: u64,
    pub max_cycles: usize,
    pub rel_tol: f64,
    pub cd_max_sweeps: usize,
    pub cd_tol: f64,
    pub bisection_tol: f64,
    pub rank_threshold: f64,
    pub direct_eig_limit: usize,
    pub restarts: usize,
    pub init: InitSetting,
    pub steering_cache: CacheSetting,
    pub calibration_cycles: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            mode: RunMode::Ris,
            seed: d.seed,
            max_cycles: d.max_cycles,
            rel_tol: d.rel_tol,
            cd_max_sweeps: d.cd_max_sweeps,
            cd_tol: d.cd_tol,
            bisection_tol: d.bisection_tol,
            rank_threshold: d.rank_threshold,
            direct_eig_limit: d.direct_eig_limit,
            restarts: d.restarts,
            init: InitSetting::Ones,
            steering_cache: CacheSetting::Auto,
            calibration_cycles: d.calibration_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Ris,
    Mimo,
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ris" => Ok(RunMode::Ris),
            "mimo" => Ok(RunMode::Mimo),
            other => Err(Error::Config(format!("unknown mode `{other}` (expected ris|mimo)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitSetting {
    #[default]
    Ones,
    RandomPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CacheSetting {
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    /// Requested NPB cuts, e.g. `"f=-25e6"`, `"el=-22.5"`, `"az=33.75"`.
    pub cuts: Vec<String>,
}

/// One requested output slice through the NPB grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutSpec {
    /// Fixed frequency in Hz; elevation × azimuth slice.
    Freq(f64),
    /// Fixed elevation in degrees; frequency × azimuth slice.
    Elevation(f64),
    /// Fixed azimuth in degrees; frequency × elevation slice.
    Azimuth(f64),
}

impl FromStr for CutSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("cut `{s}` must look like f=…, el=… or az=…")))?;
        let parsed: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cut `{s}`: `{value}` is not a number")))?;
        match key.trim() {
            "f" => Ok(CutSpec::Freq(parsed)),
            "el" => Ok(CutSpec::Elevation(parsed)),
            "az" => Ok(CutSpec::Azimuth(parsed)),
            other => Err(Error::Config(format!("cut axis `{other}` (expected f, el or az)"))),
        }
    }
}

impl ConfigDocument {
    pub fn from_str_toml(text: &str) -> Result<Self> {
        let doc: ConfigDocument =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_toml(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.pattern.height, &self.pattern.calibrate) {
            (None, None) => {
                return Err(Error::Config("pattern needs `height` or `calibrate`".into()))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config("`height` and `calibrate` are mutually exclusive".into()))
            }
            _ => {}
        }
        if let Some(c) = &self.pattern.calibrate {
            if !(c.lo > 0.0) || c.hi < c.lo {
                return Err(Error::Config(format!(
                    "calibration range must satisfy 0 < lo <= hi, got [{}, {}]",
                    c.lo, c.hi
                )));
            }
        }
        if let (None, None) = (&self.scene.feeders.count, &self.scene.feeders.positions) {
            return Err(Error::Config("feeders need `count` or `positions`".into()));
        }
        if let Some(count) = self.scene.feeders.count {
            if self.scene.feeders.positions.is_none() && !matches!(count, 1 | 4) {
                return Err(Error::Config(format!(
                    "feeder count {count} unsupported; use 1, 4 or explicit positions"
                )));
            }
        }
        for cut in &self.outputs.cuts {
            cut.parse::<CutSpec>()?;
        }
        self.scene_config()?.validate()
    }

    /// Resolved scene parameters (spacing defaults to half-wavelength).
    pub fn scene_config(&self) -> Result<SceneConfig> {
        let feeder_layout = match (&self.scene.feeders.positions, self.scene.feeders.count) {
            (Some(p), _) => FeederLayout::Explicit(
                p.iter().map(|q| nalgebra::Vector3::new(q[0], q[1], q[2])).collect(),
            ),
            (None, Some(1)) => FeederLayout::OnAxis,
            (None, Some(4)) => FeederLayout::Quadrants,
            (None, Some(n)) => {
                return Err(Error::Config(format!("feeder count {n} unsupported")))
            }
            (None, None) => return Err(Error::Config("feeders need `count` or `positions`".into())),
        };
        let spacing = self
            .scene
            .element_spacing_m
            .unwrap_or(0.5 * crate::scene::SPEED_OF_LIGHT / self.scene.carrier_hz);
        Ok(SceneConfig {
            ris_rows: self.scene.ris_rows,
            ris_cols: self.scene.ris_cols,
            element_spacing_m: spacing,
            carrier_hz: self.scene.carrier_hz,
            bandwidth_hz: self.scene.bandwidth_hz,
            duration_s: self.scene.duration_s,
            power_w: self.scene.power_w,
            feeder_layout,
            feeder_standoff_m: self.scene.feeders.standoff_m,
            freq_points: self.grid.freq_points,
            theta_points: self.grid.theta_points,
            phi_points: self.grid.phi_points,
        })
    }

    pub fn build_geometry(&self) -> Result<Geometry> {
        Geometry::build(&self.scene_config()?)
    }

    pub fn build_grid(&self) -> Result<SamplingGrid> {
        Ok(build_sampling_grid(&self.scene_config()?))
    }

    /// Pattern boxes with angles converted to radians.
    pub fn pattern_boxes(&self) -> Vec<PatternBox> {
        self.pattern
            .boxes
            .iter()
            .map(|b| PatternBox {
                theta: [b.theta_deg[0].to_radians(), b.theta_deg[1].to_radians()],
                phi: [b.phi_deg[0].to_radians(), b.phi_deg[1].to_radians()],
                freq: b.freq_hz,
                level: b.level,
            })
            .collect()
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            max_cycles: s.max_cycles,
            rel_tol: s.rel_tol,
            cd_max_sweeps: s.cd_max_sweeps,
            cd_tol: s.cd_tol,
            bisection_tol: s.bisection_tol,
            rank_threshold: s.rank_threshold,
            direct_eig_limit: s.direct_eig_limit,
            seed: s.seed,
            init: match s.init {
                InitSetting::Ones => InitMode::Ones,
                InitSetting::RandomPhases => InitMode::RandomPhases,
            },
            restarts: s.restarts,
            calibration_cycles: s.calibration_cycles,
        }
    }

    pub fn operator_options(&self) -> OperatorOptions {
        OperatorOptions {
            steering_cache: match self.solver.steering_cache {
                CacheSetting::Auto => CachePolicy::Auto,
                CacheSetting::Always => CachePolicy::Always,
                CacheSetting::Never => CachePolicy::Never,
            },
            ..Default::default()
        }
    }

    pub fn cut_specs(&self) -> Result<Vec<CutSpec>> {
        self.outputs.cuts.iter().map(|c| c.parse()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[scene]
ris_rows = 2
ris_cols = 2
carrier_hz = 3e9
bandwidth_hz = 100e6
duration_s = 3e-8
power_w = 2.0

[scene.feeders]
count = 1
standoff_m = 0.5

[grid]
freq_points = 3
theta_points = 2
phi_points = 2

[pattern]
height = 0.1

[[pattern.boxes]]
theta_deg = [-45.0, 0.0]
phi_deg = [-45.0, 0.0]
freq_hz = [-50e6, 0.0]
"#;

    #[test]
    fn minimal_document_parses_with_defaults() {
        let doc = ConfigDocument::from_str_toml(MINIMAL).unwrap();
        assert_eq!(doc.solver.seed, 1);
        assert_eq!(doc.solver.mode, RunMode::Ris);
        assert_eq!(doc.pattern.boxes[0].level, 1.0);
        let cfg = doc.scene_config().unwrap();
        // spacing defaults to half-wavelength at the carrier
        let expected = 0.5 * crate::scene::SPEED_OF_LIGHT / 3e9;
        assert!((cfg.element_spacing_m - expected).abs() < 1e-15);
        assert_eq!(cfg.sample_count(), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("power_w = 2.0", "power_w = 2.0\npower_watts = 3.0");
        let err = ConfigDocument::from_str_toml(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let text = format!("{MINIMAL}\n[extra]\nfoo = 1\n");
        assert!(ConfigDocument::from_str_toml(&text).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let doc = ConfigDocument::from_str_toml(MINIMAL).unwrap();
        let text = doc.to_toml_string().unwrap();
        let again = ConfigDocument::from_str_toml(&text).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn height_and_calibrate_are_mutually_exclusive() {
        let text = MINIMAL.replace("height = 0.1", "height = 0.1\ncalibrate = { lo = 0.1, hi = 1.0 }");
        assert!(ConfigDocument::from_str_toml(&text).is_err());
        let text = MINIMAL.replace("height = 0.1", "");
        assert!(ConfigDocument::from_str_toml(&text).is_err());
    }

    #[test]
    fn feeder_counts_are_checked() {
        let text = MINIMAL.replace("count = 1", "count = 3");
        assert!(ConfigDocument::from_str_toml(&text).is_err());
        let text = MINIMAL.replace(
            "count = 1",
            "positions = [[-0.5, 0.1, 0.0], [-0.5, -0.1, 0.0], [-0.6, 0.0, 0.1]]",
        );
        let doc = ConfigDocument::from_str_toml(&text).unwrap();
        assert_eq!(doc.scene_config().unwrap().feeder_count(), 3);
    }

    #[test]
    fn cut_specs_parse() {
        assert_eq!("f=-25e6".parse::<CutSpec>().unwrap(), CutSpec::Freq(-25e6));
        assert_eq!("el=-22.5".parse::<CutSpec>().unwrap(), CutSpec::Elevation(-22.5));
        assert_eq!("az=33.75".parse::<CutSpec>().unwrap(), CutSpec::Azimuth(33.75));
        assert!("elevation=1".parse::<CutSpec>().is_err());
        assert!("f=abc".parse::<CutSpec>().is_err());
        assert!("f".parse::<CutSpec>().is_err());
    }

    #[test]
    fn boxes_convert_to_radians() {
        let doc = ConfigDocument::from_str_toml(MINIMAL).unwrap();
        let boxes = doc.pattern_boxes();
        assert!((boxes[0].theta[0] + 45f64.to_radians()).abs() < 1e-15);
        assert_eq!(boxes[0].freq, [-50e6, 0.0]);
    }
}
