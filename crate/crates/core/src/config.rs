//! Flat `key = value` settings shared by configuration files and command-line
//! flags. Keys use the flag spelling (`block-size`); underscores are accepted
//! in place of dashes. `#` starts a comment.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::pipeline::{Budget, PipelineConfig};
use crate::sweep::{Axis, PairSource, SweepConfig};
use crate::synth::ParallaxSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown setting {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Settings for every subcommand.
#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub parallax: ParallaxSpec,
    pub scene_size: usize,
    pub baseline: bool,
    pub threads: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            pipeline: sweep.pipeline,
            axis: sweep.axis,
            values: sweep.values,
            trials: sweep.trials,
            seed: sweep.seed,
            parallax: ParallaxSpec {
                overlap_target: 0.7,
                ..Default::default()
            },
            scene_size: 384,
            baseline: true,
            threads: None,
        }
    }
}

/// Every recognised key.
pub const KEYS: &[&str] = &[
    "snr",
    "cbr",
    "budget-k",
    "power",
    "seed",
    "block-size",
    "q",
    "feather",
    "poisson",
    "poisson-iterations",
    "seam-weight",
    "estimator",
    "refiner",
    "blend",
    "shrink",
    "ransac-iterations",
    "ransac-threshold",
    "min-inliers",
    "max-keypoints",
    "fast-threshold",
    "ratio",
    "refine-iterations",
    "axis",
    "values",
    "trials",
    "overlap",
    "rotation",
    "perspective",
    "jitter",
    "frame-size",
    "scene-size",
    "baseline",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.into(),
            value: value.into(),
            reason: "expected a boolean".into(),
        }),
    }
}

impl Settings {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let k = key.as_str();
        let p = &mut self.pipeline;
        match k {
            "snr" => p.channel.snr_db = parse(k, value)?,
            "cbr" => p.budget = Budget::Cbr(parse(k, value)?),
            "budget-k" => p.budget = Budget::Symbols(parse(k, value)?),
            "power" => p.channel.power = parse(k, value)?,
            "seed" => {
                self.seed = parse(k, value)?;
                p.channel.seed = self.seed;
                p.ransac.seed = self.seed;
                self.parallax.seed = self.seed;
            }
            "block-size" => p.block_size = parse(k, value)?,
            "q" => p.q = parse(k, value)?,
            "feather" => p.blend.feather_width = parse(k, value)?,
            "poisson" => {
                let on = parse_bool(k, value)?;
                p.blend.poisson = on;
                if on {
                    p.strategies.blender = "poisson".into();
                } else if p.strategies.blender == "poisson" {
                    p.strategies.blender = "feather".into();
                }
            }
            "poisson-iterations" => p.blend.poisson_iterations = parse(k, value)?,
            "seam-weight" => p.blend.seam_weight_b = parse(k, value)?,
            "estimator" => p.strategies.estimator = value.to_string(),
            "refiner" => p.strategies.refiner = value.to_string(),
            "blend" => {
                p.strategies.blender = value.to_string();
                p.blend.poisson = value == "poisson";
            }
            "shrink" => p.strategies.shrinkage = value.to_string(),
            "ransac-iterations" => p.ransac.max_iterations = parse(k, value)?,
            "ransac-threshold" => p.ransac.inlier_threshold = parse(k, value)?,
            "min-inliers" => p.ransac.min_inliers = parse(k, value)?,
            "max-keypoints" => p.features.max_keypoints = parse(k, value)?,
            "fast-threshold" => p.features.fast_threshold = parse(k, value)?,
            "ratio" => p.features.ratio = parse(k, value)?,
            "refine-iterations" => p.refine.max_iterations = parse(k, value)?,
            "axis" => {
                self.axis = value.parse().map_err(|reason| ConfigError::Value {
                    key: key.clone(),
                    value: value.into(),
                    reason,
                })?
            }
            "values" => {
                self.values = value
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(k, s))
                    .collect::<Result<_, _>>()?
            }
            "trials" => self.trials = parse(k, value)?,
            "overlap" => self.parallax.overlap_target = parse(k, value)?,
            "rotation" => self.parallax.rotation_deg = parse(k, value)?,
            "perspective" => self.parallax.perspective_strength = parse(k, value)?,
            "jitter" => self.parallax.photometric_jitter = parse(k, value)?,
            "frame-size" => {
                let n: usize = parse(k, value)?;
                self.parallax.frame_height = n;
                self.parallax.frame_width = n;
            }
            "scene-size" => self.scene_size = parse(k, value)?,
            "baseline" => self.baseline = parse_bool(k, value)?,
            "threads" => self.threads = Some(parse(k, value)?),
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
        Ok(())
    }

    /// Applies every line of a settings text.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }

    /// Sweep over synthetic pairs described by these settings.
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            axis: self.axis,
            values: self.values.clone(),
            trials: self.trials,
            seed: self.seed,
            pipeline: self.pipeline.clone(),
            sources: vec![PairSource::Synthetic {
                spec: self.parallax.clone(),
                scene_height: self.scene_size,
                scene_width: self.scene_size,
            }],
            baseline: self.baseline,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_accepted() {
        let samples = [
            ("snr", "3"),
            ("cbr", "0.05"),
            ("budget-k", "100"),
            ("power", "2"),
            ("seed", "9"),
            ("block-size", "16"),
            ("q", "0.01"),
            ("feather", "2"),
            ("poisson", "true"),
            ("poisson-iterations", "50"),
            ("seam-weight", "0.5"),
            ("estimator", "truth"),
            ("refiner", "none"),
            ("blend", "hard"),
            ("shrink", "naive"),
            ("ransac-iterations", "100"),
            ("ransac-threshold", "3"),
            ("min-inliers", "6"),
            ("max-keypoints", "300"),
            ("fast-threshold", "0.1"),
            ("ratio", "0.8"),
            ("refine-iterations", "5"),
            ("axis", "cbr"),
            ("values", "0.01,0.02"),
            ("trials", "3"),
            ("overlap", "0.5"),
            ("rotation", "2"),
            ("perspective", "0.1"),
            ("jitter", "0.01"),
            ("frame-size", "128"),
            ("scene-size", "200"),
            ("baseline", "false"),
            ("threads", "2"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut s = Settings::default();
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            s.set(k, v).unwrap();
        }
        assert_eq!(s.values, vec![0.01, 0.02]);
        assert_eq!(s.pipeline.channel.seed, 9);
        assert_eq!(s.pipeline.strategies.blender, "hard");
        assert!(!s.pipeline.blend.poisson);
        assert_eq!(s.threads, Some(2));
    }

    #[test]
    fn text_parsing() {
        let mut s = Settings::default();
        s.apply_text("# sweep\nsnr = 5\n\nblock_size=16 # comment\naxis=overlap\n")
            .unwrap();
        assert_eq!(s.pipeline.channel.snr_db, 5.0);
        assert_eq!(s.pipeline.block_size, 16);
        assert_eq!(s.axis, Axis::Overlap);
        assert!(matches!(
            s.apply_text("snr 5"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            s.set("colour", "red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            s.set("trials", "-1"),
            Err(ConfigError::Value { .. })
        ));
    }

    #[test]
    fn poisson_flag_switches_blender() {
        let mut s = Settings::default();
        s.set("poisson", "on").unwrap();
        assert_eq!(s.pipeline.strategies.blender, "poisson");
        s.set("poisson", "off").unwrap();
        assert_eq!(s.pipeline.strategies.blender, "feather");
    }
}
