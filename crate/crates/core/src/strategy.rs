//! Interchangeable pipeline stages, registered by name.
//!
//! Four stage kinds are pluggable: homography estimation, homography
//! refinement, seam blending and decoder shrinkage. A [`Registry`] maps names
//! to constructors so configurations and the command line can pick variants
//! at runtime; callers may register their own.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{IdentityShrinkage, MmseShrinkage, Shrinkage};
use crate::features::{match_images, DEFAULT_FAST_THRESHOLD, DEFAULT_MAX_KEYPOINTS, DEFAULT_RATIO};
use crate::geometry::{
    ransac_homography, refine_homography, GeometryError, Homography, RansacConfig, RefineConfig,
};
use crate::image::Image;
use crate::reconstruct::{BlendConfig, Blender, FeatherBlend, HardBlend, PoissonBlend};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("unknown {kind} strategy {name:?} (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub max_keypoints: usize,
    pub fast_threshold: f64,
    pub ratio: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_keypoints: DEFAULT_MAX_KEYPOINTS,
            fast_threshold: DEFAULT_FAST_THRESHOLD,
            ratio: DEFAULT_RATIO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    /// Maps side-frame coordinates into the transmitted frame.
    pub homography: Homography,
    pub matches: usize,
    pub inliers: usize,
}

pub trait HomographyEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    /// `truth` is the generator's homography when one is known.
    fn estimate(
        &self,
        x: &Image,
        y: &Image,
        truth: Option<&Homography>,
    ) -> Result<Estimate, GeometryError>;
}

/// Corner matching followed by RANSAC.
#[derive(Debug, Clone, Default)]
pub struct FeatureRansac {
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
}

impl HomographyEstimator for FeatureRansac {
    fn name(&self) -> &'static str {
        "ransac"
    }

    fn estimate(
        &self,
        x: &Image,
        y: &Image,
        _truth: Option<&Homography>,
    ) -> Result<Estimate, GeometryError> {
        let f = &self.features;
        let matches = match_images(y, x, f.max_keypoints, f.fast_threshold, f.ratio);
        let r = ransac_homography(&matches, &self.ransac)?;
        Ok(Estimate {
            homography: r.homography,
            matches: matches.len(),
            inliers: r.inliers.len(),
        })
    }
}

/// A homography supplied from outside, e.g. read from a file.
#[derive(Debug, Clone)]
pub struct GivenHomography(pub Homography);

impl HomographyEstimator for GivenHomography {
    fn name(&self) -> &'static str {
        "given"
    }

    fn estimate(
        &self,
        _x: &Image,
        _y: &Image,
        _truth: Option<&Homography>,
    ) -> Result<Estimate, GeometryError> {
        Ok(Estimate {
            homography: self.0,
            matches: 0,
            inliers: 0,
        })
    }
}

/// Uses the generator's homography; fails when none is known.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth;

impl HomographyEstimator for GroundTruth {
    fn name(&self) -> &'static str {
        "truth"
    }

    fn estimate(
        &self,
        _x: &Image,
        _y: &Image,
        truth: Option<&Homography>,
    ) -> Result<Estimate, GeometryError> {
        let h = truth.ok_or_else(|| {
            GeometryError::Config("no ground-truth homography for this pair".into())
        })?;
        Ok(Estimate {
            homography: *h,
            matches: 0,
            inliers: 0,
        })
    }
}

pub trait Refiner: Send + Sync {
    fn name(&self) -> &'static str;
    fn refine(&self, x: &Image, y: &Image, h0: &Homography) -> Result<Homography, GeometryError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoRefine;

impl Refiner for NoRefine {
    fn name(&self) -> &'static str {
        "none"
    }

    fn refine(&self, _x: &Image, _y: &Image, h0: &Homography) -> Result<Homography, GeometryError> {
        Ok(*h0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PhotometricRefine(pub RefineConfig);

impl Refiner for PhotometricRefine {
    fn name(&self) -> &'static str {
        "photometric"
    }

    fn refine(&self, x: &Image, y: &Image, h0: &Homography) -> Result<Homography, GeometryError> {
        Ok(refine_homography(x, y, h0, &self.0)?.homography)
    }
}

/// Parameters the constructors draw from.
#[derive(Debug, Clone, Default)]
pub struct StageParams {
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
    pub refine: RefineConfig,
    pub blend: BlendConfig,
}

type Ctor<T> = fn(&StageParams) -> Box<T>;

pub struct Registry {
    estimators: BTreeMap<&'static str, Ctor<dyn HomographyEstimator>>,
    refiners: BTreeMap<&'static str, Ctor<dyn Refiner>>,
    blenders: BTreeMap<&'static str, Ctor<dyn Blender>>,
    shrinkers: BTreeMap<&'static str, Ctor<dyn Shrinkage>>,
}

fn lookup<T: ?Sized>(
    map: &BTreeMap<&'static str, Ctor<T>>,
    kind: &'static str,
    name: &str,
    p: &StageParams,
) -> Result<Box<T>, StrategyError> {
    map.get(name)
        .map(|ctor| ctor(p))
        .ok_or_else(|| StrategyError::Unknown {
            kind,
            name: name.to_string(),
            known: map.keys().copied().collect::<Vec<_>>().join(", "),
        })
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self {
            estimators: BTreeMap::new(),
            refiners: BTreeMap::new(),
            blenders: BTreeMap::new(),
            shrinkers: BTreeMap::new(),
        };
        r.register_estimator("ransac", |p| {
            Box::new(FeatureRansac {
                features: p.features.clone(),
                ransac: p.ransac.clone(),
            })
        });
        r.register_estimator("truth", |_| Box::new(GroundTruth));
        r.register_refiner("none", |_| Box::new(NoRefine));
        r.register_refiner("photometric", |p| {
            Box::new(PhotometricRefine(p.refine.clone()))
        });
        r.register_blender("hard", |_| Box::new(HardBlend));
        r.register_blender("feather", |p| {
            Box::new(FeatherBlend {
                width: p.blend.feather_width,
            })
        });
        r.register_blender("poisson", |p| {
            Box::new(PoissonBlend {
                feather_width: p.blend.feather_width,
                iterations: p.blend.poisson_iterations,
                seam_weight_b: p.blend.seam_weight_b,
            })
        });
        r.register_shrinkage("mmse", |_| Box::new(MmseShrinkage));
        r.register_shrinkage("naive", |_| Box::new(IdentityShrinkage));
        r
    }
}

impl Registry {
    pub fn register_estimator(&mut self, name: &'static str, ctor: Ctor<dyn HomographyEstimator>) {
        self.estimators.insert(name, ctor);
    }

    pub fn register_refiner(&mut self, name: &'static str, ctor: Ctor<dyn Refiner>) {
        self.refiners.insert(name, ctor);
    }

    pub fn register_blender(&mut self, name: &'static str, ctor: Ctor<dyn Blender>) {
        self.blenders.insert(name, ctor);
    }

    pub fn register_shrinkage(&mut self, name: &'static str, ctor: Ctor<dyn Shrinkage>) {
        self.shrinkers.insert(name, ctor);
    }

    pub fn estimator(
        &self,
        name: &str,
        p: &StageParams,
    ) -> Result<Box<dyn HomographyEstimator>, StrategyError> {
        lookup(&self.estimators, "estimator", name, p)
    }

    pub fn refiner(&self, name: &str, p: &StageParams) -> Result<Box<dyn Refiner>, StrategyError> {
        lookup(&self.refiners, "refiner", name, p)
    }

    pub fn blender(&self, name: &str, p: &StageParams) -> Result<Box<dyn Blender>, StrategyError> {
        lookup(&self.blenders, "blender", name, p)
    }

    pub fn shrinkage(
        &self,
        name: &str,
        p: &StageParams,
    ) -> Result<Box<dyn Shrinkage>, StrategyError> {
        lookup(&self.shrinkers, "shrinkage", name, p)
    }

    pub fn estimator_names(&self) -> Vec<&'static str> {
        self.estimators.keys().copied().collect()
    }

    pub fn refiner_names(&self) -> Vec<&'static str> {
        self.refiners.keys().copied().collect()
    }

    pub fn blender_names(&self) -> Vec<&'static str> {
        self.blenders.keys().copied().collect()
    }

    pub fn shrinkage_names(&self) -> Vec<&'static str> {
        self.shrinkers.keys().copied().collect()
    }
}
