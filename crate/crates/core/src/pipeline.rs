//! One end-to-end transmission: estimate → mask → encode → channel → decode
//! → reconstruct → score.

use log::{debug, warn};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{cbr, normalize_power, transmit, ChannelConfig, ChannelError};
use crate::codec::{
    budget_floor, decode, encode, metadata_len, CodecError, CodecParams, DimensionBank,
    DEFAULT_BLOCK_SIZE, DEFAULT_Q,
};
use crate::geometry::{
    corner_transfer_error, generate_mask_between, warp_image, GeometryError, Homography,
    RansacConfig, RefineConfig,
};
use crate::image::{apply_mask, Image, ImageError, Mask};
use crate::metrics::{ms_ssim, psnr};
use crate::reconstruct::{seam_score, BlendConfig, ReconstructError};
use crate::strategy::{
    FeatureConfig, GivenHomography, HomographyEstimator, Registry, StageParams, StrategyError,
};

/// Bytes needed to share a homography: nine `f32` entries.
pub const HOMOGRAPHY_BYTES: usize = 36;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// How many channel symbols a trial may spend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Symbols(usize),
    /// Target channel bandwidth ratio; converted with `round(cbr·H·W·C)`.
    Cbr(f64),
}

impl Budget {
    /// Symbol budget for a frame, raised to `floor` when below it.
    pub fn resolve(&self, height: usize, width: usize, channels: usize, floor: usize) -> usize {
        let k = match *self {
            Budget::Symbols(k) => k,
            Budget::Cbr(r) => (r * (height * width * channels) as f64).round().max(0.0) as usize,
        };
        k.max(floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategies {
    pub estimator: String,
    pub refiner: String,
    pub blender: String,
    pub shrinkage: String,
}

impl Default for Strategies {
    fn default() -> Self {
        Self {
            estimator: "ransac".into(),
            refiner: "photometric".into(),
            blender: "feather".into(),
            shrinkage: "mmse".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub ransac: RansacConfig,
    pub refine: RefineConfig,
    pub blend: BlendConfig,
    pub channel: ChannelConfig,
    pub budget: Budget,
    pub block_size: usize,
    pub bank: DimensionBank,
    pub q: f64,
    pub strategies: Strategies,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            ransac: RansacConfig::default(),
            refine: RefineConfig::default(),
            blend: BlendConfig::default(),
            channel: ChannelConfig::default(),
            budget: Budget::Cbr(0.031),
            block_size: DEFAULT_BLOCK_SIZE,
            bank: DimensionBank::default(),
            q: DEFAULT_Q,
            strategies: Strategies::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<(), PipelineError> {
        self.ransac.validate()?;
        self.refine.validate()?;
        self.blend.validate(height, width)?;
        if !(self.channel.power > 0.0) {
            return Err(PipelineError::Config(
                "channel power must be positive".into(),
            ));
        }
        if self.block_size < 2 || self.block_size > 255 {
            return Err(PipelineError::Config(
                "block size must lie in [2, 255]".into(),
            ));
        }
        if !(self.q > 0.0) {
            return Err(PipelineError::Config("q must be positive".into()));
        }
        if let Budget::Cbr(r) = self.budget {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(PipelineError::Config(
                    "target cbr must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn stage_params(&self) -> StageParams {
        StageParams {
            features: self.features.clone(),
            ransac: self.ransac.clone(),
            refine: self.refine.clone(),
            blend: self.blend.clone(),
        }
    }

    fn codec_params(&self, budget_k: usize) -> CodecParams {
        CodecParams {
            bank: self.bank.clone(),
            budget_k,
            block_size: self.block_size,
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub psnr_db: f64,
    pub ms_ssim: f64,
    /// Channel symbols over source samples; metadata is not included.
    pub cbr: f64,
    pub symbols: usize,
    /// Side metadata: payload header, allocation indices, variances and
    /// the shared homography.
    pub metadata_bytes: usize,
    pub seam: f64,
    pub snr_db: f64,
    /// Mean corner displacement against the known homography, in pixels.
    pub homography_error: Option<f64>,
    /// Homography estimation failed and the whole frame was transmitted.
    pub fallback: bool,
    pub mask_fraction: f64,
    pub homography: Option<Homography>,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub report: TrialReport,
    pub reconstruction: Image,
    pub mask: Mask,
}

/// Encodes `x` through the mask, sends it over the channel and decodes.
fn transmit_residual(
    x: &Image,
    mask: &Mask,
    cfg: &PipelineConfig,
    shrink: &dyn crate::codec::Shrinkage,
) -> Result<(Image, usize, usize), PipelineError> {
    let (h, w, c) = x.dims();
    let residual = apply_mask(x, mask)?;
    let floor = budget_floor(mask, c, cfg.block_size, &cfg.bank);
    let budget_k = cfg.budget.resolve(h, w, c, floor);
    let payload = encode(&residual, mask, &cfg.codec_params(budget_k))?;
    let meta_bytes = metadata_len(&payload.meta) + HOMOGRAPHY_BYTES;
    let k = payload.symbols.len();
    let decoded = match normalize_power(&payload.symbols, cfg.channel.power) {
        Ok((z, scale)) => {
            let received = transmit(&z, &cfg.channel);
            let unscaled: Vec<Complex64> = received.iter().map(|v| v / scale).collect();
            let noise_var = cfg.channel.noise_var() / (scale * scale);
            decode(&unscaled, &payload.meta, noise_var, shrink)?
        }
        // Nothing to send, or an all-zero residual: the decoder outputs zeros.
        Err(ChannelError::ZeroNorm) => Image::zeros(h, w, c)?,
        Err(e) => return Err(e.into()),
    };
    Ok((decoded, k, meta_bytes))
}

fn score(x: &Image, out: &Image, mask: &Mask) -> Result<(f64, f64, f64), PipelineError> {
    Ok((psnr(out, x)?, ms_ssim(out, x)?.value, seam_score(out, mask)))
}

/// Runs one trial with the strategies named in `cfg`.
pub fn run_pipeline(
    x: &Image,
    y: &Image,
    cfg: &PipelineConfig,
    h_true: Option<&Homography>,
) -> Result<TrialOutput, PipelineError> {
    let registry = Registry::default();
    let estimator = registry.estimator(&cfg.strategies.estimator, &cfg.stage_params())?;
    run_pipeline_with(x, y, cfg, h_true, estimator.as_ref(), &registry)
}

/// Runs one trial with a homography supplied by the caller.
pub fn run_pipeline_given(
    x: &Image,
    y: &Image,
    cfg: &PipelineConfig,
    h: Homography,
    h_true: Option<&Homography>,
) -> Result<TrialOutput, PipelineError> {
    run_pipeline_with(x, y, cfg, h_true, &GivenHomography(h), &Registry::default())
}

pub fn run_pipeline_with(
    x: &Image,
    y: &Image,
    cfg: &PipelineConfig,
    h_true: Option<&Homography>,
    estimator: &dyn HomographyEstimator,
    registry: &Registry,
) -> Result<TrialOutput, PipelineError> {
    cfg.validate(x.height(), x.width())?;
    if x.channels() != y.channels() {
        return Err(ImageError::Mismatch {
            left: x.dims(),
            right: y.dims(),
        }
        .into());
    }
    let params = cfg.stage_params();
    let refiner = registry.refiner(&cfg.strategies.refiner, &params)?;
    let blender = registry.blender(&cfg.strategies.blender, &params)?;
    let shrink = registry.shrinkage(&cfg.strategies.shrinkage, &params)?;
    let (hx, wx) = (x.height(), x.width());

    let estimate = estimator.estimate(x, y, h_true).and_then(|e| {
        let h = refiner.refine(x, y, &e.homography)?;
        Ok((e, h))
    });
    let h_star = match estimate {
        Ok((e, h)) => {
            debug!("{} matches, {} inliers", e.matches, e.inliers);
            Some(h)
        }
        Err(err) => {
            warn!("homography estimation failed ({err}); transmitting the full frame");
            None
        }
    };
    let mask = match &h_star {
        Some(h) => generate_mask_between(h, (y.height(), y.width()), (hx, wx)),
        None => Mask::filled(hx, wx, true),
    };
    let (x_tilde, k, metadata_bytes) = transmit_residual(x, &mask, cfg, shrink.as_ref())?;
    let reconstruction = match &h_star {
        Some(h) => {
            let y_hat = warp_image(y, h, hx, wx);
            blender.blend(&x_tilde, &y_hat, &mask)?
        }
        // The side image is never consulted without a homography.
        None => x_tilde,
    };
    let (psnr_db, ms, seam) = score(x, &reconstruction, &mask)?;
    let homography_error = match (&h_star, h_true) {
        (Some(h), Some(t)) => Some(corner_transfer_error(h, t, hx, wx)),
        _ => None,
    };
    Ok(TrialOutput {
        report: TrialReport {
            psnr_db,
            ms_ssim: ms,
            cbr: cbr(k, hx, wx, x.channels()),
            symbols: k,
            metadata_bytes,
            seam,
            snr_db: cfg.channel.snr_db,
            homography_error,
            fallback: h_star.is_none(),
            mask_fraction: mask.true_fraction(),
            homography: h_star,
        },
        reconstruction,
        mask,
    })
}

/// The no-side-information reference: the whole frame goes through the
/// codec and channel under the same budget policy.
pub fn run_baseline(x: &Image, cfg: &PipelineConfig) -> Result<TrialOutput, PipelineError> {
    cfg.validate(x.height(), x.width())?;
    let registry = Registry::default();
    let shrink = registry.shrinkage(&cfg.strategies.shrinkage, &cfg.stage_params())?;
    let (h, w, c) = x.dims();
    let mask = Mask::filled(h, w, true);
    let (reconstruction, k, metadata_bytes) = transmit_residual(x, &mask, cfg, shrink.as_ref())?;
    let (psnr_db, ms, seam) = score(x, &reconstruction, &mask)?;
    Ok(TrialOutput {
        report: TrialReport {
            psnr_db,
            ms_ssim: ms,
            cbr: cbr(k, h, w, c),
            symbols: k,
            metadata_bytes: metadata_bytes - HOMOGRAPHY_BYTES,
            seam,
            snr_db: cfg.channel.snr_db,
            homography_error: None,
            fallback: false,
            mask_fraction: 1.0,
            homography: None,
        },
        reconstruction,
        mask,
    })
}
