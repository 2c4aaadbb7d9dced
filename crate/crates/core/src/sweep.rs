//! Monte-Carlo sweeps over SNR, CBR or overlap, aggregated into a CSV table.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::geometry::Homography;
use crate::image::Image;
use crate::metrics::cap_psnr;
use crate::pipeline::{
    run_baseline, run_pipeline, Budget, PipelineConfig, PipelineError, TrialReport,
};
use crate::synth::{synth_pair, synthetic_scene, ParallaxSpec};

pub const CSV_HEADER: [&str; 11] = [
    "axis",
    "value",
    "psnr_mean",
    "psnr_std",
    "msssim_mean",
    "msssim_std",
    "cbr",
    "metadata_bytes",
    "seam_mean",
    "homog_err_mean",
    "fallback_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Snr,
    Cbr,
    Overlap,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Snr => "snr",
            Axis::Cbr => "cbr",
            Axis::Overlap => "overlap",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snr" => Ok(Axis::Snr),
            "cbr" => Ok(Axis::Cbr),
            "overlap" => Ok(Axis::Overlap),
            other => Err(format!(
                "unknown axis {other:?} (expected snr, cbr or overlap)"
            )),
        }
    }
}

/// Where a sweep's image pairs come from.
#[derive(Debug, Clone)]
pub enum PairSource {
    /// A fresh scene and side view per trial, seeded by the trial seed.
    Synthetic {
        spec: ParallaxSpec,
        scene_height: usize,
        scene_width: usize,
    },
    /// The same pair every trial; only channel and estimator seeds vary.
    Files {
        x: Image,
        y: Image,
        h_true: Option<Homography>,
    },
}

impl Default for PairSource {
    fn default() -> Self {
        PairSource::Synthetic {
            spec: ParallaxSpec {
                overlap_target: 0.7,
                ..Default::default()
            },
            scene_height: 384,
            scene_width: 384,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub sources: Vec<PairSource>,
    /// Also emit all-true-mask reference rows, labelled `<axis>-baseline`.
    pub baseline: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Snr,
            values: vec![-1.0, 1.0, 3.0, 5.0, 7.0, 9.0],
            trials: 4,
            seed: 0,
            pipeline: PipelineConfig::default(),
            sources: vec![PairSource::default()],
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub msssim_mean: f64,
    pub msssim_std: f64,
    pub cbr: f64,
    pub metadata_bytes: f64,
    pub seam_mean: f64,
    /// NaN when no trial had both an estimate and a ground truth.
    pub homog_err_mean: f64,
    pub fallback_rate: f64,
}

/// SplitMix64 finalizer: decorrelates consecutive seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and sample standard deviation; the deviation is 0 for one sample.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(axis: String, value: f64, reports: &[&TrialReport]) -> SweepRow {
    let col = |f: &dyn Fn(&TrialReport) -> f64| reports.iter().map(|r| f(r)).collect::<Vec<_>>();
    let (psnr_mean, psnr_std) = mean_std(&col(&|r| cap_psnr(r.psnr_db)));
    let (msssim_mean, msssim_std) = mean_std(&col(&|r| r.ms_ssim));
    let errs: Vec<f64> = reports.iter().filter_map(|r| r.homography_error).collect();
    SweepRow {
        axis,
        value,
        psnr_mean,
        psnr_std,
        msssim_mean,
        msssim_std,
        cbr: mean_std(&col(&|r| r.cbr)).0,
        metadata_bytes: mean_std(&col(&|r| r.metadata_bytes as f64)).0,
        seam_mean: mean_std(&col(&|r| r.seam)).0,
        homog_err_mean: mean_std(&errs).0,
        fallback_rate: mean_std(&col(&|r| f64::from(u8::from(r.fallback)))).0,
    }
}

/// One trial's inputs, fully determined by `(value, source, trial)`.
fn trial_inputs(
    cfg: &SweepConfig,
    value: f64,
    source: &PairSource,
    trial: usize,
) -> Result<(Image, Image, Option<Homography>, PipelineConfig), PipelineError> {
    let seed = mix_seed(cfg.seed, trial as u64);
    let mut p = cfg.pipeline.clone();
    p.channel.seed = mix_seed(seed, 1);
    p.ransac.seed = mix_seed(seed, 2);
    match cfg.axis {
        Axis::Snr => p.channel.snr_db = value,
        Axis::Cbr => p.budget = Budget::Cbr(value),
        Axis::Overlap => {}
    }
    match source {
        PairSource::Synthetic {
            spec,
            scene_height,
            scene_width,
        } => {
            let mut spec = spec.clone();
            spec.seed = seed;
            if cfg.axis == Axis::Overlap {
                spec.overlap_target = value;
            }
            let base = synthetic_scene(*scene_height, *scene_width, 3, seed);
            let pair =
                synth_pair(&base, &spec).map_err(|e| PipelineError::Config(e.to_string()))?;
            Ok((pair.x, pair.y, Some(pair.h_true), p))
        }
        PairSource::Files { x, y, h_true } => {
            if cfg.axis == Axis::Overlap {
                return Err(PipelineError::Config(
                    "the overlap axis needs synthetic pairs".into(),
                ));
            }
            Ok((x.clone(), y.clone(), *h_true, p))
        }
    }
}

/// Runs every `(value, source, trial)` combination and aggregates per value.
///
/// Trials run in parallel; rows come out ordered by axis value (as given),
/// each pipeline row followed by its baseline row.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, PipelineError> {
    if cfg.values.is_empty() || cfg.trials == 0 || cfg.sources.is_empty() {
        return Err(PipelineError::Config(
            "a sweep needs values, trials and pair sources".into(),
        ));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.values.len())
        .flat_map(|v| {
            (0..cfg.sources.len()).flat_map(move |s| (0..cfg.trials).map(move |t| (v, s, t)))
        })
        .collect();
    let results: Vec<(TrialReport, Option<TrialReport>)> = jobs
        .par_iter()
        .map(|&(v, s, t)| {
            let (x, y, h_true, p) = trial_inputs(cfg, cfg.values[v], &cfg.sources[s], t)?;
            let main = run_pipeline(&x, &y, &p, h_true.as_ref())?.report;
            let base = if cfg.baseline {
                Some(run_baseline(&x, &p)?.report)
            } else {
                None
            };
            Ok((main, base))
        })
        .collect::<Result<_, PipelineError>>()?;
    let per_value = cfg.sources.len() * cfg.trials;
    let mut rows = Vec::new();
    for (v, chunk) in results.chunks(per_value).enumerate() {
        let value = cfg.values[v];
        let main: Vec<&TrialReport> = chunk.iter().map(|(m, _)| m).collect();
        rows.push(aggregate(cfg.axis.to_string(), value, &main));
        if cfg.baseline {
            let base: Vec<&TrialReport> = chunk.iter().filter_map(|(_, b)| b.as_ref()).collect();
            rows.push(aggregate(format!("{}-baseline", cfg.axis), value, &base));
        }
    }
    Ok(rows)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            num(r.value),
            num(r.psnr_mean),
            num(r.psnr_std),
            num(r.msssim_mean),
            num(r.msssim_std),
            num(r.cbr),
            num(r.metadata_bytes),
            num(r.seam_mean),
            num(r.homog_err_mean),
            num(r.fallback_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
