use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use rwzc::config::Settings;
use rwzc::features::{match_images, write_matches_csv};
use rwzc::geometry::{generate_mask, read_homography, write_homography};
use rwzc::image::{load_image, save_image};
use rwzc::pipeline::{run_baseline, run_pipeline, run_pipeline_given, TrialReport};
use rwzc::strategy::Registry;
use rwzc::sweep::{run_sweep, write_csv, PairSource};
use rwzc::synth::{synth_pair, synthetic_scene};

const THREADS_ENV: &str = "RWZC_THREADS";

#[derive(Parser)]
#[command(
    name = "rwzc",
    version,
    about = "Wyner-Ziv image transmission with homography-aligned side information"
)]
struct Cli {
    /// Flat key=value settings file; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (also capped by RWZC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Pipeline knobs shared by several subcommands.
#[derive(Args, Default)]
struct Knobs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    cbr: Option<f64>,
    /// Symbol budget; overrides --cbr.
    #[arg(long)]
    budget_k: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    feather: Option<usize>,
    #[arg(long)]
    poisson: bool,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    refiner: Option<String>,
    #[arg(long)]
    blend: Option<String>,
    #[arg(long)]
    shrink: Option<String>,
    /// Any other setting, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl Knobs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("snr", self.snr.map(|v| v.to_string()));
        push("cbr", self.cbr.map(|v| v.to_string()));
        push("budget-k", self.budget_k.map(|v| v.to_string()));
        push("block-size", self.block_size.map(|v| v.to_string()));
        push("feather", self.feather.map(|v| v.to_string()));
        push("estimator", self.estimator.clone());
        push("refiner", self.refiner.clone());
        push("blend", self.blend.clone());
        push("shrink", self.shrink.clone());
        push("poisson", self.poisson.then(|| "true".to_string()));
        for (k, v) in pairs {
            s.set(k, &v)?;
        }
        for kv in &self.extra {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            s.set(k, v)?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the homography mapping the side image y onto x.
    Estimate {
        x: PathBuf,
        y: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump putative matches as x1,y1,x2,y2,distance.
        #[arg(long)]
        matches: Option<PathBuf>,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Print the transmit-mask fraction for a homography and frame size.
    Mask {
        h: PathBuf,
        height: usize,
        width: usize,
        /// Write the mask as an image (white = transmit).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a procedural test scene usable as a synth base.
    Scene {
        out: PathBuf,
        #[arg(long, default_value_t = 384)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grayscale instead of RGB.
        #[arg(long)]
        gray: bool,
    },
    /// Render a synthetic (x, y, h_true) triple from a base image.
    Synth {
        base: PathBuf,
        #[arg(long)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        rotation: Option<f64>,
        #[arg(long)]
        perspective: Option<f64>,
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        frame_size: Option<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run one transmission and report quality and rate.
    Pipeline {
        x: PathBuf,
        y: PathBuf,
        /// Use this homography instead of estimating one.
        #[arg(long)]
        h: Option<PathBuf>,
        /// Ground-truth homography for error reporting.
        #[arg(long)]
        h_true: Option<PathBuf>,
        /// Write the reconstruction here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run the all-true-mask reference.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Monte-Carlo sweep over snr, cbr or overlap.
    Sweep {
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values, e.g. `-1,3,9`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        overlap: Option<f64>,
        /// Use a fixed file pair instead of synthetic scenes.
        #[arg(long, num_args = 2, value_names = ["X", "Y"])]
        pair: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
}

fn thread_cap(flag: Option<usize>, configured: Option<usize>) -> Result<Option<usize>> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("{THREADS_ENV}={v:?}"))?,
        ),
        Err(_) => None,
    };
    let cap = [flag.or(configured), env].into_iter().flatten().min();
    if cap == Some(0) {
        bail!("thread count must be positive");
    }
    Ok(cap)
}

fn print_report(r: &TrialReport, label: &str) {
    println!("[{label}]");
    println!("psnr_db={:.4}", rwzc::metrics::cap_psnr(r.psnr_db));
    println!("ms_ssim={:.6}", r.ms_ssim);
    println!("cbr={:.6}", r.cbr);
    println!("symbols={}", r.symbols);
    println!("metadata_bytes={}", r.metadata_bytes);
    println!("seam={:.6}", r.seam);
    println!("snr_db={}", r.snr_db);
    println!("mask_fraction={:.6}", r.mask_fraction);
    println!("fallback={}", r.fallback);
    if let Some(e) = r.homography_error {
        println!("homography_error_px={e:.6}");
    }
}

fn estimate(
    x: &Path,
    y: &Path,
    out: Option<&Path>,
    matches: Option<&Path>,
    s: &Settings,
) -> Result<()> {
    let xi = load_image(x)?;
    let yi = load_image(y)?;
    let p = &s.pipeline;
    if let Some(path) = matches {
        let f = &p.features;
        let pairs = match_images(&yi, &xi, f.max_keypoints, f.fast_threshold, f.ratio);
        write_matches_csv(BufWriter::new(File::create(path)?), &pairs)?;
    }
    let registry = Registry::default();
    let params = p.stage_params();
    let est = registry
        .estimator(&p.strategies.estimator, &params)?
        .estimate(&xi, &yi, None)
        .context("homography estimation failed")?;
    let h = registry
        .refiner(&p.strategies.refiner, &params)?
        .refine(&xi, &yi, &est.homography)?;
    eprintln!("{} matches, {} inliers", est.matches, est.inliers);
    match out {
        Some(path) => write_homography(&h, path)?,
        None => print!("{}", rwzc::geometry::format_homography(&h)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    if let Some(n) = thread_cap(cli.threads, s.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
        info!("using {n} threads");
    }
    match cli.command {
        Command::Estimate {
            x,
            y,
            out,
            matches,
            knobs,
        } => {
            knobs.apply(&mut s)?;
            estimate(&x, &y, out.as_deref(), matches.as_deref(), &s)
        }
        Command::Mask {
            h,
            height,
            width,
            out,
        } => {
            let m = generate_mask(&read_homography(&h)?, height, width);
            println!("{:.6}", m.true_fraction());
            if let Some(path) = out {
                save_image(&m.to_image(), path)?;
            }
            Ok(())
        }
        Command::Scene {
            out,
            size,
            seed,
            gray,
        } => {
            save_image(
                &synthetic_scene(size, size, if gray { 1 } else { 3 }, seed),
                out,
            )?;
            Ok(())
        }
        Command::Synth {
            base,
            overlap,
            seed,
            rotation,
            perspective,
            jitter,
            frame_size,
            out_dir,
        } => {
            s.set("overlap", &overlap.to_string())?;
            s.set("seed", &seed.to_string())?;
            for (k, v) in [
                ("rotation", rotation),
                ("perspective", perspective),
                ("jitter", jitter),
            ] {
                if let Some(v) = v {
                    s.set(k, &v.to_string())?;
                }
            }
            if let Some(n) = frame_size {
                s.set("frame-size", &n.to_string())?;
            }
            let pair = synth_pair(&load_image(&base)?, &s.parallax)?;
            std::fs::create_dir_all(&out_dir)?;
            save_image(&pair.x, out_dir.join("x.png"))?;
            save_image(&pair.y, out_dir.join("y.png"))?;
            write_homography(&pair.h_true, out_dir.join("h_true.txt"))?;
            println!("overlap={:.6}", pair.overlap);
            Ok(())
        }
        Command::Pipeline {
            x,
            y,
            h,
            h_true,
            out,
            baseline,
            knobs,
        } => {
            knobs.apply(&mut s)?;
            let xi = load_image(&x)?;
            let yi = load_image(&y)?;
            let truth = h_true.map(read_homography).transpose()?;
            let result = match h {
                Some(path) => run_pipeline_given(
                    &xi,
                    &yi,
                    &s.pipeline,
                    read_homography(path)?,
                    truth.as_ref(),
                )?,
                None => run_pipeline(&xi, &yi, &s.pipeline, truth.as_ref())?,
            };
            print_report(&result.report, "pipeline");
            if baseline {
                print_report(&run_baseline(&xi, &s.pipeline)?.report, "baseline");
            }
            if let Some(path) = out {
                save_image(&result.reconstruction, path)?;
            }
            Ok(())
        }
        Command::Sweep {
            axis,
            values,
            trials,
            overlap,
            pair,
            out,
            knobs,
        } => {
            if let Some(a) = axis {
                s.set("axis", &a)?;
            }
            if !values.is_empty() {
                s.values = values;
            }
            if let Some(t) = trials {
                s.set("trials", &t.to_string())?;
            }
            if let Some(o) = overlap {
                s.set("overlap", &o.to_string())?;
            }
            knobs.apply(&mut s)?;
            let mut cfg = s.sweep_config();
            if let [x, y] = pair.as_slice() {
                cfg.sources = vec![PairSource::Files {
                    x: load_image(x)?,
                    y: load_image(y)?,
                    h_true: None,
                }];
            }
            let rows = run_sweep(&cfg)?;
            let mut w = BufWriter::new(
                File::create(&out).with_context(|| format!("creating {}", out.display()))?,
            );
            write_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
