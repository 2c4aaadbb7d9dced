//! Full-reference quality metrics on `[0, 1]` images.

use crate::image::{Image, ImageError};

/// Finite stand-in for an infinite PSNR in tabular output.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64, ImageError> {
    a.same_dims(b)?;
    let s: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(s / a.len() as f64)
}

/// PSNR with peak 1.0; identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, ImageError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

pub fn cap_psnr(db: f64) -> f64 {
    db.min(PSNR_CAP_DB)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsSsim {
    pub value: f64,
    /// Number of dyadic scales actually evaluated (5 when the short side is ≥ 176).
    pub scales: usize,
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering of a plane with the 11-tap Gaussian.
fn filter_valid(p: &[f64], h: usize, w: usize, k: &[f64; WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = w + 1 - WINDOW;
    let oh = h + 1 - WINDOW;
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..WINDOW).map(|i| k[i] * p[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean luminance·cs and mean cs over the SSIM map.
fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize) -> (f64, f64) {
    if h < WINDOW || w < WINDOW {
        // Too small for the window: one global statistic.
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
        let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
        let cov = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / n;
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        let cs = (2.0 * cov + C2) / (va + vb + C2);
        return (l * cs, cs);
    }
    let k = gaussian_kernel();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mu_a, oh, ow) = filter_valid(a, h, w, &k);
    let (mu_b, ..) = filter_valid(b, h, w, &k);
    let (s_aa, ..) = filter_valid(&aa, h, w, &k);
    let (s_bb, ..) = filter_valid(&bb, h, w, &k);
    let (s_ab, ..) = filter_valid(&ab, h, w, &k);
    let n = (oh * ow) as f64;
    let (mut lcs, mut cs) = (0.0, 0.0);
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = s_aa[i] - ma * ma;
        let vb = s_bb[i] - mb * mb;
        let cov = s_ab[i] - ma * mb;
        let l = (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        let c = (2.0 * cov + C2) / (va + vb + C2);
        lcs += l * c;
        cs += c;
    }
    (lcs / n, cs / n)
}

fn downsample(p: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let i = 2 * r * w + 2 * c;
            out[r * ow + c] = 0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1]);
        }
    }
    (out, oh, ow)
}

/// Number of dyadic scales that keep the short side at least one window wide.
pub fn ms_ssim_scales(height: usize, width: usize) -> usize {
    let short = height.min(width);
    (1..=MS_SSIM_WEIGHTS.len())
        .rev()
        .find(|&s| short >= WINDOW << (s - 1))
        .unwrap_or(1)
}

/// Multi-scale SSIM, averaged over channels and clamped to `[0, 1]`.
///
/// Fewer than five scales are used for small images, with the leading
/// weights renormalized to sum to one.
pub fn ms_ssim(a: &Image, b: &Image) -> Result<MsSsim, ImageError> {
    a.same_dims(b)?;
    let scales = ms_ssim_scales(a.height(), a.width());
    let weights = &MS_SSIM_WEIGHTS[..scales];
    let wsum: f64 = weights.iter().sum();
    let mut total = 0.0;
    for ch in 0..a.channels() {
        let (mut pa, mut pb) = (a.plane(ch), b.plane(ch));
        let (mut h, mut w) = (a.height(), a.width());
        let mut value = 1.0;
        for (s, wt) in weights.iter().enumerate() {
            let (lcs, cs) = ssim_terms(&pa, &pb, h, w);
            let term = if s + 1 == scales { lcs } else { cs };
            value *= term.max(0.0).powf(wt / wsum);
            if s + 1 < scales {
                let (da, nh, nw) = downsample(&pa, h, w);
                let (db, ..) = downsample(&pb, h, w);
                pa = da;
                pb = db;
                h = nh;
                w = nw;
            }
        }
        total += value;
    }
    Ok(MsSsim {
        value: (total / a.channels() as f64).clamp(0.0, 1.0),
        scales,
    })
}
