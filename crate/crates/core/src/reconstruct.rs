//! Side-information-aided reconstruction: composite the decoded residual with
//! the warped side image and smooth the seam between them.

use std::collections::VecDeque;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{warp_image, Homography};
use crate::image::{Image, ImageError, Mask};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("invalid blend configuration: {0}")]
    Config(String),
    #[error("Poisson region touches the frame border")]
    RegionTouchesBorder,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlendConfig {
    pub feather_width: usize,
    pub poisson: bool,
    pub poisson_iterations: usize,
    /// Seam-versus-fidelity trade-off used to accept a Poisson correction.
    pub seam_weight_b: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            feather_width: 4,
            poisson: false,
            poisson_iterations: 200,
            seam_weight_b: 1.0,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self, height: usize, width: usize) -> Result<(), ReconstructError> {
        if self.feather_width > height.min(width) / 4 {
            return Err(ReconstructError::Config(format!(
                "feather width {} exceeds a quarter of the {height}x{width} frame",
                self.feather_width
            )));
        }
        if self.poisson && self.poisson_iterations == 0 {
            return Err(ReconstructError::Config(
                "poisson_iterations must be positive".into(),
            ));
        }
        if !(self.seam_weight_b >= 0.0) {
            return Err(ReconstructError::Config(
                "seam_weight_b must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// The blender this configuration describes.
    pub fn blender(&self) -> Box<dyn Blender> {
        if self.poisson {
            Box::new(PoissonBlend {
                feather_width: self.feather_width,
                iterations: self.poisson_iterations,
                seam_weight_b: self.seam_weight_b,
            })
        } else if self.feather_width > 0 {
            Box::new(FeatherBlend {
                width: self.feather_width,
            })
        } else {
            Box::new(HardBlend)
        }
    }
}

/// City-block distance from every pixel to the nearest mask pixel, and that
/// pixel's index. Unreachable pixels (empty mask) get `u32::MAX`.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    pub dist: Vec<u32>,
    pub nearest: Vec<usize>,
}

pub fn distance_to_mask(mask: &Mask) -> DistanceMap {
    let (h, w) = (mask.height(), mask.width());
    let mut dist = vec![u32::MAX; h * w];
    let mut nearest = vec![usize::MAX; h * w];
    let mut queue = VecDeque::new();
    for (i, &b) in mask.bits().iter().enumerate() {
        if b {
            dist[i] = 0;
            nearest[i] = i;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = (i / w, i % w);
        let mut visit = |j: usize| {
            if dist[j] == u32::MAX {
                dist[j] = dist[i] + 1;
                nearest[j] = nearest[i];
                queue.push_back(j);
            }
        };
        if r > 0 {
            visit(i - w);
        }
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < w {
            visit(i + 1);
        }
        if r + 1 < h {
            visit(i + w);
        }
    }
    DistanceMap { dist, nearest }
}

fn check_layers(x_tilde: &Image, y_hat: &Image, mask: &Mask) -> Result<(), ReconstructError> {
    x_tilde.same_dims(y_hat)?;
    if mask.height() != x_tilde.height() || mask.width() != x_tilde.width() {
        return Err(ImageError::Mismatch {
            left: x_tilde.dims(),
            right: (mask.height(), mask.width(), x_tilde.channels()),
        }
        .into());
    }
    Ok(())
}

/// `x_tilde` where the mask is set, `y_hat` elsewhere.
pub fn hard_composite(
    x_tilde: &Image,
    y_hat: &Image,
    mask: &Mask,
) -> Result<Image, ReconstructError> {
    check_layers(x_tilde, y_hat, mask)?;
    let (h, w, c) = x_tilde.dims();
    Ok(Image::from_fn(h, w, c, |r, col, ch| {
        if mask.get(r, col) {
            x_tilde.get(r, col, ch)
        } else {
            y_hat.get(r, col, ch)
        }
    })?)
}

/// Feathers the seam on the side-image side.
///
/// A pixel at distance `d ∈ [1, width]` from the mask becomes
/// `a·x_tilde(n) + (1 − a)·y_hat` with `a = 1 − d/(width + 1)` and `n` its
/// nearest mask pixel. Mask pixels keep the transmitted values.
pub fn feather(
    x_tilde: &Image,
    y_hat: &Image,
    mask: &Mask,
    width: usize,
) -> Result<Image, ReconstructError> {
    check_layers(x_tilde, y_hat, mask)?;
    let dm = distance_to_mask(mask);
    let (h, w, c) = x_tilde.dims();
    let data = x_tilde.data();
    Ok(Image::from_fn(h, w, c, |r, col, ch| {
        let i = r * w + col;
        let d = dm.dist[i] as usize;
        if d == 0 {
            x_tilde.get(r, col, ch)
        } else if d <= width {
            let a = 1.0 - d as f64 / (width + 1) as f64;
            a * data[dm.nearest[i] * c + ch] + (1.0 - a) * y_hat.get(r, col, ch)
        } else {
            y_hat.get(r, col, ch)
        }
    })?)
}

/// Neighbour offsets of interior pixel `i` in a `w`-wide raster.
#[inline]
fn neighbours(i: usize, w: usize) -> [usize; 4] {
    [i - w, i - 1, i + 1, i + w]
}

struct PoissonProblem<'a> {
    w: usize,
    region: &'a Mask,
    barrier: Option<&'a Mask>,
}

impl PoissonProblem<'_> {
    /// Guidance term `Σ_q (g_p − g_q)` over the four neighbours.
    fn divergence(&self, guide: &[f64], i: usize) -> f64 {
        neighbours(i, self.w)
            .iter()
            .filter(|&&j| !self.barrier.is_some_and(|b| b.bits()[j]))
            .map(|&j| guide[i] - guide[j])
            .sum()
    }

    fn check(&self, height: usize) -> Result<(), ReconstructError> {
        let w = self.w;
        for (i, &b) in self.region.bits().iter().enumerate() {
            if b {
                let (r, c) = (i / w, i % w);
                if r == 0 || c == 0 || r + 1 == height || c + 1 == w {
                    return Err(ReconstructError::RegionTouchesBorder);
                }
            }
        }
        Ok(())
    }

    fn residual(&self, u: &[f64], div: &[f64]) -> f64 {
        self.region
            .bits()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| {
                let lap: f64 =
                    4.0 * u[i] - neighbours(i, self.w).iter().map(|&j| u[j]).sum::<f64>();
                (lap - div[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Jacobi sweeps on one plane; values outside the region stay fixed.
    /// Returns the final plane and the residual before each sweep and after
    /// the last.
    fn solve(&self, base: &[f64], guide: &[f64], iterations: usize) -> (Vec<f64>, Vec<f64>) {
        let bits = self.region.bits();
        let div: Vec<f64> = (0..base.len())
            .map(|i| {
                if bits[i] {
                    self.divergence(guide, i)
                } else {
                    0.0
                }
            })
            .collect();
        let mut u = base.to_vec();
        let mut next = u.clone();
        let mut history = Vec::with_capacity(iterations + 1);
        for _ in 0..iterations {
            history.push(self.residual(&u, &div));
            next.par_iter_mut().enumerate().for_each(|(i, v)| {
                if bits[i] {
                    *v = (neighbours(i, self.w).iter().map(|&j| u[j]).sum::<f64>() + div[i]) / 4.0;
                }
            });
            std::mem::swap(&mut u, &mut next);
        }
        history.push(self.residual(&u, &div));
        (u, history)
    }
}

fn poisson_impl(
    base: &Image,
    region: &Mask,
    guide: &Image,
    barrier: Option<&Mask>,
    iterations: usize,
) -> Result<(Image, Vec<Vec<f64>>), ReconstructError> {
    base.same_dims(guide)?;
    if region.height() != base.height() || region.width() != base.width() {
        return Err(ImageError::Mismatch {
            left: base.dims(),
            right: (region.height(), region.width(), base.channels()),
        }
        .into());
    }
    let problem = PoissonProblem {
        w: base.width(),
        region,
        barrier,
    };
    problem.check(base.height())?;
    if region.count_true() == 0 {
        return Ok((base.clone(), vec![]));
    }
    let (planes, histories): (Vec<_>, Vec<_>) = (0..base.channels())
        .map(|ch| problem.solve(&base.plane(ch), &guide.plane(ch), iterations))
        .unzip();
    Ok((
        Image::from_planes(base.height(), base.width(), &planes)?,
        histories,
    ))
}

/// Gradient-domain correction of `base` on `region`: Jacobi iterations of
/// `∇²u = div ∇guide` with `base` as the Dirichlet boundary.
pub fn poisson_correct(
    base: &Image,
    region: &Mask,
    guide: &Image,
    iterations: usize,
) -> Result<Image, ReconstructError> {
    Ok(poisson_impl(base, region, guide, None, iterations)?.0)
}

/// [`poisson_correct`] that also returns, per channel, the residual norm
/// `‖∇²u − div g‖₂` before every sweep and after the last.
pub fn poisson_correct_traced(
    base: &Image,
    region: &Mask,
    guide: &Image,
    iterations: usize,
) -> Result<(Image, Vec<Vec<f64>>), ReconstructError> {
    poisson_impl(base, region, guide, None, iterations)
}

/// Mean absolute second difference across the mask boundary.
///
/// For every horizontally or vertically adjacent pair `(p, q)` with different
/// mask bits, the second difference along the pair direction is taken at
/// `p` and at `q` (where the stencil fits) and averaged; the score is the mean
/// over pairs and channels. Zero when the mask has no boundary.
pub fn seam_score(img: &Image, mask: &Mask) -> f64 {
    let (h, w, c) = img.dims();
    let d = img.data();
    let at = |r: usize, col: usize, ch: usize| d[(r * w + col) * c + ch];
    let mut total = 0.0;
    let mut pairs = 0usize;
    for r in 0..h {
        for col in 0..w {
            let here = mask.get(r, col);
            if col + 1 < w && mask.get(r, col + 1) != here {
                for ch in 0..c {
                    let mut s = 0.0;
                    let mut n = 0;
                    if col >= 1 {
                        s += (at(r, col - 1, ch) - 2.0 * at(r, col, ch) + at(r, col + 1, ch)).abs();
                        n += 1;
                    }
                    if col + 2 < w {
                        s += (at(r, col, ch) - 2.0 * at(r, col + 1, ch) + at(r, col + 2, ch)).abs();
                        n += 1;
                    }
                    if n > 0 {
                        total += s / n as f64;
                        pairs += 1;
                    }
                }
            }
            if r + 1 < h && mask.get(r + 1, col) != here {
                for ch in 0..c {
                    let mut s = 0.0;
                    let mut n = 0;
                    if r >= 1 {
                        s += (at(r - 1, col, ch) - 2.0 * at(r, col, ch) + at(r + 1, col, ch)).abs();
                        n += 1;
                    }
                    if r + 2 < h {
                        s += (at(r, col, ch) - 2.0 * at(r + 1, col, ch) + at(r + 2, col, ch)).abs();
                        n += 1;
                    }
                    if n > 0 {
                        total += s / n as f64;
                        pairs += 1;
                    }
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Strategy for merging the decoded residual with the warped side image.
pub trait Blender: Send + Sync {
    fn name(&self) -> &'static str;
    fn blend(&self, x_tilde: &Image, y_hat: &Image, mask: &Mask)
        -> Result<Image, ReconstructError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HardBlend;

impl Blender for HardBlend {
    fn name(&self) -> &'static str {
        "hard"
    }

    fn blend(
        &self,
        x_tilde: &Image,
        y_hat: &Image,
        mask: &Mask,
    ) -> Result<Image, ReconstructError> {
        hard_composite(x_tilde, y_hat, mask)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FeatherBlend {
    pub width: usize,
}

impl Blender for FeatherBlend {
    fn name(&self) -> &'static str {
        "feather"
    }

    fn blend(
        &self,
        x_tilde: &Image,
        y_hat: &Image,
        mask: &Mask,
    ) -> Result<Image, ReconstructError> {
        feather(x_tilde, y_hat, mask, self.width)
    }
}

/// Feathering followed by a guarded Poisson pass on the side-image band.
///
/// The band is every non-mask pixel within `max(feather_width, 4)` of the
/// mask and off the frame border. Inside it the side image's gradients are
/// the target, except across the seam where the target gradient is zero, so
/// the solution bends the side image onto the transmitted values. The
/// correction replaces the feathered result only if it does not raise the
/// seam score and its mean squared departure from the feathered result is at
/// most `seam_weight_b` times the seam-score reduction.
#[derive(Debug, Clone, Copy)]
pub struct PoissonBlend {
    pub feather_width: usize,
    pub iterations: usize,
    pub seam_weight_b: f64,
}

impl Blender for PoissonBlend {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn blend(
        &self,
        x_tilde: &Image,
        y_hat: &Image,
        mask: &Mask,
    ) -> Result<Image, ReconstructError> {
        let feathered = feather(x_tilde, y_hat, mask, self.feather_width)?;
        let (h, w) = (mask.height(), mask.width());
        let band_width = self.feather_width.max(4) as u32;
        let dm = distance_to_mask(mask);
        let bits = (0..h * w)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                let d = dm.dist[i];
                d >= 1 && d <= band_width && r > 0 && c > 0 && r + 1 < h && c + 1 < w
            })
            .collect();
        let region = Mask::new(h, w, bits)?;
        if region.count_true() == 0 {
            return Ok(feathered);
        }
        let base = hard_composite(x_tilde, y_hat, mask)?;
        let (corrected, _) = poisson_impl(&base, &region, y_hat, Some(mask), self.iterations)?;
        let before = seam_score(&feathered, mask);
        let after = seam_score(&corrected, mask);
        let departure = crate::metrics::mse(&corrected, &feathered)?;
        if after <= before && departure <= self.seam_weight_b * (before - after) {
            Ok(corrected)
        } else {
            Ok(feathered)
        }
    }
}

/// Warps `y` by `h_star` into the frame of `x_tilde` and blends per `cfg`.
pub fn composite(
    x_tilde: &Image,
    y: &Image,
    h_star: &Homography,
    mask: &Mask,
    cfg: &BlendConfig,
) -> Result<Image, ReconstructError> {
    cfg.validate(x_tilde.height(), x_tilde.width())?;
    let y_hat = warp_image(y, h_star, x_tilde.height(), x_tilde.width());
    cfg.blender().blend(x_tilde, &y_hat, mask)
}
