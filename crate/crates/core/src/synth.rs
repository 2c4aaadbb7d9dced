//! Synthetic correlated image pairs with a controllable overlap.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{covered_fraction, sample_bicubic, GeometryError, Homography};
use crate::image::Image;

/// Allowed gap between requested and achieved overlap.
pub const OVERLAP_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("base image {base:?} is smaller than the {frame:?} frame")]
    BaseTooSmall {
        base: (usize, usize),
        frame: (usize, usize),
    },
    #[error("overlap {target} cannot be reached (achievable up to {best:.3})")]
    Infeasible { target: f64, best: f64 },
    #[error("invalid parallax spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParallaxSpec {
    /// Fraction of the transmitted frame covered by the side view.
    pub overlap_target: f64,
    pub rotation_deg: f64,
    /// Projective row magnitude, in units of 1 / (frame size).
    pub perspective_strength: f64,
    /// Amplitude of uniform per-sample noise added to the side view.
    pub photometric_jitter: f64,
    pub seed: u64,
    pub frame_height: usize,
    pub frame_width: usize,
}

impl Default for ParallaxSpec {
    fn default() -> Self {
        Self {
            overlap_target: 0.5,
            rotation_deg: 0.0,
            perspective_strength: 0.0,
            photometric_jitter: 0.0,
            seed: 0,
            frame_height: 256,
            frame_width: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    pub x: Image,
    pub y: Image,
    /// Maps side-frame coordinates to transmitted-frame coordinates.
    pub h_true: Homography,
    pub overlap: f64,
}

/// Deterministic colour (or grey) test scene: smooth shading, soft-edged
/// rectangles and ellipses for corners, and a little fine texture.
pub fn synthetic_scene(height: usize, width: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (height as f64, width as f64);
    let waves: Vec<[f64; 4]> = (0..3 * channels)
        .map(|_| {
            [
                rng.random_range(0.5..3.0) / wf,
                rng.random_range(0.5..3.0) / hf,
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.05..0.12),
            ]
        })
        .collect();
    let base: Vec<f64> = (0..channels)
        .map(|_| rng.random_range(0.35..0.65))
        .collect();
    struct Shape {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        ellipse: bool,
        colour: Vec<f64>,
    }
    let n_shapes = ((height * width) as f64 / 1200.0).clamp(8.0, 80.0) as usize;
    let shapes: Vec<Shape> = (0..n_shapes)
        .map(|_| Shape {
            cx: rng.random_range(0.0..wf),
            cy: rng.random_range(0.0..hf),
            rx: rng.random_range(4.0..(wf / 6.0).max(5.0)),
            ry: rng.random_range(4.0..(hf / 6.0).max(5.0)),
            ellipse: rng.random_bool(0.4),
            colour: (0..channels)
                .map(|_| rng.random_range(0.05..0.95))
                .collect(),
        })
        .collect();
    let fine: Vec<[f64; 3]> = (0..2)
        .map(|_| {
            [
                rng.random_range(0.15..0.35),
                rng.random_range(0.15..0.35),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();

    let smoothstep = |d: f64| {
        // Soft edge roughly 2 px wide.
        let t = (0.5 - d / 2.0).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    };
    Image::from_fn(height, width, channels, |r, c, ch| {
        let (x, y) = (c as f64, r as f64);
        let mut v = base[ch];
        for w in &waves[3 * ch..3 * ch + 3] {
            v += w[3] * (std::f64::consts::TAU * (w[0] * x + w[1] * y) + w[2]).sin();
        }
        for s in &shapes {
            let d = if s.ellipse {
                let q = ((x - s.cx) / s.rx).hypot((y - s.cy) / s.ry);
                (q - 1.0) * s.rx.min(s.ry)
            } else {
                ((x - s.cx).abs() - s.rx).max((y - s.cy).abs() - s.ry)
            };
            let a = smoothstep(d);
            if a > 0.0 {
                v = v * (1.0 - 0.85 * a) + 0.85 * a * s.colour[ch];
            }
        }
        for f in &fine {
            v += 0.03 * (f[0] * x + f[2]).sin() * (f[1] * y).cos();
        }
        v
    })
    .expect("scene dims are positive")
}

#[inline]
fn mirror(v: f64, n: usize) -> f64 {
    let max = (n - 1) as f64;
    if max == 0.0 {
        return 0.0;
    }
    let period = 2.0 * max;
    let m = v.rem_euclid(period);
    if m > max {
        period - m
    } else {
        m
    }
}

fn build_homography(
    center: (f64, f64),
    t: (f64, f64),
    rot: f64,
    persp: (f64, f64),
) -> Result<Homography, GeometryError> {
    let (s, c) = rot.sin_cos();
    let to_center = Matrix3::new(1.0, 0.0, -center.0, 0.0, 1.0, -center.1, 0.0, 0.0, 1.0);
    let back = Matrix3::new(
        1.0,
        0.0,
        center.0 + t.0,
        0.0,
        1.0,
        center.1 + t.1,
        0.0,
        0.0,
        1.0,
    );
    let r = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let p = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, persp.0, persp.1, 1.0);
    Homography::new(back * p * r * to_center)
}

/// Crops the transmitted view from the centre of `base` and renders a side
/// view related to it by a homography tuned to the requested overlap.
pub fn synth_pair(base: &Image, spec: &ParallaxSpec) -> Result<SynthPair, SynthError> {
    if !(0.0..=1.0).contains(&spec.overlap_target) {
        return Err(SynthError::Spec("overlap_target must lie in [0, 1]".into()));
    }
    if spec.perspective_strength < 0.0 || spec.photometric_jitter < 0.0 {
        return Err(SynthError::Spec(
            "perspective and jitter must be nonnegative".into(),
        ));
    }
    let (fh, fw) = (spec.frame_height, spec.frame_width);
    if fh == 0 || fw == 0 || base.height() < fh || base.width() < fw {
        return Err(SynthError::BaseTooSmall {
            base: (base.height(), base.width()),
            frame: (fh, fw),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let heading: f64 = rng.random_range(-20f64..20.0).to_radians()
        + if rng.random_bool(0.5) {
            0.0
        } else {
            std::f64::consts::PI
        };
    let dir = (heading.cos(), heading.sin());
    let pdir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let scale = fh.max(fw) as f64;
    let persp = (
        spec.perspective_strength * pdir.cos() / scale,
        spec.perspective_strength * pdir.sin() / scale,
    );
    let rot = spec.rotation_deg.to_radians();
    let center = ((fw as f64 - 1.0) / 2.0, (fh as f64 - 1.0) / 2.0);
    let model = |tau: f64| build_homography(center, (tau * dir.0, tau * dir.1), rot, persp);
    let overlap_at = |tau: f64| -> Result<f64, GeometryError> {
        Ok(covered_fraction(&model(tau)?, (fh, fw), (fh, fw)))
    };

    let target = spec.overlap_target;
    let at_zero = overlap_at(0.0)?;
    let tau = if at_zero <= target {
        if target - at_zero > OVERLAP_TOLERANCE {
            return Err(SynthError::Infeasible {
                target,
                best: at_zero,
            });
        }
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 2.0 * (fw + fh) as f64);
        if overlap_at(hi)? > target {
            return Err(SynthError::Infeasible {
                target,
                best: at_zero,
            });
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if overlap_at(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Prefer whichever end lands closer to the target.
        if (overlap_at(lo)? - target).abs() < (overlap_at(hi)? - target).abs() {
            lo
        } else {
            hi
        }
    };
    let h_true = model(tau)?;
    let overlap = overlap_at(tau)?;
    if (overlap - target).abs() > OVERLAP_TOLERANCE {
        return Err(SynthError::Infeasible {
            target,
            best: overlap,
        });
    }

    let ox = ((base.width() - fw) / 2) as f64;
    let oy = ((base.height() - fh) / 2) as f64;
    let ch = base.channels();
    let x = Image::from_fn(fh, fw, ch, |r, c, k| {
        base.get(r + oy as usize, c + ox as usize, k)
    })
    .expect("crop dims are positive");
    let planes: Vec<Vec<f64>> = (0..ch).map(|k| base.plane(k)).collect();
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    jitter_rng.set_stream(1);
    let jitter = spec.photometric_jitter;
    let mut data = Vec::with_capacity(fh * fw * ch);
    for r in 0..fh {
        for c in 0..fw {
            let p = h_true.apply(c as f64, r as f64);
            for plane in &planes {
                let v = match p {
                    Some((u, v)) => sample_bicubic(
                        plane,
                        base.height(),
                        base.width(),
                        mirror(u + ox, base.width()),
                        mirror(v + oy, base.height()),
                    ),
                    None => 0.0,
                };
                let noise = if jitter > 0.0 {
                    jitter_rng.random_range(-jitter..=jitter)
                } else {
                    0.0
                };
                data.push(v + noise);
            }
        }
    }
    let y = Image::new(fh, fw, ch, data).expect("side view sized from frame");
    Ok(SynthPair {
        x,
        y,
        h_true,
        overlap,
    })
}
