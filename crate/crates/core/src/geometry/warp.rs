use rayon::prelude::*;

use super::Homography;
use crate::image::{Image, Mask};

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Catmull-Rom sample of a row-major plane at `(u, v)` = (column, row),
/// with taps clamped to the nearest edge pixel.
#[inline]
pub fn sample_bicubic(plane: &[f64], height: usize, width: usize, u: f64, v: f64) -> f64 {
    let (fu, fv) = (u.floor(), v.floor());
    let wx = catmull_rom(u - fu);
    let wy = catmull_rom(v - fv);
    let (iu, iv) = (fu as i64, fv as i64);
    let (wmax, hmax) = (width as i64 - 1, height as i64 - 1);
    let mut acc = 0.0;
    for (j, wyj) in wy.iter().enumerate() {
        let row = (iv - 1 + j as i64).clamp(0, hmax) as usize * width;
        let mut line = 0.0;
        for (i, wxi) in wx.iter().enumerate() {
            let col = (iu - 1 + i as i64).clamp(0, wmax) as usize;
            line += wxi * plane[row + col];
        }
        acc += wyj * line;
    }
    acc
}

#[inline]
fn in_footprint(u: f64, v: f64, height: usize, width: usize) -> bool {
    u >= -0.5 && v >= -0.5 && u <= width as f64 - 0.5 && v <= height as f64 - 0.5
}

/// Renders `plane` (`in_h`×`in_w`) in an `out_h`×`out_w` frame: every output
/// pixel `p` samples the input at `h⁻¹·p`. Samples outside the input pixel
/// footprint, or at infinity, are 0. Values are not clamped.
pub fn warp_plane(
    plane: &[f64],
    in_h: usize,
    in_w: usize,
    h: &Homography,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let inv = h.inverse();
    let mut out = vec![0.0; out_h * out_w];
    out.par_chunks_mut(out_w).enumerate().for_each(|(r, row)| {
        for (c, px) in row.iter_mut().enumerate() {
            if let Some((u, v)) = inv.apply(c as f64, r as f64) {
                if in_footprint(u, v, in_h, in_w) {
                    *px = sample_bicubic(plane, in_h, in_w, u, v);
                }
            }
        }
    });
    out
}

/// Inverse-mapping bicubic warp into an `out_h`×`out_w` frame, clamped to `[0, 1]`.
pub fn warp_image(img: &Image, h: &Homography, out_h: usize, out_w: usize) -> Image {
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|ch| warp_plane(&img.plane(ch), img.height(), img.width(), h, out_h, out_w))
        .collect();
    Image::from_planes(out_h, out_w, &planes).expect("warp output sized from inputs")
}

/// Transmit mask for a side frame of `side` dims rendered into an `out` frame.
///
/// A constant-one raster of the side frame is warped by `h`; bits are set
/// where the warped coverage is below 0.5.
pub fn generate_mask_between(h: &Homography, side: (usize, usize), out: (usize, usize)) -> Mask {
    let ones = vec![1.0; side.0 * side.1];
    let coverage = warp_plane(&ones, side.0, side.1, h, out.0, out.1);
    let bits = coverage.iter().map(|c| *c < 0.5).collect();
    Mask::new(out.0, out.1, bits).expect("mask sized from frame")
}

/// Fraction of the `out` frame covered by the warped side frame; equals
/// `1 - true_fraction` of [`generate_mask_between`] without rendering.
pub fn covered_fraction(h: &Homography, side: (usize, usize), out: (usize, usize)) -> f64 {
    let inv = h.inverse();
    let covered: usize = (0..out.0)
        .into_par_iter()
        .map(|r| {
            (0..out.1)
                .filter(|&c| {
                    inv.apply(c as f64, r as f64)
                        .is_some_and(|(u, v)| in_footprint(u, v, side.0, side.1))
                })
                .count()
        })
        .sum();
    covered as f64 / (out.0 * out.1) as f64
}

/// [`generate_mask_between`] for equally sized frames.
pub fn generate_mask(h: &Homography, height: usize, width: usize) -> Mask {
    generate_mask_between(h, (height, width), (height, width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;

    fn smooth(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 3, |r, c, ch| {
            let (x, y) = (c as f64 / w as f64, r as f64 / h as f64);
            0.5 + 0.2 * (6.0 * x + ch as f64).sin() * (5.0 * y).cos() + 0.15 * (3.0 * (x + y)).sin()
        })
        .unwrap()
    }

    #[test]
    fn catmull_rom_partition_of_unity() {
        for k in 0..=10 {
            let w = catmull_rom(k as f64 / 10.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(catmull_rom(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = smooth(40, 50);
        assert_eq!(warp_image(&img, &Homography::identity(), 40, 50), img);
    }

    #[test]
    fn full_shift_is_black() {
        let img = smooth(20, 30);
        let out = warp_image(&img, &Homography::translation(30.0, 0.0), 20, 30);
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn round_trip_psnr() {
        let img = smooth(128, 128);
        let h = Homography::from_rows([[0.97, 0.03, 4.3], [-0.02, 1.01, -3.7], [5e-5, -3e-5, 1.0]])
            .unwrap();
        let there = warp_image(&img, &h, 128, 128);
        let back = warp_image(&there, &h.inverse(), 128, 128);
        let crop =
            |im: &Image| Image::from_fn(88, 88, 3, |r, c, ch| im.get(r + 20, c + 20, ch)).unwrap();
        let p = psnr(&crop(&img), &crop(&back)).unwrap();
        assert!(p > 35.0, "{p}");
    }

    #[test]
    fn mask_examples() {
        assert_eq!(
            generate_mask(&Homography::identity(), 16, 24).count_true(),
            0
        );
        let half = generate_mask(&Homography::translation(12.0, 0.0), 16, 24);
        for r in 0..16 {
            for c in 0..24 {
                assert_eq!(half.get(r, c), c < 12, "({r},{c})");
            }
        }
        let gone = generate_mask(&Homography::translation(100.0, 40.0), 16, 24);
        assert_eq!(gone.count_true(), 16 * 24);
    }

    #[test]
    fn covered_fraction_monotone_in_translation() {
        let mut last = f64::INFINITY;
        for k in 0..=40 {
            let t = k as f64 * 0.83;
            let covered =
                1.0 - generate_mask(&Homography::translation(t, 0.3 * t), 24, 32).true_fraction();
            assert!(covered <= last + 1e-15);
            last = covered;
        }
    }

    #[test]
    fn covered_fraction_matches_mask() {
        for h in [
            Homography::translation(7.3, -2.2),
            Homography::from_rows([[0.9, 0.2, 4.0], [-0.1, 1.1, -6.0], [2e-3, 1e-3, 1.0]]).unwrap(),
        ] {
            let m = generate_mask_between(&h, (20, 30), (25, 28));
            assert!(
                (covered_fraction(&h, (20, 30), (25, 28)) - (1.0 - m.true_fraction())).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn mask_bits_follow_coverage_rule() {
        let h =
            Homography::from_rows([[1.1, 0.1, -3.0], [0.05, 0.9, 5.5], [1e-3, 0.0, 1.0]]).unwrap();
        let m = generate_mask(&h, 20, 20);
        let cov = warp_plane(&vec![1.0; 400], 20, 20, &h, 20, 20);
        for (b, c) in m.bits().iter().zip(&cov) {
            assert_eq!(*b, *c < 0.5);
        }
    }
}
