#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rwzc::features::MatchPair;
use rwzc::geometry::{triangle_area, Homography};

pub const FRAME: f64 = 256.0;

/// Near-identity projective map of a 256-pixel frame.
pub fn random_homography<R: Rng>(rng: &mut R) -> Homography {
    loop {
        let rows = [
            [
                1.0 + rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-40.0..40.0),
            ],
            [
                rng.random_range(-0.2..0.2),
                1.0 + rng.random_range(-0.2..0.2),
                rng.random_range(-40.0..40.0),
            ],
            [
                rng.random_range(-5e-4..5e-4),
                rng.random_range(-5e-4..5e-4),
                1.0,
            ],
        ];
        if let Ok(h) = Homography::from_rows(rows) {
            return h;
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R) -> (f64, f64) {
    (rng.random_range(0.0..FRAME), rng.random_range(0.0..FRAME))
}

/// `n` points with no three closer to collinear than a triangle of area 50 px².
pub fn general_points<R: Rng>(rng: &mut R, n: usize) -> Vec<(f64, f64)> {
    loop {
        let pts: Vec<_> = (0..n).map(|_| random_point(rng)).collect();
        let ok = (0..n).all(|i| {
            (i + 1..n)
                .all(|j| (j + 1..n).all(|k| triangle_area(pts[i], pts[j], pts[k]).abs() > 50.0))
        });
        if ok {
            return pts;
        }
    }
}

pub fn pair(p1: (f64, f64), p2: (f64, f64)) -> MatchPair {
    MatchPair {
        p1,
        p2,
        distance: 0,
    }
}

/// Correspondences under `h` with Gaussian coordinate noise and a share of
/// uniformly random outliers.
pub fn noisy_matches<R: Rng>(
    rng: &mut R,
    h: &Homography,
    n: usize,
    outlier_ratio: f64,
    sigma: f64,
) -> Vec<MatchPair> {
    let noise = Normal::new(0.0, sigma).unwrap();
    let outliers = (n as f64 * outlier_ratio).round() as usize;
    (0..n)
        .map(|i| {
            let p = random_point(rng);
            if i < outliers {
                pair(p, random_point(rng))
            } else {
                let q = h.warp_point(p).unwrap();
                pair(p, (q.0 + noise.sample(rng), q.1 + noise.sample(rng)))
            }
        })
        .collect()
}
