use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{dlt_solve, triangle_area, GeometryError, Homography};
use crate::features::MatchPair;

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Symmetric transfer error below which a match is an inlier, in pixels.
    pub inlier_threshold: f64,
    pub min_inlier_ratio: f64,
    /// Absolute inlier floor, guards against chance consensus on tiny match sets.
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            inlier_threshold: 5.0,
            min_inlier_ratio: 0.15,
            min_inliers: 8,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.max_iterations == 0 {
            return Err(GeometryError::Config(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(GeometryError::Config("inlier_threshold must be > 0".into()));
        }
        if !(self.min_inlier_ratio > 0.0 && self.min_inlier_ratio < 1.0) {
            return Err(GeometryError::Config(
                "min_inlier_ratio must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RansacResult {
    pub homography: Homography,
    /// Indices into the input match list, ascending.
    pub inliers: Vec<usize>,
    /// RMS symmetric transfer error over the inliers.
    pub rms: f64,
}

/// Average of forward and backward reprojection distances.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, m: &MatchPair) -> f64 {
    match (h.apply(m.p1.0, m.p1.1), h_inv.apply(m.p2.0, m.p2.1)) {
        (Some(f), Some(b)) => {
            0.5 * ((f.0 - m.p2.0).hypot(f.1 - m.p2.1) + (b.0 - m.p1.0).hypot(b.1 - m.p1.1))
        }
        _ => f64::INFINITY,
    }
}

fn score(h: &Homography, matches: &[MatchPair], threshold: f64) -> (usize, f64) {
    let inv = h.inverse();
    matches
        .iter()
        .map(|m| symmetric_transfer_error(h, &inv, m))
        .filter(|e| *e < threshold)
        .fold((0, 0.0), |(n, s), e| (n + 1, s + e))
}

fn inlier_set(h: &Homography, matches: &[MatchPair], threshold: f64) -> (Vec<usize>, f64) {
    let inv = h.inverse();
    let mut idx = Vec::new();
    let mut sq = 0.0;
    for (i, m) in matches.iter().enumerate() {
        let e = symmetric_transfer_error(h, &inv, m);
        if e < threshold {
            idx.push(i);
            sq += e * e;
        }
    }
    let rms = if idx.is_empty() {
        f64::INFINITY
    } else {
        (sq / idx.len() as f64).sqrt()
    };
    (idx, rms)
}

const MAX_REDRAWS: usize = 32;

fn minimal_sample(matches: &[MatchPair], seed: u64, iteration: usize) -> Option<[usize; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    for _ in 0..MAX_REDRAWS {
        let s = sample(&mut rng, matches.len(), 4);
        let idx = [s.index(0), s.index(1), s.index(2), s.index(3)];
        let p: Vec<_> = idx.iter().map(|&i| matches[i].p1).collect();
        let ok = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
            .iter()
            .all(|&(a, b, c)| triangle_area(p[a], p[b], p[c]) >= 1e-9);
        if ok {
            return Some(idx);
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    inliers: usize,
    error_sum: f64,
    iteration: usize,
    h: Homography,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    let key = |c: &Candidate| (std::cmp::Reverse(c.inliers), c.error_sum, c.iteration);
    let (ka, kb) = (key(&a), key(&b));
    let ord =
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2));
    if ord.is_le() {
        a
    } else {
        b
    }
}

/// Robust homography from putative matches.
///
/// Every iteration draws its minimal sample from its own RNG stream derived
/// from `(seed, iteration)`, so the result does not depend on scheduling.
/// The winning model is re-fitted on all of its inliers.
pub fn ransac_homography(
    matches: &[MatchPair],
    cfg: &RansacConfig,
) -> Result<RansacResult, GeometryError> {
    cfg.validate()?;
    if matches.len() < 4 {
        return Err(GeometryError::TooFewPoints(matches.len()));
    }
    let best = (0..cfg.max_iterations)
        .into_par_iter()
        .filter_map(|it| {
            let idx = minimal_sample(matches, cfg.seed, it)?;
            let sample: Vec<_> = idx.iter().map(|&i| matches[i]).collect();
            let h = dlt_solve(&sample).ok()?;
            let (inliers, error_sum) = score(&h, matches, cfg.inlier_threshold);
            Some(Candidate {
                inliers,
                error_sum,
                iteration: it,
                h,
            })
        })
        .reduce_with(better)
        .ok_or(GeometryError::Degenerate)?;

    let total = matches.len();
    let floor = (cfg.min_inlier_ratio * total as f64).ceil() as usize;
    if best.inliers < floor.max(cfg.min_inliers).max(4) {
        return Err(GeometryError::NoConsensus {
            inliers: best.inliers,
            total,
        });
    }

    let (sample_inliers, sample_rms) = inlier_set(&best.h, matches, cfg.inlier_threshold);
    let subset: Vec<_> = sample_inliers.iter().map(|&i| matches[i]).collect();
    let refit = dlt_solve(&subset).ok().map(|h| {
        let (inl, rms) = inlier_set(&h, matches, cfg.inlier_threshold);
        (h, inl, rms)
    });
    let result = match refit {
        Some((h, inl, rms)) if inl.len() >= sample_inliers.len() => RansacResult {
            homography: h,
            inliers: inl,
            rms,
        },
        _ => RansacResult {
            homography: best.h,
            inliers: sample_inliers,
            rms: sample_rms,
        },
    };
    Ok(result)
}
