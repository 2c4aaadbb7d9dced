//! Photometric refinement of a homography.
//!
//! Minimizes the sum of squared differences between the side image rendered
//! in the transmitted frame and the transmitted image, over the overlap
//! implied by the initial estimate. Damped Gauss-Newton on the 8 free entries
//! of the homography expressed in normalized frame coordinates; the Jacobian
//! comes from central differences.

use nalgebra::{Matrix3, SMatrix, SVector};
use rayon::prelude::*;

use super::{sample_bicubic, GeometryError, Homography};
use crate::image::Image;

type Mat8 = SMatrix<f64, 8, 8>;
type Vec8 = SVector<f64, 8>;

/// Finite-difference step in normalized parameter units.
const FD_STEP: f64 = 1e-4;
/// Pixels this close to the side-frame border are excluded from the objective.
const REGION_MARGIN: f64 = 2.0;
const MAX_CONSECUTIVE_REJECTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Stop once the parameter update norm drops below this.
    pub step_tolerance: f64,
    /// Initial Levenberg damping.
    pub damping: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            step_tolerance: 1e-4,
            damping: 1e-3,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.max_iterations == 0 {
            return Err(GeometryError::Config(
                "refine max_iterations must be positive".into(),
            ));
        }
        if !(self.step_tolerance > 0.0) {
            return Err(GeometryError::Config("step_tolerance must be > 0".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(GeometryError::Config("damping must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStatus {
    /// Update norm fell below the tolerance.
    Converged,
    MaxIterations,
    /// Zero gradient or empty overlap: nothing to optimize.
    FlatObjective,
    /// Five consecutive rejected steps without any accepted one; the initial
    /// estimate is returned.
    Diverged,
    /// Five consecutive rejected steps after progress was made.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub homography: Homography,
    pub status: RefineStatus,
    /// Jacobian evaluations performed.
    pub iterations: usize,
    pub initial_rmse: f64,
    pub final_rmse: f64,
}

/// Maps pixel coordinates of a frame into roughly `[-1, 1]`.
fn frame_normalizer(height: usize, width: usize) -> Matrix3<f64> {
    let s = 2.0 / (height.max(width) as f64);
    Matrix3::new(
        s,
        0.0,
        -s * (width as f64 - 1.0) / 2.0,
        0.0,
        s,
        -s * (height as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    )
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    y_dims: (usize, usize),
    region: Vec<usize>,
    x_width: usize,
    tx: Matrix3<f64>,
    tx_inv: Matrix3<f64>,
    ty: Matrix3<f64>,
}

impl Problem<'_> {
    fn params_of(&self, h: &Homography) -> Option<Vec8> {
        let hn = self.tx * h.matrix() * self.ty.try_inverse()?;
        if hn[(2, 2)].abs() < 1e-12 {
            return None;
        }
        let hn = hn / hn[(2, 2)];
        Some(Vec8::from_iterator(
            hn.iter()
                .copied()
                .enumerate()
                .filter(|(i, _)| *i != 8)
                .map(|(_, v)| v)
                .collect::<Vec<_>>(),
        ))
    }

    fn homography_of(&self, theta: &Vec8) -> Option<Homography> {
        // nalgebra is column-major; params_of enumerated in the same order.
        let mut hn = Matrix3::zeros();
        for (i, v) in theta.iter().enumerate() {
            hn[i] = *v;
        }
        hn[8] = 1.0;
        Homography::new(self.tx_inv * hn * self.ty).ok()
    }

    fn residuals(&self, theta: &Vec8) -> Option<Vec<f64>> {
        let inv = self.homography_of(theta)?.inverse();
        let (yh, yw) = self.y_dims;
        let w = self.x_width;
        self.region
            .par_iter()
            .map(|&i| {
                let (c, r) = ((i % w) as f64, (i / w) as f64);
                let (u, v) = inv.apply(c, r)?;
                Some(sample_bicubic(self.y, yh, yw, u, v) - self.x[i])
            })
            .collect()
    }

    fn cost(&self, theta: &Vec8) -> f64 {
        self.residuals(theta)
            .map(|r| r.iter().map(|e| e * e).sum())
            .unwrap_or(f64::INFINITY)
    }

    fn normal_equations(&self, theta: &Vec8, r0: &[f64]) -> Option<(Mat8, Vec8)> {
        let mut cols = Vec::with_capacity(8);
        for k in 0..8 {
            let mut plus = *theta;
            let mut minus = *theta;
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            let rp = self.residuals(&plus)?;
            let rm = self.residuals(&minus)?;
            cols.push(
                rp.iter()
                    .zip(&rm)
                    .map(|(a, b)| (a - b) / (2.0 * FD_STEP))
                    .collect::<Vec<f64>>(),
            );
        }
        let mut jtj = Mat8::zeros();
        let mut jtr = Vec8::zeros();
        for a in 0..8 {
            jtr[a] = cols[a].iter().zip(r0).map(|(j, r)| j * r).sum();
            for b in a..8 {
                let v: f64 = cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum();
                jtj[(a, b)] = v;
                jtj[(b, a)] = v;
            }
        }
        Some((jtj, jtr))
    }
}

/// Root-mean-square grey-level difference between `warp(y, h)` and `x` over
/// the pixels whose preimage lies inside `y`.
pub fn photometric_rmse(x: &Image, y: &Image, h: &Homography) -> f64 {
    let xg = x.to_gray();
    let yg = y.to_gray();
    let region = overlap_region(h, (x.height(), x.width()), (y.height(), y.width()));
    if region.is_empty() {
        return 0.0;
    }
    let inv = h.inverse();
    let sum: f64 = region
        .iter()
        .map(|&i| {
            let (c, r) = ((i % x.width()) as f64, (i / x.width()) as f64);
            match inv.apply(c, r) {
                Some((u, v)) => {
                    let d = sample_bicubic(yg.data(), y.height(), y.width(), u, v) - xg.data()[i];
                    d * d
                }
                None => 1.0,
            }
        })
        .sum();
    (sum / region.len() as f64).sqrt()
}

fn overlap_region(h: &Homography, x_dims: (usize, usize), y_dims: (usize, usize)) -> Vec<usize> {
    let inv = h.inverse();
    let (xh, xw) = x_dims;
    let (yh, yw) = (y_dims.0 as f64, y_dims.1 as f64);
    (0..xh * xw)
        .filter(|&i| {
            let (c, r) = ((i % xw) as f64, (i / xw) as f64);
            inv.apply(c, r).is_some_and(|(u, v)| {
                u >= REGION_MARGIN
                    && v >= REGION_MARGIN
                    && u <= yw - 1.0 - REGION_MARGIN
                    && v <= yh - 1.0 - REGION_MARGIN
            })
        })
        .collect()
}

/// Refines `h0` (side frame → transmitted frame) photometrically.
///
/// The returned homography never has a larger photometric error than `h0`
/// on the overlap fixed by `h0`.
pub fn refine_homography(
    x: &Image,
    y: &Image,
    h0: &Homography,
    cfg: &RefineConfig,
) -> Result<RefineOutcome, GeometryError> {
    cfg.validate()?;
    let xg = x.to_gray();
    let yg = y.to_gray();
    let tx = frame_normalizer(x.height(), x.width());
    let problem = Problem {
        x: xg.data(),
        y: yg.data(),
        y_dims: (y.height(), y.width()),
        region: overlap_region(h0, (x.height(), x.width()), (y.height(), y.width())),
        x_width: x.width(),
        tx,
        tx_inv: tx.try_inverse().expect("normalizer is invertible"),
        ty: frame_normalizer(y.height(), y.width()),
    };
    let flat = |rmse| RefineOutcome {
        homography: *h0,
        status: RefineStatus::FlatObjective,
        iterations: 0,
        initial_rmse: rmse,
        final_rmse: rmse,
    };
    if problem.region.is_empty() {
        return Ok(flat(0.0));
    }
    let n = problem.region.len() as f64;
    let mut theta = problem.params_of(h0).ok_or(GeometryError::Degenerate)?;
    let mut residuals = problem
        .residuals(&theta)
        .ok_or(GeometryError::PointAtInfinity)?;
    let mut cost: f64 = residuals.iter().map(|e| e * e).sum();
    let initial_rmse = (cost / n).sqrt();

    let mut lambda = cfg.damping;
    let mut iterations = 0;
    let mut accepted_any = false;
    let mut rejects = 0;
    let mut status = RefineStatus::MaxIterations;
    let mut system = None;

    while iterations < cfg.max_iterations {
        if system.is_none() {
            iterations += 1;
            system = problem.normal_equations(&theta, &residuals);
            let Some((_, g)) = &system else {
                status = if accepted_any {
                    RefineStatus::Stalled
                } else {
                    RefineStatus::Diverged
                };
                break;
            };
            if g.amax() <= 1e-14 * n {
                status = if accepted_any {
                    RefineStatus::Converged
                } else {
                    RefineStatus::FlatObjective
                };
                break;
            }
        }
        let (jtj, g) = system.as_ref().expect("system computed above");
        let mut damped = *jtj;
        for k in 0..8 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&(-g)) else {
            lambda = lambda.max(1e-12) * 10.0;
            rejects += 1;
            if rejects >= MAX_CONSECUTIVE_REJECTS {
                status = if accepted_any {
                    RefineStatus::Stalled
                } else {
                    RefineStatus::Diverged
                };
                break;
            }
            continue;
        };
        if step.norm() < cfg.step_tolerance {
            status = RefineStatus::Converged;
            break;
        }
        let candidate = theta + step;
        let new_cost = problem.cost(&candidate);
        if new_cost < cost {
            theta = candidate;
            cost = new_cost;
            residuals = problem
                .residuals(&theta)
                .expect("accepted parameters are finite");
            lambda /= 10.0;
            rejects = 0;
            accepted_any = true;
            system = None;
        } else {
            lambda = lambda.max(1e-12) * 10.0;
            rejects += 1;
            if rejects >= MAX_CONSECUTIVE_REJECTS {
                status = if accepted_any {
                    RefineStatus::Stalled
                } else {
                    RefineStatus::Diverged
                };
                break;
            }
        }
    }

    if status == RefineStatus::Diverged {
        log::warn!("homography refinement diverged; keeping the initial estimate");
        return Ok(RefineOutcome {
            homography: *h0,
            status,
            iterations,
            initial_rmse,
            final_rmse: initial_rmse,
        });
    }
    if status == RefineStatus::FlatObjective {
        return Ok(RefineOutcome {
            iterations,
            ..flat(initial_rmse)
        });
    }
    let homography = if accepted_any {
        problem
            .homography_of(&theta)
            .expect("accepted parameters form a homography")
    } else {
        *h0
    };
    Ok(RefineOutcome {
        homography,
        status,
        iterations,
        initial_rmse,
        final_rmse: (cost / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::MatchPair;
    use crate::geometry::{corner_transfer_error, dlt_solve, warp_image};

    fn texture(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 1, |r, c, _| {
            let (x, y) = (c as f64, r as f64);
            0.5 + 0.2 * (0.21 * x + 0.05 * y).sin()
                + 0.15 * (0.17 * y - 0.08 * x).cos()
                + 0.1 * (0.05 * x * 0.7 + 0.13 * y).sin()
        })
        .unwrap()
    }

    fn truth() -> Homography {
        Homography::from_rows([[1.0, 0.02, 3.2], [-0.015, 0.99, -2.4], [2e-4, -1e-4, 1.0]]).unwrap()
    }

    fn perturb(h: &Homography, size: usize, amount: f64) -> Homography {
        let s = (size - 1) as f64;
        let corners = [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)];
        let dirs = [(1.0, 0.0), (0.0, 1.0), (-0.6, 0.8), (0.8, -0.6)];
        let pairs: Vec<_> = corners
            .iter()
            .zip(dirs)
            .map(|(c, d)| {
                let q = h.warp_point(*c).unwrap();
                MatchPair {
                    p1: *c,
                    p2: (q.0 + amount * d.0, q.1 + amount * d.1),
                    distance: 0,
                }
            })
            .collect();
        dlt_solve(&pairs).unwrap()
    }

    #[test]
    fn already_optimal_converges_quickly() {
        let y = texture(96, 96);
        let h = truth();
        let x = warp_image(&y, &h, 96, 96);
        let out = refine_homography(&x, &y, &h, &RefineConfig::default()).unwrap();
        assert!(out.iterations <= 2, "{out:?}");
        assert!(corner_transfer_error(&out.homography, &h, 96, 96) < 0.05);
        assert!(out.final_rmse <= out.initial_rmse);
    }

    #[test]
    fn perturbed_estimate_improves() {
        let y = texture(96, 96);
        let h = truth();
        let x = warp_image(&y, &h, 96, 96);
        let h0 = perturb(&h, 96, 0.5);
        let before = corner_transfer_error(&h0, &h, 96, 96);
        let out = refine_homography(&x, &y, &h0, &RefineConfig::default()).unwrap();
        let after = corner_transfer_error(&out.homography, &h, 96, 96);
        assert!(out.final_rmse < out.initial_rmse);
        assert!(after < 0.1, "before {before} after {after} {out:?}");
        assert!(photometric_rmse(&x, &y, &out.homography) <= photometric_rmse(&x, &y, &h0) + 1e-12);
    }

    #[test]
    fn flat_images_return_initial() {
        let x = Image::filled(64, 64, 1, 0.3).unwrap();
        let y = Image::filled(64, 64, 1, 0.3).unwrap();
        let h0 = Homography::translation(1.5, -0.5);
        let out = refine_homography(&x, &y, &h0, &RefineConfig::default()).unwrap();
        assert_eq!(out.status, RefineStatus::FlatObjective);
        assert_eq!(out.homography, h0);
    }

    #[test]
    fn parameterization_round_trip() {
        let x = texture(40, 60);
        let y = texture(50, 30);
        let tx = frame_normalizer(40, 60);
        let p = Problem {
            x: x.data(),
            y: y.data(),
            y_dims: (50, 30),
            region: vec![],
            x_width: 60,
            tx,
            tx_inv: tx.try_inverse().unwrap(),
            ty: frame_normalizer(50, 30),
        };
        let h = truth();
        let back = p.homography_of(&p.params_of(&h).unwrap()).unwrap();
        assert!(back.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let img = texture(32, 32);
        let bad = RefineConfig {
            step_tolerance: 0.0,
            ..Default::default()
        };
        assert!(refine_homography(&img, &img, &Homography::identity(), &bad).is_err());
    }
}
