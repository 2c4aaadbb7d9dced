use nalgebra::{DMatrix, Matrix3};

use super::{GeometryError, Homography};
use crate::features::MatchPair;

/// Minimum triangle area (in normalized coordinates) for a minimal sample.
const MIN_AREA: f64 = 1e-9;
/// Ratio of the second-smallest to the largest singular value below which the
/// null space is considered non-unique.
const RANK_TOL: f64 = 1e-12;

pub fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs()
}

/// Similarity that moves the centroid to the origin and the mean distance
/// from it to √2.
type Normalized = (Matrix3<f64>, Vec<(f64, f64)>);

fn hartley(points: &[(f64, f64)]) -> Result<Normalized, GeometryError> {
    let n = points.len() as f64;
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (cx, cy) = (cx / n, cy / n);
    let mean_dist = points
        .iter()
        .map(|p| (p.0 - cx).hypot(p.1 - cy))
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(GeometryError::Degenerate);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let normalized = points
        .iter()
        .map(|p| (s * (p.0 - cx), s * (p.1 - cy)))
        .collect();
    Ok((t, normalized))
}

fn all_collinear(points: &[(f64, f64)]) -> bool {
    // Smallest eigenvalue of the 2×2 scatter matrix of centred points.
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let lmin = tr / 2.0 - disc;
    lmin <= MIN_AREA * n
}

/// Least-squares homography mapping every `p1` onto its `p2`.
///
/// Stacks two equations per correspondence, solves the homogeneous system by
/// SVD in Hartley-normalized coordinates and undoes the normalization.
/// Exactly four correspondences must have no three collinear source points;
/// larger sets must not be collinear as a whole.
pub fn dlt_solve(pairs: &[MatchPair]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::TooFewPoints(pairs.len()));
    }
    let src: Vec<_> = pairs.iter().map(|m| m.p1).collect();
    let dst: Vec<_> = pairs.iter().map(|m| m.p2).collect();
    let (t_src, ns) = hartley(&src)?;
    let (t_dst, nd) = hartley(&dst)?;

    if ns.len() == 4 {
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            if triangle_area(ns[i], ns[j], ns[k]) <= MIN_AREA {
                return Err(GeometryError::Degenerate);
            }
        }
    } else if all_collinear(&ns) || all_collinear(&nd) {
        return Err(GeometryError::Degenerate);
    }

    // Zero rows pad minimal systems so the SVD exposes the full 9-dim basis.
    let rows = (2 * ns.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in ns.iter().zip(&nd).enumerate() {
        let (x, y) = *s;
        let (u, v) = *d;
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::RankDeficient)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let smax = sv[order[order.len() - 1]];
    if !(smax > 0.0) || sv[order[1]] <= RANK_TOL * smax {
        return Err(GeometryError::RankDeficient);
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(GeometryError::Degenerate)?;
    Homography::new(t_dst_inv * hn * t_src)
}
