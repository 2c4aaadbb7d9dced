//! Corner detection, binary descriptors and brute-force Hamming matching.
//!
//! Candidates come from the FAST-9 segment test or from a positive Harris
//! response; Harris ranks them and drives non-maximum suppression. Descriptors
//! are 256 intensity comparisons on a 7×7 box-smoothed patch, with the
//! sampling layout fixed at compile time.

use std::io::Write;

use crate::image::Image;

/// Non-maximum suppression radius in pixels.
pub const NMS_RADIUS: f64 = 3.0;
/// Harris candidates must reach this fraction of the strongest response.
pub const HARRIS_RELATIVE: f64 = 0.01;
const HARRIS_K: f64 = 0.04;
const FAST_ARC: usize = 9;
/// Keypoints closer than this to the border cannot be described.
pub const DESCRIBE_BORDER: usize = 16;

pub const DEFAULT_MAX_KEYPOINTS: usize = 500;
pub const DEFAULT_FAST_THRESHOLD: f64 = 0.05;
pub const DEFAULT_RATIO: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor {
    pub bits: [u64; 4],
}

impl Descriptor {
    pub const BITS: usize = 256;

    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

/// A correspondence between a point in the source frame and one in the
/// destination frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub distance: u32,
}

/// Index-level result of descriptor matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorMatch {
    pub query: usize,
    pub train: usize,
    pub distance: u32,
}

/// Descriptors for the keypoints that survived the border filter.
///
/// `kept[i]` is the index in the input keypoint list of `descriptors[i]`;
/// `dropped` lists the rejected keypoint indices.
#[derive(Debug, Clone, Default)]
pub struct Described {
    pub descriptors: Vec<Descriptor>,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
}

// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const fn xorshift(mut s: u64) -> u64 {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    s
}

const fn build_pattern() -> [[i8; 4]; Descriptor::BITS] {
    let mut out = [[0i8; 4]; Descriptor::BITS];
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut i = 0;
    while i < Descriptor::BITS {
        let mut j = 0;
        while j < 4 {
            // Sum of two uniforms on [-7, 7]: triangular on [-14, 14].
            state = xorshift(state);
            let a = (state % 15) as i8 - 7;
            state = xorshift(state);
            let b = (state % 15) as i8 - 7;
            out[i][j] = a + b;
            j += 1;
        }
        i += 1;
    }
    out
}

/// Sampling layout: `(dx1, dy1, dx2, dy2)` per descriptor bit.
pub const BRIEF_PATTERN: [[i8; 4]; Descriptor::BITS] = build_pattern();

fn fast9(gray: &[f64], w: usize, x: usize, y: usize, t: f64) -> bool {
    let center = gray[y * w + x];
    let mut states = [0i8; 16];
    for (k, (dx, dy)) in CIRCLE.iter().enumerate() {
        let v = gray[(y as i32 + dy) as usize * w + (x as i32 + dx) as usize];
        states[k] = if v > center + t {
            1
        } else if v < center - t {
            -1
        } else {
            0
        };
    }
    for sign in [1i8, -1] {
        let mut run = 0;
        for k in 0..32 {
            if states[k % 16] == sign {
                run += 1;
                if run >= FAST_ARC {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

/// Harris response with Sobel gradients and a 5×5 box window. Pixels within
/// 3 px of the border are left at zero.
pub fn harris_response(gray: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut ixx = vec![0.0; h * w];
    let mut iyy = vec![0.0; h * w];
    let mut ixy = vec![0.0; h * w];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let p =
                |dx: i32, dy: i32| gray[(y as i32 + dy) as usize * w + (x as i32 + dx) as usize];
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let mut out = vec![0.0; h * w];
    if h < 7 || w < 7 {
        return out;
    }
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - 2..=y + 2 {
                for xx in x - 2..=x + 2 {
                    let i = yy * w + xx;
                    a += ixx[i];
                    b += iyy[i];
                    c += ixy[i];
                }
            }
            out[y * w + x] = a * b - c * c - HARRIS_K * (a + b) * (a + b);
        }
    }
    out
}

/// Detects corners, strongest first, at most `max_count`.
///
/// `threshold` is the FAST intensity threshold on the `[0, 1]` scale.
pub fn detect_keypoints(img: &Image, max_count: usize, threshold: f64) -> Vec<Keypoint> {
    let gray = img.to_gray();
    let (h, w) = (gray.height(), gray.width());
    if h < 7 || w < 7 || max_count == 0 {
        return Vec::new();
    }
    let g = gray.data();
    let response = harris_response(g, h, w);
    let max_response = response.iter().cloned().fold(0.0f64, f64::max);
    let harris_floor = HARRIS_RELATIVE * max_response;

    let mut candidates = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let r = response[y * w + x];
            if r <= 0.0 {
                continue;
            }
            if r >= harris_floor || fast9(g, w, x, y, threshold) {
                candidates.push((x, y, r));
            }
        }
    }

    let mut score_map = vec![0.0; h * w];
    for &(x, y, r) in &candidates {
        score_map[y * w + x] = r;
    }
    let rad = NMS_RADIUS.ceil() as i64;
    let mut kept: Vec<Keypoint> = candidates
        .into_iter()
        .filter(|&(x, y, r)| {
            for dy in -rad..=rad {
                for dx in -rad..=rad {
                    if (dx == 0 && dy == 0)
                        || ((dx * dx + dy * dy) as f64) > NMS_RADIUS * NMS_RADIUS
                    {
                        continue;
                    }
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                        continue;
                    }
                    let other = score_map[yy as usize * w + xx as usize];
                    // Equal scores: the earlier pixel in raster order wins.
                    if other > r || (other == r && (yy, xx) < (y as i64, x as i64)) {
                        return false;
                    }
                }
            }
            true
        })
        .map(|(x, y, r)| Keypoint {
            x: x as f64,
            y: y as f64,
            score: r,
        })
        .collect();
    kept.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    kept.truncate(max_count);
    kept
}

fn box_smooth7(gray: &[f64], h: usize, w: usize) -> Vec<f64> {
    // Integral image with a zero row/column in front.
    let stride = w + 1;
    let mut integral = vec![0.0; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += gray[y * w + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let y0 = y.saturating_sub(3);
        let y1 = (y + 4).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(3);
            let x1 = (x + 4).min(w);
            let s = integral[y1 * stride + x1]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
            out[y * w + x] = s / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// Computes one descriptor per keypoint that lies at least
/// [`DESCRIBE_BORDER`] px inside the frame.
pub fn describe(img: &Image, kps: &[Keypoint]) -> Described {
    let gray = img.to_gray();
    let (h, w) = (gray.height(), gray.width());
    let smooth = box_smooth7(gray.data(), h, w);
    let mut out = Described::default();
    for (idx, kp) in kps.iter().enumerate() {
        let (cx, cy) = (kp.x.round(), kp.y.round());
        let b = DESCRIBE_BORDER as f64;
        if cx < b || cy < b || cx >= (w as f64 - b) || cy >= (h as f64 - b) {
            out.dropped.push(idx);
            continue;
        }
        let (cx, cy) = (cx as i64, cy as i64);
        let sample = |dx: i8, dy: i8| {
            smooth[(cy + i64::from(dy)) as usize * w + (cx + i64::from(dx)) as usize]
        };
        let mut bits = [0u64; 4];
        for (i, p) in BRIEF_PATTERN.iter().enumerate() {
            if sample(p[0], p[1]) < sample(p[2], p[3]) {
                bits[i / 64] |= 1u64 << (i % 64);
            }
        }
        out.descriptors.push(Descriptor { bits });
        out.kept.push(idx);
    }
    out
}

fn nearest_two(query: &Descriptor, set: &[Descriptor]) -> (usize, u32, u32) {
    let mut best = (usize::MAX, u32::MAX);
    let mut second = u32::MAX;
    for (j, d) in set.iter().enumerate() {
        let dist = query.hamming(d);
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else if dist < second {
            second = dist;
        }
    }
    (best.0, best.1, second)
}

/// Brute-force Hamming matching with the ratio test and cross-check.
///
/// A pair `(i, j)` survives when `j` is `i`'s nearest neighbour with
/// `best < ratio * second_best`, and `i` is in turn `j`'s nearest neighbour.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> Vec<DescriptorMatch> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let reverse: Vec<usize> = b.iter().map(|d| nearest_two(d, a).0).collect();
    a.iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let (j, best, second) = nearest_two(d, b);
            let passes_ratio = second == u32::MAX || f64::from(best) < ratio * f64::from(second);
            (passes_ratio && reverse[j] == i).then_some(DescriptorMatch {
                query: i,
                train: j,
                distance: best,
            })
        })
        .collect()
}

/// Runs detect → describe → match and returns coordinate pairs
/// `(point in src, point in dst)`.
pub fn match_images(
    src: &Image,
    dst: &Image,
    max_count: usize,
    threshold: f64,
    ratio: f64,
) -> Vec<MatchPair> {
    let ks = detect_keypoints(src, max_count, threshold);
    let kd = detect_keypoints(dst, max_count, threshold);
    let ds = describe(src, &ks);
    let dd = describe(dst, &kd);
    match_descriptors(&ds.descriptors, &dd.descriptors, ratio)
        .into_iter()
        .map(|m| {
            let p = ks[ds.kept[m.query]];
            let q = kd[dd.kept[m.train]];
            MatchPair {
                p1: (p.x, p.y),
                p2: (q.x, q.y),
                distance: m.distance,
            }
        })
        .collect()
}

/// Writes `x1,y1,x2,y2,distance` rows.
pub fn write_matches_csv<W: Write>(mut out: W, pairs: &[MatchPair]) -> std::io::Result<()> {
    writeln!(out, "x1,y1,x2,y2,distance")?;
    for m in pairs {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.p1.0, m.p1.1, m.p2.0, m.p2.1, m.distance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn checkerboard(n: usize, square: usize) -> Image {
        Image::from_fn(n, n, 1, |r, c, _| {
            if (r / square + c / square).is_multiple_of(2) {
                0.9
            } else {
                0.1
            }
        })
        .unwrap()
    }

    #[test]
    fn pattern_is_within_patch() {
        for p in BRIEF_PATTERN.iter() {
            assert!(p.iter().all(|v| v.abs() <= 14));
        }
        // Not degenerate: the pairs are not all the same.
        assert!(BRIEF_PATTERN.iter().any(|p| p != &BRIEF_PATTERN[0]));
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = Image::filled(32, 32, 1, 0.4).unwrap();
        assert!(detect_keypoints(&img, 500, 0.05).is_empty());
    }

    #[test]
    fn isolated_pixel_is_detected() {
        let img = Image::from_fn(
            32,
            32,
            1,
            |r, c, _| if (r, c) == (15, 17) { 1.0 } else { 0.0 },
        )
        .unwrap();
        let kps = detect_keypoints(&img, 500, 0.05);
        assert!(!kps.is_empty());
        assert!(kps
            .iter()
            .any(|k| (k.x - 17.0).abs() <= 1.0 && (k.y - 15.0).abs() <= 1.0));
    }

    /// Independent scan: a pixel is a corner if its directly computed Harris
    /// response is positive, clears the relative floor, and is not beaten
    /// inside the suppression disc.
    fn oracle_corner_count(img: &Image) -> usize {
        let (h, w) = (img.height(), img.width());
        let px = |x: i64, y: i64| img.get(y as usize, x as usize, 0);
        let grad = |x: i64, y: i64| {
            let gx = px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)
                - px(x - 1, y - 1)
                - 2.0 * px(x - 1, y)
                - px(x - 1, y + 1);
            let gy = px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)
                - px(x - 1, y - 1)
                - 2.0 * px(x, y - 1)
                - px(x + 1, y - 1);
            (gx, gy)
        };
        let resp = |x: i64, y: i64| {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - 2..=y + 2 {
                for xx in x - 2..=x + 2 {
                    let (gx, gy) = grad(xx, yy);
                    a += gx * gx;
                    b += gy * gy;
                    c += gx * gy;
                }
            }
            a * b - c * c - 0.04 * (a + b) * (a + b)
        };
        let mut r = vec![f64::NEG_INFINITY; h * w];
        for y in 3..h as i64 - 3 {
            for x in 3..w as i64 - 3 {
                r[y as usize * w + x as usize] = resp(x, y);
            }
        }
        let max = r.iter().cloned().fold(0.0, f64::max);
        let mut count = 0;
        for y in 3..h as i64 - 3 {
            for x in 3..w as i64 - 3 {
                let v = r[y as usize * w + x as usize];
                if v <= 0.0 || v < 0.01 * max {
                    continue;
                }
                let mut is_max = true;
                for yy in (y - 3).max(3)..=(y + 3).min(h as i64 - 4) {
                    for xx in (x - 3).max(3)..=(x + 3).min(w as i64 - 4) {
                        let d2 = (xx - x).pow(2) + (yy - y).pow(2);
                        if d2 == 0 || d2 > 9 {
                            continue;
                        }
                        let o = r[yy as usize * w + xx as usize];
                        if o > v || (o == v && (yy, xx) < (y, x)) {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn checkerboard_corner_count() {
        let img = checkerboard(64, 8);
        let grid = 7 * 7;
        let oracle = oracle_corner_count(&img);
        let found = detect_keypoints(&img, 500, 0.05)
            .iter()
            .filter(|k| k.x >= 4.0 && k.y >= 4.0 && k.x <= 60.0 && k.y <= 60.0)
            .count();
        assert!(
            (oracle as f64 - grid as f64).abs() <= 0.2 * grid as f64,
            "oracle {oracle}"
        );
        assert!(
            (found as f64 - grid as f64).abs() <= 0.2 * grid as f64,
            "found {found}"
        );
    }

    #[test]
    fn keypoints_sorted_and_capped() {
        let img = checkerboard(64, 8);
        let kps = detect_keypoints(&img, 10, 0.05);
        assert_eq!(kps.len(), 10);
        assert!(kps.windows(2).all(|w| w[0].score >= w[1].score));
        for a in &kps {
            for b in &kps {
                if a != b {
                    assert!((a.x - b.x).hypot(a.y - b.y) > NMS_RADIUS);
                }
            }
        }
    }

    fn noise_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, 1, |_, _, _| rng.random::<f64>()).unwrap()
    }

    #[test]
    fn describe_is_deterministic_and_filters_border() {
        let img = noise_image(64, 64, 1);
        let kps = [
            Keypoint {
                x: 30.0,
                y: 30.0,
                score: 1.0,
            },
            Keypoint {
                x: 2.0,
                y: 30.0,
                score: 1.0,
            },
            Keypoint {
                x: 30.0,
                y: 50.0,
                score: 1.0,
            },
        ];
        let a = describe(&img, &kps);
        let b = describe(&img, &kps);
        assert_eq!(a.descriptors, b.descriptors);
        assert_eq!(a.kept, vec![0]);
        assert_eq!(a.dropped, vec![1, 2]);
    }

    #[test]
    fn same_patch_content_same_descriptor() {
        let patch = noise_image(40, 40, 7);
        let img = Image::from_fn(100, 140, 1, |r, c, _| {
            if (10..50).contains(&r) && (10..50).contains(&c) {
                patch.get(r - 10, c - 10, 0)
            } else if (50..90).contains(&r) && (90..130).contains(&c) {
                patch.get(r - 50, c - 90, 0)
            } else {
                0.0
            }
        })
        .unwrap();
        let kps = [
            Keypoint {
                x: 30.0,
                y: 30.0,
                score: 1.0,
            },
            Keypoint {
                x: 110.0,
                y: 70.0,
                score: 1.0,
            },
        ];
        let d = describe(&img, &kps);
        assert_eq!(d.descriptors.len(), 2);
        assert_eq!(d.descriptors[0], d.descriptors[1]);
    }

    fn random_descriptor(rng: &mut ChaCha8Rng) -> Descriptor {
        Descriptor {
            bits: [rng.random(), rng.random(), rng.random(), rng.random()],
        }
    }

    fn flip_bits(d: &Descriptor, n: usize, rng: &mut ChaCha8Rng) -> Descriptor {
        let mut out = *d;
        let mut chosen = std::collections::HashSet::new();
        while chosen.len() < n {
            chosen.insert(rng.random_range(0..256usize));
        }
        for i in chosen {
            out.bits[i / 64] ^= 1 << (i % 64);
        }
        out
    }

    #[test]
    fn identical_lists_match_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<_> = (0..40).map(|_| random_descriptor(&mut rng)).collect();
        let m = match_descriptors(&a, &a, 0.75);
        assert_eq!(m.len(), 40);
        for (i, mm) in m.iter().enumerate() {
            assert_eq!((mm.query, mm.train, mm.distance), (i, i, 0));
        }
    }

    #[test]
    fn identical_train_descriptors_fail_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<_> = (0..5).map(|_| random_descriptor(&mut rng)).collect();
        let b = vec![random_descriptor(&mut rng); 6];
        assert!(match_descriptors(&a, &b, 0.75).is_empty());
        assert!(match_descriptors(&a, &b, 1.0).is_empty());
    }

    /// Exhaustive oracle: for each planted pair, is the planted partner the
    /// unique nearest neighbour in both directions?
    fn planted_recoverable(a: &[Descriptor], b: &[Descriptor], i: usize) -> bool {
        let d = a[i].hamming(&b[i]);
        b.iter()
            .enumerate()
            .all(|(j, o)| j == i || a[i].hamming(o) > d)
            && a.iter()
                .enumerate()
                .all(|(j, o)| j == i || b[i].hamming(o) > d)
    }

    #[test]
    fn planted_correspondences_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let planted = 60;
        let a: Vec<_> = (0..planted).map(|_| random_descriptor(&mut rng)).collect();
        let mut b: Vec<_> = a
            .iter()
            .map(|d| {
                let n = rng.random_range(0..=10);
                flip_bits(d, n, &mut rng)
            })
            .collect();
        // Distractors at least 80 bits from every planted descriptor.
        while b.len() < planted + 40 {
            let cand = random_descriptor(&mut rng);
            if a.iter().all(|d| d.hamming(&cand) >= 80) {
                b.push(cand);
            }
        }
        let oracle = (0..planted)
            .filter(|&i| planted_recoverable(&a, &b, i))
            .count();
        assert!(oracle as f64 >= 0.95 * planted as f64);
        let matches = match_descriptors(&a, &b, 0.75);
        let hits = matches.iter().filter(|m| m.query == m.train).count();
        assert!(hits as f64 >= 0.95 * planted as f64, "{hits}");
        assert!(matches.iter().all(|m| m.query == m.train));
    }

    #[test]
    fn cross_check_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<_> = (0..30).map(|_| random_descriptor(&mut rng)).collect();
        let b: Vec<_> = (0..25).map(|_| random_descriptor(&mut rng)).collect();
        let ab = match_descriptors(&a, &b, 1.0);
        let ba = match_descriptors(&b, &a, 1.0);
        for m in &ab {
            assert_eq!(nearest_two(&a[m.query], &b).0, m.train);
            assert_eq!(nearest_two(&b[m.train], &a).0, m.query);
        }
        let mut flipped: Vec<_> = ba.iter().map(|m| (m.train, m.query)).collect();
        flipped.sort();
        let mut direct: Vec<_> = ab.iter().map(|m| (m.query, m.train)).collect();
        direct.sort();
        // Ratio 1.0 rejects only exact ties, so both directions agree unless a tie exists.
        assert!(
            direct.iter().all(|p| flipped.contains(p))
                || flipped.iter().all(|p| direct.contains(p))
        );
    }

    #[test]
    fn self_matching_has_zero_displacement() {
        let img = Image::from_fn(96, 96, 1, |r, c, _| {
            let (x, y) = (c as f64, r as f64);
            (0.5 + 0.25 * (x * 0.31).sin() * (y * 0.23).cos() + 0.2 * ((x * y) * 0.007).sin())
                .clamp(0.0, 1.0)
        })
        .unwrap();
        let pairs = match_images(&img, &img, 500, 0.05, 0.75);
        assert!(!pairs.is_empty());
        for p in pairs {
            assert_eq!(p.p1, p.p2);
        }
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        write_matches_csv(
            &mut buf,
            &[MatchPair {
                p1: (1.0, 2.0),
                p2: (3.5, 4.0),
                distance: 7,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x1,y1,x2,y2,distance\n1,2,3.5,4,7\n"
        );
    }
}
