//! Orthonormal 2-D type-II DCT on square blocks, coefficients in zig-zag order.

use std::f64::consts::PI;

/// Zig-zag scan of a `b`×`b` block: `order[k]` is the row-major index of the
/// `k`-th coefficient.
pub fn zigzag(b: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(b * b);
    for s in 0..(2 * b).saturating_sub(1) {
        let lo = s.saturating_sub(b - 1);
        let hi = s.min(b - 1);
        if s % 2 == 0 {
            // Up-right: row decreasing.
            for r in (lo..=hi).rev() {
                order.push(r * b + (s - r));
            }
        } else {
            for r in lo..=hi {
                order.push(r * b + (s - r));
            }
        }
    }
    order
}

/// Orthonormal DCT-II basis: `basis[k * b + n]`.
fn basis(b: usize) -> Vec<f64> {
    let mut m = vec![0.0; b * b];
    for k in 0..b {
        let scale = if k == 0 {
            (1.0 / b as f64).sqrt()
        } else {
            (2.0 / b as f64).sqrt()
        };
        for n in 0..b {
            m[k * b + n] = scale * (PI * (n as f64 + 0.5) * k as f64 / b as f64).cos();
        }
    }
    m
}

/// Reusable transform for one block size.
#[derive(Debug, Clone)]
pub struct BlockDct {
    size: usize,
    basis: Vec<f64>,
    zigzag: Vec<usize>,
}

impl BlockDct {
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "block size must be positive");
        Self {
            size,
            basis: basis(size),
            zigzag: zigzag(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major block → zig-zag coefficients.
    pub fn forward(&self, block: &[f64]) -> Vec<f64> {
        let b = self.size;
        assert_eq!(block.len(), b * b, "block length must be size²");
        // Rows then columns.
        let mut tmp = vec![0.0; b * b];
        for r in 0..b {
            for k in 0..b {
                tmp[r * b + k] = (0..b)
                    .map(|n| self.basis[k * b + n] * block[r * b + n])
                    .sum();
            }
        }
        let mut coeffs = vec![0.0; b * b];
        for k in 0..b {
            for c in 0..b {
                coeffs[k * b + c] = (0..b).map(|n| self.basis[k * b + n] * tmp[n * b + c]).sum();
            }
        }
        self.zigzag.iter().map(|&i| coeffs[i]).collect()
    }

    /// Zig-zag coefficients → row-major block.
    pub fn inverse(&self, zz: &[f64]) -> Vec<f64> {
        let b = self.size;
        assert_eq!(zz.len(), b * b, "coefficient length must be size²");
        let mut coeffs = vec![0.0; b * b];
        for (k, &i) in self.zigzag.iter().enumerate() {
            coeffs[i] = zz[k];
        }
        let mut tmp = vec![0.0; b * b];
        for n in 0..b {
            for c in 0..b {
                tmp[n * b + c] = (0..b)
                    .map(|k| self.basis[k * b + n] * coeffs[k * b + c])
                    .sum();
            }
        }
        let mut out = vec![0.0; b * b];
        for r in 0..b {
            for n in 0..b {
                out[r * b + n] = (0..b).map(|k| self.basis[k * b + n] * tmp[r * b + k]).sum();
            }
        }
        out
    }
}

fn side_of(len: usize) -> usize {
    let b = (len as f64).sqrt().round() as usize;
    assert_eq!(b * b, len, "block length must be a perfect square");
    b
}

/// Forward DCT of a row-major square block of any size.
pub fn forward_transform(block: &[f64]) -> Vec<f64> {
    BlockDct::new(side_of(block.len())).forward(block)
}

pub fn inverse_transform(coeffs: &[f64]) -> Vec<f64> {
    BlockDct::new(side_of(coeffs.len())).inverse(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zigzag_8_matches_jpeg_prefix() {
        let z = zigzag(8);
        assert_eq!(&z[..10], &[0, 1, 8, 16, 9, 2, 3, 10, 17, 24]);
        assert_eq!(z[63], 63);
        let mut sorted = z.clone();
        sorted.sort();
        assert_eq!(sorted, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn constant_block_is_pure_dc() {
        let c = 0.37;
        let coeffs = forward_transform(&[c; 64]);
        assert!((coeffs[0] - 8.0 * c).abs() < 1e-12);
        assert!(coeffs[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn impulse_has_unit_norm() {
        let mut b = [0.0; 64];
        b[19] = 1.0;
        let n: f64 = forward_transform(&b)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    /// Direct O(N⁴) evaluation of the 2-D DCT-II definition.
    fn naive_dct(block: &[f64], b: usize) -> Vec<f64> {
        let a = |k: usize| {
            if k == 0 {
                (1.0 / b as f64).sqrt()
            } else {
                (2.0 / b as f64).sqrt()
            }
        };
        let mut out = vec![0.0; b * b];
        for u in 0..b {
            for v in 0..b {
                let mut s = 0.0;
                for r in 0..b {
                    for c in 0..b {
                        s += block[r * b + c]
                            * (PI * (r as f64 + 0.5) * u as f64 / b as f64).cos()
                            * (PI * (c as f64 + 0.5) * v as f64 / b as f64).cos();
                    }
                }
                out[u * b + v] = a(u) * a(v) * s;
            }
        }
        out
    }

    #[test]
    fn separable_matches_definition() {
        let block: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let want = naive_dct(&block, 8);
        let got = forward_transform(&block);
        for (k, &i) in zigzag(8).iter().enumerate() {
            assert!((got[k] - want[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(b in 2usize..10, seed in prop::collection::vec(-1.0f64..1.0, 100)) {
            let block: Vec<f64> = seed.iter().cycle().take(b * b).copied().collect();
            let coeffs = forward_transform(&block);
            let e_in: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            let e_out: f64 = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((e_in - e_out).abs() < 1e-9);
            let back = inverse_transform(&coeffs);
            for (a, b) in block.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
