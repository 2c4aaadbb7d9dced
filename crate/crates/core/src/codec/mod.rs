//! Rate-adaptive analog codec for the masked residual.
//!
//! The residual is split into square blocks per channel, each block is DCT
//! transformed, a Gaussian rate proxy picks a per-block output size from the
//! [`DimensionBank`], and the kept coefficients are paired into complex
//! channel symbols. Decoding applies per-coefficient shrinkage and inverts
//! the transform.

mod dct;
mod payload;
mod rate;

pub use dct::{forward_transform, inverse_transform, zigzag, BlockDct};
pub use payload::{metadata_len, read_payload, write_payload};
pub use rate::{allocate_rate, estimate_entropy, BlockAllocation, DimensionBank, BANK_SIZE};

use num_complex::Complex64;
use thiserror::Error;

use crate::image::{Image, ImageError, Mask};

pub const DEFAULT_BLOCK_SIZE: usize = 8;
/// One 8-bit quantization step.
pub const DEFAULT_Q: f64 = 1.0 / 255.0;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("budget of {budget} symbols is below the floor of {floor}")]
    BudgetInfeasible { budget: usize, floor: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("block size {0} is too small (need ≥ 2)")]
    InvalidBlockSize(usize),
    #[error("blocks hold at most {max_dim} values, bank starts at {min_dim}")]
    BlockTooSmall { max_dim: usize, min_dim: usize },
    #[error("invalid dimension bank: {0}")]
    Bank(String),
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("quantization scale must be positive")]
    InvalidQ,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Block layout over the zero-padded frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub block_size: usize,
    pub rows: usize,
    pub cols: usize,
}

impl BlockGrid {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        block_size: usize,
    ) -> Result<Self, CodecError> {
        if block_size < 2 {
            return Err(CodecError::InvalidBlockSize(block_size));
        }
        Ok(Self {
            height,
            width,
            channels,
            block_size,
            rows: height.div_ceil(block_size),
            cols: width.div_ceil(block_size),
        })
    }

    pub fn block_count(&self) -> usize {
        self.rows * self.cols * self.channels
    }

    pub fn coeffs_per_block(&self) -> usize {
        self.block_size * self.block_size
    }

    /// Largest output size a block supports: every coefficient sent at most twice.
    pub fn max_dim(&self) -> usize {
        2 * self.coeffs_per_block()
    }

    /// `(channel, block row, block col)` of a block index.
    pub fn locate(&self, index: usize) -> (usize, usize, usize) {
        let per_channel = self.rows * self.cols;
        (
            index / per_channel,
            (index % per_channel) / self.cols,
            index % self.cols,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub index: usize,
    /// Row-major samples, zero outside the frame.
    pub pixels: Vec<f64>,
    /// Fraction of the block's pixels marked for transmission.
    pub occupancy: f64,
}

impl Block {
    pub fn transmitted(&self) -> bool {
        self.occupancy > 0.0
    }
}

/// Splits an image into `block_size`² blocks, channel-major then row-major.
pub fn block_partition(
    img: &Image,
    mask: &Mask,
    block_size: usize,
) -> Result<(BlockGrid, Vec<Block>), CodecError> {
    if mask.height() != img.height() || mask.width() != img.width() {
        return Err(ImageError::Mismatch {
            left: img.dims(),
            right: (mask.height(), mask.width(), img.channels()),
        }
        .into());
    }
    let grid = BlockGrid::new(img.height(), img.width(), img.channels(), block_size)?;
    let b = block_size;
    let mut blocks = Vec::with_capacity(grid.block_count());
    for index in 0..grid.block_count() {
        let (ch, br, bc) = grid.locate(index);
        let mut pixels = vec![0.0; b * b];
        let mut set = 0usize;
        for r in 0..b {
            for c in 0..b {
                let (y, x) = (br * b + r, bc * b + c);
                if y < img.height() && x < img.width() {
                    pixels[r * b + c] = img.get(y, x, ch);
                    set += usize::from(mask.get(y, x));
                }
            }
        }
        blocks.push(Block {
            index,
            pixels,
            occupancy: set as f64 / (b * b) as f64,
        });
    }
    Ok((grid, blocks))
}

/// Everything the decoder needs besides the received symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadMeta {
    pub grid: BlockGrid,
    pub bank: DimensionBank,
    /// One entry per transmitted block, ascending block index.
    pub allocations: Vec<BlockAllocation>,
    /// Shared state: the receiver regenerates it from the homography.
    pub mask: Mask,
}

impl PayloadMeta {
    pub fn symbol_count(&self) -> usize {
        self.allocations.iter().map(BlockAllocation::symbols).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPayload {
    /// Concatenated per-block symbols before power normalization.
    pub symbols: Vec<Complex64>,
    pub meta: PayloadMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecParams {
    pub bank: DimensionBank,
    pub budget_k: usize,
    pub block_size: usize,
    pub q: f64,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            bank: DimensionBank::default(),
            budget_k: 6144,
            block_size: DEFAULT_BLOCK_SIZE,
            q: DEFAULT_Q,
        }
    }
}

/// Smallest symbol budget that lets every transmitted block start at the
/// bottom of the bank.
pub fn budget_floor(
    mask: &Mask,
    channels: usize,
    block_size: usize,
    bank: &DimensionBank,
) -> usize {
    let b = block_size;
    let (rows, cols) = (mask.height().div_ceil(b), mask.width().div_ceil(b));
    let mut occupied = 0;
    for br in 0..rows {
        for bc in 0..cols {
            let any = (br * b..((br + 1) * b).min(mask.height()))
                .any(|y| (bc * b..((bc + 1) * b).min(mask.width())).any(|x| mask.get(y, x)));
            occupied += usize::from(any);
        }
    }
    occupied * channels * bank.min_dim() / 2
}

/// `i`-th transmitted real value of a block: coefficients repeat cyclically
/// once the output size exceeds the coefficient count.
#[inline]
fn source_coeff(i: usize, n: usize) -> usize {
    i % n
}

pub fn encode(
    residual: &Image,
    mask: &Mask,
    params: &CodecParams,
) -> Result<EncodedPayload, CodecError> {
    if !(params.q > 0.0) {
        return Err(CodecError::InvalidQ);
    }
    let (grid, blocks) = block_partition(residual, mask, params.block_size)?;
    let dct = BlockDct::new(params.block_size);
    let n = grid.coeffs_per_block();
    let coeffs: Vec<Option<Vec<f64>>> = blocks
        .iter()
        .map(|b| b.transmitted().then(|| dct.forward(&b.pixels)))
        .collect();
    let entropies: Vec<f64> = coeffs
        .iter()
        .map(|c| c.as_ref().map_or(0.0, |c| estimate_entropy(c, params.q)))
        .collect();
    let occupancies: Vec<f64> = blocks.iter().map(|b| b.occupancy).collect();
    let mut allocations = allocate_rate(
        &entropies,
        &occupancies,
        &params.bank,
        params.budget_k,
        grid.max_dim(),
    )?;

    let mut reals = Vec::new();
    for alloc in &mut allocations {
        let c = coeffs[alloc.block_index]
            .as_ref()
            .expect("allocated blocks are transmitted");
        // Variances travel as f32 metadata.
        alloc.coeff_variances = c[..alloc.selected_dim.min(n)]
            .iter()
            .map(|v| f64::from((v * v) as f32))
            .collect();
        reals.extend((0..alloc.selected_dim).map(|i| c[source_coeff(i, n)]));
    }
    let symbols = reals
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    Ok(EncodedPayload {
        symbols,
        meta: PayloadMeta {
            grid,
            bank: params.bank.clone(),
            allocations,
            mask: mask.clone(),
        },
    })
}

/// Per-coefficient estimator applied by the decoder.
pub trait Shrinkage: Send + Sync {
    fn name(&self) -> &'static str;
    /// Gain applied to a received value with prior variance `prior_var` and
    /// per-real-component noise variance `noise_var`.
    fn gain(&self, prior_var: f64, noise_var: f64) -> f64;
}

/// Linear MMSE: `σ² / (σ² + σₙ²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MmseShrinkage;

impl Shrinkage for MmseShrinkage {
    fn name(&self) -> &'static str {
        "mmse"
    }

    fn gain(&self, prior_var: f64, noise_var: f64) -> f64 {
        if noise_var <= 0.0 {
            1.0
        } else {
            prior_var / (prior_var + noise_var)
        }
    }
}

/// Takes received values at face value.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityShrinkage;

impl Shrinkage for IdentityShrinkage {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn gain(&self, _prior_var: f64, _noise_var: f64) -> f64 {
        1.0
    }
}

/// Reconstructs the residual from received symbols.
///
/// `received` must already be scaled back to the encoder's symbol domain;
/// `noise_var` is the complex noise variance in that domain (half of it per
/// real component). Repeated coefficients are averaged before shrinkage.
pub fn decode(
    received: &[Complex64],
    meta: &PayloadMeta,
    noise_var: f64,
    shrinkage: &dyn Shrinkage,
) -> Result<Image, CodecError> {
    let expected = meta.symbol_count();
    if received.len() != expected {
        return Err(CodecError::LengthMismatch {
            expected,
            found: received.len(),
        });
    }
    let grid = meta.grid;
    if meta.mask.height() != grid.height || meta.mask.width() != grid.width {
        return Err(CodecError::Payload(
            "mask does not match the block grid".into(),
        ));
    }
    let b = grid.block_size;
    let n = grid.coeffs_per_block();
    let dct = BlockDct::new(b);
    let per_real = noise_var.max(0.0) / 2.0;
    let mut planes = vec![vec![0.0; grid.height * grid.width]; grid.channels];
    let mut offset = 0;
    for alloc in &meta.allocations {
        if alloc.block_index >= grid.block_count() {
            return Err(CodecError::Payload(format!(
                "block index {} out of range",
                alloc.block_index
            )));
        }
        let distinct = alloc.selected_dim.min(n);
        if alloc.coeff_variances.len() != distinct {
            return Err(CodecError::LengthMismatch {
                expected: distinct,
                found: alloc.coeff_variances.len(),
            });
        }
        let syms = &received[offset..offset + alloc.symbols()];
        offset += alloc.symbols();
        let mut sum = vec![0.0; distinct];
        let mut copies = vec![0usize; distinct];
        for (i, v) in syms.iter().flat_map(|s| [s.re, s.im]).enumerate() {
            let k = source_coeff(i, n);
            sum[k] += v;
            copies[k] += 1;
        }
        let mut coeffs = vec![0.0; n];
        for k in 0..distinct {
            let mean = sum[k] / copies[k] as f64;
            coeffs[k] =
                shrinkage.gain(alloc.coeff_variances[k], per_real / copies[k] as f64) * mean;
        }
        let pixels = dct.inverse(&coeffs);
        let (ch, br, bc) = grid.locate(alloc.block_index);
        for r in 0..b {
            for c in 0..b {
                let (y, x) = (br * b + r, bc * b + c);
                if y < grid.height && x < grid.width && meta.mask.get(y, x) {
                    planes[ch][y * grid.width + x] = pixels[r * b + c];
                }
            }
        }
    }
    Ok(Image::from_planes(grid.height, grid.width, &planes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::apply_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, c, |_, _, _| rng.random()).unwrap()
    }

    fn half_mask(h: usize, w: usize) -> Mask {
        Mask::new(h, w, (0..h * w).map(|i| i % w < w / 2).collect()).unwrap()
    }

    #[test]
    fn partition_examples() {
        let img = random_image(16, 16, 1, 1);
        let (grid, blocks) = block_partition(&img, &Mask::filled(16, 16, true), 8).unwrap();
        assert_eq!(grid.block_count(), 4);
        assert!(blocks.iter().all(|b| b.occupancy == 1.0));
        let (_, blocks) = block_partition(&img, &Mask::filled(16, 16, false), 8).unwrap();
        assert_eq!(blocks.iter().filter(|b| b.transmitted()).count(), 0);
        let (_, blocks) = block_partition(&img, &half_mask(16, 16), 8).unwrap();
        assert_eq!(blocks.iter().filter(|b| b.transmitted()).count(), 2);
        assert!(block_partition(&img, &Mask::filled(16, 16, true), 1).is_err());
    }

    #[test]
    fn partition_pads_with_zeros() {
        let img = Image::filled(10, 10, 3, 1.0).unwrap();
        let (grid, blocks) = block_partition(&img, &Mask::filled(10, 10, true), 8).unwrap();
        assert_eq!((grid.rows, grid.cols, grid.block_count()), (2, 2, 12));
        let last = &blocks[3];
        assert_eq!(last.pixels.iter().filter(|v| **v == 1.0).count(), 4);
        assert!((last.occupancy - 4.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_gives_empty_payload() {
        let img = random_image(16, 16, 3, 2);
        let p = encode(&img, &Mask::filled(16, 16, false), &CodecParams::default()).unwrap();
        assert!(p.symbols.is_empty());
        assert!(p.meta.allocations.is_empty());
    }

    #[test]
    fn constant_block_only_dc() {
        let img = Image::filled(8, 8, 1, 0.5).unwrap();
        let params = CodecParams {
            budget_k: 10,
            ..Default::default()
        };
        let p = encode(&img, &Mask::filled(8, 8, true), &params).unwrap();
        let reals: Vec<f64> = p.symbols.iter().flat_map(|s| [s.re, s.im]).collect();
        assert!((reals[0] - 4.0).abs() < 1e-12);
        assert!(reals[1..].iter().all(|v| v.abs() < 1e-12));
    }

    /// Reference reconstruction: truncate each block's coefficients at its
    /// allocated size, invert, mask.
    fn truncation(img: &Image, mask: &Mask, meta: &PayloadMeta) -> Image {
        let b = meta.grid.block_size;
        let dct = BlockDct::new(b);
        let (_, blocks) = block_partition(img, mask, b).unwrap();
        let mut planes = vec![vec![0.0; img.height() * img.width()]; img.channels()];
        for a in &meta.allocations {
            let mut c = dct.forward(&blocks[a.block_index].pixels);
            for v in c.iter_mut().skip(a.selected_dim) {
                *v = 0.0;
            }
            let px = dct.inverse(&c);
            let (ch, br, bc) = meta.grid.locate(a.block_index);
            for r in 0..b {
                for cc in 0..b {
                    let (y, x) = (br * b + r, bc * b + cc);
                    if y < img.height() && x < img.width() {
                        planes[ch][y * img.width() + x] = px[r * b + cc];
                    }
                }
            }
        }
        apply_mask(
            &Image::from_planes(img.height(), img.width(), &planes).unwrap(),
            mask,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_decode_is_truncation() {
        let img = random_image(24, 20, 3, 3);
        let mask = half_mask(24, 20);
        let x = apply_mask(&img, &mask).unwrap();
        for budget in [36, 60, 400, 3000] {
            let params = CodecParams {
                budget_k: budget,
                ..Default::default()
            };
            let p = encode(&x, &mask, &params).unwrap();
            assert_eq!(
                2 * p.symbols.len(),
                p.meta
                    .allocations
                    .iter()
                    .map(|a| a.selected_dim)
                    .sum::<usize>()
            );
            let out = decode(&p.symbols, &p.meta, 0.0, &MmseShrinkage).unwrap();
            let want = truncation(&x, &mask, &p.meta);
            for (a, b) in out.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repetition_reaches_full_fidelity() {
        let img = random_image(8, 8, 1, 4);
        let params = CodecParams {
            budget_k: 64,
            ..Default::default()
        };
        let p = encode(&img, &Mask::filled(8, 8, true), &params).unwrap();
        assert_eq!(p.meta.allocations[0].selected_dim, 128);
        let out = decode(&p.symbols, &p.meta, 0.0, &MmseShrinkage).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_noise_shrinks_to_zero() {
        let img = random_image(16, 16, 1, 5);
        let mask = Mask::filled(16, 16, true);
        let p = encode(&img, &mask, &CodecParams::default()).unwrap();
        let out = decode(&p.symbols, &p.meta, 1e30, &MmseShrinkage).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn equal_prior_and_noise_halves() {
        let img = Image::filled(8, 8, 1, 0.5).unwrap();
        let params = CodecParams {
            budget_k: 8,
            ..Default::default()
        };
        let mut p = encode(&img, &Mask::filled(8, 8, true), &params).unwrap();
        let nv = 0.3;
        for a in &mut p.meta.allocations {
            a.coeff_variances.iter_mut().for_each(|v| *v = nv / 2.0);
        }
        let half = decode(&p.symbols, &p.meta, nv, &MmseShrinkage).unwrap();
        assert!(half.data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert!((MmseShrinkage.gain(0.2, 0.2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decode_length_mismatch() {
        let img = random_image(8, 8, 1, 7);
        let p = encode(&img, &Mask::filled(8, 8, true), &CodecParams::default()).unwrap();
        assert!(matches!(
            decode(&p.symbols[1..], &p.meta, 0.0, &MmseShrinkage),
            Err(CodecError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn floor_matches_allocation_floor() {
        let mask = half_mask(20, 20);
        let bank = DimensionBank::default();
        let floor = budget_floor(&mask, 3, 8, &bank);
        let img = random_image(20, 20, 3, 8);
        let ok = CodecParams {
            budget_k: floor,
            ..Default::default()
        };
        assert!(encode(&img, &mask, &ok).is_ok());
        let bad = CodecParams {
            budget_k: floor - 1,
            ..Default::default()
        };
        assert!(matches!(
            encode(&img, &mask, &bad),
            Err(CodecError::BudgetInfeasible { .. })
        ));
    }
}
