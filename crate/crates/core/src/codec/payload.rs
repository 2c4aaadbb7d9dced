//! Little-endian byte layout of an encoded payload.
//!
//! ```text
//! u32 height, u32 width, u8 channels, u8 block size, u8 bank id
//! [bank id 255 only] 16 × u16 bank dimensions
//! per grid block: u8 bank index, 0xFF when not transmitted
//! per transmitted block: min(dim, B²) × f32 coefficient variance
//! per symbol: f32 re, f32 im
//! ```
//!
//! The transmit mask is not stored; the receiver regenerates it from the
//! shared homography.

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use super::{BlockAllocation, BlockGrid, CodecError, DimensionBank, PayloadMeta, BANK_SIZE};
use crate::image::Mask;

const SKIPPED: u8 = 0xFF;
const CUSTOM_BANK: u8 = 255;

fn io_err(e: std::io::Error) -> CodecError {
    CodecError::Payload(e.to_string())
}

/// Bytes taken by everything except the symbols.
pub fn metadata_len(meta: &PayloadMeta) -> usize {
    let bank = if meta.bank.id() == CUSTOM_BANK {
        2 * BANK_SIZE
    } else {
        0
    };
    let n = meta.grid.coeffs_per_block();
    let variances: usize = meta.allocations.iter().map(|a| a.selected_dim.min(n)).sum();
    11 + bank + meta.grid.block_count() + 4 * variances
}

pub fn write_payload(
    meta: &PayloadMeta,
    symbols: &[Complex64],
    out: &mut impl Write,
) -> Result<(), CodecError> {
    let g = meta.grid;
    let too_big = |what: &str| CodecError::Payload(format!("{what} does not fit the header"));
    out.write_u32::<LittleEndian>(u32::try_from(g.height).map_err(|_| too_big("height"))?)
        .map_err(io_err)?;
    out.write_u32::<LittleEndian>(u32::try_from(g.width).map_err(|_| too_big("width"))?)
        .map_err(io_err)?;
    out.write_u8(g.channels as u8).map_err(io_err)?;
    out.write_u8(u8::try_from(g.block_size).map_err(|_| too_big("block size"))?)
        .map_err(io_err)?;
    let id = meta.bank.id();
    out.write_u8(id).map_err(io_err)?;
    if id == CUSTOM_BANK {
        for &d in meta.bank.dims() {
            out.write_u16::<LittleEndian>(d as u16).map_err(io_err)?;
        }
    }
    let mut index = vec![SKIPPED; g.block_count()];
    for a in &meta.allocations {
        index[a.block_index] = meta.bank.index_of(a.selected_dim).ok_or_else(|| {
            CodecError::Payload(format!("dimension {} not in bank", a.selected_dim))
        })? as u8;
    }
    out.write_all(&index).map_err(io_err)?;
    for a in &meta.allocations {
        for &v in &a.coeff_variances {
            out.write_f32::<LittleEndian>(v as f32).map_err(io_err)?;
        }
    }
    for s in symbols {
        out.write_f32::<LittleEndian>(s.re as f32).map_err(io_err)?;
        out.write_f32::<LittleEndian>(s.im as f32).map_err(io_err)?;
    }
    Ok(())
}

/// Parses a payload; `mask` is the receiver's regenerated transmit mask.
pub fn read_payload(
    bytes: &[u8],
    mask: &Mask,
) -> Result<(PayloadMeta, Vec<Complex64>), CodecError> {
    let mut r = Cursor::new(bytes);
    let height = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let width = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    let channels = r.read_u8().map_err(io_err)? as usize;
    let block_size = r.read_u8().map_err(io_err)? as usize;
    let grid = BlockGrid::new(height, width, channels, block_size)?;
    if mask.height() != height || mask.width() != width {
        return Err(CodecError::Payload("mask does not match the header".into()));
    }
    let bank = match r.read_u8().map_err(io_err)? {
        0 => DimensionBank::default(),
        CUSTOM_BANK => {
            let mut dims = [0usize; BANK_SIZE];
            for d in &mut dims {
                *d = r.read_u16::<LittleEndian>().map_err(io_err)? as usize;
            }
            DimensionBank::new(dims)?
        }
        other => return Err(CodecError::Payload(format!("unknown bank id {other}"))),
    };
    let mut index = vec![0u8; grid.block_count()];
    r.read_exact(&mut index).map_err(io_err)?;
    let n = grid.coeffs_per_block();
    let mut allocations = Vec::new();
    for (block_index, &j) in index.iter().enumerate() {
        if j == SKIPPED {
            continue;
        }
        let selected_dim = *bank
            .dims()
            .get(j as usize)
            .ok_or_else(|| CodecError::Payload(format!("bank index {j} out of range")))?;
        allocations.push(BlockAllocation {
            block_index,
            selected_dim,
            coeff_variances: Vec::new(),
        });
    }
    for a in &mut allocations {
        a.coeff_variances = (0..a.selected_dim.min(n))
            .map(|_| r.read_f32::<LittleEndian>().map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
    }
    let meta = PayloadMeta {
        grid,
        bank,
        allocations,
        mask: mask.clone(),
    };
    let rest = bytes.len() - r.position() as usize;
    if rest != 8 * meta.symbol_count() {
        return Err(CodecError::LengthMismatch {
            expected: 8 * meta.symbol_count(),
            found: rest,
        });
    }
    let mut symbols = Vec::with_capacity(meta.symbol_count());
    for _ in 0..meta.symbol_count() {
        let re = r.read_f32::<LittleEndian>().map_err(io_err)?;
        let im = r.read_f32::<LittleEndian>().map_err(io_err)?;
        symbols.push(Complex64::new(re.into(), im.into()));
    }
    Ok((meta, symbols))
}
