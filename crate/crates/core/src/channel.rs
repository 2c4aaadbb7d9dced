//! Power normalization and complex AWGN.

use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// SNR at or above this many dB is treated as a noiseless channel.
pub const NOISELESS_SNR_DB: f64 = 300.0;

const CHUNK: usize = 4096;
/// 32-bit generator words consumed per complex noise sample.
const WORDS_PER_SAMPLE: u128 = 4;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("cannot normalize a zero-norm codeword")]
    ZeroNorm,
    #[error("power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub power: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            snr_db: 10.0,
            power: 1.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn noise_var(&self) -> f64 {
        snr_to_noise_var(self.snr_db, self.power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub symbols: Vec<Complex64>,
}

impl Codeword {
    pub fn k(&self) -> usize {
        self.symbols.len()
    }

    /// `(1/k)·‖z‖²`.
    pub fn average_power(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(Complex64::norm_sqr).sum::<f64>() / self.k() as f64
    }
}

/// Scales `raw` to average power `power`; returns the codeword and the
/// applied scale factor.
pub fn normalize_power(raw: &[Complex64], power: f64) -> Result<(Codeword, f64), ChannelError> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(ChannelError::InvalidPower(power));
    }
    let norm = raw.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(ChannelError::ZeroNorm);
    }
    let scale = (raw.len() as f64 * power).sqrt() / norm;
    let symbols = raw.iter().map(|z| z * scale).collect();
    Ok((Codeword { symbols }, scale))
}

/// Complex noise variance for a given SNR; zero in the noiseless limit.
pub fn snr_to_noise_var(snr_db: f64, power: f64) -> f64 {
    if snr_db >= NOISELESS_SNR_DB {
        0.0
    } else {
        power / 10f64.powf(snr_db / 10.0)
    }
}

/// Channel bandwidth ratio `k / (H·W·C)`.
pub fn cbr(k: usize, height: usize, width: usize, channels: usize) -> f64 {
    k as f64 / (height * width * channels) as f64
}

fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn unit_closed_open(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `len` circularly-symmetric complex Gaussian samples of variance `var`.
///
/// Sample `i` depends only on `(seed, i)`, so the output does not depend on
/// how the work is split across threads.
pub fn complex_noise(len: usize, var: f64, seed: u64) -> Vec<Complex64> {
    let sd = (var / 2.0).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_word_pos((c * CHUNK) as u128 * WORDS_PER_SAMPLE);
            for z in chunk {
                let u1 = unit_open(rng.next_u64());
                let u2 = unit_closed_open(rng.next_u64());
                let r = (-2.0 * u1.ln()).sqrt() * sd;
                let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
                *z = Complex64::new(r * c, r * s);
            }
        });
    out
}

/// `ẑ = z + n`.
pub fn transmit(z: &Codeword, cfg: &ChannelConfig) -> Vec<Complex64> {
    let var = cfg.noise_var();
    if var == 0.0 {
        return z.symbols.clone();
    }
    let noise = complex_noise(z.k(), var, cfg.seed);
    z.symbols.iter().zip(&noise).map(|(a, n)| a + n).collect()
}

/// Interleaved `f32` (re, im) little-endian dump.
pub fn write_complex_f32(values: &[Complex64], path: impl AsRef<Path>) -> Result<(), ChannelError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in values {
        out.write_f32::<LittleEndian>(v.re as f32)?;
        out.write_f32::<LittleEndian>(v.im as f32)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(k: usize) -> Vec<Complex64> {
        (0..k)
            .map(|i| Complex64::new(i as f64 * 0.1 - 3.0, 1.0 - i as f64 * 0.05))
            .collect()
    }

    #[test]
    fn normalize_examples() {
        let raw = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)];
        let (z, s) = normalize_power(&raw, 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(z.symbols, raw);
        let (z, _) = normalize_power(&ramp(77), 1.0).unwrap();
        assert!((z.average_power() - 1.0).abs() < 1e-9);
        let (z, _) = normalize_power(&ramp(10), 2.5).unwrap();
        assert!((z.average_power() - 2.5).abs() < 1e-9);
        assert!(matches!(
            normalize_power(&[Complex64::default(); 4], 1.0),
            Err(ChannelError::ZeroNorm)
        ));
        assert!(normalize_power(&ramp(3), 0.0).is_err());
    }

    #[test]
    fn noise_var_examples() {
        assert_eq!(snr_to_noise_var(0.0, 1.0), 1.0);
        assert!((snr_to_noise_var(10.0, 1.0) - 0.1).abs() < 1e-15);
        // 10^(-0.3) by its series-free definition: exp(-0.3 ln 10).
        let want = (-0.3 * std::f64::consts::LN_10).exp();
        assert!((snr_to_noise_var(3.0, 1.0) - want).abs() < 1e-12);
        assert!((want - 0.501187).abs() < 1e-6);
        assert_eq!(snr_to_noise_var(300.0, 1.0), 0.0);
    }

    #[test]
    fn cbr_examples() {
        assert_eq!(cbr(6144, 256, 256, 3), 0.03125);
        assert_eq!(cbr(0, 256, 256, 3), 0.0);
        assert_eq!(cbr(196_608, 256, 256, 3), 1.0);
    }

    #[test]
    fn noiseless_is_identity_and_seeded_is_deterministic() {
        let (z, _) = normalize_power(&ramp(100), 1.0).unwrap();
        let quiet = ChannelConfig {
            snr_db: 300.0,
            ..Default::default()
        };
        assert_eq!(transmit(&z, &quiet), z.symbols);
        let cfg = ChannelConfig {
            snr_db: 5.0,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(transmit(&z, &cfg), transmit(&z, &cfg));
        let other = ChannelConfig { seed: 10, ..cfg };
        assert_ne!(transmit(&z, &cfg), transmit(&z, &other));
    }

    #[test]
    fn noise_statistics() {
        let n = complex_noise(1_000_000, 0.5, 42);
        let len = n.len() as f64;
        let var = n.iter().map(Complex64::norm_sqr).sum::<f64>() / len;
        assert!((var - 0.5).abs() < 0.005, "{var}");
        let re = n.iter().map(|z| z.re * z.re).sum::<f64>() / len;
        assert!((re - 0.25).abs() < 0.0025, "{re}");
        let mean = n.iter().sum::<Complex64>() / len;
        assert!(mean.norm() < 0.005);
        let cross = n.iter().map(|z| z.re * z.im).sum::<f64>() / len;
        assert!(cross.abs() < 0.005);
    }

    #[test]
    fn noise_prefix_is_stable() {
        // Sample i must not depend on the total length or the chunking.
        let long = complex_noise(3 * CHUNK + 17, 1.0, 5);
        let short = complex_noise(CHUNK + 3, 1.0, 5);
        assert_eq!(&long[..short.len()], &short[..]);
    }

    #[test]
    fn empirical_snr_within_tolerance() {
        let (z, _) = normalize_power(&ramp(4096), 1.0).unwrap();
        for seed in 0..100 {
            let cfg = ChannelConfig {
                snr_db: 7.0,
                power: 1.0,
                seed,
            };
            let out = transmit(&z, &cfg);
            let noise: f64 = out
                .iter()
                .zip(&z.symbols)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let signal: f64 = z.symbols.iter().map(Complex64::norm_sqr).sum();
            let snr = 10.0 * (signal / noise).log10();
            assert!((snr - 7.0).abs() < 0.3, "seed {seed}: {snr}");
        }
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.f32");
        let n = complex_noise(5, 1.0, 1);
        write_complex_f32(&n, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 40);
        let re0 = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let im4 = f32::from_le_bytes(bytes[36..40].try_into().unwrap());
        assert_eq!(re0, n[0].re as f32);
        assert_eq!(im4, n[4].im as f32);
    }
}
