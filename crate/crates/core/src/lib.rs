//! Wyner-Ziv style image transmission over an AWGN channel with a
//! homography-aligned side image at the receiver.
//!
//! The transmitter estimates where the receiver's view `y` overlaps its own
//! frame `x`, sends only the uncovered region through a block-DCT analog
//! codec, and the receiver fills the rest by warping `y` and blending the
//! seam. [`pipeline::run_pipeline`] runs one trial end to end and
//! [`sweep::run_sweep`] aggregates Monte-Carlo trials.

// NaN-rejecting checks are written as `!(v > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codec;
pub mod config;
pub mod features;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod reconstruct;
pub mod strategy;
pub mod sweep;
pub mod synth;
