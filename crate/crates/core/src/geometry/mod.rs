//! Projective geometry between the transmitted frame and the side frame.
//!
//! Convention used across the crate: a [`Homography`] maps side-image (`y`)
//! coordinates to transmitted-image (`x`) coordinates, so
//! `warp_image(y, h, ..)` renders the side image in the `x` frame.

mod dlt;
mod homography;
mod ransac;
mod refine;
mod warp;

pub use dlt::{dlt_solve, triangle_area};
pub use homography::{
    corner_transfer_error, format_homography, parse_homography, read_homography, write_homography,
    Homography,
};
pub use ransac::{ransac_homography, symmetric_transfer_error, RansacConfig, RansacResult};
pub use refine::{photometric_rmse, refine_homography, RefineConfig, RefineOutcome, RefineStatus};
pub use warp::{
    covered_fraction, generate_mask, generate_mask_between, sample_bicubic, warp_image, warp_plane,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("homography is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("rank-deficient linear system")]
    RankDeficient,
    #[error("no model reached the consensus floor (best {inliers}/{total} inliers)")]
    NoConsensus { inliers: usize, total: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("homography file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
