//! Face anti-spoofing for non-calibrated two-sensor devices.
//!
//! Facial landmarks seen by both sensors give sparse disparities that are
//! interpolated into dense maps and stacked with the raw sensor planes as
//! input to a small evidential CNN. A synthetic stereo rig supplies scenes
//! with known geometry.

pub mod augment;
mod binio;
pub mod disparity;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod labels;
pub mod landmarks;
pub mod model;
pub mod planes;
pub mod rng;
pub mod synthrig;

pub use error::{Error, Result};
