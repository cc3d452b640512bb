//! Counting stationary people from FMCW mmWave radar micro-motion.
//!
//! The pipeline turns raw IQ frames into range-azimuth maps and a CFAR point
//! cloud, estimates per-point micro-displacements from peak Doppler
//! velocities, separates the displacement matrix into independent sources
//! with repeated FastICA, keeps the breathing-like sources and groups their
//! spatial mappings to estimate how many people are present. A point
//! scatterer simulator provides ground-truth recordings for every stage.

pub mod breathing;
pub mod classifier;
pub mod cluster;
pub mod config;
pub mod counting;
pub mod dsp;
pub mod error;
pub mod export;
pub mod ica;
pub mod iq;
pub mod metrics;
pub mod micro_motion;
pub mod mmcr;
pub mod pipeline;
pub mod profile;
pub mod rng;
pub mod sim;
pub mod suite;

pub use config::{Preset, RadarConfig, Resolutions};
pub use error::{Error, Result};
