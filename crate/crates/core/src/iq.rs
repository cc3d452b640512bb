//! In-memory IQ frames and cubes.

use num_complex::Complex32;

use crate::config::RadarConfig;
use crate::error::{Error, Result};

/// Complex baseband samples of one frame, indexed (chirp, antenna, sample)
/// with samples contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    pub index: usize,
    pub chirps: usize,
    pub antennas: usize,
    pub samples: usize,
    pub data: Vec<Complex32>,
}

impl IqFrame {
    pub fn zeros(config: &RadarConfig, index: usize) -> Self {
        IqFrame {
            index,
            chirps: config.chirps_per_frame,
            antennas: config.virtual_antennas,
            samples: config.adc_samples_per_chirp,
            data: vec![Complex32::new(0.0, 0.0); config.frame_len()],
        }
    }

    #[inline]
    pub fn offset(&self, chirp: usize, antenna: usize) -> usize {
        (chirp * self.antennas + antenna) * self.samples
    }

    /// Samples of one chirp on one antenna.
    pub fn chirp(&self, chirp: usize, antenna: usize) -> &[Complex32] {
        let o = self.offset(chirp, antenna);
        &self.data[o..o + self.samples]
    }

    pub fn check_matches(&self, config: &RadarConfig) -> Result<()> {
        let want = (
            config.chirps_per_frame,
            config.virtual_antennas,
            config.adc_samples_per_chirp,
        );
        let got = (self.chirps, self.antennas, self.samples);
        if want != got || self.data.len() != config.frame_len() {
            return Err(Error::Dimension(format!(
                "frame {} has shape {:?} with {} samples, configuration expects {:?}",
                self.index,
                got,
                self.data.len(),
                want
            )));
        }
        Ok(())
    }

    pub fn power(&self) -> f64 {
        self.data.iter().map(|z| f64::from(z.norm_sqr())).sum()
    }
}

/// A whole recording held in memory. Only practical for small configurations;
/// full-size recordings are streamed frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCube {
    pub config: RadarConfig,
    pub frames: Vec<IqFrame>,
}

impl IqCube {
    pub fn power(&self) -> f64 {
        self.frames.iter().map(IqFrame::power).sum()
    }
}
