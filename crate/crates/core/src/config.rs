//! Radar configuration and the resolutions derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirp, frame and antenna parameters of an FMCW radar.
///
/// The virtual array is a uniform linear array along azimuth with
/// half-wavelength element spacing; elevation is not modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Hz
    pub center_frequency: f64,
    /// m
    pub wavelength: f64,
    /// Hz
    pub chirp_bandwidth: f64,
    pub chirps_per_frame: usize,
    pub adc_samples_per_chirp: usize,
    /// Active chirping duration of one frame, s.
    pub frame_time: f64,
    /// Frame repetition rate, Hz.
    pub frame_rate: f64,
    pub frame_count: usize,
    pub virtual_antennas: usize,
    /// Half-width of the azimuth field of view, degrees.
    pub azimuth_fov: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    /// m
    pub range_resolution: f64,
    /// m/s
    pub velocity_resolution: f64,
    /// m
    pub max_range: f64,
    /// m/s
    pub max_velocity: f64,
}

/// Named configuration presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Four-chip cascade, 192 virtual antennas.
    Full,
    /// Single-chip 3TX/4RX equivalent, 12 virtual antennas.
    LowRes,
    /// 192 antennas with fewer chirps and samples, for fast dataset generation.
    Compact,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Full, Preset::LowRes, Preset::Compact];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::LowRes => "low-res",
            Preset::Compact => "compact",
        }
    }

    pub fn config(self) -> RadarConfig {
        match self {
            Preset::Full => RadarConfig::full(),
            Preset::LowRes => RadarConfig::low_res(),
            Preset::Compact => RadarConfig::compact(),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown radar preset '{s}' (expected full, low-res or compact)")))
    }
}

impl RadarConfig {
    /// Cascaded imaging radar at 79.13 GHz with 192 virtual antennas.
    pub fn full() -> Self {
        RadarConfig {
            center_frequency: 79.13e9,
            wavelength: 3.79e-3,
            chirp_bandwidth: 3.56e9,
            chirps_per_frame: 128,
            adc_samples_per_chirp: 256,
            frame_time: 0.089,
            frame_rate: 2.0,
            frame_count: 60,
            virtual_antennas: 192,
            azimuth_fov: 70.0,
        }
    }

    /// Same waveform as [`RadarConfig::full`] with three of four chips disabled.
    pub fn low_res() -> Self {
        RadarConfig {
            virtual_antennas: 12,
            ..Self::full()
        }
    }

    /// Full-aperture array with 32 chirps and 128 samples per chirp.
    ///
    /// Range resolution and frame timing are unchanged; max range halves to
    /// about 5.4 m and max velocity drops to a quarter.
    pub fn compact() -> Self {
        RadarConfig {
            chirps_per_frame: 32,
            adc_samples_per_chirp: 128,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("center_frequency", self.center_frequency),
            ("wavelength", self.wavelength),
            ("chirp_bandwidth", self.chirp_bandwidth),
            ("frame_time", self.frame_time),
            ("frame_rate", self.frame_rate),
            ("azimuth_fov", self.azimuth_fov),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {value}")));
            }
        }
        let counts = [
            ("chirps_per_frame", self.chirps_per_frame),
            ("adc_samples_per_chirp", self.adc_samples_per_chirp),
            ("frame_count", self.frame_count),
            ("virtual_antennas", self.virtual_antennas),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let expected = SPEED_OF_LIGHT / self.center_frequency;
        if ((self.wavelength - expected) / expected).abs() > 0.005 {
            return Err(Error::Config(format!(
                "wavelength {} m is not within 0.5% of c/f = {expected} m",
                self.wavelength
            )));
        }
        if self.frame_time > 1.0 / self.frame_rate {
            return Err(Error::Config(format!(
                "frame_time {} s exceeds the frame period {} s",
                self.frame_time,
                1.0 / self.frame_rate
            )));
        }
        if self.azimuth_fov > 90.0 {
            return Err(Error::Config("azimuth_fov must be at most 90 degrees".into()));
        }
        Ok(())
    }

    /// Chirp repetition interval, s.
    pub fn chirp_interval(&self) -> f64 {
        self.frame_time / self.chirps_per_frame as f64
    }

    /// Time between frame starts, s.
    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Azimuth FFT length: the next power of two at or above the antenna count.
    pub fn azimuth_fft_size(&self) -> usize {
        self.virtual_antennas.next_power_of_two()
    }

    /// Complex samples in one frame.
    pub fn frame_len(&self) -> usize {
        self.chirps_per_frame * self.virtual_antennas * self.adc_samples_per_chirp
    }

    pub fn derived_resolutions(&self) -> Result<Resolutions> {
        if !(self.chirp_bandwidth > 0.0) || !(self.frame_time > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::Config(
                "bandwidth, frame time and wavelength must be positive".into(),
            ));
        }
        if self.chirps_per_frame == 0 || self.adc_samples_per_chirp == 0 {
            return Err(Error::Config("chirp and sample counts must be positive".into()));
        }
        let range_resolution = SPEED_OF_LIGHT / (2.0 * self.chirp_bandwidth);
        let tc = self.chirp_interval();
        Ok(Resolutions {
            range_resolution,
            max_range: self.adc_samples_per_chirp as f64 * range_resolution,
            velocity_resolution: self.wavelength / (2.0 * self.chirps_per_frame as f64 * tc),
            max_velocity: self.wavelength / (4.0 * tc),
        })
    }

    /// Bin width of the azimuth spectrum at broadside, degrees.
    pub fn azimuth_bin_width_deg(&self) -> f64 {
        (2.0 / self.azimuth_fft_size() as f64).asin().to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            p.config().validate().unwrap();
        }
    }

    #[test]
    fn doubling_bandwidth_halves_range_resolution() {
        let a = RadarConfig::full();
        let b = RadarConfig {
            chirp_bandwidth: 2.0 * a.chirp_bandwidth,
            ..a.clone()
        };
        let ra = a.derived_resolutions().unwrap().range_resolution;
        let rb = b.derived_resolutions().unwrap().range_resolution;
        assert_eq!(ra, 2.0 * rb);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut c = RadarConfig::full();
        c.chirp_bandwidth = 0.0;
        assert!(matches!(c.derived_resolutions(), Err(Error::Config(_))));
        let mut c = RadarConfig::full();
        c.chirps_per_frame = 0;
        assert!(c.derived_resolutions().is_err());
        let mut c = RadarConfig::full();
        c.wavelength = 4.0e-3;
        assert!(c.validate().is_err());
        let mut c = RadarConfig::full();
        c.frame_time = 0.6;
        assert!(c.validate().is_err());
    }

    #[test]
    fn azimuth_fft_sizes() {
        assert_eq!(RadarConfig::full().azimuth_fft_size(), 256);
        assert_eq!(RadarConfig::low_res().azimuth_fft_size(), 16);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("medium".parse::<Preset>().is_err());
    }
}
