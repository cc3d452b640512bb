//! Range, Doppler and azimuth processing of IQ frames.

pub mod cfar;

use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::{RadarConfig, Resolutions};
use crate::error::Result;
use crate::iq::IqFrame;

pub use cfar::{ca_cfar, ca_cfar_linear, CfarParams, CfarThreshold, Detection};

/// Floor applied before taking logarithms, dB.
pub const POWER_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    /// Symmetric window coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f32> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n == 1 => vec![1.0],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64;
                    (0.5 - 0.5 * x.cos()) as f32
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FftSettings {
    pub range_window: Window,
    pub doppler_window: Window,
    pub azimuth_window: Window,
}

impl Default for FftSettings {
    /// Hann over samples and antennas, rectangular over chirps so the
    /// Doppler peak bin stays sharp.
    fn default() -> Self {
        FftSettings {
            range_window: Window::Hann,
            doppler_window: Window::Rectangular,
            azimuth_window: Window::Hann,
        }
    }
}

/// Power over range and azimuth after non-coherent integration over Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAzimuthMap {
    pub frame_index: usize,
    pub range_bins: usize,
    pub azimuth_bins: usize,
    /// Row-major `[range][azimuth]`, dB, floored at [`POWER_FLOOR_DB`].
    pub power_db: Vec<f64>,
    /// Range at each bin, m.
    pub range_axis: Vec<f64>,
    /// Azimuth at each bin, degrees. Bins beyond `|sin| = 1` are clamped to +/-90.
    pub azimuth_axis: Vec<f64>,
}

impl RangeAzimuthMap {
    #[inline]
    pub fn at(&self, range_bin: usize, azimuth_bin: usize) -> f64 {
        self.power_db[range_bin * self.azimuth_bins + azimuth_bin]
    }

    /// Linear power, the domain CFAR works in.
    pub fn linear(&self) -> Vec<f64> {
        self.power_db.iter().map(|db| 10f64.powf(db / 10.0)).collect()
    }

    /// Builds a map from linear power, applying the dB floor.
    pub fn from_linear(
        frame_index: usize,
        range_bins: usize,
        azimuth_bins: usize,
        linear: &[f64],
        range_axis: Vec<f64>,
        azimuth_axis: Vec<f64>,
    ) -> Self {
        assert_eq!(linear.len(), range_bins * azimuth_bins);
        RangeAzimuthMap {
            frame_index,
            range_bins,
            azimuth_bins,
            power_db: linear.iter().map(|&p| to_db(p)).collect(),
            range_axis,
            azimuth_axis,
        }
    }

    /// Location of the strongest cell, `(range_bin, azimuth_bin)`.
    pub fn argmax(&self) -> (usize, usize) {
        let i = argmax(&self.power_db);
        (i / self.azimuth_bins, i % self.azimuth_bins)
    }
}

pub fn to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(POWER_FLOOR_DB)
    } else {
        POWER_FLOOR_DB
    }
}

fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Slow-time samples of every range-azimuth cell of one frame, from which
/// Doppler power spectra are computed on demand.
///
/// Velocity bins are centered: bin `n/2` is zero velocity, lower bins are
/// negative (approaching) and higher bins positive (receding).
#[derive(Clone)]
pub struct DopplerCube {
    pub frame_index: usize,
    pub range_bins: usize,
    pub azimuth_bins: usize,
    pub doppler_bins: usize,
    pub velocity_resolution: f64,
    /// `[range][chirp][azimuth]`, windowed and scaled, azimuth not yet shifted.
    slow_time: Vec<Complex32>,
    fft: Arc<dyn Fft<f32>>,
}

impl std::fmt::Debug for DopplerCube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DopplerCube")
            .field("frame_index", &self.frame_index)
            .field("range_bins", &self.range_bins)
            .field("azimuth_bins", &self.azimuth_bins)
            .field("doppler_bins", &self.doppler_bins)
            .finish()
    }
}

impl DopplerCube {
    /// Doppler power spectrum of one cell, linear, centered on zero velocity.
    pub fn spectrum(&self, range_bin: usize, azimuth_bin: usize) -> Vec<f32> {
        let (n_c, n_az) = (self.doppler_bins, self.azimuth_bins);
        assert!(range_bin < self.range_bins && azimuth_bin < n_az, "cell outside cube");
        let az = (azimuth_bin + n_az - n_az / 2) % n_az;
        let mut col: Vec<Complex32> = (0..n_c)
            .map(|k| self.slow_time[(range_bin * n_c + k) * n_az + az])
            .collect();
        self.fft.process(&mut col);
        let mut out = vec![0f32; n_c];
        for (d, z) in col.iter().enumerate() {
            out[(d + n_c / 2) % n_c] = z.norm_sqr();
        }
        out
    }

    pub fn zero_bin(&self) -> usize {
        self.doppler_bins / 2
    }

    /// Velocity of a Doppler bin, m/s.
    pub fn velocity(&self, bin: usize) -> f64 {
        (bin as f64 - self.zero_bin() as f64) * self.velocity_resolution
    }

    pub fn velocity_axis(&self) -> Vec<f64> {
        (0..self.doppler_bins).map(|b| self.velocity(b)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FrameSpectra {
    pub map: RangeAzimuthMap,
    pub doppler: DopplerCube,
}

/// Reusable FFT plans and windows for one radar configuration.
pub struct Processor {
    config: RadarConfig,
    resolutions: Resolutions,
    settings: FftSettings,
    n_az: usize,
    range_fft: Arc<dyn Fft<f32>>,
    doppler_fft: Arc<dyn Fft<f32>>,
    azimuth_fft: Arc<dyn Fft<f32>>,
    range_window: Vec<f32>,
    doppler_window: Vec<f32>,
    azimuth_window: Vec<f32>,
}

impl std::fmt::Debug for Processor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Processor")
            .field("config", &self.config)
            .field("settings", &self.settings)
            .finish()
    }
}

impl Processor {
    pub fn new(config: &RadarConfig, settings: FftSettings) -> Result<Self> {
        config.validate()?;
        let resolutions = config.derived_resolutions()?;
        let mut planner = FftPlanner::<f32>::new();
        let n_az = config.azimuth_fft_size();
        Ok(Processor {
            config: config.clone(),
            resolutions,
            settings,
            n_az,
            range_fft: planner.plan_fft_forward(config.adc_samples_per_chirp),
            doppler_fft: planner.plan_fft_forward(config.chirps_per_frame),
            azimuth_fft: planner.plan_fft_forward(n_az),
            range_window: settings.range_window.coefficients(config.adc_samples_per_chirp),
            doppler_window: settings.doppler_window.coefficients(config.chirps_per_frame),
            azimuth_window: settings.azimuth_window.coefficients(config.virtual_antennas),
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn resolutions(&self) -> &Resolutions {
        &self.resolutions
    }

    pub fn range_axis(&self) -> Vec<f64> {
        (0..self.config.adc_samples_per_chirp)
            .map(|r| r as f64 * self.resolutions.range_resolution)
            .collect()
    }

    pub fn azimuth_axis(&self) -> Vec<f64> {
        azimuth_axis(self.n_az)
    }

    /// Windowed range FFT of every chirp, unnormalized, layout unchanged
    /// (`[chirp][antenna][range bin]`).
    pub fn range_fft(&self, frame: &IqFrame) -> Result<Vec<Complex32>> {
        frame.check_matches(&self.config)?;
        let n_s = self.config.adc_samples_per_chirp;
        let mut buf = frame.data.clone();
        for chunk in buf.chunks_exact_mut(n_s) {
            for (z, w) in chunk.iter_mut().zip(&self.range_window) {
                *z *= *w;
            }
        }
        self.range_fft.process(&mut buf);
        Ok(buf)
    }

    /// Range, Doppler and azimuth FFTs of one frame.
    ///
    /// The output is scaled by `1/sqrt(N_samples * N_chirps * N_azimuth_fft)`.
    pub fn process(&self, frame: &IqFrame) -> Result<FrameSpectra> {
        let ranged = self.range_fft(frame)?;
        let (n_c, n_a, n_s, n_az) = (
            self.config.chirps_per_frame,
            self.config.virtual_antennas,
            self.config.adc_samples_per_chirp,
            self.n_az,
        );
        let scale = 1.0 / ((n_s * n_c * n_az) as f32).sqrt();

        // [range][chirp][azimuth], zero-padded along azimuth.
        let mut cube = vec![Complex32::new(0.0, 0.0); n_s * n_c * n_az];
        for k in 0..n_c {
            for a in 0..n_a {
                let src = &ranged[(k * n_a + a) * n_s..(k * n_a + a + 1) * n_s];
                let w = self.azimuth_window[a] * self.doppler_window[k] * scale;
                for (r, z) in src.iter().enumerate() {
                    cube[(r * n_c + k) * n_az + a] = z * w;
                }
            }
        }
        drop(ranged);
        self.azimuth_fft.process(&mut cube);

        // Parseval: summing Doppler power equals N_chirps times slow-time energy.
        let mut ra = vec![0f64; n_s * n_az];
        for r in 0..n_s {
            let out = &mut ra[r * n_az..(r + 1) * n_az];
            for k in 0..n_c {
                let row = &cube[(r * n_c + k) * n_az..(r * n_c + k + 1) * n_az];
                for (az, z) in row.iter().enumerate() {
                    out[(az + n_az / 2) % n_az] += f64::from(z.norm_sqr());
                }
            }
            for p in out.iter_mut() {
                *p *= n_c as f64;
            }
        }

        Ok(FrameSpectra {
            map: RangeAzimuthMap::from_linear(
                frame.index,
                n_s,
                n_az,
                &ra,
                self.range_axis(),
                self.azimuth_axis(),
            ),
            doppler: DopplerCube {
                frame_index: frame.index,
                range_bins: n_s,
                azimuth_bins: n_az,
                doppler_bins: n_c,
                velocity_resolution: self.resolutions.velocity_resolution,
                slow_time: cube,
                fft: Arc::clone(&self.doppler_fft),
            },
        })
    }
}

/// Azimuth in degrees of each centered bin of an `n`-point spatial FFT over
/// a half-wavelength array.
pub fn azimuth_axis(n: usize) -> Vec<f64> {
    (0..n)
        .map(|b| {
            let u = 2.0 * (b as f64 - (n / 2) as f64) / n as f64;
            u.clamp(-1.0, 1.0).asin().to_degrees()
        })
        .collect()
}

/// Convenience wrapper around [`Processor::process`] with default settings.
pub fn range_doppler_azimuth_fft(config: &RadarConfig, frame: &IqFrame) -> Result<FrameSpectra> {
    Processor::new(config, FftSettings::default())?.process(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn small() -> RadarConfig {
        RadarConfig {
            chirps_per_frame: 16,
            adc_samples_per_chirp: 64,
            virtual_antennas: 12,
            frame_count: 1,
            ..RadarConfig::full()
        }
    }

    #[test]
    fn zero_frame_gives_floor_map() {
        let cfg = small();
        let out = range_doppler_azimuth_fft(&cfg, &IqFrame::zeros(&cfg, 0)).unwrap();
        assert!(out.map.power_db.iter().all(|&p| p == POWER_FLOOR_DB));
        assert!(out.doppler.spectrum(3, 5).iter().all(|&p| p == 0.0));
        assert_eq!(out.map.range_bins, 64);
        assert_eq!(out.map.azimuth_bins, 16);
    }

    #[test]
    fn dimension_mismatch_is_structural_error() {
        let cfg = small();
        let mut frame = IqFrame::zeros(&cfg, 0);
        frame.data.pop();
        assert!(matches!(
            range_doppler_azimuth_fft(&cfg, &frame),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn hann_is_symmetric_and_peaks_in_middle() {
        let w = Window::Hann.coefficients(9);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-7);
        for i in 0..9 {
            assert!((w[i] - w[8 - i]).abs() < 1e-7);
        }
    }

    #[test]
    fn azimuth_axis_is_centered() {
        let ax = azimuth_axis(16);
        assert_eq!(ax[8], 0.0);
        assert!((ax[0] + 90.0).abs() < 1e-12);
        assert!(ax.windows(2).all(|w| w[1] > w[0]));
    }
}
