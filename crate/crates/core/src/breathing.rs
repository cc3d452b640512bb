//! Iterative source separation and breathing-source selection.
//!
//! The number of sources in a scene is unknown, so ICA is run once for every
//! component count `i = 1..=n` and all components are pooled, giving at most
//! `n(n+1)/2` micro-sources. A source is kept as breathing when its
//! power-weighted mean frequency lies in `[low_hz, high_hz]` and its largest
//! spectral bin holds at least `min_quality` of the total power.

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{fast_ica, FastIcaParams};
use crate::micro_motion::MicroMotionMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroSource {
    /// Zero-mean, unit-variance time series, one value per frame.
    pub signal: Vec<f64>,
    /// Contribution of this source to each radar point (mixing column).
    pub mixing_weights: Vec<f64>,
    /// Component count of the ICA run that produced the source.
    pub ica_iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    /// Power-weighted mean frequency, Hz; `None` for an all-zero signal.
    pub mean_frequency: Option<f64>,
    /// Peak-bin power over total power.
    pub quality: f64,
    /// Bin frequencies, Hz, DC excluded.
    pub frequencies: Vec<f64>,
    /// Magnitude-squared DFT at `frequencies`.
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathingSource {
    #[serde(flatten)]
    pub source: MicroSource,
    pub mean_frequency: f64,
    pub quality: f64,
    pub spectrum: Vec<f64>,
}

/// Breathing band and minimum spectral quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingBand {
    pub low_hz: f64,
    pub high_hz: f64,
    pub min_quality: f64,
}

impl Default for BreathingBand {
    fn default() -> Self {
        BreathingBand {
            low_hz: 0.1,
            high_hz: 0.6,
            min_quality: 0.2,
        }
    }
}

impl BreathingBand {
    pub fn validate(&self, frame_rate: f64) -> Result<()> {
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < frame_rate / 2.0) {
            return Err(Error::Config(format!(
                "breathing band must satisfy 0 < low ({}) < high ({}) < frame_rate/2 ({})",
                self.low_hz,
                self.high_hz,
                frame_rate / 2.0
            )));
        }
        if !(0.0..1.0).contains(&self.min_quality) {
            return Err(Error::Config(format!(
                "breathing score {} outside [0, 1)",
                self.min_quality
            )));
        }
        Ok(())
    }

    pub fn accepts(&self, stats: &SpectrumStats) -> bool {
        match stats.mean_frequency {
            Some(f) => self.low_hz <= f && f <= self.high_hz && stats.quality >= self.min_quality,
            None => false,
        }
    }
}

pub fn spectrum_stats(signal: &[f64], frame_rate: f64) -> Result<SpectrumStats> {
    let n = signal.len();
    if n < 8 {
        return Err(Error::Dimension(format!(
            "spectrum needs at least 8 samples, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = 1..=n / 2;
    let frequencies: Vec<f64> = bins.clone().map(|i| i as f64 * frame_rate / n as f64).collect();
    let spectrum: Vec<f64> = bins.map(|i| buf[i].norm_sqr()).collect();
    let total: f64 = spectrum.iter().sum();
    if !(total > 0.0) {
        return Ok(SpectrumStats {
            mean_frequency: None,
            quality: 0.0,
            frequencies,
            spectrum,
        });
    }
    let mean = spectrum.iter().zip(&frequencies).map(|(p, f)| p * f).sum::<f64>() / total;
    let peak = spectrum.iter().copied().fold(0.0, f64::max);
    Ok(SpectrumStats {
        mean_frequency: Some(mean),
        quality: peak / total,
        frequencies,
        spectrum,
    })
}

/// Outcome of one ICA run inside [`iterative_ica`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome {
    Converged { components: usize, iterations: usize },
    Skipped { components: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct IcaRuns {
    pub sources: Vec<MicroSource>,
    pub runs: Vec<RunOutcome>,
}

/// Runs ICA with `1..=n` components on the displacement matrix, frames as
/// observations and points as mixtures.
///
/// Runs that cannot extract their component count (fewer points than
/// components, rank deficiency, no convergence) are skipped and logged.
pub fn iterative_ica(m: &MicroMotionMatrix, n: usize, seed: u64, params: &FastIcaParams) -> Result<IcaRuns> {
    if n == 0 {
        return Err(Error::Config("ICA iteration count must be at least 1".into()));
    }
    if m.is_empty() {
        return Err(Error::Dimension("micro-motion matrix has no rows".into()));
    }
    let x: &DMatrix<f64> = &m.displacement;
    let mut sources = Vec::new();
    let mut runs = Vec::with_capacity(n);
    for i in 1..=n {
        if i > m.rows() {
            runs.push(RunOutcome::Skipped {
                components: i,
                reason: format!("only {} points", m.rows()),
            });
            continue;
        }
        let mut rng = rng::substream(seed, "ica", i as u64);
        match fast_ica(x, i, params, &mut rng) {
            Ok(res) => {
                for c in 0..i {
                    sources.push(MicroSource {
                        signal: res.sources.row(c).iter().copied().collect(),
                        mixing_weights: res.mixing.column(c).iter().copied().collect(),
                        ica_iteration: i,
                    });
                }
                runs.push(RunOutcome::Converged {
                    components: i,
                    iterations: res.iterations,
                });
            }
            Err(e @ (Error::NotConverged { .. } | Error::RankDeficient { .. })) => {
                log::debug!("ICA run with {i} components skipped: {e}");
                runs.push(RunOutcome::Skipped {
                    components: i,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(IcaRuns { sources, runs })
}

/// Keeps the sources whose spectrum lies in the breathing band with enough
/// quality.
pub fn filter_breathing(sources: &[MicroSource], band: &BreathingBand, frame_rate: f64) -> Result<Vec<BreathingSource>> {
    band.validate(frame_rate)?;
    let mut out = Vec::new();
    for s in sources {
        let stats = spectrum_stats(&s.signal, frame_rate)?;
        if band.accepts(&stats) {
            out.push(BreathingSource {
                source: s.clone(),
                mean_frequency: stats.mean_frequency.expect("accepted sources have a mean frequency"),
                quality: stats.quality,
                spectrum: stats.spectrum,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn short_signal_rejected() {
        assert!(spectrum_stats(&[1.0; 7], 2.0).is_err());
    }

    #[test]
    fn zero_signal_has_no_mean_frequency() {
        let s = spectrum_stats(&[0.0; 60], 2.0).unwrap();
        assert_eq!(s.mean_frequency, None);
        assert_eq!(s.quality, 0.0);
        assert!(!BreathingBand::default().accepts(&s));
    }

    #[test]
    fn spectrum_excludes_dc() {
        let s = spectrum_stats(&[5.0; 16], 2.0).unwrap();
        assert_eq!(s.frequencies.len(), 8);
        assert!((s.frequencies[0] - 0.125).abs() < 1e-12);
        assert_eq!(s.mean_frequency, None);
    }

    #[test]
    fn band_validation() {
        assert!(BreathingBand { low_hz: 0.6, high_hz: 0.1, min_quality: 0.2 }.validate(2.0).is_err());
        assert!(BreathingBand { low_hz: 0.1, high_hz: 1.0, min_quality: 0.2 }.validate(2.0).is_err());
        assert!(BreathingBand { low_hz: 0.1, high_hz: 0.6, min_quality: 0.0 }.validate(2.0).is_ok());
    }

    #[test]
    fn filter_preserves_weights() {
        let src = MicroSource {
            signal: tone(0.3, 60, 2.0),
            mixing_weights: vec![0.1, -0.2, 0.3],
            ica_iteration: 2,
        };
        let out = filter_breathing(&[src.clone()], &BreathingBand::default(), 2.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].source, src);
    }
}
