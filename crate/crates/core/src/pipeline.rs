//! End-to-end processing: IQ frames to micro-motion, breathing sources,
//! spatial profile and count.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::breathing::{filter_breathing, iterative_ica, BreathingBand, BreathingSource, RunOutcome};
use crate::classifier::AttentionClassifier;
use crate::config::RadarConfig;
use crate::counting::{count_by_clustering, ClusteringParams, CountEstimate, CountMethod};
use crate::dsp::{ca_cfar, CfarParams, Detection, FftSettings, Processor, RangeAzimuthMap};
use crate::error::{Error, Result};
use crate::ica::FastIcaParams;
use crate::iq::IqFrame;
use crate::micro_motion::{remove_invalid_signals, MicroMotionBuilder, MicroMotionMatrix, MicroMotionParams, RadarPoint};
use crate::profile::{build_profile, SpatialBreathingProfile};
use crate::sim::{Scene, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    #[default]
    Clustering,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub fft: FftSettings,
    pub cfar: CfarParams,
    pub micro_motion: MicroMotionParams,
    /// Minimum fraction of non-zero displacements for a valid point (m).
    pub min_nonzero_fraction: f64,
    pub band: BreathingBand,
    /// ICA runs with 1..=n components.
    pub ica_iterations: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub clustering: ClusteringParams,
    pub model_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fft: FftSettings::default(),
            cfar: CfarParams::default(),
            micro_motion: MicroMotionParams::default(),
            min_nonzero_fraction: 0.25,
            band: BreathingBand::default(),
            ica_iterations: 10,
            seed: 0,
            estimator: Estimator::Clustering,
            clustering: ClusteringParams::default(),
            model_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_nonzero_fraction) {
            return Err(Error::Config(format!(
                "minimum non-zero fraction {} outside [0, 1]",
                self.min_nonzero_fraction
            )));
        }
        if self.ica_iterations == 0 {
            return Err(Error::Config("ICA iterations must be at least 1".into()));
        }
        self.band.validate(radar.frame_rate)
    }
}

/// Output of the micro-motion extraction stage.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    /// CFAR detections of each frame.
    pub detections: Vec<Vec<Detection>>,
    /// Every point detected in at least one frame.
    pub points: Vec<RadarPoint>,
    /// Displacements of all points.
    pub raw: MicroMotionMatrix,
    /// Rows surviving the validity filter.
    pub valid: MicroMotionMatrix,
    /// Frame-averaged range-azimuth map.
    pub mean_map: RangeAzimuthMap,
}

/// Streams frames through the FFT, CFAR and micro-displacement stages.
pub fn process_frames<I>(radar: &RadarConfig, frames: I, cfg: &PipelineConfig) -> Result<ProcessOutput>
where
    I: IntoIterator<Item = Result<IqFrame>>,
{
    cfg.validate(radar)?;
    let processor = Processor::new(radar, cfg.fft)?;
    let n_az = radar.azimuth_fft_size();
    let n_r = radar.adc_samples_per_chirp;
    let cfar = cfg.cfar.fitted(n_r, n_az);
    let mut builder = MicroMotionBuilder::new(radar, cfg.micro_motion);
    let mut detections = Vec::with_capacity(radar.frame_count);
    let mut mean = vec![0f64; n_r * n_az];
    let mut seen = 0usize;
    for frame in frames {
        let frame = frame?;
        if frame.index != seen {
            return Err(Error::Dimension(format!(
                "expected frame {seen}, got frame {}",
                frame.index
            )));
        }
        let spectra = processor.process(&frame)?;
        let dets = ca_cfar(&spectra.map, &cfar)?;
        builder.add_frame(&spectra.map, &spectra.doppler, &dets)?;
        for (m, p) in mean.iter_mut().zip(spectra.map.linear()) {
            *m += p;
        }
        detections.push(dets);
        seen += 1;
    }
    if seen != radar.frame_count {
        return Err(Error::Corrupt(format!(
            "recording has {seen} frames, configuration declares {}",
            radar.frame_count
        )));
    }
    for m in &mut mean {
        *m /= seen as f64;
    }
    let points = builder.points();
    let raw = builder.finish();
    let valid = remove_invalid_signals(&raw, cfg.min_nonzero_fraction)?;
    Ok(ProcessOutput {
        detections,
        points,
        raw,
        valid,
        mean_map: RangeAzimuthMap::from_linear(
            usize::MAX,
            n_r,
            n_az,
            &mean,
            processor.range_axis(),
            processor.azimuth_axis(),
        ),
    })
}

/// Output of the separation and profile stages.
#[derive(Debug, Clone)]
pub struct SeparationOutput {
    pub runs: Vec<RunOutcome>,
    pub micro_sources: usize,
    pub breathing: Vec<BreathingSource>,
    pub profile: SpatialBreathingProfile,
}

/// Iterative ICA, breathing filter and profile construction.
pub fn separate(valid: &MicroMotionMatrix, frame_rate: f64, cfg: &PipelineConfig) -> Result<SeparationOutput> {
    let columns = {
        let mut keys: Vec<_> = valid.points.iter().map(RadarPoint::key).collect();
        keys.sort();
        keys
    };
    if valid.is_empty() {
        return Ok(SeparationOutput {
            runs: Vec::new(),
            micro_sources: 0,
            breathing: Vec::new(),
            profile: SpatialBreathingProfile::empty(columns),
        });
    }
    let runs = iterative_ica(valid, cfg.ica_iterations, cfg.seed, &FastIcaParams::default())?;
    let breathing = filter_breathing(&runs.sources, &cfg.band, frame_rate)?;
    let profile = build_profile(&breathing, &valid.points)?;
    Ok(SeparationOutput {
        runs: runs.runs,
        micro_sources: runs.sources.len(),
        breathing,
        profile,
    })
}

/// Counts people from a profile with the configured estimator.
pub fn count_profile(
    profile: &SpatialBreathingProfile,
    cfg: &PipelineConfig,
    model: Option<&AttentionClassifier>,
) -> Result<CountEstimate> {
    match cfg.estimator {
        Estimator::Clustering => count_by_clustering(profile, &cfg.clustering, cfg.seed),
        Estimator::Classifier => {
            if profile.is_empty() {
                return Ok(CountEstimate::nobody(CountMethod::AttentionClassifier));
            }
            let model = model.ok_or_else(|| {
                Error::ModelRequired(
                    "the classifier estimator needs a trained model (--model); use --estimator clustering otherwise".into(),
                )
            })?;
            model.count(profile, cfg.seed)
        }
    }
}

/// Everything produced for one scene.
#[derive(Debug, Clone)]
pub struct SceneResult {
    pub process: ProcessOutput,
    pub separation: SeparationOutput,
    pub estimate: CountEstimate,
}

/// Processes an already-opened frame stream all the way to a count.
pub fn run<I>(
    radar: &RadarConfig,
    frames: I,
    cfg: &PipelineConfig,
    model: Option<&AttentionClassifier>,
) -> Result<SceneResult>
where
    I: IntoIterator<Item = Result<IqFrame>>,
{
    if cfg.estimator == Estimator::Classifier && model.is_none() {
        return Err(Error::ModelRequired(
            "the classifier estimator needs a trained model (--model); use --estimator clustering otherwise".into(),
        ));
    }
    let process = process_frames(radar, frames, cfg)?;
    let separation = separate(&process.valid, radar.frame_rate, cfg)?;
    let estimate = count_profile(&separation.profile, cfg, model)?;
    Ok(SceneResult {
        process,
        separation,
        estimate,
    })
}

/// Simulates a scene and runs the pipeline on the streamed frames.
pub fn run_scene(
    radar: &RadarConfig,
    scene: &Scene,
    cfg: &PipelineConfig,
    model: Option<&AttentionClassifier>,
) -> Result<SceneResult> {
    let sim = Simulator::new(radar, scene)?;
    run(radar, sim.frames().map(Ok), cfg, model)
}
