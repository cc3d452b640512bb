//! Per-point micro-displacement series from peak Doppler velocities.
//!
//! For point `i` in frame `j` the displacement is `d_ij = v_ij * T_F`, where
//! `v_ij` is the velocity of the strongest non-zero Doppler bin. Which
//! duration plays the role of `T_F` is selected by [`DisplacementInterval`].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::dsp::{Detection, DopplerCube, RangeAzimuthMap};
use crate::error::{Error, Result};

/// The duration multiplied with the peak velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DisplacementInterval {
    /// Active chirping time of a frame (89 ms for the full preset).
    #[default]
    FrameTime,
    /// Frame repetition period (0.5 s for the full preset).
    FramePeriod,
}

impl DisplacementInterval {
    pub fn seconds(self, config: &RadarConfig) -> f64 {
        match self {
            DisplacementInterval::FrameTime => config.frame_time,
            DisplacementInterval::FramePeriod => config.frame_period(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroMotionParams {
    pub interval: DisplacementInterval,
    /// A frame counts as static when the zero-velocity bin exceeds the best
    /// moving bin by more than this many dB.
    pub zero_dominance_db: f64,
}

impl Default for MicroMotionParams {
    fn default() -> Self {
        MicroMotionParams {
            interval: DisplacementInterval::FrameTime,
            zero_dominance_db: 3.0,
        }
    }
}

/// A range-azimuth cell detected in at least one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub range_bin: usize,
    pub azimuth_bin: usize,
    /// m
    pub range: f64,
    /// degrees
    pub azimuth: f64,
    /// Strongest power over the frames where the cell was detected, dB.
    pub power: f64,
}

impl RadarPoint {
    pub fn key(&self) -> (usize, usize) {
        (self.range_bin, self.azimuth_bin)
    }

    pub fn from_detection(det: &Detection, map: &RangeAzimuthMap) -> Self {
        RadarPoint {
            range_bin: det.range_bin,
            azimuth_bin: det.azimuth_bin,
            range: map.range_axis[det.range_bin],
            azimuth: map.azimuth_axis[det.azimuth_bin],
            power: det.power,
        }
    }
}

/// Displacement series, one row per radar point, one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMotionMatrix {
    pub points: Vec<RadarPoint>,
    /// m, positive when moving away from the radar.
    pub displacement: DMatrix<f64>,
    /// Sampling interval of the series, s.
    pub frame_period: f64,
}

impl MicroMotionMatrix {
    pub fn new(points: Vec<RadarPoint>, displacement: DMatrix<f64>, frame_period: f64) -> Result<Self> {
        if points.len() != displacement.nrows() {
            return Err(Error::Dimension(format!(
                "{} points but {} displacement rows",
                points.len(),
                displacement.nrows()
            )));
        }
        if displacement.iter().any(|d| !d.is_finite()) {
            return Err(Error::Invariant("non-finite displacement".into()));
        }
        Ok(MicroMotionMatrix {
            points,
            displacement,
            frame_period,
        })
    }

    pub fn rows(&self) -> usize {
        self.displacement.nrows()
    }

    pub fn frames(&self) -> usize {
        self.displacement.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.displacement.row(i).iter().copied().collect()
    }
}

/// Signed velocity of the strongest non-zero Doppler bin, or zero when the
/// zero-velocity bin dominates by more than `zero_dominance_db`.
///
/// Equal-power bins on both sides of zero resolve to the positive one.
pub fn peak_doppler_velocity(spectrum: &[f32], velocity_resolution: f64, zero_dominance_db: f64) -> f64 {
    let zero = spectrum.len() / 2;
    let mut best: Option<(usize, f32)> = None;
    for (d, &p) in spectrum.iter().enumerate() {
        if d == zero {
            continue;
        }
        best = match best {
            None => Some((d, p)),
            Some((bd, bp)) if p > bp || (p == bp && d > zero && bd < zero) => Some((d, p)),
            keep => keep,
        };
    }
    let Some((d, p)) = best else { return 0.0 };
    if p <= 0.0 {
        return 0.0;
    }
    let p0 = f64::from(spectrum[zero]);
    if p0 > f64::from(p) * 10f64.powf(zero_dominance_db / 10.0) {
        return 0.0;
    }
    (d as f64 - zero as f64) * velocity_resolution
}

/// Accumulates per-frame detections and Doppler spectra into a
/// [`MicroMotionMatrix`] without holding more than one frame of spectra.
#[derive(Debug, Clone)]
pub struct MicroMotionBuilder {
    frames: usize,
    frame_period: f64,
    interval_s: f64,
    params: MicroMotionParams,
    cells: BTreeMap<(usize, usize), (RadarPoint, Vec<f64>)>,
}

impl MicroMotionBuilder {
    pub fn new(config: &RadarConfig, params: MicroMotionParams) -> Self {
        MicroMotionBuilder {
            frames: config.frame_count,
            frame_period: config.frame_period(),
            interval_s: params.interval.seconds(config),
            params,
            cells: BTreeMap::new(),
        }
    }

    /// Records the displacement of every cell detected in this frame.
    pub fn add_frame(&mut self, map: &RangeAzimuthMap, doppler: &DopplerCube, detections: &[Detection]) -> Result<()> {
        let j = doppler.frame_index;
        if j >= self.frames {
            return Err(Error::Dimension(format!(
                "frame index {j} beyond recording length {}",
                self.frames
            )));
        }
        for det in detections {
            let v = peak_doppler_velocity(
                &doppler.spectrum(det.range_bin, det.azimuth_bin),
                doppler.velocity_resolution,
                self.params.zero_dominance_db,
            );
            let frames = self.frames;
            let entry = self
                .cells
                .entry((det.range_bin, det.azimuth_bin))
                .or_insert_with(|| (RadarPoint::from_detection(det, map), vec![0.0; frames]));
            entry.0.power = entry.0.power.max(det.power);
            entry.1[j] = v * self.interval_s;
        }
        Ok(())
    }

    /// Every point detected at least once, in `(range_bin, azimuth_bin)` order.
    pub fn points(&self) -> Vec<RadarPoint> {
        self.cells.values().map(|(p, _)| *p).collect()
    }

    pub fn finish(self) -> MicroMotionMatrix {
        let n = self.cells.len();
        let mut m = DMatrix::zeros(n, self.frames);
        let mut points = Vec::with_capacity(n);
        for (i, (p, row)) in self.cells.into_values().enumerate() {
            points.push(p);
            for (j, d) in row.into_iter().enumerate() {
                m[(i, j)] = d;
            }
        }
        MicroMotionMatrix {
            points,
            displacement: m,
            frame_period: self.frame_period,
        }
    }
}

/// Displacement of the given points in every supplied frame, treating each
/// point as detected in all of them.
pub fn estimate_micro_displacement(
    config: &RadarConfig,
    doppler: &[DopplerCube],
    points: &[RadarPoint],
    params: MicroMotionParams,
) -> Result<MicroMotionMatrix> {
    let t_f = params.interval.seconds(config);
    let mut m = DMatrix::zeros(points.len(), doppler.len());
    for (j, cube) in doppler.iter().enumerate() {
        for (i, p) in points.iter().enumerate() {
            if p.range_bin >= cube.range_bins || p.azimuth_bin >= cube.azimuth_bins {
                return Err(Error::Dimension(format!(
                    "point ({}, {}) outside the {}x{} Doppler cube",
                    p.range_bin, p.azimuth_bin, cube.range_bins, cube.azimuth_bins
                )));
            }
            let v = peak_doppler_velocity(
                &cube.spectrum(p.range_bin, p.azimuth_bin),
                cube.velocity_resolution,
                params.zero_dominance_db,
            );
            m[(i, j)] = v * t_f;
        }
    }
    MicroMotionMatrix::new(points.to_vec(), m, config.frame_period())
}

/// True when a series has enough non-zero entries and both signs.
pub fn is_valid_signal(row: &[f64], min_nonzero_fraction: f64) -> bool {
    if row.is_empty() {
        return false;
    }
    let nonzero = row.iter().filter(|&&d| d != 0.0).count();
    let has_pos = row.iter().any(|&d| d > 0.0);
    let has_neg = row.iter().any(|&d| d < 0.0);
    nonzero as f64 / row.len() as f64 >= min_nonzero_fraction && has_pos && has_neg
}

/// Drops rows that are too sparse or never change sign.
pub fn remove_invalid_signals(m: &MicroMotionMatrix, min_nonzero_fraction: f64) -> Result<MicroMotionMatrix> {
    if !(0.0..=1.0).contains(&min_nonzero_fraction) {
        return Err(Error::Config(format!(
            "minimum non-zero fraction {min_nonzero_fraction} outside [0, 1]"
        )));
    }
    let keep: Vec<usize> = (0..m.rows())
        .filter(|&i| is_valid_signal(&m.row(i), min_nonzero_fraction))
        .collect();
    Ok(MicroMotionMatrix {
        points: keep.iter().map(|&i| m.points[i]).collect(),
        displacement: m.displacement.select_rows(keep.iter()),
        frame_period: m.frame_period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_with(nonzero: &[(usize, f64)], len: usize) -> Vec<f64> {
        let mut r = vec![0.0; len];
        for &(i, v) in nonzero {
            r[i] = v;
        }
        r
    }

    fn point(i: usize) -> RadarPoint {
        RadarPoint {
            range_bin: i,
            azimuth_bin: 0,
            range: 0.0,
            azimuth: 0.0,
            power: 0.0,
        }
    }

    #[test]
    fn validity_rule_examples() {
        let twenty_mixed: Vec<(usize, f64)> = (0..20).map(|i| (i * 3, if i % 2 == 0 { 1e-3 } else { -1e-3 })).collect();
        assert!(is_valid_signal(&row_with(&twenty_mixed, 60), 0.25));
        let all_pos: Vec<(usize, f64)> = (0..60).map(|i| (i, 1e-3)).collect();
        assert!(!is_valid_signal(&row_with(&all_pos, 60), 0.25));
        let ten_mixed: Vec<(usize, f64)> = (0..10).map(|i| (i * 6, if i % 2 == 0 { 1e-3 } else { -1e-3 })).collect();
        assert!(!is_valid_signal(&row_with(&ten_mixed, 60), 0.25));
    }

    #[test]
    fn remove_invalid_keeps_points_aligned() {
        let rows = [
            row_with(&[(0, 1.0), (1, -1.0)], 4),
            row_with(&[(0, 1.0), (1, 1.0)], 4),
            row_with(&[(2, -2.0), (3, 2.0), (1, 1.0)], 4),
        ];
        let m = DMatrix::from_fn(3, 4, |i, j| rows[i][j]);
        let mm = MicroMotionMatrix::new((0..3).map(point).collect(), m, 0.5).unwrap();
        let out = remove_invalid_signals(&mm, 0.5).unwrap();
        assert_eq!(out.rows(), 2);
        assert_eq!(out.points[0].range_bin, 0);
        assert_eq!(out.points[1].range_bin, 2);
        assert_eq!(out.row(1), rows[2]);
        assert!(remove_invalid_signals(&mm, 1.5).is_err());
    }

    #[test]
    fn empty_result_is_legal() {
        let m = DMatrix::zeros(2, 10);
        let mm = MicroMotionMatrix::new(vec![point(0), point(1)], m, 0.5).unwrap();
        assert!(remove_invalid_signals(&mm, 0.25).unwrap().is_empty());
    }

    #[test]
    fn one_bin_displacement() {
        // One velocity bin (21.2 mm/s) over the 89 ms frame time.
        let d: f64 = 0.0212 * 0.089;
        assert!((d - 1.8868e-3).abs() < 1e-7);
        let mut spec = vec![0f32; 8];
        spec[5] = 1.0;
        assert!((peak_doppler_velocity(&spec, 0.0212, 3.0) * 0.089 - 1.8868e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_dominance_and_ties() {
        let mut spec = vec![0f32; 8];
        spec[4] = 2.1;
        spec[5] = 1.0;
        assert_eq!(peak_doppler_velocity(&spec, 1.0, 3.0), 0.0);
        spec[4] = 1.9;
        assert_eq!(peak_doppler_velocity(&spec, 1.0, 3.0), 1.0);
        spec[3] = 1.0;
        assert_eq!(peak_doppler_velocity(&spec, 1.0, 3.0), 1.0);
        spec[2] = 1.5;
        assert_eq!(peak_doppler_velocity(&spec, 1.0, 3.0), -2.0);
        assert_eq!(peak_doppler_velocity(&[0.0; 8], 1.0, 3.0), 0.0);
    }
}
