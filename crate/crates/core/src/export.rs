//! Text and image exports of intermediate pipeline products.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::breathing::BreathingSource;
use crate::dsp::{Detection, RangeAzimuthMap};
use crate::micro_motion::{MicroMotionMatrix, RadarPoint};

/// `frame,range_bin,azimuth_bin,range_m,azimuth_deg,power_db`, one line per
/// detection of every frame.
pub fn point_cloud_csv(detections: &[Vec<Detection>], map: &RangeAzimuthMap) -> String {
    let mut s = String::from("frame,range_bin,azimuth_bin,range_m,azimuth_deg,power_db\n");
    for (j, dets) in detections.iter().enumerate() {
        for d in dets {
            let _ = writeln!(
                s,
                "{j},{},{},{:.6},{:.6},{:.4}",
                d.range_bin, d.azimuth_bin, map.range_axis[d.range_bin], map.azimuth_axis[d.azimuth_bin], d.power
            );
        }
    }
    s
}

/// `range_bin,azimuth_bin,frame_0,...`: one row per point, displacements in m.
pub fn micro_motion_csv(m: &MicroMotionMatrix) -> String {
    let mut s = String::from("range_bin,azimuth_bin");
    for j in 0..m.frames() {
        let _ = write!(s, ",frame_{j}");
    }
    s.push('\n');
    for (i, p) in m.points.iter().enumerate() {
        let _ = write!(s, "{},{}", p.range_bin, p.azimuth_bin);
        for j in 0..m.frames() {
            let _ = write!(s, ",{:e}", m.displacement[(i, j)]);
        }
        s.push('\n');
    }
    s
}

/// Long-format map: `range_bin,azimuth_bin,range_m,azimuth_deg,power_db`.
pub fn range_azimuth_csv(map: &RangeAzimuthMap) -> String {
    let mut s = String::from("range_bin,azimuth_bin,range_m,azimuth_deg,power_db\n");
    for r in 0..map.range_bins {
        for a in 0..map.azimuth_bins {
            let _ = writeln!(
                s,
                "{r},{a},{:.6},{:.6},{:.4}",
                map.range_axis[r],
                map.azimuth_axis[a],
                map.at(r, a)
            );
        }
    }
    s
}

/// Binary 16-bit PGM: one row per range bin, one column per azimuth bin,
/// dB values scaled linearly from the map minimum (0) to maximum (65535).
pub fn range_azimuth_pgm(map: &RangeAzimuthMap) -> Vec<u8> {
    let lo = map.power_db.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.power_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n65535\n", map.azimuth_bins, map.range_bins).into_bytes();
    out.reserve(map.power_db.len() * 2);
    for &db in &map.power_db {
        let v = (((db - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Point identifier used in exports.
pub fn point_id(p: &RadarPoint) -> String {
    format!("point:{}:{}", p.range_bin, p.azimuth_bin)
}

/// `frame,time_s,source_0,...`: breathing source time series.
pub fn sources_csv(sources: &[BreathingSource], frame_period: f64) -> String {
    let frames = sources.first().map_or(0, |s| s.source.signal.len());
    let mut s = String::from("frame,time_s");
    for i in 0..sources.len() {
        let _ = write!(s, ",source_{i}");
    }
    s.push('\n');
    for j in 0..frames {
        let _ = write!(s, "{j},{:.6}", j as f64 * frame_period);
        for src in sources {
            let _ = write!(s, ",{:e}", src.source.signal[j]);
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct SourceMeta {
    id: String,
    mean_frequency_hz: f64,
    quality: f64,
    ica_iteration: usize,
    mixing_weights: BTreeMap<String, f64>,
}

/// JSON sidecar for [`sources_csv`]: statistics and mixing weights keyed by
/// point id.
pub fn sources_json(sources: &[BreathingSource], points: &[RadarPoint]) -> String {
    let meta: Vec<SourceMeta> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| SourceMeta {
            id: format!("source_{i}"),
            mean_frequency_hz: s.mean_frequency,
            quality: s.quality,
            ica_iteration: s.source.ica_iteration,
            mixing_weights: points
                .iter()
                .zip(&s.source.mixing_weights)
                .map(|(p, &w)| (point_id(p), w))
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&meta).expect("source metadata serializes")
}
