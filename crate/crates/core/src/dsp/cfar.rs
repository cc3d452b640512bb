//! Two-dimensional cell-averaging CFAR over range-azimuth maps.
//!
//! The training region of a cell is the rectangle of half-size
//! `guard + training` around it minus the guard rectangle of half-size
//! `guard`, both clipped to the map. Near the edges the training window is
//! therefore one-sided. Training sums come from a summed-area table, so the
//! detector costs O(1) per cell.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::RangeAzimuthMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfarThreshold {
    /// Desired probability of false alarm under exponentially distributed
    /// noise; the scale is `N * (pfa^(-1/N) - 1)` for `N` training cells.
    FalseAlarmRate(f64),
    /// Fixed multiplier on the training mean.
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    /// Guard cells per side, `[range, azimuth]`.
    pub guard: [usize; 2],
    /// Training cells per side, `[range, azimuth]`.
    pub training: [usize; 2],
    pub threshold: CfarThreshold,
}

impl Default for CfarParams {
    fn default() -> Self {
        CfarParams {
            guard: [2, 2],
            training: [8, 8],
            threshold: CfarThreshold::FalseAlarmRate(1e-3),
        }
    }
}

impl CfarParams {
    pub fn new(guard: usize, training: usize, threshold: CfarThreshold) -> Self {
        CfarParams {
            guard: [guard, guard],
            training: [training, training],
            threshold,
        }
    }

    /// Full window extent along each axis.
    pub fn window(&self) -> [usize; 2] {
        [
            2 * (self.guard[0] + self.training[0]) + 1,
            2 * (self.guard[1] + self.training[1]) + 1,
        ]
    }

    /// Shrinks the window along any axis where it would not fit a map of
    /// the given size, keeping at least one training cell.
    pub fn fitted(mut self, range_bins: usize, azimuth_bins: usize) -> Self {
        for (axis, dim) in [range_bins, azimuth_bins].into_iter().enumerate() {
            let max_half = dim.saturating_sub(1) / 2;
            while self.guard[axis] + self.training[axis] > max_half {
                if self.training[axis] > 1 && self.training[axis] >= self.guard[axis] {
                    self.training[axis] -= 1;
                } else if self.guard[axis] > 0 {
                    self.guard[axis] -= 1;
                } else {
                    break;
                }
            }
        }
        self
    }

    pub fn validate(&self, range_bins: usize, azimuth_bins: usize) -> Result<()> {
        if self.training[0] == 0 || self.training[1] == 0 {
            return Err(Error::Config("CFAR needs at least one training cell per side".into()));
        }
        let [wr, wa] = self.window();
        if wr > range_bins || wa > azimuth_bins {
            return Err(Error::Config(format!(
                "CFAR window {wr}x{wa} does not fit a {range_bins}x{azimuth_bins} map"
            )));
        }
        match self.threshold {
            CfarThreshold::FalseAlarmRate(p) if !(p > 0.0 && p < 1.0) => {
                Err(Error::Config(format!("false-alarm rate {p} outside (0, 1)")))
            }
            CfarThreshold::Scale(a) if !(a.is_finite() && a > 0.0) => {
                Err(Error::Config(format!("CFAR scale {a} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Threshold multiplier for a cell with `n` training cells.
    pub fn scale(&self, n: usize) -> f64 {
        match self.threshold {
            CfarThreshold::Scale(a) => a,
            CfarThreshold::FalseAlarmRate(p) => {
                let n = n as f64;
                n * (p.powf(-1.0 / n) - 1.0)
            }
        }
    }
}

/// One detected cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub azimuth_bin: usize,
    /// dB
    pub power: f64,
}

/// Runs CA-CFAR on a map, returning detections in row-major cell order.
pub fn ca_cfar(map: &RangeAzimuthMap, params: &CfarParams) -> Result<Vec<Detection>> {
    let linear = map.linear();
    let mask = ca_cfar_linear(&linear, map.range_bins, map.azimuth_bins, params)?;
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &hit)| hit)
        .map(|(i, _)| Detection {
            range_bin: i / map.azimuth_bins,
            azimuth_bin: i % map.azimuth_bins,
            power: map.power_db[i],
        })
        .collect())
}

/// CA-CFAR over a row-major linear power grid; returns the detection mask.
pub fn ca_cfar_linear(power: &[f64], rows: usize, cols: usize, params: &CfarParams) -> Result<Vec<bool>> {
    if power.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "power grid has {} cells, expected {rows}x{cols}",
            power.len()
        )));
    }
    params.validate(rows, cols)?;

    // sat[(i, j)] = sum of power[..i][..j], with a zero border row/column.
    let w = cols + 1;
    let mut sat = vec![0f64; (rows + 1) * w];
    for i in 0..rows {
        let mut row_sum = 0.0;
        for j in 0..cols {
            row_sum += power[i * cols + j];
            sat[(i + 1) * w + j + 1] = sat[i * w + j + 1] + row_sum;
        }
    }
    let rect = |r0: usize, r1: usize, c0: usize, c1: usize| -> f64 {
        // inclusive-exclusive [r0, r1) x [c0, c1)
        sat[r1 * w + c1] - sat[r0 * w + c1] - sat[r1 * w + c0] + sat[r0 * w + c0]
    };

    let [gr, ga] = params.guard;
    let [tr, ta] = params.training;
    let mut scales: HashMap<usize, f64> = HashMap::new();
    let mut mask = vec![false; rows * cols];
    for i in 0..rows {
        let (o_r0, o_r1) = (i.saturating_sub(gr + tr), (i + gr + tr + 1).min(rows));
        let (g_r0, g_r1) = (i.saturating_sub(gr), (i + gr + 1).min(rows));
        for j in 0..cols {
            let (o_c0, o_c1) = (j.saturating_sub(ga + ta), (j + ga + ta + 1).min(cols));
            let (g_c0, g_c1) = (j.saturating_sub(ga), (j + ga + 1).min(cols));
            let n = (o_r1 - o_r0) * (o_c1 - o_c0) - (g_r1 - g_r0) * (g_c1 - g_c0);
            let sum = rect(o_r0, o_r1, o_c0, o_c1) - rect(g_r0, g_r1, g_c0, g_c1);
            let alpha = *scales.entry(n).or_insert_with(|| params.scale(n));
            mask[i * cols + j] = power[i * cols + j] > alpha * (sum / n as f64);
        }
    }
    Ok(mask)
}
