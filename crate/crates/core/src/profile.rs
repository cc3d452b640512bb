//! Spatial breathing profiles: stacked, normalized source mixing vectors.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::breathing::BreathingSource;
use crate::error::{Error, Result};
use crate::micro_motion::RadarPoint;
use crate::rng;

/// `components x spatial bins`, each row unit-norm.
///
/// Columns are radar points in `(range_bin, azimuth_bin)` order. Each row
/// is sign-normalized so its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialBreathingProfile {
    pub columns: Vec<(usize, usize)>,
    pub rows: Vec<Vec<f64>>,
}

impl SpatialBreathingProfile {
    pub fn empty(columns: Vec<(usize, usize)>) -> Self {
        SpatialBreathingProfile {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self
            .columns
            .iter()
            .map(|(r, a)| format!("point:{r}:{a}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for row in &self.rows {
            let line = row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let ctx = "profile csv";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Err(Error::parse(ctx, "missing header line"));
        };
        let mut columns = Vec::new();
        for (c, field) in header.split(',').enumerate() {
            let parts: Vec<&str> = field.trim().split(':').collect();
            let parsed = match parts.as_slice() {
                ["point", r, a] => r.parse::<usize>().ok().zip(a.parse::<usize>().ok()),
                _ => None,
            };
            let key = parsed.ok_or_else(|| {
                Error::parse(ctx, format!("column {}: expected point:<range_bin>:<azimuth_bin>, got '{field}'", c + 1))
            })?;
            columns.push(key);
        }
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let row: Vec<f64> = line
                .split(',')
                .enumerate()
                .map(|(c, v)| {
                    v.trim().parse::<f64>().map_err(|e| {
                        Error::parse(ctx, format!("line {}, column {}: {e}", ln + 1, c + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(Error::parse(
                    ctx,
                    format!("line {}: {} values for {} columns", ln + 1, row.len(), columns.len()),
                ));
            }
            rows.push(row);
        }
        Ok(SpatialBreathingProfile { columns, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
            _ => Error::Io(e),
        })?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Flips the sign so the largest-magnitude entry is positive, then scales
/// to unit L2 norm. Returns `None` for an all-zero vector.
pub fn normalize_row(w: &[f64]) -> Option<Vec<f64>> {
    let mut peak = 0.0f64;
    for &v in w {
        if v.abs() > peak.abs() {
            peak = v;
        }
    }
    if peak == 0.0 || !peak.is_finite() {
        return None;
    }
    // Dividing by the peak first removes any common scale before the norm.
    let unit: Vec<f64> = w.iter().map(|v| v / peak).collect();
    let norm = unit.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(unit.into_iter().map(|v| v / norm).collect())
}

pub fn build_profile(sources: &[BreathingSource], points: &[RadarPoint]) -> Result<SpatialBreathingProfile> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i].key());
    let columns: Vec<(usize, usize)> = order.iter().map(|&i| points[i].key()).collect();
    let mut rows = Vec::with_capacity(sources.len());
    for (s, src) in sources.iter().enumerate() {
        let w = &src.source.mixing_weights;
        if w.len() != points.len() {
            return Err(Error::Dimension(format!(
                "source {s} has {} weights for {} points",
                w.len(),
                points.len()
            )));
        }
        let ordered: Vec<f64> = order.iter().map(|&i| w[i]).collect();
        match normalize_row(&ordered) {
            Some(row) => rows.push(row),
            None => log::debug!("source {s} has an all-zero spatial mapping; skipped"),
        }
    }
    Ok(SpatialBreathingProfile { columns, rows })
}

/// Uniformly random row permutation drawn from the `augment` substream.
pub fn augment_permutation(rows: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(&mut rng::substream(seed, "augment", 0));
    perm
}

/// Row-shuffled copy of a profile; the multiset of rows is unchanged.
pub fn augment_profile(p: &SpatialBreathingProfile, seed: u64) -> SpatialBreathingProfile {
    let perm = augment_permutation(p.n_rows(), seed);
    SpatialBreathingProfile {
        columns: p.columns.clone(),
        rows: perm.iter().map(|&i| p.rows[i].clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breathing::MicroSource;

    fn bsrc(w: Vec<f64>) -> BreathingSource {
        BreathingSource {
            source: MicroSource {
                signal: vec![0.0; 8],
                mixing_weights: w,
                ica_iteration: 1,
            },
            mean_frequency: 0.25,
            quality: 0.5,
            spectrum: vec![],
        }
    }

    fn pt(r: usize, a: usize) -> RadarPoint {
        RadarPoint {
            range_bin: r,
            azimuth_bin: a,
            range: 0.0,
            azimuth: 0.0,
            power: 0.0,
        }
    }

    #[test]
    fn rows_are_unit_and_sign_fixed() {
        let pts = vec![pt(3, 1), pt(1, 5), pt(1, 2)];
        let p = build_profile(&[bsrc(vec![1.0, -4.0, 2.0])], &pts).unwrap();
        assert_eq!(p.columns, vec![(1, 2), (1, 5), (3, 1)]);
        let r = &p.rows[0];
        let norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        // -4 is the peak and becomes positive; columns are reordered.
        assert!(r[1] > 0.0 && r[0] < 0.0 && r[2] < 0.0);
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        assert!(matches!(
            build_profile(&[bsrc(vec![1.0])], &[pt(0, 0), pt(0, 1)]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn identical_sources_give_identical_rows() {
        let pts = vec![pt(0, 0), pt(0, 1), pt(2, 2)];
        let p = build_profile(&[bsrc(vec![0.3, 0.1, -0.2]), bsrc(vec![0.3, 0.1, -0.2])], &pts).unwrap();
        assert_eq!(p.rows[0], p.rows[1]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let p = SpatialBreathingProfile {
            columns: vec![(1, 2), (3, 4)],
            rows: vec![vec![0.6, 0.8], vec![1.0, -0.0]],
        };
        let back = SpatialBreathingProfile::from_csv(&p.to_csv()).unwrap();
        assert_eq!(back, p);
        assert!(SpatialBreathingProfile::from_csv("pt:1:2\n1\n").is_err());
        assert!(SpatialBreathingProfile::from_csv("point:1:2\n1,2\n").is_err());
        let empty = SpatialBreathingProfile::from_csv("point:1:2,point:1:3\n").unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn augmentation_of_single_row_is_identity() {
        let p = SpatialBreathingProfile {
            columns: vec![(0, 0), (0, 1)],
            rows: vec![vec![0.6, 0.8]],
        };
        assert_eq!(augment_profile(&p, 42), p);
    }
}
