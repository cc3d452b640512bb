//! Randomized multi-person scenes for evaluation and training data.
//!
//! People stand in up to three rows facing the radar. Rows are at least
//! `min_row_gap` apart in depth, neighbours in a row at least
//! `min_lateral_gap` apart, and the whole group fits in roughly 3 m^2.
//! Breathing rates are distinct per person.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::sim::{Person, Scene};

/// Group sizes the counting classes cover.
pub const CLASSES: [usize; 4] = [2, 3, 5, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    /// Downrange position of the front row, m.
    pub front_x: (f64, f64),
    /// Depth gap between rows, m.
    pub row_gap: (f64, f64),
    /// Lateral gap between neighbours in a row, m.
    pub lateral_gap: (f64, f64),
    pub breathing_hz: (f64, f64),
    /// Minimum difference between any two breathing rates, Hz.
    pub min_rate_spacing: f64,
    pub breathing_amplitude: (f64, f64),
    pub sway_amplitude: (f64, f64),
    pub sway_hz: (f64, f64),
    /// Per-sample SNR of the weakest person, dB.
    pub snr_db: (f64, f64),
    /// Depth jitter of each person around its row, m.
    pub depth_jitter: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            front_x: (2.2, 2.6),
            row_gap: (0.9, 1.0),
            lateral_gap: (0.15, 0.45),
            breathing_hz: (0.2, 0.5),
            min_rate_spacing: 0.04,
            breathing_amplitude: (0.009, 0.013),
            sway_amplitude: (0.0, 0.01),
            sway_hz: (0.02, 0.08),
            snr_db: (10.0, 20.0),
            depth_jitter: 0.05,
        }
    }
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Distinct rates with at least `spacing` between any two.
fn breathing_rates(rng: &mut Rng, n: usize, range: (f64, f64), spacing: f64) -> Vec<f64> {
    let slots = ((range.1 - range.0) / spacing).floor() as usize + 1;
    assert!(slots >= n, "breathing band too narrow for {n} distinct rates");
    let mut idx: Vec<usize> = (0..slots).collect();
    idx.shuffle(rng);
    let jitter = spacing * 0.2;
    idx.into_iter()
        .take(n)
        .map(|i| {
            let f = range.0 + i as f64 * spacing + rng.gen_range(-jitter..jitter);
            f.clamp(range.0, range.1)
        })
        .collect()
}

/// Splits `n` people into rows (front row first).
fn row_sizes(rng: &mut Rng, n: usize) -> Vec<usize> {
    let max_rows = n.min(3);
    let rows = match n {
        0 | 1 => 1,
        2 | 3 => rng.gen_range(1..=max_rows),
        _ => rng.gen_range(2..=max_rows),
    };
    let mut sizes = vec![n / rows; rows];
    for s in sizes.iter_mut().take(n % rows) {
        *s += 1;
    }
    sizes.shuffle(rng);
    sizes
}

/// One random scene with `n` people.
pub fn generate_scene(n: usize, seed: u64, params: &SuiteParams) -> Scene {
    let mut rng = rng::substream(seed, "suite-scene", n as u64);
    let rates = breathing_rates(&mut rng, n, params.breathing_hz, params.min_rate_spacing);
    let front = uniform(&mut rng, params.front_x);
    let mut persons = Vec::with_capacity(n);
    let mut row_x = front;
    for size in row_sizes(&mut rng, n) {
        let gaps: Vec<f64> = (1..size).map(|_| uniform(&mut rng, params.lateral_gap)).collect();
        let width: f64 = gaps.iter().sum();
        let mut y = -width / 2.0 + rng.gen_range(-0.1..0.1);
        for k in 0..size {
            if k > 0 {
                y += gaps[k - 1];
            }
            let x = row_x + rng.gen_range(-params.depth_jitter..=params.depth_jitter);
            persons.push(Person {
                x,
                y,
                breathing_hz: rates[persons.len()],
                breathing_amplitude: uniform(&mut rng, params.breathing_amplitude),
                sway_amplitude: uniform(&mut rng, params.sway_amplitude),
                sway_hz: uniform(&mut rng, params.sway_hz),
                rcs: rng.gen_range(0.7..1.3),
                facing: 0.0,
                breathing_phase: rng.gen_range(0.0..std::f64::consts::TAU),
                sway_phase: rng.gen_range(0.0..std::f64::consts::TAU),
            });
        }
        row_x += uniform(&mut rng, params.row_gap);
    }
    let weakest_db = persons
        .iter()
        .map(|p| 10.0 * (p.rcs / p.range().powi(4)).log10())
        .fold(f64::INFINITY, f64::min);
    let snr = uniform(&mut rng, params.snr_db);
    Scene {
        persons,
        noise_floor_db: if n == 0 { None } else { Some(weakest_db - snr) },
        multipath: None,
        static_reflectors: Vec::new(),
        seed,
    }
}

/// `per_class` scenes for each class size, labels alongside.
pub fn class_suite(per_class: usize, seed: u64, params: &SuiteParams) -> Vec<(Scene, usize)> {
    let mut out = Vec::with_capacity(per_class * CLASSES.len());
    for (c, &n) in CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let scene_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add((c * 10_000 + i) as u64);
            out.push((generate_scene(n, scene_seed, params), n));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_respect_spacing_rules() {
        let params = SuiteParams::default();
        for (scene, n) in class_suite(5, 9, &params) {
            assert_eq!(scene.persons.len(), n);
            let ps = &scene.persons;
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&ps[i], &ps[j]);
                    let side = (a.y - b.y).abs() >= params.lateral_gap.0 - 1e-12;
                    let depth = (a.x - b.x).abs() >= params.row_gap.0 - 2.0 * params.depth_jitter - 1e-12;
                    assert!(side || depth, "persons {i} and {j} too close");
                    assert!((a.breathing_hz - b.breathing_hz).abs() > 0.0);
                }
            }
            let xs: Vec<f64> = ps.iter().map(|p| p.x).collect();
            let ys: Vec<f64> = ps.iter().map(|p| p.y).collect();
            let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            assert!(span(&xs) * span(&ys) <= 3.2, "area {}", span(&xs) * span(&ys));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SuiteParams::default();
        assert_eq!(generate_scene(5, 3, &p), generate_scene(5, 3, &p));
        assert_ne!(generate_scene(5, 3, &p), generate_scene(5, 4, &p));
    }
}
