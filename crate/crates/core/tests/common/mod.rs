//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex32;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmcounter::breathing::{filter_breathing, spectrum_stats, BreathingBand, MicroSource};
use mmcounter::dsp::{ca_cfar_linear, CfarParams, CfarThreshold, FftSettings, Processor, Window};
use mmcounter::ica::{fast_ica, FastIcaParams};
use mmcounter::iq::IqFrame;
use mmcounter::rng::substream;
use mmcounter::sim::{Person, Scene, Simulator};
use mmcounter::RadarConfig;

pub const FRAMES: usize = 60;
pub const RATE: f64 = 2.0;

/// Independent single-target beat signal: range, Doppler and azimuth are
/// pure phase ramps over samples, chirps and antennas.
pub fn point_target(cfg: &RadarConfig, range_bins: f64, doppler_cycles: f64, sin_az: f64) -> IqFrame {
    let mut frame = IqFrame::zeros(cfg, 0);
    let n_s = cfg.adc_samples_per_chirp;
    for k in 0..cfg.chirps_per_frame {
        for a in 0..cfg.virtual_antennas {
            let o = frame.offset(k, a);
            for s in 0..n_s {
                let ph = 2.0 * PI * range_bins * s as f64 / n_s as f64
                    + 2.0 * PI * doppler_cycles * k as f64
                    + PI * sin_az * a as f64;
                frame.data[o + s] = Complex32::new(ph.cos() as f32, ph.sin() as f32);
            }
        }
    }
    frame
}

/// Per-cell CFAR straight from the definition.
pub fn brute_force(power: &[f64], rows: usize, cols: usize, p: &CfarParams) -> Vec<bool> {
    let mut mask = vec![false; rows * cols];
    for i in 0..rows as isize {
        for j in 0..cols as isize {
            let (mut sum, mut n) = (0.0, 0usize);
            for di in -((p.guard[0] + p.training[0]) as isize)..=(p.guard[0] + p.training[0]) as isize {
                for dj in -((p.guard[1] + p.training[1]) as isize)..=(p.guard[1] + p.training[1]) as isize {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= rows as isize || jj >= cols as isize {
                        continue;
                    }
                    if di.unsigned_abs() <= p.guard[0] && dj.unsigned_abs() <= p.guard[1] {
                        continue;
                    }
                    sum += power[ii as usize * cols + jj as usize];
                    n += 1;
                }
            }
            let idx = i as usize * cols + j as usize;
            mask[idx] = power[idx] > p.scale(n) * (sum / n as f64);
        }
    }
    mask
}

pub fn tone(f: f64, phase: f64) -> Vec<f64> {
    (0..FRAMES).map(|i| (2.0 * PI * f * i as f64 / RATE + phase).sin()).collect()
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Smallest per-source |correlation| under the best source alignment.
pub fn aligned_min_corr(truth: &[Vec<f64>], est: &DMatrix<f64>) -> f64 {
    let est: Vec<Vec<f64>> = est.row_iter().map(|r| r.iter().copied().collect()).collect();
    permutations(truth.len())
        .into_iter()
        .map(|p| {
            truth
                .iter()
                .zip(&p)
                .map(|(t, &j)| corr(t, &est[j]).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// `sensors x FRAMES` random mixture of the given tones plus 5% noise,
/// together with the clean sources.
pub fn tone_mixture(freqs: &[f64], seed: u64, sensors: usize) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let mut r = substream(seed, "ica-recovery", freqs.len() as u64);
    let truth: Vec<Vec<f64>> = freqs.iter().map(|&f| tone(f, r.gen_range(0.0..2.0 * PI))).collect();
    let mixing = DMatrix::from_fn(sensors, freqs.len(), |_, _| r.gen_range(-1.0..1.0));
    let s = DMatrix::from_fn(freqs.len(), FRAMES, |i, t| truth[i][t]);
    let mut x = &mixing * &s;
    for row in 0..sensors {
        let sd = (x.row(row).iter().map(|v| v * v).sum::<f64>() / FRAMES as f64).sqrt();
        for t in 0..FRAMES {
            let n: f64 = r.sample(rand_distr::StandardNormal);
            x[(row, t)] += 0.05 * sd * n;
        }
    }
    (truth, x)
}

/// Signals with the expected breathing-filter verdict under the default band.
pub fn breathing_cases() -> Vec<(String, Vec<f64>, bool)> {
    let mut cases = Vec::new();
    // In-band tones on exact bins, one bin per 1/30 Hz.
    for bin in 4..=17 {
        let f = bin as f64 / 30.0;
        cases.push((format!("tone {f:.3} Hz"), tone(f, 0.3), true));
    }
    // Flat spectrum: a single impulse.
    for at in [0, 17, 59] {
        let mut s = vec![0.0; FRAMES];
        s[at] = 1.0;
        cases.push((format!("impulse at {at}"), s, false));
    }
    // Two impulses: comb-shaped but broadband.
    let mut s = vec![0.0; FRAMES];
    s[5] = 1.0;
    s[40] = -0.7;
    cases.push(("impulse pair".into(), s, false));
    // Out of band on both sides.
    for bin in [1, 2, 20, 24, 29] {
        let f = bin as f64 / 30.0;
        cases.push((format!("tone {f:.3} Hz"), tone(f, 1.1), false));
    }
    // Slow drift.
    cases.push(("ramp".into(), (0..FRAMES).map(|i| i as f64).collect(), false));
    let mut r = substream(0, "breathing-cases", 0);
    for k in 0..4 {
        let f = r.gen_range(0.12..0.55);
        cases.push((format!("off-bin tone {f:.3} Hz"), tone(f, k as f64), true));
    }
    cases
}

/// Outcome of one oracle check: a short summary, or what went wrong.
pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn small() -> RadarConfig {
    RadarConfig {
        chirps_per_frame: 16,
        adc_samples_per_chirp: 64,
        virtual_antennas: 12,
        frame_count: 1,
        ..RadarConfig::low_res()
    }
}

fn rectangular() -> FftSettings {
    FftSettings {
        range_window: Window::Rectangular,
        doppler_window: Window::Rectangular,
        azimuth_window: Window::Rectangular,
    }
}

fn within_one(a: usize, b: f64) -> bool {
    (a as f64 - b).abs() <= 1.0
}

fn peak(spec: &[f32]) -> usize {
    (0..spec.len()).max_by(|&i, &j| spec[i].total_cmp(&spec[j])).unwrap()
}

/// Random frames: the map sums to the frame energy and every cell to its
/// Doppler spectrum.
pub fn check_parseval(frames: usize) -> Check {
    let cfg = small();
    let proc = Processor::new(&cfg, rectangular()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_total, mut worst_cell) = (0.0f64, 0.0f64);
    for _ in 0..frames {
        let mut frame = IqFrame::zeros(&cfg, 0);
        for z in &mut frame.data {
            *z = Complex32::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let energy = frame.power();
        let out = proc.process(&frame).map_err(|e| e.to_string())?;
        let total: f64 = out.map.linear().iter().sum();
        worst_total = worst_total.max(((total - energy) / energy).abs());
        for (r, a) in [(0, 0), (5, 7), (63, 15), (31, 8)] {
            let doppler: f64 = out.doppler.spectrum(r, a).iter().map(|&p| f64::from(p)).sum();
            let cell = out.map.linear()[r * out.map.azimuth_bins + a];
            worst_cell = worst_cell.max(((doppler - cell) / cell).abs());
        }
    }
    ensure!(worst_total < 1e-6, "map energy off by {worst_total:.2e}");
    ensure!(worst_cell < 1e-5, "cell vs Doppler sum off by {worst_cell:.2e}");
    Ok(format!("energy err {worst_total:.1e}, cell err {worst_cell:.1e}"))
}

/// Synthetic point targets peak within one bin of their range, azimuth and
/// Doppler.
pub fn check_point_targets(targets: usize) -> Check {
    let cfg = RadarConfig {
        virtual_antennas: 16,
        ..small()
    };
    let res = cfg.derived_resolutions().map_err(|e| e.to_string())?;
    let proc = Processor::new(&cfg, FftSettings::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..targets {
        let range = rng.gen_range(0.3..2.4);
        let velocity = rng.gen_range(-0.12..0.12);
        let az_deg: f64 = rng.gen_range(-50.0..50.0);
        let u = az_deg.to_radians().sin();
        let cycles = 2.0 * velocity * cfg.chirp_interval() / cfg.wavelength;
        let out = proc
            .process(&point_target(&cfg, range / res.range_resolution, cycles, u))
            .map_err(|e| e.to_string())?;
        let (r, a) = out.map.argmax();
        let n_az = out.map.azimuth_bins as f64;
        ensure!(within_one(r, range / res.range_resolution), "range bin {r} for {range} m");
        ensure!(within_one(a, n_az / 2.0 + u * n_az / 2.0), "azimuth bin {a} for {az_deg} deg");
        let d = peak(&out.doppler.spectrum(r, a));
        let expect = cfg.chirps_per_frame as f64 / 2.0 + velocity / res.velocity_resolution;
        ensure!(within_one(d, expect), "Doppler bin {d}, expected {expect:.2} for {velocity} m/s");
        ensure!(
            (out.doppler.velocity(d) - velocity).abs() <= res.velocity_resolution + 1e-12,
            "velocity axis off at bin {d}"
        );
    }
    Ok(format!("{targets} point targets within one bin"))
}

/// A simulated still person peaks at its range and azimuth and zero Doppler.
pub fn check_simulated_persons() -> Check {
    let cfg = RadarConfig {
        frame_count: 1,
        ..RadarConfig::compact()
    };
    let res = cfg.derived_resolutions().map_err(|e| e.to_string())?;
    let proc = Processor::new(&cfg, FftSettings::default()).map_err(|e| e.to_string())?;
    let n_az = cfg.azimuth_fft_size() as f64;
    let spots = [(2.0, 0.0), (3.1, -0.8), (1.2, 0.9), (4.5, 1.5)];
    for (x, y) in spots {
        let scene = Scene {
            persons: vec![Person::new(x, y, 0.25, 0.0)],
            ..Scene::empty()
        };
        let sim = Simulator::new(&cfg, &scene).map_err(|e| e.to_string())?;
        let out = proc.process(&sim.frame(0)).map_err(|e| e.to_string())?;
        let (r, a) = out.map.argmax();
        let p = &scene.persons[0];
        ensure!(within_one(r, p.range() / res.range_resolution), "({x},{y}): range bin {r}");
        let u = p.azimuth_deg().to_radians().sin();
        ensure!(within_one(a, n_az / 2.0 + u * n_az / 2.0), "({x},{y}): azimuth bin {a}");
        let d = peak(&out.doppler.spectrum(r, a));
        ensure!(d == out.doppler.zero_bin(), "({x},{y}): Doppler bin {d}");
    }
    Ok(format!("{} simulated people on their bins", spots.len()))
}

/// The summed-area CFAR agrees exactly with [`brute_force`] on random maps.
pub fn check_cfar(maps: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (rows, cols) = (32, 32);
    let mut detections = 0;
    for m in 0..maps {
        // Dyadic values keep every partial sum exact in both implementations.
        let mut power: Vec<f64> = (0..rows * cols)
            .map(|_| (-rng.gen_range(1e-6f64..1.0).ln() * 1024.0).round() / 1024.0)
            .collect();
        for _ in 0..rng.gen_range(0..6) {
            let i = rng.gen_range(0..rows * cols);
            power[i] += rng.gen_range(5..200) as f64;
        }
        let params = if m % 2 == 0 {
            CfarParams::new(rng.gen_range(0..3), rng.gen_range(1..6), CfarThreshold::FalseAlarmRate(1e-3))
        } else {
            CfarParams {
                guard: [rng.gen_range(0..3), rng.gen_range(0..3)],
                training: [rng.gen_range(1..8), rng.gen_range(1..8)],
                threshold: CfarThreshold::Scale(rng.gen_range(2..12) as f64),
            }
        };
        let fast = ca_cfar_linear(&power, rows, cols, &params).map_err(|e| e.to_string())?;
        let slow = brute_force(&power, rows, cols, &params);
        ensure!(fast == slow, "map {m} differs, {params:?}");
        detections += slow.iter().filter(|&&d| d).count();
    }
    Ok(format!("{maps} maps identical, {detections} detections"))
}

/// FastICA recovers 2 and 3 tone mixtures for every seed.
pub fn check_ica(seeds: u64) -> Check {
    let sets: [&[f64]; 2] = [&[0.2, 0.45], &[0.15, 0.3, 0.5]];
    let mut worst = f64::INFINITY;
    for freqs in sets {
        for seed in 0..seeds {
            let (truth, x) = tone_mixture(freqs, seed, 8);
            let res = fast_ica(&x, freqs.len(), &FastIcaParams::default(), &mut substream(seed, "ica", 0))
                .map_err(|e| e.to_string())?;
            let rho = aligned_min_corr(&truth, &res.sources);
            ensure!(rho >= 0.95, "{} sources, seed {seed}: min |rho| {rho:.4}", freqs.len());
            worst = worst.min(rho);
        }
    }
    Ok(format!("min |rho| {worst:.4} over {} runs", 2 * seeds))
}

/// Every case of [`breathing_cases`] gets its expected verdict.
pub fn check_breathing() -> Check {
    let band = BreathingBand::default();
    let cases = breathing_cases();
    let sources: Vec<MicroSource> = cases
        .iter()
        .map(|(_, s, _)| MicroSource {
            signal: s.clone(),
            mixing_weights: vec![1.0, 0.5],
            ica_iteration: 1,
        })
        .collect();
    let kept = filter_breathing(&sources, &band, RATE).map_err(|e| e.to_string())?;
    let kept: Vec<&Vec<f64>> = kept.iter().map(|b| &b.source.signal).collect();
    for (name, signal, accept) in &cases {
        let stats = spectrum_stats(signal, RATE).map_err(|e| e.to_string())?;
        ensure!(band.accepts(&stats) == *accept, "{name}: {stats:?}");
        ensure!(kept.contains(&signal) == *accept, "{name}: filter disagrees");
    }
    let n_acc = cases.iter().filter(|c| c.2).count();
    Ok(format!("{} cases ({n_acc} accepted)", cases.len()))
}
