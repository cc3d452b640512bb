use rand::Rng;
use rand_distr::StandardNormal;

use mmcounter::breathing::{filter_breathing, spectrum_stats, BreathingBand, MicroSource};
use mmcounter::rng;

mod common;

use common::{tone, FRAMES, RATE};

#[test]
fn ica_recovers_tone_mixtures() {
    common::check_ica(20).unwrap();
}

#[test]
fn breathing_filter_suite() {
    common::check_breathing().unwrap();
}

fn source(signal: Vec<f64>) -> MicroSource {
    MicroSource {
        signal,
        mixing_weights: vec![1.0, 0.5],
        ica_iteration: 1,
    }
}

#[test]
fn white_noise_is_mostly_rejected() {
    let band = BreathingBand::default();
    let mut r = rng::substream(1, "noise", 0);
    let mut accepted = 0;
    for _ in 0..200 {
        let s: Vec<f64> = (0..FRAMES).map(|_| r.sample(StandardNormal)).collect();
        let stats = spectrum_stats(&s, RATE).unwrap();
        assert!(stats.quality < 0.35);
        accepted += usize::from(band.accepts(&stats));
    }
    assert!(accepted <= 10, "{accepted} of 200 noise signals accepted");
}

#[test]
fn tone_between_bins_statistics() {
    // 0.25 Hz sits half way between two bins of a 60-sample, 2 Hz spectrum.
    let stats = spectrum_stats(&tone(0.25, 0.0), RATE).unwrap();
    let f = stats.mean_frequency.unwrap();
    assert!((f - 0.25).abs() <= 1.0 / 60.0, "{f}");
    assert!(stats.quality > 0.4 && stats.quality < 0.45, "{}", stats.quality);
    // On a bin centre the tone takes all the power.
    let stats = spectrum_stats(&tone(0.3, 0.2), RATE).unwrap();
    assert!((stats.mean_frequency.unwrap() - 0.3).abs() < 1e-9);
    assert!(stats.quality > 0.999);
}

#[test]
fn zero_quality_floor_accepts_any_in_band_source() {
    let band = BreathingBand {
        min_quality: 0.0,
        ..Default::default()
    };
    let mut s = vec![0.0; FRAMES];
    s[3] = 1.0;
    let kept = filter_breathing(&[source(s)], &band, RATE).unwrap();
    assert_eq!(kept.len(), 1);
}
