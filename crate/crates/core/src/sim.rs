//! Synthetic FMCW recordings of stationary breathing people.
//!
//! Each person is a single point scatterer on the torso. Its radial range
//! follows the chest motion, its lateral position follows body sway, and the
//! echo is the usual separable beat-signal model: a range-proportional beat
//! frequency across ADC samples, the carrier phase `4*pi*r/lambda` across
//! chirps, and a linear phase progression across the half-wavelength
//! virtual array.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::iq::{IqCube, IqFrame};
use crate::rng;

/// Floor of the facing attenuation `max(cos(facing), FACING_FLOOR)`.
pub const FACING_FLOOR: f64 = 0.2;

/// Largest physiological chest displacement accepted, m.
pub const MAX_BREATHING_AMPLITUDE: f64 = 0.02;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    /// Downrange position, m.
    pub x: f64,
    /// Lateral position, m (positive towards positive azimuth).
    pub y: f64,
    pub breathing_hz: f64,
    /// Peak torso displacement, m.
    pub breathing_amplitude: f64,
    #[serde(default)]
    pub sway_amplitude: f64,
    #[serde(default)]
    pub sway_hz: f64,
    #[serde(default = "one")]
    pub rcs: f64,
    /// Body orientation, degrees; 0 faces the radar.
    #[serde(default)]
    pub facing: f64,
    /// Initial breathing phase, radians.
    #[serde(default)]
    pub breathing_phase: f64,
    #[serde(default)]
    pub sway_phase: f64,
}

impl Person {
    pub fn new(x: f64, y: f64, breathing_hz: f64, breathing_amplitude: f64) -> Self {
        Person {
            x,
            y,
            breathing_hz,
            breathing_amplitude,
            sway_amplitude: 0.0,
            sway_hz: 0.0,
            rcs: 1.0,
            facing: 0.0,
            breathing_phase: 0.0,
            sway_phase: 0.0,
        }
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    /// Breathing amplitude after the facing attenuation.
    pub fn effective_amplitude(&self) -> f64 {
        self.breathing_amplitude * self.facing.to_radians().cos().max(FACING_FLOOR)
    }

    /// Chest displacement along the line of sight at time `t`, m.
    pub fn chest_displacement(&self, t: f64) -> f64 {
        self.effective_amplitude() * (2.0 * PI * self.breathing_hz * t + self.breathing_phase).sin()
    }
}

/// First-order multipath: every person is mirrored about a reflecting
/// plane at `mirror_azimuth` degrees, attenuated by `gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhostSpec {
    pub gain: f64,
    pub mirror_azimuth: f64,
}

/// A motionless reflector such as furniture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticReflector {
    pub x: f64,
    pub y: f64,
    pub rcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub persons: Vec<Person>,
    /// Per-sample complex noise power in dB relative to the echo of a
    /// unit-RCS scatterer at 1 m. `null` disables noise.
    #[serde(default)]
    pub noise_floor_db: Option<f64>,
    #[serde(default)]
    pub multipath: Option<GhostSpec>,
    #[serde(default)]
    pub static_reflectors: Vec<StaticReflector>,
    #[serde(default)]
    pub seed: u64,
}

impl Scene {
    pub fn empty() -> Self {
        Scene {
            persons: Vec::new(),
            noise_floor_db: None,
            multipath: None,
            static_reflectors: Vec::new(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse("scene", format!("{e} (line {}, column {})", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the scene against the radar geometry. Returns warnings for
    /// conditions that are legal but degrade the recording.
    pub fn validate(&self, config: &RadarConfig) -> Result<Vec<String>> {
        let res = config.derived_resolutions()?;
        let nyquist = config.frame_rate / 2.0;
        let mut warnings = Vec::new();
        for (i, p) in self.persons.iter().enumerate() {
            let (r, az) = (p.range(), p.azimuth_deg());
            if !(r > 0.0 && r < res.max_range) || az.abs() > config.azimuth_fov || p.x <= 0.0 {
                return Err(Error::Scene(format!(
                    "person {i} at (x={:.3} m, y={:.3} m) -> range {r:.3} m, azimuth {az:.2} deg is outside the field of view (range (0, {:.2}) m, azimuth within +/-{} deg)",
                    p.x, p.y, res.max_range, config.azimuth_fov
                )));
            }
            if !(0.0..=MAX_BREATHING_AMPLITUDE).contains(&p.breathing_amplitude) {
                return Err(Error::Scene(format!(
                    "person {i}: breathing_amplitude {} m outside [0, {MAX_BREATHING_AMPLITUDE}]",
                    p.breathing_amplitude
                )));
            }
            if !(p.rcs >= 0.0 && p.rcs.is_finite()) {
                return Err(Error::Scene(format!("person {i}: rcs must be non-negative")));
            }
            if !(p.breathing_hz > 0.0) {
                return Err(Error::Scene(format!("person {i}: breathing_hz must be positive")));
            }
            if p.breathing_hz >= nyquist {
                warnings.push(format!(
                    "person {i}: breathing at {} Hz is at or above the frame Nyquist rate {nyquist} Hz and will alias",
                    p.breathing_hz
                ));
            }
        }
        for (i, s) in self.static_reflectors.iter().enumerate() {
            let r = s.x.hypot(s.y);
            let az = s.y.atan2(s.x).to_degrees();
            if !(r > 0.0 && r < res.max_range) || az.abs() > config.azimuth_fov || s.x <= 0.0 {
                return Err(Error::Scene(format!(
                    "static reflector {i} at (x={:.3} m, y={:.3} m) is outside the field of view",
                    s.x, s.y
                )));
            }
        }
        if let Some(g) = &self.multipath {
            if !(0.0..=1.0).contains(&g.gain) {
                return Err(Error::Scene(format!("multipath gain {} outside [0, 1]", g.gain)));
            }
        }
        if let Some(db) = self.noise_floor_db {
            if db.is_nan() {
                return Err(Error::Scene("noise_floor_db is NaN".into()));
            }
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub scene_hash: String,
    pub warnings: Vec<String>,
}

/// One scatterer as seen by the radar over time.
#[derive(Debug, Clone)]
struct Scatterer {
    amplitude: f64,
    x: f64,
    y: f64,
    /// Radial motion applied on top of the geometric range.
    breathing: Option<Person>,
    sway_amplitude: f64,
    sway_hz: f64,
    sway_phase: f64,
    /// Mirror plane for ghosts, degrees.
    mirror: Option<f64>,
}

impl Scatterer {
    /// (range m, sin(azimuth)) at time `t`.
    fn geometry(&self, t: f64) -> (f64, f64) {
        let y = self.y + self.sway_amplitude * (2.0 * PI * self.sway_hz * t + self.sway_phase).sin();
        let mut r = self.x.hypot(y);
        let mut az = y.atan2(self.x);
        if let Some(m) = self.mirror {
            az = 2.0 * m.to_radians() - az;
        }
        if let Some(p) = &self.breathing {
            r += p.chest_displacement(t);
        }
        (r, az.sin())
    }
}

/// Streams frames of a simulated recording.
///
/// Frame `j` depends only on `(config, scene, j)`: noise for each frame
/// comes from its own RNG substream, so frames may be produced in any order.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: RadarConfig,
    scatterers: Vec<Scatterer>,
    noise_sigma: Option<f64>,
    seed: u64,
    meta: SimulationMeta,
}

impl Simulator {
    pub fn new(config: &RadarConfig, scene: &Scene) -> Result<Self> {
        config.validate()?;
        let mut warnings = scene.validate(config)?;
        let mut scatterers = Vec::new();
        for p in &scene.persons {
            let torso = Scatterer {
                amplitude: p.rcs.sqrt() / (p.range() * p.range()),
                x: p.x,
                y: p.y,
                breathing: Some(p.clone()),
                sway_amplitude: p.sway_amplitude,
                sway_hz: p.sway_hz,
                sway_phase: p.sway_phase,
                mirror: None,
            };
            if let Some(g) = &scene.multipath {
                let ghost_az = 2.0 * g.mirror_azimuth - p.azimuth_deg();
                if ghost_az.abs() <= config.azimuth_fov {
                    scatterers.push(Scatterer {
                        amplitude: torso.amplitude * g.gain,
                        mirror: Some(g.mirror_azimuth),
                        ..torso.clone()
                    });
                } else {
                    warnings.push(format!(
                        "ghost of person at ({:.2}, {:.2}) falls outside the field of view and is dropped",
                        p.x, p.y
                    ));
                }
            }
            scatterers.push(torso);
        }
        for s in &scene.static_reflectors {
            let r = s.x.hypot(s.y);
            scatterers.push(Scatterer {
                amplitude: s.rcs.sqrt() / (r * r),
                x: s.x,
                y: s.y,
                breathing: None,
                sway_amplitude: 0.0,
                sway_hz: 0.0,
                sway_phase: 0.0,
                mirror: None,
            });
        }
        let noise_sigma = scene
            .noise_floor_db
            .filter(|db| db.is_finite())
            .map(|db| 10f64.powf(db / 20.0));
        Ok(Simulator {
            config: config.clone(),
            scatterers,
            noise_sigma,
            seed: scene.seed,
            meta: SimulationMeta {
                scene_hash: scene.hash(),
                warnings,
            },
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn meta(&self) -> &SimulationMeta {
        &self.meta
    }

    pub fn frame_count(&self) -> usize {
        self.config.frame_count
    }

    pub fn frame(&self, index: usize) -> IqFrame {
        let cfg = &self.config;
        let mut frame = IqFrame::zeros(cfg, index);
        let (n_c, n_a, n_s) = (cfg.chirps_per_frame, cfg.virtual_antennas, cfg.adc_samples_per_chirp);
        let max_range = n_s as f64 * crate::config::SPEED_OF_LIGHT / (2.0 * cfg.chirp_bandwidth);
        let t0 = index as f64 * cfg.frame_period();
        let tc = cfg.chirp_interval();

        let mut range_phasor = vec![Complex32::new(0.0, 0.0); n_s];
        let mut az_phasor = vec![Complex32::new(0.0, 0.0); n_a];
        for sc in &self.scatterers {
            for k in 0..n_c {
                let (r, u) = sc.geometry(t0 + k as f64 * tc);
                let carrier = Complex64::from_polar(sc.amplitude, 4.0 * PI * r / cfg.wavelength);
                let w_r = 2.0 * PI * r / max_range;
                for (s, z) in range_phasor.iter_mut().enumerate() {
                    let c = Complex64::from_polar(1.0, w_r * s as f64);
                    *z = Complex32::new(c.re as f32, c.im as f32);
                }
                for (a, z) in az_phasor.iter_mut().enumerate() {
                    let c = carrier * Complex64::from_polar(1.0, PI * u * a as f64);
                    *z = Complex32::new(c.re as f32, c.im as f32);
                }
                for (a, base) in az_phasor.iter().enumerate() {
                    let o = frame.offset(k, a);
                    for (out, rp) in frame.data[o..o + n_s].iter_mut().zip(&range_phasor) {
                        *out += base * rp;
                    }
                }
            }
        }
        if let Some(sigma) = self.noise_sigma {
            let mut rng = rng::substream(self.seed, "sim-noise", index as u64);
            let scale = (sigma / std::f64::consts::SQRT_2) as f32;
            for z in frame.data.iter_mut() {
                let re: f32 = StandardNormal.sample(&mut rng);
                let im: f32 = StandardNormal.sample(&mut rng);
                *z += Complex32::new(re * scale, im * scale);
            }
        }
        frame
    }

    pub fn frames(&self) -> impl Iterator<Item = IqFrame> + '_ {
        (0..self.config.frame_count).map(move |j| self.frame(j))
    }

    /// Materializes the whole recording.
    pub fn cube(&self) -> IqCube {
        IqCube {
            config: self.config.clone(),
            frames: self.frames().collect(),
        }
    }
}

/// Convenience wrapper: builds a [`Simulator`] and materializes the cube.
pub fn simulate(config: &RadarConfig, scene: &Scene) -> Result<(IqCube, SimulationMeta)> {
    let sim = Simulator::new(config, scene)?;
    let cube = sim.cube();
    Ok((cube, sim.meta().clone()))
}
