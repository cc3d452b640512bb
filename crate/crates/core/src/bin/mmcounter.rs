use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mmcounter::breathing::BreathingBand;
use mmcounter::classifier::{load_manifest, train_classifier, AttentionClassifier, TrainConfig};
use mmcounter::counting::ClusteringParams;
use mmcounter::dsp::{CfarParams, CfarThreshold};
use mmcounter::metrics::{evaluate, to_label};
use mmcounter::mmcr::{MmcrReader, MmcrWriter, RecordingHeader, MAGIC};
use mmcounter::pipeline::{self, Estimator, PipelineConfig};
use mmcounter::profile::SpatialBreathingProfile;
use mmcounter::sim::{Scene, Simulator};
use mmcounter::suite::{class_suite, SuiteParams};
use mmcounter::{export, Error, Preset, RadarConfig, Result};

#[derive(Parser)]
#[command(name = "mmcounter", version, about = "Count stationary people from FMCW radar breathing micro-motion")]
struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolutions derived from a radar preset.
    Resolutions {
        #[arg(long, value_enum, default_value_t = PresetArg::Full)]
        preset: PresetArg,
    },
    /// Simulate a scene description into an .mmcr recording.
    Simulate {
        scene: PathBuf,
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PresetArg::Full)]
        preset: PresetArg,
        /// Noise seed; overrides the seed stored in the scene.
        #[arg(long)]
        seed: Option<u64>,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
    },
    /// Extract the point cloud, micro-motion matrix, breathing sources and profile.
    Process {
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        force: bool,
    },
    /// Count people in a recording (.mmcr) or a profile (.csv); prints JSON.
    Count {
        input: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Evaluate an estimator on a JSON-lines manifest of labeled profiles.
    Eval {
        manifest: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write report.json, report.txt and confusion.csv here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Generate random labeled scenes and their profiles.
    Suite {
        #[arg(long)]
        out_dir: PathBuf,
        /// Scenes per class (2, 3, 5 and 7 people).
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, value_enum, default_value_t = PresetArg::Compact)]
        preset: PresetArg,
        /// Override the number of virtual antennas of the preset.
        #[arg(long)]
        antennas: Option<usize>,
        #[arg(long, default_value_t = 0)]
        suite_seed: u64,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        force: bool,
    },
    /// Train the attention classifier on labeled profiles.
    Train {
        train: PathBuf,
        valid: PathBuf,
        /// Checkpoint output (.mmcm).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Full,
    LowRes,
    Compact,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Full => Preset::Full,
            PresetArg::LowRes => Preset::LowRes,
            PresetArg::Compact => Preset::Compact,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Clustering,
    Classifier,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Minimum fraction of frames with non-zero displacement for a valid point.
    #[arg(long = "m", default_value_t = 0.25)]
    min_nonzero: f64,
    /// Lower edge of the breathing band, Hz.
    #[arg(long = "bl", default_value_t = 0.1)]
    low_hz: f64,
    /// Upper edge of the breathing band, Hz.
    #[arg(long = "bh", default_value_t = 0.6)]
    high_hz: f64,
    /// Minimum breathing score (peak over total spectral power).
    #[arg(long = "bs", default_value_t = 0.2)]
    min_quality: f64,
    /// ICA runs with 1..=n components.
    #[arg(long = "n", default_value_t = 10)]
    ica_iterations: usize,
    /// Largest group count tried by the clustering estimator.
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    /// CFAR probability of false alarm.
    #[arg(long, default_value_t = 1e-3)]
    pfa: f64,
    /// CFAR guard cells per side.
    #[arg(long, default_value_t = 2)]
    guard: usize,
    /// CFAR training cells per side.
    #[arg(long, default_value_t = 8)]
    training: usize,
    /// Seed for ICA initialization and augmentation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Clustering)]
    estimator: EstimatorArg,
    /// Classifier checkpoint (.mmcm), required by --estimator classifier.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            cfar: CfarParams::new(self.guard, self.training, CfarThreshold::FalseAlarmRate(self.pfa)),
            min_nonzero_fraction: self.min_nonzero,
            band: BreathingBand {
                low_hz: self.low_hz,
                high_hz: self.high_hz,
                min_quality: self.min_quality,
            },
            ica_iterations: self.ica_iterations,
            seed: self.seed,
            estimator: match self.estimator {
                EstimatorArg::Clustering => Estimator::Clustering,
                EstimatorArg::Classifier => Estimator::Classifier,
            },
            clustering: ClusteringParams {
                k_max: self.k_max,
                ..Default::default()
            },
            model_path: self.model.clone(),
            ..Default::default()
        }
    }

    fn load_model(&self) -> Result<Option<AttentionClassifier>> {
        match (self.estimator, &self.model) {
            (EstimatorArg::Classifier, Some(p)) => Ok(Some(AttentionClassifier::load(p)?)),
            (EstimatorArg::Classifier, None) => Err(Error::ModelRequired(
                "--estimator classifier needs --model <checkpoint>; use --estimator clustering otherwise".into(),
            )),
            (EstimatorArg::Clustering, _) => Ok(None),
        }
    }
}

fn refuse_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)], force: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, _) in files {
        refuse_overwrite(&dir.join(name), force)?;
    }
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn is_recording(path: &Path) -> Result<bool> {
    let mut f = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
        _ => Error::Io(e),
    })?;
    let mut head = [0u8; 4];
    let n = f.read(&mut head)?;
    if n == 4 && head == MAGIC[..4] {
        return Ok(true);
    }
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok(false);
    }
    Err(Error::Corrupt(format!(
        "{} is neither an .mmcr recording (bad magic bytes) nor a .csv profile",
        path.display()
    )))
}

fn radar_for(preset: PresetArg, antennas: Option<usize>) -> RadarConfig {
    let mut radar = Preset::from(preset).config();
    if let Some(a) = antennas {
        radar.virtual_antennas = a;
    }
    radar
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Invariant(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Resolutions { preset } => {
            let radar = Preset::from(preset).config();
            println!("{}", to_json(&radar.derived_resolutions()?)?);
        }
        Command::Simulate {
            scene,
            out,
            preset,
            seed,
            force,
        } => {
            refuse_overwrite(&out, force)?;
            let mut scene = Scene::load(&scene)?;
            if let Some(s) = seed {
                scene.seed = s;
            }
            let radar = Preset::from(preset).config();
            let sim = Simulator::new(&radar, &scene)?;
            for w in &sim.meta().warnings {
                log::warn!("{w}");
            }
            let header = RecordingHeader::new(&radar, sim.meta().scene_hash.clone(), sim.meta().warnings.clone());
            let mut writer = MmcrWriter::create(&out, header)?;
            for frame in sim.frames() {
                writer.write_frame(&frame)?;
            }
            writer.finish()?;
        }
        Command::Process {
            input,
            out_dir,
            pipeline: args,
            force,
        } => {
            let cfg = args.config();
            let reader = MmcrReader::open(&input)?;
            let radar = reader.config().clone();
            let processed = pipeline::process_frames(&radar, reader, &cfg)?;
            let sep = pipeline::separate(&processed.valid, radar.frame_rate, &cfg)?;
            let files = [
                (
                    "points.csv",
                    export::point_cloud_csv(&processed.detections, &processed.mean_map).into_bytes(),
                ),
                ("micromotion.csv", export::micro_motion_csv(&processed.valid).into_bytes()),
                ("ra_map.csv", export::range_azimuth_csv(&processed.mean_map).into_bytes()),
                ("ra_map.pgm", export::range_azimuth_pgm(&processed.mean_map)),
                (
                    "sources.csv",
                    export::sources_csv(&sep.breathing, radar.frame_period()).into_bytes(),
                ),
                (
                    "sources.json",
                    export::sources_json(&sep.breathing, &processed.valid.points).into_bytes(),
                ),
                ("profile.csv", sep.profile.to_csv().into_bytes()),
            ];
            write_outputs(&out_dir, &files, force)?;
            eprintln!(
                "{} points, {} valid, {} micro sources, {} breathing sources",
                processed.points.len(),
                processed.valid.rows(),
                sep.micro_sources,
                sep.breathing.len()
            );
        }
        Command::Count { input, pipeline: args } => {
            let cfg = args.config();
            let model = args.load_model()?;
            let estimate = if is_recording(&input)? {
                let reader = MmcrReader::open(&input)?;
                let radar = reader.config().clone();
                pipeline::run(&radar, reader, &cfg, model.as_ref())?.estimate
            } else {
                let profile = SpatialBreathingProfile::load(&input)?;
                pipeline::count_profile(&profile, &cfg, model.as_ref())?
            };
            println!("{}", to_json(&estimate)?);
        }
        Command::Eval {
            manifest,
            pipeline: args,
            out_dir,
            force,
        } => {
            let cfg = args.config();
            let model = args.load_model()?;
            let data = load_manifest(&manifest)?;
            let mut pred = Vec::with_capacity(data.len());
            let mut truth = Vec::with_capacity(data.len());
            for d in &data {
                pred.push(pipeline::count_profile(&d.profile, &cfg, model.as_ref())?.count);
                truth.push(d.label);
            }
            let report = evaluate(&pred, &truth, &mmcounter::suite::CLASSES)?;
            let table = report.table();
            if let Some(dir) = out_dir {
                let files = [
                    ("report.json", report.to_json().into_bytes()),
                    ("report.txt", table.clone().into_bytes()),
                    ("confusion.csv", report.confusion.to_csv().into_bytes()),
                ];
                write_outputs(&dir, &files, force)?;
            }
            for (p, t) in pred.iter().zip(&truth) {
                log::debug!("truth {t} predicted {p} ({})", to_label(*p, &mmcounter::suite::CLASSES));
            }
            print!("{table}");
        }
        Command::Suite {
            out_dir,
            per_class,
            preset,
            antennas,
            suite_seed,
            pipeline: args,
            force,
        } => {
            let radar = radar_for(preset, antennas);
            let cfg = args.config();
            let manifest = out_dir.join("manifest.jsonl");
            refuse_overwrite(&manifest, force)?;
            fs::create_dir_all(out_dir.join("scenes"))?;
            fs::create_dir_all(out_dir.join("profiles"))?;
            let mut lines = String::new();
            for (i, (scene, label)) in class_suite(per_class, suite_seed, &SuiteParams::default()).iter().enumerate() {
                let name = format!("scene_{i:04}_n{label}");
                let result = pipeline::run_scene(&radar, scene, &cfg, None)?;
                fs::write(out_dir.join("scenes").join(format!("{name}.json")), to_json(scene)?)?;
                let rel = format!("profiles/{name}.csv");
                result.separation.profile.save(&out_dir.join(&rel))?;
                lines.push_str(&serde_json::json!({ "profile_path": rel, "label": label }).to_string());
                lines.push('\n');
                log::info!("{name}: clustering count {}", result.estimate.count);
            }
            fs::write(&manifest, lines)?;
        }
        Command::Train {
            train,
            valid,
            out,
            epochs,
            learning_rate,
            seed,
            force,
        } => {
            refuse_overwrite(&out, force)?;
            let missing: Vec<PathBuf> = [&train, &valid]
                .iter()
                .filter(|p| !p.is_file())
                .map(|p| p.to_path_buf())
                .collect();
            if !missing.is_empty() {
                return Err(Error::Missing(missing));
            }
            let train = load_manifest(&train)?;
            let valid = load_manifest(&valid)?;
            let cfg = TrainConfig {
                epochs,
                learning_rate,
                seed,
                ..Default::default()
            };
            let (clf, report) = train_classifier(&train, &valid, &cfg)?;
            clf.save(&out)?;
            println!("{}", to_json(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
