//! `.mmcr` IQ recording files.
//!
//! Layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `MMCR\0\x01\0\0` |
//! | 4     | header length `L`, little-endian u32 |
//! | L     | UTF-8 JSON [`RecordingHeader`] |
//! | ...   | little-endian f32 pairs `I, Q` in (frame, chirp, antenna, sample) order |
//!
//! Frames are contiguous, so a reader can stream one frame at a time.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::iq::{IqCube, IqFrame};

pub const MAGIC: [u8; 8] = *b"MMCR\x00\x01\x00\x00";
const MAX_HEADER: u32 = 16 << 20;

pub const DIMENSION_ORDER: [&str; 4] = ["frame", "chirp", "antenna", "sample"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub config: RadarConfig,
    pub scene_hash: String,
    pub dimension_order: Vec<String>,
    pub shape: [usize; 4],
    pub sample_format: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RecordingHeader {
    pub fn new(config: &RadarConfig, scene_hash: impl Into<String>, warnings: Vec<String>) -> Self {
        RecordingHeader {
            config: config.clone(),
            scene_hash: scene_hash.into(),
            dimension_order: DIMENSION_ORDER.iter().map(|s| s.to_string()).collect(),
            shape: [
                config.frame_count,
                config.chirps_per_frame,
                config.virtual_antennas,
                config.adc_samples_per_chirp,
            ],
            sample_format: "f32le-iq".into(),
            warnings,
        }
    }

    fn check(&self) -> Result<()> {
        let expect = RecordingHeader::new(&self.config, "", vec![]);
        if self.shape != expect.shape || self.dimension_order != expect.dimension_order {
            return Err(Error::Corrupt(format!(
                "header shape {:?} / order {:?} inconsistent with its radar configuration",
                self.shape, self.dimension_order
            )));
        }
        if self.sample_format != "f32le-iq" {
            return Err(Error::Corrupt(format!("unsupported sample format '{}'", self.sample_format)));
        }
        self.config
            .validate()
            .map_err(|e| Error::Corrupt(format!("header configuration invalid: {e}")))
    }
}

pub struct MmcrWriter<W: Write> {
    out: W,
    header: RecordingHeader,
    next_frame: usize,
    bytes: Vec<u8>,
}

impl MmcrWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: RecordingHeader) -> Result<Self> {
        MmcrWriter::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> MmcrWriter<W> {
    pub fn new(mut out: W, header: RecordingHeader) -> Result<Self> {
        let json = serde_json::to_vec(&header).map_err(|e| Error::Invariant(e.to_string()))?;
        out.write_all(&MAGIC)?;
        out.write_all(&(json.len() as u32).to_le_bytes())?;
        out.write_all(&json)?;
        Ok(MmcrWriter {
            out,
            header,
            next_frame: 0,
            bytes: Vec::new(),
        })
    }

    pub fn write_frame(&mut self, frame: &IqFrame) -> Result<()> {
        frame.check_matches(&self.header.config)?;
        if frame.index != self.next_frame {
            return Err(Error::Invariant(format!(
                "frames must be written in order: expected {}, got {}",
                self.next_frame, frame.index
            )));
        }
        self.bytes.clear();
        self.bytes.reserve(frame.data.len() * 8);
        for z in &frame.data {
            self.bytes.extend_from_slice(&z.re.to_le_bytes());
            self.bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        self.out.write_all(&self.bytes)?;
        self.next_frame += 1;
        Ok(())
    }

    /// Flushes and checks that every frame was written.
    pub fn finish(mut self) -> Result<W> {
        if self.next_frame != self.header.config.frame_count {
            return Err(Error::Invariant(format!(
                "recording declares {} frames but {} were written",
                self.header.config.frame_count, self.next_frame
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct MmcrReader<R: Read> {
    input: R,
    header: RecordingHeader,
    next_frame: usize,
    bytes: Vec<u8>,
}

impl MmcrReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Missing(vec![path.to_path_buf()]),
            _ => Error::Io(e),
        })?;
        MmcrReader::new(BufReader::with_capacity(1 << 20, file))
    }
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Corrupt(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

impl<R: Read> MmcrReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact_or_corrupt(&mut input, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::Corrupt(format!("bad magic bytes {magic:02x?}")));
        }
        let mut len = [0u8; 4];
        read_exact_or_corrupt(&mut input, &mut len, "header length")?;
        let len = u32::from_le_bytes(len);
        if len > MAX_HEADER {
            return Err(Error::Corrupt(format!("header length {len} is implausible")));
        }
        let mut json = vec![0u8; len as usize];
        read_exact_or_corrupt(&mut input, &mut json, "header")?;
        let header: RecordingHeader = serde_json::from_slice(&json)
            .map_err(|e| Error::Corrupt(format!("header is not valid JSON: {e}")))?;
        header.check()?;
        Ok(MmcrReader {
            input,
            header,
            next_frame: 0,
            bytes: Vec::new(),
        })
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    pub fn config(&self) -> &RadarConfig {
        &self.header.config
    }

    /// Next frame, or `None` after the last one.
    pub fn next_frame(&mut self) -> Result<Option<IqFrame>> {
        let cfg = &self.header.config;
        if self.next_frame >= cfg.frame_count {
            return Ok(None);
        }
        let n = cfg.frame_len();
        self.bytes.resize(n * 8, 0);
        read_exact_or_corrupt(&mut self.input, &mut self.bytes, &format!("frame {}", self.next_frame))?;
        let data = self
            .bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        let frame = IqFrame {
            index: self.next_frame,
            chirps: cfg.chirps_per_frame,
            antennas: cfg.virtual_antennas,
            samples: cfg.adc_samples_per_chirp,
            data,
        };
        self.next_frame += 1;
        Ok(Some(frame))
    }
}

impl<R: Read> Iterator for MmcrReader<R> {
    type Item = Result<IqFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub fn write_cube<W: Write>(out: W, cube: &IqCube, scene_hash: &str) -> Result<W> {
    let mut w = MmcrWriter::new(out, RecordingHeader::new(&cube.config, scene_hash, vec![]))?;
    for f in &cube.frames {
        w.write_frame(f)?;
    }
    w.finish()
}

pub fn read_cube<R: Read>(input: R) -> Result<(RecordingHeader, IqCube)> {
    let mut r = MmcrReader::new(input)?;
    let mut frames = Vec::new();
    while let Some(f) = r.next_frame()? {
        frames.push(f);
    }
    let header = r.header.clone();
    Ok((
        header.clone(),
        IqCube {
            config: header.config,
            frames,
        },
    ))
}
