use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// The only sample rate the pipeline accepts.
pub const SAMPLE_RATE: u32 = 16_000;

const PCM_SCALE: f64 = 32_768.0;

/// Mono audio normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedSampleRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::UnsupportedFormat(format!(
                "sample {bad} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::UnsupportedFormat(other.to_string()),
    }
}

/// Decodes a RIFF/WAVE stream holding 16-bit mono PCM at 16 kHz.
pub fn decode_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "expected 16-bit integer PCM, got {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "expected mono, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate));
    }

    // The header length is untrusted; cap the up-front reservation.
    let mut samples = Vec::with_capacity((wav.len() as usize).min(1 << 20));
    for s in wav.samples::<i16>() {
        samples.push(f64::from(s.map_err(map_hound)?) / PCM_SCALE);
    }
    AudioClip::new(samples, SAMPLE_RATE)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let file = File::open(path)?;
    decode_wav(BufReader::new(file))
}

/// Writes a clip as 16-bit PCM. Samples are scaled by 32768 and saturated at `i16::MAX`.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let file = BufWriter::new(File::create(path)?);
    let mut writer = hound::WavWriter::new(file, spec).map_err(map_hound)?;
    for &s in &clip.samples {
        let q = (s * PCM_SCALE).round().clamp(f64::from(i16::MIN), f64::from(i16::MAX));
        writer.write_sample(q as i16).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}
