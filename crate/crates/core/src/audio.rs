//! 16 kHz mono 16-bit PCM tracks: WAV I/O, slicing and timeline compaction.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frames::RemovalMask;
use crate::model::{TimeSpan, TrackId};

pub const SAMPLE_RATE: u32 = 16_000;
const SAMPLES_PER_MS: u64 = (SAMPLE_RATE / 1000) as u64;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: unsupported format ({reason}); expected 16-bit PCM mono at 16 kHz")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Wav { path: PathBuf, source: hound::Error },
    #[error("span {span} lies outside the {duration_ms} ms track {track}")]
    OutOfRange {
        track: TrackId,
        span: TimeSpan,
        duration_ms: u64,
    },
    #[error("audio track {0} is empty")]
    Empty(TrackId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioTrack {
    pub track: TrackId,
    pub samples: Vec<i16>,
}

pub fn ms_to_samples(ms: u64) -> usize {
    (ms * SAMPLES_PER_MS) as usize
}

impl AudioTrack {
    pub fn new(track: TrackId, samples: Vec<i16>) -> Self {
        Self { track, samples }
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    /// Duration rounded down to whole milliseconds.
    pub fn duration_ms(&self) -> u64 {
        self.samples.len() as u64 / SAMPLES_PER_MS
    }

    pub fn read_wav(path: &Path, track: TrackId) -> Result<Self, AudioError> {
        let wav_err = |source| AudioError::Wav {
            path: path.to_owned(),
            source,
        };
        let reader = hound::WavReader::open(path).map_err(wav_err)?;
        let spec = reader.spec();
        let problem = if spec.sample_rate != SAMPLE_RATE {
            Some(format!("sample rate {} Hz", spec.sample_rate))
        } else if spec.channels != 1 {
            Some(format!("{} channels", spec.channels))
        } else if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
            Some(format!("{} bits per sample", spec.bits_per_sample))
        } else {
            None
        };
        if let Some(reason) = problem {
            return Err(AudioError::Format {
                path: path.to_owned(),
                reason,
            });
        }
        let samples = reader
            .into_samples::<i16>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(wav_err)?;
        Ok(Self { track, samples })
    }

    pub fn write_wav(&self, path: &Path) -> Result<(), AudioError> {
        write_wav(path, &self.samples)
    }

    pub fn slice(&self, span: TimeSpan) -> Result<&[i16], AudioError> {
        let (start, end) = (ms_to_samples(span.start_ms()), ms_to_samples(span.end_ms()));
        if end > self.samples.len() {
            return Err(AudioError::OutOfRange {
                track: self.track.clone(),
                span,
                duration_ms: self.duration_ms(),
            });
        }
        Ok(&self.samples[start..end])
    }

    /// Drops the audio under removed frames. Frame `i` owns samples
    /// `[floor(i*sr/fps), floor((i+1)*sr/fps))`; audio past the last frame
    /// follows the last frame's verdict.
    pub fn compact(&self, mask: &RemovalMask) -> AudioTrack {
        let fps = mask.fps as u64;
        let boundary = |i: usize| ((i as u64 * SAMPLE_RATE as u64) / fps) as usize;
        let len = self.samples.len();
        let mut out = Vec::with_capacity(len);
        for (i, &keep) in mask.keep.iter().enumerate() {
            let start = boundary(i).min(len);
            let end = if i + 1 == mask.keep.len() {
                len
            } else {
                boundary(i + 1).min(len)
            };
            if keep {
                out.extend_from_slice(&self.samples[start..end]);
            }
        }
        AudioTrack::new(self.track.clone(), out)
    }
}

pub fn write_wav(path: &Path, samples: &[i16]) -> Result<(), AudioError> {
    let wav_err = |source| AudioError::Wav {
        path: path.to_owned(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    let mut w = writer.get_i16_writer(samples.len() as u32);
    for &s in samples {
        w.write_sample(s);
    }
    w.flush().map_err(wav_err)?;
    writer.finalize().map_err(wav_err)
}
