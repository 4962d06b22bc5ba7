//! Pipeline configuration and its flat `section.key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! frames.ssim_threshold = 0.75
//! match.max_start_diff_s = 9
//! ```
//!
//! Absent keys take their defaults. Keys under `input.` and `provider.`
//! describe a run's input files and are handled by [`crate::pipeline`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{secs_to_ms, TrackId};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key '{key}'")]
    Duplicate { line: usize, key: String },
    #[error("unknown config key '{key}' (line {line})")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for '{key}': {reason}")]
    Value { key: String, reason: String },
}

/// Parsed `key = value` lines, keyed by full dotted name.
#[derive(Debug, Clone, Default)]
pub struct ConfigEntries {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigEntries {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: trimmed.to_owned(),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    text: trimmed.to_owned(),
                });
            }
            if entries
                .insert(key.to_owned(), (line, value.trim().to_owned()))
                .is_some()
            {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_owned(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Inserts or replaces `key`; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_owned(), (0, value.into()));
    }

    /// Removes and returns the value for `key`.
    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| ConfigError::Value {
                key: key.to_owned(),
                reason: format!("'{raw}': {e}"),
            }),
        }
    }

    /// Keys starting with `prefix`, in sorted order.
    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }

    /// Fails on the first key left unconsumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(ConfigError::UnknownKey { line, key }),
        }
    }
}

/// Thresholds and knobs for every pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Frames per second of the extracted frame streams.
    pub fps: u32,
    pub ssim_threshold: f64,
    pub search_window_frames: usize,
    /// Anchor the frame search at the last confirmed match instead of at `t`.
    pub drift_compensation: bool,
    /// Compare every k-th frame and propagate the verdict to the skipped ones.
    pub frame_stride: usize,
    pub max_start_diff_s: f64,
    pub max_dur_diff_s: f64,
    pub min_similarity: f64,
    pub max_window_segments: usize,
    pub vad_frame_ms: u32,
    pub vad_hop_ms: u32,
    /// Activity threshold relative to the loudest analysis frame, in dB.
    pub vad_threshold_db: f64,
    pub max_in_flight: usize,
    pub max_retries: usize,
    /// Track whose transcripts are translated into the other track's language.
    pub translate_track: TrackId,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fps: 30,
            ssim_threshold: 0.75,
            search_window_frames: 500,
            drift_compensation: true,
            frame_stride: 1,
            max_start_diff_s: 9.0,
            max_dur_diff_s: 8.0,
            min_similarity: 0.5,
            max_window_segments: 4,
            vad_frame_ms: 25,
            vad_hop_ms: 10,
            vad_threshold_db: -30.0,
            max_in_flight: 4,
            max_retries: 2,
            translate_track: TrackId::d1(),
        }
    }
}

fn range_err(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_owned(),
        reason: reason.into(),
    }
}

impl PipelineConfig {
    pub fn max_start_diff_ms(&self) -> u64 {
        secs_to_ms(self.max_start_diff_s).unwrap_or(0)
    }

    pub fn max_dur_diff_ms(&self) -> u64 {
        secs_to_ms(self.max_dur_diff_s).unwrap_or(0)
    }

    /// Consumes the pipeline keys from `entries`, filling defaults.
    pub fn from_entries(entries: &mut ConfigEntries) -> Result<Self, ConfigError> {
        let d = Self::default();
        let cfg = Self {
            fps: entries.take_parsed("frames.fps")?.unwrap_or(d.fps),
            ssim_threshold: entries
                .take_parsed("frames.ssim_threshold")?
                .unwrap_or(d.ssim_threshold),
            search_window_frames: entries
                .take_parsed("frames.search_window_frames")?
                .unwrap_or(d.search_window_frames),
            drift_compensation: entries
                .take_parsed("frames.drift_compensation")?
                .unwrap_or(d.drift_compensation),
            frame_stride: entries
                .take_parsed("frames.stride")?
                .unwrap_or(d.frame_stride),
            max_start_diff_s: entries
                .take_parsed("match.max_start_diff_s")?
                .unwrap_or(d.max_start_diff_s),
            max_dur_diff_s: entries
                .take_parsed("match.max_dur_diff_s")?
                .unwrap_or(d.max_dur_diff_s),
            min_similarity: entries
                .take_parsed("match.min_similarity")?
                .unwrap_or(d.min_similarity),
            max_window_segments: entries
                .take_parsed("match.max_window_segments")?
                .unwrap_or(d.max_window_segments),
            vad_frame_ms: entries
                .take_parsed("vad.frame_ms")?
                .unwrap_or(d.vad_frame_ms),
            vad_hop_ms: entries.take_parsed("vad.hop_ms")?.unwrap_or(d.vad_hop_ms),
            vad_threshold_db: entries
                .take_parsed("vad.threshold_db")?
                .unwrap_or(d.vad_threshold_db),
            max_in_flight: entries
                .take_parsed("text.max_in_flight")?
                .unwrap_or(d.max_in_flight),
            max_retries: entries
                .take_parsed("text.max_retries")?
                .unwrap_or(d.max_retries),
            translate_track: match entries.take("text.translate_track") {
                Some(raw) => TrackId::new(raw)
                    .map_err(|e| range_err("text.translate_track", e.to_string()))?,
                None => d.translate_track,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = ConfigEntries::parse(text)?;
        let cfg = Self::from_entries(&mut entries)?;
        entries.finish()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(range_err(key, format!("{v} is outside [0, 1]")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(range_err(key, format!("{v} must be a finite value >= 0")))
            }
        };
        let at_least_one = |key: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(range_err(key, "must be >= 1"))
            }
        };
        if self.fps == 0 {
            return Err(range_err("frames.fps", "must be > 0"));
        }
        unit("frames.ssim_threshold", self.ssim_threshold)?;
        at_least_one("frames.search_window_frames", self.search_window_frames)?;
        at_least_one("frames.stride", self.frame_stride)?;
        non_negative("match.max_start_diff_s", self.max_start_diff_s)?;
        non_negative("match.max_dur_diff_s", self.max_dur_diff_s)?;
        unit("match.min_similarity", self.min_similarity)?;
        at_least_one("match.max_window_segments", self.max_window_segments)?;
        if self.vad_frame_ms == 0 || self.vad_hop_ms == 0 {
            return Err(range_err("vad.frame_ms", "frame and hop must be > 0"));
        }
        if !(self.vad_threshold_db.is_finite() && self.vad_threshold_db < 0.0) {
            return Err(range_err("vad.threshold_db", "must be a negative dB value"));
        }
        at_least_one("text.max_in_flight", self.max_in_flight)?;
        Ok(())
    }

    /// Serializes every key; `parse` of the result yields an equal config.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("frames.fps", self.fps.to_string());
        kv("frames.ssim_threshold", self.ssim_threshold.to_string());
        kv(
            "frames.search_window_frames",
            self.search_window_frames.to_string(),
        );
        kv(
            "frames.drift_compensation",
            self.drift_compensation.to_string(),
        );
        kv("frames.stride", self.frame_stride.to_string());
        kv("match.max_start_diff_s", self.max_start_diff_s.to_string());
        kv("match.max_dur_diff_s", self.max_dur_diff_s.to_string());
        kv("match.min_similarity", self.min_similarity.to_string());
        kv(
            "match.max_window_segments",
            self.max_window_segments.to_string(),
        );
        kv("vad.frame_ms", self.vad_frame_ms.to_string());
        kv("vad.hop_ms", self.vad_hop_ms.to_string());
        kv("vad.threshold_db", self.vad_threshold_db.to_string());
        kv("text.max_in_flight", self.max_in_flight.to_string());
        kv("text.max_retries", self.max_retries.to_string());
        kv("text.translate_track", self.translate_track.to_string());
        out
    }
}

/// Loads a config file. Run-description sections (`input.`, `provider.`)
/// are tolerated and ignored here; any other unknown key is an error.
pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let mut entries = ConfigEntries::read(path)?;
    let cfg = PipelineConfig::from_entries(&mut entries)?;
    for key in entries
        .keys_with_prefix("input.")
        .into_iter()
        .chain(entries.keys_with_prefix("provider."))
    {
        entries.take(&key);
    }
    entries.finish()?;
    Ok(cfg)
}
