//! Shared domain types: track ids, millisecond time spans, segment labels
//! and speech segments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("track id must not be empty")]
    EmptyTrackId,
    #[error("invalid time span [{start_ms} ms, {end_ms} ms): end must be after start")]
    InvertedSpan { start_ms: u64, end_ms: u64 },
    #[error("time value {0} is not a finite non-negative number of seconds")]
    BadSeconds(f64),
    #[error("unknown segment label '{0}'")]
    UnknownLabel(String),
}

/// Identifier of one dubbed variant, e.g. `D1` or `D2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TrackId(String);

impl TrackId {
    pub fn new(value: impl Into<String>) -> Result<Self, ModelError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(ModelError::EmptyTrackId);
        }
        Ok(Self(value))
    }

    pub fn d1() -> Self {
        Self("D1".to_owned())
    }

    pub fn d2() -> Self {
        Self("D2".to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TrackId {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TrackId> for String {
    fn from(id: TrackId) -> Self {
        id.0
    }
}

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Converts seconds to whole milliseconds, rounding to nearest.
pub fn secs_to_ms(secs: f64) -> Result<u64, ModelError> {
    if !secs.is_finite() || secs < 0.0 {
        return Err(ModelError::BadSeconds(secs));
    }
    Ok((secs * 1000.0).round() as u64)
}

pub fn ms_to_secs(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Half-open time interval `[start, end)` stored in integer milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpan", into = "RawSpan")]
pub struct TimeSpan {
    start_ms: u64,
    end_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct RawSpan {
    start_ms: u64,
    end_ms: u64,
}

impl TryFrom<RawSpan> for TimeSpan {
    type Error = ModelError;
    fn try_from(raw: RawSpan) -> Result<Self, Self::Error> {
        TimeSpan::new(raw.start_ms, raw.end_ms)
    }
}

impl From<TimeSpan> for RawSpan {
    fn from(span: TimeSpan) -> Self {
        RawSpan {
            start_ms: span.start_ms,
            end_ms: span.end_ms,
        }
    }
}

impl TimeSpan {
    pub fn new(start_ms: u64, end_ms: u64) -> Result<Self, ModelError> {
        if end_ms <= start_ms {
            return Err(ModelError::InvertedSpan { start_ms, end_ms });
        }
        Ok(Self { start_ms, end_ms })
    }

    pub fn from_secs(start_s: f64, end_s: f64) -> Result<Self, ModelError> {
        Self::new(secs_to_ms(start_s)?, secs_to_ms(end_s)?)
    }

    pub fn start_ms(&self) -> u64 {
        self.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn start_s(&self) -> f64 {
        ms_to_secs(self.start_ms)
    }

    pub fn end_s(&self) -> f64 {
        ms_to_secs(self.end_ms)
    }

    pub fn duration_s(&self) -> f64 {
        ms_to_secs(self.duration_ms())
    }

    pub fn overlaps(&self, other: &TimeSpan) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.3}, {:.3})", self.start_s(), self.end_s())
    }
}

/// Label assigned to an audio span by the voice activity segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    #[serde(rename = "female")]
    Female,
    #[serde(rename = "male")]
    Male,
    #[serde(rename = "music")]
    Music,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "noEnergy")]
    NoEnergy,
}

impl SegmentLabel {
    pub const ALL: [SegmentLabel; 5] = [
        SegmentLabel::Female,
        SegmentLabel::Male,
        SegmentLabel::Music,
        SegmentLabel::Noise,
        SegmentLabel::NoEnergy,
    ];

    /// Labels that survive into matching.
    pub const SPEECH: [SegmentLabel; 3] = [
        SegmentLabel::Female,
        SegmentLabel::Male,
        SegmentLabel::Music,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SegmentLabel::Female => "female",
            SegmentLabel::Male => "male",
            SegmentLabel::Music => "music",
            SegmentLabel::Noise => "noise",
            SegmentLabel::NoEnergy => "noEnergy",
        }
    }

    pub fn is_speech(&self) -> bool {
        Self::SPEECH.contains(self)
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentLabel {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ModelError::UnknownLabel(s.to_owned()))
    }
}

/// Transcription result for a segment. `Unrecognized` is a normal outcome,
/// not an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transcript {
    Unrecognized,
    Text(String),
}

impl Transcript {
    pub fn text(&self) -> Option<&str> {
        match self {
            Transcript::Text(t) => Some(t),
            Transcript::Unrecognized => None,
        }
    }

    pub fn is_recognized(&self) -> bool {
        matches!(self, Transcript::Text(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(String);

impl SegmentId {
    /// Ids are zero padded so lexical order equals track order.
    pub fn for_track(track: &TrackId, ordinal: usize) -> Self {
        Self(format!("{}-{:05}", track, ordinal))
    }

    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechSegment {
    pub id: SegmentId,
    pub track: TrackId,
    pub span: TimeSpan,
    pub label: SegmentLabel,
    pub transcript: Transcript,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
    pub language: String,
}

impl SpeechSegment {
    /// Text used for similarity: the translation when present, otherwise the
    /// transcript. Unrecognized segments compare as empty text.
    pub fn comparison_text(&self) -> &str {
        self.translation
            .as_deref()
            .or_else(|| self.transcript.text())
            .unwrap_or("")
    }
}

/// Checks that segments are sorted by start and pairwise disjoint.
pub fn check_ordered(spans: impl IntoIterator<Item = TimeSpan>) -> Result<(), (usize, TimeSpan)> {
    let mut prev: Option<TimeSpan> = None;
    for (i, span) in spans.into_iter().enumerate() {
        if let Some(p) = prev {
            if span.start_ms() < p.end_ms() {
                return Err((i, span));
            }
        }
        prev = Some(span);
    }
    Ok(())
}
