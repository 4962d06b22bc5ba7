//! Corpus export (one WAV per pair side plus a JSONL manifest) and yield statistics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioError, AudioTrack};
use crate::config::PipelineConfig;
use crate::matcher::{MatchOutcome, PairKind, PairMember, SegmentPair};
use crate::model::{SegmentId, SegmentLabel, SpeechSegment, TimeSpan, TrackId};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const AUDIO_DIR: &str = "audio";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("pair {pair} references unknown segment {segment}")]
    UnknownSegment { pair: String, segment: SegmentId },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("input duration is zero")]
    ZeroInput,
    #[error("no statistics rows to report")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSide {
    pub track: TrackId,
    pub language: String,
    pub label: SegmentLabel,
    pub segments: Vec<SegmentId>,
    pub spans: Vec<TimeSpan>,
    pub transcripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
    /// Relative to the manifest's directory.
    pub audio: String,
}

impl ManifestSide {
    pub fn duration_ms(&self) -> u64 {
        self.spans.iter().map(|s| s.duration_ms()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifestEntry {
    pub pair_id: String,
    pub kind: PairKind,
    pub score: f64,
    pub left: ManifestSide,
    pub right: ManifestSide,
}

fn side(
    pair: &SegmentPair,
    members: &[PairMember],
    index: &HashMap<&SegmentId, &SpeechSegment>,
    audio_name: String,
) -> Result<ManifestSide, CorpusError> {
    let segs = members
        .iter()
        .map(|m| {
            index
                .get(&m.id)
                .copied()
                .ok_or_else(|| CorpusError::UnknownSegment {
                    pair: pair.id.clone(),
                    segment: m.id.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let translations: Vec<&str> = segs
        .iter()
        .filter_map(|s| s.translation.as_deref())
        .collect();
    Ok(ManifestSide {
        track: segs[0].track.clone(),
        language: segs[0].language.clone(),
        label: pair.label,
        segments: members.iter().map(|m| m.id.clone()).collect(),
        spans: members.iter().map(|m| m.span).collect(),
        transcripts: segs
            .iter()
            .map(|s| s.transcript.text().unwrap_or_default().to_owned())
            .collect(),
        translation: (!translations.is_empty()).then(|| translations.join(" ")),
        audio: audio_name,
    })
}

fn concat(track: &AudioTrack, spans: &[TimeSpan]) -> Result<Vec<i16>, AudioError> {
    let mut out = Vec::new();
    for &span in spans {
        out.extend_from_slice(track.slice(span)?);
    }
    Ok(out)
}

/// Writes `audio/<pair>_left.wav`, `audio/<pair>_right.wav` and the manifest
/// under `out_dir`. Returns the manifest path.
pub fn export_pairs(
    outcome: &MatchOutcome,
    segments: (&[SpeechSegment], &[SpeechSegment]),
    audio: (&AudioTrack, &AudioTrack),
    out_dir: &Path,
) -> Result<PathBuf, CorpusError> {
    let audio_dir = out_dir.join(AUDIO_DIR);
    std::fs::create_dir_all(&audio_dir).map_err(|source| CorpusError::Io {
        path: audio_dir.clone(),
        source,
    })?;
    let index: HashMap<&SegmentId, &SpeechSegment> = segments
        .0
        .iter()
        .chain(segments.1)
        .map(|s| (&s.id, s))
        .collect();
    let entries = outcome
        .pairs
        .par_iter()
        .map(|pair| {
            let left_name = format!("{AUDIO_DIR}/{}_left.wav", pair.id);
            let right_name = format!("{AUDIO_DIR}/{}_right.wav", pair.id);
            let left = side(pair, &pair.left, &index, left_name)?;
            let right = side(pair, &pair.right, &index, right_name)?;
            audio::write_wav(&out_dir.join(&left.audio), &concat(audio.0, &left.spans)?)?;
            audio::write_wav(&out_dir.join(&right.audio), &concat(audio.1, &right.spans)?)?;
            Ok(PairManifestEntry {
                pair_id: pair.id.clone(),
                kind: pair.kind,
                score: pair.score,
                left,
                right,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let mut text = String::new();
    for e in &entries {
        text.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        text.push('\n');
    }
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|source| CorpusError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

pub fn load_manifest(path: &Path) -> Result<Vec<PairManifestEntry>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
                path: path.to_owned(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Inventory of the cleaned inputs a statistics row is computed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsInputs {
    pub language_pair: String,
    /// Cleaned duration per track; D1's is the yield reference.
    pub input_duration_ms: [u64; 2],
    pub input_segments: [usize; 2],
}

impl StatsInputs {
    pub fn from_segments(
        language_pair: impl Into<String>,
        input_duration_ms: [u64; 2],
        d1: &[SpeechSegment],
        d2: &[SpeechSegment],
    ) -> Self {
        Self {
            language_pair: language_pair.into(),
            input_duration_ms,
            input_segments: [d1.len(), d2.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub language_pair: String,
    pub input_duration_ms: [u64; 2],
    pub input_segments: [usize; 2],
    pub max_start_diff_s: f64,
    pub max_dur_diff_s: f64,
    pub output_segments: [usize; 2],
    /// Paired duration per side.
    pub output_side_ms: [u64; 2],
    pub avg_similarity: Option<f64>,
}

impl CorpusStats {
    /// Mean of the two sides' paired durations.
    pub fn output_duration_s(&self) -> f64 {
        (self.output_side_ms[0] + self.output_side_ms[1]) as f64 / 2000.0
    }

    pub fn input_duration_s(&self) -> f64 {
        self.input_duration_ms[0] as f64 / 1000.0
    }

    pub fn percent_yield(&self) -> f64 {
        100.0 * (self.output_side_ms[0] + self.output_side_ms[1]) as f64
            / (2 * self.input_duration_ms[0]) as f64
    }

    /// Percent truncated to an integer.
    pub fn percent_compat(&self) -> u64 {
        let out = (self.output_side_ms[0] + self.output_side_ms[1]) as u128;
        (out * 100 / (2 * self.input_duration_ms[0] as u128)) as u64
    }
}

pub fn compute_stats(
    outcome: &MatchOutcome,
    inputs: &StatsInputs,
    cfg: &PipelineConfig,
) -> Result<CorpusStats, StatsError> {
    if inputs.input_duration_ms[0] == 0 {
        return Err(StatsError::ZeroInput);
    }
    Ok(CorpusStats {
        language_pair: inputs.language_pair.clone(),
        input_duration_ms: inputs.input_duration_ms,
        input_segments: inputs.input_segments,
        max_start_diff_s: cfg.max_start_diff_s,
        max_dur_diff_s: cfg.max_dur_diff_s,
        output_segments: [outcome.left_segment_count(), outcome.right_segment_count()],
        output_side_ms: [
            outcome
                .pairs
                .iter()
                .map(SegmentPair::left_duration_ms)
                .sum(),
            outcome
                .pairs
                .iter()
                .map(SegmentPair::right_duration_ms)
                .sum(),
        ],
        avg_similarity: outcome.mean_score(),
    })
}

pub fn human_duration(secs: f64) -> String {
    if secs >= 3600.0 {
        format!("{:.1} hrs", secs / 3600.0)
    } else if secs >= 60.0 {
        format!("{:.1} mins", secs / 60.0)
    } else {
        format!("{secs:.1} s")
    }
}

fn threshold(secs: f64) -> String {
    format!("<={secs}")
}

const HEADERS: [&str; 9] = [
    "Lang.",
    "Input Duration",
    "Input Segments",
    "Dif Start Time",
    "Dif Dur",
    "Output Segments",
    "Output Duration",
    "Avg Similarity",
    "Percent",
];

const FOOTER: &str = "Output duration is the mean of the two sides' paired durations. \
Bracketed percent is truncated to an integer.";

fn row_cells(s: &CorpusStats) -> [String; 9] {
    [
        s.language_pair.clone(),
        human_duration(s.input_duration_s()),
        format!("{};{}", s.input_segments[0], s.input_segments[1]),
        threshold(s.max_start_diff_s),
        threshold(s.max_dur_diff_s),
        format!("{};{}", s.output_segments[0], s.output_segments[1]),
        human_duration(s.output_duration_s()),
        s.avg_similarity.map_or("-".into(), |v| format!("{v:.2}")),
        format!("{:.1}% [{}%]", s.percent_yield(), s.percent_compat()),
    ]
}

/// Aligned nine-column text table with a footer.
pub fn stats_table(rows: &[CorpusStats]) -> Result<String, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Empty);
    }
    let cells: Vec<[String; 9]> = rows.iter().map(row_cells).collect();
    let mut widths = HEADERS.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cols: &mut dyn Iterator<Item = &str>| {
        let padded: Vec<String> = cols.zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut HEADERS.iter().copied());
    for row in &cells {
        line(&mut row.iter().map(String::as_str));
    }
    out.push_str(FOOTER);
    out.push('\n');
    Ok(out)
}

pub fn stats_tsv(rows: &[CorpusStats]) -> Result<String, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut out = String::from(
        "lang\tinput_duration_s\tinput_segments_d1\tinput_segments_d2\tmax_start_diff_s\t\
max_dur_diff_s\toutput_segments_d1\toutput_segments_d2\toutput_duration_s\tavg_similarity\t\
percent\tpercent_compat\n",
    );
    for s in rows {
        let _ = writeln!(
            out,
            "{}\t{:.3}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{}\t{:.1}\t{}",
            s.language_pair,
            s.input_duration_s(),
            s.input_segments[0],
            s.input_segments[1],
            s.max_start_diff_s,
            s.max_dur_diff_s,
            s.output_segments[0],
            s.output_segments[1],
            s.output_duration_s(),
            s.avg_similarity.map_or("".into(), |v| format!("{v:.4}")),
            s.percent_yield(),
            s.percent_compat(),
        );
    }
    Ok(out)
}
