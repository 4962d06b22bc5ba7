//! Labeled speech/non-speech spans per track.
//!
//! The primary source is an external neural segmenter whose TSV output
//! (`label\tstart\tstop`, seconds) is ingested as-is. When it is not
//! available, [`energy_vad`] provides a crude activity detector; its output
//! is marked degraded since it cannot tell speakers or music apart.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{ms_to_samples, AudioTrack, SAMPLE_RATE};
use crate::model::{SegmentId, SegmentLabel, SpeechSegment, TimeSpan, TrackId, Transcript};

const MIN_ACTIVE_MS: u64 = 200;
const MERGE_GAP_MS: u64 = 100;

#[derive(Debug, Error)]
pub enum VadError {
    #[error("{path}:{line}: {reason}")]
    Row {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: span {span} overlaps or precedes the previous span")]
    Order {
        path: PathBuf,
        line: usize,
        span: TimeSpan,
    },
    #[error("span {span} exceeds the track duration of {duration_ms} ms")]
    BeyondTrack { span: TimeSpan, duration_ms: u64 },
    #[error("audio for {0} is empty")]
    EmptyAudio(TrackId),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VadReport {
    pub track: TrackId,
    pub segments: Vec<(SegmentLabel, TimeSpan)>,
    /// Set by the energy fallback: speech and music are conflated under one label.
    #[serde(default)]
    pub degraded: bool,
}

impl VadReport {
    /// Parses segmenter TSV text. A leading `labels\tstart\tstop` header is
    /// skipped; `path` only labels error messages.
    pub fn parse(text: &str, track: TrackId, path: &Path) -> Result<Self, VadError> {
        let mut segments: Vec<(SegmentLabel, TimeSpan)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').map(str::trim).collect();
            if i == 0 && matches!(cols.first(), Some(&"labels") | Some(&"label")) {
                continue;
            }
            let bad = |reason: String| VadError::Row {
                path: path.to_owned(),
                line,
                reason,
            };
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 columns, found {}", cols.len())));
            }
            let label: SegmentLabel = cols[0].parse().map_err(|e| bad(format!("{e}")))?;
            let secs = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("'{s}' is not a number")))
            };
            let (start, stop) = (secs(cols[1])?, secs(cols[2])?);
            let span = TimeSpan::from_secs(start, stop).map_err(|e| bad(e.to_string()))?;
            if let Some((_, prev)) = segments.last() {
                if span.start_ms() < prev.end_ms() {
                    return Err(VadError::Order {
                        path: path.to_owned(),
                        line,
                        span,
                    });
                }
            }
            segments.push((label, span));
        }
        Ok(Self {
            track,
            segments,
            degraded: false,
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("labels\tstart\tstop\n");
        for (label, span) in &self.segments {
            let _ = writeln!(out, "{label}\t{:.3}\t{:.3}", span.start_s(), span.end_s());
        }
        out
    }

    pub fn check_within(&self, duration_ms: u64) -> Result<(), VadError> {
        match self.segments.iter().find(|(_, s)| s.end_ms() > duration_ms) {
            Some((_, span)) => Err(VadError::BeyondTrack {
                span: *span,
                duration_ms,
            }),
            None => Ok(()),
        }
    }
}

/// Reads a segmenter TSV file.
pub fn ingest_vad(path: &Path, track: TrackId) -> Result<VadReport, VadError> {
    let text = std::fs::read_to_string(path).map_err(|source| VadError::Io {
        path: path.to_owned(),
        source,
    })?;
    VadReport::parse(&text, track, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyVadParams {
    pub frame_ms: u32,
    pub hop_ms: u32,
    /// Frames within this many dB of the loudest frame count as active.
    pub threshold_db: f64,
}

impl Default for EnergyVadParams {
    fn default() -> Self {
        Self {
            frame_ms: 25,
            hop_ms: 10,
            threshold_db: -30.0,
        }
    }
}

/// Short-time energy detector. Active regions are labeled `male` as a
/// placeholder and the report is flagged degraded; everything else becomes
/// `noEnergy`. The output tiles the whole track.
pub fn energy_vad(audio: &AudioTrack, params: EnergyVadParams) -> Result<VadReport, VadError> {
    if audio.samples.is_empty() {
        return Err(VadError::EmptyAudio(audio.track.clone()));
    }
    let samples = &audio.samples;
    let frame_len = ms_to_samples(params.frame_ms as u64).max(1);
    let hop_len = ms_to_samples(params.hop_ms as u64).max(1);
    let n_frames = if samples.len() <= frame_len {
        1
    } else {
        1 + (samples.len() - frame_len) / hop_len
    };
    let levels: Vec<f64> = (0..n_frames)
        .map(|i| {
            let start = i * hop_len;
            let window = &samples[start..(start + frame_len).min(samples.len())];
            let energy =
                window.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / window.len() as f64;
            10.0 * (energy / (32768.0 * 32768.0)).log10()
        })
        .collect();
    let duration_ms = (samples.len() as u64 * 1000).div_ceil(SAMPLE_RATE as u64);
    let peak = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut active: Vec<(u64, u64)> = Vec::new();
    if peak.is_finite() {
        let cutoff = peak + params.threshold_db;
        let hop = params.hop_ms as u64;
        let frame = params.frame_ms as u64;
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for (i, &db) in levels.iter().enumerate() {
            if db < cutoff {
                continue;
            }
            match runs.last_mut() {
                Some(run) if run.1 + 1 == i => run.1 = i,
                _ => runs.push((i, i)),
            }
        }
        for (first, last) in runs {
            // Onset lies between the end of the last quiet window and the end
            // of the first loud one; offset between the start of the last loud
            // window and the start of the next quiet one. Take midpoints.
            let start = if first == 0 {
                0
            } else {
                (first as u64 * hop + frame).saturating_sub(hop / 2)
            };
            let end = if last + 1 == n_frames {
                duration_ms
            } else {
                last as u64 * hop + hop / 2
            };
            let (start, end) = (start.min(duration_ms), end.min(duration_ms));
            if end <= start {
                continue;
            }
            match active.last_mut() {
                Some(last) if start <= last.1 + MERGE_GAP_MS => last.1 = last.1.max(end),
                _ => active.push((start, end)),
            }
        }
        active.retain(|(s, e)| e - s >= MIN_ACTIVE_MS);
    }

    let mut segments = Vec::new();
    let mut cursor = 0u64;
    for (s, e) in active {
        if s > cursor {
            segments.push((
                SegmentLabel::NoEnergy,
                TimeSpan::new(cursor, s).expect("s > cursor"),
            ));
        }
        segments.push((
            SegmentLabel::Male,
            TimeSpan::new(s, e).expect("non-empty active span"),
        ));
        cursor = e;
    }
    if cursor < duration_ms {
        segments.push((
            SegmentLabel::NoEnergy,
            TimeSpan::new(cursor, duration_ms).expect("cursor < duration"),
        ));
    }
    Ok(VadReport {
        track: audio.track.clone(),
        segments,
        degraded: true,
    })
}

/// Segment counts per label for each track.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelHistogram {
    pub counts: BTreeMap<TrackId, [usize; 5]>,
}

impl LabelHistogram {
    pub fn count(&self, track: &TrackId, label: SegmentLabel) -> usize {
        self.counts.get(track).map_or(0, |c| c[label.index()])
    }
}

impl fmt::Display for LabelHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "track")?;
        for label in SegmentLabel::ALL {
            write!(f, "\t{label}")?;
        }
        writeln!(f)?;
        for (track, counts) in &self.counts {
            write!(f, "{track}")?;
            for c in counts {
                write!(f, "\t{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn label_histogram(reports: &[VadReport]) -> LabelHistogram {
    let mut hist = LabelHistogram::default();
    for report in reports {
        let row = hist.counts.entry(report.track.clone()).or_insert([0; 5]);
        for (label, _) in &report.segments {
            row[label.index()] += 1;
        }
    }
    hist
}

/// Keeps female/male/music spans as speech segments awaiting transcription.
pub fn slice_speech_segments(report: &VadReport, language: &str) -> Vec<SpeechSegment> {
    report
        .segments
        .iter()
        .filter(|(label, _)| label.is_speech())
        .enumerate()
        .map(|(i, (label, span))| SpeechSegment {
            id: SegmentId::for_track(&report.track, i),
            track: report.track.clone(),
            span: *span,
            label: *label,
            transcript: Transcript::Unrecognized,
            translation: None,
            language: language.to_owned(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<VadReport, VadError> {
        VadReport::parse(text, TrackId::d1(), Path::new("test.tsv"))
    }

    const FIVE: &str = "labels\tstart\tstop\nfemale\t0.0\t1.5\nmale\t1.5\t3.2\nmusic\t3.2\t4.0\nnoise\t4.0\t4.4\nnoEnergy\t4.4\t6.0\n";

    #[test]
    fn parses_single_row() {
        let r = parse("male\t0.0\t3.2").unwrap();
        assert_eq!(
            r.segments,
            vec![(SegmentLabel::Male, TimeSpan::new(0, 3200).unwrap())]
        );
    }

    #[test]
    fn rejects_inverted_overlapping_and_unknown() {
        assert!(matches!(
            parse("music\t5.0\t4.0"),
            Err(VadError::Row { line: 1, .. })
        ));
        assert!(matches!(
            parse("male\t0\t2\nfemale\t1\t3"),
            Err(VadError::Order { line: 2, .. })
        ));
        assert!(matches!(
            parse("male\t3\t4\nfemale\t0\t1"),
            Err(VadError::Order { line: 2, .. })
        ));
        let err = parse("male\t0\t1\nspeech\t1\t2").unwrap_err();
        assert!(err.to_string().contains("test.tsv:2"), "{err}");
        assert!(matches!(parse("male\t0\tx"), Err(VadError::Row { .. })));
    }

    #[test]
    fn five_label_file() {
        let r = parse(FIVE).unwrap();
        assert_eq!(r.segments.len(), 5);
        let hist = label_histogram(std::slice::from_ref(&r));
        for label in SegmentLabel::ALL {
            assert_eq!(hist.count(&TrackId::d1(), label), 1);
        }
        let speech = slice_speech_segments(&r, "tr");
        let labels: Vec<_> = speech.iter().map(|s| s.label).collect();
        assert_eq!(
            labels,
            vec![
                SegmentLabel::Female,
                SegmentLabel::Male,
                SegmentLabel::Music
            ]
        );
        assert_eq!(speech[2].id.as_str(), "D1-00002");
        assert!(speech
            .iter()
            .all(|s| s.transcript == Transcript::Unrecognized));
    }

    #[test]
    fn histogram_shows_no_energy_asymmetry() {
        let a = parse("male\t0\t1\nnoEnergy\t1\t2\nmale\t2\t3").unwrap();
        let mut b =
            VadReport::parse("male\t0\t1\nmale\t1.2\t3", TrackId::d2(), Path::new("b")).unwrap();
        b.track = TrackId::d2();
        let hist = label_histogram(&[a, b]);
        assert_eq!(hist.count(&TrackId::d1(), SegmentLabel::NoEnergy), 1);
        assert_eq!(hist.count(&TrackId::d2(), SegmentLabel::NoEnergy), 0);
        assert_eq!(hist.count(&TrackId::d2(), SegmentLabel::Male), 2);
        assert_eq!(label_histogram(&[]).counts.len(), 0);
        let empty = parse("").unwrap();
        assert_eq!(label_histogram(&[empty]).counts[&TrackId::d1()], [0; 5]);
    }

    #[test]
    fn non_speech_only_report_yields_no_segments() {
        let r = parse("noise\t0\t1\nnoEnergy\t1\t2").unwrap();
        assert!(slice_speech_segments(&r, "ar").is_empty());
    }

    #[test]
    fn within_track_check() {
        let r = parse(FIVE).unwrap();
        assert!(r.check_within(6000).is_ok());
        assert!(r.check_within(5999).is_err());
    }

    fn tone(secs: f64, dbfs: f64) -> Vec<i16> {
        let amp = 32767.0 * 10f64.powf(dbfs / 20.0);
        let n = (secs * SAMPLE_RATE as f64) as usize;
        (0..n)
            .map(|i| {
                let t = i as f64 / SAMPLE_RATE as f64;
                (amp * (2.0 * std::f64::consts::PI * 440.0 * t).sin()).round() as i16
            })
            .collect()
    }

    fn silence(secs: f64) -> Vec<i16> {
        vec![0; (secs * SAMPLE_RATE as f64) as usize]
    }

    fn active_spans(r: &VadReport) -> Vec<TimeSpan> {
        r.segments
            .iter()
            .filter(|(l, _)| *l != SegmentLabel::NoEnergy)
            .map(|(_, s)| *s)
            .collect()
    }

    #[test]
    fn silent_track_is_one_no_energy_span() {
        let audio = AudioTrack::new(TrackId::d1(), silence(2.0));
        let r = energy_vad(&audio, EnergyVadParams::default()).unwrap();
        assert_eq!(
            r.segments,
            vec![(SegmentLabel::NoEnergy, TimeSpan::new(0, 2000).unwrap())]
        );
        assert!(r.degraded);
        assert!(energy_vad(
            &AudioTrack::new(TrackId::d1(), vec![]),
            EnergyVadParams::default()
        )
        .is_err());
    }

    #[test]
    fn padded_tone_gives_one_active_span() {
        let mut s = silence(1.0);
        s.extend(tone(2.0, -3.0));
        s.extend(silence(1.0));
        let r = energy_vad(
            &AudioTrack::new(TrackId::d1(), s),
            EnergyVadParams::default(),
        )
        .unwrap();
        let spans = active_spans(&r);
        assert_eq!(spans.len(), 1);
        assert!(
            (spans[0].start_ms() as i64 - 1000).abs() <= 10,
            "{}",
            spans[0]
        );
        assert!(
            (spans[0].end_ms() as i64 - 3000).abs() <= 10,
            "{}",
            spans[0]
        );
    }

    #[test]
    fn alternating_tone_and_silence() {
        let mut s = Vec::new();
        for _ in 0..3 {
            s.extend(tone(1.0, -6.0));
            s.extend(silence(1.0));
        }
        let r = energy_vad(
            &AudioTrack::new(TrackId::d1(), s),
            EnergyVadParams::default(),
        )
        .unwrap();
        assert_eq!(active_spans(&r).len(), 3);
    }

    #[test]
    fn short_blips_are_dropped_and_small_gaps_merged() {
        let mut s = silence(0.5);
        s.extend(tone(0.1, -6.0));
        s.extend(silence(0.5));
        s.extend(tone(0.3, -6.0));
        s.extend(silence(0.05));
        s.extend(tone(0.3, -6.0));
        s.extend(silence(0.5));
        let r = energy_vad(
            &AudioTrack::new(TrackId::d1(), s),
            EnergyVadParams::default(),
        )
        .unwrap();
        let spans = active_spans(&r);
        assert_eq!(spans.len(), 1, "{spans:?}");
        assert!(spans[0].duration_ms() >= 600);
    }

    proptest! {
        #[test]
        fn tsv_round_trip(cuts in proptest::collection::btree_set(0u64..100_000, 2..20),
                          labels in proptest::collection::vec(0usize..5, 20)) {
            let cuts: Vec<u64> = cuts.into_iter().collect();
            let segments: Vec<_> = cuts.windows(2).enumerate()
                .map(|(i, w)| (SegmentLabel::ALL[labels[i]], TimeSpan::new(w[0], w[1]).unwrap()))
                .collect();
            let report = VadReport { track: TrackId::d1(), segments, degraded: false };
            prop_assert_eq!(parse(&report.to_tsv()).unwrap(), report);
        }

        #[test]
        fn energy_output_tiles_the_track(chunks in proptest::collection::vec((0u8..2, 1u32..40), 1..12)) {
            let mut s = Vec::new();
            for (kind, len) in chunks {
                let secs = len as f64 * 0.05;
                if kind == 0 { s.extend(silence(secs)) } else { s.extend(tone(secs, -10.0)) }
            }
            prop_assume!(!s.is_empty());
            let audio = AudioTrack::new(TrackId::d1(), s);
            let r = energy_vad(&audio, EnergyVadParams::default()).unwrap();
            let mut cursor = 0;
            for (i, (label, span)) in r.segments.iter().enumerate() {
                prop_assert_eq!(span.start_ms(), cursor);
                if i > 0 {
                    // neighbours never share a label, so gaps only occur at noEnergy
                    prop_assert_ne!(*label, r.segments[i - 1].0);
                }
                cursor = span.end_ms();
            }
            prop_assert_eq!(cursor, (audio.samples.len() as u64 * 1000).div_ceil(16_000));
        }
    }
}
