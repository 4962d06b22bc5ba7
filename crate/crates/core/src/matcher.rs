//! Cross-track segment pairing: the start/duration/label/similarity rules,
//! the sliding-window combiner and the chronological greedy matcher.

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::model::{SegmentId, SegmentLabel, SpeechSegment, TimeSpan};
use crate::similarity::{text_score, EmbeddingTable, SimilarityMatrix};

#[derive(Debug, Error)]
pub enum OutcomeError {
    #[error("{path}:{line}: {reason}")]
    Parse {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    OneToOne,
    OneToMany,
    ManyToOne,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::OneToOne => "one_to_one",
            PairKind::OneToMany => "one_to_many",
            PairKind::ManyToOne => "many_to_one",
        }
    }
}

/// Start and summed duration of one side of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub start_ms: u64,
    pub duration_ms: u64,
}

impl Extent {
    pub fn of(spans: impl IntoIterator<Item = TimeSpan>) -> Option<Self> {
        let mut spans = spans.into_iter();
        let first = spans.next()?;
        let rest: u64 = spans.map(|s| s.duration_ms()).sum();
        Some(Self {
            start_ms: first.start_ms(),
            duration_ms: first.duration_ms() + rest,
        })
    }
}

impl From<TimeSpan> for Extent {
    fn from(span: TimeSpan) -> Self {
        Self {
            start_ms: span.start_ms(),
            duration_ms: span.duration_ms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub start: bool,
    pub duration: bool,
    pub label: bool,
    pub similarity: bool,
}

impl RuleVerdict {
    pub fn all(&self) -> bool {
        self.start && self.duration && self.label && self.similarity
    }
}

/// Time thresholds are inclusive, the similarity threshold is strict.
pub fn rules_satisfied(
    left: Extent,
    right: Extent,
    left_label: SegmentLabel,
    right_label: SegmentLabel,
    score: f64,
    cfg: &PipelineConfig,
) -> RuleVerdict {
    RuleVerdict {
        start: left.start_ms.abs_diff(right.start_ms) <= cfg.max_start_diff_ms(),
        duration: left.duration_ms.abs_diff(right.duration_ms) <= cfg.max_dur_diff_ms(),
        label: left_label == right_label,
        similarity: score > cfg.min_similarity,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMember {
    pub id: SegmentId,
    pub span: TimeSpan,
}

impl From<&SpeechSegment> for PairMember {
    fn from(s: &SpeechSegment) -> Self {
        Self {
            id: s.id.clone(),
            span: s.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub id: String,
    pub kind: PairKind,
    pub label: SegmentLabel,
    pub left: Vec<PairMember>,
    pub right: Vec<PairMember>,
    pub score: f64,
    pub rules: RuleVerdict,
}

impl SegmentPair {
    pub fn left_extent(&self) -> Extent {
        Extent::of(self.left.iter().map(|m| m.span)).expect("pair side is non-empty")
    }

    pub fn right_extent(&self) -> Extent {
        Extent::of(self.right.iter().map(|m| m.span)).expect("pair side is non-empty")
    }

    /// Re-evaluates the rules from the stored spans, label and score.
    pub fn recheck(&self, cfg: &PipelineConfig) -> RuleVerdict {
        rules_satisfied(
            self.left_extent(),
            self.right_extent(),
            self.label,
            self.label,
            self.score,
            cfg,
        )
    }

    pub fn left_duration_ms(&self) -> u64 {
        self.left_extent().duration_ms
    }

    pub fn right_duration_ms(&self) -> u64 {
        self.right_extent().duration_ms
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    pub pairs: Vec<SegmentPair>,
    pub unmatched_left: Vec<SegmentId>,
    pub unmatched_right: Vec<SegmentId>,
}

impl MatchOutcome {
    /// Rebuilds the unmatched lists from the full segment inventories.
    pub fn from_pairs(pairs: Vec<SegmentPair>, d1: &[SpeechSegment], d2: &[SpeechSegment]) -> Self {
        let used: std::collections::HashSet<&SegmentId> = pairs
            .iter()
            .flat_map(|p| p.left.iter().chain(&p.right).map(|m| &m.id))
            .collect();
        let unmatched = |segs: &[SpeechSegment]| {
            segs.iter()
                .filter(|s| !used.contains(&s.id))
                .map(|s| s.id.clone())
                .collect()
        };
        let unmatched_left = unmatched(d1);
        let unmatched_right = unmatched(d2);
        Self {
            pairs,
            unmatched_left,
            unmatched_right,
        }
    }

    pub fn mean_score(&self) -> Option<f64> {
        if self.pairs.is_empty() {
            return None;
        }
        Some(self.pairs.iter().map(|p| p.score).sum::<f64>() / self.pairs.len() as f64)
    }

    pub fn left_segment_count(&self) -> usize {
        self.pairs.iter().map(|p| p.left.len()).sum()
    }

    pub fn right_segment_count(&self) -> usize {
        self.pairs.iter().map(|p| p.right.len()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&serde_json::to_string(p).expect("pair serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), OutcomeError> {
        let io = |source| OutcomeError::Io {
            path: path.to_owned(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}

pub fn read_pairs(path: &Path) -> Result<Vec<SegmentPair>, OutcomeError> {
    let io = |source| OutcomeError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(
            serde_json::from_str(&line).map_err(|e| OutcomeError::Parse {
                path: path.to_owned(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(pairs)
}

/// An accepted window: the first `len` candidates combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMatch {
    pub len: usize,
    pub score: f64,
    pub rules: RuleVerdict,
}

/// Grows a window over consecutive `candidates` and returns the smallest
/// one that satisfies every rule against `anchor`. The window text is the
/// members' comparison texts joined by spaces, scored afresh.
pub fn window_combine(
    anchor: &SpeechSegment,
    candidates: &[&SpeechSegment],
    table: &EmbeddingTable,
    cfg: &PipelineConfig,
) -> Option<WindowMatch> {
    let anchor_extent = Extent::from(anchor.span);
    let limit = anchor_extent.duration_ms + cfg.max_dur_diff_ms();
    let first = candidates.first()?;
    if anchor.span.start_ms().abs_diff(first.span.start_ms()) > cfg.max_start_diff_ms() {
        return None;
    }
    let mut text = String::new();
    let mut duration = 0;
    for (k, cand) in candidates.iter().take(cfg.max_window_segments).enumerate() {
        if cand.label != anchor.label {
            return None;
        }
        duration += cand.span.duration_ms();
        if duration > limit {
            return None;
        }
        if k > 0 {
            text.push(' ');
        }
        text.push_str(cand.comparison_text());
        let extent = Extent {
            start_ms: first.span.start_ms(),
            duration_ms: duration,
        };
        if anchor_extent.duration_ms.abs_diff(duration) > cfg.max_dur_diff_ms() {
            continue;
        }
        let score = text_score(anchor.comparison_text(), &text, table).value;
        let rules = rules_satisfied(anchor_extent, extent, anchor.label, cand.label, score, cfg);
        if rules.all() {
            return Some(WindowMatch {
                len: k + 1,
                score,
                rules,
            });
        }
    }
    None
}

/// Ranks candidates: higher score, then smaller start gap, then smaller right index.
fn better(a: (f64, u64, usize), b: (f64, u64, usize)) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

fn run_from<'a>(segs: &'a [SpeechSegment], used: &[bool], start: usize) -> Vec<&'a SpeechSegment> {
    segs[start..]
        .iter()
        .zip(&used[start..])
        .take_while(|(_, &u)| !u)
        .map(|(s, _)| s)
        .collect()
}

/// Chronological greedy over D1: best one-to-one first, then a D1-anchored
/// window over D2, then a D2-anchored window over D1 starting at the current
/// segment. Each segment is used at most once. Non-speech segments are skipped.
pub fn run_matching(
    d1: &[SpeechSegment],
    d2: &[SpeechSegment],
    matrix: &SimilarityMatrix,
    table: &EmbeddingTable,
    cfg: &PipelineConfig,
) -> MatchOutcome {
    let mut used1: Vec<bool> = d1.iter().map(|s| !s.label.is_speech()).collect();
    let mut used2: Vec<bool> = d2.iter().map(|s| !s.label.is_speech()).collect();
    let max_start = cfg.max_start_diff_ms();
    let mut pairs = Vec::new();

    for i in 0..d1.len() {
        if used1[i] {
            continue;
        }
        let anchor = &d1[i];
        let start = anchor.span.start_ms();
        let gap = |j: usize| d2[j].span.start_ms().abs_diff(start);

        let mut best: Option<((f64, u64, usize), RuleVerdict)> = None;
        for (j, s) in matrix.row(i) {
            if used2[j] {
                continue;
            }
            let rules = rules_satisfied(
                anchor.span.into(),
                d2[j].span.into(),
                anchor.label,
                d2[j].label,
                s.value,
                cfg,
            );
            let key = (s.value, gap(j), j);
            if rules.all() && best.is_none_or(|(b, _)| better(key, b)) {
                best = Some((key, rules));
            }
        }
        if let Some(((score, _, j), rules)) = best {
            used1[i] = true;
            used2[j] = true;
            pairs.push(make_pair(
                PairKind::OneToOne,
                vec![anchor],
                vec![&d2[j]],
                score,
                rules,
            ));
            continue;
        }

        let lo = d2.partition_point(|s| s.span.start_ms() + max_start < start);
        let hi = d2.partition_point(|s| s.span.start_ms() <= start + max_start);

        let mut best: Option<((f64, u64, usize), WindowMatch)> = None;
        for j in lo..hi {
            if used2[j] {
                continue;
            }
            let cands = run_from(d2, &used2, j);
            if let Some(w) = window_combine(anchor, &cands, table, cfg) {
                let key = (w.score, gap(j), j);
                if best.is_none_or(|(b, _)| better(key, b)) {
                    best = Some((key, w));
                }
            }
        }
        if let Some(((_, _, j), w)) = best {
            used1[i] = true;
            let right: Vec<_> = (j..j + w.len).map(|k| &d2[k]).collect();
            used2[j..j + w.len].iter_mut().for_each(|u| *u = true);
            let kind = if w.len == 1 {
                PairKind::OneToOne
            } else {
                PairKind::OneToMany
            };
            pairs.push(make_pair(kind, vec![anchor], right, w.score, w.rules));
            continue;
        }

        let lefts = run_from(d1, &used1, i);
        let mut best: Option<((f64, u64, usize), WindowMatch)> = None;
        for j in lo..hi {
            if used2[j] {
                continue;
            }
            if let Some(w) = window_combine(&d2[j], &lefts, table, cfg) {
                let key = (w.score, gap(j), j);
                if best.is_none_or(|(b, _)| better(key, b)) {
                    best = Some((key, w));
                }
            }
        }
        if let Some(((_, _, j), w)) = best {
            used2[j] = true;
            used1[i..i + w.len].iter_mut().for_each(|u| *u = true);
            let kind = if w.len == 1 {
                PairKind::OneToOne
            } else {
                PairKind::ManyToOne
            };
            pairs.push(make_pair(
                kind,
                lefts[..w.len].to_vec(),
                vec![&d2[j]],
                w.score,
                w.rules,
            ));
        }
    }

    for (n, p) in pairs.iter_mut().enumerate() {
        p.id = format!("P{:05}", n + 1);
    }
    MatchOutcome::from_pairs(pairs, d1, d2)
}

fn make_pair(
    kind: PairKind,
    left: Vec<&SpeechSegment>,
    right: Vec<&SpeechSegment>,
    score: f64,
    rules: RuleVerdict,
) -> SegmentPair {
    SegmentPair {
        id: String::new(),
        kind,
        label: left[0].label,
        left: left.into_iter().map(PairMember::from).collect(),
        right: right.into_iter().map(PairMember::from).collect(),
        score,
        rules,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TrackId, Transcript};
    use crate::similarity::build_matrix;

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    fn ext(start_s: f64, dur_s: f64) -> Extent {
        Extent {
            start_ms: (start_s * 1000.0).round() as u64,
            duration_ms: (dur_s * 1000.0).round() as u64,
        }
    }

    #[test]
    fn time_rules_are_inclusive_and_similarity_strict() {
        let m = SegmentLabel::Male;
        let v = rules_satisfied(ext(0.0, 2.0), ext(9.0, 10.0), m, m, 0.51, &cfg());
        assert!(v.all(), "{v:?}");
        let v = rules_satisfied(ext(0.0, 2.0), ext(9.001, 10.0), m, m, 0.51, &cfg());
        assert!(!v.start && v.duration);
        let v = rules_satisfied(ext(0.0, 2.0), ext(0.0, 2.0), m, m, 0.5, &cfg());
        assert_eq!((v.similarity, v.all()), (false, false));
        let v = rules_satisfied(
            ext(0.0, 2.0),
            ext(0.0, 2.0),
            SegmentLabel::Female,
            SegmentLabel::Music,
            1.0,
            &cfg(),
        );
        assert!(!v.label && !v.all());
    }

    fn onehot(vocab: &[&str]) -> EmbeddingTable {
        let dim = vocab.len();
        EmbeddingTable::from_vectors(
            dim,
            vocab.iter().enumerate().map(|(i, w)| {
                let mut v = vec![0.0f32; dim];
                v[i] = 1.0;
                (w.to_string(), v)
            }),
        )
        .unwrap()
    }

    fn seg(
        track: TrackId,
        n: usize,
        start: f64,
        end: f64,
        label: SegmentLabel,
        text: &str,
    ) -> SpeechSegment {
        SpeechSegment {
            id: SegmentId::for_track(&track, n),
            track,
            span: TimeSpan::from_secs(start, end).unwrap(),
            label,
            transcript: Transcript::Text(text.into()),
            translation: None,
            language: "xx".into(),
        }
    }

    #[test]
    fn window_of_two_members_pairs_with_long_anchor() {
        let t = onehot(&["a", "b", "c", "d", "z"]);
        let m = SegmentLabel::Male;
        let anchor = seg(TrackId::d1(), 0, 0.0, 10.0, m, "a b c d");
        let c1 = seg(TrackId::d2(), 0, 0.2, 4.0, m, "a z");
        let c2 = seg(TrackId::d2(), 1, 4.5, 9.8, m, "b c");
        // Alone, the first candidate scores 1/(2*sqrt 2) and fails.
        assert!(window_combine(&anchor, &[&c1], &t, &cfg()).is_none());
        let w = window_combine(&anchor, &[&c1, &c2], &t, &cfg()).unwrap();
        assert_eq!(w.len, 2);
        // mean(a,b,c,d) vs mean(a,z,b,c): 3/4.
        assert!((w.score - 0.75).abs() < 1e-12);
        let far = seg(TrackId::d2(), 1, 4.5, 9.8, m, "z");
        assert!(window_combine(&anchor, &[&far], &t, &cfg()).is_none());
    }

    #[test]
    fn single_acceptable_candidate_is_one_to_one() {
        let t = onehot(&["a", "b"]);
        let m = SegmentLabel::Female;
        let d1 = vec![seg(TrackId::d1(), 0, 1.0, 3.0, m, "a b")];
        let d2 = vec![seg(TrackId::d2(), 0, 1.2, 3.1, m, "a b")];
        let w = window_combine(&d1[0], &[&d2[0]], &t, &cfg()).unwrap();
        assert_eq!(w.len, 1);
        let matrix = build_matrix(&d1, &d2, &t, &cfg());
        let out = run_matching(&d1, &d2, &matrix, &t, &cfg());
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].kind, PairKind::OneToOne);
        assert_eq!(out.pairs[0].id, "P00001");
        assert!(out.unmatched_left.is_empty() && out.unmatched_right.is_empty());
    }

    #[test]
    fn window_stops_at_label_change() {
        let t = onehot(&["a", "b"]);
        let anchor = seg(TrackId::d1(), 0, 0.0, 10.0, SegmentLabel::Male, "a b");
        let c1 = seg(TrackId::d2(), 0, 0.0, 4.0, SegmentLabel::Male, "a");
        let c2 = seg(TrackId::d2(), 1, 4.0, 9.0, SegmentLabel::Music, "b");
        let c3 = seg(TrackId::d2(), 2, 9.0, 10.0, SegmentLabel::Male, "b");
        let cfg = PipelineConfig {
            max_dur_diff_s: 2.0,
            ..cfg()
        };
        assert!(window_combine(&anchor, &[&c1, &c2, &c3], &t, &cfg).is_none());
    }

    #[test]
    fn empty_inputs_give_empty_outcome() {
        let t = onehot(&["a"]);
        let matrix = build_matrix(&[], &[], &t, &cfg());
        assert_eq!(
            run_matching(&[], &[], &matrix, &t, &cfg()),
            MatchOutcome::default()
        );
    }

    #[test]
    fn greedy_prefers_one_to_one_then_many_to_one() {
        let t = onehot(&["a", "b", "c", "d", "e", "f"]);
        let m = SegmentLabel::Male;
        let d1 = vec![
            seg(TrackId::d1(), 0, 0.0, 2.0, m, "a"),
            seg(TrackId::d1(), 1, 20.0, 28.0, m, "b c"),
            seg(TrackId::d1(), 2, 28.5, 37.0, m, "d e"),
        ];
        let d2 = vec![
            seg(TrackId::d2(), 0, 0.5, 2.5, m, "a"),
            seg(TrackId::d2(), 1, 20.5, 37.0, m, "b c d e"),
        ];
        let cfg = PipelineConfig {
            max_dur_diff_s: 4.0,
            ..cfg()
        };
        let matrix = build_matrix(&d1, &d2, &t, &cfg);
        let out = run_matching(&d1, &d2, &matrix, &t, &cfg);
        let kinds: Vec<_> = out.pairs.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![PairKind::OneToOne, PairKind::ManyToOne]);
        assert_eq!(out.pairs[1].left.len(), 2);
        assert!((out.pairs[1].score - 1.0).abs() < 1e-12);
        for p in &out.pairs {
            assert!(p.recheck(&cfg).all());
        }
    }

    #[test]
    fn ties_prefer_smaller_start_gap_then_lower_index() {
        let t = onehot(&["a"]);
        let m = SegmentLabel::Male;
        let d1 = vec![seg(TrackId::d1(), 0, 5.0, 7.0, m, "a")];
        let d2 = vec![
            seg(TrackId::d2(), 0, 3.0, 5.0, m, "a"),
            seg(TrackId::d2(), 1, 6.0, 8.0, m, "a"),
            seg(TrackId::d2(), 2, 8.5, 10.5, m, "a"),
        ];
        let matrix = build_matrix(&d1, &d2, &t, &cfg());
        let out = run_matching(&d1, &d2, &matrix, &t, &cfg());
        assert_eq!(out.pairs[0].right[0].id.as_str(), "D2-00001");
    }

    /// Loosening the start threshold lets the first segment grab a better
    /// partner that the second segment needed, so the pair count drops.
    #[test]
    fn loosening_thresholds_can_reduce_greedy_yield() {
        let t = onehot(&["a", "b", "c"]);
        let m = SegmentLabel::Male;
        let d1 = vec![
            seg(TrackId::d1(), 0, 0.0, 2.0, m, "a"),
            seg(TrackId::d1(), 1, 6.0, 8.0, m, "a b"),
        ];
        let d2 = vec![
            seg(TrackId::d2(), 0, 0.0, 2.0, m, "a c"),
            seg(TrackId::d2(), 1, 6.0, 8.0, m, "a"),
        ];
        let tight = PipelineConfig {
            max_start_diff_s: 3.0,
            ..cfg()
        };
        let loose = PipelineConfig {
            max_start_diff_s: 9.0,
            ..cfg()
        };
        let count = |c: &PipelineConfig| {
            let matrix = build_matrix(&d1, &d2, &t, c);
            run_matching(&d1, &d2, &matrix, &t, c).pairs.len()
        };
        assert_eq!(count(&tight), 2);
        assert_eq!(count(&loose), 1);
    }

    #[test]
    fn outcome_jsonl_round_trip() {
        let t = onehot(&["a", "b"]);
        let m = SegmentLabel::Music;
        let d1 = vec![seg(TrackId::d1(), 0, 1.0, 3.0, m, "a b")];
        let d2 = vec![seg(TrackId::d2(), 0, 1.2, 3.1, m, "a")];
        let matrix = build_matrix(&d1, &d2, &t, &cfg());
        let out = run_matching(&d1, &d2, &matrix, &t, &cfg());
        assert_eq!(out.pairs.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        out.write_jsonl(&path).unwrap();
        let back = MatchOutcome::from_pairs(read_pairs(&path).unwrap(), &d1, &d2);
        assert_eq!(back, out);
    }
}
