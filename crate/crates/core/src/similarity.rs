//! Word-embedding sentence similarity and the cross-track similarity matrix.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::model::{SegmentId, SpeechSegment};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}:1: malformed header '{header}', expected '<count> <dim>'")]
    Header { path: PathBuf, header: String },
    #[error("{path}:{line}: {reason}")]
    Row {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: header announces {expected} vectors but the file has {found}")]
    Count {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{0}: embedding vocabulary is empty")]
    Empty(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum CosineError {
    #[error("vector dimensions differ: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
}

/// Token to vector lookup, all vectors of one dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn from_vectors(
        dim: usize,
        vectors: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Option<Self> {
        let vectors: HashMap<_, _> = vectors.into_iter().collect();
        if vectors.is_empty() || vectors.values().any(|v| v.len() != dim) {
            return None;
        }
        Some(Self { dim, vectors })
    }

    /// Parses word2vec text format: `<count> <dim>` header, then
    /// `<token> <dim floats>` per line. Duplicate tokens: last one wins.
    pub fn parse(text: &str, path: &Path) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let bad_header = || EmbeddingError::Header {
            path: path.to_owned(),
            header: header.to_owned(),
        };
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(bad_header)?;
        let dim: usize = parts
            .next()
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(bad_header)?;
        if parts.next().is_some() {
            return Err(bad_header());
        }
        if count == 0 {
            return Err(EmbeddingError::Empty(path.to_owned()));
        }
        let mut vectors = HashMap::with_capacity(count);
        let mut rows = 0usize;
        for (i, raw) in lines.enumerate() {
            let line = i + 2;
            if raw.trim().is_empty() {
                continue;
            }
            rows += 1;
            let mut fields = raw.split_whitespace();
            let token = fields.next().expect("non-empty line has a field");
            let values = fields
                .map(str::parse::<f32>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::Row {
                    path: path.to_owned(),
                    line,
                    reason: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(EmbeddingError::Row {
                    path: path.to_owned(),
                    line,
                    reason: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if vectors.insert(token.to_owned(), values).is_some() {
                log::warn!(
                    "{}:{line}: duplicate token '{token}', keeping the last vector",
                    path.display()
                );
            }
        }
        if rows != count {
            return Err(EmbeddingError::Count {
                path: path.to_owned(),
                expected: count,
                found: rows,
            });
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, EmbeddingError> {
    let text = std::fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.to_owned(),
        source,
    })?;
    EmbeddingTable::parse(&text, path)
}

/// Lowercased runs of alphabetic characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Mean of the in-vocabulary token vectors; `None` when no token is covered.
pub fn sentence_vector(text: &str, table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0f64; table.dim()];
    let mut n = 0usize;
    for token in tokenize(text) {
        if let Some(v) = table.get(&token) {
            for (acc, &x) in sum.iter_mut().zip(v) {
                *acc += x as f64;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    sum.iter_mut().for_each(|x| *x /= n as f64);
    Some(sum)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, CosineError> {
    if u.len() != v.len() {
        return Err(CosineError::Dimension(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(CosineError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// A similarity score in `[0, 1]`. `covered` is false when either side had
/// no in-vocabulary token (or a zero sentence vector) and the score is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub covered: bool,
}

impl Score {
    const UNCOVERED: Score = Score {
        value: 0.0,
        covered: false,
    };
}

fn score_vectors(a: Option<&[f64]>, b: Option<&[f64]>) -> Score {
    match (a, b) {
        (Some(a), Some(b)) => match cosine(a, b) {
            Ok(c) => Score {
                value: c.max(0.0),
                covered: true,
            },
            Err(_) => Score::UNCOVERED,
        },
        _ => Score::UNCOVERED,
    }
}

/// Clamped cosine between the sentence vectors of two texts.
pub fn text_score(a: &str, b: &str, table: &EmbeddingTable) -> Score {
    let va = sentence_vector(a, table);
    let vb = sentence_vector(b, table);
    score_vectors(va.as_deref(), vb.as_deref())
}

/// Sparse D1 x D2 score matrix; absent entries were outside the candidate window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: Vec<SegmentId>,
    pub cols: Vec<SegmentId>,
    entries: BTreeMap<(usize, usize), Score>,
}

impl SimilarityMatrix {
    pub fn get(&self, row: usize, col: usize) -> Option<Score> {
        self.entries.get(&(row, col)).copied()
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, Score)> + '_ {
        self.entries
            .range((row, 0)..(row + 1, 0))
            .map(|(&(_, c), &s)| (c, s))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Score)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `row_id\tcol_id\tscore` lines in row-major order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("row_id\tcol_id\tscore\n");
        for (&(r, c), s) in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{:.6}", self.rows[r], self.cols[c], s.value);
        }
        out
    }
}

/// Extra reach of the candidate window beyond `max_start_diff_s`.
pub fn candidate_slack_ms(cfg: &PipelineConfig) -> u64 {
    cfg.max_dur_diff_ms()
}

/// Scores each D1 segment (its translation) against the D2 segments (their
/// transcripts) whose start lies within the candidate window.
/// `d2` must be sorted by start time.
pub fn build_matrix(
    d1: &[SpeechSegment],
    d2: &[SpeechSegment],
    table: &EmbeddingTable,
    cfg: &PipelineConfig,
) -> SimilarityMatrix {
    let reach = cfg.max_start_diff_ms() + candidate_slack_ms(cfg);
    let col_vectors: Vec<Option<Vec<f64>>> = d2
        .par_iter()
        .map(|s| sentence_vector(s.comparison_text(), table))
        .collect();
    let per_row: Vec<Vec<((usize, usize), Score)>> = d1
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let row_vec = sentence_vector(seg.comparison_text(), table);
            let start = seg.span.start_ms();
            let lo = d2.partition_point(|s| s.span.start_ms() + reach < start);
            let hi = d2.partition_point(|s| s.span.start_ms() <= start + reach);
            (lo..hi)
                .map(|j| {
                    (
                        (i, j),
                        score_vectors(row_vec.as_deref(), col_vectors[j].as_deref()),
                    )
                })
                .collect()
        })
        .collect();
    SimilarityMatrix {
        rows: d1.iter().map(|s| s.id.clone()).collect(),
        cols: d2.iter().map(|s| s.id.clone()).collect(),
        entries: per_row.into_iter().flatten().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SegmentLabel, TimeSpan, TrackId, Transcript};

    fn table(text: &str) -> EmbeddingTable {
        EmbeddingTable::parse(text, Path::new("emb.vec")).unwrap()
    }

    #[test]
    fn loads_small_table() {
        let t = table("2 3\ncat 1 0 0\ndog 0 1 0.5\n");
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("dog"), Some(&[0.0, 1.0, 0.5][..]));
    }

    #[test]
    fn rejects_bad_tables() {
        let err = EmbeddingTable::parse("2 3\ncat 1 0 0\ndog 0 1\n", Path::new("e")).unwrap_err();
        assert!(matches!(err, EmbeddingError::Row { line: 3, .. }), "{err}");
        assert!(matches!(
            EmbeddingTable::parse("0 3\n", Path::new("e")),
            Err(EmbeddingError::Empty(_))
        ));
        assert!(matches!(
            EmbeddingTable::parse("two 3\n", Path::new("e")),
            Err(EmbeddingError::Header { .. })
        ));
        assert!(matches!(
            EmbeddingTable::parse("3 1\na 1\n", Path::new("e")),
            Err(EmbeddingError::Count { .. })
        ));
    }

    #[test]
    fn duplicate_token_keeps_last() {
        let t = table("2 1\na 1\na 2\n");
        assert_eq!(t.get("a"), Some(&[2.0][..]));
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_non_letters() {
        assert_eq!(
            tokenize("Merhaba, DÜNYA!42x"),
            vec!["merhaba", "dünya", "x"]
        );
        assert_eq!(tokenize("مرحبا بالعالم"), vec!["مرحبا", "بالعالم"]);
    }

    #[test]
    fn sentence_vectors() {
        let t = table("3 2\nx 1 0\ny 0 1\nz 3 4\n");
        assert_eq!(sentence_vector("z", &t), Some(vec![3.0, 4.0]));
        assert_eq!(sentence_vector("x Y", &t), Some(vec![0.5, 0.5]));
        assert_eq!(sentence_vector("x unknown", &t), Some(vec![1.0, 0.0]));
        assert_eq!(sentence_vector("nothing here", &t), None);
    }

    #[test]
    fn cosine_values() {
        assert_eq!(cosine(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(CosineError::ZeroVector)
        );
        assert_eq!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(CosineError::Dimension(1, 2))
        );
    }

    #[test]
    fn negative_cosine_clamps_to_zero() {
        let t = table("2 1\nup 1\ndown -1\n");
        let s = text_score("up", "down", &t);
        assert_eq!(
            s,
            Score {
                value: 0.0,
                covered: true
            }
        );
        assert!(!text_score("up", "sideways", &t).covered);
    }

    fn seg(track: TrackId, i: usize, start_s: f64, text: &str) -> SpeechSegment {
        SpeechSegment {
            id: crate::model::SegmentId::for_track(&track, i),
            track,
            span: TimeSpan::from_secs(start_s, start_s + 1.0).unwrap(),
            label: SegmentLabel::Male,
            transcript: Transcript::Text(text.into()),
            translation: None,
            language: "ar".into(),
        }
    }

    #[test]
    fn identical_texts_give_unit_diagonal_and_window_prunes() {
        let t = table("3 3\na 1 0 0\nb 0 1 0\nc 0 0 1\n");
        let texts = ["a", "b", "c"];
        let d1: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, x)| seg(TrackId::d1(), i, i as f64 * 30.0, x))
            .collect();
        let d2: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, x)| seg(TrackId::d2(), i, i as f64 * 30.0, x))
            .collect();
        let m = build_matrix(&d1, &d2, &t, &PipelineConfig::default());
        for i in 0..3 {
            assert_eq!(m.get(i, i).unwrap().value, 1.0);
        }
        // 30 s apart exceeds 9 s + 8 s slack.
        assert_eq!(m.len(), 3);
        assert!(m.get(0, 1).is_none());
        assert!(m.to_tsv().contains("D1-00001\tD2-00001\t1.000000"));
        let empty = build_matrix(&d1, &[], &t, &PipelineConfig::default());
        assert!(empty.is_empty());
    }
}
