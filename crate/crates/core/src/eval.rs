//! Human evaluation: 3-point ratings, the rating log, evaluation sampling,
//! Cohen's kappa and label/score agreement reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PairManifestEntry;
use crate::model::SegmentLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score {0} is not one of 0, 0.5, 1")]
    InvalidScore(f64),
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("annotator id must not be empty")]
    EmptyAnnotator,
    #[error("requested {requested} pairs but only {available} are eligible")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("the two annotators rated disjoint pair sets")]
    Disjoint,
    #[error("kappa needs at least 2 commonly rated pairs, found {0}")]
    TooFewItems(usize),
    #[error("{path}:{line}: {reason}")]
    Log {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Score {
    Zero,
    Half,
    One,
}

impl Score {
    pub const ALL: [Score; 3] = [Score::One, Score::Half, Score::Zero];

    pub fn value(self) -> f64 {
        match self {
            Score::Zero => 0.0,
            Score::Half => 0.5,
            Score::One => 1.0,
        }
    }

    pub fn is_match(self) -> bool {
        self != Score::Zero
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Score::Zero => "0",
            Score::Half => "0.5",
            Score::One => "1",
        }
    }

    fn slot(self) -> usize {
        match self {
            Score::One => 0,
            Score::Half => 1,
            Score::Zero => 2,
        }
    }
}

impl TryFrom<f64> for Score {
    type Error = EvalError;

    fn try_from(v: f64) -> Result<Self, EvalError> {
        Score::ALL
            .into_iter()
            .find(|s| s.value() == v)
            .ok_or(EvalError::InvalidScore(v))
    }
}

impl Serialize for Score {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Half => s.serialize_f64(0.5),
            Score::Zero => s.serialize_u8(0),
            Score::One => s.serialize_u8(1),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Score::try_from(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub pair_id: String,
    pub annotator: String,
    pub score: Score,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

impl Rating {
    pub fn now(pair_id: impl Into<String>, annotator: impl Into<String>, score: Score) -> Self {
        let timestamp_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        Self {
            pair_id: pair_id.into(),
            annotator: annotator.into(),
            score,
            timestamp_ms,
        }
    }
}

/// Append-only rating log with last-write-wins per (pair, annotator).
#[derive(Debug)]
pub struct RatingStore {
    path: Option<PathBuf>,
    known_pairs: BTreeSet<String>,
    ratings: BTreeMap<(String, String), Rating>,
}

impl RatingStore {
    pub fn in_memory(known_pairs: impl IntoIterator<Item = String>) -> Self {
        Self {
            path: None,
            known_pairs: known_pairs.into_iter().collect(),
            ratings: BTreeMap::new(),
        }
    }

    /// Replays the log at `path` (created if missing). A torn final line is ignored.
    pub fn open(
        path: &Path,
        known_pairs: impl IntoIterator<Item = String>,
    ) -> Result<Self, EvalError> {
        let io = |source| EvalError::Io {
            path: path.to_owned(),
            source,
        };
        let mut store = Self {
            path: Some(path.to_owned()),
            ..Self::in_memory(known_pairs)
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;
        let lines: Vec<&str> = text.lines().collect();
        let complete = text.is_empty() || text.ends_with('\n');
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Rating>(line) {
                Ok(r) => {
                    store
                        .ratings
                        .insert((r.pair_id.clone(), r.annotator.clone()), r);
                }
                Err(_) if !complete && i + 1 == lines.len() => {
                    log::warn!("{}: ignoring torn final line", path.display());
                }
                Err(e) => {
                    return Err(EvalError::Log {
                        path: path.to_owned(),
                        line: i + 1,
                        reason: e.to_string(),
                    })
                }
            }
        }
        if !complete {
            file.seek(SeekFrom::End(0)).map_err(io)?;
            file.write_all(b"\n").map_err(io)?;
        }
        Ok(store)
    }

    pub fn knows(&self, pair_id: &str) -> bool {
        self.known_pairs.contains(pair_id)
    }

    pub fn known_pairs(&self) -> &BTreeSet<String> {
        &self.known_pairs
    }

    /// Validates, appends to the log and upserts.
    pub fn record(&mut self, rating: Rating) -> Result<(), EvalError> {
        if rating.annotator.trim().is_empty() {
            return Err(EvalError::EmptyAnnotator);
        }
        if !self.knows(&rating.pair_id) {
            return Err(EvalError::UnknownPair(rating.pair_id));
        }
        if let Some(path) = &self.path {
            let io = |source| EvalError::Io {
                path: path.clone(),
                source,
            };
            let mut line = serde_json::to_string(&rating).expect("rating serializes");
            line.push('\n');
            let mut f = OpenOptions::new().append(true).open(path).map_err(io)?;
            f.write_all(line.as_bytes()).map_err(io)?;
            f.sync_data().map_err(io)?;
        }
        self.ratings
            .insert((rating.pair_id.clone(), rating.annotator.clone()), rating);
        Ok(())
    }

    /// Rewrites the log with one line per (pair, annotator).
    pub fn compact(&self) -> Result<(), EvalError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let io = |source| EvalError::Io {
            path: path.clone(),
            source,
        };
        let tmp = path.with_extension("jsonl.tmp");
        let mut f = File::create(&tmp).map_err(io)?;
        for r in self.ratings.values() {
            writeln!(
                f,
                "{}",
                serde_json::to_string(r).expect("rating serializes")
            )
            .map_err(io)?;
        }
        f.sync_all().map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> Vec<Rating> {
        self.ratings.values().cloned().collect()
    }

    pub fn has_rated(&self, pair_id: &str, annotator: &str) -> bool {
        self.ratings
            .contains_key(&(pair_id.to_owned(), annotator.to_owned()))
    }

    pub fn by_annotator(&self, annotator: &str) -> BTreeMap<String, Score> {
        self.ratings
            .values()
            .filter(|r| r.annotator == annotator)
            .map(|r| (r.pair_id.clone(), r.score))
            .collect()
    }
}

pub fn read_ratings(path: &Path) -> Result<Vec<Rating>, EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut latest = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Rating>(&line) {
            Ok(r) => {
                latest.insert((r.pair_id.clone(), r.annotator.clone()), r);
            }
            Err(e) => {
                return Err(EvalError::Log {
                    path: path.to_owned(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(latest.into_values().collect())
}

/// Inclusive bounds on both sides' durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DurationFilter {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl DurationFilter {
    pub fn accepts(&self, e: &PairManifestEntry) -> bool {
        [e.left.duration_ms(), e.right.duration_ms()]
            .iter()
            .all(|d| (self.min_ms..=self.max_ms).contains(d))
    }
}

/// Seeded uniform sample without replacement; ids returned sorted.
pub fn sample_pairs(
    entries: &[PairManifestEntry],
    n: usize,
    seed: u64,
    filter: Option<DurationFilter>,
) -> Result<Vec<String>, EvalError> {
    let eligible: Vec<&PairManifestEntry> = entries
        .iter()
        .filter(|e| filter.is_none_or(|f| f.accepts(e)))
        .collect();
    if n > eligible.len() {
        return Err(EvalError::NotEnoughPairs {
            requested: n,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<String> = rand::seq::index::sample(&mut rng, eligible.len(), n)
        .into_iter()
        .map(|i| eligible[i].pair_id.clone())
        .collect();
    ids.sort();
    Ok(ids)
}

/// Cohen's kappa over the pairs both annotators rated.
pub fn cohen_kappa(
    a: &BTreeMap<String, Score>,
    b: &BTreeMap<String, Score>,
) -> Result<f64, EvalError> {
    let common: Vec<(Score, Score)> = a
        .iter()
        .filter_map(|(k, &sa)| b.get(k).map(|&sb| (sa, sb)))
        .collect();
    if common.is_empty() && !a.is_empty() && !b.is_empty() {
        return Err(EvalError::Disjoint);
    }
    if common.len() < 2 {
        return Err(EvalError::TooFewItems(common.len()));
    }
    let n = common.len() as f64;
    let mut table = [[0usize; 3]; 3];
    for (x, y) in &common {
        table[x.slot()][y.slot()] += 1;
    }
    let p_o = (0..3).map(|k| table[k][k]).sum::<usize>() as f64 / n;
    let p_e: f64 = (0..3)
        .map(|k| {
            let row: usize = table[k].iter().sum();
            let col: usize = table.iter().map(|r| r[k]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if p_e == 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Counts per score, ordered 1, 0.5, 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub one: usize,
    pub half: usize,
    pub zero: usize,
}

impl ScoreCounts {
    fn add(&mut self, s: Score) {
        match s {
            Score::One => self.one += 1,
            Score::Half => self.half += 1,
            Score::Zero => self.zero += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.one + self.half + self.zero
    }

    /// Share of ratings counted as a match (1 or 0.5).
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| (self.one + self.half) as f64 / total as f64)
    }

    pub fn get(&self, s: Score) -> usize {
        match s {
            Score::One => self.one,
            Score::Half => self.half,
            Score::Zero => self.zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorSummary {
    pub counts: ScoreCounts,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEntry {
    pub a: String,
    pub b: String,
    pub common_items: usize,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub counts: ScoreCounts,
    pub by_label: BTreeMap<String, ScoreCounts>,
    pub accuracy: Option<f64>,
    pub per_annotator: BTreeMap<String, AnnotatorSummary>,
    /// Pairs rated by two or more annotators, scored by the lowest rating.
    pub consensus: AnnotatorSummary,
    pub kappa: Vec<KappaEntry>,
}

pub fn agreement_report(
    ratings: &[Rating],
    labels: &HashMap<String, SegmentLabel>,
) -> AgreementReport {
    let mut counts = ScoreCounts::default();
    let mut by_label: BTreeMap<String, ScoreCounts> = BTreeMap::new();
    let mut per: BTreeMap<String, BTreeMap<String, Score>> = BTreeMap::new();
    let mut per_pair: BTreeMap<&str, Vec<Score>> = BTreeMap::new();
    for r in ratings {
        counts.add(r.score);
        if let Some(label) = labels.get(&r.pair_id) {
            by_label
                .entry(label.as_str().to_owned())
                .or_default()
                .add(r.score);
        }
        per.entry(r.annotator.clone())
            .or_default()
            .insert(r.pair_id.clone(), r.score);
        per_pair.entry(&r.pair_id).or_default().push(r.score);
    }
    let per_annotator = per
        .iter()
        .map(|(name, scores)| {
            let mut c = ScoreCounts::default();
            scores.values().for_each(|&s| c.add(s));
            let summary = AnnotatorSummary {
                counts: c,
                accuracy: c.accuracy(),
            };
            (name.clone(), summary)
        })
        .collect();
    let mut consensus = ScoreCounts::default();
    for scores in per_pair.values().filter(|s| s.len() >= 2) {
        consensus.add(*scores.iter().min().expect("non-empty"));
    }
    let names: Vec<&String> = per.keys().collect();
    let mut kappa = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (sa, sb) = (&per[*a], &per[*b]);
            kappa.push(KappaEntry {
                a: (*a).clone(),
                b: (*b).clone(),
                common_items: sa.keys().filter(|k| sb.contains_key(*k)).count(),
                kappa: cohen_kappa(sa, sb).ok(),
            });
        }
    }
    AgreementReport {
        counts,
        by_label,
        accuracy: counts.accuracy(),
        per_annotator,
        consensus: AnnotatorSummary {
            counts: consensus,
            accuracy: consensus.accuracy(),
        },
        kappa,
    }
}

impl AgreementReport {
    /// Score-by-label table.
    pub fn to_table(&self) -> String {
        let labels: Vec<&str> = SegmentLabel::SPEECH.iter().map(|l| l.as_str()).collect();
        let mut out = format!("Score\ttotal\t{}\n", labels.join("\t"));
        for s in Score::ALL {
            let cells: Vec<String> = labels
                .iter()
                .map(|l| self.by_label.get(*l).map_or(0, |c| c.get(s)).to_string())
                .collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                s.as_str(),
                self.counts.get(s),
                cells.join("\t")
            ));
        }
        let pct = |v: Option<f64>| v.map_or("-".into(), |a| format!("{:.1}%", a * 100.0));
        out.push_str(&format!("accuracy\t{}\n", pct(self.accuracy)));
        for (name, s) in &self.per_annotator {
            out.push_str(&format!("accuracy[{name}]\t{}\n", pct(s.accuracy)));
        }
        out.push_str(&format!(
            "accuracy[consensus]\t{}\n",
            pct(self.consensus.accuracy)
        ));
        for k in &self.kappa {
            let v = k.kappa.map_or("-".into(), |v| format!("{v:.4}"));
            out.push_str(&format!("kappa[{},{}]\t{v}\n", k.a, k.b));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(values: &[f64]) -> BTreeMap<String, Score> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("P{i:05}"), Score::try_from(v).unwrap()))
            .collect()
    }

    #[test]
    fn score_set_is_closed() {
        assert!(matches!(
            Score::try_from(0.7),
            Err(EvalError::InvalidScore(_))
        ));
        let r: Result<Rating, _> = serde_json::from_str(
            r#"{"pair_id":"P1","annotator":"a","score":0.7,"timestamp_ms":0}"#,
        );
        assert!(r.is_err());
        let r: Rating = serde_json::from_str(
            r#"{"pair_id":"P1","annotator":"a","score":0.5,"timestamp_ms":0}"#,
        )
        .unwrap();
        assert_eq!(r.score, Score::Half);
        assert_eq!(serde_json::to_string(&Score::One).unwrap(), "1");
    }

    #[test]
    fn hand_derived_kappa() {
        let a = scores(&[1., 1., 1., 1., 0., 0., 0.5, 0.5, 1., 0.]);
        let b = scores(&[1., 1., 1., 0.5, 0., 0., 0.5, 0.5, 1., 1.]);
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k - 0.43 / 0.63).abs() < 1e-9, "{k}");
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        let ones = scores(&[1.0; 4]);
        let zeros = scores(&[0.0; 4]);
        assert_eq!(cohen_kappa(&ones, &zeros).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&ones, &ones).unwrap(), 1.0);
    }

    #[test]
    fn kappa_input_errors() {
        let a = scores(&[1.0, 0.0]);
        let mut b = BTreeMap::new();
        b.insert("other".to_string(), Score::One);
        assert!(matches!(cohen_kappa(&a, &b), Err(EvalError::Disjoint)));
        let one = scores(&[1.0]);
        assert!(matches!(
            cohen_kappa(&one, &one),
            Err(EvalError::TooFewItems(1))
        ));
    }

    proptest! {
        #[test]
        fn kappa_is_symmetric_and_bounded(
            pairs in prop::collection::vec((0usize..3, 0usize..3), 2..60)
        ) {
            let v = [0.0, 0.5, 1.0];
            let a = scores(&pairs.iter().map(|p| v[p.0]).collect::<Vec<_>>());
            let b = scores(&pairs.iter().map(|p| v[p.1]).collect::<Vec<_>>());
            let kab = cohen_kappa(&a, &b).unwrap();
            let kba = cohen_kappa(&b, &a).unwrap();
            prop_assert!((kab - kba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&kab));
            prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        }
    }

    fn table4() -> (Vec<Rating>, HashMap<String, SegmentLabel>) {
        let rows = [
            (Score::One, [265, 154, 93]),
            (Score::Half, [88, 53, 22]),
            (Score::Zero, [173, 102, 50]),
        ];
        let mut ratings = Vec::new();
        let mut labels = HashMap::new();
        for (score, per_label) in rows {
            for (label, n) in SegmentLabel::SPEECH.iter().zip(per_label) {
                for _ in 0..n {
                    let id = format!("P{:05}", ratings.len());
                    labels.insert(id.clone(), *label);
                    ratings.push(Rating {
                        pair_id: id,
                        annotator: "a".into(),
                        score,
                        timestamp_ms: 0,
                    });
                }
            }
        }
        (ratings, labels)
    }

    #[test]
    fn known_distribution_gives_expected_accuracy() {
        let (ratings, labels) = table4();
        let report = agreement_report(&ratings, &labels);
        assert_eq!(
            (report.counts.one, report.counts.half, report.counts.zero),
            (512, 163, 325)
        );
        assert_eq!(report.accuracy, Some(0.675));
        assert_eq!(report.by_label["female"].one, 265);
        let label_sum: usize = report.by_label.values().map(|c| c.one).sum();
        assert_eq!(label_sum, 512);
        assert!(report.to_table().contains("1\t512\t265\t154\t93"));
    }

    #[test]
    fn report_with_two_annotators() {
        let mut store = RatingStore::in_memory((0..4).map(|i| format!("P{i:05}")));
        for (i, (x, y)) in [(1.0, 1.0), (0.5, 0.0), (0.0, 0.0), (1.0, 0.5)]
            .iter()
            .enumerate()
        {
            let id = format!("P{i:05}");
            store
                .record(Rating::now(&id, "x", Score::try_from(*x).unwrap()))
                .unwrap();
            store
                .record(Rating::now(&id, "y", Score::try_from(*y).unwrap()))
                .unwrap();
        }
        let report = agreement_report(&store.ratings(), &HashMap::new());
        assert_eq!(report.counts.total(), 8);
        assert_eq!(report.per_annotator["x"].accuracy, Some(0.75));
        assert_eq!(report.per_annotator["y"].accuracy, Some(0.5));
        assert_eq!(report.consensus.accuracy, Some(0.5));
        let k = cohen_kappa(&store.by_annotator("x"), &store.by_annotator("y")).unwrap();
        assert_eq!(report.kappa[0].kappa, Some(k));
    }

    #[test]
    fn store_upserts_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        let known = || ["P1".to_string(), "P2".to_string()];
        let mut store = RatingStore::open(&path, known()).unwrap();
        store.record(Rating::now("P1", "a", Score::One)).unwrap();
        store.record(Rating::now("P1", "a", Score::Zero)).unwrap();
        store.record(Rating::now("P2", "a", Score::Half)).unwrap();
        assert!(matches!(
            store.record(Rating::now("P9", "a", Score::One)),
            Err(EvalError::UnknownPair(_))
        ));
        assert_eq!(store.len(), 2);
        let before = agreement_report(&store.ratings(), &HashMap::new());

        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(br#"{"pair_id":"P2","annot"#)
            .unwrap();
        let mut reopened = RatingStore::open(&path, known()).unwrap();
        assert_eq!(reopened.by_annotator("a")["P1"], Score::Zero);
        assert_eq!(
            agreement_report(&reopened.ratings(), &HashMap::new()),
            before
        );
        reopened.record(Rating::now("P2", "b", Score::One)).unwrap();
        reopened.compact().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_ratings(&path).unwrap().len(), 3);
    }

    fn entry(id: &str, left_s: f64, right_s: f64) -> PairManifestEntry {
        use crate::model::{SegmentId, TimeSpan, TrackId};
        let side = |track: TrackId, d: f64| crate::corpus::ManifestSide {
            track,
            language: "x".into(),
            label: SegmentLabel::Male,
            segments: vec![SegmentId::new("s")],
            spans: vec![TimeSpan::from_secs(0.0, d).unwrap()],
            transcripts: vec![String::new()],
            translation: None,
            audio: String::new(),
        };
        PairManifestEntry {
            pair_id: id.into(),
            kind: crate::matcher::PairKind::OneToOne,
            score: 0.9,
            left: side(TrackId::d1(), left_s),
            right: side(TrackId::d2(), right_s),
        }
    }

    #[test]
    fn sampling_is_seeded_and_filtered() {
        let entries: Vec<_> = (0..50)
            .map(|i| entry(&format!("P{i:05}"), 3.0, 4.0))
            .collect();
        let a = sample_pairs(&entries, 10, 7, None).unwrap();
        assert_eq!(a, sample_pairs(&entries, 10, 7, None).unwrap());
        assert_ne!(a, sample_pairs(&entries, 10, 8, None).unwrap());
        assert_eq!(sample_pairs(&entries, 50, 1, None).unwrap().len(), 50);
        assert!(sample_pairs(&entries, 51, 1, None).is_err());

        let mixed = vec![
            entry("A", 3.0, 4.0),
            entry("B", 12.0, 9.0),
            entry("C", 5.0, 1.0),
        ];
        let f = DurationFilter {
            min_ms: 2000,
            max_ms: 10_000,
        };
        assert_eq!(sample_pairs(&mixed, 1, 0, Some(f)).unwrap(), vec!["A"]);
        assert!(sample_pairs(&mixed, 2, 0, Some(f)).is_err());
    }
}
