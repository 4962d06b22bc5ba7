//! Transcription and translation behind pluggable providers, with a
//! persistent JSONL cache so repeated runs never re-call a provider.
//!
//! Providers:
//! * [`FileAsrProvider`] / [`FileMtProvider`]: offline tables keyed by span hash.
//! * [`EchoMtProvider`]: identity translation.
//! * [`HttpAsrProvider`] / [`HttpMtProvider`]: a small JSON-over-HTTP contract
//!   for live services; the bearer token comes from `DUBCORPUS_PROVIDER_TOKEN`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioError, AudioTrack, SAMPLE_RATE};
use crate::model::{SpeechSegment, TimeSpan, TrackId, Transcript};

pub const TOKEN_ENV: &str = "DUBCORPUS_PROVIDER_TOKEN";

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Network or service hiccup; worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider rejected the request: {0}")]
    Rejected(String),
    #[error("segment {0} does not belong to audio track {1}")]
    TrackMismatch(String, TrackId),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}:{line}: {reason}")]
    Table {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

/// Stable 16-hex-digit key for a segment's position on its track.
pub fn span_hash(track: &TrackId, span: TimeSpan) -> String {
    let digest = Sha256::digest(format!("{track}:{}:{}", span.start_ms(), span.end_ms()));
    hex::encode(&digest[..8])
}

pub struct AsrRequest<'a> {
    pub track: &'a TrackId,
    pub span: TimeSpan,
    pub span_hash: &'a str,
    pub language: &'a str,
    pub samples: &'a [i16],
}

pub trait AsrProvider: Sync {
    fn id(&self) -> &str;
    /// Supported language codes; empty means any.
    fn languages(&self) -> Vec<String> {
        Vec::new()
    }
    fn transcribe(&self, request: &AsrRequest<'_>) -> Result<Transcript, ProviderError>;
}

pub struct TranslateRequest<'a> {
    pub span_hash: &'a str,
    pub text: &'a str,
    pub source_language: &'a str,
    pub target_language: &'a str,
}

pub trait MtProvider: Sync {
    fn id(&self) -> &str;
    fn translate(&self, request: &TranslateRequest<'_>) -> Result<String, ProviderError>;
}

/// One line of an offline ASR table. `text: null` marks an explicitly
/// unrecognized segment; segments absent from the table are unrecognized too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrTableRow {
    pub track: TrackId,
    pub span_hash: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: Option<String>,
}

/// One line of an offline MT table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtTableRow {
    pub span_hash: String,
    pub source: String,
    pub target: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ProviderError> {
    let file = File::open(path).map_err(|source| ProviderError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ProviderError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).map_err(|e| ProviderError::Table {
                path: path.to_owned(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(rows)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub struct FileAsrProvider {
    id: String,
    table: HashMap<String, Option<String>>,
}

impl FileAsrProvider {
    pub fn from_rows(id: impl Into<String>, rows: Vec<AsrTableRow>) -> Self {
        Self {
            id: id.into(),
            table: rows.into_iter().map(|r| (r.span_hash, r.text)).collect(),
        }
    }

    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        Ok(Self::from_rows(
            format!("file:{}", file_label(path)),
            read_jsonl(path)?,
        ))
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl AsrProvider for FileAsrProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn transcribe(&self, request: &AsrRequest<'_>) -> Result<Transcript, ProviderError> {
        Ok(match self.table.get(request.span_hash) {
            Some(Some(text)) => Transcript::Text(text.clone()),
            _ => Transcript::Unrecognized,
        })
    }
}

pub struct FileMtProvider {
    id: String,
    by_hash: HashMap<String, String>,
    by_text: HashMap<String, String>,
}

impl FileMtProvider {
    pub fn from_rows(id: impl Into<String>, rows: Vec<MtTableRow>) -> Self {
        let mut by_hash = HashMap::new();
        let mut by_text = HashMap::new();
        for row in rows {
            by_text.insert(row.source, row.target.clone());
            by_hash.insert(row.span_hash, row.target);
        }
        Self {
            id: id.into(),
            by_hash,
            by_text,
        }
    }

    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        Ok(Self::from_rows(
            format!("file:{}", file_label(path)),
            read_jsonl(path)?,
        ))
    }
}

impl MtProvider for FileMtProvider {
    fn id(&self) -> &str {
        &self.id
    }

    /// Looks up by span hash, then by exact source text.
    fn translate(&self, request: &TranslateRequest<'_>) -> Result<String, ProviderError> {
        self.by_hash
            .get(request.span_hash)
            .or_else(|| self.by_text.get(request.text))
            .cloned()
            .ok_or_else(|| {
                ProviderError::Rejected(format!(
                    "no translation for span {} ('{}')",
                    request.span_hash, request.text
                ))
            })
    }
}

pub struct EchoMtProvider;

impl MtProvider for EchoMtProvider {
    fn id(&self) -> &str {
        "echo"
    }

    fn translate(&self, request: &TranslateRequest<'_>) -> Result<String, ProviderError> {
        Ok(request.text.to_owned())
    }
}

/// `POST {endpoint}/transcribe?language=..` with a WAV body, answered by
/// `{"text": "..."}` or `{"text": null}` for unrecognized audio.
pub struct HttpAsrProvider {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

/// `POST {endpoint}/translate` with `{"text","source","target"}`, answered
/// by `{"text": "..."}`.
pub struct HttpMtProvider {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct HttpTextResponse {
    text: Option<String>,
}

fn http_client() -> Result<reqwest::blocking::Client, ProviderError> {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(60))
        .build()
        .map_err(|e| ProviderError::Transport(e.to_string()))
}

fn send(
    builder: reqwest::blocking::RequestBuilder,
    token: Option<&str>,
) -> Result<HttpTextResponse, ProviderError> {
    let builder = match token {
        Some(t) => builder.bearer_auth(t),
        None => builder,
    };
    let response = builder
        .send()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = response.status();
    if status.is_server_error() || status.as_u16() == 429 {
        return Err(ProviderError::Transport(format!("HTTP {status}")));
    }
    if !status.is_success() {
        return Err(ProviderError::Rejected(format!("HTTP {status}")));
    }
    response
        .json()
        .map_err(|e| ProviderError::Rejected(format!("bad response body: {e}")))
}

impl HttpAsrProvider {
    pub fn new(endpoint: impl Into<String>) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            token: std::env::var(TOKEN_ENV).ok(),
            client: http_client()?,
        })
    }
}

fn wav_bytes(samples: &[i16]) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).expect("in-memory writer");
        for &s in samples {
            w.write_sample(s).expect("in-memory write");
        }
        w.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

impl AsrProvider for HttpAsrProvider {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn transcribe(&self, request: &AsrRequest<'_>) -> Result<Transcript, ProviderError> {
        let builder = self
            .client
            .post(format!("{}/transcribe", self.endpoint))
            .query(&[("language", request.language)])
            .header("content-type", "audio/wav")
            .body(wav_bytes(request.samples));
        let body = send(builder, self.token.as_deref())?;
        Ok(match body.text {
            Some(t) if !t.trim().is_empty() => Transcript::Text(t),
            _ => Transcript::Unrecognized,
        })
    }
}

impl HttpMtProvider {
    pub fn new(endpoint: impl Into<String>) -> Result<Self, ProviderError> {
        Ok(Self {
            endpoint: endpoint.into().trim_end_matches('/').to_owned(),
            token: std::env::var(TOKEN_ENV).ok(),
            client: http_client()?,
        })
    }
}

impl MtProvider for HttpMtProvider {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn translate(&self, request: &TranslateRequest<'_>) -> Result<String, ProviderError> {
        let builder = self
            .client
            .post(format!("{}/translate", self.endpoint))
            .json(&serde_json::json!({
                "text": request.text,
                "source": request.source_language,
                "target": request.target_language,
            }));
        send(builder, self.token.as_deref())?
            .text
            .ok_or_else(|| ProviderError::Rejected("translation missing in response".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheKind {
    Asr,
    Mt,
}

/// One cache line: `{"kind","track","span_hash","provider","target_language"?,"value"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub kind: CacheKind,
    pub track: TrackId,
    pub span_hash: String,
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_language: Option<String>,
    pub value: Transcript,
}

type CacheKey = (CacheKind, TrackId, String, String, Option<String>);

impl CacheRecord {
    fn key(&self) -> CacheKey {
        (
            self.kind,
            self.track.clone(),
            self.span_hash.clone(),
            self.provider.clone(),
            self.target_language.clone(),
        )
    }
}

struct StoreInner {
    map: HashMap<CacheKey, Transcript>,
    log: Option<(PathBuf, File)>,
}

/// Provider-result cache backed by an append-only JSONL file.
pub struct TranscriptStore {
    inner: Mutex<StoreInner>,
}

impl TranscriptStore {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(StoreInner {
                map: HashMap::new(),
                log: None,
            }),
        }
    }

    /// Opens (creating if needed) a cache file and replays it. A torn last
    /// line from an interrupted write is skipped.
    pub fn open(path: &Path) -> Result<Self, ProviderError> {
        let io = |source| ProviderError::Io {
            path: path.to_owned(),
            source,
        };
        let mut map = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(io)?;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(line) {
                    Ok(rec) => {
                        map.insert(rec.key(), rec.value);
                    }
                    Err(e) => log::warn!("{}:{}: skipping cache line: {e}", path.display(), i + 1),
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        let len = file.metadata().map_err(io)?.len();
        if len > 0 && !std::fs::read(path).map_err(io)?.ends_with(b"\n") {
            file.write_all(b"\n").map_err(io)?;
        }
        Ok(Self {
            inner: Mutex::new(StoreInner {
                map,
                log: Some((path.to_owned(), file)),
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(
        &self,
        kind: CacheKind,
        track: &TrackId,
        span_hash: &str,
        provider: &str,
        target_language: Option<&str>,
    ) -> Option<Transcript> {
        let key = (
            kind,
            track.clone(),
            span_hash.to_owned(),
            provider.to_owned(),
            target_language.map(str::to_owned),
        );
        self.inner
            .lock()
            .expect("cache lock")
            .map
            .get(&key)
            .cloned()
    }

    pub fn put(&self, record: CacheRecord) -> Result<(), ProviderError> {
        let mut inner = self.inner.lock().expect("cache lock");
        if let Some((path, file)) = inner.log.as_mut() {
            let mut line = serde_json::to_string(&record).expect("cache record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|source| ProviderError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        inner.map.insert(record.key(), record.value);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CallOptions {
    pub max_in_flight: usize,
    pub max_retries: usize,
}

impl Default for CallOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            max_retries: 2,
        }
    }
}

fn with_retries<T>(
    retries: usize,
    mut call: impl FnMut() -> Result<T, ProviderError>,
) -> Result<T, ProviderError> {
    let mut attempt = 0;
    loop {
        match call() {
            Err(e) if e.is_retryable() && attempt < retries => {
                attempt += 1;
                log::warn!("retrying after {e} (attempt {attempt}/{retries})");
            }
            other => return other,
        }
    }
}

/// Runs `f` over `items` on at most `in_flight` workers, keeping order.
fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    in_flight: usize,
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Fills every segment's transcript. Results are cached as they arrive, so
/// a failure part-way keeps the progress made so far.
pub fn transcribe_all(
    segments: Vec<SpeechSegment>,
    audio: &AudioTrack,
    provider: &dyn AsrProvider,
    store: &TranscriptStore,
    options: CallOptions,
) -> Result<Vec<SpeechSegment>, ProviderError> {
    if let Some(seg) = segments.iter().find(|s| s.track != audio.track) {
        return Err(ProviderError::TrackMismatch(
            seg.id.to_string(),
            audio.track.clone(),
        ));
    }
    let results = bounded_map(
        &segments,
        options.max_in_flight,
        |seg| -> Result<Transcript, ProviderError> {
            let hash = span_hash(&seg.track, seg.span);
            if let Some(hit) = store.get(CacheKind::Asr, &seg.track, &hash, provider.id(), None) {
                return Ok(hit);
            }
            let samples = audio.slice(seg.span)?;
            let request = AsrRequest {
                track: &seg.track,
                span: seg.span,
                span_hash: &hash,
                language: &seg.language,
                samples,
            };
            let value = with_retries(options.max_retries, || provider.transcribe(&request))?;
            store.put(CacheRecord {
                kind: CacheKind::Asr,
                track: seg.track.clone(),
                span_hash: hash,
                provider: provider.id().to_owned(),
                target_language: None,
                value: value.clone(),
            })?;
            Ok(value)
        },
    );
    segments
        .into_iter()
        .zip(results)
        .map(|(mut seg, res)| {
            seg.transcript = res?;
            Ok(seg)
        })
        .collect()
}

/// Removes unrecognized segments, preserving order. Returns the removed count.
pub fn drop_unrecognized(segments: Vec<SpeechSegment>) -> (Vec<SpeechSegment>, usize) {
    let before = segments.len();
    let kept: Vec<_> = segments
        .into_iter()
        .filter(|s| s.transcript.is_recognized())
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Translates the transcripts of one track into `target_language`.
pub fn translate_all(
    segments: Vec<SpeechSegment>,
    provider: &dyn MtProvider,
    target_language: &str,
    store: &TranscriptStore,
    options: CallOptions,
) -> Result<Vec<SpeechSegment>, ProviderError> {
    let results = bounded_map(
        &segments,
        options.max_in_flight,
        |seg| -> Result<Option<String>, ProviderError> {
            let text = match seg.transcript.text() {
                Some(t) => t,
                None => return Ok(None),
            };
            if text.trim().is_empty() {
                return Ok(Some(String::new()));
            }
            let hash = span_hash(&seg.track, seg.span);
            if let Some(hit) = store.get(
                CacheKind::Mt,
                &seg.track,
                &hash,
                provider.id(),
                Some(target_language),
            ) {
                return Ok(hit.text().map(str::to_owned));
            }
            let request = TranslateRequest {
                span_hash: &hash,
                text,
                source_language: &seg.language,
                target_language,
            };
            let translated = with_retries(options.max_retries, || provider.translate(&request))?;
            store.put(CacheRecord {
                kind: CacheKind::Mt,
                track: seg.track.clone(),
                span_hash: hash,
                provider: provider.id().to_owned(),
                target_language: Some(target_language.to_owned()),
                value: Transcript::Text(translated.clone()),
            })?;
            Ok(Some(translated))
        },
    );
    segments
        .into_iter()
        .zip(results)
        .map(|(mut seg, res)| {
            seg.translation = res?;
            Ok(seg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SegmentId, SegmentLabel};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn seg(i: usize, start: u64, end: u64) -> SpeechSegment {
        SpeechSegment {
            id: SegmentId::for_track(&TrackId::d1(), i),
            track: TrackId::d1(),
            span: TimeSpan::new(start, end).unwrap(),
            label: SegmentLabel::Male,
            transcript: Transcript::Unrecognized,
            translation: None,
            language: "tr".into(),
        }
    }

    fn audio() -> AudioTrack {
        AudioTrack::new(TrackId::d1(), vec![0; 16_000 * 10])
    }

    fn row(s: &SpeechSegment, text: Option<&str>) -> AsrTableRow {
        AsrTableRow {
            track: s.track.clone(),
            span_hash: span_hash(&s.track, s.span),
            start_ms: s.span.start_ms(),
            end_ms: s.span.end_ms(),
            text: text.map(str::to_owned),
        }
    }

    /// Counts calls and fails with a transport error on chosen segments.
    struct Flaky {
        inner: FileAsrProvider,
        calls: AtomicUsize,
        fail_on: Option<String>,
    }

    impl AsrProvider for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn transcribe(&self, r: &AsrRequest<'_>) -> Result<Transcript, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_on.as_deref() == Some(r.span_hash) {
                return Err(ProviderError::Transport("connection reset".into()));
            }
            self.inner.transcribe(r)
        }
    }

    #[test]
    fn span_hash_is_stable() {
        let h = span_hash(&TrackId::d1(), TimeSpan::new(1000, 3000).unwrap());
        assert_eq!(h.len(), 16);
        assert_eq!(
            h,
            span_hash(&TrackId::d1(), TimeSpan::new(1000, 3000).unwrap())
        );
        assert_ne!(
            h,
            span_hash(&TrackId::d2(), TimeSpan::new(1000, 3000).unwrap())
        );
    }

    #[test]
    fn fills_transcripts_and_marks_missing_unrecognized() {
        let segs = vec![seg(0, 0, 1000), seg(1, 1500, 2500), seg(2, 3000, 4000)];
        let provider = FileAsrProvider::from_rows(
            "t",
            vec![row(&segs[0], Some("bir")), row(&segs[2], Some("üç"))],
        );
        let store = TranscriptStore::in_memory();
        let out =
            transcribe_all(segs, &audio(), &provider, &store, CallOptions::default()).unwrap();
        assert_eq!(out[0].transcript, Transcript::Text("bir".into()));
        assert_eq!(out[1].transcript, Transcript::Unrecognized);
        assert_eq!(out[2].transcript, Transcript::Text("üç".into()));
        let (kept, removed) = drop_unrecognized(out);
        assert_eq!(removed, 1);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[1].id.as_str(), "D1-00002");
    }

    #[test]
    fn drop_unrecognized_edge_cases() {
        let (all, removed) = drop_unrecognized(vec![seg(0, 0, 10), seg(1, 10, 20)]);
        assert!(all.is_empty());
        assert_eq!(removed, 2);
        let mut s = seg(0, 0, 10);
        s.transcript = Transcript::Text("x".into());
        let (same, removed) = drop_unrecognized(vec![s.clone()]);
        assert_eq!((same, removed), (vec![s], 0));
    }

    #[test]
    fn transport_error_keeps_partial_progress_and_cache_avoids_recalls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache.jsonl");
        let segs: Vec<_> = (0..6)
            .map(|i| seg(i, i as u64 * 1000, i as u64 * 1000 + 800))
            .collect();
        let rows = segs.iter().map(|s| row(s, Some("söz"))).collect::<Vec<_>>();
        let bad_hash = span_hash(&segs[3].track, segs[3].span);
        let flaky = Flaky {
            inner: FileAsrProvider::from_rows("t", rows.clone()),
            calls: AtomicUsize::new(0),
            fail_on: Some(bad_hash),
        };
        {
            let store = TranscriptStore::open(&cache).unwrap();
            let err = transcribe_all(
                segs.clone(),
                &audio(),
                &flaky,
                &store,
                CallOptions::default(),
            )
            .unwrap_err();
            assert!(err.is_retryable());
            assert_eq!(store.len(), 5);
        }
        // 5 successes + 3 attempts on the failing segment.
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 8);

        let healthy = Flaky {
            inner: FileAsrProvider::from_rows("t", rows),
            calls: AtomicUsize::new(0),
            fail_on: None,
        };
        let store = TranscriptStore::open(&cache).unwrap();
        let out = transcribe_all(
            segs.clone(),
            &audio(),
            &healthy,
            &store,
            CallOptions::default(),
        )
        .unwrap();
        assert!(out.iter().all(|s| s.transcript.is_recognized()));
        assert_eq!(healthy.calls.load(Ordering::SeqCst), 1);

        let store = TranscriptStore::open(&cache).unwrap();
        transcribe_all(segs, &audio(), &healthy, &store, CallOptions::default()).unwrap();
        assert_eq!(healthy.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn rejects_segments_from_another_track() {
        let mut s = seg(0, 0, 100);
        s.track = TrackId::d2();
        let provider = FileAsrProvider::from_rows("t", vec![]);
        let err = transcribe_all(
            vec![s],
            &audio(),
            &provider,
            &TranscriptStore::in_memory(),
            CallOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ProviderError::TrackMismatch(..)));
    }

    struct CountingEcho(AtomicUsize);
    impl MtProvider for CountingEcho {
        fn id(&self) -> &str {
            "count-echo"
        }
        fn translate(&self, r: &TranslateRequest<'_>) -> Result<String, ProviderError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            EchoMtProvider.translate(r)
        }
    }

    #[test]
    fn translation_variants() {
        let mut a = seg(0, 0, 1000);
        a.transcript = Transcript::Text("merhaba".into());
        let mut b = seg(1, 1000, 2000);
        b.transcript = Transcript::Text("   ".into());
        let store = TranscriptStore::in_memory();
        let echo = CountingEcho(AtomicUsize::new(0));
        let out = translate_all(
            vec![a.clone(), b.clone()],
            &echo,
            "ar",
            &store,
            CallOptions::default(),
        )
        .unwrap();
        assert_eq!(out[0].translation.as_deref(), Some("merhaba"));
        assert_eq!(out[1].translation.as_deref(), Some(""));
        assert_eq!(echo.0.load(Ordering::SeqCst), 1);

        let table = FileMtProvider::from_rows(
            "mt",
            vec![MtTableRow {
                span_hash: span_hash(&a.track, a.span),
                source: "merhaba".into(),
                target: "مرحبا".into(),
            }],
        );
        let out = translate_all(
            vec![a.clone()],
            &table,
            "ar",
            &store,
            CallOptions::default(),
        )
        .unwrap();
        assert_eq!(out[0].translation.as_deref(), Some("مرحبا"));

        let mut c = seg(2, 5000, 6000);
        c.transcript = Transcript::Text("yok".into());
        assert!(matches!(
            translate_all(vec![c], &table, "ar", &store, CallOptions::default()),
            Err(ProviderError::Rejected(_))
        ));
    }

    #[test]
    fn asr_table_rows_parse_from_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("asr.jsonl");
        let s = seg(0, 0, 1000);
        write_jsonl(&p, &[row(&s, Some("bir")), row(&seg(1, 1000, 2000), None)]).unwrap();
        let provider = FileAsrProvider::open(&p).unwrap();
        assert_eq!(provider.id(), "file:asr.jsonl");
        std::fs::write(&p, "{not json}\n").unwrap();
        assert!(matches!(
            FileAsrProvider::open(&p),
            Err(ProviderError::Table { line: 1, .. })
        ));
    }

    #[test]
    fn torn_cache_line_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let rec = CacheRecord {
            kind: CacheKind::Asr,
            track: TrackId::d1(),
            span_hash: "abc".into(),
            provider: "p".into(),
            target_language: None,
            value: Transcript::Text("x".into()),
        };
        let mut text = serde_json::to_string(&rec).unwrap();
        text.push_str("\n{\"kind\":\"as");
        std::fs::write(&p, text).unwrap();
        let store = TranscriptStore::open(&p).unwrap();
        assert_eq!(store.len(), 1);
        store
            .put(CacheRecord {
                span_hash: "def".into(),
                ..rec.clone()
            })
            .unwrap();
        assert_eq!(TranscriptStore::open(&p).unwrap().len(), 2);
        assert_eq!(
            store.get(CacheKind::Asr, &TrackId::d1(), "abc", "p", None),
            Some(Transcript::Text("x".into()))
        );
    }
}
