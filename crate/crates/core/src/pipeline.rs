//! Stage orchestration over an output directory, with a ledger that skips
//! stages whose inputs and settings are unchanged.
//!
//! Layout under the output directory:
//!
//! ```text
//! frames/      D1.mask D2.mask summary.txt
//! vad/         D1.wav D2.wav D1.tsv D2.tsv D1.segments.jsonl D2.segments.jsonl summary.txt
//! transcribe/  D1.segments.jsonl D2.segments.jsonl summary.txt
//! translate/   D1.segments.jsonl D2.segments.jsonl summary.txt
//! similarity/  matrix.tsv summary.txt
//! match/       pairs.jsonl summary.txt
//! export/      manifest.jsonl audio/ summary.txt
//! stats/       stats.txt stats.tsv stats.json summary.txt
//! cache/       transcripts.jsonl
//! ledger.json
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{AudioError, AudioTrack};
use crate::config::{ConfigEntries, ConfigError, PipelineConfig};
use crate::corpus::{self, CorpusError, StatsError, StatsInputs};
use crate::frames::{clean_pair, FrameError, FrameManifest, FrameSequence, RemovalMask};
use crate::matcher::{self, MatchOutcome, OutcomeError};
use crate::model::{SpeechSegment, TrackId};
use crate::similarity::{self, EmbeddingError};
use crate::text::{
    self, AsrProvider, CallOptions, EchoMtProvider, FileAsrProvider, FileMtProvider,
    HttpAsrProvider, HttpMtProvider, MtProvider, ProviderError, TranscriptStore,
};
use crate::vad::{self, EnergyVadParams, VadError};

pub const LEDGER_FILE: &str = "ledger.json";
pub const CACHE_FILE: &str = "cache/transcripts.jsonl";
/// The `match.*` settings a match run used, read back by the stats stage.
pub const MATCH_SETTINGS: &str = "settings.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Frames,
    Vad,
    Transcribe,
    Translate,
    Similarity,
    Match,
    Export,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Frames,
        Stage::Vad,
        Stage::Transcribe,
        Stage::Translate,
        Stage::Similarity,
        Stage::Match,
        Stage::Export,
        Stage::Stats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Frames => "frames",
            Stage::Vad => "vad",
            Stage::Transcribe => "transcribe",
            Stage::Translate => "translate",
            Stage::Similarity => "similarity",
            Stage::Match => "match",
            Stage::Export => "export",
            Stage::Stats => "stats",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage '{s}'"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage '{stage}' needs config key '{key}'")]
    MissingInput { stage: Stage, key: &'static str },
    #[error("{path} not found; run the '{run_first}' stage first")]
    MissingArtifact { path: PathBuf, run_first: Stage },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Vad(#[from] VadError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 usage, 3 missing artifact, 4 validation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingInput { .. } => return 2,
            PipelineError::MissingArtifact { .. } => return 3,
            PipelineError::Provider(ProviderError::Transport(_)) => return 1,
            _ => {}
        }
        let mut source: Option<&(dyn std::error::Error + 'static)> = Some(self);
        while let Some(e) = source {
            if let Some(io) = e.downcast_ref::<std::io::Error>() {
                return if io.kind() == std::io::ErrorKind::NotFound {
                    3
                } else {
                    1
                };
            }
            source = e.source();
        }
        4
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    File(PathBuf),
    Http(String),
    Echo,
}

impl ProviderSpec {
    /// `file:<path>` (relative to `base`), `http(s)://...` or `echo`.
    pub fn parse(key: &str, raw: &str, base: &Path) -> Result<Self, ConfigError> {
        if let Some(p) = raw.strip_prefix("file:") {
            Ok(ProviderSpec::File(base.join(p)))
        } else if raw.starts_with("http://") || raw.starts_with("https://") {
            Ok(ProviderSpec::Http(raw.to_owned()))
        } else if raw == "echo" {
            Ok(ProviderSpec::Echo)
        } else {
            Err(ConfigError::Value {
                key: key.to_owned(),
                reason: format!("'{raw}' is not file:<path>, an http(s) URL or 'echo'"),
            })
        }
    }

    fn describe(&self) -> String {
        match self {
            ProviderSpec::File(p) => format!("file:{}", p.display()),
            ProviderSpec::Http(u) => u.clone(),
            ProviderSpec::Echo => "echo".into(),
        }
    }
}

/// Input files and providers of a run, from `input.*` and `provider.*` keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunInputs {
    pub frames: [Option<PathBuf>; 2],
    pub audio: [Option<PathBuf>; 2],
    pub vad: [Option<PathBuf>; 2],
    pub embeddings: Option<PathBuf>,
    pub languages: [Option<String>; 2],
    pub asr: Option<ProviderSpec>,
    pub mt: Option<ProviderSpec>,
}

impl RunInputs {
    /// Consumes the run keys; relative paths resolve against `base`.
    pub fn from_entries(entries: &mut ConfigEntries, base: &Path) -> Result<Self, ConfigError> {
        let mut path = |key: &str| entries.take(key).map(|v| base.join(v));
        let frames = [path("input.frames_d1"), path("input.frames_d2")];
        let audio = [path("input.audio_d1"), path("input.audio_d2")];
        let vad = [path("input.vad_d1"), path("input.vad_d2")];
        let embeddings = path("input.embeddings");
        let languages = [
            entries.take("input.language_d1"),
            entries.take("input.language_d2"),
        ];
        let asr = entries
            .take("provider.asr")
            .map(|v| ProviderSpec::parse("provider.asr", &v, base))
            .transpose()?;
        let mt = entries
            .take("provider.mt")
            .map(|v| ProviderSpec::parse("provider.mt", &v, base))
            .transpose()?;
        if asr == Some(ProviderSpec::Echo) {
            return Err(ConfigError::Value {
                key: "provider.asr".into(),
                reason: "'echo' is only a translation provider".into(),
            });
        }
        Ok(Self {
            frames,
            audio,
            vad,
            embeddings,
            languages,
            asr,
            mt,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub inputs: RunInputs,
}

impl RunConfig {
    /// Builds a run configuration from an optional file plus overrides that
    /// take precedence over it. Relative paths in the file resolve against
    /// the file's directory; override values are used as given.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let (mut entries, base) = match path {
            Some(p) => (
                ConfigEntries::read(p)?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (ConfigEntries::default(), PathBuf::new()),
        };
        for (k, v) in overrides {
            let value = if k.starts_with("input.") && !k.starts_with("input.language") {
                std::env::current_dir()
                    .map(|cwd| cwd.join(v).display().to_string())
                    .unwrap_or_else(|_| v.clone())
            } else if k.starts_with("provider.") && v.starts_with("file:") {
                let p = &v["file:".len()..];
                std::env::current_dir()
                    .map(|cwd| format!("file:{}", cwd.join(p).display()))
                    .unwrap_or_else(|_| v.clone())
            } else {
                v.clone()
            };
            entries.set(k, value);
        }
        let pipeline = PipelineConfig::from_entries(&mut entries)?;
        let inputs = RunInputs::from_entries(&mut entries, &base)?;
        entries.finish()?;
        Ok(Self { pipeline, inputs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    /// Input path to content hash.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub finished_at_ms: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLedger {
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunLedger {
    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(io_err(path)(e)),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(self).expect("ledger serializes");
        write_atomic(path, (json + "\n").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageStatus {
    Ran { elapsed_ms: u64, summary: String },
    UpToDate { summary: String },
}

impl StageStatus {
    pub fn summary(&self) -> &str {
        match self {
            StageStatus::Ran { summary, .. } | StageStatus::UpToDate { summary } => summary,
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_segments(path: &Path, segments: &[SpeechSegment]) -> Result<(), PipelineError> {
    text::write_jsonl(path, segments).map_err(io_err(path))
}

pub fn read_segments(path: &Path) -> Result<Vec<SpeechSegment>, PipelineError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            PipelineError::Validation(format!("{}:{}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn hash_files(paths: &[PathBuf]) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(io_err(p))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

const TRACKS: [&str; 2] = ["D1", "D2"];

fn track(t: usize) -> TrackId {
    if t == 0 {
        TrackId::d1()
    } else {
        TrackId::d2()
    }
}

/// One output directory and the configuration that drives it.
pub struct Pipeline {
    out_dir: PathBuf,
    run: RunConfig,
    ledger: RunLedger,
}

impl Pipeline {
    pub fn new(out_dir: &Path, run: RunConfig) -> Result<Self, PipelineError> {
        run.pipeline.validate()?;
        std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let ledger = RunLedger::read(&out_dir.join(LEDGER_FILE))?;
        Ok(Self {
            out_dir: out_dir.to_owned(),
            run,
            ledger,
        })
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.run.pipeline
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out_dir.join(stage.name())
    }

    pub fn artifact(&self, stage: Stage, name: &str) -> PathBuf {
        self.stage_dir(stage).join(name)
    }

    fn upstream(&self, stage: Stage, name: &str) -> Result<PathBuf, PipelineError> {
        let path = self.artifact(stage, name);
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact {
                path,
                run_first: stage,
            })
        }
    }

    fn require<'a, T>(
        &self,
        stage: Stage,
        key: &'static str,
        v: &'a Option<T>,
    ) -> Result<&'a T, PipelineError> {
        v.as_ref().ok_or(PipelineError::MissingInput { stage, key })
    }

    fn language(&self, stage: Stage, t: usize) -> Result<&str, PipelineError> {
        let key = ["input.language_d1", "input.language_d2"][t];
        Ok(self
            .require(stage, key, &self.run.inputs.languages[t])?
            .as_str())
    }

    fn translate_index(&self) -> usize {
        usize::from(self.run.pipeline.translate_track == TrackId::d2())
    }

    /// Files a stage reads; missing upstream artifacts surface here.
    fn stage_inputs(&self, stage: Stage) -> Result<Vec<PathBuf>, PipelineError> {
        let inputs = &self.run.inputs;
        let mut out = Vec::new();
        let segs = |st: Stage, out: &mut Vec<PathBuf>| -> Result<(), PipelineError> {
            for t in TRACKS {
                out.push(self.upstream(st, &format!("{t}.segments.jsonl"))?);
            }
            Ok(())
        };
        match stage {
            Stage::Frames => {
                for (t, key) in ["input.frames_d1", "input.frames_d2"]
                    .into_iter()
                    .enumerate()
                {
                    let manifest = self.require(stage, key, &inputs.frames[t])?;
                    let parsed = FrameManifest::read(manifest, track(t))?;
                    out.push(manifest.clone());
                    out.extend(parsed.entries.into_iter().map(|(_, p)| p));
                }
            }
            Stage::Vad => {
                for t in TRACKS {
                    out.push(self.upstream(Stage::Frames, &format!("{t}.mask"))?);
                }
                for (t, key) in ["input.audio_d1", "input.audio_d2"].into_iter().enumerate() {
                    out.push(self.require(stage, key, &inputs.audio[t])?.clone());
                }
                out.extend(inputs.vad.iter().flatten().cloned());
            }
            Stage::Transcribe => {
                segs(Stage::Vad, &mut out)?;
                for t in TRACKS {
                    out.push(self.upstream(Stage::Vad, &format!("{t}.wav"))?);
                }
                if let ProviderSpec::File(p) = self.require(stage, "provider.asr", &inputs.asr)? {
                    out.push(p.clone());
                }
            }
            Stage::Translate => {
                segs(Stage::Transcribe, &mut out)?;
                if let ProviderSpec::File(p) = self.require(stage, "provider.mt", &inputs.mt)? {
                    out.push(p.clone());
                }
            }
            Stage::Similarity | Stage::Match => {
                segs(Stage::Translate, &mut out)?;
                out.push(
                    self.require(stage, "input.embeddings", &inputs.embeddings)?
                        .clone(),
                );
            }
            Stage::Export => {
                out.push(self.upstream(Stage::Match, "pairs.jsonl")?);
                segs(Stage::Translate, &mut out)?;
                for t in TRACKS {
                    out.push(self.upstream(Stage::Vad, &format!("{t}.wav"))?);
                }
            }
            Stage::Stats => {
                out.push(self.upstream(Stage::Match, "pairs.jsonl")?);
                out.push(self.upstream(Stage::Match, MATCH_SETTINGS)?);
                segs(Stage::Translate, &mut out)?;
                for t in TRACKS {
                    out.push(self.upstream(Stage::Frames, &format!("{t}.mask"))?);
                }
            }
        }
        Ok(out)
    }

    /// The settings a stage's output depends on.
    fn stage_settings(&self, stage: Stage) -> String {
        let cfg = self.run.pipeline.to_config_string();
        let section = |prefix: &str| -> String {
            cfg.lines()
                .filter(|l| l.starts_with(prefix))
                .map(|l| format!("{l}\n"))
                .collect()
        };
        let inputs = &self.run.inputs;
        let langs = format!("{:?}", inputs.languages);
        let provider =
            |p: &Option<ProviderSpec>| p.as_ref().map_or(String::new(), ProviderSpec::describe);
        match stage {
            Stage::Frames => section("frames."),
            Stage::Vad => format!("{}{langs}", section("vad.")),
            Stage::Transcribe => provider(&inputs.asr),
            Stage::Translate => format!(
                "{}{}{langs}",
                provider(&inputs.mt),
                section("text.translate_track")
            ),
            Stage::Similarity | Stage::Match => section("match."),
            Stage::Export => String::new(),
            Stage::Stats => langs,
        }
    }

    fn fingerprint(
        &self,
        stage: Stage,
    ) -> Result<(String, BTreeMap<String, String>), PipelineError> {
        let config_hash = hex::encode(Sha256::digest(self.stage_settings(stage)));
        let files = self.stage_inputs(stage)?;
        let mut inputs = BTreeMap::new();
        if stage == Stage::Frames {
            // Thousands of images: one combined hash per track.
            let (m1, rest) = files.split_at(1);
            let n1 = FrameManifest::read(&m1[0], TrackId::d1())?.entries.len();
            let (imgs1, rest) = rest.split_at(n1);
            let (m2, imgs2) = rest.split_at(1);
            inputs.insert(m1[0].display().to_string(), hash_files(&m1[..1])?);
            inputs.insert("frames:D1".into(), hash_files(imgs1)?);
            inputs.insert(m2[0].display().to_string(), hash_files(&m2[..1])?);
            inputs.insert("frames:D2".into(), hash_files(imgs2)?);
        } else {
            for f in files {
                let h = hash_files(std::slice::from_ref(&f))?;
                inputs.insert(f.display().to_string(), h);
            }
        }
        Ok((config_hash, inputs))
    }

    /// Runs `stage` unless its ledger record matches the current inputs and
    /// settings and its output directory still exists.
    pub fn run_stage(&mut self, stage: Stage, force: bool) -> Result<StageStatus, PipelineError> {
        let (config_hash, inputs) = self.fingerprint(stage)?;
        let dir = self.stage_dir(stage);
        if let Some(rec) = self.ledger.stages.get(stage.name()) {
            if rec.config_hash != config_hash {
                log::warn!("settings for stage '{stage}' changed since its last run; rerunning");
            } else if !force && rec.inputs == inputs && dir.is_dir() {
                let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap_or_default();
                return Ok(StageStatus::UpToDate { summary });
            }
        }
        let started = Instant::now();
        let staging = self.out_dir.join(format!(".{}.staging", stage.name()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        std::fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        let summary = self.execute(stage, &staging)?;
        std::fs::write(staging.join("summary.txt"), &summary).map_err(io_err(&staging))?;
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        std::fs::rename(&staging, &dir).map_err(io_err(&dir))?;
        let elapsed_ms = started.elapsed().as_millis() as u64;
        let finished_at_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        self.ledger.stages.insert(
            stage.name().to_owned(),
            StageRecord {
                config_hash,
                inputs,
                outputs: vec![stage.name().to_owned()],
                finished_at_ms,
                elapsed_ms,
            },
        );
        self.ledger.write(&self.out_dir.join(LEDGER_FILE))?;
        Ok(StageStatus::Ran {
            elapsed_ms,
            summary,
        })
    }

    /// Every stage in order.
    pub fn run_all(&mut self, force: bool) -> Result<Vec<(Stage, StageStatus)>, PipelineError> {
        Stage::ALL
            .into_iter()
            .map(|s| self.run_stage(s, force).map(|st| (s, st)))
            .collect()
    }

    fn execute(&self, stage: Stage, out: &Path) -> Result<String, PipelineError> {
        match stage {
            Stage::Frames => self.frames(out),
            Stage::Vad => self.vad(out),
            Stage::Transcribe => self.transcribe(out),
            Stage::Translate => self.translate(out),
            Stage::Similarity => self.similarity(out),
            Stage::Match => self.matching(out),
            Stage::Export => self.export(out),
            Stage::Stats => self.stats(out),
        }
    }

    fn frames(&self, out: &Path) -> Result<String, PipelineError> {
        let cfg = &self.run.pipeline;
        let mut seqs = Vec::new();
        for (t, key) in ["input.frames_d1", "input.frames_d2"]
            .into_iter()
            .enumerate()
        {
            let path = self.require(Stage::Frames, key, &self.run.inputs.frames[t])?;
            let manifest = FrameManifest::read(path, track(t))?;
            if manifest.fps != cfg.fps {
                return Err(PipelineError::Validation(format!(
                    "{} declares {} fps but frames.fps is {}",
                    path.display(),
                    manifest.fps,
                    cfg.fps
                )));
            }
            seqs.push(FrameSequence::load(&manifest)?);
        }
        let report = clean_pair(&seqs[0], &seqs[1], cfg)?;
        report.d1.write(&out.join("D1.mask"))?;
        report.d2.write(&out.join("D2.mask"))?;
        Ok(report.summary() + "\n")
    }

    fn masks(&self) -> Result<[RemovalMask; 2], PipelineError> {
        let read = |t: usize| -> Result<RemovalMask, PipelineError> {
            let path = self.upstream(Stage::Frames, &format!("{}.mask", TRACKS[t]))?;
            Ok(RemovalMask::read(&path, track(t))?)
        };
        Ok([read(0)?, read(1)?])
    }

    fn vad(&self, out: &Path) -> Result<String, PipelineError> {
        let cfg = &self.run.pipeline;
        let masks = self.masks()?;
        let mut reports = Vec::new();
        let mut summary = String::new();
        for (t, key) in ["input.audio_d1", "input.audio_d2"].into_iter().enumerate() {
            let path = self.require(Stage::Vad, key, &self.run.inputs.audio[t])?;
            let language = self.language(Stage::Vad, t)?;
            let cleaned = AudioTrack::read_wav(path, track(t))?.compact(&masks[t]);
            cleaned.write_wav(&out.join(format!("{}.wav", TRACKS[t])))?;
            let report = match &self.run.inputs.vad[t] {
                Some(tsv) => {
                    let r = vad::ingest_vad(tsv, track(t))?;
                    r.check_within(cleaned.duration_ms())?;
                    r
                }
                None => {
                    let params = EnergyVadParams {
                        frame_ms: cfg.vad_frame_ms,
                        hop_ms: cfg.vad_hop_ms,
                        threshold_db: cfg.vad_threshold_db,
                    };
                    vad::energy_vad(&cleaned, params)?
                }
            };
            if report.degraded {
                summary.push_str(&format!(
                    "{}: energy fallback; speech and music are both labelled male\n",
                    TRACKS[t]
                ));
            }
            std::fs::write(out.join(format!("{}.tsv", TRACKS[t])), report.to_tsv())
                .map_err(io_err(out))?;
            let segments = vad::slice_speech_segments(&report, language);
            write_segments(
                &out.join(format!("{}.segments.jsonl", TRACKS[t])),
                &segments,
            )?;
            summary.push_str(&format!(
                "{}: {:.3} s cleaned audio, {} speech segments\n",
                TRACKS[t],
                cleaned.duration_ms() as f64 / 1000.0,
                segments.len()
            ));
            reports.push(report);
        }
        summary.push_str(&vad::label_histogram(&reports).to_string());
        Ok(summary)
    }

    fn options(&self) -> CallOptions {
        CallOptions {
            max_in_flight: self.run.pipeline.max_in_flight,
            max_retries: self.run.pipeline.max_retries,
        }
    }

    fn store(&self) -> Result<TranscriptStore, PipelineError> {
        let path = self.out_dir.join(CACHE_FILE);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        Ok(TranscriptStore::open(&path)?)
    }

    fn transcribe(&self, out: &Path) -> Result<String, PipelineError> {
        let provider: Box<dyn AsrProvider> =
            match self.require(Stage::Transcribe, "provider.asr", &self.run.inputs.asr)? {
                ProviderSpec::File(p) => Box::new(FileAsrProvider::open(p)?),
                ProviderSpec::Http(url) => Box::new(HttpAsrProvider::new(url.clone())?),
                ProviderSpec::Echo => {
                    return Err(PipelineError::Validation(
                        "echo cannot transcribe audio".into(),
                    ))
                }
            };
        let store = self.store()?;
        let mut summary = String::new();
        for (t, name) in TRACKS.into_iter().enumerate() {
            let segs =
                read_segments(&self.upstream(Stage::Vad, &format!("{name}.segments.jsonl"))?)?;
            let audio = AudioTrack::read_wav(
                &self.upstream(Stage::Vad, &format!("{name}.wav"))?,
                track(t),
            )?;
            let done =
                text::transcribe_all(segs, &audio, provider.as_ref(), &store, self.options())?;
            let total = done.len();
            let (kept, removed) = text::drop_unrecognized(done);
            write_segments(&out.join(format!("{name}.segments.jsonl")), &kept)?;
            summary.push_str(&format!(
                "{name}: {total} segments transcribed, {removed} unrecognized removed, {} kept\n",
                kept.len()
            ));
        }
        Ok(summary)
    }

    fn translate(&self, out: &Path) -> Result<String, PipelineError> {
        let provider: Box<dyn MtProvider> =
            match self.require(Stage::Translate, "provider.mt", &self.run.inputs.mt)? {
                ProviderSpec::File(p) => Box::new(FileMtProvider::open(p)?),
                ProviderSpec::Http(url) => Box::new(HttpMtProvider::new(url.clone())?),
                ProviderSpec::Echo => Box::new(EchoMtProvider),
            };
        let source = self.translate_index();
        let target_language = self.language(Stage::Translate, 1 - source)?.to_owned();
        let store = self.store()?;
        let mut summary = String::new();
        for (t, name) in TRACKS.into_iter().enumerate() {
            let segs = read_segments(
                &self.upstream(Stage::Transcribe, &format!("{name}.segments.jsonl"))?,
            )?;
            let segs = if t == source {
                let n = segs.len();
                let done = text::translate_all(
                    segs,
                    provider.as_ref(),
                    &target_language,
                    &store,
                    self.options(),
                )?;
                summary.push_str(&format!(
                    "{name}: {n} segments translated to {target_language}\n"
                ));
                done
            } else {
                segs
            };
            write_segments(&out.join(format!("{name}.segments.jsonl")), &segs)?;
        }
        Ok(summary)
    }

    fn translated(&self) -> Result<[Vec<SpeechSegment>; 2], PipelineError> {
        let read = |name: &str| {
            read_segments(&self.upstream(Stage::Translate, &format!("{name}.segments.jsonl"))?)
        };
        Ok([read("D1")?, read("D2")?])
    }

    fn embeddings(&self, stage: Stage) -> Result<similarity::EmbeddingTable, PipelineError> {
        let path = self.require(stage, "input.embeddings", &self.run.inputs.embeddings)?;
        Ok(similarity::load_embeddings(path)?)
    }

    fn similarity(&self, out: &Path) -> Result<String, PipelineError> {
        let [d1, d2] = self.translated()?;
        let table = self.embeddings(Stage::Similarity)?;
        let matrix = similarity::build_matrix(&d1, &d2, &table, &self.run.pipeline);
        std::fs::write(out.join("matrix.tsv"), matrix.to_tsv()).map_err(io_err(out))?;
        let uncovered = matrix.iter().filter(|(_, s)| !s.covered).count();
        Ok(format!(
            "{} x {} segments, {} candidate entries, {} without vocabulary coverage\n",
            d1.len(),
            d2.len(),
            matrix.len(),
            uncovered
        ))
    }

    fn matching(&self, out: &Path) -> Result<String, PipelineError> {
        let cfg = &self.run.pipeline;
        let [d1, d2] = self.translated()?;
        let table = self.embeddings(Stage::Match)?;
        let matrix = similarity::build_matrix(&d1, &d2, &table, cfg);
        let outcome = matcher::run_matching(&d1, &d2, &matrix, &table, cfg);
        outcome.write_jsonl(&out.join("pairs.jsonl"))?;
        std::fs::write(out.join(MATCH_SETTINGS), self.stage_settings(Stage::Match))
            .map_err(io_err(out))?;
        let count = |k| outcome.pairs.iter().filter(|p| p.kind == k).count();
        Ok(format!(
            "{} pairs ({} one-to-one, {} one-to-many, {} many-to-one), mean score {}\n\
             unmatched: {} D1, {} D2\n",
            outcome.pairs.len(),
            count(matcher::PairKind::OneToOne),
            count(matcher::PairKind::OneToMany),
            count(matcher::PairKind::ManyToOne),
            outcome
                .mean_score()
                .map_or("-".into(), |m| format!("{m:.4}")),
            outcome.unmatched_left.len(),
            outcome.unmatched_right.len()
        ))
    }

    fn outcome(&self) -> Result<(MatchOutcome, [Vec<SpeechSegment>; 2]), PipelineError> {
        let segs = self.translated()?;
        let pairs = matcher::read_pairs(&self.upstream(Stage::Match, "pairs.jsonl")?)?;
        Ok((MatchOutcome::from_pairs(pairs, &segs[0], &segs[1]), segs))
    }

    fn export(&self, out: &Path) -> Result<String, PipelineError> {
        let (outcome, [d1, d2]) = self.outcome()?;
        let a1 = AudioTrack::read_wav(&self.upstream(Stage::Vad, "D1.wav")?, TrackId::d1())?;
        let a2 = AudioTrack::read_wav(&self.upstream(Stage::Vad, "D2.wav")?, TrackId::d2())?;
        corpus::export_pairs(&outcome, (&d1, &d2), (&a1, &a2), out)?;
        Ok(format!("{} pairs exported\n", outcome.pairs.len()))
    }

    fn stats(&self, out: &Path) -> Result<String, PipelineError> {
        let (outcome, [d1, d2]) = self.outcome()?;
        let masks = self.masks()?;
        let ms = |m: &RemovalMask| m.kept_count() as u64 * 1000 / m.fps as u64;
        let lang = |t| -> Result<String, PipelineError> {
            Ok(self.language(Stage::Stats, t)?.to_uppercase())
        };
        let inputs = StatsInputs::from_segments(
            format!("{}-{}", lang(0)?, lang(1)?),
            [ms(&masks[0]), ms(&masks[1])],
            &d1,
            &d2,
        );
        let settings = std::fs::read_to_string(self.upstream(Stage::Match, MATCH_SETTINGS)?)
            .map_err(io_err(&self.stage_dir(Stage::Match)))?;
        let used = PipelineConfig::parse(&settings)?;
        let stats = corpus::compute_stats(&outcome, &inputs, &used)?;
        let table = corpus::stats_table(std::slice::from_ref(&stats))?;
        std::fs::write(out.join("stats.txt"), &table).map_err(io_err(out))?;
        std::fs::write(
            out.join("stats.tsv"),
            corpus::stats_tsv(std::slice::from_ref(&stats))?,
        )
        .map_err(io_err(out))?;
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
        std::fs::write(out.join("stats.json"), json + "\n").map_err(io_err(out))?;
        Ok(table)
    }
}
