//! Seeded synthetic dubbed pairs with known ground truth: block-pattern frames
//! with injected commercial blocks, tone-coded audio, segmenter tables,
//! provider tables, one-hot embeddings and the expected pairs.
//!
//! Everything is generated with integer arithmetic, so a seed reproduces the
//! same bytes on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioError, SAMPLE_RATE};
use crate::frames::{FrameError, FrameImage, FrameManifest};
use crate::matcher::PairKind;
use crate::model::{SegmentId, SegmentLabel, TimeSpan, TrackId};
use crate::text::{span_hash, write_jsonl, AsrTableRow, MtTableRow};
use crate::vad::VadReport;

const CELLS: usize = 4;
const FRAME_NOISE: i32 = 2;
const TONE_AMPLITUDE: i32 = 6000;
const BACKGROUND_NOISE: i32 = 20;
const COMMERCIAL_NOISE: i32 = 3000;
/// Silence kept around decoys so no rule window can reach a planted segment.
const DECOY_ISOLATION_MS: u64 = 12_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("inconsistent synth spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Frames of commercial content inserted into one track before clean frame `at_frame`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommercialBlock {
    pub track: TrackId,
    pub at_frame: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub fps: u32,
    /// Side of the square grayscale frames; a multiple of 4, at least 8.
    pub frame_side: usize,
    /// Frames per content scene.
    pub scene_frames: usize,
    pub one_to_one: usize,
    pub one_to_many: usize,
    pub many_to_one: usize,
    pub decoys: usize,
    /// Segments (spread over both tracks) the recognizer cannot transcribe.
    pub unrecognized: usize,
    pub blocks: Vec<CommercialBlock>,
    pub languages: [String; 2],
}

impl SynthSpec {
    /// 52 planted pairs, 10 decoys and one 300-frame block in D2.
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            fps: 30,
            frame_side: 32,
            scene_frames: 45,
            one_to_one: 44,
            one_to_many: 4,
            many_to_one: 4,
            decoys: 10,
            unrecognized: 4,
            blocks: vec![CommercialBlock {
                track: TrackId::d2(),
                at_frame: 3000,
                frames: 300,
            }],
            languages: ["tr".into(), "ar".into()],
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.fps == 0 {
            return bad("fps must be > 0".into());
        }
        if self.frame_side < 8 || !self.frame_side.is_multiple_of(CELLS) {
            return bad(format!(
                "frame side {} must be a multiple of 4 and >= 8",
                self.frame_side
            ));
        }
        if self.scene_frames == 0 {
            return bad("scene_frames must be > 0".into());
        }
        for b in &self.blocks {
            if b.track != TrackId::d1() && b.track != TrackId::d2() {
                return bad(format!("block track {} is neither D1 nor D2", b.track));
            }
            if b.frames == 0 {
                return bad("commercial block has no frames".into());
            }
            let sr = SAMPLE_RATE as usize;
            if !(b.at_frame * sr).is_multiple_of(self.fps as usize)
                || !(b.frames * sr).is_multiple_of(self.fps as usize)
            {
                return bad(format!(
                    "block at frame {} (+{}) does not fall on a whole audio sample at {} fps",
                    b.at_frame, b.frames, self.fps
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPair {
    pub kind: PairKind,
    pub left: Vec<SegmentId>,
    pub right: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub fps: u32,
    pub clean_frames: usize,
    pub clean_duration_ms: u64,
    /// Per track, the frame indices (in that track's numbering) of commercial content.
    pub removed_frames: BTreeMap<TrackId, Vec<usize>>,
    pub pairs: Vec<TruthPair>,
    pub decoys: Vec<SegmentId>,
    pub unrecognized: Vec<SegmentId>,
}

/// One planted segment on the clean timeline.
#[derive(Debug, Clone)]
struct PlannedSegment {
    track: usize,
    span: TimeSpan,
    label: SegmentLabel,
    /// Vocabulary indices; `None` means unrecognizable.
    tokens: Option<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Role {
    Pair(PairKind, Vec<usize>, Vec<usize>),
    Decoy(usize, usize),
    Unrecognized(usize),
}

#[derive(Debug, Clone)]
struct Plan {
    segments: Vec<PlannedSegment>,
    roles: Vec<Role>,
    vocab: usize,
    duration_ms: u64,
}

#[derive(Clone, Copy)]
enum Unit {
    OneToOne,
    OneToMany,
    ManyToOne,
    DecoyZone(usize),
    Unrecognized,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn make_plan(spec: &SynthSpec) -> Plan {
    let mut rng = stream(spec.seed, 1);
    let mut units: Vec<Unit> = std::iter::repeat_n(Unit::OneToOne, spec.one_to_one)
        .chain(std::iter::repeat_n(Unit::OneToMany, spec.one_to_many))
        .chain(std::iter::repeat_n(Unit::ManyToOne, spec.many_to_one))
        .chain(std::iter::repeat_n(Unit::Unrecognized, spec.unrecognized))
        .collect();
    units.shuffle(&mut rng);
    // Decoys sit in at most two isolated zones.
    let zones = [spec.decoys / 2, spec.decoys - spec.decoys / 2];
    for z in zones.into_iter().filter(|&z| z > 0) {
        let at = rng.gen_range(0..=units.len());
        units.insert(at, Unit::DecoyZone(z));
    }

    let mut plan = Plan {
        segments: Vec::new(),
        roles: Vec::new(),
        vocab: 0,
        duration_ms: 0,
    };
    let fresh = |n: usize, plan: &mut Plan| -> Vec<usize> {
        let start = plan.vocab;
        plan.vocab += n;
        (start..start + n).collect()
    };
    let mut cursor = 2_000u64;
    let mut unrecognized_turn = 0usize;
    for unit in units {
        let label = SegmentLabel::SPEECH[rng.gen_range(0..SegmentLabel::SPEECH.len())];
        let offset = rng.gen_range(0..=400u64);
        let span = |start: u64, dur: u64| TimeSpan::new(start, start + dur).expect("positive span");
        let push = |plan: &mut Plan, track: usize, span: TimeSpan, tokens: Option<Vec<usize>>| {
            plan.segments.push(PlannedSegment {
                track,
                span,
                label,
                tokens,
            });
            plan.segments.len() - 1
        };
        let end = match unit {
            Unit::OneToOne => {
                let d1 = rng.gen_range(2_000..=6_000u64);
                let d2 = (d1 as i64 + rng.gen_range(-800..=800i64)).max(1_500) as u64;
                let shared = fresh(3, &mut plan);
                let own = fresh(2, &mut plan);
                let mut t1 = shared.clone();
                t1.push(own[0]);
                let mut t2 = shared;
                t2.push(own[1]);
                let a = push(&mut plan, 0, span(cursor, d1), Some(t1));
                let b = push(&mut plan, 1, span(cursor + offset, d2), Some(t2));
                plan.roles
                    .push(Role::Pair(PairKind::OneToOne, vec![a], vec![b]));
                (cursor + d1).max(cursor + offset + d2)
            }
            Unit::OneToMany | Unit::ManyToOne => {
                let long = rng.gen_range(16_000..=19_000u64);
                let part = (long - 1_000) / 2;
                let shared = fresh(5, &mut plan);
                let own = fresh(2, &mut plan);
                let mut long_tokens = shared.clone();
                long_tokens.push(own[0]);
                let p1 = shared[..3].to_vec();
                let p2 = vec![shared[3], shared[4], own[1]];
                let (long_track, parts_track, parts_at) = match unit {
                    Unit::OneToMany => (0, 1, cursor + offset),
                    _ => (1, 0, cursor),
                };
                let long_at = if long_track == 0 {
                    cursor
                } else {
                    cursor + offset
                };
                let l = push(
                    &mut plan,
                    long_track,
                    span(long_at, long),
                    Some(long_tokens),
                );
                let a = push(&mut plan, parts_track, span(parts_at, part), Some(p1));
                let b = push(
                    &mut plan,
                    parts_track,
                    span(parts_at + part + 500, part),
                    Some(p2),
                );
                let role = match unit {
                    Unit::OneToMany => Role::Pair(PairKind::OneToMany, vec![l], vec![a, b]),
                    _ => Role::Pair(PairKind::ManyToOne, vec![a, b], vec![l]),
                };
                plan.roles.push(role);
                (long_at + long).max(parts_at + 2 * part + 500)
            }
            Unit::DecoyZone(n) => {
                let mut t = cursor + DECOY_ISOLATION_MS;
                let mut zone_end = t;
                for _ in 0..n {
                    let d1 = rng.gen_range(2_000..=6_000u64);
                    let d2 = rng.gen_range(2_000..=6_000u64);
                    let off = rng.gen_range(0..=400u64);
                    let t1 = fresh(8, &mut plan);
                    let t2 = fresh(8, &mut plan);
                    let a = push(&mut plan, 0, span(t, d1), Some(t1));
                    let b = push(&mut plan, 1, span(t + off, d2), Some(t2));
                    plan.roles.push(Role::Decoy(a, b));
                    zone_end = (t + d1).max(t + off + d2);
                    t = zone_end + rng.gen_range(1_000..=2_000u64);
                }
                zone_end + DECOY_ISOLATION_MS
            }
            Unit::Unrecognized => {
                let track = unrecognized_turn % 2;
                unrecognized_turn += 1;
                let d = rng.gen_range(1_000..=3_000u64);
                let a = push(&mut plan, track, span(cursor, d), None);
                plan.roles.push(Role::Unrecognized(a));
                cursor + d
            }
        };
        cursor = end + rng.gen_range(1_000..=2_000u64);
    }
    // Round the timeline to a whole number of frames and samples.
    let step = 1000 / gcd(1000, spec.fps as u64);
    let total = cursor + 2_000;
    plan.duration_ms = total.div_ceil(step) * step;
    plan
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Pseudo-word for vocabulary index `k`, alphabetic only.
fn word(prefix: char, mut k: usize) -> String {
    let mut s = String::from(prefix);
    loop {
        s.push((b'a' + (k % 26) as u8) as char);
        k /= 26;
        if k == 0 {
            break;
        }
    }
    s
}

/// Target-language word for index `k`; the embedding vocabulary.
pub fn target_word(k: usize) -> String {
    word('w', k)
}

/// Source-language word for index `k`.
pub fn source_word(k: usize) -> String {
    word('s', k)
}

/// Two frame tracks plus the commercial frame indices in each.
#[derive(Debug, Clone)]
pub struct FrameTracks {
    pub d1: Vec<FrameImage>,
    pub d2: Vec<FrameImage>,
    pub removed: [Vec<usize>; 2],
}

fn content_frame(pattern: &[u8], side: usize, rng: &mut ChaCha8Rng) -> FrameImage {
    let cell = side / CELLS;
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let base = pattern[(y / cell) * CELLS + x / cell] as i32;
            let v = base + rng.gen_range(-FRAME_NOISE..=FRAME_NOISE);
            pixels.push(v.clamp(0, 255) as u8);
        }
    }
    FrameImage::new(side, side, pixels).expect("valid frame size")
}

fn commercial_frame(side: usize, rng: &mut ChaCha8Rng) -> FrameImage {
    let pixels = (0..side * side).map(|_| rng.gen::<u8>()).collect();
    FrameImage::new(side, side, pixels).expect("valid frame size")
}

/// Block-pattern content frames shared by both tracks (each with its own
/// noise) and commercial noise frames injected per `spec.blocks`.
pub fn synth_frame_tracks(
    spec: &SynthSpec,
    clean_frames: usize,
) -> Result<FrameTracks, SynthError> {
    spec.validate()?;
    for b in &spec.blocks {
        if b.at_frame > clean_frames {
            return Err(SynthError::Spec(format!(
                "block at frame {} lies past the {clean_frames}-frame timeline",
                b.at_frame
            )));
        }
    }
    let scenes = clean_frames.div_ceil(spec.scene_frames);
    let mut rng = stream(spec.seed, 2);
    let patterns: Vec<Vec<u8>> = (0..scenes)
        .map(|_| (0..CELLS * CELLS).map(|_| rng.gen()).collect())
        .collect();
    let build = |t: usize| -> (Vec<FrameImage>, Vec<usize>) {
        let track = if t == 0 { TrackId::d1() } else { TrackId::d2() };
        let mut noise = stream(spec.seed, 10 + t as u64);
        let mut ads = stream(spec.seed, 20 + t as u64);
        let mut blocks: Vec<&CommercialBlock> =
            spec.blocks.iter().filter(|b| b.track == track).collect();
        blocks.sort_by_key(|b| b.at_frame);
        let mut frames = Vec::new();
        let mut removed = Vec::new();
        let mut next = blocks.into_iter().peekable();
        for i in 0..=clean_frames {
            while let Some(b) = next.next_if(|b| b.at_frame == i) {
                for _ in 0..b.frames {
                    removed.push(frames.len());
                    frames.push(commercial_frame(spec.frame_side, &mut ads));
                }
            }
            if i < clean_frames {
                let pattern = &patterns[i / spec.scene_frames];
                frames.push(content_frame(pattern, spec.frame_side, &mut noise));
            }
        }
        (frames, removed)
    };
    let ((d1, r1), (d2, r2)) = rayon::join(|| build(0), || build(1));
    Ok(FrameTracks {
        d1,
        d2,
        removed: [r1, r2],
    })
}

fn tone_period(label: SegmentLabel) -> i64 {
    match label {
        SegmentLabel::Female => 64,
        SegmentLabel::Male => 128,
        _ => 20,
    }
}

fn triangle(n: i64, period: i64) -> i32 {
    let a = TONE_AMPLITUDE as i64;
    let p = n % period;
    let half = period / 2;
    let v = if p < half {
        -a + 4 * a * p / period
    } else {
        3 * a - 4 * a * p / period
    };
    v as i32
}

fn track_audio(spec: &SynthSpec, plan: &Plan, t: usize) -> Vec<i16> {
    let track = if t == 0 { TrackId::d1() } else { TrackId::d2() };
    let n = audio::ms_to_samples(plan.duration_ms);
    let mut rng = stream(spec.seed, 30 + t as u64);
    let mut clean: Vec<i32> = (0..n)
        .map(|_| rng.gen_range(-BACKGROUND_NOISE..=BACKGROUND_NOISE))
        .collect();
    for seg in plan.segments.iter().filter(|s| s.track == t) {
        let (a, b) = (
            audio::ms_to_samples(seg.span.start_ms()),
            audio::ms_to_samples(seg.span.end_ms()),
        );
        let period = tone_period(seg.label);
        for (k, s) in clean[a..b].iter_mut().enumerate() {
            *s += triangle(k as i64, period);
        }
    }
    let mut blocks: Vec<&CommercialBlock> =
        spec.blocks.iter().filter(|b| b.track == track).collect();
    blocks.sort_by_key(|b| b.at_frame);
    let sr = SAMPLE_RATE as usize;
    let fps = spec.fps as usize;
    let mut ads = stream(spec.seed, 40 + t as u64);
    let mut out = Vec::with_capacity(n);
    let mut from = 0usize;
    for b in blocks {
        let at = (b.at_frame * sr / fps).min(n);
        out.extend_from_slice(&clean[from..at]);
        out.extend(
            (0..b.frames * sr / fps).map(|_| ads.gen_range(-COMMERCIAL_NOISE..=COMMERCIAL_NOISE)),
        );
        from = at;
    }
    out.extend_from_slice(&clean[from..]);
    out.into_iter()
        .map(|v| v.clamp(i16::MIN as i32, i16::MAX as i32) as i16)
        .collect()
}

/// Relative input paths of a generated corpus, as written to `run.conf`.
pub const RUN_CONFIG: &str = "run.conf";
pub const TRUTH_FILE: &str = "truth.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes a complete synthetic corpus into `out_dir` and returns its ground truth.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<SynthTruth, SynthError> {
    spec.validate()?;
    let plan = make_plan(spec);
    let clean_frames = (plan.duration_ms * spec.fps as u64 / 1000) as usize;
    let tracks = synth_frame_tracks(spec, clean_frames)?;
    let ids = [TrackId::d1(), TrackId::d2()];

    for (t, frames) in [&tracks.d1, &tracks.d2].into_iter().enumerate() {
        let dir = out_dir.join("frames").join(ids[t].as_str());
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let entries: Vec<(usize, PathBuf)> = (0..frames.len())
            .map(|i| (i, dir.join(format!("{i:06}.y8"))))
            .collect();
        entries
            .par_iter()
            .try_for_each(|(i, path)| frames[*i].save(path))?;
        let manifest = FrameManifest {
            track: ids[t].clone(),
            fps: spec.fps,
            entries,
        };
        manifest.write(&out_dir.join("frames").join(format!("{}.manifest", ids[t])))?;
    }

    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(io_err(&audio_dir))?;
    let (a1, a2) = rayon::join(
        || track_audio(spec, &plan, 0),
        || track_audio(spec, &plan, 1),
    );
    audio::write_wav(&audio_dir.join("D1.wav"), &a1)?;
    audio::write_wav(&audio_dir.join("D2.wav"), &a2)?;

    // Segment ids follow the pipeline's numbering: speech rows in time order.
    let mut order: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (k, s) in plan.segments.iter().enumerate() {
        order[s.track].push(k);
    }
    let mut seg_id = vec![SegmentId::new(""); plan.segments.len()];
    for (t, list) in order.iter_mut().enumerate() {
        list.sort_by_key(|&k| plan.segments[k].span.start_ms());
        for (n, &k) in list.iter().enumerate() {
            seg_id[k] = SegmentId::for_track(&ids[t], n);
        }
    }

    let vad_dir = out_dir.join("vad");
    std::fs::create_dir_all(&vad_dir).map_err(io_err(&vad_dir))?;
    let mut asr_rows = Vec::new();
    let mut mt_rows = Vec::new();
    for (t, list) in order.iter().enumerate() {
        let mut rows = Vec::new();
        let mut cursor = 0u64;
        for &k in list {
            let s = &plan.segments[k];
            if s.span.start_ms() > cursor {
                rows.push((
                    SegmentLabel::NoEnergy,
                    TimeSpan::new(cursor, s.span.start_ms()).expect("gap"),
                ));
            }
            rows.push((s.label, s.span));
            cursor = s.span.end_ms();
            let hash = span_hash(&ids[t], s.span);
            let words = |f: fn(usize) -> String| {
                s.tokens
                    .as_ref()
                    .map(|ts| ts.iter().map(|&k| f(k)).collect::<Vec<_>>().join(" "))
            };
            let text = if t == 0 {
                words(source_word)
            } else {
                words(target_word)
            };
            if let (0, Some(src), Some(tgt)) = (t, &text, words(target_word)) {
                mt_rows.push(MtTableRow {
                    span_hash: hash.clone(),
                    source: src.clone(),
                    target: tgt,
                });
            }
            asr_rows.push(AsrTableRow {
                track: ids[t].clone(),
                span_hash: hash,
                start_ms: s.span.start_ms(),
                end_ms: s.span.end_ms(),
                text,
            });
        }
        if cursor < plan.duration_ms {
            rows.push((
                SegmentLabel::NoEnergy,
                TimeSpan::new(cursor, plan.duration_ms).expect("tail"),
            ));
        }
        let report = VadReport {
            track: ids[t].clone(),
            segments: rows,
            degraded: false,
        };
        let path = vad_dir.join(format!("{}.tsv", ids[t]));
        std::fs::write(&path, report.to_tsv()).map_err(io_err(&path))?;
    }
    let asr_path = out_dir.join("asr.jsonl");
    write_jsonl(&asr_path, &asr_rows).map_err(io_err(&asr_path))?;
    let mt_path = out_dir.join("mt.jsonl");
    write_jsonl(&mt_path, &mt_rows).map_err(io_err(&mt_path))?;

    let emb_path = out_dir.join("embeddings.vec");
    let mut emb = format!("{} {}\n", plan.vocab, plan.vocab);
    for k in 0..plan.vocab {
        emb.push_str(&target_word(k));
        for j in 0..plan.vocab {
            emb.push_str(if j == k { " 1" } else { " 0" });
        }
        emb.push('\n');
    }
    std::fs::write(&emb_path, emb).map_err(io_err(&emb_path))?;

    let mut conf = String::new();
    let _ = writeln!(conf, "frames.fps = {}", spec.fps);
    let entries = [
        ("input.frames_d1", "frames/D1.manifest".to_string()),
        ("input.frames_d2", "frames/D2.manifest".to_string()),
        ("input.audio_d1", "audio/D1.wav".to_string()),
        ("input.audio_d2", "audio/D2.wav".to_string()),
        ("input.vad_d1", "vad/D1.tsv".to_string()),
        ("input.vad_d2", "vad/D2.tsv".to_string()),
        ("input.embeddings", "embeddings.vec".to_string()),
        ("input.language_d1", spec.languages[0].clone()),
        ("input.language_d2", spec.languages[1].clone()),
        ("provider.asr", "file:asr.jsonl".to_string()),
        ("provider.mt", "file:mt.jsonl".to_string()),
    ];
    for (k, v) in entries {
        let _ = writeln!(conf, "{k} = {v}");
    }
    let conf_path = out_dir.join(RUN_CONFIG);
    std::fs::write(&conf_path, conf).map_err(io_err(&conf_path))?;

    let ids_of = |v: &[usize]| v.iter().map(|&k| seg_id[k].clone()).collect::<Vec<_>>();
    let mut pairs = Vec::new();
    let mut decoys = Vec::new();
    let mut unrecognized = Vec::new();
    for role in &plan.roles {
        match role {
            Role::Pair(kind, l, r) => pairs.push(TruthPair {
                kind: *kind,
                left: ids_of(l),
                right: ids_of(r),
            }),
            Role::Decoy(a, b) => decoys.extend([seg_id[*a].clone(), seg_id[*b].clone()]),
            Role::Unrecognized(a) => unrecognized.push(seg_id[*a].clone()),
        }
    }
    pairs.sort_by(|a, b| a.left.cmp(&b.left));
    decoys.sort();
    unrecognized.sort();
    let truth = SynthTruth {
        seed: spec.seed,
        fps: spec.fps,
        clean_frames,
        clean_duration_ms: plan.duration_ms,
        removed_frames: ids.iter().cloned().zip(tracks.removed).collect(),
        pairs,
        decoys,
        unrecognized,
    };
    let truth_path = out_dir.join(TRUTH_FILE);
    let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    std::fs::write(&truth_path, json + "\n").map_err(io_err(&truth_path))?;
    Ok(truth)
}

pub fn read_truth(path: &Path) -> Result<SynthTruth, SynthError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SynthError::Spec(format!("{}: {e}", path.display())))
}
