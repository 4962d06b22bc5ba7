//! Seeded inputs for the hot-path benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dubcorpus_core::frames::{FrameImage, FrameSequence};
use dubcorpus_core::similarity::EmbeddingTable;
use dubcorpus_core::synth::{synth_frame_tracks, CommercialBlock, SynthSpec};
use dubcorpus_core::{SegmentId, SegmentLabel, SpeechSegment, TimeSpan, TrackId, Transcript};

pub const VOCAB: usize = 500;
pub const DIM: usize = 64;

pub fn noise_frame(seed: u64, side: usize) -> FrameImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FrameImage::new(side, side, (0..side * side).map(|_| rng.gen()).collect()).expect("valid side")
}

/// Two frame sequences of `clean` shared frames, with a 90-frame block in D2.
pub fn frame_pair(clean: usize) -> (FrameSequence, FrameSequence) {
    let mut spec = SynthSpec::standard(1);
    spec.blocks = vec![CommercialBlock {
        track: TrackId::d2(),
        at_frame: clean / 2,
        frames: 90,
    }];
    let tracks = synth_frame_tracks(&spec, clean).expect("valid spec");
    (
        FrameSequence::from_images(TrackId::d1(), spec.fps, &tracks.d1).expect("frames"),
        FrameSequence::from_images(TrackId::d2(), spec.fps, &tracks.d2).expect("frames"),
    )
}

pub fn word(k: usize) -> String {
    format!("w{}", char::from(b'a' + (k % 26) as u8)).repeat(1 + k / 26)
}

pub fn embeddings(seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingTable::from_vectors(
        DIM,
        (0..VOCAB).map(|k| {
            (
                word(k),
                (0..DIM).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            )
        }),
    )
    .expect("non-empty table")
}

/// `n` consecutive segments of 1 to 6 s with 6-word texts.
pub fn track(seed: u64, track: TrackId, n: usize) -> Vec<SpeechSegment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0u64;
    (0..n)
        .map(|k| {
            let dur = rng.gen_range(1000..=6000u64);
            let span = TimeSpan::new(t, t + dur).expect("positive span");
            t += dur + rng.gen_range(100..=1500u64);
            let text: Vec<String> = (0..6).map(|_| word(rng.gen_range(0..VOCAB))).collect();
            SpeechSegment {
                id: SegmentId::for_track(&track, k),
                track: track.clone(),
                span,
                label: if rng.gen_bool(0.5) {
                    SegmentLabel::Female
                } else {
                    SegmentLabel::Male
                },
                transcript: Transcript::Text(text.join(" ")),
                translation: None,
                language: "xx".into(),
            }
        })
        .collect()
}
