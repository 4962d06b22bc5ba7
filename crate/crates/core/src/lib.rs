pub mod audio;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod frames;
pub mod matcher;
pub mod model;
pub mod pipeline;
pub mod similarity;
pub mod synth;
pub mod text;
pub mod vad;

pub use config::{ConfigError, PipelineConfig};
pub use corpus::{CorpusStats, PairManifestEntry};
pub use eval::{Rating, RatingStore, Score};
pub use frames::{FrameImage, RemovalMask};
pub use matcher::{MatchOutcome, PairKind, SegmentPair};
pub use model::{SegmentId, SegmentLabel, SpeechSegment, TimeSpan, TrackId, Transcript};
pub use pipeline::{Pipeline, PipelineError, RunConfig, Stage, StageStatus};
pub use similarity::{EmbeddingTable, SimilarityMatrix};
