//! Seizure-prediction pipeline for scalp EEG.
//!
//! The crate covers the full workflow: EDF ingest with bipolar montage and
//! low-pass filtering, continuous-wavelet tensor construction, a small
//! convolutional classifier trained from scratch with Adadelta and early
//! stopping, smoothed alarm generation, and the statistical validation
//! suite (random-predictor bounds, KL-divergence change-point analysis,
//! SVD conditioning metrics). A seeded synthetic generator provides
//! desk-scale recordings with known regime boundaries.
//!
//! Everything is deterministic for a fixed seed. All randomness flows
//! through [`rand_chacha::ChaCha8Rng`] streams derived from caller seeds.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod network;
pub mod predictor;
pub mod synth;
pub mod wavelet;

pub use dataset::{Label, LabeledEpoch, PipelineConfig};
pub use error::{PipelineError, Result};
pub use evaluation::{EvaluationReport, RandomPredictorBounds, RandomPredictorParams};
pub use ingest::{EegRecording, MontageSpec};
pub use network::{LayerPlan, NetworkParameters, TrainConfig};
pub use predictor::{PredictionTrace, RecordingScore};
pub use synth::SynthSpec;
pub use wavelet::WaveletTensor;
